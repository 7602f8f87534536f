//! Score vectors, fairness parameters, and solver run reports.

use std::ops::Deref;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::graph::GroupAssignment;

/// Tolerance on `Σ scores = 1` for a valid [`ScoreVector`].
pub const SCORE_SUM_TOL: f64 = 1e-10;

/// Round-off slack below zero tolerated (and clamped) on entries.
const NEG_CLAMP: f64 = 1e-12;

/// Length-N probability mass per node: entries nonnegative, summing to 1
/// within [`SCORE_SUM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    /// Validates an already-normalized vector.
    pub fn new(scores: Vec<f64>) -> Result<Self> {
        let mut scores = scores;
        Self::clamp_entries(&mut scores)?;
        let sum: f64 = scores.iter().sum();
        if (sum - 1.0).abs() > SCORE_SUM_TOL {
            return Err(Error::InvalidScores(format!(
                "scores sum to {sum}, expected 1 within {SCORE_SUM_TOL:.0e}"
            )));
        }
        Ok(ScoreVector(scores))
    }

    /// Normalizes a nonnegative mass vector to sum 1. Entries slightly below
    /// zero (round-off) are clamped; anything more negative is an error, as
    /// is a vector without positive mass.
    pub fn from_unnormalized(raw: Vec<f64>) -> Result<Self> {
        let mut raw = raw;
        Self::clamp_entries(&mut raw)?;
        let sum: f64 = raw.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidScores(format!(
                "total mass {sum} is not positive"
            )));
        }
        for x in &mut raw {
            *x /= sum;
        }
        Ok(ScoreVector(raw))
    }

    fn clamp_entries(scores: &mut [f64]) -> Result<()> {
        for (i, x) in scores.iter_mut().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidScores(format!("entry {i} is {x}")));
            }
            if *x < 0.0 {
                if *x < -NEG_CLAMP {
                    return Err(Error::InvalidScores(format!(
                        "entry {i} is negative ({x:.3e})"
                    )));
                }
                *x = 0.0;
            }
        }
        Ok(())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Teleport probability and the protected-mass target.
///
/// The target defaults to the protected node fraction `phi` of whatever
/// group assignment the solver is given.
#[derive(Debug, Clone, Copy)]
pub struct FairnessSpec {
    nu: f64,
    target: Option<f64>,
}

impl FairnessSpec {
    /// `nu` is the teleport probability, in (0, 1].
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "teleport probability must be in (0, 1], got {nu}"
            )));
        }
        Ok(FairnessSpec { nu, target: None })
    }

    /// Sets an explicit protected-mass target in (0, 1).
    pub fn with_target(mut self, target: f64) -> Result<Self> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "protected-mass target must be in (0, 1), got {target}"
            )));
        }
        self.target = Some(target);
        Ok(self)
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn explicit_target(&self) -> Option<f64> {
        self.target
    }

    /// The protected-mass target: the explicit one if set, else `phi`.
    pub fn target_for(&self, groups: &GroupAssignment) -> f64 {
        self.target.unwrap_or_else(|| groups.phi())
    }
}

impl Default for FairnessSpec {
    fn default() -> Self {
        FairnessSpec {
            nu: 0.15,
            target: None,
        }
    }
}

/// What a solver run did: iteration counts, residuals, timing, and the
/// protected mass it achieved (when a group assignment was in play).
#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Sweeps for power iteration, restart cycles for GMRES, projected
    /// gradient steps for the exact optimizer, outer solves for the
    /// fairness loop.
    pub outer_iterations: usize,
    /// Krylov (Arnoldi) steps summed over all cycles; 0 for non-Krylov runs.
    pub inner_iterations_total: usize,
    pub final_residual: f64,
    pub achieved_protected_mass: Option<f64>,
    pub wall_time_seconds: f64,
    /// Sparse matrix-vector products performed (Krylov solvers only).
    pub matvec_count: usize,
    /// Residual per iteration, oldest first.
    pub residual_history: Vec<f64>,
}

impl SolverReport {
    pub(crate) fn set_wall_time(&mut self, elapsed: Duration) {
        self.wall_time_seconds = elapsed.as_secs_f64();
    }
}
