//! Scalable fairness-sensitive PageRank via restarted GMRES.
//!
//! The stationary equation `p = nu v + (1 - nu) Phat' p` is the sparse
//! linear system
//!
//! ```text
//!     [I - (1 - nu) Phat'] x = nu v
//! ```
//!
//! solved here with restarted GMRES (Arnoldi with modified Gram-Schmidt and
//! Givens-rotation least squares). Each inner iteration costs exactly one
//! sparse matrix-vector product; the dangling patch enters the product as a
//! rank-one correction, never a dense row.
//!
//! [`fair_gmres`] wraps the solver in an outer loop over the one-parameter
//! jump family
//!
//! ```text
//!     v(theta) = theta * uniform(protected) + (1 - theta) * uniform(unprotected)
//! ```
//!
//! Scores are linear in the jump vector, so the protected mass is affine in
//! `theta`: two solves pin the line, a third lands on the target, and a
//! bisection fallback guards round-off.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::exact::{validate_distribution, WalkKernel};
use crate::graph::{DirectedGraph, Group, GroupAssignment};
use crate::score::{FairnessSpec, ScoreVector, SolverReport};

/// Restarted-GMRES parameters plus the outer fairness tolerance.
#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    /// Krylov basis size before a restart.
    pub restart_dim: usize,
    /// Relative residual target for each linear solve.
    pub tol: f64,
    /// Cap on restart cycles per solve.
    pub max_outer: usize,
    /// `|achieved - target|` bound for the outer fairness loop.
    pub fairness_tol: f64,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            restart_dim: 50,
            tol: 1e-10,
            max_outer: 100,
            fairness_tol: 1e-8,
        }
    }
}

impl KrylovConfig {
    fn validate(&self) -> Result<()> {
        if self.restart_dim == 0 {
            return Err(Error::InvalidParameter(
                "restart dimension must be at least 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidParameter(
                "restart cycle cap must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Total score mass on protected nodes.
pub fn protected_mass(scores: &[f64], groups: &GroupAssignment) -> f64 {
    assert_eq!(scores.len(), groups.node_count());
    scores
        .iter()
        .enumerate()
        .filter(|&(i, _)| groups.is_protected(i))
        .map(|(_, &p)| p)
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

/// Solves the fair PageRank system for an arbitrary jump distribution and
/// normalizes the solution to total mass 1.
pub fn gmres_solve(
    graph: &DirectedGraph,
    spec: &FairnessSpec,
    jump: &[f64],
    cfg: &KrylovConfig,
) -> Result<(ScoreVector, SolverReport)> {
    let n = graph.node_count();
    validate_distribution(jump, n)?;
    cfg.validate()?;
    let start = Instant::now();

    let nu = spec.nu();
    let follow = 1.0 - nu;
    let kernel = WalkKernel::new(graph);
    let mut scratch = vec![0.0; n];

    let b: Vec<f64> = jump.iter().map(|&v| nu * v).collect();
    let b_norm = norm2(&b);
    let m = cfg.restart_dim.min(n);

    // The exact solution has total mass 1, so the jump itself is a natural
    // initial guess (and exact when nu = 1).
    let mut x = jump.to_vec();
    let mut matvecs = 0usize;
    let mut inner_total = 0usize;
    let mut history: Vec<f64> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h_cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut cos: Vec<f64> = Vec::with_capacity(m);
    let mut sin: Vec<f64> = Vec::with_capacity(m);

    for cycle in 0..cfg.max_outer {
        // True residual; also verifies the previous cycle's least-squares
        // update before we report convergence.
        kernel.apply(graph, &x, &mut scratch);
        matvecs += 1;
        let mut r = vec![0.0; n];
        for i in 0..n {
            r[i] = b[i] - (x[i] - follow * scratch[i]);
        }
        let beta = norm2(&r);
        let rel = beta / b_norm;
        history.push(rel);
        if rel <= cfg.tol {
            let mut report = SolverReport {
                outer_iterations: cycle,
                inner_iterations_total: inner_total,
                final_residual: rel,
                achieved_protected_mass: None,
                wall_time_seconds: 0.0,
                matvec_count: matvecs,
                residual_history: history,
            };
            report.set_wall_time(start.elapsed());
            return Ok((ScoreVector::from_unnormalized(x)?, report));
        }

        basis.clear();
        h_cols.clear();
        cos.clear();
        sin.clear();
        basis.push(r.iter().map(|&v| v / beta).collect());
        let mut g = vec![0.0; m + 1];
        g[0] = beta;

        let mut used = 0usize;
        for j in 0..m {
            // w = A v_j: the single sparse product of this inner iteration.
            kernel.apply(graph, &basis[j], &mut scratch);
            matvecs += 1;
            inner_total += 1;
            let mut w: Vec<f64> = basis[j]
                .iter()
                .zip(&scratch)
                .map(|(&vj, &tv)| vj - follow * tv)
                .collect();

            let norm_before = norm2(&w);
            let mut h_col = vec![0.0; j + 2];
            for (i, v_i) in basis.iter().enumerate() {
                let hij = dot(&w, v_i);
                h_col[i] = hij;
                for (wk, vk) in w.iter_mut().zip(v_i) {
                    *wk -= hij * vk;
                }
            }
            // Severe cancellation: run one reorthogonalization pass.
            if norm2(&w) < 1e-8 * norm_before {
                for (i, v_i) in basis.iter().enumerate() {
                    let correction = dot(&w, v_i);
                    h_col[i] += correction;
                    for (wk, vk) in w.iter_mut().zip(v_i) {
                        *wk -= correction * vk;
                    }
                }
            }
            let h_next = norm2(&w);
            h_col[j + 1] = h_next;

            for i in 0..j {
                let (c, s) = (cos[i], sin[i]);
                let hi = h_col[i];
                let hi1 = h_col[i + 1];
                h_col[i] = c * hi + s * hi1;
                h_col[i + 1] = -s * hi + c * hi1;
            }
            let (c, s) = givens(h_col[j], h_col[j + 1]);
            cos.push(c);
            sin.push(s);
            h_col[j] = c * h_col[j] + s * h_col[j + 1];
            h_col[j + 1] = 0.0;
            let gj = g[j];
            g[j] = c * gj;
            g[j + 1] = -s * gj;
            h_cols.push(h_col);
            used = j + 1;

            let rel_inner = g[j + 1].abs() / b_norm;
            history.push(rel_inner);
            // Happy breakdown: the Krylov space closed, the least-squares
            // solution is exact.
            let breakdown = h_next <= 1e-14 * norm_before.max(f64::MIN_POSITIVE);
            if rel_inner <= cfg.tol || breakdown {
                break;
            }
            basis.push(w.iter().map(|&v| v / h_next).collect());
        }

        // y = R^-1 g restricted to the rotated upper triangle, then
        // x += V y. The next cycle re-measures the true residual.
        let mut y = vec![0.0; used];
        for i in (0..used).rev() {
            let mut s = g[i];
            for (jj, y_jj) in y.iter().enumerate().skip(i + 1) {
                s -= h_cols[jj][i] * y_jj;
            }
            let d = h_cols[i][i];
            y[i] = if d != 0.0 { s / d } else { 0.0 };
        }
        for (jj, y_jj) in y.iter().enumerate() {
            for (xi, vi) in x.iter_mut().zip(&basis[jj]) {
                *xi += y_jj * vi;
            }
        }
    }

    Err(Error::NoConvergence {
        iterations: inner_total,
        residual: *history.last().unwrap_or(&f64::INFINITY),
        history,
    })
}

/// Uniform distribution over one group; over all nodes when the group is
/// empty (only then is the fallback reachable, and the blend's protected
/// mass is constant in that case).
fn group_uniform(groups: &GroupAssignment, group: Group) -> Vec<f64> {
    let n = groups.node_count();
    let size = groups.group_size(group);
    if size == 0 {
        return vec![1.0 / n as f64; n];
    }
    let share = 1.0 / size as f64;
    (0..n)
        .map(|u| if groups.label(u) == group { share } else { 0.0 })
        .collect()
}

/// Running totals over the outer loop's linear solves.
#[derive(Default)]
struct OuterTally {
    solves: usize,
    inner: usize,
    matvecs: usize,
}

struct OuterSolve {
    scores: ScoreVector,
    mass: f64,
    residual: f64,
    history: Vec<f64>,
}

fn outer_solve(
    graph: &DirectedGraph,
    groups: &GroupAssignment,
    spec: &FairnessSpec,
    cfg: &KrylovConfig,
    jump: &[f64],
    tally: &mut OuterTally,
) -> Result<OuterSolve> {
    let (scores, report) = gmres_solve(graph, spec, jump, cfg)?;
    tally.solves += 1;
    tally.inner += report.inner_iterations_total;
    tally.matvecs += report.matvec_count;
    let mass = protected_mass(&scores, groups);
    Ok(OuterSolve {
        scores,
        mass,
        residual: report.final_residual,
        history: report.residual_history,
    })
}

fn outer_report(solve: &OuterSolve, tally: &OuterTally, start: Instant) -> SolverReport {
    let mut report = SolverReport {
        outer_iterations: tally.solves,
        inner_iterations_total: tally.inner,
        final_residual: solve.residual,
        achieved_protected_mass: Some(solve.mass),
        wall_time_seconds: 0.0,
        matvec_count: tally.matvecs,
        residual_history: solve.history.clone(),
    };
    report.set_wall_time(start.elapsed());
    report
}

/// Fairness-sensitive PageRank via the parametric jump family.
///
/// Returns the fair scores, the jump vector used, and a report whose outer
/// iteration count is the number of linear solves.
pub fn fair_gmres(
    graph: &DirectedGraph,
    groups: &GroupAssignment,
    spec: &FairnessSpec,
    cfg: &KrylovConfig,
) -> Result<(ScoreVector, Vec<f64>, SolverReport)> {
    let start = Instant::now();
    let n = graph.node_count();
    let target = spec.target_for(groups);

    let jump_unprotected = group_uniform(groups, Group::Unprotected);
    let jump_protected = group_uniform(groups, Group::Protected);
    let blend = |theta: f64| -> Vec<f64> {
        (0..n)
            .map(|i| theta * jump_protected[i] + (1.0 - theta) * jump_unprotected[i])
            .collect()
    };

    let mut tally = OuterTally::default();
    let s0 = outer_solve(graph, groups, spec, cfg, &jump_unprotected, &mut tally)?;
    if (s0.mass - target).abs() <= cfg.fairness_tol {
        let report = outer_report(&s0, &tally, start);
        return Ok((s0.scores, jump_unprotected, report));
    }
    let m0 = s0.mass;

    let s1 = outer_solve(graph, groups, spec, cfg, &jump_protected, &mut tally)?;
    let m1 = s1.mass;
    let lo = m0.min(m1);
    let hi = m0.max(m1);
    if (m1 - m0).abs() < 1e-14 {
        if (m1 - target).abs() <= cfg.fairness_tol {
            let report = outer_report(&s1, &tally, start);
            return Ok((s1.scores, jump_protected, report));
        }
        return Err(Error::Infeasible {
            target,
            min: lo,
            max: hi,
        });
    }
    if target < lo - cfg.fairness_tol || target > hi + cfg.fairness_tol {
        return Err(Error::Infeasible {
            target,
            min: lo,
            max: hi,
        });
    }

    // The mass is affine in theta; one confirming solve normally suffices.
    let theta_star = ((target - m0) / (m1 - m0)).clamp(0.0, 1.0);
    let jump = blend(theta_star);
    let s = outer_solve(graph, groups, spec, cfg, &jump, &mut tally)?;
    if (s.mass - target).abs() <= cfg.fairness_tol {
        let report = outer_report(&s, &tally, start);
        return Ok((s.scores, jump, report));
    }

    // Round-off pushed the confirmed mass outside the tolerance; bisect on
    // theta (the mass is monotone along the segment).
    let mut last_mass = s.mass;
    let mut last_history = s.history;
    let (mut t_lo, mut t_hi) = if m0 <= m1 { (0.0, 1.0) } else { (1.0, 0.0) };
    for _ in 0..64 {
        let mid = 0.5 * (t_lo + t_hi);
        let jump_mid = blend(mid);
        let s_mid = outer_solve(graph, groups, spec, cfg, &jump_mid, &mut tally)?;
        if (s_mid.mass - target).abs() <= cfg.fairness_tol {
            let report = outer_report(&s_mid, &tally, start);
            return Ok((s_mid.scores, jump_mid, report));
        }
        if s_mid.mass < target {
            t_lo = mid;
        } else {
            t_hi = mid;
        }
        last_mass = s_mid.mass;
        last_history = s_mid.history;
    }
    Err(Error::NoConvergence {
        iterations: tally.solves,
        residual: (last_mass - target).abs(),
        history: last_history,
    })
}
