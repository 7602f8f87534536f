//! Exact fairness-sensitive PageRank on small graphs.
//!
//! The random walk follows an out-edge with probability `1 - nu` and
//! teleports according to the jump distribution `v` with probability `nu`.
//! Walkers on dangling nodes (out-degree 0) are spread uniformly over all
//! nodes. The stationary scores solve
//!
//! ```text
//!     p = nu * v + (1 - nu) * Phat' p
//! ```
//!
//! with `Phat` the row-stochastic transition matrix after the dangling
//! patch. Three routes to the solution live here:
//!
//! * [`pagerank_power`]: fixed-point iteration on the equation above;
//! * [`build_resolvent`]: the dense operator
//!   `Q = nu [I - (1 - nu) Phat]^-1`, which maps any jump distribution to
//!   its stationary scores as `p = Q' v` and whose rows each sum to 1;
//! * [`exact_fspr`]: the constrained optimizer; among jump distributions
//!   whose scores give the protected group a target share of the total
//!   mass, find the one whose scores deviate least (squared L2) from the
//!   uniform-jump PageRank.
//!
//! The optimizer runs accelerated projected gradient descent, with the
//! feasible set handled by Dykstra-style alternation between the
//! probability simplex and the fairness hyperplane.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, GroupAssignment};
use crate::score::{FairnessSpec, ScoreVector, SolverReport};

/// Largest node count the dense routines accept by default. Past this the
/// `N x N` resolvent is the wrong tool; callers get
/// [`Error::GraphTooLargeForDense`] and should switch to the Krylov path.
pub const DEFAULT_DENSE_CAP: usize = 5000;

/// Projected-gradient fixed-point tolerance for [`exact_fspr`].
pub const QP_KKT_TOL: f64 = 1e-10;

/// Iteration cap for [`exact_fspr`].
pub const QP_MAX_ITERS: usize = 100_000;

/// Precomputed pieces of the patched transition operator.
pub(crate) struct WalkKernel {
    /// `1 / k_out(u)`, or 0 for dangling nodes.
    inv_out: Vec<f64>,
    dangling: Vec<u32>,
}

impl WalkKernel {
    pub(crate) fn new(graph: &DirectedGraph) -> Self {
        let n = graph.node_count();
        let mut inv_out = vec![0.0; n];
        let mut dangling = Vec::new();
        for u in 0..n {
            let d = graph.out_degree(u);
            if d == 0 {
                dangling.push(u as u32);
            } else {
                inv_out[u] = 1.0 / d as f64;
            }
        }
        WalkKernel { inv_out, dangling }
    }

    /// `y = Phat' x`: one pass over the reverse adjacency plus a rank-one
    /// dangling correction. Conserves the total mass of nonnegative `x`.
    pub(crate) fn apply(&self, graph: &DirectedGraph, x: &[f64], y: &mut [f64]) {
        let n = graph.node_count();
        let dangling_mass: f64 = self.dangling.iter().map(|&u| x[u as usize]).sum();
        let base = dangling_mass / n as f64;
        for (i, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &j in graph.in_neighbors(i) {
                acc += x[j as usize] * self.inv_out[j as usize];
            }
            *out = acc + base;
        }
    }
}

pub(crate) fn validate_distribution(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let mut sum = 0.0;
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() || v < -1e-12 {
            return Err(Error::InvalidScores(format!(
                "jump entry {i} is {v}, expected nonnegative"
            )));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidScores(format!(
            "jump vector sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Applies the patched transition operator `Phat'` to `x`: the random-walk
/// inflow per node plus the uniform share of dangling mass.
pub fn transition_apply(graph: &DirectedGraph, x: &[f64]) -> Result<Vec<f64>> {
    let n = graph.node_count();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let kernel = WalkKernel::new(graph);
    let mut y = vec![0.0; n];
    kernel.apply(graph, x, &mut y);
    Ok(y)
}

/// PageRank by power iteration with an arbitrary jump distribution.
///
/// Stops once the L1 fixed-point residual drops to `tol`; the returned
/// vector then satisfies the residual bound itself, since one extra sweep
/// only contracts it further.
pub fn pagerank_power(
    graph: &DirectedGraph,
    spec: &FairnessSpec,
    jump: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(ScoreVector, SolverReport)> {
    let n = graph.node_count();
    validate_distribution(jump, n)?;
    let start = Instant::now();
    let nu = spec.nu();
    let kernel = WalkKernel::new(graph);
    let mut p = jump.to_vec();
    let mut y = vec![0.0; n];
    let mut history = Vec::new();
    for iter in 1..=max_iters {
        kernel.apply(graph, &p, &mut y);
        let mut residual = 0.0;
        for i in 0..n {
            let next = nu * jump[i] + (1.0 - nu) * y[i];
            residual += (next - p[i]).abs();
            p[i] = next;
        }
        history.push(residual);
        if residual <= tol {
            let mut report = SolverReport {
                outer_iterations: iter,
                inner_iterations_total: 0,
                final_residual: residual,
                achieved_protected_mass: None,
                wall_time_seconds: 0.0,
                matvec_count: iter,
                residual_history: history,
            };
            report.set_wall_time(start.elapsed());
            return Ok((ScoreVector::from_unnormalized(p)?, report));
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        residual: *history.last().unwrap_or(&f64::INFINITY),
        history,
    })
}

/// Dense PageRank operator `Q = nu [I - (1 - nu) Phat]^-1`, row-major.
///
/// Row `j` of `Q` is the stationary score vector for the point jump at `j`,
/// so every row sums to 1 and `p = Q' v` for any jump distribution `v`.
#[derive(Debug, Clone)]
pub struct DenseResolvent {
    n: usize,
    q: Vec<f64>,
}

impl DenseResolvent {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    /// `Q x` (row dot products).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// `Q' x`: scores induced by the jump distribution `x`.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let xi = x[i];
            if xi != 0.0 {
                for (o, &qij) in out.iter_mut().zip(self.row(i)) {
                    *o += xi * qij;
                }
            }
        }
        out
    }
}

/// Builds the dense resolvent by LU-factorizing `I - (1 - nu) Phat` and
/// solving against the identity columns.
pub fn build_resolvent(
    graph: &DirectedGraph,
    spec: &FairnessSpec,
    dense_cap: usize,
) -> Result<DenseResolvent> {
    let n = graph.node_count();
    if n > dense_cap {
        return Err(Error::GraphTooLargeForDense {
            nodes: n,
            cap: dense_cap,
        });
    }
    let nu = spec.nu();
    let follow = 1.0 - nu;

    // A = I - (1 - nu) * Phat, row-major.
    let mut a = vec![0.0f64; n * n];
    let uniform = follow / n as f64;
    for u in 0..n {
        let row = &mut a[u * n..(u + 1) * n];
        let d = graph.out_degree(u);
        if d == 0 {
            for entry in row.iter_mut() {
                *entry = -uniform;
            }
        } else {
            let w = follow / d as f64;
            for &t in graph.out_neighbors(u) {
                row[t as usize] -= w;
            }
        }
        row[u] += 1.0;
    }

    let pivots = lu_factor(&mut a, n)?;
    let mut q = vec![0.0f64; n * n];
    let mut col = vec![0.0f64; n];
    for j in 0..n {
        col.fill(0.0);
        col[j] = 1.0;
        lu_solve(&a, &pivots, n, &mut col);
        for i in 0..n {
            q[i * n + j] = nu * col[i];
        }
    }
    Ok(DenseResolvent { n, q })
}

/// In-place LU factorization with partial pivoting. `pivots[k]` records the
/// row swapped into position `k`.
fn lu_factor(a: &mut [f64], n: usize) -> Result<Vec<usize>> {
    let mut pivots = vec![0usize; n];
    for k in 0..n {
        let mut best = a[k * n + k].abs();
        let mut best_row = k;
        for i in k + 1..n {
            let v = a[i * n + k].abs();
            if v > best {
                best = v;
                best_row = i;
            }
        }
        if best < 1e-300 {
            return Err(Error::SingularSystem);
        }
        pivots[k] = best_row;
        if best_row != k {
            for j in 0..n {
                a.swap(k * n + j, best_row * n + j);
            }
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let m = a[i * n + k] / pivot;
            a[i * n + k] = m;
            if m != 0.0 {
                let (upper, lower) = a.split_at_mut(i * n);
                let src = &upper[k * n + k + 1..k * n + n];
                let dst = &mut lower[k + 1..n];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d -= m * s;
                }
            }
        }
    }
    Ok(pivots)
}

fn lu_solve(a: &[f64], pivots: &[usize], n: usize, b: &mut [f64]) {
    for k in 0..n {
        if pivots[k] != k {
            b.swap(k, pivots[k]);
        }
    }
    for i in 1..n {
        let mut s = b[i];
        for j in 0..i {
            s -= a[i * n + j] * b[j];
        }
        b[i] = s;
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i * n + j] * b[j];
        }
        b[i] = s / a[i * n + i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Per-source protected reach: entry `j` is the protected mass of the
/// scores produced by the point jump at `j` (row `j` of `Q` summed over
/// protected columns).
fn protected_reach(q: &DenseResolvent, groups: &GroupAssignment) -> Vec<f64> {
    let n = q.dim();
    let mut reach = vec![0.0; n];
    for j in 0..n {
        let row = q.row(j);
        let mut acc = 0.0;
        for (i, &qji) in row.iter().enumerate() {
            if groups.is_protected(i) {
                acc += qji;
            }
        }
        reach[j] = acc;
    }
    reach
}

/// Range of protected mass reachable by any jump distribution: the min and
/// max of the per-source reach over the simplex vertices.
pub fn achievable_mass_range(q: &DenseResolvent, groups: &GroupAssignment) -> (f64, f64) {
    let reach = protected_reach(q, groups);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &r in &reach {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    (lo, hi)
}

/// Euclidean projection onto the probability simplex (sort-based).
fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            threshold = t;
        }
    }
    y.iter().map(|&v| (v - threshold).max(0.0)).collect()
}

const DYKSTRA_MAX_CYCLES: usize = 5000;
const DYKSTRA_TOL: f64 = 1e-15;

/// Dykstra alternation between the fairness hyperplane `a . v = b` and the
/// simplex. Ends on a simplex step, so the result is a distribution exactly
/// and meets the hyperplane to round-off.
fn project_feasible(y: &[f64], a: &[f64], b: f64, a_norm2: f64) -> Vec<f64> {
    let n = y.len();
    if a_norm2 == 0.0 {
        // Constraint is trivial (feasibility was checked upstream).
        return project_simplex(y);
    }
    let mut x = y.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for _ in 0..DYKSTRA_MAX_CYCLES {
        prev.copy_from_slice(&x);
        // Hyperplane step on x + q.
        for i in 0..n {
            tmp[i] = x[i] + q[i];
        }
        let shift = (b - dot(a, &tmp)) / a_norm2;
        for i in 0..n {
            let projected = tmp[i] + shift * a[i];
            q[i] = tmp[i] - projected;
            tmp[i] = projected;
        }
        // Simplex step on the hyperplane point + p.
        for i in 0..n {
            tmp[i] += p[i];
        }
        x = project_simplex(&tmp);
        for i in 0..n {
            p[i] = tmp[i] - x[i];
        }
        let delta = x
            .iter()
            .zip(&prev)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0f64, f64::max);
        if delta <= DYKSTRA_TOL {
            break;
        }
    }
    x
}

/// Projects an arbitrary point onto the feasible jump set of
/// [`exact_fspr`]: distributions whose induced scores give the protected
/// group exactly `target` mass.
pub fn project_feasible_jump(
    q: &DenseResolvent,
    groups: &GroupAssignment,
    target: f64,
    point: &[f64],
) -> Vec<f64> {
    let reach = protected_reach(q, groups);
    let reach_norm2 = dot(&reach, &reach);
    project_feasible(point, &reach, target, reach_norm2)
}

/// Exact fairness-sensitive PageRank.
///
/// Minimizes the squared L2 deviation of the scores `Q' v` from the
/// uniform-jump PageRank, over jump distributions `v` meeting the
/// protected-mass target. Accelerated projected gradient with gradient
/// restarts and backtracking on the step size; terminates when the
/// projected-gradient fixed-point residual falls below [`QP_KKT_TOL`].
///
/// Returns the fair scores, the optimizing jump vector, and a run report.
pub fn exact_fspr(
    graph: &DirectedGraph,
    groups: &GroupAssignment,
    spec: &FairnessSpec,
    dense_cap: usize,
) -> Result<(ScoreVector, Vec<f64>, SolverReport)> {
    let start = Instant::now();
    let n = graph.node_count();
    let q = build_resolvent(graph, spec, dense_cap)?;
    let target = spec.target_for(groups);

    let reach = protected_reach(&q, groups);
    let (lo, hi) = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &r in &reach {
            lo = lo.min(r);
            hi = hi.max(r);
        }
        (lo, hi)
    };
    if target < lo - 1e-12 || target > hi + 1e-12 {
        return Err(Error::Infeasible {
            target,
            min: lo,
            max: hi,
        });
    }
    // Round-off guard: keep the hyperplane inside the reachable interval.
    let target = target.clamp(lo, hi);
    let reach_norm2 = dot(&reach, &reach);

    let uniform = vec![1.0 / n as f64; n];
    let p_reference = q.apply_transpose(&uniform);

    let objective_residual = |v: &[f64]| -> Vec<f64> {
        let mut r = q.apply_transpose(v);
        for (ri, pi) in r.iter_mut().zip(&p_reference) {
            *ri -= pi;
        }
        r
    };
    let gradient_of = |residual: &[f64]| -> Vec<f64> {
        let mut g = q.apply(residual);
        for gi in g.iter_mut() {
            *gi *= 2.0;
        }
        g
    };

    // Step size from a power-iteration estimate of the largest eigenvalue
    // of Q Q'; backtracking below repairs any underestimate.
    let mut w = uniform.clone();
    let mut lambda = 1.0f64;
    for _ in 0..80 {
        let z = q.apply(&q.apply_transpose(&w));
        let zn = norm2(&z);
        if zn == 0.0 {
            break;
        }
        lambda = dot(&w, &z) / dot(&w, &w);
        for (wi, zi) in w.iter_mut().zip(&z) {
            *wi = zi / zn;
        }
    }
    let mut lipschitz = (2.0 * lambda).max(1e-12);

    let project = |point: &[f64]| project_feasible(point, &reach, target, reach_norm2);

    let mut v = project(&uniform);
    let mut momentum = v.clone();
    let mut t = 1.0f64;
    let mut history = Vec::new();
    let mut iterations = 0usize;

    let kkt_residual = |v: &[f64]| -> f64 {
        let r = objective_residual(v);
        let g = gradient_of(&r);
        let stepped: Vec<f64> = v.iter().zip(&g).map(|(vi, gi)| vi - gi).collect();
        let proj = project(&stepped);
        v.iter()
            .zip(&proj)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max)
    };

    // Early exit when the initial point is already stationary (e.g. the
    // target equals the unconstrained protected mass).
    let mut kkt = kkt_residual(&v);
    history.push(kkt);
    let mut converged = kkt <= QP_KKT_TOL;

    while !converged && iterations < QP_MAX_ITERS {
        iterations += 1;
        let r_y = objective_residual(&momentum);
        let f_y = dot(&r_y, &r_y);
        let grad_y = gradient_of(&r_y);

        // Backtracking: grow L until the quadratic model majorizes f.
        let mut candidate;
        loop {
            let stepped: Vec<f64> = momentum
                .iter()
                .zip(&grad_y)
                .map(|(yi, gi)| yi - gi / lipschitz)
                .collect();
            candidate = project(&stepped);
            let r_c = objective_residual(&candidate);
            let f_c = dot(&r_c, &r_c);
            let mut linear = 0.0;
            let mut sq = 0.0;
            for i in 0..n {
                let d = candidate[i] - momentum[i];
                linear += grad_y[i] * d;
                sq += d * d;
            }
            if f_c <= f_y + linear + 0.5 * lipschitz * sq + 1e-18 || lipschitz > 1e30 {
                break;
            }
            lipschitz *= 2.0;
        }

        // Gradient-based restart keeps the momentum useful on this
        // strongly convex problem.
        let mut restart_dot = 0.0;
        for i in 0..n {
            restart_dot += (momentum[i] - candidate[i]) * (candidate[i] - v[i]);
        }
        if restart_dot > 0.0 {
            t = 1.0;
            momentum.copy_from_slice(&candidate);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let coeff = (t - 1.0) / t_next;
            for i in 0..n {
                momentum[i] = candidate[i] + coeff * (candidate[i] - v[i]);
            }
            t = t_next;
        }
        let step_size = v
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        v = candidate;

        if iterations % 10 == 0 || step_size < 1e-16 {
            kkt = kkt_residual(&v);
            history.push(kkt);
            if kkt <= QP_KKT_TOL {
                converged = true;
            } else if step_size < 1e-17 && kkt <= 1e3 * QP_KKT_TOL {
                // Stalled at the floating-point floor of the projection;
                // accept only within a hair of the target tolerance.
                converged = true;
            }
        }
    }

    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual: kkt,
            history,
        });
    }

    let fair_p = ScoreVector::from_unnormalized(q.apply_transpose(&v))?;
    let achieved: f64 = fair_p
        .iter()
        .enumerate()
        .filter(|&(i, _)| groups.is_protected(i))
        .map(|(_, &p)| p)
        .sum();
    let mut report = SolverReport {
        outer_iterations: iterations,
        inner_iterations_total: 0,
        final_residual: kkt,
        achieved_protected_mass: Some(achieved),
        wall_time_seconds: 0.0,
        matvec_count: 0,
        residual_history: history,
    };
    report.set_wall_time(start.elapsed());
    Ok((fair_p, v, report))
}

/// Research variant of [`exact_fspr`] with the jump nonnegativity
/// relaxed: `v` ranges over the whole affine set `{sum v = 1,
/// reach . v = target}`, so entries may go negative and the returned
/// "scores" may too. Solved in closed form through the KKT system of the
/// equality-constrained least-squares problem.
///
/// Returns the (possibly signed) scores, the jump vector, and the achieved
/// protected mass. Useful only for quantifying what the simplex constraint
/// costs; the distribution semantics of PageRank need [`exact_fspr`].
pub fn exact_fspr_relaxed(
    graph: &DirectedGraph,
    groups: &GroupAssignment,
    spec: &FairnessSpec,
    dense_cap: usize,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = graph.node_count();
    let q = build_resolvent(graph, spec, dense_cap)?;
    let target = spec.target_for(groups);
    let reach = protected_reach(&q, groups);
    let uniform = vec![1.0 / n as f64; n];
    let p_reference = q.apply_transpose(&uniform);

    // KKT system: [2 Q Q', A'; A, 0] [v; lambda] = [2 Q p_ref; b] with
    // A = [1'; reach'].
    let dim = n + 2;
    let mut kkt = vec![0.0f64; dim * dim];
    // H = 2 Q Q' block.
    for i in 0..n {
        let row_i = q.row(i);
        for j in i..n {
            let h: f64 = 2.0 * dot(row_i, q.row(j));
            kkt[i * dim + j] = h;
            kkt[j * dim + i] = h;
        }
    }
    for j in 0..n {
        kkt[n * dim + j] = 1.0;
        kkt[j * dim + n] = 1.0;
        kkt[(n + 1) * dim + j] = reach[j];
        kkt[j * dim + n + 1] = reach[j];
    }
    let mut rhs = vec![0.0f64; dim];
    for (i, r) in rhs.iter_mut().enumerate().take(n) {
        *r = 2.0 * dot(q.row(i), &p_reference);
    }
    rhs[n] = 1.0;
    rhs[n + 1] = target;

    let pivots = lu_factor(&mut kkt, dim)?;
    lu_solve(&kkt, &pivots, dim, &mut rhs);
    let v = rhs[..n].to_vec();
    let scores = q.apply_transpose(&v);
    let achieved = dot(&reach, &v);
    Ok((scores, v, achieved))
}
