//! Shared fixtures and independent oracles for the integration suites.
//!
//! Everything here recomputes results through routes the library does not
//! use: a plain Gaussian elimination for the patched linear system, and an
//! exhaustive support-enumeration solver for the tiny constrained QP.

// Each integration target compiles this module separately and uses a
// different subset of it.
#![allow(dead_code)]
#![allow(clippy::needless_range_loop)]

use std::sync::{Mutex, MutexGuard};

use fspr::{DirectedGraph, Group, GroupAssignment};

/// Serializes the CPU-heavy suites so wall-clock assertions are not
/// perturbed by parallel test load.
pub fn timing_lock() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Small deterministic generator, independent of the library's RNG stack.
pub struct XorShift(u64);

impl XorShift {
    pub fn new(seed: u64) -> Self {
        XorShift(seed.max(1))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// Random simple digraph with roughly `edges_per_node * n` edges.
pub fn random_graph(n: usize, edges_per_node: usize, seed: u64) -> DirectedGraph {
    let mut rng = XorShift::new(seed);
    let mut edges = Vec::new();
    for u in 0..n as u32 {
        for _ in 0..edges_per_node {
            let t = rng.below(n as u64) as u32;
            if t != u {
                edges.push((u, t));
            }
        }
    }
    DirectedGraph::from_edges(n, &edges, true).unwrap()
}

/// Random two-group labeling with roughly `phi * n` protected nodes.
pub fn random_groups(graph: &DirectedGraph, phi: f64, seed: u64) -> GroupAssignment {
    let mut rng = XorShift::new(seed);
    let labels: Vec<Group> = (0..graph.node_count())
        .map(|_| {
            if rng.unit() < phi {
                Group::Protected
            } else {
                Group::Unprotected
            }
        })
        .collect();
    GroupAssignment::new(graph, labels).unwrap()
}

/// Random distribution over `n` nodes.
pub fn random_distribution(n: usize, rng: &mut XorShift) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.unit() + 1e-3).collect();
    let sum: f64 = v.iter().sum();
    for x in &mut v {
        *x /= sum;
    }
    v
}

/// Plain Gaussian elimination with partial pivoting on a dense system.
/// Panics on singular input (never the case for teleporting walks).
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let mut best = k;
        for i in k + 1..n {
            if a[i][k].abs() > a[best][k].abs() {
                best = i;
            }
        }
        assert!(a[best][k].abs() > 1e-300, "singular oracle system");
        a.swap(k, best);
        b.swap(k, best);
        let pivot = a[k][k];
        for i in k + 1..n {
            let factor = a[i][k] / pivot;
            if factor != 0.0 {
                for j in k..n {
                    a[i][j] -= factor * a[k][j];
                }
                b[i] -= factor * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    x
}

/// Dense row of the patched transition matrix `Phat[u][*]`.
fn patched_row(graph: &DirectedGraph, u: usize) -> Vec<f64> {
    let n = graph.node_count();
    let mut row = vec![0.0; n];
    let d = graph.out_degree(u);
    if d == 0 {
        row.fill(1.0 / n as f64);
    } else {
        let w = 1.0 / d as f64;
        for &t in graph.out_neighbors(u) {
            row[t as usize] += w;
        }
    }
    row
}

/// Independent stationary solve: `(I - (1 - nu) Phat') x = nu jump`,
/// normalized to total mass 1.
pub fn dense_fspr_oracle(graph: &DirectedGraph, nu: f64, jump: &[f64]) -> Vec<f64> {
    let n = graph.node_count();
    let mut a = vec![vec![0.0; n]; n];
    for u in 0..n {
        let row = patched_row(graph, u);
        for (i, &p_ui) in row.iter().enumerate() {
            // Transposed placement: equation i couples x[u] via Phat[u][i].
            a[i][u] -= (1.0 - nu) * p_ui;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let b: Vec<f64> = jump.iter().map(|&v| nu * v).collect();
    let mut x = gauss_solve(a, b);
    let sum: f64 = x.iter().sum();
    for v in &mut x {
        *v /= sum;
    }
    x
}

/// Dense resolvent the oracle way: column `j` of `Q'` is the stationary
/// distribution for the point jump at `j`. Returns `Q` row-major, i.e.
/// `q[j][i] = score of i under the point jump at j`.
pub fn dense_resolvent_oracle(graph: &DirectedGraph, nu: f64) -> Vec<Vec<f64>> {
    let n = graph.node_count();
    (0..n)
        .map(|j| {
            let mut jump = vec![0.0; n];
            jump[j] = 1.0;
            dense_fspr_oracle(graph, nu, &jump)
        })
        .collect()
}

/// Exhaustive constrained-QP oracle for tiny instances: enumerates every
/// support, solves the equality-constrained normal equations on it, and
/// keeps the feasible candidate with the smallest objective.
///
/// `q_rows[j]` is the score vector of the point jump at `j`; the problem is
/// minimize `|| Q' v - reference ||^2` over the simplex slice
/// `{ v >= 0, sum v = 1, reach . v = target }`.
pub fn brute_force_fspr_jump(
    q_rows: &[Vec<f64>],
    reference: &[f64],
    reach: &[f64],
    target: f64,
) -> Option<(Vec<f64>, f64)> {
    let n = q_rows.len();
    assert!(n <= 12, "support enumeration is exponential in N");
    let scores_of = |v: &[f64]| -> Vec<f64> {
        let mut p = vec![0.0; n];
        for (j, vj) in v.iter().enumerate() {
            if *vj != 0.0 {
                for (pi, qji) in p.iter_mut().zip(&q_rows[j]) {
                    *pi += vj * qji;
                }
            }
        }
        p
    };
    let objective = |v: &[f64]| -> f64 {
        scores_of(v)
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };

    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&j| mask & (1 << j) != 0).collect();
        let f = support.len();
        // KKT system over the support plus two equality multipliers.
        let dim = f + 2;
        let mut a = vec![vec![0.0; dim]; dim];
        let mut b = vec![0.0; dim];
        for (ai, &ja) in support.iter().enumerate() {
            for (bi, &jb) in support.iter().enumerate() {
                let dot: f64 = q_rows[ja]
                    .iter()
                    .zip(&q_rows[jb])
                    .map(|(x, y)| x * y)
                    .sum();
                a[ai][bi] = 2.0 * dot;
            }
            a[ai][f] = 1.0;
            a[ai][f + 1] = reach[ja];
            a[f][ai] = 1.0;
            a[f + 1][ai] = reach[ja];
            b[ai] = 2.0
                * q_rows[ja]
                    .iter()
                    .zip(reference)
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
        }
        b[f] = 1.0;
        b[f + 1] = target;

        // Skip singular supports (cannot satisfy both constraints).
        if !is_solvable(&a) {
            continue;
        }
        let sol = gauss_solve(a, b);
        if sol[..f].iter().any(|&w| w < -1e-9) {
            continue;
        }
        let mut v = vec![0.0; n];
        for (ai, &j) in support.iter().enumerate() {
            v[j] = sol[ai].max(0.0);
        }
        // Repair round-off so the candidate is an exact distribution.
        let sum: f64 = v.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            continue;
        }
        for x in &mut v {
            *x /= sum;
        }
        if (dot(&v, reach) - target).abs() > 1e-6 {
            continue;
        }
        let obj = objective(&v);
        if best.as_ref().is_none_or(|(_, b_obj)| obj < *b_obj) {
            best = Some((v, obj));
        }
    }
    best
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn is_solvable(a: &[Vec<f64>]) -> bool {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for k in 0..n {
        let mut best = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[best][k].abs() {
                best = i;
            }
        }
        if m[best][k].abs() < 1e-10 {
            return false;
        }
        m.swap(k, best);
        let pivot = m[k][k];
        for i in k + 1..n {
            let factor = m[i][k] / pivot;
            for j in k..n {
                m[i][j] -= factor * m[k][j];
            }
        }
    }
    true
}
