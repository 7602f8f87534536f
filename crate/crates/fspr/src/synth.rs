//! Two-group synthetic digraphs from a directed configuration model.
//!
//! Degrees are sampled independently per node from the configured in- and
//! out-laws, which makes the realized network degree-uncorrelated by
//! construction, the regime where the closed-form mean-field scores are
//! exact in expectation. Stub totals are balanced by trimming the larger
//! side, stubs are matched uniformly at random, and duplicate edges or
//! self-loops are rewired (never dropped) so the degree sequence survives.
//! Group labels are assigned by seeded shuffle with an exact protected
//! count of `floor(phi * N)`.
//!
//! Identical specs (including the seed) reproduce identical graphs
//! byte for byte.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::graph::{DirectedGraph, Group, GroupAssignment};

/// Marginal degree distribution for one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegreeLaw {
    /// `P(k) ∝ k^-exponent` on `[k_min, k_max]`.
    PowerLaw {
        exponent: f64,
        k_min: u32,
        k_max: u32,
    },
    Poisson {
        mean: f64,
    },
    Regular {
        degree: u32,
    },
}

impl fmt::Display for DegreeLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegreeLaw::PowerLaw {
                exponent,
                k_min,
                k_max,
            } => write!(f, "powerlaw({exponent},{k_min},{k_max})"),
            DegreeLaw::Poisson { mean } => write!(f, "poisson({mean})"),
            DegreeLaw::Regular { degree } => write!(f, "regular({degree})"),
        }
    }
}

/// Generator configuration. Parses from and prints to the compact form
/// `n=1000,phi=0.3,in=powerlaw(2.5,1,31),out=poisson(8),seed=1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub node_count: usize,
    /// Protected node fraction in [0, 1].
    pub phi: f64,
    pub in_degree_law: DegreeLaw,
    pub out_degree_law: DegreeLaw,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(Error::InvalidParameter("node count must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.phi) {
            return Err(Error::InvalidParameter(format!(
                "phi must be in [0, 1], got {}",
                self.phi
            )));
        }
        for law in [&self.in_degree_law, &self.out_degree_law] {
            match *law {
                DegreeLaw::PowerLaw {
                    exponent,
                    k_min,
                    k_max,
                } => {
                    if !(exponent > 1.0) {
                        return Err(Error::InvalidParameter(format!(
                            "power-law exponent must exceed 1, got {exponent}"
                        )));
                    }
                    if k_min == 0 || k_min > k_max {
                        return Err(Error::InvalidParameter(format!(
                            "power-law range [{k_min}, {k_max}] is invalid"
                        )));
                    }
                    if k_max as usize >= self.node_count {
                        return Err(Error::InvalidParameter(format!(
                            "power-law k_max {k_max} must be below the node count"
                        )));
                    }
                }
                DegreeLaw::Poisson { mean } => {
                    if !(mean > 0.0) {
                        return Err(Error::InvalidParameter(format!(
                            "poisson mean must be positive, got {mean}"
                        )));
                    }
                }
                DegreeLaw::Regular { degree } => {
                    if degree as usize >= self.node_count {
                        return Err(Error::InvalidParameter(format!(
                            "regular degree {degree} must be below the node count"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for SynthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={},phi={},in={},out={},seed={}",
            self.node_count, self.phi, self.in_degree_law, self.out_degree_law, self.seed
        )
    }
}

fn parse_law(text: &str) -> Result<DegreeLaw> {
    let bad = |msg: String| Error::InvalidParameter(msg);
    let open = text
        .find('(')
        .ok_or_else(|| bad(format!("degree law `{text}` is missing `(`")))?;
    if !text.ends_with(')') {
        return Err(bad(format!("degree law `{text}` is missing `)`")));
    }
    let name = &text[..open];
    let args: Vec<&str> = text[open + 1..text.len() - 1].split(',').collect();
    let parse_f = |s: &str| -> Result<f64> {
        s.trim()
            .parse()
            .map_err(|_| bad(format!("`{s}` is not a number in `{text}`")))
    };
    let parse_u = |s: &str| -> Result<u32> {
        s.trim()
            .parse()
            .map_err(|_| bad(format!("`{s}` is not an integer in `{text}`")))
    };
    match (name, args.len()) {
        ("powerlaw", 3) => Ok(DegreeLaw::PowerLaw {
            exponent: parse_f(args[0])?,
            k_min: parse_u(args[1])?,
            k_max: parse_u(args[2])?,
        }),
        ("poisson", 1) => Ok(DegreeLaw::Poisson {
            mean: parse_f(args[0])?,
        }),
        ("regular", 1) => Ok(DegreeLaw::Regular {
            degree: parse_u(args[0])?,
        }),
        _ => Err(bad(format!(
            "unknown degree law `{text}` (expected powerlaw(a,kmin,kmax), poisson(mean), or regular(k))"
        ))),
    }
}

impl FromStr for SynthSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidParameter(msg);
        // Split on commas outside parentheses.
        let mut fields = Vec::new();
        let mut depth = 0usize;
        let mut start = 0usize;
        for (i, ch) in s.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' if depth == 0 => {
                    fields.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        fields.push(&s[start..]);

        let mut node_count = None;
        let mut phi = None;
        let mut in_law = None;
        let mut out_law = None;
        let mut seed = 0u64;
        for field in fields {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got `{field}`")))?;
            match key.trim() {
                "n" => {
                    node_count = Some(value.trim().parse().map_err(|_| {
                        bad(format!("`{value}` is not a valid node count"))
                    })?)
                }
                "phi" => {
                    phi = Some(value.trim().parse().map_err(|_| {
                        bad(format!("`{value}` is not a valid fraction"))
                    })?)
                }
                "in" => in_law = Some(parse_law(value.trim())?),
                "out" => out_law = Some(parse_law(value.trim())?),
                "seed" => {
                    seed = value.trim().parse().map_err(|_| {
                        bad(format!("`{value}` is not a valid seed"))
                    })?
                }
                other => return Err(bad(format!("unknown spec key `{other}`"))),
            }
        }
        let spec = SynthSpec {
            node_count: node_count.ok_or_else(|| bad("spec is missing `n=`".into()))?,
            phi: phi.ok_or_else(|| bad("spec is missing `phi=`".into()))?,
            in_degree_law: in_law.ok_or_else(|| bad("spec is missing `in=`".into()))?,
            out_degree_law: out_law.ok_or_else(|| bad("spec is missing `out=`".into()))?,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// What the generator had to repair, for run metadata.
#[derive(Debug, Clone, Default)]
pub struct SynthMeta {
    pub sampled_in_sum: u64,
    pub sampled_out_sum: u64,
    /// Stubs trimmed from maximal-degree nodes to balance the sums.
    pub trimmed_in_stubs: u64,
    pub trimmed_out_stubs: u64,
    /// Edges rewired away from duplicates or self-loops.
    pub rewired_edges: usize,
    pub realized_protected: usize,
}

fn sample_degrees(law: &DegreeLaw, n: usize, cap: u32, rng: &mut ChaCha8Rng) -> Vec<u32> {
    match *law {
        DegreeLaw::Regular { degree } => vec![degree; n],
        DegreeLaw::Poisson { mean } => {
            let dist = Poisson::new(mean).expect("validated");
            (0..n)
                .map(|_| {
                    let v: f64 = dist.sample(rng);
                    (v as u32).min(cap)
                })
                .collect()
        }
        DegreeLaw::PowerLaw {
            exponent,
            k_min,
            k_max,
        } => {
            let weights: Vec<f64> = (k_min..=k_max)
                .map(|k| (k as f64).powf(-exponent))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut cdf = Vec::with_capacity(weights.len());
            let mut acc = 0.0;
            for w in &weights {
                acc += w / total;
                cdf.push(acc);
            }
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
                    k_min + idx as u32
                })
                .collect()
        }
    }
}

/// Removes `excess` stubs, always decrementing a node currently at maximal
/// degree (chosen uniformly among ties).
fn trim_stubs(degrees: &mut [u32], excess: u64, rng: &mut ChaCha8Rng) {
    if excess == 0 {
        return;
    }
    let max_degree = *degrees.iter().max().unwrap() as usize;
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); max_degree + 1];
    for (node, &d) in degrees.iter().enumerate() {
        buckets[d as usize].push(node as u32);
    }
    let mut current = max_degree;
    for _ in 0..excess {
        while buckets[current].is_empty() {
            current -= 1;
        }
        let pick = rng.random_range(0..buckets[current].len());
        let node = buckets[current].swap_remove(pick);
        degrees[node as usize] -= 1;
        buckets[current - 1].push(node);
    }
}

/// Generates the graph and group labels for `spec`.
pub fn generate(spec: &SynthSpec) -> Result<(DirectedGraph, GroupAssignment)> {
    let (graph, groups, _) = generate_with_meta(spec)?;
    Ok((graph, groups))
}

/// Like [`generate`], but also reports what the balance repair and
/// rewiring pass did.
pub fn generate_with_meta(
    spec: &SynthSpec,
) -> Result<(DirectedGraph, GroupAssignment, SynthMeta)> {
    spec.validate()?;
    let n = spec.node_count;
    let cap = (n - 1) as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut meta = SynthMeta::default();

    let mut in_degrees = sample_degrees(&spec.in_degree_law, n, cap, &mut rng);
    let mut out_degrees = sample_degrees(&spec.out_degree_law, n, cap, &mut rng);
    let in_sum: u64 = in_degrees.iter().map(|&d| d as u64).sum();
    let out_sum: u64 = out_degrees.iter().map(|&d| d as u64).sum();
    meta.sampled_in_sum = in_sum;
    meta.sampled_out_sum = out_sum;
    if in_sum > out_sum {
        meta.trimmed_in_stubs = in_sum - out_sum;
        trim_stubs(&mut in_degrees, in_sum - out_sum, &mut rng);
    } else {
        meta.trimmed_out_stubs = out_sum - in_sum;
        trim_stubs(&mut out_degrees, out_sum - in_sum, &mut rng);
    }

    // Stub matching: shuffle the in-stubs against out-stubs in node order.
    let m: usize = in_degrees.iter().map(|&d| d as usize).sum();
    let mut out_stubs = Vec::with_capacity(m);
    let mut in_stubs = Vec::with_capacity(m);
    for node in 0..n as u32 {
        for _ in 0..out_degrees[node as usize] {
            out_stubs.push(node);
        }
        for _ in 0..in_degrees[node as usize] {
            in_stubs.push(node);
        }
    }
    in_stubs.shuffle(&mut rng);
    let mut edges: Vec<(u32, u32)> = out_stubs
        .into_iter()
        .zip(in_stubs)
        .collect();

    // Rewire self-loops and duplicates by target swaps with random partner
    // edges, preserving both degree sequences.
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(m);
    let mut bad: Vec<usize> = Vec::new();
    let mut is_bad = vec![false; edges.len()];
    for (i, &edge) in edges.iter().enumerate() {
        if edge.0 == edge.1 || !seen.insert(edge) {
            bad.push(i);
            is_bad[i] = true;
        }
    }
    let mut attempts_left: u64 = 100 * (m as u64).max(1);
    if !bad.is_empty() && edges.len() < 2 {
        return Err(Error::InfeasibleDegreeSequence(
            "single-edge graph cannot be rewired".into(),
        ));
    }
    for &i in &bad {
        loop {
            if attempts_left == 0 {
                return Err(Error::InfeasibleDegreeSequence(format!(
                    "rewiring budget exhausted with {} conflicting edges",
                    bad.len()
                )));
            }
            attempts_left -= 1;
            let j = rng.random_range(0..edges.len());
            if j == i || is_bad[j] {
                continue;
            }
            let (a, b) = edges[i];
            let (c, d) = edges[j];
            let first = (a, d);
            let second = (c, b);
            if first.0 == first.1 || second.0 == second.1 || first == second {
                continue;
            }
            if seen.contains(&first) || seen.contains(&second) {
                continue;
            }
            seen.remove(&(c, d));
            seen.insert(first);
            seen.insert(second);
            edges[i] = first;
            edges[j] = second;
            is_bad[i] = false;
            meta.rewired_edges += 1;
            break;
        }
    }

    let graph = DirectedGraph::from_edges(n, &edges, false)?;

    // Exact-count labels via seeded shuffle.
    let protected_count = (spec.phi * n as f64).floor() as usize;
    meta.realized_protected = protected_count;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let mut labels = vec![Group::Unprotected; n];
    for &node in order.iter().take(protected_count) {
        labels[node as usize] = Group::Protected;
    }
    let groups = GroupAssignment::new(&graph, labels)?;
    Ok((graph, groups, meta))
}

/// Empirical degree moments: the mean in-degree, the moment
/// `<k_in^2 / k_out>` over nodes with `k_out >= 1` (0 if none qualify),
/// and the maximum degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeMoments {
    pub mean_in: f64,
    pub in_sq_over_out: f64,
    pub max_in: u32,
    pub max_out: u32,
}

pub fn degree_moments(graph: &DirectedGraph) -> DegreeMoments {
    let n = graph.node_count();
    let mut in_sum = 0u64;
    let mut moment_sum = 0.0;
    let mut moment_count = 0u64;
    let mut max_in = 0u32;
    let mut max_out = 0u32;
    for u in 0..n {
        let k_in = graph.in_degree(u) as u32;
        let k_out = graph.out_degree(u) as u32;
        in_sum += k_in as u64;
        max_in = max_in.max(k_in);
        max_out = max_out.max(k_out);
        if k_out >= 1 {
            moment_sum += (k_in as f64).powi(2) / k_out as f64;
            moment_count += 1;
        }
    }
    DegreeMoments {
        mean_in: in_sum as f64 / n as f64,
        in_sq_over_out: if moment_count == 0 {
            0.0
        } else {
            moment_sum / moment_count as f64
        },
        max_in,
        max_out,
    }
}
