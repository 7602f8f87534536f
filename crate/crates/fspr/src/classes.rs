//! Degree-class partition: nodes grouped by exact `(k_in, k_out, group)`
//! triples, with the class-to-class directed edge counts that drive the
//! mean-field recursion.

use std::collections::HashMap;

use crate::error::Result;
use crate::graph::{DirectedGraph, Group, GroupAssignment};

/// Key of one degree class. All members share these three values exactly;
/// no degree binning happens here (binning is a reporting concern).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassKey {
    pub k_in: u32,
    pub k_out: u32,
    pub group: Group,
}

/// Partition of the node set into degree classes, plus the directed
/// class-to-class edge counts `E[src -> dst]`.
#[derive(Debug, Clone)]
pub struct DegreeClassPartition {
    keys: Vec<ClassKey>,
    membership: Vec<u32>,
    class_size: Vec<u32>,
    class_probability: Vec<f64>,
    /// Indexed by destination class; sorted `(source class, edge count)`.
    edge_counts: Vec<Vec<(u32, u64)>>,
    node_count: usize,
    edge_total: u64,
    /// One member node per class (the lowest id), for per-node lookups.
    representative: Vec<u32>,
}

impl DegreeClassPartition {
    pub fn class_count(&self) -> usize {
        self.keys.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_total(&self) -> u64 {
        self.edge_total
    }

    /// Class keys sorted ascending by `(k_in, k_out, group)`.
    pub fn keys(&self) -> &[ClassKey] {
        &self.keys
    }

    pub fn key(&self, class: usize) -> ClassKey {
        self.keys[class]
    }

    /// Class index of node `u`.
    pub fn class_of(&self, u: usize) -> usize {
        self.membership[u] as usize
    }

    pub fn membership(&self) -> &[u32] {
        &self.membership
    }

    pub fn class_size(&self, class: usize) -> usize {
        self.class_size[class] as usize
    }

    pub fn sizes(&self) -> &[u32] {
        &self.class_size
    }

    /// `P(k)`: probability that a random node falls in `class`.
    pub fn class_probability(&self, class: usize) -> f64 {
        self.class_probability[class]
    }

    /// Directed edge counts into `dst_class`, as sorted
    /// `(source class, count)` pairs.
    pub fn edges_into(&self, dst_class: usize) -> &[(u32, u64)] {
        &self.edge_counts[dst_class]
    }

    /// Lowest-id member of `class`.
    pub fn representative(&self, class: usize) -> usize {
        self.representative[class] as usize
    }
}

/// Groups nodes into degree classes and counts class-to-class edges.
///
/// `Σ_src E[src -> dst]` equals `k_in(dst) * |dst|` for every class, since
/// each member of `dst` receives exactly `k_in(dst)` edges.
pub fn partition_degree_classes(
    graph: &DirectedGraph,
    groups: &GroupAssignment,
) -> Result<DegreeClassPartition> {
    let n = graph.node_count();
    debug_assert_eq!(groups.node_count(), n);

    let node_key = |u: usize| ClassKey {
        k_in: graph.in_degree(u) as u32,
        k_out: graph.out_degree(u) as u32,
        group: groups.label(u),
    };

    let mut index: HashMap<ClassKey, u32> = HashMap::new();
    for u in 0..n {
        let next = index.len() as u32;
        index.entry(node_key(u)).or_insert(next);
    }
    // Re-index in sorted key order so the partition is deterministic.
    let mut keys: Vec<ClassKey> = index.keys().copied().collect();
    keys.sort_unstable();
    for (i, k) in keys.iter().enumerate() {
        *index.get_mut(k).unwrap() = i as u32;
    }

    let k = keys.len();
    let mut membership = vec![0u32; n];
    let mut class_size = vec![0u32; k];
    let mut representative = vec![u32::MAX; k];
    for u in 0..n {
        let c = index[&node_key(u)];
        membership[u] = c;
        class_size[c as usize] += 1;
        if representative[c as usize] == u32::MAX {
            representative[c as usize] = u as u32;
        }
    }
    let class_probability = class_size
        .iter()
        .map(|&s| s as f64 / n as f64)
        .collect();

    let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
    for v in 0..n {
        let dst = membership[v];
        for &u in graph.in_neighbors(v) {
            *pair_counts.entry((membership[u as usize], dst)).or_insert(0) += 1;
        }
    }
    let mut edge_counts: Vec<Vec<(u32, u64)>> = vec![Vec::new(); k];
    for (&(src, dst), &count) in &pair_counts {
        edge_counts[dst as usize].push((src, count));
    }
    for row in &mut edge_counts {
        row.sort_unstable();
    }

    Ok(DegreeClassPartition {
        keys,
        membership,
        class_size,
        class_probability,
        edge_counts,
        node_count: n,
        edge_total: graph.edge_count() as u64,
        representative,
    })
}

/// Mean score per class: `(1 / (N P(k))) Σ_{t in k} p(t)`.
///
/// Recombining with class probabilities recovers the global mean of `p`.
pub fn class_average(scores: &[f64], partition: &DegreeClassPartition) -> Vec<f64> {
    assert_eq!(
        scores.len(),
        partition.node_count(),
        "score vector length must match the partitioned node count"
    );
    let mut sums = vec![0.0f64; partition.class_count()];
    for (u, &s) in scores.iter().enumerate() {
        sums[partition.class_of(u)] += s;
    }
    for (c, sum) in sums.iter_mut().enumerate() {
        *sum /= partition.class_size(c) as f64;
    }
    sums
}
