//! Immutable directed graph with forward and reverse adjacency, plus the
//! two-group bookkeeping every solver shares.
//!
//! Node ids are dense in `[0, N)`. Both adjacency directions are stored in
//! CSR form with neighbor lists sorted ascending, so the reverse adjacency
//! is always the exact transpose of the forward one.

use crate::error::{Error, Result};

/// Binary group label. The unprotected group sorts before the protected one,
/// which fixes the ordering of degree-class keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    Unprotected,
    Protected,
}

impl Group {
    pub fn is_protected(self) -> bool {
        matches!(self, Group::Protected)
    }

    /// Numeric label used by the on-disk formats: 1 = protected.
    pub fn as_u8(self) -> u8 {
        match self {
            Group::Unprotected => 0,
            Group::Protected => 1,
        }
    }
}

/// Sparse directed graph. `a[j][i] ∈ {0,1}`: parallel duplicate edges are
/// either rejected or merged at construction, self-loops are kept and count
/// toward both degrees.
#[derive(Debug, Clone)]
pub struct DirectedGraph {
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    edge_count: usize,
}

impl DirectedGraph {
    /// Builds a graph over `node_count` dense ids from an edge list.
    ///
    /// With `dedup` set, repeated edges are silently merged; otherwise the
    /// first repeat is a [`Error::DuplicateEdge`].
    pub fn from_edges(node_count: usize, edges: &[(u32, u32)], dedup: bool) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::EmptyGraph);
        }
        for &(s, t) in edges {
            for node in [s, t] {
                if node as usize >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
        }

        // Counting-sort the edges into forward CSR rows.
        let mut out_degree = vec![0usize; node_count];
        for &(s, _) in edges {
            out_degree[s as usize] += 1;
        }
        let mut out_offsets = Vec::with_capacity(node_count + 1);
        out_offsets.push(0usize);
        for d in &out_degree {
            out_offsets.push(out_offsets.last().unwrap() + d);
        }
        let mut out_targets = vec![0u32; edges.len()];
        let mut cursor = out_offsets[..node_count].to_vec();
        for &(s, t) in edges {
            out_targets[cursor[s as usize]] = t;
            cursor[s as usize] += 1;
        }

        // Sort each row; detect or merge duplicates.
        let mut compact_targets = Vec::with_capacity(edges.len());
        let mut compact_offsets = Vec::with_capacity(node_count + 1);
        compact_offsets.push(0usize);
        for u in 0..node_count {
            let row = &mut out_targets[out_offsets[u]..out_offsets[u + 1]];
            row.sort_unstable();
            let mut prev: Option<u32> = None;
            for &t in row.iter() {
                if prev == Some(t) {
                    if !dedup {
                        return Err(Error::DuplicateEdge {
                            source: u as u32,
                            target: t,
                        });
                    }
                    continue;
                }
                compact_targets.push(t);
                prev = Some(t);
            }
            compact_offsets.push(compact_targets.len());
        }
        let edge_count = compact_targets.len();

        // Transpose: iterating sources ascending keeps reverse rows sorted.
        let mut in_degree = vec![0usize; node_count];
        for &t in &compact_targets {
            in_degree[t as usize] += 1;
        }
        let mut in_offsets = Vec::with_capacity(node_count + 1);
        in_offsets.push(0usize);
        for d in &in_degree {
            in_offsets.push(in_offsets.last().unwrap() + d);
        }
        let mut in_sources = vec![0u32; edge_count];
        let mut cursor = in_offsets[..node_count].to_vec();
        for u in 0..node_count {
            for &t in &compact_targets[compact_offsets[u]..compact_offsets[u + 1]] {
                in_sources[cursor[t as usize]] = u as u32;
                cursor[t as usize] += 1;
            }
        }

        Ok(DirectedGraph {
            out_offsets: compact_offsets,
            out_targets: compact_targets,
            in_offsets,
            in_sources,
            edge_count,
        })
    }

    /// Convenience constructor inferring the node count as `max id + 1`.
    pub fn from_edge_list(edges: &[(u32, u32)], dedup: bool) -> Result<Self> {
        let max = edges
            .iter()
            .map(|&(s, t)| s.max(t))
            .max()
            .ok_or(Error::EmptyGraph)?;
        Self::from_edges(max as usize + 1, edges, dedup)
    }

    pub fn node_count(&self) -> usize {
        self.out_offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.out_offsets[u + 1] - self.out_offsets[u]
    }

    pub fn in_degree(&self, u: usize) -> usize {
        self.in_offsets[u + 1] - self.in_offsets[u]
    }

    /// Successors of `u`, ascending.
    pub fn out_neighbors(&self, u: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    /// Predecessors of `u`, ascending.
    pub fn in_neighbors(&self, u: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[u]..self.in_offsets[u + 1]]
    }

    /// All edges in forward storage order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.out_neighbors(u).iter().map(move |&t| (u as u32, t))
        })
    }

    /// Nodes with out-degree 0, ascending. Their walker mass is spread
    /// uniformly over all nodes by the transition kernel.
    pub fn dangling_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&u| self.out_degree(u) == 0)
            .collect()
    }
}

/// Per-node binary group labels with the derived aggregates used by the
/// jump estimators: the protected node fraction and per-group in-degree
/// totals.
#[derive(Debug, Clone)]
pub struct GroupAssignment {
    labels: Vec<Group>,
    protected_count: usize,
    d_protected: u64,
    d_unprotected: u64,
}

impl GroupAssignment {
    pub fn new(graph: &DirectedGraph, labels: Vec<Group>) -> Result<Self> {
        if labels.len() != graph.node_count() {
            return Err(Error::DimensionMismatch {
                expected: graph.node_count(),
                got: labels.len(),
            });
        }
        let mut protected_count = 0usize;
        let mut d_protected = 0u64;
        for (u, &g) in labels.iter().enumerate() {
            if g.is_protected() {
                protected_count += 1;
                d_protected += graph.in_degree(u) as u64;
            }
        }
        Ok(GroupAssignment {
            labels,
            protected_count,
            d_protected,
            d_unprotected: graph.edge_count() as u64 - d_protected,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, u: usize) -> Group {
        self.labels[u]
    }

    pub fn labels(&self) -> &[Group] {
        &self.labels
    }

    pub fn is_protected(&self, u: usize) -> bool {
        self.labels[u].is_protected()
    }

    pub fn protected_count(&self) -> usize {
        self.protected_count
    }

    /// Fraction of protected nodes, `phi = |P| / N` exactly.
    pub fn phi(&self) -> f64 {
        self.protected_count as f64 / self.labels.len() as f64
    }

    /// Node fraction of `group` (`phi` or `1 - phi`).
    pub fn group_fraction(&self, group: Group) -> f64 {
        match group {
            Group::Protected => self.phi(),
            Group::Unprotected => 1.0 - self.phi(),
        }
    }

    /// Total in-degree of the protected group, `D_P`.
    pub fn d_protected(&self) -> u64 {
        self.d_protected
    }

    /// Total in-degree of the unprotected group, `D_U`.
    pub fn d_unprotected(&self) -> u64 {
        self.d_unprotected
    }

    /// Total in-degree of `group`.
    pub fn group_indegree_sum(&self, group: Group) -> u64 {
        match group {
            Group::Protected => self.d_protected,
            Group::Unprotected => self.d_unprotected,
        }
    }

    pub fn group_size(&self, group: Group) -> usize {
        match group {
            Group::Protected => self.protected_count,
            Group::Unprotected => self.labels.len() - self.protected_count,
        }
    }
}
