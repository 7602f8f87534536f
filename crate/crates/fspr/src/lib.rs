//! Fairness-sensitive PageRank for two-group directed networks.
//!
//! PageRank's teleportation (jump) vector is a free parameter; choosing it
//! so a protected group receives a target share of the total score mass
//! yields fairness-sensitive PageRank. This crate provides three solvers
//! for that problem plus the measurement harness around them:
//!
//! * [`exact::exact_fspr`]: the dense baseline; build the PageRank
//!   operator explicitly and optimize the jump vector under the fairness
//!   constraint. Cubic time, quadratic memory, small graphs only.
//! * [`gmres::fair_gmres`]: the scalable baseline; restarted GMRES
//!   applies the operator implicitly through sparse products, and a short
//!   outer loop tunes the jump vector onto the target mass.
//! * [`meanfield::meanfield_closed_form`]: the linear-time approximation;
//!   scores estimated from each node's in-degree and group alone, with a
//!   per-degree-class variance theory quantifying its spread.
//!
//! [`metrics`] holds the comparison toolkit (utility loss, fairness gap,
//! rank correlations, top-K overlap, log-binned curves), [`synth`] the
//! degree-uncorrelated two-group graph generator used as a testbed, and
//! [`io`] the on-disk formats shared with the `fspr` command-line tool.
//!
//! ```
//! use fspr::{DirectedGraph, FairnessSpec, Group, GroupAssignment};
//!
//! let graph = DirectedGraph::from_edge_list(&[(0, 1), (1, 0), (1, 2), (2, 0)], false)?;
//! let groups = GroupAssignment::new(
//!     &graph,
//!     vec![Group::Protected, Group::Unprotected, Group::Unprotected],
//! )?;
//! let spec = FairnessSpec::default().with_target(0.45)?; // nu = 0.15
//!
//! let (scores, _jump, report) =
//!     fspr::gmres::fair_gmres(&graph, &groups, &spec, &Default::default())?;
//! assert!((scores.iter().sum::<f64>() - 1.0).abs() < 1e-10);
//! assert!((report.achieved_protected_mass.unwrap() - 0.45).abs() < 1e-8);
//! # Ok::<(), fspr::Error>(())
//! ```

#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::manual_is_multiple_of)]

pub mod classes;
pub mod error;
pub mod exact;
pub mod gmres;
pub mod graph;
pub mod io;
pub mod meanfield;
pub mod metrics;
pub mod score;
pub mod synth;

pub use classes::{class_average, partition_degree_classes, ClassKey, DegreeClassPartition};
pub use error::{Error, Result};
pub use graph::{DirectedGraph, Group, GroupAssignment};
pub use score::{FairnessSpec, ScoreVector, SolverReport};

// The guide chapters under book/ double as documentation tests: every Rust
// snippet there compiles and runs under `cargo test`.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;

    #[doc = include_str!("../../../book/src/graphs.md")]
    pub struct Graphs;

    #[doc = include_str!("../../../book/src/fair-pagerank.md")]
    pub struct FairPagerank;

    #[doc = include_str!("../../../book/src/krylov.md")]
    pub struct Krylov;

    #[doc = include_str!("../../../book/src/mean-field.md")]
    pub struct MeanField;

    #[doc = include_str!("../../../book/src/fluctuations.md")]
    pub struct Fluctuations;

    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;

    #[doc = include_str!("../../../book/src/synthetic-graphs.md")]
    pub struct SyntheticGraphs;

    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
