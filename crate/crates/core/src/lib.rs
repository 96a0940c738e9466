//! Topology-aware embedding: persistence diagrams of filtered complexes,
//! diagram distances and matchings, a regularized topological loss with
//! frozen configurations, and a neural embedding trained against it.
//!
//! ```
//! use topoloss::{build_rips, compute_persistence_dim0, PointCloud};
//!
//! let x = PointCloud::new(vec![vec![0.0], vec![1.0], vec![3.0]])?;
//! let diagram = compute_persistence_dim0(&build_rips(&x, 1, f64::INFINITY)?)?;
//! assert_eq!(diagram.len(), 3);
//! # Ok::<(), topoloss::Error>(())
//! ```

pub mod assignment;
pub mod complex;
pub mod error;
pub mod experiment;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod persistence;

pub use complex::{
    build_lower_star, build_rips, euclidean, Attribution, FilterInput, FilterKind, Filtration, PointCloud,
    SimplexId, SimplicialComplex, SparseGradient,
};
pub use error::{Error, Result};
pub use loss::{eval_loss, grad_loss, Configuration, GroundTruthDiagram, LossBreakdown, LossWeights};
pub use metrics::{
    bottleneck, restoration_cost, restoration_match, total_persistence, wasserstein, Matching, Target,
};
pub use model::{compute_p, compute_q, supervision_loss_and_grad, Affinities, DenseNetwork};
pub use optimizer::{
    check_trace, run, theorem_step_size, OptimizerConfig, Problem, RunOutcome, StepRule, StopReason,
    TheoremConstants, TraceRecord, TraceRow,
};
pub use persistence::{compute_persistence, compute_persistence_dim0, PersistenceDiagram, PersistencePoint};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/filtrations.md")]
    mod filtrations {}
    #[doc = include_str!("../../../book/src/persistence.md")]
    mod persistence {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/loss.md")]
    mod loss {}
    #[doc = include_str!("../../../book/src/embedding.md")]
    mod embedding {}
    #[doc = include_str!("../../../book/src/optimization.md")]
    mod optimization {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
