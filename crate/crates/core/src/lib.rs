//! Nonparametric clustering of functional data with data-grid models.
//!
//! Curves are flattened into `(curve, x, y)` points. A grid model partitions
//! the curves into clusters and each point dimension into rank intervals; the
//! best grid minimizes a Bayesian criterion (negative log posterior, in nats)
//! that needs no user parameter. The fitted grid can then be coarsened by
//! agglomerative merging, producing a dendrogram of the clusters and a
//! kept-information curve.
//!
//! ```
//! use gridclust::{fit, synth, SearchConfig};
//!
//! let data = synth::generate(&synth::SynthSpec::new(300, 1)).unwrap();
//! let result = fit(&data.dataset, &SearchConfig { vns_restarts: 1, ..SearchConfig::with_seed(7) });
//! assert!(result.criterion.total.is_finite());
//! ```

pub mod combinatorics;
pub mod criterion;
pub mod dataset;
mod engine;
pub mod error;
pub mod hierarchy;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod stats;
pub mod summary;
pub mod synth;

pub use combinatorics::{log_bell_divisions, log_binomial, CombinatoricsTables};
pub use criterion::{delta_merge, evaluate, kl_dissimilarity, CriterionValue, Evaluator, KlDissimilarity};
pub use dataset::{Axis, PointDataset};
pub use error::{Error, Result};
pub use hierarchy::{agglomerate, build_dendrogram, kept_information, Dendrogram, MergeEvent, ParetoSeries};
pub use model::{Dimension, GridModel, Merge};
pub use optimizer::{fit, fit_sequential, greedy_merge, initial_solution, post_optimize, FitResult, SearchConfig};
#[cfg(feature = "parallel")]
pub use optimizer::fit_parallel;
pub use stats::{apply_merge, compute_stats, SufficientStats};
