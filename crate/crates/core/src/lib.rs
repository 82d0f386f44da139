//! Binary attribute representations (BAR) of sparse viewer × movie ratings.
//!
//! Each viewer is described by a short bit-vector and each movie by a real
//! weight-vector of the same length. A rating is explained as
//! `movie_mean + viewer_mean + bits · weights`. Bits are learned on a subset
//! of movies with a divide-and-concur constraint system iterated by the
//! relaxed reflect-reflect (RRR) rule; weights for the full catalog then come
//! from one small least-squares problem per movie.
//!
//! The pipeline, end to end:
//!
//! 1. [`dataset`] loads ratings (Netflix flat files or CSV).
//! 2. [`center`] removes movie means, then viewer means.
//! 3. [`baseline`] ranks movies by baseline squared error and picks a subset.
//! 4. [`solver`] runs RRR on the subset and returns viewer bits.
//! 5. [`fit`] solves for every movie's weights and evaluates the model.
//! 6. [`interpret`] summarizes the learned attributes.

pub mod baseline;
pub mod cache;
pub mod center;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod interpret;
pub mod model_io;
pub mod rng;
pub mod solver;
pub mod synth;

pub use baseline::{rank_baseline, select_subset, BaselineRanking};
pub use center::{center, CenteredRatings, TrainingView};
pub use dataset::{Partition, Rating, RatingsDataset};
pub use error::{Error, Result};
pub use fit::{assemble, evaluate, fit_weights, BarModel, EvalReport};
pub use solver::{solve, Mode, SolveResult, SolverConfig};
pub use synth::{synthesize, SyntheticSpec};
