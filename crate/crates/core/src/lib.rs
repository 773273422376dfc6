//! Shilling-attack toolkit for recommender systems.
//!
//! The crate covers the whole pipeline: load and split rating data, train
//! victim recommenders, generate fake user profiles with heuristic,
//! surrogate-gradient and GAN-based attackers, inject them, and measure
//! target-item promotion (HR@K) and detectability.
//!
//! | module | contents |
//! |---|---|
//! | [`dataset`] | `RatingMatrix`, loaders, filtering, splits, statistics, attack budgets |
//! | [`diffcore`] | hand-differentiated layers, losses, optimizers, gradient checker |
//! | [`surrogate`] | WRMF surrogate and the last-step-unrolled attack gradient |
//! | [`victims`] | SVD, NMF, Slope-One, U/I-AutoRec and explicit NeuMF behind one interface |
//! | [`attacks`] | Random / Average / Segment / Bandwagon heuristics and AIA |
//! | [`legup`] | the GAN attacker with learnable discretization |
//! | [`evaluation`] | HR@K, attack cells, PCA detector, projection export |
//! | [`runner`] | config-driven experiment grids and report summaries |
//!
//! Runnable walkthroughs live in `crates/core/examples/`.

pub mod attacks;
pub mod dataset;
pub mod diffcore;
pub mod error;
pub mod evaluation;
pub mod legup;
pub mod runner;
pub mod seed;
pub mod surrogate;
pub mod victims;

pub use error::{Error, Result};
