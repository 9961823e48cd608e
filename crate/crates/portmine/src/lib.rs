//! Mine compact, robust portfolios of ML configurations from an offline
//! task×configuration evaluation matrix and answer zero-shot configuration
//! queries for new tasks.
//!
//! The pipeline in one breath: ingest per-fold losses, build the mean-loss
//! performance matrix, subtract the per-task baseline to get the regret
//! matrix, greedily mine a small portfolio that keeps every task's regret
//! near a target, then fit a nearest-neighbor decision function over four
//! standardized task metafeatures so an unseen task can be matched to a
//! portfolio config without training anything.
//!
//! ```
//! use portmine::eval::{generate_planted, loo_cv, Strategy};
//! use portmine::mining::{greedy_build, MiningOptions};
//!
//! let bundle = generate_planted(20, 60, 3, 0.005, 42).unwrap();
//! let portfolio = greedy_build(bundle.regret(), &MiningOptions::default()).unwrap();
//! assert_eq!(portfolio.members.len(), 3);
//!
//! let report = loo_cv(&bundle, Strategy::Ours, &MiningOptions::default()).unwrap();
//! assert!(report.stats.p50 <= 0.01);
//! ```

pub mod decision;
pub mod error;
pub mod eval;
pub mod io;
pub mod matrix;
pub mod mining;
pub mod table;

pub use error::{Error, Result};
