//! Effective-rank channel models and graph reinforcement learning for
//! movable-antenna (MA) and pinching-antenna (PA) placement.
//!
//! ```
//! use flexrank::linalg::{effective_rank, ChannelMatrix};
//!
//! let h = ChannelMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 1.0]);
//! assert!((effective_rank(&h).unwrap() - 2.0).abs() < 1e-12);
//! ```

pub mod baselines;
pub mod config;
pub mod error;
pub mod gaiqn;
pub mod graph;
pub mod kmeans;
pub mod linalg;
pub mod ma;
pub mod magaqn;
pub mod nn;
pub mod pa;
pub mod rl;
pub mod runner;
pub mod scenario;
pub mod seed;
pub mod selection;
pub mod system;
pub mod train;

pub use error::{Error, Result};
