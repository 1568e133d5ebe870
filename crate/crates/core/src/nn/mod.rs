//! Small reverse-mode layer stack on `ndarray`.
//!
//! Every layer exposes `forward`, which returns its output together with a
//! cache, and `backward`, which takes the cache and the output gradient,
//! accumulates parameter gradients into a [`ParameterSet`] of the same layout
//! and returns the input gradient.

pub mod adam;
pub mod checkpoint;
pub mod cosine;
pub mod dense;
pub mod dueling;
pub mod gat;
pub mod gradcheck;
pub mod gru;
pub mod loss;
pub mod params;
pub mod suite;

pub use adam::{Adam, AdamConfig};
pub use cosine::{cosine_features, modulate, CosineEmbedding};
pub use dense::Dense;
pub use dueling::{dueling_combine, DuelingHead};
pub use gat::{graph_pool, GatLayer};
pub use gradcheck::{numeric_gradient_check, GradCheckReport};
pub use gru::Gru;
pub use loss::{quantile_huber, quantile_huber_loss};
pub use params::{ParamId, ParameterSet};
