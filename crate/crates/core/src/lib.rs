//! Differentially private logistic regression for siloed partner data, and a
//! stacking framework that lets a cold-start partner borrow strength from the
//! private models of its peers.
//!
//! The building blocks, bottom up:
//!
//! - [`loss`]: regularized logistic loss, its gradient, R-ball projection and
//!   the Lipschitz / smoothness / strong-convexity constants.
//! - [`noise`]: sensitivity, L2-Laplace and Gaussian samplers, budget splits.
//! - [`dppsgd`]: permutation-based projected SGD with output perturbation.
//! - [`amp`]: approximate minima perturbation (objective plus output noise).
//! - [`data`]: CSV ingestion, unit-norm normalization, synthetic partners.
//! - [`aggregation`] and [`gbdt`]: stacked ensembles over released models.
//! - [`evaluation`]: AUC, lift, quartile summaries.
//! - [`harness`]: end-to-end experiments and the empirical privacy audit.

pub mod aggregation;
pub mod amp;
pub mod data;
pub mod dppsgd;
pub mod error;
pub mod evaluation;
pub mod gbdt;
pub mod harness;
pub mod loss;
pub mod model;
pub mod noise;
pub mod rng;

pub use error::{Error, Result};
pub use loss::{LossBounds, LossConfig, WeightVector};
pub use model::{Algorithm, PrivateModel};
pub use noise::PrivacyBudget;
