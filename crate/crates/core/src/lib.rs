//! Fairness auditing of black-box tabular classifiers.
//!
//! The pipeline trains a classifier, measures group fairness of its outcomes,
//! explains individual predictions with a local surrogate (LIME-style),
//! Shapley values and counterfactuals, aggregates those explanations per
//! demographic group and outcome category, and checks their faithfulness with
//! perturbation curves.
//!
//! See the `examples/` directory of this crate for one runnable program per
//! capability.

pub mod aggregate;
pub mod attribution;
pub mod audit;
pub mod counterfactual;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod fairness;
pub mod lime;
pub mod model;
pub mod seed;
pub mod shap;

pub use error::{Error, Result};
