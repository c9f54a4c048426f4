//! Rule-based descriptions of neurons in an Othello-playing transformer.
//!
//! Neuron activations recorded on featurized board positions are fitted
//! with shallow decision trees; tree paths become DNF rules over square
//! states, which can be queried with plain-language board conditions and
//! used to plan targeted ablations.

pub mod baselines;
pub mod intervention;
pub mod metrics;
pub mod othello;
pub mod provenance;
pub mod query;
pub mod rules;
pub mod scalar;
pub mod synthetic;
pub mod trace;
pub mod tree;

pub use scalar::Scalar;

pub type DecisionTree32 = tree::DecisionTree<f32>;
pub type DecisionTree64 = tree::DecisionTree<f64>;
pub type FitReport32 = tree::FitReport<f32>;
pub type FitReport64 = tree::FitReport<f64>;
pub type LassoModel32 = baselines::LassoModel<f32>;
pub type LassoModel64 = baselines::LassoModel<f64>;
pub type OtsuCut64 = rules::OtsuCut<f64>;
