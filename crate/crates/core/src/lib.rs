//! Simulation of the spatial-mode detector-efficiency-mismatch attack on a
//! free-space BB84 polarization receiver.
//!
//! - [`model`]: domain types and Bob's and Eve's click probabilities.
//! - [`scanmap`]: angular efficiency maps, attack-angle search, pinhole filter.
//! - [`rates`]: sifted rate and error rate with and without Eve.
//! - [`optimizer`]: Eve's mean-photon-number choice under rate matching.
//! - [`montecarlo`]: pulse-level stochastic oracle for the analytic model.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod rates;
pub mod scanmap;

pub use error::{Error, Result};
pub use model::{
    eve_measurement_probs, raw_click_probs, squashed_basis_prob, squashed_value_prob, Basis,
    ChannelEffVector, ClickProbs, EveDetectorModel, EveMeasurementProbs, LinkModel, Polarization,
    ReceiverModel,
};
pub use optimizer::{
    optimize_mode_a, optimize_mode_b, AttackProblem, OptimizationResult, OptimizerConfig, RateMatching, Status,
};
pub use rates::{baseline_no_eve, totals_with_eve, EveStrategy, RateReport, ScenarioKind};
