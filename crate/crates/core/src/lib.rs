//! Ambiguity-gated interactive imitation learning for table-top pick and
//! place.
//!
//! A value-map policy scores every pixel of a top-view image for picking
//! and, conditioned on the pick, for placing. Before acting, the loop finds
//! the significant peaks of each map by 0-dimensional persistence, measures
//! how dominant the best peak is, and asks a teacher for a demonstration
//! when it is not dominant enough. The threshold for asking adapts so that
//! the gate catches a chosen fraction of the situations where help was
//! actually needed. Demonstrations are aggregated and the policy retrained.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`, which the experiment harness uses.

pub mod ambiguity;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod heatmap;
pub mod policy;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod session;
pub mod sim;
pub mod teacher;
pub mod telemetry;
pub mod threshold;
pub mod topology;

pub use crate::ambiguity::{ambiguity_measure, candidate_set, gate, Candidate, GateDecision, Verdict};
pub use crate::error::{Error, Result};
pub use crate::heatmap::{Heatmap, Pixel};
pub use crate::scalar::Scalar;
pub use crate::threshold::{ConfusionLedger, Flag, ThresholdConfig, ThresholdController};
pub use crate::topology::{argmax_pixel, persistent_maxima, LocalMaximum, PersistenceFloor};

pub type Heatmap64 = Heatmap<f64>;
pub type Heatmap32 = Heatmap<f32>;
pub type LocalMaximum64 = LocalMaximum<f64>;
pub type GateDecision64 = GateDecision<f64>;
pub type ThresholdController64 = ThresholdController<f64>;
pub type ValueModel64 = policy::ValueModel<f64>;
pub type ValueModel32 = policy::ValueModel<f32>;
pub type FeatureMap64 = policy::FeatureMap<f64>;
pub type Session64 = session::Session<f64>;
