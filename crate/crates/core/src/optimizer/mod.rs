//! Top-push distance learning: objective, subgradient, PSD projection and
//! the training loop.

mod config;
mod objective;
mod projection;
mod train;

pub use config::TrainConfig;
pub use objective::{
    gradient, min_interclass_distance, objective, objective_parts, triggered_set,
    NearestNegative, ObjectiveParts, Problem, TriggeredSet, TriggeredTriplet,
};
pub use projection::{decompose_projection, embed, psd_project};
pub use train::{train, StepOutcome, StopReason, TrainReport, Trainer};
