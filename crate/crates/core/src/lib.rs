//! λ-schedule temporal-difference prediction: schedules and weight matrices,
//! finite MDPs and benchmark environments, forward-view return oracles,
//! incremental learners, exact fixed-point analysis and an experiment harness.

pub mod analysis;
pub mod harness;
pub mod learners;
pub mod mdp;
pub mod returns;
pub mod schedule;

pub use schedule::{equal_weights, make_schedule, LambdaSchedule, WeightMatrix};
