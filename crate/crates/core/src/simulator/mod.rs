//! The simulated student.
//!
//! A cognitive-diagnosis model predicts the probability of answering an
//! exercise correctly; concept mastery is the mean prediction over the
//! concept's exercises. [`respond`] turns a tutoring action into reward,
//! feedback and patience loss, and [`dynamic_update`] lets the student learn
//! from a successfully tutored exercise.

mod cd;
mod env;
mod session;
mod tiers;

pub use cd::{CdFit, CdModel, CdTrainConfig};
pub use env::{Episode, World};
pub use session::{
    dynamic_update, respond, Branch, Rewards, SimConfig, StepOutcome, StudentSession,
    TerminationReason, UpdateRule,
};
pub use tiers::{assign_tiers, Tier};
