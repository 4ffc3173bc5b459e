//! Scripted experts, filtered demonstrations and closed-loop evaluation.

mod demos;
mod evaluate;
mod expert;

pub use demos::{expert_rollout, generate_demos, DemoEpisode, DemoGeneration, DemoSet};
pub use evaluate::{evaluate, evaluate_with, sample_episodes, EvalReport, ModelTracker, ReplayTracker, Tracker};
pub use expert::expert_action;
