//! Trial configuration, the trial loop, and result aggregation.

mod config;
mod emit;
mod kde;
mod trial;

pub use config::{EvalConfig, InverseConfig, Preset, TrialConfig};
pub use emit::{
    aggregate_curve, loss_densities, read_logs, sweep, write_config, write_curve, write_logs_loss_pdf, write_loss_pdf,
    write_trial, CurvePoint, LossDensity, CURVE_HEADER, LOSS_PDF_HEADER,
};
pub use kde::{kde, silverman_bandwidth, Kde};
pub use trial::{build_collector, build_learner, run_trial, EvalPoint, IterationLog, Phase, TrialLog};
