//! Data-collection strategies behind one interface.
//!
//! Every strategy runs in iterations. A learned or random strategy collects
//! `episodes_per_iteration` full episodes into `Z_I` and then trains the
//! inverse model once; `demo` trains on expert data and never touches the
//! environment.

mod demo;
mod forward;
mod policy;
mod random;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{SampleBuffer, Transition};
use crate::env::{clamp_unit, Env, EnvId};
use crate::error::{Error, Result};
use crate::inverse::{action_loss, train_inverse, InverseModel, TrainStats};
use crate::nn::Adam;
use crate::ppo::PpoStats;
use crate::rng::LabRng;

pub use demo::DemoCollector;
pub use forward::ForwardModel;
pub use policy::{Driver, NoiseState, PolicyCollector};
pub use random::RandomCollector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectorKind {
    Adversarial,
    Random,
    Curiosity,
    Noise,
    Demo,
}

impl CollectorKind {
    pub const ALL: [CollectorKind; 5] = [
        CollectorKind::Adversarial,
        CollectorKind::Random,
        CollectorKind::Curiosity,
        CollectorKind::Noise,
        CollectorKind::Demo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CollectorKind::Adversarial => "adversarial",
            CollectorKind::Random => "random",
            CollectorKind::Curiosity => "curiosity",
            CollectorKind::Noise => "noise",
            CollectorKind::Demo => "demo",
        }
    }

    /// Strategies that get the random warm-up phase on high-dimensional tasks.
    pub fn uses_warmup(self) -> bool {
        matches!(
            self,
            CollectorKind::Adversarial | CollectorKind::Curiosity | CollectorKind::Noise
        )
    }
}

impl fmt::Display for CollectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CollectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CollectorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownCollector(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub initial_sigma: f64,
    /// Target mean action distance `d*`.
    pub target_distance: f64,
    pub adaptation: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            initial_sigma: 0.1,
            target_distance: 0.2,
            adaptation: 1.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CuriosityConfig {
    pub feature_dim: usize,
    pub feature_layers: usize,
    pub forward_hidden: usize,
    /// Forward-model batches per iteration.
    pub forward_batches: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for CuriosityConfig {
    fn default() -> Self {
        CuriosityConfig {
            feature_dim: 64,
            feature_layers: 2,
            forward_hidden: 64,
            forward_batches: 500,
            batch_size: 64,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemoConfig {
    /// Size of the expert set.
    pub episodes: usize,
    /// Episodes drawn per iteration.
    pub episodes_per_iteration: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            episodes: 1000,
            episodes_per_iteration: 200,
        }
    }
}

/// Strategy choice plus every strategy-specific knob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollectorConfig {
    pub kind: CollectorKind,
    pub delta: f64,
    /// `false` rewards the collector with the raw loss instead of `−|L − δ|`.
    pub stabilize: bool,
    /// Random samples before the strategy starts; `None` picks the
    /// environment default.
    pub warmup_samples: Option<usize>,
    pub noise: NoiseConfig,
    pub curiosity: CuriosityConfig,
    pub demo: DemoConfig,
}

impl Default for CollectorConfig {
    fn default() -> Self {
        CollectorConfig {
            kind: CollectorKind::Adversarial,
            delta: 1.5,
            stabilize: true,
            warmup_samples: None,
            noise: NoiseConfig::default(),
            curiosity: CuriosityConfig::default(),
            demo: DemoConfig::default(),
        }
    }
}

impl CollectorConfig {
    pub fn new(kind: CollectorKind) -> Self {
        CollectorConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::Config(format!(
                "delta must be finite and >= 0, got {}",
                self.delta
            )));
        }
        if self.noise.initial_sigma < 0.0 || self.noise.adaptation <= 0.0 {
            return Err(Error::Config("noise sigma must be >= 0 and adaptation > 0".into()));
        }
        if self.demo.episodes == 0 || self.demo.episodes_per_iteration == 0 {
            return Err(Error::Config("demo counts must be positive".into()));
        }
        Ok(())
    }

    /// Warm-up length actually used for `env_id`.
    pub fn effective_warmup(&self, env_id: EnvId) -> usize {
        if !self.kind.uses_warmup() {
            return 0;
        }
        self.warmup_samples.unwrap_or_else(|| default_warmup(env_id))
    }
}

/// 30K random samples on the high-dimensional chain, none elsewhere.
pub fn default_warmup(env_id: EnvId) -> usize {
    match env_id {
        EnvId::ChainReach => 30_000,
        _ => 0,
    }
}

/// Per-iteration collection and inverse-training schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub episodes_per_iteration: usize,
    pub inverse_batches: usize,
    pub inverse_batch_size: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            episodes_per_iteration: 10,
            inverse_batches: 25,
            inverse_batch_size: 64,
        }
    }
}

/// `r = −|L − δ|`.
pub fn shape_reward(loss: f64, delta: f64) -> f64 {
    -(loss - delta).abs()
}

/// `β‖a − I(x, x_next | h)‖²` at the model's current recurrent position;
/// advances `h`.
pub fn raw_reward(model: &mut InverseModel, x: &[f64], a: &[f64], x_next: &[f64]) -> Result<f64> {
    let a_hat = model.predict(x, x_next)?;
    action_loss(a, &a_hat, model.beta())
}

/// The inverse-model side every strategy shares: environment, `θ_I`, its
/// optimiser, `Z_I` and the sample counter.
#[derive(Debug, Clone)]
pub struct Learner {
    pub env: Env,
    pub model: InverseModel,
    pub adam: Adam,
    pub buffer: SampleBuffer,
    /// Environment transitions collected so far; equals `buffer.len()`.
    pub env_samples: usize,
    pub schedule: Schedule,
    env_rng: LabRng,
    sample_rng: LabRng,
}

impl Learner {
    pub fn new(
        env_id: EnvId,
        model: InverseModel,
        adam: Adam,
        schedule: Schedule,
        env_rng: LabRng,
        sample_rng: LabRng,
    ) -> Self {
        Learner {
            env: Env::new(env_id),
            model,
            adam,
            buffer: SampleBuffer::new(),
            env_samples: 0,
            schedule,
            env_rng,
            sample_rng,
        }
    }

    pub fn horizon(&self) -> usize {
        self.env.spec().horizon
    }

    pub fn reset_env(&mut self) -> crate::env::EnvState {
        self.env.reset(&mut self.env_rng)
    }

    /// Steps the environment with the clamped action and stores the
    /// transition in `Z_I`.
    pub fn step_and_store(
        &mut self,
        state: &crate::env::EnvState,
        action: &[f64],
    ) -> Result<(crate::env::EnvState, Transition)> {
        let applied: Vec<f64> = action.iter().map(|v| clamp_unit(*v)).collect();
        let next = self.env.step(state, &applied)?;
        let tr = Transition {
            x: state.vector.clone(),
            a: applied,
            x_next: next.vector.clone(),
            terminal: next.t == self.horizon(),
        };
        self.buffer.push(tr.clone());
        self.env_samples += 1;
        Ok((next, tr))
    }

    /// One `train_inverse` call with the schedule's batch settings.
    pub fn train(&mut self) -> Result<TrainStats> {
        train_inverse(
            &mut self.model,
            &self.buffer,
            self.schedule.inverse_batches,
            self.schedule.inverse_batch_size,
            &mut self.adam,
            &mut self.sample_rng,
        )
    }

    /// Trains on a buffer other than `Z_I`, drawing from the same stream.
    pub fn train_on(&mut self, buffer: &SampleBuffer) -> Result<TrainStats> {
        train_inverse(
            &mut self.model,
            buffer,
            self.schedule.inverse_batches,
            self.schedule.inverse_batch_size,
            &mut self.adam,
            &mut self.sample_rng,
        )
    }

    /// Appends `n` uniformly random transitions to `Z_I`. A final partial
    /// episode is closed without a terminal flag.
    pub fn collect_random(&mut self, n: usize, rng: &mut impl Rng) -> Result<usize> {
        let ad = self.env.spec().action_dim;
        let mut left = n;
        while left > 0 {
            let mut s = self.reset_env();
            while s.t < self.horizon() && left > 0 {
                let a: Vec<f64> = (0..ad).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                s = self.step_and_store(&s, &a)?.0;
                left -= 1;
            }
            self.buffer.close_episode();
        }
        Ok(n)
    }
}

/// What one iteration did.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub samples_collected: usize,
    pub train: TrainStats,
    pub ppo: Vec<PpoStats>,
    /// Mean of the rewards used by the last policy update, if any.
    pub mean_reward: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub forward_loss: Option<f64>,
}

/// One data-collection strategy.
pub trait Collector: Send {
    fn kind(&self) -> CollectorKind;

    /// Collects one iteration's data and trains the inverse model once.
    fn run_iteration(&mut self, learner: &mut Learner) -> Result<IterationReport>;
}

/// Random warm-up: `n` random samples into `Z_I`, with the inverse model
/// trained once per `episodes_per_iteration · T` samples as if a random
/// collector were running.
pub fn warmup(learner: &mut Learner, n: usize, rng: &mut impl Rng) -> Result<Vec<IterationReport>> {
    let per_iter = learner.schedule.episodes_per_iteration * learner.horizon();
    let mut reports = Vec::new();
    let mut left = n;
    while left > 0 {
        let chunk = left.min(per_iter);
        learner.collect_random(chunk, rng)?;
        left -= chunk;
        reports.push(IterationReport {
            samples_collected: chunk,
            train: learner.train()?,
            ..IterationReport::default()
        });
    }
    Ok(reports)
}
