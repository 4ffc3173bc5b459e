use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::collectors::{CollectorConfig, CollectorKind, Schedule};
use crate::env::{env_spec, EnvId};
use crate::error::{Error, Result};
use crate::inverse::InverseArch;
use crate::ppo::PpoConfig;

/// Inverse-model network shape and optimiser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseConfig {
    pub hidden: usize,
    pub encoder_layers: usize,
    pub recurrent: usize,
    pub beta: f64,
    pub lr: f64,
}

impl Default for InverseConfig {
    fn default() -> Self {
        InverseConfig {
            hidden: 256,
            encoder_layers: 3,
            recurrent: 256,
            beta: 1.0,
            lr: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Evaluate whenever this many more samples have been collected.
    pub every_samples: usize,
    pub n_eval: usize,
    /// Size of the held-out demonstration set evaluation draws from.
    pub demo_episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            every_samples: 10_000,
            n_eval: 500,
            demo_episodes: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Reduced budget for a single-machine comparison.
    Desk,
    /// The full 200-iteration schedule at width 256.
    Full,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::Full => "full",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

/// Everything that determines a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialConfig {
    pub env: EnvId,
    pub collector: CollectorConfig,
    pub seed: u64,
    pub iterations: usize,
    pub schedule: Schedule,
    pub inverse: InverseConfig,
    pub ppo: PpoConfig,
    pub eval: EvalConfig,
    /// How many leading inverse-model batch losses the log keeps.
    pub loss_history_batches: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self::preset(Preset::Full, EnvId::PushBlock, CollectorKind::Adversarial, 0)
    }
}

impl TrialConfig {
    pub fn preset(preset: Preset, env: EnvId, kind: CollectorKind, seed: u64) -> Self {
        let base = TrialConfig {
            env,
            collector: CollectorConfig::new(kind),
            seed,
            iterations: 200,
            schedule: Schedule::default(),
            inverse: InverseConfig::default(),
            ppo: PpoConfig::default(),
            eval: EvalConfig::default(),
            loss_history_batches: 2000,
        };
        match preset {
            Preset::Full => base,
            Preset::Desk => TrialConfig {
                iterations: 60,
                inverse: InverseConfig {
                    hidden: 64,
                    recurrent: 64,
                    ..InverseConfig::default()
                },
                eval: EvalConfig {
                    every_samples: 2000,
                    n_eval: 100,
                    demo_episodes: 500,
                },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.collector.validate()?;
        let positive = [
            ("iterations", self.iterations),
            ("episodes_per_iteration", self.schedule.episodes_per_iteration),
            ("inverse_batch_size", self.schedule.inverse_batch_size),
            ("inverse.hidden", self.inverse.hidden),
            ("inverse.recurrent", self.inverse.recurrent),
            ("inverse.encoder_layers", self.inverse.encoder_layers),
            ("ppo.batch_size", self.ppo.batch_size),
            ("ppo.minibatch_size", self.ppo.minibatch_size),
            ("eval.every_samples", self.eval.every_samples),
            ("eval.n_eval", self.eval.n_eval),
            ("eval.demo_episodes", self.eval.demo_episodes),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.ppo.batch_size < self.ppo.minibatch_size {
            return Err(Error::Config("ppo batch must hold at least one minibatch".into()));
        }
        if !(self.inverse.lr >= 0.0 && self.ppo.lr >= 0.0 && self.inverse.beta > 0.0) {
            return Err(Error::Config("learning rates must be >= 0 and beta > 0".into()));
        }
        Ok(())
    }

    pub fn inverse_arch(&self) -> InverseArch {
        let spec = env_spec(self.env);
        InverseArch {
            state_dim: spec.state_dim,
            action_dim: spec.action_dim,
            hidden: self.inverse.hidden,
            encoder_layers: self.inverse.encoder_layers,
            recurrent: self.inverse.recurrent,
            beta: self.inverse.beta,
        }
    }

    /// Samples one collecting iteration takes from the environment.
    pub fn samples_per_iteration(&self) -> usize {
        self.schedule.episodes_per_iteration * env_spec(self.env).horizon
    }

    pub fn warmup_samples(&self) -> usize {
        self.collector.effective_warmup(self.env)
    }

    /// Environment samples the trial must log.
    pub fn expected_env_samples(&self) -> usize {
        match self.collector.kind {
            CollectorKind::Demo => 0,
            _ => self.iterations * self.samples_per_iteration() + self.warmup_samples(),
        }
    }

    /// Short name distinguishing ablation variants, e.g. `adversarial-raw`.
    pub fn label(&self) -> String {
        let c = &self.collector;
        let mut s = c.kind.to_string();
        if c.kind == CollectorKind::Adversarial {
            if !c.stabilize {
                s.push_str("-raw");
            } else if c.delta != 1.5 {
                s.push_str(&format!("-delta{}", c.delta));
            }
        }
        s
    }
}
