use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::TrialConfig;
use crate::collectors::{
    warmup, Collector, CollectorKind, DemoCollector, IterationReport, Learner, PolicyCollector, RandomCollector,
};
use crate::env::env_spec;
use crate::error::Result;
use crate::expert_eval::{evaluate, generate_demos, DemoSet};
use crate::inverse::InverseModel;
use crate::nn::{Adam, AdamConfig};
use crate::ppo::{PolicyAgent, PpoStats};
use crate::rng::{stream, LabRng, Stream};

/// Success rate measured at one point of the sample axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    /// Samples spent so far. For the demo baseline this is the nominal
    /// budget of a sampling collector at the same iteration.
    pub samples: usize,
    pub env_samples: usize,
    pub success_rate: f64,
    pub n_episodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Warmup,
    Collect,
}

/// Inverse-model loss summary for one training round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub phase: Phase,
    pub index: usize,
    pub samples: usize,
    pub loss_mean: f64,
    pub loss_min: f64,
    pub loss_max: f64,
    pub ppo_updates: usize,
    pub mean_reward: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub forward_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLog {
    pub config: TrialConfig,
    pub label: String,
    pub eval: Vec<EvalPoint>,
    pub iterations: Vec<IterationLog>,
    /// Per-batch inverse losses, leading batches only.
    pub batch_losses: Vec<f64>,
    pub ppo: Vec<PpoStats>,
    pub env_samples: usize,
    pub demo_rejected: usize,
    pub wall_clock_secs: f64,
    /// Set when a component failed; the log then stops where it failed.
    pub error: Option<String>,
}

impl TrialLog {
    fn new(config: &TrialConfig) -> Self {
        TrialLog {
            config: config.clone(),
            label: config.label(),
            eval: Vec::new(),
            iterations: Vec::new(),
            batch_losses: Vec::new(),
            ppo: Vec::new(),
            env_samples: 0,
            demo_rejected: 0,
            wall_clock_secs: 0.0,
            error: None,
        }
    }

    pub fn completed(&self) -> bool {
        self.error.is_none()
    }

    pub fn final_success(&self) -> Option<f64> {
        self.eval.last().map(|p| p.success_rate)
    }
}

/// Builds the collector named by the config, drawing every random element
/// from its own stream of `config.seed`.
pub fn build_collector(config: &TrialConfig) -> Result<Box<dyn Collector>> {
    let seed = config.seed;
    let spec = env_spec(config.env);
    Ok(match config.collector.kind {
        CollectorKind::Random => Box::new(RandomCollector::new(stream(seed, Stream::RandomActions))),
        CollectorKind::Demo => {
            let demos = generate_demos(
                config.env,
                config.collector.demo.episodes,
                &mut stream(seed, Stream::DemoTrain),
            )?;
            Box::new(DemoCollector::new(
                demos.set,
                config.collector.demo.episodes_per_iteration,
                stream(seed, Stream::DemoSampling),
            )?)
        }
        kind => {
            let agent = PolicyAgent::new(
                spec.state_dim,
                spec.action_dim,
                config.ppo.clone(),
                &mut stream(seed, Stream::PolicyInit),
            );
            let aux = if kind == CollectorKind::Noise {
                stream(seed, Stream::ParamNoise)
            } else {
                stream(seed, Stream::ForwardSampling)
            };
            let driver = PolicyCollector::driver_for(
                &config.collector,
                spec.state_dim,
                spec.action_dim,
                &mut stream(seed, Stream::ForwardInit),
                aux,
            )?;
            Box::new(PolicyCollector::new(
                agent,
                driver,
                stream(seed, Stream::PolicyActions),
                stream(seed, Stream::PolicyMinibatch),
            ))
        }
    })
}

pub fn build_learner(config: &TrialConfig) -> Learner {
    let model = InverseModel::new(config.inverse_arch(), &mut stream(config.seed, Stream::InverseInit));
    let adam = Adam::new(
        AdamConfig {
            lr: config.inverse.lr,
            ..AdamConfig::default()
        },
        model.params(),
    );
    Learner::new(
        config.env,
        model,
        adam,
        config.schedule,
        stream(config.seed, Stream::Env),
        stream(config.seed, Stream::InverseSampling),
    )
}

struct Run<'c> {
    config: &'c TrialConfig,
    log: TrialLog,
    eval_set: DemoSet,
    eval_rng: LabRng,
    samples: usize,
    next_eval: usize,
}

impl Run<'_> {
    fn evaluate(&mut self, learner: &Learner) -> Result<()> {
        let r = evaluate(
            &learner.model,
            self.config.env,
            &self.eval_set,
            self.config.eval.n_eval,
            &mut self.eval_rng,
        )?;
        self.log.eval.push(EvalPoint {
            samples: self.samples,
            env_samples: learner.env_samples,
            success_rate: r.success_rate,
            n_episodes: r.n_episodes,
        });
        Ok(())
    }

    fn record(
        &mut self,
        learner: &Learner,
        phase: Phase,
        index: usize,
        report: IterationReport,
        nominal: usize,
    ) -> Result<()> {
        self.samples += nominal;
        let losses = &report.train.batch_losses;
        let room = self
            .config
            .loss_history_batches
            .saturating_sub(self.log.batch_losses.len());
        self.log.batch_losses.extend(losses.iter().take(room));
        let (lo, hi) = match losses.first() {
            Some(&first) => losses
                .iter()
                .fold((first, first), |(lo, hi), &v| (lo.min(v), hi.max(v))),
            None => (0.0, 0.0),
        };
        self.log.iterations.push(IterationLog {
            phase,
            index,
            samples: self.samples,
            loss_mean: report.train.mean_loss(),
            loss_min: lo,
            loss_max: hi,
            ppo_updates: report.ppo.len(),
            mean_reward: report.mean_reward,
            noise_sigma: report.noise_sigma,
            forward_loss: report.forward_loss,
        });
        self.log.ppo.extend(report.ppo);
        self.log.env_samples = learner.env_samples;
        if self.samples >= self.next_eval {
            self.evaluate(learner)?;
            let every = self.config.eval.every_samples;
            self.next_eval = (self.samples / every + 1) * every;
        }
        Ok(())
    }

    fn go(&mut self) -> Result<()> {
        let config = self.config;
        let mut learner = build_learner(config);
        let mut collector = build_collector(config)?;
        self.evaluate(&learner)?;

        let warm = config.warmup_samples();
        if warm > 0 {
            let reports = warmup(&mut learner, warm, &mut stream(config.seed, Stream::Warmup))?;
            for (i, r) in reports.into_iter().enumerate() {
                let n = r.samples_collected;
                self.record(&learner, Phase::Warmup, i, r, n)?;
            }
        }

        let per_iter = config.samples_per_iteration();
        for i in 0..config.iterations {
            let r = collector.run_iteration(&mut learner)?;
            let n = if config.collector.kind == CollectorKind::Demo {
                per_iter
            } else {
                r.samples_collected
            };
            self.record(&learner, Phase::Collect, i, r, n)?;
        }
        if self.log.eval.last().map(|p| p.samples) != Some(self.samples) {
            self.evaluate(&learner)?;
        }
        Ok(())
    }
}

/// Runs one trial to completion.
///
/// Invalid configurations are an `Err`. Failures once the trial is under way
/// return the partial log with `error` set.
pub fn run_trial(config: &TrialConfig) -> Result<TrialLog> {
    config.validate()?;
    let start = Instant::now();
    let eval = generate_demos(
        config.env,
        config.eval.demo_episodes,
        &mut stream(config.seed, Stream::DemoEval),
    )?;
    let mut run = Run {
        config,
        log: TrialLog::new(config),
        eval_set: eval.set,
        eval_rng: stream(config.seed, Stream::EvalSubset),
        samples: 0,
        next_eval: config.eval.every_samples,
    };
    run.log.demo_rejected = eval.rejected;
    if let Err(e) = run.go() {
        run.log.error = Some(e.to_string());
    }
    run.log.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(run.log)
}
