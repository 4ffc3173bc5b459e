//! Strategies driven by a PPO agent: adversarial, curiosity and noise.
//!
//! All three share the same loop. Each step goes to both `Z_I` and the
//! policy buffer `Z_P`; whenever the cumulative step counter reaches a
//! multiple of `T_P` the rewards for everything in `Z_P` are computed from
//! the models as they are at that moment and PPO runs on them.

use rand::Rng;
use rand_distr::StandardNormal;

use super::forward::ForwardModel;
use super::{shape_reward, Collector, CollectorConfig, CollectorKind, IterationReport, Learner, NoiseConfig};
use crate::buffer::Transition;
use crate::env::clamp_unit;
use crate::error::{Error, Result};
use crate::nn::{Matrix, ParamSet};
use crate::ppo::{ppo_update, PolicyAgent, RolloutBuffer, RolloutStep};
use crate::rng::LabRng;

/// Adaptive parameter-space perturbation.
#[derive(Debug, Clone)]
pub struct NoiseState {
    pub sigma: f64,
    pub config: NoiseConfig,
    perturbed: Option<ParamSet>,
    rng: LabRng,
}

impl NoiseState {
    pub fn new(config: NoiseConfig, rng: LabRng) -> Self {
        NoiseState {
            sigma: config.initial_sigma,
            config,
            perturbed: None,
            rng,
        }
    }

    /// Fresh perturbed copy of the policy weights; the log-std is left alone.
    pub fn perturb(&mut self, agent: &PolicyAgent) -> &ParamSet {
        let mut p = agent.policy_params().clone();
        let sigma = self.sigma;
        for id in p.ids().collect::<Vec<_>>() {
            if p.name(id).ends_with("log_std") {
                continue;
            }
            for v in p.get_mut(id).as_mut_slice() {
                *v += sigma * self.rng.sample::<f64, _>(StandardNormal);
            }
        }
        self.perturbed.insert(p)
    }

    pub fn perturbed(&self) -> Option<&ParamSet> {
        self.perturbed.as_ref()
    }

    /// Shrinks `σ` when the perturbed policy strayed further than `d*`,
    /// grows it otherwise.
    pub fn adapt(&mut self, distance: f64) {
        if distance > self.config.target_distance {
            self.sigma /= self.config.adaptation;
        } else {
            self.sigma *= self.config.adaptation;
        }
    }
}

/// What turns the stored transitions into rewards (and how actions are
/// picked, for the noise baseline).
#[derive(Debug, Clone)]
pub enum Driver {
    /// Inverse-model loss, shaped by `−|L − δ|` when `stabilize` is set.
    Adversarial { delta: f64, stabilize: bool },
    Curiosity {
        model: ForwardModel,
        batches: usize,
        batch_size: usize,
        rng: LabRng,
    },
    /// Greedy actions from a perturbed policy copy; PPO sees the raw loss.
    Noise(NoiseState),
}

#[derive(Debug, Clone)]
pub struct PolicyCollector {
    pub agent: PolicyAgent,
    pub rollout: RolloutBuffer,
    pub driver: Driver,
    /// Cumulative environment steps taken by this collector.
    pub counter: usize,
    action_rng: LabRng,
    minibatch_rng: LabRng,
}

impl PolicyCollector {
    pub fn new(agent: PolicyAgent, driver: Driver, action_rng: LabRng, minibatch_rng: LabRng) -> Self {
        PolicyCollector {
            agent,
            rollout: RolloutBuffer::new(),
            driver,
            counter: 0,
            action_rng,
            minibatch_rng,
        }
    }

    /// Builds the driver matching `config.kind`.
    pub fn driver_for(
        config: &CollectorConfig,
        state_dim: usize,
        action_dim: usize,
        init_rng: &mut impl Rng,
        aux_rng: LabRng,
    ) -> Result<Driver> {
        Ok(match config.kind {
            CollectorKind::Adversarial => Driver::Adversarial {
                delta: config.delta,
                stabilize: config.stabilize,
            },
            CollectorKind::Curiosity => Driver::Curiosity {
                model: ForwardModel::new(state_dim, action_dim, &config.curiosity, init_rng),
                batches: config.curiosity.forward_batches,
                batch_size: config.curiosity.batch_size,
                rng: aux_rng,
            },
            CollectorKind::Noise => Driver::Noise(NoiseState::new(config.noise, aux_rng)),
            other => return Err(Error::Config(format!("{other} is not a policy-driven collector"))),
        })
    }

    /// Rewards the next PPO update would see for the current `Z_P`.
    pub fn pending_rewards(&self, learner: &Learner) -> Result<Vec<f64>> {
        let ranges = self.rollout.episode_ranges();
        let steps = &self.rollout.steps;
        let transition = |s: &RolloutStep| Transition {
            x: s.x.clone(),
            a: s.action.iter().map(|v| clamp_unit(*v)).collect(),
            x_next: s.x_next.clone(),
            terminal: s.terminal,
        };
        match &self.driver {
            Driver::Adversarial { .. } | Driver::Noise(_) => {
                let episodes: Vec<Vec<Transition>> = ranges
                    .iter()
                    .map(|r| steps[r.clone()].iter().map(transition).collect())
                    .collect();
                let refs: Vec<&[Transition]> = episodes.iter().map(|e| e.as_slice()).collect();
                let losses = learner.model.episode_losses(&refs)?.into_iter().flatten();
                Ok(match &self.driver {
                    Driver::Adversarial { delta, stabilize: true } => losses.map(|l| shape_reward(l, *delta)).collect(),
                    _ => losses.collect(),
                })
            }
            Driver::Curiosity { model, .. } => {
                if steps.is_empty() {
                    return Ok(Vec::new());
                }
                let xs = Matrix::from_rows(&steps.iter().map(|s| s.x.as_slice()).collect::<Vec<_>>());
                let clamped: Vec<Vec<f64>> = steps
                    .iter()
                    .map(|s| s.action.iter().map(|v| clamp_unit(*v)).collect())
                    .collect();
                let a = Matrix::from_rows(&clamped);
                let xn = Matrix::from_rows(&steps.iter().map(|s| s.x_next.as_slice()).collect::<Vec<_>>());
                model.losses(&xs, &a, &xn)
            }
        }
    }

    fn update(&mut self, learner: &Learner, report: &mut IterationReport) -> Result<()> {
        let rewards = self.pending_rewards(learner)?;
        self.rollout.set_rewards(&rewards)?;
        let stats = ppo_update(&mut self.agent, &mut self.rollout, &mut self.minibatch_rng)?;
        report.mean_reward = Some(stats.mean_reward);
        report.ppo.push(stats);
        Ok(())
    }

    fn choose(&mut self, x: &[f64]) -> Result<(Vec<f64>, f64, f64, f64)> {
        match &self.driver {
            Driver::Noise(noise) => {
                let perturbed = noise
                    .perturbed()
                    .ok_or(Error::Config("noise policy not perturbed".into()))?;
                let row = Matrix::row_vector(x);
                let action = self.agent.mean_with(perturbed, &row)?.into_vec();
                let clean = self.agent.mean(x)?;
                let gap = (action.iter().zip(&clean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                    / action.len() as f64)
                    .sqrt();
                let logp = self.agent.log_prob(&clean, &action);
                Ok((action, logp, self.agent.value_of(x)?, gap))
            }
            _ => {
                let s = self.agent.act(x, &mut self.action_rng)?;
                Ok((s.action, s.logp, s.value, 0.0))
            }
        }
    }
}

impl Collector for PolicyCollector {
    fn kind(&self) -> CollectorKind {
        match self.driver {
            Driver::Adversarial { .. } => CollectorKind::Adversarial,
            Driver::Curiosity { .. } => CollectorKind::Curiosity,
            Driver::Noise(_) => CollectorKind::Noise,
        }
    }

    fn run_iteration(&mut self, learner: &mut Learner) -> Result<IterationReport> {
        let mut report = IterationReport::default();
        let t_p = self.agent.config().batch_size;
        for _ in 0..learner.schedule.episodes_per_iteration {
            if let Driver::Noise(noise) = &mut self.driver {
                noise.perturb(&self.agent);
            }
            let mut s = learner.reset_env();
            let mut gap_sum = 0.0;
            let mut steps = 0;
            while s.t < learner.horizon() {
                let (action, logp, value, gap) = self.choose(&s.vector)?;
                let (next, tr) = learner.step_and_store(&s, &action)?;
                self.rollout.push(RolloutStep {
                    x: tr.x,
                    action,
                    logp,
                    value,
                    reward: 0.0,
                    terminal: tr.terminal,
                    x_next: tr.x_next,
                });
                self.counter += 1;
                gap_sum += gap;
                steps += 1;
                if self.counter.is_multiple_of(t_p) {
                    self.update(learner, &mut report)?;
                }
                s = next;
            }
            if let Driver::Noise(noise) = &mut self.driver {
                noise.adapt(gap_sum / steps.max(1) as f64);
                report.noise_sigma = Some(noise.sigma);
            }
            report.samples_collected += steps;
        }
        if let Driver::Curiosity {
            model,
            batches,
            batch_size,
            rng,
        } = &mut self.driver
        {
            report.forward_loss = Some(model.train(&learner.buffer, *batches, *batch_size, rng)?);
        }
        report.train = learner.train()?;
        Ok(report)
    }
}
