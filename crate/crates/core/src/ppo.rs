//! Gaussian-policy PPO with a clipped surrogate and GAE advantages.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, DenseNet, Grads, Matrix, ParamId, ParamSet, Tape, GRAD_CLIP_NORM};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Transitions per update (`T_P`).
    pub batch_size: usize,
    pub minibatch_size: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.0,
            batch_size: 2050,
            minibatch_size: 50,
            lr: 1e-3,
            hidden: vec![64, 64],
            init_log_std: 0.0,
        }
    }
}

/// One sampled action with the quantities PPO needs later.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSample {
    /// Unclipped draw from the policy; the environment clamps it.
    pub action: Vec<f64>,
    pub logp: f64,
    pub value: f64,
}

/// Policy network, state-independent log-std, separate value network.
#[derive(Debug, Clone)]
pub struct PolicyAgent {
    config: PpoConfig,
    policy_params: ParamSet,
    policy: DenseNet,
    log_std: ParamId,
    value_params: ParamSet,
    value: DenseNet,
    policy_adam: Adam,
    value_adam: Adam,
}

impl PolicyAgent {
    pub fn new(state_dim: usize, action_dim: usize, config: PpoConfig, rng: &mut impl Rng) -> Self {
        let mut sizes = vec![state_dim];
        sizes.extend(&config.hidden);
        let mut policy_params = ParamSet::new();
        sizes.push(action_dim);
        let policy = DenseNet::new(&mut policy_params, "policy", &sizes, Activation::Identity, rng);
        let log_std = policy_params.push(
            "policy.log_std",
            Matrix::from_vec(1, action_dim, vec![config.init_log_std; action_dim]),
        );
        let mut value_params = ParamSet::new();
        *sizes.last_mut().unwrap() = 1;
        let value = DenseNet::new(&mut value_params, "value", &sizes, Activation::Identity, rng);
        let adam = AdamConfig::with_lr(config.lr);
        PolicyAgent {
            policy_adam: Adam::new(adam, &policy_params),
            value_adam: Adam::new(adam, &value_params),
            config,
            policy_params,
            policy,
            log_std,
            value_params,
            value,
        }
    }

    pub fn config(&self) -> &PpoConfig {
        &self.config
    }

    pub fn state_dim(&self) -> usize {
        self.policy.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.policy.output_dim()
    }

    pub fn policy_params(&self) -> &ParamSet {
        &self.policy_params
    }

    pub fn policy_params_mut(&mut self) -> &mut ParamSet {
        &mut self.policy_params
    }

    pub fn value_params(&self) -> &ParamSet {
        &self.value_params
    }

    pub fn log_std(&self) -> &[f64] {
        self.policy_params.get(self.log_std).as_slice()
    }

    /// Overwrites the log-std, clamped to its allowed range.
    pub fn set_log_std(&mut self, value: f64) {
        let v = value.clamp(LOG_STD_MIN, LOG_STD_MAX);
        self.policy_params.get_mut(self.log_std).as_mut_slice().fill(v);
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
        self.policy_adam.config.lr = lr;
        self.value_adam.config.lr = lr;
    }

    /// Policy means for a batch of states, one row each.
    pub fn mean_batch(&self, xs: &Matrix) -> Result<Matrix> {
        self.mean_with(&self.policy_params, xs)
    }

    /// Policy means computed with substitute parameters of the same layout,
    /// e.g. a perturbed copy.
    pub fn mean_with(&self, params: &ParamSet, xs: &Matrix) -> Result<Matrix> {
        let mu = self.policy.predict(params, xs)?;
        if !mu.is_finite() {
            return Err(Error::NonFinite("policy mean"));
        }
        Ok(mu)
    }

    pub fn mean(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mean_batch(&Matrix::row_vector(x))?.into_vec())
    }

    pub fn value_batch(&self, xs: &Matrix) -> Result<Vec<f64>> {
        let v = self.value.predict(&self.value_params, xs)?;
        if !v.is_finite() {
            return Err(Error::NonFinite("value estimate"));
        }
        Ok(v.into_vec())
    }

    pub fn value_of(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_batch(&Matrix::row_vector(x))?[0])
    }

    /// Exact log-density of `a` under `N(μ, diag σ²)`.
    pub fn log_prob(&self, mean: &[f64], a: &[f64]) -> f64 {
        gaussian_log_prob(mean, self.log_std(), a)
    }

    /// Samples `a ~ N(μ(x), diag(exp(2·logstd)))`.
    pub fn act(&self, x: &[f64], rng: &mut impl Rng) -> Result<ActionSample> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("policy input"));
        }
        let mean = self.mean(x)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(self.log_std())
            .map(|(m, ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let logp = self.log_prob(&mean, &action);
        Ok(ActionSample {
            action,
            logp,
            value: self.value_of(x)?,
        })
    }

    /// Loss value and gradients for one minibatch, without updating.
    pub fn loss_and_grads(&self, mb: &Minibatch) -> Result<(PpoLoss, Grads, Grads)> {
        let n = mb.len();
        if n == 0 {
            return Err(Error::EmptyBuffer);
        }
        let cfg = &self.config;
        let ad = self.action_dim();
        let log_std = self.log_std().to_vec();
        let inv_var: Vec<f64> = log_std.iter().map(|l| (-2.0 * l).exp()).collect();

        let mut tape = Tape::new(&self.policy_params);
        let x = tape.constant(mb.states.clone());
        let mu_var = self.policy.forward(&mut tape, x)?;
        let mu = tape.value(mu_var)?;
        let mut d_mu = Matrix::zeros(n, ad);
        let mut d_log_std = vec![0.0; ad];
        let (mut surrogate, mut clipped, mut kl) = (0.0, 0, 0.0);
        for r in 0..n {
            let a = mb.actions.row(r);
            let logp = gaussian_log_prob(mu.row(r), &log_std, a);
            let ratio = (logp - mb.logp_old[r]).exp();
            if !ratio.is_finite() {
                return Err(Error::NonFinite("probability ratio"));
            }
            let adv = mb.advantages[r];
            let unclipped = ratio * adv;
            let clipped_term = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip) * adv;
            surrogate -= unclipped.min(clipped_term);
            kl += mb.logp_old[r] - logp;
            if clipped_term < unclipped {
                clipped += 1;
                continue;
            }
            // d(−ratio·Â)/d logp, averaged over the minibatch
            let g = -adv * ratio / n as f64;
            for i in 0..ad {
                let z = a[i] - mu.get(r, i);
                d_mu.set(r, i, g * z * inv_var[i]);
                d_log_std[i] += g * (z * z * inv_var[i] - 1.0);
            }
        }
        let entropy: f64 = log_std.iter().map(|l| l + 0.5 + HALF_LN_2PI).sum();
        for d in &mut d_log_std {
            *d -= cfg.entropy_coef;
        }
        let mut policy_grads = tape.backward_from(&[(mu_var, d_mu)])?;
        policy_grads
            .get_mut(self.log_std)
            .as_mut_slice()
            .iter_mut()
            .zip(&d_log_std)
            .for_each(|(g, d)| *g += d);

        let mut vtape = Tape::new(&self.value_params);
        let vx = vtape.constant(mb.states.clone());
        let v = self.value.forward(&mut vtape, vx)?;
        let target = Matrix::from_vec(n, 1, mb.returns.clone());
        let vloss = vtape.squared_error(v, target, None, cfg.value_coef / n as f64)?;
        let value_loss = vtape.value(vloss)?.get(0, 0);
        let value_grads = vtape.backward(vloss)?;

        let surrogate = surrogate / n as f64;
        let loss = PpoLoss {
            total: surrogate + value_loss - cfg.entropy_coef * entropy,
            surrogate,
            value: value_loss,
            entropy,
            clip_fraction: clipped as f64 / n as f64,
            approx_kl: kl / n as f64,
        };
        Ok((loss, policy_grads, value_grads))
    }

    /// One clipped Adam step on each network.
    pub fn train_minibatch(&mut self, mb: &Minibatch) -> Result<PpoLoss> {
        let (loss, mut pg, mut vg) = self.loss_and_grads(mb)?;
        pg.clip_global_norm(GRAD_CLIP_NORM);
        vg.clip_global_norm(GRAD_CLIP_NORM);
        self.policy_adam.step(&mut self.policy_params, &pg)?;
        self.value_adam.step(&mut self.value_params, &vg)?;
        for v in self.policy_params.get_mut(self.log_std).as_mut_slice() {
            *v = v.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
        Ok(loss)
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], a: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(a)
        .map(|((m, ls), x)| {
            let z = (x - m) * (-ls).exp();
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Minibatch components of [`PpoLoss`] plus diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PpoLoss {
    pub total: f64,
    /// Mean of `−min(ratio·Â, clip(ratio)·Â)`.
    pub surrogate: f64,
    /// `c_v` times the mean squared value error.
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Per-sample clipped surrogate `min(ratio·Â, clip(ratio, 1−ε, 1+ε)·Â)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - clip, 1.0 + clip) * advantage)
}

/// Stacked training inputs for [`PolicyAgent::loss_and_grads`].
#[derive(Debug, Clone, PartialEq)]
pub struct Minibatch {
    pub states: Matrix,
    pub actions: Matrix,
    pub logp_old: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.logp_old.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp_old.is_empty()
    }
}

/// One policy-buffer entry. `reward` is filled in right before the update.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutStep {
    pub x: Vec<f64>,
    pub action: Vec<f64>,
    pub logp: f64,
    pub value: f64,
    pub reward: f64,
    pub terminal: bool,
    pub x_next: Vec<f64>,
}

/// The policy buffer `Z_P`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RolloutBuffer {
    pub steps: Vec<RolloutStep>,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, step: RolloutStep) {
        self.steps.push(step);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn clear(&mut self) {
        self.steps.clear();
    }

    /// Episode slices, split after each terminal step.
    pub fn episode_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, s) in self.steps.iter().enumerate() {
            if s.terminal {
                out.push(start..i + 1);
                start = i + 1;
            }
        }
        if start < self.steps.len() {
            out.push(start..self.steps.len());
        }
        out
    }

    pub fn set_rewards(&mut self, rewards: &[f64]) -> Result<()> {
        if rewards.len() != self.steps.len() {
            return Err(shape_err("rewards", self.steps.len(), rewards.len()));
        }
        for (s, r) in self.steps.iter_mut().zip(rewards) {
            s.reward = *r;
        }
        Ok(())
    }
}

/// GAE over a flat trajectory. `values` carries one extra bootstrap entry.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    terminals: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n + 1 {
        return Err(shape_err("gae values", n + 1, values.len()));
    }
    if terminals.len() != n {
        return Err(shape_err("gae terminals", n, terminals.len()));
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if terminals[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Shifts and scales to zero mean and unit (population) variance.
pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v -= mean;
        if std > 1e-12 {
            *v /= std;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PpoStats {
    pub minibatches_per_epoch: usize,
    pub mean_reward: f64,
    pub mean_return: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub log_std: f64,
}

/// Runs `epochs` passes of shuffled minibatch updates over the full buffer,
/// then empties it.
pub fn ppo_update(agent: &mut PolicyAgent, buffer: &mut RolloutBuffer, rng: &mut impl Rng) -> Result<PpoStats> {
    let cfg = agent.config.clone();
    if buffer.len() != cfg.batch_size {
        return Err(Error::BufferSize {
            expected: cfg.batch_size,
            actual: buffer.len(),
        });
    }
    let n = buffer.len();
    let steps = &buffer.steps;
    let rewards: Vec<f64> = steps.iter().map(|s| s.reward).collect();
    let terminals: Vec<bool> = steps.iter().map(|s| s.terminal).collect();
    let mut values: Vec<f64> = steps.iter().map(|s| s.value).collect();
    let last = &steps[n - 1];
    values.push(if last.terminal {
        0.0
    } else {
        agent.value_of(&last.x_next)?
    });
    let (mut advantages, returns) = compute_gae(&rewards, &values, &terminals, cfg.gamma, cfg.lambda)?;
    normalize(&mut advantages);

    let states = Matrix::from_rows(&steps.iter().map(|s| s.x.as_slice()).collect::<Vec<_>>());
    let actions = Matrix::from_rows(&steps.iter().map(|s| s.action.as_slice()).collect::<Vec<_>>());
    let mut order: Vec<usize> = (0..n).collect();
    let mut stats = PpoStats {
        minibatches_per_epoch: n.div_ceil(cfg.minibatch_size),
        mean_reward: rewards.iter().sum::<f64>() / n as f64,
        mean_return: returns.iter().sum::<f64>() / n as f64,
        ..PpoStats::default()
    };
    let mut count = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let mb = Minibatch {
                states: gather(&states, chunk),
                actions: gather(&actions, chunk),
                logp_old: chunk.iter().map(|&i| steps[i].logp).collect(),
                advantages: chunk.iter().map(|&i| advantages[i]).collect(),
                returns: chunk.iter().map(|&i| returns[i]).collect(),
            };
            let loss = agent.train_minibatch(&mb)?;
            stats.surrogate += loss.surrogate;
            stats.value_loss += loss.value;
            stats.clip_fraction += loss.clip_fraction;
            stats.approx_kl += loss.approx_kl;
            count += 1;
        }
    }
    if count > 0 {
        let c = count as f64;
        stats.surrogate /= c;
        stats.value_loss /= c;
        stats.clip_fraction /= c;
        stats.approx_kl /= c;
    }
    stats.log_std = agent.log_std().iter().sum::<f64>() / agent.action_dim() as f64;
    buffer.clear();
    Ok(stats)
}

fn gather(m: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_rows(&rows.iter().map(|&r| m.row(r)).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use proptest::prelude::*;
    use rand::Rng;

    fn agent(seed: u64) -> PolicyAgent {
        let cfg = PpoConfig {
            hidden: vec![8, 8],
            batch_size: 20,
            minibatch_size: 5,
            ..PpoConfig::default()
        };
        PolicyAgent::new(3, 2, cfg, &mut stream(seed, Stream::PolicyInit))
    }

    #[test]
    fn log_prob_matches_closed_form_density() {
        let a = agent(0);
        let mut rng = stream(1, Stream::PolicyActions);
        for _ in 0..20 {
            let mu = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let sigma = 1.0f64;
            let density: f64 = (0..2)
                .map(|i| {
                    (-(x[i] - mu[i]) * (x[i] - mu[i]) / (2.0 * sigma * sigma)).exp()
                        / (sigma * (2.0 * std::f64::consts::PI).sqrt())
                })
                .product();
            assert!((a.log_prob(&mu, &x) - density.ln()).abs() < 1e-12);
        }
        // non-unit σ
        let lp = gaussian_log_prob(&[0.5], &[0.3f64.ln()], &[1.1]);
        let want = (-(0.6f64 * 0.6) / (2.0 * 0.09)).exp() / (0.3 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((lp - want.ln()).abs() < 1e-12);
    }

    #[test]
    fn tiny_std_concentrates_on_mean() {
        let mut a = agent(2);
        a.set_log_std(-7.0);
        assert_eq!(a.log_std(), &[LOG_STD_MIN, LOG_STD_MIN]);
        let sigma = LOG_STD_MIN.exp();
        let mut rng = stream(3, Stream::PolicyActions);
        let x = [0.1, -0.2, 0.3];
        let mean = a.mean(&x).unwrap();
        for _ in 0..100 {
            let s = a.act(&x, &mut rng).unwrap();
            for (v, m) in s.action.iter().zip(&mean) {
                assert!((v - m).abs() < 4.0 * sigma);
            }
        }
    }

    #[test]
    fn act_is_deterministic_given_rng() {
        let a = agent(4);
        let s1 = a.act(&[0.0, 1.0, 0.5], &mut stream(9, Stream::PolicyActions)).unwrap();
        let s2 = a.act(&[0.0, 1.0, 0.5], &mut stream(9, Stream::PolicyActions)).unwrap();
        assert_eq!(s1, s2);
        assert!(a
            .act(&[f64::NAN, 0.0, 0.0], &mut stream(9, Stream::PolicyActions))
            .is_err());
    }

    #[test]
    fn gae_base_cases() {
        let (a, r) = compute_gae(&[2.0], &[0.5, 9.0], &[true], 0.99, 0.95).unwrap();
        assert_eq!(a, vec![1.5]);
        assert_eq!(r, vec![2.0]);
        let rewards = [1.0, -2.0, 0.5, 3.0];
        let values = [0.2, 0.4, -0.1, 0.7, 1.3];
        let (a, _) = compute_gae(&rewards, &values, &[false; 4], 1.0, 1.0).unwrap();
        for t in 0..4 {
            let want = rewards[t..].iter().sum::<f64>() + values[4] - values[t];
            assert!((a[t] - want).abs() < 1e-12);
        }
        let (a, r) = compute_gae(&[0.0; 5], &[0.0; 6], &[false; 5], 0.99, 0.95).unwrap();
        assert!(a.iter().chain(&r).all(|v| *v == 0.0));
        assert!(compute_gae(&[0.0; 3], &[0.0; 3], &[false; 3], 0.99, 0.95).is_err());
    }

    #[test]
    fn gae_stops_at_terminals() {
        let (a, _) = compute_gae(&[1.0, 1.0], &[0.0, 0.0, 5.0], &[true, false], 0.9, 0.9).unwrap();
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!((a[1] - (1.0 + 0.9 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn surrogate_branches() {
        assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
        assert_eq!(clipped_surrogate(1.4, 2.0, 0.2), 1.2 * 2.0);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
    }

    proptest! {
        #[test]
        fn surrogate_is_pessimistic(ratio in 0.0f64..3.0, adv in -5.0f64..5.0) {
            let s = clipped_surrogate(ratio, adv, 0.2);
            prop_assert!(s <= ratio * adv + 1e-12);
            prop_assert!(s <= ratio.clamp(0.8, 1.2) * adv + 1e-12);
            if (0.8..=1.2).contains(&ratio) {
                prop_assert!((s - ratio * adv).abs() < 1e-12);
            }
        }

        #[test]
        fn normalized_advantages_are_standard(v in proptest::collection::vec(-100.0f64..100.0, 2..200)) {
            let mut v = v;
            let spread = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            normalize(&mut v);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-6);
            prop_assert!((std - 1.0).abs() < 1e-6);
        }
    }

    fn minibatch(a: &PolicyAgent, ratio_shift: f64, adv: f64, rng: &mut impl Rng) -> Minibatch {
        let n = 6;
        let states = Matrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
        let means = a.mean_batch(&states).unwrap();
        let actions = Matrix::from_fn(n, 2, |r, c| means.get(r, c) + rng.gen_range(-0.5..0.5));
        let logp_old = (0..n)
            .map(|r| a.log_prob(means.row(r), actions.row(r)) - ratio_shift)
            .collect();
        Minibatch {
            states,
            actions,
            logp_old,
            advantages: vec![adv; n],
            returns: vec![0.3; n],
        }
    }

    #[test]
    fn unit_ratio_gives_minus_mean_advantage() {
        let a = agent(5);
        let mb = minibatch(&a, 0.0, 0.8, &mut stream(6, Stream::PolicyMinibatch));
        let (loss, _, _) = a.loss_and_grads(&mb).unwrap();
        assert!((loss.surrogate + 0.8).abs() < 1e-12);
        assert_eq!(loss.clip_fraction, 0.0);
    }

    fn surrogate_at(a: &PolicyAgent, mb: &Minibatch) -> f64 {
        a.loss_and_grads(mb).unwrap().0.surrogate
    }

    #[test]
    fn surrogate_gradient_matches_finite_differences() {
        let a = agent(7);
        let mb = minibatch(&a, 0.05, 1.3, &mut stream(8, Stream::PolicyMinibatch));
        let (_, grads, _) = a.loss_and_grads(&mb).unwrap();
        let h = 1e-6;
        for id in a.policy_params.ids() {
            for k in [0, a.policy_params.get(id).as_slice().len() - 1] {
                let mut p = a.clone();
                p.policy_params.get_mut(id).as_mut_slice()[k] += h;
                let up = surrogate_at(&p, &mb);
                p.policy_params.get_mut(id).as_mut_slice()[k] -= 2.0 * h;
                let down = surrogate_at(&p, &mb);
                let fd = (up - down) / (2.0 * h);
                let an = grads.get(id).as_slice()[k];
                assert!(
                    (fd - an).abs() < 1e-6 * (1.0 + fd.abs()),
                    "{} {k}: {fd} vs {an}",
                    a.policy_params.name(id)
                );
            }
        }
    }

    #[test]
    fn fully_clipped_regime_has_zero_policy_gradient() {
        let a = agent(9);
        // ratio = e^{0.5} > 1 + ε with positive advantages: every sample clipped
        let mb = minibatch(&a, 0.5, 1.0, &mut stream(10, Stream::PolicyMinibatch));
        let (loss, grads, _) = a.loss_and_grads(&mb).unwrap();
        assert_eq!(loss.clip_fraction, 1.0);
        assert_eq!(grads.global_norm(), 0.0);
        let h = 1e-5;
        for id in a.policy_params.ids() {
            let mut p = a.clone();
            p.policy_params.get_mut(id).as_mut_slice()[0] += h;
            let up = surrogate_at(&p, &mb);
            p.policy_params.get_mut(id).as_mut_slice()[0] -= 2.0 * h;
            let down = surrogate_at(&p, &mb);
            assert!(((up - down) / (2.0 * h)).abs() < 1e-9);
        }
    }

    fn filled_buffer(a: &PolicyAgent, n: usize, rng: &mut impl Rng) -> RolloutBuffer {
        let mut buf = RolloutBuffer::new();
        for i in 0..n {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = a.act(&x, rng).unwrap();
            buf.push(RolloutStep {
                x: x.clone(),
                action: s.action,
                logp: s.logp,
                value: s.value,
                reward: rng.gen_range(-1.0..0.0),
                terminal: (i + 1) % 10 == 0,
                x_next: x,
            });
        }
        buf
    }

    #[test]
    fn update_checks_size_and_clears_buffer() {
        let mut a = agent(11);
        let mut rng = stream(12, Stream::PolicyActions);
        let mut short = filled_buffer(&a, 19, &mut rng);
        assert!(matches!(
            ppo_update(&mut a, &mut short, &mut rng),
            Err(Error::BufferSize {
                expected: 20,
                actual: 19
            })
        ));
        let mut buf = filled_buffer(&a, 20, &mut rng);
        let stats = ppo_update(&mut a, &mut buf, &mut rng).unwrap();
        assert!(buf.is_empty());
        assert_eq!(stats.minibatches_per_epoch, 4);
    }

    #[test]
    fn default_batch_gives_41_minibatches() {
        let cfg = PpoConfig::default();
        assert_eq!(cfg.batch_size.div_ceil(cfg.minibatch_size), 41);
        assert_eq!(cfg.batch_size % cfg.minibatch_size, 0);
    }

    #[test]
    fn zero_lr_leaves_policy_unchanged() {
        let mut a = agent(13);
        a.set_lr(0.0);
        let mut rng = stream(14, Stream::PolicyActions);
        let probe = Matrix::from_fn(4, 3, |r, c| (r as f64 - c as f64) * 0.3);
        let before = (a.mean_batch(&probe).unwrap(), a.log_std().to_vec());
        let mut buf = filled_buffer(&a, 20, &mut rng);
        ppo_update(&mut a, &mut buf, &mut rng).unwrap();
        assert_eq!((a.mean_batch(&probe).unwrap(), a.log_std().to_vec()), before);
    }

    #[test]
    fn episode_ranges_split_at_terminals() {
        let a = agent(15);
        let buf = filled_buffer(&a, 25, &mut stream(16, Stream::PolicyActions));
        assert_eq!(buf.episode_ranges(), vec![0..10, 10..20, 20..25]);
    }
}
