use rand::Rng;

use super::{Collector, CollectorKind, IterationReport, Learner};
use crate::error::Result;
use crate::rng::LabRng;

/// Uniform actions on `[-1, 1]^action_dim`; no agent, no policy updates.
#[derive(Debug, Clone)]
pub struct RandomCollector {
    rng: LabRng,
}

impl RandomCollector {
    pub fn new(rng: LabRng) -> Self {
        RandomCollector { rng }
    }

    pub fn action(&mut self, action_dim: usize) -> Vec<f64> {
        (0..action_dim).map(|_| self.rng.gen_range(-1.0..=1.0)).collect()
    }
}

impl Collector for RandomCollector {
    fn kind(&self) -> CollectorKind {
        CollectorKind::Random
    }

    fn run_iteration(&mut self, learner: &mut Learner) -> Result<IterationReport> {
        let ad = learner.env.spec().action_dim;
        let mut samples = 0;
        for _ in 0..learner.schedule.episodes_per_iteration {
            let mut s = learner.reset_env();
            while s.t < learner.horizon() {
                let a = self.action(ad);
                s = learner.step_and_store(&s, &a)?.0;
                samples += 1;
            }
        }
        Ok(IterationReport {
            samples_collected: samples,
            train: learner.train()?,
            ..IterationReport::default()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::learner;
    use super::*;
    use crate::env::EnvId;
    use crate::rng::{stream, Stream};

    #[test]
    fn action_means_are_near_zero() {
        let mut c = RandomCollector::new(stream(0, Stream::RandomActions));
        let mut sums = [0.0; 2];
        for _ in 0..10_000 {
            let a = c.action(2);
            sums[0] += a[0];
            sums[1] += a[1];
        }
        for s in sums {
            assert!((s / 10_000.0).abs() < 0.05);
        }
    }

    #[test]
    fn iteration_budget_matches_schedule() {
        let mut l = learner(EnvId::ArmReach, 0);
        let mut c = RandomCollector::new(stream(0, Stream::RandomActions));
        let r = c.run_iteration(&mut l).unwrap();
        assert_eq!(r.samples_collected, 2 * 50);
        assert_eq!(l.buffer.len(), 100);
        assert!(r.ppo.is_empty());
        assert_eq!(r.train.batch_losses.len(), 2);
    }
}
