use rand::seq::index;

use super::{Collector, CollectorKind, IterationReport, Learner};
use crate::buffer::SampleBuffer;
use crate::error::{Error, Result};
use crate::expert_eval::DemoSet;
use crate::rng::LabRng;

/// Trains on expert demonstrations only; the environment is never stepped.
#[derive(Debug, Clone)]
pub struct DemoCollector {
    set: DemoSet,
    episodes_per_iteration: usize,
    rng: LabRng,
}

impl DemoCollector {
    pub fn new(set: DemoSet, episodes_per_iteration: usize, rng: LabRng) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::EmptyDemoSet);
        }
        Ok(DemoCollector {
            set,
            episodes_per_iteration,
            rng,
        })
    }

    pub fn demo_set(&self) -> &DemoSet {
        &self.set
    }

    /// The iteration's training batch: distinct episodes while the set is
    /// big enough, otherwise every episode.
    pub fn sample_batch(&mut self) -> SampleBuffer {
        let n = self.episodes_per_iteration.min(self.set.len());
        let mut buf = SampleBuffer::new();
        for i in index::sample(&mut self.rng, self.set.len(), n) {
            buf.extend_episode(&self.set.episodes[i].transitions());
        }
        buf
    }
}

impl Collector for DemoCollector {
    fn kind(&self) -> CollectorKind {
        CollectorKind::Demo
    }

    fn run_iteration(&mut self, learner: &mut Learner) -> Result<IterationReport> {
        let batch = self.sample_batch();
        Ok(IterationReport {
            samples_collected: 0,
            train: learner.train_on(&batch)?,
            ..IterationReport::default()
        })
    }
}
