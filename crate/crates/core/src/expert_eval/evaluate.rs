//! Closed-loop tracking of demonstrated state sequences.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::demos::{DemoEpisode, DemoSet};
use crate::env::{Env, EnvId};
use crate::error::{shape_err, Error, Result};
use crate::inverse::InverseModel;
use crate::nn::{Matrix, RecurrentState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples_collected: usize,
    pub success_rate: f64,
    pub n_episodes: usize,
}

/// Chooses actions that should carry each episode from its current state to
/// the next demonstrated one. Episodes advance in lockstep, one row each.
pub trait Tracker {
    fn begin(&mut self, episodes: &[&DemoEpisode]) -> Result<()>;
    fn actions(&mut self, t: usize, states: &Matrix, targets: &Matrix) -> Result<Matrix>;
}

/// Tracks with `â_t = I(x_t, x̂_{t+1})`, `h` fresh for every episode.
pub struct ModelTracker<'m> {
    model: &'m InverseModel,
    state: RecurrentState,
}

impl<'m> ModelTracker<'m> {
    pub fn new(model: &'m InverseModel) -> Self {
        ModelTracker {
            model,
            state: RecurrentState::zeros(0, model.arch().recurrent),
        }
    }
}

impl Tracker for ModelTracker<'_> {
    fn begin(&mut self, episodes: &[&DemoEpisode]) -> Result<()> {
        self.state = RecurrentState::zeros(episodes.len(), self.model.arch().recurrent);
        Ok(())
    }

    fn actions(&mut self, _t: usize, states: &Matrix, targets: &Matrix) -> Result<Matrix> {
        self.model.predict_batch(&mut self.state, states, targets)
    }
}

/// Feeds back the expert's recorded actions.
#[derive(Default)]
pub struct ReplayTracker {
    actions: Vec<Vec<Vec<f64>>>,
}

impl Tracker for ReplayTracker {
    fn begin(&mut self, episodes: &[&DemoEpisode]) -> Result<()> {
        self.actions = episodes.iter().map(|e| e.actions.clone()).collect();
        Ok(())
    }

    fn actions(&mut self, t: usize, _states: &Matrix, _targets: &Matrix) -> Result<Matrix> {
        Ok(Matrix::from_rows(
            &self.actions.iter().map(|a| a[t].as_slice()).collect::<Vec<_>>(),
        ))
    }
}

/// Runs every episode in `episodes` under `tracker` and reports the
/// fraction whose final task coordinates land within `success_eps` of the
/// demonstrated final state.
pub fn evaluate_with(tracker: &mut dyn Tracker, env: &Env, episodes: &[&DemoEpisode]) -> Result<EvalReport> {
    if episodes.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    let horizon = episodes[0].len();
    if episodes.iter().any(|e| e.len() != horizon) {
        return Err(Error::Format("demo episodes differ in length".into()));
    }
    let ad = env.spec().action_dim;
    let mut states = episodes
        .iter()
        .map(|e| env.state_from_vector(e.initial_state()))
        .collect::<Result<Vec<_>>>()?;
    tracker.begin(episodes)?;
    for t in 0..horizon {
        let xs = Matrix::from_rows(&states.iter().map(|s| s.vector.as_slice()).collect::<Vec<_>>());
        let targets = Matrix::from_rows(&episodes.iter().map(|e| e.states[t + 1].as_slice()).collect::<Vec<_>>());
        let actions = tracker.actions(t, &xs, &targets)?;
        if actions.shape() != (episodes.len(), ad) {
            return Err(shape_err(
                "tracker actions",
                format!("{}x{ad}", episodes.len()),
                format!("{:?}", actions.shape()),
            ));
        }
        for (r, s) in states.iter_mut().enumerate() {
            *s = env.step(s, actions.row(r))?;
        }
    }
    let eps = env.spec().success_eps;
    let successes = states
        .iter()
        .zip(episodes)
        .filter(|(s, e)| {
            let got = env.task_coords(&s.vector);
            let want = env.task_coords(e.final_state());
            (got[0] - want[0]).hypot(got[1] - want[1]) < eps
        })
        .count();
    Ok(EvalReport {
        samples_collected: 0,
        success_rate: successes as f64 / episodes.len() as f64,
        n_episodes: episodes.len(),
    })
}

/// Picks `n_eval` demo episodes: without replacement when the set is large
/// enough, otherwise with replacement.
pub fn sample_episodes<'d>(set: &'d DemoSet, n_eval: usize, rng: &mut impl Rng) -> Result<Vec<&'d DemoEpisode>> {
    if set.is_empty() {
        return Err(Error::EmptyDemoSet);
    }
    if n_eval <= set.len() {
        Ok(index::sample(rng, set.len(), n_eval)
            .into_iter()
            .map(|i| &set.episodes[i])
            .collect())
    } else {
        Ok((0..n_eval)
            .map(|_| &set.episodes[rng.gen_range(0..set.len())])
            .collect())
    }
}

/// Success rate of `model` tracking `n_eval` sampled demonstrations.
pub fn evaluate(
    model: &InverseModel,
    env_id: EnvId,
    set: &DemoSet,
    n_eval: usize,
    rng: &mut impl Rng,
) -> Result<EvalReport> {
    if set.env_id != env_id {
        return Err(Error::Config(format!("demo set is for {}, not {env_id}", set.env_id)));
    }
    let episodes = sample_episodes(set, n_eval, rng)?;
    evaluate_with(&mut ModelTracker::new(model), &Env::new(env_id), &episodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expert_eval::generate_demos;
    use crate::inverse::InverseArch;
    use crate::rng::{stream, Stream};

    #[test]
    fn replaying_expert_actions_always_succeeds() {
        for id in EnvId::ALL {
            let set = generate_demos(id, 20, &mut stream(0, Stream::DemoEval)).unwrap().set;
            let eps: Vec<&DemoEpisode> = set.episodes.iter().collect();
            let r = evaluate_with(&mut ReplayTracker::default(), &Env::new(id), &eps).unwrap();
            assert_eq!(r.success_rate, 1.0, "{id}");
        }
    }

    #[test]
    fn evaluation_leaves_the_model_untouched() {
        let set = generate_demos(EnvId::PointReach, 5, &mut stream(1, Stream::DemoEval))
            .unwrap()
            .set;
        let model = InverseModel::new(InverseArch::new(6, 2, 16, 16), &mut stream(1, Stream::InverseInit));
        let before = model.clone();
        let r = evaluate(&model, EnvId::PointReach, &set, 5, &mut stream(2, Stream::EvalSubset)).unwrap();
        assert!((0.0..=1.0).contains(&r.success_rate));
        assert_eq!(r.n_episodes, 5);
        assert_eq!(model.params(), before.params());
        assert_eq!(model.recurrent_state(), before.recurrent_state());
    }

    #[test]
    fn empty_or_mismatched_sets_are_errors() {
        let model = InverseModel::new(InverseArch::new(6, 2, 8, 8), &mut stream(0, Stream::InverseInit));
        let empty = DemoSet {
            env_id: EnvId::PointReach,
            episodes: vec![],
        };
        let mut rng = stream(0, Stream::EvalSubset);
        assert!(matches!(
            evaluate(&model, EnvId::PointReach, &empty, 3, &mut rng),
            Err(Error::EmptyDemoSet)
        ));
        assert!(evaluate(&model, EnvId::PushBlock, &empty, 3, &mut rng).is_err());
    }

    #[test]
    fn oversampling_uses_replacement() {
        let set = generate_demos(EnvId::PointReach, 3, &mut stream(3, Stream::DemoEval))
            .unwrap()
            .set;
        let picks = sample_episodes(&set, 10, &mut stream(4, Stream::EvalSubset)).unwrap();
        assert_eq!(picks.len(), 10);
        let distinct = sample_episodes(&set, 3, &mut stream(4, Stream::EvalSubset)).unwrap();
        for (i, a) in distinct.iter().enumerate() {
            for b in &distinct[i + 1..] {
                assert!(!std::ptr::eq(*a, *b));
            }
        }
    }
}
