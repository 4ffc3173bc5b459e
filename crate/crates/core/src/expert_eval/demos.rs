//! Expert demonstrations and their on-disk record format.
//!
//! A demo file is line oriented:
//!
//! ```text
//! advexp-demos 1 <env_id> <episodes>
//! episode <index> <steps>
//! s <x_0 components>
//! a <a_0 components>
//! s <x_1 components>
//! ...
//! s <x_T components>
//! ```
//!
//! Numbers use the shortest representation that parses back to the same
//! `f64`, so a write/read cycle is exact.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;

use super::expert::expert_action;
use crate::buffer::Transition;
use crate::env::{Env, EnvId};
use crate::error::{Error, Result};

/// Smallest acceptance rate before the expert is declared broken.
const MIN_ACCEPTANCE: f64 = 0.01;
/// Attempts made before the acceptance rate is judged.
const MIN_ATTEMPTS: usize = 100;

/// One successful expert rollout: `states` holds `x_0..x_T`, `actions`
/// holds `a_0..a_{T-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoEpisode {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub success: bool,
}

impl DemoEpisode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn initial_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("demo has states")
    }

    /// The episode as buffer transitions, terminal on the last step.
    pub fn transitions(&self) -> Vec<Transition> {
        let n = self.actions.len();
        (0..n)
            .map(|t| Transition {
                x: self.states[t].clone(),
                a: self.actions[t].clone(),
                x_next: self.states[t + 1].clone(),
                terminal: t + 1 == n,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub env_id: EnvId,
    pub episodes: Vec<DemoEpisode>,
}

/// Demonstrations plus the filter bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoGeneration {
    pub set: DemoSet,
    pub attempted: usize,
    pub rejected: usize,
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "advexp-demos 1 {} {}", self.env_id, self.episodes.len())?;
        for (i, ep) in self.episodes.iter().enumerate() {
            writeln!(w, "episode {i} {}", ep.len())?;
            for t in 0..ep.len() {
                write_row(w, 's', &ep.states[t])?;
                write_row(w, 'a', &ep.actions[t])?;
            }
            write_row(w, 's', ep.final_state())?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let mut next = move || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format("unexpected end of demo file".into()))?
                .map_err(Error::from)
        };
        let header = next()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "advexp-demos" || parts[1] != "1" {
            return Err(Error::Format(format!("bad demo header `{header}`")));
        }
        let env_id: EnvId = parts[2].parse()?;
        let count = parse_usize(parts[3])?;
        let mut episodes = Vec::with_capacity(count);
        for i in 0..count {
            let line = next()?;
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "episode" || parse_usize(parts[1])? != i {
                return Err(Error::Format(format!("bad episode line `{line}`")));
            }
            let steps = parse_usize(parts[2])?;
            let mut states = Vec::with_capacity(steps + 1);
            let mut actions = Vec::with_capacity(steps);
            for _ in 0..steps {
                states.push(parse_row(&next()?, 's')?);
                actions.push(parse_row(&next()?, 'a')?);
            }
            states.push(parse_row(&next()?, 's')?);
            episodes.push(DemoEpisode {
                states,
                actions,
                success: true,
            });
        }
        Ok(DemoSet { env_id, episodes })
    }

    pub fn save_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn write_row(w: &mut impl Write, tag: char, values: &[f64]) -> Result<()> {
    write!(w, "{tag}")?;
    for v in values {
        write!(w, " {v:?}")?;
    }
    writeln!(w)?;
    Ok(())
}

fn parse_row(line: &str, tag: char) -> Result<Vec<f64>> {
    let mut it = line.split_whitespace();
    if it.next() != Some(tag.encode_utf8(&mut [0; 4])) {
        return Err(Error::Format(format!("expected `{tag}` row, got `{line}`")));
    }
    it.map(|s| {
        s.parse::<f64>()
            .map_err(|e| Error::Format(format!("bad number `{s}`: {e}")))
    })
    .collect()
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|e| Error::Format(format!("bad count `{s}`: {e}")))
}

/// Rolls out the expert once from a fresh reset.
pub fn expert_rollout(env: &Env, rng: &mut impl Rng) -> Result<DemoEpisode> {
    let mut s = env.reset(rng);
    let mut states = vec![s.vector.clone()];
    let mut actions = Vec::with_capacity(env.spec().horizon);
    while s.t < env.spec().horizon {
        let a = expert_action(env, &s.vector);
        s = env.step(&s, &a)?;
        actions.push(a);
        states.push(s.vector.clone());
    }
    Ok(DemoEpisode {
        success: env.goal_distance(&s) < env.spec().success_eps,
        states,
        actions,
    })
}

/// Collects `n` successful, non-trivial expert episodes. The non-triviality
/// filter is skipped for `chain_reach`.
pub fn generate_demos(env_id: EnvId, n: usize, rng: &mut impl Rng) -> Result<DemoGeneration> {
    if n == 0 {
        return Err(Error::Config("demo count must be at least 1".into()));
    }
    let env = Env::new(env_id);
    let spec = *env.spec();
    let mut episodes = Vec::with_capacity(n);
    let mut attempted = 0;
    while episodes.len() < n {
        let ep = expert_rollout(&env, rng)?;
        attempted += 1;
        let initial = env.state_from_vector(ep.initial_state())?;
        let non_trivial = env_id == EnvId::ChainReach || env.goal_distance(&initial) >= spec.nontrivial_eps;
        if ep.success && non_trivial {
            episodes.push(ep);
        }
        if attempted >= MIN_ATTEMPTS && (episodes.len() as f64) < MIN_ACCEPTANCE * attempted as f64 {
            return Err(Error::ExpertBroken {
                accepted: episodes.len(),
                attempted,
            });
        }
    }
    Ok(DemoGeneration {
        rejected: attempted - episodes.len(),
        attempted,
        set: DemoSet { env_id, episodes },
    })
}
