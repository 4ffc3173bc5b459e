//! Episode-contiguous transition storage.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `(x, a, x', ξ)` sample. `a` is the action actually applied, i.e.
/// after clamping to the action box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub x_next: Vec<f64>,
    pub terminal: bool,
}

/// Append-only buffer that remembers where each episode starts. An episode
/// closes at its terminal transition.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleBuffer {
    items: Vec<Transition>,
    starts: Vec<usize>,
    open: bool,
}

impl SampleBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) {
        if !self.open {
            self.starts.push(self.items.len());
            self.open = true;
        }
        if t.terminal {
            self.open = false;
        }
        self.items.push(t);
    }

    /// Ends the open episode without a terminal flag, e.g. when a fixed
    /// sample budget runs out mid-episode.
    pub fn close_episode(&mut self) {
        self.open = false;
    }

    pub fn extend_episode(&mut self, episode: &[Transition]) {
        for t in episode {
            self.push(t.clone());
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn clear(&mut self) {
        self.items.clear();
        self.starts.clear();
        self.open = false;
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    pub fn num_episodes(&self) -> usize {
        self.starts.len()
    }

    pub fn episode(&self, i: usize) -> &[Transition] {
        let start = self.starts[i];
        let end = self.starts.get(i + 1).copied().unwrap_or(self.items.len());
        &self.items[start..end]
    }

    pub fn episodes(&self) -> impl Iterator<Item = &[Transition]> + '_ {
        (0..self.num_episodes()).map(move |i| self.episode(i))
    }

    /// `n` i.i.d. uniform draws with replacement.
    pub fn sample_uniform(&self, n: usize, rng: &mut impl Rng) -> Result<Vec<&Transition>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect())
    }

    /// Exactly `batch_size` transitions made of whole episodes drawn
    /// uniformly with replacement; the last episode is cut to its prefix so
    /// every sequence still starts at an episode boundary.
    pub fn sample_episode_batch(&self, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<&[Transition]>> {
        if self.items.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let mut out = Vec::new();
        let mut remaining = batch_size;
        while remaining > 0 {
            let ep = self.episode(rng.gen_range(0..self.num_episodes()));
            let take = ep.len().min(remaining);
            out.push(&ep[..take]);
            remaining -= take;
        }
        Ok(out)
    }

    /// Debug dump: `episode,step,x0..,a0..,xn0..,terminal`.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        let Some(first) = self.items.first() else {
            writeln!(w, "episode,step,terminal")?;
            return Ok(());
        };
        let mut header = vec!["episode".to_string(), "step".to_string()];
        header.extend((0..first.x.len()).map(|i| format!("x{i}")));
        header.extend((0..first.a.len()).map(|i| format!("a{i}")));
        header.extend((0..first.x_next.len()).map(|i| format!("xn{i}")));
        header.push("terminal".into());
        writeln!(w, "{}", header.join(","))?;
        for (e, ep) in self.episodes().enumerate() {
            for (s, t) in ep.iter().enumerate() {
                let mut row = vec![e.to_string(), s.to_string()];
                row.extend(t.x.iter().chain(&t.a).chain(&t.x_next).map(|v| v.to_string()));
                row.push(u8::from(t.terminal).to_string());
                writeln!(w, "{}", row.join(","))?;
            }
        }
        Ok(())
    }
}
