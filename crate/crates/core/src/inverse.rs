//! Recurrent inverse dynamics model `â_t = I(x_t, x_{t+1} | h_t)`.
//!
//! The pair `[x_t; x_{t+1}]` goes through a tanh encoder, a gated recurrent
//! cell carries history within the episode, and a linear head emits the
//! action. Training minimises `β‖a − â‖²` averaged over episode-grained
//! batches drawn from the sample buffer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{SampleBuffer, Transition};
use crate::error::{shape_err, Error, Result};
use crate::nn::{Activation, Adam, DenseNet, Grads, Matrix, ParamSet, Recurrent, RecurrentState, Tape, GRAD_CLIP_NORM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseArch {
    pub state_dim: usize,
    pub action_dim: usize,
    /// Width of each of the encoder layers.
    pub hidden: usize,
    pub encoder_layers: usize,
    /// Recurrent cell width.
    pub recurrent: usize,
    pub beta: f64,
}

impl InverseArch {
    pub fn new(state_dim: usize, action_dim: usize, hidden: usize, recurrent: usize) -> Self {
        InverseArch {
            state_dim,
            action_dim,
            hidden,
            encoder_layers: 3,
            recurrent,
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct InverseModel {
    arch: InverseArch,
    params: ParamSet,
    encoder: DenseNet,
    cell: Recurrent,
    head: DenseNet,
    state: RecurrentState,
}

/// `β Σ_i (a_i − â_i)²`.
pub fn action_loss(a: &[f64], a_hat: &[f64], beta: f64) -> Result<f64> {
    if a.len() != a_hat.len() {
        return Err(shape_err("action_loss", a.len(), a_hat.len()));
    }
    Ok(beta * a.iter().zip(a_hat).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

impl InverseModel {
    pub fn new(arch: InverseArch, rng: &mut impl Rng) -> Self {
        let mut params = ParamSet::new();
        let mut sizes = vec![2 * arch.state_dim];
        sizes.extend(std::iter::repeat_n(arch.hidden, arch.encoder_layers));
        let encoder = DenseNet::new(&mut params, "encoder", &sizes, Activation::Tanh, rng);
        let cell = Recurrent::new(&mut params, "recurrent", arch.hidden, arch.recurrent, rng);
        let head = DenseNet::new(
            &mut params,
            "head",
            &[arch.recurrent, arch.action_dim],
            Activation::Identity,
            rng,
        );
        InverseModel {
            arch,
            params,
            encoder,
            cell,
            head,
            state: RecurrentState::zeros(1, arch.recurrent),
        }
    }

    pub fn arch(&self) -> &InverseArch {
        &self.arch
    }

    pub fn beta(&self) -> f64 {
        self.arch.beta
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Current single-episode recurrent state.
    pub fn recurrent_state(&self) -> &RecurrentState {
        &self.state
    }

    /// Zeroes `h` (and `c`) at an episode boundary.
    pub fn reset_episode(&mut self) {
        self.state.reset();
    }

    /// Predicts the action between `x_t` and `x_next`, advancing `h`.
    pub fn predict(&mut self, x_t: &[f64], x_next: &[f64]) -> Result<Vec<f64>> {
        let mut state = std::mem::replace(&mut self.state, RecurrentState::zeros(0, 0));
        let out = self.predict_batch(&mut state, &Matrix::row_vector(x_t), &Matrix::row_vector(x_next));
        self.state = state;
        Ok(out?.into_vec())
    }

    /// Batched prediction for independent episodes, one row each; `state`
    /// must have one row per input row and is advanced in place.
    pub fn predict_batch(&self, state: &mut RecurrentState, xs: &Matrix, x_next: &Matrix) -> Result<Matrix> {
        let sd = self.arch.state_dim;
        if xs.cols() != sd || x_next.cols() != sd || xs.rows() != x_next.rows() {
            return Err(shape_err(
                "inverse input",
                format!("{}x{sd}", xs.rows()),
                format!("{:?} / {:?}", xs.shape(), x_next.shape()),
            ));
        }
        let features = self.encoder.predict(&self.params, &xs.hcat(x_next))?;
        *state = self.cell.step_plain(&self.params, state, &features)?;
        self.head.predict(&self.params, &state.h)
    }

    /// `β‖a − I(x, x_next | h)‖²` for the current step; advances `h`.
    pub fn raw_loss(&mut self, x: &[f64], a: &[f64], x_next: &[f64]) -> Result<f64> {
        let a_hat = self.predict(x, x_next)?;
        action_loss(a, &a_hat, self.arch.beta)
    }

    /// Replays each episode from a fresh state and returns per-step
    /// predictions. Episodes are processed together, longest first.
    pub fn replay(&self, episodes: &[&[Transition]]) -> Result<Vec<Vec<Vec<f64>>>> {
        let order = longest_first(episodes);
        let max_len = order.first().map_or(0, |&i| episodes[i].len());
        let mut out: Vec<Vec<Vec<f64>>> = episodes.iter().map(|e| Vec::with_capacity(e.len())).collect();
        let mut state = RecurrentState::zeros(order.len(), self.arch.recurrent);
        for t in 0..max_len {
            let active: Vec<usize> = order.iter().copied().take_while(|&i| episodes[i].len() > t).collect();
            if active.len() < state.batch() {
                state = RecurrentState {
                    h: state.h.top_rows(active.len()),
                    c: state.c.top_rows(active.len()),
                };
            }
            let xs = Matrix::from_rows(&active.iter().map(|&i| episodes[i][t].x.as_slice()).collect::<Vec<_>>());
            let xn = Matrix::from_rows(
                &active
                    .iter()
                    .map(|&i| episodes[i][t].x_next.as_slice())
                    .collect::<Vec<_>>(),
            );
            let pred = self.predict_batch(&mut state, &xs, &xn)?;
            for (r, &i) in active.iter().enumerate() {
                out[i].push(pred.row(r).to_vec());
            }
        }
        Ok(out)
    }

    /// Per-step `L_I` for each episode, replayed from `h = 0`.
    pub fn episode_losses(&self, episodes: &[&[Transition]]) -> Result<Vec<Vec<f64>>> {
        let preds = self.replay(episodes)?;
        episodes
            .iter()
            .zip(preds)
            .map(|(ep, p)| {
                ep.iter()
                    .zip(p)
                    .map(|(t, a_hat)| action_loss(&t.a, &a_hat, self.arch.beta))
                    .collect()
            })
            .collect()
    }

    /// Mean `L_I` over all transitions of `sequences` and its gradient,
    /// with backpropagation through time inside each sequence.
    pub fn loss_and_grads(&self, sequences: &[&[Transition]]) -> Result<(f64, Grads)> {
        let total: usize = sequences.iter().map(|s| s.len()).sum();
        if total == 0 {
            return Err(Error::EmptyBuffer);
        }
        let order = longest_first(sequences);
        let max_len = sequences[order[0]].len();
        let scale = self.arch.beta / total as f64;
        let mut tape = Tape::new(&self.params);
        let mut state = None;
        let mut terms = Vec::with_capacity(max_len);
        let mut rows = order.len();
        for t in 0..max_len {
            let active: Vec<usize> = order.iter().copied().take_while(|&i| sequences[i].len() > t).collect();
            if let Some(s) = state {
                if active.len() < rows {
                    state = Some(tape.top_rows(s, active.len())?);
                }
            }
            rows = active.len();
            let mut input = Matrix::zeros(rows, 2 * self.arch.state_dim);
            let mut target = Matrix::zeros(rows, self.arch.action_dim);
            for (r, &i) in active.iter().enumerate() {
                let tr = &sequences[i][t];
                check_transition(&self.arch, tr)?;
                let row = input.row_mut(r);
                row[..self.arch.state_dim].copy_from_slice(&tr.x);
                row[self.arch.state_dim..].copy_from_slice(&tr.x_next);
                target.row_mut(r).copy_from_slice(&tr.a);
            }
            let x = tape.constant(input);
            let features = self.encoder.forward(&mut tape, x)?;
            let s = self.cell.step(&mut tape, features, state)?;
            state = Some(s);
            let h = self.cell.hidden(&mut tape, s)?;
            let pred = self.head.forward(&mut tape, h)?;
            terms.push(tape.squared_error(pred, target, None, scale)?);
        }
        let loss = tape.sum(&terms)?;
        let value = tape.value(loss)?.get(0, 0);
        let grads = tape.backward(loss)?;
        Ok((value, grads))
    }

    /// One clipped Adam step on `sequences`; returns the pre-update loss.
    pub fn train_step(&mut self, sequences: &[&[Transition]], adam: &mut Adam) -> Result<f64> {
        let (loss, mut grads) = self.loss_and_grads(sequences)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("inverse loss"));
        }
        grads.clip_global_norm(GRAD_CLIP_NORM);
        adam.step(&mut self.params, &grads)?;
        Ok(loss)
    }

    /// Writes `"AXIM" | u32 len | arch JSON | tensor list`.
    pub fn save(&self, w: &mut impl Write) -> Result<()> {
        let meta = serde_json::to_vec(&self.arch)?;
        w.write_all(b"AXIM")?;
        w.write_all(&(meta.len() as u32).to_le_bytes())?;
        w.write_all(&meta)?;
        self.params.write_to(w)
    }

    pub fn load(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"AXIM" {
            return Err(Error::Format("bad inverse-model magic".into()));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut meta = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut meta)?;
        let arch: InverseArch = serde_json::from_slice(&meta)?;
        let params = ParamSet::read_from(r)?;
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let mut model = InverseModel::new(arch, &mut rng);
        model.params.check_layout(&params)?;
        model.params = params;
        Ok(model)
    }

    pub fn save_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::load(&mut BufReader::new(File::open(path)?))
    }
}

fn check_transition(arch: &InverseArch, t: &Transition) -> Result<()> {
    if t.x.len() != arch.state_dim || t.x_next.len() != arch.state_dim {
        return Err(shape_err(
            "transition state",
            arch.state_dim,
            t.x.len().max(t.x_next.len()),
        ));
    }
    if t.a.len() != arch.action_dim {
        return Err(shape_err("transition action", arch.action_dim, t.a.len()));
    }
    Ok(())
}

/// Indices sorted by decreasing length; stable so ties keep their order.
fn longest_first<T>(seqs: &[&[T]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..seqs.len()).filter(|&i| !seqs[i].is_empty()).collect();
    order.sort_by(|&a, &b| seqs[b].len().cmp(&seqs[a].len()));
    order
}

/// Per-call training summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub batch_losses: Vec<f64>,
}

impl TrainStats {
    pub fn mean_loss(&self) -> f64 {
        if self.batch_losses.is_empty() {
            return 0.0;
        }
        self.batch_losses.iter().sum::<f64>() / self.batch_losses.len() as f64
    }

    /// Number of transitions the call touched.
    pub fn samples_touched(&self, batch_size: usize) -> usize {
        self.batch_losses.len() * batch_size
    }
}

/// `n_batches` Adam steps on episode-grained batches of `batch_size`
/// transitions drawn uniformly from `buffer`.
pub fn train_inverse(
    model: &mut InverseModel,
    buffer: &SampleBuffer,
    n_batches: usize,
    batch_size: usize,
    adam: &mut Adam,
    rng: &mut impl Rng,
) -> Result<TrainStats> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    let mut stats = TrainStats::default();
    for _ in 0..n_batches {
        let batch = buffer.sample_episode_batch(batch_size, rng)?;
        stats.batch_losses.push(model.train_step(&batch, adam)?);
    }
    Ok(stats)
}
