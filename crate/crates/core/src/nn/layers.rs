use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernels;
use super::tape::{Tape, Var};
use super::{Matrix, ParamId, ParamSet};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layer {
    w: ParamId,
    b: ParamId,
}

/// Fully-connected stack: tanh on hidden layers, `output` on the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
    sizes: Vec<usize>,
    output: Activation,
}

impl DenseNet {
    /// `sizes` lists the input width followed by every layer width.
    pub fn new(params: &mut ParamSet, prefix: &str, sizes: &[usize], output: Activation, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "dense net needs at least one layer");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, io)| {
                let (fan_in, fan_out) = (io[0], io[1]);
                let w = params.push_uniform(format!("{prefix}.{i}.w"), fan_out, fan_in, fan_in, rng);
                let b = params.push_uniform(format!("{prefix}.{i}.b"), 1, fan_out, fan_in, rng);
                Layer { w, b }
            })
            .collect();
        DenseNet {
            layers,
            sizes: sizes.to_vec(),
            output,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.w, l.b])
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Tanh
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            let (w, b) = (tape.param(l.w), tape.param(l.b));
            h = tape.linear(h, w, b)?;
            if self.activation_for(i) == Activation::Tanh {
                h = tape.tanh(h)?;
            }
        }
        Ok(h)
    }

    /// Every layer's post-activation output, input excluded.
    pub fn activations(&self, params: &ParamSet, x: &Matrix) -> Result<Vec<Matrix>> {
        if x.cols() != self.input_dim() {
            return Err(shape_err("dense input", self.input_dim(), x.cols()));
        }
        let mut out: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            let input = out.last().unwrap_or(x);
            let mut y = kernels::linear(input, params.get(l.w), params.get(l.b))?;
            if self.activation_for(i) == Activation::Tanh {
                y = y.map(f64::tanh);
            }
            out.push(y);
        }
        Ok(out)
    }

    pub fn predict(&self, params: &ParamSet, x: &Matrix) -> Result<Matrix> {
        Ok(self.activations(params, x)?.pop().expect("at least one layer"))
    }
}

/// Hidden and cell vectors for a batch of independent sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Matrix,
    pub c: Matrix,
}

impl RecurrentState {
    pub fn zeros(batch: usize, width: usize) -> Self {
        RecurrentState {
            h: Matrix::zeros(batch, width),
            c: Matrix::zeros(batch, width),
        }
    }

    pub fn reset(&mut self) {
        self.h.as_mut_slice().fill(0.0);
        self.c.as_mut_slice().fill(0.0);
    }

    pub fn batch(&self) -> usize {
        self.h.rows()
    }

    pub fn width(&self) -> usize {
        self.h.cols()
    }
}

/// LSTM-style gated cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Recurrent {
    w: ParamId,
    b: ParamId,
    input: usize,
    width: usize,
}

impl Recurrent {
    pub fn new(params: &mut ParamSet, prefix: &str, input: usize, width: usize, rng: &mut impl Rng) -> Self {
        let fan_in = input + width;
        let w = params.push_uniform(format!("{prefix}.w"), 4 * width, fan_in, width, rng);
        let b = params.push_uniform(format!("{prefix}.b"), 1, 4 * width, width, rng);
        Recurrent { w, b, input, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    /// Records one step; returns the new `[h | c]`.
    pub fn step(&self, tape: &mut Tape<'_>, x: Var, state: Option<Var>) -> Result<Var> {
        let (w, b) = (tape.param(self.w), tape.param(self.b));
        tape.lstm_cell(x, state, w, b)
    }

    /// Hidden part of a `[h | c]` variable.
    pub fn hidden(&self, tape: &mut Tape<'_>, state: Var) -> Result<Var> {
        tape.columns(state, 0, self.width)
    }

    pub fn step_plain(&self, params: &ParamSet, state: &RecurrentState, x: &Matrix) -> Result<RecurrentState> {
        if state.width() != self.width || state.batch() != x.rows() {
            return Err(shape_err(
                "recurrent state",
                format!("{}x{}", x.rows(), self.width),
                format!("{}x{}", state.batch(), state.width()),
            ));
        }
        let hc = state.h.hcat(&state.c);
        let (out, _) = kernels::lstm_forward(x, Some(&hc), params.get(self.w), params.get(self.b))?;
        Ok(RecurrentState {
            h: out.columns(0, self.width),
            c: out.columns(self.width, self.width),
        })
    }
}
