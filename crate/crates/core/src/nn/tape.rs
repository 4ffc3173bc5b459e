//! Reverse-mode gradient computation over a recorded forward pass.
//!
//! A [`Tape`] borrows the parameter set, records every operation applied to
//! batched activations, and replays them backwards to produce [`Grads`].
//! Operations are coarse (affine map, tanh, gated recurrent cell, slicing,
//! squared error) so that one LSTM step is a single node.

use std::sync::atomic::{AtomicU64, Ordering};

use super::kernels::{self, LstmCache};
use super::{Grads, Matrix, ParamId, ParamSet};
use crate::error::{shape_err, Error, Result};

static NEXT_TAPE: AtomicU64 = AtomicU64::new(1);

/// Handle to a value recorded on a particular [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    tape: u64,
    idx: usize,
}

enum Op {
    Constant,
    Param(ParamId),
    Linear {
        x: usize,
        w: usize,
        b: usize,
    },
    Tanh(usize),
    /// Output is `[h | c]`; `state` is `None` for a zero initial state.
    LstmCell {
        x: usize,
        state: Option<usize>,
        w: usize,
        b: usize,
        cache: Box<LstmCache>,
    },
    Columns {
        src: usize,
        start: usize,
    },
    TopRows {
        src: usize,
    },
    Concat(usize, usize),
    /// `scale * Σ_r weight_r * ||pred_r - target_r||²`, a 1×1 value.
    SquaredError {
        pred: usize,
        target: Matrix,
        weights: Option<Vec<f64>>,
        scale: f64,
    },
    Sum(Vec<usize>),
}

struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the borrowed set.
    value: Option<Matrix>,
}

/// Computation record for one forward pass.
pub struct Tape<'p> {
    id: u64,
    params: &'p ParamSet,
    nodes: Vec<Node>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed),
            params,
            nodes: Vec::new(),
        }
    }

    fn push(&mut self, op: Op, value: Option<Matrix>) -> Var {
        self.nodes.push(Node { op, value });
        Var {
            tape: self.id,
            idx: self.nodes.len() - 1,
        }
    }

    fn idx(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.idx >= self.nodes.len() {
            return Err(Error::Unrecorded);
        }
        Ok(v.idx)
    }

    fn val(&self, idx: usize) -> &Matrix {
        let node = &self.nodes[idx];
        match (&node.value, &node.op) {
            (Some(m), _) => m,
            (None, Op::Param(id)) => self.params.get(*id),
            _ => unreachable!("node without value"),
        }
    }

    /// Value of a recorded variable.
    pub fn value(&self, v: Var) -> Result<&Matrix> {
        let i = self.idx(v)?;
        Ok(self.val(i))
    }

    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(Op::Constant, Some(m))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        assert!(id.0 < self.params.len(), "parameter id out of range");
        self.push(Op::Param(id), None)
    }

    /// `x Wᵀ + b` with `W: out × in` and `b: 1 × out`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xi, wi, bi) = (self.idx(x)?, self.idx(w)?, self.idx(b)?);
        let out = kernels::linear(self.val(xi), self.val(wi), self.val(bi))?;
        Ok(self.push(Op::Linear { x: xi, w: wi, b: bi }, Some(out)))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let out = self.val(xi).map(f64::tanh);
        Ok(self.push(Op::Tanh(xi), Some(out)))
    }

    /// One gated recurrent step. The result is the `[h | c]` matrix.
    pub fn lstm_cell(&mut self, x: Var, state: Option<Var>, w: Var, b: Var) -> Result<Var> {
        let xi = self.idx(x)?;
        let si = state.map(|s| self.idx(s)).transpose()?;
        let (wi, bi) = (self.idx(w)?, self.idx(b)?);
        let (out, cache) = kernels::lstm_forward(self.val(xi), si.map(|s| self.val(s)), self.val(wi), self.val(bi))?;
        Ok(self.push(
            Op::LstmCell {
                x: xi,
                state: si,
                w: wi,
                b: bi,
                cache: Box::new(cache),
            },
            Some(out),
        ))
    }

    pub fn columns(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let si = self.idx(src)?;
        let v = self.val(si);
        if start + len > v.cols() {
            return Err(shape_err("columns", format!("<= {}", v.cols()), start + len));
        }
        let out = v.columns(start, len);
        Ok(self.push(Op::Columns { src: si, start }, Some(out)))
    }

    pub fn top_rows(&mut self, src: Var, n: usize) -> Result<Var> {
        let si = self.idx(src)?;
        let v = self.val(si);
        if n > v.rows() {
            return Err(shape_err("top_rows", format!("<= {}", v.rows()), n));
        }
        let out = v.top_rows(n);
        Ok(self.push(Op::TopRows { src: si }, Some(out)))
    }

    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ai, bi) = (self.idx(a)?, self.idx(b)?);
        let (va, vb) = (self.val(ai), self.val(bi));
        if va.rows() != vb.rows() {
            return Err(shape_err("concat", va.rows(), vb.rows()));
        }
        let out = va.hcat(vb);
        Ok(self.push(Op::Concat(ai, bi), Some(out)))
    }

    /// Weighted sum of squared errors, scaled: a 1×1 loss node.
    pub fn squared_error(&mut self, pred: Var, target: Matrix, weights: Option<Vec<f64>>, scale: f64) -> Result<Var> {
        let pi = self.idx(pred)?;
        let p = self.val(pi);
        if p.shape() != target.shape() {
            return Err(shape_err(
                "squared_error",
                format!("{:?}", p.shape()),
                format!("{:?}", target.shape()),
            ));
        }
        if let Some(w) = &weights {
            if w.len() != p.rows() {
                return Err(shape_err("squared_error weights", p.rows(), w.len()));
            }
        }
        let mut total = 0.0;
        for r in 0..p.rows() {
            let wr = weights.as_ref().map_or(1.0, |w| w[r]);
            let row: f64 = p.row(r).iter().zip(target.row(r)).map(|(a, b)| (a - b) * (a - b)).sum();
            total += wr * row;
        }
        let out = Matrix::from_vec(1, 1, vec![scale * total]);
        Ok(self.push(
            Op::SquaredError {
                pred: pi,
                target,
                weights,
                scale,
            },
            Some(out),
        ))
    }

    /// Sum of scalar (1×1) nodes.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let mut idx = Vec::with_capacity(terms.len());
        let mut total = 0.0;
        for &t in terms {
            let i = self.idx(t)?;
            let v = self.val(i);
            if v.shape() != (1, 1) {
                return Err(shape_err("sum", "1x1", format!("{:?}", v.shape())));
            }
            total += v.get(0, 0);
            idx.push(i);
        }
        Ok(self.push(Op::Sum(idx), Some(Matrix::from_vec(1, 1, vec![total]))))
    }

    /// Gradients of a scalar loss node with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Result<Grads> {
        let li = self.idx(loss)?;
        if self.val(li).shape() != (1, 1) {
            return Err(shape_err("backward loss", "1x1", format!("{:?}", self.val(li).shape())));
        }
        self.backward_from(&[(loss, Matrix::from_vec(1, 1, vec![1.0]))])
    }

    /// Reverse pass seeded with explicit output adjoints `dL/dv` for each
    /// listed variable.
    pub fn backward_from(&self, seeds: &[(Var, Matrix)]) -> Result<Grads> {
        let mut adj: Vec<Option<Matrix>> = Vec::new();
        adj.resize_with(self.nodes.len(), || None);
        for (v, g) in seeds {
            let i = self.idx(*v)?;
            if self.val(i).shape() != g.shape() {
                return Err(shape_err(
                    "backward seed",
                    format!("{:?}", self.val(i).shape()),
                    format!("{:?}", g.shape()),
                ));
            }
            accumulate(&mut adj[i], g);
        }
        let mut grads = self.params.zeros_like();

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = adj[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => grads.tensors[id.0].add_scaled(&g, 1.0),
                Op::Linear { x, w, b } => {
                    if self.needs_grad(*x) {
                        let dx = kernels::linear_backward_input(self.val(*w), &g);
                        accumulate(&mut adj[*x], &dx);
                    }
                    let input = self.val(*x);
                    kernels::accumulate_weight_grad(&g, input, self.grad_slot(*w, &mut adj, &mut grads));
                    kernels::accumulate_bias_grad(&g, self.grad_slot(*b, &mut adj, &mut grads));
                }
                Op::Tanh(x) => {
                    let y = self.val(i);
                    let mut dx = g;
                    for (d, y) in dx.as_mut_slice().iter_mut().zip(y.as_slice()) {
                        *d *= 1.0 - y * y;
                    }
                    accumulate(&mut adj[*x], &dx);
                }
                Op::LstmCell { x, state, w, b, cache } => {
                    let back = kernels::lstm_backward(cache, self.val(*w), &g);
                    accumulate(&mut adj[*x], &back.dx);
                    if let Some(s) = state {
                        accumulate(&mut adj[*s], &back.dstate);
                    }
                    kernels::accumulate_weight_grad(&back.dz, cache.input(), self.grad_slot(*w, &mut adj, &mut grads));
                    kernels::accumulate_bias_grad(&back.dz, self.grad_slot(*b, &mut adj, &mut grads));
                }
                Op::Columns { src, start } => {
                    let s = self.val(*src);
                    let slot = adj[*src].get_or_insert_with(|| Matrix::zeros(s.rows(), s.cols()));
                    for r in 0..g.rows() {
                        let dst = &mut slot.row_mut(r)[*start..*start + g.cols()];
                        for (d, v) in dst.iter_mut().zip(g.row(r)) {
                            *d += v;
                        }
                    }
                }
                Op::TopRows { src } => {
                    let s = self.val(*src);
                    let slot = adj[*src].get_or_insert_with(|| Matrix::zeros(s.rows(), s.cols()));
                    let n = g.as_slice().len();
                    for (d, v) in slot.as_mut_slice()[..n].iter_mut().zip(g.as_slice()) {
                        *d += v;
                    }
                }
                Op::Concat(a, b) => {
                    let ca = self.val(*a).cols();
                    accumulate(&mut adj[*a], &g.columns(0, ca));
                    accumulate(&mut adj[*b], &g.columns(ca, g.cols() - ca));
                }
                Op::SquaredError {
                    pred,
                    target,
                    weights,
                    scale,
                } => {
                    let upstream = g.get(0, 0);
                    let p = self.val(*pred);
                    let mut dp = Matrix::zeros(p.rows(), p.cols());
                    for r in 0..p.rows() {
                        let wr = weights.as_ref().map_or(1.0, |w| w[r]);
                        let k = 2.0 * scale * wr * upstream;
                        for ((d, a), t) in dp.row_mut(r).iter_mut().zip(p.row(r)).zip(target.row(r)) {
                            *d = k * (a - t);
                        }
                    }
                    accumulate(&mut adj[*pred], &dp);
                }
                Op::Sum(terms) => {
                    for &t in terms {
                        accumulate(&mut adj[t], &g);
                    }
                }
            }
        }
        Ok(grads)
    }
}

impl Tape<'_> {
    /// Constants never need adjoints; skipping them saves the input-gradient
    /// product at the first layer.
    fn needs_grad(&self, idx: usize) -> bool {
        !matches!(self.nodes[idx].op, Op::Constant)
    }

    /// Where the adjoint of node `idx` accumulates: straight into the
    /// parameter gradient for leaves, otherwise into the node's slot.
    fn grad_slot<'a>(&self, idx: usize, adj: &'a mut [Option<Matrix>], grads: &'a mut Grads) -> &'a mut Matrix {
        match self.nodes[idx].op {
            Op::Param(id) => &mut grads.tensors[id.0],
            _ => {
                let v = self.val(idx);
                adj[idx].get_or_insert_with(|| Matrix::zeros(v.rows(), v.cols()))
            }
        }
    }
}

fn accumulate(slot: &mut Option<Matrix>, g: &Matrix) {
    match slot {
        Some(acc) => acc.add_scaled(g, 1.0),
        None => *slot = Some(g.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_linear_closed_form() {
        // y = w·x, L = ½y² → dL/dw = y·x
        let mut params = ParamSet::new();
        let w = params.push("w", Matrix::from_vec(1, 1, vec![1.5]));
        let b = params.push("b", Matrix::zeros(1, 1));
        let mut tape = Tape::new(&params);
        let x = tape.constant(Matrix::from_vec(1, 1, vec![-2.0]));
        let (wv, bv) = (tape.param(w), tape.param(b));
        let y = tape.linear(x, wv, bv).unwrap();
        let loss = tape.squared_error(y, Matrix::zeros(1, 1), None, 0.5).unwrap();
        let grads = tape.backward(loss).unwrap();
        let yv = 1.5 * -2.0;
        assert!((grads.get(w).get(0, 0) - yv * -2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut params = ParamSet::new();
        let w = params.push("w", Matrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]));
        let tape_params = params.clone();
        let mut tape = Tape::new(&tape_params);
        let c = tape.constant(Matrix::from_vec(1, 1, vec![7.0]));
        let _ = tape.param(w);
        let loss = tape.squared_error(c, Matrix::zeros(1, 1), None, 1.0).unwrap();
        let grads = tape.backward(loss).unwrap();
        assert_eq!(grads.get(w).max_abs(), 0.0);
    }

    #[test]
    fn foreign_variable_is_rejected() {
        let params = ParamSet::new();
        let mut a = Tape::new(&params);
        let b = Tape::new(&params);
        let v = a.constant(Matrix::zeros(1, 1));
        assert!(matches!(b.backward(v), Err(Error::Unrecorded)));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let params = ParamSet::new();
        let mut a = Tape::new(&params);
        let v = a.constant(Matrix::zeros(2, 1));
        assert!(matches!(a.backward(v), Err(Error::Shape { .. })));
    }
}
