//! Forward/backward kernels shared by the tape and tape-free inference.

use super::matrix::gemm;
use super::Matrix;
use crate::error::{shape_err, Result};

/// `x Wᵀ + b`.
pub fn linear(x: &Matrix, w: &Matrix, b: &Matrix) -> Result<Matrix> {
    if x.cols() != w.cols() {
        return Err(shape_err("linear input", w.cols(), x.cols()));
    }
    if b.shape() != (1, w.rows()) {
        return Err(shape_err(
            "linear bias",
            format!("1x{}", w.rows()),
            format!("{:?}", b.shape()),
        ));
    }
    let (n, out) = (x.rows(), w.rows());
    let mut y = Matrix::zeros(n, out);
    for r in 0..n {
        y.row_mut(r).copy_from_slice(b.as_slice());
    }
    gemm(
        n,
        x.cols(),
        out,
        x.as_slice(),
        false,
        w.as_slice(),
        true,
        1.0,
        y.as_mut_slice(),
    );
    Ok(y)
}

/// `dx = dy W` for `y = x Wᵀ + b`.
pub fn linear_backward_input(w: &Matrix, dy: &Matrix) -> Matrix {
    let (n, inp, out) = (dy.rows(), w.cols(), w.rows());
    let mut dx = Matrix::zeros(n, inp);
    gemm(
        n,
        out,
        inp,
        dy.as_slice(),
        false,
        w.as_slice(),
        false,
        0.0,
        dx.as_mut_slice(),
    );
    dx
}

/// `dW += dyᵀ x`.
pub fn accumulate_weight_grad(dy: &Matrix, x: &Matrix, dw: &mut Matrix) {
    let (n, inp, out) = (x.rows(), x.cols(), dy.cols());
    gemm(
        out,
        n,
        inp,
        dy.as_slice(),
        true,
        x.as_slice(),
        false,
        1.0,
        dw.as_mut_slice(),
    );
}

/// `db += Σ_rows dy`.
pub fn accumulate_bias_grad(dy: &Matrix, db: &mut Matrix) {
    for r in 0..dy.rows() {
        for (d, g) in db.as_mut_slice().iter_mut().zip(dy.row(r)) {
            *d += g;
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Saved activations of one recurrent step.
pub struct LstmCache {
    xh: Matrix,
    /// Activated gates per row, laid out `[i | f | g | o]`.
    gates: Matrix,
    c_prev: Matrix,
    tanh_c: Matrix,
}

/// Gated recurrent step.
///
/// `state` is the previous `[h | c]` (zeros when `None`); `w` is
/// `4H × (E + H)` acting on `[x | h]`, `b` is `1 × 4H`. Gates are ordered
/// input, forget, candidate, output:
///
/// ```text
/// c' = σ(f) ⊙ c + σ(i) ⊙ tanh(g)
/// h' = σ(o) ⊙ tanh(c')
/// ```
pub fn lstm_forward(x: &Matrix, state: Option<&Matrix>, w: &Matrix, b: &Matrix) -> Result<(Matrix, LstmCache)> {
    if !w.rows().is_multiple_of(4) {
        return Err(shape_err("lstm weight rows", "multiple of 4", w.rows()));
    }
    let hid = w.rows() / 4;
    let n = x.rows();
    if w.cols() != x.cols() + hid {
        return Err(shape_err("lstm weight cols", x.cols() + hid, w.cols()));
    }
    let (h_prev, c_prev) = match state {
        Some(s) => {
            if s.shape() != (n, 2 * hid) {
                return Err(shape_err(
                    "lstm state",
                    format!("{n}x{}", 2 * hid),
                    format!("{:?}", s.shape()),
                ));
            }
            (s.columns(0, hid), s.columns(hid, hid))
        }
        None => (Matrix::zeros(n, hid), Matrix::zeros(n, hid)),
    };
    let xh = x.hcat(&h_prev);
    let mut gates = linear(&xh, w, b)?;
    let mut out = Matrix::zeros(n, 2 * hid);
    let mut tanh_c = Matrix::zeros(n, hid);
    for r in 0..n {
        let z = gates.row_mut(r);
        for j in 0..hid {
            z[j] = sigmoid(z[j]);
            z[hid + j] = sigmoid(z[hid + j]);
            z[2 * hid + j] = z[2 * hid + j].tanh();
            z[3 * hid + j] = sigmoid(z[3 * hid + j]);
        }
        let z = gates.row(r);
        let cp = c_prev.row(r);
        let o = out.row_mut(r);
        let tc = tanh_c.row_mut(r);
        for j in 0..hid {
            let c = z[hid + j] * cp[j] + z[j] * z[2 * hid + j];
            tc[j] = c.tanh();
            o[hid + j] = c;
            o[j] = z[3 * hid + j] * tc[j];
        }
    }
    Ok((
        out,
        LstmCache {
            xh,
            gates,
            c_prev,
            tanh_c,
        },
    ))
}

pub struct LstmGrads {
    pub dx: Matrix,
    pub dstate: Matrix,
    /// Pre-activation gate adjoints; feed to [`accumulate_weight_grad`]
    /// with [`LstmCache::input`].
    pub dz: Matrix,
}

impl LstmCache {
    /// The `[x | h]` matrix the gates were computed from.
    pub fn input(&self) -> &Matrix {
        &self.xh
    }
}

/// Backward pass of [`lstm_forward`]; `dout` is the adjoint of `[h' | c']`.
pub fn lstm_backward(cache: &LstmCache, w: &Matrix, dout: &Matrix) -> LstmGrads {
    let hid = w.rows() / 4;
    let n = dout.rows();
    let e = w.cols() - hid;
    let mut dz = Matrix::zeros(n, 4 * hid);
    let mut dc_prev = Matrix::zeros(n, hid);
    for r in 0..n {
        let z = cache.gates.row(r);
        let tc = cache.tanh_c.row(r);
        let cp = cache.c_prev.row(r);
        let d = dout.row(r);
        let dzr = dz.row_mut(r);
        let dcp = dc_prev.row_mut(r);
        for j in 0..hid {
            let (i, f, g, o) = (z[j], z[hid + j], z[2 * hid + j], z[3 * hid + j]);
            let dh = d[j];
            let dc = d[hid + j] + dh * o * (1.0 - tc[j] * tc[j]);
            dzr[j] = dc * g * i * (1.0 - i);
            dzr[hid + j] = dc * cp[j] * f * (1.0 - f);
            dzr[2 * hid + j] = dc * i * (1.0 - g * g);
            dzr[3 * hid + j] = dh * tc[j] * o * (1.0 - o);
            dcp[j] = dc * f;
        }
    }
    let dxh = linear_backward_input(w, &dz);
    let dx = dxh.columns(0, e);
    let dstate = dxh.columns(e, hid).hcat(&dc_prev);
    LstmGrads { dx, dstate, dz }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_cell_stays_at_zero() {
        // gates i = f = o = 0.5 and candidate 0 give c' = h' = 0
        let x = Matrix::zeros(1, 3);
        let w = Matrix::zeros(8, 5);
        let b = Matrix::zeros(1, 8);
        let (out, cache) = lstm_forward(&x, None, &w, &b).unwrap();
        assert_eq!(out.max_abs(), 0.0);
        let g = cache.gates.row(0);
        assert_eq!(&g[..2], &[0.5, 0.5]);
        assert_eq!(&g[2..4], &[0.5, 0.5]);
        assert_eq!(&g[4..6], &[0.0, 0.0]);
        assert_eq!(&g[6..8], &[0.5, 0.5]);
    }

    #[test]
    fn single_unit_matches_hand_algebra() {
        // E = 1, H = 1, all weights 1 on x only, biases 0, x = 1, zero state.
        let x = Matrix::from_vec(1, 1, vec![1.0]);
        let w = Matrix::from_vec(4, 2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let b = Matrix::zeros(1, 4);
        let (out, _) = lstm_forward(&x, None, &w, &b).unwrap();
        let s = sigmoid(1.0);
        let c = s * 1f64.tanh();
        let h = s * c.tanh();
        assert!((out.get(0, 0) - h).abs() < 1e-15);
        assert!((out.get(0, 1) - c).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let x = Matrix::zeros(1, 3);
        assert!(lstm_forward(&x, None, &Matrix::zeros(7, 5), &Matrix::zeros(1, 7)).is_err());
        assert!(lstm_forward(&x, None, &Matrix::zeros(8, 4), &Matrix::zeros(1, 8)).is_err());
        assert!(linear(&x, &Matrix::zeros(2, 4), &Matrix::zeros(1, 2)).is_err());
    }
}
