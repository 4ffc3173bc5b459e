//! Forward dynamics model driving the curiosity baseline.

use rand::Rng;

use super::CuriosityConfig;
use crate::buffer::SampleBuffer;
use crate::error::{shape_err, Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, DenseNet, Matrix, ParamSet, Tape, GRAD_CLIP_NORM};

/// `φ̂(x') = f(φ(x), a)` with loss `½‖φ̂(x') − φ(x')‖²`.
///
/// `φ` is trained together with `f`; the target `φ(x')` is held fixed
/// inside each gradient step.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    params: ParamSet,
    phi: DenseNet,
    f: DenseNet,
    adam: Adam,
    state_dim: usize,
    action_dim: usize,
}

impl ForwardModel {
    pub fn new(state_dim: usize, action_dim: usize, cfg: &CuriosityConfig, rng: &mut impl Rng) -> Self {
        let mut params = ParamSet::new();
        let mut sizes = vec![state_dim];
        sizes.extend(std::iter::repeat_n(cfg.feature_dim, cfg.feature_layers.max(1)));
        let phi = DenseNet::new(&mut params, "phi", &sizes, Activation::Tanh, rng);
        let f = DenseNet::new(
            &mut params,
            "forward",
            &[cfg.feature_dim + action_dim, cfg.forward_hidden, cfg.feature_dim],
            Activation::Identity,
            rng,
        );
        let adam = Adam::new(AdamConfig::with_lr(cfg.lr), &params);
        ForwardModel {
            params,
            phi,
            f,
            adam,
            state_dim,
            action_dim,
        }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn features(&self, xs: &Matrix) -> Result<Matrix> {
        self.phi.predict(&self.params, xs)
    }

    /// Per-row `L_F`.
    pub fn losses(&self, xs: &Matrix, actions: &Matrix, x_next: &Matrix) -> Result<Vec<f64>> {
        self.check(xs, actions, x_next)?;
        let pred = self.f.predict(&self.params, &self.features(xs)?.hcat(actions))?;
        let target = self.features(x_next)?;
        Ok((0..xs.rows())
            .map(|r| {
                0.5 * pred
                    .row(r)
                    .iter()
                    .zip(target.row(r))
                    .map(|(p, t)| (p - t) * (p - t))
                    .sum::<f64>()
            })
            .collect())
    }

    fn check(&self, xs: &Matrix, actions: &Matrix, x_next: &Matrix) -> Result<()> {
        if xs.cols() != self.state_dim || x_next.cols() != self.state_dim {
            return Err(shape_err(
                "forward-model state",
                self.state_dim,
                xs.cols().max(x_next.cols()),
            ));
        }
        if actions.cols() != self.action_dim || actions.rows() != xs.rows() || x_next.rows() != xs.rows() {
            return Err(shape_err("forward-model action", self.action_dim, actions.cols()));
        }
        Ok(())
    }

    /// One clipped Adam step on the mean `L_F`; returns the pre-step loss.
    pub fn train_step(&mut self, xs: &Matrix, actions: &Matrix, x_next: &Matrix) -> Result<f64> {
        self.check(xs, actions, x_next)?;
        let n = xs.rows();
        if n == 0 {
            return Err(Error::EmptyBuffer);
        }
        let target = self.features(x_next)?;
        let mut grads = {
            let mut tape = Tape::new(&self.params);
            let x = tape.constant(xs.clone());
            let phi = self.phi.forward(&mut tape, x)?;
            let a = tape.constant(actions.clone());
            let input = tape.concat(phi, a)?;
            let pred = self.f.forward(&mut tape, input)?;
            let loss = tape.squared_error(pred, target, None, 0.5 / n as f64)?;
            let value = tape.value(loss)?.get(0, 0);
            if !value.is_finite() {
                return Err(Error::NonFinite("forward-model loss"));
            }
            (tape.backward(loss)?, value)
        };
        grads.0.clip_global_norm(GRAD_CLIP_NORM);
        self.adam.step(&mut self.params, &grads.0)?;
        Ok(grads.1)
    }

    /// `n_batches` steps on uniform draws from `buffer`; returns the mean loss.
    pub fn train(
        &mut self,
        buffer: &SampleBuffer,
        n_batches: usize,
        batch_size: usize,
        rng: &mut impl Rng,
    ) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..n_batches {
            let batch = buffer.sample_uniform(batch_size, rng)?;
            let xs = Matrix::from_rows(&batch.iter().map(|t| t.x.as_slice()).collect::<Vec<_>>());
            let a = Matrix::from_rows(&batch.iter().map(|t| t.a.as_slice()).collect::<Vec<_>>());
            let xn = Matrix::from_rows(&batch.iter().map(|t| t.x_next.as_slice()).collect::<Vec<_>>());
            total += self.train_step(&xs, &a, &xn)?;
        }
        Ok(if n_batches > 0 { total / n_batches as f64 } else { 0.0 })
    }
}
