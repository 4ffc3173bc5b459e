use serde::{Deserialize, Serialize};

use super::{Grads, Matrix, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

/// Bias-corrected Adam moments for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || params.zeros_like().tensors;
        Adam {
            config,
            step: 0,
            m: zeros(),
            v: zeros(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<()> {
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients"));
        }
        if grads.tensors.len() != params.len() {
            return Err(crate::error::shape_err("adam grads", params.len(), grads.tensors.len()));
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(&grads.tensors)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for (((p, &g), m), v) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(vals: Vec<f64>) -> ParamSet {
        let mut p = ParamSet::new();
        let n = vals.len();
        p.push("p", Matrix::from_vec(1, n, vals));
        p
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = one_param(vec![1.0, -2.0]);
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::default(), &p);
        let zeros = p.zeros_like();
        adam.step(&mut p, &zeros).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = one_param(vec![0.0, 0.0, 0.0]);
        let g = Grads {
            tensors: vec![Matrix::from_vec(1, 3, vec![3.0, -1e-3, 250.0])],
        };
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &p);
        adam.step(&mut p, &g).unwrap();
        for (dp, g) in p.tensors()[0].as_slice().iter().zip(g.tensors[0].as_slice()) {
            let want = cfg.lr * g.abs() / (g.abs() + cfg.eps);
            assert!((dp.abs() - want).abs() < 1e-15, "{dp} vs {want}");
            assert_eq!(dp.signum(), -g.signum());
        }
    }

    #[test]
    fn tensors_update_independently() {
        let mut p = ParamSet::new();
        p.push("a", Matrix::from_vec(1, 1, vec![0.0]));
        p.push("b", Matrix::from_vec(1, 1, vec![0.0]));
        let g = Grads {
            tensors: vec![Matrix::from_vec(1, 1, vec![1.0]), Matrix::zeros(1, 1)],
        };
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p, &g).unwrap();
        assert!(p.tensors()[0].get(0, 0) < 0.0);
        assert_eq!(p.tensors()[1].get(0, 0), 0.0);
    }

    #[test]
    fn non_finite_gradients_error() {
        let mut p = one_param(vec![0.0]);
        let g = Grads {
            tensors: vec![Matrix::from_vec(1, 1, vec![f64::NAN])],
        };
        let mut adam = Adam::new(AdamConfig::default(), &p);
        assert!(matches!(adam.step(&mut p, &g), Err(Error::NonFinite(_))));
        assert_eq!(adam.steps(), 0);
    }
}
