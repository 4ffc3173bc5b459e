use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    values: Vec<f64>,
    bandwidth: f64,
}

/// `1.06 σ̂ n^(−1/5)` with the unbiased standard deviation. Constant data
/// falls back to a unit-scale spread so the estimate stays finite.
pub fn silverman_bandwidth(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFewValues { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = if var > 0.0 {
        var.sqrt()
    } else {
        1e-6 * mean.abs().max(1.0)
    };
    Ok(1.06 * sd * (n as f64).powf(-0.2))
}

impl Kde {
    pub fn new(values: &[f64]) -> Result<Self> {
        check_finite(values)?;
        let bandwidth = silverman_bandwidth(values)?;
        Ok(Kde {
            values: values.to_vec(),
            bandwidth,
        })
    }

    /// Uses `bandwidth` as given; a single value is enough.
    pub fn with_bandwidth(values: &[f64], bandwidth: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::TooFewValues { needed: 1, got: 0 });
        }
        check_finite(values)?;
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Config(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Kde {
            values: values.to_vec(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let norm = 1.0 / (self.values.len() as f64 * h * (2.0 * PI).sqrt());
        self.values
            .iter()
            .map(|v| {
                let z = (x - v) / h;
                (-0.5 * z * z).exp()
            })
            .sum::<f64>()
            * norm
    }

    /// `n` evenly spaced points covering the data plus four bandwidths
    /// either side.
    pub fn support(&self, n: usize) -> Vec<f64> {
        let lo = self.values.iter().cloned().fold(f64::INFINITY, f64::min) - 4.0 * self.bandwidth;
        let hi = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 4.0 * self.bandwidth;
        linspace(lo, hi, n)
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("kde input"))
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Density of `values` at each grid point, Silverman bandwidth unless one
/// is given.
pub fn kde(values: &[f64], grid: &[f64], bandwidth: Option<f64>) -> Result<Vec<f64>> {
    let k = match bandwidth {
        Some(h) => Kde::with_bandwidth(values, h)?,
        None => Kde::new(values)?,
    };
    Ok(grid.iter().map(|&x| k.density(x)).collect())
}
