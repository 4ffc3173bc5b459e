use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrialConfig;
use super::kde::{linspace, Kde};
use super::trial::{run_trial, TrialLog};
use crate::error::{Error, Result};

pub const CURVE_HEADER: &str = "samples,success_mean,success_ci_low,success_ci_high";
pub const LOSS_PDF_HEADER: &str = "collector,loss,density";
const PDF_POINTS: usize = 256;

/// Mean success across seeds at one sample count, with a 95% normal
/// interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub samples: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl CurvePoint {
    pub fn from_values(samples: usize, values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let half = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            1.96 * var.sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        CurvePoint {
            samples,
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
            n,
        }
    }
}

/// Pools evaluation points of several trials by sample count.
pub fn aggregate_curve(logs: &[&TrialLog]) -> Vec<CurvePoint> {
    let mut by_samples: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for log in logs {
        for p in &log.eval {
            by_samples.entry(p.samples).or_default().push(p.success_rate);
        }
    }
    by_samples
        .into_iter()
        .map(|(s, v)| CurvePoint::from_values(s, &v))
        .collect()
}

pub fn write_curve(path: impl AsRef<Path>, points: &[CurvePoint]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CURVE_HEADER}")?;
    for p in points {
        writeln!(w, "{},{},{},{}", p.samples, p.mean, p.ci_low, p.ci_high)?;
    }
    w.flush()?;
    Ok(())
}

/// Estimated density of early inverse-model losses for one collector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossDensity {
    pub label: String,
    pub loss: Vec<f64>,
    pub density: Vec<f64>,
}

/// Density per group on one shared loss grid. Groups with fewer than two
/// losses are skipped.
pub fn loss_densities(groups: &BTreeMap<String, Vec<f64>>) -> Result<Vec<LossDensity>> {
    let kdes: Vec<(&String, Kde)> = groups
        .iter()
        .filter(|(_, v)| v.len() >= 2)
        .map(|(k, v)| Ok((k, Kde::new(v)?)))
        .collect::<Result<_>>()?;
    if kdes.is_empty() {
        return Ok(Vec::new());
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, k) in &kdes {
        let s = k.support(2);
        lo = lo.min(s[0]);
        hi = hi.max(s[1]);
    }
    let grid = linspace(lo.max(0.0), hi, PDF_POINTS);
    Ok(kdes
        .into_iter()
        .map(|(label, k)| LossDensity {
            label: label.clone(),
            density: grid.iter().map(|&x| k.density(x)).collect(),
            loss: grid.clone(),
        })
        .collect())
}

pub fn write_loss_pdf(path: impl AsRef<Path>, densities: &[LossDensity]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{LOSS_PDF_HEADER}")?;
    for d in densities {
        for (x, y) in d.loss.iter().zip(&d.density) {
            writeln!(w, "{},{},{}", d.label, x, y)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn group_losses(logs: &[&TrialLog]) -> BTreeMap<String, Vec<f64>> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for log in logs {
        groups.entry(log.label.clone()).or_default().extend(&log.batch_losses);
    }
    groups
}

/// Loss densities for a set of logs, grouped by collector label.
pub fn write_logs_loss_pdf(path: impl AsRef<Path>, logs: &[&TrialLog]) -> Result<()> {
    write_loss_pdf(path, &loss_densities(&group_losses(logs))?)
}

/// Writes `config.json`, `log.json`, `curve.csv` and `loss_pdf.csv` for
/// one trial into `dir`.
pub fn write_trial(dir: impl AsRef<Path>, log: &TrialLog) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_config(dir.join("config.json"), &log.config)?;
    fs::write(dir.join("log.json"), serde_json::to_string(log)?)?;
    write_curve(dir.join("curve.csv"), &aggregate_curve(&[log]))?;
    write_logs_loss_pdf(dir.join("loss_pdf.csv"), &[log])
}

pub fn write_config(path: impl AsRef<Path>, config: &TrialConfig) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(config)? + "\n")?;
    Ok(())
}

/// Every `log.json` below `dir`, in path order.
pub fn read_logs(dir: impl AsRef<Path>) -> Result<Vec<TrialLog>> {
    let mut paths = Vec::new();
    collect_logs(dir.as_ref(), &mut paths)?;
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn collect_logs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_logs(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "log.json") {
            out.push(path);
        }
    }
    Ok(())
}

/// Runs every config in parallel, writes each trial under
/// `out/<label>/seed_<seed>/`, then the per-label mean curves and a shared
/// `loss_pdf.csv`. Logs come back in input order.
pub fn sweep(configs: &[TrialConfig], out: impl AsRef<Path>) -> Result<Vec<TrialLog>> {
    let out = out.as_ref();
    let logs: Vec<TrialLog> = configs
        .par_iter()
        .map(|c| {
            let log = run_trial(c)?;
            write_trial(out.join(&log.label).join(format!("seed_{}", c.seed)), &log)?;
            Ok(log)
        })
        .collect::<Result<_>>()?;
    let mut by_label: BTreeMap<&str, Vec<&TrialLog>> = BTreeMap::new();
    for log in &logs {
        by_label.entry(&log.label).or_default().push(log);
    }
    for (label, group) in &by_label {
        write_curve(out.join(label).join("curve.csv"), &aggregate_curve(group))?;
    }
    write_logs_loss_pdf(out.join("loss_pdf.csv"), &logs.iter().collect::<Vec<_>>())?;
    Ok(logs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::trial::EvalPoint;

    fn log_with(label: &str, evals: &[(usize, f64)], losses: &[f64]) -> TrialLog {
        let config = TrialConfig {
            seed: 1,
            ..TrialConfig::default()
        };
        TrialLog {
            label: label.into(),
            eval: evals
                .iter()
                .map(|&(samples, success_rate)| EvalPoint {
                    samples,
                    env_samples: samples,
                    success_rate,
                    n_episodes: 10,
                })
                .collect(),
            iterations: Vec::new(),
            batch_losses: losses.to_vec(),
            ppo: Vec::new(),
            env_samples: 0,
            demo_rejected: 0,
            wall_clock_secs: 0.0,
            error: None,
            config,
        }
    }

    #[test]
    fn single_seed_interval_collapses() {
        let p = CurvePoint::from_values(10, &[0.4]);
        assert_eq!((p.mean, p.ci_low, p.ci_high), (0.4, 0.4, 0.4));
    }

    #[test]
    fn interval_uses_sample_std() {
        // mean 0.5, s = sqrt(((0.2)^2 + 0 + (0.2)^2)/2) = 0.2
        let p = CurvePoint::from_values(0, &[0.3, 0.5, 0.7]);
        let half = 1.96 * 0.2 / 3f64.sqrt();
        assert!((p.mean - 0.5).abs() < 1e-15);
        assert!((p.ci_high - 0.5 - half).abs() < 1e-12);
        assert!((0.5 - p.ci_low - half).abs() < 1e-12);
    }

    #[test]
    fn aggregation_pools_by_samples() {
        let a = log_with("x", &[(0, 0.0), (2000, 0.5)], &[]);
        let b = log_with("x", &[(0, 0.2), (2000, 0.7)], &[]);
        let pts = aggregate_curve(&[&a, &b]);
        assert_eq!(pts.len(), 2);
        assert_eq!((pts[1].samples, pts[1].n), (2000, 2));
        assert!((pts[1].mean - 0.6).abs() < 1e-12);
    }

    #[test]
    fn empty_log_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.csv");
        write_curve(&path, &aggregate_curve(&[])).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), format!("{CURVE_HEADER}\n"));
    }

    #[test]
    fn loss_pdf_shares_a_grid_and_integrates() {
        let a = log_with("adversarial", &[], &[1.0, 1.5, 2.0, 2.5, 1.2]);
        let b = log_with("random", &[], &[0.2, 0.3, 0.1, 0.4, 0.25]);
        let d = loss_densities(&group_losses(&[&a, &b])).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].loss, d[1].loss);
        assert!(d[0].loss[0] >= 0.0);
    }

    #[test]
    fn trial_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let log = log_with("random", &[(0, 0.1), (500, 0.3)], &[0.5, 0.6, 0.7]);
        write_trial(dir.path().join("t"), &log).unwrap();
        let back = read_logs(dir.path()).unwrap();
        assert_eq!(back, vec![log]);
        let curve = fs::read_to_string(dir.path().join("t/curve.csv")).unwrap();
        assert_eq!(curve.lines().nth(2), Some("500,0.3,0.3,0.3"));
        let cfg: TrialConfig =
            serde_json::from_str(&fs::read_to_string(dir.path().join("t/config.json")).unwrap()).unwrap();
        assert_eq!(cfg.seed, 1);
    }
}
