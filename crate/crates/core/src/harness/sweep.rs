//! Parallel grids of experiments over `(tau, beta, gamma)` and label modes.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, LabelChoice};
use super::experiment::run_experiment;
use super::metrics::{format_float, CsvSink};
use crate::bounds::{BoundReport, SweepPoint};
use crate::error::{Error, Result};
use crate::nn::LabelMode;

/// Environment variable capping the number of concurrent sweep points.
pub const THREADS_ENV: &str = "ENTROPIA_THREADS";

pub const SWEEP_HEADER: [&str; 16] = [
    "point",
    "algorithm",
    "gamma",
    "tau",
    "beta",
    "labels",
    "train_err_mean",
    "test_err_mean",
    "train_err_gibbs",
    "test_err_gibbs",
    "pac_bound",
    "h_bound",
    "c_bound",
    "kl_estimate",
    "epsilon",
    "error",
];

/// Cartesian grid of sweep settings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub taus: Vec<f64>,
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub labels: Vec<LabelChoice>,
    /// Holds `tau * beta` at this value: `betas` is ignored and `beta = product / tau`.
    pub fixed_tau_beta: Option<f64>,
}

/// One configuration of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub labels: LabelChoice,
}

impl SweepGrid {
    pub fn points(&self) -> Vec<GridPoint> {
        let mut out = Vec::new();
        for &labels in &self.labels {
            for &gamma in &self.gammas {
                for &tau in &self.taus {
                    match self.fixed_tau_beta {
                        Some(product) => out.push(GridPoint {
                            tau,
                            beta: product / tau,
                            gamma,
                            labels,
                        }),
                        None => out.extend(self.betas.iter().map(|&beta| GridPoint {
                            tau,
                            beta,
                            gamma,
                            labels,
                        })),
                    }
                }
            }
        }
        out
    }
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidConfig(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn point_config(base: &ExperimentConfig, index: usize, p: &GridPoint) -> ExperimentConfig {
    ExperimentConfig {
        tau: Some(p.tau),
        beta: p.beta,
        gamma: p.gamma,
        labels: p.labels,
        out: base
            .out
            .as_ref()
            .map(|d| d.join(format!("point-{index:03}"))),
        ..base.clone()
    }
}

fn label_mode(cfg: &ExperimentConfig) -> LabelMode {
    match cfg.labels {
        LabelChoice::True => LabelMode::TrueLabels,
        LabelChoice::Random => LabelMode::RandomLabels {
            seed: cfg
                .label_seed
                .unwrap_or_else(|| crate::rng::split_seed(cfg.seed, 2)),
        },
    }
}

fn csv_record(index: usize, cfg: &ExperimentConfig, point: &SweepPoint) -> Vec<String> {
    let mut out = vec![
        index.to_string(),
        cfg.algorithm.name().to_string(),
        format_float(point.gamma),
        format_float(point.tau),
        format_float(point.beta),
        match cfg.labels {
            LabelChoice::True => "true".into(),
            LabelChoice::Random => "random".into(),
        },
    ];
    let metrics = |r: &BoundReport| {
        [
            r.emp_err_mean,
            r.test_err_mean.unwrap_or(f64::NAN),
            r.emp_err_gibbs,
            r.test_err_gibbs.unwrap_or(f64::NAN),
            r.pac_bayes_bound,
            r.h_bound,
            r.c_bound,
            r.kl_estimate.unwrap_or(f64::NAN),
            r.epsilon,
        ]
    };
    let values = point.report.as_ref().map(metrics).unwrap_or([f64::NAN; 9]);
    out.extend(values.into_iter().map(format_float));
    out.push(point.error.clone().unwrap_or_default());
    out
}

/// Runs every grid point (in parallel, each isolated) and writes one CSV row
/// per point to `csv_path` in grid order. Failed points are recorded with
/// their error message and do not stop the sweep.
pub fn run_sweep(
    base: &ExperimentConfig,
    grid: &SweepGrid,
    csv_path: Option<&Path>,
) -> Result<Vec<SweepPoint>> {
    let points = grid.points();
    let configs: Vec<ExperimentConfig> = points
        .iter()
        .enumerate()
        .map(|(i, p)| point_config(base, i, p))
        .collect();
    let run_all = || -> Vec<SweepPoint> {
        configs
            .par_iter()
            .zip(points.par_iter())
            .map(|(cfg, p)| {
                let result = run_experiment(cfg);
                if let Err(e) = &result {
                    log::error!(
                        "sweep point tau={} beta={} gamma={} failed: {e}",
                        p.tau,
                        p.beta,
                        p.gamma
                    );
                }
                SweepPoint {
                    gamma: p.gamma,
                    tau: p.tau,
                    beta: p.beta,
                    label_mode: label_mode(cfg),
                    error: result.as_ref().err().map(|e| e.to_string()),
                    report: result.ok().map(|o| o.report),
                }
            })
            .collect()
    };
    let results = match thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?
            .install(run_all),
        None => run_all(),
    };
    if let Some(path) = csv_path {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut sink = CsvSink::create(path, &SWEEP_HEADER)?;
        for (i, (cfg, point)) in configs.iter().zip(&results).enumerate() {
            sink.write(csv_record(i, cfg, point))?;
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::DataSource;
    use crate::optim::Algorithm;

    fn base() -> ExperimentConfig {
        ExperimentConfig {
            algorithm: Algorithm::EntropySgld,
            data: Some(DataSource::Synthetic),
            synthetic_m: 100,
            synthetic_test_m: 100,
            synthetic_d: 3,
            hidden: vec![4],
            inner_steps: 2,
            batch_size: 10,
            epochs: 1,
            ..Default::default()
        }
    }

    #[test]
    fn empty_grid_writes_only_the_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        let points = run_sweep(&base(), &SweepGrid::default(), Some(&path)).unwrap();
        assert!(points.is_empty());
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().trim_end(),
            SWEEP_HEADER.join(",")
        );
    }

    #[test]
    fn constant_privacy_sweep_has_constant_epsilon() {
        let grid = SweepGrid {
            taus: vec![100.0, 400.0],
            gammas: vec![0.5, 2.0],
            labels: vec![LabelChoice::True],
            fixed_tau_beta: Some(2000.0),
            ..Default::default()
        };
        let points = run_sweep(&base(), &grid, None).unwrap();
        assert_eq!(points.len(), 4);
        let eps: Vec<f64> = points
            .iter()
            .map(|p| p.report.as_ref().unwrap().epsilon)
            .collect();
        assert!(eps.iter().all(|&e| (e - eps[0]).abs() < 1e-12 * eps[0]));
        assert!((eps[0] - 2.0 * 2000.0 * 4.0 / 100.0).abs() < 1e-9);
    }

    #[test]
    fn failures_are_recorded_per_point() {
        let grid = SweepGrid {
            taus: vec![10.0, -1.0],
            betas: vec![1.0],
            gammas: vec![1.0],
            labels: vec![LabelChoice::True],
            fixed_tau_beta: None,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let points = run_sweep(&base(), &grid, Some(&path)).unwrap();
        assert!(points[0].report.is_some() && points[0].error.is_none());
        assert!(points[1].report.is_none() && points[1].error.is_some());
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
    }
}
