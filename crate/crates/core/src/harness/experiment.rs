//! One training run with periodic bound evaluation.

use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig, LabelChoice};
use super::data::{
    binarize_labels, load_mnist_dir, randomize_labels, seeded_subset, standardize,
    synthetic_gaussians_sized,
};
use super::metrics::{write_json, CsvSink, MetricsRow, CSV_SCHEMA_VERSION, METRICS_HEADER};
use crate::bounds::{
    epsilon_gibbs_posterior, epsilon_local_entropy, estimate_kl_gibbs_prior, BoundInputs,
    BoundReport, REPORT_SCHEMA_VERSION,
};
use crate::error::{Error, Result};
use crate::gibbs::{evaluate_gibbs, EvalChainConfig, GibbsTarget};
use crate::nn::{empirical_risks, LabeledDataset, LossKind, NetworkSpec, WeightVector};
use crate::optim::{run_training, Algorithm, TrainingPlan};
use crate::rng::{split_seed, RngStream};

/// Training sets above this size trigger a runtime warning.
pub const LARGE_RUN_THRESHOLD: usize = 20_000;

const DATA_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
const INIT_STREAM: u64 = 3;
const TRAIN_STREAM: u64 = 4;
const EVAL_STREAM: u64 = 5;

/// Name of the per-tick metrics file inside the output directory.
pub const METRICS_FILE: &str = "metrics.csv";
/// Name of the final JSON report inside the output directory.
pub const REPORT_FILE: &str = "report.json";

/// Loads (or generates) the train and test splits described by `cfg`, with
/// the label transform applied to the training split only.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    cfg.validate()?;
    let (mut train, mut test) = match cfg.data.as_ref().expect("validated") {
        DataSource::Synthetic => synthetic_gaussians_sized(
            cfg.synthetic_m,
            cfg.synthetic_test_m,
            cfg.synthetic_d,
            cfg.separation,
            split_seed(cfg.seed, DATA_STREAM),
        )?,
        DataSource::Idx { dir } => {
            let (train, test) = load_mnist_dir(dir)?;
            let train = match cfg.subset {
                Some(n) => seeded_subset(&train, n, split_seed(cfg.seed, DATA_STREAM))?,
                None => train,
            };
            (binarize_labels(&train)?, binarize_labels(&test)?)
        }
    };
    if cfg.standardize {
        standardize(&mut train, &mut test)?;
    }
    if train.len() > LARGE_RUN_THRESHOLD {
        warn!(
            "training on {} examples; full-scale runs take hours, consider `subset`",
            train.len()
        );
    }
    if cfg.labels == LabelChoice::Random {
        let seed = cfg
            .label_seed
            .unwrap_or_else(|| split_seed(cfg.seed, LABEL_STREAM));
        train = randomize_labels(&train, seed)?;
    }
    Ok((train, test))
}

/// Everything written at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    pub config: ExperimentConfig,
    pub m: usize,
    pub parameter_count: usize,
    pub ticks: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<MetricsRow>,
    pub report: BoundReport,
    pub final_weights: WeightVector,
    pub m: usize,
}

/// Network used for a dataset: binary sigmoid output for two classes, softmax otherwise.
pub fn network_for(cfg: &ExperimentConfig, data: &LabeledDataset) -> Result<NetworkSpec> {
    if data.num_classes() == 2 {
        NetworkSpec::binary(data.dim(), &cfg.hidden)
    } else {
        NetworkSpec::multiclass(data.dim(), &cfg.hidden, data.num_classes())
    }
}

/// Privacy parameter of the sample each algorithm outputs; infinite when
/// the algorithm has no privacy guarantee.
pub fn run_epsilon(plan: &TrainingPlan, m: usize, l_max: f64) -> Result<f64> {
    let cfg = &plan.config;
    Ok(match plan.algorithm {
        Algorithm::EntropySgld => epsilon_local_entropy(cfg.beta, cfg.tau, l_max, m)?.epsilon,
        Algorithm::Sgld => epsilon_gibbs_posterior(cfg.tau, l_max, m)?.epsilon,
        Algorithm::Sgd | Algorithm::EntropySgd => f64::INFINITY,
    })
}

struct Evaluator<'a> {
    cfg: &'a ExperimentConfig,
    plan: &'a TrainingPlan,
    spec: &'a NetworkSpec,
    train: &'a LabeledDataset,
    test: &'a LabeledDataset,
    epsilon: f64,
    root: RngStream,
}

impl Evaluator<'_> {
    fn evaluate(&self, tick: usize, w: &WeightVector) -> Result<BoundReport> {
        let m = self.train.len();
        let loss = self.plan.loss;
        let ramp = LossKind::Ramp {
            slope: self.cfg.ramp_slope,
        };
        let train = empirical_risks(&[LossKind::ZeroOne, ramp], self.spec, w, self.train)?;
        let test_err_mean = empirical_risks(&[LossKind::ZeroOne], self.spec, w, self.test)?[0];
        let mut rng = self.root.fork(tick as u64);
        let chain = EvalChainConfig {
            thin: self.cfg.eval_thin,
            ..EvalChainConfig::new(
                self.cfg.eval_samples,
                self.cfg.eval_step(m),
                self.cfg.batch_size,
            )
        };
        let tau = self.plan.config.tau;
        let (gibbs, kl) = match self.plan.algorithm {
            Algorithm::Sgd => (None, None),
            Algorithm::Sgld => {
                let target = GibbsTarget::posterior(self.spec, self.train, w.clone(), tau, loss)?;
                (
                    Some(evaluate_gibbs(
                        &target,
                        Some(self.test),
                        ramp,
                        &chain,
                        &mut rng,
                    )?),
                    None,
                )
            }
            Algorithm::EntropySgd | Algorithm::EntropySgld => {
                let target = GibbsTarget::local(
                    self.spec,
                    self.train,
                    w.clone(),
                    self.plan.config.gamma,
                    tau,
                    loss,
                )?;
                let eval = evaluate_gibbs(&target, Some(self.test), ramp, &chain, &mut rng)?;
                let prior = target.prior_losses(self.cfg.prior_samples, &mut rng)?;
                let kl = estimate_kl_gibbs_prior(&eval.chain_losses, &prior)?;
                (Some(eval), Some(kl))
            }
        };
        let (emp_err_gibbs, gibbs_se, test_err_gibbs) = match &gibbs {
            Some(g) => (
                g.train_error.value,
                g.train_error.std_error,
                g.test_error.map(|e| e.value),
            ),
            None => (train[0], 0.0, Some(test_err_mean)),
        };
        BoundReport::compute(&BoundInputs {
            emp_err_mean: train[0],
            emp_err_gibbs,
            emp_err_gibbs_std_error: gibbs_se,
            test_err_mean: Some(test_err_mean),
            test_err_gibbs,
            emp_ramp_risk: train[1],
            kl,
            epsilon: self.epsilon,
            m,
            delta: self.cfg.delta,
        })
    }
}

fn metrics_row(tick: usize, report: &BoundReport, wall_seconds: f64) -> MetricsRow {
    MetricsRow {
        tick,
        train_err_mean: report.emp_err_mean,
        test_err_mean: report.test_err_mean.unwrap_or(f64::NAN),
        train_err_gibbs: report.emp_err_gibbs,
        test_err_gibbs: report.test_err_gibbs.unwrap_or(f64::NAN),
        pac_bound: report.pac_bayes_bound,
        h_bound: report.h_bound,
        c_bound: report.c_bound,
        kl_estimate: report.kl_estimate.unwrap_or(f64::NAN),
        epsilon: report.epsilon,
        wall_seconds,
    }
}

/// Runs training on already prepared splits, calling `on_row` at every
/// bound-evaluation tick (and always at the last tick).
pub fn run_on_data(
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    mut on_row: impl FnMut(&MetricsRow) -> Result<()>,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let m = train.len();
    let spec = network_for(cfg, train)?;
    let plan = cfg.training_plan(m);
    plan.validate()?;
    let epsilon = run_epsilon(&plan, m, cfg.l_max)?;
    let root = RngStream::new(cfg.seed);
    let init = spec.init_weights(&mut root.fork(INIT_STREAM));
    let evaluator = Evaluator {
        cfg,
        plan: &plan,
        spec: &spec,
        train,
        test,
        epsilon,
        root: root.fork(EVAL_STREAM),
    };
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut last_report = None;
    let run = run_training(
        &plan,
        &spec,
        train,
        init,
        &mut root.fork(TRAIN_STREAM),
        |tick| {
            if !tick.tick.is_multiple_of(cfg.bound_eval_every) && tick.tick != cfg.epochs {
                return Ok(());
            }
            let report = evaluator.evaluate(tick.tick, tick.weights)?;
            let wall = if cfg.wall_clock {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            };
            let row = metrics_row(tick.tick, &report, wall);
            info!(
                "tick {}: train {:.4} test {:.4} gibbs {:.4}/{:.4} pac {:.4}",
                row.tick,
                row.train_err_mean,
                row.test_err_mean,
                row.train_err_gibbs,
                row.test_err_gibbs,
                row.pac_bound
            );
            on_row(&row)?;
            rows.push(row);
            last_report = Some(report);
            Ok(())
        },
    )?;
    let report =
        last_report.ok_or_else(|| Error::InvalidConfig("run produced no evaluation".into()))?;
    Ok(ExperimentOutcome {
        rows,
        report,
        final_weights: run.final_weights,
        m,
    })
}

/// Full run: prepares data, trains, and (when `cfg.out` is set) streams
/// `metrics.csv` and writes `report.json` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (train, test) = prepare_data(cfg)?;
    let Some(out) = cfg.out.as_deref() else {
        return run_on_data(cfg, &train, &test, |_| Ok(()));
    };
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut sink = CsvSink::create(&out.join(METRICS_FILE), &METRICS_HEADER)?;
    let outcome = run_on_data(cfg, &train, &test, |row| sink.write(row.fields()))?;
    write_record(out, cfg, &train, &outcome)?;
    Ok(outcome)
}

fn write_record(
    out: &Path,
    cfg: &ExperimentConfig,
    train: &LabeledDataset,
    outcome: &ExperimentOutcome,
) -> Result<()> {
    let record = RunRecord {
        schema_version: REPORT_SCHEMA_VERSION,
        csv_schema_version: CSV_SCHEMA_VERSION,
        config: cfg.clone(),
        m: outcome.m,
        parameter_count: network_for(cfg, train)?.parameter_count(),
        ticks: cfg.epochs,
        report: outcome.report.clone(),
    };
    write_json(&out.join(REPORT_FILE), &record)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(algorithm: Algorithm) -> ExperimentConfig {
        ExperimentConfig {
            algorithm,
            data: Some(DataSource::Synthetic),
            synthetic_m: 200,
            synthetic_test_m: 200,
            synthetic_d: 5,
            separation: 4.0,
            hidden: vec![8],
            inner_steps: 5,
            batch_size: 20,
            epochs: 3,
            ..Default::default()
        }
    }

    #[test]
    fn entropy_sgld_reports_every_tick() {
        let out = run_experiment(&small(Algorithm::EntropySgld)).unwrap();
        assert_eq!(out.rows.len(), 3);
        assert_eq!(
            out.rows.iter().map(|r| r.tick).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let eps = 8.0 / 200f64.sqrt();
        for r in &out.rows {
            assert!((r.epsilon - eps).abs() < 1e-15);
            assert!(r.pac_bound >= r.train_err_gibbs);
            for e in [
                r.train_err_mean,
                r.test_err_mean,
                r.train_err_gibbs,
                r.test_err_gibbs,
            ] {
                assert!((0.0..=1.0).contains(&e));
            }
        }
        assert!(out.report.kl_estimate.is_some());
    }

    #[test]
    fn sgd_bounds_are_vacuous() {
        let out = run_experiment(&small(Algorithm::Sgd)).unwrap();
        assert!(out.report.vacuous && out.report.h_bound_vacuous);
        assert_eq!(out.report.emp_err_gibbs, out.report.emp_err_mean);
    }

    #[test]
    fn eval_every_skips_ticks_but_keeps_the_last() {
        let cfg = ExperimentConfig {
            bound_eval_every: 2,
            algorithm: Algorithm::Sgld,
            ..small(Algorithm::Sgld)
        };
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(
            out.rows.iter().map(|r| r.tick).collect::<Vec<_>>(),
            vec![2, 3]
        );
    }

    #[test]
    fn outputs_are_written_and_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let run = |sub: &str| {
            let cfg = ExperimentConfig {
                out: Some(dir.path().join(sub)),
                wall_clock: false,
                ..small(Algorithm::EntropySgld)
            };
            run_experiment(&cfg).unwrap();
            std::fs::read(dir.path().join(sub).join(METRICS_FILE)).unwrap()
        };
        let a = run("a");
        assert_eq!(a, run("b"));
        let record: RunRecord = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("a").join(REPORT_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(record.csv_schema_version, CSV_SCHEMA_VERSION);
        assert_eq!(record.ticks, 3);
    }

    #[test]
    fn random_labels_touch_only_the_training_split() {
        let cfg = ExperimentConfig {
            labels: LabelChoice::Random,
            ..small(Algorithm::Sgd)
        };
        let (train, test) = prepare_data(&cfg).unwrap();
        let (true_train, true_test) = prepare_data(&small(Algorithm::Sgd)).unwrap();
        assert_ne!(train.labels(), true_train.labels());
        assert_eq!(test.labels(), true_test.labels());
        assert_eq!(train.features(), true_train.features());
    }
}
