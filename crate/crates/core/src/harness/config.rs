//! Experiment configuration: a flat `key = value` file with overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::LossKind;
use crate::optim::{Algorithm, LocalEntropyConfig, ScheduleSpec, TrainingPlan, DEFAULT_BASE_LR};

/// Where training and test data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// MNIST IDX files in a directory, binarized to digits 0-4 vs 5-9.
    Idx {
        dir: PathBuf,
    },
    Synthetic,
}

impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "synthetic" {
            Ok(DataSource::Synthetic)
        } else if let Some(dir) = s.strip_prefix("idx:") {
            Ok(DataSource::Idx {
                dir: PathBuf::from(dir),
            })
        } else {
            Err(Error::InvalidConfig(format!(
                "data must be `synthetic` or `idx:<dir>`, got `{s}`"
            )))
        }
    }
}

/// Whether the training labels are kept or replaced by random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelChoice {
    True,
    Random,
}

impl FromStr for LabelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "true" => Ok(LabelChoice::True),
            "random" => Ok(LabelChoice::Random),
            _ => Err(Error::InvalidConfig(format!(
                "labels must be `true` or `random`, got `{s}`"
            ))),
        }
    }
}

/// Every knob of one training-and-evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub data: Option<DataSource>,
    /// Training examples kept after a seeded shuffle (MNIST only).
    pub subset: Option<usize>,
    pub standardize: bool,
    pub synthetic_m: usize,
    pub synthetic_test_m: usize,
    pub synthetic_d: usize,
    pub separation: f64,
    pub labels: LabelChoice,
    /// Seed of the random labels; derived from `seed` when unset.
    pub label_seed: Option<u64>,
    pub hidden: Vec<usize>,
    pub gamma: f64,
    /// Defaults to `sqrt(m)`.
    pub tau: Option<f64>,
    pub beta: f64,
    pub inner_steps: usize,
    pub batch_size: usize,
    pub alpha: f64,
    /// Base learning rate: the outer step is `lr / (gamma tau)` for the
    /// entropy variants and `lr` itself for SGD and SGLD.
    pub lr: f64,
    /// Inner base step; defaults to `2 / tau`.
    pub eta_prime: Option<f64>,
    pub outer_exponent: f64,
    pub l_max: f64,
    pub ramp_slope: f64,
    pub epochs: usize,
    pub bound_eval_every: usize,
    /// Retained evaluation-chain samples (`k'`).
    pub eval_samples: usize,
    pub eval_thin: usize,
    /// Evaluation-chain step; defaults to `eta_prime / inner_steps`.
    pub eval_step: Option<f64>,
    /// Independent prior draws for the KL estimate (`k`).
    pub prior_samples: usize,
    pub delta: f64,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Record elapsed time in the metrics; when off the column is zero and
    /// repeated runs produce byte-identical files.
    pub wall_clock: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::EntropySgld,
            data: None,
            subset: None,
            standardize: false,
            synthetic_m: 2000,
            synthetic_test_m: 2000,
            synthetic_d: 20,
            separation: 3.0,
            labels: LabelChoice::True,
            label_seed: None,
            hidden: vec![100],
            gamma: 1.0,
            tau: None,
            beta: 1.0,
            inner_steps: 20,
            batch_size: 128,
            alpha: 0.75,
            lr: DEFAULT_BASE_LR,
            eta_prime: None,
            outer_exponent: ScheduleSpec::OUTER_EXPONENT,
            l_max: 4.0,
            ramp_slope: 1e6,
            epochs: 10,
            bound_eval_every: 1,
            eval_samples: 100,
            eval_thin: 1,
            eval_step: None,
            prior_samples: 100,
            delta: 0.05,
            out: None,
            seed: 0,
            wall_clock: true,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse `{value}` for `{key}`")))
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() || value == "auto" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl ExperimentConfig {
    /// Reads `key = value` lines; `#` starts a comment.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected `key = value`", n + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv_str(&text)
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "data" => self.data = Some(value.parse()?),
            "subset" => self.subset = optional(key, value)?,
            "standardize" => self.standardize = parse(key, value)?,
            "synthetic_m" => self.synthetic_m = parse(key, value)?,
            "synthetic_test_m" => self.synthetic_test_m = parse(key, value)?,
            "synthetic_d" => self.synthetic_d = parse(key, value)?,
            "separation" => self.separation = parse(key, value)?,
            "labels" => self.labels = value.parse()?,
            "label_seed" => self.label_seed = optional(key, value)?,
            "hidden" => {
                self.hidden = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|w| parse(key, w.trim()))
                        .collect::<Result<_>>()?
                }
            }
            "gamma" => self.gamma = parse(key, value)?,
            "tau" => self.tau = optional(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "inner_steps" | "L" => self.inner_steps = parse(key, value)?,
            "batch_size" | "K" => self.batch_size = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "eta_prime" => self.eta_prime = optional(key, value)?,
            "outer_exponent" => self.outer_exponent = parse(key, value)?,
            "l_max" => self.l_max = parse(key, value)?,
            "ramp_slope" => self.ramp_slope = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "bound_eval_every" => self.bound_eval_every = parse(key, value)?,
            "eval_samples" => self.eval_samples = parse(key, value)?,
            "eval_thin" => self.eval_thin = parse(key, value)?,
            "eval_step" => self.eval_step = optional(key, value)?,
            "prior_samples" => self.prior_samples = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "out" => {
                self.out = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            "seed" => self.seed = parse(key, value)?,
            "wall_clock" => self.wall_clock = parse(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Checks everything that does not depend on the loaded data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        match &self.data {
            None => return fail("no data source given".into()),
            Some(DataSource::Idx { dir }) if !dir.is_dir() => {
                return fail(format!("data directory {} does not exist", dir.display()))
            }
            _ => {}
        }
        if self.subset == Some(0) {
            return fail("subset must be positive".into());
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer widths must be positive".into());
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("lr", self.lr),
            ("l_max", self.l_max),
            ("ramp_slope", self.ramp_slope),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if let Some(tau) = self.tau {
            if !(tau > 0.0 && tau.is_finite()) {
                return fail(format!("tau must be positive and finite, got {tau}"));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.inner_steps == 0
            || self.batch_size == 0
            || self.epochs == 0
            || self.bound_eval_every == 0
        {
            return fail(
                "inner_steps, batch_size, epochs and bound_eval_every must be positive".into(),
            );
        }
        if self.eval_samples < crate::bounds::MIN_KL_SAMPLES
            || self.prior_samples < crate::bounds::MIN_KL_SAMPLES
        {
            return fail(format!(
                "eval_samples and prior_samples must be at least {}",
                crate::bounds::MIN_KL_SAMPLES
            ));
        }
        if self.eval_thin == 0 {
            return fail("eval_thin must be positive".into());
        }
        if self.data == Some(DataSource::Synthetic)
            && (!self.synthetic_m.is_multiple_of(2)
                || !self.synthetic_test_m.is_multiple_of(2)
                || self.synthetic_m == 0)
        {
            return fail("synthetic sizes must be even and positive".into());
        }
        Ok(())
    }

    /// `tau` for a training set of size `m`.
    pub fn resolved_tau(&self, m: usize) -> f64 {
        self.tau.unwrap_or_else(|| (m as f64).sqrt())
    }

    /// Optimizer settings for a training set of size `m`.
    pub fn local_entropy_config(&self, m: usize) -> LocalEntropyConfig {
        let tau = self.resolved_tau(m);
        let mut cfg = LocalEntropyConfig::new(self.gamma, tau, self.beta).with_base_lr(self.lr);
        cfg.l = self.inner_steps;
        cfg.k = self.batch_size;
        cfg.alpha = self.alpha;
        if let Some(eta_prime) = self.eta_prime {
            cfg.eta_prime = eta_prime;
        }
        if !self.algorithm.is_entropy() {
            cfg.eta = self.lr;
        }
        cfg
    }

    pub fn training_plan(&self, m: usize) -> TrainingPlan {
        let mut plan = TrainingPlan::new(self.algorithm, self.local_entropy_config(m), self.epochs);
        plan.loss = LossKind::BoundedCrossEntropy { l_max: self.l_max };
        plan.outer_exponent = self.outer_exponent;
        plan
    }

    pub fn eval_step(&self, m: usize) -> f64 {
        let cfg = self.local_entropy_config(m);
        self.eval_step.unwrap_or(cfg.eta_prime / cfg.l as f64)
    }
}
