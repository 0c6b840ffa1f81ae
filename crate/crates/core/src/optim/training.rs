use serde::{Deserialize, Serialize};

use super::{
    inner_loop_estimate, outer_step, sgld_step_in_place, InverseTemperature, LocalEntropyConfig,
    NetworkObjective, RiskGradient, ScheduleSpec,
};
use crate::error::{Error, Result};
use crate::nn::{LabeledDataset, LossKind, NetworkSpec, WeightVector};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Sgd,
    Sgld,
    EntropySgd,
    EntropySgld,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Sgd => "sgd",
            Algorithm::Sgld => "sgld",
            Algorithm::EntropySgd => "entropy_sgd",
            Algorithm::EntropySgld => "entropy_sgld",
        }
    }

    pub fn is_entropy(&self) -> bool {
        matches!(self, Algorithm::EntropySgd | Algorithm::EntropySgld)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "sgd" => Ok(Algorithm::Sgd),
            "sgld" => Ok(Algorithm::Sgld),
            "entropy_sgd" => Ok(Algorithm::EntropySgd),
            "entropy_sgld" => Ok(Algorithm::EntropySgld),
            other => Err(Error::InvalidConfig(format!("unknown algorithm `{other}`"))),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything `run_training` needs besides data and initial weights.
///
/// SGD and SGLD treat `config.eta` as the base step of `R_S` itself: step `t`
/// moves by `-eta_t / 2 * grad R_S` and SGLD adds `sqrt(eta_t / tau) N(0, I)`,
/// i.e. targets `exp(-tau R_S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPlan {
    pub algorithm: Algorithm,
    pub config: LocalEntropyConfig,
    pub loss: LossKind,
    /// Number of epoch/L ticks.
    pub epochs: usize,
    /// Decay exponent of the outer (or SGD) step schedule.
    pub outer_exponent: f64,
}

impl TrainingPlan {
    pub fn new(algorithm: Algorithm, config: LocalEntropyConfig, epochs: usize) -> Self {
        Self {
            algorithm,
            config,
            loss: LossKind::BoundedCrossEntropy { l_max: 4.0 },
            epochs,
            outer_exponent: ScheduleSpec::OUTER_EXPONENT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".to_owned()));
        }
        if !matches!(self.loss, LossKind::BoundedCrossEntropy { .. }) {
            return Err(Error::InvalidConfig(format!(
                "training needs a differentiable loss, got {}",
                self.loss.name()
            )));
        }
        self.loss.validate()?;
        self.outer_schedule().validate()?;
        if self.algorithm == Algorithm::Sgld && !self.config.tau.is_finite() {
            return Err(Error::InvalidConfig(
                "sgld needs a finite tau; use sgd for the noiseless limit".to_owned(),
            ));
        }
        Ok(())
    }

    pub fn outer_schedule(&self) -> ScheduleSpec {
        ScheduleSpec::outer(self.config.eta).with_exponent(self.outer_exponent)
    }
}

/// Steps per epoch: `m / K` for SGD/SGLD, `m / (L K)` outer steps for the
/// entropy variants, never fewer than one.
pub fn steps_per_epoch(algorithm: Algorithm, m: usize, cfg: &LocalEntropyConfig) -> usize {
    let per = if algorithm.is_entropy() {
        m / (cfg.l * cfg.k)
    } else {
        m / cfg.k
    };
    per.max(1)
}

pub struct TickInfo<'a> {
    /// 1-based epoch/L tick.
    pub tick: usize,
    /// Steps (outer steps for entropy variants) taken so far.
    pub steps: usize,
    pub weights: &'a WeightVector,
}

#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub final_weights: WeightVector,
    /// Weights at the end of each tick.
    pub snapshots: Vec<WeightVector>,
    pub steps: usize,
}

/// Trains from `init`, calling `on_tick` after every epoch/L tick.
pub fn run_training<F>(
    plan: &TrainingPlan,
    spec: &NetworkSpec,
    data: &LabeledDataset,
    init: WeightVector,
    rng: &mut RngStream,
    mut on_tick: F,
) -> Result<TrainingRun>
where
    F: FnMut(&TickInfo<'_>) -> Result<()>,
{
    plan.validate()?;
    spec.check_weights(&init)?;
    let cfg = &plan.config;
    let mut objective = NetworkObjective::new(spec, data, plan.loss, cfg.k);
    let schedule = plan.outer_schedule();
    let per_epoch = steps_per_epoch(plan.algorithm, data.len(), cfg);
    let mut w = init;
    let mut snapshots = Vec::with_capacity(plan.epochs);
    let mut t = 0;
    for tick in 1..=plan.epochs {
        for _ in 0..per_epoch {
            t += 1;
            let step = schedule.step(t);
            w = match plan.algorithm {
                Algorithm::Sgd | Algorithm::Sgld => {
                    let inv_temp = if plan.algorithm == Algorithm::Sgd {
                        InverseTemperature::Infinite
                    } else {
                        InverseTemperature::Finite(cfg.tau)
                    };
                    let mut g = objective.gradient(w.as_slice(), rng)?;
                    for v in &mut g {
                        *v = -*v;
                    }
                    let mut next = w;
                    sgld_step_in_place(next.as_mut_slice(), &g, step, inv_temp, rng)?;
                    next
                }
                Algorithm::EntropySgd | Algorithm::EntropySgld => {
                    let mu = inner_loop_estimate(&mut objective, &w, cfg, rng)?;
                    let langevin = plan.algorithm == Algorithm::EntropySgld;
                    outer_step(&w, &mu, step, cfg, langevin, rng)?
                }
            };
        }
        on_tick(&TickInfo {
            tick,
            steps: t,
            weights: &w,
        })?;
        snapshots.push(w.clone());
    }
    Ok(TrainingRun {
        final_weights: w,
        snapshots,
        steps: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::empirical_risk;

    fn separable_pair() -> (NetworkSpec, LabeledDataset) {
        let spec = NetworkSpec::binary(1, &[]).unwrap();
        let data = LabeledDataset::new(vec![1.0, -1.0], 1, vec![1, 0], 2).unwrap();
        (spec, data)
    }

    #[test]
    fn mnist_epoch_accounting() {
        let cfg = LocalEntropyConfig::new(1.0, 60000f64.sqrt(), 1.0);
        assert_eq!(steps_per_epoch(Algorithm::EntropySgld, 60000, &cfg), 23);
        assert_eq!(steps_per_epoch(Algorithm::Sgd, 60000, &cfg), 468);
        assert_eq!(steps_per_epoch(Algorithm::EntropySgd, 100, &cfg), 1);
    }

    #[test]
    fn sgd_separates_two_points() {
        let (spec, data) = separable_pair();
        let mut cfg = LocalEntropyConfig::new(1.0, 1.0, 1.0);
        cfg.k = 2;
        cfg.eta = 1.0;
        let plan = TrainingPlan::new(Algorithm::Sgd, cfg, 20);
        let init = WeightVector::zeros(spec.parameter_count());
        let run = run_training(
            &plan,
            &spec,
            &data,
            init,
            &mut RngStream::new(0),
            |_| Ok(()),
        )
        .unwrap();
        let err = empirical_risk(LossKind::ZeroOne, &spec, &run.final_weights, &data).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn tick_count_equals_epochs() {
        let (spec, data) = separable_pair();
        let mut cfg = LocalEntropyConfig::new(1.0, 10.0, 1.0);
        cfg.k = 1;
        cfg.l = 2;
        let plan = TrainingPlan::new(Algorithm::EntropySgld, cfg, 7);
        let mut ticks = Vec::new();
        let init = WeightVector::zeros(spec.parameter_count());
        let run = run_training(&plan, &spec, &data, init, &mut RngStream::new(3), |info| {
            ticks.push(info.tick);
            Ok(())
        })
        .unwrap();
        assert_eq!(ticks, (1..=7).collect::<Vec<_>>());
        assert_eq!(run.snapshots.len(), 7);
        assert_eq!(run.steps, 7);
    }

    #[test]
    fn invalid_plans_are_rejected_up_front() {
        let (spec, data) = separable_pair();
        let cfg = LocalEntropyConfig::new(1.0, 1.0, 1.0);
        let init = WeightVector::zeros(spec.parameter_count());
        let mut plan = TrainingPlan::new(Algorithm::Sgd, cfg, 0);
        assert!(run_training(
            &plan,
            &spec,
            &data,
            init.clone(),
            &mut RngStream::new(0),
            |_| Ok(())
        )
        .is_err());
        plan.epochs = 1;
        plan.loss = LossKind::ZeroOne;
        assert!(run_training(
            &plan,
            &spec,
            &data,
            init,
            &mut RngStream::new(0),
            |_| Ok(())
        )
        .is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in [
            Algorithm::Sgd,
            Algorithm::Sgld,
            Algorithm::EntropySgd,
            Algorithm::EntropySgld,
        ] {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("adam".parse::<Algorithm>().is_err());
    }
}
