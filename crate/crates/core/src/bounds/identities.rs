//! Enumerable checks of the Catoni identity and of the claim that maximizing
//! local entropy minimizes a PAC-Bayes bound over Gaussian priors.

use serde::{Deserialize, Serialize};

use super::pac_bayes::linear_pac_bayes;
use crate::error::{Error, Result};
use crate::gibbs::{gibbs_moments_1d, Risk1d};

/// Both sides of `-log P[exp(-r)] = Q[r] + KL(Q || P) - KL(Q || P_exp(-r))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatoniCheck {
    pub lhs: f64,
    pub expected_risk: f64,
    pub kl_to_prior: f64,
    pub kl_to_gibbs: f64,
    pub residual: f64,
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "{name} has a negative or non-finite mass"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "{name} sums to {total}, not 1"
        )));
    }
    Ok(())
}

fn kl_discrete(q: &[f64], p: &[f64]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(&qi, _)| qi > 0.0)
        .map(|(&qi, &pi)| qi * (qi / pi).ln())
        .sum()
}

/// The Gibbs reweighting `p_i exp(-r_i) / Z` of a discrete distribution.
pub fn discrete_gibbs(p: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    if p.len() != r.len() {
        return Err(Error::DimensionMismatch {
            what: "per-atom values",
            expected: p.len(),
            got: r.len(),
        });
    }
    let shift = p
        .iter()
        .zip(r)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(_, &ri)| -ri)
        .fold(f64::NEG_INFINITY, f64::max);
    let unnormalized: Vec<f64> = p
        .iter()
        .zip(r)
        .map(|(&pi, &ri)| pi * (-ri - shift).exp())
        .collect();
    let z: f64 = unnormalized.iter().sum();
    Ok(unnormalized.into_iter().map(|u| u / z).collect())
}

/// Evaluates both sides of the Catoni identity by enumeration over the atoms.
pub fn catoni_identity_check(p: &[f64], r: &[f64], q: &[f64]) -> Result<CatoniCheck> {
    check_distribution("P", p)?;
    check_distribution("Q", q)?;
    if q.len() != p.len() {
        return Err(Error::DimensionMismatch {
            what: "Q atoms",
            expected: p.len(),
            got: q.len(),
        });
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "per-atom risks must be finite".into(),
        ));
    }
    if let Some(i) = q.iter().zip(p).position(|(&qi, &pi)| qi > 0.0 && pi == 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Q puts mass on atom {i} outside the support of P"
        )));
    }
    let gibbs = discrete_gibbs(p, r)?;
    let shift = p
        .iter()
        .zip(r)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(_, &ri)| -ri)
        .fold(f64::NEG_INFINITY, f64::max);
    let lhs = -(p
        .iter()
        .zip(r)
        .map(|(&pi, &ri)| pi * (-ri - shift).exp())
        .sum::<f64>()
        .ln()
        + shift);
    let expected_risk: f64 = q.iter().zip(r).map(|(qi, ri)| qi * ri).sum();
    let kl_to_prior = kl_discrete(q, p);
    let kl_to_gibbs = kl_discrete(q, &gibbs);
    let residual = (lhs - (expected_risk + kl_to_prior - kl_to_gibbs)).abs();
    Ok(CatoniCheck {
        lhs,
        expected_risk,
        kl_to_prior,
        kl_to_gibbs,
        residual,
    })
}

/// Exact `KL(P_exp(-l) || P)` for a discrete prior.
pub fn discrete_gibbs_kl(p: &[f64], losses: &[f64]) -> Result<f64> {
    check_distribution("P", p)?;
    Ok(kl_discrete(&discrete_gibbs(p, losses)?, p))
}

/// Outcome of comparing local-entropy maximizers with bound minimizers on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundOptimizerCheck {
    pub tau: f64,
    pub local_entropy: Vec<f64>,
    pub bound: Vec<f64>,
    /// Grid indices within tolerance of the best local entropy.
    pub argmax_local_entropy: Vec<usize>,
    /// Grid indices within tolerance of the smallest bound.
    pub argmin_bound: Vec<usize>,
    pub matches: bool,
}

/// Problem data for [`bound_optimizer_bruteforce_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptimizerProblem {
    pub gamma: f64,
    pub m: usize,
    pub lambda: f64,
    pub l_max: f64,
    pub delta: f64,
}

impl BoundOptimizerProblem {
    /// Inverse temperature `m / (lambda l_max)` tying the Gibbs measure to the bound.
    pub fn tau(&self) -> f64 {
        self.m as f64 / (self.lambda * self.l_max)
    }
}

/// Relative tolerance under which two objective values count as tied.
pub const OPTIMIZER_TIE_TOLERANCE: f64 = 1e-9;

fn near_optimal(values: &[f64], best: f64, scale: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| (v - best).abs() <= OPTIMIZER_TIE_TOLERANCE * scale)
        .map(|(i, _)| i)
        .collect()
}

/// For each grid point `w`, computes the local entropy `F(w)` and the linear
/// PAC-Bayes bound with prior `N(w, (tau gamma)^-1)` and posterior the local
/// Gibbs measure, both by quadrature, and compares their optimizer sets.
///
/// `risk` is the empirical risk with values in `[0, l_max]`.
pub fn bound_optimizer_bruteforce_check(
    risk: &impl Risk1d,
    grid: &[f64],
    problem: &BoundOptimizerProblem,
) -> Result<BoundOptimizerCheck> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty weight grid".into()));
    }
    let tau = problem.tau();
    let mut local_entropy = Vec::with_capacity(grid.len());
    let mut bound = Vec::with_capacity(grid.len());
    for &w in grid {
        let g = gibbs_moments_1d(w, problem.gamma, tau, risk)?;
        local_entropy.push(g.local_entropy.value);
        bound.push(linear_pac_bayes(
            g.expected_risk,
            g.kl_to_prior,
            problem.m,
            problem.lambda,
            problem.delta,
            problem.l_max,
        )?);
    }
    let best_f = local_entropy
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let best_b = bound.iter().cloned().fold(f64::INFINITY, f64::min);
    // Ties are judged relative to each objective's own scale.
    let scale = |v: &[f64], best: f64| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (hi - lo).max(best.abs()).max(f64::MIN_POSITIVE)
    };
    let argmax_local_entropy = near_optimal(&local_entropy, best_f, scale(&local_entropy, best_f));
    let argmin_bound = near_optimal(&bound, best_b, scale(&bound, best_b));
    let matches = argmax_local_entropy == argmin_bound;
    Ok(BoundOptimizerCheck {
        tau,
        local_entropy,
        bound,
        argmax_local_entropy,
        argmin_bound,
        matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::FnRisk1d;

    #[test]
    fn three_atom_instances() {
        let p = [1.0 / 3.0; 3];
        let r = [0.0, 1.0, 2.0];
        let c = catoni_identity_check(&p, &r, &[0.5, 0.3, 0.2]).unwrap();
        assert!(c.residual < 1e-12);
        let c = catoni_identity_check(&p, &r, &p).unwrap();
        assert!(c.residual < 1e-12);
        let gibbs = discrete_gibbs(&p, &r).unwrap();
        let c = catoni_identity_check(&p, &r, &gibbs).unwrap();
        assert!(c.residual < 1e-12);
        assert_eq!(c.kl_to_gibbs, 0.0);
    }

    #[test]
    fn enumerated_three_atom_kl() {
        let kl = discrete_gibbs_kl(&[1.0 / 3.0; 3], &[0.0, 1.0, 2.0]).unwrap();
        assert!((kl - 0.266_216_706_828_170_8).abs() < 1e-13);
    }

    #[test]
    fn support_violation_is_an_error() {
        assert!(
            catoni_identity_check(&[0.5, 0.5, 0.0], &[0.0, 1.0, 2.0], &[0.2, 0.3, 0.5]).is_err()
        );
        assert!(
            catoni_identity_check(&[0.5, 0.5, 0.0], &[0.0, 1.0, 2.0], &[0.5, 0.5, 0.0]).is_ok()
        );
    }

    fn problem() -> BoundOptimizerProblem {
        BoundOptimizerProblem {
            gamma: 0.5,
            m: 20,
            lambda: 1.0,
            l_max: 1.0,
            delta: 0.05,
        }
    }

    #[test]
    fn zero_risk_ties_everywhere() {
        let grid: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        let zero = FnRisk1d::new(|_| 0.0, |_| 0.0);
        let c = bound_optimizer_bruteforce_check(&zero, &grid, &problem()).unwrap();
        assert!(c.matches);
        assert_eq!(c.argmax_local_entropy.len(), grid.len());
    }

    #[test]
    fn quadratic_risk_is_optimal_at_zero() {
        let grid: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let risk = FnRisk1d::new(
            |x: f64| (0.5 * x * x).min(1.0),
            |x: f64| if 0.5 * x * x < 1.0 { x } else { 0.0 },
        );
        let c = bound_optimizer_bruteforce_check(&risk, &grid, &problem()).unwrap();
        assert!(
            c.matches,
            "{:?} vs {:?}",
            c.argmax_local_entropy, c.argmin_bound
        );
        assert_eq!(c.argmax_local_entropy, vec![20]);
    }
}
