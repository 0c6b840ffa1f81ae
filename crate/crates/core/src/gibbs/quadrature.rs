//! Adaptive Gauss-Kronrod quadrature and exact 1-D local-entropy oracles.

use crate::error::{Error, Result};

// Published 30-digit nodes and weights, kept verbatim.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_DEPTH: u32 = 40;
const ROUNDOFF: f64 = 50.0 * f64::EPSILON;

/// Integrates several functions sharing one set of nodes: `f(x, out)` writes
/// the `N` integrand values at `x` into `out`.
#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    /// Absolute tolerance for the whole interval.
    pub abs_tol: f64,
    /// Tolerance relative to `integral |f|`, per component; the looser of the
    /// two applies.
    pub rel_tol: f64,
    /// Initial number of equal panels before adaptive refinement.
    pub panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-13,
            rel_tol: 1e-13,
            panels: 48,
        }
    }
}

/// Returns the Kronrod estimate, its error against the embedded Gauss rule,
/// and the integral of `|f|` used to detect the round-off floor.
fn kronrod<const N: usize>(
    f: &mut impl FnMut(f64, &mut [f64; N]),
    a: f64,
    b: f64,
) -> ([f64; N], [f64; N], [f64; N]) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut k15 = [0.0; N];
    let mut g7 = [0.0; N];
    let mut abs = [0.0; N];
    let mut buf = [0.0; N];
    f(center, &mut buf);
    for j in 0..N {
        k15[j] = WGK[7] * buf[j];
        g7[j] = WG[3] * buf[j];
        abs[j] = WGK[7] * buf[j].abs();
    }
    for i in 0..7 {
        let dx = half * XGK[i];
        let mut lo = [0.0; N];
        f(center - dx, &mut lo);
        f(center + dx, &mut buf);
        for j in 0..N {
            let pair = lo[j] + buf[j];
            k15[j] += WGK[i] * pair;
            abs[j] += WGK[i] * (lo[j].abs() + buf[j].abs());
            if i % 2 == 1 {
                g7[j] += WG[i / 2] * pair;
            }
        }
    }
    let mut err = [0.0; N];
    for j in 0..N {
        k15[j] *= half;
        abs[j] *= half.abs();
        err[j] = (k15[j] - g7[j] * half).abs();
    }
    (k15, err, abs)
}

impl Quadrature {
    /// Returns the integrals of all `N` components over `[a, b]`.
    pub fn integrate<const N: usize>(
        &self,
        mut f: impl FnMut(f64, &mut [f64; N]),
        a: f64,
        b: f64,
    ) -> Result<[f64; N]> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidArgument(format!(
                "bad integration interval [{a}, {b}]"
            )));
        }
        let panels = self.panels.max(1);
        let width = (b - a) / panels as f64;
        let mut total = [0.0; N];
        let mut err_total = [0.0; N];
        let mut abs_total = [0.0; N];
        let mut stack: Vec<(f64, f64, u32)> = (0..panels)
            .rev()
            .map(|i| {
                let lo = a + width * i as f64;
                let hi = if i + 1 == panels {
                    b
                } else {
                    a + width * (i + 1) as f64
                };
                (lo, hi, 0)
            })
            .collect();
        while let Some((lo, hi, depth)) = stack.pop() {
            let (value, err, abs) = kronrod(&mut f, lo, hi);
            let budget = self.abs_tol * (hi - lo) / (b - a);
            if !value.iter().all(|v| v.is_finite()) {
                return Err(Error::Quadrature {
                    achieved: f64::INFINITY,
                    requested: self.abs_tol,
                });
            }
            let floor = self.rel_tol.max(ROUNDOFF);
            let converged = (0..N).all(|j| err[j] <= budget.max(floor * abs[j]));
            if converged || depth >= MAX_DEPTH {
                for j in 0..N {
                    total[j] += value[j];
                    err_total[j] += err[j];
                    abs_total[j] += abs[j];
                }
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((mid, hi, depth + 1));
                stack.push((lo, mid, depth + 1));
            }
        }
        let floor = self.rel_tol.max(ROUNDOFF);
        for j in 0..N {
            let requested = self.abs_tol.max(floor * abs_total[j]);
            if err_total[j] > requested {
                return Err(Error::Quadrature {
                    achieved: err_total[j],
                    requested,
                });
            }
        }
        Ok(total)
    }
}

/// A scalar risk with its derivative, used by the 1-D oracles.
pub trait Risk1d {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// [`Risk1d`] from a pair of closures.
#[derive(Clone)]
pub struct FnRisk1d<V, D> {
    value: V,
    derivative: D,
}

impl<V: Fn(f64) -> f64, D: Fn(f64) -> f64> FnRisk1d<V, D> {
    pub fn new(value: V, derivative: D) -> Self {
        FnRisk1d { value, derivative }
    }
}

impl<V: Fn(f64) -> f64, D: Fn(f64) -> f64> Risk1d for FnRisk1d<V, D> {
    fn value(&self, x: f64) -> f64 {
        (self.value)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.derivative)(x)
    }
}

/// Half-width of the integration window in prior standard deviations.
pub const WINDOW_SIGMAS: f64 = 12.0;

/// Local entropy at a point together with its derivative and the Gibbs mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEntropy1d {
    /// `log integral exp(-tau r(x) - tau gamma / 2 (x - w)^2) dx`.
    pub value: f64,
    /// `-tau E_G[r'(x)]`, the derivative in `w` after integrating by parts.
    pub derivative: f64,
    pub gibbs_mean: f64,
}

/// Moments of the 1-D Gibbs measure used by the bound oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsMoments1d {
    pub local_entropy: LocalEntropy1d,
    /// `E_G[r]`.
    pub expected_risk: f64,
    /// `KL(G || N(w, 1/(tau gamma)))`.
    pub kl_to_prior: f64,
}

fn check_scales(gamma: f64, tau: f64) -> Result<f64> {
    if !(gamma > 0.0 && tau > 0.0 && gamma.is_finite() && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gamma and tau must be positive and finite, got gamma={gamma}, tau={tau}"
        )));
    }
    Ok(1.0 / (tau * gamma).sqrt())
}

/// Maximum of the log integrand on a fine grid, used to keep exponentials in range.
fn log_shift(log_density: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const GRID: usize = 4001;
    (0..GRID)
        .map(|i| log_density(lo + (hi - lo) * i as f64 / (GRID - 1) as f64))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Exact local entropy of a 1-D risk by adaptive quadrature over `center +- 12 sigma`.
pub fn local_entropy_quadrature_1d(
    center: f64,
    gamma: f64,
    tau: f64,
    risk: &impl Risk1d,
) -> Result<LocalEntropy1d> {
    Ok(gibbs_moments_1d(center, gamma, tau, risk)?.local_entropy)
}

/// Like [`local_entropy_quadrature_1d`] but also integrates `E_G[r]` and `KL(G || prior)`.
pub fn gibbs_moments_1d(
    center: f64,
    gamma: f64,
    tau: f64,
    risk: &impl Risk1d,
) -> Result<GibbsMoments1d> {
    let sigma = check_scales(gamma, tau)?;
    let precision = tau * gamma;
    let (lo, hi) = (
        center - WINDOW_SIGMAS * sigma,
        center + WINDOW_SIGMAS * sigma,
    );
    let log_density = |x: f64| -tau * risk.value(x) - 0.5 * precision * (x - center).powi(2);
    let shift = log_shift(&log_density, lo, hi);
    if !shift.is_finite() {
        return Err(Error::InvalidArgument(
            "risk is not finite on the integration window".into(),
        ));
    }
    // Normalize by the shifted partition function first, then integrate the rest
    // against a tolerance relative to it.
    let rule = Quadrature::default();
    let [z] = rule.integrate(
        |x, out: &mut [f64; 1]| out[0] = (log_density(x) - shift).exp(),
        lo,
        hi,
    )?;
    let log_z = z.ln() + shift;
    let rule = Quadrature {
        abs_tol: 1e-12,
        ..rule
    };
    let prior_log_norm = -0.5 * (2.0 * std::f64::consts::PI / precision).ln();
    let moments = rule.integrate(
        |x, out: &mut [f64; 4]| {
            let log_g = log_density(x) - log_z;
            let g = log_g.exp();
            let log_prior = prior_log_norm - 0.5 * precision * (x - center).powi(2);
            out[0] = (x - center) * g;
            out[1] = -tau * risk.derivative(x) * g;
            out[2] = risk.value(x) * g;
            out[3] = if g > 0.0 {
                g * (log_g - log_prior)
            } else {
                0.0
            };
        },
        lo,
        hi,
    )?;
    Ok(GibbsMoments1d {
        local_entropy: LocalEntropy1d {
            value: log_z,
            derivative: moments[1],
            gibbs_mean: center + moments[0],
        },
        expected_risk: moments[2],
        kl_to_prior: moments[3].max(0.0),
    })
}
