//! Binary kl divergence and its inversion.

use crate::error::{Error, Result};

/// Upper end of the search interval for [`kl_inverse_upper`].
pub const KL_INVERSE_CLAMP: f64 = 1.0 - 1e-12;

const BISECTION_WIDTH: f64 = 1e-6;
const MAX_NEWTON_STEPS: usize = 20;

/// `kl(q || p) = q ln(q/p) + (1-q) ln((1-q)/(1-p))` with `0 ln 0 = 0`.
pub fn kl_bernoulli(q: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "kl(q || p) needs p in (0, 1), got {p}"
        )));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "kl(q || p) needs q in [0, 1], got {q}"
        )));
    }
    Ok(kl_unchecked(q, p))
}

fn kl_unchecked(q: f64, p: f64) -> f64 {
    let head = if q > 0.0 { q * (q / p).ln() } else { 0.0 };
    let tail = if q < 1.0 {
        // ln(1 - p) via ln_1p keeps precision for small p
        (1.0 - q) * ((1.0 - q).ln() - (-p).ln_1p())
    } else {
        0.0
    };
    (head + tail).max(0.0)
}

/// `d kl(q || p) / dp = (p - q) / (p (1 - p))`.
fn kl_slope(q: f64, p: f64) -> f64 {
    (p - q) / (p * (1.0 - p))
}

/// Largest `p` in `[q, 1)` with `kl(q || p) <= c`.
///
/// Bisection narrows the root to width `1e-6`, then Newton's method polishes
/// it from the right, where convexity makes the iterates decrease
/// monotonically; if an iterate leaves the bracket the bracket is bisected to
/// machine precision instead. Results are capped at [`KL_INVERSE_CLAMP`].
pub fn kl_inverse_upper(q: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "kl inversion needs q in [0, 1], got {q}"
        )));
    }
    if c.is_nan() || c < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "kl inversion needs c >= 0, got {c}"
        )));
    }
    if c == 0.0 {
        return Ok(q);
    }
    if q >= KL_INVERSE_CLAMP || kl_unchecked(q, KL_INVERSE_CLAMP) <= c {
        return Ok(KL_INVERSE_CLAMP.max(q));
    }
    let f = |p: f64| kl_unchecked(q, p) - c;
    // f(lo) <= 0 < f(hi)
    let (mut lo, mut hi) = (q, KL_INVERSE_CLAMP);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = hi;
    let mut newton_ok = true;
    for _ in 0..MAX_NEWTON_STEPS {
        let fp = f(p);
        if fp == 0.0 {
            break;
        }
        let slope = kl_slope(q, p);
        if !(slope > 0.0) {
            newton_ok = false;
            break;
        }
        let next = p - fp / slope;
        if !(next >= lo && next <= hi) {
            newton_ok = false;
            break;
        }
        if (next - p).abs() <= 4.0 * f64::EPSILON * p {
            p = next;
            break;
        }
        p = next;
    }
    if !newton_ok {
        while hi - lo > 2.0 * f64::EPSILON * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        p = if f(hi).abs() < f(lo).abs() { hi } else { lo };
    }
    Ok(p.max(q))
}

/// Smallest `p` in `(0, q]` with `kl(q || p) <= c`; mirror image of
/// [`kl_inverse_upper`] through `kl(q || p) = kl(1-q || 1-p)`.
pub fn kl_inverse_lower(q: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "kl inversion needs q in [0, 1], got {q}"
        )));
    }
    Ok((1.0 - kl_inverse_upper(1.0 - q, c)?).min(q).max(0.0))
}
