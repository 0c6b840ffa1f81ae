use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Outer loop, `base * t^-0.6`.
    Outer,
    /// Inner loop / evaluation chain, `base * t^-1`.
    Inner,
    /// `eta' / i`, restarted at every outer step.
    PerInnerIteration,
    Constant,
}

/// Polynomially decaying step size `step(t) = base * t^-exponent`, `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub base: f64,
    pub exponent: f64,
    pub kind: ScheduleKind,
}

impl ScheduleSpec {
    pub const OUTER_EXPONENT: f64 = 0.6;

    pub fn outer(base: f64) -> Self {
        Self {
            base,
            exponent: Self::OUTER_EXPONENT,
            kind: ScheduleKind::Outer,
        }
    }

    pub fn inner(base: f64) -> Self {
        Self {
            base,
            exponent: 1.0,
            kind: ScheduleKind::Inner,
        }
    }

    pub fn per_inner_iteration(base: f64) -> Self {
        Self {
            base,
            exponent: 1.0,
            kind: ScheduleKind::PerInnerIteration,
        }
    }

    pub fn constant(base: f64) -> Self {
        Self {
            base,
            exponent: 0.0,
            kind: ScheduleKind::Constant,
        }
    }

    pub fn with_exponent(mut self, exponent: f64) -> Self {
        self.exponent = exponent;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base > 0.0 && self.base.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "schedule base must be positive, got {}",
                self.base
            )));
        }
        if !(self.exponent >= 0.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "schedule exponent must be nonnegative, got {}",
                self.exponent
            )));
        }
        Ok(())
    }

    /// Step size at iteration `t` (1-based; `t = 0` is treated as 1).
    pub fn step(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        if self.exponent == 0.0 {
            self.base
        } else if self.exponent == 1.0 {
            self.base / t
        } else {
            self.base * t.powf(-self.exponent)
        }
    }
}
