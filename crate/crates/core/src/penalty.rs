//! Per-class delay penalty functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A nondecreasing, nonnegative, convex penalty of a class's average delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyFn {
    /// `0.5 * coefficient * w^2`
    Quadratic { coefficient: f64 },
    /// `coefficient * w`
    Linear { coefficient: f64 },
    /// Values on the uniform grid `0, step, 2*step, ...`, linearly
    /// interpolated and extended past the last knot with the final slope.
    Tabulated { step: f64, values: Vec<f64> },
}

impl Default for PenaltyFn {
    fn default() -> Self {
        PenaltyFn::Linear { coefficient: 0.0 }
    }
}

impl PenaltyFn {
    pub fn quadratic(coefficient: f64) -> Self {
        PenaltyFn::Quadratic { coefficient }
    }

    pub fn linear(coefficient: f64) -> Self {
        PenaltyFn::Linear { coefficient }
    }

    pub fn value(&self, w: f64) -> f64 {
        match self {
            PenaltyFn::Quadratic { coefficient } => 0.5 * coefficient * w * w,
            PenaltyFn::Linear { coefficient } => coefficient * w,
            PenaltyFn::Tabulated { step, values } => {
                let w = w.max(0.0);
                let last = values.len() - 1;
                let pos = w / step;
                let i = (pos.floor() as usize).min(last - 1);
                let t = pos - i as f64;
                values[i] + t * (values[i + 1] - values[i])
            }
        }
    }

    /// Right derivative at `w` (a subgradient for the piecewise-linear case).
    pub fn derivative(&self, w: f64) -> f64 {
        match self {
            PenaltyFn::Quadratic { coefficient } => coefficient * w,
            PenaltyFn::Linear { coefficient } => *coefficient,
            PenaltyFn::Tabulated { step, values } => {
                let last = values.len() - 1;
                let i = ((w.max(0.0) / step).floor() as usize).min(last - 1);
                (values[i + 1] - values[i]) / step
            }
        }
    }

    /// Checks nonnegativity, monotonicity and convexity on `[0, upto]`
    /// by finite differences on a 1001-point grid.
    pub fn validate(&self, upto: f64) -> Result<()> {
        match self {
            PenaltyFn::Quadratic { coefficient } | PenaltyFn::Linear { coefficient } => {
                if !(*coefficient >= 0.0 && coefficient.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "penalty coefficient must be nonnegative, got {coefficient}"
                    )));
                }
            }
            PenaltyFn::Tabulated { step, values } => {
                if !(*step > 0.0) || values.len() < 2 {
                    return Err(Error::InvalidConfig(
                        "tabulated penalty needs step > 0 and at least two values".into(),
                    ));
                }
            }
        }
        let upto = upto.max(1e-12);
        let n = 1000;
        let h = upto / n as f64;
        let tol = 1e-9 * (1.0 + self.value(upto).abs());
        let mut prev = self.value(0.0);
        if prev < -tol {
            return Err(Error::InvalidConfig("penalty is negative at 0".into()));
        }
        for i in 1..=n {
            let cur = self.value(i as f64 * h);
            if cur < prev - tol {
                return Err(Error::InvalidConfig(format!(
                    "penalty decreases near w = {}",
                    i as f64 * h
                )));
            }
            if i < n {
                let next = self.value((i + 1) as f64 * h);
                if prev + next - 2.0 * cur < -tol {
                    return Err(Error::InvalidConfig(format!(
                        "penalty is not convex near w = {}",
                        i as f64 * h
                    )));
                }
            }
            prev = cur;
        }
        Ok(())
    }

    pub fn is_quadratic(&self) -> Option<f64> {
        match self {
            PenaltyFn::Quadratic { coefficient } => Some(*coefficient),
            _ => None,
        }
    }
}
