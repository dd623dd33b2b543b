//! Service rate as a function of allocated power.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concave, continuous, nondecreasing map from power to service rate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatePowerFn {
    /// `mu(P) = P`
    #[default]
    Linear,
    /// `mu(P) = intercept + slope * P`
    Affine { intercept: f64, slope: f64 },
    /// Rates on the uniform grid `p_start + i * step`, linearly interpolated.
    /// Must cover the configured power interval.
    Tabulated { p_start: f64, step: f64, rates: Vec<f64> },
}

impl RatePowerFn {
    #[inline]
    pub fn rate(&self, p: f64) -> f64 {
        match self {
            RatePowerFn::Linear => p,
            RatePowerFn::Affine { intercept, slope } => intercept + slope * p,
            RatePowerFn::Tabulated { p_start, step, rates } => {
                let last = rates.len() - 1;
                let pos = ((p - p_start) / step).max(0.0);
                let i = (pos.floor() as usize).min(last - 1);
                let t = pos - i as f64;
                rates[i] + t * (rates[i + 1] - rates[i])
            }
        }
    }

    /// Validates concavity and monotonicity on `[p_min, p_max]`.
    pub fn validate(&self, p_min: f64, p_max: f64) -> Result<()> {
        match self {
            RatePowerFn::Linear => {}
            RatePowerFn::Affine { intercept, slope } => {
                if !(intercept.is_finite() && *slope >= 0.0 && slope.is_finite()) {
                    return Err(Error::InvalidConfig(format!(
                        "affine rate needs a finite intercept and nonnegative slope, got ({intercept}, {slope})"
                    )));
                }
            }
            RatePowerFn::Tabulated { p_start, step, rates } => {
                if !(*step > 0.0) || rates.len() < 2 {
                    return Err(Error::InvalidConfig(
                        "tabulated rate needs step > 0 and at least two rates".into(),
                    ));
                }
                let end = p_start + step * (rates.len() - 1) as f64;
                if *p_start > p_min + 1e-12 || end < p_max - 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "tabulated rate covers [{p_start}, {end}], power interval is [{p_min}, {p_max}]"
                    )));
                }
                for w in rates.windows(2) {
                    if w[1] < w[0] {
                        return Err(Error::InvalidConfig("tabulated rate decreases".into()));
                    }
                }
                for w in rates.windows(3) {
                    if w[0] + w[2] - 2.0 * w[1] > 1e-12 * (1.0 + w[1].abs()) {
                        return Err(Error::InvalidConfig("tabulated rate is not concave".into()));
                    }
                }
            }
        }
        if self.rate(p_min) <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "service rate at p_min = {p_min} must be positive"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_each_kind() {
        assert_eq!(RatePowerFn::Linear.rate(4.0), 4.0);
        let a = RatePowerFn::Affine {
            intercept: 2.0,
            slope: 0.5,
        };
        assert_eq!(a.rate(4.0), 4.0);
        let t = RatePowerFn::Tabulated {
            p_start: 0.0,
            step: 2.0,
            rates: vec![0.0, 2.0, 3.0],
        };
        assert_eq!(t.rate(1.0), 1.0);
        assert_eq!(t.rate(3.0), 2.5);
    }

    #[test]
    fn rejects_convex_or_short_tables() {
        let convex = RatePowerFn::Tabulated {
            p_start: 0.0,
            step: 1.0,
            rates: vec![1.0, 1.5, 3.0],
        };
        assert!(convex.validate(0.0, 2.0).is_err());
        let short = RatePowerFn::Tabulated {
            p_start: 1.0,
            step: 1.0,
            rates: vec![1.0, 2.0],
        };
        assert!(short.validate(1.0, 3.0).is_err());
        RatePowerFn::Linear.validate(4.0, 10.0).unwrap();
    }
}
