//! System configuration and its JSON file form.
//!
//! A configuration file maps field-for-field onto [`SystemConfig`]:
//!
//! ```json
//! {
//!   "classes": [
//!     { "lambda": 1.0, "size": { "kind": "exponential", "mean": 0.4 },
//!       "delay_bound": 2.0, "penalty": { "kind": "quadratic", "coefficient": 1.0 } },
//!     { "lambda": 2.0, "size": { "kind": "exponential", "mean": 0.2 },
//!       "delay_bound": 2.0, "penalty": { "kind": "quadratic", "coefficient": 4.0 } }
//!   ],
//!   "rate_fn": { "kind": "linear" },
//!   "p_min": 1.0,
//!   "p_max": 1.0,
//!   "v_param": 100.0
//! }
//! ```
//!
//! Optional keys: `p_const`, `r_max` (one entry per class), `fixed_power`
//! (power used by the fixed-power policies, defaults to `p_min`) and
//! `fixed_order` (one-based class list for the fixed-order policy).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::JobSizeDist;
use crate::error::{Error, Result};
use crate::penalty::PenaltyFn;
use crate::rate::RatePowerFn;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub lambda: f64,
    pub size: JobSizeDist,
    pub delay_bound: f64,
    #[serde(default)]
    pub penalty: PenaltyFn,
}

impl ClassParams {
    pub fn new(lambda: f64, size: JobSizeDist, delay_bound: f64, penalty: PenaltyFn) -> Self {
        Self {
            lambda,
            size,
            delay_bound,
            penalty,
        }
    }
}

fn default_v() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub classes: Vec<ClassParams>,
    #[serde(default)]
    pub rate_fn: RatePowerFn,
    pub p_min: f64,
    pub p_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_const: Option<f64>,
    #[serde(default = "default_v")]
    pub v_param: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_order: Option<Vec<usize>>,
}

impl SystemConfig {
    pub fn new(classes: Vec<ClassParams>, rate_fn: RatePowerFn, p_min: f64, p_max: f64) -> Self {
        Self {
            classes,
            rate_fn,
            p_min,
            p_max,
            p_const: None,
            v_param: 1.0,
            r_max: None,
            fixed_power: None,
            fixed_order: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: SystemConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::InvalidConfig("at least one class is required".into()));
        }
        for (i, c) in self.classes.iter().enumerate() {
            if !(c.lambda > 0.0 && c.lambda.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "class {}: arrival rate must be positive",
                    i + 1
                )));
            }
            if !(c.delay_bound > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "class {}: delay bound must be positive",
                    i + 1
                )));
            }
            c.size.validate()?;
            let upto = c
                .delay_bound
                .max(self.r_max.as_ref().map_or(0.0, |r| r.get(i).copied().unwrap_or(0.0)));
            c.penalty
                .validate(upto)
                .map_err(|e| Error::InvalidConfig(format!("class {}: {e}", i + 1)))?;
        }
        if !(self.p_min <= self.p_max) || !self.p_min.is_finite() || !self.p_max.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "need p_min <= p_max, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if !(self.v_param > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "V must be positive, got {}",
                self.v_param
            )));
        }
        if let Some(pc) = self.p_const {
            if !(pc > 0.0) {
                return Err(Error::InvalidConfig(format!("p_const must be positive, got {pc}")));
            }
        }
        if let Some(r) = &self.r_max {
            if r.len() != self.classes.len() || r.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::InvalidConfig("r_max needs one positive entry per class".into()));
            }
        }
        if let Some(p) = self.fixed_power {
            if p < self.p_min || p > self.p_max {
                return Err(Error::InvalidConfig(format!(
                    "fixed_power {p} outside [{}, {}]",
                    self.p_min, self.p_max
                )));
            }
        }
        if let Some(order) = &self.fixed_order {
            crate::analytic::PriorityOrder::from_one_based(order)?;
            if order.len() != self.classes.len() {
                return Err(Error::InvalidOrder(format!(
                    "fixed_order has {} entries for {} classes",
                    order.len(),
                    self.classes.len()
                )));
            }
        }
        self.rate_fn.validate(self.p_min, self.p_max)?;
        self.check_stable(self.p_min)
    }

    /// `mu(p)` must exceed the total work arrival rate.
    pub fn check_stable(&self, p: f64) -> Result<()> {
        let rate = self.rate_fn.rate(p);
        let load = self.work_rate();
        if rate > load {
            Ok(())
        } else {
            Err(Error::Unstable { power: p, rate, load })
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.lambda).collect()
    }

    pub fn total_lambda(&self) -> f64 {
        self.classes.iter().map(|c| c.lambda).sum()
    }

    pub fn mean_sizes(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.size.mean()).collect()
    }

    pub fn delay_bounds(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.delay_bound).collect()
    }

    pub fn penalties(&self) -> Vec<PenaltyFn> {
        self.classes.iter().map(|c| c.penalty.clone()).collect()
    }

    /// Per-class work arrival rates `lambda_n E[S_n]` (power independent).
    pub fn work_rates(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.lambda * c.size.mean()).collect()
    }

    pub fn work_rate(&self) -> f64 {
        self.classes.iter().map(|c| c.lambda * c.size.mean()).sum()
    }

    /// `0.5 * sum lambda_n E[S_n^2]`, the residual-work constant in size units.
    pub fn residual_size_constant(&self) -> f64 {
        0.5 * self
            .classes
            .iter()
            .map(|c| c.lambda * c.size.second_moment())
            .sum::<f64>()
    }

    /// Power used by policies that do not control power.
    pub fn fixed_power(&self) -> f64 {
        self.fixed_power.unwrap_or(self.p_min)
    }

    pub fn with_bounds(mut self, bounds: &[f64]) -> Self {
        for (c, &d) in self.classes.iter_mut().zip(bounds) {
            c.delay_bound = d;
        }
        self
    }

    pub fn with_v(mut self, v: f64) -> Self {
        self.v_param = v;
        self
    }
}

/// Reference systems used throughout the tests, benches and examples.
pub mod presets {
    use super::*;

    /// Two-class M/M/1 queue without power control: arrival rates (1, 2),
    /// exponential service times with means (0.4, 0.2). Power is pinned at 1
    /// under `mu(P) = P`, so job sizes equal service times.
    pub fn mm1_two_class(bounds: [f64; 2]) -> SystemConfig {
        SystemConfig::new(
            vec![
                ClassParams::new(1.0, JobSizeDist::exponential(0.4), bounds[0], PenaltyFn::quadratic(1.0)),
                ClassParams::new(2.0, JobSizeDist::exponential(0.2), bounds[1], PenaltyFn::quadratic(4.0)),
            ],
            RatePowerFn::Linear,
            1.0,
            1.0,
        )
    }

    /// The fairness instance on [`mm1_two_class`]: penalty
    /// `0.5 W1^2 + 2 W2^2`, bounds (2, 2).
    pub fn mm1_fairness(v: f64) -> SystemConfig {
        mm1_two_class([2.0, 2.0]).with_v(v)
    }

    /// Two classes with power control: arrival rates (1, 2), unit mean sizes,
    /// `E[S1^2] = 2` (exponential), `E[S2^2] = 1` (deterministic),
    /// `mu(P) = P` on `[4, 10]`.
    pub fn power_two_class() -> SystemConfig {
        SystemConfig::new(
            vec![
                ClassParams::new(1.0, JobSizeDist::exponential(1.0), 1.0, PenaltyFn::quadratic(1.0)),
                ClassParams::new(2.0, JobSizeDist::deterministic(1.0), 1.0, PenaltyFn::quadratic(1.0)),
            ],
            RatePowerFn::Linear,
            4.0,
            10.0,
        )
    }

    /// [`power_two_class`] with the strictly sublinear rate
    /// `mu(P) = 2 + P/2`, so that average power `3P/(2 + P/2)` grows with `P`.
    /// Under `mu(P) = P` every policy consumes average power exactly
    /// `sum lambda E[S] = 3`.
    pub fn power_two_class_affine() -> SystemConfig {
        let mut cfg = power_two_class();
        cfg.rate_fn = RatePowerFn::Affine {
            intercept: 2.0,
            slope: 0.5,
        };
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unstable_and_malformed() {
        let mut cfg = presets::power_two_class();
        cfg.p_min = 3.0;
        assert!(matches!(cfg.validate(), Err(Error::Unstable { .. })));
        let mut cfg = presets::power_two_class();
        cfg.p_max = 2.0;
        assert!(cfg.validate().is_err());
        let mut cfg = presets::power_two_class();
        cfg.v_param = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = presets::power_two_class();
        cfg.classes[0].lambda = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = presets::power_two_class();
        cfg.fixed_order = Some(vec![1, 1]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut cfg = presets::mm1_fairness(100.0);
        cfg.fixed_order = Some(vec![2, 1]);
        let back = SystemConfig::from_json_str(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn derived_constants() {
        let cfg = presets::power_two_class();
        assert_eq!(cfg.work_rate(), 3.0);
        assert_eq!(cfg.residual_size_constant(), 2.0);
        assert_eq!(cfg.total_lambda(), 3.0);
        assert_eq!(cfg.fixed_power(), 4.0);
    }

    #[test]
    fn parses_documented_example() {
        let text = r#"{
          "classes": [
            { "lambda": 1.0, "size": { "kind": "exponential", "mean": 0.4 },
              "delay_bound": 2.0, "penalty": { "kind": "quadratic", "coefficient": 1.0 } },
            { "lambda": 2.0, "size": { "kind": "exponential", "mean": 0.2 },
              "delay_bound": 2.0, "penalty": { "kind": "quadratic", "coefficient": 4.0 } }
          ],
          "rate_fn": { "kind": "linear" },
          "p_min": 1.0,
          "p_max": 1.0,
          "v_param": 100.0
        }"#;
        let cfg = SystemConfig::from_json_str(text).unwrap();
        assert_eq!(cfg, presets::mm1_fairness(100.0));
    }
}
