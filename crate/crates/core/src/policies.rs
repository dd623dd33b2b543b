//! Frame-based controllers.
//!
//! Each controller looks only at the virtual queues at the start of a frame
//! and returns a priority order, optionally a power level for the coming busy
//! period and optionally per-class auxiliary delay targets. At the frame
//! boundary the controller applies its own virtual-queue updates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{load_profile, priority_delays, PriorityOrder};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::penalty::PenaltyFn;
use crate::rate::RatePowerFn;
use crate::search::{golden_section, grid_golden_argmin};
use crate::simulator::FrameRecord;
use crate::virtual_queues::{PathwiseBounds, VirtualState};

/// Grid size of the power search.
pub const POWER_GRID_POINTS: usize = 512;
/// Golden-section tolerance of the power search, relative to `p_max - p_min`.
pub const POWER_REL_TOL: f64 = 1e-9;
/// Golden-section tolerance of the auxiliary subproblem, relative to the box width.
pub const AUX_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    /// Meet delay bounds at fixed power.
    DelayFeas,
    /// Minimize a convex delay penalty under delay bounds at fixed power.
    DelayFair,
    /// Minimize average power under delay bounds.
    DynPower,
    /// [`PolicyKind::DynPower`] without second moments; `v_param` plays the
    /// role of the rescaled weight `V / R_hat`.
    #[serde(rename = "dynpower-nm2")]
    DynPowerNoM2,
    /// Minimize a convex delay penalty under an average power budget.
    PwDelayFair,
    /// Static priority order at fixed power.
    #[serde(rename = "fixed-order")]
    FixedOrder,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::DelayFeas,
        PolicyKind::DelayFair,
        PolicyKind::DynPower,
        PolicyKind::DynPowerNoM2,
        PolicyKind::PwDelayFair,
        PolicyKind::FixedOrder,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::DelayFeas => "delayfeas",
            PolicyKind::DelayFair => "delayfair",
            PolicyKind::DynPower => "dynpower",
            PolicyKind::DynPowerNoM2 => "dynpower-nm2",
            PolicyKind::PwDelayFair => "pwdelayfair",
            PolicyKind::FixedOrder => "fixed-order",
        }
    }

    pub fn controls_power(&self) -> bool {
        matches!(
            self,
            PolicyKind::DynPower | PolicyKind::DynPowerNoM2 | PolicyKind::PwDelayFair
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown policy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDecision {
    pub order: PriorityOrder,
    pub power: Option<f64>,
    pub auxiliaries: Option<Vec<f64>>,
}

/// Priority by decreasing virtual delay backlog.
pub fn delayfeas_decide(z: &[f64]) -> FrameDecision {
    FrameDecision {
        order: PriorityOrder::by_descending(z),
        power: None,
        auxiliaries: None,
    }
}

/// Priority by decreasing `(Z_n + Y_n) / E[S_n]`.
pub fn delayfair_order(z: &[f64], y: &[f64], mean_sizes: &[f64]) -> PriorityOrder {
    let w: Vec<f64> = (0..z.len()).map(|n| (z[n] + y[n]) / mean_sizes[n]).collect();
    PriorityOrder::by_descending(&w)
}

/// Minimizer of `V f(r) - Y lambda r` over `r in [0, upper]`.
pub fn delayfair_aux(y: f64, lambda: f64, penalty: &PenaltyFn, v: f64, upper: f64) -> f64 {
    let slope = y * lambda;
    match penalty {
        PenaltyFn::Quadratic { coefficient } if *coefficient > 0.0 => (slope / (v * coefficient)).clamp(0.0, upper),
        PenaltyFn::Quadratic { .. } => {
            if slope > 0.0 {
                upper
            } else {
                0.0
            }
        }
        PenaltyFn::Linear { coefficient } => {
            if slope > v * coefficient {
                upper
            } else {
                0.0
            }
        }
        PenaltyFn::Tabulated { .. } => {
            let obj = |r: f64| v * penalty.value(r) - slope * r;
            let (r, fr) = golden_section(obj, 0.0, upper, AUX_REL_TOL * upper);
            // the minimum of a convex function on a box may sit at an end
            [(0.0, obj(0.0)), (r, fr), (upper, obj(upper))]
                .into_iter()
                .fold((f64::NAN, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
                .0
        }
    }
}

/// The per-order delay-weight term of the power objective,
/// `sum_m w_{pi_m} lambda_{pi_m} / ((mu - s_{m-1})(mu - s_m))` with
/// `s_m` the cumulative work rate of the top `m` classes. Multiply by
/// `R_hat = 0.5 sum lambda E[S^2]` to obtain `sum w lambda W(P)`.
#[derive(Debug, Clone)]
pub struct DelayTerm {
    coef: Vec<f64>,
    cum: Vec<f64>,
}

impl DelayTerm {
    pub fn new(order: &PriorityOrder, weights: &[f64], lambdas: &[f64], work_rates: &[f64]) -> Self {
        let mut coef = Vec::with_capacity(order.len());
        let mut cum = Vec::with_capacity(order.len() + 1);
        cum.push(0.0);
        let mut s = 0.0;
        for &c in order.classes() {
            coef.push(weights[c] * lambdas[c]);
            s += work_rates[c];
            cum.push(s);
        }
        Self { coef, cum }
    }

    pub fn is_zero(&self) -> bool {
        self.coef.iter().all(|&c| c == 0.0)
    }

    #[inline]
    pub fn eval(&self, mu: f64) -> f64 {
        let mut acc = 0.0;
        for m in 0..self.coef.len() {
            if self.coef[m] != 0.0 {
                acc += self.coef[m] / ((mu - self.cum[m]) * (mu - self.cum[m + 1]));
            }
        }
        acc
    }
}

/// Static data the power-controlling rules need.
#[derive(Debug, Clone)]
pub struct PowerModel {
    pub rate_fn: RatePowerFn,
    pub p_min: f64,
    pub p_max: f64,
    pub lambdas: Vec<f64>,
    pub mean_sizes: Vec<f64>,
    pub work_rates: Vec<f64>,
    pub work_rate: f64,
    pub r_hat: f64,
}

impl PowerModel {
    pub fn new(cfg: &SystemConfig) -> Self {
        Self {
            rate_fn: cfg.rate_fn.clone(),
            p_min: cfg.p_min,
            p_max: cfg.p_max,
            lambdas: cfg.lambdas(),
            mean_sizes: cfg.mean_sizes(),
            work_rates: cfg.work_rates(),
            work_rate: cfg.work_rate(),
            r_hat: cfg.residual_size_constant(),
        }
    }

    fn check_stable(&self) -> Result<()> {
        let rate = self.rate_fn.rate(self.p_min);
        if rate > self.work_rate {
            Ok(())
        } else {
            Err(Error::Unstable {
                power: self.p_min,
                rate,
                load: self.work_rate,
            })
        }
    }

    /// Priority by decreasing `weight_n / E[S_n]`.
    pub fn order_by(&self, weights: &[f64]) -> PriorityOrder {
        let w: Vec<f64> = weights.iter().zip(&self.mean_sizes).map(|(a, s)| a / s).collect();
        PriorityOrder::by_descending(&w)
    }

    /// Time-average power of a constant power level, `P * sum rho(P)`.
    pub fn average_power(&self, p: f64) -> f64 {
        self.work_rate * p / self.rate_fn.rate(p)
    }

    /// Argmin over `[p_min, p_max]` of
    /// `energy_weight * P / mu(P) + offset + delay_scale * term(mu(P))`.
    pub fn argmin(&self, energy_weight: f64, delay_scale: f64, term: &DelayTerm) -> Result<f64> {
        self.check_stable()?;
        if self.p_max <= self.p_min {
            return Ok(self.p_min);
        }
        let obj = |p: f64| {
            let mu = self.rate_fn.rate(p);
            energy_weight * (p / mu) + delay_scale * term.eval(mu)
        };
        Ok(grid_golden_argmin(obj, self.p_min, self.p_max, POWER_GRID_POINTS, POWER_REL_TOL).0)
    }

    /// DynPower objective: `V sum(lambda E[S]) P/mu(P) + sum Z lambda W(P)`.
    pub fn dynpower_objective(&self, z: &[f64], order: &PriorityOrder, v: f64, p: f64) -> f64 {
        let term = DelayTerm::new(order, z, &self.lambdas, &self.work_rates);
        let mu = self.rate_fn.rate(p);
        v * self.work_rate * (p / mu) + self.r_hat * term.eval(mu)
    }

    /// Second-moment-free objective with rescaled weight `v_tilde`.
    pub fn dynpower_nm2_objective(&self, z: &[f64], order: &PriorityOrder, v_tilde: f64, p: f64) -> f64 {
        let term = DelayTerm::new(order, z, &self.lambdas, &self.work_rates);
        let mu = self.rate_fn.rate(p);
        v_tilde * self.work_rate * (p / mu) + term.eval(mu)
    }

    /// PwDelayFair objective: `X (P/mu(P) sum lambda E[S] - P_const) + sum Y lambda W(P)`.
    pub fn pwdelayfair_objective(&self, x: f64, y: &[f64], order: &PriorityOrder, p_const: f64, p: f64) -> f64 {
        let term = DelayTerm::new(order, y, &self.lambdas, &self.work_rates);
        let mu = self.rate_fn.rate(p);
        x * (self.work_rate * (p / mu) - p_const) + self.r_hat * term.eval(mu)
    }
}

pub fn dynpower_decide(z: &[f64], model: &PowerModel, v: f64) -> Result<FrameDecision> {
    let order = model.order_by(z);
    let term = DelayTerm::new(&order, z, &model.lambdas, &model.work_rates);
    let power = model.argmin(v * model.work_rate, model.r_hat, &term)?;
    Ok(FrameDecision {
        order,
        power: Some(power),
        auxiliaries: None,
    })
}

pub fn dynpower_decide_no_m2(z: &[f64], model: &PowerModel, v_tilde: f64) -> Result<FrameDecision> {
    let order = model.order_by(z);
    let term = DelayTerm::new(&order, z, &model.lambdas, &model.work_rates);
    let power = model.argmin(v_tilde * model.work_rate, 1.0, &term)?;
    Ok(FrameDecision {
        order,
        power: Some(power),
        auxiliaries: None,
    })
}

/// Order and power of the power-budgeted fairness rule; the constant
/// `-X P_const` does not affect the argmin.
pub fn pwdelayfair_power(x: f64, y: &[f64], model: &PowerModel) -> Result<(PriorityOrder, f64)> {
    let order = model.order_by(y);
    let term = DelayTerm::new(&order, y, &model.lambdas, &model.work_rates);
    let power = model.argmin(x * model.work_rate, model.r_hat, &term)?;
    Ok((order, power))
}

/// Twice the largest strict-priority delay at minimum power.
pub fn default_r_max(cfg: &SystemConfig) -> Result<Vec<f64>> {
    let profile = load_profile(cfg, cfg.p_min)?;
    let mut worst: f64 = 0.0;
    for order in PriorityOrder::all(cfg.n_classes()) {
        for w in priority_delays(&profile, &order)? {
            worst = worst.max(w);
        }
    }
    Ok(vec![2.0 * worst; cfg.n_classes()])
}

/// A policy bound to one configuration.
#[derive(Debug, Clone)]
pub struct Controller {
    pub kind: PolicyKind,
    pub model: PowerModel,
    pub v: f64,
    pub bounds: Vec<f64>,
    pub penalties: Vec<PenaltyFn>,
    pub r_max: Vec<f64>,
    pub p_const: f64,
    pub fixed_power: f64,
    pub fixed_order: PriorityOrder,
}

impl Controller {
    pub fn new(kind: PolicyKind, cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let p_const = match (kind, cfg.p_const) {
            (_, Some(p)) => p,
            (PolicyKind::PwDelayFair, None) => return Err(Error::InvalidConfig("pwdelayfair needs p_const".into())),
            (_, None) => 0.0,
        };
        let r_max = match &cfg.r_max {
            Some(r) => r.clone(),
            None => default_r_max(cfg)?,
        };
        let fixed_order = match &cfg.fixed_order {
            Some(o) => PriorityOrder::from_one_based(o)?,
            None => PriorityOrder::identity(cfg.n_classes()),
        };
        Ok(Self {
            kind,
            model: PowerModel::new(cfg),
            v: cfg.v_param,
            bounds: cfg.delay_bounds(),
            penalties: cfg.penalties(),
            r_max,
            p_const,
            fixed_power: cfg.fixed_power(),
            fixed_order,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.bounds.len()
    }

    fn auxiliaries(&self, y: &[f64], upper: &[f64]) -> Vec<f64> {
        (0..y.len())
            .map(|n| delayfair_aux(y[n], self.model.lambdas[n], &self.penalties[n], self.v, upper[n]))
            .collect()
    }

    pub fn decide(&self, state: &VirtualState) -> Result<FrameDecision> {
        match self.kind {
            PolicyKind::DelayFeas => Ok(delayfeas_decide(&state.z)),
            PolicyKind::DelayFair => Ok(FrameDecision {
                order: delayfair_order(&state.z, &state.y, &self.model.mean_sizes),
                power: None,
                auxiliaries: Some(self.auxiliaries(&state.y, &self.bounds)),
            }),
            PolicyKind::DynPower => dynpower_decide(&state.z, &self.model, self.v),
            PolicyKind::DynPowerNoM2 => dynpower_decide_no_m2(&state.z, &self.model, self.v),
            PolicyKind::PwDelayFair => {
                let (order, power) = pwdelayfair_power(state.x, &state.y, &self.model)?;
                Ok(FrameDecision {
                    order,
                    power: Some(power),
                    auxiliaries: Some(self.auxiliaries(&state.y, &self.r_max)),
                })
            }
            PolicyKind::FixedOrder => Ok(FrameDecision {
                order: self.fixed_order.clone(),
                power: None,
                auxiliaries: None,
            }),
        }
    }

    /// Power actually used in the frame.
    pub fn power_of(&self, decision: &FrameDecision) -> f64 {
        decision.power.unwrap_or(self.fixed_power)
    }

    /// Frame-boundary updates of the queues this policy uses, mirrored into
    /// the pathwise floor sums.
    pub fn update(
        &self,
        state: &mut VirtualState,
        bounds: &mut PathwiseBounds,
        frame: &FrameRecord,
        decision: &FrameDecision,
    ) -> Result<()> {
        let r = decision.auxiliaries.as_deref();
        match self.kind {
            PolicyKind::DelayFeas | PolicyKind::DynPower | PolicyKind::DynPowerNoM2 | PolicyKind::FixedOrder => {
                state.update_z(frame, &self.bounds)?;
                bounds.add_z(frame, &self.bounds);
            }
            PolicyKind::DelayFair => {
                let r = r.expect("delayfair decisions carry auxiliaries");
                state.update_z(frame, &self.bounds)?;
                state.update_y(frame, r, &self.bounds)?;
                bounds.add_z(frame, &self.bounds);
                bounds.add_y(frame, r);
            }
            PolicyKind::PwDelayFair => {
                let r = r.expect("pwdelayfair decisions carry auxiliaries");
                state.update_x(frame, self.p_const)?;
                state.update_y(frame, r, &self.r_max)?;
                bounds.add_x(frame, self.p_const);
                bounds.add_y(frame, r);
            }
        }
        state.advance();
        Ok(())
    }
}
