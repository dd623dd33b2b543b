//! Brute-force ground truth over the achievable delay region.
//!
//! Coordinates: at a fixed power the region is a base polytope in
//! `x_n = rho_n W_n`. Its floor function is `b(S) = R sigma_S / (1 - sigma_S)`
//! and linear objectives over it are minimized by strict priority orders.
//! With power as a decision variable we use the power-free coordinates
//! `y_n = lambda_n E[S_n] W_n`, in which a time share `beta_j` of constant
//! power `P_j` contributes `beta_j mu(P_j) b_{P_j}(S)` to every floor.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::analytic::{load_profile, priority_delays, DelayVector, LoadProfile, PriorityOrder};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::penalty::PenaltyFn;
use crate::search::golden_section;

pub const MAX_VERTEX_CLASSES: usize = 8;
pub const MAX_POWER_CLASSES: usize = 4;
pub const FW_MAX_ITERATIONS: usize = 10_000;
pub const FW_REL_GAP: f64 = 1e-8;
/// Default number of grid cells over `[p_min, p_max]`.
pub const POWER_GRID_STEPS: usize = 2000;

const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionVertex {
    pub order: PriorityOrder,
    pub delays: DelayVector,
    /// `rho_n W_n`
    pub x_values: Vec<f64>,
}

/// Strict priority delay vectors at power `p`, one per order, in
/// [`PriorityOrder::all`] order.
pub fn enumerate_vertices(cfg: &SystemConfig, p: f64) -> Result<Vec<RegionVertex>> {
    guard(cfg.n_classes(), MAX_VERTEX_CLASSES, "vertex enumeration")?;
    let profile = load_profile(cfg, p)?;
    PriorityOrder::all(cfg.n_classes())
        .into_iter()
        .map(|order| {
            let delays = priority_delays(&profile, &order)?;
            let x_values = delays.iter().zip(&profile.rho).map(|(w, r)| w * r).collect();
            Ok(RegionVertex {
                order,
                delays,
                x_values,
            })
        })
        .collect()
}

fn guard(classes: usize, limit: usize, what: &'static str) -> Result<()> {
    if classes > limit {
        return Err(Error::TooManyClasses { what, limit, classes });
    }
    Ok(())
}

/// Probabilities over a vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub weights: Vec<f64>,
}

impl Mixture {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidMixture(format!("negative or undefined weight {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidMixture(format!("weights sum to {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn point(n: usize, at: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Self { weights }
    }
}

pub fn mixture_delays(vertices: &[RegionVertex], mixture: &Mixture) -> Result<DelayVector> {
    let m = Mixture::new(mixture.weights.clone())?;
    if m.weights.len() != vertices.len() {
        return Err(Error::InvalidMixture(format!(
            "{} weights for {} vertices",
            m.weights.len(),
            vertices.len()
        )));
    }
    let n = vertices.first().map_or(0, |v| v.delays.len());
    let mut w = vec![0.0; n];
    for (v, a) in vertices.iter().zip(&m.weights) {
        for (acc, d) in w.iter_mut().zip(&v.delays) {
            *acc += a * d;
        }
    }
    Ok(w)
}

fn mask_sum(v: &[f64], mask: usize) -> f64 {
    v.iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, x)| x)
        .sum()
}

fn mask_classes(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect()
}

/// Checks that some point of the region at this profile meets `W <= bounds`:
/// every subset `S` needs `sum_S rho d >= b(S)`. Reports the most violated
/// subset.
pub fn check_bounds(profile: &LoadProfile, bounds: &[f64]) -> Result<()> {
    let n = profile.rho.len();
    let u: Vec<f64> = profile.rho.iter().zip(bounds).map(|(r, d)| r * d).collect();
    worst_violation(n, |mask| profile.subset_floor(mask), &u)
}

fn worst_violation(n: usize, floor: impl Fn(usize) -> f64, u: &[f64]) -> Result<()> {
    let mut worst: Option<(usize, f64, f64)> = None;
    for mask in 1..1usize << n {
        let required = floor(mask);
        let allowed = mask_sum(u, mask);
        if required > allowed * (1.0 + FEAS_TOL) + 1e-15 {
            let excess = required - allowed;
            if worst.is_none_or(|(_, r, a)| excess > r - a) {
                worst = Some((mask, required, allowed));
            }
        }
    }
    match worst {
        None => Ok(()),
        Some((mask, required, allowed)) => Err(Error::InfeasibleBounds {
            classes: mask_classes(mask, n),
            required,
            allowed,
        }),
    }
}

/// Optimizer of a penalty target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTarget {
    pub delays: DelayVector,
    pub penalty: f64,
    pub iterations: usize,
    pub gap: f64,
}

/// Minimizes `sum f_n(W_n)` over the region at power `p` intersected with
/// `W <= bounds` (pass infinite bounds for none).
pub fn min_penalty_target(
    cfg: &SystemConfig,
    penalties: &[PenaltyFn],
    bounds: &[f64],
    p: f64,
) -> Result<PenaltyTarget> {
    let n = cfg.n_classes();
    guard(n, MAX_VERTEX_CLASSES, "penalty oracle")?;
    if penalties.len() != n || bounds.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} penalties and {} bounds for {n} classes",
            penalties.len(),
            bounds.len()
        )));
    }
    let profile = load_profile(cfg, p)?;
    check_bounds(&profile, bounds)?;
    let full = (1usize << n) - 1;
    let b_full = profile.subset_floor(full);
    let u: Vec<f64> = profile
        .rho
        .iter()
        .zip(bounds)
        .map(|(r, d)| if d.is_finite() { r * d } else { f64::INFINITY })
        .collect();
    // g(T) = b(N) - b(N \ T) spans the same base polytope as b; truncating
    // by u intersects it with the box x <= u
    let g: Vec<f64> = (0..=full).map(|t| b_full - profile.subset_floor(full & !t)).collect();
    let gu: Vec<f64> = (0..=full)
        .map(|t| {
            let mut best = g[t];
            let mut a = t;
            loop {
                a = a.wrapping_sub(1) & t;
                let v = g[a] + mask_sum(&u, t & !a);
                if v < best {
                    best = v;
                }
                if a == 0 {
                    break;
                }
            }
            best
        })
        .collect();
    let lmo = |cost: &[f64]| -> Vec<f64> {
        // ascending cost fills the lowest priorities first; ties put the
        // higher index lower
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| cost[a].total_cmp(&cost[b]).then(b.cmp(&a)));
        let mut x = vec![0.0; n];
        let mut t = 0usize;
        for &e in &idx {
            let next = t | 1 << e;
            x[e] = gu[next] - gu[t];
            t = next;
        }
        x
    };
    let (fw, _) = frank_wolfe(&profile.rho, penalties, |c: &[f64]| (lmo(c), 0.0));
    Ok(fw)
}

fn objective(weights: &[f64], penalties: &[PenaltyFn], x: &[f64]) -> f64 {
    x.iter()
        .zip(weights)
        .zip(penalties)
        .map(|((x, r), f)| f.value(x / r))
        .sum()
}

fn frank_wolfe(
    weights: &[f64],
    penalties: &[PenaltyFn],
    mut lmo: impl FnMut(&[f64]) -> (Vec<f64>, f64),
) -> (PenaltyTarget, f64) {
    let n = weights.len();
    let grad = |x: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| penalties[i].derivative(x[i] / weights[i]) / weights[i])
            .collect()
    };
    // start from the vertex that is best for the gradient at equal x
    let (mut x, mut aux) = lmo(&grad(&vec![0.0; n]));
    let smooth = penalties
        .iter()
        .all(|f| matches!(f, PenaltyFn::Quadratic { .. } | PenaltyFn::Linear { .. }));
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < FW_MAX_ITERATIONS {
        let g = grad(&x);
        let (s, s_aux) = lmo(&g);
        let dir: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
        gap = -g.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        let value = objective(weights, penalties, &x);
        if gap <= FW_REL_GAP * value.abs() || gap <= 0.0 {
            break;
        }
        iterations += 1;
        let step = if smooth {
            exact_step(weights, penalties, &x, &dir)
        } else {
            let phi = |t: f64| {
                let y: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + t * d).collect();
                objective(weights, penalties, &y)
            };
            golden_section(phi, 0.0, 1.0, 1e-12).0
        };
        for (a, d) in x.iter_mut().zip(&dir) {
            *a += step * d;
        }
        aux += step * (s_aux - aux);
    }
    let delays: Vec<f64> = x.iter().zip(weights).map(|(a, r)| a / r).collect();
    let target = PenaltyTarget {
        penalty: penalties.iter().zip(&delays).map(|(f, w)| f.value(*w)).sum(),
        delays,
        iterations,
        gap: gap.max(0.0),
    };
    (target, aux)
}

fn exact_step(weights: &[f64], penalties: &[PenaltyFn], x: &[f64], dir: &[f64]) -> f64 {
    let (mut slope, mut curv) = (0.0, 0.0);
    for i in 0..x.len() {
        let a = x[i] / weights[i];
        let b = dir[i] / weights[i];
        match penalties[i] {
            PenaltyFn::Quadratic { coefficient } => {
                slope += coefficient * a * b;
                curv += coefficient * b * b;
            }
            PenaltyFn::Linear { coefficient } => slope += coefficient * b,
            PenaltyFn::Tabulated { .. } => unreachable!(),
        }
    }
    if curv > 0.0 {
        (-slope / curv).clamp(0.0, 1.0)
    } else if slope < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// One constant-power operating point of an optimal randomization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerShare {
    pub power: f64,
    /// Fraction of time spent at this power.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTarget {
    pub average_power: f64,
    pub support: Vec<PowerShare>,
}

/// Power-free quantities of one configuration.
struct PowerGeometry {
    n: usize,
    work_rates: Vec<f64>,
    work_rate: f64,
    r_hat: f64,
    cfg: SystemConfig,
}

impl PowerGeometry {
    fn new(cfg: &SystemConfig) -> Result<Self> {
        cfg.check_stable(cfg.p_min)?;
        Ok(Self {
            n: cfg.n_classes(),
            work_rates: cfg.work_rates(),
            work_rate: cfg.work_rate(),
            r_hat: cfg.residual_size_constant(),
            cfg: cfg.clone(),
        })
    }

    fn mu(&self, p: f64) -> f64 {
        self.cfg.rate_fn.rate(p)
    }

    /// Time-average power of constant `p`.
    fn g(&self, p: f64) -> f64 {
        self.work_rate * (p / self.mu(p))
    }

    /// Subset floor in `y` coordinates at constant `p`.
    fn h(&self, p: f64, mask: usize) -> f64 {
        let mu = self.mu(p);
        let s = mask_sum(&self.work_rates, mask);
        self.r_hat * s / (mu * (mu - s))
    }

    fn feasible(&self, p: f64, u: &[f64]) -> bool {
        (1..1usize << self.n).all(|m| self.h(p, m) <= mask_sum(u, m) * (1.0 + FEAS_TOL) + 1e-15)
    }

    fn grid(&self, steps: usize) -> Vec<f64> {
        let (lo, hi) = (self.cfg.p_min, self.cfg.p_max);
        if steps == 0 || hi <= lo {
            return vec![lo];
        }
        (0..=steps)
            .map(|j| {
                if j == steps {
                    hi
                } else {
                    lo + (hi - lo) * j as f64 / steps as f64
                }
            })
            .collect()
    }
}

/// Smallest average power that meets `W <= bounds`, over time shares of
/// constant-power operating points.
pub fn min_power_target(cfg: &SystemConfig, bounds: &[f64]) -> Result<PowerTarget> {
    min_power_target_with_steps(cfg, bounds, POWER_GRID_STEPS)
}

/// [`min_power_target`] over a grid of `steps` cells plus the smallest
/// feasible constant power.
pub fn min_power_target_with_steps(cfg: &SystemConfig, bounds: &[f64], steps: usize) -> Result<PowerTarget> {
    let geo = PowerGeometry::new(cfg)?;
    let n = geo.n;
    guard(n, MAX_POWER_CLASSES, "power oracle")?;
    if bounds.len() != n {
        return Err(Error::InvalidConfig(format!("{} bounds for {n} classes", bounds.len())));
    }
    let u: Vec<f64> = geo.work_rates.iter().zip(bounds).map(|(r, d)| r * d).collect();
    let (lo, hi) = (cfg.p_min, cfg.p_max);
    if !geo.feasible(hi, &u) {
        worst_violation(n, |m| geo.h(hi, m), &u)?;
    }
    let boundary = if geo.feasible(lo, &u) {
        lo
    } else {
        let (mut a, mut b) = (lo, hi);
        while b - a > 1e-13 * (hi - lo) {
            let m = 0.5 * (a + b);
            if geo.feasible(m, &u) {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let mut powers = geo.grid(steps);
    powers.push(boundary);
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = powers
        .iter()
        .map(|&p| lp.add_var(geo.g(p), (0.0, f64::INFINITY)))
        .collect();
    for mask in 1..1usize << n {
        let mut expr = LinearExpr::empty();
        for (&v, &p) in vars.iter().zip(&powers) {
            expr.add(v, geo.h(p, mask));
        }
        lp.add_constraint(expr, ComparisonOp::Le, mask_sum(&u, mask));
    }
    let mut total = LinearExpr::empty();
    for &v in &vars {
        total.add(v, 1.0);
    }
    lp.add_constraint(total, ComparisonOp::Eq, 1.0);
    let sol = lp
        .solve()
        .map_err(|e| Error::InfeasiblePower(format!("linear program failed: {e}")))?;
    let mut support: Vec<PowerShare> = vars
        .iter()
        .zip(&powers)
        .filter(|(v, _)| sol[**v] > 1e-12)
        .map(|(v, &p)| PowerShare {
            power: p,
            share: sol[*v],
        })
        .collect();
    support.sort_by(|a, b| a.power.total_cmp(&b.power));
    let constant = geo.g(boundary);
    if constant <= sol.objective() {
        return Ok(PowerTarget {
            average_power: constant,
            support: vec![PowerShare {
                power: boundary,
                share: 1.0,
            }],
        });
    }
    Ok(PowerTarget {
        average_power: sol.objective(),
        support,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPowerTarget {
    pub delays: DelayVector,
    pub penalty: f64,
    pub average_power: f64,
    pub iterations: usize,
    pub gap: f64,
}

/// Minimizes `sum f_n(W_n)` over time shares of constant-power operating
/// points whose average power is at most `p_const`.
pub fn min_penalty_power_target(
    cfg: &SystemConfig,
    penalties: &[PenaltyFn],
    p_const: f64,
) -> Result<PenaltyPowerTarget> {
    min_penalty_power_target_with_steps(cfg, penalties, p_const, POWER_GRID_STEPS)
}

pub fn min_penalty_power_target_with_steps(
    cfg: &SystemConfig,
    penalties: &[PenaltyFn],
    p_const: f64,
    steps: usize,
) -> Result<PenaltyPowerTarget> {
    let geo = PowerGeometry::new(cfg)?;
    let n = geo.n;
    guard(n, MAX_POWER_CLASSES, "power oracle")?;
    if penalties.len() != n {
        return Err(Error::InvalidConfig(format!(
            "{} penalties for {n} classes",
            penalties.len()
        )));
    }
    let mut powers = geo.grid(steps);
    let (g_lo, g_hi) = (geo.g(cfg.p_min), geo.g(cfg.p_max));
    if g_lo < p_const && p_const < g_hi {
        let (mut a, mut b) = (cfg.p_min, cfg.p_max);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if geo.g(m) <= p_const {
                a = m;
            } else {
                b = m;
            }
        }
        powers.push(a);
    }
    let mut points: Vec<(f64, f64)> = powers.iter().map(|&p| (geo.g(p), p)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let min_g = points[0].0;
    if p_const < min_g {
        return Err(Error::InfeasiblePower(format!(
            "budget {p_const} is below the smallest achievable average power {min_g}"
        )));
    }
    let orders = PriorityOrder::all(n);
    // y vectors per point and order
    let vertex_y: Vec<Vec<Vec<f64>>> = points
        .iter()
        .map(|&(_, p)| {
            let profile = load_profile(cfg, p)?;
            orders
                .iter()
                .map(|o| {
                    let w = priority_delays(&profile, o)?;
                    Ok(w.iter().zip(&geo.work_rates).map(|(w, r)| w * r).collect())
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let order_index = |o: &PriorityOrder| orders.iter().position(|q| q == o).expect("order present");
    let gs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let lmo = |cost: &[f64]| -> (Vec<f64>, f64) {
        let o = order_index(&PriorityOrder::by_descending(cost));
        let vals: Vec<f64> = vertex_y
            .iter()
            .map(|ys| ys[o].iter().zip(cost).map(|(a, c)| a * c).sum())
            .collect();
        let mut s = vec![0.0; n];
        let mut power = 0.0;
        for (j, beta) in budget_hull_min(&gs, &vals, p_const) {
            power += beta * gs[j];
            for (acc, y) in s.iter_mut().zip(&vertex_y[j][o]) {
                *acc += beta * y;
            }
        }
        (s, power)
    };
    let (t, average_power) = frank_wolfe(&geo.work_rates, penalties, lmo);
    Ok(PenaltyPowerTarget {
        delays: t.delays,
        penalty: t.penalty,
        average_power,
        iterations: t.iterations,
        gap: t.gap,
    })
}

/// Minimizes `sum beta_j v_j` subject to `sum beta_j g_j <= budget` over the
/// simplex; `g` is sorted ascending with `g[0] <= budget`. Returns at most two
/// `(index, weight)` pairs.
fn budget_hull_min(g: &[f64], v: &[f64], budget: f64) -> Vec<(usize, f64)> {
    // lower convex hull, keeping the lowest value among equal abscissae
    let mut hull: Vec<usize> = Vec::new();
    for j in 0..g.len() {
        if let Some(&last) = hull.last() {
            if g[j] == g[last] {
                if v[j] < v[last] {
                    hull.pop();
                } else {
                    continue;
                }
            }
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (g[b] - g[a]) * (v[j] - v[a]) - (v[b] - v[a]) * (g[j] - g[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(j);
    }
    let mut best = vec![(hull[0], 1.0)];
    let mut best_v = v[hull[0]];
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        if g[b] <= budget {
            if v[b] < best_v {
                best_v = v[b];
                best = vec![(b, 1.0)];
            }
        } else {
            let t = (budget - g[a]) / (g[b] - g[a]);
            let val = v[a] + t * (v[b] - v[a]);
            if val < best_v {
                best = vec![(a, 1.0 - t), (b, t)];
            }
            break;
        }
    }
    best
}

/// Exhaustive scan of `f` over `steps + 1` equally spaced points of
/// `[lo, hi]`; the first minimizer wins ties.
pub fn scan_argmin(f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> (f64, f64) {
    let mut best = (lo, f(lo));
    for j in 1..=steps {
        let p = lo + (hi - lo) * j as f64 / steps as f64;
        let v = f(p);
        if v < best.1 {
            best = (p, v);
        }
    }
    best
}
