//! Closed-form M/G/1 quantities under a constant power level.
//!
//! Service time of a class-`n` job at power `P` is `S_n / mu(P)`. Everything
//! here follows from the per-class loads `rho_n`, the mean residual work
//! `R = 0.5 * sum lambda_n E[X_n^2]` and renewal arguments over frames.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};

/// Per-class average queueing delays, indexed by class.
pub type DelayVector = Vec<f64>;

/// A strict priority ranking: `classes()[m]` is the class with the `m`-th
/// highest priority (zero-based classes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PriorityOrder(Vec<usize>);

impl PriorityOrder {
    pub fn new(classes: Vec<usize>) -> Result<Self> {
        let n = classes.len();
        let mut seen = vec![false; n];
        for &c in &classes {
            if c >= n || seen[c] {
                return Err(Error::InvalidOrder(format!("{classes:?} is not a permutation")));
            }
            seen[c] = true;
        }
        if n == 0 {
            return Err(Error::InvalidOrder("empty order".into()));
        }
        Ok(Self(classes))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn from_one_based(classes: &[usize]) -> Result<Self> {
        if classes.contains(&0) {
            return Err(Error::InvalidOrder(format!("{classes:?}: classes are numbered from 1")));
        }
        Self::new(classes.iter().map(|c| c - 1).collect())
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|c| c + 1).collect()
    }

    /// Ranks classes by decreasing weight; equal weights go to the lower index.
    pub fn by_descending(weights: &[f64]) -> Self {
        let mut idx: Vec<usize> = (0..weights.len()).collect();
        idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        Self(idx)
    }

    pub fn classes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Priority rank of each class (0 = highest).
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![0; self.0.len()];
        for (m, &c) in self.0.iter().enumerate() {
            r[c] = m;
        }
        r
    }

    /// All `n!` orders in lexicographic order.
    pub fn all(n: usize) -> Vec<PriorityOrder> {
        let mut out = Vec::new();
        let mut cur: Vec<usize> = (0..n).collect();
        loop {
            out.push(PriorityOrder(cur.clone()));
            // next lexicographic permutation
            let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| cur[i] < cur[i + 1]) else {
                break;
            };
            let j = (i + 1..n).rev().find(|&j| cur[j] > cur[i]).unwrap();
            cur.swap(i, j);
            cur[i + 1..].reverse();
        }
        out
    }
}

impl TryFrom<Vec<usize>> for PriorityOrder {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PriorityOrder> for Vec<usize> {
    fn from(o: PriorityOrder) -> Self {
        o.0
    }
}

impl fmt::Display for PriorityOrder {
    /// One-based, space separated.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", c + 1)?;
        }
        Ok(())
    }
}

/// Loads and residual work at one power level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    /// `rho_n = lambda_n E[X_n]`
    pub rho: Vec<f64>,
    /// `R = 0.5 * sum lambda_n E[X_n^2]`
    pub residual: f64,
    pub total: f64,
}

impl LoadProfile {
    pub fn new(rho: Vec<f64>, residual: f64) -> Self {
        let total = rho.iter().sum();
        Self { rho, residual, total }
    }

    fn check_admissible(&self) -> Result<()> {
        if self.total < 1.0 {
            Ok(())
        } else {
            Err(Error::Unstable {
                power: f64::NAN,
                rate: 1.0,
                load: self.total,
            })
        }
    }

    /// Minimum of `sum_{n in S} rho_n W_n` over the region, attained by giving
    /// the classes in `mask` priority over the rest: `R sigma / (1 - sigma)`.
    pub fn subset_floor(&self, mask: usize) -> f64 {
        let sigma: f64 = self
            .rho
            .iter()
            .enumerate()
            .filter(|(n, _)| mask >> n & 1 == 1)
            .map(|(_, r)| r)
            .sum();
        self.residual * sigma / (1.0 - sigma)
    }
}

/// Loads at power `p`; rejects operating points where `mu(p)` does not exceed
/// the total work rate.
pub fn load_profile(config: &SystemConfig, p: f64) -> Result<LoadProfile> {
    config.check_stable(p)?;
    let mu = config.rate_fn.rate(p);
    let rho = config.classes.iter().map(|c| c.lambda * c.size.mean() / mu).collect();
    let residual = config.residual_size_constant() / (mu * mu);
    Ok(LoadProfile::new(rho, residual))
}

/// Mean frame length `1 / ((1 - sum rho) * sum lambda)`.
pub fn expected_frame_size(profile: &LoadProfile, lambdas: &[f64]) -> Result<f64> {
    profile.check_admissible()?;
    let total_lambda: f64 = lambdas.iter().sum();
    Ok(1.0 / ((1.0 - profile.total) * total_lambda))
}

/// Mean queueing delays under a strict nonpreemptive priority order.
pub fn priority_delays(profile: &LoadProfile, order: &PriorityOrder) -> Result<DelayVector> {
    profile.check_admissible()?;
    if order.len() != profile.rho.len() {
        return Err(Error::InvalidOrder(format!(
            "order over {} classes for a {}-class profile",
            order.len(),
            profile.rho.len()
        )));
    }
    let mut w = vec![0.0; order.len()];
    let mut above = 0.0;
    for &c in order.classes() {
        let through = above + profile.rho[c];
        w[c] = profile.residual / ((1.0 - above) * (1.0 - through));
        above = through;
    }
    Ok(w)
}

/// `sum rho_n W_n`, identical for every work-conserving nonpreemptive policy.
pub fn conservation_value(profile: &LoadProfile) -> Result<f64> {
    profile.check_admissible()?;
    Ok(profile.total * profile.residual / (1.0 - profile.total))
}

/// The achievable delay region at one power level: per-class lower bounds
/// (each class alone at top priority) and the conservation equality
/// `sum weights_n W_n = conservation`.
///
/// For two classes these describe the region exactly. For any `N` the region
/// is also `{ sum_{S} rho W >= floor(S) for all S, equality on all classes }`;
/// [`DelayRegion::contains`] checks that full subset description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayRegion {
    pub lower_bounds: Vec<f64>,
    pub weights: Vec<f64>,
    pub conservation: f64,
    pub profile: LoadProfile,
}

impl DelayRegion {
    pub fn contains(&self, w: &[f64], tol: f64) -> bool {
        let n = self.weights.len();
        let total: f64 = w.iter().zip(&self.weights).map(|(a, b)| a * b).sum();
        if (total - self.conservation).abs() > tol * (1.0 + self.conservation) {
            return false;
        }
        (1..(1usize << n) - 1).all(|mask| {
            let lhs: f64 = (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| self.weights[i] * w[i])
                .sum();
            lhs >= self.profile.subset_floor(mask) - tol * (1.0 + lhs.abs())
        })
    }
}

pub fn delay_region(config: &SystemConfig, p: f64) -> Result<DelayRegion> {
    let profile = load_profile(config, p)?;
    let lower_bounds = profile.rho.iter().map(|r| profile.residual / (1.0 - r)).collect();
    Ok(DelayRegion {
        lower_bounds,
        weights: profile.rho.clone(),
        conservation: conservation_value(&profile)?,
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn mm1() -> LoadProfile {
        load_profile(&presets::mm1_two_class([1.0, 1.0]), 1.0).unwrap()
    }

    #[test]
    fn load_profile_examples() {
        let p = mm1();
        assert_relative_eq!(p.rho[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(p.rho[1], 0.4, epsilon = 1e-15);
        assert_relative_eq!(p.residual, 0.24, epsilon = 1e-15);

        let q = load_profile(&presets::power_two_class(), 4.0).unwrap();
        assert_eq!(q.rho, vec![0.25, 0.5]);
        assert_eq!(q.residual, 0.125);

        let mut cfg = presets::power_two_class();
        cfg.p_min = 2.0;
        assert!(matches!(load_profile(&cfg, 3.0), Err(Error::Unstable { .. })));
    }

    #[test]
    fn frame_size_examples() {
        assert_relative_eq!(
            expected_frame_size(&mm1(), &[1.0, 2.0]).unwrap(),
            5.0 / 3.0,
            epsilon = 1e-14
        );
        let empty = LoadProfile::new(vec![0.0, 0.0], 0.0);
        assert_relative_eq!(expected_frame_size(&empty, &[1.0, 2.0]).unwrap(), 1.0 / 3.0);
        let q = load_profile(&presets::power_two_class(), 4.0).unwrap();
        assert_relative_eq!(
            expected_frame_size(&q, &[1.0, 2.0]).unwrap(),
            4.0 / 3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn priority_delay_examples() {
        let p = mm1();
        let w = priority_delays(&p, &PriorityOrder::identity(2)).unwrap();
        assert_relative_eq!(w[0], 0.4, epsilon = 1e-14);
        assert_relative_eq!(w[1], 2.0, epsilon = 1e-14);
        let w = priority_delays(&p, &PriorityOrder::new(vec![1, 0]).unwrap()).unwrap();
        assert_relative_eq!(w[0], 2.0, epsilon = 1e-14);
        assert_relative_eq!(w[1], 0.4, epsilon = 1e-14);

        let cfg = presets::power_two_class();
        for p in [4.0, 5.5, 10.0] {
            let w = priority_delays(&load_profile(&cfg, p).unwrap(), &PriorityOrder::identity(2)).unwrap();
            assert_relative_eq!(w[0], 2.0 / (p * (p - 1.0)), epsilon = 1e-14);
        }
    }

    #[test]
    fn conservation_examples() {
        assert_relative_eq!(conservation_value(&mm1()).unwrap(), 0.96, epsilon = 1e-14);
        let cfg = presets::power_two_class();
        for p in [4.0, 7.0] {
            let prof = load_profile(&cfg, p).unwrap();
            // rho = (1/P, 2/P): W1 + 2 W2 = P * value
            assert_relative_eq!(
                p * conservation_value(&prof).unwrap(),
                6.0 / (p * (p - 3.0)),
                epsilon = 1e-13
            );
        }
        let single = LoadProfile::new(vec![0.5], 0.3);
        assert_relative_eq!(conservation_value(&single).unwrap(), 0.5 * 0.3 / 0.5);
    }

    #[test]
    fn region_examples() {
        let r = delay_region(&presets::power_two_class(), 4.0).unwrap();
        assert_relative_eq!(r.lower_bounds[0], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(r.lower_bounds[1], 0.25, epsilon = 1e-15);
        // W1 + 2 W2 = 1.5 after scaling by mu = 4
        assert_relative_eq!(4.0 * r.conservation, 1.5, epsilon = 1e-15);

        let r = delay_region(&presets::mm1_two_class([1.0, 1.0]), 1.0).unwrap();
        assert_relative_eq!(r.conservation / 0.4, 2.4, epsilon = 1e-14);
        assert!(r.contains(&[1.2, 1.2], 1e-12));
        assert!(r.contains(&[0.4, 2.0], 1e-12));
        assert!(!r.contains(&[0.3, 2.1], 1e-12));

        let mut one = presets::mm1_two_class([1.0, 1.0]);
        one.classes.truncate(1);
        let r = delay_region(&one, 1.0).unwrap();
        assert_relative_eq!(r.lower_bounds[0], r.conservation / r.weights[0], epsilon = 1e-14);
    }

    #[test]
    fn all_orders_enumerated() {
        let orders = PriorityOrder::all(4);
        assert_eq!(orders.len(), 24);
        let set: std::collections::HashSet<_> = orders.iter().cloned().collect();
        assert_eq!(set.len(), 24);
        assert_eq!(PriorityOrder::all(1), vec![PriorityOrder::identity(1)]);
    }

    #[test]
    fn order_helpers() {
        assert_eq!(
            PriorityOrder::by_descending(&[5.0, 2.0, 7.0]).to_one_based(),
            vec![3, 1, 2]
        );
        assert_eq!(PriorityOrder::by_descending(&[0.0, 0.0]), PriorityOrder::identity(2));
        assert!(PriorityOrder::new(vec![0, 0]).is_err());
        assert!(PriorityOrder::from_one_based(&[0, 1]).is_err());
        assert_eq!(PriorityOrder::new(vec![2, 0, 1]).unwrap().to_string(), "3 1 2");
        assert_eq!(PriorityOrder::new(vec![2, 0, 1]).unwrap().ranks(), vec![1, 2, 0]);
    }

    #[test]
    fn delays_decrease_in_power() {
        let cfg = presets::power_two_class();
        for order in PriorityOrder::all(2) {
            let mut prev = vec![f64::INFINITY; 2];
            for i in 0..=60 {
                let p = 4.0 + 0.1 * i as f64;
                let w = priority_delays(&load_profile(&cfg, p).unwrap(), &order).unwrap();
                assert!(w[0] < prev[0] && w[1] < prev[1]);
                prev = w;
            }
        }
    }

    fn profile_strategy() -> impl Strategy<Value = LoadProfile> {
        (prop::collection::vec(0.01f64..1.0, 1..6), 0.01f64..0.95, 0.01f64..5.0).prop_map(|(raw, total, residual)| {
            let s: f64 = raw.iter().sum();
            LoadProfile::new(raw.iter().map(|r| r / s * total).collect(), residual)
        })
    }

    proptest! {
        #[test]
        fn every_order_satisfies_conservation(p in profile_strategy(), seed in 0usize..720) {
            let orders = PriorityOrder::all(p.rho.len());
            let order = &orders[seed % orders.len()];
            let w = priority_delays(&p, order).unwrap();
            let lhs: f64 = w.iter().zip(&p.rho).map(|(a, b)| a * b).sum();
            let rhs = conservation_value(&p).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 1e-300);
        }

        #[test]
        fn moving_up_never_hurts(p in profile_strategy(), seed in 0usize..720, pos in 0usize..5) {
            let orders = PriorityOrder::all(p.rho.len());
            let order = orders[seed % orders.len()].classes().to_vec();
            let pos = pos % order.len();
            if pos > 0 {
                let class = order[pos];
                let mut up = order.clone();
                up.swap(pos - 1, pos);
                let before = priority_delays(&p, &PriorityOrder::new(order).unwrap()).unwrap()[class];
                let after = priority_delays(&p, &PriorityOrder::new(up).unwrap()).unwrap()[class];
                prop_assert!(after <= before * (1.0 + 1e-12));
            }
        }
    }
}
