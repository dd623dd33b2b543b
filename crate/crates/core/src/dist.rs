//! Job size distributions.
//!
//! Only the first two moments enter the analytic formulas; the simulator also
//! needs a sampler. Three families are supported. The two-point family reaches
//! any admissible `(mean, second_moment)` pair through [`JobSizeDist::from_moments`].

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobSizeDist {
    Exponential {
        mean: f64,
    },
    Deterministic {
        value: f64,
    },
    /// `high` with probability `p_high`, otherwise `low`.
    TwoPoint {
        low: f64,
        high: f64,
        p_high: f64,
    },
}

impl JobSizeDist {
    pub fn exponential(mean: f64) -> Self {
        JobSizeDist::Exponential { mean }
    }

    pub fn deterministic(value: f64) -> Self {
        JobSizeDist::Deterministic { value }
    }

    /// Two-point law on `{0, m2/m}` matching the requested moments.
    ///
    /// Requires `mean > 0` and `second_moment >= mean^2`; equality collapses to
    /// a deterministic size.
    pub fn from_moments(mean: f64, second_moment: f64) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "job size mean must be positive, got {mean}"
            )));
        }
        if !(second_moment >= mean * mean) || !second_moment.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "second moment {second_moment} below mean^2 = {}",
                mean * mean
            )));
        }
        let high = second_moment / mean;
        let p_high = mean * mean / second_moment;
        if p_high >= 1.0 {
            return Ok(JobSizeDist::Deterministic { value: mean });
        }
        Ok(JobSizeDist::TwoPoint { low: 0.0, high, p_high })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JobSizeDist::Exponential { mean } => mean,
            JobSizeDist::Deterministic { value } => value,
            JobSizeDist::TwoPoint { low, high, p_high } => low + p_high * (high - low),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            JobSizeDist::Exponential { mean } => 2.0 * mean * mean,
            JobSizeDist::Deterministic { value } => value * value,
            JobSizeDist::TwoPoint { low, high, p_high } => (1.0 - p_high) * low * low + p_high * high * high,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            JobSizeDist::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            JobSizeDist::Deterministic { value } => value > 0.0 && value.is_finite(),
            JobSizeDist::TwoPoint { low, high, p_high } => {
                low >= 0.0 && high.is_finite() && high >= low && (0.0..=1.0).contains(&p_high) && self.mean() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid job size distribution {self:?}")))
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JobSizeDist::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            JobSizeDist::Deterministic { value } => value,
            JobSizeDist::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn empirical(d: &JobSizeDist, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = d.sample(&mut rng);
            s1 += x;
            s2 += x * x;
        }
        (s1 / n as f64, s2 / n as f64)
    }

    #[test]
    fn sampled_moments_match_declared() {
        let dists = [
            JobSizeDist::exponential(0.4),
            JobSizeDist::deterministic(1.0),
            JobSizeDist::from_moments(1.0, 3.0).unwrap(),
            JobSizeDist::TwoPoint {
                low: 0.5,
                high: 2.0,
                p_high: 0.25,
            },
        ];
        for (i, d) in dists.iter().enumerate() {
            let (m1, m2) = empirical(d, 1_000_000, 17 + i as u64);
            assert!((m1 / d.mean() - 1.0).abs() < 0.01, "{d:?}: mean {m1}");
            assert!((m2 / d.second_moment() - 1.0).abs() < 0.02, "{d:?}: m2 {m2}");
        }
    }

    #[test]
    fn from_moments_hits_requested_pair() {
        let d = JobSizeDist::from_moments(2.0, 10.0).unwrap();
        assert!((d.mean() - 2.0).abs() < 1e-12);
        assert!((d.second_moment() - 10.0).abs() < 1e-12);
        assert_eq!(
            JobSizeDist::from_moments(1.0, 1.0).unwrap(),
            JobSizeDist::deterministic(1.0)
        );
        assert!(JobSizeDist::from_moments(1.0, 0.5).is_err());
        assert!(JobSizeDist::from_moments(0.0, 1.0).is_err());
    }

    #[test]
    fn jensen_holds_for_all_families() {
        for d in [
            JobSizeDist::exponential(3.0),
            JobSizeDist::deterministic(0.2),
            JobSizeDist::TwoPoint {
                low: 1.0,
                high: 4.0,
                p_high: 0.1,
            },
        ] {
            d.validate().unwrap();
            assert!(d.second_moment() >= d.mean() * d.mean());
        }
    }

    #[test]
    fn serde_tagged_form() {
        let d: JobSizeDist = serde_json::from_str(r#"{"kind":"exponential","mean":0.4}"#).unwrap();
        assert_eq!(d, JobSizeDist::exponential(0.4));
    }
}
