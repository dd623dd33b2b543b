//! Virtual queues updated at frame boundaries.
//!
//! `Z` tracks delay-bound debt, `Y` tracks debt against the per-frame
//! auxiliary delay targets, and `X` tracks energy debt against the power
//! budget. All start at zero and are clipped at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::FrameRecord;

/// Values above this are treated as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualState {
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub x: f64,
    pub frame: u64,
}

impl VirtualState {
    pub fn new(n_classes: usize) -> Self {
        Self {
            z: vec![0.0; n_classes],
            y: vec![0.0; n_classes],
            x: 0.0,
            frame: 0,
        }
    }

    pub fn n_classes(&self) -> usize {
        self.z.len()
    }

    /// `Z_n <- max(Z_n + sum_i (W_i - d_n), 0)`
    pub fn update_z(&mut self, frame: &FrameRecord, bounds: &[f64]) -> Result<()> {
        check_frame(frame)?;
        for n in 0..self.z.len() {
            let drift = frame.delay_sum[n] - bounds[n] * frame.arrivals[n] as f64;
            self.z[n] = clip(self.z[n] + drift, "Z")?;
        }
        Ok(())
    }

    /// `Y_n <- max(Y_n + sum_i W_i - r_n |A_n|, 0)`; every `r_n` must lie in
    /// `[0, upper[n]]`.
    pub fn update_y(&mut self, frame: &FrameRecord, r: &[f64], upper: &[f64]) -> Result<()> {
        check_frame(frame)?;
        for n in 0..self.y.len() {
            if !(r[n] >= 0.0 && r[n] <= upper[n] * (1.0 + 1e-12)) {
                return Err(Error::DataIntegrity(format!(
                    "auxiliary r_{} = {} outside [0, {}]",
                    n + 1,
                    r[n],
                    upper[n]
                )));
            }
            let drift = frame.delay_sum[n] - r[n] * frame.arrivals[n] as f64;
            self.y[n] = clip(self.y[n] + drift, "Y")?;
        }
        Ok(())
    }

    /// `X <- max(X + P B - P_const T, 0)`
    pub fn update_x(&mut self, frame: &FrameRecord, p_const: f64) -> Result<()> {
        if frame.busy > frame.total() || frame.busy < 0.0 || frame.idle < 0.0 {
            return Err(Error::DataIntegrity(format!(
                "frame {}: busy {} exceeds frame length {}",
                frame.index,
                frame.busy,
                frame.total()
            )));
        }
        self.x = clip(self.x + frame.power * frame.busy - p_const * frame.total(), "X")?;
        Ok(())
    }

    pub fn advance(&mut self) {
        self.frame += 1;
    }
}

fn check_frame(frame: &FrameRecord) -> Result<()> {
    if let Some(n) = frame.delay_sum.iter().position(|&s| s < 0.0 || s.is_nan()) {
        return Err(Error::DataIntegrity(format!(
            "frame {}: negative delay sum {} for class {}",
            frame.index,
            frame.delay_sum[n],
            n + 1
        )));
    }
    Ok(())
}

fn clip(v: f64, name: &str) -> Result<f64> {
    if v > DIVERGENCE_LIMIT || v.is_nan() {
        return Err(Error::DataIntegrity(format!("virtual queue {name} diverged: {v}")));
    }
    Ok(v.max(0.0))
}

/// `queue value at K / K`, a single-run proxy for mean rate stability.
pub fn mean_rate_metric(value_at_k: f64, k: u64) -> f64 {
    assert!(k >= 1, "mean rate metric needs at least one frame");
    value_at_k / k as f64
}

/// Running unclipped sums: every clipped queue dominates its unclipped sum
/// on every sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwiseBounds {
    pub z_floor: Vec<f64>,
    pub y_floor: Vec<f64>,
    pub x_floor: f64,
}

impl PathwiseBounds {
    pub fn new(n: usize) -> Self {
        Self {
            z_floor: vec![0.0; n],
            y_floor: vec![0.0; n],
            x_floor: 0.0,
        }
    }

    pub fn add_z(&mut self, frame: &FrameRecord, bounds: &[f64]) {
        for n in 0..self.z_floor.len() {
            self.z_floor[n] += frame.delay_sum[n] - bounds[n] * frame.arrivals[n] as f64;
        }
    }

    pub fn add_y(&mut self, frame: &FrameRecord, r: &[f64]) {
        for n in 0..self.y_floor.len() {
            self.y_floor[n] += frame.delay_sum[n] - r[n] * frame.arrivals[n] as f64;
        }
    }

    pub fn add_x(&mut self, frame: &FrameRecord, p_const: f64) {
        self.x_floor += frame.power * frame.busy - p_const * frame.total();
    }

    /// True when every queue is at least its unclipped sum (up to rounding).
    pub fn holds(&self, state: &VirtualState) -> bool {
        let ok = |q: f64, floor: f64| q >= floor - 1e-9 * (1.0 + floor.abs());
        self.z_floor.iter().zip(&state.z).all(|(&f, &q)| ok(q, f))
            && self.y_floor.iter().zip(&state.y).all(|(&f, &q)| ok(q, f))
            && ok(state.x, self.x_floor)
            && state.z.iter().chain(&state.y).all(|&q| q >= 0.0)
            && state.x >= 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::PriorityOrder;
    use proptest::prelude::*;

    fn frame1(sum: f64, count: u64) -> FrameRecord {
        FrameRecord {
            index: 0,
            idle: 1.0,
            busy: 1.0,
            arrivals: vec![count],
            delay_sum: vec![sum],
            power: 1.0,
            order: PriorityOrder::identity(1),
        }
    }

    #[test]
    fn z_examples() {
        let mut s = VirtualState::new(1);
        s.update_z(&frame1(3.0, 2), &[1.0]).unwrap();
        assert_eq!(s.z[0], 1.0);
        let mut s = VirtualState::new(1);
        s.update_z(&frame1(1.0, 2), &[1.0]).unwrap();
        assert_eq!(s.z[0], 0.0);
        let mut s = VirtualState::new(1);
        s.z[0] = 4.2;
        s.update_z(&frame1(0.0, 0), &[1.0]).unwrap();
        assert_eq!(s.z[0], 4.2);
        assert!(matches!(
            s.update_z(&frame1(-1.0, 1), &[1.0]),
            Err(Error::DataIntegrity(_))
        ));
    }

    #[test]
    fn y_examples() {
        // r = d reproduces the Z update
        let f = frame1(3.7, 3);
        let mut a = VirtualState::new(1);
        let mut b = VirtualState::new(1);
        a.z[0] = 0.5;
        b.y[0] = 0.5;
        a.update_z(&f, &[1.1]).unwrap();
        b.update_y(&f, &[1.1], &[1.1]).unwrap();
        assert_eq!(a.z[0], b.y[0]);

        let mut s = VirtualState::new(1);
        s.y[0] = 5.0;
        s.update_y(&frame1(0.0, 3), &[2.0], &[2.0]).unwrap();
        assert_eq!(s.y[0], 0.0);
        let mut s = VirtualState::new(1);
        s.update_y(&frame1(4.5, 3), &[1.0], &[2.0]).unwrap();
        assert_eq!(s.y[0], 1.5);
        assert!(s.update_y(&frame1(1.0, 1), &[3.0], &[2.0]).is_err());
        assert!(s.update_y(&frame1(1.0, 1), &[-0.1], &[2.0]).is_err());
    }

    #[test]
    fn x_examples() {
        let mut f = frame1(0.0, 0);
        f.power = 4.0;
        f.busy = 1.0;
        f.idle = 1.0;
        let mut s = VirtualState::new(1);
        s.update_x(&f, 3.0).unwrap();
        assert_eq!(s.x, 0.0);
        f.power = 10.0;
        f.busy = 2.0;
        f.idle = 0.5;
        s.update_x(&f, 3.0).unwrap();
        assert_eq!(s.x, 12.5);
        // P_k = P_const with slack never grows X
        let before = s.x;
        f.power = 3.0;
        s.update_x(&f, 3.0).unwrap();
        assert!(s.x <= before);
        f.idle = -1.0;
        assert!(s.update_x(&f, 3.0).is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(mean_rate_metric(7.0, 1_000_000), 7e-6);
        assert!((mean_rate_metric(0.25 * 4000.0, 4000) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn divergence_is_caught() {
        let mut s = VirtualState::new(1);
        assert!(s.update_z(&frame1(2e12, 1), &[0.0]).is_err());
    }

    proptest! {
        #[test]
        fn clipped_queues_dominate_unclipped_sums(
            frames in prop::collection::vec((0.0f64..5.0, 0u64..6, 0.0f64..3.0, 0.1f64..3.0, 0.0f64..3.0, 1.0f64..10.0), 1..200)
        ) {
            let mut s = VirtualState::new(1);
            let mut b = PathwiseBounds::new(1);
            for (sum, count, r, idle, busy, power) in frames {
                let f = FrameRecord { index: 0, idle, busy, arrivals: vec![count], delay_sum: vec![sum], power, order: PriorityOrder::identity(1) };
                s.update_z(&f, &[1.0]).unwrap();
                s.update_y(&f, &[r], &[3.0]).unwrap();
                s.update_x(&f, 2.0).unwrap();
                b.add_z(&f, &[1.0]);
                b.add_y(&f, &[r]);
                b.add_x(&f, 2.0);
                prop_assert!(b.holds(&s));
            }
        }
    }
}
