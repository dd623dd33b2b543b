//! Ratio-of-expectations accumulators.
//!
//! Every metric is a ratio of two running sums taken from frame 0: per-class
//! delay over per-class arrivals, and energy over elapsed time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::FrameRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub delay_sum: Vec<f64>,
    pub arrivals: Vec<u64>,
    pub energy: f64,
    pub time: f64,
    pub busy_time: f64,
    pub frames: u64,
}

impl RunningStats {
    pub fn new(n_classes: usize) -> Self {
        Self {
            delay_sum: vec![0.0; n_classes],
            arrivals: vec![0; n_classes],
            energy: 0.0,
            time: 0.0,
            busy_time: 0.0,
            frames: 0,
        }
    }

    pub fn record(&mut self, frame: &FrameRecord) {
        for n in 0..self.delay_sum.len() {
            self.delay_sum[n] += frame.delay_sum[n];
            self.arrivals[n] += frame.arrivals[n];
        }
        self.energy += frame.power * frame.busy;
        self.time += frame.total();
        self.busy_time += frame.busy;
        self.frames += 1;
    }

    pub fn n_classes(&self) -> usize {
        self.delay_sum.len()
    }

    /// Average queueing delay of `class`; `NoData` when the class saw no arrivals.
    pub fn average_delay(&self, class: usize) -> Result<f64> {
        match self.arrivals[class] {
            0 => Err(Error::NoData("class has no arrivals")),
            count => Ok(self.delay_sum[class] / count as f64),
        }
    }

    pub fn average_delays(&self) -> Result<Vec<f64>> {
        (0..self.n_classes()).map(|n| self.average_delay(n)).collect()
    }

    /// Energy per unit time; power is zero during idle periods.
    pub fn average_power(&self) -> Result<f64> {
        if self.time > 0.0 {
            Ok(self.energy / self.time)
        } else {
            Err(Error::NoData("no elapsed time"))
        }
    }

    pub fn busy_fraction(&self) -> Result<f64> {
        if self.time > 0.0 {
            Ok(self.busy_time / self.time)
        } else {
            Err(Error::NoData("no elapsed time"))
        }
    }

    pub fn mean_frame_length(&self) -> Result<f64> {
        match self.frames {
            0 => Err(Error::NoData("no frames")),
            k => Ok(self.time / k as f64),
        }
    }

    pub fn mean_arrivals_per_frame(&self, class: usize) -> Result<f64> {
        match self.frames {
            0 => Err(Error::NoData("no frames")),
            k => Ok(self.arrivals[class] as f64 / k as f64),
        }
    }
}
