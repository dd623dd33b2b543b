//! Frame-by-frame simulation of the nonpreemptive multi-class queue.
//!
//! Each frame is an idle period followed by a busy period. The controller
//! picks a decision from the virtual queues at the frame start, the busy
//! period is played out event by event under that strict priority order and
//! power, and the virtual queues are updated at the frame end.
//!
//! Every class owns two ChaCha streams, one for inter-arrival times and one
//! for job sizes, and arrivals live on an absolute clock. Under a fixed
//! power the arrival and size sample paths are therefore identical across
//! policies; only the service order changes.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::PriorityOrder;
use crate::config::SystemConfig;
use crate::dist::JobSizeDist;
use crate::error::{Error, Result};
use crate::policies::{Controller, FrameDecision, PolicyKind};
use crate::stats::RunningStats;
use crate::virtual_queues::{mean_rate_metric, PathwiseBounds, VirtualState};

/// Per-frame cap on processed events.
pub const EVENT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub index: u64,
    pub idle: f64,
    pub busy: f64,
    pub arrivals: Vec<u64>,
    pub delay_sum: Vec<f64>,
    pub power: f64,
    pub order: PriorityOrder,
}

impl FrameRecord {
    pub fn total(&self) -> f64 {
        self.idle + self.busy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimEventKind {
    Arrival { class: usize },
    ServiceStart { class: usize },
    Completion { class: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub kind: SimEventKind,
    pub time: f64,
    pub frame: u64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_frames: bool,
    pub record_trace: bool,
    /// Keep the full event log; only sensible for short runs.
    pub record_events: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stats: RunningStats,
    pub final_state: VirtualState,
    pub frames: Vec<FrameRecord>,
    /// Virtual state after each frame-boundary update.
    pub trace: Vec<VirtualState>,
    pub events: Vec<SimEvent>,
    pub pathwise: PathwiseBounds,
    /// Nonnegativity and pathwise floors held after every frame.
    pub pathwise_ok: bool,
}

struct ClassStream {
    rate: f64,
    size: JobSizeDist,
    arrivals: ChaCha8Rng,
    sizes: ChaCha8Rng,
    next_arrival: f64,
}

impl ClassStream {
    fn new(rate: f64, size: JobSizeDist, seed: u64, class: usize) -> Self {
        let mut arrivals = ChaCha8Rng::seed_from_u64(seed);
        arrivals.set_stream(2 * class as u64);
        let mut sizes = ChaCha8Rng::seed_from_u64(seed);
        sizes.set_stream(2 * class as u64 + 1);
        let mut s = Self {
            rate,
            size,
            arrivals,
            sizes,
            next_arrival: 0.0,
        };
        s.next_arrival = s.gap();
        s
    }

    #[inline]
    fn gap(&mut self) -> f64 {
        let e: f64 = Exp1.sample(&mut self.arrivals);
        e / self.rate
    }

    /// Pops the pending arrival: `(arrival time, job size)`.
    #[inline]
    fn take(&mut self) -> (f64, f64) {
        let t = self.next_arrival;
        self.next_arrival = t + self.gap();
        (t, self.size.sample(&mut self.sizes))
    }
}

/// Runs `frames` frames and calls `observer` after each frame-boundary update.
pub fn run_with<F>(
    cfg: &SystemConfig,
    controller: &Controller,
    frames: u64,
    seed: u64,
    opts: RunOptions,
    mut observer: F,
) -> Result<RunOutput>
where
    F: FnMut(&FrameRecord, &FrameDecision, &VirtualState),
{
    cfg.validate()?;
    if frames == 0 {
        return Err(Error::InvalidConfig("need at least one frame".into()));
    }
    let n = cfg.n_classes();
    let mut streams: Vec<ClassStream> = cfg
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| ClassStream::new(c.lambda, c.size, seed, i))
        .collect();
    let mut queues: Vec<VecDeque<(f64, f64)>> = vec![VecDeque::new(); n];
    let mut state = VirtualState::new(n);
    let mut stats = RunningStats::new(n);
    let mut pathwise = PathwiseBounds::new(n);
    let mut pathwise_ok = true;
    let mut out_frames = Vec::new();
    let mut trace = Vec::new();
    let mut events = Vec::new();
    let mut frame_events: Vec<SimEvent> = Vec::new();
    let mut now = 0.0f64;

    for k in 0..frames {
        let decision = controller.decide(&state)?;
        let power = controller.power_of(&decision);
        let mu = cfg.rate_fn.rate(power);
        if !(mu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "nonpositive service rate at power {power}"
            )));
        }
        let order = decision.order.classes();

        // idle period ends at the earliest pending arrival
        let first = (0..n)
            .min_by(|&a, &b| streams[a].next_arrival.total_cmp(&streams[b].next_arrival))
            .expect("at least one class");
        let (start, mut size) = streams[first].take();
        let idle = start - now;
        let mut counts = vec![0u64; n];
        let mut sums = vec![0.0f64; n];
        counts[first] += 1;
        let mut class = first;
        let mut t = start;
        let mut processed: u64 = 0;
        if opts.record_events {
            frame_events.push(SimEvent {
                kind: SimEventKind::Arrival { class },
                time: start,
                frame: k,
            });
            frame_events.push(SimEvent {
                kind: SimEventKind::ServiceStart { class },
                time: start,
                frame: k,
            });
        }

        let end = loop {
            let completion = t + size / mu;
            if opts.record_events {
                frame_events.push(SimEvent {
                    kind: SimEventKind::Completion { class },
                    time: completion,
                    frame: k,
                });
            }
            for (c, s) in streams.iter_mut().enumerate() {
                while s.next_arrival < completion {
                    let job = s.take();
                    if opts.record_events {
                        frame_events.push(SimEvent {
                            kind: SimEventKind::Arrival { class: c },
                            time: job.0,
                            frame: k,
                        });
                    }
                    queues[c].push_back(job);
                    counts[c] += 1;
                    processed += 1;
                }
            }
            processed += 1;
            if processed > EVENT_CAP {
                return Err(Error::Divergence {
                    frame: k,
                    cap: EVENT_CAP,
                });
            }
            match order.iter().copied().find(|&c| !queues[c].is_empty()) {
                Some(c) => {
                    let (arrived, s) = queues[c].pop_front().expect("nonempty queue");
                    sums[c] += completion - arrived;
                    class = c;
                    size = s;
                    t = completion;
                    if opts.record_events {
                        frame_events.push(SimEvent {
                            kind: SimEventKind::ServiceStart { class },
                            time: t,
                            frame: k,
                        });
                    }
                }
                None => break completion,
            }
        };

        let record = FrameRecord {
            index: k,
            idle,
            busy: end - start,
            arrivals: counts,
            delay_sum: sums,
            power,
            order: decision.order.clone(),
        };
        now = end;
        stats.record(&record);
        controller.update(&mut state, &mut pathwise, &record, &decision)?;
        pathwise_ok &= pathwise.holds(&state);
        observer(&record, &decision, &state);

        if opts.record_events {
            frame_events.sort_by(|a, b| a.time.total_cmp(&b.time));
            events.append(&mut frame_events);
        }
        if opts.record_trace {
            trace.push(state.clone());
        }
        if opts.record_frames {
            out_frames.push(record);
        }
    }

    Ok(RunOutput {
        stats,
        final_state: state,
        frames: out_frames,
        trace,
        events,
        pathwise,
        pathwise_ok,
    })
}

pub fn run(cfg: &SystemConfig, kind: PolicyKind, frames: u64, seed: u64, opts: RunOptions) -> Result<RunOutput> {
    let controller = Controller::new(kind, cfg)?;
    run_with(cfg, &controller, frames, seed, opts, |_, _, _| {})
}

/// Scalar outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub frames: u64,
    pub delays: Vec<f64>,
    pub power: f64,
    pub penalty: f64,
    pub z_metric: Vec<f64>,
    pub y_metric: Vec<f64>,
    pub x_metric: f64,
    pub pathwise_ok: bool,
    pub stats: RunningStats,
}

impl RunSummary {
    pub fn from_output(cfg: &SystemConfig, seed: u64, out: &RunOutput) -> Result<Self> {
        let delays = out.stats.average_delays()?;
        let penalty = cfg.classes.iter().zip(&delays).map(|(c, &w)| c.penalty.value(w)).sum();
        let k = out.stats.frames;
        Ok(Self {
            seed,
            frames: k,
            power: out.stats.average_power()?,
            penalty,
            z_metric: out.final_state.z.iter().map(|&q| mean_rate_metric(q, k)).collect(),
            y_metric: out.final_state.y.iter().map(|&q| mean_rate_metric(q, k)).collect(),
            x_metric: mean_rate_metric(out.final_state.x, k),
            pathwise_ok: out.pathwise_ok,
            stats: out.stats.clone(),
            delays,
        })
    }
}

/// Mean and standard error over replications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let std_err = if xs.len() < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt()
        };
        Self { mean, std_err }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub runs: Vec<RunSummary>,
    pub delays: Vec<Estimate>,
    pub power: Estimate,
    pub penalty: Estimate,
    pub z_metric: Vec<Estimate>,
    pub y_metric: Vec<Estimate>,
    pub x_metric: Estimate,
    pub pathwise_ok: bool,
}

impl ReplicationSummary {
    pub fn from_runs(runs: Vec<RunSummary>) -> Self {
        let n = runs[0].delays.len();
        let col = |f: &dyn Fn(&RunSummary) -> f64| Estimate::from_samples(&runs.iter().map(f).collect::<Vec<_>>());
        Self {
            delays: (0..n).map(|i| col(&|r| r.delays[i])).collect(),
            power: col(&|r| r.power),
            penalty: col(&|r| r.penalty),
            z_metric: (0..n).map(|i| col(&|r| r.z_metric[i])).collect(),
            y_metric: (0..n).map(|i| col(&|r| r.y_metric[i])).collect(),
            x_metric: col(&|r| r.x_metric),
            pathwise_ok: runs.iter().all(|r| r.pathwise_ok),
            runs,
        }
    }

    pub fn mean_delays(&self) -> Vec<f64> {
        self.delays.iter().map(|e| e.mean).collect()
    }
}

/// Independent runs, one per seed, aggregated as arithmetic means of the
/// per-run ratio estimators.
pub fn run_replications(
    cfg: &SystemConfig,
    kind: PolicyKind,
    frames: u64,
    seeds: &[u64],
) -> Result<ReplicationSummary> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("need at least one seed".into()));
    }
    let controller = Controller::new(kind, cfg)?;
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let out = run_with(cfg, &controller, frames, seed, RunOptions::default(), |_, _, _| {})?;
            RunSummary::from_output(cfg, seed, &out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReplicationSummary::from_runs(runs))
}
