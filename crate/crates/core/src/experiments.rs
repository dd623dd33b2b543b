//! Scenario sweeps, oracle comparisons and CSV output.
//!
//! A scenario names a configuration, a policy, an optional sweep over `V`
//! and an optional list of delay-bound sets. Its points are the Cartesian
//! product `V x bounds` in declaration order (V outermost); every point runs
//! the same replication seeds `seed_base, seed_base + 1, ...`.
//!
//! ```json
//! {
//!   "name": "fairness",
//!   "config": "fairness.json",
//!   "policy": "delayfair",
//!   "v_sweep": [100, 1000],
//!   "frames": 1000000,
//!   "replications": 10,
//!   "seed_base": 1
//! }
//! ```
//!
//! `config` is either a path (relative to the scenario file) or an inline
//! configuration object.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::policies::{Controller, FrameDecision, PolicyKind};
use crate::simulator::{run_with, Estimate, FrameRecord, ReplicationSummary, RunOptions, RunSummary};
use crate::virtual_queues::VirtualState;

pub const SCENARIO_CSV_HEADER: &str = "# framesched-scenario v1";
pub const FRAME_CSV_HEADER: &str = "# framesched-frames v1";
pub const QUEUE_CSV_HEADER: &str = "# framesched-queues v1";
pub const SUMMARY_CSV_HEADER: &str = "# framesched-summary v1";

/// Absolute tolerance for reproduced table cells.
pub const TABLE_CELL_TOLERANCE: f64 = 0.05;
/// Differences smaller than this many combined standard errors count as noise.
pub const NOISE_SIGMAS: f64 = 3.0;

pub const DEFAULT_FRAMES: u64 = 1_000_000;
pub const DEFAULT_REPLICATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigRef {
    Path(PathBuf),
    Inline(Box<SystemConfig>),
}

fn default_frames() -> u64 {
    DEFAULT_FRAMES
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub config: ConfigRef,
    pub policy: PolicyKind,
    /// Absent: the configuration's own `v_param`. Empty: no points.
    #[serde(default)]
    pub v_sweep: Option<Vec<f64>>,
    /// Absent: the configuration's own bounds.
    #[serde(default)]
    pub constraint_sets: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_frames")]
    pub frames: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed_base: u64,
}

impl Scenario {
    /// Parses a scenario and inlines a referenced configuration, resolving
    /// relative paths against `base_dir`.
    pub fn from_json_str(s: &str, base_dir: &Path) -> Result<Self> {
        let mut sc: Scenario = serde_json::from_str(s)?;
        if let ConfigRef::Path(p) = &sc.config {
            let path = if p.is_absolute() { p.clone() } else { base_dir.join(p) };
            sc.config = ConfigRef::Inline(Box::new(SystemConfig::from_path(&path)?));
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json_str(&text, base)
    }

    pub fn system(&self) -> Result<SystemConfig> {
        match &self.config {
            ConfigRef::Inline(c) => Ok((**c).clone()),
            ConfigRef::Path(p) => SystemConfig::from_path(p),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = self.system()?;
        cfg.validate()?;
        if self.replications == 0 || self.frames == 0 {
            return Err(Error::InvalidConfig(
                "scenario needs at least one frame and one replication".into(),
            ));
        }
        for p in self.points(&cfg) {
            if p.bounds.len() != cfg.n_classes() {
                return Err(Error::Scenario {
                    point: p.label(),
                    source: Box::new(Error::InvalidConfig(format!(
                        "{} bounds for {} classes",
                        p.bounds.len(),
                        cfg.n_classes()
                    ))),
                });
            }
            self.point_config(&cfg, &p).validate().map_err(|e| Error::Scenario {
                point: p.label(),
                source: Box::new(e),
            })?;
        }
        Ok(())
    }

    pub fn points(&self, cfg: &SystemConfig) -> Vec<ScenarioPoint> {
        let vs = self.v_sweep.clone().unwrap_or_else(|| vec![cfg.v_param]);
        let ds = self.constraint_sets.clone().unwrap_or_else(|| vec![cfg.delay_bounds()]);
        vs.iter()
            .flat_map(|&v| ds.iter().map(move |d| (v, d.clone())))
            .enumerate()
            .map(|(index, (v, bounds))| ScenarioPoint { index, v, bounds })
            .collect()
    }

    fn point_config(&self, cfg: &SystemConfig, p: &ScenarioPoint) -> SystemConfig {
        cfg.clone().with_v(p.v).with_bounds(&p.bounds)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.replications as u64).map(|r| self.seed_base + r).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPoint {
    pub index: usize,
    pub v: f64,
    pub bounds: Vec<f64>,
}

impl ScenarioPoint {
    pub fn label(&self) -> String {
        let d: Vec<String> = self.bounds.iter().map(|b| b.to_string()).collect();
        format!("#{} (V={}, d=({}))", self.index, self.v, d.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRow {
    pub point: ScenarioPoint,
    pub summary: ReplicationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub name: String,
    pub policy: PolicyKind,
    pub n_classes: usize,
    pub rows: Vec<ScenarioRow>,
}

/// Runs every point and replication; rows follow declaration order.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioTable> {
    sc.validate()?;
    let cfg = sc.system()?;
    let points = sc.points(&cfg);
    let seeds = sc.seeds();
    let controllers = points
        .iter()
        .map(|p| {
            let pc = sc.point_config(&cfg, p);
            Controller::new(sc.policy, &pc)
                .map(|c| (pc, c))
                .map_err(|e| Error::Scenario {
                    point: p.label(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let (pc, ctl) = &controllers[i];
            run_with(pc, ctl, sc.frames, seed, RunOptions::default(), |_, _, _| {})
                .and_then(|out| RunSummary::from_output(pc, seed, &out))
                .map_err(|e| Error::Scenario {
                    point: points[i].label(),
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut runs = runs.into_iter();
    let rows = points
        .into_iter()
        .map(|point| ScenarioRow {
            point,
            summary: ReplicationSummary::from_runs(runs.by_ref().take(seeds.len()).collect()),
        })
        .collect();
    Ok(ScenarioTable {
        name: sc.name.clone(),
        policy: sc.policy,
        n_classes: cfg.n_classes(),
        rows,
    })
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}

impl ScenarioTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{SCENARIO_CSV_HEADER}")?;
        writeln!(w, "# scenario={} policy={}", self.name, self.policy)?;
        let n = self.n_classes;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["point".to_string(), "v".to_string()];
        header.extend(indexed("d", n));
        header.extend(indexed("w", n));
        header.extend(indexed("w_se", n));
        header.extend(["penalty", "penalty_se", "power", "power_se"].map(String::from));
        header.extend(indexed("z_metric", n));
        header.extend(indexed("y_metric", n));
        header.extend(["x_metric", "replications", "pathwise_ok"].map(String::from));
        out.write_record(&header)?;
        for row in &self.rows {
            let s = &row.summary;
            let mut rec = vec![row.point.index.to_string(), row.point.v.to_string()];
            rec.extend(row.point.bounds.iter().map(|d| d.to_string()));
            rec.extend(s.delays.iter().map(|e| e.mean.to_string()));
            rec.extend(s.delays.iter().map(|e| e.std_err.to_string()));
            for e in [s.penalty, s.power] {
                rec.push(e.mean.to_string());
                rec.push(e.std_err.to_string());
            }
            rec.extend(s.z_metric.iter().map(|e| e.mean.to_string()));
            rec.extend(s.y_metric.iter().map(|e| e.mean.to_string()));
            rec.push(s.x_metric.mean.to_string());
            rec.push(s.runs.len().to_string());
            rec.push(s.pathwise_ok.to_string());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let n = self.n_classes;
        let mut t = String::new();
        let _ = writeln!(t, "scenario {} ({})", self.name, self.policy);
        let mut head = format!("{:>10}  {:<18}", "V", "bounds");
        for i in 1..=n {
            head += &format!("  {:>16}", format!("W{i}"));
        }
        head += &format!("  {:>16}  {:>16}", "penalty", "power");
        let _ = writeln!(t, "{head}");
        for row in &self.rows {
            let d: Vec<String> = row.point.bounds.iter().map(|b| format!("{b}")).collect();
            let mut line = format!("{:>10}  {:<18}", row.point.v, format!("({})", d.join(", ")));
            let s = &row.summary;
            for e in s.delays.iter().chain([&s.penalty, &s.power]) {
                line += &format!("  {:>16}", format!("{:.4} ±{:.4}", e.mean, e.std_err));
            }
            let _ = writeln!(t, "{line}");
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub v: f64,
    pub value: Estimate,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub target: f64,
    pub rows: Vec<GapRow>,
    /// Gaps never grow with `V` by more than the noise allowance.
    pub monotone: bool,
}

/// Gaps `value - target` per `V`, sorted by `V`.
pub fn compare_to_oracle(values: &[(f64, Estimate)], target: f64) -> OracleComparison {
    let mut rows: Vec<GapRow> = values
        .iter()
        .map(|&(v, value)| GapRow {
            v,
            value,
            gap: value.mean - target,
        })
        .collect();
    rows.sort_by(|a, b| a.v.total_cmp(&b.v));
    let monotone = rows.windows(2).all(|w| {
        let noise = NOISE_SIGMAS * w[0].value.std_err.hypot(w[1].value.std_err);
        w[1].gap <= w[0].gap + noise
    });
    OracleComparison { target, rows, monotone }
}

/// Gap table of a scenario column against a target. `pick` selects the
/// compared estimate from each row.
pub fn compare_table(
    table: &ScenarioTable,
    target: f64,
    pick: impl Fn(&ReplicationSummary) -> Estimate,
) -> OracleComparison {
    let values: Vec<(f64, Estimate)> = table.rows.iter().map(|r| (r.point.v, pick(&r.summary))).collect();
    compare_to_oracle(&values, target)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseFit {
    pub c: f64,
    /// Centered coefficient of determination.
    pub r2: f64,
}

/// Least-squares fit `gap = c / V` through the origin.
pub fn fit_inverse_v(vs: &[f64], gaps: &[f64]) -> InverseFit {
    let xs: Vec<f64> = vs.iter().map(|v| 1.0 / v).collect();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(gaps).map(|(x, y)| x * y).sum();
    let c = sxy / sxx;
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let ss_res: f64 = xs.iter().zip(gaps).map(|(x, y)| (y - c * x).powi(2)).sum();
    let ss_tot: f64 = gaps.iter().map(|y| (y - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    InverseFit { c, r2 }
}

/// Streams one row per frame:
/// `frame,idle,busy,power,order,arrivals_1..N,delay_sum_1..N`.
pub struct FrameTraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> FrameTraceWriter<W> {
    pub fn new(mut w: W, n_classes: usize) -> Result<Self> {
        writeln!(w, "{FRAME_CSV_HEADER}")?;
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["frame", "idle", "busy", "power", "order"].map(String::from).to_vec();
        header.extend(indexed("arrivals_", n_classes));
        header.extend(indexed("delay_sum_", n_classes));
        out.write_record(&header)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, f: &FrameRecord) -> Result<()> {
        let mut rec = vec![
            f.index.to_string(),
            f.idle.to_string(),
            f.busy.to_string(),
            f.power.to_string(),
            f.order.to_string(),
        ];
        rec.extend(f.arrivals.iter().map(|a| a.to_string()));
        rec.extend(f.delay_sum.iter().map(|s| s.to_string()));
        self.out.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Streams the virtual queues after each frame: `k,Z_1..N,Y_1..N,X`.
pub struct QueueTraceWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> QueueTraceWriter<W> {
    pub fn new(mut w: W, n_classes: usize) -> Result<Self> {
        writeln!(w, "{QUEUE_CSV_HEADER}")?;
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["k".to_string()];
        header.extend(indexed("Z_", n_classes));
        header.extend(indexed("Y_", n_classes));
        header.push("X".into());
        out.write_record(&header)?;
        Ok(Self { out })
    }

    pub fn write(&mut self, s: &VirtualState) -> Result<()> {
        let mut rec = vec![s.frame.to_string()];
        rec.extend(s.z.iter().chain(&s.y).map(|q| q.to_string()));
        rec.push(s.x.to_string());
        self.out.write_record(&rec)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// One row per replication followed by `mean` and `std_err` rows.
pub fn write_summary_csv<W: Write>(mut w: W, policy: PolicyKind, summary: &ReplicationSummary) -> Result<()> {
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    writeln!(w, "# policy={policy}")?;
    let n = summary.delays.len();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["run".to_string(), "seed".to_string(), "frames".to_string()];
    header.extend(indexed("w", n));
    header.extend(["penalty", "power"].map(String::from));
    header.extend(indexed("z_metric", n));
    header.extend(indexed("y_metric", n));
    header.extend(["x_metric", "pathwise_ok"].map(String::from));
    out.write_record(&header)?;
    for (i, r) in summary.runs.iter().enumerate() {
        let mut rec = vec![i.to_string(), r.seed.to_string(), r.frames.to_string()];
        rec.extend(r.delays.iter().map(|x| x.to_string()));
        rec.push(r.penalty.to_string());
        rec.push(r.power.to_string());
        rec.extend(r.z_metric.iter().chain(&r.y_metric).map(|x| x.to_string()));
        rec.push(r.x_metric.to_string());
        rec.push(r.pathwise_ok.to_string());
        out.write_record(&rec)?;
    }
    let frames = summary.runs.first().map_or(0, |r| r.frames).to_string();
    for (label, pick) in [
        ("mean", (|e: &Estimate| e.mean) as fn(&Estimate) -> f64),
        ("std_err", |e: &Estimate| e.std_err),
    ] {
        let mut rec = vec![label.to_string(), String::new(), frames.clone()];
        rec.extend(summary.delays.iter().map(|e| pick(e).to_string()));
        rec.push(pick(&summary.penalty).to_string());
        rec.push(pick(&summary.power).to_string());
        rec.extend(
            summary
                .z_metric
                .iter()
                .chain(&summary.y_metric)
                .map(|e| pick(e).to_string()),
        );
        rec.push(pick(&summary.x_metric).to_string());
        rec.push(summary.pathwise_ok.to_string());
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Runs `reps` replications with seeds `seed, seed + 1, ...` and writes
/// `summary.csv` into `dir`; with `trace`, also `frames_<seed>.csv` and
/// `queues_<seed>.csv` per replication.
pub fn simulate_to_dir(
    cfg: &SystemConfig,
    kind: PolicyKind,
    frames: u64,
    reps: usize,
    seed: u64,
    dir: &Path,
    trace: bool,
) -> Result<ReplicationSummary> {
    if reps == 0 {
        return Err(Error::InvalidConfig("need at least one replication".into()));
    }
    std::fs::create_dir_all(dir)?;
    let controller = Controller::new(kind, cfg)?;
    let n = cfg.n_classes();
    let seeds: Vec<u64> = (0..reps as u64).map(|r| seed + r).collect();
    let runs = seeds
        .par_iter()
        .map(|&s| {
            let out = if trace {
                let open = |name: String| -> Result<std::io::BufWriter<std::fs::File>> {
                    Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
                };
                let mut fw = FrameTraceWriter::new(open(format!("frames_{s}.csv"))?, n)?;
                let mut qw = QueueTraceWriter::new(open(format!("queues_{s}.csv"))?, n)?;
                let mut failure: Option<Error> = None;
                let out = run_with(
                    cfg,
                    &controller,
                    frames,
                    s,
                    RunOptions::default(),
                    |f: &FrameRecord, _: &FrameDecision, st: &VirtualState| {
                        if failure.is_none() {
                            if let Err(e) = fw.write(f).and_then(|_| qw.write(st)) {
                                failure = Some(e);
                            }
                        }
                    },
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                fw.finish()?;
                qw.finish()?;
                out
            } else {
                run_with(cfg, &controller, frames, s, RunOptions::default(), |_, _, _| {})?
            };
            RunSummary::from_output(cfg, s, &out)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = ReplicationSummary::from_runs(runs);
    let file = std::fs::File::create(dir.join("summary.csv"))?;
    write_summary_csv(std::io::BufWriter::new(file), kind, &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::presets;
    use approx::assert_abs_diff_eq;

    fn scenario(policy: PolicyKind, v: Option<Vec<f64>>, d: Option<Vec<Vec<f64>>>) -> Scenario {
        Scenario {
            name: "t".into(),
            config: ConfigRef::Inline(Box::new(presets::mm1_fairness(100.0))),
            policy,
            v_sweep: v,
            constraint_sets: d,
            frames: 2000,
            replications: 3,
            seed_base: 11,
        }
    }

    #[test]
    fn points_follow_declaration_order() {
        let sc = scenario(
            PolicyKind::DelayFair,
            Some(vec![10.0, 20.0]),
            Some(vec![vec![2.0, 2.0], vec![2.5, 2.5], vec![3.0, 3.0]]),
        );
        let pts = sc.points(&sc.system().unwrap());
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[0].v, pts[0].bounds[0]), (10.0, 2.0));
        assert_eq!((pts[2].v, pts[2].bounds[0]), (10.0, 3.0));
        assert_eq!((pts[3].v, pts[3].bounds[0]), (20.0, 2.0));
        assert_eq!(sc.seeds(), vec![11, 12, 13]);
    }

    #[test]
    fn empty_sweep_gives_empty_table() {
        let sc = scenario(PolicyKind::DelayFair, Some(vec![]), None);
        let t = run_scenario(&sc).unwrap();
        assert!(t.rows.is_empty());
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(SCENARIO_CSV_HEADER));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn scenario_is_reproducible() {
        let sc = scenario(PolicyKind::DelayFair, Some(vec![10.0, 100.0]), None);
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2);
        assert_eq!(a.rows[0].summary.runs.len(), 3);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        a.write_csv(&mut ca).unwrap();
        b.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
        assert!(a.to_text().contains("penalty"));
    }

    #[test]
    fn failing_point_is_named() {
        // pwdelayfair without a power budget
        let sc = scenario(PolicyKind::PwDelayFair, Some(vec![5.0]), None);
        match run_scenario(&sc) {
            Err(Error::Scenario { point, .. }) => assert!(point.contains("V=5"), "{point}"),
            other => panic!("{other:?}"),
        }
        let sc = scenario(PolicyKind::DelayFeas, None, Some(vec![vec![1.0]]));
        assert!(sc.validate().is_err());
    }

    #[test]
    fn scenario_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sys.json"), presets::mm1_fairness(1.0).to_json()).unwrap();
        let text = r#"{"name": "s", "config": "sys.json", "policy": "dynpower-nm2", "v_sweep": [1, 2]}"#;
        let path = dir.path().join("s.json");
        std::fs::write(&path, text).unwrap();
        let sc = Scenario::from_path(&path).unwrap();
        assert_eq!(sc.policy, PolicyKind::DynPowerNoM2);
        assert_eq!(sc.frames, DEFAULT_FRAMES);
        assert_eq!(sc.replications, DEFAULT_REPLICATIONS);
        assert!(matches!(sc.config, ConfigRef::Inline(_)));
        for k in PolicyKind::ALL {
            let s = serde_json::to_string(&k).unwrap();
            assert_eq!(s, format!("\"{}\"", k.name()));
            assert_eq!(serde_json::from_str::<PolicyKind>(&s).unwrap(), k);
        }
        let bad = r#"{"name": "s", "config": "missing.json", "policy": "delayfeas"}"#;
        assert!(Scenario::from_json_str(bad, dir.path()).is_err());
    }

    #[test]
    fn gaps_against_table_values() {
        let est = |m: f64| Estimate {
            mean: m,
            std_err: 0.002,
        };
        let vals = [
            (100.0, est(2.529)),
            (1000.0, est(2.335)),
            (5000.0, est(2.312)),
            (10000.0, est(2.301)),
        ];
        let c = compare_to_oracle(&vals, 2.304);
        let gaps: Vec<f64> = c.rows.iter().map(|r| r.gap).collect();
        for (g, want) in gaps.iter().zip([0.225, 0.031, 0.008, -0.003]) {
            assert_abs_diff_eq!(*g, want, epsilon = 1e-12);
        }
        assert!(c.monotone);
        let rising = compare_to_oracle(&[(1.0, est(2.0)), (2.0, est(3.0))], 1.0);
        assert!(!rising.monotone);
    }

    #[test]
    fn inverse_fit() {
        let vs = [10.0, 100.0, 1000.0];
        let gaps: Vec<f64> = vs.iter().map(|v| 3.0 / v).collect();
        let f = fit_inverse_v(&vs, &gaps);
        assert_abs_diff_eq!(f.c, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.r2, 1.0, epsilon = 1e-12);
        let f = fit_inverse_v(&vs, &[0.1, 0.1, 0.1]);
        assert!(f.r2 <= 0.0);
    }

    #[test]
    fn traces_and_summary_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = presets::mm1_two_class([1.25, 1.25]);
        let s = simulate_to_dir(&cfg, PolicyKind::DelayFeas, 50, 2, 7, dir.path(), true).unwrap();
        assert_eq!(s.runs.len(), 2);
        let frames = std::fs::read_to_string(dir.path().join("frames_7.csv")).unwrap();
        let mut lines = frames.lines();
        assert_eq!(lines.next(), Some(FRAME_CSV_HEADER));
        assert_eq!(
            lines.next(),
            Some("frame,idle,busy,power,order,arrivals_1,arrivals_2,delay_sum_1,delay_sum_2")
        );
        assert_eq!(lines.count(), 50);
        let queues = std::fs::read_to_string(dir.path().join("queues_8.csv")).unwrap();
        assert!(queues.lines().nth(1).unwrap() == "k,Z_1,Z_2,Y_1,Y_2,X");
        assert!(queues.lines().last().unwrap().starts_with("50,"));
        let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(summary.starts_with(SUMMARY_CSV_HEADER));
        assert_eq!(summary.lines().count(), 2 + 1 + 2 + 2);
    }
}
