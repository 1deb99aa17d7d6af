//! Tracking metrics, run summaries and the controller ablation harness.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Protocol, ScenarioConfig};
use crate::control::ControllerKind;
use crate::error::{Error, Result};
use crate::sigproc::{
    continuous_response, discretize, paper_coupling_filter, printed_coupling_filter, TransferFunction,
};
use crate::sim::{run_scenario, CouplingSeries, RunRecord, RunStatus, RECORD_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: f64,
    pub mae: f64,
    /// Signed mean over the steady-state window.
    pub sse: f64,
}

/// Evaluation window [start, end) with a steady-state tail of `sse_window`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub sse_window: f64,
}

impl Window {
    pub fn whole(end: f64) -> Self {
        Window {
            start: 0.0,
            end,
            sse_window: end,
        }
    }
}

/// RMSE and MAE over the window, SSE over its final `sse_window` seconds.
pub fn error_metrics(times: &[f64], err: &[f64], window: &Window) -> Result<Metrics> {
    let tail = window.end - window.sse_window;
    let (mut n, mut sq, mut abs) = (0usize, 0.0, 0.0);
    let (mut m, mut sum) = (0usize, 0.0);
    for (&t, &e) in times.iter().zip(err) {
        if t < window.start || t >= window.end {
            continue;
        }
        n += 1;
        sq += e * e;
        abs += e.abs();
        if t >= tail {
            m += 1;
            sum += e;
        }
    }
    if n == 0 || m == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok(Metrics {
        rmse: (sq / n as f64).sqrt(),
        mae: abs / n as f64,
        sse: sum / m as f64,
    })
}

pub fn compute_metrics(record: &RunRecord, channel: &str, window: &Window) -> Result<Metrics> {
    error_metrics(&record.times(), &record.channel(channel)?, window)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisDiscrepancy {
    pub rmse: f64,
    pub mae: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub record_version: u32,
    pub scenario: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub status: RunStatus,
    pub nonconformant: bool,
    pub worst_margin: f64,
    pub saturation_events: u64,
    /// Force-axis error over the contact phase.
    #[serde(default)]
    pub force: Option<Metrics>,
    /// Per-axis pose error over the final full-motion phase.
    #[serde(default)]
    pub motion: Option<Vec<Metrics>>,
    #[serde(default)]
    pub coupling: Option<Vec<AxisDiscrepancy>>,
    pub config: ScenarioConfig,
}

impl RunSummary {
    /// The metric the ablation table reports: force tracking when the
    /// scenario has a contact phase, otherwise the aggregate pose error.
    pub fn headline(&self) -> Option<Metrics> {
        if let Some(f) = self.force {
            return Some(f);
        }
        let m = self.motion.as_ref()?;
        let k = m.len() as f64;
        Some(Metrics {
            rmse: (m.iter().map(|a| a.rmse * a.rmse).sum::<f64>() / k).sqrt(),
            mae: m.iter().map(|a| a.mae).sum::<f64>() / k,
            sse: (m.iter().map(|a| a.sse * a.sse).sum::<f64>() / k).sqrt(),
        })
    }
}

/// Metrics appropriate to the scenario's protocol.
pub fn summarize(config: &ScenarioConfig, record: &RunRecord) -> Result<RunSummary> {
    let end = record.times().last().copied().unwrap_or(0.0) + config.clock.control_dt;
    let sse = config.metrics.sse_window;
    let (mut force, mut motion, mut coupling) = (None, None, None);
    let completed = record.status.is_ok();
    match &config.protocol {
        Protocol::Wall(p) if completed => {
            let w = Window {
                start: p.contact_start,
                end: p.motion_switch.min(end),
                sse_window: sse.min(p.motion_switch - p.contact_start),
            };
            force = Some(compute_metrics(record, &format!("ef{}", p.force_axis), &w)?);
            if end > p.motion_switch {
                let w = Window {
                    start: p.motion_switch,
                    end,
                    sse_window: sse.min(end - p.motion_switch),
                };
                motion = Some(
                    (0..6)
                        .map(|i| compute_metrics(record, &format!("e{i}"), &w))
                        .collect::<Result<_>>()?,
                );
            }
        }
        Protocol::Hold if completed => {
            let w = Window {
                start: 0.0,
                end,
                sse_window: sse.min(end),
            };
            motion = Some(
                (0..6)
                    .map(|i| compute_metrics(record, &format!("e{i}"), &w))
                    .collect::<Result<_>>()?,
            );
        }
        Protocol::JointRegulation { .. } if completed => {
            let series = CouplingSeries::from_record(record)?;
            coupling = Some(
                series
                    .discrepancy()
                    .iter()
                    .map(|&(rmse, mae, peak)| AxisDiscrepancy { rmse, mae, peak })
                    .collect(),
            );
        }
        _ => {}
    }
    Ok(RunSummary {
        record_version: RECORD_VERSION,
        scenario: config.name.clone(),
        controller: config.controller.kind,
        seed: record.seed,
        status: record.status.clone(),
        nonconformant: record.nonconformant,
        worst_margin: record.worst_margin,
        saturation_events: record.saturation_events,
        force,
        motion,
        coupling,
        config: config.clone(),
    })
}

/// Writes `<stem>.csv` and `<stem>.summary.json` into `dir`.
pub fn write_run_artifacts(dir: &Path, stem: &str, record: &RunRecord, summary: &RunSummary) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    record.write_csv(std::io::BufWriter::new(std::fs::File::create(dir.join(format!("{stem}.csv")))?))?;
    std::fs::write(
        dir.join(format!("{stem}.summary.json")),
        serde_json::to_string_pretty(summary)? + "\n",
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    /// Preset names or paths to scenario JSON files.
    pub scenarios: Vec<String>,
    pub controllers: Vec<String>,
    #[serde(default = "default_reps")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    /// Overrides every scenario's physics step.
    #[serde(default)]
    pub physics_dt: Option<f64>,
    /// Overrides every scenario's duration.
    #[serde(default)]
    pub duration: Option<f64>,
    /// Also write per-run CSV records (summaries are always written).
    #[serde(default)]
    pub write_records: bool,
}

fn default_reps() -> usize {
    1
}

impl AblationSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: AblationSpec = serde_json::from_str(text)?;
        spec.controller_kinds()?;
        if spec.repetitions == 0 {
            return Err(Error::config("repetitions", "must be >= 1"));
        }
        Ok(spec)
    }

    pub fn controller_kinds(&self) -> Result<Vec<ControllerKind>> {
        if self.controllers.is_empty() {
            return Err(Error::config("controllers", "need at least one controller"));
        }
        self.controllers
            .iter()
            .enumerate()
            .map(|(i, c)| {
                c.parse()
                    .map_err(|_| Error::config(format!("controllers[{i}]"), format!("unknown controller '{c}'")))
            })
            .collect()
    }

    /// Scenario configs, resolving file paths relative to `base_dir`.
    pub fn resolve_scenarios(&self, base_dir: &Path) -> Result<Vec<ScenarioConfig>> {
        if self.scenarios.is_empty() {
            return Err(Error::config("scenarios", "need at least one scenario"));
        }
        self.scenarios
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut cfg = if s.ends_with(".json") {
                    let text = std::fs::read_to_string(base_dir.join(s))?;
                    ScenarioConfig::from_json(&text)?
                } else {
                    ScenarioConfig::preset(s, ControllerKind::C1)
                        .ok_or_else(|| Error::config(format!("scenarios[{i}]"), format!("unknown scenario '{s}'")))?
                };
                if let Some(dt) = self.physics_dt {
                    cfg.clock.physics_dt = dt;
                }
                if let Some(d) = self.duration {
                    cfg.clock.duration = d;
                }
                cfg.validate()?;
                Ok(cfg)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub scenario: String,
    pub controller: ControllerKind,
    pub repetition: usize,
    pub summary: RunSummary,
    pub record: Option<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub scenario: String,
    pub controller: ControllerKind,
    pub runs: usize,
    pub failed: usize,
    pub metrics: Option<Metrics>,
    /// Improvement over C4 in percent, per RMSE/MAE/SSE.
    pub improvement: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationTable {
    pub rows: Vec<TableRow>,
    /// (controller, % RMSE change from low- to high-dynamic).
    pub degradation: Vec<(ControllerKind, f64)>,
}

pub struct AblationResult {
    pub outcomes: Vec<RunOutcome>,
    pub table: AblationTable,
}

fn improvement(reference: f64, value: f64) -> f64 {
    if reference.abs() > 0.0 {
        100.0 * (reference - value) / reference
    } else {
        0.0
    }
}

/// Mean metrics per (scenario, controller) with rows ordered C4, C3, C2, C1.
/// SSE columns average |SSE| over repetitions.
pub fn build_table(summaries: &[RunSummary]) -> AblationTable {
    let mut groups: BTreeMap<(String, ControllerKind), Vec<&RunSummary>> = BTreeMap::new();
    let mut scenario_order: Vec<String> = Vec::new();
    for s in summaries {
        if !scenario_order.contains(&s.scenario) {
            scenario_order.push(s.scenario.clone());
        }
        groups.entry((s.scenario.clone(), s.controller)).or_default().push(s);
    }
    scenario_order.sort();
    let mut rows = Vec::new();
    for sc in &scenario_order {
        let mut block = Vec::new();
        for kind in ControllerKind::ALL.iter().rev() {
            let Some(g) = groups.get(&(sc.clone(), *kind)) else {
                continue;
            };
            let ok: Vec<Metrics> = g
                .iter()
                .filter(|s| s.status.is_ok())
                .filter_map(|s| s.headline())
                .collect();
            let metrics = (!ok.is_empty()).then(|| {
                let k = ok.len() as f64;
                Metrics {
                    rmse: ok.iter().map(|m| m.rmse).sum::<f64>() / k,
                    mae: ok.iter().map(|m| m.mae).sum::<f64>() / k,
                    sse: ok.iter().map(|m| m.sse.abs()).sum::<f64>() / k,
                }
            });
            block.push(TableRow {
                scenario: sc.clone(),
                controller: *kind,
                runs: g.len(),
                failed: g.iter().filter(|s| !s.status.is_ok()).count(),
                metrics,
                improvement: None,
            });
        }
        let reference = block
            .iter()
            .find(|r| r.controller == ControllerKind::C4)
            .and_then(|r| r.metrics);
        if let Some(r) = reference {
            for row in &mut block {
                row.improvement = row.metrics.map(|m| {
                    [
                        improvement(r.rmse, m.rmse),
                        improvement(r.mae, m.mae),
                        improvement(r.sse, m.sse),
                    ]
                });
            }
        }
        rows.extend(block);
    }
    let rmse = |sc: &str, k: ControllerKind| {
        rows.iter()
            .find(|r: &&TableRow| r.scenario == sc && r.controller == k)
            .and_then(|r| r.metrics)
            .map(|m| m.rmse)
    };
    let degradation = ControllerKind::ALL
        .iter()
        .rev()
        .filter_map(|&k| match (rmse("low-dynamic", k), rmse("high-dynamic", k)) {
            (Some(lo), Some(hi)) if lo > 0.0 => Some((k, 100.0 * (hi - lo) / lo)),
            _ => None,
        })
        .collect();
    AblationTable { rows, degradation }
}

impl AblationTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scenario,controller,runs,failed,rmse,rmse_improvement,mae,mae_improvement,sse,sse_improvement\n");
        for r in &self.rows {
            let m = r.metrics;
            let imp = r.improvement;
            let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.controller,
                r.runs,
                r.failed,
                f(m.map(|m| m.rmse)),
                f(imp.map(|i| i[0])),
                f(m.map(|m| m.mae)),
                f(imp.map(|i| i[1])),
                f(m.map(|m| m.sse)),
                f(imp.map(|i| i[2])),
            );
        }
        s
    }

    /// Text table: one block per scenario, rows C4..C1, brackets give the
    /// improvement over C4.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let mut current = "";
        for r in &self.rows {
            if r.scenario != current {
                current = &r.scenario;
                let _ = writeln!(s, "\n{current}");
                let _ = writeln!(s, "{:<4} {:>20} {:>20} {:>20}", "", "RMSE", "MAE", "SSE");
            }
            let cell = |v: f64, i: Option<f64>| match i {
                Some(p) if r.controller != ControllerKind::C4 => format!("{v:.4} ({p:.1}%)"),
                _ => format!("{v:.4}"),
            };
            match r.metrics {
                Some(m) => {
                    let _ = write!(
                        s,
                        "{:<4} {:>20} {:>20} {:>20}",
                        r.controller.to_string(),
                        cell(m.rmse, r.improvement.map(|i| i[0])),
                        cell(m.mae, r.improvement.map(|i| i[1])),
                        cell(m.sse, r.improvement.map(|i| i[2])),
                    );
                }
                None => {
                    let _ = write!(s, "{:<4} {:>20}", r.controller.to_string(), "n/a");
                }
            }
            if r.failed > 0 {
                let _ = write!(s, "  [FAILED {}/{}]", r.failed, r.runs);
            }
            s.push('\n');
        }
        if !self.degradation.is_empty() {
            let _ = writeln!(s, "\nRMSE change from low-dynamic to high-dynamic");
            for (k, d) in &self.degradation {
                let _ = writeln!(s, "{:<4} {:+.1}%", k.to_string(), d);
            }
        }
        s
    }
}

/// Runs every (scenario, controller, repetition) with seed `seed_base + rep`.
pub fn run_ablation(spec: &AblationSpec, base_dir: &Path) -> Result<AblationResult> {
    let kinds = spec.controller_kinds()?;
    if spec.repetitions == 0 {
        return Err(Error::config("repetitions", "must be >= 1"));
    }
    let scenarios = spec.resolve_scenarios(base_dir)?;
    let mut jobs = Vec::new();
    for sc in &scenarios {
        for &k in &kinds {
            for rep in 0..spec.repetitions {
                jobs.push(sc.clone().with_controller(k).with_seed(spec.seed_base + rep as u64));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let results: Vec<Result<RunOutcome>> = pool.install(|| {
        jobs.par_iter()
            .map(|cfg| {
                let record = run_scenario(cfg)?;
                let summary = summarize(cfg, &record)?;
                Ok(RunOutcome {
                    scenario: cfg.name.clone(),
                    controller: cfg.controller.kind,
                    repetition: (cfg.seed - spec.seed_base) as usize,
                    summary,
                    record: spec.write_records.then_some(record),
                })
            })
            .collect()
    });
    let mut outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    outcomes.sort_by(|a, b| {
        (&a.scenario, a.controller, a.repetition).cmp(&(&b.scenario, b.controller, b.repetition))
    });
    let summaries: Vec<RunSummary> = outcomes.iter().map(|o| o.summary.clone()).collect();
    let table = build_table(&summaries);

    if let Some(dir) = &spec.output_dir {
        let dir = base_dir.join(dir);
        std::fs::create_dir_all(&dir)?;
        for o in &outcomes {
            let stem = format!("{}_{}_rep{:02}", o.scenario, o.controller, o.repetition);
            match &o.record {
                Some(r) => write_run_artifacts(&dir, &stem, r, &o.summary)?,
                None => std::fs::write(
                    dir.join(format!("{stem}.summary.json")),
                    serde_json::to_string_pretty(&o.summary)? + "\n",
                )?,
            }
        }
        std::fs::write(dir.join("table.csv"), table.to_csv())?;
        std::fs::write(dir.join("table.txt"), table.render())?;
    }
    Ok(AblationResult { outcomes, table })
}

/// Loads every `*.summary.json` under `dir` (sorted by file name).
pub fn load_summaries(dir: &Path) -> Result<Vec<RunSummary>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".summary.json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| Ok(serde_json::from_str(&std::fs::read_to_string(p)?)?))
        .collect()
}

/// Largest allowed |discrete − continuous| on a filter step response.
pub const FILTER_STEP_TOLERANCE: f64 = 1e-3;

/// The filters used by the controllers, by name.
pub fn controller_filters() -> Vec<(String, TransferFunction)> {
    let mut out = vec![
        ("gf1".to_string(), paper_coupling_filter()),
        ("gf1-printed".to_string(), printed_coupling_filter()),
        ("s-gf1".to_string(), paper_coupling_filter().times_s().expect("proper")),
    ];
    for w in [6.0, 3.0] {
        out.push((
            format!("gf2-w{w}"),
            TransferFunction::first_order_lowpass(w).expect("positive cutoff"),
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterCheck {
    pub name: String,
    pub filter: TransferFunction,
    pub sample_period: f64,
    pub max_step_error: f64,
    /// (t, discrete, continuous).
    #[serde(skip)]
    pub step: Vec<[f64; 3]>,
    /// (ω, |G(jω)|, |H(e^{jωT})|, ∠G, ∠H).
    #[serde(skip)]
    pub frequency: Vec<[f64; 5]>,
}

impl FilterCheck {
    pub fn passed(&self) -> bool {
        self.max_step_error < FILTER_STEP_TOLERANCE
    }

    pub fn step_csv(&self) -> String {
        let mut s = String::from("t,discrete,continuous\n");
        for r in &self.step {
            let _ = writeln!(s, "{},{},{}", r[0], r[1], r[2]);
        }
        s
    }

    pub fn frequency_csv(&self) -> String {
        let mut s = String::from("omega,continuous_mag,discrete_mag,continuous_phase,discrete_phase\n");
        for r in &self.frequency {
            let _ = writeln!(s, "{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4]);
        }
        s
    }
}

/// Unit-step and frequency responses of the Tustin filter at `sample_period`
/// against the continuous filter driven by the same samples.
pub fn check_filter(name: &str, tf: &TransferFunction, sample_period: f64, duration: f64) -> Result<FilterCheck> {
    let n = (duration / sample_period).round() as usize + 1;
    let u = vec![1.0; n];
    let mut f = discretize(tf, sample_period)?;
    let discrete: Vec<f64> = u.iter().map(|&v| f.step(v)).collect();
    let continuous = continuous_response(tf, &u, sample_period, 20)?;
    let step: Vec<[f64; 3]> = (0..n)
        .map(|k| [k as f64 * sample_period, discrete[k], continuous[k]])
        .collect();
    let max_step_error = step.iter().map(|r| (r[1] - r[2]).abs()).fold(0.0, f64::max);
    let nyquist = std::f64::consts::PI / sample_period;
    let frequency = (0..=200)
        .map(|i| {
            let w = 0.01 * (nyquist / 0.01).powf(i as f64 / 200.0) * 0.999;
            let g = tf.frequency_response(w);
            let h = f.frequency_response(w);
            [w, g.norm(), h.norm(), g.arg(), h.arg()]
        })
        .collect();
    Ok(FilterCheck {
        name: name.to_string(),
        filter: tf.clone(),
        sample_period,
        max_step_error,
        step,
        frequency,
    })
}

pub fn filters_check(sample_period: f64, duration: f64) -> Result<Vec<FilterCheck>> {
    controller_filters()
        .iter()
        .map(|(name, tf)| check_filter(name, tf, sample_period, duration))
        .collect()
}
