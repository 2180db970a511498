//! Implementations behind the command-line subcommands. Each returns a
//! serializable report; the binary prints it and maps errors to exit codes.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::profiles::write_profiles;
use super::run::{run, AppliedEvent, RunCounters, RunOptions, RunOutput};
use super::scenario::{EstimatorMode, PreparedScenario, Scenario};
use crate::dynamics::initial_control;
use crate::error::Result;
use crate::feeder::GroundTruth;
use crate::metrics::{attach_errors, compute_metrics, TrackingMetrics};
use crate::oracle::{discrete_pc_track, oracle_trajectory, primal_dual_track, TrackedRun};
use crate::problem::{ScenarioQp, StorageLevels};
use crate::record::TrajectoryRecord;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const METRICS_FILE: &str = "metrics.json";

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub median_step_ms: f64,
    pub p95_step_ms: f64,
    pub max_step_ms: f64,
    pub oracle_total_s: f64,
}

impl TimingSummary {
    fn of(out: &RunOutput) -> Self {
        Self {
            median_step_ms: 1e3 * out.median_step_seconds(),
            p95_step_ms: 1e3 * out.p95_step_seconds(),
            max_step_ms: 1e3 * out.step_seconds.iter().copied().fold(0.0, f64::max),
            oracle_total_s: out.oracle_seconds,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub scenario: String,
    pub rows: usize,
    pub estimator_mode: EstimatorMode,
    pub counters: RunCounters,
    pub events: Vec<AppliedEvent>,
    pub min_interior_margin: f64,
    pub final_reactance_error: f64,
    pub timing: TimingSummary,
}

impl SimulateReport {
    fn of(prepared: &PreparedScenario, out: &RunOutput, mode: EstimatorMode) -> Self {
        Self {
            scenario: prepared.scenario.name.clone(),
            rows: out.record.len(),
            estimator_mode: mode,
            counters: out.counters,
            events: out.events.clone(),
            min_interior_margin: out.min_interior_margin,
            final_reactance_error: out.reactance_error.last().copied().unwrap_or(f64::NAN),
            timing: TimingSummary::of(out),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Runs the scenario and writes `trajectory.csv` and `metrics.json` to `out`.
pub fn simulate(scenario: &Path, out: &Path) -> Result<SimulateReport> {
    let prepared = Scenario::prepare_file(scenario)?;
    let output = run(&prepared, &RunOptions::default())?;
    std::fs::create_dir_all(out)?;
    output.record.export_csv(&out.join(TRAJECTORY_FILE))?;
    let report = SimulateReport::of(&prepared, &output, prepared.scenario.estimator.mode);
    write_json(&out.join(METRICS_FILE), &report)?;
    Ok(report)
}

/// Error statistics of one tracked trajectory against its oracle.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorSummary {
    pub method: String,
    pub time_to_track_s: Option<f64>,
    /// Over rows at or after the burn-in time.
    pub mean_control_error: f64,
    pub max_control_error: f64,
    pub max_objective_error: f64,
}

impl ErrorSummary {
    pub fn of(method: &str, metrics: &TrackingMetrics, burn_in: f64) -> Self {
        Self {
            method: method.into(),
            time_to_track_s: metrics.time_to_track,
            mean_control_error: metrics.mean_control_error(burn_in),
            max_control_error: metrics.max_control_error(burn_in),
            max_objective_error: metrics.max_objective_error(burn_in),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub burn_in_s: f64,
    pub methods: Vec<ErrorSummary>,
    /// Why the iterative baselines were not run, if they were not.
    pub baselines_skipped: Option<String>,
    pub counters: RunCounters,
    pub timing: TimingSummary,
}

/// Full comparison data, kept in memory for callers that need the series.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub report: CompareReport,
    pub run: RunOutput,
    pub baselines: Vec<(String, TrackedRun, TrackingMetrics)>,
}

/// Runs the iterative baselines on the true feeder and measures each against
/// the exact solutions along its own storage trajectory.
pub fn run_baselines(prepared: &PreparedScenario) -> Result<Vec<(String, TrackedRun, TrackingMetrics)>> {
    let sc = &prepared.scenario;
    let truth = GroundTruth::new(&prepared.feeder.topology, &sc.noise, sc.seed)?;
    let halted = vec![false; prepared.data.devices().len()];
    let provider = ScenarioQp {
        data: &prepared.data,
        sensitivity: std::sync::Arc::new(truth.model().clone()),
        halted: &halted,
    };
    let storage0 = StorageLevels::at_rest(prepared.soc0.clone());
    let qp0 = prepared
        .data
        .assemble(provider.sensitivity.clone(), prepared.grid.start, &storage0, &halted)?;
    let u0 = initial_control(&qp0);

    let pd = primal_dual_track(
        &provider,
        &prepared.grid,
        &u0,
        storage0.clone(),
        &sc.baselines.primal_dual,
    )?;
    let dpc = discrete_pc_track(&provider, &prepared.grid, &u0, storage0, &sc.baselines.discrete_pc)?;
    let mut result = Vec::new();
    for (name, mut tracked) in [("primal_dual", pd), ("discrete_pc", dpc)] {
        let (oracle, _) = oracle_trajectory(&provider, &prepared.grid, &tracked.storage)?;
        let metrics = compute_metrics(&tracked.record, &oracle, &sc.thresholds)?;
        attach_errors(&mut tracked.record, &metrics)?;
        result.push((name.to_string(), tracked, metrics));
    }
    Ok(result)
}

/// The continuous method with oracle errors, plus the iterative baselines
/// when the scenario has no events.
pub fn compare_prepared(prepared: &PreparedScenario) -> Result<Comparison> {
    let sc = &prepared.scenario;
    let output = run(
        prepared,
        &RunOptions {
            with_oracle: true,
            ..Default::default()
        },
    )?;
    let metrics = output.metrics.as_ref().expect("oracle requested");
    let mut methods = vec![ErrorSummary::of("prediction_correction", metrics, sc.burn_in_s)];
    let (baselines, skipped) = if sc.events.is_empty() {
        (run_baselines(prepared)?, None)
    } else {
        (
            Vec::new(),
            Some("scenario has events; baselines are defined for event-free runs".to_string()),
        )
    };
    methods.extend(
        baselines
            .iter()
            .map(|(name, _, m)| ErrorSummary::of(name, m, sc.burn_in_s)),
    );
    let report = CompareReport {
        scenario: sc.name.clone(),
        burn_in_s: sc.burn_in_s,
        methods,
        baselines_skipped: skipped,
        counters: output.counters,
        timing: TimingSummary::of(&output),
    };
    Ok(Comparison {
        report,
        run: output,
        baselines,
    })
}

/// Writes `trajectory.csv` (with error columns), `oracle.csv`, one CSV per
/// baseline and `comparison.json` when `out` is given.
pub fn compare(scenario: &Path, out: Option<&Path>) -> Result<CompareReport> {
    let prepared = Scenario::prepare_file(scenario)?;
    let cmp = compare_prepared(&prepared)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        cmp.run.record.export_csv(&dir.join(TRAJECTORY_FILE))?;
        if let Some(oracle) = &cmp.run.oracle {
            oracle.export_csv(&dir.join("oracle.csv"))?;
        }
        for (name, tracked, _) in &cmp.baselines {
            tracked.record.export_csv(&dir.join(format!("{name}.csv")))?;
        }
        write_json(&dir.join("comparison.json"), &cmp.report)?;
    }
    Ok(cmp.report)
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub scenario: String,
    pub window: usize,
    pub forgetting: f64,
    pub solves: usize,
    pub failures: usize,
    /// Relative reactance error of the rated data.
    pub rated_error: f64,
    pub final_error: f64,
    pub max_error_after_first_update: f64,
    pub events: Vec<AppliedEvent>,
}

/// Runs the loop in estimated mode and reports how well the line reactances
/// are recovered.
pub fn estimate_prepared(prepared: &PreparedScenario) -> Result<EstimateReport> {
    let output = run(
        prepared,
        &RunOptions {
            mode: Some(EstimatorMode::Estimated),
            with_oracle: false,
        },
    )?;
    let first = output.estimator_updated.iter().position(|u| *u);
    let after = first.map_or(f64::NAN, |k| {
        output.reactance_error[k + 1..].iter().copied().fold(0.0, f64::max)
    });
    Ok(EstimateReport {
        scenario: prepared.scenario.name.clone(),
        window: prepared.scenario.estimator.config.window,
        forgetting: prepared.scenario.estimator.config.forgetting,
        solves: output.counters.estimator_solves,
        failures: output.counters.estimator_failures,
        rated_error: output.reactance_error[0],
        final_error: *output.reactance_error.last().expect("at least one row"),
        max_error_after_first_update: after,
        events: output.events,
    })
}

pub fn estimate(scenario: &Path) -> Result<EstimateReport> {
    estimate_prepared(&Scenario::prepare_file(scenario)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub scenario: String,
    pub nodes: usize,
    pub steps: usize,
    pub timing: TimingSummary,
    pub factorizations_per_substep: f64,
    pub solves_per_interval: f64,
}

pub fn bench(scenario: &Path) -> Result<BenchReport> {
    let prepared = Scenario::prepare_file(scenario)?;
    let output = run(&prepared, &RunOptions::default())?;
    let c = &output.counters;
    Ok(BenchReport {
        scenario: prepared.scenario.name.clone(),
        nodes: prepared.node_count(),
        steps: c.dynamics_steps,
        timing: TimingSummary::of(&output),
        factorizations_per_substep: c.factorizations as f64 / c.substeps.max(1) as f64,
        solves_per_interval: c.estimator_solves as f64 / c.intervals.max(1) as f64,
    })
}

pub fn gen_profiles(seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    write_profiles(seed, out)
}

/// Reads a trajectory written by `simulate` or `compare`.
pub fn read_trajectory(dir: &Path) -> Result<TrajectoryRecord> {
    TrajectoryRecord::read_csv(&dir.join(TRAJECTORY_FILE))
}
