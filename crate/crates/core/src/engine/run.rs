//! The closed loop: measure, estimate, assemble, step, record.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use super::scenario::{pv_device, reconfigure, EstimatorMode, Event, EventKind, PreparedScenario};
use crate::dynamics::{initial_control, step, PcState};
use crate::error::Result;
use crate::estimator::{OnlineEstimator, Snapshot};
use crate::feeder::{FeederTopology, GroundTruth, SensitivityModel};
use crate::metrics::{attach_errors, compute_metrics, TrackingMetrics};
use crate::oracle::{solve_sampled_qp, QpSolution};
use crate::problem::{ScenarioQp, StorageLevels, TimeVaryingQp};
use crate::record::{TrajectoryRecord, TrajectoryRow};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    /// Overrides the scenario's estimator mode.
    pub mode: Option<EstimatorMode>,
    /// Solve the exact QP on the true feeder at every row.
    pub with_oracle: bool,
}

/// Instrumentation counters over a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunCounters {
    pub intervals: usize,
    pub dynamics_steps: usize,
    pub substeps: usize,
    pub factorizations: usize,
    pub halvings: usize,
    pub reanchors: usize,
    pub estimator_solves: usize,
    pub estimator_failures: usize,
    pub model_updates: usize,
    /// Largest number of dynamics steps taken in one interval.
    pub max_steps_per_interval: usize,
    /// Largest number of least-squares solves in one interval.
    pub max_solves_per_interval: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedEvent {
    /// Scheduled time.
    pub time_s: f64,
    /// Grid time at which it took effect.
    pub applied_at: f64,
    pub description: String,
    /// Snapshots left in the estimator window right after the event.
    pub window_len: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: TrajectoryRecord,
    /// Exact solutions on the true feeder, row-aligned with `record`.
    pub oracle: Option<TrajectoryRecord>,
    pub metrics: Option<TrackingMetrics>,
    pub storage: Vec<StorageLevels>,
    /// Whether the estimator replaced its model at each row.
    pub estimator_updated: Vec<bool>,
    /// `‖x̂ − x‖ / ‖x‖` of the model used at each row against the true reactances.
    pub reactance_error: Vec<f64>,
    /// Smallest `s − max_i f_i(u)` over all rows.
    pub min_interior_margin: f64,
    pub counters: RunCounters,
    pub events: Vec<AppliedEvent>,
    /// Wall time of each interval (estimation + dynamics step), seconds.
    pub step_seconds: Vec<f64>,
    /// Wall time spent in oracle solves, seconds.
    pub oracle_seconds: f64,
    /// `(stationarity, primal infeasibility, complementarity)` of every oracle solve.
    pub oracle_residuals: Vec<(f64, f64, f64)>,
}

/// Seed of the ground truth after the `k`-th reconfiguration.
fn derived_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1))
}

/// Per-run mutable state touched by events.
struct Plant {
    rated: FeederTopology,
    truth: GroundTruth,
    true_model: Arc<SensitivityModel>,
    rated_model: Arc<SensitivityModel>,
    estimator: OnlineEstimator,
    halted: Vec<bool>,
    reconfigurations: usize,
}

impl Plant {
    fn new(prepared: &PreparedScenario) -> Result<Self> {
        let sc = &prepared.scenario;
        let rated = prepared.feeder.topology.clone();
        let truth = GroundTruth::new(&rated, &sc.noise, sc.seed)?;
        Ok(Self {
            true_model: Arc::new(truth.model().clone()),
            rated_model: Arc::new(SensitivityModel::from_topology(&rated)?),
            estimator: OnlineEstimator::new(&rated, sc.estimator.config)?,
            truth,
            rated,
            halted: vec![false; prepared.data.devices().len()],
            reconfigurations: 0,
        })
    }

    fn apply(&mut self, prepared: &PreparedScenario, event: &Event) -> Result<String> {
        let data = &prepared.data;
        Ok(match &event.kind {
            EventKind::PvHalt { node } => {
                self.halted[pv_device(data, *node)?] = true;
                format!("pv_halt node {node}")
            }
            EventKind::PvResume { node } => {
                self.halted[pv_device(data, *node)?] = false;
                format!("pv_resume node {node}")
            }
            EventKind::Reconfigure { open, close } => {
                self.rated = reconfigure(&prepared.feeder, &self.rated, open, close)?;
                self.reconfigurations += 1;
                let seed = derived_seed(prepared.scenario.seed, self.reconfigurations);
                self.truth = GroundTruth::new(&self.rated, &prepared.scenario.noise, seed)?;
                self.true_model = Arc::new(self.truth.model().clone());
                self.rated_model = Arc::new(SensitivityModel::from_topology(&self.rated)?);
                self.estimator.reset_topology(&self.rated)?;
                let closed: Vec<String> = close.iter().map(|l| format!("{}-{}", l.from, l.to)).collect();
                let opened: Vec<String> = open.iter().map(|(a, b)| format!("{a}-{b}")).collect();
                format!("reconfigure open [{}] close [{}]", opened.join(", "), closed.join(", "))
            }
        })
    }

    fn model(&self, mode: EstimatorMode) -> Arc<SensitivityModel> {
        match mode {
            EstimatorMode::Estimated => self.estimator.model(),
            EstimatorMode::FixedRated => self.rated_model.clone(),
        }
    }

    fn model_reactances(&self, mode: EstimatorMode) -> DVector<f64> {
        match mode {
            EstimatorMode::Estimated => self.estimator.reactances().clone(),
            EstimatorMode::FixedRated => self.rated.reactances(),
        }
    }

    fn true_qp(&self, prepared: &PreparedScenario, t: f64, storage: &StorageLevels) -> Result<TimeVaryingQp> {
        prepared
            .data
            .assemble(self.true_model.clone(), t, storage, &self.halted)
    }
}

fn row(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64, c: f64) -> Result<TrajectoryRow> {
    Ok(TrajectoryRow {
        t: qp.t,
        u: u.clone(),
        v: qp.voltage(u),
        f: qp.objective_value(u)?,
        s,
        c,
        errors: None,
    })
}

/// Runs a prepared scenario over its whole horizon.
pub fn run(prepared: &PreparedScenario, options: &RunOptions) -> Result<RunOutput> {
    let sc = &prepared.scenario;
    let cfg = &sc.integrator;
    let data = &prepared.data;
    let grid = &prepared.grid;
    let n = data.node_count();
    let mode = options.mode.unwrap_or(sc.estimator.mode);

    let mut plant = Plant::new(prepared)?;
    let storage0 = StorageLevels::at_rest(prepared.soc0.clone());
    let qp0 = data.assemble(plant.model(mode), grid.start, &storage0, &plant.halted)?;
    let mut state = PcState::new(initial_control(&qp0), &qp0, storage0, cfg)?;

    let mut out = RunOutput {
        record: TrajectoryRecord::new(n),
        oracle: options.with_oracle.then(|| TrajectoryRecord::new(n)),
        metrics: None,
        storage: Vec::with_capacity(grid.len()),
        estimator_updated: Vec::with_capacity(grid.len()),
        reactance_error: Vec::with_capacity(grid.len()),
        min_interior_margin: f64::INFINITY,
        counters: RunCounters::default(),
        events: Vec::new(),
        step_seconds: Vec::with_capacity(grid.len()),
        oracle_seconds: 0.0,
        oracle_residuals: Vec::new(),
    };
    let mut pending = sc.events.iter().peekable();
    let mut warm: Option<QpSolution> = None;

    for k in 0..grid.len() {
        let t = grid.time(k);
        while let Some(event) = pending.next_if(|e| e.time_s <= t + 1e-9) {
            let description = plant.apply(prepared, event)?;
            log::info!("t = {t} s: {description}");
            out.events.push(AppliedEvent {
                time_s: event.time_s,
                applied_at: t,
                description,
                window_len: plant.estimator.window_len(),
            });
        }
        let started = Instant::now();

        // measurement of the setpoints applied over the previous interval
        let true_qp = plant.true_qp(prepared, t, &state.storage)?;
        let mut solves = 0;
        let mut updated = false;
        if mode == EstimatorMode::Estimated {
            // W holds minus the load, so P_g + W is the net injection
            let p: DVector<f64> = state.u.rows(0, n) + true_qp.w.rows(0, n);
            let q: DVector<f64> = state.u.rows(n, n) + true_qp.w.rows(n, n);
            let v = plant.truth.measure(&p, &q)?;
            let before = plant.estimator.solves();
            updated = plant.estimator.observe(Snapshot { t, p, q, v })?;
            solves = plant.estimator.solves() - before;
        }
        out.counters.estimator_solves += solves;
        out.counters.max_solves_per_interval = out.counters.max_solves_per_interval.max(solves);
        out.counters.model_updates += updated as usize;
        out.estimator_updated.push(updated);

        let x_true = plant.truth.topology().reactances();
        out.reactance_error
            .push((plant.model_reactances(mode) - &x_true).norm() / x_true.norm());

        let provider = ScenarioQp {
            data,
            sensitivity: plant.model(mode),
            halted: &plant.halted,
        };
        let model_qp = data.assemble(provider.sensitivity.clone(), t, &state.storage, &plant.halted)?;
        if state.reanchor(&model_qp, cfg)? {
            out.counters.reanchors += 1;
        }
        let (s, _) = state.slack(cfg);
        let (c, _) = state.penalty(cfg);
        out.min_interior_margin = out
            .min_interior_margin
            .min(s - model_qp.constraint_values(&state.u)?.max());

        out.record.push(row(&true_qp, &state.u, s, c)?)?;
        out.storage.push(state.storage.clone());

        let mut steps = 0;
        if k + 1 < grid.len() {
            let (next, stats) = step(&state, &provider, cfg)?;
            state = next;
            steps += 1;
            out.counters.dynamics_steps += 1;
            out.counters.substeps += stats.substeps;
            out.counters.factorizations += stats.factorizations;
            out.counters.halvings += stats.halvings;
            out.counters.reanchors += stats.reanchored as usize;
        }
        out.counters.max_steps_per_interval = out.counters.max_steps_per_interval.max(steps);
        out.counters.intervals += 1;
        out.step_seconds.push(started.elapsed().as_secs_f64());

        if let Some(oracle) = out.oracle.as_mut() {
            let started = Instant::now();
            let sol = solve_sampled_qp(&true_qp, warm.as_ref().map(|s| &s.u))?;
            oracle.push(row(&true_qp, &sol.u, f64::NAN, f64::NAN)?)?;
            out.oracle_residuals
                .push((sol.stationarity, sol.primal_infeasibility, sol.complementarity));
            warm = Some(sol);
            out.oracle_seconds += started.elapsed().as_secs_f64();
        }
    }

    out.counters.estimator_failures = plant.estimator.failures();
    if let Some(oracle) = &out.oracle {
        let metrics = compute_metrics(&out.record, oracle, &sc.thresholds)?;
        attach_errors(&mut out.record, &metrics)?;
        out.metrics = Some(metrics);
    }
    Ok(out)
}

impl RunOutput {
    pub fn median_step_seconds(&self) -> f64 {
        percentile(&self.step_seconds, 0.5)
    }

    pub fn p95_step_seconds(&self) -> f64 {
        percentile(&self.step_seconds, 0.95)
    }

    /// Real-power setpoint of the device at `node` along the run.
    pub fn real_setpoint(&self, node: usize) -> Vec<(f64, f64)> {
        self.record.rows.iter().map(|r| (r.t, r.u[node - 1])).collect()
    }
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}
