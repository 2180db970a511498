//! Sampled reference trajectories and two iterative tracking baselines.
//!
//! Both baselines recompute their setpoints only at sample instants and hold
//! them in between; the trajectory is recorded on the fine time grid so it
//! can be compared row by row with the continuous method and the oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::qp::{solve_sampled_qp, QpSolution};
use crate::barrier::{eval_blocks, eval_phi, BarrierSchedule, SlackAnchor};
use crate::error::{Error, Result};
use crate::problem::{QpProvider, StorageLevels, TimeVaryingQp};
use crate::record::{TimeGrid, TrajectoryRecord, TrajectoryRow};

/// A tracked trajectory with the storage levels seen at every row.
#[derive(Debug, Clone)]
pub struct TrackedRun {
    pub record: TrajectoryRecord,
    pub storage: Vec<StorageLevels>,
}

fn row_for(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64, c: f64) -> Result<TrajectoryRow> {
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

/// Number of grid steps per sample period.
fn stride(grid: &TimeGrid, period: f64) -> Result<usize> {
    let k = (period / grid.tau).round();
    if k < 1.0 || (k * grid.tau - period).abs() > 1e-9 {
        return Err(Error::Scenario(format!(
            "sample period {period} s is not a positive multiple of tau = {} s",
            grid.tau
        )));
    }
    Ok(k as usize)
}

/// Exact QP solutions along `grid`, row `k` using `storage[k]`.
pub fn oracle_trajectory<P: QpProvider + ?Sized>(
    provider: &P,
    grid: &TimeGrid,
    storage: &[StorageLevels],
) -> Result<(TrajectoryRecord, Vec<QpSolution>)> {
    if storage.len() != grid.len() {
        return Err(Error::MisalignedTrajectories(format!(
            "{} storage states for {} grid points",
            storage.len(),
            grid.len()
        )));
    }
    let mut record = TrajectoryRecord::new(0);
    let mut solutions: Vec<QpSolution> = Vec::with_capacity(grid.len());
    for (k, levels) in storage.iter().enumerate() {
        let qp = provider.qp_at(grid.time(k), levels)?;
        record.n = qp.node_count();
        let sol = solve_sampled_qp(&qp, solutions.last().map(|s| &s.u))?;
        record.push(row_for(&qp, &sol.u, f64::NAN, f64::NAN)?)?;
        solutions.push(sol);
    }
    Ok((record, solutions))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrimalDualConfig {
    pub sample_period: f64,
    pub iterations: usize,
    pub primal_step: f64,
    pub dual_step: f64,
}

impl Default for PrimalDualConfig {
    fn default() -> Self {
        Self {
            sample_period: 1.0,
            iterations: 3,
            primal_step: 0.05,
            dual_step: 0.1,
        }
    }
}

/// Projected primal-dual gradient iterations on the Lagrangian with the
/// voltage limits dualized, run `iterations` times per sample.
pub fn primal_dual_track<P: QpProvider + ?Sized>(
    provider: &P,
    grid: &TimeGrid,
    u0: &DVector<f64>,
    storage0: StorageLevels,
    cfg: &PrimalDualConfig,
) -> Result<TrackedRun> {
    if cfg.primal_step < 0.0 || cfg.dual_step < 0.0 {
        return Err(Error::Scenario("primal-dual gains must be nonnegative".into()));
    }
    let stride = stride(grid, cfg.sample_period)?;
    let mut u = u0.clone();
    let mut lam: Option<DVector<f64>> = None;
    let mut storage = storage0;
    let mut run = TrackedRun {
        record: TrajectoryRecord::new(u0.len() / 2),
        storage: Vec::with_capacity(grid.len()),
    };
    for k in 0..grid.len() {
        let qp = provider.qp_at(grid.time(k), &storage)?;
        if k % stride == 0 {
            let n = qp.node_count();
            let lam = lam.get_or_insert_with(|| DVector::zeros(2 * n));
            for _ in 0..cfg.iterations {
                let mult = lam.rows(n, n) - lam.rows(0, n);
                let grad = qp.objective_gradient(&u) + qp.d_matrix().tr_mul(&mult);
                u = qp.bounds.project(&(&u - grad * cfg.primal_step));
                let v_new = qp.voltage(&u);
                for i in 0..n {
                    lam[i] = (lam[i] + cfg.dual_step * (qp.v_min - v_new[i])).max(0.0);
                    lam[n + i] = (lam[n + i] + cfg.dual_step * (v_new[i] - qp.v_max)).max(0.0);
                }
            }
        }
        run.record.push(row_for(&qp, &u, f64::NAN, f64::NAN)?)?;
        run.storage.push(storage.clone());
        storage = provider.advance_storage(&storage, &u, grid.tau);
    }
    Ok(run)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscretePcConfig {
    pub sample_period: f64,
    pub correction_steps: usize,
    /// Taken from the integrator settings when loaded from a scenario.
    #[serde(skip)]
    pub schedule: BarrierSchedule,
    #[serde(skip)]
    pub slack_margin: f64,
}

impl Default for DiscretePcConfig {
    fn default() -> Self {
        Self {
            sample_period: 1.0,
            correction_steps: 20,
            schedule: BarrierSchedule::default(),
            slack_margin: 1e-3,
        }
    }
}

fn solve_spd(h: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = h.cholesky().ok_or(Error::IllConditionedHessian {
        condition: f64::INFINITY,
    })?;
    Ok(chol.solve(rhs))
}

/// Damped Newton iterations on Φ(·, s, c) for a fixed snapshot, with
/// backtracking that keeps the iterate interior and decreases Φ.
pub fn newton_corrections(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64, c: f64, steps: usize) -> Result<DVector<f64>> {
    let mut u = u.clone();
    for _ in 0..steps {
        let b = eval_blocks(qp, &u, s, c)?;
        let du = -solve_spd(b.hess_uu, &b.grad_u)?;
        let decrement = -b.grad_u.dot(&du);
        if !(decrement > 1e-24) {
            break;
        }
        let phi0 = eval_phi(qp, &u, s, c)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &u + &du * alpha;
            if let Ok(phi) = eval_phi(qp, &trial, s, c) {
                if phi <= phi0 - 1e-4 * alpha * decrement {
                    u = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(u)
}

/// Discrete-time prediction-correction: at each sample, one Euler prediction
/// over the sample period from the previous sample, then Newton corrections
/// on the sampled barrier problem. The corrected setpoint is held until the
/// next sample.
///
/// The bounds move during a sample period, so the predicted point is first
/// pulled back inside the slack-relaxed box. The slack schedule restarts only
/// if a voltage limit is still violated.
pub fn discrete_pc_track<P: QpProvider + ?Sized>(
    provider: &P,
    grid: &TimeGrid,
    u0: &DVector<f64>,
    storage0: StorageLevels,
    cfg: &DiscretePcConfig,
) -> Result<TrackedRun> {
    if cfg.correction_steps == 0 {
        return Err(Error::Scenario("discrete PC needs at least one correction step".into()));
    }
    let stride = stride(grid, cfg.sample_period)?;
    let mut storage = storage0;
    let mut base = u0.clone();
    let mut prediction = DVector::zeros(u0.len());
    let mut anchor: Option<SlackAnchor> = None;
    let mut held = (u0.clone(), f64::NAN, f64::NAN);
    let mut run = TrackedRun {
        record: TrajectoryRecord::new(u0.len() / 2),
        storage: Vec::with_capacity(grid.len()),
    };
    for k in 0..grid.len() {
        let t = grid.time(k);
        let qp = provider.qp_at(t, &storage)?;
        if k % stride == 0 {
            let a = anchor.get_or_insert(SlackAnchor {
                t0: t,
                s0: cfg
                    .schedule
                    .s0
                    .max(qp.constraint_values(&base)?.max() + cfg.slack_margin),
            });
            let (mut s, _) = cfg.schedule.slack(a, t);
            let u = recover_box_interior(&qp, &(&base + &prediction), s);
            let fmax = qp.constraint_values(&u)?.max();
            if s - fmax <= 0.0 {
                *a = SlackAnchor {
                    t0: t,
                    s0: fmax + cfg.slack_margin,
                };
                s = a.s0;
            }
            let (c, _) = cfg.schedule.penalty(t - grid.start);
            let corrected = newton_corrections(&qp, &u, s, c, cfg.correction_steps)?;
            let b = eval_blocks(&qp, &corrected, s, c)?;
            prediction = -solve_spd(b.hess_uu, &b.grad_ut)? * cfg.sample_period;
            base = corrected.clone();
            held = (corrected, s, c);
        }
        run.record.push(row_for(&qp, &held.0, held.1, held.2)?)?;
        run.storage.push(storage.clone());
        storage = provider.advance_storage(&storage, &held.0, grid.tau);
    }
    Ok(run)
}

/// Moves `u` inside the box relaxed by half the slack, so every box
/// constraint has margin at least `s / 2`.
fn recover_box_interior(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64) -> DVector<f64> {
    let half = 0.5 * s;
    u.zip_zip_map(&qp.bounds.lo, &qp.bounds.hi, |x, lo, hi| x.clamp(lo - half, hi + half))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::test_support::random_qp;
    use crate::problem::StaticQp;

    fn static_case(seed: u64) -> (StaticQp, DVector<f64>) {
        let qp = random_qp(2, seed).frozen();
        let sol = solve_sampled_qp(&qp, None).unwrap();
        (StaticQp::new(qp), sol.u)
    }

    #[test]
    fn primal_dual_converges_on_static_problem() {
        let (provider, u_star) = static_case(21);
        let grid = TimeGrid::new(0.0, 0.02, 4.0).unwrap();
        let cfg = PrimalDualConfig {
            sample_period: 0.02,
            iterations: 200,
            ..Default::default()
        };
        let u0 = DVector::zeros(4);
        let run = primal_dual_track(&provider, &grid, &u0, StorageLevels::default(), &cfg).unwrap();
        let last = &run.record.rows.last().unwrap().u;
        assert!((last - &u_star).amax() <= 1e-4, "{last} vs {u_star}");
    }

    #[test]
    fn zero_gains_hold_the_start() {
        let (provider, _) = static_case(22);
        let grid = TimeGrid::new(0.0, 0.02, 1.0).unwrap();
        let cfg = PrimalDualConfig {
            primal_step: 0.0,
            dual_step: 0.0,
            ..Default::default()
        };
        let u0 = provider.0.bounds.project(&DVector::zeros(4));
        let run = primal_dual_track(&provider, &grid, &u0, StorageLevels::default(), &cfg).unwrap();
        assert!(run.record.rows.iter().all(|r| r.u == u0));
    }

    #[test]
    fn discrete_pc_reaches_the_oracle() {
        let (provider, u_star) = static_case(23);
        let grid = TimeGrid::new(0.0, 0.02, 4.0).unwrap();
        let cfg = DiscretePcConfig {
            sample_period: 0.02,
            correction_steps: 50,
            ..Default::default()
        };
        let u0 = provider.0.bounds.project(&DVector::zeros(4));
        let run = discrete_pc_track(&provider, &grid, &u0, StorageLevels::default(), &cfg).unwrap();
        let last = &run.record.rows.last().unwrap().u;
        assert!((last - &u_star).amax() <= 1e-4);
    }
}
