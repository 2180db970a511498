//! Tracking errors of a trajectory against a reference trajectory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record::TrajectoryRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub control: f64,
    pub objective: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            control: 1e-2,
            objective: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingMetrics {
    pub times: Vec<f64>,
    /// `‖u − u*‖₂` per row.
    pub control_error: Vec<f64>,
    /// `|f(u) − f(u*)|` per row.
    pub objective_error: Vec<f64>,
    /// First time after which both errors stay within the thresholds.
    pub time_to_track: Option<f64>,
}

impl TrackingMetrics {
    /// Mean control error over rows with `t ≥ from`.
    pub fn mean_control_error(&self, from: f64) -> f64 {
        mean(self.after(from).map(|k| self.control_error[k]))
    }

    pub fn max_control_error(&self, from: f64) -> f64 {
        self.after(from).map(|k| self.control_error[k]).fold(0.0, f64::max)
    }

    pub fn max_objective_error(&self, from: f64) -> f64 {
        self.after(from).map(|k| self.objective_error[k]).fold(0.0, f64::max)
    }

    /// First time at or after `from` from which both errors stay within the
    /// thresholds until the end.
    pub fn time_to_track_after(&self, from: f64, thresholds: &Thresholds) -> Option<f64> {
        first_settled(self, thresholds, from)
    }

    fn after(&self, from: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.times.len()).filter(move |&k| self.times[k] >= from - 1e-12)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn first_settled(m: &TrackingMetrics, th: &Thresholds, from: f64) -> Option<f64> {
    let mut settled = None;
    for k in (0..m.times.len()).rev() {
        if m.times[k] < from - 1e-12 {
            break;
        }
        if m.control_error[k] <= th.control && m.objective_error[k] <= th.objective {
            settled = Some(m.times[k]);
        } else {
            break;
        }
    }
    settled
}

/// Row-by-row errors of `tracked` against `oracle`; both must share the
/// same time stamps.
pub fn compute_metrics(
    tracked: &TrajectoryRecord,
    oracle: &TrajectoryRecord,
    thresholds: &Thresholds,
) -> Result<TrackingMetrics> {
    if tracked.len() != oracle.len() || tracked.n != oracle.n {
        return Err(Error::MisalignedTrajectories(format!(
            "{} rows (n = {}) against {} rows (n = {})",
            tracked.len(),
            tracked.n,
            oracle.len(),
            oracle.n
        )));
    }
    let mut m = TrackingMetrics {
        times: Vec::with_capacity(tracked.len()),
        control_error: Vec::with_capacity(tracked.len()),
        objective_error: Vec::with_capacity(tracked.len()),
        time_to_track: None,
    };
    for (a, b) in tracked.rows.iter().zip(&oracle.rows) {
        if (a.t - b.t).abs() > 1e-9 {
            return Err(Error::MisalignedTrajectories(format!(
                "t = {} against t = {}",
                a.t, b.t
            )));
        }
        m.times.push(a.t);
        m.control_error.push((&a.u - &b.u).norm());
        m.objective_error.push((a.f - b.f).abs());
    }
    m.time_to_track = first_settled(&m, thresholds, f64::NEG_INFINITY);
    Ok(m)
}

/// Copies the error series into the rows of `record`.
pub fn attach_errors(record: &mut TrajectoryRecord, metrics: &TrackingMetrics) -> Result<()> {
    if record.len() != metrics.times.len() {
        return Err(Error::MisalignedTrajectories("metrics do not match the record".into()));
    }
    for (k, row) in record.rows.iter_mut().enumerate() {
        row.errors = Some((metrics.control_error[k], metrics.objective_error[k]));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::TrajectoryRow;
    use nalgebra::DVector;

    fn record(offset: f64) -> TrajectoryRecord {
        let mut r = TrajectoryRecord::new(1);
        for k in 0..5 {
            r.push(TrajectoryRow {
                t: k as f64,
                u: DVector::from_vec(vec![k as f64 + offset, 0.5]),
                v: DVector::from_element(1, 1.0),
                f: 1.0,
                s: 0.0,
                c: 0.0,
                errors: None,
            })
            .unwrap();
        }
        r
    }

    #[test]
    fn identical_trajectories() {
        let m = compute_metrics(&record(0.0), &record(0.0), &Thresholds::default()).unwrap();
        assert!(m.control_error.iter().all(|e| *e == 0.0));
        assert_eq!(m.time_to_track, Some(0.0));
    }

    #[test]
    fn constant_offset() {
        let m = compute_metrics(&record(-0.25), &record(0.0), &Thresholds::default()).unwrap();
        assert!(m.control_error.iter().all(|e| *e == 0.25));
        assert_eq!(m.time_to_track, None);
        assert_eq!(m.mean_control_error(2.0), 0.25);
    }

    #[test]
    fn settling_time() {
        let mut a = record(0.0);
        a.rows[1].u[0] += 1.0;
        let m = compute_metrics(&a, &record(0.0), &Thresholds::default()).unwrap();
        assert_eq!(m.time_to_track, Some(2.0));
    }

    #[test]
    fn misaligned() {
        let mut a = record(0.0);
        a.rows.pop();
        assert!(matches!(
            compute_metrics(&a, &record(0.0), &Thresholds::default()),
            Err(Error::MisalignedTrajectories(_))
        ));
    }
}
