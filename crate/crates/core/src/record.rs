//! Time-stamped trajectories and their CSV form.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniform time grid `start + k·tau`, `k = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub start: f64,
    pub tau: f64,
    pub steps: usize,
}

impl TimeGrid {
    /// Grid covering `horizon` seconds; the horizon must be a whole number of steps.
    pub fn new(start: f64, tau: f64, horizon: f64) -> Result<Self> {
        if !(tau > 0.0) || !(horizon >= 0.0) {
            return Err(Error::Scenario(format!(
                "invalid time grid: tau = {tau}, horizon = {horizon}"
            )));
        }
        let steps = (horizon / tau).round();
        if (steps * tau - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Scenario(format!(
                "horizon {horizon} s is not a multiple of tau = {tau} s"
            )));
        }
        Ok(Self {
            start,
            tau,
            steps: steps as usize,
        })
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.tau
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    /// Objective on the true feeder model.
    pub f: f64,
    pub s: f64,
    pub c: f64,
    /// `(‖u − u*‖₂, |f − f*|)` once compared against an oracle.
    pub errors: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryRecord {
    pub n: usize,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryRecord {
    pub fn new(n: usize) -> Self {
        Self { n, rows: Vec::new() }
    }

    pub fn push(&mut self, row: TrajectoryRow) -> Result<()> {
        crate::error::check_dim("trajectory u", 2 * self.n, row.u.len())?;
        crate::error::check_dim("trajectory V", self.n, row.v.len())?;
        self.rows.push(row);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    fn has_errors(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.errors.is_some())
    }

    fn header(&self, with_errors: bool) -> Vec<String> {
        let n = self.n;
        let mut h = vec!["t".to_string()];
        h.extend((1..=n).map(|i| format!("u_p_{i}")));
        h.extend((1..=n).map(|i| format!("u_q_{i}")));
        h.extend((1..=n).map(|i| format!("v_{i}")));
        h.extend(["f", "s", "c"].map(String::from));
        if with_errors {
            h.extend(["err_u", "err_f"].map(String::from));
        }
        h
    }

    /// Writes the record as CSV. Floats use the shortest representation that
    /// round-trips exactly, so identical runs give identical bytes.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let with_errors = self.has_errors();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header(with_errors))?;
        let mut fields = Vec::with_capacity(3 * self.n + 6);
        for row in &self.rows {
            fields.clear();
            fields.push(format!("{:e}", row.t));
            fields.extend(row.u.iter().chain(row.v.iter()).map(|x| format!("{x:e}")));
            fields.extend([row.f, row.s, row.c].iter().map(|x| format!("{x:e}")));
            if let (true, Some((eu, ef))) = (with_errors, row.errors) {
                fields.push(format!("{eu:e}"));
                fields.push(format!("{ef:e}"));
            }
            w.write_record(&fields)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.clone();
        let n = header.iter().filter(|h| h.starts_with("v_")).count();
        let with_errors = header.iter().any(|h| h == "err_u");
        let expected = 3 * n + 4 + if with_errors { 2 } else { 0 };
        if header.len() != expected {
            return Err(Error::InvalidSeries(format!(
                "unexpected trajectory header with {} columns",
                header.len()
            )));
        }
        let mut record = Self::new(n);
        for line in reader.records() {
            let line = line?;
            let vals = line
                .iter()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidSeries(e.to_string()))?;
            let k = 1 + 3 * n;
            record.rows.push(TrajectoryRow {
                t: vals[0],
                u: DVector::from_column_slice(&vals[1..1 + 2 * n]),
                v: DVector::from_column_slice(&vals[1 + 2 * n..k]),
                f: vals[k],
                s: vals[k + 1],
                c: vals[k + 2],
                errors: with_errors.then(|| (vals[k + 3], vals[k + 4])),
            });
        }
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64) -> TrajectoryRow {
        TrajectoryRow {
            t,
            u: DVector::from_vec(vec![0.1 + t, -1.0 / 3.0]),
            v: DVector::from_vec(vec![1.0 + 1e-17]),
            f: -0.4792,
            s: 2.0 * (-10.0 * t).exp(),
            c: 1e12,
            errors: None,
        }
    }

    #[test]
    fn empty_record_is_header_only() {
        let mut buf = Vec::new();
        TrajectoryRecord::new(2).write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,u_p_1,u_p_2,u_q_1,u_q_2,v_1,v_2,f,s,c\n"
        );
    }

    #[test]
    fn round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let mut rec = TrajectoryRecord::new(1);
        rec.push(row(0.0)).unwrap();
        rec.push(row(0.02)).unwrap();
        rec.export_csv(&path).unwrap();
        assert_eq!(TrajectoryRecord::read_csv(&path).unwrap(), rec);

        for r in rec.rows.iter_mut() {
            r.errors = Some((1e-5 / 3.0, 0.0));
        }
        rec.export_csv(&path).unwrap();
        let back = TrajectoryRecord::read_csv(&path).unwrap();
        assert_eq!(back, rec);
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .lines()
            .next()
            .unwrap()
            .ends_with(",err_u,err_f"));
    }

    #[test]
    fn grid_arithmetic() {
        let g = TimeGrid::new(0.0, 0.02, 60.0).unwrap();
        assert_eq!(g.len(), 3001);
        assert_eq!(TimeGrid::new(0.0, 0.02, 0.0).unwrap().len(), 1);
        assert!(TimeGrid::new(0.0, 0.02, 0.03).is_err());
    }
}
