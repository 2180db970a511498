//! Continuous-time reconstruction of sampled forecast and load series.
//!
//! Series are fitted with a monotone piecewise-cubic Hermite interpolant
//! (Fritsch–Carlson): knot slopes come from three-point differences and are
//! then limited so that monotone data stays monotone between knots. The fit
//! is C¹, which is what the time-derivative terms of the tracking dynamics
//! need.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl SampledSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidSeries(format!(
                "{} timestamps but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.len() < 2 {
            return Err(Error::TooFewSamples(times.len()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidSeries("timestamps must be strictly increasing".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite sample".into()));
        }
        Ok(Self { times, values })
    }

    /// Samples `start + k·spacing` for each value.
    pub fn uniform(start: f64, spacing: f64, values: Vec<f64>) -> Result<Self> {
        let times = (0..values.len()).map(|k| start + k as f64 * spacing).collect();
        Self::new(times, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Reads a profile CSV with header `t_s,value`.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| Error::ScenarioLoad {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for row in reader.deserialize::<ProfileRow>() {
            let row = row.map_err(|e| Error::ScenarioLoad {
                path: path.to_path_buf(),
                source: Box::new(e),
            })?;
            times.push(row.t_s);
            values.push(row.value);
        }
        Self::new(times, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["t_s", "value"])?;
        for (t, v) in self.times.iter().zip(&self.values) {
            writer.write_record([format!("{t}"), format!("{v:e}")])?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ProfileRow {
    t_s: f64,
    value: f64,
}

/// Piecewise cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolant {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

pub fn hermite_fit(series: &SampledSeries) -> Result<Interpolant> {
    let (t, y) = (&series.times, &series.values);
    let k = t.len();
    if k < 2 {
        return Err(Error::TooFewSamples(k));
    }
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..k - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

    let mut m = vec![0.0; k];
    if k == 2 {
        m[0] = delta[0];
        m[1] = delta[0];
    } else {
        m[0] = ((2.0 * h[0] + h[1]) * delta[0] - h[0] * delta[1]) / (h[0] + h[1]);
        let (a, b) = (h[k - 2], h[k - 3]);
        m[k - 1] = ((2.0 * a + b) * delta[k - 2] - a * delta[k - 3]) / (a + b);
        for i in 1..k - 1 {
            m[i] = if delta[i - 1] * delta[i] <= 0.0 {
                0.0
            } else {
                (h[i] * delta[i - 1] + h[i - 1] * delta[i]) / (h[i - 1] + h[i])
            };
        }
        // end slopes must not point against the adjacent secant
        if m[0] * delta[0] < 0.0 {
            m[0] = 0.0;
        }
        if m[k - 1] * delta[k - 2] < 0.0 {
            m[k - 1] = 0.0;
        }
    }

    for i in 0..k - 1 {
        if delta[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let alpha = m[i] / delta[i];
        let beta = m[i + 1] / delta[i];
        let r2 = alpha * alpha + beta * beta;
        if r2 > 9.0 {
            let tau = 3.0 / r2.sqrt();
            m[i] = tau * alpha * delta[i];
            m[i + 1] = tau * beta * delta[i];
        }
    }

    Ok(Interpolant {
        times: t.clone(),
        values: y.clone(),
        slopes: m,
    })
}

impl Interpolant {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn covers(&self, t: f64) -> bool {
        t >= self.start() - 1e-9 && t <= self.end() + 1e-9
    }

    /// Value and time derivative at `t`. Outside the fitted span the
    /// interpolant is held at the boundary value with zero derivative.
    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return (self.values[0], 0.0);
        }
        if t >= self.times[last] {
            return (self.values[last], 0.0);
        }
        let i = self.times.partition_point(|&tk| tk <= t) - 1;
        let h = self.times[i + 1] - self.times[i];
        let s = (t - self.times[i]) / h;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value =
            (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1;
        let dvalue = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        (value, dvalue)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_series() {
        let f = hermite_fit(&SampledSeries::uniform(0.0, 1.0, vec![1.0; 3]).unwrap()).unwrap();
        for t in [0.0, 0.3, 1.5, 2.0] {
            assert_eq!(f.eval_with_derivative(t), (1.0, 0.0));
        }
    }

    #[test]
    fn linear_series_is_reproduced() {
        let f = hermite_fit(&SampledSeries::uniform(0.0, 1.0, vec![0.0, 1.0, 2.0]).unwrap()).unwrap();
        for t in [0.1, 0.5, 1.0, 1.7] {
            let (v, d) = f.eval_with_derivative(t);
            assert_abs_diff_eq!(v, t, epsilon = 1e-14);
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-14);
        }
        let (v, d) = f.eval_with_derivative(0.5);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn clamped_outside_span() {
        let f = hermite_fit(&SampledSeries::uniform(0.0, 1.0, vec![0.0, 1.0, 3.0]).unwrap()).unwrap();
        assert_eq!(f.eval_with_derivative(5.0), (3.0, 0.0));
        assert_eq!(f.eval_with_derivative(-1.0), (0.0, 0.0));
        assert_eq!(f.value(1.0), 1.0);
    }

    #[test]
    fn sine_accuracy() {
        let values = (0..=60).map(|k| (0.1 * k as f64).sin()).collect();
        let f = hermite_fit(&SampledSeries::uniform(0.0, 1.0, values).unwrap()).unwrap();
        let worst = (0..=6000)
            .map(|k| {
                let t = k as f64 * 0.01;
                (f.value(t) - (0.1 * t).sin()).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "max error {worst}");
    }

    #[test]
    fn invalid_series() {
        assert!(matches!(
            SampledSeries::uniform(0.0, 1.0, vec![1.0]),
            Err(Error::TooFewSamples(1))
        ));
        assert!(SampledSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let s = SampledSeries::uniform(0.0, 1.0, vec![0.1, 0.123456789012345, 3e-7]).unwrap();
        s.write_csv(&path).unwrap();
        assert_eq!(SampledSeries::read_csv(&path).unwrap(), s);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t_s,value\n"));
    }
}
