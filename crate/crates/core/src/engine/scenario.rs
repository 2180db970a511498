//! Scenario files: feeder, devices, profiles, events and solver settings.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::devices::{ess_bounds, DeviceKind, DeviceSpec};
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::estimator::EstimatorConfig;
use crate::feeder::{Feeder, FeederTopology, Line, MeasurementNoiseSpec};
use crate::metrics::Thresholds;
use crate::oracle::{DiscretePcConfig, PrimalDualConfig};
use crate::problem::{LoadProfile, ProblemData, ProblemParams};
use crate::record::TimeGrid;
use crate::signals::{hermite_fit, SampledSeries};

pub const BUILTIN_IEEE33: &str = "builtin:ieee33";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    /// Sensitivities re-estimated online from measurements.
    #[default]
    Estimated,
    /// Sensitivities from the rated line data.
    FixedRated,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimatorSection {
    #[serde(default)]
    pub mode: EstimatorMode,
    #[serde(flatten)]
    pub config: EstimatorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSection {
    /// Multiplier profile applied to the nominal feeder loads.
    pub profile: String,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn default_cost_p() -> f64 {
    3.0
}

fn default_cost_q() -> f64 {
    1.0
}

fn default_power_factor() -> f64 {
    0.85
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub node: usize,
    #[serde(flatten)]
    pub kind: DeviceKind,
    /// Normalized availability profile (renewables).
    #[serde(default)]
    pub profile: Option<String>,
    /// Rating in kW; the profile is scaled by it (renewables).
    #[serde(default)]
    pub rating_kw: Option<f64>,
    #[serde(default = "default_cost_p")]
    pub cost_p: f64,
    #[serde(default = "default_cost_q")]
    pub cost_q: f64,
    #[serde(default = "default_power_factor")]
    pub power_factor: f64,
    /// Initial stored energy in per-unit · hour (storage).
    #[serde(default)]
    pub soc0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TieLine {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    PvHalt {
        node: usize,
    },
    PvResume {
        node: usize,
    },
    Reconfigure {
        open: Vec<(usize, usize)>,
        close: Vec<TieLine>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_s: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BaselineSection {
    #[serde(default)]
    pub primal_dual: PrimalDualConfig,
    #[serde(default)]
    pub discrete_pc: DiscretePcConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// `builtin:ieee33` or a feeder file relative to the scenario file.
    #[serde(default = "builtin_feeder")]
    pub feeder: String,
    pub horizon_s: f64,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: MeasurementNoiseSpec,
    #[serde(default)]
    pub estimator: EstimatorSection,
    #[serde(default)]
    pub problem: ProblemParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    pub load: LoadSection,
    pub devices: Vec<DeviceEntry>,
    #[serde(default)]
    pub events: Vec<Event>,
    #[serde(default)]
    pub baselines: BaselineSection,
    #[serde(default)]
    pub thresholds: Thresholds,
    /// Rows before this time are excluded from steady-state statistics.
    #[serde(default = "default_burn_in")]
    pub burn_in_s: f64,
}

fn builtin_feeder() -> String {
    BUILTIN_IEEE33.into()
}

fn default_burn_in() -> f64 {
    2.0
}

/// A scenario with every file loaded and every reference resolved.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    pub feeder: Feeder,
    pub data: ProblemData,
    pub grid: TimeGrid,
    /// Initial stored energy per storage unit, in device order.
    pub soc0: Vec<f64>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let wrap = |e: Box<dyn std::error::Error + Send + Sync>| Error::ScenarioLoad {
            path: path.to_path_buf(),
            source: e,
        };
        let text = std::fs::read_to_string(path).map_err(|e| wrap(Box::new(e)))?;
        serde_json::from_str(&text).map_err(|e| wrap(Box::new(e)))
    }

    /// Loads and resolves a scenario file; relative references are taken
    /// from the file's directory.
    pub fn prepare_file(path: &Path) -> Result<PreparedScenario> {
        let scenario = Self::load(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        scenario.prepare(&base)
    }

    fn resolve(base: &Path, reference: &str) -> PathBuf {
        let p = Path::new(reference);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            base.join(p)
        }
    }

    pub fn prepare(mut self, base: &Path) -> Result<PreparedScenario> {
        // the discrete baseline shares the barrier path of the continuous method
        self.baselines.discrete_pc.schedule = self.integrator.schedule;
        self.baselines.discrete_pc.slack_margin = self.integrator.slack_margin;
        let feeder = if self.feeder == BUILTIN_IEEE33 {
            Feeder::ieee33()
        } else {
            Feeder::load(&Self::resolve(base, &self.feeder))?
        };
        let n = feeder.topology.node_count();
        let s_base_kw = feeder.base_mva * 1000.0;
        self.noise.validate()?;
        self.integrator.validate()?;
        if !(self.load.scale >= 0.0) {
            return Err(Error::Scenario("load scale must be nonnegative".into()));
        }

        let load_series = SampledSeries::read_csv(&Self::resolve(base, &self.load.profile))?;
        let load = LoadProfile {
            p_nom: &feeder.load_p * self.load.scale,
            q_nom: &feeder.load_q * self.load.scale,
            multiplier: hermite_fit(&load_series)?,
        };

        let mut devices = Vec::with_capacity(self.devices.len());
        let mut availability = Vec::with_capacity(self.devices.len());
        let mut soc0 = Vec::new();
        for entry in &self.devices {
            match entry.kind {
                DeviceKind::Ess(params) => {
                    let w0 = entry.soc0.unwrap_or(0.5 * (params.w_min + params.w_max));
                    ess_bounds(&params, w0)?;
                    soc0.push(w0);
                    devices.push(DeviceSpec::storage(entry.node, params, entry.cost_p, entry.cost_q));
                    availability.push(None);
                }
                kind => {
                    let (profile, rating) = match (&entry.profile, entry.rating_kw) {
                        (Some(p), Some(r)) if r >= 0.0 => (p, r),
                        _ => {
                            return Err(Error::Scenario(format!(
                                "renewable at node {} needs a profile and a nonnegative rating_kw",
                                entry.node
                            )))
                        }
                    };
                    if !(entry.power_factor > 0.0 && entry.power_factor < 1.0) {
                        return Err(Error::Scenario(format!(
                            "power factor of device at node {} must lie in (0, 1)",
                            entry.node
                        )));
                    }
                    let series = SampledSeries::read_csv(&Self::resolve(base, profile))?;
                    if let Some(v) = series.values().iter().find(|v| **v < 0.0) {
                        return Err(Error::NegativeAvailablePower(*v));
                    }
                    let scaled = SampledSeries::new(
                        series.times().to_vec(),
                        series.values().iter().map(|v| v * rating / s_base_kw).collect(),
                    )?;
                    devices.push(DeviceSpec::renewable(
                        entry.node,
                        kind,
                        entry.cost_p,
                        entry.cost_q,
                        entry.power_factor,
                    ));
                    availability.push(Some(hermite_fit(&scaled)?));
                }
            }
        }
        let data = ProblemData::new(n, devices, availability, load, self.problem)?;

        let grid = TimeGrid::new(self.start_s, self.integrator.tau, self.horizon_s)?;
        let (span_start, span_end) = data.span();
        if grid.start < span_start - 1e-9 || grid.end() > span_end + 1e-9 {
            return Err(Error::SignalOutOfRange {
                t: if grid.start < span_start {
                    grid.start
                } else {
                    grid.end()
                },
                start: span_start,
                end: span_end,
            });
        }
        self.validate_events(&feeder, &data, &grid)?;

        Ok(PreparedScenario {
            scenario: self,
            feeder,
            data,
            grid,
            soc0,
        })
    }

    fn validate_events(&self, feeder: &Feeder, data: &ProblemData, grid: &TimeGrid) -> Result<()> {
        let mut topology = feeder.topology.clone();
        let mut last = f64::NEG_INFINITY;
        for event in &self.events {
            if !(event.time_s > last) {
                return Err(Error::Scenario("event times must be strictly increasing".into()));
            }
            last = event.time_s;
            if event.time_s < grid.start || event.time_s > grid.end() {
                return Err(Error::Scenario(format!(
                    "event at t = {} s lies outside the horizon [{}, {}]",
                    event.time_s,
                    grid.start,
                    grid.end()
                )));
            }
            match &event.kind {
                EventKind::PvHalt { node } | EventKind::PvResume { node } => {
                    pv_device(data, *node)?;
                }
                EventKind::Reconfigure { open, close } => {
                    topology = reconfigure(feeder, &topology, open, close)?;
                }
            }
        }
        Ok(())
    }
}

/// Index of the PV unit at `node`.
pub fn pv_device(data: &ProblemData, node: usize) -> Result<usize> {
    data.device_at(node)
        .filter(|&i| matches!(data.devices()[i].kind, DeviceKind::Pv))
        .ok_or(Error::UnknownNode(node))
}

pub fn reconfigure(
    feeder: &Feeder,
    topology: &FeederTopology,
    open: &[(usize, usize)],
    close: &[TieLine],
) -> Result<FeederTopology> {
    let lines: Vec<Line> = close
        .iter()
        .map(|t| feeder.line_from_ohms(t.from, t.to, t.r_ohm, t.x_ohm))
        .collect();
    topology.reconfigured(open, &lines)
}

impl PreparedScenario {
    pub fn node_count(&self) -> usize {
        self.data.node_count()
    }

    /// Nominal loads as actually used (after scaling).
    pub fn nominal_load(&self) -> (&DVector<f64>, &DVector<f64>) {
        (&self.data.load().p_nom, &self.data.load().q_nom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_profile(dir: &Path, name: &str, value: f64) {
        SampledSeries::uniform(0.0, 10.0, vec![value; 11])
            .unwrap()
            .write_csv(&dir.join(name))
            .unwrap();
    }

    fn scenario_json(events: &str) -> String {
        format!(
            r#"{{
                "name": "t",
                "horizon_s": 1.0,
                "load": {{ "profile": "load.csv" }},
                "devices": [
                    {{ "node": 28, "type": "pv", "profile": "pv.csv", "rating_kw": 500 }},
                    {{ "node": 31, "type": "ess", "p_ch_max": 0.02, "p_dis_max": 0.02, "eta_c": 0.9,
                       "eta_d": 0.9, "w_min": 0.008, "w_max": 0.032, "soc0": 0.02 }}
                ],
                "events": {events}
            }}"#
        )
    }

    fn prepare(events: &str) -> Result<PreparedScenario> {
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path(), "load.csv", 0.5);
        write_profile(dir.path(), "pv.csv", 0.8);
        Scenario::from_json(&scenario_json(events))?.prepare(dir.path())
    }

    #[test]
    fn loads_devices_and_profiles() {
        let p = prepare("[]").unwrap();
        assert_eq!(p.grid.len(), 51);
        assert_eq!(p.soc0, vec![0.02]);
        let (p_av, dp) = p.data.availability(0, 0.5).unwrap();
        assert!((p_av - 0.04).abs() < 1e-15 && dp == 0.0);
    }

    #[test]
    fn event_validation() {
        let halt = r#"[{ "time_s": 0.5, "kind": "pv_halt", "node": 2 }]"#;
        assert!(matches!(prepare(halt), Err(Error::UnknownNode(2))));
        let late = r#"[{ "time_s": 5.0, "kind": "pv_halt", "node": 28 }]"#;
        assert!(matches!(prepare(late), Err(Error::Scenario(_))));
        let cycle = r#"[{ "time_s": 0.5, "kind": "reconfigure", "open": [], "close": [{ "from": 8, "to": 29, "r_ohm": 1, "x_ohm": 1 }] }]"#;
        assert!(matches!(prepare(cycle), Err(Error::NonRadialTopology(_))));
        let ok = r#"[{ "time_s": 0.5, "kind": "reconfigure", "open": [[5, 25]], "close": [{ "from": 8, "to": 29, "r_ohm": 1, "x_ohm": 1 }] }]"#;
        assert!(prepare(ok).is_ok());
    }

    #[test]
    fn missing_profile_is_a_load_error() {
        let err = Scenario::from_json(&scenario_json("[]"))
            .unwrap()
            .prepare(Path::new("/nonexistent"))
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
