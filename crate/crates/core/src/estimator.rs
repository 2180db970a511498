//! Online identification of the voltage sensitivities from measured
//! voltages and injections.
//!
//! With known resistance-to-reactance ratios `ζ_l` the linear model becomes
//! linear in the line reactances alone:
//!
//! ```text
//! V − 1 = Σ_l x_l · Y_l (ζ_l P + Q),    Y_l = M⁻ᵀ e_l e_lᵀ M⁻¹
//! ```
//!
//! so stacking a short window of snapshots gives an overdetermined least
//! squares problem `Z x = φ`.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::feeder::{build_incidence, FeederTopology, IncidenceMatrix, SensitivityModel};

/// Smallest accepted σ_min / σ_max of the regression matrix.
pub const RANK_TOLERANCE: f64 = 1e-8;
/// Floor applied to negative or vanishing reactance estimates (per-unit).
pub const REACTANCE_FLOOR: f64 = 1e-6;

/// Net injections and measured voltages at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub p: DVector<f64>,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

/// The `m + 1` most recent snapshots.
#[derive(Debug, Clone)]
pub struct MeasurementWindow {
    n: usize,
    capacity: usize,
    forgetting: f64,
    snapshots: VecDeque<Snapshot>,
}

impl MeasurementWindow {
    /// Window over `m + 1` snapshots of an `n`-node feeder with forgetting
    /// factor `eta ∈ (0, 1]`.
    pub fn new(n: usize, m: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(Error::Scenario(format!("forgetting factor {eta} outside (0, 1]")));
        }
        Ok(Self {
            n,
            capacity: m + 1,
            forgetting: eta,
            snapshots: VecDeque::with_capacity(m + 1),
        })
    }

    pub fn update(&mut self, snapshot: Snapshot) -> Result<()> {
        check_dim("snapshot P", self.n, snapshot.p.len())?;
        check_dim("snapshot Q", self.n, snapshot.q.len())?;
        check_dim("snapshot V", self.n, snapshot.v.len())?;
        if let Some(last) = self.snapshots.back() {
            if !(snapshot.t > last.t) {
                return Err(Error::InvalidSeries(format!(
                    "snapshot at t = {} s does not follow t = {} s",
                    snapshot.t, last.t
                )));
            }
        }
        if self.snapshots.len() == self.capacity {
            self.snapshots.pop_front();
        }
        self.snapshots.push_back(snapshot);
        Ok(())
    }

    /// Drops every snapshot (after a topology change).
    pub fn flush(&mut self) {
        self.snapshots.clear();
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.snapshots.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn forgetting(&self) -> f64 {
        self.forgetting
    }

    /// Oldest first.
    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.snapshots.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSystem {
    pub z: DMatrix<f64>,
    pub phi: DVector<f64>,
}

/// Stacks the window into `Z x = φ`, oldest snapshot first. A snapshot of
/// age `a` (0 for the newest) is weighted by `η^(a/2)`.
pub fn build_regression(
    window: &MeasurementWindow,
    incidence: &IncidenceMatrix,
    zeta: &DVector<f64>,
) -> Result<RegressionSystem> {
    if !window.is_full() {
        return Err(Error::WindowNotFull {
            have: window.len(),
            need: window.capacity(),
        });
    }
    let n = window.node_count();
    check_dim("regression incidence", n, incidence.size())?;
    check_dim("line ratios", n, zeta.len())?;
    let m_inv = incidence.inverse();
    let rows = n * window.capacity();
    let mut z = DMatrix::zeros(rows, n);
    let mut phi = DVector::zeros(rows);

    for (k, snap) in window.snapshots().enumerate() {
        let age = (window.capacity() - 1 - k) as f64;
        let weight = window.forgetting().powf(age / 2.0);
        let block = k * n;
        for l in 0..n {
            let row = m_inv.row(l);
            // e_lᵀ M⁻¹ χ_l with χ_l = ζ_l P + Q
            let proj = zeta[l] * row.dot(&snap.p.transpose()) + row.dot(&snap.q.transpose());
            let scale = weight * proj;
            for i in 0..n {
                z[(block + i, l)] = row[i] * scale;
            }
        }
        for i in 0..n {
            phi[block + i] = weight * (snap.v[i] - 1.0);
        }
    }
    Ok(RegressionSystem { z, phi })
}

#[derive(Debug, Clone)]
pub struct SensitivityEstimate {
    pub x: DVector<f64>,
    pub r: DVector<f64>,
    pub model: SensitivityModel,
    /// Number of reactances raised to the floor.
    pub clamped: usize,
}

/// Least-squares reactances from a single column-pivoted QR factorization
/// of `Z`, then `r = ζ ∘ x` and the sensitivity matrices they imply.
///
/// The excitation check compares the smallest and largest diagonal entries
/// of the pivoted triangular factor, which estimate σ_min / σ_max of `Z`.
pub fn solve_sensitivities(
    sys: &RegressionSystem,
    incidence: &IncidenceMatrix,
    zeta: &DVector<f64>,
) -> Result<SensitivityEstimate> {
    let n = incidence.size();
    check_dim("regression columns", n, sys.z.ncols())?;
    check_dim("regression rows", sys.z.nrows(), sys.phi.len())?;
    check_dim("line ratios", n, zeta.len())?;
    if sys.z.nrows() < n {
        return Err(Error::RankDeficientExcitation { ratio: 0.0 });
    }
    let qr = sys.z.clone().col_piv_qr();
    let r = qr.r();
    let diag = r.diagonal().abs();
    let ratio = if diag.max() > 0.0 { diag.min() / diag.max() } else { 0.0 };
    if !(ratio >= RANK_TOLERANCE) {
        return Err(Error::RankDeficientExcitation { ratio });
    }
    let qtb = qr.q().tr_mul(&sys.phi);
    let mut x = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::RankDeficientExcitation { ratio })?;
    qr.p().inv_permute_rows(&mut x);
    let mut clamped = 0;
    for xi in x.iter_mut() {
        if *xi < REACTANCE_FLOOR {
            *xi = REACTANCE_FLOOR;
            clamped += 1;
        }
    }
    if clamped > 0 {
        log::warn!("{clamped} estimated reactances raised to the floor {REACTANCE_FLOOR:e}");
    }
    let r = zeta.component_mul(&x);
    let model = SensitivityModel::from_lines(incidence, &r, &x)?;
    Ok(SensitivityEstimate { x, r, model, clamped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Window length `m` (the window holds `m + 1` snapshots).
    pub window: usize,
    pub forgetting: f64,
    /// Re-estimate every `cadence` observations.
    pub cadence: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: 1,
            forgetting: 1.0,
            cadence: 1,
        }
    }
}

/// Sliding-window estimator that keeps the last good model.
///
/// Until the first window fills (and after every topology change) the model
/// is the one implied by the rated line data.
#[derive(Debug, Clone)]
pub struct OnlineEstimator {
    config: EstimatorConfig,
    window: MeasurementWindow,
    incidence: IncidenceMatrix,
    zeta: DVector<f64>,
    current: Arc<SensitivityModel>,
    current_x: DVector<f64>,
    observations: usize,
    solves: usize,
    failures: usize,
}

impl OnlineEstimator {
    pub fn new(rated: &FeederTopology, config: EstimatorConfig) -> Result<Self> {
        if config.cadence == 0 {
            return Err(Error::Scenario("estimator cadence must be at least 1".into()));
        }
        let incidence = build_incidence(rated)?;
        let current = Arc::new(SensitivityModel::from_lines(
            &incidence,
            &rated.resistances(),
            &rated.reactances(),
        )?);
        Ok(Self {
            window: MeasurementWindow::new(rated.node_count(), config.window, config.forgetting)?,
            config,
            incidence,
            zeta: rated.ratios(),
            current,
            current_x: rated.reactances(),
            observations: 0,
            solves: 0,
            failures: 0,
        })
    }

    pub fn model(&self) -> Arc<SensitivityModel> {
        self.current.clone()
    }

    pub fn reactances(&self) -> &DVector<f64> {
        &self.current_x
    }

    /// Least-squares solves performed so far.
    pub fn solves(&self) -> usize {
        self.solves
    }

    /// Solves rejected for poor excitation (the previous model was kept).
    pub fn failures(&self) -> usize {
        self.failures
    }

    /// Snapshots currently held in the window.
    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Adds a snapshot and re-estimates when due. Returns whether the model
    /// changed.
    pub fn observe(&mut self, snapshot: Snapshot) -> Result<bool> {
        self.window.update(snapshot)?;
        self.observations += 1;
        if !self.window.is_full() || !self.observations.is_multiple_of(self.config.cadence) {
            return Ok(false);
        }
        let sys = build_regression(&self.window, &self.incidence, &self.zeta)?;
        self.solves += 1;
        match solve_sensitivities(&sys, &self.incidence, &self.zeta) {
            Ok(est) => {
                self.current = Arc::new(est.model);
                self.current_x = est.x;
                Ok(true)
            }
            Err(Error::RankDeficientExcitation { ratio }) => {
                self.failures += 1;
                log::warn!("poor excitation (sigma ratio {ratio:.3e}); keeping the previous estimate");
                Ok(false)
            }
            Err(e) => Err(e),
        }
    }

    /// Switches to a new rated topology and empties the window.
    pub fn reset_topology(&mut self, rated: &FeederTopology) -> Result<()> {
        check_dim("reconfigured topology", self.window.node_count(), rated.node_count())?;
        self.incidence = build_incidence(rated)?;
        self.zeta = rated.ratios();
        self.current = Arc::new(SensitivityModel::from_lines(
            &self.incidence,
            &rated.resistances(),
            &rated.reactances(),
        )?);
        self.current_x = rated.reactances();
        self.window.flush();
        self.observations = 0;
        Ok(())
    }
}
