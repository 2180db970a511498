//! Snapshot assembly of the time-varying dispatch QP
//!
//! ```text
//! min_u  ½ uᵀK u + d(t)ᵀu + (γ/2)‖V − V_nom‖²
//! s.t.   u_min(t) ≤ u ≤ u_max(t)
//!        V_min ≤ V = 1 + D u + D W(t) ≤ V_max
//! ```
//!
//! with `u = [P_g; Q_g]`, `D = [A B]` and `W(t) = [P_L(t); Q_L(t)]` the
//! uncontrolled injections (loads enter as negative injections).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::devices::{assemble_box, ess_soc_step, ControlBox, DeviceInput, DeviceKind, DeviceSpec};
use crate::error::{check_dim, Error, Result};
use crate::feeder::SensitivityModel;
use crate::signals::Interpolant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub gamma: f64,
    pub v_nom: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Costs applied at nodes without a device.
    pub default_cost_p: f64,
    pub default_cost_q: f64,
    /// Half-width given to degenerate boxes.
    pub eps_box: f64,
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            v_nom: 1.0,
            v_min: 0.95,
            v_max: 1.05,
            default_cost_p: 3.0,
            default_cost_q: 1.0,
            eps_box: 1e-6,
        }
    }
}

impl ProblemParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma > 0.0
            && self.v_min < self.v_nom
            && self.v_nom < self.v_max
            && self.default_cost_p > 0.0
            && self.default_cost_q > 0.0
            && self.eps_box > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("invalid problem parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpObjective {
    /// Diagonal of K: `2 C_p` for the P block, `2 C_q` for the Q block.
    pub k_diag: DVector<f64>,
    pub d: DVector<f64>,
    pub gamma: f64,
    pub v_nom: f64,
}

/// The dispatch QP at one instant, together with the time derivatives of its
/// data (`∇_t d`, `∇_t W`, and the bound rates inside `bounds`).
#[derive(Debug, Clone)]
pub struct TimeVaryingQp {
    pub t: f64,
    pub objective: QpObjective,
    pub d_rate: DVector<f64>,
    pub sensitivity: Arc<SensitivityModel>,
    pub bounds: ControlBox,
    pub w: DVector<f64>,
    pub w_rate: DVector<f64>,
    pub v_min: f64,
    pub v_max: f64,
}

impl TimeVaryingQp {
    pub fn node_count(&self) -> usize {
        self.sensitivity.node_count()
    }

    /// Dimension of `u` (2n).
    pub fn dim(&self) -> usize {
        2 * self.node_count()
    }

    /// Number of scalar inequality constraints (6n: both faces of the box and
    /// of the voltage band).
    pub fn constraint_count(&self) -> usize {
        6 * self.node_count()
    }

    pub fn d_matrix(&self) -> &DMatrix<f64> {
        self.sensitivity.d()
    }

    /// `V = 1 + D (u + W)`.
    pub fn voltage(&self, u: &DVector<f64>) -> DVector<f64> {
        self.sensitivity.voltage_stacked(&(u + &self.w))
    }

    pub fn objective_value(&self, u: &DVector<f64>) -> Result<f64> {
        check_dim("objective_value u", self.dim(), u.len())?;
        let obj = &self.objective;
        let quad = 0.5 * u.iter().zip(obj.k_diag.iter()).map(|(x, k)| k * x * x).sum::<f64>();
        let mut dev = self.voltage(u);
        dev.add_scalar_mut(-obj.v_nom);
        Ok(quad + obj.d.dot(u) + 0.5 * obj.gamma * dev.norm_squared())
    }

    /// `K u + d + γ Dᵀ(V − V_nom)`.
    pub fn objective_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let obj = &self.objective;
        let mut dev = self.voltage(u);
        dev.add_scalar_mut(-obj.v_nom);
        let mut g = self.d_matrix().tr_mul(&dev) * obj.gamma;
        g += obj.k_diag.component_mul(u) + &obj.d;
        g
    }

    /// `K + γ DᵀD`.
    pub fn objective_hessian(&self) -> DMatrix<f64> {
        let mut h = self.sensitivity.dtd() * self.objective.gamma;
        for (i, k) in self.objective.k_diag.iter().enumerate() {
            h[(i, i)] += k;
        }
        h
    }

    /// `[u_min − u; u − u_max; V_min − V; V − V_max]`; `u` is feasible iff
    /// every entry is ≤ 0.
    pub fn constraint_values(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("constraint_values u", self.dim(), u.len())?;
        Ok(self.constraints_with_voltage(u, &self.voltage(u)))
    }

    pub(crate) fn constraints_with_voltage(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let (m, n) = (self.dim(), self.node_count());
        let mut f = DVector::zeros(6 * n);
        for i in 0..m {
            f[i] = self.bounds.lo[i] - u[i];
            f[m + i] = u[i] - self.bounds.hi[i];
        }
        for i in 0..n {
            f[2 * m + i] = self.v_min - v[i];
            f[2 * m + n + i] = v[i] - self.v_max;
        }
        f
    }

    /// Index and value of the largest constraint function.
    pub fn max_constraint(&self, u: &DVector<f64>) -> Result<(usize, f64)> {
        let f = self.constraint_values(u)?;
        Ok(f.argmax())
    }

    /// The same snapshot with every time derivative set to zero.
    pub fn frozen(mut self) -> Self {
        self.d_rate.fill(0.0);
        self.w_rate.fill(0.0);
        self.bounds.lo_rate.fill(0.0);
        self.bounds.hi_rate.fill(0.0);
        self
    }

    /// Same data with another voltage model (e.g. the true feeder instead of
    /// an estimate).
    pub fn with_sensitivity(&self, sensitivity: Arc<SensitivityModel>) -> Result<Self> {
        check_dim("with_sensitivity", self.node_count(), sensitivity.node_count())?;
        Ok(Self {
            sensitivity,
            ..self.clone()
        })
    }
}

/// Stored energy of every storage unit (device order) and its rate of
/// change in per-unit · hour per second.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StorageLevels {
    pub energy: Vec<f64>,
    pub rate: Vec<f64>,
}

impl StorageLevels {
    pub fn at_rest(energy: Vec<f64>) -> Self {
        let rate = vec![0.0; energy.len()];
        Self { energy, rate }
    }

    pub fn len(&self) -> usize {
        self.energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energy.is_empty()
    }

    /// Levels `dt` seconds later at constant rates.
    pub fn advanced(&self, dt: f64) -> Self {
        Self {
            energy: self.energy.iter().zip(&self.rate).map(|(w, r)| w + r * dt).collect(),
            rate: self.rate.clone(),
        }
    }
}

/// Anything that can produce the QP snapshot at a given time.
pub trait QpProvider {
    fn qp_at(&self, t: f64, storage: &StorageLevels) -> Result<TimeVaryingQp>;

    /// Stored energy after holding setpoints `u` for `dt` seconds, with the
    /// average rate over that interval.
    fn advance_storage(&self, storage: &StorageLevels, _u: &DVector<f64>, _dt: f64) -> StorageLevels {
        storage.clone()
    }
}

/// A time-invariant problem: the same frozen snapshot at every instant.
#[derive(Debug, Clone)]
pub struct StaticQp(pub TimeVaryingQp);

impl StaticQp {
    pub fn new(qp: TimeVaryingQp) -> Self {
        Self(qp.frozen())
    }
}

impl QpProvider for StaticQp {
    fn qp_at(&self, t: f64, _storage: &StorageLevels) -> Result<TimeVaryingQp> {
        let mut qp = self.0.clone();
        qp.t = t;
        Ok(qp)
    }
}

/// Nominal loads scaled by a common multiplier profile (constant power factor).
#[derive(Debug, Clone)]
pub struct LoadProfile {
    pub p_nom: DVector<f64>,
    pub q_nom: DVector<f64>,
    pub multiplier: Interpolant,
}

/// Everything needed to assemble the QP at any time except the voltage
/// model and the per-run state (storage energy, halted devices).
#[derive(Debug, Clone)]
pub struct ProblemData {
    n: usize,
    devices: Vec<DeviceSpec>,
    /// Available-power profile per device; `None` for storage.
    availability: Vec<Option<Interpolant>>,
    load: LoadProfile,
    params: ProblemParams,
}

impl ProblemData {
    pub fn new(
        n: usize,
        devices: Vec<DeviceSpec>,
        availability: Vec<Option<Interpolant>>,
        load: LoadProfile,
        params: ProblemParams,
    ) -> Result<Self> {
        params.validate()?;
        check_dim("device profiles", devices.len(), availability.len())?;
        check_dim("nominal real load", n, load.p_nom.len())?;
        check_dim("nominal reactive load", n, load.q_nom.len())?;
        let mut seen = vec![false; n + 1];
        for (dev, profile) in devices.iter().zip(&availability) {
            dev.validate(n)?;
            if std::mem::replace(&mut seen[dev.node], true) {
                return Err(Error::DuplicateDeviceNode(dev.node));
            }
            if dev.kind.is_renewable() != profile.is_some() {
                return Err(Error::Scenario(format!(
                    "device at node {}: renewables need an availability profile, storage must not have one",
                    dev.node
                )));
            }
        }
        Ok(Self {
            n,
            devices,
            availability,
            load,
            params,
        })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn devices(&self) -> &[DeviceSpec] {
        &self.devices
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn load(&self) -> &LoadProfile {
        &self.load
    }

    /// Device index of each storage unit, in the order used for `soc` slices.
    pub fn storage_devices(&self) -> Vec<usize> {
        self.devices
            .iter()
            .enumerate()
            .filter(|(_, d)| matches!(d.kind, DeviceKind::Ess(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn device_at(&self, node: usize) -> Option<usize> {
        self.devices.iter().position(|d| d.node == node)
    }

    /// Common time span covered by every profile.
    pub fn span(&self) -> (f64, f64) {
        let mut start = self.load.multiplier.start();
        let mut end = self.load.multiplier.end();
        for f in self.availability.iter().flatten() {
            start = start.max(f.start());
            end = end.min(f.end());
        }
        (start, end)
    }

    /// Available power and its derivative for device `index` at `t`.
    pub fn availability(&self, index: usize, t: f64) -> Option<(f64, f64)> {
        self.availability[index].as_ref().map(|f| f.eval_with_derivative(t))
    }

    /// Assembles the QP at `t`. `halted[i]` forces renewable `i` to zero
    /// availability (and zero availability rate).
    pub fn assemble(
        &self,
        sensitivity: Arc<SensitivityModel>,
        t: f64,
        storage: &StorageLevels,
        halted: &[bool],
    ) -> Result<TimeVaryingQp> {
        let n = self.n;
        let n_storage = self.storage_devices().len();
        check_dim("storage energy", n_storage, storage.energy.len())?;
        check_dim("storage rate", n_storage, storage.rate.len())?;
        check_dim("assemble sensitivity", n, sensitivity.node_count())?;
        check_dim("halted flags", self.devices.len(), halted.len())?;
        let (start, end) = self.span();
        if t < start - 1e-9 || t > end + 1e-9 {
            return Err(Error::SignalOutOfRange { t, start, end });
        }

        let p = &self.params;
        let mut k_diag = DVector::zeros(2 * n);
        k_diag.rows_mut(0, n).fill(2.0 * p.default_cost_p);
        k_diag.rows_mut(n, n).fill(2.0 * p.default_cost_q);
        let mut d = DVector::zeros(2 * n);
        let mut d_rate = DVector::zeros(2 * n);
        let mut inputs = Vec::with_capacity(self.devices.len());
        let mut slot = 0;

        for (i, dev) in self.devices.iter().enumerate() {
            let j = dev.node - 1;
            k_diag[j] = 2.0 * dev.cost_p;
            k_diag[n + j] = 2.0 * dev.cost_q;
            match self.availability(i, t) {
                Some((p_av, dp_av)) => {
                    let (p_av, dp_av) = if halted[i] { (0.0, 0.0) } else { (p_av, dp_av) };
                    // target power is the available power for renewables
                    d[j] = -2.0 * dev.cost_p * p_av;
                    d_rate[j] = -2.0 * dev.cost_p * dp_av;
                    inputs.push(DeviceInput::Renewable { p_av, dp_av });
                }
                None => {
                    let mut soc = storage.energy[slot];
                    if let DeviceKind::Ess(ess) = &dev.kind {
                        // absorb round-off from interpolating the energy within a step
                        if soc > ess.w_max && soc - ess.w_max <= 1e-12 {
                            soc = ess.w_max;
                        } else if soc < ess.w_min && ess.w_min - soc <= 1e-12 {
                            soc = ess.w_min;
                        }
                    }
                    inputs.push(DeviceInput::Storage {
                        soc,
                        soc_rate: storage.rate[slot],
                    });
                    slot += 1;
                }
            }
        }
        let bounds = assemble_box(n, &self.devices, &inputs)?.widened(p.eps_box);

        let (m, dm) = self.load.multiplier.eval_with_derivative(t);
        let mut w = DVector::zeros(2 * n);
        let mut w_rate = DVector::zeros(2 * n);
        w.rows_mut(0, n).copy_from(&(&self.load.p_nom * -m));
        w.rows_mut(n, n).copy_from(&(&self.load.q_nom * -m));
        w_rate.rows_mut(0, n).copy_from(&(&self.load.p_nom * -dm));
        w_rate.rows_mut(n, n).copy_from(&(&self.load.q_nom * -dm));

        Ok(TimeVaryingQp {
            t,
            objective: QpObjective {
                k_diag,
                d,
                gamma: p.gamma,
                v_nom: p.v_nom,
            },
            d_rate,
            sensitivity,
            bounds,
            w,
            w_rate,
            v_min: p.v_min,
            v_max: p.v_max,
        })
    }

    pub fn advance_storage(&self, storage: &StorageLevels, u: &DVector<f64>, dt: f64) -> StorageLevels {
        let mut next = storage.clone();
        for (slot, &dev) in self.storage_devices().iter().enumerate() {
            if let DeviceKind::Ess(params) = &self.devices[dev].kind {
                let p = u[self.devices[dev].node - 1];
                next.energy[slot] = ess_soc_step(params, storage.energy[slot], p, dt);
                next.rate[slot] = (next.energy[slot] - storage.energy[slot]) / dt;
            }
        }
        next
    }
}

/// `ProblemData` bound to one voltage model and device status.
#[derive(Debug, Clone)]
pub struct ScenarioQp<'a> {
    pub data: &'a ProblemData,
    pub sensitivity: Arc<SensitivityModel>,
    pub halted: &'a [bool],
}

impl QpProvider for ScenarioQp<'_> {
    fn qp_at(&self, t: f64, storage: &StorageLevels) -> Result<TimeVaryingQp> {
        self.data.assemble(self.sensitivity.clone(), t, storage, self.halted)
    }

    fn advance_storage(&self, storage: &StorageLevels, u: &DVector<f64>, dt: f64) -> StorageLevels {
        self.data.advance_storage(storage, u, dt)
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::feeder::{FeederTopology, Line};
    use crate::signals::{hermite_fit, SampledSeries};

    pub fn two_bus_sensitivity() -> Arc<SensitivityModel> {
        let t = FeederTopology::new(
            1,
            vec![Line {
                from: 0,
                to: 1,
                r: 0.1,
                x: 0.05,
            }],
        )
        .unwrap();
        Arc::new(SensitivityModel::from_topology(&t).unwrap())
    }

    pub fn constant(value: f64) -> Interpolant {
        hermite_fit(&SampledSeries::uniform(0.0, 100.0, vec![value; 3]).unwrap()).unwrap()
    }

    /// One PV (C_p = 3, C_q = 1, pf 0.85) at node 1 of a 2-bus feeder, no load.
    pub fn two_bus_pv(p_av: Interpolant) -> ProblemData {
        let dev = DeviceSpec::renewable(1, DeviceKind::Pv, 3.0, 1.0, 0.85);
        let load = LoadProfile {
            p_nom: DVector::zeros(1),
            q_nom: DVector::zeros(1),
            multiplier: constant(0.0),
        };
        ProblemData::new(1, vec![dev], vec![Some(p_av)], load, ProblemParams::default()).unwrap()
    }
}
