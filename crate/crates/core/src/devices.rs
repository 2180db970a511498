//! PV, wind and storage devices: feasible operating boxes and storage
//! energy bookkeeping.
//!
//! The control vector is `u = [P_g; Q_g]` over all `n` feeder nodes. Nodes
//! without a device keep a zero-width box so that every matrix keeps its
//! shape across events.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EssParams {
    /// Rated charging power (per-unit, > 0).
    pub p_ch_max: f64,
    /// Rated discharging power (per-unit, > 0).
    pub p_dis_max: f64,
    pub eta_c: f64,
    pub eta_d: f64,
    /// Energy bounds (per-unit · hour).
    pub w_min: f64,
    pub w_max: f64,
    /// Horizon over which the energy headroom is converted to a power limit (hours).
    #[serde(default = "default_energy_horizon")]
    pub horizon_h: f64,
}

fn default_energy_horizon() -> f64 {
    1.0
}

impl EssParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_ch_max > 0.0
            && self.p_dis_max > 0.0
            && self.eta_c > 0.0
            && self.eta_c <= 1.0
            && self.eta_d > 0.0
            && self.eta_d <= 1.0
            && self.w_min >= 0.0
            && self.w_min < self.w_max
            && self.horizon_h > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("invalid storage parameters {self:?}")))
        }
    }

    fn check_soc(&self, w: f64) -> Result<()> {
        if w < self.w_min || w > self.w_max || !w.is_finite() {
            return Err(Error::SocOutOfRange {
                w,
                w_min: self.w_min,
                w_max: self.w_max,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DeviceKind {
    Pv,
    Wt,
    Ess(EssParams),
}

impl DeviceKind {
    pub fn is_renewable(&self) -> bool {
        matches!(self, DeviceKind::Pv | DeviceKind::Wt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSpec {
    /// Feeder node, 1..=n.
    pub node: usize,
    pub kind: DeviceKind,
    pub cost_p: f64,
    pub cost_q: f64,
    /// Power-factor angle θ in radians (renewables only).
    pub pf_angle: f64,
}

impl DeviceSpec {
    pub fn renewable(node: usize, kind: DeviceKind, cost_p: f64, cost_q: f64, power_factor: f64) -> Self {
        Self {
            node,
            kind,
            cost_p,
            cost_q,
            pf_angle: power_factor.acos(),
        }
    }

    pub fn storage(node: usize, params: EssParams, cost_p: f64, cost_q: f64) -> Self {
        Self {
            node,
            kind: DeviceKind::Ess(params),
            cost_p,
            cost_q,
            pf_angle: 0.0,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.node == 0 || self.node > n {
            return Err(Error::Scenario(format!("device node {} outside 1..={n}", self.node)));
        }
        if !(self.cost_p > 0.0 && self.cost_q > 0.0) {
            return Err(Error::Scenario(format!(
                "device at node {} needs positive costs",
                self.node
            )));
        }
        match &self.kind {
            DeviceKind::Ess(params) => params.validate(),
            _ if self.pf_angle > 0.0 && self.pf_angle < std::f64::consts::FRAC_PI_2 => Ok(()),
            _ => Err(Error::Scenario(format!(
                "renewable at node {} needs a power-factor angle in (0, pi/2)",
                self.node
            ))),
        }
    }
}

/// Box bounds of one renewable device and their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewableBounds {
    pub p_lo: f64,
    pub p_hi: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub dp_lo: f64,
    pub dp_hi: f64,
    pub dq_lo: f64,
    pub dq_hi: f64,
}

/// `0 ≤ P ≤ P_av`, `|Q| ≤ P_av tan θ`.
pub fn renewable_bounds(spec: &DeviceSpec, p_av: f64, dp_av_dt: f64) -> Result<RenewableBounds> {
    if p_av < 0.0 || p_av.is_nan() {
        return Err(Error::NegativeAvailablePower(p_av));
    }
    let tan = spec.pf_angle.tan();
    Ok(RenewableBounds {
        p_lo: 0.0,
        p_hi: p_av,
        q_lo: -p_av * tan,
        q_hi: p_av * tan,
        dp_lo: 0.0,
        dp_hi: dp_av_dt,
        dq_lo: -dp_av_dt * tan,
        dq_hi: dp_av_dt * tan,
    })
}

/// Real-power limits of a storage unit holding `w0` (per-unit · hour).
pub fn ess_bounds(params: &EssParams, w0: f64) -> Result<(f64, f64)> {
    params.check_soc(w0)?;
    let p_lo = (-params.p_ch_max).max(-(params.w_max - w0) / (params.eta_c * params.horizon_h));
    let p_hi = params
        .p_dis_max
        .min(params.eta_d * (w0 - params.w_min) / params.horizon_h);
    Ok((p_lo, p_hi))
}

/// Time derivatives of [`ess_bounds`] when the stored energy moves at
/// `soc_rate`. Only the energy-limited faces move.
pub fn ess_bound_rates(params: &EssParams, w0: f64, soc_rate: f64) -> (f64, f64) {
    let energy_lo = -(params.w_max - w0) / (params.eta_c * params.horizon_h);
    let energy_hi = params.eta_d * (w0 - params.w_min) / params.horizon_h;
    let dlo = if energy_lo > -params.p_ch_max {
        soc_rate / (params.eta_c * params.horizon_h)
    } else {
        0.0
    };
    let dhi = if energy_hi < params.p_dis_max {
        params.eta_d * soc_rate / params.horizon_h
    } else {
        0.0
    };
    (dlo, dhi)
}

/// Stored energy after holding `p` (positive = discharge) for `dt_s` seconds.
pub fn ess_soc_step(params: &EssParams, w0: f64, p: f64, dt_s: f64) -> f64 {
    let hours = dt_s / 3600.0;
    let w = if p > 0.0 {
        w0 - p / params.eta_d * hours
    } else {
        w0 - params.eta_c * p * hours
    };
    w.clamp(params.w_min, params.w_max)
}

/// Per-device inputs at the query time, aligned with the device list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeviceInput {
    Renewable {
        p_av: f64,
        dp_av: f64,
    },
    /// `soc_rate` is dW/dt in per-unit · hour per second.
    Storage {
        soc: f64,
        soc_rate: f64,
    },
}

/// Bounds on `u = [P_g; Q_g]` and their time derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBox {
    pub lo: DVector<f64>,
    pub hi: DVector<f64>,
    pub lo_rate: DVector<f64>,
    pub hi_rate: DVector<f64>,
}

impl ControlBox {
    pub fn zeros(dim: usize) -> Self {
        Self {
            lo: DVector::zeros(dim),
            hi: DVector::zeros(dim),
            lo_rate: DVector::zeros(dim),
            hi_rate: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn width(&self) -> DVector<f64> {
        &self.hi - &self.lo
    }

    /// Widens every box narrower than `2 eps` to `[mid - eps, mid + eps]` so
    /// the barrier has a strict interior. Both faces of a widened box then
    /// move with the midpoint.
    pub fn widened(mut self, eps: f64) -> Self {
        for i in 0..self.dim() {
            if self.hi[i] - self.lo[i] < 2.0 * eps {
                let mid = 0.5 * (self.lo[i] + self.hi[i]);
                let rate = 0.5 * (self.lo_rate[i] + self.hi_rate[i]);
                self.lo[i] = mid - eps;
                self.hi[i] = mid + eps;
                self.lo_rate[i] = rate;
                self.hi_rate[i] = rate;
            }
        }
        self
    }

    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        u.zip_zip_map(&self.lo, &self.hi, |x, lo, hi| x.clamp(lo, hi))
    }
}

/// Stacks the device boxes into the global `[P_g; Q_g]` ordering for `n` nodes.
/// Storage units get no reactive capability.
pub fn assemble_box(n: usize, devices: &[DeviceSpec], inputs: &[DeviceInput]) -> Result<ControlBox> {
    if devices.len() != inputs.len() {
        return Err(Error::DimensionMismatch {
            context: "device inputs",
            expected: devices.len(),
            actual: inputs.len(),
        });
    }
    let mut bx = ControlBox::zeros(2 * n);
    let mut seen = vec![false; n + 1];
    for (dev, input) in devices.iter().zip(inputs) {
        if dev.node == 0 || dev.node > n {
            return Err(Error::Scenario(format!("device node {} outside 1..={n}", dev.node)));
        }
        if std::mem::replace(&mut seen[dev.node], true) {
            return Err(Error::DuplicateDeviceNode(dev.node));
        }
        let (ip, iq) = (dev.node - 1, n + dev.node - 1);
        match (&dev.kind, input) {
            (DeviceKind::Ess(params), DeviceInput::Storage { soc, soc_rate }) => {
                let (lo, hi) = ess_bounds(params, *soc)?;
                let (dlo, dhi) = ess_bound_rates(params, *soc, *soc_rate);
                bx.lo[ip] = lo;
                bx.hi[ip] = hi;
                bx.lo_rate[ip] = dlo;
                bx.hi_rate[ip] = dhi;
            }
            (kind, DeviceInput::Renewable { p_av, dp_av }) if kind.is_renewable() => {
                let b = renewable_bounds(dev, *p_av, *dp_av)?;
                bx.lo[ip] = b.p_lo;
                bx.hi[ip] = b.p_hi;
                bx.lo[iq] = b.q_lo;
                bx.hi[iq] = b.q_hi;
                bx.lo_rate[ip] = b.dp_lo;
                bx.hi_rate[ip] = b.dp_hi;
                bx.lo_rate[iq] = b.dq_lo;
                bx.hi_rate[iq] = b.dq_hi;
            }
            _ => {
                return Err(Error::Scenario(format!(
                    "input kind does not match device at node {}",
                    dev.node
                )))
            }
        }
    }
    Ok(bx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn paper_ess() -> EssParams {
        EssParams {
            p_ch_max: 0.02,
            p_dis_max: 0.02,
            eta_c: 0.9,
            eta_d: 0.9,
            w_min: 0.008,
            w_max: 0.032,
            horizon_h: 1.0,
        }
    }

    fn pv(node: usize) -> DeviceSpec {
        DeviceSpec::renewable(node, DeviceKind::Pv, 3.0, 1.0, 0.85)
    }

    #[test]
    fn renewable_zero_availability() {
        let b = renewable_bounds(&pv(1), 0.0, 0.0).unwrap();
        assert_eq!((b.p_lo, b.p_hi, b.q_lo, b.q_hi), (0.0, 0.0, 0.0, 0.0));
        assert!(matches!(
            renewable_bounds(&pv(1), -0.1, 0.0),
            Err(Error::NegativeAvailablePower(_))
        ));
    }

    #[test]
    fn renewable_reactive_limit() {
        let b = renewable_bounds(&pv(1), 1.0, -0.1).unwrap();
        assert_abs_diff_eq!(b.q_hi, 0.619744, epsilon = 1e-6);
        assert_abs_diff_eq!(b.q_lo, -b.q_hi, epsilon = 1e-15);
        assert_abs_diff_eq!(b.dq_hi, -0.0619744, epsilon = 1e-7);
        assert_abs_diff_eq!(b.dp_hi, -0.1, epsilon = 1e-15);
    }

    #[test]
    fn storage_bounds() {
        let p = paper_ess();
        assert_eq!(ess_bounds(&p, p.w_max).unwrap().0, 0.0);
        assert_eq!(ess_bounds(&p, p.w_min).unwrap().1, 0.0);
        let (lo, hi) = ess_bounds(&p, 0.02).unwrap();
        assert_abs_diff_eq!(hi, 0.0108, epsilon = 1e-15);
        assert_abs_diff_eq!(lo, -0.012 / 0.9, epsilon = 1e-15);
        assert!(matches!(ess_bounds(&p, 0.04), Err(Error::SocOutOfRange { .. })));
    }

    #[test]
    fn storage_bound_rates_match_differences() {
        let p = paper_ess();
        let (w, rate) = (0.02, 1e-6);
        let (dlo, dhi) = ess_bound_rates(&p, w, rate);
        let (lo0, hi0) = ess_bounds(&p, w).unwrap();
        let (lo1, hi1) = ess_bounds(&p, w + rate).unwrap();
        assert_abs_diff_eq!(dlo, lo1 - lo0, epsilon = 1e-15);
        assert_abs_diff_eq!(dhi, hi1 - hi0, epsilon = 1e-15);
        // power-limited faces do not move
        assert_eq!(ess_bound_rates(&p, 0.0315, 1e-6).1, 0.0);
    }

    #[test]
    fn storage_energy_update() {
        let p = paper_ess();
        assert_eq!(ess_soc_step(&p, 0.02, 0.0, 60.0), 0.02);
        assert_abs_diff_eq!(ess_soc_step(&p, 0.03, 0.018, 3600.0) - 0.03, -0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(ess_soc_step(&p, 0.01, -0.018, 3600.0) - 0.01, 0.0162, epsilon = 1e-15);
        // clamped at the energy limits
        assert_eq!(ess_soc_step(&p, 0.009, 0.02, 3600.0), p.w_min);
    }

    #[test]
    fn empty_and_single_device_boxes() {
        let bx = assemble_box(3, &[], &[]).unwrap();
        assert_eq!(bx.width(), DVector::zeros(6));

        let bx = assemble_box(3, &[pv(2)], &[DeviceInput::Renewable { p_av: 0.4, dp_av: 0.0 }]).unwrap();
        let nonzero: Vec<usize> = bx
            .width()
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
            .collect();
        // node 2 is index 1 in the P block and n + 1 = 4 in the Q block
        assert_eq!(nonzero, vec![1, 4]);
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let inputs = [DeviceInput::Renewable { p_av: 0.1, dp_av: 0.0 }; 2];
        assert!(matches!(
            assemble_box(3, &[pv(2), pv(2)], &inputs),
            Err(Error::DuplicateDeviceNode(2))
        ));
    }

    #[test]
    fn widening_only_touches_degenerate_entries() {
        let bx = assemble_box(2, &[pv(1)], &[DeviceInput::Renewable { p_av: 0.3, dp_av: 0.0 }])
            .unwrap()
            .widened(1e-6);
        assert_eq!(bx.lo[0], 0.0);
        assert_eq!(bx.hi[0], 0.3);
        assert_eq!(bx.lo[1], -1e-6);
        assert_eq!(bx.hi[1], 1e-6);
    }
}
