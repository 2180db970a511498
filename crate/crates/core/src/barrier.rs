//! Log-barrier relaxation of the dispatch QP and its derivative blocks.
//!
//! ```text
//! Φ(u, s, t, c) = f(u, t) − (1/c) Σᵢ ln(s − fᵢ(u, t))
//! ```
//!
//! The constraint functions are affine in `u`, so every block has a closed
//! form in the four slack families
//! `h′ = s − u_min + u`, `h″ = s − u + u_max`, `g′ = s − V_min + V`,
//! `g″ = s − V + V_max`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::TimeVaryingQp;

/// Exponential slack and penalty schedules with saturation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierSchedule {
    pub s0: f64,
    pub slack_rate: f64,
    pub s_min: f64,
    pub c0: f64,
    pub penalty_rate: f64,
    pub c_max: f64,
}

impl Default for BarrierSchedule {
    fn default() -> Self {
        Self {
            s0: 2.0,
            slack_rate: 10.0,
            s_min: 1e-9,
            c0: 1.0,
            penalty_rate: 10.0,
            c_max: 1e12,
        }
    }
}

/// Start point of the slack decay: `s(t) = s0·exp(−λ_s (t − t0))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlackAnchor {
    pub t0: f64,
    pub s0: f64,
}

impl BarrierSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.s0 > 0.0
            && self.slack_rate >= 0.0
            && self.s_min > 0.0
            && self.c0 > 0.0
            && self.penalty_rate >= 0.0
            && self.c_max >= self.c0;
        if ok {
            Ok(())
        } else {
            Err(Error::Scenario(format!("invalid barrier schedule {self:?}")))
        }
    }

    pub fn anchor(&self) -> SlackAnchor {
        SlackAnchor { t0: 0.0, s0: self.s0 }
    }

    /// `(s, ds/dt)` at `t`.
    pub fn slack(&self, anchor: &SlackAnchor, t: f64) -> (f64, f64) {
        let s = anchor.s0 * (-self.slack_rate * (t - anchor.t0)).exp();
        if s <= self.s_min {
            (self.s_min, 0.0)
        } else {
            (s, -self.slack_rate * s)
        }
    }

    /// `(c, dc/dt)` at `t`.
    pub fn penalty(&self, t: f64) -> (f64, f64) {
        let exponent = self.penalty_rate * t;
        if exponent >= (self.c_max / self.c0).ln() {
            return (self.c_max, 0.0);
        }
        let c = self.c0 * exponent.exp();
        (c, self.penalty_rate * c)
    }
}

/// Derivative blocks of Φ at one state.
#[derive(Debug, Clone)]
pub struct BarrierBlocks {
    pub grad_u: DVector<f64>,
    pub hess_uu: DMatrix<f64>,
    pub grad_us: DVector<f64>,
    pub grad_uc: DVector<f64>,
    pub grad_ut: DVector<f64>,
    /// `s − fᵢ` for every constraint, in constraint order.
    pub margins: DVector<f64>,
}

/// `s − fᵢ(u, t)` for every constraint, or the first violated index.
pub fn margins(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64) -> Result<DVector<f64>> {
    let f = qp.constraint_values(u)?;
    let margins = f.map(|fi| s - fi);
    check_interior(&margins)?;
    Ok(margins)
}

fn check_interior(margins: &DVector<f64>) -> Result<()> {
    let (index, margin) = margins.argmin();
    if margin > 0.0 && margin.is_finite() {
        Ok(())
    } else {
        Err(Error::BarrierDomainViolation { index, margin })
    }
}

pub fn eval_phi(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64, c: f64) -> Result<f64> {
    let m = margins(qp, u, s)?;
    let log_sum: f64 = m.iter().map(|x| x.ln()).sum();
    Ok(qp.objective_value(u)? - log_sum / c)
}

pub fn eval_blocks(qp: &TimeVaryingQp, u: &DVector<f64>, s: f64, c: f64) -> Result<BarrierBlocks> {
    let (dim, n) = (qp.dim(), qp.node_count());
    let margins = margins(qp, u, s)?;
    let inv = margins.map(|x| 1.0 / x);
    let inv_lo = inv.rows(0, dim);
    let inv_hi = inv.rows(dim, dim);
    let inv_vmin = inv.rows(2 * dim, n);
    let inv_vmax = inv.rows(2 * dim + n, n);
    let d = qp.d_matrix();

    // Σ ∇fᵢ/(s − fᵢ) and Σ ∇fᵢ/(s − fᵢ)²
    let first = inv_hi - inv_lo + d.tr_mul(&(inv_vmax - inv_vmin));
    let sq_lo = inv_lo.map(|x| x * x);
    let sq_hi = inv_hi.map(|x| x * x);
    let sq_vmin = inv_vmin.map(|x| x * x);
    let sq_vmax = inv_vmax.map(|x| x * x);
    let second = &sq_hi - &sq_lo + d.tr_mul(&(&sq_vmax - &sq_vmin));

    let grad_u = qp.objective_gradient(u) + &first / c;

    let mut hess_uu = qp.objective_hessian();
    let v_weights = &sq_vmin + &sq_vmax;
    let mut scaled = d.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(v_weights.iter()) {
        row *= *w / c;
    }
    hess_uu += d.tr_mul(&scaled);
    for i in 0..dim {
        hess_uu[(i, i)] += (sq_lo[i] + sq_hi[i]) / c;
    }
    // exact symmetry for the Cholesky factorization
    let hess_uu = (&hess_uu + hess_uu.transpose()) * 0.5;

    let grad_us = -&second / c;
    let grad_uc = -&first / (c * c);

    let dw = d * &qp.w_rate;
    let mut grad_ut = &qp.d_rate + qp.sensitivity.dtd() * &qp.w_rate * qp.objective.gamma;
    let box_t = -(qp.bounds.lo_rate.component_mul(&sq_lo) + qp.bounds.hi_rate.component_mul(&sq_hi));
    let volt_t = d.tr_mul(&dw.component_mul(&v_weights));
    grad_ut += (box_t + volt_t) / c;

    Ok(BarrierBlocks {
        grad_u,
        hess_uu,
        grad_us,
        grad_uc,
        grad_ut,
        margins,
    })
}

#[cfg(test)]
pub(crate) mod test_support {
    use std::sync::Arc;

    use super::*;
    use crate::devices::ControlBox;
    use crate::feeder::{FeederTopology, Line, SensitivityModel};
    use crate::problem::QpObjective;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A random QP on a path feeder of `n` nodes with nonzero data rates.
    pub fn random_qp(n: usize, seed: u64) -> TimeVaryingQp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lines = (0..n)
            .map(|k| Line {
                from: if k == 0 { 0 } else { rng.random_range(0..k + 1) },
                to: k + 1,
                r: rng.random_range(0.01..0.2),
                x: rng.random_range(0.01..0.2),
            })
            .collect();
        let topo = FeederTopology::new(n, lines).unwrap();
        let sens = Arc::new(SensitivityModel::from_topology(&topo).unwrap());
        let dim = 2 * n;
        let mut bounds = ControlBox::zeros(dim);
        for i in 0..dim {
            let lo = rng.random_range(-0.5..0.0);
            let hi = rng.random_range(0.1..0.6);
            bounds.lo[i] = lo;
            bounds.hi[i] = hi;
            bounds.lo_rate[i] = rng.random_range(-0.2..0.2);
            bounds.hi_rate[i] = rng.random_range(-0.2..0.2);
        }
        let rvec = |rng: &mut ChaCha8Rng, len: usize, a: f64| DVector::from_fn(len, |_, _| rng.random_range(-a..a));
        TimeVaryingQp {
            t: 0.0,
            objective: QpObjective {
                k_diag: DVector::from_fn(dim, |_, _| rng.random_range(0.5..6.0)),
                d: rvec(&mut rng, dim, 2.0),
                gamma: rng.random_range(0.5..2.0),
                v_nom: 1.0,
            },
            d_rate: rvec(&mut rng, dim, 1.0),
            sensitivity: sens,
            bounds,
            w: rvec(&mut rng, dim, 0.1),
            w_rate: rvec(&mut rng, dim, 0.1),
            v_min: 0.95,
            v_max: 1.05,
        }
    }

    /// A point strictly inside the box and a slack that keeps it interior.
    pub fn interior_state(qp: &TimeVaryingQp, seed: u64) -> (DVector<f64>, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = DVector::from_fn(qp.dim(), |i, _| {
            let (lo, hi) = (qp.bounds.lo[i], qp.bounds.hi[i]);
            lo + (hi - lo) * rng.random_range(0.1..0.9)
        });
        let fmax = qp.constraint_values(&u).unwrap().max();
        (u, fmax.max(0.0) + rng.random_range(0.05..0.5))
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::test_support::*;
    use super::*;
    use crate::devices::ControlBox;
    use crate::feeder::SensitivityModel;
    use crate::problem::QpObjective;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// One node, f = P², P ∈ [−1, 1]; the Q face and voltage band give unit margins at u = 0.
    fn scalar_toy() -> TimeVaryingQp {
        let sens = Arc::new(
            SensitivityModel::new(DMatrix::from_element(1, 1, 0.1), DMatrix::from_element(1, 1, 0.1)).unwrap(),
        );
        let mut bounds = ControlBox::zeros(2);
        bounds.lo[0] = -1.0;
        bounds.hi[0] = 1.0;
        TimeVaryingQp {
            t: 0.0,
            objective: QpObjective {
                k_diag: DVector::from_vec(vec![2.0, 2.0]),
                d: DVector::zeros(2),
                gamma: 0.0,
                v_nom: 1.0,
            },
            d_rate: DVector::zeros(2),
            sensitivity: sens,
            bounds,
            w: DVector::zeros(2),
            w_rate: DVector::zeros(2),
            v_min: 1.0,
            v_max: 1.0,
        }
    }

    #[test]
    fn scalar_toy_value() {
        let phi = eval_phi(&scalar_toy(), &DVector::zeros(2), 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(phi, -2.0 * 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn unit_margins_leave_objective() {
        let mut qp = scalar_toy();
        qp.bounds.lo[0] = 0.0;
        qp.bounds.hi[0] = 0.0;
        let u = DVector::zeros(2);
        assert_eq!(eval_phi(&qp, &u, 1.0, 3.0).unwrap(), qp.objective_value(&u).unwrap());
    }

    #[test]
    fn boundary_with_zero_slack() {
        let qp = scalar_toy();
        let u = DVector::from_vec(vec![1.0, 0.0]);
        let err = eval_phi(&qp, &u, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::BarrierDomainViolation { .. }));
    }

    #[test]
    fn large_penalty_recovers_plain_gradient() {
        let qp = random_qp(3, 4);
        let (u, _) = interior_state(&qp, 5);
        let s = qp.constraint_values(&u).unwrap().max().max(0.0) + 1.0;
        let b = eval_blocks(&qp, &u, s, 1e12).unwrap();
        assert!((b.grad_u - qp.objective_gradient(&u)).amax() <= 1e-11);
    }

    #[test]
    fn schedules() {
        let sch = BarrierSchedule::default();
        let (s, ds) = sch.slack(&sch.anchor(), 0.1);
        assert_abs_diff_eq!(s, 2.0 * (-1f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(ds, -10.0 * s, epsilon = 1e-15);
        assert_eq!(sch.slack(&sch.anchor(), 5.0), (1e-9, 0.0));
        let (c, dc) = sch.penalty(1.0);
        assert_abs_diff_eq!(c, 10f64.exp(), epsilon = 1e-9);
        assert_abs_diff_eq!(dc, 10.0 * c, epsilon = 1e-8);
        assert_eq!(sch.penalty(100.0), (1e12, 0.0));
    }

    fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).norm() / b.norm().max(1e-8)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn blocks_match_finite_differences(seed in 0u64..10_000, n in 1usize..4, log_c in -1.0f64..2.0) {
            let qp = random_qp(n, seed);
            let (u, s) = interior_state(&qp, seed + 1);
            let c = 10f64.powf(log_c);
            let b = eval_blocks(&qp, &u, s, c).unwrap();
            let dim = qp.dim();

            let h = 1e-6;
            let fd_grad = DVector::from_fn(dim, |i, _| {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[i] += h;
                dn[i] -= h;
                (eval_phi(&qp, &up, s, c).unwrap() - eval_phi(&qp, &dn, s, c).unwrap()) / (2.0 * h)
            });
            prop_assert!(rel_err(&b.grad_u, &fd_grad) <= 1e-6);

            let grad = |u: &DVector<f64>, s: f64, c: f64, qp: &TimeVaryingQp| eval_blocks(qp, u, s, c).unwrap().grad_u;
            let fd_s = (grad(&u, s + h, c, &qp) - grad(&u, s - h, c, &qp)) / (2.0 * h);
            prop_assert!(rel_err(&b.grad_us, &fd_s) <= 1e-5);
            let hc = 1e-6 * c;
            let fd_c = (grad(&u, s, c + hc, &qp) - grad(&u, s, c - hc, &qp)) / (2.0 * hc);
            prop_assert!(rel_err(&b.grad_uc, &fd_c) <= 1e-5);

            let mut fd_hess = DMatrix::zeros(dim, dim);
            for j in 0..dim {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[j] += h;
                dn[j] -= h;
                fd_hess.set_column(j, &((grad(&up, s, c, &qp) - grad(&dn, s, c, &qp)) / (2.0 * h)));
            }
            prop_assert!((&b.hess_uu - &fd_hess).norm() / fd_hess.norm() <= 1e-6);

            // t-partial: advance every data term along its rate
            let shifted = |dt: f64| {
                let mut q = qp.clone();
                q.objective.d += &qp.d_rate * dt;
                q.w += &qp.w_rate * dt;
                q.bounds.lo += &qp.bounds.lo_rate * dt;
                q.bounds.hi += &qp.bounds.hi_rate * dt;
                q
            };
            let fd_t = (grad(&u, s, c, &shifted(h)) - grad(&u, s, c, &shifted(-h))) / (2.0 * h);
            prop_assert!(rel_err(&b.grad_ut, &fd_t) <= 1e-4);
        }

        #[test]
        fn hessian_dominates_cost(seed in 0u64..10_000, n in 1usize..4, log_c in -1.0f64..3.0) {
            let qp = random_qp(n, seed);
            let (u, s) = interior_state(&qp, seed + 7);
            let b = eval_blocks(&qp, &u, s, 10f64.powf(log_c)).unwrap();
            let mut diff = b.hess_uu.clone();
            for i in 0..qp.dim() {
                diff[(i, i)] -= qp.objective.k_diag[i];
            }
            let lam = diff.symmetric_eigenvalues().min();
            prop_assert!(lam >= -1e-10 * b.hess_uu.norm().max(1.0));
            prop_assert!(b.hess_uu.symmetric_eigenvalues().min() >= qp.objective.k_diag.min() - 1e-10);
        }
    }
}
