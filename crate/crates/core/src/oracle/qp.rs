//! Dense primal-dual interior-point solver for convex inequality QPs
//!
//! ```text
//! min ½ xᵀH x + gᵀx + const   s.t.  A x ≤ b
//! ```
//!
//! using Mehrotra's predictor-corrector on the slack form `A x + w = b`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::problem::TimeVaryingQp;

pub const STATIONARITY_TOL: f64 = 1e-8;
pub const PRIMAL_TOL: f64 = 1e-12;
pub const COMPLEMENTARITY_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityQp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub constant: f64,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl InequalityQp {
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x) + self.constant
    }

    /// Box-constrained QP `lo ≤ x ≤ hi`.
    pub fn with_box(h: DMatrix<f64>, g: DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Self {
        let n = g.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = -1.0;
            b[i] = -lo[i];
            a[(n + i, i)] = 1.0;
            b[n + i] = hi[i];
        }
        Self {
            h,
            g,
            constant: 0.0,
            a,
            b,
        }
    }

    /// The dispatch QP in inequality form; rows follow the constraint order
    /// of [`TimeVaryingQp::constraint_values`].
    pub fn from_dispatch(qp: &TimeVaryingQp) -> Self {
        let (dim, n) = (qp.dim(), qp.node_count());
        let d = qp.d_matrix();
        let obj = &qp.objective;
        // f = ½uᵀKu + dᵀu + γ/2‖D u + e‖², e = 1 + D W − V_nom
        let mut e = d * &qp.w;
        e.add_scalar_mut(1.0 - obj.v_nom);
        let h = qp.objective_hessian();
        let g = &obj.d + d.tr_mul(&e) * obj.gamma;
        let constant = 0.5 * obj.gamma * e.norm_squared();

        let mut a = DMatrix::zeros(6 * n, dim);
        let mut b = DVector::zeros(6 * n);
        for i in 0..dim {
            a[(i, i)] = -1.0;
            b[i] = -qp.bounds.lo[i];
            a[(dim + i, i)] = 1.0;
            b[dim + i] = qp.bounds.hi[i];
        }
        // V = 1 + D W + D u
        let v0 = &e.add_scalar(obj.v_nom);
        for i in 0..n {
            let row = d.row(i);
            a.row_mut(2 * dim + i).copy_from(&(-row));
            b[2 * dim + i] = v0[i] - qp.v_min;
            a.row_mut(2 * dim + n + i).copy_from(&row);
            b[2 * dim + n + i] = qp.v_max - v0[i];
        }
        Self { h, g, constant, a, b }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// One multiplier per inequality row.
    pub multipliers: DVector<f64>,
    pub objective: f64,
    /// `‖H x + g + Aᵀz‖∞`.
    pub stationarity: f64,
    /// `max(A x − b)₊`.
    pub primal_infeasibility: f64,
    /// `max |zᵢ (b − A x)ᵢ|`.
    pub complementarity: f64,
    pub iterations: usize,
}

/// Residuals of the KKT conditions at `(x, z)`.
fn kkt(qp: &InequalityQp, x: &DVector<f64>, z: &DVector<f64>) -> (f64, f64, f64) {
    let stat = (&qp.h * x + &qp.g + qp.a.tr_mul(z)).amax();
    let slack = &qp.b - &qp.a * x;
    let primal = slack.iter().fold(0.0f64, |m, s| m.max(-s));
    let comp = slack
        .iter()
        .zip(z.iter())
        .fold(0.0f64, |m, (s, zi)| m.max((s * zi).abs()));
    (stat, primal, comp)
}

fn step_to_boundary(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(1.0, f64::min)
}

pub fn solve_inequality_qp(qp: &InequalityQp, warm_start: Option<&DVector<f64>>) -> Result<QpSolution> {
    let n = qp.g.len();
    let m = qp.b.len();
    check_dim("QP Hessian", n, qp.h.nrows())?;
    check_dim("QP constraint columns", n, qp.a.ncols())?;
    check_dim("QP constraint rows", m, qp.a.nrows())?;
    if let Some(x0) = warm_start {
        check_dim("QP warm start", n, x0.len())?;
    }

    let mut x = warm_start.cloned().unwrap_or_else(|| DVector::zeros(n));
    let mut w = (&qp.b - &qp.a * &x).map(|s| s.max(1.0));
    let mut z = DVector::from_element(m, 1.0);
    let scale = 1.0 + qp.g.amax().max(qp.b.amax()).max(qp.h.amax());

    for iter in 0..MAX_ITERATIONS {
        let (stat, primal, comp) = kkt(qp, &x, &z);
        if stat <= STATIONARITY_TOL && primal <= PRIMAL_TOL && comp <= COMPLEMENTARITY_TOL {
            return Ok(QpSolution {
                objective: qp.objective(&x),
                u: x,
                multipliers: z,
                stationarity: stat,
                primal_infeasibility: primal,
                complementarity: comp,
                iterations: iter,
            });
        }
        if z.amax() > 1e14 * scale {
            break;
        }

        let r_d = &qp.h * &x + &qp.g + qp.a.tr_mul(&z);
        let r_p = &qp.a * &x + &w - &qp.b;
        let mu = w.dot(&z) / m as f64;
        let sigma_w = z.component_div(&w);

        let mut kmat = qp.h.clone();
        let mut scaled = qp.a.clone();
        for (mut row, s) in scaled.row_iter_mut().zip(sigma_w.iter()) {
            row *= *s;
        }
        kmat += qp.a.tr_mul(&scaled);
        let kmat = (&kmat + kmat.transpose()) * 0.5;
        let chol = kmat
            .cholesky()
            .ok_or_else(|| Error::Infeasible("normal-equation matrix lost definiteness".into()))?;

        // (H + AᵀΣA) dx = −r_d − Aᵀ W⁻¹(r_c + Z r_p)
        let solve = |r_c: &DVector<f64>| {
            let t = (r_c + z.component_mul(&r_p)).component_div(&w);
            let dx = chol.solve(&(-&r_d - qp.a.tr_mul(&t)));
            let dw = -&r_p - &qp.a * &dx;
            let dz = (r_c - z.component_mul(&dw)).component_div(&w);
            (dx, dw, dz)
        };

        let wz = w.component_mul(&z);
        let (_, dw_aff, dz_aff) = solve(&-&wz);
        let alpha_aff = step_to_boundary(&w, &dw_aff).min(step_to_boundary(&z, &dz_aff));
        let mu_aff = (&w + &dw_aff * alpha_aff).dot(&(&z + &dz_aff * alpha_aff)) / m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        let r_c = (-&wz - dw_aff.component_mul(&dz_aff)).add_scalar(sigma * mu);
        let (dx, dw, dz) = solve(&r_c);
        let alpha_p = step_to_boundary(&w, &dw);
        let alpha_d = step_to_boundary(&z, &dz);
        let alpha = (0.995 * alpha_p.min(alpha_d)).min(1.0);

        x += &dx * alpha;
        w += &dw * alpha;
        z += &dz * alpha;
        w.apply(|v| *v = v.max(1e-300));
        z.apply(|v| *v = v.max(1e-300));
    }

    let (_, primal, _) = kkt(qp, &x, &z);
    if primal > 1e-6 || z.amax() > 1e14 * scale {
        let slack = &qp.b - &qp.a * &x;
        let violated: Vec<usize> = slack
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < -1e-6)
            .map(|(i, _)| i)
            .collect();
        return Err(Error::Infeasible(format!(
            "constraints {violated:?} cannot be satisfied"
        )));
    }
    Err(Error::MaxIterations(MAX_ITERATIONS))
}

/// Solves the dispatch QP snapshot to the KKT tolerances.
pub fn solve_sampled_qp(qp: &TimeVaryingQp, warm_start: Option<&DVector<f64>>) -> Result<QpSolution> {
    for i in 0..qp.dim() {
        if qp.bounds.lo[i] > qp.bounds.hi[i] {
            return Err(Error::Infeasible(format!("empty box on coordinate {i}")));
        }
    }
    solve_inequality_qp(&InequalityQp::from_dispatch(qp), warm_start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::test_support::random_qp;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scalar(h: f64, g: f64, lo: f64, hi: f64) -> InequalityQp {
        InequalityQp::with_box(
            DMatrix::from_element(1, 1, h),
            DVector::from_element(1, g),
            &DVector::from_element(1, lo),
            &DVector::from_element(1, hi),
        )
    }

    #[test]
    fn active_lower_bound() {
        let sol = solve_inequality_qp(&scalar(2.0, 0.0, 1.0, 2.0), None).unwrap();
        assert_abs_diff_eq!(sol.u[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn clamped_minimizer() {
        // (u − 2)² = u² − 4u + 4
        let mut qp = scalar(2.0, -4.0, 0.0, 1.0);
        qp.constant = 4.0;
        let sol = solve_inequality_qp(&qp, None).unwrap();
        assert_abs_diff_eq!(sol.u[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn infeasible_band() {
        let mut qp = scalar(2.0, 0.0, -1.0, 1.0);
        // x ≥ 2 contradicts x ≤ 1
        qp.a = DMatrix::from_row_slice(3, 1, &[-1.0, 1.0, -1.0]);
        qp.b = DVector::from_vec(vec![1.0, 1.0, -2.0]);
        assert!(matches!(solve_inequality_qp(&qp, None), Err(Error::Infeasible(_))));
    }

    #[test]
    fn dispatch_form_matches_objective() {
        let qp = random_qp(3, 2);
        let iq = InequalityQp::from_dispatch(&qp);
        let u = DVector::from_fn(6, |i, _| 0.01 * i as f64);
        assert_abs_diff_eq!(iq.objective(&u), qp.objective_value(&u).unwrap(), epsilon = 1e-12);
        let f = qp.constraint_values(&u).unwrap();
        let g = &iq.a * &u - &iq.b;
        assert!((f - g).amax() <= 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn warm_start_independent(seed in 0u64..10_000, n in 1usize..6) {
            let qp = random_qp(n, seed);
            let cold = solve_sampled_qp(&qp, None).unwrap();
            let warm = solve_sampled_qp(&qp, Some(&DVector::from_element(2 * n, 0.3))).unwrap();
            prop_assert!((&cold.u - &warm.u).amax() <= 1e-6);
            prop_assert!(cold.stationarity <= STATIONARITY_TOL);
        }
    }
}
