//! Radial feeder topology, the linearized voltage model and the
//! incidence-matrix factorization of the voltage sensitivities.
//!
//! Node 0 is the substation (point of common coupling). The remaining `n`
//! nodes carry the controllable and uncontrollable injections. For a radial
//! feeder with line resistances `r` and reactances `x`,
//!
//! ```text
//! A = M^{-T} diag(r) M^{-1},   B = M^{-T} diag(x) M^{-1},   V = A P + B Q + 1
//! ```
//!
//! where `M` is the node-to-branch incidence matrix with the substation row
//! removed.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Largest accepted `‖M‖∞·‖M⁻¹‖∞` before the incidence is declared singular.
pub const INCIDENCE_CONDITION_CAP: f64 = 1e12;

/// Perturbed reactances are never allowed below this fraction of the rated value.
pub const REACTANCE_FLOOR_FRACTION: f64 = 0.1;

const BUILTIN_IEEE33: &str = include_str!("../data/ieee33.json");

/// A distribution line in per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

impl Line {
    /// Resistance-to-reactance ratio.
    pub fn ratio(&self) -> f64 {
        self.r / self.x
    }

    fn connects(&self, a: usize, b: usize) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

/// Spanning tree over nodes `0..=n` rooted at the substation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeederTopology {
    n: usize,
    lines: Vec<Line>,
}

impl FeederTopology {
    pub fn new(n: usize, lines: Vec<Line>) -> Result<Self> {
        if n == 0 {
            return Err(Error::NonRadialTopology("feeder has no load nodes".into()));
        }
        if lines.len() != n {
            return Err(Error::NonRadialTopology(format!(
                "{} lines for {} non-root nodes",
                lines.len(),
                n
            )));
        }
        let mut dsu = DisjointSet::new(n + 1);
        for (l, line) in lines.iter().enumerate() {
            if line.from > n || line.to > n {
                return Err(Error::NonRadialTopology(format!(
                    "line {l} ({}-{}) references a node outside 0..={n}",
                    line.from, line.to
                )));
            }
            if line.from == line.to {
                return Err(Error::NonRadialTopology(format!("line {l} is a self loop")));
            }
            if !(line.r > 0.0 && line.x > 0.0) || !line.r.is_finite() || !line.x.is_finite() {
                return Err(Error::Scenario(format!(
                    "line {l} ({}-{}) needs positive finite impedance, got r = {}, x = {}",
                    line.from, line.to, line.r, line.x
                )));
            }
            if !dsu.union(line.from, line.to) {
                return Err(Error::NonRadialTopology(format!(
                    "line {l} ({}-{}) closes a loop",
                    line.from, line.to
                )));
            }
        }
        // n acyclic edges on n + 1 vertices always form a spanning tree.
        Ok(Self { n, lines })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn resistances(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, self.lines.iter().map(|l| l.r))
    }

    pub fn reactances(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, self.lines.iter().map(|l| l.x))
    }

    pub fn ratios(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, self.lines.iter().map(Line::ratio))
    }

    /// Same topology with new reactances; resistances follow the existing
    /// r/x ratio of each line.
    pub fn with_reactances(&self, x: &DVector<f64>) -> Result<Self> {
        check_dim("with_reactances", self.n, x.len())?;
        let lines = self
            .lines
            .iter()
            .zip(x.iter())
            .map(|(line, &x)| Line {
                r: line.ratio() * x,
                x,
                ..*line
            })
            .collect();
        Self::new(self.n, lines)
    }

    /// Opens the listed lines (by endpoints, either orientation) and closes
    /// the new ones. The result must again be radial.
    pub fn reconfigured(&self, open: &[(usize, usize)], close: &[Line]) -> Result<Self> {
        let mut lines = self.lines.clone();
        for &(a, b) in open {
            let pos = lines
                .iter()
                .position(|l| l.connects(a, b))
                .ok_or_else(|| Error::NonRadialTopology(format!("no line {a}-{b} to open")))?;
            lines.remove(pos);
        }
        lines.extend_from_slice(close);
        Self::new(self.n, lines)
    }
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(size: usize) -> Self {
        Self {
            parent: (0..size).collect(),
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Returns false if `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Reduced node-to-branch incidence matrix and its inverse.
///
/// Column `l` holds +1 at the row of `lines[l].from` and -1 at the row of
/// `lines[l].to`; the substation row is dropped. Any consistent orientation
/// gives the same sensitivities since `M⁻¹` enters as `M⁻ᵀ (·) M⁻¹`.
#[derive(Debug, Clone)]
pub struct IncidenceMatrix {
    m: DMatrix<f64>,
    m_inv: DMatrix<f64>,
}

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.m_inv
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }
}

pub fn build_incidence(topology: &FeederTopology) -> Result<IncidenceMatrix> {
    let n = topology.node_count();
    let mut m = DMatrix::zeros(n, n);
    for (l, line) in topology.lines().iter().enumerate() {
        if line.from > 0 {
            m[(line.from - 1, l)] = 1.0;
        }
        if line.to > 0 {
            m[(line.to - 1, l)] = -1.0;
        }
    }
    let m_inv = m.clone().try_inverse().ok_or(Error::SingularIncidence {
        condition: f64::INFINITY,
    })?;
    let condition = inf_norm(&m) * inf_norm(&m_inv);
    if !condition.is_finite() || condition > INCIDENCE_CONDITION_CAP {
        return Err(Error::SingularIncidence { condition });
    }
    Ok(IncidenceMatrix { m, m_inv })
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Linear voltage model `V = A P + B Q + 1`.
///
/// `D = [A B]` and `DᵀD` are cached because every barrier evaluation needs them.
#[derive(Debug, Clone)]
pub struct SensitivityModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    d: DMatrix<f64>,
    dtd: DMatrix<f64>,
}

impl SensitivityModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        check_dim("sensitivity A columns", n, a.ncols())?;
        check_dim("sensitivity B rows", n, b.nrows())?;
        check_dim("sensitivity B columns", n, b.ncols())?;
        let mut d = DMatrix::zeros(n, 2 * n);
        d.columns_mut(0, n).copy_from(&a);
        d.columns_mut(n, n).copy_from(&b);
        let dtd = d.tr_mul(&d);
        Ok(Self { a, b, d, dtd })
    }

    /// `A = M⁻ᵀ diag(r) M⁻¹`, `B = M⁻ᵀ diag(x) M⁻¹`.
    pub fn from_lines(incidence: &IncidenceMatrix, r: &DVector<f64>, x: &DVector<f64>) -> Result<Self> {
        let n = incidence.size();
        check_dim("line resistances", n, r.len())?;
        check_dim("line reactances", n, x.len())?;
        let a = sandwich(incidence.inverse(), r);
        let b = sandwich(incidence.inverse(), x);
        Self::new(a, b)
    }

    pub fn from_topology(topology: &FeederTopology) -> Result<Self> {
        let incidence = build_incidence(topology)?;
        Self::from_lines(&incidence, &topology.resistances(), &topology.reactances())
    }

    pub fn node_count(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// `D = [A B]`, n × 2n.
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn dtd(&self) -> &DMatrix<f64> {
        &self.dtd
    }

    pub fn voltage(&self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.node_count();
        check_dim("voltage P", n, p.len())?;
        check_dim("voltage Q", n, q.len())?;
        Ok(&self.a * p + &self.b * q + DVector::repeat(n, 1.0))
    }

    /// Voltage from a stacked injection `[P; Q]`.
    pub fn voltage_stacked(&self, injection: &DVector<f64>) -> DVector<f64> {
        let mut v = &self.d * injection;
        v.add_scalar_mut(1.0);
        v
    }
}

fn sandwich(m_inv: &DMatrix<f64>, weights: &DVector<f64>) -> DMatrix<f64> {
    let mut scaled = m_inv.clone();
    for (mut row, w) in scaled.row_iter_mut().zip(weights.iter()) {
        row *= *w;
    }
    let s = m_inv.tr_mul(&scaled);
    // exact symmetry
    (&s + s.transpose()) * 0.5
}

/// On-disk feeder description; impedances in ohms, loads in kW / kvar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeederFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(rename = "base_kV")]
    pub base_kv: f64,
    #[serde(rename = "base_MVA")]
    pub base_mva: f64,
    pub lines: Vec<FeederFileLine>,
    #[serde(default)]
    pub loads: Vec<FeederFileLoad>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeederFileLine {
    pub from: usize,
    pub to: usize,
    pub r_ohm: f64,
    pub x_ohm: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeederFileLoad {
    pub node: usize,
    pub p_kw: f64,
    pub q_kvar: f64,
}

/// A feeder converted to per-unit, with nominal (peak) loads.
#[derive(Debug, Clone)]
pub struct Feeder {
    pub name: String,
    pub base_kv: f64,
    pub base_mva: f64,
    pub topology: FeederTopology,
    /// Nominal real load per node 1..=n (per-unit, consumption positive).
    pub load_p: DVector<f64>,
    pub load_q: DVector<f64>,
}

impl Feeder {
    pub fn from_file(file: &FeederFile) -> Result<Self> {
        if !(file.base_kv > 0.0 && file.base_mva > 0.0) {
            return Err(Error::Scenario("feeder bases must be positive".into()));
        }
        let z_base = file.base_kv * file.base_kv / file.base_mva;
        let n = file.lines.len();
        let lines = file
            .lines
            .iter()
            .map(|l| Line {
                from: l.from,
                to: l.to,
                r: l.r_ohm / z_base,
                x: l.x_ohm / z_base,
            })
            .collect();
        let topology = FeederTopology::new(n, lines)?;
        let s_base_kw = file.base_mva * 1000.0;
        let mut load_p = DVector::zeros(n);
        let mut load_q = DVector::zeros(n);
        for load in &file.loads {
            if load.node == 0 || load.node > n {
                return Err(Error::Scenario(format!("load at invalid node {}", load.node)));
            }
            load_p[load.node - 1] += load.p_kw / s_base_kw;
            load_q[load.node - 1] += load.q_kvar / s_base_kw;
        }
        Ok(Self {
            name: file.name.clone().unwrap_or_else(|| "feeder".into()),
            base_kv: file.base_kv,
            base_mva: file.base_mva,
            topology,
            load_p,
            load_q,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ScenarioLoad {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        let file: FeederFile = serde_json::from_str(&text).map_err(|e| Error::ScenarioLoad {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
        Self::from_file(&file)
    }

    /// The IEEE 33-bus test feeder shipped with the crate (12.66 kV, 10 MVA).
    pub fn ieee33() -> Self {
        let file: FeederFile = serde_json::from_str(BUILTIN_IEEE33).expect("built-in feeder data is valid JSON");
        Self::from_file(&file).expect("built-in feeder data is radial")
    }

    pub fn impedance_base(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    /// Converts an impedance in ohms to per-unit on this feeder's base.
    pub fn line_from_ohms(&self, from: usize, to: usize, r_ohm: f64, x_ohm: f64) -> Line {
        let z = self.impedance_base();
        Line {
            from,
            to,
            r: r_ohm / z,
            x: x_ohm / z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationMode {
    /// `x' = x + ε`
    #[default]
    Additive,
    /// `x' = x (1 + ε)`
    Multiplicative,
}

/// Uncertainty of the real feeder relative to its rated data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementNoiseSpec {
    /// Variance of the Gaussian reactance perturbation (per-unit², or
    /// dimensionless for the multiplicative mode).
    #[serde(default)]
    pub reactance_variance: f64,
    /// Variance of additive voltage measurement noise (per-unit²).
    #[serde(default)]
    pub voltage_variance: f64,
    #[serde(default)]
    pub mode: PerturbationMode,
}

impl Default for MeasurementNoiseSpec {
    fn default() -> Self {
        Self {
            reactance_variance: 0.0,
            voltage_variance: 0.0,
            mode: PerturbationMode::Additive,
        }
    }
}

impl MeasurementNoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.reactance_variance >= 0.0 && self.voltage_variance >= 0.0) {
            return Err(Error::Scenario("noise variances must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Draws one perturbed reactance per line. Resistances keep the rated r/x
/// ratio, so the ratios known to the estimator stay exact.
pub fn perturb_reactances(
    topology: &FeederTopology,
    noise: &MeasurementNoiseSpec,
    rng: &mut ChaCha8Rng,
) -> Result<FeederTopology> {
    noise.validate()?;
    if noise.reactance_variance == 0.0 {
        return Ok(topology.clone());
    }
    let normal = Normal::new(0.0, noise.reactance_variance.sqrt()).map_err(|e| Error::Scenario(e.to_string()))?;
    let x = DVector::from_iterator(
        topology.node_count(),
        topology.lines().iter().map(|line| {
            let eps = normal.sample(rng);
            let perturbed = match noise.mode {
                PerturbationMode::Additive => line.x + eps,
                PerturbationMode::Multiplicative => line.x * (1.0 + eps),
            };
            perturbed.max(REACTANCE_FLOOR_FRACTION * line.x)
        }),
    );
    topology.with_reactances(&x)
}

/// The simulated "real" feeder: perturbed line data and the exact linear
/// voltage response to it.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    topology: FeederTopology,
    incidence: IncidenceMatrix,
    model: SensitivityModel,
    voltage_sd: f64,
    rng: ChaCha8Rng,
}

impl GroundTruth {
    pub fn new(rated: &FeederTopology, noise: &MeasurementNoiseSpec, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topology = perturb_reactances(rated, noise, &mut rng)?;
        let incidence = build_incidence(&topology)?;
        let model = SensitivityModel::from_lines(&incidence, &topology.resistances(), &topology.reactances())?;
        Ok(Self {
            topology,
            incidence,
            model,
            voltage_sd: noise.voltage_variance.sqrt(),
            rng,
        })
    }

    pub fn topology(&self) -> &FeederTopology {
        &self.topology
    }

    pub fn incidence(&self) -> &IncidenceMatrix {
        &self.incidence
    }

    pub fn model(&self) -> &SensitivityModel {
        &self.model
    }

    /// Measured voltages for net injections `p`, `q`.
    pub fn measure(&mut self, p: &DVector<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
        let mut v = self.model.voltage(p, q)?;
        if self.voltage_sd > 0.0 {
            let normal = Normal::new(0.0, self.voltage_sd).expect("finite deviation");
            for vi in v.iter_mut() {
                *vi += normal.sample(&mut self.rng);
            }
        }
        Ok(v)
    }
}

/// One-shot ground truth: perturbs the rated feeder with `seed` and measures
/// the voltages for the given injections.
pub fn perturb_and_measure(
    topology: &FeederTopology,
    noise: &MeasurementNoiseSpec,
    seed: u64,
    p: &DVector<f64>,
    q: &DVector<f64>,
) -> Result<(DVector<f64>, SensitivityModel)> {
    let mut truth = GroundTruth::new(topology, noise, seed)?;
    let v = truth.measure(p, q)?;
    Ok((v, truth.model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path3() -> FeederTopology {
        FeederTopology::new(
            2,
            vec![
                Line {
                    from: 0,
                    to: 1,
                    r: 0.1,
                    x: 0.05,
                },
                Line {
                    from: 1,
                    to: 2,
                    r: 0.2,
                    x: 0.1,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn incidence_two_bus() {
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
        let m = build_incidence(&t).unwrap();
        assert_eq!(m.matrix(), &DMatrix::from_row_slice(1, 1, &[-1.0]));
    }

    #[test]
    fn incidence_path() {
        let m = build_incidence(&path3()).unwrap();
        assert_eq!(m.matrix(), &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]));
        let id = m.matrix() * m.inverse();
        assert_abs_diff_eq!(id, DMatrix::identity(2, 2), epsilon = 1e-12);
    }

    #[test]
    fn cycle_is_rejected() {
        let lines = vec![
            Line {
                from: 0,
                to: 1,
                r: 0.1,
                x: 0.1,
            },
            Line {
                from: 0,
                to: 2,
                r: 0.1,
                x: 0.1,
            },
            Line {
                from: 1,
                to: 2,
                r: 0.1,
                x: 0.1,
            },
        ];
        assert!(matches!(
            FeederTopology::new(2, lines.clone()),
            Err(Error::NonRadialTopology(_))
        ));
        // same loop with a node count that matches the line count
        assert!(matches!(
            FeederTopology::new(3, lines),
            Err(Error::NonRadialTopology(_))
        ));
    }

    #[test]
    fn two_bus_sensitivities() {
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
        let s = SensitivityModel::from_topology(&t).unwrap();
        assert_abs_diff_eq!(s.a()[(0, 0)], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.b()[(0, 0)], 0.05, epsilon = 1e-15);
        let v = s.voltage(&DVector::from_element(1, 0.5), &DVector::zeros(1)).unwrap();
        assert_abs_diff_eq!(v[0], 1.05, epsilon = 1e-15);
    }

    #[test]
    fn path_common_resistance() {
        let s = SensitivityModel::from_topology(&path3()).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.1, 0.1, 0.1, 0.3]);
        assert_abs_diff_eq!(s.a(), &expected, epsilon = 1e-14);
    }

    #[test]
    fn equal_r_and_x_give_equal_matrices() {
        let t = Feeder::ieee33().topology;
        let inc = build_incidence(&t).unwrap();
        let r = t.resistances();
        let s = SensitivityModel::from_lines(&inc, &r, &r).unwrap();
        assert_eq!(s.a(), s.b());
    }

    #[test]
    fn zero_injection_is_nominal() {
        let s = SensitivityModel::from_topology(&Feeder::ieee33().topology).unwrap();
        let v = s.voltage(&DVector::zeros(32), &DVector::zeros(32)).unwrap();
        assert_eq!(v, DVector::repeat(32, 1.0));
        assert!(matches!(
            s.voltage(&DVector::zeros(31), &DVector::zeros(32)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ieee33_per_unit_conversion() {
        let f = Feeder::ieee33();
        assert_eq!(f.topology.node_count(), 32);
        let z = 12.66 * 12.66 / 10.0;
        assert_abs_diff_eq!(f.topology.lines()[0].r, 0.0922 / z, epsilon = 1e-15);
        assert_abs_diff_eq!(f.load_p.sum(), 0.3715, epsilon = 1e-12);
        assert_abs_diff_eq!(f.load_q.sum(), 0.23, epsilon = 1e-12);
    }

    #[test]
    fn noiseless_measurement_is_exact() {
        let t = Feeder::ieee33().topology;
        let p = DVector::from_fn(32, |i, _| 0.01 * (i as f64).sin());
        let q = DVector::from_fn(32, |i, _| 0.005 * (i as f64).cos());
        let (v, model) = perturb_and_measure(&t, &MeasurementNoiseSpec::default(), 7, &p, &q).unwrap();
        assert_eq!(v, model.voltage(&p, &q).unwrap());
        let rated = SensitivityModel::from_topology(&t).unwrap();
        assert_eq!(model.a(), rated.a());
    }

    #[test]
    fn perturbation_is_seeded() {
        let t = Feeder::ieee33().topology;
        let noise = MeasurementNoiseSpec {
            reactance_variance: 0.001,
            voltage_variance: 1e-6,
            ..Default::default()
        };
        let p = DVector::repeat(32, 0.01);
        let q = DVector::repeat(32, -0.002);
        let first = perturb_and_measure(&t, &noise, 11, &p, &q).unwrap();
        let second = perturb_and_measure(&t, &noise, 11, &p, &q).unwrap();
        assert_eq!(first.0, second.0);
        assert_eq!(first.1.b(), second.1.b());

        let rated = SensitivityModel::from_topology(&t).unwrap();
        let diff = (first.1.b() - rated.b()).abs().max();
        assert!(diff > 0.0);
        for (line, x) in t
            .lines()
            .iter()
            .zip(GroundTruth::new(&t, &noise, 11).unwrap().topology().lines())
        {
            assert!(x.x >= REACTANCE_FLOOR_FRACTION * line.x);
            assert_abs_diff_eq!(x.ratio(), line.ratio(), epsilon = 1e-12);
        }
    }

    #[test]
    fn reconfiguration_keeps_radiality() {
        let f = Feeder::ieee33();
        let tie = f.line_from_ohms(8, 29, 1.0, 1.0);
        let t = f.topology.reconfigured(&[(5, 25)], &[tie]).unwrap();
        assert!(build_incidence(&t).is_ok());
        // opening without closing strands a subtree
        assert!(f.topology.reconfigured(&[(5, 25)], &[]).is_err());
    }
}
