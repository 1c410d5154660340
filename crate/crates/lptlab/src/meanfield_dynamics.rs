//! Mean-field vector fields of collective-spin models and the dynamical
//! systems toolkit around them.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, LeastSquaresSvd};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model_zoo::KerrParams;
use crate::{LabError, Result, C64};

/// Mean-field equations dM/dt = g(M).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeanFieldModel {
    Ddm { g: f64, kappa: f64 },
    Lmg { chi_x: f64, chi_y: f64, kappa: f64 },
    /// DDM with an extra `c·Z` term in dZ/dt.
    DdmLongitudinal { g: f64, kappa: f64, c: f64 },
    /// g(M) = A·M in any dimension.
    Linear { a: Vec<Vec<f64>>, parity: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldSystem {
    pub model: MeanFieldModel,
    pub label: String,
}

pub fn ddm_meanfield(g: f64, kappa: f64) -> MeanFieldSystem {
    MeanFieldSystem { model: MeanFieldModel::Ddm { g, kappa }, label: "ddm".into() }
}

pub fn lmg_meanfield(chi_x: f64, chi_y: f64, kappa: f64) -> MeanFieldSystem {
    MeanFieldSystem { model: MeanFieldModel::Lmg { chi_x, chi_y, kappa }, label: "lmg".into() }
}

pub fn ddm_longitudinal_meanfield(g: f64, kappa: f64, c: f64) -> MeanFieldSystem {
    MeanFieldSystem { model: MeanFieldModel::DdmLongitudinal { g, kappa, c }, label: "ddm_longitudinal".into() }
}

pub fn linear_meanfield(a: Array2<f64>, parity: Array2<f64>) -> Result<MeanFieldSystem> {
    let d = a.nrows();
    if a.ncols() != d || parity.dim() != (d, d) {
        return Err(LabError::Dimension("linear system needs square A and P̃ of equal size".into()));
    }
    let p2 = parity.dot(&parity) - Array2::<f64>::eye(d);
    if p2.iter().any(|x| x.abs() > 1e-12) || (&parity - &parity.t()).iter().any(|x| x.abs() > 1e-12) {
        return Err(LabError::InvalidParameter("P̃ must be a symmetric involution".into()));
    }
    let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect();
    Ok(MeanFieldSystem {
        model: MeanFieldModel::Linear { a: rows(&a), parity: rows(&parity) },
        label: "linear".into(),
    })
}

fn to_array(v: &[Vec<f64>]) -> Array2<f64> {
    let n = v.len();
    Array2::from_shape_fn((n, n), |(i, j)| v[i][j])
}

impl MeanFieldSystem {
    pub fn dimension(&self) -> usize {
        match &self.model {
            MeanFieldModel::Linear { a, .. } => a.len(),
            _ => 3,
        }
    }

    /// Dynamics restricted to the unit sphere.
    pub fn sphere_constrained(&self) -> bool {
        !matches!(self.model, MeanFieldModel::Linear { .. })
    }

    pub fn parity_matrix(&self) -> Array2<f64> {
        match &self.model {
            MeanFieldModel::Linear { parity, .. } => to_array(parity),
            _ => Array2::from_diag(&Array1::from(vec![1.0, 1.0, -1.0])),
        }
    }

    pub fn rhs(&self, m: &[f64]) -> Vec<f64> {
        match &self.model {
            MeanFieldModel::Ddm { g, kappa } => ddm_rhs(*g, *kappa, 0.0, m),
            MeanFieldModel::DdmLongitudinal { g, kappa, c } => ddm_rhs(*g, *kappa, *c, m),
            MeanFieldModel::Lmg { chi_x, chi_y, kappa } => {
                let (x, y, z) = (m[0], m[1], m[2]);
                vec![
                    2.0 * chi_y * y * z + 2.0 * kappa * z * x,
                    -2.0 * chi_x * x * z + 2.0 * kappa * z * y,
                    2.0 * (chi_x - chi_y) * x * y - 2.0 * kappa * (1.0 - z * z),
                ]
            }
            MeanFieldModel::Linear { a, .. } => a.iter().map(|row| row.iter().zip(m).map(|(p, q)| p * q).sum()).collect(),
        }
    }

    /// Analytic Jacobian ∂g_i/∂M_j in the ambient coordinates.
    pub fn jacobian(&self, m: &[f64]) -> Array2<f64> {
        match &self.model {
            MeanFieldModel::Ddm { g, kappa } => ddm_jac(*g, *kappa, 0.0, m),
            MeanFieldModel::DdmLongitudinal { g, kappa, c } => ddm_jac(*g, *kappa, *c, m),
            MeanFieldModel::Lmg { chi_x, chi_y, kappa } => {
                let (x, y, z) = (m[0], m[1], m[2]);
                let (cx, cy, k) = (*chi_x, *chi_y, *kappa);
                Array2::from_shape_vec(
                    (3, 3),
                    vec![
                        2.0 * k * z,
                        2.0 * cy * z,
                        2.0 * cy * y + 2.0 * k * x,
                        -2.0 * cx * z,
                        2.0 * k * z,
                        -2.0 * cx * x + 2.0 * k * y,
                        2.0 * (cx - cy) * y,
                        2.0 * (cx - cy) * x,
                        4.0 * k * z,
                    ],
                )
                .expect("3x3")
            }
            MeanFieldModel::Linear { a, .. } => to_array(a),
        }
    }

    /// Analytic fixed points used as warm starts for the root finder.
    fn warm_starts(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        match &self.model {
            MeanFieldModel::Ddm { g, kappa } | MeanFieldModel::DdmLongitudinal { g, kappa, .. } => {
                let r = kappa / g;
                if r <= 1.0 {
                    let x = (1.0 - r * r).sqrt();
                    out.push(vec![x, r, 0.0]);
                    out.push(vec![-x, r, 0.0]);
                }
                if *kappa > 0.0 && r >= 1.0 {
                    let y = g / kappa;
                    let z = (1.0 - y * y).max(0.0).sqrt();
                    out.push(vec![0.0, y, z]);
                    out.push(vec![0.0, y, -z]);
                }
            }
            MeanFieldModel::Lmg { chi_x, chi_y, kappa } => {
                out.push(vec![0.0, 0.0, 1.0]);
                out.push(vec![0.0, 0.0, -1.0]);
                // Z = 0 branch: 2(χx − χy)XY = 2κ on the unit circle.
                let d = chi_x - chi_y;
                for kc in [d / 2.0, d / 4.0] {
                    if kc != 0.0 && (kappa / kc).abs() <= 1.0 {
                        let s = (1.0 - (kappa / kc).powi(2)).sqrt();
                        let (mp, mm) = (((1.0 + s) / 2.0).sqrt(), ((1.0 - s) / 2.0).sqrt());
                        for (a, b) in [(mp, mm), (mm, mp)] {
                            for sg in [1.0, -1.0] {
                                out.push(vec![sg * a, sg * b * (kc / kc.abs()), 0.0]);
                            }
                        }
                    }
                }
            }
            MeanFieldModel::Linear { a, .. } => out.push(vec![0.0; a.len()]),
        }
        out
    }
}

fn ddm_rhs(g: f64, k: f64, c: f64, m: &[f64]) -> Vec<f64> {
    let (x, y, z) = (m[0], m[1], m[2]);
    vec![2.0 * k * z * x, -2.0 * g * z + 2.0 * k * z * y, 2.0 * g * y - 2.0 * k * (1.0 - z * z) + c * z]
}

fn ddm_jac(g: f64, k: f64, c: f64, m: &[f64]) -> Array2<f64> {
    let (x, y, z) = (m[0], m[1], m[2]);
    Array2::from_shape_vec(
        (3, 3),
        vec![2.0 * k * z, 0.0, 2.0 * k * x, 0.0, 2.0 * k * z, -2.0 * g + 2.0 * k * y, 0.0, 2.0 * g, 4.0 * k * z + c],
    )
    .expect("3x3")
}

/// Central-difference Jacobian, used to audit the analytic one.
pub fn jacobian_fd(sys: &MeanFieldSystem, m: &[f64], h: f64) -> Array2<f64> {
    let d = m.len();
    let mut j = Array2::zeros((d, d));
    for c in 0..d {
        let mut p = m.to_vec();
        let mut q = m.to_vec();
        p[c] += h;
        q[c] -= h;
        let (gp, gq) = (sys.rhs(&p), sys.rhs(&q));
        for r in 0..d {
            j[[r, c]] = (gp[r] - gq[r]) / (2.0 * h);
        }
    }
    j
}

#[derive(Clone, Debug, Serialize)]
pub struct NptCheck {
    pub pass: bool,
    pub max_violation: f64,
    pub samples: usize,
}

/// n-PT test on random states: with f = i·g and T̃ complex conjugation,
/// P̃T̃ f(M) = f(P̃T̃ M) reduces to g(P̃M) = −P̃ g(M) for real M.
pub fn check_npt_symmetry(sys: &MeanFieldSystem, samples: usize, tol: f64) -> NptCheck {
    check_npt_symmetry_seeded(sys, samples, tol, 0x5eed)
}

pub fn check_npt_symmetry_seeded(sys: &MeanFieldSystem, samples: usize, tol: f64, seed: u64) -> NptCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sys.dimension();
    let p = sys.parity_matrix();
    let mut worst = 0.0_f64;
    for _ in 0..samples.max(100) {
        let mut m: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        if sys.sphere_constrained() {
            let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
            m.iter_mut().for_each(|x| *x /= n);
        }
        let pm: Vec<f64> = (0..d).map(|i| (0..d).map(|j| p[[i, j]] * m[j]).sum()).collect();
        let gpm = sys.rhs(&pm);
        let gm = sys.rhs(&m);
        for i in 0..d {
            let pg: f64 = (0..d).map(|j| p[[i, j]] * gm[j]).sum();
            worst = worst.max((gpm[i] + pg).abs());
        }
    }
    NptCheck { pass: worst <= tol, max_violation: worst, samples: samples.max(100) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Center,
    Stable,
    Unstable,
    Saddle,
    Marginal,
}

/// Coordinates kept in the tangent-plane Jacobian; the remaining one is
/// eliminated through the unit-sphere constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    Yz,
    Xy,
    Xz,
    Full,
}

impl Chart {
    fn coords(self) -> Option<(usize, usize, usize)> {
        match self {
            Chart::Yz => Some((1, 2, 0)),
            Chart::Xy => Some((0, 1, 2)),
            Chart::Xz => Some((0, 2, 1)),
            Chart::Full => None,
        }
    }
}

/// Entries of the (Y,Z)-chart Jacobian [[γ1 Z, α], [β, γ2 Z]], R = tr J, Q = 4 det J.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct JacobianEntries {
    pub alpha: f64,
    pub beta: f64,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
    pub r: f64,
    pub q: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointReport {
    pub location: Vec<f64>,
    pub residual: f64,
    pub pt_symmetric: bool,
    pub chart: Chart,
    pub chart_switched: bool,
    pub jacobian: Vec<Vec<f64>>,
    pub excitation_eigs: Vec<C64>,
    /// Eigenvalues of the ambient 3×3 Jacobian (includes the off-sphere direction).
    pub ambient_eigs: Vec<C64>,
    pub eigenvectors: Vec<Vec<C64>>,
    pub classification: Classification,
    pub jacobian_entries: Option<JacobianEntries>,
}

/// Chart selection: (Y,Z) unless |X| < 1e−6; then (X,Y) when Y is negligible
/// or |Z| ≥ |Y|, else (X,Z).
pub fn choose_chart(m: &[f64]) -> Chart {
    if m[0].abs() >= 1e-6 {
        Chart::Yz
    } else if m[1].abs() < 1e-6 || m[2].abs() >= m[1].abs() {
        Chart::Xy
    } else {
        Chart::Xz
    }
}

/// Tangent-plane Jacobian in a chart.
pub fn chart_jacobian(sys: &MeanFieldSystem, m: &[f64], chart: Chart) -> Result<Array2<f64>> {
    let j = sys.jacobian(m);
    let Some((a, b, e)) = chart.coords() else {
        return Ok(j);
    };
    if m[e].abs() < 1e-14 {
        return Err(LabError::Numerical(format!("chart {chart:?} singular at {m:?}")));
    }
    let cs = [a, b];
    Ok(Array2::from_shape_fn((2, 2), |(r, c)| j[[cs[r], cs[c]]] - j[[cs[r], e]] * m[cs[c]] / m[e]))
}

fn classify(eigs: &[C64]) -> Classification {
    let scale = eigs.iter().fold(1.0_f64, |s, z| s.max(z.norm()));
    let zero_re = |z: &C64| z.re.abs() <= 1e-9 * z.im.abs().max(0.0) || z.re.abs() <= 1e-12 * scale;
    if eigs.iter().all(|z| z.re.abs() <= 1e-9 * z.im.abs()) && eigs.iter().any(|z| z.im.abs() > 1e-12 * scale) {
        return Classification::Center;
    }
    let pos = eigs.iter().filter(|z| !zero_re(z) && z.re > 0.0).count();
    let neg = eigs.iter().filter(|z| !zero_re(z) && z.re < 0.0).count();
    match (pos, neg) {
        (0, n) if n == eigs.len() => Classification::Stable,
        (p, 0) if p == eigs.len() => Classification::Unstable,
        (p, n) if p > 0 && n > 0 => Classification::Saddle,
        _ => Classification::Marginal,
    }
}

fn eig2(j: &Array2<f64>) -> Result<(Vec<C64>, Vec<Vec<C64>>)> {
    let jc = j.mapv(|x| C64::new(x, 0.0));
    let (w, v) = jc.eig()?;
    let mut idx: Vec<usize> = (0..w.len()).collect();
    idx.sort_by(|&a, &b| w[b].re.total_cmp(&w[a].re).then(w[b].im.total_cmp(&w[a].im)));
    let vals = idx.iter().map(|&i| w[i]).collect();
    let vecs = idx.iter().map(|&i| v.column(i).to_vec()).collect();
    Ok((vals, vecs))
}

/// Linearization of `sys` at `m` in the given chart (or the automatic one).
pub fn analyze_point(sys: &MeanFieldSystem, m: &[f64], chart: Option<Chart>) -> Result<FixedPointReport> {
    let residual = sys.rhs(m).iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    let p = sys.parity_matrix();
    let d = m.len();
    let pm: Vec<f64> = (0..d).map(|i| (0..d).map(|j| p[[i, j]] * m[j]).sum()).collect();
    let pt_symmetric = pm.iter().zip(m).all(|(a, b)| (a - b).abs() <= 1e-9);
    let auto = if sys.sphere_constrained() { choose_chart(m) } else { Chart::Full };
    let chart = chart.unwrap_or(auto);
    let jac = chart_jacobian(sys, m, chart)?;
    let (eigs, vecs) = eig2(&jac)?;
    let (ambient, _) = eig2(&sys.jacobian(m))?;
    let entries = (chart == Chart::Yz).then(|| {
        let z = m[2];
        JacobianEntries {
            alpha: jac[[0, 1]],
            beta: jac[[1, 0]],
            gamma1: (z.abs() > 1e-12).then(|| jac[[0, 0]] / z),
            gamma2: (z.abs() > 1e-12).then(|| jac[[1, 1]] / z),
            r: jac[[0, 0]] + jac[[1, 1]],
            q: 4.0 * (jac[[0, 0]] * jac[[1, 1]] - jac[[0, 1]] * jac[[1, 0]]),
        }
    });
    Ok(FixedPointReport {
        location: m.to_vec(),
        residual,
        pt_symmetric,
        chart,
        chart_switched: chart != Chart::Yz && sys.sphere_constrained(),
        jacobian: jac.rows().into_iter().map(|r| r.to_vec()).collect(),
        classification: classify(&eigs),
        excitation_eigs: eigs,
        ambient_eigs: ambient,
        eigenvectors: vecs,
        jacobian_entries: entries,
    })
}

fn newton(sys: &MeanFieldSystem, seed: &[f64]) -> Option<Vec<f64>> {
    let d = seed.len();
    let sphere = sys.sphere_constrained();
    let mut m = seed.to_vec();
    for _ in 0..100 {
        let g = sys.rhs(&m);
        let j = sys.jacobian(&m);
        let rows = if sphere { d + 1 } else { d };
        let mut a = Array2::<f64>::zeros((rows, d));
        let mut f = Array1::<f64>::zeros(rows);
        for r in 0..d {
            f[r] = -g[r];
            for c in 0..d {
                a[[r, c]] = j[[r, c]];
            }
        }
        if sphere {
            f[d] = -(m.iter().map(|x| x * x).sum::<f64>() - 1.0);
            for c in 0..d {
                a[[d, c]] = 2.0 * m[c];
            }
        }
        let fnorm = f.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
        if fnorm < 1e-15 {
            break;
        }
        let step = a.least_squares(&f).ok()?.solution;
        let snorm = step.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
        let damp = if snorm > 0.5 { 0.5 / snorm } else { 1.0 };
        m.iter_mut().zip(step.iter()).for_each(|(x, s)| *x += damp * s);
        if !m.iter().all(|x| x.is_finite()) {
            return None;
        }
        if snorm < 1e-16 {
            break;
        }
    }
    if sphere {
        let n = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        m.iter_mut().for_each(|x| *x /= n);
    }
    let res = sys.rhs(&m).iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    (res <= 1e-10).then_some(m)
}

fn sphere_seeds() -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for a in -1i32..=1 {
        for b in -1i32..=1 {
            for c in -1i32..=1 {
                if a == 0 && b == 0 && c == 0 {
                    continue;
                }
                let n = ((a * a + b * b + c * c) as f64).sqrt();
                out.push(vec![a as f64 / n, b as f64 / n, c as f64 / n]);
            }
        }
    }
    out
}

/// Multistart root finding on g(M) = 0 (on the unit sphere for spin systems),
/// deduplicated to 1e−8 and linearized.
pub fn find_fixed_points(sys: &MeanFieldSystem, extra_seeds: usize) -> Result<Vec<FixedPointReport>> {
    let mut seeds = sys.warm_starts();
    if sys.sphere_constrained() {
        seeds.extend(sphere_seeds());
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..extra_seeds {
            let v: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-3 {
                seeds.push(v.iter().map(|x| x / n).collect());
            }
        }
    }
    let mut roots: Vec<Vec<f64>> = Vec::new();
    for s in &seeds {
        if let Some(r) = newton(sys, s) {
            let r: Vec<f64> = r.into_iter().map(|x| if x.abs() < 1e-15 { 0.0 } else { x }).collect();
            if !roots.iter().any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() <= 1e-8)) {
                roots.push(r);
            }
        }
    }
    if roots.is_empty() {
        return Err(LabError::Numerical("no fixed point found".into()));
    }
    roots.sort_by(|a, b| {
        a.iter().zip(b).map(|(x, y)| y.total_cmp(x)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    roots.iter().map(|r| analyze_point(sys, r, None)).collect()
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    pub dt_max: f64,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, atol: 1e-12, dt_max: f64::INFINITY }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub max_norm_drift: f64,
    pub steps: usize,
}

const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_BS: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Dormand–Prince 5(4) from t = 0, landing exactly on each output time.
/// Output times must be monotone and share one sign (backward runs allowed).
pub fn integrate(sys: &MeanFieldSystem, m0: &[f64], times: &[f64], opts: IntegratorOptions) -> Result<Trajectory> {
    let d = sys.dimension();
    if m0.len() != d {
        return Err(LabError::Dimension(format!("state of length {} for a {d}-dim system", m0.len())));
    }
    if sys.sphere_constrained() {
        let n = m0.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(LabError::InvalidParameter(format!("|M0| = {n}, expected 1")));
        }
    }
    let dir = if times.iter().any(|&t| t < 0.0) { -1.0 } else { 1.0 };
    if times.iter().any(|&t| t * dir < 0.0) || times.windows(2).any(|w| (w[1] - w[0]) * dir < 0.0) {
        return Err(LabError::InvalidParameter("output times must be monotone and of one sign".into()));
    }
    let norm0 = m0.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut y = m0.to_vec();
    let mut t = 0.0_f64;
    let span = times.iter().fold(0.0_f64, |s, x| s.max(x.abs()));
    let mut h = (1e-3 * span.max(1.0)).min(opts.dt_max);
    let mut out_t = Vec::with_capacity(times.len());
    let mut out_y = Vec::with_capacity(times.len());
    let mut drift = 0.0_f64;
    let mut steps = 0usize;
    let mut k = vec![vec![0.0; d]; 7];
    for &target in times {
        while (target - t) * dir > 0.0 {
            let remaining = (target - t).abs();
            let last = h >= remaining;
            let hs = h.min(remaining);
            if hs < 1e-14 * t.abs().max(1.0) && !last {
                return Err(LabError::Numerical(format!("step size underflow at t = {t}")));
            }
            let hh = dir * hs;
            k[0] = sys.rhs(&y);
            for s in 1..7 {
                let ys: Vec<f64> = (0..d).map(|i| y[i] + hh * (0..s).map(|r| DP_A[s][r] * k[r][i]).sum::<f64>()).collect();
                k[s] = sys.rhs(&ys);
            }
            let _ = DP_C;
            let ynew: Vec<f64> = (0..d).map(|i| y[i] + hh * (0..7).map(|s| DP_B[s] * k[s][i]).sum::<f64>()).collect();
            let err = (0..d)
                .map(|i| {
                    let e = hh * (0..7).map(|s| (DP_B[s] - DP_BS[s]) * k[s][i]).sum::<f64>();
                    e.abs() / (opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs()))
                })
                .fold(0.0_f64, f64::max);
            if err <= 1.0 {
                t = if last { target } else { t + hh };
                y = ynew;
                steps += 1;
                if sys.sphere_constrained() {
                    let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
                    drift = drift.max((n - norm0).abs());
                }
            }
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (hs * fac).min(opts.dt_max);
            if !y.iter().all(|x| x.is_finite()) {
                return Err(LabError::Numerical("trajectory diverged".into()));
            }
        }
        out_t.push(target);
        out_y.push(y.clone());
    }
    Ok(Trajectory { t: out_t, states: out_y, max_norm_drift: drift, steps })
}

/// Uniform output grid on [0, t_end].
pub fn integrate_uniform(sys: &MeanFieldSystem, m0: &[f64], t_end: f64, n_out: usize) -> Result<Trajectory> {
    let times: Vec<f64> = (0..=n_out).map(|i| t_end * i as f64 / n_out as f64).collect();
    integrate(sys, m0, &times, IntegratorOptions::default())
}

/// Closed-form DDM orbit through (0, 0, 1) for κ < g:
/// Z(t) = √(r² − 1)·sin(Ωt − φ)/(cos(Ωt − φ) − r), r = g/κ, Ω = 2√(g² − κ²), φ = arccos(κ/g).
pub fn ddm_analytic_z(g: f64, kappa: f64, t: f64) -> f64 {
    let r = g / kappa;
    let omega = 2.0 * (g * g - kappa * kappa).sqrt();
    let phi = (kappa / g).acos();
    let a = omega * t - phi;
    (r * r - 1.0).sqrt() * a.sin() / (a.cos() - r)
}

/// Period from upward crossings of the midpoint level of the component with
/// the largest variance.
pub fn period_estimate(traj: &Trajectory) -> Result<f64> {
    let d = traj.states.first().map_or(0, |s| s.len());
    let n = traj.states.len();
    if n < 4 || d == 0 {
        return Err(LabError::Numerical("trajectory too short".into()));
    }
    let var = |c: usize| {
        let mean = traj.states.iter().map(|s| s[c]).sum::<f64>() / n as f64;
        traj.states.iter().map(|s| (s[c] - mean).powi(2)).sum::<f64>() / n as f64
    };
    let comp = (0..d).max_by(|&a, &b| var(a).total_cmp(&var(b))).unwrap_or(0);
    let xs: Vec<f64> = traj.states.iter().map(|s| s[comp]).collect();
    let (lo, hi) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if hi - lo < 1e-9 {
        return Err(LabError::Numerical("trajectory is not oscillating".into()));
    }
    let level = 0.5 * (lo + hi);
    let mut cross = Vec::new();
    for i in 1..n {
        let (a, b) = (xs[i - 1] - level, xs[i] - level);
        if a < 0.0 && b >= 0.0 {
            let f = a / (a - b);
            cross.push(traj.t[i - 1] + f * (traj.t[i] - traj.t[i - 1]));
        }
    }
    if cross.len() < 2 {
        return Err(LabError::Numerical("fewer than two oscillation cycles".into()));
    }
    Ok((cross[cross.len() - 1] - cross[0]) / (cross.len() - 1) as f64)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentFit {
    pub x_z: f64,
    pub nu_t: f64,
    pub x_z_r2: f64,
    pub nu_t_r2: f64,
    pub distances: Vec<f64>,
    pub z_ss: Vec<f64>,
    pub tau: Vec<f64>,
}

fn loglog_slope(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Log-log fits of |Z_ss| and τ = 1/min|Re λ| at the stable fixed point
/// against |κ − κ_c|. `build` maps κ to the system.
pub fn fit_exponents(build: impl Fn(f64) -> MeanFieldSystem, kappa_c: f64, grid: &[f64]) -> Result<ExponentFit> {
    if grid.len() < 3 {
        return Err(LabError::InvalidParameter("need at least three grid points".into()));
    }
    let side = (grid[0] - kappa_c).signum();
    if grid.iter().any(|k| (k - kappa_c).signum() != side || *k == kappa_c) {
        return Err(LabError::InvalidParameter("grid must lie on one side of κ_c".into()));
    }
    let dist: Vec<f64> = grid.iter().map(|k| (k - kappa_c).abs()).collect();
    let (dmin, dmax) = dist.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
    if dmax / dmin < 10.0 {
        return Err(LabError::InvalidParameter("grid must span at least one decade of |κ − κ_c|".into()));
    }
    let mut z_ss = Vec::new();
    let mut tau = Vec::new();
    for &k in grid {
        let fps = find_fixed_points(&build(k), 0)?;
        let st = fps
            .iter()
            .filter(|f| f.classification == Classification::Stable)
            .min_by(|a, b| a.location[2].total_cmp(&b.location[2]))
            .ok_or_else(|| LabError::Numerical(format!("no stable fixed point at κ = {k}")))?;
        z_ss.push(st.location[2].abs());
        let slow = st.excitation_eigs.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min);
        tau.push(1.0 / slow);
    }
    let (x_z, x_z_r2) = if z_ss.iter().all(|z| *z > 0.0) && z_ss.iter().any(|z| (z - z_ss[0]).abs() > 1e-12) {
        loglog_slope(&dist, &z_ss)
    } else {
        (0.0, 1.0)
    };
    let (nt, nu_t_r2) = loglog_slope(&dist, &tau);
    if nu_t_r2 < 0.99 {
        return Err(LabError::Numerical(format!("relaxation-time fit is poor (R² = {nu_t_r2:.4})")));
    }
    Ok(ExponentFit { x_z, nu_t: -nt, x_z_r2, nu_t_r2, distances: dist, z_ss, tau })
}

#[derive(Clone, Debug, Serialize)]
pub struct CepPoint {
    pub param: f64,
    pub location: Vec<f64>,
    pub chart: Chart,
    pub eigs: Vec<C64>,
    pub eig_distance: f64,
    pub eigvec_angle: f64,
    pub classification: Classification,
}

#[derive(Clone, Debug, Serialize)]
pub struct CepReport {
    pub points: Vec<CepPoint>,
    pub crossing: f64,
    pub eigvec_angle_min: f64,
    pub eig_abs_at_crossing: f64,
    pub is_cep: bool,
}

fn vec_angle(a: &[C64], b: &[C64]) -> f64 {
    let dot: C64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (dot.norm() / (na * nb)).clamp(0.0, 1.0).acos()
}

/// Center if one exists (largest X first), otherwise the stable point.
pub fn pick_attractor(fps: &[FixedPointReport]) -> Option<&FixedPointReport> {
    fps.iter()
        .filter(|f| f.classification == Classification::Center)
        .max_by(|a, b| a.location[0].total_cmp(&b.location[0]))
        .or_else(|| fps.iter().find(|f| f.classification == Classification::Stable))
}

/// Tracks the excitation pair of a chosen fixed point across a parameter grid
/// and locates where eigenvalues and eigenvectors coalesce.
pub fn cep_probe<'a>(
    build: impl Fn(f64) -> MeanFieldSystem,
    grid: &[f64],
    pick: impl Fn(&[FixedPointReport]) -> Option<&FixedPointReport>,
) -> Result<CepReport> {
    let mut pts = Vec::new();
    for &p in grid {
        let fps = find_fixed_points(&build(p), 0)?;
        let Some(f) = pick(&fps) else { continue };
        if f.excitation_eigs.len() != 2 {
            continue;
        }
        pts.push(CepPoint {
            param: p,
            location: f.location.clone(),
            chart: f.chart,
            eigs: f.excitation_eigs.clone(),
            eig_distance: (f.excitation_eigs[0] - f.excitation_eigs[1]).norm(),
            eigvec_angle: vec_angle(&f.eigenvectors[0], &f.eigenvectors[1]),
            classification: f.classification,
        });
    }
    if pts.is_empty() {
        return Err(LabError::Numerical("no fixed point selected on the grid".into()));
    }
    let dmax = pts.iter().map(|p| p.eig_distance).fold(0.0_f64, f64::max).max(f64::MIN_POSITIVE);
    let lmax = pts
        .iter()
        .map(|p| p.eigs.iter().map(|z| z.norm()).fold(0.0_f64, f64::max))
        .fold(0.0_f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let score = |p: &CepPoint| p.eig_distance / dmax + p.eigvec_angle / std::f64::consts::FRAC_PI_2;
    let best = pts.iter().min_by(|a, b| score(a).total_cmp(&score(b))).expect("non-empty");
    let eig_abs = best.eigs.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let angle_min = pts.iter().map(|p| p.eigvec_angle).fold(f64::INFINITY, f64::min);
    let is_cep = best.eigvec_angle <= 0.1 && eig_abs <= 0.1 * lmax;
    Ok(CepReport { crossing: best.param, eigvec_angle_min: angle_min, eig_abs_at_crossing: eig_abs, is_cep, points: pts })
}

#[derive(Clone, Debug, Serialize)]
pub struct KerrMeanField {
    /// Threshold √(Δ² + γ²/4) where r_eff changes sign.
    pub g_c: f64,
    pub r_eff: Option<f64>,
    pub u_eff: Option<f64>,
    pub normal_form_valid: bool,
    pub supercritical: bool,
    pub theta0: Option<f64>,
    /// Normal-form amplitude √(−r_eff/u_eff).
    pub r0: Option<f64>,
    /// Exact nonzero fixed points α of the amplitude equation.
    pub fixed_points: Vec<C64>,
}

/// Right-hand side α̇ = (iΔ − γ/2)α − iGα* − iU|α|²α.
pub fn kerr_rhs(p: &KerrParams, a: C64) -> C64 {
    let i = C64::new(0.0, 1.0);
    (i * p.detuning - p.gamma / 2.0) * a - i * p.pump * a.conj() - i * p.kerr * a.norm_sqr() * a
}

pub fn kerr_meanfield(p: &KerrParams) -> KerrMeanField {
    let (d, u, g, gam) = (p.detuning, p.kerr, p.pump, p.gamma);
    let g_c = (d * d + gam * gam / 4.0).sqrt();
    let s2 = g * g - d * d;
    let (r_eff, u_eff) = if s2 > 0.0 {
        let s = s2.sqrt();
        (Some(gam / 2.0 - s), Some(-d * u / s))
    } else {
        (None, None)
    };
    let normal_form_valid = u_eff.is_some_and(|x| x > 0.0);
    let theta0 = (g.abs() >= gam / 2.0 && g != 0.0).then(|| 0.5 * (-gam / (2.0 * g)).asin());
    let r0 = match (r_eff, u_eff) {
        (Some(r), Some(uu)) if uu > 0.0 && r < 0.0 => Some((-r / uu).sqrt()),
        _ => None,
    };
    let mut fixed_points = Vec::new();
    let disc = g * g - gam * gam / 4.0;
    if disc >= 0.0 && u != 0.0 {
        for sgn in [1.0, -1.0] {
            let w = sgn * disc.sqrt();
            let r2 = (d + w) / u;
            if r2 > 0.0 {
                let two_theta = (-gam / (2.0 * g)).atan2(-w / g);
                let a = C64::from_polar(r2.sqrt(), 0.5 * two_theta);
                fixed_points.push(a);
                fixed_points.push(-a);
            }
        }
    }
    KerrMeanField {
        g_c,
        r_eff,
        u_eff,
        normal_form_valid,
        supercritical: normal_form_valid,
        theta0,
        r0,
        fixed_points,
    }
}
