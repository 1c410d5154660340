//! Third quantization of quadratic bosonic Lindbladians with linear jumps, and
//! the Gaussian steady state they relax to.

use std::str::FromStr;

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, Solve, SVD};
use serde::Serialize;

use crate::lindblad_engine::LindbladModel;
use crate::linalg::{max_abs, ser_cmat, ser_rmat};
use crate::model_zoo::TwoSpinParams;
use crate::spin_algebra::Operator;
use crate::{c, LabError, Result, C64};

type CMat = Array2<C64>;

/// H = a†·H a + a·K a + a†·K̄ a†,  L_μ = l_μ·a + k_μ·a†.
#[derive(Clone, Debug, Serialize)]
pub struct QuadraticBosonModel {
    pub n_modes: usize,
    #[serde(serialize_with = "ser_cmat")]
    pub h_mat: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub k_mat: CMat,
    pub jump_l: Vec<Vec<C64>>,
    pub jump_k: Vec<Vec<C64>>,
}

impl QuadraticBosonModel {
    pub fn new(h_mat: CMat, k_mat: CMat, jump_l: Vec<Vec<C64>>, jump_k: Vec<Vec<C64>>) -> Result<Self> {
        let n = h_mat.nrows();
        if h_mat.ncols() != n || k_mat.dim() != (n, n) {
            return Err(LabError::Dimension("H and K must be n×n".into()));
        }
        if jump_l.len() != jump_k.len() || jump_l.iter().chain(&jump_k).any(|v| v.len() != n) {
            return Err(LabError::Dimension("each jump needs an l and a k vector of length n".into()));
        }
        if max_abs(&(&h_mat - &h_mat.t().mapv(|z| z.conj()))) > 1e-12 {
            return Err(LabError::InvalidParameter("H must be Hermitian".into()));
        }
        if max_abs(&(&k_mat - &k_mat.t())) > 1e-12 {
            return Err(LabError::InvalidParameter("K must be symmetric".into()));
        }
        Ok(Self { n_modes: n, h_mat, k_mat, jump_l, jump_k })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureMatrix {
    #[serde(serialize_with = "ser_cmat")]
    pub x: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub m_mat: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub n_mat: CMat,
    #[serde(serialize_with = "ser_cmat")]
    pub l_mat: CMat,
    /// Eigenvalues β_r of X, sorted by descending real part.
    pub rapidities: Vec<C64>,
    pub diagonalizable: bool,
    pub eigvec_condition: f64,
}

fn outer_conj(a: &[C64], b: &[C64]) -> CMat {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
}

fn condition_number(v: &CMat) -> Result<f64> {
    let (_, s, _) = v.svd(false, false)?;
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    Ok(if smin == 0.0 { f64::INFINITY } else { smax / smin })
}

pub fn build_structure_matrix(m: &QuadraticBosonModel) -> Result<StructureMatrix> {
    let n = m.n_modes;
    let zero = || Array2::<C64>::zeros((n, n));
    let (mut mm, mut nn, mut ll) = (zero(), zero(), zero());
    for (l, k) in m.jump_l.iter().zip(&m.jump_k) {
        mm = mm + outer_conj(l, l);
        nn = nn + outer_conj(k, k);
        ll = ll + outer_conj(l, k);
    }
    let i = C64::new(0.0, 1.0);
    let cj = |a: &CMat| a.mapv(|z| z.conj());
    let tr = |a: &CMat| a.t().to_owned();
    let b11 = cj(&m.h_mat).mapv(|z| i * z) - cj(&nn) + &mm;
    let b12 = m.k_mat.mapv(|z| -2.0 * i * z) - &ll + tr(&ll);
    let b21 = cj(&m.k_mat).mapv(|z| 2.0 * i * z) - cj(&ll) + tr(&cj(&ll));
    let b22 = m.h_mat.mapv(|z| -i * z) - &nn + cj(&mm);
    let mut x = Array2::<C64>::zeros((2 * n, 2 * n));
    for r in 0..n {
        for s in 0..n {
            x[[r, s]] = 0.5 * b11[[r, s]];
            x[[r, n + s]] = 0.5 * b12[[r, s]];
            x[[n + r, s]] = 0.5 * b21[[r, s]];
            x[[n + r, n + s]] = 0.5 * b22[[r, s]];
        }
    }
    let (w, v) = x.eig()?;
    let cond = condition_number(&v)?;
    let mut rapidities = w.to_vec();
    rapidities.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(StructureMatrix {
        x,
        m_mat: mm,
        n_mat: nn,
        l_mat: ll,
        rapidities,
        diagonalizable: cond < 1e8,
        eigvec_condition: cond,
    })
}

/// λ_m = −2 Σ m_r β_r over multi-indices with Σ m_r ≤ max_total, sorted by
/// descending real part.
pub fn spectrum_from_rapidities(sm: &StructureMatrix, max_total: usize) -> Result<Vec<C64>> {
    if !sm.diagonalizable {
        return Err(LabError::Numerical(format!(
            "X is not diagonalizable (eigenvector condition {:.3e}); exceptional line",
            sm.eigvec_condition
        )));
    }
    let scale = sm.rapidities.iter().map(|b| b.norm()).fold(0.0_f64, f64::max).max(1e-300);
    if let Some(b) = sm.rapidities.iter().find(|b| b.re <= 1e-12 * scale) {
        let kind = if b.re.abs() <= 1e-12 * scale { "purely imaginary rapidity; infinitely many PIEs" } else { "rapidity with negative real part" };
        return Err(LabError::Numerical(format!("Re β = {:.3e} ({kind}); steady state not guaranteed", b.re)));
    }
    let r = sm.rapidities.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; r];
    loop {
        let lam: C64 = idx.iter().zip(&sm.rapidities).map(|(&m, b)| -2.0 * m as f64 * b).sum();
        out.push(lam);
        let mut pos = 0;
        loop {
            if pos == r {
                out.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
                return Ok(out);
            }
            idx[pos] += 1;
            if idx.iter().sum::<usize>() <= max_total {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Mean-field configuration around which the two-spin model is expanded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoSpinPhase {
    FmUp,
    FmDown,
    Am,
}

impl FromStr for TwoSpinPhase {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fm_up" | "fmup" => Ok(Self::FmUp),
            "fm_down" | "fmdown" => Ok(Self::FmDown),
            "am" => Ok(Self::Am),
            other => Err(LabError::Config(format!("unknown phase label `{other}` (fm_up, fm_down, am)"))),
        }
    }
}

/// Holstein–Primakoff expansion of the two-spin gain/loss model. Around spin
/// up S₊ ≈ √(2S) a, around spin down S₋ ≈ √(2S) a.
pub fn hp_reduce_two_spin(p: &TwoSpinParams, phase: TwoSpinPhase) -> QuadraticBosonModel {
    let (gg, gl, g) = (p.gamma_gain.sqrt(), p.gamma_loss.sqrt(), p.g);
    let z = C64::new(0.0, 0.0);
    let sx = Array2::from_shape_vec((2, 2), vec![z, c(g), c(g), z]).expect("2x2");
    let zero = Array2::<C64>::zeros((2, 2));
    // Hopping S₊ᴬS₋ᴮ/2S becomes a_A a_B† (FM↑↑), a_A† a_B (FM↓↓) or a_A a_B (AM).
    let (h, k) = match phase {
        TwoSpinPhase::FmUp | TwoSpinPhase::FmDown => (sx, zero),
        TwoSpinPhase::Am => (zero, sx.mapv(|v| v / 2.0)),
    };
    // L₁ ∝ S₊ᴬ and L₂ ∝ S₋ᴮ.
    let (l1, k1) = match phase {
        TwoSpinPhase::FmUp | TwoSpinPhase::Am => (vec![c(gg), z], vec![z, z]),
        TwoSpinPhase::FmDown => (vec![z, z], vec![c(gg), z]),
    };
    let (l2, k2) = match phase {
        TwoSpinPhase::FmUp => (vec![z, z], vec![z, c(gl)]),
        TwoSpinPhase::FmDown | TwoSpinPhase::Am => (vec![z, c(gl)], vec![z, z]),
    };
    QuadraticBosonModel::new(h, k, vec![l1, l2], vec![k1, k2]).expect("well-formed HP model")
}

/// β± = (Γg − Γl ± √((Γg + Γl)² − 4g²))/4 in the FM↑↑ phase.
pub fn beta_fm(gamma_gain: f64, gamma_loss: f64, g: f64) -> [C64; 2] {
    let disc = C64::new((gamma_gain + gamma_loss).powi(2) - 4.0 * g * g, 0.0).sqrt();
    let base = c(gamma_gain - gamma_loss);
    [(base + disc) / 4.0, (base - disc) / 4.0]
}

/// β± = (Γg + Γl ± √((Γg − Γl)² + 4g²))/4 in the AM phase.
pub fn beta_am(gamma_gain: f64, gamma_loss: f64, g: f64) -> [f64; 2] {
    let disc = ((gamma_gain - gamma_loss).powi(2) + 4.0 * g * g).sqrt();
    [(gamma_gain + gamma_loss + disc) / 4.0, (gamma_gain + gamma_loss - disc) / 4.0]
}

/// Linear drift and diffusion for v = (a₁…aₙ, a₁†…aₙ†):
/// d⟨v⟩/dt = A⟨v⟩ and d⟨v vᵀ⟩/dt = A C + C Aᵀ + D.
pub fn drift_diffusion(m: &QuadraticBosonModel) -> (CMat, CMat) {
    let n = m.n_modes;
    let dd = 2 * n;
    let mut j = Array2::<C64>::zeros((dd, dd));
    for r in 0..n {
        j[[r, n + r]] = c(1.0);
        j[[n + r, r]] = c(-1.0);
    }
    let mut q = Array2::<C64>::zeros((dd, dd));
    for r in 0..n {
        for s in 0..n {
            q[[n + r, s]] += m.h_mat[[r, s]];
            q[[r, s]] += m.k_mat[[r, s]];
            q[[n + r, n + s]] += m.k_mat[[r, s]].conj();
        }
    }
    let i = C64::new(0.0, 1.0);
    // i[H, v_k] = i Σ_m ((Q + Qᵀ)J)_{mk} v_m
    let qj = (&q + &q.t()).dot(&j);
    let mut a = qj.t().mapv(|z| i * z);
    let mut d = Array2::<C64>::zeros((dd, dd));
    for (l, k) in m.jump_l.iter().zip(&m.jump_k) {
        let lam: Vec<C64> = l.iter().chain(k.iter()).cloned().collect();
        let mu: Vec<C64> = k.iter().chain(l.iter()).map(|z| z.conj()).collect();
        let s: Vec<C64> = (0..dd).map(|col| (0..dd).map(|r| mu[r] * j[[r, col]]).sum()).collect();
        let t: Vec<C64> = (0..dd).map(|col| (0..dd).map(|r| lam[r] * j[[r, col]]).sum()).collect();
        for r in 0..dd {
            for col in 0..dd {
                a[[r, col]] += s[r] * lam[col] - t[r] * mu[col];
                d[[r, col]] += -2.0 * s[r] * t[col];
            }
        }
    }
    (a, d)
}

#[derive(Clone, Debug, Serialize)]
pub struct GaussianCovariance {
    pub n_modes: usize,
    /// C_ij = ⟨v_i v_j⟩ with v = (a, a†).
    #[serde(serialize_with = "ser_cmat")]
    pub moments: CMat,
    /// Symmetrized quadrature covariance in the order (x₁, p₁, x₂, p₂, …); vacuum is I/2.
    #[serde(serialize_with = "ser_rmat")]
    pub sigma: Array2<f64>,
    pub occupations: Vec<f64>,
    pub residual: f64,
}

/// Gaussian covariance with given ⟨v vᵀ⟩ (zero mean).
pub fn covariance_from_moments(moments: CMat) -> Result<GaussianCovariance> {
    let dd = moments.nrows();
    let n = dd / 2;
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut t = Array2::<C64>::zeros((dd, dd));
    for k in 0..n {
        t[[2 * k, k]] = c(s2);
        t[[2 * k, n + k]] = c(s2);
        t[[2 * k + 1, k]] = C64::new(0.0, -s2);
        t[[2 * k + 1, n + k]] = C64::new(0.0, s2);
    }
    let r = t.dot(&moments).dot(&t.t());
    let sym = (&r + &r.t()).mapv(|z| 0.5 * z);
    let imag = sym.iter().fold(0.0_f64, |s, z| s.max(z.im.abs()));
    if imag > 1e-8 {
        return Err(LabError::Numerical(format!("quadrature covariance has imaginary part {imag:.2e}")));
    }
    let occupations = (0..n).map(|k| moments[[n + k, k]].re).collect();
    Ok(GaussianCovariance { n_modes: n, moments, sigma: sym.mapv(|z| z.re), occupations, residual: 0.0 })
}

/// Stationary second moments from the Lyapunov equation A C + C Aᵀ + D = 0.
pub fn steady_covariance(m: &QuadraticBosonModel) -> Result<GaussianCovariance> {
    let sm = build_structure_matrix(m)?;
    let scale = sm.rapidities.iter().map(|b| b.norm()).fold(0.0_f64, f64::max).max(1e-300);
    let min_re = sm.rapidities.iter().map(|b| b.re).fold(f64::INFINITY, f64::min);
    if min_re <= 1e-10 * scale {
        return Err(LabError::Numerical(format!(
            "near-critical: min Re β = {min_re:.3e}; the Gaussian steady state is not normalizable"
        )));
    }
    let (a, d) = drift_diffusion(m);
    let dd = a.nrows();
    let nn = dd * dd;
    let mut sys = Array2::<C64>::zeros((nn, nn));
    for i in 0..dd {
        for j in 0..dd {
            let row = i * dd + j;
            for k in 0..dd {
                sys[[row, k * dd + j]] += a[[i, k]];
                sys[[row, i * dd + k]] += a[[j, k]];
            }
        }
    }
    let rhs = Array1::from_iter(d.iter().map(|z| -z));
    let sol = sys.solve(&rhs).map_err(|e| LabError::Numerical(format!("Lyapunov solve failed: {e}")))?;
    let cmat = Array2::from_shape_vec((dd, dd), sol.to_vec()).expect("square");
    let res = max_abs(&(a.dot(&cmat) + cmat.dot(&a.t()) + &d));
    if res > 1e-10 * (1.0 + max_abs(&cmat)) {
        return Err(LabError::Numerical(format!("Lyapunov residual {res:.3e}")));
    }
    let mut cov = covariance_from_moments(cmat)?;
    cov.residual = res;
    Ok(cov)
}

fn symplectic_eigenvalues(sigma: &Array2<f64>) -> Result<Vec<f64>> {
    let dd = sigma.nrows();
    let mut omega = Array2::<f64>::zeros((dd, dd));
    for k in 0..dd / 2 {
        omega[[2 * k, 2 * k + 1]] = 1.0;
        omega[[2 * k + 1, 2 * k]] = -1.0;
    }
    let (w, _) = omega.dot(sigma).mapv(|x| C64::new(x, 0.0)).eig()?;
    let mut nu: Vec<f64> = w.iter().map(|z| z.im.abs()).collect();
    nu.sort_by(f64::total_cmp);
    Ok(nu.into_iter().step_by(2).collect())
}

/// Gaussian purity 1/(2ⁿ√det σ) and 𝒩 = (‖ρ^{T_B}‖₁ − 1)/2 with the modes in
/// `subsystem_b` partially transposed.
pub fn gaussian_purity_negativity(cov: &GaussianCovariance, subsystem_b: &[usize]) -> Result<(f64, f64)> {
    let n = cov.n_modes;
    if subsystem_b.iter().any(|&k| k >= n) {
        return Err(LabError::Dimension(format!("bipartition mode index out of range for {n} modes")));
    }
    let nu = symplectic_eigenvalues(&cov.sigma)?;
    if let Some(v) = nu.iter().find(|&&v| v < 0.5 - 1e-9) {
        return Err(LabError::Numerical(format!("symplectic eigenvalue {v} violates the uncertainty relation")));
    }
    let purity = 1.0 / nu.iter().map(|v| 2.0 * v).product::<f64>();
    let mut sig = cov.sigma.clone();
    for &k in subsystem_b {
        let p = 2 * k + 1;
        for j in 0..2 * n {
            sig[[p, j]] = -sig[[p, j]];
            sig[[j, p]] = -sig[[j, p]];
        }
    }
    let nu_pt = symplectic_eigenvalues(&sig)?;
    let trace_norm: f64 = nu_pt.iter().map(|v| (1.0 / (2.0 * v)).max(1.0)).product();
    Ok((purity, (trace_norm - 1.0) / 2.0))
}

/// Ladder operators of `n` modes truncated at `cutoff` quanta each; mode 0 is
/// the leftmost tensor factor.
pub fn truncated_annihilators(n: usize, cutoff: usize) -> Vec<CMat> {
    let d1 = cutoff + 1;
    let mut a1 = Array2::<C64>::zeros((d1, d1));
    for j in 1..d1 {
        a1[[j - 1, j]] = c((j as f64).sqrt());
    }
    let eye = |d: usize| Array2::<C64>::eye(d);
    (0..n)
        .map(|k| {
            let left = d1.pow(k as u32);
            let right = d1.pow((n - k - 1) as u32);
            crate::linalg::kron(&crate::linalg::kron(&eye(left), &a1), &eye(right))
        })
        .collect()
}

/// Fock-truncated Lindbladian of a quadratic model, for brute-force checks.
pub fn truncated_model(m: &QuadraticBosonModel, cutoff: usize) -> Result<LindbladModel> {
    let n = m.n_modes;
    let ops = truncated_annihilators(n, cutoff);
    let dim = ops[0].nrows();
    let dag: Vec<CMat> = ops.iter().map(|a| a.t().mapv(|z| z.conj())).collect();
    let mut h = Array2::<C64>::zeros((dim, dim));
    for r in 0..n {
        for s in 0..n {
            h = h + dag[r].dot(&ops[s]).mapv(|z| z * m.h_mat[[r, s]]);
            h = h + ops[r].dot(&ops[s]).mapv(|z| z * m.k_mat[[r, s]]);
            h = h + dag[r].dot(&dag[s]).mapv(|z| z * m.k_mat[[r, s]].conj());
        }
    }
    let h = Operator::hermitian(crate::linalg::hermitian_part(&h))?;
    let jumps = m
        .jump_l
        .iter()
        .zip(&m.jump_k)
        .map(|(l, k)| {
            let mut op = Array2::<C64>::zeros((dim, dim));
            for r in 0..n {
                op = op + ops[r].mapv(|z| z * l[r]) + dag[r].mapv(|z| z * k[r]);
            }
            Operator::new(op)
        })
        .collect::<Result<Vec<_>>>()?;
    LindbladModel::new(h, jumps, "quadratic_boson")
}
