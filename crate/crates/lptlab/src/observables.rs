//! Scalar diagnostics on density matrices.

use ndarray::Array2;
use serde::Serialize;

use crate::lindblad_engine::{apply_adjoint, LindbladModel};
use crate::linalg::{eigh, frob_norm, hermitian_part, op_norm, singular_values, sqrtm_psd, trace};
use crate::spin_algebra::{collective_spin, Operator, PTOperator, SpinAxis, SpinBasis};
use crate::{LabError, Result, C64, I};

const PSD_TOL: f64 = -1e-8;
const CLIP: f64 = -1e-10;

/// Tr ρ².
pub fn purity(rho: &Operator) -> f64 {
    let m = rho.mat();
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// (⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩)/S.
pub fn magnetization(rho: &Operator, basis: SpinBasis) -> Result<[f64; 3]> {
    if rho.dim() != basis.dim() {
        return Err(LabError::Dimension(format!("state of dim {} for spin dim {}", rho.dim(), basis.dim())));
    }
    let s = basis.spin();
    let mut out = [0.0; 3];
    for (o, ax) in out.iter_mut().zip([SpinAxis::X, SpinAxis::Y, SpinAxis::Z]) {
        *o = collective_spin(basis, ax).expect(rho).re / s;
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SqueezeReport {
    pub xi2_ku: f64,
    pub xi2_w: f64,
    pub mean_spin_direction: [f64; 3],
    pub minimizing_direction: [f64; 3],
    pub min_variance: f64,
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Kitagawa–Ueda and Wineland parameters, minimizing the transverse variance
/// through the smaller eigenvalue of the 2×2 transverse covariance.
pub fn squeeze(rho: &Operator, basis: SpinBasis) -> Result<SqueezeReport> {
    let s = basis.spin();
    let ops = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z].map(|a| collective_spin(basis, a));
    if rho.dim() != basis.dim() {
        return Err(LabError::Dimension(format!("state of dim {} for spin dim {}", rho.dim(), basis.dim())));
    }
    let mean = [0, 1, 2].map(|k| ops[k].expect(rho).re);
    let len = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    if len <= 1e-8 {
        return Err(LabError::Numerical("mean spin vanishes; squeezing direction undefined".into()));
    }
    let n0 = unit(mean);
    let helper = if n0[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = unit(cross(n0, helper));
    let e2 = cross(n0, e1);
    let along = |e: [f64; 3]| -> Operator {
        ops[0].scaled(C64::new(e[0], 0.0)).add(&ops[1].scaled(C64::new(e[1], 0.0))).add(&ops[2].scaled(C64::new(e[2], 0.0)))
    };
    let (a, b) = (along(e1), along(e2));
    let (ma, mb) = (a.expect(rho).re, b.expect(rho).re);
    let c11 = a.dot(&a).expect(rho).re - ma * ma;
    let c22 = b.dot(&b).expect(rho).re - mb * mb;
    let c12 = 0.5 * (a.dot(&b).add(&b.dot(&a))).expect(rho).re - ma * mb;
    let half_tr = 0.5 * (c11 + c22);
    let r = (0.25 * (c11 - c22).powi(2) + c12 * c12).sqrt();
    let vmin = half_tr - r;
    // Eigenvector of [[c11, c12], [c12, c22]] for vmin.
    let (u, v) = if c12.abs() > 1e-300 { (c12, vmin - c11) } else if c11 <= c22 { (1.0, 0.0) } else { (0.0, 1.0) };
    let nrm = (u * u + v * v).sqrt();
    let (u, v) = (u / nrm, v / nrm);
    let dir = [0, 1, 2].map(|k| u * e1[k] + v * e2[k]);
    Ok(SqueezeReport {
        xi2_ku: 2.0 * vmin / s,
        xi2_w: 2.0 * s * vmin / (len * len),
        mean_spin_direction: n0,
        minimizing_direction: dir,
        min_variance: vmin,
    })
}

fn check_state(rho: &Operator, name: &str) -> Result<()> {
    let (w, _) = eigh(rho.mat())?;
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    if lo < PSD_TOL {
        return Err(LabError::NotPsd(lo));
    }
    let t = trace(rho.mat());
    if (t - C64::new(1.0, 0.0)).norm() > 1e-8 {
        return Err(LabError::InvalidParameter(format!("{name} has trace {t}")));
    }
    Ok(())
}

/// Uhlmann fidelity F = Tr √(√ρ σ √ρ).
pub fn fidelity(rho: &Operator, sigma: &Operator) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(LabError::Dimension("fidelity of states with different dimensions".into()));
    }
    check_state(rho, "rho")?;
    check_state(sigma, "sigma")?;
    let sr = sqrtm_psd(rho.mat(), PSD_TOL)?;
    let m = sr.dot(sigma.mat()).dot(&sr);
    let (w, _) = eigh(&m)?;
    if let Some(&lo) = w.iter().find(|&&x| x < PSD_TOL) {
        return Err(LabError::NotPsd(lo));
    }
    Ok(w.iter().map(|&x| if x < CLIP { 0.0 } else { x.max(0.0).sqrt() }).sum())
}

/// Operator norm of ρ − PTρ(PT)⁻¹ and the entrywise absolute difference.
pub fn pt_asymmetry(rho: &Operator, pt: &PTOperator) -> Result<(f64, Array2<f64>)> {
    if rho.dim() != pt.dim() {
        return Err(LabError::Dimension("PT operator and state differ in dimension".into()));
    }
    let diff = rho.mat() - pt.conjugate(rho).mat();
    Ok((op_norm(&diff)?, diff.mapv(|z| z.norm())))
}

/// ρ_ref = (ρ₁⁺ + ρ₁⁻)/2 from the spectral split ρ₁ = ρ₁⁺ − ρ₁⁻ of a
/// Liouvillian eigenmatrix, each part normalized to unit trace. The phase of
/// ρ₁ is fixed by taking whichever of its Hermitian and anti-Hermitian parts
/// is larger.
pub fn spectral_ansatz_state(mode: &Operator) -> Result<Operator> {
    let m = mode.mat();
    let herm = hermitian_part(m);
    let anti = hermitian_part(&m.mapv(|z| -I * z));
    let h = if frob_norm(&herm) >= frob_norm(&anti) { herm } else { anti };
    let (w, v) = eigh(&h)?;
    let d = h.nrows();
    let mut parts = [Array2::<C64>::zeros((d, d)), Array2::<C64>::zeros((d, d))];
    let mut weight = [0.0_f64; 2];
    for (k, &x) in w.iter().enumerate() {
        let side = usize::from(x < 0.0);
        let col = v.column(k);
        for i in 0..d {
            for j in 0..d {
                parts[side][[i, j]] += x.abs() * col[i] * col[j].conj();
            }
        }
        weight[side] += x.abs();
    }
    if weight.iter().any(|&t| t <= 1e-14 * (weight[0] + weight[1])) {
        return Err(LabError::Numerical("eigenmatrix is (semi)definite; no ± split".into()));
    }
    let mix = &parts[0].mapv(|z| z / (2.0 * weight[0])) + &parts[1].mapv(|z| z / (2.0 * weight[1]));
    Operator::new(hermitian_part(&mix))
}

/// 𝒩 = (‖ρ^{T_B}‖₁ − 1)/2.
pub fn negativity_dense(rho: &Operator, dims: (usize, usize)) -> Result<f64> {
    let (da, db) = dims;
    if da * db != rho.dim() {
        return Err(LabError::Dimension(format!("{da}·{db} ≠ {}", rho.dim())));
    }
    let m = rho.mat();
    let pt = Array2::from_shape_fn((da * db, da * db), |(r, c)| {
        let (a, b) = (r / db, r % db);
        let (a2, b2) = (c / db, c % db);
        m[[a * db + b2, a2 * db + b]]
    });
    let tn: f64 = singular_values(&pt)?.sum();
    Ok((tn - 1.0) / 2.0)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LemmaNorms {
    pub op_norm: f64,
    pub frob_norm: f64,
    /// ‖·‖_F/√d, the Frobenius norm per basis state.
    pub frob_normalized: f64,
}

/// Norms of [iL̂†, 𝒫𝒯](O) = iL̂†(𝒫𝒯 O) − 𝒫𝒯(iL̂† O) with 𝒫𝒯 O = P Ō P.
pub fn lemma_commutator(model: &LindbladModel, pt: &PTOperator, obs: &Operator) -> Result<LemmaNorms> {
    let ptc = |o: &Operator| pt.conjugate(o);
    let first = apply_adjoint(model, &ptc(obs))?.scaled(I);
    let second = ptc(&apply_adjoint(model, obs)?.scaled(I));
    let diff = first.sub(&second);
    let d = diff.dim() as f64;
    let f = frob_norm(diff.mat());
    Ok(LemmaNorms { op_norm: op_norm(diff.mat())?, frob_norm: f, frob_normalized: f / d.sqrt() })
}

/// Operator norm of [(−iκS₊/(gS))ⁿ, (iκS₋/(gS))ᵐ].
pub fn tiss_commutator_norm(basis: SpinBasis, kappa_over_g: f64, n: u32, m: u32) -> Result<f64> {
    let s = basis.spin();
    let a = collective_spin(basis, SpinAxis::Plus).scaled(-I * (kappa_over_g / s));
    let b = collective_spin(basis, SpinAxis::Minus).scaled(I * (kappa_over_g / s));
    let pa = crate::linalg::matrix_power(a.mat(), n);
    let pb = crate::linalg::matrix_power(b.mat(), m);
    op_norm(&crate::linalg::commutator(&pa, &pb))
}
