//! Diagonalization of vectorized Lindbladians and the diagnostics built on it:
//! steady states, gaps, purely imaginary eigenvalues, exceptional points,
//! PT measures and symmetry audits.

mod arnoldi;

use std::collections::BTreeMap;

use ndarray::Array2;
use ndarray_linalg::{Eig, EigVals};
use serde::Serialize;

pub use arnoldi::ArnoldiOptions;

use crate::lindblad_engine::{unvec, vectorize, LindbladModel, SuperOperatorMatrix};
use crate::linalg::{self, CMat};
use crate::sparse::{BandedLu, CsrMatrix};
use crate::spin_algebra::{Operator, PTOperator};
use crate::{LabError, Result, C64};

/// Largest `dim²` handled by dense diagonalization.
pub const DENSE_CAP: usize = 7000;
/// Eigenvalues with `|λ|` at or below this count as zero modes.
pub const ZERO_TOL: f64 = 1e-9;
/// Tolerance for the symmetry audit.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues with unit-norm right eigenvectors.
#[derive(Clone, Debug, Default)]
pub struct EigenPairs {
    pub values: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
}

impl EigenPairs {
    /// Dense eigendecomposition of a small matrix; vectors are unit-norm and phase-fixed.
    pub fn from_dense(a: &CMat) -> Result<Self> {
        let (w, v) = a.eig()?;
        let mut out = EigenPairs::default();
        for (k, &lam) in w.iter().enumerate() {
            let mut x: Vec<C64> = v.column(k).to_vec();
            normalize_mode(&mut x);
            out.values.push(lam);
            out.vectors.push(x);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn vnorm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Unit norm, largest-magnitude entry real and positive.
pub fn normalize_mode(x: &mut [C64]) {
    let n = vnorm(x);
    if n == 0.0 {
        return;
    }
    let mut best = (0usize, 0.0f64);
    for (i, z) in x.iter().enumerate() {
        let a = z.norm();
        if a > best.1 * (1.0 + 1e-12) {
            best = (i, a);
        }
    }
    let ph = x[best.0].conj() / (best.1 * n);
    x.iter_mut().for_each(|z| *z *= ph);
}

fn sort_key_order(values: &[C64]) -> Vec<usize> {
    let scale = values.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    let q = 1e-10 * scale;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (za, zb) = (values[a], values[b]);
        let (ra, rb) = ((za.re / q).round(), (zb.re / q).round());
        rb.total_cmp(&ra)
            .then(zb.im.abs().total_cmp(&za.im.abs()))
            .then(zb.im.total_cmp(&za.im))
            .then(a.cmp(&b))
    });
    order
}

/// Sort eigenvalues by descending Re, then descending |Im|, positive Im first.
pub fn sort_spectrum(values: &mut Vec<C64>) {
    let order = sort_key_order(values);
    *values = order.iter().map(|&i| values[i]).collect();
}

fn check_dense_cap(mat: &SuperOperatorMatrix) -> Result<()> {
    if mat.dim_sq() > DENSE_CAP {
        return Err(LabError::SizeCap(format!(
            "dense diagonalization needs dim² ≤ {DENSE_CAP}, got {}",
            mat.dim_sq()
        )));
    }
    Ok(())
}

/// Dense eigendecomposition carried out block by block over the connected
/// components of the sparsity graph.
///
/// The superoperator commutes with the antilinear map `J: vec(X) ↦ vec(X†)`,
/// so eigenpairs come as `(λ, x)` and `(λ̄, Jx)`. A block whose `J`-image is
/// another block supplies that block's eigenpairs directly. Within a
/// `J`-closed block the computed spectrum is paired up by [`conjugate_pairs`].
fn block_eig(a: &CsrMatrix, d: usize, vectors: bool) -> Result<EigenPairs> {
    let n = a.n();
    let flip = |k: usize| (k % d) * d + k / d;
    let zero = C64::new(0.0, 0.0);
    let mut out = EigenPairs::default();
    for comp in a.components() {
        let mut image: Vec<usize> = comp.iter().map(|&k| flip(k)).collect();
        image.sort_unstable();
        if image[0] < comp[0] {
            continue;
        }
        let paired = image != comp;
        let sparse = a.submatrix(&comp);
        let sub = sparse.to_dense();
        let (mut w, mut v) = if vectors {
            let (w, v) = sub.eig()?;
            (w.to_vec(), Some(v))
        } else {
            (sub.eigvals()?.to_vec(), None)
        };
        if !paired {
            let jmap: Vec<usize> = comp.iter().map(|&g| comp.binary_search(&flip(g)).expect("block is closed under J")).collect();
            if let Some((w2, v2)) = conjugate_pairs(&sparse, &jmap, &w, v.as_ref()) {
                w = w2;
                v = v2;
            }
        }
        for (k, &lam) in w.iter().enumerate() {
            out.values.push(lam);
            if paired {
                out.values.push(lam.conj());
            }
            if let Some(v) = &v {
                let mut x = vec![zero; n];
                for (r, &gi) in comp.iter().enumerate() {
                    x[gi] = v[[r, k]];
                }
                if paired {
                    let mut y = vec![zero; n];
                    for &gi in &comp {
                        y[flip(gi)] = x[gi].conj();
                    }
                    normalize_mode(&mut y);
                    normalize_mode(&mut x);
                    out.vectors.push(x);
                    out.vectors.push(y);
                } else {
                    normalize_mode(&mut x);
                    out.vectors.push(x);
                }
            }
        }
    }
    Ok(out)
}

fn apply_j(x: &[C64], jmap: &[usize]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    for (r, &j) in jmap.iter().enumerate() {
        y[j] = x[r].conj();
    }
    y
}

fn pair_residual(a: &CsrMatrix, lam: C64, x: &[C64]) -> f64 {
    let y = a.apply(x);
    let r = y.iter().zip(x).map(|(u, v)| (u - lam * v).norm_sqr()).sum::<f64>().sqrt();
    r / vnorm(x).max(f64::MIN_POSITIVE)
}

/// Rebuilds the spectrum of a `J`-closed block so that it is exactly closed
/// under conjugation. Each eigenvalue in the upper half plane is matched with
/// the nearest unmatched one below the axis, provided that one lies closer to
/// `λ̄` than `λ` lies to the axis; the partner is replaced by `(λ̄, Jx)`.
/// Unmatched eigenvalues are moved onto the real axis with `J`-invariant
/// eigenvectors. With vectors, a projected pair is kept only if its residual
/// stays within ten times the original (or `1e-12·‖A‖`). Without vectors,
/// only imaginary parts below `1e-6·‖A‖` are dropped. Returns `None` when the
/// spectrum cannot be paired.
fn conjugate_pairs(a: &CsrMatrix, jmap: &[usize], w: &[C64], v: Option<&CMat>) -> Option<(Vec<C64>, Option<CMat>)> {
    let m = w.len();
    let scale = a.max_abs().max(1.0);
    let mut upper: Vec<usize> = (0..m).filter(|&k| w[k].im > 0.0).collect();
    upper.sort_by(|&x, &y| w[y].im.total_cmp(&w[x].im));
    let mut lower: Vec<usize> = (0..m).filter(|&k| w[k].im < 0.0).collect();
    let mut taken = vec![false; m];
    let mut pairs = Vec::new();
    for &p in &upper {
        let target = w[p].conj();
        let best = lower
            .iter()
            .enumerate()
            .map(|(i, &q)| (i, (w[q] - target).norm()))
            .min_by(|x, y| x.1.total_cmp(&y.1));
        if let Some((i, dist)) = best {
            if dist < w[p].im {
                taken[p] = true;
                taken[lower.swap_remove(i)] = true;
                pairs.push(p);
            }
        }
    }
    let lone: Vec<usize> = (0..m).filter(|&k| !taken[k]).collect();

    let mut values = Vec::with_capacity(m);
    for &p in &pairs {
        values.push(w[p]);
        values.push(w[p].conj());
    }
    let Some(v) = v else {
        for &k in &lone {
            if w[k].im.abs() > 1e-6 * scale {
                return None;
            }
            values.push(C64::new(w[k].re, 0.0));
        }
        return Some((values, None));
    };

    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(m);
    for &p in &pairs {
        let x = v.column(p).to_vec();
        cols.push(apply_j(&x, jmap));
        cols.insert(cols.len() - 1, x);
    }
    for &k in &lone {
        let x = v.column(k).to_vec();
        let jx = apply_j(&x, jmap);
        let c = vdot(&x, &jx);
        let phase = if c.norm() > 0.0 { (c / c.norm()).sqrt() } else { C64::new(1.0, 0.0) };
        let h: Vec<C64> = x.iter().map(|z| z * phase).collect();
        let jh = apply_j(&h, jmap);
        let proj: Vec<C64> = h.iter().zip(&jh).map(|(p, q)| (p + q) * 0.5).collect();
        let lam = C64::new(w[k].re, 0.0);
        let before = pair_residual(a, w[k], &x);
        let after = pair_residual(a, lam, &proj);
        if !(after <= (10.0 * before).max(1e-12 * scale)) {
            return None;
        }
        values.push(lam);
        cols.push(proj);
    }
    let mut out = Array2::<C64>::zeros((m, m));
    for (k, col) in cols.iter().enumerate() {
        for (r, z) in col.iter().enumerate() {
            out[[r, k]] = *z;
        }
    }
    Some((values, Some(out)))
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    pub dim: usize,
    pub eigenvalues: Vec<C64>,
    pub right_modes: Vec<Operator>,
    pub gap: f64,
    pub steady_state: Option<Operator>,
    pub zero_mode_count: usize,
    pub pie_list: Vec<usize>,
    pub tol_pie: f64,
    pub residuals: Vec<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl SpectrumResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn max_real(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// JSON document; eigenmodes are included only on request.
    pub fn to_json(&self, include_modes: bool) -> serde_json::Value {
        #[derive(Serialize)]
        struct Cx {
            re: f64,
            im: f64,
        }
        let cx = |z: &C64| Cx { re: z.re, im: z.im };
        let mut v = serde_json::json!({
            "dim": self.dim,
            "vectorization": "row-major",
            "eigenvalues": self.eigenvalues.iter().map(cx).collect::<Vec<_>>(),
            "gap": self.gap,
            "zero_mode_count": self.zero_mode_count,
            "pie_list": self.pie_list,
            "tol_pie": self.tol_pie,
            "max_residual": self.max_residual(),
            "steady_state": self.steady_state,
            "metadata": self.metadata,
        });
        if include_modes {
            v["right_modes"] = serde_json::to_value(&self.right_modes).unwrap_or_default();
        }
        v
    }
}

fn gap_of(values: &[C64], zero: &[bool]) -> f64 {
    let m = values
        .iter()
        .zip(zero)
        .filter(|(_, &z)| !z)
        .map(|(v, _)| v.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if m.is_finite() {
        (-m).max(0.0)
    } else {
        0.0
    }
}

fn steady_from_vec(v: &[C64], d: usize) -> Result<(Operator, f64)> {
    let rho = unvec(v, d);
    let tr = linalg::trace(&rho);
    if tr.norm() < 1e-14 * vnorm(v).max(f64::MIN_POSITIVE) {
        return Err(LabError::Numerical("null mode is traceless".into()));
    }
    let rho = linalg::hermitian_part(&rho.mapv(|z| z / tr));
    let (w, _) = linalg::eigh(&rho)?;
    let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((Operator::from_mat(rho), min))
}

/// Complete eigendecomposition with steady state, gap and PIE list.
pub fn full_spectrum(mat: &SuperOperatorMatrix) -> Result<SpectrumResult> {
    full_spectrum_with(mat, None)
}

pub fn full_spectrum_with(mat: &SuperOperatorMatrix, tol_pie: Option<f64>) -> Result<SpectrumResult> {
    check_dense_cap(mat)?;
    let a = mat.matrix();
    let pairs = block_eig(a, mat.dim(), true)?;
    let order = sort_key_order(&pairs.values);
    let values: Vec<C64> = order.iter().map(|&i| pairs.values[i]).collect();
    let vectors: Vec<&Vec<C64>> = order.iter().map(|&i| &pairs.vectors[i]).collect();
    let d = mat.dim();

    let residuals: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(&lam, x)| {
            let y = a.apply(x);
            y.iter().zip(x.iter()).map(|(u, v)| (u - lam * v).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect();

    let mut zero: Vec<bool> = values.iter().map(|z| z.norm() <= ZERO_TOL).collect();
    let mut metadata = BTreeMap::new();
    let mut count = zero.iter().filter(|&&z| z).count();
    if count == 0 {
        let (k, lam) = values
            .iter()
            .enumerate()
            .min_by(|x, y| x.1.norm().total_cmp(&y.1.norm()))
            .ok_or_else(|| LabError::Numerical("empty spectrum".into()))?;
        if lam.norm() > 1e-6 * a.max_abs().max(1.0) {
            return Err(LabError::Numerical(format!("no zero mode; smallest |λ| = {:.3e}", lam.norm())));
        }
        metadata.insert("zero_mode_abs".into(), format!("{:.3e}", lam.norm()));
        zero[k] = true;
        count = 1;
    }
    let steady_state = if count == 1 {
        let k = zero.iter().position(|&z| z).unwrap_or(0);
        let (rho, min) = steady_from_vec(vectors[k], d)?;
        metadata.insert("steady_min_eig".into(), format!("{min:.3e}"));
        Some(rho)
    } else {
        metadata.insert("degenerate_zero_modes".into(), count.to_string());
        None
    };
    let gap = gap_of(&values, &zero);
    let tol_pie = tol_pie.unwrap_or(1e-6 * a.max_abs());
    let pie_list = values
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re.abs() <= tol_pie && z.im.abs() > tol_pie)
        .map(|(i, _)| i)
        .collect();
    let right_modes = vectors
        .iter()
        .map(|x| Operator::from_mat(unvec(x, d)))
        .collect();
    Ok(SpectrumResult {
        dim: d,
        eigenvalues: values,
        right_modes,
        gap,
        steady_state,
        zero_mode_count: count,
        pie_list,
        tol_pie,
        residuals,
        metadata,
    })
}

/// Eigenvalues only, sorted like [`full_spectrum`].
pub fn eigenvalues(mat: &SuperOperatorMatrix) -> Result<Vec<C64>> {
    check_dense_cap(mat)?;
    let mut v = block_eig(mat.matrix(), mat.dim(), false)?.values;
    sort_spectrum(&mut v);
    Ok(v)
}

/// Gap and zero-mode count from the dense spectrum.
pub fn dense_gap(mat: &SuperOperatorMatrix) -> Result<(f64, usize)> {
    let v = eigenvalues(mat)?;
    let zero: Vec<bool> = v.iter().map(|z| z.norm() <= ZERO_TOL).collect();
    Ok((gap_of(&v, &zero), zero.iter().filter(|&&z| z).count()))
}

fn shift_invert(a: &CsrMatrix, shift: C64) -> Result<BandedLu> {
    BandedLu::factor(&a.add_diagonal(-shift))
}

/// Null-space solve for the steady state without full diagonalization.
pub fn steady_state_direct(mat: &SuperOperatorMatrix) -> Result<Operator> {
    let a = mat.matrix();
    let d = mat.dim();
    let n = a.n();
    let comps: Vec<Vec<usize>> = a
        .components()
        .into_iter()
        .filter(|c| c.iter().any(|&g| g % (d + 1) == 0))
        .collect();
    if comps.len() > 1 {
        return Err(LabError::DegenerateZeroModes { count: comps.len() });
    }
    let comp = &comps[0];
    let sub = a.submatrix(comp);
    let m = sub.n();

    let null = if m <= 64 {
        let pairs = EigenPairs::from_dense(&sub.to_dense())?;
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&x, &y| pairs.values[x].norm().total_cmp(&pairs.values[y].norm()));
        let count = idx.iter().filter(|&&k| pairs.values[k].norm() <= ZERO_TOL).count();
        if count > 1 {
            return Err(LabError::DegenerateZeroModes { count });
        }
        pairs.vectors[idx[0]].clone()
    } else {
        let sigma = C64::new(1e-10 * sub.norm_inf().max(1.0), 0.0);
        let lu = shift_invert(&sub, sigma)?;
        // Several random vectors under inverse iteration collapse onto the null
        // space; its dimension shows up as their numerical rank.
        let mut block: Vec<Vec<C64>> = (0..3).map(|s| arnoldi::start_vector(m, 11 + s)).collect();
        for _ in 0..6 {
            for x in block.iter_mut() {
                lu.solve_in_place(x);
                let nx = vnorm(x);
                x.iter_mut().for_each(|z| *z /= nx);
            }
        }
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for x in &block {
            let mut y = x.clone();
            for _ in 0..2 {
                for b in &basis {
                    let c = vdot(b, &y);
                    y.iter_mut().zip(b).for_each(|(u, v)| *u -= c * v);
                }
            }
            let ny = vnorm(&y);
            if ny > 1e-6 {
                y.iter_mut().for_each(|z| *z /= ny);
                basis.push(y);
            }
        }
        if basis.len() > 1 {
            return Err(LabError::DegenerateZeroModes { count: basis.len() });
        }
        let mut x = block.swap_remove(0);
        lu.solve_in_place(&mut x);
        x
    };
    let mut full = vec![C64::new(0.0, 0.0); n];
    for (r, &g) in comp.iter().enumerate() {
        full[g] = null[r];
    }
    let (rho, min) = steady_from_vec(&full, d)?;
    if min < -1e-8 {
        return Err(LabError::NotPsd(min));
    }
    Ok(rho)
}

/// Eigenpairs nearest to a complex shift.
#[derive(Clone, Debug)]
pub struct PartialSpectrum {
    pub shift: C64,
    pub eigenvalues: Vec<C64>,
    pub modes: Vec<Vec<C64>>,
    pub residuals: Vec<f64>,
}

/// Shift-invert Arnoldi on the banded LU of `mat − shift`; results sorted by distance to the shift.
pub fn partial_spectrum(mat: &SuperOperatorMatrix, shift: C64, opts: ArnoldiOptions) -> Result<PartialSpectrum> {
    partial_spectrum_csr(mat.matrix(), shift, opts)
}

pub fn partial_spectrum_csr(a: &CsrMatrix, shift: C64, opts: ArnoldiOptions) -> Result<PartialSpectrum> {
    let n = a.n();
    let (values, modes) = if n <= 64 {
        let pairs = EigenPairs::from_dense(&a.to_dense())?;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&x, &y| (pairs.values[x] - shift).norm().total_cmp(&(pairs.values[y] - shift).norm()));
        idx.truncate(opts.nev.min(n));
        (
            idx.iter().map(|&k| pairs.values[k]).collect::<Vec<_>>(),
            idx.iter().map(|&k| pairs.vectors[k].clone()).collect::<Vec<_>>(),
        )
    } else {
        let lu = shift_invert(a, shift)?;
        let op = |x: &[C64], y: &mut [C64]| {
            y.copy_from_slice(x);
            lu.solve_in_place(y);
        };
        let r = arnoldi::largest_magnitude(n, op, opts, arnoldi::start_vector(n, 7))?;
        let values: Vec<C64> = r.values.iter().map(|t| shift + 1.0 / t).collect();
        let mut modes = r.vectors;
        modes.iter_mut().for_each(|x| normalize_mode(x));
        (values, modes)
    };
    let residuals = values
        .iter()
        .zip(&modes)
        .map(|(&lam, x)| {
            let y = a.apply(x);
            y.iter().zip(x).map(|(u, v)| (u - lam * v).norm_sqr()).sum::<f64>().sqrt()
        })
        .collect();
    Ok(PartialSpectrum { shift, eigenvalues: values, modes, residuals })
}

/// Eigenvalues found by sweeping shift-invert disks up the imaginary axis.
#[derive(Clone, Debug, Serialize)]
pub struct AxisScan {
    pub eigenvalues: Vec<C64>,
    /// ‖A x − λ x‖ of the unit-norm Ritz vector for each entry of `eigenvalues`.
    pub residuals: Vec<f64>,
    pub shifts: Vec<C64>,
    pub radii: Vec<f64>,
    /// Every eigenvalue with `Re λ ≥ −depth` and `0 ≤ Im λ ≤ omega_max` is in `eigenvalues`.
    pub depth: f64,
    pub gap: Option<f64>,
    pub certified: bool,
}

impl AxisScan {
    /// Leading nonzero eigenvalue (largest Re, upper half plane).
    pub fn leading_nonzero(&self) -> Option<C64> {
        self.eigenvalues
            .iter()
            .filter(|z| z.norm() > ZERO_TOL && z.im >= -ZERO_TOL)
            .copied()
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .map(|z| if z.im.abs() <= ZERO_TOL { C64::new(z.re, 0.0) } else { z })
    }

    /// Largest-Re eigenvalue with |Im λ| > `im_tol`, from the upper half plane.
    pub fn leading_oscillatory(&self, im_tol: f64) -> Option<C64> {
        leading_oscillatory(&self.eigenvalues, im_tol)
    }
}

/// Largest-Re eigenvalue with Im λ > `im_tol`.
pub fn leading_oscillatory(values: &[C64], im_tol: f64) -> Option<C64> {
    values.iter().filter(|z| z.im > im_tol).copied().max_by(|a, b| a.re.total_cmp(&b.re))
}

fn pair_depth(r1: f64, r2: f64, h: f64) -> f64 {
    if h > r1 + r2 {
        return 0.0;
    }
    let f = |d: f64| (r1 * r1 - d * d).max(0.0).sqrt() + (r2 * r2 - d * d).max(0.0).sqrt() - h;
    let (mut lo, mut hi) = (0.0, r1.min(r2));
    if f(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if f(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Iterative gap: covers the strip `0 ≤ Im λ ≤ omega_max` near the imaginary
/// axis with shift-invert disks. The spectrum is closed under conjugation, so
/// the upper half plane suffices.
pub fn iterative_gap(mat: &SuperOperatorMatrix, omega_max: f64, opts: ArnoldiOptions) -> Result<AxisScan> {
    let a = mat.matrix();
    let delta = 1e-3;
    let mut shifts = Vec::new();
    let mut radii: Vec<f64> = Vec::new();
    let mut found: Vec<C64> = Vec::new();
    let mut found_res: Vec<f64> = Vec::new();
    let mut omega = 0.0;
    let mut depth = f64::INFINITY;
    loop {
        let sigma = C64::new(delta, omega);
        let ps = partial_spectrum_csr(a, sigma, opts)?;
        let r = ps.eigenvalues.iter().map(|z| (z - sigma).norm()).fold(0.0, f64::max);
        for (&z, &res) in ps.eigenvalues.iter().zip(&ps.residuals) {
            if !found.iter().any(|w| (w - z).norm() <= 1e-9 * (1.0 + z.norm())) {
                found.push(z);
                found_res.push(res);
            }
        }
        if let (Some(&r_prev), Some(&s_prev)) = (radii.last(), shifts.last()) {
            let s_prev: C64 = s_prev;
            depth = depth.min(pair_depth(r_prev, r, omega - s_prev.im) - delta);
        } else {
            depth = (r * r - 0.0).sqrt().min(r) - delta;
        }
        shifts.push(sigma);
        radii.push(r);
        if omega + (r * r - delta * delta).max(0.0).sqrt() >= omega_max || r == 0.0 {
            break;
        }
        omega += r;
    }
    let order = sort_key_order(&found);
    let found: Vec<C64> = order.iter().map(|&i| found[i]).collect();
    let residuals: Vec<f64> = order.iter().map(|&i| found_res[i]).collect();
    let depth = depth.max(0.0);
    let nonzero: Vec<&C64> = found.iter().filter(|z| z.norm() > ZERO_TOL).collect();
    let gap = nonzero.iter().map(|z| z.re).fold(None, |m: Option<f64>, x| Some(m.map_or(x, |y| y.max(x))));
    let gap = gap.map(|g| (-g).max(0.0));
    let certified = gap.is_some_and(|g| g < depth);
    Ok(AxisScan { eigenvalues: found, residuals, shifts, radii, depth, gap, certified })
}

#[derive(Clone, Debug, Serialize)]
pub struct CommensurateRatio {
    pub lower: usize,
    pub upper: usize,
    pub ratio: f64,
    pub p: u64,
    pub q: u64,
    pub error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PieReport {
    pub modes: Vec<(usize, f64)>,
    pub ratios: Vec<CommensurateRatio>,
}

/// Best rational approximation with denominator at most `max_q` (continued fractions).
pub fn rational_fit(x: f64, max_q: u64) -> (u64, u64) {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let (p2, q2) = (a as u64 * p1 + p0, a as u64 * q1 + q0);
        if q2 > max_q {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = r - a;
        if frac < 1e-12 {
            break;
        }
        r = 1.0 / frac;
    }
    (p1, q1.max(1))
}

/// Purely imaginary eigenvalues and the commensurability of their frequencies.
pub fn pie_detect(spec: &SpectrumResult, tol_pie: f64) -> PieReport {
    pie_detect_values(&spec.eigenvalues, tol_pie)
}

pub fn pie_detect_values(values: &[C64], tol_pie: f64) -> PieReport {
    let modes: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re.abs() <= tol_pie && z.im.abs() > tol_pie)
        .map(|(i, z)| (i, z.im))
        .collect();
    let mut freqs: Vec<(usize, f64)> = Vec::new();
    for &(i, w) in &modes {
        if w > 0.0 && !freqs.iter().any(|&(_, f)| (f - w).abs() <= tol_pie.max(1e-12)) {
            freqs.push((i, w));
        }
    }
    freqs.sort_by(|a, b| a.1.total_cmp(&b.1));
    freqs.truncate(24);
    let mut ratios = Vec::new();
    for a in 0..freqs.len() {
        for b in a + 1..freqs.len() {
            let ratio = freqs[b].1 / freqs[a].1;
            let (p, q) = rational_fit(ratio, 16);
            ratios.push(CommensurateRatio {
                lower: freqs[a].0,
                upper: freqs[b].0,
                ratio,
                p,
                q,
                error: (ratio - p as f64 / q as f64).abs(),
            });
        }
    }
    PieReport { modes, ratios }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EPDiagnostic {
    pub pair_indices: (usize, usize),
    pub eigenvalue_distance: f64,
    pub mode_overlap: f64,
    pub ep_score: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EpScan {
    pub points: Vec<(f64, EPDiagnostic)>,
    pub estimate: f64,
    pub max_score: f64,
}

/// Best EP candidate among the first `max_modes` pairs (in the given order).
pub fn ep_diagnostic(pairs: &EigenPairs, max_modes: usize, eps: f64) -> Option<EPDiagnostic> {
    let k = pairs.len().min(max_modes);
    let mut best: Option<EPDiagnostic> = None;
    for i in 0..k {
        for j in i + 1..k {
            let (vi, vj) = (&pairs.vectors[i], &pairs.vectors[j]);
            let ov = vdot(vi, vj).norm() / (vnorm(vi) * vnorm(vj)).max(f64::MIN_POSITIVE);
            let dist = (pairs.values[i] - pairs.values[j]).norm();
            let score = ov / (dist + eps);
            if best.is_none_or(|b| score > b.ep_score) {
                best = Some(EPDiagnostic {
                    pair_indices: (i, j),
                    eigenvalue_distance: dist,
                    mode_overlap: ov,
                    ep_score: score,
                });
            }
        }
    }
    best
}

/// Scores each grid point; the maximal score marks the finite-size EP estimate.
pub fn ep_scan_pairs(points: &[(f64, EigenPairs)], max_modes: usize, eps: f64) -> Result<EpScan> {
    let increasing = points.windows(2).all(|w| w[1].0 > w[0].0);
    let decreasing = points.windows(2).all(|w| w[1].0 < w[0].0);
    if !(increasing || decreasing) {
        return Err(LabError::InvalidParameter("ep_scan grid must be monotone".into()));
    }
    let mut out = Vec::new();
    for (p, pairs) in points {
        if let Some(d) = ep_diagnostic(pairs, max_modes, eps) {
            out.push((*p, d));
        }
    }
    let (estimate, max_score) = out
        .iter()
        .max_by(|a, b| a.1.ep_score.total_cmp(&b.1.ep_score))
        .map(|(p, d)| (*p, d.ep_score))
        .unwrap_or((f64::NAN, 0.0));
    Ok(EpScan { points: out, estimate, max_score })
}

/// EP scan over a sweep of vectorized Lindbladians. The zero mode is dropped
/// and the next `max_modes` modes (by descending Re) enter the pair search.
pub fn ep_scan(sweep: &[(f64, SuperOperatorMatrix)], max_modes: usize) -> Result<EpScan> {
    let mut pts = Vec::with_capacity(sweep.len());
    for (p, m) in sweep {
        let spec = full_spectrum(m)?;
        let mut ep = EigenPairs::default();
        for (k, (lam, mode)) in spec.eigenvalues.iter().zip(&spec.right_modes).enumerate() {
            if k < spec.zero_mode_count && lam.norm() <= ZERO_TOL.max(1e-6) {
                continue;
            }
            ep.values.push(*lam);
            ep.vectors.push(mode.mat().iter().copied().collect());
        }
        pts.push((*p, ep));
    }
    ep_scan_pairs(&pts, max_modes, 1e-12)
}

#[derive(Clone, Debug, Serialize)]
pub struct CrosshairsReport {
    pub on_axes_fraction: f64,
    pub offenders: Vec<C64>,
    pub eigenvalues: Vec<C64>,
}

/// Fraction of unshifted eigenvalues on `Re λ = Re shift` or on the real axis.
pub fn crosshairs_check(mat_shifted: &SuperOperatorMatrix, shift: C64, tol: f64) -> Result<CrosshairsReport> {
    let mu = eigenvalues(mat_shifted)?;
    let lam: Vec<C64> = mu.iter().map(|z| z + shift).collect();
    let offenders: Vec<C64> = lam
        .iter()
        .filter(|z| (z.re - shift.re).abs() > tol && z.im.abs() > tol)
        .copied()
        .collect();
    let frac = if lam.is_empty() { 1.0 } else { 1.0 - offenders.len() as f64 / lam.len() as f64 };
    Ok(CrosshairsReport { on_axes_fraction: frac, offenders, eigenvalues: lam })
}

/// Frobenius-norm distance of a mode from proportionality with its PT image.
pub fn pt_mode_measure(mode: &Operator, pt: &PTOperator) -> Result<(f64, C64)> {
    let img = pt.conjugate(mode);
    let den = linalg::hs_inner(img.mat(), img.mat());
    if den.norm() == 0.0 {
        return Err(LabError::InvalidParameter("PT image has zero norm".into()));
    }
    let alpha = linalg::hs_inner(img.mat(), mode.mat()) / den;
    let num = linalg::frob_norm(&(mode.mat() - &img.mat().mapv(|z| z * alpha)));
    let r = num / (mode.frob_norm() + alpha.norm() * img.frob_norm());
    Ok((r.clamp(0.0, 1.0), alpha))
}

pub enum SymmetryCandidate<'a> {
    Operator(&'a Operator),
    Pt(&'a PTOperator),
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SymmetryReport {
    pub strong_unitary: Option<bool>,
    pub weak_unitary: Option<bool>,
    pub strong_dynamical: Option<bool>,
    pub dynamical_omega: Option<f64>,
    pub lpt_multiset: Option<bool>,
    pub lpt_generator: Option<bool>,
    pub lpt: Option<bool>,
    /// Multiset test failed while the generators agree numerically.
    pub lpt_gauge_flag: bool,
    pub anti_pt: Option<bool>,
    pub defects: BTreeMap<String, f64>,
}

fn rel(num: f64, den: f64) -> f64 {
    num / den.max(1e-300)
}

fn sparse_kron(a: &CMat, b: &CMat) -> CsrMatrix {
    let (n, m) = (a.nrows(), b.nrows());
    let nz = |x: &CMat| x.indexed_iter().filter(|(_, z)| z.norm() != 0.0).map(|((i, j), z)| (i, j, *z)).collect::<Vec<_>>();
    let (za, zb) = (nz(a), nz(b));
    let mut t = Vec::with_capacity(za.len() * zb.len());
    for &(i, j, x) in &za {
        for &(k, l, y) in &zb {
            t.push((i * m + k, j * m + l, x * y));
        }
    }
    CsrMatrix::from_triplets(n * m, t)
}

fn vectorize_if_small(model: &LindbladModel) -> Result<Option<SuperOperatorMatrix>> {
    match vectorize(model) {
        Ok(v) => Ok(Some(v)),
        Err(LabError::SizeCap(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn commutator_defect(a: &CMat, u: &CMat) -> f64 {
    rel(linalg::frob_norm(&linalg::commutator(a, u)), 2.0 * linalg::frob_norm(a) * linalg::frob_norm(u))
}

/// Which symmetries of `model` the candidate realizes, each to 1e−10.
pub fn symmetry_audit(model: &LindbladModel, candidate: SymmetryCandidate<'_>) -> Result<SymmetryReport> {
    let d = model.dim();
    let mut rep = SymmetryReport::default();
    let h = model.hamiltonian.mat();
    match candidate {
        SymmetryCandidate::Operator(u) => {
            if u.dim() != d {
                return Err(LabError::Dimension(format!("candidate dim {} vs model dim {d}", u.dim())));
            }
            let um = u.mat();
            let mut strong = commutator_defect(h, um);
            for l in &model.jumps {
                strong = strong.max(commutator_defect(l.mat(), um));
            }
            rep.defects.insert("strong".into(), strong);
            rep.strong_unitary = Some(strong <= SYMMETRY_TOL);

            if let Some(lbar) = vectorize_if_small(model)? {
                let w = sparse_kron(um, &linalg::conj(um));
                let lhs = lbar.matrix().matmul(&w);
                let rhs = w.matmul(lbar.matrix());
                let diff = lhs.scale_add(C64::new(1.0, 0.0), &rhs, C64::new(-1.0, 0.0)).max_abs();
                let weak = rel(diff, lbar.matrix().max_abs() * w.max_abs());
                rep.defects.insert("weak".into(), weak);
                rep.weak_unitary = Some(weak <= SYMMETRY_TOL);
            }

            let ha = linalg::commutator(h, um);
            let aa = linalg::hs_inner(um, um);
            let omega = (linalg::hs_inner(um, &ha) / aa).re;
            let mut dyn_def = rel(
                linalg::frob_norm(&(&ha - &um.mapv(|z| z * omega))),
                linalg::frob_norm(&ha) + linalg::frob_norm(um) * omega.abs().max(1.0),
            );
            for l in &model.jumps {
                dyn_def = dyn_def
                    .max(commutator_defect(l.mat(), um))
                    .max(commutator_defect(&linalg::dagger(l.mat()), um));
            }
            rep.defects.insert("dynamical".into(), dyn_def);
            rep.strong_dynamical = Some(dyn_def <= SYMMETRY_TOL);
            rep.dynamical_omega = Some(omega);
        }
        SymmetryCandidate::Pt(pt) => {
            if pt.dim() != d {
                return Err(LabError::Dimension(format!("candidate dim {} vs model dim {d}", pt.dim())));
            }
            let mapped: Vec<CMat> = model.jumps.iter().map(|l| pt.lpt_map(l).into_mat()).collect();
            let mut used = vec![false; mapped.len()];
            let mut multiset = true;
            let mut worst = 0.0_f64;
            for l in &model.jumps {
                let lm = l.mat();
                let nl = linalg::frob_norm(lm);
                let mut hit = None;
                for (k, m) in mapped.iter().enumerate() {
                    if used[k] {
                        continue;
                    }
                    let nm = linalg::frob_norm(m);
                    let ov = linalg::hs_inner(lm, m).norm();
                    let def = rel((nl * nm - ov).abs(), nl * nm).max(rel((nl - nm).abs(), nl));
                    if def <= SYMMETRY_TOL {
                        hit = Some((k, def));
                        break;
                    }
                }
                match hit {
                    Some((k, def)) => {
                        used[k] = true;
                        worst = worst.max(def);
                    }
                    None => multiset = false,
                }
            }
            let hp = pt.lpt_map(&model.hamiltonian).into_mat();
            let dh = &hp - h;
            let shift = linalg::trace(&dh) / d as f64;
            let dh0 = &dh - &linalg::eye(d).mapv(|z| z * shift);
            let hdef = rel(linalg::frob_norm(&dh0), linalg::frob_norm(h).max(1.0));
            rep.defects.insert("lpt_jumps".into(), if multiset { worst } else { 1.0 });
            rep.defects.insert("lpt_hamiltonian".into(), hdef);
            let ms = multiset && hdef <= SYMMETRY_TOL;
            rep.lpt_multiset = Some(ms);

            rep.lpt = Some(ms);
            if let Some(lbar) = vectorize_if_small(model)? {
                let hp_op = Operator::hermitian(linalg::hermitian_part(&hp))?;
                let jumps: Vec<Operator> = mapped.into_iter().map(Operator::from_mat).collect();
                let image = LindbladModel::new(hp_op, jumps, "lpt-image")?;
                let lbar2 = vectorize(&image)?;
                let gdef = rel(
                    lbar.matrix().scale_add(C64::new(1.0, 0.0), lbar2.matrix(), C64::new(-1.0, 0.0)).max_abs(),
                    lbar.matrix().max_abs(),
                );
                rep.defects.insert("lpt_generator".into(), gdef);
                let gen = gdef <= SYMMETRY_TOL;
                rep.lpt_generator = Some(gen);
                rep.lpt = Some(ms || gen);
                rep.lpt_gauge_flag = !ms && gen;

                let p = pt.parity().mat();
                let pi = sparse_kron(p, &p.t().to_owned());
                let lhs = lbar.matrix().matmul(&pi);
                let rhs = pi.matmul(&lbar.matrix().map_values(|z| z.conj()));
                let adef = rel(
                    lhs.scale_add(C64::new(1.0, 0.0), &rhs, C64::new(-1.0, 0.0)).max_abs(),
                    lbar.matrix().max_abs(),
                );
                rep.defects.insert("anti_pt".into(), adef);
                rep.anti_pt = Some(adef <= SYMMETRY_TOL);
            }
        }
    }
    Ok(rep)
}

/// Dense matrix from rows, for small test fixtures.
pub fn dense(rows: &[&[C64]]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((n, m), |(i, j)| rows[i][j])
}
