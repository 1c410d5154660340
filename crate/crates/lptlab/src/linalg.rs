//! Small dense helpers on complex matrices.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, ShapeBuilder};
use ndarray_linalg::{Eigh, SVD, UPLO};

use crate::{Result, C64};

pub type CMat = Array2<C64>;

pub fn eye(n: usize) -> CMat {
    Array2::from_diag_elem(n, C64::new(1.0, 0.0))
}

pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

pub fn conj(a: &CMat) -> CMat {
    a.mapv(|z| z.conj())
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) - b.dot(a)
}

pub fn anticommutator(a: &CMat, b: &CMat) -> CMat {
    a.dot(b) + b.dot(a)
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), &x) in a.indexed_iter() {
        if x == C64::new(0.0, 0.0) {
            continue;
        }
        out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&b.mapv(|y| x * y));
    }
    out
}

pub fn trace(a: &CMat) -> C64 {
    a.diag().sum()
}

/// Hilbert–Schmidt inner product `Tr(a† b)`.
pub fn hs_inner(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Largest singular value.
pub fn op_norm(a: &CMat) -> Result<f64> {
    if a.is_empty() {
        return Ok(0.0);
    }
    let (_, sv, _) = a.svd(false, false)?;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

pub fn singular_values(a: &CMat) -> Result<Array1<f64>> {
    let (_, sv, _) = a.svd(false, false)?;
    Ok(sv)
}

pub fn hermitian_part(a: &CMat) -> CMat {
    (a + &dagger(a)).mapv(|z| z * 0.5)
}

/// max |A − A†| relative to max |A|.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    max_abs(&(a - &dagger(a))) / scale
}

/// Hermitian eigendecomposition. The input is copied to column-major order:
/// for row-major input the LAPACK wrapper returns conjugated eigenvectors.
pub fn eigh(a: &CMat) -> Result<(Array1<f64>, CMat)> {
    let mut h = Array2::<C64>::zeros(a.raw_dim().f());
    h.assign(&hermitian_part(a));
    let (w, v) = h.eigh(UPLO::Lower)?;
    Ok((w, v.as_standard_layout().into_owned()))
}

/// Square root of a Hermitian PSD matrix, clipping eigenvalues above `clip` (negative) to zero.
pub fn sqrtm_psd(a: &CMat, clip: f64) -> Result<CMat> {
    let (w, v) = eigh(a)?;
    if let Some(&m) = w.iter().find(|&&x| x < clip) {
        return Err(crate::LabError::NotPsd(m));
    }
    let sq = w.mapv(|x| C64::new(x.max(0.0).sqrt(), 0.0));
    Ok(scale_columns(&v, &sq).dot(&dagger(&v)))
}

/// `exp(-i t H)` for Hermitian `H`.
pub fn expm_hermitian(h: &CMat, t: f64) -> Result<CMat> {
    let (w, v) = eigh(h)?;
    let ph = w.mapv(|x| C64::from_polar(1.0, -t * x));
    Ok(scale_columns(&v, &ph).dot(&dagger(&v)))
}

pub fn scale_columns(v: &CMat, d: &Array1<C64>) -> CMat {
    let mut out = v.clone();
    for (mut col, &x) in out.axis_iter_mut(Axis(1)).zip(d.iter()) {
        col.mapv_inplace(|z| z * x);
    }
    out
}

pub fn matrix_power(a: &CMat, n: u32) -> CMat {
    let mut out = eye(a.nrows());
    for _ in 0..n {
        out = out.dot(a);
    }
    out
}

pub fn to_real_parts(a: ArrayView2<C64>) -> (Vec<f64>, Vec<f64>) {
    (a.iter().map(|z| z.re).collect(), a.iter().map(|z| z.im).collect())
}

/// Multiset distance between two spectra: each element of `a` is greedily
/// matched to its nearest unused element of `b`; returns the worst match.
pub fn multiset_distance(a: &[C64], b: &[C64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0_f64;
    for x in a {
        let mut best = (f64::INFINITY, usize::MAX);
        for (j, y) in b.iter().enumerate() {
            if !used[j] {
                let d = (x - y).norm();
                if d < best.0 {
                    best = (d, j);
                }
            }
        }
        used[best.1] = true;
        worst = worst.max(best.0);
    }
    worst
}

/// `serialize_with` helper: complex matrix as {rows, cols, re, im} in row-major order.
pub fn ser_cmat<S: serde::Serializer>(a: &CMat, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    #[derive(Serialize)]
    struct Repr {
        rows: usize,
        cols: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    }
    let (re, im) = to_real_parts(a.view());
    Repr { rows: a.nrows(), cols: a.ncols(), re, im }.serialize(ser)
}

/// `serialize_with` helper: real matrix as nested rows.
pub fn ser_rmat<S: serde::Serializer>(a: &ndarray::Array2<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let rows: Vec<Vec<f64>> = a.rows().into_iter().map(|r| r.to_vec()).collect();
    rows.serialize(ser)
}
