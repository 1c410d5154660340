//! Collective-spin and Pauli-chain operators.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMat};
use crate::{c, LabError, Result, C64, I};

const HERMITIAN_TOL: f64 = 1e-12;
/// Largest chain for which a dense 2^n × 2^n operator is built.
pub const MAX_CHAIN_SITES: usize = 14;

/// Spin-S basis ordered m = S, S−1, …, −S.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpinBasis {
    twice_s: u32,
}

impl SpinBasis {
    /// `s` must be a positive integer or half-integer.
    pub fn new(s: f64) -> Result<Self> {
        let t = 2.0 * s;
        if !(t >= 1.0) || (t - t.round()).abs() > 1e-9 {
            return Err(LabError::InvalidParameter(format!("spin {s} is not a positive half-integer")));
        }
        Ok(Self { twice_s: t.round() as u32 })
    }

    pub fn from_twice(twice_s: u32) -> Result<Self> {
        if twice_s == 0 {
            return Err(LabError::InvalidParameter("spin must be at least 1/2".into()));
        }
        Ok(Self { twice_s })
    }

    pub fn spin(&self) -> f64 {
        self.twice_s as f64 / 2.0
    }

    pub fn twice_spin(&self) -> u32 {
        self.twice_s
    }

    pub fn dim(&self) -> usize {
        self.twice_s as usize + 1
    }

    /// Magnetic quantum number of basis index `i`.
    pub fn m(&self, i: usize) -> f64 {
        self.spin() - i as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Dense square complex matrix with an optional Hermiticity flag.
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    mat: CMat,
    hermitian_hint: Option<bool>,
}

impl Operator {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(LabError::Dimension(format!("operator is {}×{}", mat.nrows(), mat.ncols())));
        }
        Ok(Self { mat, hermitian_hint: None })
    }

    /// Builds an operator flagged Hermitian; fails if it is not (relative 1e-12).
    pub fn hermitian(mat: CMat) -> Result<Self> {
        let mut op = Self::new(mat)?;
        let defect = linalg::hermiticity_defect(&op.mat);
        if defect > HERMITIAN_TOL {
            return Err(LabError::InvalidParameter(format!("operator not Hermitian (defect {defect:e})")));
        }
        op.hermitian_hint = Some(true);
        Ok(op)
    }

    pub(crate) fn from_mat(mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), mat.ncols());
        Self { mat, hermitian_hint: None }
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: linalg::eye(dim), hermitian_hint: Some(true) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: Array2::zeros((dim, dim)), hermitian_hint: Some(true) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn hermitian_hint(&self) -> Option<bool> {
        self.hermitian_hint
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_defect(&self.mat) <= tol
    }

    pub fn dagger(&self) -> Self {
        Self { mat: linalg::dagger(&self.mat), hermitian_hint: self.hermitian_hint }
    }

    pub fn dot(&self, other: &Operator) -> Self {
        Self::from_mat(self.mat.dot(&other.mat))
    }

    pub fn scaled(&self, z: C64) -> Self {
        let hint = if z.im == 0.0 { self.hermitian_hint } else { None };
        Self { mat: self.mat.mapv(|x| x * z), hermitian_hint: hint }
    }

    pub fn add(&self, other: &Operator) -> Self {
        Self::from_mat(&self.mat + &other.mat)
    }

    pub fn sub(&self, other: &Operator) -> Self {
        Self::from_mat(&self.mat - &other.mat)
    }

    pub fn kron(&self, other: &Operator) -> Self {
        Self::from_mat(linalg::kron(&self.mat, &other.mat))
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    pub fn frob_norm(&self) -> f64 {
        linalg::frob_norm(&self.mat)
    }

    pub fn expect(&self, rho: &Operator) -> C64 {
        linalg::trace(&rho.mat.dot(&self.mat))
    }
}

impl Serialize for Operator {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            dim: usize,
            layout: &'a str,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let (re, im) = linalg::to_real_parts(self.mat.view());
        Repr { dim: self.dim(), layout: "row-major", re, im }.serialize(ser)
    }
}

/// Parity `P` (unitary, P = P†, P² = 1) paired with complex conjugation in the stored basis.
#[derive(Clone, Debug)]
pub struct PTOperator {
    parity: Operator,
}

impl PTOperator {
    pub fn new(parity: Operator) -> Result<Self> {
        let p = parity.mat();
        let d = p.nrows();
        let sq = linalg::max_abs(&(p.dot(p) - linalg::eye(d)));
        let herm = linalg::max_abs(&(p - &linalg::dagger(p)));
        if sq > 1e-12 || herm > 1e-12 {
            return Err(LabError::InvalidParameter(format!(
                "parity must satisfy P² = 1 and P = P† (defects {sq:e}, {herm:e})"
            )));
        }
        Ok(Self { parity })
    }

    pub fn parity(&self) -> &Operator {
        &self.parity
    }

    pub fn dim(&self) -> usize {
        self.parity.dim()
    }

    /// State map ρ ↦ PT ρ (PT)⁻¹ = P ρ̄ P.
    pub fn conjugate(&self, rho: &Operator) -> Operator {
        let p = self.parity.mat();
        Operator::from_mat(p.dot(&linalg::conj(rho.mat())).dot(p))
    }

    /// Generator map O ↦ PT O† (PT)⁻¹ = P Oᵀ P.
    pub fn lpt_map(&self, o: &Operator) -> Operator {
        let p = self.parity.mat();
        Operator::from_mat(p.dot(&o.mat().t()).dot(p))
    }
}

fn ladder_coeff(s: f64, m: f64) -> f64 {
    (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// Collective spin component in the descending-m basis.
pub fn collective_spin(basis: SpinBasis, axis: SpinAxis) -> Operator {
    let d = basis.dim();
    let s = basis.spin();
    let mut plus = Array2::<C64>::zeros((d, d));
    // S_+ |m⟩ = √(S(S+1) − m(m+1)) |m+1⟩; index of m+1 is i−1.
    for i in 1..d {
        plus[[i - 1, i]] = c(ladder_coeff(s, basis.m(i)));
    }
    let mat = match axis {
        SpinAxis::Plus => plus,
        SpinAxis::Minus => plus.t().to_owned(),
        SpinAxis::X => (&plus + &plus.t()).mapv(|z| z * 0.5),
        SpinAxis::Y => (&plus - &plus.t()).mapv(|z| z / (2.0 * I)),
        SpinAxis::Z => Array2::from_diag(&ndarray::Array1::from_iter((0..d).map(|i| c(basis.m(i))))),
    };
    let hint = matches!(axis, SpinAxis::X | SpinAxis::Y | SpinAxis::Z).then_some(true);
    Operator { mat, hermitian_hint: hint }
}

/// π rotation about x on the symmetric subspace, phase-fixed so that P² = 1.
/// In the descending-m basis it is the exchange |m⟩ ↔ |−m⟩.
pub fn parity_pi_x(basis: SpinBasis) -> PTOperator {
    let d = basis.dim();
    let mut p = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        p[[i, d - 1 - i]] = c(1.0);
    }
    PTOperator { parity: Operator { mat: p, hermitian_hint: Some(true) } }
}

fn pauli(axis: SpinAxis) -> CMat {
    let z = c(0.0);
    let o = c(1.0);
    let m = match axis {
        SpinAxis::X => [[z, o], [o, z]],
        SpinAxis::Y => [[z, -I], [I, z]],
        SpinAxis::Z => [[o, z], [z, -o]],
        SpinAxis::Plus => [[z, o], [z, z]],
        SpinAxis::Minus => [[z, z], [o, z]],
    };
    Array2::from_shape_fn((2, 2), |(i, j)| m[i][j])
}

/// Single-site Pauli (or ladder) matrix embedded at `site` of an `n_sites` chain.
/// Site 0 is the leftmost tensor factor; σ^± use the (↑, ↓) ordering.
pub fn pauli_chain(n_sites: usize, site: usize, axis: SpinAxis) -> Result<Operator> {
    if n_sites > MAX_CHAIN_SITES {
        return Err(LabError::SizeCap(format!("{n_sites} sites exceeds {MAX_CHAIN_SITES}")));
    }
    if site >= n_sites {
        return Err(LabError::InvalidParameter(format!("site {site} outside chain of {n_sites}")));
    }
    let left = linalg::eye(1 << site);
    let right = linalg::eye(1 << (n_sites - site - 1));
    let mat = linalg::kron(&linalg::kron(&left, &pauli(axis)), &right);
    let hint = matches!(axis, SpinAxis::X | SpinAxis::Y | SpinAxis::Z).then_some(true);
    Ok(Operator { mat, hermitian_hint: hint })
}

/// Global spin flip ∏σ^x on an `n_sites` chain.
pub fn chain_flip(n_sites: usize) -> Result<PTOperator> {
    if n_sites > MAX_CHAIN_SITES {
        return Err(LabError::SizeCap(format!("{n_sites} sites exceeds {MAX_CHAIN_SITES}")));
    }
    let d = 1usize << n_sites;
    let mut p = Array2::<C64>::zeros((d, d));
    for i in 0..d {
        p[[i, (d - 1) ^ i]] = c(1.0);
    }
    PTOperator::new(Operator { mat: p, hermitian_hint: Some(true) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutator, max_abs};

    fn basis(s: f64) -> SpinBasis {
        SpinBasis::new(s).unwrap()
    }

    #[test]
    fn spin_half_components() {
        let b = basis(0.5);
        let z = collective_spin(b, SpinAxis::Z);
        assert_eq!(z.mat()[[0, 0]], c(0.5));
        assert_eq!(z.mat()[[1, 1]], c(-0.5));
        let p = collective_spin(b, SpinAxis::Plus);
        assert_eq!(p.mat()[[0, 1]], c(1.0));
        assert_eq!(max_abs(p.mat()) , 1.0);
    }

    #[test]
    fn spin_one_ladder_from_m_zero() {
        let b = basis(1.0);
        let p = collective_spin(b, SpinAxis::Plus);
        // |1,0⟩ is index 1; S_+ maps it to index 0 with √2.
        assert!((p.mat()[[0, 1]].re - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn basis_rejects_non_half_integer() {
        assert!(SpinBasis::new(0.3).is_err());
        assert!(SpinBasis::new(0.0).is_err());
        assert_eq!(basis(2.5).dim(), 6);
        assert_eq!(basis(2.5).m(5), -2.5);
    }

    #[test]
    fn su2_algebra_and_casimir() {
        for twice in [1u32, 2, 7, 20, 57, 100] {
            let b = SpinBasis::from_twice(twice).unwrap();
            let s = b.spin();
            let [x, y, z, p, m] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z, SpinAxis::Plus, SpinAxis::Minus]
                .map(|a| collective_spin(b, a).into_mat());
            assert!(max_abs(&(commutator(&z, &p) - &p)) < 1e-12);
            assert!(max_abs(&(commutator(&z, &m) + &m)) < 1e-12);
            assert!(max_abs(&(commutator(&p, &m) - z.mapv(|v| v * 2.0))) < 1e-12);
            let cas = x.dot(&x) + y.dot(&y) + z.dot(&z);
            let target = linalg::eye(b.dim()).mapv(|v| v * s * (s + 1.0));
            assert!(max_abs(&(cas - target)) < 1e-10);
        }
    }

    #[test]
    fn normalized_commutator_decays_as_inverse_spin() {
        let level = |s: f64| {
            let b = basis(s);
            let x = collective_spin(b, SpinAxis::X).into_mat().mapv(|v| v / s);
            let y = collective_spin(b, SpinAxis::Y).into_mat().mapv(|v| v / s);
            max_abs(&commutator(&x, &y))
        };
        let (a, b2, c3) = (level(10.0), level(20.0), level(40.0));
        assert!((a / b2 - 2.0).abs() < 0.1);
        assert!((b2 / c3 - 2.0).abs() < 0.1);
    }

    #[test]
    fn parity_flips_sz_and_swaps_ladders() {
        assert_eq!(parity_pi_x(basis(0.5)).parity().mat(), pauli(SpinAxis::X));
        let b = basis(5.0);
        let pt = parity_pi_x(b);
        let p = pt.parity().mat();
        let conj = |a: &CMat| p.dot(a).dot(p);
        let z = collective_spin(b, SpinAxis::Z).into_mat();
        let sp = collective_spin(b, SpinAxis::Plus).into_mat();
        let sm = collective_spin(b, SpinAxis::Minus).into_mat();
        assert!(max_abs(&(conj(&z) + &z)) < 1e-12);
        assert!(max_abs(&(conj(&sp) - &sm)) < 1e-12);
    }

    #[test]
    fn parity_is_phase_fixed_pi_rotation() {
        // exp(−iπS_x) = (−i)^{2S} P
        for twice in [1u32, 2, 3, 6] {
            let b = SpinBasis::from_twice(twice).unwrap();
            let sx = collective_spin(b, SpinAxis::X).into_mat();
            let rot = linalg::expm_hermitian(&sx, std::f64::consts::PI).unwrap();
            let phase = (-I).powu(twice);
            let p = parity_pi_x(b).parity().mat().mapv(|v| v * phase);
            assert!(max_abs(&(rot - p)) < 1e-10, "2S = {twice}");
        }
    }

    #[test]
    fn pauli_chain_embedding() {
        let z1 = pauli_chain(1, 0, SpinAxis::Z).unwrap();
        assert_eq!(z1.mat(), pauli(SpinAxis::Z));
        let z = pauli_chain(2, 1, SpinAxis::Z).unwrap();
        let diag: Vec<f64> = z.mat().diag().iter().map(|v| v.re).collect();
        assert_eq!(diag, vec![1.0, -1.0, 1.0, -1.0]);
        assert!(pauli_chain(15, 0, SpinAxis::X).is_err());
        assert!(pauli_chain(3, 3, SpinAxis::X).is_err());
    }

    #[test]
    fn ising_bond_commutes_with_global_flip() {
        let zz = pauli_chain(4, 0, SpinAxis::Z).unwrap().dot(&pauli_chain(4, 1, SpinAxis::Z).unwrap());
        let p = chain_flip(4).unwrap();
        assert!(max_abs(&commutator(zz.mat(), p.parity().mat())) < 1e-15);
    }

    #[test]
    fn pt_operator_validates_parity() {
        let bad = Operator::new(Array2::from_diag_elem(2, c(2.0))).unwrap();
        assert!(PTOperator::new(bad).is_err());
    }

    #[test]
    fn hermitian_constructor_rejects_ladder() {
        let b = basis(1.0);
        assert!(Operator::hermitian(collective_spin(b, SpinAxis::Plus).into_mat()).is_err());
        assert!(Operator::hermitian(collective_spin(b, SpinAxis::Y).into_mat()).is_ok());
    }
}
