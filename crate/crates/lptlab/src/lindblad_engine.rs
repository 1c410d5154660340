//! GKSL generators, adjoints and their vectorized superoperators.

use serde::Serialize;

use crate::linalg::{self, anticommutator, commutator, dagger, CMat};
use crate::sparse::CsrMatrix;
use crate::spin_algebra::Operator;
use crate::{LabError, Result, C64, I};

/// Largest Hilbert dimension accepted by [`vectorize`].
pub const MAX_VECTORIZE_DIM: usize = 200;

#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub hamiltonian: Operator,
    pub jumps: Vec<Operator>,
    pub label: String,
    pub scaling_note: String,
}

impl LindbladModel {
    pub fn new(hamiltonian: Operator, jumps: Vec<Operator>, label: impl Into<String>) -> Result<Self> {
        let d = hamiltonian.dim();
        if let Some(bad) = jumps.iter().find(|l| l.dim() != d) {
            return Err(LabError::Dimension(format!("jump of dim {} vs hamiltonian dim {d}", bad.dim())));
        }
        let defect = linalg::hermiticity_defect(hamiltonian.mat());
        if defect > 1e-12 {
            return Err(LabError::InvalidParameter(format!("hamiltonian not Hermitian (defect {defect:e})")));
        }
        Ok(Self { hamiltonian, jumps, label: label.into(), scaling_note: String::new() })
    }

    pub fn with_scaling_note(mut self, note: impl Into<String>) -> Self {
        self.scaling_note = note.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    fn check(&self, o: &Operator) -> Result<()> {
        if o.dim() != self.dim() {
            return Err(LabError::Dimension(format!("operand dim {} vs model dim {}", o.dim(), self.dim())));
        }
        Ok(())
    }
}

/// −i[H,ρ] + Σ (2 L ρ L† − {L†L, ρ}).
pub fn apply_lindbladian(model: &LindbladModel, rho: &Operator) -> Result<Operator> {
    model.check(rho)?;
    let r = rho.mat();
    let mut out = commutator(model.hamiltonian.mat(), r).mapv(|z| -I * z);
    for l in &model.jumps {
        let l = l.mat();
        let ld = dagger(l);
        out = out + l.dot(r).dot(&ld).mapv(|z| 2.0 * z) - anticommutator(&ld.dot(l), r);
    }
    Ok(Operator::from_mat(out))
}

/// i[H,O] + Σ ([L†,O] L − L† [L,O]).
pub fn apply_adjoint(model: &LindbladModel, obs: &Operator) -> Result<Operator> {
    model.check(obs)?;
    let o = obs.mat();
    let mut out = commutator(model.hamiltonian.mat(), o).mapv(|z| I * z);
    for l in &model.jumps {
        let l = l.mat();
        let ld = dagger(l);
        out = out + commutator(&ld, o).dot(l) - ld.dot(&commutator(l, o));
    }
    Ok(Operator::from_mat(out))
}

/// H − i Σ L†L.
pub fn effective_hamiltonian(model: &LindbladModel) -> Operator {
    let mut h = model.hamiltonian.mat().clone();
    for l in &model.jumps {
        h = h - dagger(l.mat()).dot(l.mat()).mapv(|z| I * z);
    }
    Operator::from_mat(h)
}

/// Vectorized generator `L̄` acting on row-major `vec(ρ)`.
#[derive(Clone, Debug)]
pub struct SuperOperatorMatrix {
    dim: usize,
    matrix: CsrMatrix,
}

impl SuperOperatorMatrix {
    pub fn from_csr(dim: usize, matrix: CsrMatrix) -> Result<Self> {
        if matrix.n() != dim * dim {
            return Err(LabError::Dimension(format!("superoperator size {} is not {dim}²", matrix.n())));
        }
        Ok(Self { dim, matrix })
    }

    /// Hilbert-space dimension `d` (the matrix is d² × d²).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dim_sq(&self) -> usize {
        self.dim * self.dim
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> CMat {
        self.matrix.to_dense()
    }

    pub fn apply(&self, rho: &Operator) -> Result<Operator> {
        if rho.dim() != self.dim {
            return Err(LabError::Dimension(format!("operand dim {} vs {}", rho.dim(), self.dim)));
        }
        let v = vec_op(rho.mat());
        Ok(Operator::from_mat(unvec(&self.matrix.apply(&v), self.dim)))
    }
}

impl Serialize for SuperOperatorMatrix {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            dim: usize,
            dim_sq: usize,
            vectorization: &'static str,
            rows: Vec<usize>,
            cols: Vec<usize>,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let trips: Vec<_> = self.matrix.triplets().collect();
        Repr {
            dim: self.dim,
            dim_sq: self.dim_sq(),
            vectorization: "row-major",
            rows: trips.iter().map(|t| t.0).collect(),
            cols: trips.iter().map(|t| t.1).collect(),
            re: trips.iter().map(|t| t.2.re).collect(),
            im: trips.iter().map(|t| t.2.im).collect(),
        }
        .serialize(ser)
    }
}

/// Row-major stacking `|i⟩⟨j| ↦ i·d + j`.
pub fn vec_op(a: &CMat) -> Vec<C64> {
    a.iter().cloned().collect()
}

pub fn unvec(v: &[C64], d: usize) -> CMat {
    CMat::from_shape_vec((d, d), v.to_vec()).expect("length d²")
}

fn nonzeros(a: &CMat) -> Vec<(usize, usize, C64)> {
    a.indexed_iter().filter(|(_, v)| v.norm() != 0.0).map(|((i, j), v)| (i, j, *v)).collect()
}

/// Pushes the entries of `a ⊗ b` scaled by `s`.
fn push_kron(trips: &mut Vec<(usize, usize, C64)>, a: &[(usize, usize, C64)], b: &[(usize, usize, C64)], d: usize, s: C64) {
    for &(i, j, x) in a {
        for &(k, l, y) in b {
            trips.push((i * d + k, j * d + l, s * x * y));
        }
    }
}

/// L̄ = −i(H⊗1 − 1⊗Hᵀ) + Σ (2 L⊗L̄ − L†L⊗1 − 1⊗(L†L)ᵀ).
pub fn vectorize(model: &LindbladModel) -> Result<SuperOperatorMatrix> {
    let d = model.dim();
    if d > MAX_VECTORIZE_DIM {
        return Err(LabError::SizeCap(format!("dim {d} exceeds {MAX_VECTORIZE_DIM}")));
    }
    let id: Vec<_> = (0..d).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
    let mut trips = Vec::new();
    let h = nonzeros(model.hamiltonian.mat());
    let ht = nonzeros(&model.hamiltonian.mat().t().to_owned());
    push_kron(&mut trips, &h, &id, d, -I);
    push_kron(&mut trips, &id, &ht, d, I);
    for l in &model.jumps {
        let lm = l.mat();
        let ldl = dagger(lm).dot(lm);
        push_kron(&mut trips, &nonzeros(lm), &nonzeros(&linalg::conj(lm)), d, C64::new(2.0, 0.0));
        push_kron(&mut trips, &nonzeros(&ldl), &id, d, C64::new(-1.0, 0.0));
        push_kron(&mut trips, &id, &nonzeros(&ldl.t().to_owned()), d, C64::new(-1.0, 0.0));
    }
    Ok(SuperOperatorMatrix { dim: d, matrix: CsrMatrix::from_triplets(d * d, trips) })
}

/// L̄ − (tr L̄ / d²)·1 together with the shift.
pub fn shifted_lindbladian(mat: &SuperOperatorMatrix) -> (SuperOperatorMatrix, C64) {
    let shift = mat.matrix.trace() / mat.dim_sq() as f64;
    let shifted = mat.matrix.add_diagonal(-shift);
    (SuperOperatorMatrix { dim: mat.dim, matrix: shifted }, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::c;
    use crate::linalg::{frob_norm, hs_inner, max_abs};
    use crate::spin_algebra::{collective_spin, SpinAxis, SpinBasis};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> CMat {
        Array2::from_shape_fn((d, d), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> Operator {
        let a = random_matrix(d, rng);
        Operator::new(&a + &dagger(&a)).unwrap()
    }

    fn ddm(s: f64, g: f64, kappa: f64) -> LindbladModel {
        let b = SpinBasis::new(s).unwrap();
        let h = collective_spin(b, SpinAxis::X).scaled(c(2.0 * g));
        let l = collective_spin(b, SpinAxis::Minus).scaled(c((kappa / s).sqrt()));
        LindbladModel::new(h, vec![l], "ddm").unwrap()
    }

    fn random_model(d: usize, jumps: usize, rng: &mut ChaCha8Rng) -> LindbladModel {
        let h = random_hermitian(d, rng);
        let ls = (0..jumps).map(|_| Operator::new(random_matrix(d, rng)).unwrap()).collect();
        LindbladModel::new(h, ls, "random").unwrap()
    }

    #[test]
    fn maximally_mixed_is_fixed_by_closed_dynamics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = LindbladModel::new(random_hermitian(4, &mut rng), vec![], "closed").unwrap();
        let rho = Operator::identity(4).scaled(c(0.25));
        assert!(max_abs(apply_lindbladian(&m, &rho).unwrap().mat()) < 1e-15);
    }

    #[test]
    fn ddm_spin_half_by_hand() {
        // H = σx, L = √2 σ−, L†L = 2|↑⟩⟨↑|.
        // ρ = |↓⟩⟨↓| is dark: only −i[σx, ρ] = [[0, −i], [i, 0]] survives.
        let m = ddm(0.5, 1.0, 1.0);
        let down = Operator::new(Array2::from_shape_vec((2, 2), vec![c(0.0), c(0.0), c(0.0), c(1.0)]).unwrap()).unwrap();
        let out = apply_lindbladian(&m, &down).unwrap();
        let expect = Array2::from_shape_vec((2, 2), vec![c(0.0), -I, I, c(0.0)]).unwrap();
        assert!(max_abs(&(out.mat() - &expect)) < 1e-14);
        // ρ = |↑⟩⟨↑|: −i[σx, ρ] = [[0, i], [−i, 0]], 2LρL† = 4|↓⟩⟨↓|, {L†L, ρ} = 4|↑⟩⟨↑|.
        let up = Operator::new(Array2::from_shape_vec((2, 2), vec![c(1.0), c(0.0), c(0.0), c(0.0)]).unwrap()).unwrap();
        let out = apply_lindbladian(&m, &up).unwrap();
        let expect = Array2::from_shape_vec((2, 2), vec![c(-4.0), I, -I, c(4.0)]).unwrap();
        assert!(max_abs(&(out.mat() - &expect)) < 1e-14);
    }

    #[test]
    fn ddm_spin_half_adjoint_bloch_coefficients() {
        // Heisenberg picture of S_z for H = σx, L = √2 σ−:
        // i[σx, σz/2] = σy, and Σ([L†,O]L − L†[L,O]) = −2(1 + σz) for O = σz/2.
        let m = ddm(0.5, 1.0, 1.0);
        let b = SpinBasis::new(0.5).unwrap();
        let sz = collective_spin(b, SpinAxis::Z);
        let sy = collective_spin(b, SpinAxis::Y).into_mat().mapv(|z| 2.0 * z);
        let out = apply_adjoint(&m, &sz).unwrap();
        let expect = sy - (linalg::eye(2) + sz.mat().mapv(|z| 2.0 * z)).mapv(|z| 2.0 * z);
        assert!(max_abs(&(out.mat() - &expect)) < 1e-14);
    }

    #[test]
    fn adjoint_is_unital_and_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let m = random_model(5, 2, &mut rng);
            assert!(max_abs(apply_adjoint(&m, &Operator::identity(5)).unwrap().mat()) < 1e-12);
            let o = Operator::new(random_matrix(5, &mut rng)).unwrap();
            let rho = Operator::new(random_matrix(5, &mut rng)).unwrap();
            let lhs = hs_inner(o.mat(), apply_lindbladian(&m, &rho).unwrap().mat());
            let rhs = hs_inner(apply_adjoint(&m, &o).unwrap().mat(), rho.mat());
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_model(6, 3, &mut rng);
        for _ in 0..10 {
            let rho = random_hermitian(6, &mut rng);
            let out = apply_lindbladian(&m, &rho).unwrap();
            assert!(out.trace().norm() < 1e-10 * 6.0);
            assert!(max_abs(&(out.mat() - &dagger(out.mat()))) < 1e-10);
        }
    }

    #[test]
    fn effective_hamiltonian_spectrum() {
        let m = LindbladModel::new(Operator::zeros(3), vec![], "none").unwrap();
        assert_eq!(effective_hamiltonian(&m).mat(), m.hamiltonian.mat());

        use ndarray_linalg::EigVals;
        let heff = effective_hamiltonian(&ddm(2.0, 1.0, 0.7));
        let ev = heff.mat().eigvals().unwrap();
        assert!(ev.iter().all(|z| z.im <= 1e-10));

        // pure loss, cutoff 4: a = Σ √n |n−1⟩⟨n|
        let kappa: f64 = 0.3;
        let mut a = Array2::<C64>::zeros((4, 4));
        for n in 1..4 {
            a[[n - 1, n]] = c((n as f64).sqrt());
        }
        let loss = LindbladModel::new(Operator::zeros(4), vec![Operator::new(a.mapv(|z| z * kappa.sqrt())).unwrap()], "loss").unwrap();
        let heff = effective_hamiltonian(&loss);
        for n in 0..4 {
            assert!((heff.mat()[[n, n]] - C64::new(0.0, -kappa * n as f64)).norm() < 1e-14);
        }
    }

    #[test]
    fn sigma_z_vectorization_by_hand() {
        let sz = Operator::new(Array2::from_diag(&ndarray::arr1(&[c(1.0), c(-1.0)]))).unwrap();
        let m = LindbladModel::new(sz, vec![], "sz").unwrap();
        let dense = vectorize(&m).unwrap().to_dense();
        // −i(σz⊗1 − 1⊗σz) with index i·2 + j.
        let expect = Array2::from_diag(&ndarray::arr1(&[c(0.0), C64::new(0.0, -2.0), C64::new(0.0, 2.0), c(0.0)]));
        assert!(max_abs(&(dense - expect)) < 1e-15);
    }

    #[test]
    fn vectorized_action_matches_operator_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let models = [random_model(4, 2, &mut rng), ddm(2.0, 1.0, 0.7), ddm(1.5, 0.3, 2.0)];
        for m in &models {
            let sup = vectorize(m).unwrap();
            for _ in 0..5 {
                let rho = random_hermitian(m.dim(), &mut rng);
                let a = sup.apply(&rho).unwrap();
                let b = apply_lindbladian(m, &rho).unwrap();
                assert!(frob_norm(&(a.mat() - b.mat())) <= 1e-10 * frob_norm(b.mat()).max(1.0));
            }
        }
    }

    #[test]
    fn vectorize_size_cap() {
        let m = LindbladModel::new(Operator::zeros(201), vec![], "big").unwrap();
        assert!(matches!(vectorize(&m), Err(LabError::SizeCap(_))));
    }

    #[test]
    fn shift_is_real_and_removes_trace() {
        let sup = vectorize(&ddm(2.0, 1.0, 0.7)).unwrap();
        let (shifted, shift) = shifted_lindbladian(&sup);
        assert!(shift.im.abs() <= 1e-10);
        assert!(shift.re < 0.0);
        assert!(shifted.matrix().trace().norm() < 1e-9);

        let sz = Operator::new(Array2::from_diag(&ndarray::arr1(&[c(1.0), c(-1.0)]))).unwrap();
        let closed = vectorize(&LindbladModel::new(sz, vec![], "sz").unwrap()).unwrap();
        assert_eq!(shifted_lindbladian(&closed).1, c(0.0));
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let r = LindbladModel::new(Operator::zeros(2), vec![Operator::zeros(3)], "bad");
        assert!(matches!(r, Err(LabError::Dimension(_))));
        let m = ddm(1.0, 1.0, 1.0);
        assert!(apply_lindbladian(&m, &Operator::zeros(2)).is_err());
    }
}
