//! Parameterized model constructors.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::lindblad_engine::LindbladModel;
use crate::linalg::{self, CMat};
use crate::spin_algebra::{
    chain_flip, collective_spin, parity_pi_x, pauli_chain, Operator, PTOperator, SpinAxis, SpinBasis,
};
use crate::{c, LabError, Result, C64, I};

/// Largest Hilbert-space dimension for the two-spin builder.
pub const TWO_SPIN_MAX_DIM: usize = 200;
/// Largest Kac chain built as dense operators.
pub const KAC_MAX_SITES: usize = 10;
pub const XXZ_MAX_SITES: usize = 8;
pub const ISING_MAX_SITES: usize = 14;
pub const EXACT_TISS_MAX_SPIN: f64 = 40.0;

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("{name} must be > 0, got {x}")))
    }
}

fn non_negative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("{name} must be ≥ 0, got {x}")))
    }
}

fn finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(LabError::InvalidParameter(format!("{name} must be finite")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DdmParams {
    pub spin: f64,
    pub g: f64,
    pub kappa: f64,
}

impl DdmParams {
    pub fn basis(&self) -> Result<SpinBasis> {
        positive("g", self.g)?;
        non_negative("kappa", self.kappa)?;
        SpinBasis::new(self.spin)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmgParams {
    pub spin: f64,
    pub chi_x: f64,
    pub chi_y: f64,
    pub kappa: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoSpinParams {
    pub spin: f64,
    pub g: f64,
    pub gamma_gain: f64,
    pub gamma_loss: f64,
}

/// Kac chain with transverse drive `field·Σσ_x`; other Hamiltonians go
/// through [`build_kac_chain_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KacChainParams {
    pub n_sites: usize,
    pub eta: f64,
    #[serde(default = "one")]
    pub field: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrParams {
    pub detuning: f64,
    pub kerr: f64,
    pub pump: f64,
    pub gamma: f64,
    pub scale: f64,
    pub fock_cutoff: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XxzParams {
    pub n_sites: usize,
    pub anisotropy: f64,
    pub gamma: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub n_sites: usize,
    pub j: f64,
    pub h: f64,
    #[serde(default)]
    pub epsilon: f64,
}

/// H = 2g S_x, L = √(κ/S) S_−.
pub fn build_ddm(p: &DdmParams) -> Result<LindbladModel> {
    let b = p.basis()?;
    let s = b.spin();
    let h = collective_spin(b, SpinAxis::X).scaled(c(2.0 * p.g));
    let l = collective_spin(b, SpinAxis::Minus).scaled(c((p.kappa / s).sqrt()));
    Ok(LindbladModel::new(h, vec![l], "ddm")?
        .with_scaling_note("H = 2g S_x; L = sqrt(kappa/S) S_-"))
}

/// Parity of a single collective spin: |m⟩ ↔ |−m⟩.
pub fn spin_parity(spin: f64) -> Result<PTOperator> {
    Ok(parity_pi_x(SpinBasis::new(spin)?))
}

/// H = (χ_x S_x² + χ_y S_y²)/S, L = √(κ/S) S_−.
pub fn build_lmg(p: &LmgParams) -> Result<LindbladModel> {
    finite("chi_x", p.chi_x)?;
    finite("chi_y", p.chi_y)?;
    non_negative("kappa", p.kappa)?;
    let b = SpinBasis::new(p.spin)?;
    let s = b.spin();
    let sx = collective_spin(b, SpinAxis::X);
    let sy = collective_spin(b, SpinAxis::Y);
    let h = sx.dot(&sx).scaled(c(p.chi_x / s)).add(&sy.dot(&sy).scaled(c(p.chi_y / s)));
    let h = Operator::hermitian(linalg::hermitian_part(h.mat()))?;
    let l = collective_spin(b, SpinAxis::Minus).scaled(c((p.kappa / s).sqrt()));
    Ok(LindbladModel::new(h, vec![l], "lmg")?
        .with_scaling_note("H = (chi_x S_x^2 + chi_y S_y^2)/S; L = sqrt(kappa/S) S_-"))
}

/// H = (g/2S)(S_+^A S_−^B + h.c.); gain √(Γ_g/2S) S_+^A, loss √(Γ_l/2S) S_−^B.
pub fn build_two_spin(p: &TwoSpinParams) -> Result<LindbladModel> {
    finite("g", p.g)?;
    non_negative("gamma_gain", p.gamma_gain)?;
    non_negative("gamma_loss", p.gamma_loss)?;
    let b = SpinBasis::new(p.spin)?;
    let d = b.dim();
    if d * d > TWO_SPIN_MAX_DIM {
        return Err(LabError::SizeCap(format!("two-spin dimension {} exceeds {TWO_SPIN_MAX_DIM}", d * d)));
    }
    let s = b.spin();
    let id = Operator::identity(d);
    let sp = collective_spin(b, SpinAxis::Plus);
    let sm = collective_spin(b, SpinAxis::Minus);
    let hop = sp.kron(&sm);
    let h = hop.add(&hop.dagger()).scaled(c(p.g / (2.0 * s)));
    let h = Operator::hermitian(h.into_mat())?;
    let gain = sp.kron(&id).scaled(c((p.gamma_gain / (2.0 * s)).sqrt()));
    let loss = id.kron(&sm).scaled(c((p.gamma_loss / (2.0 * s)).sqrt()));
    Ok(LindbladModel::new(h, vec![gain, loss], "two_spin")?
        .with_scaling_note("H = g/(2S)(S+A S-B + h.c.); L = sqrt(Gg/2S) S+A, sqrt(Gl/2S) S-B"))
}

/// Subsystem exchange |a, b⟩ ↔ |b, a⟩.
pub fn subsystem_swap(spin: f64) -> Result<PTOperator> {
    let d = SpinBasis::new(spin)?.dim();
    let mut p = Array2::<C64>::zeros((d * d, d * d));
    for a in 0..d {
        for b in 0..d {
            p[[b * d + a, a * d + b]] = c(1.0);
        }
    }
    PTOperator::new(Operator::new(p)?)
}

/// Ring distance D(r) = min(r, N − r) + 1.
pub fn kac_distance(r: usize, n: usize) -> f64 {
    (r.min(n - r) + 1) as f64
}

/// K^(N)(η) = 1 / Σ_{r=0}^{N−1} D(r)^{−η}.
pub fn kac_normalization(n: usize, eta: f64) -> f64 {
    1.0 / (0..n).map(|r| kac_distance(r, n).powf(-eta)).sum::<f64>()
}

/// Coupling matrix g_ij(η) on a ring.
pub fn kac_couplings(n: usize, eta: f64) -> Array2<f64> {
    let k = kac_normalization(n, eta);
    Array2::from_shape_fn((n, n), |(i, j)| {
        let r = if i > j { i - j } else { j - i };
        k / kac_distance(r, n).powf(eta)
    })
}

/// G_η^(N) = Σ_i g_ij², evaluated for every column j and checked for translation invariance.
pub fn kac_g_factor(n: usize, eta: f64) -> Result<f64> {
    if n < 2 {
        return Err(LabError::InvalidParameter("Kac chain needs N ≥ 2".into()));
    }
    non_negative("eta", eta)?;
    let k = kac_normalization(n, eta);
    let column = |j: usize| -> f64 {
        (0..n)
            .map(|i| {
                let r = if i > j { i - j } else { j - i };
                (k / kac_distance(r, n).powf(eta)).powi(2)
            })
            .sum()
    };
    let g0 = column(0);
    for j in [n / 3, n / 2, n - 1] {
        let gj = column(j);
        if (gj - g0).abs() > 1e-12 * g0 {
            return Err(LabError::Numerical(format!("G depends on column: {g0} vs {gj}")));
        }
    }
    let closed = k * k * (0..n).map(|r| kac_distance(r, n).powf(-2.0 * eta)).sum::<f64>();
    debug_assert!((closed - g0).abs() <= 1e-12 * g0);
    Ok(g0)
}

/// Kac chain with `field·Σσ_x`.
pub fn build_kac_chain(p: &KacChainParams) -> Result<LindbladModel> {
    finite("field", p.field)?;
    let mut h = Operator::zeros(1usize << p.n_sites.min(KAC_MAX_SITES));
    for i in 0..p.n_sites.min(KAC_MAX_SITES) {
        h = h.add(&pauli_chain(p.n_sites, i, SpinAxis::X)?.scaled(c(p.field)));
    }
    build_kac_chain_with(p.n_sites, p.eta, Operator::hermitian(h.into_mat())?)
}

/// Jumps L_i = Σ_j g_ij(η) σ_j^− with a caller-supplied Hamiltonian.
pub fn build_kac_chain_with(n: usize, eta: f64, hamiltonian: Operator) -> Result<LindbladModel> {
    if n < 2 {
        return Err(LabError::InvalidParameter("Kac chain needs N ≥ 2".into()));
    }
    if n > KAC_MAX_SITES {
        return Err(LabError::SizeCap(format!("Kac chain with {n} sites exceeds {KAC_MAX_SITES}")));
    }
    non_negative("eta", eta)?;
    let g = kac_couplings(n, eta);
    for i in 0..n {
        let row: f64 = g.row(i).sum();
        if (row - 1.0).abs() > 1e-12 {
            return Err(LabError::Numerical(format!("Kac row {i} sums to {row}")));
        }
    }
    let minus: Vec<Operator> = (0..n).map(|j| pauli_chain(n, j, SpinAxis::Minus)).collect::<Result<_>>()?;
    let d = 1usize << n;
    let jumps = (0..n)
        .map(|i| {
            let mut m = Array2::<C64>::zeros((d, d));
            for (j, sm) in minus.iter().enumerate() {
                m.scaled_add(c(g[[i, j]]), sm.mat());
            }
            Operator::new(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LindbladModel::new(hamiltonian, jumps, format!("kac_chain(eta={eta})"))?
        .with_scaling_note("L_i = sum_j g_ij(eta) sigma_j^-"))
}

/// ∏σ_x on the chain.
pub fn chain_parity(n: usize) -> Result<PTOperator> {
    chain_flip(n)
}

fn annihilation(dim: usize) -> CMat {
    let mut a = Array2::<C64>::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = c((n as f64).sqrt());
    }
    a
}

/// Truncated-Fock Kerr parametric oscillator. The single jump √(γ/2)·a
/// gives amplitude damping γ/2 in the mean field, matching
/// α̇ = (iΔ − γ/2)α − iGα* − iU|α|²α.
pub fn build_kerr(p: &KerrParams) -> Result<LindbladModel> {
    finite("detuning", p.detuning)?;
    finite("kerr", p.kerr)?;
    finite("pump", p.pump)?;
    non_negative("gamma", p.gamma)?;
    positive("scale", p.scale)?;
    if p.fock_cutoff < 20 {
        return Err(LabError::InvalidParameter(format!("Fock cutoff {} below 20", p.fock_cutoff)));
    }
    let dim = p.fock_cutoff + 1;
    let a = annihilation(dim);
    let ad = linalg::dagger(&a);
    let n = ad.dot(&a);
    let ad2 = ad.dot(&ad);
    let a2 = a.dot(&a);
    let h = n.mapv(|z| z * (-p.detuning))
        + ad2.dot(&a2).mapv(|z| z * (p.kerr / (2.0 * p.scale)))
        + (&ad2 + &a2).mapv(|z| z * (p.pump / 2.0));
    let h = Operator::hermitian(linalg::hermitian_part(&h))?;
    let l = Operator::new(a.mapv(|z| z * (p.gamma / 2.0).sqrt()))?;
    Ok(LindbladModel::new(h, vec![l], "kerr")?
        .with_scaling_note("L = sqrt(gamma/2) a so that <a> decays at rate gamma/2"))
}

/// Number operator on the Kerr Fock space.
pub fn kerr_number(p: &KerrParams) -> Operator {
    let a = annihilation(p.fock_cutoff + 1);
    Operator::from_mat(linalg::dagger(&a).dot(&a))
}

/// Population of the two highest Fock levels.
pub fn kerr_tail_weight(rho: &Operator) -> f64 {
    let d = rho.dim();
    (d.saturating_sub(2)..d).map(|k| rho.mat()[[k, k]].re).sum()
}

/// [`kerr_tail_weight`], failing above 1e−6 where the truncation distorts the state.
pub fn kerr_truncation_check(rho: &Operator) -> Result<f64> {
    let tail = kerr_tail_weight(rho);
    if tail > 1e-6 {
        return Err(LabError::Numerical(format!("Fock truncation: top-level weight {tail:.2e}")));
    }
    Ok(tail)
}

/// Open XXZ chain with standard hopping, gain √(γ/2)σ_1^+ and loss √(γ/2)σ_n^−.
pub fn build_xxz(p: &XxzParams) -> Result<LindbladModel> {
    let n = p.n_sites;
    if !(2..=XXZ_MAX_SITES).contains(&n) {
        return Err(LabError::InvalidParameter(format!("XXZ chain needs 2 ≤ n ≤ {XXZ_MAX_SITES}")));
    }
    finite("anisotropy", p.anisotropy)?;
    non_negative("gamma", p.gamma)?;
    let sp: Vec<Operator> = (0..n).map(|j| pauli_chain(n, j, SpinAxis::Plus)).collect::<Result<_>>()?;
    let sm: Vec<Operator> = (0..n).map(|j| pauli_chain(n, j, SpinAxis::Minus)).collect::<Result<_>>()?;
    let sz: Vec<Operator> = (0..n).map(|j| pauli_chain(n, j, SpinAxis::Z)).collect::<Result<_>>()?;
    let mut h = Operator::zeros(1 << n);
    for j in 0..n - 1 {
        let hop = sp[j].dot(&sm[j + 1]).add(&sm[j].dot(&sp[j + 1])).scaled(c(2.0));
        h = h.add(&hop).add(&sz[j].dot(&sz[j + 1]).scaled(c(p.anisotropy)));
    }
    let h = Operator::hermitian(h.into_mat())?;
    let r = (p.gamma / 2.0).sqrt();
    let jumps = vec![sp[0].scaled(c(r)), sm[n - 1].scaled(c(r))];
    Ok(LindbladModel::new(h, jumps, "xxz")?
        .with_scaling_note("hopping 2(s+_j s-_j+1 + h.c.); L1 = sqrt(gamma/2) s+_1, L2 = sqrt(gamma/2) s-_n"))
}

/// Spatial reflection j ↔ n+1−j of an `n`-site chain.
pub fn chain_reflection(n: usize) -> Result<PTOperator> {
    let d = 1usize << n;
    let mut p = Array2::<C64>::zeros((d, d));
    for x in 0..d {
        let mut y = 0usize;
        for k in 0..n {
            if x >> k & 1 == 1 {
                y |= 1 << (n - 1 - k);
            }
        }
        p[[y, x]] = c(1.0);
    }
    PTOperator::new(Operator::new(p)?)
}

/// Normalization of the exact DDM steady state in closed form, in log domain:
/// ln Σ_m (2S+m+1)! (m!)² / ((2S−m)! (2m+1)!) · (κ/(gS))^{2m}.
pub fn exact_ddm_log_norm(p: &DdmParams) -> Result<f64> {
    let b = p.basis()?;
    let s = b.spin();
    let two_s = b.twice_spin() as usize;
    let lf = |k: usize| ln_factorial(k);
    let r = p.kappa / (p.g * s);
    let terms: Vec<f64> = (0..=two_s)
        .map(|m| {
            let base = lf(two_s + m + 1) + 2.0 * lf(m) - lf(two_s - m) - lf(2 * m + 1);
            if m == 0 {
                base
            } else if r == 0.0 {
                f64::NEG_INFINITY
            } else {
                base + 2.0 * m as f64 * r.ln()
            }
        })
        .collect();
    let mx = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(mx + terms.iter().map(|t| (t - mx).exp()).sum::<f64>().ln())
}

pub fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// Unnormalized exact steady state Q Q† with Q = Σ_n (iκ S_−/(gS))^n.
pub fn exact_ddm_unnormalized(p: &DdmParams) -> Result<CMat> {
    let b = p.basis()?;
    if b.spin() > EXACT_TISS_MAX_SPIN {
        return Err(LabError::SizeCap(format!("exact steady state needs S ≤ {EXACT_TISS_MAX_SPIN}")));
    }
    let s = b.spin();
    let x = collective_spin(b, SpinAxis::Minus).into_mat().mapv(|z| z * I * (p.kappa / (p.g * s)));
    let d = b.dim();
    let mut q = linalg::eye(d);
    let mut pw = linalg::eye(d);
    for _ in 1..d {
        pw = pw.dot(&x);
        q = q + &pw;
    }
    Ok(q.dot(&linalg::dagger(&q)))
}

/// Exact DDM steady state, trace one.
pub fn exact_ddm_tiss(p: &DdmParams) -> Result<Operator> {
    let m = exact_ddm_unnormalized(p)?;
    let tr = linalg::trace(&m).re;
    Operator::hermitian(linalg::hermitian_part(&m.mapv(|z| z / tr)))
}

#[derive(Clone, Debug, Serialize)]
pub struct IsingReport {
    pub n_sites: usize,
    pub g: f64,
    pub e0: f64,
    pub e1: f64,
    pub gap_splitting: f64,
    /// ⟨ψ0|(O/N)²|ψ0⟩ at ε = 0.
    pub lro: f64,
    /// ⟨ψ0|O/N|ψ0⟩ at ε = 0.
    pub magnetization: f64,
    /// ⟨O/N⟩ in the ground state of H − εO.
    pub quasiaverage: f64,
}

/// Transverse Ising ring solved in the basis rotated by a Hadamard on every
/// site, where the Z2 parity is the bit-count parity and O = Σσ^z flips one bit.
struct IsingRing {
    n: usize,
    j: f64,
    h: f64,
}

impl IsingRing {
    fn apply(&self, eps: f64, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        for (s, out) in y.iter_mut().enumerate() {
            let ones = s.count_ones() as f64;
            *out = -self.h * (n as f64 - 2.0 * ones) * x[s];
        }
        for s in 0..x.len() {
            let xs = x[s];
            if xs == 0.0 {
                continue;
            }
            for i in 0..n {
                let k = (i + 1) % n;
                y[s ^ (1 << i) ^ (1 << k)] += -self.j * xs;
                if eps != 0.0 {
                    y[s ^ (1 << i)] += -eps * xs;
                }
            }
        }
    }

    fn order_parameter(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for s in 0..x.len() {
            for i in 0..self.n {
                y[s ^ (1 << i)] += x[s];
            }
        }
    }
}

/// Lowest eigenpair of a real symmetric map by Lanczos with full reorthogonalization.
fn lanczos_ground(
    dim: usize,
    mut op: impl FnMut(&[f64], &mut [f64]),
    project: impl Fn(&mut [f64]),
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    use ndarray_linalg::{Eigh, UPLO};
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    project(&mut v);
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut basis = vec![v];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];
    let max_k = dim.min(300);
    let mut prev = f64::INFINITY;
    loop {
        let k = basis.len() - 1;
        op(&basis[k], &mut w);
        project(&mut w);
        let a: f64 = w.iter().zip(&basis[k]).map(|(p, q)| p * q).sum();
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(p, q)| p * q).sum();
                w.iter_mut().zip(b).for_each(|(p, q)| *p -= c * q);
            }
        }
        let bn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let m = alpha.len();
        let t = Array2::from_shape_fn((m, m), |(i, j)| {
            if i == j {
                alpha[i]
            } else if i == j + 1 {
                beta[j]
            } else if j == i + 1 {
                beta[i]
            } else {
                0.0
            }
        });
        let (ev, vecs) = t.eigh(UPLO::Lower)?;
        let e0 = ev[0];
        let resid = bn * vecs[[m - 1, 0]].abs();
        let done = resid < 1e-13 * e0.abs().max(1.0) || bn < 1e-14 || m >= max_k;
        if done || ((e0 - prev).abs() < 1e-15 * e0.abs() && resid < 1e-11) {
            let mut x = vec![0.0; dim];
            for (i, b) in basis.iter().enumerate() {
                let yi = vecs[[i, 0]];
                x.iter_mut().zip(b).for_each(|(p, q)| *p += yi * q);
            }
            let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
            x.iter_mut().for_each(|p| *p /= nx);
            return Ok((e0, x));
        }
        prev = e0;
        beta.push(bn);
        basis.push(w.iter().map(|p| p / bn).collect());
    }
}

/// Exact-diagonalization SSB demo on the transverse Ising ring.
pub fn ising_ssb_demo(p: &IsingParams) -> Result<IsingReport> {
    let n = p.n_sites;
    if !(2..=ISING_MAX_SITES).contains(&n) {
        return Err(LabError::InvalidParameter(format!("Ising ring needs 2 ≤ N ≤ {ISING_MAX_SITES}")));
    }
    positive("J", p.j)?;
    non_negative("h", p.h)?;
    non_negative("epsilon", p.epsilon)?;
    let ring = IsingRing { n, j: p.j, h: p.h };
    let dim = 1usize << n;
    let sector = |parity: u32| {
        move |x: &mut [f64]| {
            for (s, v) in x.iter_mut().enumerate() {
                if s.count_ones() % 2 != parity {
                    *v = 0.0;
                }
            }
        }
    };
    let (e_even, psi0) = lanczos_ground(dim, |x, y| ring.apply(0.0, x, y), sector(0), 1)?;
    let (e_odd, _) = lanczos_ground(dim, |x, y| ring.apply(0.0, x, y), sector(1), 2)?;
    let (e0, e1) = if e_even <= e_odd { (e_even, e_odd) } else { (e_odd, e_even) };
    let mut o1 = vec![0.0; dim];
    ring.order_parameter(&psi0, &mut o1);
    let nf = n as f64;
    let magnetization = psi0.iter().zip(&o1).map(|(a, b)| a * b).sum::<f64>() / nf;
    let lro = o1.iter().map(|x| x * x).sum::<f64>() / (nf * nf);
    let quasiaverage = if p.epsilon > 0.0 {
        let (_, psi) = lanczos_ground(dim, |x, y| ring.apply(p.epsilon, x, y), |_| {}, 3)?;
        let mut o = vec![0.0; dim];
        ring.order_parameter(&psi, &mut o);
        psi.iter().zip(&o).map(|(a, b)| a * b).sum::<f64>() / nf
    } else {
        magnetization
    };
    Ok(IsingReport {
        n_sites: n,
        g: p.h / p.j,
        e0,
        e1,
        gap_splitting: e1 - e0,
        lro,
        magnetization,
        quasiaverage,
    })
}
