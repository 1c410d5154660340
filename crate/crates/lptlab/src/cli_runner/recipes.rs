//! Bundled demos and figure recipes with fixed parameter grids.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::tasks::{fp_rows, gap_of, meanfield_system, observable_row, thirdq_row, FpRow, ThirdqRow, TrajRow};
use super::{CsvRow, ModelConfig, RunContext, SpectrumSettings};
use crate::lindblad_engine::{shifted_lindbladian, unvec, vec_op, vectorize, SuperOperatorMatrix};
use crate::meanfield_dynamics::{ddm_meanfield, find_fixed_points, integrate_uniform, kerr_meanfield, lmg_meanfield};
use crate::model_zoo::{
    build_ddm, build_kerr, build_two_spin, build_xxz, ising_ssb_demo, kerr_number, kerr_tail_weight, spin_parity, DdmParams,
    IsingParams, KerrParams, LmgParams, TwoSpinParams, XxzParams,
};
use crate::observables::{fidelity, spectral_ansatz_state};
use crate::spectral_analysis::{
    crosshairs_check, eigenvalues, iterative_gap, partial_spectrum, pt_mode_measure, steady_state_direct, ArnoldiOptions,
};
use crate::spin_algebra::{pauli_chain, Operator, SpinAxis};
use crate::third_quantization::{build_structure_matrix, hp_reduce_two_spin, TwoSpinPhase};
use crate::{LabError, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DemoName {
    IsingSsb,
    KerrThreshold,
    XxzCrosshairs,
    RoptScaling,
}

impl DemoName {
    pub const ALL: [DemoName; 4] = [DemoName::IsingSsb, DemoName::KerrThreshold, DemoName::XxzCrosshairs, DemoName::RoptScaling];

    pub fn as_str(self) -> &'static str {
        match self {
            DemoName::IsingSsb => "ising-ssb",
            DemoName::KerrThreshold => "kerr-threshold",
            DemoName::XxzCrosshairs => "xxz-crosshairs",
            DemoName::RoptScaling => "ropt-scaling",
        }
    }
}

impl FromStr for DemoName {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| LabError::Config(format!("unknown demo `{s}` (ising-ssb, kerr-threshold, xxz-crosshairs, ropt-scaling)")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FigureName {
    Fig5,
    Fig6,
    Fig7,
    FigB1,
    FigC1,
    FigG1,
}

impl FigureName {
    pub const ALL: [FigureName; 6] =
        [FigureName::Fig5, FigureName::Fig6, FigureName::Fig7, FigureName::FigB1, FigureName::FigC1, FigureName::FigG1];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Fig5 => "fig5",
            FigureName::Fig6 => "fig6",
            FigureName::Fig7 => "fig7",
            FigureName::FigB1 => "figB1",
            FigureName::FigC1 => "figC1",
            FigureName::FigG1 => "figG1",
        }
    }
}

impl FromStr for FigureName {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| LabError::Config(format!("unknown figure `{s}` (fig5, fig6, fig7, figB1, figC1, figG1)")))
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Cartesian product of two grids, row-major in the first.
fn product<A: Copy, B: Copy>(a: &[A], b: &[B]) -> Vec<(A, B)> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IsingRow {
    pub n_sites: usize,
    pub e0: f64,
    pub e1: f64,
    pub splitting: f64,
    pub ln_splitting: f64,
    pub lro: f64,
    pub magnetization: f64,
    pub quasiaverage: f64,
}

impl CsvRow for IsingRow {
    const HEADER: &'static [&'static str] = &["n_sites", "e0", "e1", "splitting", "ln_splitting", "lro", "magnetization", "quasiaverage"];
}

/// Least-squares slope of y against x.
pub fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Ground-state splitting of the transverse Ising ring for each N, and the
/// slope of ln(E₁ − E₀) against N.
pub fn ising_scaling(sizes: &[usize], g: f64, epsilon: f64) -> Result<(Vec<IsingRow>, f64)> {
    let rows = sizes
        .iter()
        .map(|&n| {
            let r = ising_ssb_demo(&IsingParams { n_sites: n, j: 1.0, h: g, epsilon })?;
            Ok(IsingRow {
                n_sites: n,
                e0: r.e0,
                e1: r.e1,
                splitting: r.gap_splitting,
                ln_splitting: r.gap_splitting.ln(),
                lro: r.lro,
                magnetization: r.magnetization,
                quasiaverage: r.quasiaverage,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.n_sites as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.ln_splitting).collect();
    Ok((rows, linear_slope(&x, &y)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KerrRow {
    pub scale: f64,
    pub pump: f64,
    pub gap: f64,
    pub certified: bool,
    pub photons_over_scale: f64,
    pub infidelity_ref: Option<f64>,
    pub truncation_tail: f64,
}

impl CsvRow for KerrRow {
    const HEADER: &'static [&'static str] =
        &["scale", "pump", "gap", "certified", "photons_over_scale", "infidelity_ref", "truncation_tail"];
}

/// Infidelity between `rho` and the spectral-ansatz state built from the eigenmatrix at `lead`.
pub fn ansatz_infidelity(mat: &SuperOperatorMatrix, rho: &Operator, lead: C64) -> Result<f64> {
    let shift = lead + C64::new(0.1 * lead.re.abs().max(1e-12), 0.0);
    let ps = partial_spectrum(mat, shift, ArnoldiOptions { nev: 2, ..Default::default() })?;
    let k = (0..ps.eigenvalues.len())
        .min_by(|&a, &b| (ps.eigenvalues[a] - lead).norm().total_cmp(&(ps.eigenvalues[b] - lead).norm()))
        .ok_or_else(|| LabError::Numerical("no eigenpair near the leading mode".into()))?;
    let mode = Operator::new(unvec(&ps.modes[k], mat.dim()))?;
    Ok(1.0 - fidelity(rho, &spectral_ansatz_state(&mode)?)?)
}

/// Gap, occupation and spectral-ansatz infidelity of the Kerr oscillator.
pub fn kerr_point(p: &KerrParams, omega_max: f64) -> Result<KerrRow> {
    let mat = vectorize(&build_kerr(p)?)?;
    let scan = iterative_gap(&mat, omega_max, ArnoldiOptions::default())?;
    let gap = scan.gap.ok_or_else(|| LabError::Numerical("Kerr scan found no nonzero eigenvalue".into()))?;
    let rho = steady_state_direct(&mat)?;
    let infidelity_ref = scan.leading_nonzero().and_then(|lead| ansatz_infidelity(&mat, &rho, lead).ok());
    Ok(KerrRow {
        scale: p.scale,
        pump: p.pump,
        gap,
        certified: scan.certified,
        photons_over_scale: kerr_number(p).expect(&rho).re / p.scale,
        infidelity_ref,
        truncation_tail: kerr_tail_weight(&rho),
    })
}

pub fn kerr_reference(scale: f64, pump: f64) -> KerrParams {
    KerrParams { detuning: -10.0, kerr: 10.0, pump, gamma: 1.0, scale, fock_cutoff: 60 }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XxzEigRow {
    pub gamma: f64,
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub on_axes: bool,
}

impl CsvRow for XxzEigRow {
    const HEADER: &'static [&'static str] = &["gamma", "index", "re", "im", "on_axes"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct XxzCrosshairs {
    pub gamma: f64,
    pub shift_re: f64,
    pub fraction: f64,
    pub rows: Vec<XxzEigRow>,
}

pub fn xxz_crosshairs(n: usize, anisotropy: f64, gamma: f64, tol: f64) -> Result<XxzCrosshairs> {
    let mat = vectorize(&build_xxz(&XxzParams { n_sites: n, anisotropy, gamma })?)?;
    let (sh, shift) = shifted_lindbladian(&mat);
    let rep = crosshairs_check(&sh, shift, tol)?;
    let rows = rep
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(i, z)| XxzEigRow {
            gamma,
            index: i,
            re: z.re,
            im: z.im,
            on_axes: (z.re - shift.re).abs() <= tol || z.im.abs() <= tol,
        })
        .collect();
    Ok(XxzCrosshairs { gamma, shift_re: shift.re, fraction: rep.on_axes_fraction, rows })
}

/// Bisects for the smallest γ at which eigenvalues leave the crosshairs,
/// given `lo` on the crosshairs and `hi` off them.
pub fn xxz_gamma_c(n: usize, anisotropy: f64, mut lo: f64, mut hi: f64, tol: f64, steps: usize) -> Result<(f64, f64)> {
    let on = |g: f64| -> Result<bool> { Ok(xxz_crosshairs(n, anisotropy, g, tol)?.fraction >= 1.0) };
    if !on(lo)? || on(hi)? {
        return Err(LabError::Numerical(format!("crosshairs bracket [{lo}, {hi}] does not straddle the transition")));
    }
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if on(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SzRow {
    pub gamma: f64,
    pub t: f64,
    pub sz: f64,
}

impl CsvRow for SzRow {
    const HEADER: &'static [&'static str] = &["gamma", "t", "sz"];
}

/// ⟨Σσ^z⟩(t) from the basis state `initial`, by fixed-step RK4 on the vectorized generator.
pub fn xxz_sz_dynamics(p: &XxzParams, initial: usize, t_end: f64, dt: f64, every: usize) -> Result<Vec<SzRow>> {
    let mat = vectorize(&build_xxz(p)?)?;
    let d = mat.dim();
    let a = mat.matrix();
    let mut sz = Operator::zeros(d);
    for j in 0..p.n_sites {
        sz = sz.add(&pauli_chain(p.n_sites, j, SpinAxis::Z)?);
    }
    let mut rho = ndarray::Array2::<C64>::zeros((d, d));
    rho[[initial, initial]] = C64::new(1.0, 0.0);
    let mut y = vec_op(&rho);
    let steps = (t_end / dt).round() as usize;
    let axpy = |x: &[C64], k: &[C64], h: f64| -> Vec<C64> { x.iter().zip(k).map(|(u, v)| u + v * h).collect() };
    let mut rows = Vec::new();
    for s in 0..=steps {
        if s % every == 0 {
            let r = Operator::new(unvec(&y, d))?;
            rows.push(SzRow { gamma: p.gamma, t: s as f64 * dt, sz: sz.expect(&r).re });
        }
        if s == steps {
            break;
        }
        let k1 = a.apply(&y);
        let k2 = a.apply(&axpy(&y, &k1, dt / 2.0));
        let k3 = a.apply(&axpy(&y, &k2, dt / 2.0));
        let k4 = a.apply(&axpy(&y, &k3, dt));
        for i in 0..y.len() {
            y[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoptRow {
    pub spin: f64,
    pub re: f64,
    pub im: f64,
    pub r_opt: f64,
}

impl CsvRow for RoptRow {
    const HEADER: &'static [&'static str] = &["spin", "re", "im", "r_opt"];
}

/// PT measure of the leading oscillatory DDM eigenmode (g = 1).
pub fn ropt_point(spin: f64, kappa: f64, im_tol: f64) -> Result<RoptRow> {
    let mat = vectorize(&build_ddm(&DdmParams { spin, g: 1.0, kappa })?)?;
    let omega = 2.0 * (1.0 - kappa * kappa).max(0.0).sqrt();
    let scan = iterative_gap(&mat, 1.5 * omega + 0.5, ArnoldiOptions::default())?;
    let lead = scan
        .leading_oscillatory(im_tol)
        .ok_or_else(|| LabError::Numerical(format!("no oscillatory mode at S = {spin}")))?;
    let ps = partial_spectrum(&mat, lead + C64::new(0.0, 1e-7), ArnoldiOptions { nev: 2, ..Default::default() })?;
    let k = (0..ps.eigenvalues.len())
        .min_by(|&a, &b| (ps.eigenvalues[a] - lead).norm().total_cmp(&(ps.eigenvalues[b] - lead).norm()))
        .ok_or_else(|| LabError::Numerical("no eigenpair near the oscillatory mode".into()))?;
    let mode = Operator::new(unvec(&ps.modes[k], mat.dim()))?;
    let (r, _) = pt_mode_measure(&mode, &spin_parity(spin)?)?;
    Ok(RoptRow { spin, re: ps.eigenvalues[k].re, im: ps.eigenvalues[k].im, r_opt: r })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapRow {
    pub spin: f64,
    pub kappa: f64,
    pub gap: f64,
}

impl CsvRow for GapRow {
    const HEADER: &'static [&'static str] = &["spin", "kappa", "gap"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MzRow {
    pub spin: f64,
    pub kappa: f64,
    pub mz_x: f64,
    pub mz_y: f64,
    pub mz_z: f64,
}

impl CsvRow for MzRow {
    const HEADER: &'static [&'static str] = &["spin", "kappa", "mz_x", "mz_y", "mz_z"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PurityRow {
    pub spin: f64,
    pub kappa: f64,
    pub purity: f64,
    pub infidelity_pt: Option<f64>,
}

impl CsvRow for PurityRow {
    const HEADER: &'static [&'static str] = &["spin", "kappa", "purity", "infidelity_pt"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SqueezeKappaRow {
    pub spin: f64,
    pub kappa: f64,
    pub xi2_ku: Option<f64>,
    pub xi2_w: Option<f64>,
}

impl CsvRow for SqueezeKappaRow {
    const HEADER: &'static [&'static str] = &["spin", "kappa", "xi2_ku", "xi2_w"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigScalingRow {
    pub spin: f64,
    pub re_oscillatory: f64,
    pub im_oscillatory: f64,
    pub re_leading: f64,
    pub im_leading: f64,
}

impl CsvRow for EigScalingRow {
    const HEADER: &'static [&'static str] = &["spin", "re_oscillatory", "im_oscillatory", "re_leading", "im_leading"];
}

/// Leading oscillatory and leading nonzero DDM eigenvalues at g = 1 from the iterative scan.
pub fn ddm_leading_modes(spin: f64, kappa: f64, im_tol: f64) -> Result<EigScalingRow> {
    let mat = vectorize(&build_ddm(&DdmParams { spin, g: 1.0, kappa })?)?;
    let omega = 2.0 * (1.0 - kappa * kappa).max(0.0).sqrt();
    let scan = iterative_gap(&mat, 1.5 * omega + 0.5, ArnoldiOptions::default())?;
    let osc = scan.leading_oscillatory(im_tol).ok_or_else(|| LabError::Numerical("no oscillatory mode".into()))?;
    let lead = scan.leading_nonzero().ok_or_else(|| LabError::Numerical("no nonzero mode".into()))?;
    Ok(EigScalingRow { spin, re_oscillatory: osc.re, im_oscillatory: osc.im, re_leading: lead.re, im_leading: lead.im })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LmgPhaseRow {
    pub chi_x: f64,
    pub chi_y: f64,
    pub kappa: f64,
    pub n_pt_symmetric: usize,
    pub n_pt_broken: usize,
    pub region: String,
}

impl CsvRow for LmgPhaseRow {
    const HEADER: &'static [&'static str] = &["chi_x", "chi_y", "kappa", "n_pt_symmetric", "n_pt_broken", "region"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoSpinPhaseRow {
    pub gamma_gain: f64,
    pub gamma_loss: f64,
    pub fm_up_min_re_beta: f64,
    pub fm_down_min_re_beta: f64,
    pub am_min_re_beta: f64,
    pub stable: String,
}

impl CsvRow for TwoSpinPhaseRow {
    const HEADER: &'static [&'static str] =
        &["gamma_gain", "gamma_loss", "fm_up_min_re_beta", "fm_down_min_re_beta", "am_min_re_beta", "stable"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LabeledEigRow {
    pub label: String,
    pub index: usize,
    pub re: f64,
    pub im: f64,
}

impl CsvRow for LabeledEigRow {
    const HEADER: &'static [&'static str] = &["label", "index", "re", "im"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TwoSpinPtRow {
    pub spin: f64,
    pub gamma: f64,
    pub purity: f64,
    pub infidelity_pt: f64,
}

impl CsvRow for TwoSpinPtRow {
    const HEADER: &'static [&'static str] = &["spin", "gamma", "purity", "infidelity_pt"];
}

pub fn demo(name: DemoName, ctx: &mut RunContext) -> Result<()> {
    match name {
        DemoName::IsingSsb => {
            let g = 0.2;
            let (rows, slope) = ising_scaling(&[4, 6, 8, 10, 12], g, 1e-3)?;
            ctx.out.csv("ising.csv", &rows)?;
            ctx.out.json(
                "ising.json",
                &json!({ "g": g, "slope": slope, "ln_g": g.ln(), "relative_error": (slope - g.ln()).abs() / g.ln().abs() }),
            )
        }
        DemoName::KerrThreshold => {
            let grid: Vec<f64> = (6..=22).map(f64::from).collect();
            let rows = ctx.points("kerr", &grid, |_, g| kerr_point(&kerr_reference(20.0, g), 1.0))?;
            let mf = kerr_meanfield(&kerr_reference(20.0, 10.0));
            let at = |g: f64| rows.iter().find(|r| r.pump == g).map(|r| r.gap);
            let (below, above) = (at(8.0), at(18.0));
            ctx.out.csv("kerr_threshold.csv", &rows)?;
            ctx.out.json(
                "kerr_threshold.json",
                &json!({
                    "g_c": mf.g_c,
                    "gap_below": below,
                    "gap_above": above,
                    "drop": below.zip(above).map(|(b, a)| b / a),
                    "pump_below": 8.0,
                    "pump_above": 18.0,
                }),
            )
        }
        DemoName::XxzCrosshairs => xxz_files(ctx, false),
        DemoName::RoptScaling => ropt_files(ctx, &[10.0, 20.0, 40.0]),
    }
}

fn xxz_files(ctx: &mut RunContext, dynamics: bool) -> Result<()> {
    let tol = ctx.config.tolerances.crosshairs;
    let gammas = [0.02, 0.2];
    let reps = ctx.points("xxz", &gammas, |_, g| xxz_crosshairs(4, 0.5, g, tol))?;
    let rows: Vec<XxzEigRow> = reps.iter().flat_map(|r| r.rows.iter().cloned()).collect();
    ctx.out.csv("xxz_eigs.csv", &rows)?;
    let (lo, hi) = xxz_gamma_c(4, 0.5, 0.02, 0.2, tol, 24)?;
    let summary: Vec<_> = reps.iter().map(|r| json!({"gamma": r.gamma, "shift_re": r.shift_re, "fraction": r.fraction})).collect();
    ctx.out.json("xxz_crosshairs.json", &json!({ "n": 4, "anisotropy": 0.5, "tol": tol, "runs": summary, "gamma_c_bracket": [lo, hi] }))?;
    if dynamics {
        let per = ctx.points("xxz-sz", &gammas, |_, g| {
            xxz_sz_dynamics(&XxzParams { n_sites: 4, anisotropy: 0.5, gamma: g }, 0b0011, 40.0, 0.02, 25)
        })?;
        let rows: Vec<SzRow> = per.into_iter().flatten().collect();
        ctx.out.csv("xxz_sz_dynamics.csv", &rows)?;
    }
    Ok(())
}

fn ropt_files(ctx: &mut RunContext, spins: &[f64]) -> Result<()> {
    let im_tol = ctx.config.tolerances.oscillatory_im;
    let rows = ctx.points("ropt", spins, |_, s| ropt_point(s, 0.5, im_tol))?;
    ctx.out.csv("ropt.csv", &rows)
}

pub fn figure(name: FigureName, ctx: &mut RunContext) -> Result<()> {
    match name {
        FigureName::Fig5 => fig5(ctx),
        FigureName::Fig6 => fig6(ctx),
        FigureName::Fig7 => fig7(ctx),
        FigureName::FigB1 => {
            let pts = product(&[10.0, 20.0, 30.0], &(4..=20).map(f64::from).collect::<Vec<_>>());
            let grid: Vec<f64> = (0..pts.len()).map(|i| i as f64).collect();
            let rows = ctx.points("figB1", &grid, |i, _| kerr_point(&kerr_reference(pts[i].0, pts[i].1), 1.0))?;
            ctx.out.csv("kerr_scaling.csv", &rows)?;
            ctx.out.json("kerr_meanfield.json", &kerr_meanfield(&kerr_reference(20.0, 10.0)))
        }
        FigureName::FigC1 => xxz_files(ctx, true),
        FigureName::FigG1 => ropt_files(ctx, &[5.0, 10.0, 20.0, 40.0]),
    }
}

fn fig5(ctx: &mut RunContext) -> Result<()> {
    let spectrum = SpectrumSettings::default();
    let kappas = linspace(0.1, 3.0, 30);
    let pts = product(&[10.0, 20.0, 40.0], &kappas);
    let idx: Vec<f64> = (0..pts.len()).map(|i| i as f64).collect();
    let obs = ctx.points("fig5-obs", &idx, |i, _| {
        let (s, k) = pts[i];
        let cfg = ModelConfig::Ddm(DdmParams { spin: s, g: 1.0, kappa: k });
        let gap_spectrum = if s <= 20.0 { spectrum.clone() } else { SpectrumSettings { dense_max_dim_sq: 0, ..spectrum.clone() } };
        observable_row(&cfg, k, &gap_spectrum)
    })?;
    let gap_rows: Vec<GapRow> = pts.iter().zip(&obs).map(|(&(s, k), r)| GapRow { spin: s, kappa: k, gap: r.gap }).collect();
    let mz: Vec<MzRow> = pts
        .iter()
        .zip(&obs)
        .map(|(&(s, k), r)| MzRow { spin: s, kappa: k, mz_x: r.mz_x.unwrap_or(f64::NAN), mz_y: r.mz_y.unwrap_or(f64::NAN), mz_z: r.mz_z.unwrap_or(f64::NAN) })
        .collect();
    let pur: Vec<PurityRow> =
        pts.iter().zip(&obs).map(|(&(s, k), r)| PurityRow { spin: s, kappa: k, purity: r.purity, infidelity_pt: r.infidelity_pt }).collect();
    let sq: Vec<SqueezeKappaRow> =
        pts.iter().zip(&obs).map(|(&(s, k), r)| SqueezeKappaRow { spin: s, kappa: k, xi2_ku: r.xi2_ku, xi2_w: r.xi2_w }).collect();
    ctx.out.csv("gap_vs_kappa.csv", &gap_rows)?;
    ctx.out.csv("mz_vs_kappa.csv", &mz)?;
    ctx.out.csv("purity_vs_kappa.csv", &pur)?;
    ctx.out.csv("squeeze_vs_kappa.csv", &sq)?;

    let im_tol = ctx.config.tolerances.oscillatory_im;
    let scaling = ctx.points("fig5-eig", &[10.0, 20.0, 40.0], |_, s| ddm_leading_modes(s, 0.5, im_tol))?;
    ctx.out.csv("eig_scaling.csv", &scaling)?;

    let mf_grid = linspace(0.05, 3.0, 60);
    let fps = ctx.points("fig5-mf", &mf_grid, |_, k| Ok(fp_rows(k, &find_fixed_points(&ddm_meanfield(1.0, k), 0)?)))?;
    ctx.out.csv("ddm_meanfield_fp.csv", &fps.into_iter().flatten().collect::<Vec<FpRow>>())?;
    let traj = integrate_uniform(&ddm_meanfield(1.0, 0.5), &[0.0, 0.0, 1.0], 20.0, 2000)?;
    let rows: Vec<TrajRow> = traj.t.iter().zip(&traj.states).map(|(&t, m)| TrajRow { t, x: m[0], y: m[1], z: m[2] }).collect();
    ctx.out.csv("ddm_trajectory.csv", &rows)
}

fn fig6(ctx: &mut RunContext) -> Result<()> {
    let (chi_x, chi_y) = (1.0, -4.0);
    let kappas = linspace(0.1, 4.0, 40);
    let pts = product(&[5.0, 10.0, 20.0], &kappas);
    let idx: Vec<f64> = (0..pts.len()).map(|i| i as f64).collect();
    let spectrum = SpectrumSettings::default();
    let obs = ctx.points("fig6-obs", &idx, |i, _| {
        let (s, k) = pts[i];
        let cfg = ModelConfig::Lmg(LmgParams { spin: s, chi_x, chi_y, kappa: k });
        let mat = vectorize(&cfg.build()?)?;
        let rho = steady_state_direct(&mat)?;
        let basis = cfg.spin_basis().ok_or_else(|| LabError::Config("invalid spin".into()))?;
        let m = crate::observables::magnetization(&rho, basis)?;
        let gap = if s == 10.0 { Some(gap_of(&mat, &spectrum)?.gap) } else { None };
        Ok((MzRow { spin: s, kappa: k, mz_x: m[0], mz_y: m[1], mz_z: m[2] }, gap))
    })?;
    let mz: Vec<MzRow> = obs.iter().map(|(r, _)| r.clone()).collect();
    let gaps: Vec<GapRow> = obs.iter().filter_map(|(r, g)| g.map(|g| GapRow { spin: r.spin, kappa: r.kappa, gap: g })).collect();
    ctx.out.csv("lmg_mz_vs_kappa.csv", &mz)?;
    ctx.out.csv("lmg_gap_vs_kappa.csv", &gaps)?;

    let mf_grid = linspace(0.05, 4.0, 80);
    let fps = ctx.points("fig6-mf", &mf_grid, |_, k| {
        let cfg = ModelConfig::Lmg(LmgParams { spin: 1.0, chi_x, chi_y, kappa: k });
        Ok(fp_rows(k, &find_fixed_points(&meanfield_system(&cfg)?, 0)?))
    })?;
    ctx.out.csv("lmg_meanfield_fp.csv", &fps.into_iter().flatten().collect::<Vec<FpRow>>())?;

    let phase_pts = product(&linspace(-6.0, -0.5, 12), &linspace(0.1, 4.0, 40));
    let idx: Vec<f64> = (0..phase_pts.len()).map(|i| i as f64).collect();
    let phase = ctx.points("fig6-phase", &idx, |i, _| {
        let (cy, k) = phase_pts[i];
        let fps = find_fixed_points(&lmg_meanfield(chi_x, cy, k), 0)?;
        let sym = fps.iter().filter(|f| f.pt_symmetric).count();
        let broken = fps.len() - sym;
        let region = match (sym > 0, broken > 0) {
            (true, true) => "coexistence",
            (true, false) => "pt_symmetric",
            (false, true) => "pt_broken",
            (false, false) => "none",
        };
        Ok(LmgPhaseRow { chi_x, chi_y: cy, kappa: k, n_pt_symmetric: sym, n_pt_broken: broken, region: region.into() })
    })?;
    ctx.out.csv("lmg_phase_diagram.csv", &phase)?;
    ctx.out.json(
        "lmg_boundaries.json",
        &json!({
            "chi_x": chi_x,
            "chi_y": chi_y,
            "kappa_c1_printed": (chi_x - chi_y) / 4.0,
            "kappa_c1_zero_z_existence": (chi_x - chi_y) / 2.0,
            "kappa_c2": (-chi_x * chi_y).sqrt(),
        }),
    )
}

fn fig7(ctx: &mut RunContext) -> Result<()> {
    let g = 1.0;
    let rates = linspace(0.05, 3.0, 30);
    let pts = product(&rates, &rates);
    let idx: Vec<f64> = (0..pts.len()).map(|i| i as f64).collect();
    let phase = ctx.points("fig7-phase", &idx, |i, _| {
        let (gg, gl) = pts[i];
        let p = TwoSpinParams { spin: 1.0, g, gamma_gain: gg, gamma_loss: gl };
        let min_re = |ph: TwoSpinPhase| -> Result<f64> {
            let sm = build_structure_matrix(&hp_reduce_two_spin(&p, ph))?;
            Ok(sm.rapidities.iter().map(|b| b.re).fold(f64::INFINITY, f64::min))
        };
        let vals = [min_re(TwoSpinPhase::FmUp)?, min_re(TwoSpinPhase::FmDown)?, min_re(TwoSpinPhase::Am)?];
        let stable: Vec<&str> = ["fm_up", "fm_down", "am"].iter().zip(&vals).filter(|(_, &v)| v > 1e-12).map(|(n, _)| *n).collect();
        Ok(TwoSpinPhaseRow {
            gamma_gain: gg,
            gamma_loss: gl,
            fm_up_min_re_beta: vals[0],
            fm_down_min_re_beta: vals[1],
            am_min_re_beta: vals[2],
            stable: if stable.is_empty() { "none".into() } else { stable.join("+") },
        })
    })?;
    ctx.out.csv("two_spin_phase_diagram.csv", &phase)?;

    let balanced = linspace(1.05, 3.0, 40);
    let rows = ctx.points("fig7-thirdq", &balanced, |_, gam| {
        let cfg = ModelConfig::TwoSpin(TwoSpinParams { spin: 1.0, g, gamma_gain: gam, gamma_loss: gam });
        thirdq_row(&cfg, gam, TwoSpinPhase::Am, &[1])
    })?;
    ctx.out.csv("two_spin_thirdq.csv", &rows.into_iter().collect::<Vec<ThirdqRow>>())?;

    let cases = [("am", 2.0, 2.0), ("fm", 0.5, 0.495)];
    let idx: Vec<f64> = (0..cases.len()).map(|i| i as f64).collect();
    let eigs = ctx.points("fig7-eigs", &idx, |i, _| {
        let (label, gg, gl) = cases[i];
        let mat = vectorize(&build_two_spin(&TwoSpinParams { spin: 4.0, g, gamma_gain: gg, gamma_loss: gl })?)?;
        Ok(eigenvalues(&mat)?
            .iter()
            .enumerate()
            .map(|(k, z)| LabeledEigRow { label: label.into(), index: k, re: z.re, im: z.im })
            .collect::<Vec<_>>())
    })?;
    ctx.out.csv("two_spin_eigs.csv", &eigs.into_iter().flatten().collect::<Vec<_>>())?;

    let pt_pts = product(&[2.0, 4.0], &linspace(0.2, 3.0, 15));
    let idx: Vec<f64> = (0..pt_pts.len()).map(|i| i as f64).collect();
    let pt_rows = ctx.points("fig7-pt", &idx, |i, _| {
        let (s, gam) = pt_pts[i];
        let cfg = ModelConfig::TwoSpin(TwoSpinParams { spin: s, g, gamma_gain: gam, gamma_loss: gam });
        let rho = steady_state_direct(&vectorize(&cfg.build()?)?)?;
        let pt = cfg.pt()?.ok_or_else(|| LabError::Config("two-spin model lacks a swap parity".into()))?;
        Ok(TwoSpinPtRow { spin: s, gamma: gam, purity: crate::observables::purity(&rho), infidelity_pt: 1.0 - fidelity(&rho, &pt.conjugate(&rho))? })
    })?;
    ctx.out.csv("two_spin_infidelity.csv", &pt_rows)
}
