//! The config-driven tasks: spectrum, steady, meanfield, sweep, squeeze, thirdq.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{CsvRow, ModelConfig, RunContext, SpectrumSettings, Task};
use crate::lindblad_engine::{vectorize, SuperOperatorMatrix};
use crate::meanfield_dynamics::{
    check_npt_symmetry_seeded, ddm_analytic_z, ddm_meanfield, find_fixed_points, integrate_uniform, kerr_meanfield, lmg_meanfield,
    period_estimate, Classification, FixedPointReport, MeanFieldSystem,
};
use crate::model_zoo::{exact_ddm_tiss, kerr_number, kerr_tail_weight};
use crate::observables::{fidelity, magnetization, pt_asymmetry, purity, squeeze};
use crate::spectral_analysis::{dense_gap, full_spectrum_with, iterative_gap, steady_state_direct, ArnoldiOptions};
use crate::spin_algebra::Operator;
use crate::third_quantization::{
    beta_am, beta_fm, build_structure_matrix, gaussian_purity_negativity, hp_reduce_two_spin, spectrum_from_rapidities, steady_covariance,
    TwoSpinPhase,
};
use crate::{LabError, Result, C64};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigRow {
    pub index: usize,
    pub re: f64,
    pub im: f64,
    pub is_pie: bool,
    pub residual: f64,
}

impl CsvRow for EigRow {
    const HEADER: &'static [&'static str] = &["index", "re", "im", "is_pie", "residual"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub gap: f64,
    pub mz_x: Option<f64>,
    pub mz_y: Option<f64>,
    pub mz_z: Option<f64>,
    pub purity: f64,
    pub xi2_ku: Option<f64>,
    pub xi2_w: Option<f64>,
    pub infidelity_pt: Option<f64>,
}

impl CsvRow for SweepRow {
    const HEADER: &'static [&'static str] = &["param", "gap", "mz_x", "mz_y", "mz_z", "purity", "xi2_ku", "xi2_w", "infidelity_pt"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrajRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl CsvRow for TrajRow {
    const HEADER: &'static [&'static str] = &["t", "X", "Y", "Z"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FpRow {
    pub param: f64,
    pub fp_id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub pt_symmetric: bool,
    pub class: Classification,
    pub re_lam1: Option<f64>,
    pub im_lam1: Option<f64>,
    pub re_lam2: Option<f64>,
    pub im_lam2: Option<f64>,
}

impl CsvRow for FpRow {
    const HEADER: &'static [&'static str] =
        &["param", "fp_id", "X", "Y", "Z", "pt_symmetric", "class", "re_lam1", "im_lam1", "re_lam2", "im_lam2"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThirdqRow {
    pub param: f64,
    pub re_beta_p: f64,
    pub im_beta_p: f64,
    pub re_beta_m: f64,
    pub im_beta_m: f64,
    pub gap: Option<f64>,
    pub purity: Option<f64>,
    pub negativity: Option<f64>,
}

impl CsvRow for ThirdqRow {
    const HEADER: &'static [&'static str] =
        &["param", "re_beta_p", "im_beta_p", "re_beta_m", "im_beta_m", "gap", "purity", "negativity"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SqueezeRow {
    pub param: f64,
    pub xi2_ku: Option<f64>,
    pub xi2_w: Option<f64>,
    pub min_variance: Option<f64>,
    pub n_x: Option<f64>,
    pub n_y: Option<f64>,
    pub n_z: Option<f64>,
}

impl CsvRow for SqueezeRow {
    const HEADER: &'static [&'static str] = &["param", "xi2_ku", "xi2_w", "min_variance", "n_x", "n_y", "n_z"];
}

#[derive(Clone, Debug, Serialize)]
pub struct GapInfo {
    pub gap: f64,
    pub certified: bool,
    pub method: &'static str,
}

/// Dense gap when d² is small enough, otherwise the iterative imaginary-axis scan.
pub fn gap_of(mat: &SuperOperatorMatrix, s: &SpectrumSettings) -> Result<GapInfo> {
    if mat.dim_sq() <= s.dense_max_dim_sq {
        let (gap, _) = dense_gap(mat)?;
        return Ok(GapInfo { gap, certified: true, method: "dense" });
    }
    let scan = iterative_gap(mat, s.omega_max, ArnoldiOptions { nev: s.nev, ..Default::default() })?;
    let gap = scan.gap.ok_or_else(|| LabError::Numerical("iterative scan found no nonzero eigenvalue".into()))?;
    Ok(GapInfo { gap, certified: scan.certified, method: "iterative" })
}

/// Closed-form steady state for the DDM, direct null-space solve otherwise.
pub fn steady_of(model_cfg: &ModelConfig, mat: &SuperOperatorMatrix) -> Result<Operator> {
    match model_cfg {
        ModelConfig::Ddm(p) => exact_ddm_tiss(p),
        _ => steady_state_direct(mat),
    }
}

pub fn observable_row(model_cfg: &ModelConfig, param: f64, s: &SpectrumSettings) -> Result<SweepRow> {
    let model = model_cfg.build()?;
    let mat = vectorize(&model)?;
    let gap = gap_of(&mat, s)?.gap;
    let rho = steady_of(model_cfg, &mat)?;
    let basis = model_cfg.spin_basis();
    let mz = basis.map(|b| magnetization(&rho, b)).transpose()?;
    let sq = basis.and_then(|b| squeeze(&rho, b).ok());
    let infidelity_pt = match model_cfg.pt()? {
        Some(pt) => Some(1.0 - fidelity(&rho, &pt.conjugate(&rho))?),
        None => None,
    };
    Ok(SweepRow {
        param,
        gap,
        mz_x: mz.map(|m| m[0]),
        mz_y: mz.map(|m| m[1]),
        mz_z: mz.map(|m| m[2]),
        purity: purity(&rho),
        xi2_ku: sq.as_ref().map(|q| q.xi2_ku),
        xi2_w: sq.as_ref().map(|q| q.xi2_w),
        infidelity_pt,
    })
}

pub fn meanfield_system(model_cfg: &ModelConfig) -> Result<MeanFieldSystem> {
    match model_cfg {
        ModelConfig::Ddm(p) => Ok(ddm_meanfield(p.g, p.kappa)),
        ModelConfig::Lmg(p) => Ok(lmg_meanfield(p.chi_x, p.chi_y, p.kappa)),
        other => Err(LabError::Config(format!("no collective-spin mean field for model `{}`", other.kind()))),
    }
}

/// Rows sorted by location so `fp_id` is stable across runs.
pub fn fp_rows(param: f64, fps: &[FixedPointReport]) -> Vec<FpRow> {
    let mut sorted: Vec<&FixedPointReport> = fps.iter().collect();
    sorted.sort_by(|a, b| {
        a.location
            .iter()
            .zip(&b.location)
            .map(|(x, y)| y.total_cmp(x))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let lam = |i: usize| f.excitation_eigs.get(i).copied();
            FpRow {
                param,
                fp_id: k,
                x: f.location[0],
                y: f.location[1],
                z: f.location[2],
                pt_symmetric: f.pt_symmetric,
                class: f.classification,
                re_lam1: lam(0).map(|z| z.re),
                im_lam1: lam(0).map(|z| z.im),
                re_lam2: lam(1).map(|z| z.re),
                im_lam2: lam(1).map(|z| z.im),
            }
        })
        .collect()
}

fn default_initial(model_cfg: &ModelConfig) -> Vec<f64> {
    match model_cfg {
        ModelConfig::Lmg(_) => vec![0.6, 0.0, 0.8],
        _ => vec![0.0, 0.0, 1.0],
    }
}

/// Distinct rapidities ordered by (Re, Im) descending; β₊ is the first, β₋ the last.
fn beta_pm(rapidities: &[C64]) -> (C64, C64) {
    let mut d: Vec<C64> = Vec::new();
    for &b in rapidities {
        if !d.iter().any(|w| (w - b).norm() <= 1e-9 * (1.0 + b.norm())) {
            d.push(b);
        }
    }
    d.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    (d[0], d[d.len() - 1])
}

pub fn thirdq_row(model_cfg: &ModelConfig, param: f64, phase: TwoSpinPhase, subsystem_b: &[usize]) -> Result<ThirdqRow> {
    let ModelConfig::TwoSpin(p) = model_cfg else {
        return Err(LabError::Config(format!("thirdq needs a two_spin model, got `{}`", model_cfg.kind())));
    };
    let qm = hp_reduce_two_spin(p, phase);
    let sm = build_structure_matrix(&qm)?;
    let (bp, bm) = beta_pm(&sm.rapidities);
    let gap = spectrum_from_rapidities(&sm, 1)
        .ok()
        .and_then(|v| v.iter().filter(|z| z.norm() > 1e-12).map(|z| -z.re).reduce(f64::min));
    let (purity, negativity) = match steady_covariance(&qm).and_then(|c| gaussian_purity_negativity(&c, subsystem_b)) {
        Ok((pu, ne)) => (Some(pu), Some(ne)),
        Err(LabError::Numerical(_)) => (None, None),
        Err(e) => return Err(e),
    };
    Ok(ThirdqRow { param, re_beta_p: bp.re, im_beta_p: bp.im, re_beta_m: bm.re, im_beta_m: bm.im, gap, purity, negativity })
}

pub fn run(task: Task, ctx: &mut RunContext) -> Result<()> {
    match task {
        Task::Spectrum => spectrum(ctx),
        Task::Steady => steady(ctx),
        Task::Meanfield => meanfield(ctx),
        Task::Sweep => sweep(ctx),
        Task::Squeeze => squeeze_task(ctx),
        Task::Thirdq => thirdq(ctx),
        Task::Demo | Task::Figure => unreachable!("resolved to named jobs"),
    }
}

fn spectrum(ctx: &mut RunContext) -> Result<()> {
    let model_cfg = ctx.config.model()?.clone();
    let s = ctx.config.spectrum.clone();
    let mat = vectorize(&model_cfg.build()?)?;
    let tol_pie = ctx.config.tolerances.pie.unwrap_or(1e-6 * mat.matrix().max_abs());
    let is_pie = |z: &C64| z.re.abs() <= tol_pie && z.im.abs() > tol_pie;
    if mat.dim_sq() <= s.dense_max_dim_sq {
        let spec = full_spectrum_with(&mat, Some(tol_pie))?;
        let rows: Vec<EigRow> = spec
            .eigenvalues
            .iter()
            .zip(&spec.residuals)
            .enumerate()
            .map(|(i, (z, &r))| EigRow { index: i, re: z.re, im: z.im, is_pie: is_pie(z), residual: r })
            .collect();
        let mut doc = spec.to_json(s.include_modes);
        doc["method"] = json!("dense");
        doc["model"] = json!(model_cfg);
        ctx.out.json("spectrum.json", &doc)?;
        ctx.out.csv("eigs.csv", &rows)
    } else {
        let scan = iterative_gap(&mat, s.omega_max, ArnoldiOptions { nev: s.nev, ..Default::default() })?;
        let rows: Vec<EigRow> = scan
            .eigenvalues
            .iter()
            .zip(&scan.residuals)
            .enumerate()
            .map(|(i, (z, &r))| EigRow { index: i, re: z.re, im: z.im, is_pie: is_pie(z), residual: r })
            .collect();
        let doc = json!({
            "dim": mat.dim(),
            "vectorization": "row-major",
            "method": "iterative",
            "half_plane": "upper",
            "omega_max": s.omega_max,
            "eigenvalues": scan.eigenvalues.iter().map(|z| json!({"re": z.re, "im": z.im})).collect::<Vec<_>>(),
            "gap": scan.gap,
            "certified": scan.certified,
            "depth": scan.depth,
            "tol_pie": tol_pie,
            "max_residual": scan.residuals.iter().cloned().fold(0.0, f64::max),
            "model": model_cfg,
        });
        ctx.out.json("spectrum.json", &doc)?;
        ctx.out.csv("eigs.csv", &rows)
    }
}

fn steady(ctx: &mut RunContext) -> Result<()> {
    let model_cfg = ctx.config.model()?.clone();
    let mat = vectorize(&model_cfg.build()?)?;
    let rho = steady_of(&model_cfg, &mat)?;
    let (w, _) = crate::linalg::eigh(rho.mat())?;
    let mut doc = json!({
        "model": model_cfg,
        "dim": rho.dim(),
        "trace": rho.trace().re,
        "min_eigenvalue": w.iter().cloned().fold(f64::INFINITY, f64::min),
        "purity": purity(&rho),
    });
    if let Some(b) = model_cfg.spin_basis() {
        doc["magnetization"] = json!(magnetization(&rho, b)?);
        doc["squeeze"] = json!(squeeze(&rho, b).ok());
    }
    if let Some(pt) = model_cfg.pt()? {
        doc["infidelity_pt"] = json!(1.0 - fidelity(&rho, &pt.conjugate(&rho))?);
        doc["pt_asymmetry_op_norm"] = json!(pt_asymmetry(&rho, &pt)?.0);
    }
    if let ModelConfig::Ddm(_) = model_cfg {
        let direct = steady_state_direct(&mat)?;
        doc["fidelity_direct_vs_exact"] = json!(fidelity(&direct, &rho)?);
    }
    if let ModelConfig::Kerr(p) = &model_cfg {
        doc["photons_over_scale"] = json!(kerr_number(p).expect(&rho).re / p.scale);
        doc["truncation_tail"] = json!(kerr_tail_weight(&rho));
    }
    doc["rho"] = json!(rho);
    ctx.out.json("steady.json", &doc)
}

fn sweep(ctx: &mut RunContext) -> Result<()> {
    if ctx.config.sweep.is_none() {
        return Err(LabError::Config("task `sweep` needs a [sweep] table".into()));
    }
    let model_cfg = ctx.config.model()?.clone();
    let (name, grid) = ctx.config.grid()?;
    let s = ctx.config.spectrum.clone();
    let rows = ctx.points("sweep", &grid, |_, v| observable_row(&model_cfg.with_param(&name, v)?, v, &s))?;
    ctx.out.csv("sweep.csv", &rows)
}

fn squeeze_task(ctx: &mut RunContext) -> Result<()> {
    let model_cfg = ctx.config.model()?.clone();
    if model_cfg.spin_basis().is_none() {
        return Err(LabError::Config(format!("squeezing needs a single collective spin, got `{}`", model_cfg.kind())));
    }
    let (name, grid) = ctx.config.grid()?;
    let rows = ctx.points("squeeze", &grid, |_, v| {
        let m = model_cfg.with_param(&name, v)?;
        let basis = m.spin_basis().ok_or_else(|| LabError::Config("invalid spin".into()))?;
        let mat = vectorize(&m.build()?)?;
        let rho = steady_of(&m, &mat)?;
        let q = squeeze(&rho, basis).ok();
        Ok(SqueezeRow {
            param: v,
            xi2_ku: q.as_ref().map(|q| q.xi2_ku),
            xi2_w: q.as_ref().map(|q| q.xi2_w),
            min_variance: q.as_ref().map(|q| q.min_variance),
            n_x: q.as_ref().map(|q| q.mean_spin_direction[0]),
            n_y: q.as_ref().map(|q| q.mean_spin_direction[1]),
            n_z: q.as_ref().map(|q| q.mean_spin_direction[2]),
        })
    })?;
    ctx.out.csv("squeeze.csv", &rows)
}

fn meanfield(ctx: &mut RunContext) -> Result<()> {
    let model_cfg = ctx.config.model()?.clone();
    if let ModelConfig::Kerr(p) = &model_cfg {
        return ctx.out.json("kerr_meanfield.json", &json!({ "model": model_cfg, "meanfield": kerr_meanfield(p) }));
    }
    let sys = meanfield_system(&model_cfg)?;
    let (name, grid) = ctx.config.grid()?;
    let per_point = ctx.points("meanfield", &grid, |_, v| {
        let sys = meanfield_system(&model_cfg.with_param(&name, v)?)?;
        Ok(fp_rows(v, &find_fixed_points(&sys, 0)?))
    })?;
    let rows: Vec<FpRow> = per_point.into_iter().flatten().collect();
    ctx.out.csv("meanfield_fp.csv", &rows)?;

    let mf = &ctx.config.meanfield;
    let m0 = mf.initial.clone().unwrap_or_else(|| default_initial(&model_cfg));
    if m0.len() != 3 {
        return Err(LabError::Config("meanfield.initial needs three components".into()));
    }
    let traj = integrate_uniform(&sys, &m0, mf.t_end, mf.samples)?;
    let trows: Vec<TrajRow> = traj.t.iter().zip(&traj.states).map(|(&t, m)| TrajRow { t, x: m[0], y: m[1], z: m[2] }).collect();
    ctx.out.csv("trajectory.csv", &trows)?;

    let npt = check_npt_symmetry_seeded(&sys, mf.npt_samples, ctx.config.tolerances.npt, ctx.seed);
    let analytic_error = match &model_cfg {
        ModelConfig::Ddm(p) if p.kappa > 0.0 && p.kappa < p.g && m0 == [0.0, 0.0, 1.0] => Some(
            traj.t.iter().zip(&traj.states).map(|(&t, m)| (m[2] - ddm_analytic_z(p.g, p.kappa, t)).abs()).fold(0.0, f64::max),
        ),
        _ => None,
    };
    let doc = json!({
        "system": sys,
        "npt": npt,
        "fixed_points": find_fixed_points(&sys, 0)?,
        "initial": m0,
        "period": period_estimate(&traj).ok(),
        "max_norm_drift": traj.max_norm_drift,
        "analytic_max_error": analytic_error,
    });
    ctx.out.json("meanfield.json", &doc)
}

fn thirdq(ctx: &mut RunContext) -> Result<()> {
    let model_cfg = ctx.config.model()?.clone();
    let ModelConfig::TwoSpin(base) = &model_cfg else {
        return Err(LabError::Config(format!("thirdq needs a two_spin model, got `{}`", model_cfg.kind())));
    };
    let phase: TwoSpinPhase = ctx.config.thirdq.phase.parse()?;
    let sub = ctx.config.thirdq.subsystem_b.clone();
    if sub.iter().any(|&k| k >= 2) {
        return Err(LabError::Config("thirdq.subsystem_b indexes modes 0 and 1".into()));
    }
    let (name, grid) = ctx.config.grid()?;
    let rows = ctx.points("thirdq", &grid, |_, v| thirdq_row(&model_cfg.with_param(&name, v)?, v, phase, &sub))?;
    ctx.out.csv("thirdq.csv", &rows)?;
    let sm = build_structure_matrix(&hp_reduce_two_spin(base, phase))?;
    let closed: Vec<C64> = match phase {
        TwoSpinPhase::FmUp => beta_fm(base.gamma_gain, base.gamma_loss, base.g).to_vec(),
        TwoSpinPhase::FmDown => beta_fm(base.gamma_loss, base.gamma_gain, base.g).to_vec(),
        TwoSpinPhase::Am => beta_am(base.gamma_gain, base.gamma_loss, base.g).iter().map(|&b| C64::new(b, 0.0)).collect(),
    };
    let doc = json!({
        "model": model_cfg,
        "phase": phase,
        "structure_matrix": sm,
        "closed_form_beta": closed.iter().map(|z| json!({"re": z.re, "im": z.im})).collect::<Vec<_>>(),
    });
    ctx.out.json("thirdq.json", &doc)
}
