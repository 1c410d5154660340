//! Python bindings for a small slice of `lptlab`: the DDM spectrum, its exact
//! steady state observables and the mean-field fixed points.

use lptlab::lindblad_engine::vectorize;
use lptlab::meanfield_dynamics::{ddm_meanfield, find_fixed_points};
use lptlab::model_zoo::{build_ddm, exact_ddm_tiss, DdmParams};
use lptlab::observables::{magnetization, purity, squeeze};
use lptlab::spectral_analysis::full_spectrum;
use lptlab::{LabError, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: LabError) -> PyErr {
    if e.is_config() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn ddm(spin: f64, g: f64, kappa: f64) -> DdmParams {
    DdmParams { spin, g, kappa }
}

/// Full Lindbladian spectrum of the DDM, sorted by descending real part.
#[pyfunction]
fn ddm_spectrum(spin: f64, g: f64, kappa: f64) -> PyResult<Vec<(f64, f64)>> {
    let model = build_ddm(&ddm(spin, g, kappa)).map_err(to_py)?;
    let mat = vectorize(&model).map_err(to_py)?;
    let spec = full_spectrum(&mat).map_err(to_py)?;
    Ok(spec.eigenvalues.iter().map(|z: &C64| (z.re, z.im)).collect())
}

/// Gap of the DDM Lindbladian.
#[pyfunction]
fn ddm_gap(spin: f64, g: f64, kappa: f64) -> PyResult<f64> {
    let model = build_ddm(&ddm(spin, g, kappa)).map_err(to_py)?;
    let mat = vectorize(&model).map_err(to_py)?;
    Ok(full_spectrum(&mat).map_err(to_py)?.gap)
}

/// Observables of the exact DDM steady state: magnetization, purity and
/// both squeezing parameters.
#[pyfunction]
fn ddm_steady_observables<'py>(py: Python<'py>, spin: f64, g: f64, kappa: f64) -> PyResult<Bound<'py, PyDict>> {
    let p = ddm(spin, g, kappa);
    let basis = p.basis().map_err(to_py)?;
    let rho = exact_ddm_tiss(&p).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("magnetization", magnetization(&rho, basis).map_err(to_py)?.to_vec())?;
    out.set_item("purity", purity(&rho))?;
    let sq = squeeze(&rho, basis).map_err(to_py)?;
    out.set_item("xi2_ku", sq.xi2_ku)?;
    out.set_item("xi2_w", sq.xi2_w)?;
    Ok(out)
}

/// Mean-field fixed points of the DDM as `(location, pt_symmetric, class)`.
#[pyfunction]
fn ddm_fixed_points(g: f64, kappa: f64) -> PyResult<Vec<(Vec<f64>, bool, String)>> {
    let fps = find_fixed_points(&ddm_meanfield(g, kappa), 0).map_err(to_py)?;
    Ok(fps.into_iter().map(|f| (f.location, f.pt_symmetric, format!("{:?}", f.classification))).collect())
}

#[pymodule]
fn lptlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ddm_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(ddm_gap, m)?)?;
    m.add_function(wrap_pyfunction!(ddm_steady_observables, m)?)?;
    m.add_function(wrap_pyfunction!(ddm_fixed_points, m)?)?;
    Ok(())
}
