//! Python bindings: phi-functions, stability maps, the ZDS/KdV problems and
//! the experiment commands.

use std::path::PathBuf;

use ::expstab::experiment::{self, Command, ExperimentConfig, ReferenceCache};
use ::expstab::spectral::{self, HyperviscositySpec, RepartitionKind};
use ::expstab::stability::{self, DahlquistPoint, RepartitionAngle};
use ::expstab::{
    integrate, Error, MethodFamily, MethodSpec, RepartitionSpec, RunStatus, SemilinearProblem,
    SemilinearSpectralProblem,
};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn method(name: &str) -> PyResult<MethodSpec> {
    name.parse::<MethodFamily>()
        .map(MethodSpec::new)
        .map_err(py_err)
}

/// phi_k(z).
#[pyfunction]
fn phi(k: usize, z: Complex64) -> PyResult<Complex64> {
    ::expstab::phi_scalar(k, z).map_err(py_err)
}

/// [phi_0(z), ..., phi_kmax(z)].
#[pyfunction]
fn phi_all(kmax: usize, z: Complex64) -> PyResult<Vec<Complex64>> {
    ::expstab::phi::phi_all(kmax, z).map_err(py_err)
}

/// (|R|, class) at h*lambda = i*k1 + i*k2, with the linear part rotated by rho.
#[pyfunction]
#[pyo3(signature = (method_name, k1, k2, rho=0.0))]
fn amplification(method_name: &str, k1: f64, k2: f64, rho: f64) -> PyResult<(f64, String)> {
    let m = method(method_name)?;
    let p = DahlquistPoint::new(k1, k2).map_err(py_err)?;
    let rep = RepartitionAngle::new(rho).map_err(py_err)?;
    let (r, class) = stability::amplification(&m, p, rep).map_err(py_err)?;
    Ok((r, class.name().to_string()))
}

/// Stability map as a dict with k1, k2, abs_r (rows over k1) and class.
#[pyfunction]
#[pyo3(signature = (method_name, k1_range, k2_range, resolution, rho=0.0))]
fn stability_grid<'py>(
    py: Python<'py>,
    method_name: &str,
    k1_range: (f64, f64),
    k2_range: (f64, f64),
    resolution: (usize, usize),
    rho: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let m = method(method_name)?;
    let rep = RepartitionAngle::new(rho).map_err(py_err)?;
    let grid = py
        .detach(|| stability::region_grid(&m, k1_range, k2_range, resolution, rep))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("unstable_fraction", grid.unstable_fraction())?;
    let class: Vec<Vec<&str>> = grid
        .class
        .iter()
        .map(|row| row.iter().map(|c| c.name()).collect())
        .collect();
    out.set_item("k1", grid.k1)?;
    out.set_item("k2", grid.k2)?;
    out.set_item("abs_r", grid.abs_r)?;
    out.set_item("class", class)?;
    Ok(out)
}

/// `|y_ref - y|_inf / |y_ref|_inf`.
#[pyfunction]
fn relative_error(y: Vec<Complex64>, y_ref: Vec<Complex64>) -> PyResult<f64> {
    experiment::relative_error(&y, &y_ref).map_err(py_err)
}

/// A Fourier pseudo-spectral problem in coefficient space, with its
/// default initial spectrum.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: SemilinearSpectralProblem,
    initial: Vec<Complex64>,
}

#[pymethods]
impl PyProblem {
    #[staticmethod]
    #[pyo3(signature = (nx=128))]
    fn zds(nx: usize) -> PyResult<Self> {
        let (inner, initial) = spectral::build_zds(nx).map_err(py_err)?;
        Ok(Self { inner, initial })
    }

    #[staticmethod]
    #[pyo3(signature = (nx=512, delta=0.022))]
    fn kdv(nx: usize, delta: f64) -> PyResult<Self> {
        let (inner, initial) = spectral::build_kdv(nx, delta).map_err(py_err)?;
        Ok(Self { inner, initial })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn modification(&self) -> String {
        self.inner.modification().label()
    }

    #[getter]
    fn initial(&self) -> Vec<Complex64> {
        self.initial.clone()
    }

    #[getter]
    fn linear(&self) -> Vec<Complex64> {
        self.inner.linear().to_vec()
    }

    #[getter]
    fn wavenumbers(&self) -> Vec<f64> {
        self.inner.grid().wavenumbers().to_vec()
    }

    /// Physical grid points.
    #[getter]
    fn points(&self) -> Vec<f64> {
        self.inner.grid().points()
    }

    /// kind is abs_k3, k2 or identity; param is rho, rho or epsilon.
    fn repartition(&self, kind: &str, param: f64) -> PyResult<Self> {
        let kind: RepartitionKind = kind.parse().map_err(py_err)?;
        let spec = RepartitionSpec::new(kind, param).map_err(py_err)?;
        Ok(Self {
            inner: self.inner.apply_repartition(spec).map_err(py_err)?,
            initial: self.initial.clone(),
        })
    }

    fn hyperviscosity(&self, order: u32, gamma: f64, dt: f64) -> PyResult<Self> {
        let spec = HyperviscositySpec::new(order, gamma).map_err(py_err)?;
        Ok(Self {
            inner: self.inner.apply_hyperviscosity(spec, dt).map_err(py_err)?,
            initial: self.initial.clone(),
        })
    }

    /// L u + N(u).
    fn rhs(&self, u: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        if u.len() != self.inner.dim() {
            return Err(PyValueError::new_err("length does not match the grid"));
        }
        Ok(self.inner.rhs(&u))
    }

    fn to_physical(&self, u: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
        if u.len() != self.inner.dim() {
            return Err(PyValueError::new_err("length does not match the grid"));
        }
        Ok(self.inner.grid().inverse(&u))
    }

    /// Constant-step run from t = 0. Returns a dict with t, y, steps_taken,
    /// status ("ok" or "blowup"), blowup_step and samples [(t, y), ...].
    #[pyo3(signature = (method_name, t_end, n_steps, y0=None, sample_times=vec![]))]
    fn integrate<'py>(
        &self,
        py: Python<'py>,
        method_name: &str,
        t_end: f64,
        n_steps: usize,
        y0: Option<Vec<Complex64>>,
        sample_times: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let m = method(method_name)?;
        let y0 = y0.unwrap_or_else(|| self.initial.clone());
        let outcome = py
            .detach(|| integrate(&self.inner, &m, &y0, (0.0, t_end), n_steps, &sample_times))
            .map_err(py_err)?;
        let out = PyDict::new(py);
        out.set_item("t", outcome.t)?;
        out.set_item("y", outcome.y)?;
        out.set_item("steps_taken", outcome.steps_taken)?;
        match outcome.status {
            RunStatus::Ok => {
                out.set_item("status", "ok")?;
                out.set_item("blowup_step", py.None())?;
            }
            RunStatus::Blowup { step, .. } => {
                out.set_item("status", "blowup")?;
                out.set_item("blowup_step", step)?;
            }
        }
        let samples: Vec<(f64, Vec<Complex64>)> =
            outcome.samples.into_iter().map(|s| (s.t, s.y)).collect();
        out.set_item("samples", samples)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({}, nx={}, {})",
            self.inner.name(),
            self.inner.dim(),
            self.inner.modification().label()
        )
    }
}

fn load_config(
    command: &str,
    settings: Option<Vec<(String, String)>>,
) -> PyResult<ExperimentConfig> {
    let command: Command = command.parse().map_err(py_err)?;
    ExperimentConfig::from_pairs(command, &settings.unwrap_or_default()).map_err(py_err)
}

fn cache(dir: Option<PathBuf>) -> ReferenceCache {
    dir.map(ReferenceCache::new)
        .unwrap_or_else(ReferenceCache::from_env)
}

/// Run one CLI command with config key/value pairs; returns the path of the
/// main output file (or the reference entry directory).
#[pyfunction]
#[pyo3(signature = (command, settings=None, cache_dir=None))]
fn run(
    py: Python<'_>,
    command: &str,
    settings: Option<Vec<(String, String)>>,
    cache_dir: Option<PathBuf>,
) -> PyResult<PathBuf> {
    let cfg = load_config(command, settings)?;
    let cache = cache(cache_dir);
    py.detach(|| -> ::expstab::Result<PathBuf> {
        Ok(match cfg.command {
            Command::Stability => experiment::cmd_stability(&cfg)?.summary_path,
            Command::Converge => experiment::cmd_converge(&cfg, &cache)?.csv_path,
            Command::Longtime => experiment::cmd_longtime(&cfg, &cache)?.csv_path,
            Command::Solve => {
                let report = experiment::cmd_solve(&cfg)?;
                report.files.last().cloned().unwrap_or_default()
            }
            Command::Reference => experiment::build_reference(&cfg, &cache)?.path,
        })
    })
    .map_err(py_err)
}

#[pymodule]
fn expstab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(phi, m)?)?;
    m.add_function(wrap_pyfunction!(phi_all, m)?)?;
    m.add_function(wrap_pyfunction!(amplification, m)?)?;
    m.add_function(wrap_pyfunction!(stability_grid, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<PyProblem>()?;
    m.add("METHODS", MethodFamily::ALL.map(MethodFamily::name))?;
    Ok(())
}
