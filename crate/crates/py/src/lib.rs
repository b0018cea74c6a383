//! Python bindings: Hamiltonians, product-state MPS, the cosine energy
//! filter, and the exact-diagonalization cross checks.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use varmps::error::Error;
use varmps::evolution::{time_evolution_mpo, EvolutionRequest};
use varmps::filter::{apply_filter_mps, FilterParams};
use varmps::hamiltonian::HamiltonianSpec;
use varmps::mps::MpsState;
use varmps::oracle;
use varmps::tensor::TruncationPolicy;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidArgument(_) | Error::Config { .. } | Error::DimensionMismatch(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.unbind().into()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.unbind().into()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.unbind().into()
        }
    })
}

fn policy_from(max_bond: usize, threshold: f64) -> PyResult<TruncationPolicy> {
    let cap = if max_bond == 0 { None } else { Some(max_bond) };
    TruncationPolicy::new(cap, threshold).map_err(to_py_err)
}

/// A normalized 1D local Hamiltonian (every local term has operator norm
/// at most 1).
#[pyclass(name = "Hamiltonian")]
struct PyHamiltonian {
    spec: HamiltonianSpec,
}

#[pymethods]
impl PyHamiltonian {
    /// Ising chain with transverse field g and longitudinal field h.
    #[staticmethod]
    fn ising(n: usize, j: f64, g: f64, h: f64) -> PyResult<Self> {
        Ok(Self {
            spec: HamiltonianSpec::ising(n, j, g, h).map_err(to_py_err)?,
        })
    }

    /// Heisenberg XXZ chain.
    #[staticmethod]
    fn xxz(n: usize, jx: f64, jz: f64, h: f64) -> PyResult<Self> {
        Ok(Self {
            spec: HamiltonianSpec::xxz(n, jx, jz, h).map_err(to_py_err)?,
        })
    }

    /// Non-interacting field sum of sigma_z.
    #[staticmethod]
    fn free_field(n: usize) -> PyResult<Self> {
        Ok(Self {
            spec: HamiltonianSpec::free_field(n).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }

    #[getter]
    fn normalization(&self) -> f64 {
        self.spec.normalization()
    }

    fn __repr__(&self) -> String {
        format!(
            "Hamiltonian({}, n={}, normalization={:.6})",
            self.spec.model().name(),
            self.spec.n_sites(),
            self.spec.normalization()
        )
    }
}

/// An open-boundary matrix product state with logarithmic norm tracking.
#[pyclass(name = "Mps")]
struct PyMps {
    state: MpsState,
}

#[pymethods]
impl PyMps {
    /// |+>^n.
    #[staticmethod]
    fn all_plus(n: usize) -> PyResult<Self> {
        Ok(Self {
            state: MpsState::all_plus(n).map_err(to_py_err)?,
        })
    }

    /// |0>^n.
    #[staticmethod]
    fn all_zero(n: usize) -> PyResult<Self> {
        Ok(Self {
            state: MpsState::all_zero(n).map_err(to_py_err)?,
        })
    }

    /// Product state from one (complex amplitude) local vector per site.
    #[staticmethod]
    fn product(local_vectors: Vec<Vec<Complex64>>) -> PyResult<Self> {
        Ok(Self {
            state: MpsState::product_state(&local_vectors).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.state.n_sites()
    }

    #[getter]
    fn bond_dims(&self) -> Vec<usize> {
        self.state.bond_dims()
    }

    #[getter]
    fn max_bond(&self) -> usize {
        self.state.max_bond()
    }

    #[getter]
    fn log_norm(&self) -> f64 {
        self.state.log_norm()
    }

    #[getter]
    fn discarded_weight(&self) -> f64 {
        self.state.cumulative_discarded_weight()
    }

    /// <psi| H |psi> of the normalized state.
    fn energy(&self, h: &PyHamiltonian) -> PyResult<f64> {
        let mpo = h.spec.build_mpo().map_err(to_py_err)?;
        Ok(self.state.expectation(&mpo).map_err(to_py_err)?.re)
    }

    /// <psi| H^2 |psi> - <psi| H |psi>^2, contracted exactly.
    fn energy_variance(&self, h: &PyHamiltonian) -> PyResult<f64> {
        let mpo = h.spec.build_mpo().map_err(to_py_err)?;
        let e = self.state.expectation(&mpo).map_err(to_py_err)?.re;
        let e2 = self.state.expectation_squared(&mpo).map_err(to_py_err)?.re;
        Ok(e2 - e * e)
    }

    /// Renyi entanglement entropy across the bond after `cut`
    /// (alpha = 1 gives von Neumann).
    fn renyi_entropy(&self, cut: usize, alpha: f64) -> PyResult<f64> {
        self.state.renyi_entropy(cut, alpha).map_err(to_py_err)
    }

    /// Overlap <self|other| of the normalized states.
    fn overlap(&self, other: &PyMps) -> PyResult<Complex64> {
        self.state.inner(&other.state).map_err(to_py_err)
    }

    /// Dense amplitude vector (small systems only).
    fn to_vector(&self) -> PyResult<Vec<Complex64>> {
        self.state.to_dense_vector().map_err(to_py_err)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.state
            .save(std::path::Path::new(path))
            .map_err(to_py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            state: MpsState::load(std::path::Path::new(path)).map_err(to_py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Mps(n={}, max_bond={}, log_norm={:.6})",
            self.state.n_sites(),
            self.state.max_bond(),
            self.state.log_norm()
        )
    }
}

/// Applies the truncated cosine filter to a state. Returns the filtered
/// state and the run report as a dict.
#[pyfunction]
#[pyo3(signature = (state, h, m, y=None, e_center=None, epsilon_total=1e-9, max_bond=0, threshold=1e-12))]
#[allow(clippy::too_many_arguments)]
fn apply_filter(
    py: Python<'_>,
    state: &PyMps,
    h: &PyHamiltonian,
    m: usize,
    y: Option<f64>,
    e_center: Option<f64>,
    epsilon_total: f64,
    max_bond: usize,
    threshold: f64,
) -> PyResult<(PyMps, Py<PyAny>)> {
    let policy = policy_from(max_bond, threshold)?;
    let e_center = match e_center {
        Some(e) => e,
        None => {
            let mpo = h.spec.build_mpo().map_err(to_py_err)?;
            state.state.expectation(&mpo).map_err(to_py_err)?.re
        }
    };
    let y = y.unwrap_or_else(|| FilterParams::auto_y(m));
    let params = FilterParams::new(m, y, e_center, epsilon_total).map_err(to_py_err)?;
    let (filtered, report) =
        apply_filter_mps(&state.state, &params, &h.spec, &policy).map_err(to_py_err)?;
    let report_json = serde_json::to_value(&report)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((PyMps { state: filtered }, json_to_py(py, &report_json)?))
}

/// Exact filtered moments from dense diagonalization:
/// returns (mu, delta2, norm2).
#[pyfunction]
#[pyo3(signature = (state, h, m, y=None, e_center=None))]
fn exact_filtered_moments(
    state: &PyMps,
    h: &PyHamiltonian,
    m: usize,
    y: Option<f64>,
    e_center: Option<f64>,
) -> PyResult<(f64, f64, f64)> {
    let data = oracle::diagonalize(&h.spec, &state.state).map_err(to_py_err)?;
    let e_center = e_center.unwrap_or(data.mean);
    let y = y.unwrap_or_else(|| FilterParams::auto_y(m));
    let params = FilterParams::new(m, y, e_center, 1e-9).map_err(to_py_err)?;
    oracle::exact_filtered_moments(&data, &params).map_err(to_py_err)
}

/// Berry-Esseen error of the state's energy distribution:
/// returns (zeta, argmax_x).
#[pyfunction]
fn berry_esseen(state: &PyMps, h: &PyHamiltonian) -> PyResult<(f64, f64)> {
    let data = oracle::diagonalize(&h.spec, &state.state).map_err(to_py_err)?;
    oracle::berry_esseen_error(&data).map_err(to_py_err)
}

/// Filter parameters for a variance target: returns (m, y).
#[pyfunction]
#[pyo3(signature = (n, target_delta, zeta_hint=None))]
fn suggest_params(n: usize, target_delta: f64, zeta_hint: Option<f64>) -> PyResult<(usize, f64)> {
    let p = varmps::filter::suggest_params(n, target_delta, zeta_hint).map_err(to_py_err)?;
    Ok((p.m, p.y))
}

/// The truncated cosine g_y(x) for x in [-1, 1].
#[pyfunction]
fn scalar_g(x: f64, m: usize, y: f64) -> PyResult<Complex64> {
    varmps::filter::scalar_g(x, m, y).map_err(to_py_err)
}

/// Chernoff-truncated binomial weights as a list of (m, weight) pairs.
#[pyfunction]
fn binomial_weights(m: usize, y: f64) -> PyResult<Vec<(i64, f64)>> {
    varmps::filter::binomial_weights(m, y).map_err(to_py_err)
}

/// Builds the certified evolution MPO for exp(-i t H) and reports
/// (achieved_error_bound, max_bond).
#[pyfunction]
#[pyo3(signature = (h, t, epsilon, max_bond=0, threshold=1e-13))]
fn evolution_bound(
    h: &PyHamiltonian,
    t: f64,
    epsilon: f64,
    max_bond: usize,
    threshold: f64,
) -> PyResult<(f64, usize)> {
    let policy = policy_from(max_bond, threshold)?;
    let req = EvolutionRequest::new(t, epsilon, h.spec.clone(), policy).map_err(to_py_err)?;
    let (_, bound, profile) = time_evolution_mpo(&req).map_err(to_py_err)?;
    Ok((bound, profile.into_iter().max().unwrap_or(1)))
}

#[pymodule]
fn varmps_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyMps>()?;
    m.add_function(wrap_pyfunction!(apply_filter, m)?)?;
    m.add_function(wrap_pyfunction!(exact_filtered_moments, m)?)?;
    m.add_function(wrap_pyfunction!(berry_esseen, m)?)?;
    m.add_function(wrap_pyfunction!(suggest_params, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_g, m)?)?;
    m.add_function(wrap_pyfunction!(binomial_weights, m)?)?;
    m.add_function(wrap_pyfunction!(evolution_bound, m)?)?;
    Ok(())
}
