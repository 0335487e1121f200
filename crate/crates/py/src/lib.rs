//! Python module `gimvi_dyn`. Reports cross the boundary as plain dicts and
//! lists built from their JSON form.

use gimvi_core::analysis::{fit_exponential_rate_above, DISTANCE_FLOOR};
use gimvi_core::dynamics::{integrate_third_order, stable_substeps};
use gimvi_core::params::{
    check_continuous_rate, check_discrete_rate, continuous_pack, discrete_pack, max_feasible_eps, max_feasible_xi,
    synthesize as synth,
};
use gimvi_core::{Error, InstanceRecipe, RateClaim, Region, TimeGrid, TripleVec, VerifyOptions};
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use serde::Serialize;

create_exception!(gimvi_dyn, DivergenceError, PyArithmeticError);

fn err(e: Error) -> PyErr {
    match e {
        Error::StepDiverged { .. } | Error::Diverged { .. } => DivergenceError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A validated problem instance.
#[pyclass(name = "Instance", module = "gimvi_dyn", frozen)]
struct PyInstance {
    inner: gimvi_core::ProblemInstance,
}

#[pymethods]
impl PyInstance {
    /// `F = g = id` on `[−1, 1]`, `h ≡ 0`, `γ = 1`.
    #[staticmethod]
    fn canonical() -> Self {
        Self {
            inner: gimvi_core::ProblemInstance::canonical(),
        }
    }

    /// The seeded ten-dimensional affine instance.
    #[staticmethod]
    fn canonical_affine() -> Self {
        Self {
            inner: gimvi_core::canonical_affine_instance(),
        }
    }

    /// Random affine instance from the default symmetric-positive recipe.
    #[staticmethod]
    fn random_affine(dim: usize, seed: u64) -> PyResult<Self> {
        let inner = gimvi_core::make_affine_instance(dim, seed, &InstanceRecipe::spd_affine()).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = gimvi_core::ProblemInstance::from_json(text)
            .map_err(err)?
            .validated()
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    #[getter]
    fn c(&self) -> f64 {
        self.inner.c()
    }

    #[getter]
    fn c1(&self) -> PyResult<f64> {
        self.inner.c1().map_err(err)
    }

    #[getter]
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.constants())
    }

    fn checks<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.checks())
    }

    /// `Ψ(w)`.
    fn residual(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        gimvi_core::residual(&self.inner, &w).map_err(err)
    }

    /// Prox point of the instance's `Ω`, `h` and `γ` at `w`.
    fn prox(&self, w: Vec<f64>) -> PyResult<Vec<f64>> {
        let inst = &self.inner;
        gimvi_core::prox(inst.omega(), inst.h(), inst.gamma(), &w).map_err(err)
    }

    #[pyo3(signature = (tol = 1e-12, seed = None))]
    fn reference_solution(&self, tol: f64, seed: Option<u64>) -> PyResult<Vec<f64>> {
        match seed {
            Some(seed) => gimvi_core::analysis::reference_solution_seeded(&self.inner, seed, tol),
            None => gimvi_core::reference_solution(&self.inner, tol),
        }
        .map_err(err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(dim={}, gamma={}, c={})",
            self.inner.dim(),
            self.inner.gamma(),
            self.inner.c()
        )
    }
}

/// Coefficients `(a₀, a₁, a₂)` of `w''' + a₂w'' + a₁w' + a₀Ψ(w) = 0`.
#[pyclass(name = "Params", module = "gimvi_dyn", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyParams {
    inner: gimvi_core::DynParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(a0: f64, a1: f64, a2: f64) -> PyResult<Self> {
        let inner = gimvi_core::DynParams::new(a0, a1, a2).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.inner.a0
    }

    #[getter]
    fn a1(&self) -> f64 {
        self.inner.a1
    }

    #[getter]
    fn a2(&self) -> f64 {
        self.inner.a2
    }

    fn __repr__(&self) -> String {
        let p = self.inner;
        format!("Params(a0={}, a1={}, a2={})", p.a0, p.a1, p.a2)
    }
}

fn region(name: &str) -> PyResult<Region> {
    serde_json::from_value(serde_json::Value::String(name.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown region {name:?}")))
}

/// Samples parameters from a guaranteed region; returns
/// `(Params, report)` where the report holds the rate and region bounds.
#[pyfunction]
#[pyo3(signature = (instance, region_name, seed = 0))]
fn synthesize<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    region_name: &str,
    seed: u64,
) -> PyResult<(PyParams, Bound<'py, PyAny>)> {
    let inst = &instance.inner;
    let s = synth(region(region_name)?, inst.c(), inst.c1().map_err(err)?, seed).map_err(err)?;
    Ok((PyParams { inner: s.params }, to_py(py, &s)?))
}

/// Checks the continuous conditions at `eps` or the discrete ones at `xi`.
#[pyfunction]
#[pyo3(signature = (instance, params, eps = None, xi = None))]
fn check_rate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    params: &PyParams,
    eps: Option<f64>,
    xi: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = &instance.inner;
    let (c, c1, p) = (inst.c(), inst.c1().map_err(err)?, &params.inner);
    let report = match (eps, xi) {
        (Some(eps), None) => check_continuous_rate(&continuous_pack(c1, p), c, c1, p, eps),
        (None, Some(xi)) => check_discrete_rate(&discrete_pack(c1, p), c, c1, p, xi),
        _ => return Err(PyValueError::new_err("give exactly one of eps and xi")),
    }
    .map_err(err)?;
    to_py(py, &report)
}

/// Largest certified continuous and discrete rates, 0 when none.
#[pyfunction]
fn max_rates(instance: &PyInstance, params: &PyParams) -> PyResult<(f64, f64)> {
    let inst = &instance.inner;
    let (c, c1, p) = (inst.c(), inst.c1().map_err(err)?, &params.inner);
    Ok((
        max_feasible_eps(&continuous_pack(c1, p), c, c1, p),
        max_feasible_xi(&discrete_pack(c1, p), c, c1, p),
    ))
}

/// Integrates the third-order system from `w0` at rest. Returns times,
/// residual norms, distances to the reference solution and the fitted
/// tail rate (`None` when the run decays below resolution too fast).
#[pyfunction]
#[pyo3(signature = (instance, params, w0, horizon = 40.0, dt = 0.01))]
fn integrate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    params: &PyParams,
    w0: Vec<f64>,
    horizon: f64,
    dt: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = &instance.inner;
    let w_star = gimvi_core::reference_solution(inst, 1e-12).map_err(err)?;
    let grid = TimeGrid::new(0.0, horizon, dt)
        .map_err(err)?
        .with_substeps(stable_substeps(&params.inner, inst.residual_lipschitz(), dt));
    let zeros = vec![0.0; w0.len()];
    let init = TripleVec::new(w0, zeros.clone(), zeros).map_err(err)?;
    let traj = integrate_third_order(inst, &params.inner, &init, &grid, Some(&w_star)).map_err(err)?;
    let floor = DISTANCE_FLOOR.max(1e-10 / inst.c());
    let fit = fit_exponential_rate_above(&traj, 0.25, floor).ok();
    #[derive(Serialize)]
    struct Run<'a> {
        times: &'a [f64],
        residual_norms: &'a [f64],
        distances: Option<Vec<f64>>,
        fit: Option<gimvi_core::RateFit>,
    }
    to_py(
        py,
        &Run {
            times: &traj.times,
            residual_norms: &traj.residual_norms,
            distances: traj.distances(),
            fit,
        },
    )
}

/// Runs the discrete scheme from the cold start `(w0, w0, w0)`.
#[pyfunction]
#[pyo3(signature = (instance, params, w0, max_iter = 1_000_000, tol = 1e-10))]
fn run_scheme<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    params: &PyParams,
    w0: Vec<f64>,
    max_iter: usize,
    tol: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = &instance.inner;
    let w_star = gimvi_core::reference_solution(inst, 1e-12).map_err(err)?;
    let hist =
        gimvi_core::run_scheme(inst, &params.inner, (&w0, &w0, &w0), max_iter, tol, Some(&w_star)).map_err(err)?;
    to_py(py, &hist)
}

/// Seeded multi-run check of a claimed rate; returns the verdict record.
#[pyfunction]
#[pyo3(signature = (instance, params, eps = None, xi = None, runs = 10, seed = 0))]
fn verify<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    params: &PyParams,
    eps: Option<f64>,
    xi: Option<f64>,
    runs: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let claim = match (eps, xi) {
        (Some(eps), None) => RateClaim::Continuous { eps },
        (None, Some(xi)) => RateClaim::Discrete { xi },
        _ => return Err(PyValueError::new_err("give exactly one of eps and xi")),
    };
    let opts = VerifyOptions {
        runs,
        seed,
        ..VerifyOptions::default()
    };
    let v = gimvi_core::verify_theorem(&instance.inner, claim, &params.inner, &opts).map_err(err)?;
    to_py(py, &v)
}

/// Residual Lipschitz, constants and prox audits; returns the list of checks.
#[pyfunction]
#[pyo3(signature = (instance, trials = 1000, seed = 0))]
fn audit<'py>(py: Python<'py>, instance: &PyInstance, trials: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let inst = &instance.inner;
    let mut report =
        gimvi_core::prox::check_prox_inequalities(inst.dim(), inst.omega(), inst.h(), inst.gamma(), trials, seed)
            .map_err(err)?;
    report.push(gimvi_core::dynamics::check_residual_lipschitz(inst, trials, seed).map_err(err)?);
    report.extend(gimvi_core::check_constants(inst, trials, seed).map_err(err)?);
    to_py(py, &report.checks)
}

#[pymodule]
fn gimvi_dyn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_class::<PyParams>()?;
    m.add("DivergenceError", m.py().get_type::<DivergenceError>())?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(check_rate, m)?)?;
    m.add_function(wrap_pyfunction!(max_rates, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(run_scheme, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(audit, m)?)?;
    Ok(())
}
