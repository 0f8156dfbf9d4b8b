//! Python bindings: scenarios, two-qubit states, trajectory ensembles, the
//! master equation, closed-form rates, rate fits and the thermal optimizer.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use trajent::analytics::{optimize_unraveling, rate_report};
use trajent::config::{load_scenario, parse_scenario, Method, RunSettings, ScenarioConfig};
use trajent::entanglement::{concurrence_pure, eof_from_concurrence};
use trajent::ensemble::{self, EnsembleSpec, Unraveling};
use trajent::lindblad::{self, DensityMatrix};
use trajent::linalg::Mat4;
use trajent::model::{self, Scenario, ThermalRates};
use trajent::qj::default_dt;
use trajent::sim::SimParams;
use trajent::stats::{fit_rate, fit_reference, EnsembleSummary, RateFit};
use trajent::{qsd, Error, QubitPairState};

create_exception!(trajent, NumericalError, PyRuntimeError, "A simulation or fit failed numerically.");

const MASTER_RATE_STEP: f64 = 0.01;

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn amps4(v: Vec<Complex64>) -> PyResult<[Complex64; 4]> {
    v.try_into().map_err(|v: Vec<_>| PyValueError::new_err(format!("expected 4 amplitudes, got {}", v.len())))
}

fn mat4(rows: Vec<Vec<Complex64>>) -> PyResult<Mat4> {
    if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
        return Err(PyValueError::new_err("expected a 4x4 matrix"));
    }
    let mut m = Mat4::zeros();
    for (i, r) in rows.iter().enumerate() {
        for (j, x) in r.iter().enumerate() {
            m[(i, j)] = *x;
        }
    }
    Ok(m)
}

fn rows4(m: &Mat4) -> Vec<Vec<Complex64>> {
    (0..4).map(|i| (0..4).map(|j| m[(i, j)]).collect()).collect()
}

/// Normalized pure state of two qubits in the basis ↑↑, ↑↓, ↓↑, ↓↓.
#[pyclass(name = "QubitPairState", module = "trajent", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState(QubitPairState);

#[pymethods]
impl PyState {
    #[new]
    #[pyo3(signature = (amplitudes, normalize = false))]
    fn new(amplitudes: Vec<Complex64>, normalize: bool) -> PyResult<Self> {
        let a = amps4(amplitudes)?;
        let s = if normalize { QubitPairState::normalized(a) } else { QubitPairState::new(a) };
        s.map(PyState).map_err(to_py)
    }

    #[staticmethod]
    fn basis(index: usize) -> PyResult<Self> {
        if index > 3 {
            return Err(PyValueError::new_err("basis index must be 0..=3"));
        }
        Ok(PyState(QubitPairState::basis(index)))
    }

    /// `(↑↑ + e^{iφ}↓↓)/√2`
    #[staticmethod]
    fn bell_phi(phase: f64) -> Self {
        PyState(QubitPairState::bell_phi(phase))
    }

    #[getter]
    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn concurrence(&self) -> PyResult<f64> {
        concurrence_pure(&self.0).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("QubitPairState({})", self.0)
    }
}

#[pyclass(name = "Scenario", module = "trajent", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: Scenario,
    run: RunSettings,
}

impl From<Scenario> for PyScenario {
    fn from(inner: Scenario) -> Self {
        PyScenario { inner, run: RunSettings::default() }
    }
}

impl From<ScenarioConfig> for PyScenario {
    fn from(c: ScenarioConfig) -> Self {
        PyScenario { inner: c.scenario, run: c.run }
    }
}

#[pymethods]
impl PyScenario {
    /// Reads a TOML scenario file, including its `[run]` table.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        load_scenario(path).map(Into::into).map_err(to_py)
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        parse_scenario(text).map(Into::into).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (gamma_a, gamma_b = None))]
    fn photon_counting(gamma_a: f64, gamma_b: Option<f64>) -> PyResult<Self> {
        model::preset_photon_counting(gamma_a, gamma_b.unwrap_or(gamma_a)).map(Into::into).map_err(to_py)
    }

    #[staticmethod]
    fn thermal(gamma_plus: [f64; 2], gamma_minus: [f64; 2]) -> PyResult<Self> {
        model::preset_thermal(gamma_plus[0], gamma_minus[0], gamma_plus[1], gamma_minus[1])
            .map(Into::into)
            .map_err(to_py)
    }

    /// Thermal baths read out after mixing `σ₊, σ₋` with the optimal unitary.
    #[staticmethod]
    fn thermal_optimal(gamma_plus: [f64; 2], gamma_minus: [f64; 2]) -> PyResult<Self> {
        let rates = ThermalRates::new(gamma_plus[0], gamma_minus[0], gamma_plus[1], gamma_minus[1]).map_err(to_py)?;
        let m = model::Mixing::optimal();
        model::preset_rotated_thermal(rates, [&m, &m]).map(Into::into).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (v_a, v_b, gamma_a, gamma_b = None))]
    fn dephasing(v_a: [f64; 3], v_b: [f64; 3], gamma_a: f64, gamma_b: Option<f64>) -> PyResult<Self> {
        model::preset_dephasing(v_a, v_b, gamma_a, gamma_b.unwrap_or(gamma_a)).map(Into::into).map_err(to_py)
    }

    #[staticmethod]
    fn common_bath(gamma: f64) -> PyResult<Self> {
        model::preset_common_bath(gamma).map(Into::into).map_err(to_py)
    }

    fn with_initial(&self, state: PyRef<'_, PyState>) -> Self {
        PyScenario { inner: self.inner.clone().with_initial(state.0), run: self.run }
    }

    #[getter]
    fn initial(&self) -> PyState {
        PyState(*self.inner.initial())
    }

    #[getter]
    fn preset(&self) -> &'static str {
        self.inner.preset().name()
    }

    #[getter]
    fn channels(&self) -> Vec<(String, f64)> {
        self.inner.channels().iter().map(|c| (c.id.clone(), c.rate)).collect()
    }

    /// Closed-form disentanglement rates as a dict.
    fn rates<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = rate_report(&self.inner).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("kappa_qj", r.kappa_qj)?;
        d.set_item("kappa_qj_opt_thermal", r.kappa_qj_opt_thermal)?;
        d.set_item("kappa_ho", r.kappa_ho)?;
        d.set_item("kappa_ho_opt", r.kappa_ho_opt)?;
        d.set_item("kappa_het", r.kappa_het)?;
        let channels = r
            .channels
            .iter()
            .map(|c| {
                let e = PyDict::new(py);
                e.set_item("id", &c.id)?;
                e.set_item("qj", c.qj)?;
                e.set_item("ho", c.ho)?;
                e.set_item("ho_opt", c.ho_opt)?;
                e.set_item("het", c.het)?;
                Ok(e)
            })
            .collect::<PyResult<Vec<_>>>()?;
        d.set_item("channels", channels)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Scenario(preset={}, channels={})", self.inner.preset().name(), self.inner.channels().len())
    }
}

struct Grid {
    params: SimParams,
    n_traj: usize,
    seed: u64,
}

#[allow(clippy::too_many_arguments)]
fn grid(
    s: &PyScenario,
    method: Method,
    t_max: Option<f64>,
    dt: Option<f64>,
    record_grid: Option<f64>,
    n_traj: Option<usize>,
    seed: Option<u64>,
) -> PyResult<Grid> {
    let t_max = t_max.or(s.run.t_max).unwrap_or(5.0);
    let record_grid = record_grid.or(s.run.record_grid).unwrap_or(t_max / 100.0);
    let cap = |limit: f64| if s.inner.max_rate() > 0.0 { limit / s.inner.max_rate() } else { f64::INFINITY };
    let dt = dt.or(s.run.dt).unwrap_or_else(|| {
        match method {
            Method::Trajectories(Unraveling::QuantumJump) => default_dt(&s.inner),
            Method::Trajectories(_) => default_dt(&s.inner).min(cap(qsd::MAX_RATE_STEP)),
            Method::Master => cap(MASTER_RATE_STEP),
        }
        .min(record_grid)
    });
    let n_traj = n_traj.or(s.run.n_traj).unwrap_or(1000);
    if n_traj == 0 {
        return Err(PyValueError::new_err("n_traj must be at least 1"));
    }
    Ok(Grid { params: SimParams::new(t_max, dt, record_grid).map_err(to_py)?, n_traj, seed: seed.or(s.run.seed).unwrap_or(0) })
}

/// Trajectory ensemble. Unset arguments fall back to the scenario's `[run]` table.
///
/// Returns a dict with `t`, `mean_C`, `stderr_C`, `mean_EoF`, `stderr_EoF` and `n_traj`.
#[pyfunction]
#[pyo3(signature = (scenario, *, t_max = None, dt = None, record_grid = None, n_traj = None, seed = None, unraveling = None))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    scenario: PyRef<'_, PyScenario>,
    t_max: Option<f64>,
    dt: Option<f64>,
    record_grid: Option<f64>,
    n_traj: Option<usize>,
    seed: Option<u64>,
    unraveling: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let unraveling = match unraveling {
        Some(u) => u.parse::<Unraveling>().map_err(to_py)?,
        None => match scenario.run.method {
            Some(Method::Trajectories(u)) => u,
            _ => Unraveling::QuantumJump,
        },
    };
    let g = grid(&scenario, Method::Trajectories(unraveling), t_max, dt, record_grid, n_traj, seed)?;
    let spec = EnsembleSpec { unraveling, params: g.params, n_traj: g.n_traj, seed: g.seed };
    let s = scenario.inner.clone();
    let summary = py.detach(move || ensemble::simulate(&s, &spec)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("t", summary.times)?;
    d.set_item("mean_C", summary.mean_c)?;
    d.set_item("stderr_C", summary.stderr)?;
    d.set_item("mean_EoF", summary.mean_eof)?;
    d.set_item("stderr_EoF", summary.stderr_eof)?;
    d.set_item("n_traj", summary.n_traj)?;
    Ok(d)
}

/// Master-equation run: `t`, `C_rho`, `EoF_rho`, `purity` and, if asked, the density matrices.
#[pyfunction]
#[pyo3(signature = (scenario, *, t_max = None, dt = None, record_grid = None, states = false))]
fn master<'py>(
    py: Python<'py>,
    scenario: PyRef<'_, PyScenario>,
    t_max: Option<f64>,
    dt: Option<f64>,
    record_grid: Option<f64>,
    states: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let g = grid(&scenario, Method::Master, t_max, dt, record_grid, Some(1), None)?;
    let s = scenario.inner.clone();
    let series = py.detach(move || lindblad::evolve_rho(&s, &g.params)).map_err(to_py)?;
    let eof = series.concurrences.iter().map(|&c| eof_from_concurrence(c)).collect::<Result<Vec<_>, _>>().map_err(to_py)?;
    let purity: Vec<f64> = series
        .states
        .iter()
        .map(|r| {
            let m = r.matrix();
            (*m * *m).trace().re
        })
        .collect();
    let d = PyDict::new(py);
    d.set_item("t", &series.times)?;
    d.set_item("C_rho", &series.concurrences)?;
    d.set_item("EoF_rho", eof)?;
    d.set_item("purity", purity)?;
    if states {
        let rho: Vec<_> = series.states.iter().map(|r| rows4(r.matrix())).collect();
        d.set_item("rho", rho)?;
    }
    Ok(d)
}

/// Concurrence of a 4×4 density matrix.
#[pyfunction]
fn concurrence(rho: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let rho = DensityMatrix::new(mat4(rho)?).map_err(to_py)?;
    lindblad::concurrence_mixed(&rho).map_err(to_py)
}

#[pyfunction]
fn entanglement_of_formation(concurrence: f64) -> PyResult<f64> {
    eof_from_concurrence(concurrence).map_err(to_py)
}

fn fit_dict<'py>(py: Python<'py>, f: &RateFit) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("rate", f.rate)?;
    d.set_item("rate_stderr", f.rate_stderr)?;
    d.set_item("window", f.window)?;
    d.set_item("r_squared", f.r_squared)?;
    d.set_item("points", f.points)?;
    Ok(d)
}

/// Decay rate of a mean-concurrence series. With `reference`, the same window
/// and weights are applied to it and its rate is returned as `reference_rate`.
#[pyfunction]
#[pyo3(signature = (t, mean_c, stderr_c = None, reference = None))]
fn fit<'py>(
    py: Python<'py>,
    t: Vec<f64>,
    mean_c: Vec<f64>,
    stderr_c: Option<Vec<f64>>,
    reference: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyDict>> {
    let n = t.len();
    let stderr = stderr_c.unwrap_or_else(|| vec![0.0; n]);
    if mean_c.len() != n || stderr.len() != n {
        return Err(PyValueError::new_err("t, mean_c and stderr_c must have the same length"));
    }
    let summary = EnsembleSummary {
        times: t,
        mean_c,
        stderr,
        mean_eof: vec![0.0; n],
        stderr_eof: vec![0.0; n],
        n_traj: 0,
        empirical_rho: None,
    };
    let f = fit_rate(&summary).map_err(to_py)?;
    let d = fit_dict(py, &f)?;
    if let Some(r) = reference {
        let rf = fit_reference(&summary, &f, &r).map_err(to_py)?;
        d.set_item("reference_rate", rf.rate)?;
    }
    Ok(d)
}

/// Lowest jump rate over measurement bases for thermal baths on each qubit.
#[pyfunction]
#[pyo3(signature = (gamma_plus, gamma_minus, *, restarts = 8, seed = 0))]
fn optimize<'py>(
    py: Python<'py>,
    gamma_plus: [f64; 2],
    gamma_minus: [f64; 2],
    restarts: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let rates = ThermalRates::new(gamma_plus[0], gamma_minus[0], gamma_plus[1], gamma_minus[1]).map_err(to_py)?;
    let best = py.detach(move || optimize_unraveling(&rates, restarts, seed)).map_err(to_py)?;
    let d = PyDict::new(py);
    let rows = |q: usize| -> Vec<Vec<Complex64>> { best.mixing[q].rows.iter().map(|r| r.to_vec()).collect() };
    d.set_item("mixing_a", rows(0))?;
    d.set_item("mixing_b", rows(1))?;
    d.set_item("laser_phases", best.phases.clone())?;
    d.set_item("rate", best.rate)?;
    d.set_item("closed_form", best.closed_form)?;
    Ok(d)
}

#[pymodule(name = "trajent")]
fn trajent_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyState>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(master, m)?)?;
    m.add_function(wrap_pyfunction!(concurrence, m)?)?;
    m.add_function(wrap_pyfunction!(entanglement_of_formation, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
