//! Python bindings: self-similar parameters, scenario runs, trajectory files
//! and certificates.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use pvburst::burst::{solve_burst, GammaConfig};
use pvburst::certify::{self, VerifyConfig};
use pvburst::dynamics::{self, EventKind, EventTrajectory};
use pvburst::field::FieldSpec;
use pvburst::io;
use pvburst::markov::{ensemble_stats, ks_exponential};
use pvburst::nburst::lone_burst_events;
use pvburst::scenario::{self, Scenario};
use pvburst::selfsimilar::SelfSimilarParams;
use pvburst::weakform::{energy_ledger, standard_battery, weak_residual};

fn py_err(e: pvburst::Error) -> PyErr {
    match e {
        pvburst::Error::InvalidArgument(_)
        | pvburst::Error::InvalidIntensity(_)
        | pvburst::Error::OutOfDomain(_)
        | pvburst::Error::SingularInput(_)
        | pvburst::Error::Parse(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Self-similar burst parameters for a parent intensity.
#[pyclass(name = "SelfSimilar", frozen)]
struct PySelfSimilar(SelfSimilarParams);

#[pymethods]
impl PySelfSimilar {
    #[new]
    fn new(xi: f64) -> PyResult<Self> {
        SelfSimilarParams::for_intensity(xi).map(Self).map_err(py_err)
    }

    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }

    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }

    #[getter]
    fn shape(&self) -> Vec<Complex64> {
        self.0.shape().to_vec()
    }

    #[getter]
    fn intensities(&self) -> Vec<f64> {
        self.0.intensities().to_vec()
    }

    fn positions_at(&self, t: f64) -> PyResult<Vec<Complex64>> {
        self.0.positions_at(t).map(|z| z.to_vec()).map_err(py_err)
    }

    fn relation_residual(&self) -> f64 {
        self.0.asrelation_residual()
    }

    fn ode_residual(&self, t: f64) -> PyResult<f64> {
        self.0.free_ode_residual(t).map_err(py_err)
    }

    fn eigenvalues(&self) -> Vec<Complex64> {
        self.0.build_l().eigenvalues().to_vec()
    }

    fn discriminants(&self) -> (f64, f64) {
        self.0.eigen_discriminants()
    }
}

/// Piecewise-smooth trajectory with burst and merge events.
#[pyclass(name = "Trajectory")]
struct PyTrajectory(EventTrajectory);

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        io::read_file(path).map(Self).map_err(py_err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        io::write_file(&self.0, path).map_err(py_err)
    }

    fn to_string(&self) -> String {
        io::write_string(&self.0)
    }

    #[staticmethod]
    fn from_string(text: &str) -> PyResult<Self> {
        io::read_str(text).map(Self).map_err(py_err)
    }

    fn export(&self, format: &str) -> PyResult<String> {
        Ok(io::export(&self.0, format.parse().map_err(py_err)?))
    }

    #[getter]
    fn t_start(&self) -> f64 {
        self.0.t_start()
    }

    #[getter]
    fn t_end(&self) -> f64 {
        self.0.t_end()
    }

    /// One (intensities, times, positions) tuple per smooth segment.
    fn segments(&self) -> Vec<(Vec<f64>, Vec<f64>, Vec<Vec<Complex64>>)> {
        self.0
            .segments
            .iter()
            .map(|s| (s.intensities.clone(), s.times.clone(), s.positions.clone()))
            .collect()
    }

    /// One (time, kind, [(one, many, point)]) tuple per event.
    fn events(&self) -> Vec<(f64, &'static str, Vec<(usize, Vec<usize>, Complex64)>)> {
        self.0
            .events
            .iter()
            .map(|e| {
                let kind = match e.kind {
                    EventKind::Burst => "burst",
                    EventKind::Merge => "merge",
                };
                (e.time, kind, e.groups.iter().map(|g| (g.one, g.many.clone(), g.point)).collect())
            })
            .collect()
    }

    fn reversed(&self) -> Self {
        Self(dynamics::time_reverse(&self.0))
    }

    fn weak_residual(&self) -> f64 {
        weak_residual(&self.0, &standard_battery(&self.0), &[]).max_residual()
    }

    /// (time, kind, jump) for every event.
    fn energy_jumps(&self) -> Vec<(f64, String, f64)> {
        energy_ledger(&self.0)
            .jumps
            .iter()
            .map(|j| (j.time, format!("{:?}", j.kind).to_lowercase(), j.jump))
            .collect()
    }

    /// Runs the certificate battery; returns (passed, failure names, report text).
    #[pyo3(signature = (weak_tol=1e-5, drift_tol=1e-6))]
    fn verify(&self, weak_tol: f64, drift_tol: f64) -> (bool, Vec<String>, String) {
        let r = certify::verify(&self.0, &VerifyConfig { weak_tol, drift_tol });
        (r.passed(), r.failures.iter().map(|f| f.invariant.to_string()).collect(), r.render())
    }

    fn __len__(&self) -> usize {
        self.0.segments.len()
    }
}

/// Lone free burst of `xi` at the origin on [0, t_final].
#[pyfunction]
#[pyo3(signature = (xi, t_final=1e-2, grid_nodes=512))]
fn free_burst(xi: f64, t_final: f64, grid_nodes: usize) -> PyResult<PyTrajectory> {
    let cfg = GammaConfig { t_final, grid_nodes, ..GammaConfig::default() };
    let sol = solve_burst(&FieldSpec::Zero, xi, &cfg).map_err(py_err)?;
    Ok(PyTrajectory(lone_burst_events(&sol, Complex64::new(0.0, 0.0))))
}

fn load(path: &str) -> PyResult<Scenario> {
    Scenario::load(path).map_err(py_err)
}

#[pyfunction]
fn burst(scenario_path: &str) -> PyResult<PyTrajectory> {
    scenario::run_burst(&load(scenario_path)?).map(PyTrajectory).map_err(py_err)
}

#[pyfunction]
fn collapse(scenario_path: &str) -> PyResult<PyTrajectory> {
    scenario::run_collapse(&load(scenario_path)?).map(|(_, t)| PyTrajectory(t)).map_err(py_err)
}

#[pyfunction]
fn simulate(scenario_path: &str) -> PyResult<PyTrajectory> {
    scenario::run_simulate(&load(scenario_path)?).map(PyTrajectory).map_err(py_err)
}

/// Ensemble summary as a dict.
#[pyfunction]
fn markov<'py>(py: Python<'py>, scenario_path: &str, samples: usize) -> PyResult<Bound<'py, PyDict>> {
    let ms = load(scenario_path)?.markov_scenario().map_err(py_err)?;
    let stats = py.detach(|| ensemble_stats(&ms, samples));
    let d = PyDict::new(py);
    d.set_item("samples", stats.samples.len())?;
    d.set_item("completed", stats.completed())?;
    d.set_item("mean_bursts", stats.mean_bursts())?;
    d.set_item("burst_histogram", stats.burst_histogram())?;
    d.set_item("ks_statistic", ks_exponential(&stats.inter_arrivals(), ms.lambda))?;
    d.set_item("max_weak_residual", stats.max_weak_residual())?;
    Ok(d)
}

#[pymodule]
#[pyo3(name = "pvburst")]
fn pvburst_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySelfSimilar>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(free_burst, m)?)?;
    m.add_function(wrap_pyfunction!(burst, m)?)?;
    m.add_function(wrap_pyfunction!(collapse, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(markov, m)?)?;
    Ok(())
}
