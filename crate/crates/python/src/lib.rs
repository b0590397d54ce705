//! Python bindings for the `ris_fso` crate.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ris_fso::alloc::{build_problem, kkt_residual, optimal_alloc};
use ris_fso::analytic::{self, Estimator};
use ris_fso::channel::{BeamSpec, ChannelSpec, LinkPath, ObstructionSpec};
use ris_fso::geometry::JitterSpec;
use ris_fso::montecarlo::{self as mc, McConfig};
use ris_fso::scenario::Scenario;
use ris_fso::{cli, Error};

fn py_err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One link path with its fading parameters.
#[pyclass(name = "Channel", module = "risfso", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyChannel {
    inner: ris_fso::channel::Channel,
}

#[pymethods]
impl PyChannel {
    /// Path through one reflecting surface at `w` metres from the source and
    /// `l` metres from the receiver.
    #[staticmethod]
    #[pyo3(signature = (w, l, aperture_radius, divergence, sigma_theta, sigma_beta, eta))]
    fn reflected(
        w: f64,
        l: f64,
        aperture_radius: f64,
        divergence: f64,
        sigma_theta: f64,
        sigma_beta: f64,
        eta: f64,
    ) -> PyResult<Self> {
        ris_fso::channel::Channel::reflected(
            w,
            l,
            aperture_radius,
            divergence,
            sigma_theta,
            sigma_beta,
            eta,
        )
        .map(|inner| Self { inner })
        .map_err(py_err)
    }

    /// Line-of-sight path of the given length with beam jitter only.
    #[staticmethod]
    fn direct(
        length: f64,
        aperture_radius: f64,
        divergence: f64,
        sigma_theta: f64,
        eta: f64,
    ) -> PyResult<Self> {
        let spec = ChannelSpec {
            beam: BeamSpec::new(aperture_radius, divergence).map_err(py_err)?,
            path: LinkPath::direct(length).map_err(py_err)?,
            jitter: JitterSpec::new(sigma_theta, 0.0).map_err(py_err)?,
            obstruction: ObstructionSpec::new(eta).map_err(py_err)?,
        };
        ris_fso::channel::Channel::new(spec)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// Probability the path is clear.
    #[getter]
    fn n(&self) -> f64 {
        self.inner.n()
    }

    /// Fading exponent; `None` for a jitter-free channel.
    #[getter]
    fn m(&self) -> Option<f64> {
        self.inner.m().ok()
    }

    #[getter]
    fn a0(&self) -> f64 {
        self.inner.a0()
    }

    fn h_cdf(&self, x: f64) -> PyResult<f64> {
        self.inner.h_cdf(x).map_err(py_err)
    }

    fn mean_h(&self) -> f64 {
        self.inner.mean_h()
    }

    fn ber_quadrature(&self, mean_snr: f64) -> f64 {
        analytic::single_ber_quadrature(&self.inner, mean_snr)
    }

    fn ber_closed_form(&self, mean_snr: f64) -> PyResult<f64> {
        analytic::single_ber_exact(&self.inner, mean_snr).map_err(py_err)
    }

    fn outage(&self, mean_snr: f64, gamma_th: f64) -> f64 {
        analytic::single_outage(&self.inner, mean_snr, gamma_th)
    }

    /// BER gain from going to `count + 1` identical branches.
    fn gain(&self, count: usize, p_t: f64, sigma_n_sq: f64) -> PyResult<f64> {
        analytic::gain(&self.inner, count, p_t, sigma_n_sq).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Channel(n={:.6}, m={}, a0={:.6e})",
            self.inner.n(),
            self.inner.m().map_or("None".into(), |m| format!("{m:.6}")),
            self.inner.a0()
        )
    }
}

/// Channels combined at the receiver with a power split.
#[pyclass(name = "System", module = "risfso", frozen)]
struct PySystem {
    inner: analytic::System,
}

#[pymethods]
impl PySystem {
    #[new]
    #[pyo3(signature = (channels, p_t, sigma_n_sq, alphas = None))]
    fn new(
        channels: Vec<PyChannel>,
        p_t: f64,
        sigma_n_sq: f64,
        alphas: Option<Vec<f64>>,
    ) -> PyResult<Self> {
        let chans = channels.into_iter().map(|c| c.inner).collect();
        let inner = match alphas {
            Some(a) => analytic::System::new(chans, a, p_t, sigma_n_sq),
            None => analytic::System::uniform(chans, p_t, sigma_n_sq),
        };
        inner.map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn alphas(&self) -> Vec<f64> {
        self.inner.alphas().to_vec()
    }

    #[getter]
    fn mean_snr(&self) -> f64 {
        self.inner.mean_snr()
    }

    fn ber_asymptotic(&self) -> PyResult<f64> {
        analytic::multi_ber_asymptotic(&self.inner).map_err(py_err)
    }

    fn outage_asymptotic(&self, gamma_th: f64) -> PyResult<f64> {
        analytic::multi_outage_asymptotic(&self.inner, gamma_th).map_err(py_err)
    }

    fn ber_floor(&self) -> f64 {
        analytic::ber_floor(&self.inner)
    }

    fn outage_floor(&self) -> f64 {
        analytic::outage_floor(&self.inner)
    }

    /// Monte Carlo estimates as a dict with `ber`, `ber_std_error`,
    /// `outage`, `outage_std_error` and `trials`.
    #[pyo3(signature = (gamma_th, trials, seed, workers = None))]
    fn simulate<'py>(
        &self,
        py: Python<'py>,
        gamma_th: f64,
        trials: u64,
        seed: u64,
        workers: Option<usize>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let mut cfg = McConfig::new(trials, seed);
        if let Some(w) = workers {
            cfg = cfg.with_workers(w);
        }
        let p = py
            .detach(|| mc::mc_perf(&self.inner, gamma_th, &cfg))
            .map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("ber", p.ber.mean)?;
        d.set_item("ber_std_error", p.ber.std_error)?;
        d.set_item("outage", p.outage.mean)?;
        d.set_item("outage_std_error", p.outage.std_error)?;
        d.set_item("trials", p.ber.trials)?;
        Ok(d)
    }

    /// Optimal power split and its KKT residual.
    fn optimal_alphas(&self) -> PyResult<(Vec<f64>, f64)> {
        let p = build_problem(&self.inner).map_err(py_err)?;
        let a = optimal_alloc(&p);
        let r = kkt_residual(&p, &a.alphas);
        Ok((a.alphas, r))
    }
}

fn load(text: &str) -> PyResult<Scenario> {
    Scenario::from_json(text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Run a CLI command on scenario JSON text and return the CSV table.
#[pyfunction]
#[pyo3(signature = (command, scenario_json, trials = None, seed = None))]
fn run_command(
    py: Python<'_>,
    command: &str,
    scenario_json: &str,
    trials: Option<u64>,
    seed: Option<u64>,
) -> PyResult<String> {
    let mut s = load(scenario_json)?;
    if let Some(t) = trials {
        s.mc.trials = t;
    }
    if let Some(v) = seed {
        s.mc.seed = v;
    }
    let opts = cli::RunOptions::default();
    let table = py.detach(|| match command {
        "analyze" => cli::cmd_analyze(&s),
        "simulate" => cli::cmd_simulate(&s, &opts),
        "gain" => cli::cmd_gain(&s),
        "optimize" => cli::cmd_optimize(&s),
        "validate" => cli::cmd_validate(&s, &opts).map(|r| r.table),
        other => Err(ris_fso::scenario::ConfigError::new(
            "command",
            format!("unknown command {other:?}"),
        )),
    });
    table
        .map(|t| t.to_csv())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Names of the analytic estimators a scenario may request.
#[pyfunction]
fn estimators() -> Vec<String> {
    [
        Estimator::ClosedForm,
        Estimator::Asymptotic,
        Estimator::Quadrature,
        Estimator::MonteCarlo,
    ]
    .iter()
    .map(|e| format!("{e:?}"))
    .collect()
}

#[pymodule]
fn risfso(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_class::<PySystem>()?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    m.add_function(wrap_pyfunction!(estimators, m)?)?;
    m.add("DEFAULT_SCENARIO", cli::DEFAULT_SCENARIO)?;
    Ok(())
}
