//! Python bindings: configs, rate predictions, scans and fringe fits.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use phasemem::config::{parse_config, ExperimentConfig, ScanAxis};
use phasemem::counting;
use phasemem::expectation::{compose_setup, RatePrediction};
use phasemem::fock;
use phasemem::io::scan_to_csv;
use phasemem::operator::DelaySetting;
use phasemem::scan::{self, Channel, FitInput, Noise};
use phasemem::spectral::{self, SpectralProfile};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_axis(axis: Option<&str>, config: &ExperimentConfig) -> PyResult<ScanAxis> {
    match axis {
        Some(a) => a.parse().map_err(value_err),
        None => Ok(config.scan.axis),
    }
}

#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Built-in scenario with the published parameters.
    #[staticmethod]
    fn default() -> Self {
        Self {
            inner: ExperimentConfig::default(),
        }
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        parse_config(text).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path).map_err(value_err)?;
        Self::from_text(&text)
    }

    fn to_text(&self) -> String {
        self.inner.to_config_text()
    }

    #[getter]
    fn gain_1(&self) -> f64 {
        self.inner.crystal1.gain
    }

    #[setter]
    fn set_gain_1(&mut self, g: f64) -> PyResult<()> {
        let old = self.inner.crystal1.gain;
        self.inner.crystal1.gain = g;
        self.revalidate(|c| c.crystal1.gain = old)
    }

    #[getter]
    fn gain_2(&self) -> f64 {
        self.inner.crystal2.gain
    }

    #[setter]
    fn set_gain_2(&mut self, g: f64) -> PyResult<()> {
        let old = self.inner.crystal2.gain;
        self.inner.crystal2.gain = g;
        self.revalidate(|c| c.crystal2.gain = old)
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    /// Sets the idler-link transmission with unit mode overlap.
    #[setter]
    fn set_eta(&mut self, eta: f64) -> PyResult<()> {
        let old = self.inner.idler_link;
        self.inner.idler_link.transmission = eta;
        self.inner.idler_link.mode_overlap = 1.0;
        self.revalidate(|c| c.idler_link = old)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.detectors.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.detectors.seed = seed;
    }

    #[getter]
    fn axis(&self) -> String {
        self.inner.scan.axis.to_string()
    }

    #[setter]
    fn set_axis(&mut self, axis: &str) -> PyResult<()> {
        self.inner.scan.axis = axis.parse().map_err(value_err)?;
        Ok(())
    }

    fn grid(&self) -> Vec<f64> {
        self.inner.scan.grid()
    }

    fn report(&self) -> String {
        phasemem::cli::report(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(gain_1={}, gain_2={}, eta={}, axis={})",
            self.inner.crystal1.gain,
            self.inner.crystal2.gain,
            self.inner.eta(),
            self.inner.scan.axis
        )
    }
}

impl PyConfig {
    fn revalidate(&mut self, undo: impl FnOnce(&mut ExperimentConfig)) -> PyResult<()> {
        if let Err(e) = self.inner.validate() {
            undo(&mut self.inner);
            return Err(value_err(e));
        }
        Ok(())
    }
}

#[pyclass(name = "Rates", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyRates {
    #[pyo3(get)]
    p_a: f64,
    #[pyo3(get)]
    p_b: f64,
    #[pyo3(get)]
    p_ab: f64,
}

impl From<RatePrediction> for PyRates {
    fn from(r: RatePrediction) -> Self {
        Self {
            p_a: r.p_a,
            p_b: r.p_b,
            p_ab: r.p_ab,
        }
    }
}

#[pymethods]
impl PyRates {
    fn __repr__(&self) -> String {
        format!("Rates(p_a={:e}, p_b={:e}, p_ab={:e})", self.p_a, self.p_b, self.p_ab)
    }
}

/// Monochromatic rates from the operator expansions.
#[pyfunction]
#[pyo3(signature = (config, delta_x_p = 0.0, delta_x_s = 0.0))]
fn predict_rates(config: &PyConfig, delta_x_p: f64, delta_x_s: f64) -> PyRates {
    compose_setup(&config.inner, DelaySetting::new(delta_x_p, delta_x_s)).into()
}

/// Rates with the fringe damped by the pump and signal envelopes.
#[pyfunction]
#[pyo3(signature = (config, delta_x_p = 0.0, delta_x_s = 0.0))]
fn modulated_rates(config: &PyConfig, delta_x_p: f64, delta_x_s: f64) -> PyRates {
    spectral::modulated_rates(&config.inner, DelaySetting::new(delta_x_p, delta_x_s)).into()
}

/// Detection moments from the truncated Fock-space state.
#[pyfunction]
#[pyo3(signature = (config, delta_x_p = 0.0, delta_x_s = 0.0))]
fn oracle_rates(config: &PyConfig, delta_x_p: f64, delta_x_s: f64) -> PyResult<PyRates> {
    let state = fock::build_state(&config.inner, DelaySetting::new(delta_x_p, delta_x_s)).map_err(value_err)?;
    Ok(fock::detection_moments(&state).into())
}

#[pyclass(name = "Scan", frozen, skip_from_py_object)]
struct PyScan {
    record: scan::ScanRecord,
}

#[pymethods]
impl PyScan {
    #[getter]
    fn axis(&self) -> String {
        self.record.axis.to_string()
    }

    #[getter]
    fn delays(&self) -> Vec<f64> {
        self.record.delays.clone()
    }

    #[getter]
    fn rate_a(&self) -> Vec<f64> {
        self.record.rates.iter().map(|r| r.rate_a).collect()
    }

    #[getter]
    fn rate_b(&self) -> Vec<f64> {
        self.record.rates.iter().map(|r| r.rate_b).collect()
    }

    #[getter]
    fn coinc(&self) -> Vec<f64> {
        self.record.rates.iter().map(|r| r.measured_coinc()).collect()
    }

    /// `(counts_a, counts_b, coincidences)` per point, or None when noiseless.
    #[getter]
    fn counts(&self) -> Option<Vec<(u64, u64, u64)>> {
        self.record
            .samples
            .as_ref()
            .map(|s| s.iter().map(|c| (c.counts_a, c.counts_b, c.coincidences)).collect())
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.record.warnings.clone()
    }

    fn to_csv(&self) -> String {
        scan_to_csv(&self.record)
    }

    /// Fits one channel ("a", "b" or "coinc").
    #[pyo3(signature = (channel = "a"))]
    fn fit(&self, channel: &str) -> PyResult<PyFit> {
        let channel: Channel = channel.parse().map_err(PyValueError::new_err)?;
        run_fit(&self.record.fit_input(channel))
    }

    fn __len__(&self) -> usize {
        self.record.len()
    }
}

#[pyfunction]
#[pyo3(signature = (config, axis = None))]
fn predict_scan(config: &PyConfig, axis: Option<&str>) -> PyResult<PyScan> {
    let axis = parse_axis(axis, &config.inner)?;
    scan::predict_scan(&config.inner, axis, &config.inner.scan.grid())
        .map(|record| PyScan { record })
        .map_err(value_err)
}

#[pyfunction]
#[pyo3(signature = (config, axis = None))]
fn simulate_scan(config: &PyConfig, axis: Option<&str>) -> PyResult<PyScan> {
    let axis = parse_axis(axis, &config.inner)?;
    scan::run_scan(&config.inner, axis, &config.inner.scan.grid())
        .map(|record| PyScan { record })
        .map_err(value_err)
}

#[pyclass(name = "FringeFit", frozen, skip_from_py_object)]
struct PyFit {
    fit: scan::FringeFit,
}

#[pymethods]
impl PyFit {
    #[getter]
    fn period(&self) -> f64 {
        self.fit.period
    }
    #[getter]
    fn period_sigma(&self) -> f64 {
        self.fit.period_sigma
    }
    #[getter]
    fn visibility(&self) -> f64 {
        self.fit.visibility
    }
    #[getter]
    fn visibility_sigma(&self) -> f64 {
        self.fit.visibility_sigma
    }
    #[getter]
    fn envelope_center(&self) -> f64 {
        self.fit.envelope_center
    }
    #[getter]
    fn envelope_fwhm(&self) -> f64 {
        self.fit.envelope_fwhm
    }
    #[getter]
    fn envelope_lower_bound(&self) -> bool {
        self.fit.envelope_lower_bound
    }
    #[getter]
    fn phase(&self) -> f64 {
        self.fit.phase
    }
    #[getter]
    fn baseline(&self) -> f64 {
        self.fit.baseline
    }
    #[getter]
    fn reduced_residual(&self) -> f64 {
        self.fit.reduced_residual
    }
    #[getter]
    fn converged(&self) -> bool {
        self.fit.converged
    }

    fn visibility_minmax(&self) -> f64 {
        self.fit.visibility_minmax()
    }

    fn to_json(&self) -> String {
        phasemem::io::fit_to_json(&self.fit)
    }

    fn __repr__(&self) -> String {
        format!(
            "FringeFit(period={:e}, visibility={:.6}, converged={})",
            self.fit.period, self.fit.visibility, self.fit.converged
        )
    }
}

fn run_fit(input: &FitInput) -> PyResult<PyFit> {
    match scan::fit_fringe(input) {
        Ok(fit) => Ok(PyFit { fit }),
        Err(e @ scan::FitError::NotConverged { .. }) => Err(PyRuntimeError::new_err(e.to_string())),
        Err(e) => Err(value_err(e)),
    }
}

/// Fits `values` sampled at `delays`; with `dwell` the values are rates from
/// counts and get Poisson weights.
#[pyfunction]
#[pyo3(signature = (delays, values, dwell = None))]
fn fit_fringe(delays: Vec<f64>, values: Vec<f64>, dwell: Option<f64>) -> PyResult<PyFit> {
    let noise = match dwell {
        Some(dwell) if dwell > 0.0 => Noise::Poisson { dwell },
        Some(dwell) => return Err(PyValueError::new_err(format!("dwell must be positive, got {dwell}"))),
        None => Noise::None,
    };
    run_fit(&FitInput::new(delays, values, noise))
}

#[pyfunction]
fn estimate_period(delays: Vec<f64>, values: Vec<f64>) -> PyResult<f64> {
    scan::estimate_period(&delays, &values).map_err(value_err)
}

/// Coherence envelope of a Gaussian spectrum at path difference `delta_x`.
#[pyfunction]
fn envelope(center_wavelength: f64, fwhm_hz: f64, delta_x: f64) -> PyResult<f64> {
    let p = SpectralProfile::from_frequency_fwhm(center_wavelength, fwhm_hz).map_err(value_err)?;
    Ok(spectral::envelope(&p, delta_x))
}

#[pyfunction]
fn coherence_length(center_wavelength: f64, fwhm_hz: f64) -> PyResult<f64> {
    let p = SpectralProfile::from_frequency_fwhm(center_wavelength, fwhm_hz).map_err(value_err)?;
    Ok(spectral::coherence_length(&p))
}

#[pyfunction]
fn accidental_rate(rate_a: f64, rate_b: f64, window: f64) -> f64 {
    counting::accidental_rate(rate_a, rate_b, window)
}

#[pyfunction]
fn double_pair_probability(pair_rate: f64, window: f64) -> f64 {
    counting::double_pair_probability(pair_rate, window)
}

#[pymodule]
fn phasemem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyRates>()?;
    m.add_class::<PyScan>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(predict_rates, m)?)?;
    m.add_function(wrap_pyfunction!(modulated_rates, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_rates, m)?)?;
    m.add_function(wrap_pyfunction!(predict_scan, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fringe, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_period, m)?)?;
    m.add_function(wrap_pyfunction!(envelope, m)?)?;
    m.add_function(wrap_pyfunction!(coherence_length, m)?)?;
    m.add_function(wrap_pyfunction!(accidental_rate, m)?)?;
    m.add_function(wrap_pyfunction!(double_pair_probability, m)?)?;
    Ok(())
}
