use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use molcomm::analysis::{self, ErrorQuery};
use molcomm::detectors::{self, DetectorKind, DetectorSpec, ObservationTrace};
use molcomm::simulation::{self, Fidelity, SimConfig};
use molcomm::{channel, stats, BitSequence, Error};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn kind(name: &str) -> PyResult<DetectorKind> {
    name.parse().map_err(to_py)
}

fn bits(values: Vec<u8>) -> PyResult<BitSequence> {
    BitSequence::new(values).map_err(to_py)
}

/// Channel constants; defaults are the reference setup at a 40 ms period.
#[pyclass(name = "ChannelParams", from_py_object)]
#[derive(Clone)]
struct PyChannelParams {
    inner: molcomm::ChannelParams,
}

#[pymethods]
impl PyChannelParams {
    #[new]
    #[pyo3(signature = (
        sample_period = 0.040,
        samples_per_bit = None,
        seq_length = 20,
        rx_radius = 0.5e-6,
        distance = 5e-6,
        diffusion = 1e-10,
        molecules_per_one = 20_000,
        bit_one_prior = 0.5,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        sample_period: f64,
        samples_per_bit: Option<usize>,
        seq_length: usize,
        rx_radius: f64,
        distance: f64,
        diffusion: f64,
        molecules_per_one: u64,
        bit_one_prior: f64,
    ) -> PyResult<Self> {
        let mut inner = molcomm::ChannelParams::reference(sample_period);
        if let Some(m) = samples_per_bit {
            inner.samples_per_bit = m;
        }
        inner.seq_length = seq_length;
        inner.rx_radius = rx_radius;
        inner.distance = distance;
        inner.diffusion = diffusion;
        inner.molecules_per_one = molecules_per_one;
        inner.bit_one_prior = bit_one_prior;
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn sample_period(&self) -> f64 {
        self.inner.sample_period
    }

    #[getter]
    fn samples_per_bit(&self) -> usize {
        self.inner.samples_per_bit
    }

    #[getter]
    fn seq_length(&self) -> usize {
        self.inner.seq_length
    }

    #[getter]
    fn rx_volume(&self) -> f64 {
        self.inner.rx_volume()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyfunction]
fn hitting_probability(params: &PyChannelParams, k: i64) -> PyResult<f64> {
    channel::hitting_probability(&params.inner, k).map_err(to_py)
}

#[pyfunction]
fn expected_single_release(params: &PyChannelParams, k: i64) -> PyResult<f64> {
    channel::expected_single_release(&params.inner, k).map_err(to_py)
}

#[pyfunction]
fn expected_signal(params: &PyChannelParams, bit_values: Vec<u8>, k: i64) -> PyResult<f64> {
    channel::expected_signal(&params.inner, &bits(bit_values)?, k).map_err(to_py)
}

#[pyfunction]
fn expected_isi(params: &PyChannelParams, decided_prefix: Vec<u8>, j: usize) -> PyResult<f64> {
    channel::expected_isi(&params.inner, &bits(decided_prefix)?, j).map_err(to_py)
}

#[pyfunction]
fn peak_sample_index(params: &PyChannelParams) -> usize {
    channel::peak_sample_index(&params.inner)
}

#[pyfunction]
fn regularized_upper_gamma(s: f64, x: f64) -> PyResult<f64> {
    stats::regularized_upper_gamma(s, x).map_err(to_py)
}

#[pyfunction]
fn poisson_cdf(threshold: f64, mean: f64) -> PyResult<f64> {
    let q = stats::PoissonThresholdQuery::new(threshold, mean).map_err(to_py)?;
    stats::poisson_cdf(q).map_err(to_py)
}

#[pyfunction]
fn max_exceed_prob(means: Vec<f64>, isi_shifts: Vec<f64>, tau: f64) -> PyResult<f64> {
    stats::max_exceed_prob(&means, &isi_shifts, tau).map_err(to_py)
}

#[pyfunction]
fn sum_exceed_prob(means: Vec<f64>, total_isi: f64, tau: f64) -> PyResult<f64> {
    stats::sum_exceed_prob(&means, total_isi, tau).map_err(to_py)
}

/// Decodes a trace of counts `y[1..=ML]` with the named detector.
#[pyfunction]
fn detect(detector: &str, threshold: f64, counts: Vec<u64>, params: &PyChannelParams) -> PyResult<Vec<u8>> {
    let spec = DetectorSpec::new(kind(detector)?, threshold).map_err(to_py)?;
    let decoded = detectors::detect(&spec, &ObservationTrace::new(counts), &params.inner).map_err(to_py)?;
    Ok(decoded.into())
}

#[pyfunction]
fn bit_error_probability(
    detector: &str,
    params: &PyChannelParams,
    true_bits: Vec<u8>,
    offset: i64,
    l: usize,
    tau: f64,
) -> PyResult<f64> {
    let query = ErrorQuery::new(kind(detector)?, params.inner, bits(true_bits)?, offset);
    analysis::bit_error_probability(&query, l, tau).map_err(to_py)
}

fn sequences(values: Vec<Vec<u8>>) -> PyResult<Vec<BitSequence>> {
    values.into_iter().map(bits).collect()
}

/// Returns `(average, per_bit)`.
#[pyfunction]
fn average_error_probability(
    detector: &str,
    params: &PyChannelParams,
    seqs: Vec<Vec<u8>>,
    offset: i64,
    tau: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let r = analysis::average_error_probability(kind(detector)?, &params.inner, &sequences(seqs)?, offset, tau)
        .map_err(to_py)?;
    Ok((r.average, r.per_bit))
}

/// Returns `(threshold, error)` minimizing the analytic error over `grid`.
#[pyfunction]
fn optimal_threshold(
    detector: &str,
    params: &PyChannelParams,
    seqs: Vec<Vec<u8>>,
    offset: i64,
    grid: Vec<f64>,
) -> PyResult<(f64, f64)> {
    analysis::optimal_threshold(kind(detector)?, &params.inner, &sequences(seqs)?, offset, &grid).map_err(to_py)
}

#[pyfunction]
fn random_sequences(params: &PyChannelParams, count: usize, seed: u64) -> Vec<Vec<u8>> {
    simulation::random_sequences(&params.inner, count, seed).into_iter().map(Into::into).collect()
}

#[pyfunction]
#[pyo3(signature = (params, bit_values, offset, seed, fidelity = "poisson", particle_substeps = 1))]
fn draw_trace(
    params: &PyChannelParams,
    bit_values: Vec<u8>,
    offset: i64,
    seed: u64,
    fidelity: &str,
    particle_substeps: usize,
) -> PyResult<Vec<u64>> {
    let sim = SimConfig {
        fidelity: fidelity.parse::<Fidelity>().map_err(to_py)?,
        particle_substeps,
        rng_seed: seed,
        realizations: 1,
    };
    let mut rng = simulation::trace_rng(seed, 0, 0, 1);
    let trace =
        simulation::draw_trace(&params.inner, &bits(bit_values)?, offset, &sim, &mut rng).map_err(to_py)?;
    Ok(trace.counts().to_vec())
}

/// Empirical `(average, per_bit)` error over freshly drawn traces.
#[pyfunction]
#[pyo3(signature = (detector, params, seqs, offset, tau, seed, fidelity = "poisson", realizations = 1))]
#[allow(clippy::too_many_arguments)]
fn measure_ber(
    detector: &str,
    params: &PyChannelParams,
    seqs: Vec<Vec<u8>>,
    offset: i64,
    tau: f64,
    seed: u64,
    fidelity: &str,
    realizations: usize,
) -> PyResult<(f64, Vec<f64>)> {
    let sim = SimConfig {
        fidelity: fidelity.parse::<Fidelity>().map_err(to_py)?,
        realizations,
        rng_seed: seed,
        ..SimConfig::default()
    };
    let r = simulation::measure_ber(kind(detector)?, &params.inner, &sequences(seqs)?, offset, tau, &sim)
        .map_err(to_py)?;
    Ok((r.average, r.per_bit))
}

/// Runs an experiment from a config file and returns the CSV path.
#[pyfunction]
#[pyo3(signature = (config_path, out, seed = None))]
fn run_experiment(config_path: &str, out: &str, seed: Option<u64>) -> PyResult<String> {
    let mut cfg = molcomm::experiment::parse_config(config_path.as_ref()).map_err(to_py)?;
    if let Some(seed) = seed {
        cfg.sim.rng_seed = seed;
    }
    let path = molcomm::experiment::run_experiment(&cfg, out.as_ref()).map_err(to_py)?;
    Ok(path.display().to_string())
}

#[pymodule]
fn molcomm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannelParams>()?;
    m.add("DETECTORS", DetectorKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>())?;
    m.add_function(wrap_pyfunction!(hitting_probability, m)?)?;
    m.add_function(wrap_pyfunction!(expected_single_release, m)?)?;
    m.add_function(wrap_pyfunction!(expected_signal, m)?)?;
    m.add_function(wrap_pyfunction!(expected_isi, m)?)?;
    m.add_function(wrap_pyfunction!(peak_sample_index, m)?)?;
    m.add_function(wrap_pyfunction!(regularized_upper_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(max_exceed_prob, m)?)?;
    m.add_function(wrap_pyfunction!(sum_exceed_prob, m)?)?;
    m.add_function(wrap_pyfunction!(detect, m)?)?;
    m.add_function(wrap_pyfunction!(bit_error_probability, m)?)?;
    m.add_function(wrap_pyfunction!(average_error_probability, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(random_sequences, m)?)?;
    m.add_function(wrap_pyfunction!(draw_trace, m)?)?;
    m.add_function(wrap_pyfunction!(measure_ber, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
