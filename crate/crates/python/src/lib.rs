//! Python bindings. Structured results (bound reports, estimates, sweeps)
//! cross the boundary as plain dicts and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use pooled_data::bounds::{self, ApproxVariant};
use pooled_data::decode;
use pooled_data::experiments::{self, Decoder, DesignMode, ExperimentConfig};
use pooled_data::model::{self, BitRow};
use pooled_data::{Error, LabelAssignment, LabelCounts, NoiseModel, ObservationMatrix, Proportions, TestDesign};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Guard { .. } | Error::Quadrature(_) | Error::Inconsistent => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_dict<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn noise_model(kind: &str, sigma2: Option<f64>) -> PyResult<NoiseModel> {
    let need = || sigma2.ok_or_else(|| PyValueError::new_err(format!("noise `{kind}` needs sigma2")));
    let noise = match kind {
        "none" | "noiseless" => NoiseModel::Noiseless,
        "gaussian" => NoiseModel::Gaussian { sigma2: need()? },
        "clipped" => NoiseModel::ClippedGaussian { sigma2: need()? },
        other => return Err(PyValueError::new_err(format!("unknown noise model `{other}`"))),
    };
    noise.validate().map_err(to_py)?;
    Ok(noise)
}

#[pyclass(name = "Proportions", frozen, module = "pooled_data")]
struct PyProportions(Proportions);

#[pymethods]
impl PyProportions {
    #[new]
    fn new(pi: Vec<f64>) -> PyResult<Self> {
        Proportions::new(pi).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn uniform(d: usize) -> PyResult<Self> {
        Proportions::uniform(d).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn fig1() -> Self {
        Self(Proportions::fig1())
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    fn entropy(&self) -> f64 {
        self.0.entropy()
    }

    /// Largest-remainder counts for a population of `p` items.
    fn round(&self, p: usize) -> PyResult<Vec<usize>> {
        model::round_proportions(&self.0, p)
            .map(|c| c.counts().to_vec())
            .map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.d()
    }

    fn __repr__(&self) -> String {
        format!("Proportions({:?})", self.0.as_slice())
    }
}

#[pyclass(name = "TestDesign", frozen, module = "pooled_data")]
struct PyTestDesign(TestDesign);

#[pymethods]
impl PyTestDesign {
    /// Rows as 0/1 lists, all of the same length.
    #[new]
    fn new(rows: Vec<Vec<u8>>) -> PyResult<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| BitRow::from_bools(&r.iter().map(|&b| b != 0).collect::<Vec<_>>()))
            .collect();
        TestDesign::explicit(p, rows).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn parse(spec: &str) -> PyResult<Self> {
        TestDesign::parse_rows(spec).map(Self).map_err(to_py)
    }

    #[staticmethod]
    fn bernoulli(n: usize, p: usize, q: f64, seed: u64) -> PyResult<Self> {
        model::bernoulli_design(n, p, q, seed).map(Self).map_err(to_py)
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.0.p()
    }

    fn rows(&self) -> Vec<Vec<u8>> {
        self.0
            .rows()
            .iter()
            .map(|r| r.to_bools().into_iter().map(u8::from).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("TestDesign(n={}, p={})", self.0.n(), self.0.p())
    }
}

fn counts(v: Vec<usize>) -> PyResult<LabelCounts> {
    LabelCounts::new(v).map_err(to_py)
}

/// Uniformly random label vector with the given label counts.
#[pyfunction]
fn sample_beta(label_counts: Vec<usize>, seed: u64) -> PyResult<Vec<usize>> {
    Ok(model::sample_beta(&counts(label_counts)?, seed).labels().to_vec())
}

/// Observation matrix as a list of rows (ints, or floats under Gaussian noise).
#[pyfunction]
#[pyo3(signature = (beta, design, d, seed, noise="none", sigma2=None))]
fn observe<'py>(
    py: Python<'py>,
    beta: Vec<usize>,
    design: &PyTestDesign,
    d: usize,
    seed: u64,
    noise: &str,
    sigma2: Option<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let beta = LabelAssignment::new(beta, d).map_err(to_py)?;
    let y = model::observe(&beta, &design.0, &noise_model(noise, sigma2)?, seed).map_err(to_py)?;
    match y {
        ObservationMatrix::Integer(rows) => Ok(rows.into_pyobject(py)?.into_any()),
        ObservationMatrix::Real(rows) => Ok(rows.into_pyobject(py)?.into_any()),
    }
}

/// Exhaustive ML estimate: `(beta_hat, tie_count, log_likelihood)`.
#[pyfunction]
#[pyo3(signature = (y, design, label_counts, tie_seed, noise="none", sigma2=None))]
fn ml_decode(
    y: Vec<Vec<f64>>,
    design: &PyTestDesign,
    label_counts: Vec<usize>,
    tie_seed: u64,
    noise: &str,
    sigma2: Option<f64>,
) -> PyResult<(Vec<usize>, usize, f64)> {
    let noise = noise_model(noise, sigma2)?;
    let y = match noise {
        NoiseModel::Gaussian { .. } => ObservationMatrix::Real(y),
        _ => {
            let ints = y
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|&v| {
                            if v >= 0.0 && v.fract() == 0.0 {
                                Ok(v as usize)
                            } else {
                                Err(PyValueError::new_err(format!("observation {v} is not a count")))
                            }
                        })
                        .collect::<PyResult<Vec<_>>>()
                })
                .collect::<PyResult<Vec<_>>>()?;
            ObservationMatrix::Integer(ints)
        }
    };
    let r = decode::ml_decode(&y, &design.0, &counts(label_counts)?, &noise, tie_seed).map_err(to_py)?;
    Ok((r.beta_hat.labels().to_vec(), r.tie_count, r.log_likelihood))
}

#[pyfunction]
#[pyo3(signature = (design, label_counts, qmax=0))]
fn exact_pe_oracle<'py>(
    py: Python<'py>,
    design: &PyTestDesign,
    label_counts: Vec<usize>,
    qmax: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let r = decode::exact_pe_oracle(&design.0, &counts(label_counts)?, qmax).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
fn noiseless_threshold<'py>(py: Python<'py>, pi: &PyProportions, p: usize) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &bounds::noiseless_threshold(&pi.0, p).map_err(to_py)?)
}

#[pyfunction]
fn f_ratio(pi: &PyProportions, r: usize) -> PyResult<f64> {
    bounds::f_ratio(&pi.0, r).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (pi, p, qmax, eta=0.0))]
fn approx_recovery_threshold<'py>(
    py: Python<'py>,
    pi: &PyProportions,
    p: usize,
    qmax: usize,
    eta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = bounds::approx_recovery_threshold(&pi.0, p, qmax, ApproxVariant::Noiseless { eta }).map_err(to_py)?;
    to_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (pi, p, q, delta=0.0))]
fn bernoulli_noiseless_bound<'py>(
    py: Python<'py>,
    pi: &PyProportions,
    p: usize,
    q: f64,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &bounds::bernoulli_noiseless_bound(&pi.0, p, q, delta).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (pi, p, sigma2, delta=0.0))]
fn gaussian_subset_bound<'py>(
    py: Python<'py>,
    pi: &PyProportions,
    p: usize,
    sigma2: f64,
    delta: f64,
) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &bounds::gaussian_subset_bound(&pi.0, p, sigma2, delta).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (p, sigma2, delta=0.0))]
fn gaussian_single_item_bound<'py>(py: Python<'py>, p: usize, sigma2: f64, delta: f64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &bounds::gaussian_single_item_bound(p, sigma2, delta, None).map_err(to_py)?)
}

/// Per-test information `Σ_t H(Binomial(ℓ_t, q))`, or its Gaussian-noise
/// counterpart when `sigma2` is given (needs `p`).
#[pyfunction]
#[pyo3(signature = (ell, label_counts, q, sigma2=None))]
fn mi_bernoulli(ell: Vec<usize>, label_counts: Vec<usize>, q: f64, sigma2: Option<f64>) -> PyResult<f64> {
    let c = counts(label_counts)?;
    let p = c.p();
    let pattern = pooled_data::infotheory::GeniePattern::new(ell, c).map_err(to_py)?;
    match sigma2 {
        None => bounds::mi_noiseless_bernoulli(&pattern, q),
        Some(s2) => bounds::mi_gaussian_bernoulli(&pattern, q, s2, p),
    }
    .map_err(to_py)
}

#[allow(clippy::too_many_arguments)]
fn config(
    pi: &PyProportions,
    p: usize,
    n: usize,
    q: f64,
    noise: &str,
    sigma2: Option<f64>,
    qmax: usize,
    trials: usize,
    seed: u64,
    design: Option<&PyTestDesign>,
    most_common: bool,
) -> PyResult<ExperimentConfig> {
    let cfg = ExperimentConfig {
        qmax,
        design: design.map_or(DesignMode::Bernoulli, |x| DesignMode::Fixed(x.0.clone())),
        decoder: if most_common { Decoder::MostCommonLabel } else { Decoder::Ml },
        n: design.map_or(n, |x| x.0.n()),
        ..ExperimentConfig::new(pi.0.clone(), p, n, q, noise_model(noise, sigma2)?, trials, seed)
    };
    cfg.validate().map_err(to_py)?;
    Ok(cfg)
}

#[pyfunction]
#[pyo3(signature = (pi, p, n, trials, seed, q=0.5, noise="none", sigma2=None, qmax=0, design=None, most_common=false, threads=0))]
#[allow(clippy::too_many_arguments)]
fn estimate_pe<'py>(
    py: Python<'py>,
    pi: &PyProportions,
    p: usize,
    n: usize,
    trials: usize,
    seed: u64,
    q: f64,
    noise: &str,
    sigma2: Option<f64>,
    qmax: usize,
    design: Option<&PyTestDesign>,
    most_common: bool,
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = config(pi, p, n, q, noise, sigma2, qmax, trials, seed, design, most_common)?;
    let est = py.detach(|| experiments::estimate_pe(&cfg, threads)).map_err(to_py)?;
    to_dict(py, &est)
}

#[pyfunction]
#[pyo3(signature = (pi, p, n_grid, trials, seed, q=0.5, noise="none", sigma2=None, qmax=0, threads=0))]
#[allow(clippy::too_many_arguments)]
fn sweep_n<'py>(
    py: Python<'py>,
    pi: &PyProportions,
    p: usize,
    n_grid: Vec<usize>,
    trials: usize,
    seed: u64,
    q: f64,
    noise: &str,
    sigma2: Option<f64>,
    qmax: usize,
    threads: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let first = n_grid.first().copied().unwrap_or(0);
    let cfg = config(pi, p, first, q, noise, sigma2, qmax, trials, seed, None, false)?;
    let sweep = py.detach(|| experiments::sweep_n(&cfg, &n_grid, threads)).map_err(to_py)?;
    to_dict(py, &sweep)
}

#[pyfunction]
#[pyo3(signature = (d=10, num_random=0, seed=0))]
fn figure1_data<'py>(py: Python<'py>, d: usize, num_random: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &experiments::figure1_data(d, num_random, seed).map_err(to_py)?)
}

#[pymodule]
#[pyo3(name = "pooled_data")]
fn pooled_data_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProportions>()?;
    m.add_class::<PyTestDesign>()?;
    m.add_function(wrap_pyfunction!(sample_beta, m)?)?;
    m.add_function(wrap_pyfunction!(observe, m)?)?;
    m.add_function(wrap_pyfunction!(ml_decode, m)?)?;
    m.add_function(wrap_pyfunction!(exact_pe_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(noiseless_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(f_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(approx_recovery_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(bernoulli_noiseless_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_subset_bound, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_single_item_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mi_bernoulli, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_pe, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_n, m)?)?;
    m.add_function(wrap_pyfunction!(figure1_data, m)?)?;
    Ok(())
}
