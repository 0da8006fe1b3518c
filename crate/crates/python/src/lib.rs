//! Python bindings: featurizer, models, metered endpoints, the attack
//! pipeline, and the experiment runner.

use std::str::FromStr;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use rust_decimal::Decimal;

use imitlab::analysis::{self, CostRatio};
use imitlab::attacker::{self, HarvestResult, Strategy};
use imitlab::data::{self, FeatureVector, FeaturizerConfig, LabeledDataset};
use imitlab::harness::{run_experiment, ExperimentConfig};
use imitlab::models::{self, Architecture, LabelMode, TrainConfig};
use imitlab::victim::{self, DefensePolicy};

fn err(e: imitlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn vectors(rows: Vec<Vec<f64>>) -> PyResult<Vec<FeatureVector>> {
    rows.into_iter().map(|r| FeatureVector::new(r).map_err(err)).collect()
}

fn arch(kind: &str, hidden_dim: usize) -> PyResult<Architecture> {
    match kind {
        "linear" => Ok(Architecture::Linear),
        "mlp" if hidden_dim > 0 => Ok(Architecture::Mlp { hidden_dim }),
        "mlp" => Err(PyValueError::new_err("mlp needs hidden_dim > 0")),
        other => Err(PyValueError::new_err(format!("unknown model kind {other:?}"))),
    }
}

fn label_mode(s: &str) -> PyResult<LabelMode> {
    match s {
        "soft" => Ok(LabelMode::Soft),
        "hard" => Ok(LabelMode::Hard),
        other => Err(PyValueError::new_err(format!("unknown label mode {other:?}"))),
    }
}

fn decimal(s: &str) -> PyResult<Decimal> {
    Decimal::from_str(s).map_err(|e| PyValueError::new_err(format!("{s:?}: {e}")))
}

#[pyfunction]
#[pyo3(signature = (text, dim = 1024, lowercase = true))]
fn featurize(text: &str, dim: usize, lowercase: bool) -> PyResult<Vec<f64>> {
    data::featurize(text, &FeaturizerConfig { dim, lowercase })
        .map(FeatureVector::into_values)
        .map_err(err)
}

#[pyfunction]
fn fnv1a_64(token: &str) -> u64 {
    data::fnv1a_64(token)
}

/// Half-L1 distance between two distributions over the same cells.
#[pyfunction]
fn tv_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    analysis::tv_distance(&p, &q).map_err(err)
}

/// Prices are decimal strings; the result mirrors the JSON cost report.
#[pyfunction]
fn cost_report<'py>(py: Python<'py>, n_queries: u64, price: &str, human_price: &str) -> PyResult<Bound<'py, PyDict>> {
    let r = analysis::cost_report(n_queries, decimal(price)?, decimal(human_price)?).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n_queries", r.n_queries)?;
    d.set_item("api_cost", r.api_cost.to_string())?;
    d.set_item("human_cost", r.human_cost.to_string())?;
    match r.ratio {
        CostRatio::Finite(x) => d.set_item("ratio", x.to_string())?,
        CostRatio::Infinite => d.set_item("ratio", "inf")?,
    }
    Ok(d)
}

/// Run a TOML experiment config and return the report as JSON text.
#[pyfunction]
fn run_experiment_toml(config: &str) -> PyResult<String> {
    let cfg = ExperimentConfig::from_toml_str(config).map_err(err)?;
    run_experiment(&cfg).and_then(|r| r.to_json()).map_err(err)
}

#[pyclass(name = "Model", module = "imitlab_py", frozen)]
struct PyModel {
    inner: models::Model,
}

#[pymethods]
impl PyModel {
    /// Train on one-hot oracle labels.
    #[staticmethod]
    #[pyo3(signature = (inputs, labels, num_classes, kind = "linear", hidden_dim = 0, learning_rate = 0.1, batch_size = 32, epochs = 50, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        inputs: Vec<Vec<f64>>,
        labels: Vec<usize>,
        num_classes: usize,
        kind: &str,
        hidden_dim: usize,
        learning_rate: f64,
        batch_size: usize,
        epochs: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let xs = vectors(inputs)?;
        let dim = xs.first().map(FeatureVector::dim).unwrap_or(0);
        let ds = LabeledDataset::new(xs, labels, dim, num_classes, "train").map_err(err)?;
        let cfg = TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            seed,
            label_mode: LabelMode::Hard,
        };
        let inner = models::train(arch(kind, hidden_dim)?, dim, num_classes, ds.inputs(), &ds.one_hot_targets(), &cfg)
            .map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_bytes(data: &[u8]) -> PyResult<Self> {
        models::deserialize_model(data)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &models::serialize_model(&self.inner))
    }

    /// `(probs, argmax)`
    fn predict(&self, x: Vec<f64>) -> PyResult<(Vec<f64>, usize)> {
        let p = self.inner.predict(&FeatureVector::new(x).map_err(err)?).map_err(err)?;
        Ok((p.probs, p.hard))
    }

    fn accuracy(&self, inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<f64> {
        let ds = LabeledDataset::new(vectors(inputs)?, labels, self.inner.input_dim(), self.inner.num_classes(), "eval")
            .map_err(err)?;
        models::accuracy(&self.inner, &ds).map_err(err)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.arch().name()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={:?}, input_dim={}, num_classes={})",
            self.inner.arch().name(),
            self.inner.input_dim(),
            self.inner.num_classes()
        )
    }
}

/// A metered endpoint. Parameters of the wrapped model are not reachable from it.
#[pyclass(name = "VictimEndpoint", module = "imitlab_py")]
struct PyEndpoint {
    inner: victim::VictimEndpoint,
}

#[pymethods]
impl PyEndpoint {
    #[new]
    #[pyo3(signature = (model, defense = "none", sigma = 0.0, price_per_query = "0", seed = 0, name = "victim", max_resamples = 100))]
    fn new(
        model: &PyModel,
        defense: &str,
        sigma: f64,
        price_per_query: &str,
        seed: u64,
        name: &str,
        max_resamples: u32,
    ) -> PyResult<Self> {
        let policy = match defense {
            "none" => DefensePolicy::none(),
            "hard_label" => DefensePolicy::hard_label(),
            "gaussian" => DefensePolicy::gaussian(sigma),
            "gaussian_label_preserving" => DefensePolicy::gaussian_label_preserving(sigma, max_resamples),
            other => return Err(PyValueError::new_err(format!("unknown defense {other:?}"))),
        };
        let inner = victim::VictimEndpoint::new(name, model.inner.clone(), policy, decimal(price_per_query)?, seed)
            .map_err(err)?;
        Ok(Self { inner })
    }

    fn query(&mut self, x: Vec<f64>) -> PyResult<(Vec<f64>, usize)> {
        let r = self.inner.query(&FeatureVector::new(x).map_err(err)?).map_err(err)?;
        Ok((r.probs, r.hard))
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn query_count(&self) -> u64 {
        self.inner.usage().query_count
    }

    /// Decimal string.
    #[getter]
    fn total_cost(&self) -> String {
        self.inner.usage().total_cost.to_string()
    }

    #[getter]
    fn mean_distortion(&self) -> f64 {
        self.inner.mean_distortion()
    }
}

/// Query every endpoint on every input, assemble the imitation set, and train.
#[pyfunction]
#[pyo3(signature = (endpoints, inputs, strategy = "concat", label_mode = "soft", kind = "linear", hidden_dim = 0, learning_rate = 0.1, batch_size = 32, epochs = 50, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn imitate(
    endpoints: Vec<PyRefMut<'_, PyEndpoint>>,
    inputs: Vec<Vec<f64>>,
    strategy: &str,
    label_mode: &str,
    kind: &str,
    hidden_dim: usize,
    learning_rate: f64,
    batch_size: usize,
    epochs: usize,
    seed: u64,
) -> PyResult<PyModel> {
    let xs = vectors(inputs)?;
    let strategy = Strategy::from_str(strategy).map_err(err)?;
    let mode = self::label_mode(label_mode)?;
    let mut endpoints = endpoints;
    for e in endpoints.iter() {
        for x in &xs {
            e.inner.check_input(x).map_err(err)?;
        }
    }
    let mut responses = Vec::with_capacity(endpoints.len());
    let mut ids = Vec::with_capacity(endpoints.len());
    for e in endpoints.iter_mut() {
        responses.push(e.inner.query_batch(&xs).map_err(err)?);
        ids.push(e.inner.name().to_string());
    }
    let h = HarvestResult::new(xs, responses, ids).map_err(err)?;
    let ds = attacker::assemble(&h, strategy, mode).map_err(err)?;
    let cfg = TrainConfig {
        learning_rate,
        batch_size,
        epochs,
        seed,
        label_mode: mode,
    };
    attacker::imitate(&ds, arch(kind, hidden_dim)?, &cfg)
        .map(|inner| PyModel { inner })
        .map_err(err)
}

#[pymodule]
pub fn imitlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyEndpoint>()?;
    m.add_function(wrap_pyfunction!(featurize, m)?)?;
    m.add_function(wrap_pyfunction!(fnv1a_64, m)?)?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(cost_report, m)?)?;
    m.add_function(wrap_pyfunction!(imitate, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment_toml, m)?)?;
    Ok(())
}
