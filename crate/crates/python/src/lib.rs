//! Python bindings: configs, training runs, losses, synthetic data and
//! checkpoint / metrics file access.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use smartaug::cli::{cmd_train, load_splits, ExperimentConfig};
use smartaug::data::{gen_synthetic as generate, SyntheticSpec};
use smartaug::engine::{checkpoint, Tensor};
use smartaug::trainer::{
    combined_loss_value, metrics_csv, parse_metrics_csv as parse_csv, run_training, CombinedLossParams, MetricsRecord,
};

fn to_py(e: smartaug::Error) -> PyErr {
    match e {
        smartaug::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn entry_value(v: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(b) = v.extract::<bool>() {
        return Ok(b.to_string());
    }
    Ok(v.str()?.to_string())
}

fn entries(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            out.insert(k.extract::<String>()?, entry_value(&v)?);
        }
    }
    Ok(out)
}

/// One experiment's settings. Keyword arguments use the config-file keys;
/// omitted keys take their defaults.
#[pyclass(name = "ExperimentConfig", module = "smartaug", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (**kwargs))]
    fn new(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let inner = ExperimentConfig::from_entries(&entries(kwargs)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Parses `key = value` config text.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::parse(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: ExperimentConfig::load(&path).map_err(to_py)?,
        })
    }

    fn serialize(&self) -> String {
        self.inner.serialize()
    }

    /// Copy with some keys changed.
    #[pyo3(signature = (**kwargs))]
    fn replace(&self, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut all: BTreeMap<String, String> = self
            .inner
            .serialize()
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        all.extend(entries(kwargs)?);
        Ok(Self {
            inner: ExperimentConfig::from_entries(&all).map_err(to_py)?,
        })
    }

    #[getter]
    fn exp_id(&self) -> u32 {
        self.inner.exp_id
    }

    #[getter]
    fn num_net_a(&self) -> usize {
        self.inner.num_net_a
    }

    #[getter]
    fn a_channels(&self) -> usize {
        self.inner.a_channels
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn learning_rate(&self) -> f64 {
        self.inner.learning_rate
    }

    #[getter]
    fn momentum(&self) -> f64 {
        self.inner.momentum
    }

    #[getter]
    fn epochs(&self) -> usize {
        self.inner.epochs
    }

    #[getter]
    fn batch_size(&self) -> usize {
        self.inner.batch_size
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(exp_id={}, num_net_a={}, epochs={}, seed={})",
            self.inner.exp_id, self.inner.num_net_a, self.inner.epochs, self.inner.seed
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.inner == other.inner
    }
}

fn record_dict<'py>(py: Python<'py>, r: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("epoch", r.epoch)?;
    d.set_item("train_loss_total", r.train_loss_total)?;
    d.set_item("train_loss_a", r.train_loss_a)?;
    d.set_item("train_loss_b", r.train_loss_b)?;
    d.set_item("val_loss_b", r.val_loss_b)?;
    d.set_item("val_accuracy", r.val_accuracy)?;
    d.set_item("test_accuracy_at_best", r.test_accuracy_at_best)?;
    Ok(d)
}

/// Outcome of [`train`].
#[pyclass(name = "TrainResult", module = "smartaug", frozen)]
struct PyTrainResult {
    metrics: Vec<MetricsRecord>,
    #[pyo3(get)]
    test_accuracy: f64,
    #[pyo3(get)]
    test_loss: f64,
    #[pyo3(get)]
    best_epoch: Option<usize>,
    #[pyo3(get)]
    best_validation_loss: f64,
    #[pyo3(get)]
    eval_a_forward_passes: usize,
}

#[pymethods]
impl PyTrainResult {
    /// Per-epoch records as dicts.
    #[getter]
    fn metrics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let items = self.metrics.iter().map(|r| record_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, items)
    }

    /// The run's metrics as CSV text, ending with the test accuracy line.
    fn metrics_csv(&self) -> String {
        metrics_csv(&self.metrics, Some(self.test_accuracy))
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainResult(epochs={}, best_epoch={}, test_accuracy={})",
            self.metrics.len(),
            self.best_epoch.map_or("None".to_string(), |e| e.to_string()),
            self.test_accuracy
        )
    }
}

/// Trains the configured experiment in memory.
#[pyfunction]
fn train(py: Python<'_>, config: PyConfig) -> PyResult<PyTrainResult> {
    let state = py
        .detach(|| {
            let splits = load_splits(&config.inner)?;
            run_training(&config.inner, &splits, &mut |_| {})
        })
        .map_err(to_py)?;
    Ok(PyTrainResult {
        metrics: state.metrics,
        test_accuracy: state.test_accuracy,
        test_loss: state.test_loss,
        best_epoch: state.best_epoch,
        best_validation_loss: state.best_validation_loss,
        eval_a_forward_passes: state.eval_a_forward_passes,
    })
}

/// Trains and writes the run directory under `out`; returns its path.
#[pyfunction]
fn train_to_dir(py: Python<'_>, config: PyConfig, out: PathBuf) -> PyResult<PathBuf> {
    let manifest = py.detach(|| cmd_train(&config.inner, &out)).map_err(to_py)?;
    Ok(manifest.run_dir)
}

/// `alpha * loss_a + beta * loss_b`, with the library's input checks.
#[pyfunction]
fn combined_loss(loss_a: f64, loss_b: f64, alpha: f64, beta: f64) -> PyResult<f64> {
    let p = CombinedLossParams::new(alpha, beta).map_err(to_py)?;
    combined_loss_value(loss_a, loss_b, &p).map_err(to_py)
}

/// Rectangles (label 0) vs discs (label 1), interleaved. Returns
/// `(images, labels, (channels, height, width))` with each image flattened.
#[pyfunction]
#[pyo3(signature = (n_per_class, height=32, width=32, seed=0, noise_std=0.15))]
fn gen_synthetic(
    n_per_class: usize,
    height: usize,
    width: usize,
    seed: u64,
    noise_std: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>, (usize, usize, usize))> {
    let spec = SyntheticSpec {
        noise_std,
        ..SyntheticSpec::new(height, width)
    };
    let ds = generate(n_per_class, &spec, seed).map_err(to_py)?;
    let shape = ds.shape();
    let images = ds.samples().iter().map(|s| s.image.data().to_vec()).collect();
    Ok((images, ds.labels(), (shape.channels, shape.height, shape.width)))
}

/// Parses metrics CSV text into `(records, test_accuracy)`.
#[pyfunction]
fn parse_metrics_csv<'py>(py: Python<'py>, text: &str) -> PyResult<(Bound<'py, PyList>, Option<f64>)> {
    let (records, acc) = parse_csv(text).map_err(to_py)?;
    let items = records.iter().map(|r| record_dict(py, r)).collect::<PyResult<Vec<_>>>()?;
    Ok((PyList::new(py, items)?, acc))
}

/// `{name: (shape, flat_values)}` from a `.saug` checkpoint.
#[pyfunction]
fn load_checkpoint(path: PathBuf) -> PyResult<BTreeMap<String, (Vec<usize>, Vec<f64>)>> {
    let entries = checkpoint::load(&path).map_err(to_py)?;
    Ok(entries
        .into_iter()
        .map(|(name, t)| (name, (t.shape().to_vec(), t.into_data())))
        .collect())
}

#[pyfunction]
fn save_checkpoint(path: PathBuf, entries: BTreeMap<String, (Vec<usize>, Vec<f64>)>) -> PyResult<()> {
    let named = entries
        .into_iter()
        .map(|(name, (shape, data))| Ok((name, Tensor::new(shape, data).map_err(to_py)?)))
        .collect::<PyResult<Vec<_>>>()?;
    checkpoint::save(&path, &named).map_err(to_py)
}

#[pymodule(name = "smartaug")]
fn smartaug_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(train_to_dir, m)?)?;
    m.add_function(wrap_pyfunction!(combined_loss, m)?)?;
    m.add_function(wrap_pyfunction!(gen_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(parse_metrics_csv, m)?)?;
    m.add_function(wrap_pyfunction!(load_checkpoint, m)?)?;
    m.add_function(wrap_pyfunction!(save_checkpoint, m)?)?;
    Ok(())
}
