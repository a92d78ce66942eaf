//! Python bindings: the series data model, statistical features, the
//! quantizer, trained-model inference, and the config-driven experiment
//! runner. Build the cdylib and rename/copy it to `tsforge.so` (see
//! python/smoke_test.py, which does this automatically).

use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use tsforge::backbone::{Backbone, Checkpoint};
use tsforge::evalkit::{evaluate_series, BackbonePredictor, Persistence, RowKey};
use tsforge::mat::Mat;
use tsforge::prompt::{
    extract_features, feature_value, fit_standardizer, standardize_versioned, FeatureCatalog,
    FeatureParams, PromptMatrix,
};
use tsforge::series::{
    chronological_split, downsample, load_csv, make_windows, CsvOptions, SplitSpec, TimeSeries,
    Window,
};
use tsforge::synth::{gen_series, to_csv, PatternFamily, SynthSpec};
use tsforge::tokenizer::{fit_quantizer, Quantizer};

type Rows = Vec<Vec<f64>>;

fn py_err(e: tsforge::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn rows_to_mat(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    Mat::from_rows(&rows).map_err(py_err)
}

/// A named multivariate series.
#[pyclass(name = "TimeSeries", skip_from_py_object)]
#[derive(Clone)]
struct PyTimeSeries {
    inner: TimeSeries,
}

#[pymethods]
impl PyTimeSeries {
    /// Load a CSV file (header row required; a leading date column is kept
    /// as metadata).
    #[staticmethod]
    #[pyo3(signature = (path, name=None, frequency=None))]
    fn load_csv(path: PathBuf, name: Option<String>, frequency: Option<String>) -> PyResult<Self> {
        let inner = load_csv(path, &CsvOptions { name, frequency }).map_err(py_err)?;
        Ok(PyTimeSeries { inner })
    }

    /// Generate a deterministic synthetic series
    /// (family: sine_mixture | trend_seasonal | ar1).
    #[staticmethod]
    #[pyo3(signature = (family="sine_mixture", length=2000, channels=1, seed=0, scale=1.0, noise=0.1, ar_coeff=0.8))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        family: &str,
        length: usize,
        channels: usize,
        seed: u64,
        scale: f64,
        noise: f64,
        ar_coeff: f64,
    ) -> PyResult<Self> {
        let spec = SynthSpec {
            family: family.parse::<PatternFamily>().map_err(py_err)?,
            length,
            channels,
            seed,
            scale,
            noise_std: noise,
            ar_coeff,
        };
        Ok(PyTimeSeries {
            inner: gen_series(&spec).map_err(py_err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn frequency(&self) -> String {
        self.inner.frequency.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dims(&self) -> usize {
        self.inner.dims()
    }

    #[getter]
    fn variate_names(&self) -> Vec<String> {
        self.inner.variate_names().to_vec()
    }

    /// Row-major values, one inner list per timestamp.
    fn values(&self) -> Vec<Vec<f64>> {
        mat_to_rows(self.inner.values())
    }

    fn column(&self, idx: usize) -> PyResult<Vec<f64>> {
        if idx >= self.inner.dims() {
            return Err(PyValueError::new_err(format!("column {idx} out of range")));
        }
        Ok(self.inner.values().column(idx))
    }

    /// Chronological split into (train, val, test).
    #[pyo3(signature = (train=0.7, val=0.1, test=0.2))]
    fn split(&self, train: f64, val: f64, test: f64) -> PyResult<(Self, Self, Self)> {
        let spec = SplitSpec::new(train, val, test).map_err(py_err)?;
        let (a, b, c) = chronological_split(&self.inner, &spec).map_err(py_err)?;
        Ok((
            PyTimeSeries { inner: a },
            PyTimeSeries { inner: b },
            PyTimeSeries { inner: c },
        ))
    }

    /// Keep every rate-th row starting at index 0.
    fn downsample(&self, rate: usize) -> PyResult<Self> {
        Ok(PyTimeSeries {
            inner: downsample(&self.inner, rate).map_err(py_err)?,
        })
    }

    /// Number of dense windows for the given geometry.
    #[pyo3(signature = (lookback, horizon, stride=1))]
    fn window_count(&self, lookback: usize, horizon: usize, stride: usize) -> PyResult<usize> {
        Ok(make_windows(&self.inner, lookback, horizon, stride)
            .map_err(py_err)?
            .len())
    }

    /// Write the series as a loadable CSV fixture.
    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(path, to_csv(&self.inner)).map_err(|e| py_err(e.into()))
    }

    fn __repr__(&self) -> String {
        format!(
            "TimeSeries(name='{}', len={}, dims={})",
            self.inner.name,
            self.inner.len(),
            self.inner.dims()
        )
    }
}

/// Scale-and-bin tokenizer with exact inverse to bin centers.
#[pyclass(name = "Quantizer", skip_from_py_object)]
#[derive(Clone)]
struct PyQuantizer {
    inner: Quantizer,
}

#[pymethods]
impl PyQuantizer {
    #[staticmethod]
    #[pyo3(signature = (values, num_bins=256, clip_q=0.01))]
    fn fit(values: Vec<f64>, num_bins: usize, clip_q: f64) -> PyResult<Self> {
        Ok(PyQuantizer {
            inner: fit_quantizer(&values, num_bins, clip_q).map_err(py_err)?,
        })
    }

    #[getter]
    fn num_bins(&self) -> usize {
        self.inner.num_bins
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    #[getter]
    fn bin_edges(&self) -> Vec<f64> {
        self.inner.bin_edges.clone()
    }

    fn quantize(&self, values: Vec<f64>) -> Vec<usize> {
        self.inner.quantize(&values)
    }

    fn dequantize(&self, ids: Vec<usize>) -> PyResult<Vec<f64>> {
        self.inner.dequantize(&ids).map_err(py_err)
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        Ok(PyQuantizer {
            inner: Quantizer::from_json(json).map_err(py_err)?,
        })
    }
}

/// A trained transformer loaded from a checkpoint, plus the prompt block it
/// was trained with.
#[pyclass(name = "Forecaster")]
struct PyForecaster {
    model: Backbone,
}

#[pymethods]
impl PyForecaster {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ckpt = Checkpoint::read(path).map_err(py_err)?;
        Ok(PyForecaster {
            model: Backbone::load(&ckpt).map_err(py_err)?,
        })
    }

    #[getter]
    fn lookback(&self) -> usize {
        self.model.config().lookback
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.model.config().horizon
    }

    #[getter]
    fn prompt_rows(&self) -> usize {
        self.model.config().prompt_rows
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.model.total_param_count()
    }

    #[getter]
    fn payload_hash(&self) -> String {
        self.model.payload_hash()
    }

    /// Predict `horizon` rows from a lookback block (rows x channels),
    /// optionally prepending a prompt matrix (prompt_rows x channels).
    #[pyo3(signature = (lookback, prompt=None))]
    fn predict(
        &self,
        lookback: Vec<Vec<f64>>,
        prompt: Option<Vec<Vec<f64>>>,
    ) -> PyResult<Vec<Vec<f64>>> {
        let lookback = rows_to_mat(lookback)?;
        let prompt = match prompt {
            Some(rows) => PromptMatrix {
                features: rows_to_mat(rows)?,
                catalog_version: "py".into(),
            },
            None => {
                if self.model.config().prompt_rows == 0 {
                    PromptMatrix::empty()
                } else {
                    return Err(PyValueError::new_err(format!(
                        "model expects {} prompt rows",
                        self.model.config().prompt_rows
                    )));
                }
            }
        };
        let input = tsforge::prompt::assemble_input(&prompt, &lookback).map_err(py_err)?;
        Ok(mat_to_rows(&self.model.forward(&input).map_err(py_err)?))
    }

    /// Flat (mse, mae) of this model over every dense test window of a
    /// series, assembling inputs with the given prompt.
    #[pyo3(signature = (test, prompt=None))]
    fn evaluate(&self, test: &PyTimeSeries, prompt: Option<Vec<Vec<f64>>>) -> PyResult<(f64, f64)> {
        let prompt = match prompt {
            Some(rows) => PromptMatrix {
                features: rows_to_mat(rows)?,
                catalog_version: "py".into(),
            },
            None => PromptMatrix::empty(),
        };
        let pred = BackbonePredictor {
            model: &self.model,
            prompt,
        };
        evaluate_series(&pred, &test.inner).map_err(py_err)
    }
}

/// One statistical feature of a 1-D series by catalog name.
#[pyfunction]
#[pyo3(signature = (name, values, lag=None, bins=None))]
fn feature(name: &str, values: Vec<f64>, lag: Option<usize>, bins: Option<usize>) -> PyResult<f64> {
    feature_value(name, &values, &FeatureParams { lag, bins }).map_err(py_err)
}

/// Names of the default feature catalog, in prompt order.
#[pyfunction]
#[pyo3(signature = (slots=None))]
fn catalog_names(slots: Option<usize>) -> PyResult<Vec<String>> {
    let catalog = match slots {
        Some(s) => FeatureCatalog::padded(s).map_err(py_err)?,
        None => FeatureCatalog::standard(),
    };
    Ok(catalog.names().into_iter().map(String::from).collect())
}

/// Standardized prompt matrix of a series (features of each variate,
/// standardized against this series' own pooled population).
#[pyfunction]
#[pyo3(signature = (ts, slots=None))]
fn prompt_matrix(ts: &PyTimeSeries, slots: Option<usize>) -> PyResult<Vec<Vec<f64>>> {
    let catalog = match slots {
        Some(s) => FeatureCatalog::padded(s).map_err(py_err)?,
        None => FeatureCatalog::standard(),
    };
    let raw = extract_features(&ts.inner, &catalog).map_err(py_err)?;
    let stats = fit_standardizer(&[&raw]).map_err(py_err)?;
    let prompt = standardize_versioned(&raw, &stats, catalog.version()).map_err(py_err)?;
    Ok(mat_to_rows(&prompt.features))
}

#[pyfunction]
fn mse(pred: Vec<Vec<f64>>, target: Vec<Vec<f64>>) -> PyResult<f64> {
    tsforge::trainer::mse_loss(&rows_to_mat(pred)?, &rows_to_mat(target)?).map_err(py_err)
}

#[pyfunction]
fn mae(pred: Vec<Vec<f64>>, target: Vec<Vec<f64>>) -> PyResult<f64> {
    tsforge::evalkit::mae(&rows_to_mat(pred)?, &rows_to_mat(target)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (step, total_steps, base, floor=0.0))]
fn cosine_lr(step: usize, total_steps: usize, base: f64, floor: f64) -> PyResult<f64> {
    tsforge::trainer::cosine_lr(step, total_steps, base, floor).map_err(py_err)
}

/// Persistence-baseline (mse, mae) over every dense test window.
#[pyfunction]
fn persistence_metrics(
    test: &PyTimeSeries,
    lookback: usize,
    horizon: usize,
) -> PyResult<(f64, f64)> {
    let pred = Persistence {
        lookback_len: lookback,
        horizon,
    };
    evaluate_series(&pred, &test.inner).map_err(py_err)
}

/// The true target of the first dense window (handy for smoke checks).
#[pyfunction]
fn first_window_target(
    ts: &PyTimeSeries,
    lookback: usize,
    horizon: usize,
) -> PyResult<(Rows, Rows)> {
    let windows = make_windows(&ts.inner, lookback, horizon, 1).map_err(py_err)?;
    let Window {
        lookback, target, ..
    } = windows.into_iter().next().expect("nonempty");
    Ok((mat_to_rows(&lookback), mat_to_rows(&target)))
}

/// Run a full experiment from a TOML config. Returns a dict with the output
/// directory, the method label, and every result row.
#[pyfunction]
#[pyo3(signature = (config_path, seed=None, out=None, jobs=1))]
fn run_experiment<'py>(
    py: Python<'py>,
    config_path: PathBuf,
    seed: Option<u64>,
    out: Option<PathBuf>,
    jobs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let summary = tsforge::runner::run_from_path(&config_path, seed, out, jobs).map_err(py_err)?;
    let dict = PyDict::new(py);
    dict.set_item("out_dir", summary.out_dir.display().to_string())?;
    dict.set_item("results_csv", summary.results_csv.display().to_string())?;
    dict.set_item("method", &summary.method_label)?;
    let rows = PyList::empty(py);
    for dataset in summary.table.datasets() {
        for method in summary.table.methods() {
            let mut keys: Vec<(String, RowKey)> = summary
                .table
                .horizons()
                .iter()
                .map(|&h| (h.to_string(), RowKey::Horizon(h)))
                .collect();
            keys.push(("avg".into(), RowKey::Avg));
            for (label, key) in keys {
                if let Some((mse, mae)) = summary.table.get(dataset, key, method) {
                    let row = PyDict::new(py);
                    row.set_item("dataset", dataset)?;
                    row.set_item("horizon", label)?;
                    row.set_item("method", method)?;
                    row.set_item("mse", mse)?;
                    row.set_item("mae", mae)?;
                    rows.append(row)?;
                }
            }
        }
    }
    dict.set_item("rows", rows)?;
    Ok(dict)
}

#[pymodule]
#[pyo3(name = "tsforge")]
fn tsforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTimeSeries>()?;
    m.add_class::<PyQuantizer>()?;
    m.add_class::<PyForecaster>()?;
    m.add_function(wrap_pyfunction!(feature, m)?)?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mse, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_lr, m)?)?;
    m.add_function(wrap_pyfunction!(persistence_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(first_window_target, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
