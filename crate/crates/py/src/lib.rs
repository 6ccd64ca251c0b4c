//! Python bindings. Contexts are lists of rows, messages are lists of floats,
//! and functions are selector indices (`argmax_d -> d`, `argmin_d -> n_dims + d`).

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use fgame::agents::{evaluate_accuracy, train_model, Message, SignalingModel, TrainConfig};
use fgame::analysis::{cp_sweep_averaged, default_t_grid, Clustering};
use fgame::experiment::{analyze_model, Analyses, AnalysisSettings, ExperimentPlan};
use fgame::game::{self as g, Context, FunctionSpec, Sharing, Strictness};
use fgame::seed::{stream_rng, Stream};
use fgame::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Output { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn context(rows: Vec<Vec<f64>>) -> PyResult<Context> {
    Context::from_rows(&rows).map_err(to_py)
}

#[pyclass(name = "GameConfig", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGameConfig {
    inner: g::GameConfig,
}

#[pymethods]
impl PyGameConfig {
    #[new]
    #[pyo3(signature = (strict=true, shared=true, n_objects=10))]
    fn new(strict: bool, shared: bool, n_objects: usize) -> PyResult<Self> {
        let strictness = if strict {
            Strictness::Strict
        } else {
            Strictness::NonStrict
        };
        let sharing = if shared { Sharing::Shared } else { Sharing::NonShared };
        let inner = g::GameConfig::extremity(strictness, sharing, n_objects);
        inner.validate().map_err(to_py)?;
        Ok(PyGameConfig { inner })
    }

    #[getter]
    fn n_dims(&self) -> usize {
        self.inner.n_dims
    }

    #[getter]
    fn n_objects(&self) -> usize {
        self.inner.n_objects
    }

    #[getter]
    fn n_functions(&self) -> usize {
        self.inner.n_functions()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    /// Sender context drawn from `seed`, as a list of rows.
    fn sample_context(&self, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let mut rng = stream_rng(seed, Stream::Eval);
        Ok(g::sample_context(&self.inner, &mut rng).map_err(to_py)?.rows())
    }

    /// Receiver context for `context`: a shuffle when shared, a fresh draw otherwise.
    fn receiver_context(&self, context_rows: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let c = context(context_rows)?;
        let mut rng = stream_rng(seed, Stream::Eval);
        Ok(g::make_receiver_context(&c, &self.inner, &mut rng)
            .map_err(to_py)?
            .rows())
    }

    fn __repr__(&self) -> String {
        format!("GameConfig('{}')", self.inner.label())
    }
}

/// Sender and receiver pair, with the training config that produced it.
#[pyclass(name = "Model")]
struct PyModel {
    model: SignalingModel,
    train: TrainConfig,
    loss_history: Vec<f64>,
}

#[pymethods]
impl PyModel {
    /// Untrained model with the initialization used for `seed`.
    #[staticmethod]
    fn init(game: PyGameConfig, seed: u64) -> PyResult<Self> {
        Ok(PyModel {
            model: SignalingModel::init_for_seed(game.inner, seed).map_err(to_py)?,
            train: TrainConfig {
                seed,
                steps: 0,
                ..TrainConfig::default()
            },
            loss_history: Vec::new(),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (model, train) = fgame::checkpoint::load(&path).map_err(to_py)?;
        Ok(PyModel {
            model,
            train,
            loss_history: Vec::new(),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        fgame::checkpoint::save(&path, &self.model, &self.train).map_err(to_py)
    }

    #[getter]
    fn game(&self) -> PyGameConfig {
        PyGameConfig {
            inner: *self.model.game(),
        }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Per-step training loss of the last `train` call on this object.
    #[getter]
    fn loss_history(&self) -> Vec<f64> {
        self.loss_history.clone()
    }

    fn message(&self, context_rows: Vec<Vec<f64>>, function: usize) -> PyResult<Vec<f64>> {
        let c = context(context_rows)?;
        let f = FunctionSpec::from_selector(function, self.model.game().n_dims).map_err(to_py)?;
        Ok(self.model.sender_forward(&c, f).map_err(to_py)?.0)
    }

    /// Receiver output (a feature vector) for `message` against `context`.
    fn decode(&self, message: Vec<f64>, context_rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let c = context(context_rows)?;
        self.model.receiver_forward(&Message(message), &c).map_err(to_py)
    }

    fn recovers(&self, message: Vec<f64>, context_rows: Vec<Vec<f64>>, function: usize) -> PyResult<bool> {
        let c = context(context_rows)?;
        let f = FunctionSpec::from_selector(function, self.model.game().n_dims).map_err(to_py)?;
        self.model.recovers(&Message(message), &c, f).map_err(to_py)
    }

    /// Recovery accuracy over every function on `n_contexts` fresh contexts.
    #[pyo3(signature = (n_contexts=100, seed=None))]
    fn accuracy(&self, py: Python<'_>, n_contexts: usize, seed: Option<u64>) -> PyResult<f64> {
        let seed = seed.unwrap_or(self.train.seed);
        py.detach(|| evaluate_accuracy(&self.model, n_contexts, &mut stream_rng(seed, Stream::Eval)))
            .map_err(to_py)
    }

    /// Every probe at its default settings. Returns a dict.
    #[pyo3(signature = (seed=None, n_contexts=100))]
    fn analyze<'py>(&self, py: Python<'py>, seed: Option<u64>, n_contexts: usize) -> PyResult<Bound<'py, PyAny>> {
        let seed = seed.unwrap_or(self.train.seed);
        let settings = AnalysisSettings {
            n_contexts,
            ..AnalysisSettings::default()
        };
        let result = py
            .detach(|| analyze_model(&self.model, seed, &settings, &Analyses::default()))
            .map_err(to_py)?;
        json_to_py(py, &serde_json::to_string(&result).map_err(|e| to_py(e.into()))?)
    }

    /// Categorical-perception sweep averaged over `n_draws` function pairs.
    #[pyo3(signature = (seed=None, n_draws=10, n_contexts=100))]
    fn cp_sweep<'py>(
        &self,
        py: Python<'py>,
        seed: Option<u64>,
        n_draws: usize,
        n_contexts: usize,
    ) -> PyResult<Bound<'py, PyAny>> {
        let seed = seed.unwrap_or(self.train.seed);
        let cp = py
            .detach(|| {
                cp_sweep_averaged(
                    &self.model,
                    &default_t_grid(),
                    n_draws,
                    n_contexts,
                    &mut stream_rng(seed, Stream::CategoricalPerception),
                )
            })
            .map_err(to_py)?;
        let value = serde_json::json!({
            "t": cp.mean.t,
            "acc_f_minus": cp.mean.acc_f_minus,
            "acc_f_plus": cp.mean.acc_f_plus,
            "crossing_fraction": cp.crossing_fraction(),
        });
        json_to_py(py, &value.to_string())
    }

    fn __repr__(&self) -> String {
        format!("Model('{}', seed={})", self.model.game().label(), self.train.seed)
    }
}

/// Trains a fresh model for `game`.
#[pyfunction]
#[pyo3(signature = (game, seed=0, steps=5000, batch_size=64, learning_rate=1e-3))]
fn train(
    py: Python<'_>,
    game: PyGameConfig,
    seed: u64,
    steps: usize,
    batch_size: usize,
    learning_rate: f64,
) -> PyResult<PyModel> {
    let cfg = TrainConfig {
        seed,
        steps,
        batch_size,
        learning_rate,
        ..TrainConfig::default()
    };
    let trained = py
        .detach(|| {
            let model = SignalingModel::init_for_seed(game.inner, seed)?;
            train_model(model, cfg)
        })
        .map_err(to_py)?;
    Ok(PyModel {
        model: trained.model,
        train: trained.train,
        loss_history: trained.loss_history,
    })
}

/// Index of the object selected by `function`; ties go to the lowest index.
#[pyfunction]
fn apply_function(function: usize, context_rows: Vec<Vec<f64>>) -> PyResult<usize> {
    let c = context(context_rows)?;
    let f = FunctionSpec::from_selector(function, c.n_dims()).map_err(to_py)?;
    g::apply_function(f, &c).map_err(to_py)
}

#[pyfunction]
fn is_strict(context_rows: Vec<Vec<f64>>) -> PyResult<bool> {
    Ok(g::is_strict(&context(context_rows)?))
}

/// Cluster index per point, `None` for noise.
#[pyfunction]
#[pyo3(signature = (points, eps=0.5, min_pts=5))]
fn dbscan(points: Vec<Vec<f64>>, eps: f64, min_pts: usize) -> PyResult<Vec<Option<usize>>> {
    Ok(fgame::analysis::dbscan(&points, eps, min_pts)
        .map_err(to_py)?
        .assignment()
        .to_vec())
}

#[pyfunction]
fn cluster_f1(assignment: Vec<Option<usize>>, labels: Vec<usize>, n_classes: usize) -> PyResult<f64> {
    fgame::analysis::cluster_f1(&Clustering::from_assignment(assignment), &labels, n_classes).map_err(to_py)
}

/// Runs a JSON experiment plan into `out` and returns the per-trial reports.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, plan_json: &str, out: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let plan = ExperimentPlan::from_json(plan_json).map_err(to_py)?;
    let reports = py.detach(|| fgame::experiment::run(&plan, &out)).map_err(to_py)?;
    json_to_py(py, &serde_json::to_string(&reports).map_err(|e| to_py(e.into()))?)
}

#[pymodule]
fn fgame_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGameConfig>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(apply_function, m)?)?;
    m.add_function(wrap_pyfunction!(is_strict, m)?)?;
    m.add_function(wrap_pyfunction!(dbscan, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_f1, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
