//! Python module `sqac`.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sqac_core::eval::{ab_compare, gen_cases, run_eval, EvalReport, Pipeline};
use sqac_core::index::{load_index, save_index, CompletionIndex, IndexEntry, Order};
use sqac_core::loglab::{
    ingest_events, seasonality_targets, synth_logs, SeasonalityTarget, SynthSpec,
};
use sqac_core::ranker::{l2_rerank, L2Config, ProfileScorer};
use sqac_core::seasonnet::{
    load_model, save_model, train, EmbeddingInit, SeasonModel, TrainConfig,
};
use sqac_core::{Error, Month};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::File { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn month(m: u8) -> PyResult<Month> {
    Month::new(m).map_err(py_err)
}

fn parse_order(order: &str) -> PyResult<Order> {
    match order {
        "l1" => Ok(Order::L1),
        "mpc" => Ok(Order::Mpc),
        other => Err(PyValueError::new_err(format!(
            "order must be 'l1' or 'mpc', got {other:?}"
        ))),
    }
}

#[pyfunction]
fn normalize_query(query: &str) -> String {
    sqac_core::normalize_query(query)
}

/// Tab-separated `query, YYYY-MM, count` log text for planted synthetic data.
#[pyfunction]
#[pyo3(signature = (n_queries=1000, seasonal_fraction=0.5, seed=7, years=1))]
fn synth(n_queries: usize, seasonal_fraction: f64, seed: u64, years: u32) -> PyResult<String> {
    let spec = SynthSpec {
        n_queries,
        seasonal_fraction,
        seed,
        years,
        ..SynthSpec::default()
    };
    synth_logs(&spec).map_err(py_err)
}

/// Seasonality targets `(query, month, value)` from log text.
#[pyfunction]
#[pyo3(signature = (logs, k_threshold=60))]
fn targets_from_logs(logs: &str, k_threshold: u64) -> PyResult<Vec<(String, u8, f64)>> {
    let report = ingest_events(logs.as_bytes()).map_err(py_err)?;
    let targets = seasonality_targets(&report.table, k_threshold).map_err(py_err)?;
    Ok(targets
        .into_iter()
        .map(|t| (t.query, t.month.get(), t.value))
        .collect())
}

#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: SeasonModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_model(&path).map_err(py_err)?,
        })
    }

    /// Trains on `(query, month, value)` targets. `config` is a TOML table
    /// with the training options, e.g. `"epochs = 5\nhidden = [32]"`.
    #[staticmethod]
    #[pyo3(signature = (targets, config=""))]
    fn train(py: Python<'_>, targets: Vec<(String, u8, f64)>, config: &str) -> PyResult<Self> {
        let cfg = train_config(config)?;
        let targets = targets
            .into_iter()
            .map(|(query, m, value)| {
                Ok(SeasonalityTarget {
                    query,
                    month: month(m)?,
                    value,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        let (inner, _) = py
            .detach(|| train(&targets, EmbeddingInit::Corpus, &cfg))
            .map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_model(&self.inner, &path).map_err(py_err)
    }

    fn predict(&self, query: &str, month_number: u8) -> PyResult<f64> {
        Ok(self.inner.predict(query, month(month_number)?))
    }

    /// Seasonality for January through December.
    fn predict_all(&self, query: &str) -> Vec<f64> {
        self.inner.predict_all(query).to_vec()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }
}

fn train_config(text: &str) -> PyResult<TrainConfig> {
    toml::from_str(text).map_err(|e| PyValueError::new_err(format!("training config: {e}")))
}

#[pyclass(name = "Index", frozen)]
struct PyIndex {
    inner: CompletionIndex,
}

#[pymethods]
impl PyIndex {
    /// Builds from `(query, frequency, l1_score)` triples.
    #[new]
    fn new(entries: Vec<(String, u64, f64)>) -> PyResult<Self> {
        let entries = entries
            .into_iter()
            .map(|(q, f, l1)| IndexEntry::new(q, f, l1))
            .collect();
        Ok(Self {
            inner: CompletionIndex::build(entries).map_err(py_err)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: load_index(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_index(&self.inner, &path).map_err(py_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Top `n` `(query, frequency, l1_score)` completions of `prefix`.
    #[pyo3(signature = (prefix, n=10, order="l1"))]
    fn complete(&self, prefix: &str, n: usize, order: &str) -> PyResult<Vec<(String, u64, f64)>> {
        let order = parse_order(order)?;
        Ok(self
            .inner
            .complete(prefix, n, order)
            .into_iter()
            .map(|c| (c.entry.query.clone(), c.entry.frequency, c.entry.l1_score))
            .collect())
    }

    fn mpc_weight(&self, query: &str) -> PyResult<f64> {
        self.inner.mpc_weight(query).map_err(py_err)
    }
}

fn l2(alpha: f64, n_candidates: usize, k: usize) -> PyResult<L2Config> {
    let cfg = L2Config {
        alpha,
        n_candidates,
        k_display: k,
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Re-ranked suggestions for `prefix` as dicts.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (index, model, prefix, month_number, alpha=0.3, n_candidates=50, k=10))]
fn rerank<'py>(
    py: Python<'py>,
    index: &PyIndex,
    model: &PyModel,
    prefix: &str,
    month_number: u8,
    alpha: f64,
    n_candidates: usize,
    k: usize,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = l2(alpha, n_candidates, k)?;
    let candidates = index.inner.complete(prefix, cfg.n_candidates, Order::L1);
    l2_rerank(&candidates, month(month_number)?, &model.inner, &cfg)
        .into_iter()
        .map(|s| {
            let d = PyDict::new(py);
            d.set_item("query", s.query)?;
            d.set_item("rank", s.rank)?;
            d.set_item("final_score", s.final_score)?;
            d.set_item("l1_score", s.l1_score)?;
            d.set_item("seasonality", s.seasonality)?;
            Ok(d)
        })
        .collect()
}

fn eval_at(
    index: &PyIndex,
    model: &PyModel,
    cases: &[(String, u8)],
    cfg: L2Config,
) -> PyResult<(EvalReport, EvalReport)> {
    let pairs = cases
        .iter()
        .map(|(q, m)| Ok((q.clone(), month(*m)?)))
        .collect::<PyResult<Vec<_>>>()?;
    let cases = gen_cases(&pairs).map_err(py_err)?;
    let scorer = ProfileScorer::new(
        &model.inner,
        index.inner.entries().iter().map(|e| e.query.as_str()),
    );
    let run = |alpha| {
        run_eval(
            &cases,
            &Pipeline {
                index: &index.inner,
                scorer: &scorer,
                config: cfg.with_alpha(alpha),
                model_hash: model.inner.fingerprint(),
            },
        )
    };
    Ok((run(0.0).map_err(py_err)?, run(cfg.alpha).map_err(py_err)?))
}

/// Replays `(query, month)` cases with and without the seasonality signal
/// and returns MRR for both, the relative lift and the sign-test p-value.
#[pyfunction]
#[pyo3(signature = (index, model, cases, alpha=0.3, n_candidates=50, k=10))]
fn evaluate<'py>(
    py: Python<'py>,
    index: &PyIndex,
    model: &PyModel,
    cases: Vec<(String, u8)>,
    alpha: f64,
    n_candidates: usize,
    k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = l2(alpha, n_candidates, k)?;
    let (control, test) = py.detach(|| eval_at(index, model, &cases, cfg))?;
    let lift = ab_compare(&control, &test).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("control_mrr", control.mrr)?;
    d.set_item("test_mrr", test.mrr)?;
    d.set_item("lift_percent", lift.lift_percent)?;
    d.set_item("sign_test_p", lift.sign_test_p)?;
    d.set_item("case_count", test.case_count)?;
    d.set_item("prefix_count", test.prefix_count)?;
    Ok(d)
}

#[pymodule]
fn sqac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(normalize_query, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(targets_from_logs, m)?)?;
    m.add_function(wrap_pyfunction!(rerank, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyIndex>()?;
    Ok(())
}
