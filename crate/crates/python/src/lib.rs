//! Python bindings: corpora, the citation graph, diffusion features, the
//! additive model, the evaluation pipeline and the study statistics.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use diffusion_quality as dq;
use dq::features::FeatureConfig;
use dq::gam::{FeatureTable, GamSpec, Lambdas};

fn err(e: dq::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value to plain Python objects through JSON.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn table_from_dict(columns: &Bound<'_, PyDict>) -> PyResult<FeatureTable> {
    let mut names = Vec::new();
    let mut cols = Vec::new();
    for (k, v) in columns.iter() {
        names.push(k.extract::<String>()?);
        cols.push(v.extract::<Vec<f64>>()?);
    }
    FeatureTable::new(names, cols).map_err(err)
}

fn feature_config(max_depth: usize, punish: f64, saliency_window: u32, if_span: u32) -> FeatureConfig {
    FeatureConfig { max_depth, punish, saliency_window, if_span }
}

#[pyclass(frozen, name = "Corpus")]
struct PyCorpus {
    inner: dq::corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    #[staticmethod]
    fn load_canonical(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path)?;
        let inner = dq::corpus::load_canonical(std::io::BufReader::new(file)).map_err(err)?;
        Ok(PyCorpus { inner })
    }

    #[staticmethod]
    fn parse_arnetminer(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path)?;
        let (inner, _) = dq::corpus::parse_arnetminer(std::io::BufReader::new(file)).map_err(err)?;
        Ok(PyCorpus { inner })
    }

    /// Synthetic corpus; returns the corpus and a list of latent-quality records.
    #[staticmethod]
    #[pyo3(signature = (n_papers = 1000, seed = 0, first_year = 1990, last_year = 2014))]
    fn synthetic<'py>(
        py: Python<'py>,
        n_papers: usize,
        seed: u64,
        first_year: i32,
        last_year: i32,
    ) -> PyResult<(Self, Bound<'py, PyAny>)> {
        let params = dq::corpus::SyntheticParams {
            n_papers,
            seed,
            first_year,
            last_year,
            ..Default::default()
        };
        let s = dq::corpus::generate_synthetic(&params).map_err(err)?;
        Ok((PyCorpus { inner: s.corpus }, to_py(py, &s.latents)?))
    }

    fn write_canonical(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path)?;
        dq::corpus::write_canonical(&self.inner, std::io::BufWriter::new(file)).map_err(err)
    }

    fn ids(&self) -> Vec<String> {
        self.inner.papers().iter().map(|p| p.id.clone()).collect()
    }

    fn papers<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.papers())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyclass(frozen, name = "CitationGraph")]
struct PyGraph {
    inner: dq::graph::CitationGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(corpus: &PyCorpus) -> Self {
        PyGraph { inner: dq::graph::build_graph(&corpus.inner) }
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n_nodes()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    /// Citations gained per year from publication up to `as_of_year`.
    fn gain_trajectory(&self, paper_id: &str, as_of_year: i32) -> PyResult<Vec<u32>> {
        Ok(dq::graph::gain_trajectory(&self.inner, paper_id, as_of_year).map_err(err)?.gains)
    }

    #[pyo3(signature = (paper_ids, as_of_year, max_depth = 2, punish = 1.0, saliency_window = 2, if_span = 2))]
    fn features<'py>(
        &self,
        py: Python<'py>,
        paper_ids: Vec<String>,
        as_of_year: i32,
        max_depth: usize,
        punish: f64,
        saliency_window: u32,
        if_span: u32,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = feature_config(max_depth, punish, saliency_window, if_span);
        let v = dq::features::extract_features(&self.inner, &paper_ids, as_of_year, &cfg).map_err(err)?;
        to_py(py, &v)
    }
}

#[pyclass(frozen, name = "GamModel")]
struct PyGam {
    inner: dq::gam::GamModel,
}

#[pymethods]
impl PyGam {
    /// Fits on `columns`, an insertion-ordered mapping of feature name to values.
    #[staticmethod]
    #[pyo3(signature = (columns, target, basis_dim = 10, lam = 1.0, interaction_lam = 1.0, interactions = true))]
    fn fit(
        columns: &Bound<'_, PyDict>,
        target: Vec<f64>,
        basis_dim: usize,
        lam: f64,
        interaction_lam: f64,
        interactions: bool,
    ) -> PyResult<Self> {
        let spec = GamSpec {
            basis_dim,
            include_interactions: interactions,
            lambdas: Lambdas { smooth: lam, interaction: interaction_lam },
            ..GamSpec::default()
        };
        let inner = dq::gam::fit(&table_from_dict(columns)?, &target, &spec).map_err(err)?;
        Ok(PyGam { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyGam { inner: dq::gam::GamModel::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn predict(&self, columns: &Bound<'_, PyDict>) -> PyResult<Vec<f64>> {
        self.inner.predict(&table_from_dict(columns)?).map_err(err)
    }

    fn smooth_value(&self, feature: &str, x: f64) -> PyResult<f64> {
        self.inner.smooth_value(feature, x).map_err(err)
    }

    fn partial_dependence(&self, columns: &Bound<'_, PyDict>, feature: &str, grid: Vec<f64>) -> PyResult<Vec<f64>> {
        dq::gam::partial_dependence(&self.inner, &table_from_dict(columns)?, feature, &grid).map_err(err)
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.inner.intercept
    }

    #[getter]
    fn features(&self) -> Vec<String> {
        self.inner.feature_names().into_iter().map(str::to_owned).collect()
    }

    #[getter]
    fn diagnostics<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.diagnostics)
    }
}

/// Windowed evaluation; returns one report dict per window.
#[pyfunction]
#[pyo3(signature = (corpus, windows, seed = 0, subset = "DTS", interactions = true, shuffle_labels = false))]
fn run_pipeline<'py>(
    py: Python<'py>,
    corpus: &PyCorpus,
    windows: Vec<u32>,
    seed: u64,
    subset: &str,
    interactions: bool,
    shuffle_labels: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = dq::pipeline::PipelineConfig {
        windows,
        subset: subset.parse().map_err(err)?,
        shuffle_labels,
        ..Default::default()
    };
    cfg.split.seed = seed;
    cfg.gam.include_interactions = interactions;
    let reports = py.detach(|| dq::pipeline::run_pipeline(&corpus.inner, &cfg)).map_err(err)?;
    to_py(py, &reports)
}

/// Greedy modularity communities of an undirected graph: (assignment, modularity).
#[pyfunction]
fn fast_greedy(n_nodes: usize, edges: Vec<(usize, usize)>) -> PyResult<(Vec<usize>, f64)> {
    let g = dq::community::UndirectedGraph::new(n_nodes, edges).map_err(err)?;
    let out = dq::community::fast_greedy(&g).map_err(err)?;
    Ok((out.partition.assignment, out.partition.modularity))
}

#[pyfunction]
fn timeliness(gains: Vec<f64>, punish: f64) -> Option<f64> {
    dq::features::timeliness_from_gains(&gains, punish)
}

#[pyfunction]
fn pearson(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    dq::stats::pearson(&x, &y).map_err(err)
}

#[pyfunction]
fn r_squared(y_true: Vec<f64>, y_pred: Vec<f64>) -> PyResult<f64> {
    dq::stats::r_squared(&y_true, &y_pred).map_err(err)
}

/// Welch test: (t, df, two-sided p).
#[pyfunction]
fn welch_t(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let w = dq::stats::welch_t(&x, &y).map_err(err)?;
    Ok((w.t_stat, w.df, w.p_value))
}

/// Cohen's d with pooled SD: (d, magnitude label).
#[pyfunction]
fn cohens_d(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, &'static str)> {
    let d = dq::stats::cohens_d(&x, &y).map_err(err)?;
    Ok((d.d, d.magnitude.as_str()))
}

/// Bonferroni: (corrected alpha, significance flags, adjusted p-values).
#[pyfunction]
fn bonferroni(p_values: Vec<f64>, alpha: f64) -> PyResult<(f64, Vec<bool>, Vec<f64>)> {
    let b = dq::stats::bonferroni(&p_values, alpha).map_err(err)?;
    Ok((b.alpha_corrected, b.significant, b.adjusted))
}

#[pyfunction]
#[pyo3(signature = (y_true, y_score, impact_pctile = 95.0, score_pctile = 90.0))]
fn high_impact_accuracy(y_true: Vec<f64>, y_score: Vec<f64>, impact_pctile: f64, score_pctile: f64) -> PyResult<f64> {
    dq::pipeline::high_impact_accuracy(&y_true, &y_score, impact_pctile, score_pctile).map_err(err)
}

#[pymodule]
fn diffq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyGam>()?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(fast_greedy, m)?)?;
    m.add_function(wrap_pyfunction!(timeliness, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(r_squared, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(bonferroni, m)?)?;
    m.add_function(wrap_pyfunction!(high_impact_accuracy, m)?)?;
    Ok(())
}
