//! Windowed training and evaluation: per-paper datasets at a fixed exposure
//! time, citation-stratified splits, λ tuning, fitting and metrics.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::sampling::proportional_allocation;
use crate::corpus::Corpus;
use crate::features::{extract_features_at, Feature, FeatureConfig, FeatureVector};
use crate::gam::{fit, tune_lambda, FeatureTable, GamModel, GamSpec, LambdaGrid, Lambdas, TuneSplit};
use crate::graph::{build_graph, citations_in_window_at, CitationGraph};
use crate::stats::quantile_sorted;
use crate::study::FeatureSubset;
use crate::{Error, Result};

pub use crate::stats::{pearson, r_squared};

/// Default diffusion windows in years.
pub const DEFAULT_WINDOWS: [u32; 4] = [5, 10, 15, 20];

/// Which citation gain is predicted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TargetHorizon {
    /// Gain in the year right after the window.
    #[default]
    NextYear,
    /// Gain in year `publishing_year + n`; `n` must exceed the window.
    FixedYear(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_years: u32,
    pub feature_config: FeatureConfig,
    pub target_horizon: TargetHorizon,
    /// Last year whose citations are visible; defaults to the latest
    /// publication year in the graph.
    pub observation_year: Option<i32>,
}

impl WindowConfig {
    pub fn new(window_years: u32) -> Self {
        WindowConfig {
            window_years,
            feature_config: FeatureConfig::default(),
            target_horizon: TargetHorizon::NextYear,
            observation_year: None,
        }
    }

    fn target_offset(&self) -> Result<i32> {
        if self.window_years == 0 {
            return Err(Error::invalid("window_years must be at least 1"));
        }
        match self.target_horizon {
            TargetHorizon::NextYear => Ok(self.window_years as i32 + 1),
            TargetHorizon::FixedYear(n) if n > self.window_years => Ok(n as i32),
            TargetHorizon::FixedYear(n) => Err(Error::invalid(format!(
                "target year {n} must come after the {}-year window",
                self.window_years
            ))),
        }
    }
}

/// Features and targets for every cohort paper old enough for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub window_years: u32,
    /// Position of each row in the cohort it was built from.
    pub cohort_rows: Vec<usize>,
    pub features: Vec<FeatureVector>,
    pub target: Vec<f64>,
    /// Cohort papers skipped because the target year lies past the observation year.
    pub excluded_too_young: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn paper_ids(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.paper_id.as_str())
    }

    pub fn table(&self, features: &[Feature]) -> Result<FeatureTable> {
        FeatureTable::new(
            features.iter().map(|f| f.name().to_owned()).collect(),
            features.iter().map(|&f| self.features.iter().map(|v| v.get(f)).collect()).collect(),
        )
    }
}

fn observation_year(graph: &CitationGraph, window: &WindowConfig) -> Result<i32> {
    window
        .observation_year
        .or_else(|| graph.nodes().iter().map(|n| n.year).max())
        .ok_or_else(|| Error::invalid("empty graph"))
}

/// Dataset over graph nodes `cohort`.
pub fn make_dataset_at(graph: &CitationGraph, cohort: &[usize], window: &WindowConfig) -> Result<Dataset> {
    let offset = window.target_offset()?;
    let obs = observation_year(graph, window)?;
    let mut cohort_rows = Vec::new();
    let mut requests = Vec::new();
    for (row, &idx) in cohort.iter().enumerate() {
        let year = graph.node(idx).year;
        if year + offset <= obs {
            cohort_rows.push(row);
            requests.push((idx, year + window.window_years as i32));
        }
    }
    if requests.is_empty() {
        return Err(Error::degenerate(format!(
            "no paper is old enough for a {}-year window observed up to {obs}",
            window.window_years
        )));
    }
    let features = extract_features_at(graph, &requests, &window.feature_config)?;
    let target = cohort_rows
        .iter()
        .map(|&row| {
            let idx = cohort[row];
            let y = graph.node(idx).year + offset;
            citations_in_window_at(graph, idx, y, y).map(|c| c as f64)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        window_years: window.window_years,
        excluded_too_young: cohort.len() - cohort_rows.len(),
        cohort_rows,
        features,
        target,
    })
}

/// Dataset over the papers of `cohort`, each of which must be a graph node.
pub fn make_dataset(graph: &CitationGraph, cohort: &Corpus, window: &WindowConfig) -> Result<Dataset> {
    let idx = cohort.papers().iter().map(|p| graph.require(&p.id)).collect::<Result<Vec<_>>>()?;
    make_dataset_at(graph, &idx, window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub n_strata: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_frac: 0.8, val_frac: 0.1, test_frac: 0.1, n_strata: 10, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_frac, self.val_frac, self.test_frac];
        if f.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(format!("split fractions must be positive, got {f:?}")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must sum to 1, got {f:?}")));
        }
        if self.n_strata == 0 {
            return Err(Error::invalid("n_strata must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    /// Sizes of the strata actually used, lowest keys first.
    pub strata: Vec<usize>,
    pub warnings: Vec<String>,
}

const MIN_STRATUM: usize = 3;

fn half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor() as usize
}

/// Splits rows into train/validation/test within rank strata of `keys`.
/// Validation and test counts follow cumulative rounding across strata so
/// totals match the global fractions; each stratum is shuffled with `seed`.
pub fn stratified_split(keys: &[f64], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if keys.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }
    if keys.iter().any(|k| k.is_nan()) {
        return Err(Error::invalid("split keys must not be NaN"));
    }
    let n = keys.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));

    let mut sizes: Vec<usize> = proportional_allocation(&vec![1; spec.n_strata.min(n)], n);
    let mut warnings = Vec::new();
    while sizes.len() > 1 {
        let Some(small) = sizes.iter().position(|&s| s < MIN_STRATUM) else { break };
        let into = if small + 1 < sizes.len() { small + 1 } else { small - 1 };
        warnings.push(format!("stratum of {} rows merged into a neighbour", sizes[small]));
        sizes[into] += sizes[small];
        sizes.remove(small);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut split = Split { train: vec![], validation: vec![], test: vec![], strata: sizes.clone(), warnings };
    let (mut start, mut done_val, mut done_test) = (0, 0, 0);
    for &size in &sizes {
        let mut rows = order[start..start + size].to_vec();
        start += size;
        rows.shuffle(&mut rng);
        let val = half_up(start as f64 * spec.val_frac) - done_val;
        let test = (half_up(start as f64 * spec.test_frac) - done_test).min(size - val);
        done_val += val;
        done_test += test;
        split.validation.extend_from_slice(&rows[..val]);
        split.test.extend_from_slice(&rows[val..val + test]);
        split.train.extend_from_slice(&rows[val + test..]);
    }
    split.train.sort_unstable();
    split.validation.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Share of high-impact papers (gain at or above the `impact_pctile`
/// percentile) whose score reaches the `score_pctile` percentile of all scores.
pub fn high_impact_accuracy(y_true_gain: &[f64], y_pred_score: &[f64], impact_pctile: f64, score_pctile: f64) -> Result<f64> {
    if y_true_gain.len() != y_pred_score.len() {
        return Err(Error::invalid(format!("{} gains for {} scores", y_true_gain.len(), y_pred_score.len())));
    }
    for p in [impact_pctile, score_pctile] {
        if !(0.0..=100.0).contains(&p) {
            return Err(Error::invalid(format!("percentile {p} outside [0, 100]")));
        }
    }
    if y_true_gain.iter().chain(y_pred_score).any(|v| !v.is_finite()) {
        return Err(Error::invalid("gains and scores must be finite"));
    }
    if y_true_gain.is_empty() {
        return Err(Error::degenerate("no high-impact papers in evaluation set"));
    }
    let sorted = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        s
    };
    let g_cut = quantile_sorted(&sorted(y_true_gain), impact_pctile / 100.0);
    let s_cut = quantile_sorted(&sorted(y_pred_score), score_pctile / 100.0);
    let high: Vec<usize> = (0..y_true_gain.len()).filter(|&i| y_true_gain[i] >= g_cut).collect();
    let hits = high.iter().filter(|&&i| y_pred_score[i] >= s_cut).count();
    Ok(hits as f64 / high.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub windows: Vec<u32>,
    pub feature_config: FeatureConfig,
    pub target_horizon: TargetHorizon,
    pub observation_year: Option<i32>,
    pub split: SplitSpec,
    pub gam: GamSpec,
    pub lambda_grid: LambdaGrid,
    pub subset: FeatureSubset,
    pub impact_pctile: f64,
    pub score_pctile: f64,
    /// Also report metrics on the test split.
    pub evaluate_test: bool,
    /// Permute the targets before training: a control with no signal.
    pub shuffle_labels: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            windows: DEFAULT_WINDOWS.to_vec(),
            feature_config: FeatureConfig::default(),
            target_horizon: TargetHorizon::NextYear,
            observation_year: None,
            split: SplitSpec::default(),
            gam: GamSpec::default(),
            lambda_grid: LambdaGrid::default(),
            subset: FeatureSubset::full(),
            impact_pctile: 95.0,
            score_pctile: 90.0,
            evaluate_test: false,
            shuffle_labels: false,
        }
    }
}

impl PipelineConfig {
    pub fn window(&self, window_years: u32) -> WindowConfig {
        WindowConfig {
            window_years,
            feature_config: self.feature_config.clone(),
            target_horizon: self.target_horizon,
            observation_year: self.observation_year,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.windows.is_empty() {
            return Err(Error::invalid("no windows configured"));
        }
        if self.windows.contains(&0) {
            return Err(Error::invalid("window_years must be at least 1"));
        }
        self.feature_config.validate()?;
        self.split.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub pearson_r: f64,
    pub r_squared: f64,
    pub high_impact_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub window_years: u32,
    pub subset: FeatureSubset,
    pub seed: u64,
    /// Metrics on the validation split.
    pub pearson_r: f64,
    pub r_squared: f64,
    pub high_impact_accuracy: f64,
    pub test: Option<SplitMetrics>,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_excluded_too_young: usize,
    pub lambdas: Lambdas,
    pub tuning_score: f64,
    pub n_smooths: usize,
    pub n_interactions: usize,
    pub edf: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub paper_id: String,
    pub window: u32,
    pub y_true: f64,
    pub y_pred: f64,
    pub split: String,
}

#[derive(Debug, Clone)]
pub struct WindowOutcome {
    pub report: EvalReport,
    pub model: GamModel,
    pub train_table: FeatureTable,
    pub predictions: Vec<Prediction>,
}

/// Cohort and per-window datasets shared by every seed and feature subset.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Cumulative citations of each cohort paper at the observation year.
    pub strata_keys: Vec<f64>,
    pub datasets: Vec<Dataset>,
}

pub fn prepare(graph: &CitationGraph, cohort: &[usize], config: &PipelineConfig) -> Result<Prepared> {
    config.validate()?;
    let obs = observation_year(graph, &config.window(1))?;
    let strata_keys = cohort.iter().map(|&i| graph.in_edges_until(i, obs).len() as f64).collect();
    let datasets = config
        .windows
        .par_iter()
        .map(|&w| {
            make_dataset_at(graph, cohort, &config.window(w)).map_err(|e| Error::Window { window: w, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared { strata_keys, datasets })
}

fn distinct(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Lowers basis dimensions to what the training values can support.
fn adapt_spec(spec: &GamSpec, table: &FeatureTable, flags: &mut Vec<String>) -> Result<GamSpec> {
    let mut out = spec.clone();
    let mut min_distinct = usize::MAX;
    for (name, col) in table.names().iter().zip(table.columns()) {
        let d = distinct(col);
        min_distinct = min_distinct.min(d);
        let want = spec.basis_dim_for(name);
        if d < 4 {
            return Err(Error::degenerate(format!(
                "feature `{name}` has only {d} distinct training values; at least 4 are needed"
            )));
        }
        if d < want {
            flags.push(format!("basis_dim_reduced:{name}={d}"));
            out.basis_dims.insert(name.clone(), d);
        }
    }
    if out.include_interactions && table.n_columns() > 1 && min_distinct < out.interaction_dim {
        flags.push(format!("interaction_dim_reduced={min_distinct}"));
        out.interaction_dim = min_distinct;
    }
    Ok(out)
}

fn metrics(y: &[f64], pred: &[f64], config: &PipelineConfig) -> Result<SplitMetrics> {
    Ok(SplitMetrics {
        pearson_r: pearson(pred, y)?,
        r_squared: r_squared(y, pred)?,
        high_impact_accuracy: high_impact_accuracy(y, pred, config.impact_pctile, config.score_pctile)?,
    })
}

/// Splits a cohort for one seed. The split is made once over the whole cohort
/// and shared by every window.
pub fn cohort_split(prepared: &Prepared, config: &PipelineConfig, seed: u64) -> Result<Split> {
    stratified_split(&prepared.strata_keys, &SplitSpec { seed, ..config.split.clone() })
}

/// Tunes, fits and scores one window on a fixed cohort split.
pub fn evaluate_window(
    dataset: &Dataset,
    split: &Split,
    config: &PipelineConfig,
    subset: &FeatureSubset,
    seed: u64,
) -> Result<WindowOutcome> {
    let mut role = vec![0u8; split.train.len() + split.validation.len() + split.test.len()];
    for &r in &split.validation {
        role[r] = 1;
    }
    for &r in &split.test {
        role[r] = 2;
    }
    let rows_with = |k: u8| -> Vec<usize> {
        dataset.cohort_rows.iter().enumerate().filter(|(_, &c)| role[c] == k).map(|(i, _)| i).collect()
    };
    let (train, val, test) = (rows_with(0), rows_with(1), rows_with(2));
    if train.len() < 2 || val.len() < 2 {
        return Err(Error::degenerate(format!(
            "too few papers for the {}-year window: {} train, {} validation",
            dataset.window_years,
            train.len(),
            val.len()
        )));
    }

    let mut flags = Vec::new();
    let mut target = dataset.target.clone();
    if config.shuffle_labels {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
        target.shuffle(&mut rng);
        flags.push("shuffled_labels".to_owned());
    }
    let zero_gap = dataset.features.iter().filter(|f| f.flags.zero_gap).count();
    let unknown_venue = dataset.features.iter().filter(|f| f.flags.unknown_venue).count();
    let edgeless = dataset.features.iter().filter(|f| f.flags.edgeless_neighbourhood).count();
    for (name, count) in [("zero_gap", zero_gap), ("unknown_venue", unknown_venue), ("edgeless_neighbourhood", edgeless)] {
        if count > 0 {
            flags.push(format!("{name}={count}"));
        }
    }

    let table = dataset.table(subset.features())?;
    let train_table = table.select_rows(&train);
    let spec = adapt_spec(&config.gam, &train_table, &mut flags)?;
    let tuned = tune_lambda(&table, &target, &spec, TuneSplit { train: &train, validation: &val }, &config.lambda_grid)?;
    let y_train: Vec<f64> = train.iter().map(|&r| target[r]).collect();
    let model = fit(&train_table, &y_train, &GamSpec { lambdas: tuned.best, ..spec })?;

    let score = |rows: &[usize], name: &str, out: &mut Vec<Prediction>| -> Result<SplitMetrics> {
        let y: Vec<f64> = rows.iter().map(|&r| target[r]).collect();
        let pred = model.predict(&table.select_rows(rows))?;
        for ((&r, &yt), &yp) in rows.iter().zip(&y).zip(&pred) {
            out.push(Prediction {
                paper_id: dataset.features[r].paper_id.clone(),
                window: dataset.window_years,
                y_true: yt,
                y_pred: yp,
                split: name.to_owned(),
            });
        }
        metrics(&y, &pred, config)
    };
    let mut predictions = Vec::new();
    let val_metrics = score(&val, "validation", &mut predictions)?;
    let test_metrics = if config.evaluate_test {
        if test.len() < 2 {
            return Err(Error::degenerate("too few papers in the test split"));
        }
        Some(score(&test, "test", &mut predictions)?)
    } else {
        None
    };

    Ok(WindowOutcome {
        report: EvalReport {
            window_years: dataset.window_years,
            subset: subset.clone(),
            seed,
            pearson_r: val_metrics.pearson_r,
            r_squared: val_metrics.r_squared,
            high_impact_accuracy: val_metrics.high_impact_accuracy,
            test: test_metrics,
            n_train: train.len(),
            n_val: val.len(),
            n_test: test.len(),
            n_excluded_too_young: dataset.excluded_too_young,
            lambdas: tuned.best,
            tuning_score: tuned.validation_score,
            n_smooths: model.smooths.len(),
            n_interactions: model.interactions.len(),
            edf: model.diagnostics.edf,
            flags,
        },
        model,
        train_table,
        predictions,
    })
}

/// Full protocol over graph nodes `cohort` for every configured window.
pub fn run_pipeline_at(graph: &CitationGraph, cohort: &[usize], config: &PipelineConfig) -> Result<Vec<WindowOutcome>> {
    let prepared = prepare(graph, cohort, config)?;
    let split = cohort_split(&prepared, config, config.split.seed)?;
    prepared
        .datasets
        .par_iter()
        .map(|d| {
            evaluate_window(d, &split, config, &config.subset, config.split.seed)
                .map_err(|e| Error::Window { window: d.window_years, source: Box::new(e) })
        })
        .collect()
}

/// Runs the protocol with every paper of `corpus` in the cohort.
pub fn run_pipeline(corpus: &Corpus, config: &PipelineConfig) -> Result<Vec<EvalReport>> {
    let graph = build_graph(corpus);
    let cohort: Vec<usize> = (0..graph.n_nodes()).collect();
    Ok(run_pipeline_at(&graph, &cohort, config)?.into_iter().map(|o| o.report).collect())
}

/// JSON document for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: PipelineConfig,
    pub reports: Vec<EvalReport>,
}

pub fn write_predictions_csv<W: Write>(predictions: &[Prediction], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["paper_id", "window", "y_true", "y_pred", "split"])?;
    for p in predictions {
        w.write_record([p.paper_id.clone(), p.window.to_string(), p.y_true.to_string(), p.y_pred.to_string(), p.split.clone()])?;
    }
    w.flush()?;
    Ok(())
}
