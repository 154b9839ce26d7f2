//! Repeated-seed feature-subset study with pairwise significance testing.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::Feature;
use crate::graph::CitationGraph;
use crate::pipeline::{cohort_split, evaluate_window, prepare, PipelineConfig};
use crate::stats::{mean, sample_sd, sample_variance};
use crate::{Error, Result};

pub use crate::stats::{bonferroni, cohens_d, welch_t, Bonferroni, CohensD, EffectSize, WelchTest};

/// Non-empty set of features, kept in D, T, S order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureSubset {
    members: Vec<Feature>,
}

impl FeatureSubset {
    pub fn new(members: &[Feature]) -> Result<Self> {
        let members: Vec<Feature> = Feature::ALL.iter().copied().filter(|f| members.contains(f)).collect();
        if members.is_empty() {
            return Err(Error::invalid("a feature subset needs at least one feature"));
        }
        Ok(FeatureSubset { members })
    }

    pub fn full() -> Self {
        FeatureSubset { members: Feature::ALL.to_vec() }
    }

    pub fn features(&self) -> &[Feature] {
        &self.members
    }

    /// The four combinations compared in the study: D+S, D+T, T+S, D+T+S.
    pub fn study_defaults() -> Vec<FeatureSubset> {
        ["DS", "DT", "TS", "DTS"].iter().map(|s| s.parse().unwrap()).collect()
    }
}

impl Default for FeatureSubset {
    fn default() -> Self {
        Self::full()
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: Vec<String> = self.members.iter().map(|m| m.letter().to_string()).collect();
        f.write_str(&letters.join("+"))
    }
}

impl FromStr for FeatureSubset {
    type Err = Error;

    /// Accepts letter strings (`TS`, `T+S`) or `+`-joined feature names.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut members = Vec::new();
        let tokens: Vec<&str> = if s.contains('+') { s.split('+').collect() } else { vec![s] };
        for tok in tokens {
            let tok = tok.trim();
            if let Some(f) = Feature::from_name(&tok.to_ascii_lowercase()) {
                members.push(f);
                continue;
            }
            for c in tok.chars() {
                let f = Feature::ALL
                    .iter()
                    .copied()
                    .find(|f| f.letter() == c.to_ascii_uppercase())
                    .ok_or_else(|| Error::invalid(format!("unknown feature `{c}` in subset `{s}`")))?;
                members.push(f);
            }
        }
        FeatureSubset::new(&members)
    }
}

impl TryFrom<String> for FeatureSubset {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSubset> for String {
    fn from(s: FeatureSubset) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Pearson,
    HighImpactAccuracy,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Pearson, Metric::HighImpactAccuracy];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Pearson => "pearson",
            Metric::HighImpactAccuracy => "high_impact_accuracy",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    /// Windows, features, GAM and split settings; its subset and seed are ignored.
    pub pipeline: PipelineConfig,
    pub subsets: Vec<FeatureSubset>,
    pub n_runs: usize,
    pub base_seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            pipeline: PipelineConfig::default(),
            subsets: FeatureSubset::study_defaults(),
            n_runs: 100,
            base_seed: 0,
        }
    }
}

/// One metric value from one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSample {
    pub run: usize,
    pub seed: u64,
    pub subset: FeatureSubset,
    pub window_years: u32,
    pub metric: Metric,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub subset: FeatureSubset,
    pub window_years: u32,
    pub metric: Metric,
    /// One value per run, in run order.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Runs the pipeline for every (run, subset, window). Run `r` uses seed
/// `base_seed + r` for its split; datasets are built once and shared.
pub fn run_study(graph: &CitationGraph, cohort: &[usize], config: &StudyConfig) -> Result<Vec<StudyResult>> {
    Ok(collect_results(config, &run_study_samples(graph, cohort, config)?))
}

pub fn run_study_samples(graph: &CitationGraph, cohort: &[usize], config: &StudyConfig) -> Result<Vec<RunSample>> {
    if config.n_runs < 2 {
        return Err(Error::invalid("a study needs at least two runs"));
    }
    if config.subsets.is_empty() {
        return Err(Error::invalid("a study needs at least one feature subset"));
    }
    let prepared = prepare(graph, cohort, &config.pipeline)?;
    let n_windows = prepared.datasets.len();
    let cells_per_run = config.subsets.len() * n_windows;
    let outcomes: Vec<Result<[f64; 2]>> = (0..config.n_runs * cells_per_run)
        .into_par_iter()
        .map(|job| {
            let run = job / cells_per_run;
            let subset = &config.subsets[job % cells_per_run / n_windows];
            let dataset = &prepared.datasets[job % n_windows];
            let seed = config.base_seed + run as u64;
            let tag = |e: Error| Error::Run {
                seed,
                source: Box::new(Error::Window { window: dataset.window_years, source: Box::new(e) }),
            };
            let split = cohort_split(&prepared, &config.pipeline, seed).map_err(tag)?;
            let out = evaluate_window(dataset, &split, &config.pipeline, subset, seed).map_err(tag)?;
            Ok([out.report.pearson_r, out.report.high_impact_accuracy])
        })
        .collect();
    let mut samples = Vec::with_capacity(outcomes.len() * 2);
    for (job, outcome) in outcomes.into_iter().enumerate() {
        let values = outcome?;
        let run = job / cells_per_run;
        for (metric, value) in Metric::ALL.into_iter().zip(values) {
            samples.push(RunSample {
                run,
                seed: config.base_seed + run as u64,
                subset: config.subsets[job % cells_per_run / n_windows].clone(),
                window_years: prepared.datasets[job % n_windows].window_years,
                metric,
                value,
            });
        }
    }
    Ok(samples)
}

/// Groups run samples into per-(subset, window, metric) results.
pub fn collect_results(config: &StudyConfig, samples: &[RunSample]) -> Vec<StudyResult> {
    let mut out = Vec::new();
    for subset in &config.subsets {
        for &window in &config.pipeline.windows {
            for metric in Metric::ALL {
                let values: Vec<f64> = samples
                    .iter()
                    .filter(|s| &s.subset == subset && s.window_years == window && s.metric == metric)
                    .map(|s| s.value)
                    .collect();
                out.push(StudyResult {
                    subset: subset.clone(),
                    window_years: window,
                    metric,
                    mean: mean(&values),
                    sd: sample_sd(&values),
                    samples: values,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseComparison {
    pub subset_a: FeatureSubset,
    pub subset_b: FeatureSubset,
    pub window_years: u32,
    pub metric: Metric,
    pub t_stat: f64,
    pub df: f64,
    pub p_value: f64,
    pub p_value_bonferroni: f64,
    pub alpha_corrected: f64,
    pub cohens_d: f64,
    pub effect: EffectSize,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub cells: Vec<StudyResult>,
    pub comparisons: Vec<PairwiseComparison>,
}

/// Welch test and Cohen's d, with two constant and equal samples read as no difference.
fn compare(a: &[f64], b: &[f64]) -> Result<(WelchTest, CohensD)> {
    if sample_variance(a) == 0.0 && sample_variance(b) == 0.0 && a.len() >= 2 && b.len() >= 2 && mean(a) == mean(b) {
        return Ok((
            WelchTest { t_stat: 0.0, df: (a.len() + b.len() - 2) as f64, p_value: 1.0 },
            CohensD { d: 0.0, pooled_sd: 0.0, magnitude: EffectSize::Negligible },
        ));
    }
    Ok((welch_t(a, b)?, cohens_d(a, b)?))
}

/// Pairwise comparisons between subsets within each (window, metric), with
/// Bonferroni correction over all comparisons of the same metric.
pub fn summarize(results: &[StudyResult], alpha: f64) -> Result<StudySummary> {
    let mut comparisons = Vec::new();
    for metric in Metric::ALL {
        let cells: Vec<&StudyResult> = results.iter().filter(|r| r.metric == metric).collect();
        let mut windows: Vec<u32> = Vec::new();
        for c in &cells {
            if !windows.contains(&c.window_years) {
                windows.push(c.window_years);
            }
        }
        let mut block = Vec::new();
        for &w in &windows {
            let row: Vec<&&StudyResult> = cells.iter().filter(|c| c.window_years == w).collect();
            for i in 0..row.len() {
                for j in i + 1..row.len() {
                    let (a, b) = (row[i], row[j]);
                    let (t, d) = compare(&a.samples, &b.samples).map_err(|e| {
                        Error::Degenerate(format!("{} vs {} at window {w} ({}): {e}", a.subset, b.subset, metric.name()))
                    })?;
                    block.push((a, b, w, t, d));
                }
            }
        }
        if block.is_empty() {
            continue;
        }
        let p: Vec<f64> = block.iter().map(|b| b.3.p_value).collect();
        let bonf = bonferroni(&p, alpha)?;
        for (k, (a, b, w, t, d)) in block.into_iter().enumerate() {
            comparisons.push(PairwiseComparison {
                subset_a: a.subset.clone(),
                subset_b: b.subset.clone(),
                window_years: w,
                metric,
                t_stat: t.t_stat,
                df: t.df,
                p_value: t.p_value,
                p_value_bonferroni: bonf.adjusted[k],
                alpha_corrected: bonf.alpha_corrected,
                cohens_d: d.d,
                effect: d.magnitude,
                significant: bonf.significant[k],
            });
        }
    }
    Ok(StudySummary { cells: results.to_vec(), comparisons })
}

pub fn write_samples_csv<W: Write>(samples: &[RunSample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["run", "seed", "subset", "window", "metric", "value"])?;
    for s in samples {
        w.write_record([
            s.run.to_string(),
            s.seed.to_string(),
            s.subset.to_string(),
            s.window_years.to_string(),
            s.metric.name().to_owned(),
            s.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cells_csv<W: Write>(cells: &[StudyResult], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["subset", "window", "metric", "n", "mean", "sd"])?;
    for c in cells {
        w.write_record([
            c.subset.to_string(),
            c.window_years.to_string(),
            c.metric.name().to_owned(),
            c.samples.len().to_string(),
            c.mean.to_string(),
            c.sd.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_comparisons_csv<W: Write>(comparisons: &[PairwiseComparison], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "metric",
        "window",
        "subset_a",
        "subset_b",
        "t_stat",
        "df",
        "p_value",
        "p_value_bonferroni",
        "alpha_corrected",
        "cohens_d",
        "effect",
        "significant",
    ])?;
    for c in comparisons {
        w.write_record([
            c.metric.name().to_owned(),
            c.window_years.to_string(),
            c.subset_a.to_string(),
            c.subset_b.to_string(),
            c.t_stat.to_string(),
            c.df.to_string(),
            c.p_value.to_string(),
            c.p_value_bonferroni.to_string(),
            c.alpha_corrected.to_string(),
            c.cohens_d.to_string(),
            c.effect.as_str().to_owned(),
            c.significant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticParams};
    use crate::gam::LambdaGrid;
    use crate::graph::build_graph;
    use crate::pipeline::run_pipeline;

    #[test]
    fn subset_parsing() {
        let ts: FeatureSubset = "TS".parse().unwrap();
        assert_eq!(ts.to_string(), "T+S");
        assert_eq!("s+t".parse::<FeatureSubset>().unwrap(), ts);
        assert_eq!("timeliness+saliency".parse::<FeatureSubset>().unwrap(), ts);
        assert_eq!("SDT".parse::<FeatureSubset>().unwrap(), FeatureSubset::full());
        assert!("X".parse::<FeatureSubset>().is_err());
        assert!("".parse::<FeatureSubset>().is_err());
        assert_eq!(serde_json::to_string(&ts).unwrap(), "\"T+S\"");
        assert_eq!(FeatureSubset::study_defaults().len(), 4);
    }

    fn cell(subset: &str, w: u32, samples: Vec<f64>) -> StudyResult {
        StudyResult {
            subset: subset.parse().unwrap(),
            window_years: w,
            metric: Metric::Pearson,
            mean: mean(&samples),
            sd: sample_sd(&samples),
            samples,
        }
    }

    #[test]
    fn summarize_counts_and_shift() {
        let base: Vec<f64> = (0..30).map(|i| ((i * 7919) % 101) as f64 / 100.0).collect();
        let sd = sample_sd(&base);
        let shifted: Vec<f64> = base.iter().map(|v| v + 5.0 * sd).collect();
        let mut results = Vec::new();
        for w in [5, 10, 15, 20] {
            results.push(cell("DS", w, base.clone()));
            results.push(cell("DT", w, base.clone()));
            results.push(cell("TS", w, shifted.clone()));
            results.push(cell("DTS", w, base.iter().rev().copied().collect()));
        }
        let s = summarize(&results, 0.05).unwrap();
        assert_eq!(s.comparisons.len(), 24);
        assert!(s.comparisons.iter().all(|c| (c.alpha_corrected - 0.05 / 24.0).abs() < 1e-15));
        for c in &s.comparisons {
            let involves_ts = c.subset_a.to_string() == "T+S" || c.subset_b.to_string() == "T+S";
            assert_eq!(c.significant, involves_ts);
            if involves_ts {
                assert!(c.cohens_d.abs() > 0.8);
            } else {
                assert!(c.cohens_d.abs() < 1e-12);
                assert!(!c.significant);
            }
            assert_eq!(c.p_value_bonferroni, (24.0 * c.p_value).min(1.0));
        }
        for c in &s.cells {
            assert!((c.mean - mean(&c.samples)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_equal_samples_compare_as_equal() {
        let r = vec![cell("DS", 5, vec![1.0; 4]), cell("TS", 5, vec![1.0; 4])];
        let s = summarize(&r, 0.05).unwrap();
        assert_eq!((s.comparisons[0].t_stat, s.comparisons[0].p_value), (0.0, 1.0));
        let r = vec![cell("DS", 5, vec![1.0; 4]), cell("TS", 5, vec![2.0; 4])];
        assert!(summarize(&r, 0.05).is_err());
    }

    fn config(n_runs: usize) -> StudyConfig {
        StudyConfig {
            pipeline: PipelineConfig {
                windows: vec![5],
                lambda_grid: LambdaGrid::log_spaced(1e-2, 1e3, 4).unwrap(),
                ..PipelineConfig::default()
            },
            subsets: vec!["TS".parse().unwrap()],
            n_runs,
            base_seed: 11,
        }
    }

    #[test]
    fn study_shape_determinism_and_standalone_agreement() {
        let synth = generate_synthetic(&SyntheticParams { n_papers: 400, seed: 3, ..SyntheticParams::default() }).unwrap();
        let graph = build_graph(&synth.corpus);
        let cohort: Vec<usize> = (0..graph.n_nodes()).collect();
        let cfg = config(2);
        let a = run_study(&graph, &cohort, &cfg).unwrap();
        assert_eq!(a.len(), 2);
        assert!(a.iter().all(|r| r.samples.len() == 2));
        assert_eq!(run_study(&graph, &cohort, &cfg).unwrap(), a);
        for run in 0..2 {
            let mut p = cfg.pipeline.clone();
            p.subset = cfg.subsets[0].clone();
            p.split.seed = cfg.base_seed + run as u64;
            let rep = &run_pipeline(&synth.corpus, &p).unwrap()[0];
            assert_eq!(a[0].samples[run], rep.pearson_r);
            assert_eq!(a[1].samples[run], rep.high_impact_accuracy);
        }
        assert!(run_study(&graph, &cohort, &config(1)).is_err());
    }
}
