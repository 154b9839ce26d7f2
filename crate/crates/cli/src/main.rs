//! `diffq`: command-line front end for citation-diffusion quality scoring.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use diffusion_quality::corpus::{self, Corpus, SyntheticParams};
use diffusion_quality::features::{extract_features_at, write_features_csv, Feature, FeatureConfig};
use diffusion_quality::gam::{observed_grid, partial_dependence, write_pdp_csv, FeatureTable, GamModel, GamSpec, LambdaGrid};
use diffusion_quality::graph::{build_graph, CitationGraph};
use diffusion_quality::pipeline::{
    run_pipeline_at, write_predictions_csv, EvalReport, PipelineConfig, RunReport, SplitSpec, TargetHorizon,
};
use diffusion_quality::study::{
    collect_results, run_study_samples, summarize, write_cells_csv, write_comparisons_csv, write_samples_csv,
    FeatureSubset, StudyConfig,
};

#[derive(Parser)]
#[command(name = "diffq", version, about = "Score paper quality from citation diffusion")]
struct Cli {
    /// JSON run configuration; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for feature extraction and studies (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum Format {
    Arnetminer,
    #[default]
    Canonical,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a corpus to canonical JSONL.
    Ingest {
        #[arg(long, value_enum)]
        format: Format,
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus with planted quality latents.
    Synth {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// CSV of the generating quality latents.
        #[arg(long)]
        latents: Option<PathBuf>,
        #[arg(long)]
        first_year: Option<i32>,
        #[arg(long)]
        last_year: Option<i32>,
        #[arg(long)]
        venues: Option<usize>,
        #[arg(long)]
        planted_fraction: Option<f64>,
    },
    /// Diversity, timeliness and saliency per paper.
    Features {
        #[command(flatten)]
        common: Common,
        /// Compute every paper's features at this year.
        #[arg(long, conflicts_with = "window")]
        as_of: Option<i32>,
        /// Compute features `window` years after each paper's publication.
        #[arg(long)]
        window: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tune and fit one model per window and save them.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Validation metrics and predictions per window.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also score the held-out test split.
        #[arg(long)]
        test: bool,
        /// Train on permuted targets as a no-signal control.
        #[arg(long)]
        shuffle_labels: bool,
    },
    /// Repeated-seed feature-subset study.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subsets such as `TS,DTS`.
        #[arg(long, value_delimiter = ',')]
        subsets: Option<Vec<String>>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Partial dependence of a saved model on one feature.
    Pdp {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        feature: String,
        /// Number of evenly spaced grid points over the training range.
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_delimiter = ',')]
    windows: Option<Vec<u32>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Feature subset for train/evaluate, e.g. `TS`.
    #[arg(long)]
    subset: Option<String>,
    #[arg(long)]
    no_interactions: bool,
    #[arg(long)]
    observation_year: Option<i32>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    punish: Option<f64>,
    #[arg(long)]
    saliency_window: Option<u32>,
    #[arg(long)]
    if_span: Option<u32>,
}

/// Serializable configuration shared by every command.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    corpus: Option<PathBuf>,
    format: Format,
    windows: Vec<u32>,
    seed: Option<u64>,
    split: SplitSpec,
    features: FeatureConfig,
    target_horizon: TargetHorizon,
    observation_year: Option<i32>,
    gam: GamSpec,
    lambda_grid: LambdaGrid,
    subset: FeatureSubset,
    subsets: Vec<FeatureSubset>,
    n_runs: usize,
    alpha: f64,
    output_dir: PathBuf,
    jobs: usize,
    synthetic: SyntheticParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        let s = StudyConfig::default();
        RunConfig {
            corpus: None,
            format: Format::Canonical,
            windows: p.windows,
            seed: None,
            split: p.split,
            features: p.feature_config,
            target_horizon: p.target_horizon,
            observation_year: None,
            gam: p.gam,
            lambda_grid: p.lambda_grid,
            subset: p.subset,
            subsets: s.subsets,
            n_runs: s.n_runs,
            alpha: 0.05,
            output_dir: PathBuf::from("."),
            jobs: 0,
            synthetic: SyntheticParams::default(),
        }
    }
}

impl RunConfig {
    fn apply(&mut self, c: &Common) -> Result<(), Failure> {
        if let Some(p) = &c.corpus {
            self.corpus = Some(p.clone());
        }
        if let Some(f) = c.format {
            self.format = f;
        }
        if let Some(w) = &c.windows {
            self.windows = w.clone();
        }
        if c.seed.is_some() {
            self.seed = c.seed;
        }
        if let Some(s) = &c.subset {
            self.subset = s.parse().map_err(|e| Failure::Usage(format!("--subset: {e}")))?;
        }
        if c.no_interactions {
            self.gam.include_interactions = false;
        }
        if c.observation_year.is_some() {
            self.observation_year = c.observation_year;
        }
        if let Some(v) = c.max_depth {
            self.features.max_depth = v;
        }
        if let Some(v) = c.punish {
            self.features.punish = v;
        }
        if let Some(v) = c.saliency_window {
            self.features.saliency_window = v;
        }
        if let Some(v) = c.if_span {
            self.features.if_span = v;
        }
        self.features.validate().map_err(|e| Failure::Usage(e.to_string()))
    }

    fn seed(&self) -> Result<u64, Failure> {
        self.seed
            .ok_or_else(|| Failure::Usage("--seed is required for this command (or `seed` in --config)".into()))
    }

    fn pipeline(&self, seed: u64) -> Result<PipelineConfig, Failure> {
        let cfg = PipelineConfig {
            windows: self.windows.clone(),
            feature_config: self.features.clone(),
            target_horizon: self.target_horizon,
            observation_year: self.observation_year,
            split: SplitSpec { seed, ..self.split.clone() },
            gam: self.gam.clone(),
            lambda_grid: self.lambda_grid.clone(),
            subset: self.subset.clone(),
            ..PipelineConfig::default()
        };
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }

    fn load_corpus(&self) -> Result<Corpus, Failure> {
        let path = self
            .corpus
            .as_ref()
            .ok_or_else(|| Failure::Usage("--corpus is required (or `corpus` in --config)".into()))?;
        read_corpus(path, self.format).map(|(c, _)| c)
    }
}

enum Failure {
    /// Bad invocation, unreadable configuration or unparsable input: exit 2.
    Usage(String),
    /// Error reported by the library while doing the work: exit 1.
    Domain(String),
}

impl From<diffusion_quality::Error> for Failure {
    fn from(e: diffusion_quality::Error) -> Self {
        Failure::Domain(e.to_string())
    }
}

fn io_fail(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Domain(format!("{}: {e}", path.display()))
}

fn read_corpus(path: &Path, format: Format) -> Result<(Corpus, Value), Failure> {
    let file = File::open(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let reader = BufReader::new(file);
    let parsed = match format {
        Format::Arnetminer => corpus::parse_arnetminer(reader).map(|(c, r)| {
            let report = json!({
                "skipped_records": r.skipped_records,
                "dropped_references": r.dropped_references,
                "warnings": r.warnings.len(),
            });
            (c, report)
        }),
        Format::Canonical => corpus::load_canonical(reader).map(|c| (c, json!({}))),
    };
    parsed.map_err(|e| match e {
        diffusion_quality::Error::Parse { .. } | diffusion_quality::Error::Json(_) => {
            Failure::Usage(format!("{}: {e}", path.display()))
        }
        other => Failure::Domain(format!("{}: {other}", path.display())),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_fail(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_fail(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), Failure> {
    w.flush().map_err(|e| io_fail(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_fail(path, e))?;
    w.write_all(b"\n").map_err(|e| io_fail(path, e))?;
    finish(w, path)
}

fn write_with<F>(path: &Path, body: F) -> Result<(), Failure>
where
    F: FnOnce(&mut BufWriter<File>) -> diffusion_quality::Result<()>,
{
    let mut w = create(path)?;
    body(&mut w)?;
    finish(w, path)
}

/// A trained model together with the table it was fitted on.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    window_years: u32,
    report: EvalReport,
    model: GamModel,
    training_features: FeatureTable,
}

fn cohort(graph: &CitationGraph) -> Vec<usize> {
    (0..graph.n_nodes()).collect()
}

fn run(cli: Cli) -> Result<Value, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| Failure::Usage(format!("{}: invalid config: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    pool.install(|| execute(cli.command, cfg))
}

fn execute(command: Command, mut cfg: RunConfig) -> Result<Value, Failure> {
    match command {
        Command::Ingest { format, input, out } => {
            let (corpus, report) = read_corpus(&input, format)?;
            write_with(&out, |w| corpus::write_canonical(&corpus, w))?;
            Ok(json!({
                "command": "ingest",
                "papers": corpus.len(),
                "dangling_references": corpus.dangling_references(),
                "ingest": report,
                "out": out,
            }))
        }
        Command::Synth { n, seed, out, latents, first_year, last_year, venues, planted_fraction } => {
            let mut p = cfg.synthetic.clone();
            if let Some(s) = seed.or(cfg.seed) {
                p.seed = s;
            } else {
                return Err(Failure::Usage("--seed is required for synth".into()));
            }
            if let Some(n) = n {
                p.n_papers = n;
            }
            if let Some(v) = first_year {
                p.first_year = v;
            }
            if let Some(v) = last_year {
                p.last_year = v;
            }
            if let Some(v) = venues {
                p.n_venues = v;
            }
            if let Some(v) = planted_fraction {
                p.planted_quality_fraction = v;
            }
            let synth = corpus::generate_synthetic(&p)?;
            write_with(&out, |w| corpus::write_canonical(&synth.corpus, w))?;
            if let Some(path) = &latents {
                write_with(path, |w| corpus::write_latents(&synth.latents, w))?;
            }
            Ok(json!({
                "command": "synth",
                "papers": synth.corpus.len(),
                "seed": p.seed,
                "out": out,
                "latents": latents,
            }))
        }
        Command::Features { common, as_of, window, out } => {
            cfg.apply(&common)?;
            let corpus = cfg.load_corpus()?;
            let graph = build_graph(&corpus);
            let requests: Vec<(usize, i32)> = match (as_of, window) {
                (Some(y), _) => cohort(&graph).into_iter().filter(|&i| graph.node(i).year <= y).map(|i| (i, y)).collect(),
                (None, Some(w)) => {
                    let last = corpus.year_span().map(|s| s.1).unwrap_or(i32::MIN);
                    cohort(&graph)
                        .into_iter()
                        .map(|i| (i, graph.node(i).year + w as i32))
                        .filter(|&(_, y)| y <= last)
                        .collect()
                }
                (None, None) => return Err(Failure::Usage("features needs --as-of or --window".into())),
            };
            let vectors = extract_features_at(&graph, &requests, &cfg.features)?;
            write_with(&out, |w| write_features_csv(&vectors, w))?;
            Ok(json!({ "command": "features", "papers": vectors.len(), "out": out }))
        }
        Command::Train { common, out_dir } => {
            cfg.apply(&common)?;
            let seed = cfg.seed()?;
            let pipeline = cfg.pipeline(seed)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let corpus = cfg.load_corpus()?;
            let graph = build_graph(&corpus);
            let outcomes = run_pipeline_at(&graph, &cohort(&graph), &pipeline)?;
            let mut files = Vec::new();
            for o in outcomes {
                let path = dir.join(format!("model_w{}.json", o.report.window_years));
                write_json(
                    &path,
                    &ModelDocument {
                        window_years: o.report.window_years,
                        report: o.report,
                        model: o.model,
                        training_features: o.train_table,
                    },
                )?;
                files.push(path);
            }
            Ok(json!({ "command": "train", "seed": seed, "models": files }))
        }
        Command::Evaluate { common, out_dir, test, shuffle_labels } => {
            cfg.apply(&common)?;
            let seed = cfg.seed()?;
            let pipeline = PipelineConfig { evaluate_test: test, shuffle_labels, ..cfg.pipeline(seed)? };
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let corpus = cfg.load_corpus()?;
            let graph = build_graph(&corpus);
            let outcomes = run_pipeline_at(&graph, &cohort(&graph), &pipeline)?;
            let predictions: Vec<_> = outcomes.iter().flat_map(|o| o.predictions.iter().cloned()).collect();
            let reports: Vec<EvalReport> = outcomes.into_iter().map(|o| o.report).collect();
            let summary: Vec<Value> = reports
                .iter()
                .map(|r| json!({"window": r.window_years, "pearson_r": r.pearson_r, "r_squared": r.r_squared, "high_impact_accuracy": r.high_impact_accuracy}))
                .collect();
            write_json(&dir.join("report.json"), &RunReport { config: pipeline, reports })?;
            write_with(&dir.join("predictions.csv"), |w| write_predictions_csv(&predictions, w))?;
            Ok(json!({ "command": "evaluate", "seed": seed, "windows": summary, "out_dir": dir }))
        }
        Command::Ablate { common, subsets, runs, alpha, out_dir } => {
            cfg.apply(&common)?;
            let seed = cfg.seed()?;
            if let Some(s) = subsets {
                cfg.subsets = s
                    .iter()
                    .map(|v| v.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|e| Failure::Usage(format!("--subsets: {e}")))?;
            }
            if let Some(r) = runs {
                cfg.n_runs = r;
            }
            if let Some(a) = alpha {
                cfg.alpha = a;
            }
            let study = StudyConfig {
                pipeline: cfg.pipeline(seed)?,
                subsets: cfg.subsets.clone(),
                n_runs: cfg.n_runs,
                base_seed: seed,
            };
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir.clone());
            let corpus = cfg.load_corpus()?;
            let graph = build_graph(&corpus);
            let samples = run_study_samples(&graph, &cohort(&graph), &study)?;
            let summary = summarize(&collect_results(&study, &samples), cfg.alpha)?;
            write_with(&dir.join("samples.csv"), |w| write_samples_csv(&samples, w))?;
            write_with(&dir.join("cells.csv"), |w| write_cells_csv(&summary.cells, w))?;
            write_with(&dir.join("comparisons.csv"), |w| write_comparisons_csv(&summary.comparisons, w))?;
            Ok(json!({
                "command": "ablate",
                "seed": seed,
                "runs": study.n_runs,
                "cells": summary.cells.len(),
                "comparisons": summary.comparisons.len(),
                "significant": summary.comparisons.iter().filter(|c| c.significant).count(),
                "out_dir": dir,
            }))
        }
        Command::Pdp { model, feature, grid, out } => {
            let text = fs::read_to_string(&model).map_err(|e| Failure::Usage(format!("{}: {e}", model.display())))?;
            let doc: ModelDocument = serde_json::from_str(&text)
                .map_err(|e| Failure::Usage(format!("{}: not a model document: {e}", model.display())))?;
            doc.model.validate()?;
            let name = Feature::from_name(&feature).map(|f| f.name().to_owned()).unwrap_or(feature);
            let values = observed_grid(&doc.training_features, &name, grid)?;
            let pd = partial_dependence(&doc.model, &doc.training_features, &name, &values)?;
            let out = out.unwrap_or_else(|| model.with_file_name(format!("pdp_{name}.csv")));
            write_with(&out, |w| write_pdp_csv(&name, &values, &pd, w))?;
            Ok(json!({ "command": "pdp", "feature": name, "points": pd.len(), "out": out }))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(mut status) => {
            status["status"] = json!("ok");
            println!("{status}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            println!("{}", json!({"status": "error", "kind": "usage", "error": msg}));
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(msg)) => {
            println!("{}", json!({"status": "error", "kind": "domain", "error": msg}));
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
