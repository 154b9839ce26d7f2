use diffusion_quality::corpus::{load_canonical, parse_arnetminer, write_canonical, generate_synthetic, stratified_sample, SyntheticParams};
use diffusion_quality::gam::LambdaGrid;
use diffusion_quality::graph::build_graph;
use diffusion_quality::pipeline::{run_pipeline, PipelineConfig};
use diffusion_quality::study::{collect_results, run_study_samples, summarize, StudyConfig};

#[test]
fn arnetminer_to_canonical_round_trip() {
    let text = "#*A\n#t2000\n#cV1\n#index1\n\n#*B\n#t2002\n#cV1\n#index2\n#%1\n#%9\n\n#*C\n#t2003\n#cV2\n#index3\n#%1\n#%2\n";
    let (corpus, report) = parse_arnetminer(text.as_bytes()).unwrap();
    assert_eq!(corpus.len(), 3);
    assert_eq!(report.dangling_references, 1);
    let mut buf = Vec::new();
    write_canonical(&corpus, &mut buf).unwrap();
    let back = load_canonical(buf.as_slice()).unwrap();
    assert_eq!(back.papers(), corpus.papers());
    let g = build_graph(&back);
    assert_eq!(g.n_edges(), 3);
}

#[test]
fn sample_then_pipeline_then_study() {
    let synth = generate_synthetic(&SyntheticParams { n_papers: 900, seed: 21, ..SyntheticParams::default() }).unwrap();
    let (sample, report) = stratified_sample(&synth.corpus, 600, 5, 2014, 4).unwrap();
    assert_eq!(sample.len(), 600);
    assert_eq!(report.drawn.iter().sum::<usize>(), 600);

    let pipeline = PipelineConfig {
        windows: vec![5, 10],
        lambda_grid: LambdaGrid::log_spaced(1e-2, 1e3, 5).unwrap(),
        ..PipelineConfig::default()
    };
    let reports = run_pipeline(&synth.corpus, &pipeline).unwrap();
    assert_eq!(reports.iter().map(|r| r.window_years).collect::<Vec<_>>(), vec![5, 10]);
    assert!(reports.iter().all(|r| r.pearson_r > 0.3));

    let study = StudyConfig {
        pipeline: PipelineConfig { windows: vec![5], ..pipeline },
        subsets: vec!["TS".parse().unwrap(), "DTS".parse().unwrap(), "DS".parse().unwrap()],
        n_runs: 3,
        base_seed: 5,
    };
    let graph = build_graph(&synth.corpus);
    let cohort: Vec<usize> = (0..graph.n_nodes()).collect();
    let samples = run_study_samples(&graph, &cohort, &study).unwrap();
    assert_eq!(samples.len(), 3 * 3 * 2);
    let summary = summarize(&collect_results(&study, &samples), 0.05).unwrap();
    assert_eq!(summary.cells.len(), 6);
    assert_eq!(summary.comparisons.len(), 6);
    assert!(summary.comparisons.iter().all(|c| (c.alpha_corrected - 0.05 / 3.0).abs() < 1e-15));
}
