use diffusion_quality::community::{brute_force_max_modularity, fast_greedy, modularity, UndirectedGraph};
use diffusion_quality::corpus::{generate_synthetic, Corpus, PaperRecord, SyntheticParams};
use diffusion_quality::features::{extract_features, timeliness_from_gains, FeatureConfig};
use diffusion_quality::graph::{build_graph, gain_trajectory, khop_in_members};
use diffusion_quality::stats::{cohens_d, welch_t};
use proptest::prelude::*;

fn small_corpus(n: usize, links: &[(usize, usize)], years: &[i32]) -> Corpus {
    let mut refs: Vec<Vec<String>> = vec![Vec::new(); n];
    for &(a, b) in links {
        let (a, b) = (a % n, b % n);
        if a != b {
            refs[a].push(format!("p{b}"));
        }
    }
    let papers = (0..n)
        .map(|i| PaperRecord::new(format!("p{i}"), years[i % years.len()], format!("V{}", i % 3), refs[i].clone()))
        .collect();
    Corpus::new(papers, "prop").unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_edge_accounting(
        n in 2usize..30,
        links in prop::collection::vec((0usize..30, 0usize..30), 0..80),
        years in prop::collection::vec(1995i32..2010, 1..8),
    ) {
        let corpus = small_corpus(n, &links, &years);
        let g = build_graph(&corpus);
        let total: usize = (0..g.n_nodes()).map(|i| g.in_degree(i)).sum();
        prop_assert_eq!(total, g.n_edges());
        prop_assert_eq!(g.edges().count(), g.n_edges());
        for i in 0..g.n_nodes() {
            let e = g.in_edges(i);
            prop_assert!(e.windows(2).all(|w| (w[0].citing_year, w[0].citing) <= (w[1].citing_year, w[1].citing)));
            let traj = gain_trajectory(&g, &g.node(i).id, 2012).unwrap();
            prop_assert_eq!(traj.total() as usize, g.in_edges_until(i, 2012).len());
        }
    }

    #[test]
    fn khop_respects_time_and_depth(
        n in 2usize..25,
        links in prop::collection::vec((0usize..25, 0usize..25), 0..60),
        years in prop::collection::vec(1995i32..2010, 1..6),
        as_of in 1995i32..2012,
    ) {
        let corpus = small_corpus(n, &links, &years);
        let g = build_graph(&corpus);
        for root in 0..g.n_nodes() {
            let one = khop_in_members(&g, root, 1, as_of);
            let two = khop_in_members(&g, root, 2, as_of);
            prop_assert!(one.contains(&root));
            prop_assert!(one.iter().all(|m| two.contains(m)));
            prop_assert!(two.iter().all(|&m| m == root || g.node(m).year <= as_of));
        }
    }

    #[test]
    fn greedy_never_beats_exhaustive(n in 2usize..8, edges in prop::collection::vec((0usize..8, 0usize..8), 1..20)) {
        let edges: Vec<(usize, usize)> = edges.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b).collect();
        prop_assume!(!edges.is_empty());
        let g = UndirectedGraph::new(n, edges).unwrap();
        let greedy = fast_greedy(&g).unwrap();
        let best = brute_force_max_modularity(&g).unwrap();
        prop_assert!(greedy.partition.modularity <= best.modularity + 1e-12);
        prop_assert!((modularity(&g, &greedy.partition.assignment).unwrap() - greedy.partition.modularity).abs() < 1e-12);
    }

    #[test]
    fn timeliness_telescopes(gains in prop::collection::vec(0u32..100, 2..31), punish in 0.0f64..2.0) {
        let g: Vec<f64> = gains.iter().map(|&v| v as f64).collect();
        let gap = (g.len() - 1) as f64;
        let direct = timeliness_from_gains(&g, punish).unwrap();
        prop_assert!((direct - (g[g.len() - 1] / gap - gap * punish)).abs() < 1e-9);
    }

    #[test]
    fn welch_antisymmetric_and_d_scale_free(
        x in prop::collection::vec(-10.0f64..10.0, 3..20),
        y in prop::collection::vec(-10.0f64..10.0, 3..20),
        c in 0.1f64..10.0,
    ) {
        prop_assume!(welch_t(&x, &y).is_ok());
        let a = welch_t(&x, &y).unwrap();
        let b = welch_t(&y, &x).unwrap();
        prop_assert!((a.t_stat + b.t_stat).abs() < 1e-12);
        prop_assert!((a.p_value - b.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a.p_value));
        let xs: Vec<f64> = x.iter().map(|v| v * c).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * c).collect();
        prop_assert!((cohens_d(&x, &y).unwrap().d - cohens_d(&xs, &ys).unwrap().d).abs() < 1e-9);
    }
}

#[test]
fn features_ignore_future_edges() {
    for seed in 0..5 {
        let full = generate_synthetic(&SyntheticParams { n_papers: 300, seed, ..SyntheticParams::default() }).unwrap().corpus;
        let cutoff = 2004;
        let cut = Corpus::new(
            full.papers()
                .iter()
                .map(|p| {
                    let mut p = p.clone();
                    if p.year > cutoff {
                        p.references.clear();
                    }
                    p
                })
                .collect(),
            "cut",
        )
        .unwrap();
        let ids: Vec<String> = full.papers().iter().filter(|p| p.year <= cutoff).map(|p| p.id.clone()).collect();
        let cfg = FeatureConfig::default();
        assert_eq!(
            extract_features(&build_graph(&full), &ids, cutoff, &cfg).unwrap(),
            extract_features(&build_graph(&cut), &ids, cutoff, &cfg).unwrap()
        );
    }
}
