//! The three diffusion features of a paper at a cutoff year: diversity
//! (communities in the local citation neighbourhood), timeliness (mean gradient
//! of the yearly gain trajectory minus an age penalty) and saliency (recent
//! citations minus the venue impact factor).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{fast_greedy, UndirectedGraph};
use crate::graph::{citations_in_window_at, gain_trajectory_at, khop_in_members, CitationGraph};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Diversity,
    Timeliness,
    Saliency,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Diversity, Feature::Timeliness, Feature::Saliency];

    pub fn name(self) -> &'static str {
        match self {
            Feature::Diversity => "diversity",
            Feature::Timeliness => "timeliness",
            Feature::Saliency => "saliency",
        }
    }

    pub fn letter(self) -> char {
        match self {
            Feature::Diversity => 'D',
            Feature::Timeliness => 'T',
            Feature::Saliency => 'S',
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "diversity" | "d" => Some(Feature::Diversity),
            "timeliness" | "t" => Some(Feature::Timeliness),
            "saliency" | "salience" | "s" => Some(Feature::Saliency),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Hops of in-neighbourhood used for diversity.
    pub max_depth: usize,
    /// Per-year age penalty in timeliness.
    pub punish: f64,
    /// Years of recent citations counted by saliency.
    pub saliency_window: u32,
    /// Publication years of venue history entering the impact factor.
    pub if_span: u32,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            max_depth: 2,
            punish: 1.0,
            saliency_window: 2,
            if_span: 2,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.punish.is_finite() && self.punish >= 0.0) {
            return Err(Error::invalid("punish must be finite and >= 0"));
        }
        if self.saliency_window == 0 {
            return Err(Error::invalid("saliency_window must be at least 1"));
        }
        if self.if_span == 0 {
            return Err(Error::invalid("if_span must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureFlags {
    /// Cutoff equals the publication year; timeliness set to 0.
    pub zero_gap: bool,
    /// Venue has no papers in the impact-factor span; its impact factor is 0.
    pub unknown_venue: bool,
    /// The neighbourhood had no edges; every node counted as its own community.
    pub edgeless_neighbourhood: bool,
}

impl FeatureFlags {
    pub fn any(&self) -> bool {
        self.zero_gap || self.unknown_venue || self.edgeless_neighbourhood
    }

    /// `|`-joined flag names, empty when none is set.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.zero_gap {
            parts.push("zero_gap");
        }
        if self.unknown_venue {
            parts.push("unknown_venue");
        }
        if self.edgeless_neighbourhood {
            parts.push("edgeless_neighbourhood");
        }
        parts.join("|")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub paper_id: String,
    pub as_of_year: i32,
    pub diversity: f64,
    pub timeliness: f64,
    pub saliency: f64,
    pub flags: FeatureFlags,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        match f {
            Feature::Diversity => self.diversity,
            Feature::Timeliness => self.timeliness,
            Feature::Saliency => self.saliency,
        }
    }
}

fn check_cutoff(graph: &CitationGraph, idx: usize, as_of_year: i32) -> Result<()> {
    let node = graph.node(idx);
    if as_of_year < node.year {
        return Err(Error::invalid(format!(
            "as_of_year {as_of_year} precedes publication year {} of `{}`",
            node.year, node.id
        )));
    }
    Ok(())
}

/// Undirected view of the time-filtered induced neighbourhood, built directly
/// from the parent graph.
fn neighbourhood(graph: &CitationGraph, idx: usize, max_depth: usize, as_of_year: i32) -> UndirectedGraph {
    let members = khop_in_members(graph, idx, max_depth, as_of_year);
    let local: std::collections::HashMap<usize, usize> =
        members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
    let mut edges = Vec::new();
    for (l_citing, &g_citing) in members.iter().enumerate() {
        if graph.node(g_citing).year > as_of_year {
            continue;
        }
        for cited in graph.out_edges(g_citing) {
            if let Some(&l_cited) = local.get(cited) {
                edges.push((l_citing, l_cited));
            }
        }
    }
    UndirectedGraph::new(members.len(), edges).expect("local indices in range")
}

fn diversity_at(graph: &CitationGraph, idx: usize, as_of_year: i32, cfg: &FeatureConfig) -> Result<(f64, bool)> {
    check_cutoff(graph, idx, as_of_year)?;
    let view = neighbourhood(graph, idx, cfg.max_depth, as_of_year);
    let outcome = fast_greedy(&view)?;
    Ok((outcome.partition.n_communities as f64, outcome.zero_edge))
}

/// Number of greedy-modularity communities in the paper's `max_depth`-hop
/// in-neighbourhood as of `as_of_year`. An edgeless neighbourhood counts each
/// node as a community, so an uncited paper scores 1.
pub fn diversity(graph: &CitationGraph, paper_id: &str, as_of_year: i32, cfg: &FeatureConfig) -> Result<f64> {
    diversity_at(graph, graph.require(paper_id)?, as_of_year, cfg).map(|(d, _)| d)
}

/// Timeliness of a gain trajectory `g_0..g_gap`, summed term by term:
/// `(1/gap)·Σ_{i=0..gap} (g_i − g_{i−1}) − gap·punish` with `g_{−1} = 0`.
///
/// Returns `None` when `gap == 0` (the average is undefined).
pub fn timeliness_from_gains(gains: &[f64], punish: f64) -> Option<f64> {
    if gains.len() < 2 {
        return None;
    }
    let gap = (gains.len() - 1) as f64;
    let mut previous = 0.0;
    let mut gradient_sum = 0.0;
    for &g in gains {
        gradient_sum += g - previous;
        previous = g;
    }
    Some(gradient_sum / gap - gap * punish)
}

fn timeliness_at(graph: &CitationGraph, idx: usize, as_of_year: i32, cfg: &FeatureConfig) -> Result<(f64, bool)> {
    let traj = gain_trajectory_at(graph, idx, as_of_year)?;
    let gains: Vec<f64> = traj.gains.iter().map(|&g| g as f64).collect();
    Ok(match timeliness_from_gains(&gains, cfg.punish) {
        Some(t) => (t, false),
        None => (0.0, true),
    })
}

/// Citation-trajectory momentum; 0 when `as_of_year` equals the publication year.
pub fn timeliness(graph: &CitationGraph, paper_id: &str, as_of_year: i32, cfg: &FeatureConfig) -> Result<f64> {
    timeliness_at(graph, graph.require(paper_id)?, as_of_year, cfg).map(|(t, _)| t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactFactor {
    pub value: f64,
    pub papers: usize,
    pub citations: usize,
}

impl ImpactFactor {
    pub fn is_unknown(&self) -> bool {
        self.papers == 0
    }
}

/// Citations received during `year` by papers of `venue` published in
/// `[year − if_span, year − 1]`, divided by the number of such papers.
/// Zero (and flagged unknown) when there are no such papers.
pub fn venue_impact_factor(graph: &CitationGraph, venue: &str, year: i32, if_span: u32) -> ImpactFactor {
    let first = year - if_span as i32;
    let mut papers = 0;
    let mut citations = 0;
    for &p in graph.venue_papers(venue) {
        let y = graph.node(p).year;
        if y >= first && y < year {
            papers += 1;
            citations += citations_in_window_at(graph, p, year, year).expect("single-year window");
        }
    }
    let value = if papers == 0 { 0.0 } else { citations as f64 / papers as f64 };
    ImpactFactor { value, papers, citations }
}

fn saliency_at(graph: &CitationGraph, idx: usize, as_of_year: i32, cfg: &FeatureConfig) -> Result<(f64, bool)> {
    let recent = citations_in_window_at(graph, idx, as_of_year - cfg.saliency_window as i32 + 1, as_of_year)?;
    let impact = venue_impact_factor(graph, &graph.node(idx).venue, as_of_year, cfg.if_span);
    Ok((recent as f64 - impact.value, impact.is_unknown()))
}

/// Recent citations (last `saliency_window` years through `as_of_year`) minus
/// the venue impact factor at `as_of_year`.
pub fn saliency(graph: &CitationGraph, paper_id: &str, as_of_year: i32, cfg: &FeatureConfig) -> Result<f64> {
    saliency_at(graph, graph.require(paper_id)?, as_of_year, cfg).map(|(s, _)| s)
}

pub(crate) fn feature_vector_at(graph: &CitationGraph, idx: usize, as_of_year: i32, cfg: &FeatureConfig) -> Result<FeatureVector> {
    check_cutoff(graph, idx, as_of_year)?;
    let (diversity, edgeless) = diversity_at(graph, idx, as_of_year, cfg)?;
    let (timeliness, zero_gap) = timeliness_at(graph, idx, as_of_year, cfg)?;
    let (saliency, unknown_venue) = saliency_at(graph, idx, as_of_year, cfg)?;
    Ok(FeatureVector {
        paper_id: graph.node(idx).id.clone(),
        as_of_year,
        diversity,
        timeliness,
        saliency,
        flags: FeatureFlags {
            zero_gap,
            unknown_venue,
            edgeless_neighbourhood: edgeless,
        },
    })
}

/// Feature vectors for `paper_ids` at a common cutoff, in input order.
pub fn extract_features(
    graph: &CitationGraph,
    paper_ids: &[String],
    as_of_year: i32,
    cfg: &FeatureConfig,
) -> Result<Vec<FeatureVector>> {
    let requests = paper_ids
        .iter()
        .map(|id| Ok((graph.require(id)?, as_of_year)))
        .collect::<Result<Vec<_>>>()?;
    extract_features_at(graph, &requests, cfg)
}

/// Feature vectors for `(node index, cutoff)` pairs, evaluated in parallel on
/// the current rayon pool; output order matches input order.
pub fn extract_features_at(graph: &CitationGraph, requests: &[(usize, i32)], cfg: &FeatureConfig) -> Result<Vec<FeatureVector>> {
    cfg.validate()?;
    requests
        .par_iter()
        .map(|&(idx, as_of)| feature_vector_at(graph, idx, as_of, cfg))
        .collect()
}

/// Feature table CSV: `paper_id,as_of_year,diversity,timeliness,saliency,flags`.
pub fn write_features_csv<W: Write>(features: &[FeatureVector], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["paper_id", "as_of_year", "diversity", "timeliness", "saliency", "flags"])?;
    for f in features {
        w.write_record([
            f.paper_id.as_str(),
            &f.as_of_year.to_string(),
            &f.diversity.to_string(),
            &f.timeliness.to_string(),
            &f.saliency.to_string(),
            &f.flags.label(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::brute_force_max_modularity;
    use crate::corpus::{Corpus, PaperRecord};
    use crate::graph::{build_graph, khop_in_subgraph};
    use approx::assert_abs_diff_eq;

    fn graph(specs: &[(&str, i32, &str, &[&str])]) -> CitationGraph {
        let papers = specs
            .iter()
            .map(|(id, y, v, refs)| PaperRecord::new(*id, *y, *v, refs.iter().map(|s| s.to_string()).collect()))
            .collect();
        build_graph(&Corpus::new(papers, "t").unwrap())
    }

    /// P cited by two 3-cliques of citers; clique `a` in 2001–2003, clique `b` in 2004–2006.
    fn two_clique_citers() -> CitationGraph {
        graph(&[
            ("P", 2000, "", &[]),
            ("a1", 2001, "", &["P"]),
            ("a2", 2002, "", &["P", "a1"]),
            ("a3", 2003, "", &["P", "a1", "a2"]),
            ("b1", 2004, "", &["P"]),
            ("b2", 2005, "", &["P", "b1"]),
            ("b3", 2006, "", &["P", "b1", "b2"]),
        ])
    }

    #[test]
    fn uncited_paper_has_diversity_one() {
        let g = graph(&[("P", 2000, "", &[])]);
        assert_eq!(diversity(&g, "P", 2010, &FeatureConfig::default()).unwrap(), 1.0);
    }

    #[test]
    fn two_cliques_diversity_matches_exhaustive_oracle() {
        let g = two_clique_citers();
        let cfg = FeatureConfig::default();
        let sub = khop_in_subgraph(&g, "P", 2, 2006).unwrap();
        let view = UndirectedGraph::from_citation_graph(&sub);
        assert_eq!(view.n_nodes(), 7);
        let oracle = brute_force_max_modularity(&view).unwrap();
        let greedy = fast_greedy(&view).unwrap().partition;
        assert_eq!(greedy.n_communities, oracle.n_communities);
        assert_abs_diff_eq!(greedy.modularity, oracle.modularity, epsilon = 1e-12);
        assert_eq!(diversity(&g, "P", 2006, &cfg).unwrap(), oracle.n_communities as f64);
        assert_eq!(oracle.n_communities, 2);
    }

    #[test]
    fn diversity_grows_when_second_clique_arrives() {
        let g = two_clique_citers();
        let cfg = FeatureConfig::default();
        let early = diversity(&g, "P", 2003, &cfg).unwrap();
        let late = diversity(&g, "P", 2006, &cfg).unwrap();
        assert_eq!(early, 1.0);
        assert!(late > early);
    }

    #[test]
    fn timeliness_uncited() {
        let g = graph(&[("P", 2000, "", &[])]);
        assert_eq!(timeliness(&g, "P", 2005, &FeatureConfig::default()).unwrap(), -5.0);
    }

    #[test]
    fn timeliness_direct_sums() {
        assert_abs_diff_eq!(timeliness_from_gains(&[2.0, 3.0, 5.0, 4.0, 6.0], 1.0).unwrap(), -2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(timeliness_from_gains(&[0.0, 0.0, 10.0], 0.0).unwrap(), 5.0, epsilon = 1e-15);
        assert_eq!(timeliness_from_gains(&[3.0], 1.0), None);
    }

    #[test]
    fn timeliness_zero_gap_flagged() {
        let g = graph(&[("P", 2000, "", &[])]);
        let f = &extract_features(&g, &["P".into()], 2000, &FeatureConfig::default()).unwrap()[0];
        assert_eq!(f.timeliness, 0.0);
        assert!(f.flags.zero_gap);
    }

    #[test]
    fn impact_factor_hand_count() {
        // Two V papers in [2008, 2009], cited 6 times during 2010; one older V paper is ignored.
        let g = graph(&[
            ("old", 2005, "V", &[]),
            ("v1", 2008, "V", &[]),
            ("v2", 2009, "V", &[]),
            ("c1", 2010, "W", &["v1", "v2", "old"]),
            ("c2", 2010, "W", &["v1", "v2"]),
            ("c3", 2010, "W", &["v1"]),
            ("c4", 2010, "W", &["v2"]),
            ("c5", 2011, "W", &["v1"]),
        ]);
        let f = venue_impact_factor(&g, "V", 2010, 2);
        assert_eq!(f.value, 3.0);
        assert_eq!((f.papers, f.citations), (2, 6));
        let none = venue_impact_factor(&g, "V", 2003, 2);
        assert_eq!(none.value, 0.0);
        assert!(none.is_unknown());
        assert!(venue_impact_factor(&g, "", 2010, 2).is_unknown());
    }

    #[test]
    fn impact_factor_scale_invariant() {
        let base = [("v1", 2008), ("v2", 2009)];
        let build = |copies: usize| {
            let mut papers = Vec::new();
            for c in 0..copies {
                for (id, y) in base {
                    papers.push(PaperRecord::new(format!("{id}_{c}"), y, "V", vec![]));
                }
                papers.push(PaperRecord::new(format!("x_{c}"), 2010, "W", vec![format!("v1_{c}"), format!("v2_{c}")]));
                papers.push(PaperRecord::new(format!("y_{c}"), 2010, "W", vec![format!("v1_{c}")]));
            }
            build_graph(&Corpus::new(papers, "t").unwrap())
        };
        assert_eq!(venue_impact_factor(&build(1), "V", 2010, 2).value, venue_impact_factor(&build(2), "V", 2010, 2).value);
    }

    #[test]
    fn saliency_uncited_unknown_venue() {
        let g = graph(&[("P", 2000, "Nowhere", &[])]);
        let cfg = FeatureConfig::default();
        assert_eq!(saliency(&g, "P", 2005, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn saliency_subtracts_impact_factor() {
        // P (venue V, 2004) gets 3 citations in 2009 and 2 in 2010 (5 in the window)
        // plus 4 older ones. Venue V's 2010 IF: q1, q2 (2008, 2009) get 7 + 7 = 14 ... / 2 = 7.0;
        // then S = 5 − 7 = −2.
        let mut specs: Vec<(String, i32, String, Vec<String>)> = vec![
            ("P".into(), 2004, "V".into(), vec![]),
            ("q1".into(), 2008, "V".into(), vec![]),
            ("q2".into(), 2009, "V".into(), vec![]),
        ];
        for i in 0..4 {
            specs.push((format!("old{i}"), 2006, "W".into(), vec!["P".into()]));
        }
        for i in 0..3 {
            specs.push((format!("m{i}"), 2009, "W".into(), vec!["P".into()]));
        }
        for i in 0..7 {
            let mut refs = vec!["q1".to_string(), "q2".to_string()];
            if i < 2 {
                refs.push("P".into());
            }
            specs.push((format!("n{i}"), 2010, "W".into(), refs));
        }
        let papers = specs.into_iter().map(|(id, y, v, r)| PaperRecord::new(id, y, v, r)).collect();
        let g = build_graph(&Corpus::new(papers, "t").unwrap());
        let cfg = FeatureConfig::default();
        assert_eq!(venue_impact_factor(&g, "V", 2010, 2).value, 7.0);
        assert_eq!(saliency(&g, "P", 2010, &cfg).unwrap(), 5.0 - 7.0);
    }

    #[test]
    fn batch_matches_single_and_preserves_order() {
        let g = two_clique_citers();
        let cfg = FeatureConfig::default();
        let ids: Vec<String> = ["P", "a1", "b1"].iter().map(|s| s.to_string()).collect();
        let batch = extract_features(&g, &ids, 2006, &cfg).unwrap();
        for (id, fv) in ids.iter().zip(&batch) {
            assert_eq!(&extract_features(&g, &[id.clone()], 2006, &cfg).unwrap()[0], fv);
        }
        let rev: Vec<String> = ids.iter().rev().cloned().collect();
        let rb = extract_features(&g, &rev, 2006, &cfg).unwrap();
        assert_eq!(rb.iter().rev().cloned().collect::<Vec<_>>(), batch);
        assert!(matches!(
            extract_features(&g, &["zz".into()], 2006, &cfg),
            Err(Error::UnknownPaper(id)) if id == "zz"
        ));
    }

    #[test]
    fn config_validation() {
        let cfg = FeatureConfig {
            saliency_window: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = FeatureConfig {
            punish: -1.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn features_csv_header() {
        let g = two_clique_citers();
        let fv = extract_features(&g, &["P".into()], 2000, &FeatureConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_features_csv(&fv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(
            s,
            "paper_id,as_of_year,diversity,timeliness,saliency,flags\nP,2000,1,0,0,zero_gap|unknown_venue|edgeless_neighbourhood\n"
        );
    }
}
