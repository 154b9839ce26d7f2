//! The immutable citation graph and its temporal queries.
//!
//! Every edge points from a citing paper to a cited paper and carries the
//! citing paper's publication year, which is the only timestamp a citation
//! corpus offers.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use serde::Serialize;

use crate::corpus::Corpus;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: String,
    pub year: i32,
    pub venue: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct InEdge {
    pub citing_year: i32,
    pub citing: usize,
}

#[derive(Debug, Clone)]
pub struct CitationGraph {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    /// Per cited node, sorted by `(citing_year, citing)`.
    in_edges: Vec<Vec<InEdge>>,
    /// Per citing node, sorted cited indices.
    out_edges: Vec<Vec<usize>>,
    venues: HashMap<String, Vec<usize>>,
    dangling: usize,
}

impl CitationGraph {
    fn from_parts(nodes: Vec<Node>, edges: impl IntoIterator<Item = (usize, usize)>, dangling: usize) -> Self {
        let n = nodes.len();
        let mut out_edges = vec![Vec::new(); n];
        for (citing, cited) in edges {
            out_edges[citing].push(cited);
        }
        let mut in_edges = vec![Vec::new(); n];
        for (citing, outs) in out_edges.iter_mut().enumerate() {
            outs.sort_unstable();
            outs.dedup();
            for &cited in outs.iter() {
                in_edges[cited].push(InEdge {
                    citing_year: nodes[citing].year,
                    citing,
                });
            }
        }
        for ins in &mut in_edges {
            ins.sort_unstable();
        }
        let mut venues: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if !node.venue.is_empty() {
                venues.entry(node.venue.clone()).or_default().push(i);
            }
        }
        let index = nodes.iter().enumerate().map(|(i, n)| (n.id.clone(), i)).collect();
        CitationGraph {
            nodes,
            index,
            in_edges,
            out_edges,
            venues,
            dangling,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::UnknownPaper(id.to_string()))
    }

    /// References that could not be resolved when the graph was built.
    pub fn dangling_references(&self) -> usize {
        self.dangling
    }

    pub fn in_edges(&self, idx: usize) -> &[InEdge] {
        &self.in_edges[idx]
    }

    pub fn out_edges(&self, idx: usize) -> &[usize] {
        &self.out_edges[idx]
    }

    pub fn in_degree(&self, idx: usize) -> usize {
        self.in_edges[idx].len()
    }

    /// In-edges with `citing_year <= as_of_year`.
    pub fn in_edges_until(&self, idx: usize, as_of_year: i32) -> &[InEdge] {
        let ins = &self.in_edges[idx];
        let end = ins.partition_point(|e| e.citing_year <= as_of_year);
        &ins[..end]
    }

    /// Papers published in `venue` (empty for unknown venues).
    pub fn venue_papers(&self, venue: &str) -> &[usize] {
        self.venues.get(venue).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All edges as `(citing, cited, citing_year)`, ordered by citing then cited index.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, i32)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(move |(citing, outs)| outs.iter().map(move |&cited| (citing, cited, self.nodes[citing].year)))
    }

    /// Induced subgraph on `members` (original indices, any order) keeping only
    /// edges with `citing_year <= as_of_year`. Node order follows original index.
    pub fn induced(&self, members: &[usize], as_of_year: i32) -> CitationGraph {
        let mut members = members.to_vec();
        members.sort_unstable();
        members.dedup();
        let local: HashMap<usize, usize> = members.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let nodes = members.iter().map(|&g| self.nodes[g].clone()).collect();
        let mut edges = Vec::new();
        for (l_citing, &g_citing) in members.iter().enumerate() {
            if self.nodes[g_citing].year > as_of_year {
                continue;
            }
            for cited in &self.out_edges[g_citing] {
                if let Some(&l_cited) = local.get(cited) {
                    edges.push((l_citing, l_cited));
                }
            }
        }
        CitationGraph::from_parts(nodes, edges, 0)
    }

    /// Writes the adjacency dump `citing_id,cited_id,citing_year`.
    pub fn write_edges_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["citing_id", "cited_id", "citing_year"])?;
        for (citing, cited, year) in self.edges() {
            w.write_record([&self.nodes[citing].id, &self.nodes[cited].id, &year.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One node per paper, one edge per resolvable reference. Dangling
/// references are counted and skipped; repeated pairs collapse.
pub fn build_graph(corpus: &Corpus) -> CitationGraph {
    let nodes = corpus
        .papers()
        .iter()
        .map(|p| Node {
            id: p.id.clone(),
            year: p.year,
            venue: p.venue.clone(),
        })
        .collect();
    let mut dangling = 0;
    let mut edges = Vec::new();
    for (citing, p) in corpus.papers().iter().enumerate() {
        for r in &p.references {
            match corpus.position(r) {
                Some(cited) if cited != citing => edges.push((citing, cited)),
                Some(_) => {}
                None => dangling += 1,
            }
        }
    }
    if dangling > 0 {
        log::warn!("build_graph: {dangling} dangling references excluded");
    }
    CitationGraph::from_parts(nodes, edges, dangling)
}

/// Original-graph indices reachable from `root` by following in-edges (citers,
/// citers of citers, ...) up to `max_depth` hops, considering only citations
/// made in or before `as_of_year`. Includes `root`; sorted.
pub fn khop_in_members(graph: &CitationGraph, root: usize, max_depth: usize, as_of_year: i32) -> Vec<usize> {
    let mut depth = HashMap::new();
    depth.insert(root, 0usize);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let d = depth[&v];
        if d == max_depth {
            continue;
        }
        for e in graph.in_edges_until(v, as_of_year) {
            if let std::collections::hash_map::Entry::Vacant(slot) = depth.entry(e.citing) {
                slot.insert(d + 1);
                queue.push_back(e.citing);
            }
        }
    }
    let mut members: Vec<usize> = depth.into_keys().collect();
    members.sort_unstable();
    members
}

/// The time-filtered k-hop in-neighbourhood of `paper_id` as an induced subgraph
/// (all edges among the retained nodes made in or before `as_of_year`).
pub fn khop_in_subgraph(graph: &CitationGraph, paper_id: &str, max_depth: usize, as_of_year: i32) -> Result<CitationGraph> {
    let root = graph.require(paper_id)?;
    let members = khop_in_members(graph, root, max_depth, as_of_year);
    Ok(graph.induced(&members, as_of_year))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GainTrajectory {
    pub paper_id: String,
    pub publishing_year: i32,
    /// `gains[i]` = citations gained in calendar year `publishing_year + i`.
    pub gains: Vec<u32>,
}

impl GainTrajectory {
    pub fn total(&self) -> u64 {
        self.gains.iter().map(|&g| g as u64).sum()
    }
}

/// Yearly citation gains from the publication year through `as_of_year`.
///
/// Citations dated before the publication year (possible in real dumps) are
/// credited to the publication year so that the gains always sum to the
/// time-filtered in-degree.
pub fn gain_trajectory(graph: &CitationGraph, paper_id: &str, as_of_year: i32) -> Result<GainTrajectory> {
    let idx = graph.require(paper_id)?;
    Ok(gain_trajectory_at(graph, idx, as_of_year)?)
}

pub(crate) fn gain_trajectory_at(graph: &CitationGraph, idx: usize, as_of_year: i32) -> Result<GainTrajectory> {
    let node = graph.node(idx);
    if as_of_year < node.year {
        return Err(Error::invalid(format!(
            "as_of_year {as_of_year} precedes publication year {} of `{}`",
            node.year, node.id
        )));
    }
    let gap = (as_of_year - node.year) as usize;
    let mut gains = vec![0u32; gap + 1];
    for e in graph.in_edges_until(idx, as_of_year) {
        let i = (e.citing_year - node.year).max(0) as usize;
        gains[i] += 1;
    }
    Ok(GainTrajectory {
        paper_id: node.id.clone(),
        publishing_year: node.year,
        gains,
    })
}

/// Citations with `from_year <= citing_year <= to_year`.
pub fn citations_in_window(graph: &CitationGraph, paper_id: &str, from_year: i32, to_year: i32) -> Result<usize> {
    let idx = graph.require(paper_id)?;
    citations_in_window_at(graph, idx, from_year, to_year)
}

pub(crate) fn citations_in_window_at(graph: &CitationGraph, idx: usize, from_year: i32, to_year: i32) -> Result<usize> {
    if from_year > to_year {
        return Err(Error::invalid(format!("empty window {from_year}..={to_year}")));
    }
    let ins = graph.in_edges(idx);
    let lo = ins.partition_point(|e| e.citing_year < from_year);
    let hi = ins.partition_point(|e| e.citing_year <= to_year);
    Ok(hi - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PaperRecord;

    fn corpus(specs: &[(&str, i32, &[&str])]) -> Corpus {
        let papers = specs
            .iter()
            .map(|(id, y, refs)| PaperRecord::new(*id, *y, "", refs.iter().map(|s| s.to_string()).collect()))
            .collect();
        Corpus::new(papers, "t").unwrap()
    }

    #[test]
    fn single_paper_no_edges() {
        let g = build_graph(&corpus(&[("a", 2000, &[])]));
        assert_eq!((g.n_nodes(), g.n_edges()), (1, 0));
    }

    #[test]
    fn single_edge_carries_citing_year() {
        let g = build_graph(&corpus(&[("A", 2005, &["B"]), ("B", 2000, &[])]));
        let edges: Vec<_> = g.edges().collect();
        assert_eq!(edges, vec![(0, 1, 2005)]);
    }

    #[test]
    fn chain_in_degrees() {
        let g = build_graph(&corpus(&[("A", 2010, &["B"]), ("B", 2005, &["C"]), ("C", 2000, &[])]));
        let deg = |id| g.in_degree(g.index_of(id).unwrap());
        assert_eq!((deg("A"), deg("B"), deg("C")), (0, 1, 1));
    }

    #[test]
    fn dangling_excluded_and_counted() {
        let g = build_graph(&corpus(&[("A", 2010, &["B", "missing"]), ("B", 2005, &[])]));
        assert_eq!(g.n_edges(), 1);
        assert_eq!(g.dangling_references(), 1);
    }

    fn three_node() -> CitationGraph {
        // P cited by A, A cited by B.
        build_graph(&corpus(&[("P", 2000, &[]), ("A", 2002, &["P"]), ("B", 2004, &["A"])]))
    }

    #[test]
    fn khop_zero_depth_is_singleton() {
        let g = three_node();
        let s = khop_in_subgraph(&g, "P", 0, 2020).unwrap();
        assert_eq!((s.n_nodes(), s.n_edges()), (1, 0));
    }

    #[test]
    fn khop_one_hop() {
        let g = three_node();
        let s = khop_in_subgraph(&g, "P", 1, 2020).unwrap();
        let ids: Vec<_> = s.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["P", "A"]);
        let edges: Vec<_> = s.edges().map(|(a, b, _)| (s.node(a).id.clone(), s.node(b).id.clone())).collect();
        assert_eq!(edges, vec![("A".to_string(), "P".to_string())]);
    }

    #[test]
    fn khop_time_filter_excludes_everything() {
        let g = three_node();
        let s = khop_in_subgraph(&g, "P", 3, 2001).unwrap();
        assert_eq!(s.n_nodes(), 1);
        assert!(khop_in_subgraph(&g, "nope", 1, 2001).is_err());
    }

    #[test]
    fn khop_includes_non_traversal_edges() {
        // A and B both cite P; B also cites A. Depth 1 reaches A and B; B->A is kept.
        let g = build_graph(&corpus(&[("P", 2000, &[]), ("A", 2001, &["P"]), ("B", 2002, &["P", "A"])]));
        let s = khop_in_subgraph(&g, "P", 1, 2002).unwrap();
        assert_eq!(s.n_edges(), 3);
    }

    #[test]
    fn gains_hand_count() {
        // Citers at +1, +1, +3; observed at +4.
        let g = build_graph(&corpus(&[
            ("P", 2000, &[]),
            ("a", 2001, &["P"]),
            ("b", 2001, &["P"]),
            ("c", 2003, &["P"]),
            ("d", 2006, &["P"]),
        ]));
        let t = gain_trajectory(&g, "P", 2004).unwrap();
        assert_eq!(t.gains, vec![0, 2, 0, 1, 0]);
        assert_eq!(t.total(), 3);
    }

    #[test]
    fn gains_uncited_all_zero() {
        let g = build_graph(&corpus(&[("P", 2000, &[])]));
        assert_eq!(gain_trajectory(&g, "P", 2005).unwrap().gains, vec![0; 6]);
        assert!(gain_trajectory(&g, "P", 1999).is_err());
    }

    #[test]
    fn window_counts() {
        let g = build_graph(&corpus(&[
            ("P", 2005, &[]),
            ("a", 2010, &["P"]),
            ("b", 2011, &["P"]),
            ("c", 2013, &["P"]),
        ]));
        assert_eq!(citations_in_window(&g, "P", 2010, 2011).unwrap(), 2);
        assert_eq!(citations_in_window(&g, "P", 2006, 2009).unwrap(), 0);
        assert_eq!(citations_in_window(&g, "P", i32::MIN, i32::MAX).unwrap(), 3);
        assert!(citations_in_window(&g, "P", 2012, 2011).is_err());
        assert!(citations_in_window(&g, "Q", 2010, 2011).is_err());
    }

    #[test]
    fn pre_publication_citation_lands_in_year_zero() {
        let g = build_graph(&corpus(&[("P", 2005, &[]), ("a", 2004, &["P"])]));
        assert_eq!(gain_trajectory(&g, "P", 2005).unwrap().gains, vec![1]);
    }

    #[test]
    fn edges_csv() {
        let g = three_node();
        let mut buf = Vec::new();
        g.write_edges_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "citing_id,cited_id,citing_year\nA,P,2002\nB,A,2004\n"
        );
    }
}
