//! Greedy modularity maximisation (Clauset–Newman–Moore) on the undirected
//! view of a citation subgraph, and an exhaustive oracle for small graphs.
//!
//! Modularity is `Q = sum_c [ L_c / m - (D_c / 2m)^2 ]` where `L_c` counts
//! edges inside community `c`, `D_c` sums its degrees and `m` is the edge count.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::Serialize;

use crate::graph::CitationGraph;
use crate::{Error, Result};

/// Simple undirected graph: no self-loops, no parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl UndirectedGraph {
    /// Normalises `edges` to `u < v`, dropping self-loops and duplicates.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut norm = Vec::new();
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::invalid(format!("edge ({u}, {v}) out of range for {n_nodes} nodes")));
            }
            if u != v {
                norm.push((u.min(v), u.max(v)));
            }
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(UndirectedGraph { n_nodes, edges: norm })
    }

    /// Direction dropped, reciprocal citations collapsed.
    pub fn from_citation_graph(graph: &CitationGraph) -> Self {
        Self::new(graph.n_nodes(), graph.edges().map(|(a, b, _)| (a, b))).expect("graph edges are in range")
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    /// Community index per node, contiguous from 0 in order of first appearance.
    pub assignment: Vec<usize>,
    pub n_communities: usize,
    pub modularity: f64,
}

impl Partition {
    fn from_labels(labels: &[usize], modularity: f64) -> Self {
        let mut remap = HashMap::new();
        let assignment: Vec<usize> = labels
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        Partition {
            n_communities: remap.len(),
            assignment,
            modularity,
        }
    }
}

/// Modularity of `assignment` (any labels, one per node).
pub fn modularity(graph: &UndirectedGraph, assignment: &[usize]) -> Result<f64> {
    if assignment.len() != graph.n_nodes {
        return Err(Error::invalid(format!(
            "assignment covers {} of {} nodes",
            assignment.len(),
            graph.n_nodes
        )));
    }
    let m = graph.n_edges();
    if m == 0 {
        return Err(Error::degenerate("modularity is undefined on a graph without edges"));
    }
    let mut inside: HashMap<usize, usize> = HashMap::new();
    let mut degree: HashMap<usize, usize> = HashMap::new();
    for &(u, v) in &graph.edges {
        let (cu, cv) = (assignment[u], assignment[v]);
        if cu == cv {
            *inside.entry(cu).or_default() += 1;
        }
        *degree.entry(cu).or_default() += 1;
        *degree.entry(cv).or_default() += 1;
    }
    Ok(q_from_counts(m, degree.iter().map(|(c, &d)| (inside.get(c).copied().unwrap_or(0), d))))
}

fn q_from_counts(m: usize, per_community: impl Iterator<Item = (usize, usize)>) -> f64 {
    let m = m as f64;
    per_community
        .map(|(l, d)| {
            let frac = d as f64 / (2.0 * m);
            l as f64 / m - frac * frac
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreedyOutcome {
    pub partition: Partition,
    /// Modularity of the singleton start followed by the value after each
    /// accepted merge. Empty for edgeless graphs.
    pub merge_trace: Vec<f64>,
    /// The graph had no edges: all nodes are singletons and modularity is
    /// reported as 0 by convention.
    pub zero_edge: bool,
}

/// Clauset–Newman–Moore fast greedy agglomeration.
///
/// Starts from singletons and repeatedly merges the pair of adjacent
/// communities with the largest modularity gain, stopping when no merge has a
/// positive gain. Gains are compared in exact integer arithmetic
/// (`2m·e_ij − a_i·a_j`); ties go to the lexicographically smallest pair of
/// community ids, where a community's id is its smallest node index.
pub fn fast_greedy(graph: &UndirectedGraph) -> Result<GreedyOutcome> {
    let n = graph.n_nodes;
    if n == 0 {
        return Err(Error::degenerate("community detection on an empty graph"));
    }
    let m = graph.n_edges();
    if m == 0 {
        return Ok(GreedyOutcome {
            partition: Partition::from_labels(&(0..n).collect::<Vec<_>>(), 0.0),
            merge_trace: Vec::new(),
            zero_edge: true,
        });
    }

    let deg = graph.degrees();
    let mut degree_sum: Vec<i128> = deg.iter().map(|&d| d as i128).collect();
    let mut links: Vec<BTreeMap<usize, i128>> = vec![BTreeMap::new(); n];
    for &(u, v) in &graph.edges {
        *links[u].entry(v).or_default() += 1;
        *links[v].entry(u).or_default() += 1;
    }
    let mut alive = vec![true; n];
    let mut label: Vec<usize> = (0..n).collect();
    let two_m = 2 * m as i128;
    let m_f = m as f64;

    let mut q = -deg.iter().map(|&d| (d as f64 / (2.0 * m_f)).powi(2)).sum::<f64>();
    let mut trace = vec![q];

    loop {
        let mut best: Option<(i128, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for (&j, &e) in links[i].range(i + 1..) {
                let score = two_m * e - degree_sum[i] * degree_sum[j];
                if score > 0 && best.is_none_or(|(s, _, _)| score > s) {
                    best = Some((score, i, j));
                }
            }
        }
        let Some((score, keep, gone)) = best else { break };

        let absorbed = std::mem::take(&mut links[gone]);
        for (other, e) in absorbed {
            if other == keep {
                continue;
            }
            links[other].remove(&gone);
            *links[other].entry(keep).or_default() += e;
            *links[keep].entry(other).or_default() += e;
        }
        links[keep].remove(&gone);
        degree_sum[keep] += degree_sum[gone];
        alive[gone] = false;
        for l in label.iter_mut() {
            if *l == gone {
                *l = keep;
            }
        }
        q += score as f64 / (2.0 * m_f * m_f);
        trace.push(q);
    }

    let exact = modularity(graph, &label)?;
    Ok(GreedyOutcome {
        partition: Partition::from_labels(&label, exact),
        merge_trace: trace,
        zero_edge: false,
    })
}

/// Largest graph the exhaustive oracle accepts (Bell(10) = 115 975 partitions).
pub const BRUTE_FORCE_MAX_NODES: usize = 10;

/// Exact maximum-modularity partition by enumerating every set partition
/// (restricted growth strings). The first maximiser in enumeration order wins.
pub fn brute_force_max_modularity(graph: &UndirectedGraph) -> Result<Partition> {
    let n = graph.n_nodes;
    if n == 0 {
        return Err(Error::degenerate("community detection on an empty graph"));
    }
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::invalid(format!(
            "exhaustive search supports at most {BRUTE_FORCE_MAX_NODES} nodes, got {n}"
        )));
    }
    let m = graph.n_edges();
    if m == 0 {
        return Err(Error::degenerate("modularity is undefined on a graph without edges"));
    }
    let deg = graph.degrees();
    let mut rgs = vec![0usize; n];
    let mut best_q = f64::NEG_INFINITY;
    let mut best = rgs.clone();
    let mut inside = vec![0usize; n];
    let mut dsum = vec![0usize; n];
    loop {
        inside.iter_mut().for_each(|x| *x = 0);
        dsum.iter_mut().for_each(|x| *x = 0);
        for &(u, v) in &graph.edges {
            if rgs[u] == rgs[v] {
                inside[rgs[u]] += 1;
            }
        }
        for (v, &d) in deg.iter().enumerate() {
            dsum[rgs[v]] += d;
        }
        let k = rgs.iter().max().unwrap() + 1;
        let q = q_from_counts(m, (0..k).map(|c| (inside[c], dsum[c])));
        if q > best_q + 1e-12 {
            best_q = q;
            best.copy_from_slice(&rgs);
        }
        if !next_rgs(&mut rgs) {
            break;
        }
    }
    let exact = modularity(graph, &best)?;
    Ok(Partition::from_labels(&best, exact))
}

/// Advances a restricted growth string; false after the last one.
fn next_rgs(a: &mut [usize]) -> bool {
    let n = a.len();
    for i in (1..n).rev() {
        let max_prefix = a[..i].iter().copied().max().unwrap_or(0);
        if a[i] <= max_prefix {
            a[i] += 1;
            a[i + 1..].iter_mut().for_each(|x| *x = 0);
            return true;
        }
    }
    false
}

/// Partition dump `node_id,community_index`.
pub fn write_partition_csv<W: Write>(node_ids: &[String], partition: &Partition, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node_id", "community_index"])?;
    for (id, c) in node_ids.iter().zip(&partition.assignment) {
        w.write_record([id.as_str(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
