//! Spatial adjacency and graph-distance neighborhoods.
//!
//! A node j belongs to the neighborhood ∂(i) when its graph distance
//! from i is at most the configured limit d. Edge weights in the input
//! format are accepted but ignored: the Markov-random-field weighting
//! downstream uses indicator counts only.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Adjacency structure plus the depth-d neighborhoods derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    pub node_ids: Vec<String>,
    /// Undirected edges as index pairs with i < j, deduplicated.
    pub edges: Vec<(usize, usize)>,
    /// Graph-distance limit used to build the neighborhoods.
    pub neighbor_limit: usize,
    /// ∂(i): sorted indices j ≠ i with distance(i, j) <= neighbor_limit.
    pub neighborhoods: Vec<Vec<usize>>,
}

impl NeighborhoodGraph {
    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn neighborhood(&self, i: usize) -> &[usize] {
        &self.neighborhoods[i]
    }

    /// Graph with no edges over `n` anonymous nodes (every ∂(i) empty).
    pub fn edgeless(n: usize) -> Self {
        Self {
            node_ids: (0..n).map(|i| format!("n{i}")).collect(),
            edges: Vec::new(),
            neighbor_limit: 1,
            neighborhoods: vec![Vec::new(); n],
        }
    }
}

/// Parse adjacency CSV lines `id_a,id_b[,weight]` against a declared node
/// universe. Rejects unknown ids, self-loops, and duplicate edges, with
/// the offending line number.
pub fn parse_adjacency(text: &str, path: &str, node_ids: &[String]) -> Result<Vec<(usize, usize)>> {
    let index_of = |id: &str| node_ids.iter().position(|n| n == id);
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if lineno == 1 && line.to_ascii_lowercase().starts_with("id_a") {
            continue; // optional header
        }
        let mut parts = line.split(',').map(str::trim);
        let a = parts.next().unwrap_or_default();
        let b = parts.next().unwrap_or_default();
        if a.is_empty() || b.is_empty() {
            return Err(Error::parse(path, lineno, "expected `id_a,id_b[,weight]`"));
        }
        if let Some(w) = parts.next() {
            if w.parse::<f64>().is_err() {
                return Err(Error::parse(path, lineno, format!("bad weight `{w}`")));
            }
        }
        if a == b {
            return Err(Error::parse(path, lineno, format!("self-loop on `{a}`")));
        }
        let (Some(ia), Some(ib)) = (index_of(a), index_of(b)) else {
            let unknown = if index_of(a).is_none() { a } else { b };
            return Err(Error::parse(path, lineno, format!("unknown node id `{unknown}`")));
        };
        let edge = (ia.min(ib), ia.max(ib));
        if edges.contains(&edge) {
            return Err(Error::parse(path, lineno, format!("duplicate edge `{a},{b}`")));
        }
        edges.push(edge);
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Read and validate an adjacency file.
pub fn load_adjacency(path: &str, node_ids: &[String]) -> Result<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_adjacency(&text, path, node_ids)
}

/// Build depth-d neighborhoods by truncated BFS from every node.
pub fn neighborhoods(
    node_ids: Vec<String>,
    edges: Vec<(usize, usize)>,
    neighbor_limit: usize,
) -> Result<NeighborhoodGraph> {
    if neighbor_limit == 0 {
        return Err(Error::invalid("neighbor limit must be at least 1"));
    }
    let n = node_ids.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        if a >= n || b >= n {
            return Err(Error::invalid(format!("edge ({a}, {b}) outside 0..{n}")));
        }
        if a == b {
            return Err(Error::invalid(format!("self-loop on node {a}")));
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut hoods = Vec::with_capacity(n);
    for start in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        let mut hood = Vec::new();
        while let Some(u) = queue.pop_front() {
            if dist[u] == neighbor_limit {
                continue;
            }
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    hood.push(v);
                    queue.push_back(v);
                }
            }
        }
        hood.sort_unstable();
        hoods.push(hood);
    }
    Ok(NeighborhoodGraph {
        node_ids,
        edges,
        neighbor_limit,
        neighborhoods: hoods,
    })
}

/// The US state contiguity fixture bundled with the crate (50 states
/// plus DC; DC borders MD and VA; AK and HI have no land neighbors and
/// therefore empty neighborhoods).
pub const US_CONTIGUITY_CSV: &str = include_str!("../data/us_state_contiguity.csv");

/// Fixture edges restricted to a node universe: pairs with an endpoint
/// outside the universe are dropped rather than rejected.
pub fn us_contiguity_edges(node_ids: &[String]) -> Vec<(usize, usize)> {
    let index_of = |id: &str| node_ids.iter().position(|n| n == id);
    let mut edges = Vec::new();
    for line in US_CONTIGUITY_CSV.lines().skip(1) {
        let Some((a, b)) = line.trim().split_once(',') else {
            continue;
        };
        if let (Some(ia), Some(ib)) = (index_of(a.trim()), index_of(b.trim())) {
            edges.push((ia.min(ib), ia.max(ib)));
        }
    }
    edges.sort_unstable();
    edges
}

/// Neighborhood graph over a node universe from the bundled contiguity
/// fixture. Nodes absent from the fixture keep empty neighborhoods.
pub fn us_state_graph(node_ids: &[String], neighbor_limit: usize) -> Result<NeighborhoodGraph> {
    let edges = us_contiguity_edges(node_ids);
    neighborhoods(node_ids.to_vec(), edges, neighbor_limit)
}
