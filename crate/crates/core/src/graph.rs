//! Directed communication graphs: generators, strong-connectivity checking,
//! and the diameter / edge-utility functionals that feed the per-round
//! contraction coefficients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Attempt cap when regenerating random graphs until strong connectivity.
pub const RANDOM_GRAPH_ATTEMPT_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("generator needs at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("self loop at node {0} is not allowed")]
    SelfLoop(usize),
    #[error("node {node} out of range for {count} nodes")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("edge probability {0} must lie in (0, 1]")]
    EdgeProbabilityOutOfRange(f64),
    #[error("no strongly connected graph found after {0} attempts")]
    GenerationFailed(usize),
    #[error("operation requires a strongly connected graph")]
    NotStronglyConnected,
}

/// Immutable directed graph on nodes `0..n`. Edge `(i, j)` means `i` can
/// send to `j`. Self loops are never stored; self weights are handled by the
/// mixing-matrix recipe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    node_count: usize,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::TooFewNodes { needed: 1, got: 0 });
        }
        let mut out_adj = vec![Vec::new(); node_count];
        let mut in_adj = vec![Vec::new(); node_count];
        for &(i, j) in edges {
            if i == j {
                return Err(GraphError::SelfLoop(i));
            }
            for node in [i, j] {
                if node >= node_count {
                    return Err(GraphError::NodeOutOfRange {
                        node,
                        count: node_count,
                    });
                }
            }
            if !out_adj[i].contains(&j) {
                out_adj[i].push(j);
                in_adj[j].push(i);
            }
        }
        for adj in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            adj.sort_unstable();
        }
        Ok(Self {
            node_count,
            out_adj,
            in_adj,
        })
    }

    /// Complete digraph: every ordered pair is an edge.
    pub fn complete(node_count: usize) -> Self {
        let edges: Vec<(usize, usize)> = (0..node_count)
            .flat_map(|i| {
                (0..node_count)
                    .filter(move |&j| j != i)
                    .map(move |j| (i, j))
            })
            .collect();
        Self::new(node_count, &edges).expect("complete graph is always valid")
    }

    /// Directed cycle 0 -> 1 -> ... -> n-1 -> 0.
    pub fn cycle(node_count: usize) -> Result<Self, GraphError> {
        if node_count < 2 {
            return Err(GraphError::TooFewNodes {
                needed: 2,
                got: node_count,
            });
        }
        let edges: Vec<(usize, usize)> =
            (0..node_count).map(|i| (i, (i + 1) % node_count)).collect();
        Self::new(node_count, &edges)
    }

    /// Random digraph: each ordered pair becomes an edge independently with
    /// probability `p`. Regenerated wholesale until strongly connected, with
    /// a hard attempt cap. Deterministic given the seed.
    pub fn random(node_count: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        if node_count < 2 {
            return Err(GraphError::TooFewNodes {
                needed: 2,
                got: node_count,
            });
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(GraphError::EdgeProbabilityOutOfRange(p));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..RANDOM_GRAPH_ATTEMPT_CAP {
            let mut edges = Vec::new();
            for i in 0..node_count {
                for j in 0..node_count {
                    if i != j && rng.gen::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            let g = Self::new(node_count, &edges)?;
            if g.is_strongly_connected() {
                return Ok(g);
            }
        }
        Err(GraphError::GenerationFailed(RANDOM_GRAPH_ATTEMPT_CAP))
    }

    /// Degree-skewed digraph: a seeded node permutation is laid out on a
    /// Hamiltonian cycle; the first ceil(n/5) nodes act as sink hubs that
    /// receive from every non-sink node but emit only their cycle edge, and
    /// the next ceil(n/5) act as source hubs that emit to every node outside
    /// the source group but receive only their cycle edge. The cycle keeps
    /// the graph strongly connected by construction.
    pub fn unbalanced(node_count: usize, seed: u64) -> Result<Self, GraphError> {
        if node_count < 3 {
            return Err(GraphError::TooFewNodes {
                needed: 3,
                got: node_count,
            });
        }
        let hubs = node_count.div_ceil(5);
        let mut order: Vec<usize> = (0..node_count).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Fisher-Yates, explicit so the result is stable across rand versions.
        for i in (1..node_count).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let sink = &order[..hubs];
        let source = &order[hubs..2 * hubs];
        let is_sink = |v: usize| sink.contains(&v);
        let is_source = |v: usize| source.contains(&v);

        let mut edges = Vec::new();
        for k in 0..node_count {
            edges.push((order[k], order[(k + 1) % node_count]));
        }
        for &q in source {
            for v in 0..node_count {
                if v != q && !is_source(v) {
                    edges.push((q, v));
                }
            }
        }
        for &s in sink {
            for v in 0..node_count {
                if v != s && !is_sink(v) {
                    edges.push((v, s));
                }
            }
        }
        Self::new(node_count, &edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.out_adj.iter().map(Vec::len).sum()
    }

    /// All edges in sorted order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (i, adj) in self.out_adj.iter().enumerate() {
            for &j in adj {
                out.push((i, j));
            }
        }
        out
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.out_adj[i].binary_search(&j).is_ok()
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_adj[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_adj[i].len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_adj[i].len()
    }

    fn bfs_distances(&self, start: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &self.out_adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs shortest-path lengths via one BFS per node.
    pub fn all_pairs_distances(&self) -> Vec<Vec<usize>> {
        (0..self.node_count)
            .map(|s| self.bfs_distances(s))
            .collect()
    }

    /// True when every ordered node pair is joined by a directed path.
    pub fn is_strongly_connected(&self) -> bool {
        (0..self.node_count).all(|s| self.bfs_distances(s).iter().all(|&d| d != usize::MAX))
    }

    /// Longest shortest directed path, in edges.
    pub fn diameter(&self) -> Result<usize, GraphError> {
        let dist = self.all_pairs_distances();
        let mut best = 0;
        for row in &dist {
            for &d in row {
                if d == usize::MAX {
                    return Err(GraphError::NotStronglyConnected);
                }
                best = best.max(d);
            }
        }
        Ok(best)
    }

    /// Maximum edge utility: fix one shortest path per ordered node pair by
    /// walking greedily toward the target and breaking ties on the lowest
    /// successor index, then return the largest number of selected paths
    /// crossing any single edge.
    #[allow(clippy::needless_range_loop)]
    pub fn max_edge_utility(&self) -> Result<usize, GraphError> {
        let dist = self.all_pairs_distances();
        if dist.iter().any(|row| row.contains(&usize::MAX)) {
            return Err(GraphError::NotStronglyConnected);
        }
        let mut usage: std::collections::HashMap<(usize, usize), usize> =
            std::collections::HashMap::new();
        for s in 0..self.node_count {
            for t in 0..self.node_count {
                if s == t {
                    continue;
                }
                let mut u = s;
                while u != t {
                    // out_adj is sorted, so the first admissible successor is
                    // the lowest-index one.
                    let next = self.out_adj[u]
                        .iter()
                        .copied()
                        .find(|&v| dist[v][t] + 1 == dist[u][t])
                        .expect("strongly connected graph always has a next hop");
                    *usage.entry((u, next)).or_insert(0) += 1;
                    u = next;
                }
            }
        }
        Ok(usage.values().copied().max().unwrap_or(0))
    }
}

/// Periodic sequence of strongly connected digraphs; the graph at round `k`
/// is `graphs[k mod period]`.
#[derive(Debug, Clone)]
pub struct DigraphSequence {
    graphs: Vec<Digraph>,
}

impl DigraphSequence {
    pub fn new(graphs: Vec<Digraph>) -> Result<Self, GraphError> {
        if graphs.is_empty() {
            return Err(GraphError::TooFewNodes { needed: 1, got: 0 });
        }
        let n = graphs[0].node_count();
        for g in &graphs {
            if g.node_count() != n {
                return Err(GraphError::NodeOutOfRange {
                    node: g.node_count(),
                    count: n,
                });
            }
            if !g.is_strongly_connected() {
                return Err(GraphError::NotStronglyConnected);
            }
        }
        Ok(Self { graphs })
    }

    pub fn single(graph: Digraph) -> Result<Self, GraphError> {
        Self::new(vec![graph])
    }

    pub fn period(&self) -> usize {
        self.graphs.len()
    }

    pub fn node_count(&self) -> usize {
        self.graphs[0].node_count()
    }

    pub fn graphs(&self) -> &[Digraph] {
        &self.graphs
    }

    pub fn at_round(&self, round: usize) -> &Digraph {
        &self.graphs[round % self.graphs.len()]
    }
}
