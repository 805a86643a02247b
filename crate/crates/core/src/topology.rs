//! Communication graphs between arms and the gossip weights defined on them.
//!
//! A [`Graph`] is undirected and simple; every node implicitly belongs to its own
//! neighborhood. A [`CombinationMatrix`] holds the weight `a[l][k]` that arm `k`
//! applies to whatever it hears from arm `l`. Weights produced by
//! [`metropolis_weights`] are symmetric, doubly stochastic and supported on the
//! closed neighborhoods of the graph, so repeated averaging converges to the
//! network mean at a rate governed by [`mixing_rate`].

use std::collections::VecDeque;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Stream id used for every graph draw. Shared with the engine's seed derivation.
pub const GRAPH_STREAM: u64 = 1;

/// Entry-wise tolerance for the doubly-stochastic and symmetry checks.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("edge probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("no connected graph after {attempts} attempts (K={k}, p={p})")]
    ResampleExhausted { k: usize, p: f64, attempts: u32 },
    #[error("adjacency is not symmetric at ({0}, {1})")]
    Asymmetric(usize, usize),
    #[error("node index {index} out of range for K={k}")]
    NodeOutOfRange { index: usize, k: usize },
    #[error("expected a {expected}x{expected} matrix, got {rows} rows / row {row} of length {len}")]
    Shape {
        expected: usize,
        rows: usize,
        row: usize,
        len: usize,
    },
    #[error("matrix is not symmetric at ({row}, {col}): {a} vs {b}")]
    NotSymmetric {
        row: usize,
        col: usize,
        a: f64,
        b: f64,
    },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Undirected simple graph on `K` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    k: usize,
    // Row-major K*K; the diagonal is always false.
    adj: Vec<bool>,
}

impl Graph {
    /// Graph with no edges.
    pub fn empty(k: usize) -> Self {
        Self {
            k,
            adj: vec![false; k * k],
        }
    }

    pub fn complete(k: usize) -> Self {
        let mut g = Self::empty(k);
        for a in 0..k {
            for b in (a + 1)..k {
                g.set_edge(a, b);
            }
        }
        g
    }

    /// Path `0 - 1 - ... - (k-1)`.
    pub fn path(k: usize) -> Self {
        let mut g = Self::empty(k);
        for a in 1..k {
            g.set_edge(a - 1, a);
        }
        g
    }

    pub fn from_edges(k: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        let mut g = Self::empty(k);
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= k {
                    return Err(TopologyError::NodeOutOfRange { index, k });
                }
            }
            if a != b {
                g.set_edge(a, b);
            }
        }
        Ok(g)
    }

    /// Builds a graph from 0/1 rows. Diagonal entries are ignored.
    pub fn from_adjacency(rows: &[Vec<u8>]) -> Result<Self, TopologyError> {
        let k = rows.len();
        let mut g = Self::empty(k);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(TopologyError::Shape {
                    expected: k,
                    rows: k,
                    row: a,
                    len: row.len(),
                });
            }
            for (b, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(TopologyError::Parse {
                        line: a + 2,
                        msg: format!("adjacency entry {v} is not 0/1"),
                    });
                }
                if (v == 1) != (rows[b][a] == 1) {
                    return Err(TopologyError::Asymmetric(a, b));
                }
                if v == 1 && a != b {
                    g.set_edge(a, b);
                }
            }
        }
        Ok(g)
    }

    fn set_edge(&mut self, a: usize, b: usize) {
        self.adj[a * self.k + b] = true;
        self.adj[b * self.k + a] = true;
    }

    pub fn node_count(&self) -> usize {
        self.k
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a != b && self.adj[a * self.k + b]
    }

    /// Neighbors of `node`, excluding itself, in ascending order.
    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adj[node * self.k..(node + 1) * self.k];
        row.iter()
            .enumerate()
            .filter_map(|(b, &e)| e.then_some(b))
    }

    /// `N_k` including `node` itself, ascending.
    pub fn closed_neighborhood(&self, node: usize) -> Vec<usize> {
        (0..self.k)
            .filter(|&b| b == node || self.has_edge(node, b))
            .collect()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors(node).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.k {
            for b in (a + 1)..self.k {
                if self.adj[a * self.k + b] {
                    out.push((a, b));
                }
            }
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        if self.k == 0 {
            return false;
        }
        let mut seen = vec![false; self.k];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.k
    }

    /// Plain-text form: `K` on the first line, then one row of space-separated 0/1 per node.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.k);
        for a in 0..self.k {
            let row: Vec<&str> = (0..self.k)
                .map(|b| if self.has_edge(a, b) { "1" } else { "0" })
                .collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TopologyError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let k: usize = first.trim().parse().map_err(|_| TopologyError::Parse {
            line: 1,
            msg: format!("expected node count, found {first:?}"),
        })?;
        let mut rows = Vec::with_capacity(k);
        for (i, line) in lines {
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<u8>().map_err(|_| TopologyError::Parse {
                        line: i + 1,
                        msg: format!("bad adjacency entry {tok:?}"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.len() != k {
            return Err(TopologyError::Parse {
                line: rows.len() + 2,
                msg: format!("expected {k} adjacency rows, found {}", rows.len()),
            });
        }
        Self::from_adjacency(&rows)
    }
}

/// Outcome of one Erdős–Rényi draw. Connectivity is reported, not enforced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErdosRenyiSample {
    pub graph: Graph,
    pub connected: bool,
}

/// Draws `G(K, p)`.
///
/// The RNG is `ChaCha8Rng::seed_from_u64(seed)` on stream [`GRAPH_STREAM`]. Pairs are
/// visited lexicographically `(0,1), (0,2), ..., (K-2,K-1)` and each consumes one
/// uniform `f64` draw `u`; the edge is present iff `u < p`.
pub fn generate_erdos_renyi(k: usize, p: f64, seed: u64) -> Result<ErdosRenyiSample, TopologyError> {
    if k < 2 {
        return Err(TopologyError::TooFewNodes(k));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(TopologyError::BadProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(GRAPH_STREAM);
    let mut graph = Graph::empty(k);
    for a in 0..k {
        for b in (a + 1)..k {
            let u: f64 = rng.gen();
            if u < p {
                graph.set_edge(a, b);
            }
        }
    }
    let connected = graph.is_connected();
    Ok(ErdosRenyiSample { graph, connected })
}

/// A connected draw found by resampling with `seed, seed + 1, ...`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectedDraw {
    pub graph: Graph,
    pub seed: u64,
    pub attempts: u32,
}

pub fn connected_erdos_renyi(
    k: usize,
    p: f64,
    seed: u64,
    max_attempts: u32,
) -> Result<ConnectedDraw, TopologyError> {
    for attempt in 0..max_attempts {
        let s = seed.wrapping_add(attempt as u64);
        let sample = generate_erdos_renyi(k, p, s)?;
        if sample.connected {
            return Ok(ConnectedDraw {
                graph: sample.graph,
                seed: s,
                attempts: attempt + 1,
            });
        }
    }
    Err(TopologyError::ResampleExhausted {
        k,
        p,
        attempts: max_attempts,
    })
}

/// Dense `K x K` gossip weights; `get(l, k)` is the weight arm `k` puts on arm `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    k: usize,
    a: Vec<f64>,
}

impl CombinationMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TopologyError> {
        let k = rows.len();
        let mut a = Vec::with_capacity(k * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(TopologyError::Shape {
                    expected: k,
                    rows: k,
                    row: i,
                    len: row.len(),
                });
            }
            a.extend_from_slice(row);
        }
        Ok(Self { k, a })
    }

    pub fn identity(k: usize) -> Self {
        let mut a = vec![0.0; k * k];
        for i in 0..k {
            a[i * k + i] = 1.0;
        }
        Self { k, a }
    }

    /// Every entry `1/K`: exact consensus in one step.
    pub fn uniform(k: usize) -> Self {
        Self {
            k,
            a: vec![1.0 / k as f64; k * k],
        }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.a[l * self.k + k]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.k).map(|r| r.to_vec()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.first_asymmetry(tol).is_none()
    }

    fn first_asymmetry(&self, tol: f64) -> Option<(usize, usize)> {
        for r in 0..self.k {
            for c in (r + 1)..self.k {
                if (self.get(r, c) - self.get(c, r)).abs() > tol {
                    return Some((r, c));
                }
            }
        }
        None
    }

    /// Every violated matrix invariant, as human-readable strings. Empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let k = self.k;
        let mut out = Vec::new();
        if let Some((r, c)) = self.a.iter().position(|&v| v < 0.0 || !v.is_finite()).map(|i| (i / k, i % k)) {
            out.push(format!("negative or non-finite entry at ({r}, {c})"));
        }
        for i in 0..k {
            let row: f64 = (0..k).map(|j| self.get(i, j)).sum();
            let col: f64 = (0..k).map(|j| self.get(j, i)).sum();
            if (row - 1.0).abs() > STOCHASTIC_TOL {
                out.push(format!("row {i} sums to {row}"));
            }
            if (col - 1.0).abs() > STOCHASTIC_TOL {
                out.push(format!("column {i} sums to {col}"));
            }
        }
        if let Some((r, c)) = self.first_asymmetry(STOCHASTIC_TOL) {
            out.push(format!("asymmetric at ({r}, {c})"));
        }
        if !(0..k).any(|i| self.get(i, i) > 0.0) {
            out.push("no positive self-loop".into());
        }
        if !self.support_graph().is_connected() {
            out.push("positive entries do not connect all nodes".into());
        }
        out
    }

    /// Graph of off-diagonal positive entries.
    pub fn support_graph(&self) -> Graph {
        let mut g = Graph::empty(self.k);
        for r in 0..self.k {
            for c in 0..self.k {
                if r != c && (self.get(r, c) > 0.0 || self.get(c, r) > 0.0) {
                    g.set_edge(r, c);
                }
            }
        }
        g
    }

    /// True iff every positive off-diagonal weight sits on an edge of `g`.
    pub fn respects(&self, g: &Graph) -> bool {
        g.node_count() == self.k
            && (0..self.k).all(|r| {
                (0..self.k).all(|c| r == c || self.get(r, c) == 0.0 || g.has_edge(r, c))
            })
    }

    /// `K` rows of decimal floats, full round-trip precision.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in self.a.chunks(self.k) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }
}

/// Metropolis weights with the self-inclusive degree `n_k = deg(k) + 1`:
/// `a[l][k] = 1 / max(n_k, n_l)` on edges, the diagonal absorbs the remainder.
pub fn metropolis_weights(g: &Graph) -> Result<CombinationMatrix, TopologyError> {
    let k = g.node_count();
    if k < 2 {
        return Err(TopologyError::TooFewNodes(k));
    }
    if !g.is_connected() {
        return Err(TopologyError::Disconnected);
    }
    let n: Vec<usize> = (0..k).map(|v| g.degree(v) + 1).collect();
    let mut a = vec![0.0; k * k];
    for (l, m) in g.edges() {
        let w = 1.0 / n[l].max(n[m]) as f64;
        a[l * k + m] = w;
        a[m * k + l] = w;
    }
    for v in 0..k {
        let off: f64 = (0..k).filter(|&u| u != v).map(|u| a[u * k + v]).sum();
        a[v * k + v] = 1.0 - off;
    }
    Ok(CombinationMatrix { k, a })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingReport {
    /// Spectral radius of `A - J/K`.
    pub lambda: f64,
    pub is_valid: bool,
    pub violations: Vec<String>,
}

/// Largest absolute eigenvalue of `A - (1/K) 1 1^T`, via a dense symmetric eigensolver.
pub fn mixing_rate(a: &CombinationMatrix) -> Result<MixingReport, TopologyError> {
    if let Some((row, col)) = a.first_asymmetry(STOCHASTIC_TOL) {
        return Err(TopologyError::NotSymmetric {
            row,
            col,
            a: a.get(row, col),
            b: a.get(col, row),
        });
    }
    let k = a.size();
    let centered = DMatrix::from_fn(k, k, |r, c| {
        // Symmetrize away sub-tolerance noise so the solver sees an exactly symmetric input.
        0.5 * (a.get(r, c) + a.get(c, r)) - 1.0 / k as f64
    });
    let eig = SymmetricEigen::new(centered);
    let lambda = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut violations = a.violations();
    if lambda >= 1.0 {
        violations.push(format!("mixing rate {lambda} is not below 1"));
    }
    Ok(MixingReport {
        lambda,
        is_valid: violations.is_empty(),
        violations,
    })
}

/// A connected graph, its Metropolis weights and their mixing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub graph: Graph,
    pub weights: CombinationMatrix,
    pub lambda: f64,
}

impl Network {
    pub fn metropolis(graph: Graph) -> Result<Self, TopologyError> {
        let weights = metropolis_weights(&graph)?;
        let lambda = mixing_rate(&weights)?.lambda;
        Ok(Self {
            graph,
            weights,
            lambda,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn assert_matrix(a: &CombinationMatrix, expected: &[[f64; 3]]) {
        for (r, row) in expected.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(a.get(r, c), v, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn rejects_tiny_graphs_and_bad_probability() {
        assert_eq!(generate_erdos_renyi(1, 0.5, 0), Err(TopologyError::TooFewNodes(1)));
        assert!(matches!(
            generate_erdos_renyi(4, 1.5, 0),
            Err(TopologyError::BadProbability(_))
        ));
    }

    #[test]
    fn p_one_gives_complete_graph() {
        for seed in 0..5 {
            let s = generate_erdos_renyi(5, 1.0, seed).unwrap();
            assert_eq!(s.graph, Graph::complete(5));
            assert!(s.connected);
        }
    }

    #[test]
    fn p_zero_is_disconnected() {
        let s = generate_erdos_renyi(4, 0.0, 3).unwrap();
        assert_eq!(s.graph.edge_count(), 0);
        assert!(!s.connected);
    }

    #[test]
    fn ten_node_graph_is_connected() {
        let s = generate_erdos_renyi(10, 0.6, 42).unwrap();
        assert_eq!(s.graph.node_count(), 10);
    }

    #[test]
    fn erdos_renyi_matches_reference_bit_stream() {
        // Reference: one uniform per lexicographic pair from the documented stream.
        let (k, p, seed) = (4, 0.5, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let mut expected = Vec::new();
        for a in 0..k {
            for b in (a + 1)..k {
                let u: f64 = rng.gen();
                if u < p {
                    expected.push((a, b));
                }
            }
        }
        let s = generate_erdos_renyi(k, p, seed).unwrap();
        assert_eq!(s.graph.edges(), expected);
    }

    #[test]
    fn same_seed_same_graph() {
        let a = generate_erdos_renyi(30, 0.3, 99).unwrap();
        let b = generate_erdos_renyi(30, 0.3, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resampling_finds_connected_graph() {
        let draw = connected_erdos_renyi(10, 0.3, 0, 1000).unwrap();
        assert!(draw.graph.is_connected());
        assert!(draw.attempts >= 1);
        assert_eq!(draw.seed, draw.attempts as u64 - 1);
    }

    #[test]
    fn resampling_gives_up() {
        assert!(matches!(
            connected_erdos_renyi(5, 0.0, 0, 3),
            Err(TopologyError::ResampleExhausted { attempts: 3, .. })
        ));
    }

    #[test]
    fn metropolis_two_node_path() {
        let a = metropolis_weights(&Graph::path(2)).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(a.get(r, c), 0.5);
            }
        }
    }

    #[test]
    fn metropolis_complete_three() {
        let a = metropolis_weights(&Graph::complete(3)).unwrap();
        let t = 1.0 / 3.0;
        assert_matrix(&a, &[[t, t, t], [t, t, t], [t, t, t]]);
    }

    #[test]
    fn metropolis_three_node_path() {
        let a = metropolis_weights(&Graph::path(3)).unwrap();
        let t = 1.0 / 3.0;
        assert_matrix(&a, &[[2.0 * t, t, 0.0], [t, t, t], [0.0, t, 2.0 * t]]);
        assert!(a.violations().is_empty());
        assert!(a.respects(&Graph::path(3)));
    }

    #[test]
    fn metropolis_rejects_disconnected() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert_eq!(metropolis_weights(&g), Err(TopologyError::Disconnected));
    }

    #[test]
    fn mixing_rate_uniform_is_zero() {
        let r = mixing_rate(&CombinationMatrix::uniform(6)).unwrap();
        assert!(r.lambda.abs() < 1e-12);
        assert!(r.is_valid);
    }

    #[test]
    fn mixing_rate_identity_is_one() {
        let r = mixing_rate(&CombinationMatrix::identity(4)).unwrap();
        assert_abs_diff_eq!(r.lambda, 1.0, epsilon = 1e-10);
        assert!(!r.is_valid);
    }

    #[test]
    fn mixing_rate_three_path() {
        // Characteristic polynomial of A: eigenvalues 1, 2/3, 0; centering removes the 1.
        let a = metropolis_weights(&Graph::path(3)).unwrap();
        let r = mixing_rate(&a).unwrap();
        assert_abs_diff_eq!(r.lambda, 2.0 / 3.0, epsilon = 1e-10);
        assert!(r.is_valid);
    }

    #[test]
    fn mixing_rate_two_path_is_zero() {
        let a = metropolis_weights(&Graph::path(2)).unwrap();
        assert!(mixing_rate(&a).unwrap().lambda < 1e-12);
    }

    #[test]
    fn mixing_rate_rejects_asymmetric() {
        let a = CombinationMatrix::from_rows(&[vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(mixing_rate(&a), Err(TopologyError::NotSymmetric { .. })));
    }

    #[test]
    fn graph_text_round_trip() {
        let g = generate_erdos_renyi(7, 0.5, 11).unwrap().graph;
        let text = g.to_text();
        assert!(text.starts_with("7\n"));
        assert_eq!(Graph::from_text(&text).unwrap(), g);
    }

    #[test]
    fn graph_text_errors_carry_line() {
        let err = Graph::from_text("3\n0 1 0\n1 0 x\n0 1 0\n").unwrap_err();
        assert_eq!(
            err,
            TopologyError::Parse {
                line: 3,
                msg: "bad adjacency entry \"x\"".into()
            }
        );
        assert!(matches!(
            Graph::from_text("2\n0 1\n0 0\n"),
            Err(TopologyError::Asymmetric(0, 1))
        ));
    }

    #[test]
    fn matrix_text_has_k_rows() {
        let a = metropolis_weights(&Graph::path(3)).unwrap();
        let text = a.to_text();
        assert_eq!(text.lines().count(), 3);
        let parsed: Vec<Vec<f64>> = text
            .lines()
            .map(|l| l.split(' ').map(|v| v.parse().unwrap()).collect())
            .collect();
        assert_eq!(CombinationMatrix::from_rows(&parsed).unwrap(), a);
    }

    #[test]
    fn closed_neighborhood_includes_self() {
        let g = Graph::path(4);
        assert_eq!(g.closed_neighborhood(1), vec![0, 1, 2]);
        assert_eq!(g.closed_neighborhood(3), vec![2, 3]);
    }
}
