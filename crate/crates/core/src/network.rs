//! Network topologies and Metropolis combination weights.
//!
//! Node indices are 0-based in memory and 1-based in every text format.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Number of position resamplings attempted before giving up on connectivity.
pub const MAX_TOPOLOGY_ATTEMPTS: u64 = 1000;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("topology needs at least one node")]
    Empty,
    #[error("connection radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error(
        "no connected {n}-node topology with radius {radius} after {attempts} attempts; \
         increase the radius"
    )]
    Disconnected { n: usize, radius: f64, attempts: u64 },
    #[error("graph is not connected")]
    NotConnected,
    #[error("edge ({0}, {1}) references a node outside 1..={2}")]
    NodeOutOfRange(usize, usize, usize),
    #[error("malformed edge list at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Undirected connected graph with self-inclusive neighborhoods.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    neighbors: Vec<Vec<usize>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Topology {
    /// Builds a topology from undirected 0-based edges. Self-loops are implied
    /// and may be omitted; duplicates are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, TopologyError> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        let mut neighbors: Vec<Vec<usize>> = (0..n).map(|k| vec![k]).collect();
        for &(k, l) in edges {
            if k >= n || l >= n {
                return Err(TopologyError::NodeOutOfRange(k + 1, l + 1, n));
            }
            if k != l {
                neighbors[k].push(l);
                neighbors[l].push(k);
            }
        }
        for set in &mut neighbors {
            set.sort_unstable();
            set.dedup();
        }
        let topology = Self { neighbors, positions: None };
        if !topology.is_connected() {
            return Err(TopologyError::NotConnected);
        }
        Ok(topology)
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    /// Self-inclusive neighbor set `N_k`, sorted ascending.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// `|N_k|`, counting node `k` itself.
    pub fn degree(&self, k: usize) -> usize {
        self.neighbors[k].len()
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    pub fn is_linked(&self, k: usize, l: usize) -> bool {
        self.neighbors[k].binary_search(&l).is_ok()
    }

    /// Undirected edges `(k, l)` with `k < l`, self-loops omitted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(k, set)| set.iter().filter(move |&&l| l > k).map(move |&l| (k, l)))
            .collect()
    }

    fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(k) = queue.pop_front() {
            for &l in &self.neighbors[k] {
                if !seen[l] {
                    seen[l] = true;
                    reached += 1;
                    queue.push_back(l);
                }
            }
        }
        reached == n
    }

    /// Plain-text edge list: first line `n`, then one `k l` line (1-based) per
    /// undirected edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{}\n", self.node_count());
        for (k, l) in self.edges() {
            let _ = writeln!(out, "{} {}", k + 1, l + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, TopologyError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, line)| (i + 1, line.trim()))
            .filter(|(_, line)| !line.is_empty());
        let (line_no, header) = lines.next().ok_or(TopologyError::Parse {
            line: 1,
            reason: "missing node count".into(),
        })?;
        let n: usize = header.parse().map_err(|_| TopologyError::Parse {
            line: line_no,
            reason: format!("expected node count, found {header:?}"),
        })?;
        let mut edges = Vec::new();
        for (line_no, line) in lines {
            let parsed: Vec<usize> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|_| TopologyError::Parse {
                    line: line_no,
                    reason: format!("expected two node indices, found {line:?}"),
                })?;
            match *parsed.as_slice() {
                [k, l] if k >= 1 && l >= 1 => edges.push((k - 1, l - 1)),
                [k, l] => return Err(TopologyError::NodeOutOfRange(k, l, n)),
                _ => {
                    return Err(TopologyError::Parse {
                        line: line_no,
                        reason: format!("expected two node indices, found {line:?}"),
                    })
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<(), TopologyError> {
        std::fs::write(path, self.to_edge_list()).map_err(|source| TopologyError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Random geometric graph on the unit square: nodes within `radius` of each
/// other are linked. Disconnected draws are resampled with seeds `seed + 1`,
/// `seed + 2`, ... up to [`MAX_TOPOLOGY_ATTEMPTS`].
pub fn generate_geometric_topology(
    n: usize,
    radius: f64,
    seed: u64,
) -> Result<Topology, TopologyError> {
    if n == 0 {
        return Err(TopologyError::Empty);
    }
    if !(radius > 0.0) {
        return Err(TopologyError::InvalidRadius(radius));
    }
    let r2 = radius * radius;
    for attempt in 0..MAX_TOPOLOGY_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
        let mut edges = Vec::new();
        for k in 0..n {
            for l in k + 1..n {
                let dx = positions[k][0] - positions[l][0];
                let dy = positions[k][1] - positions[l][1];
                if dx * dx + dy * dy <= r2 {
                    edges.push((k, l));
                }
            }
        }
        match Topology::from_edges(n, &edges) {
            Ok(mut topology) => {
                topology.positions = Some(positions);
                return Ok(topology);
            }
            Err(TopologyError::NotConnected) => continue,
            Err(other) => return Err(other),
        }
    }
    Err(TopologyError::Disconnected { n, radius, attempts: MAX_TOPOLOGY_ATTEMPTS })
}

/// Row-stochastic N x N combination weights together with the neighborhood
/// support they were built on.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    weights: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl CombinationMatrix {
    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn weight(&self, k: usize, l: usize) -> f64 {
        self.weights[(k, l)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Self-inclusive neighborhood of `k`, i.e. the support of row `k`.
    pub fn neighbors(&self, k: usize) -> &[usize] {
        &self.neighbors[k]
    }

    /// `(l, c_kl)` pairs over `N_k`.
    pub fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.neighbors[k].iter().map(move |&l| (l, self.weights[(k, l)]))
    }

    /// N rows of N comma-separated weights, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.node_count();
        let mut out = String::new();
        for k in 0..n {
            let row: Vec<String> = (0..n).map(|l| format!("{:.16e}", self.weights[(k, l)])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TopologyError> {
        std::fs::write(path, self.to_csv()).map_err(|source| TopologyError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Metropolis rule: `c_kl = 1 / max(|N_k|, |N_l|)` for linked `k != l`, zero
/// for unlinked pairs, and `c_kk` takes the remaining mass of row `k`.
/// Neighborhood sizes include the node itself.
pub fn metropolis_weights(topology: &Topology) -> CombinationMatrix {
    let n = topology.node_count();
    let mut weights = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut off_diagonal = 0.0;
        for &l in topology.neighbors(k) {
            if l != k {
                let c = 1.0 / topology.degree(k).max(topology.degree(l)) as f64;
                weights[(k, l)] = c;
                off_diagonal += c;
            }
        }
        weights[(k, k)] = 1.0 - off_diagonal;
    }
    CombinationMatrix { weights, neighbors: topology.neighbors.clone() }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    fn bfs_reachable(t: &Topology) -> usize {
        let mut seen = vec![false; t.node_count()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(k) = stack.pop() {
            for l in 0..t.node_count() {
                if t.is_linked(k, l) && !seen[l] {
                    seen[l] = true;
                    stack.push(l);
                }
            }
        }
        seen.iter().filter(|&&s| s).count()
    }

    #[test]
    fn single_node() {
        let t = generate_geometric_topology(1, 0.3, 7).unwrap();
        assert_eq!(t.neighbors(0), &[0]);
        let c = metropolis_weights(&t);
        assert_eq!(c.weight(0, 0), 1.0);
    }

    #[test]
    fn large_radius_gives_complete_pair() {
        let t = generate_geometric_topology(2, 1.5, 0).unwrap();
        assert_eq!(t.neighbors(0), &[0, 1]);
        assert_eq!(t.neighbors(1), &[0, 1]);
        let c = metropolis_weights(&t);
        for k in 0..2 {
            for l in 0..2 {
                assert_eq!(c.weight(k, l), 0.5);
            }
        }
    }

    #[test]
    fn twenty_nodes_connected() {
        let t = generate_geometric_topology(20, 0.35, 42).unwrap();
        assert_eq!(t.node_count(), 20);
        assert_eq!(bfs_reachable(&t), 20);
        for k in 0..20 {
            assert!(t.is_linked(k, k));
            for &l in t.neighbors(k) {
                assert!(t.is_linked(l, k));
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_geometric_topology(20, 0.35, 9).unwrap();
        let b = generate_geometric_topology(20, 0.35, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_radius_errors() {
        let err = generate_geometric_topology(30, 1e-4, 1).unwrap_err();
        assert!(matches!(err, TopologyError::Disconnected { n: 30, .. }));
        assert!(err.to_string().contains("radius"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(generate_geometric_topology(0, 0.3, 1), Err(TopologyError::Empty)));
        assert!(matches!(
            generate_geometric_topology(3, 0.0, 1),
            Err(TopologyError::InvalidRadius(_))
        ));
        assert!(matches!(
            Topology::from_edges(3, &[(0, 1)]),
            Err(TopologyError::NotConnected)
        ));
    }

    #[test]
    fn path_weights() {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let c = metropolis_weights(&t);
        let third = 1.0 / 3.0;
        let expected = [
            [2.0 * third, third, 0.0],
            [third, 1.0 - 2.0 * third, third],
            [0.0, third, 2.0 * third],
        ];
        for k in 0..3 {
            for l in 0..3 {
                assert!((c.weight(k, l) - expected[k][l]).abs() < 1e-15, "c[{k}][{l}]");
            }
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let t = generate_geometric_topology(12, 0.45, 3).unwrap();
        let text = t.to_edge_list();
        assert!(text.starts_with("12\n"));
        let parsed = Topology::from_edge_list(&text).unwrap();
        assert_eq!(parsed.edges(), t.edges());
    }

    #[test]
    fn edge_list_errors() {
        assert!(matches!(
            Topology::from_edge_list("3\n1 2\n2 x\n"),
            Err(TopologyError::Parse { line: 3, .. })
        ));
        assert!(matches!(
            Topology::from_edge_list("2\n1 3\n"),
            Err(TopologyError::NodeOutOfRange(1, 3, 2))
        ));
    }

    #[test]
    fn weights_csv_shape() {
        let t = Topology::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let csv = metropolis_weights(&t).to_csv();
        let rows: Vec<&str> = csv.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|r| r.split(',').count() == 3));
    }
}
