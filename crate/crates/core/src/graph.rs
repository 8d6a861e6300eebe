//! Simple undirected graphs over dense node ids `0..n`.
//!
//! Besides construction from edge lists, this module carries the generators
//! used throughout the test-suite and the experiment harness, plus a plain
//! text edge-list format:
//!
//! ```text
//! # comment
//! n m
//! u v
//! ...
//! ```

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub type NodeId = usize;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("node id {id} out of range for a graph with {n} nodes")]
    OutOfRange { id: NodeId, n: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("edge probability {0} not in [0, 1]")]
    InvalidProbability(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad generator spec `{0}`")]
    BadSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable simple undirected graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
}

impl Graph {
    /// Builds a graph from unordered pairs. Duplicate pairs (in either
    /// orientation) collapse to a single edge.
    pub fn from_edge_list<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut adjacency = vec![Vec::new(); n];
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(GraphError::OutOfRange { id, n });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut twice = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Ok(Graph {
            adjacency,
            edge_count: twice / 2,
        })
    }

    /// Graph with `n` nodes and no edges.
    pub fn edgeless(n: usize) -> Result<Self, GraphError> {
        Self::from_edge_list(n, std::iter::empty())
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    #[inline]
    pub fn neighbors(&self, i: NodeId) -> &[NodeId] {
        &self.adjacency[i]
    }

    #[inline]
    pub fn degree(&self, i: NodeId) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.node_count() && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, list)| {
            list.iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// Checks the structural invariants: no self-loops, symmetric adjacency,
    /// sorted duplicate-free lists and a consistent edge count.
    pub fn audit(&self) -> Result<(), String> {
        let n = self.node_count();
        let mut twice = 0;
        for (i, list) in self.adjacency.iter().enumerate() {
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {i} is not strictly sorted"));
            }
            for &j in list {
                if j >= n {
                    return Err(format!("neighbor {j} of {i} out of range"));
                }
                if j == i {
                    return Err(format!("self-loop on {i}"));
                }
                if self.adjacency[j].binary_search(&i).is_err() {
                    return Err(format!("edge {i}-{j} is not symmetric"));
                }
            }
            twice += list.len();
        }
        if twice != 2 * self.edge_count {
            return Err(format!(
                "edge count {} does not match degree sum {twice}",
                self.edge_count
            ));
        }
        Ok(())
    }

    /// Number of connected components.
    pub fn component_count(&self) -> usize {
        self.components().iter().max().map_or(0, |&c| c + 1)
    }

    /// Component label per node, labels assigned in order of lowest node id.
    pub fn components(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Disjoint union; nodes of `other` are shifted by `self.node_count()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let shift = self.node_count();
        let edges = self
            .edges()
            .chain(other.edges().map(|(u, v)| (u + shift, v + shift)));
        Graph::from_edge_list(shift + other.node_count(), edges.collect::<Vec<_>>())
            .expect("union of valid graphs is valid")
    }

    /// Stable content digest (hex SHA-256 over the canonical edge list).
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_edge_list_string().as_bytes());
        hasher
            .finalize()
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Serializes to the edge-list text format. Output is canonical, so
    /// parsing and re-serializing gives identical bytes.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = format!("{} {}\n", self.node_count(), self.edge_count());
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |msg: String| GraphError::Parse {
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected two fields, found {}",
                    fields.len()
                )));
            }
            let a: usize = fields[0]
                .parse()
                .map_err(|_| parse_err(format!("not a node id: {}", fields[0])))?;
            let b: usize = fields[1]
                .parse()
                .map_err(|_| parse_err(format!("not a node id: {}", fields[1])))?;
            if header.is_none() {
                header = Some((a, b));
            } else {
                edges.push((a, b));
            }
        }
        let (n, m) = header.ok_or(GraphError::Parse {
            line: 0,
            msg: "missing `n m` header".into(),
        })?;
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: 0,
                msg: format!("header announces {m} edges, found {}", edges.len()),
            });
        }
        Self::from_edge_list(n, edges)
    }

    pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        Self::parse_edge_list(&fs::read_to_string(path)?)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        fs::write(path, self.to_edge_list_string())?;
        Ok(())
    }
}

pub fn gen_clique(k: usize) -> Result<Graph, GraphError> {
    if k < 2 {
        return Err(GraphError::InvalidSize(format!("clique needs k >= 2, got {k}")));
    }
    let edges = (0..k).flat_map(|u| (u + 1..k).map(move |v| (u, v)));
    Graph::from_edge_list(k, edges.collect::<Vec<_>>())
}

pub fn gen_path(n: usize) -> Result<Graph, GraphError> {
    if n < 1 {
        return Err(GraphError::InvalidSize("path needs n >= 1".into()));
    }
    Graph::from_edge_list(n, (1..n).map(|v| (v - 1, v)).collect::<Vec<_>>())
}

pub fn gen_cycle(n: usize) -> Result<Graph, GraphError> {
    if n < 3 {
        return Err(GraphError::InvalidSize(format!("cycle needs n >= 3, got {n}")));
    }
    Graph::from_edge_list(n, (0..n).map(|v| (v, (v + 1) % n)).collect::<Vec<_>>())
}

/// Star with center 0 and leaves `1..=leaves`.
pub fn gen_star(leaves: usize) -> Result<Graph, GraphError> {
    if leaves < 1 {
        return Err(GraphError::InvalidSize("star needs at least one leaf".into()));
    }
    Graph::from_edge_list(leaves + 1, (1..=leaves).map(|v| (0, v)).collect::<Vec<_>>())
}

pub mod double_star {
    //! Node ids of the 8-node double star.
    use super::NodeId;

    pub const LEFT_HUB: NodeId = 0;
    pub const RIGHT_HUB: NodeId = 1;
    pub const MIDDLES: [NodeId; 2] = [2, 3];
    pub const LEFT_LEAVES: [NodeId; 2] = [4, 5];
    pub const RIGHT_LEAVES: [NodeId; 2] = [6, 7];
}

/// Two degree-4 hubs that share two degree-2 middle nodes, each hub also
/// carrying two pendant leaves. Ids are listed in [`double_star`].
pub fn gen_double_star() -> Graph {
    use double_star::*;
    let mut edges = Vec::new();
    for m in MIDDLES {
        edges.push((LEFT_HUB, m));
        edges.push((RIGHT_HUB, m));
    }
    for l in LEFT_LEAVES {
        edges.push((LEFT_HUB, l));
    }
    for l in RIGHT_LEAVES {
        edges.push((RIGHT_HUB, l));
    }
    Graph::from_edge_list(8, edges).expect("static fixture")
}

/// G(n, p): each unordered pair independently with probability `p`.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph, GraphError> {
    if n < 1 {
        return Err(GraphError::InvalidSize("G(n,p) needs n >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(GraphError::InvalidProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edge_list(n, edges)
}

/// Uniform labeled tree via a random Prüfer sequence.
pub fn gen_random_tree(n: usize, seed: u64) -> Result<Graph, GraphError> {
    if n < 1 {
        return Err(GraphError::InvalidSize("tree needs n >= 1".into()));
    }
    if n <= 2 {
        return gen_path(n);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
    Graph::from_edge_list(n, prufer_decode(n, &code))
}

fn prufer_decode(n: usize, code: &[usize]) -> Vec<(NodeId, NodeId)> {
    let mut degree = vec![1usize; n];
    for &c in code {
        degree[c] += 1;
    }
    let mut leaves: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
        .filter(|&v| degree[v] == 1)
        .map(std::cmp::Reverse)
        .collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in code {
        let std::cmp::Reverse(leaf) = leaves.pop().expect("a Prüfer code always has a leaf");
        edges.push((leaf, c));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.push(std::cmp::Reverse(c));
        }
    }
    let std::cmp::Reverse(a) = leaves.pop().unwrap();
    let std::cmp::Reverse(b) = leaves.pop().unwrap();
    edges.push((a, b));
    edges
}

/// Random relabeling of `g`; used to check that results do not depend on ids.
pub fn relabel<R: Rng>(g: &Graph, rng: &mut R) -> (Graph, Vec<NodeId>) {
    let mut perm: Vec<NodeId> = (0..g.node_count()).collect();
    perm.shuffle(rng);
    let edges: Vec<_> = g.edges().map(|(u, v)| (perm[u], perm[v])).collect();
    (
        Graph::from_edge_list(g.node_count(), edges).expect("relabeling keeps validity"),
        perm,
    )
}

/// Textual generator spec, e.g. `clique:5`, `er:20:0.5:seed=7`, `doublestar`.
#[derive(Clone, Debug, PartialEq)]
pub enum GenSpec {
    Clique(usize),
    Path(usize),
    Cycle(usize),
    Star(usize),
    DoubleStar,
    ErdosRenyi { n: usize, p: f64, seed: u64 },
    Tree { n: usize, seed: u64 },
}

impl GenSpec {
    pub fn generate(&self) -> Result<Graph, GraphError> {
        match *self {
            GenSpec::Clique(k) => gen_clique(k),
            GenSpec::Path(n) => gen_path(n),
            GenSpec::Cycle(n) => gen_cycle(n),
            GenSpec::Star(l) => gen_star(l),
            GenSpec::DoubleStar => Ok(gen_double_star()),
            GenSpec::ErdosRenyi { n, p, seed } => gen_erdos_renyi(n, p, seed),
            GenSpec::Tree { n, seed } => gen_random_tree(n, seed),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            GenSpec::ErdosRenyi { seed, .. } | GenSpec::Tree { seed, .. } => Some(seed),
            _ => None,
        }
    }
}

impl FromStr for GenSpec {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GraphError::BadSpec(s.to_string());
        let parts: Vec<&str> = s.trim().split(':').collect();
        let size = |i: usize| -> Result<usize, GraphError> {
            parts.get(i).and_then(|p| p.parse().ok()).ok_or_else(bad)
        };
        let seed = |i: usize| -> Result<u64, GraphError> {
            match parts.get(i) {
                None => Ok(0),
                Some(p) => p
                    .strip_prefix("seed=")
                    .unwrap_or(p)
                    .parse()
                    .map_err(|_| bad()),
            }
        };
        let spec = match parts[0] {
            "clique" | "complete" if parts.len() == 2 => GenSpec::Clique(size(1)?),
            "path" if parts.len() == 2 => GenSpec::Path(size(1)?),
            "cycle" if parts.len() == 2 => GenSpec::Cycle(size(1)?),
            "star" if parts.len() == 2 => GenSpec::Star(size(1)?),
            "doublestar" if parts.len() == 1 => GenSpec::DoubleStar,
            "er" if (3..=4).contains(&parts.len()) => GenSpec::ErdosRenyi {
                n: size(1)?,
                p: parts[2].parse().map_err(|_| bad())?,
                seed: seed(3)?,
            },
            "tree" if (2..=3).contains(&parts.len()) => GenSpec::Tree {
                n: size(1)?,
                seed: seed(2)?,
            },
            _ => return Err(bad()),
        };
        Ok(spec)
    }
}

impl fmt::Display for GenSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GenSpec::Clique(k) => write!(f, "clique:{k}"),
            GenSpec::Path(n) => write!(f, "path:{n}"),
            GenSpec::Cycle(n) => write!(f, "cycle:{n}"),
            GenSpec::Star(l) => write!(f, "star:{l}"),
            GenSpec::DoubleStar => write!(f, "doublestar"),
            GenSpec::ErdosRenyi { n, p, seed } => write!(f, "er:{n}:{p}:seed={seed}"),
            GenSpec::Tree { n, seed } => write!(f, "tree:{n}:seed={seed}"),
        }
    }
}
