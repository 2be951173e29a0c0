//! Simple undirected graphs, the edge-list text format, synthetic generators
//! and structural checks.

mod operators;

pub use operators::{
    apply_adjacency, apply_laplacian, normalized_adjacency, normalized_laplacian, random_walk_laplacian_with_self_loops,
    sqrt_degree_profile, Operators,
};

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Maximum reseeding attempts for Erdős–Rényi generation.
pub const ER_MAX_RETRIES: u64 = 100;

/// A simple undirected graph on nodes `0..n`.
///
/// Edges are stored once as ordered pairs `(u, v)` with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphChecks {
    pub connected: bool,
    pub bipartite: bool,
}

impl Graph {
    /// Builds a graph from unordered pairs, dropping duplicates.
    pub fn new(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("graph must have at least one node"));
        }
        let mut set = BTreeSet::new();
        for (u, v) in pairs {
            if u == v {
                return Err(Error::validation(format!("self-loop at node {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::validation(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            set.insert((u.min(v), u.max(v)));
        }
        if set.is_empty() {
            return Err(Error::validation("edge set is empty"));
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut degrees = vec![0; n];
        for &(u, v) in &edges {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        Ok(Self { n, edges, degrees })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Every edge in both orientations.
    pub fn ordered_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)])
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    pub fn is_regular(&self) -> bool {
        self.degrees.windows(2).all(|w| w[0] == w[1])
    }

    /// Fails with a validation error naming the first isolated node.
    pub fn require_no_isolated(&self) -> Result<()> {
        match self.degrees.iter().position(|&d| d == 0) {
            Some(i) => Err(Error::validation(format!("node {i} is isolated (degree 0)"))),
            None => Ok(()),
        }
    }

    pub fn require_connected(&self) -> Result<()> {
        if self.checks().connected {
            Ok(())
        } else {
            Err(Error::validation("graph is not connected"))
        }
    }

    /// Connectivity and bipartiteness by BFS 2-colouring.
    pub fn checks(&self) -> GraphChecks {
        let adj = self.neighbors();
        let mut colour: Vec<Option<bool>> = vec![None; self.n];
        let mut components = 0;
        let mut bipartite = true;
        for start in 0..self.n {
            if colour[start].is_some() {
                continue;
            }
            components += 1;
            colour[start] = Some(false);
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                let cu = colour[u].expect("queued nodes are coloured");
                for &v in &adj[u] {
                    match colour[v] {
                        None => {
                            colour[v] = Some(!cu);
                            queue.push_back(v);
                        }
                        Some(cv) if cv == cu => bipartite = false,
                        Some(_) => {}
                    }
                }
            }
        }
        GraphChecks {
            connected: components == 1,
            bipartite,
        }
    }

    /// Parses the edge-list text format.
    ///
    /// One `u v` pair per line, `#` starts a comment line, blank lines are
    /// skipped, and an optional `n <count>` line fixes the node count
    /// (otherwise it is the largest index plus one).
    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut declared_n = None;
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = lineno + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let first = tokens.next().expect("non-empty line has a token");
            if first == "n" {
                let count = tokens
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        msg: format!("expected `n <count>`, got `{line}`"),
                    })?;
                if tokens.next().is_some() || declared_n.is_some() {
                    return Err(Error::Parse {
                        line: lineno,
                        msg: "malformed or repeated `n` header".into(),
                    });
                }
                declared_n = Some(count);
                continue;
            }
            let parse_node = |tok: Option<&str>| {
                tok.and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| Error::Parse {
                        line: lineno,
                        msg: format!("expected `u v` with non-negative integers, got `{line}`"),
                    })
            };
            let u = parse_node(Some(first))?;
            let v = parse_node(tokens.next())?;
            if tokens.next().is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("trailing tokens in `{line}`"),
                });
            }
            if u == v {
                return Err(Error::validation(format!(
                    "self-loop at node {u} on line {lineno}"
                )));
            }
            pairs.push((u, v));
        }
        if pairs.is_empty() {
            return Err(Error::validation("edge set is empty"));
        }
        let inferred = pairs.iter().map(|&(u, v)| u.max(v)).max().unwrap_or(0) + 1;
        let n = match declared_n {
            Some(n) if n < inferred => {
                return Err(Error::validation(format!(
                    "header declares {n} nodes but edges reference node {}",
                    inferred - 1
                )))
            }
            Some(n) => n,
            None => inferred,
        };
        Self::new(n, pairs)
    }

    /// Serializes to the edge-list format with an explicit `n` header.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(u, v) in &self.edges {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    pub fn generate(kind: &GraphKind) -> Result<Self> {
        match *kind {
            GraphKind::CompleteBipartite(a, b) => {
                if a == 0 || b == 0 {
                    return Err(Error::validation("complete_bipartite needs a, b >= 1"));
                }
                Self::new(a + b, (0..a).flat_map(|i| (a..a + b).map(move |j| (i, j))))
            }
            GraphKind::Cycle(n) => {
                if n < 3 {
                    return Err(Error::validation("cycle needs n >= 3"));
                }
                Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
            }
            GraphKind::Path(n) => {
                if n < 2 {
                    return Err(Error::validation("path needs n >= 2"));
                }
                Self::new(n, (0..n - 1).map(|i| (i, i + 1)))
            }
            GraphKind::Complete(n) => {
                if n < 2 {
                    return Err(Error::validation("complete needs n >= 2"));
                }
                Self::new(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
            }
            GraphKind::ErdosRenyi { n, p, seed } => erdos_renyi(n, p, seed),
        }
    }
}

fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::validation("erdos_renyi needs n >= 2"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::validation(format!("erdos_renyi needs 0 < p <= 1, got {p}")));
    }
    for attempt in 0..ER_MAX_RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    pairs.push((i, j));
                }
            }
        }
        if pairs.is_empty() {
            continue;
        }
        let g = Graph::new(n, pairs)?;
        if g.checks().connected {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "erdos_renyi({n}, {p}, {seed}) produced no connected graph in {ER_MAX_RETRIES} attempts"
    )))
}

/// Synthetic graph families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphKind {
    CompleteBipartite(usize, usize),
    Cycle(usize),
    Path(usize),
    Complete(usize),
    ErdosRenyi { n: usize, p: f64, seed: u64 },
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::CompleteBipartite(a, b) => write!(f, "complete_bipartite({a},{b})"),
            GraphKind::Cycle(n) => write!(f, "cycle({n})"),
            GraphKind::Path(n) => write!(f, "path({n})"),
            GraphKind::Complete(n) => write!(f, "complete({n})"),
            GraphKind::ErdosRenyi { n, p, seed } => write!(f, "erdos_renyi({n},{p},{seed})"),
        }
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    /// Parses `name(arg,...)`, e.g. `complete_bipartite(5,5)` or `erdos_renyi(20,0.3,7)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unrecognised graph generator `{s}`"));
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let args: Vec<&str> = s[open + 1..s.len() - 1].split(',').map(str::trim).collect();
        let int = |i: usize| -> Result<usize> {
            args.get(i).and_then(|a| a.parse().ok()).ok_or_else(bad)
        };
        let kind = match (name, args.len()) {
            ("complete_bipartite", 2) => GraphKind::CompleteBipartite(int(0)?, int(1)?),
            ("cycle", 1) => GraphKind::Cycle(int(0)?),
            ("path", 1) => GraphKind::Path(int(0)?),
            ("complete", 1) => GraphKind::Complete(int(0)?),
            ("erdos_renyi", 3) => GraphKind::ErdosRenyi {
                n: int(0)?,
                p: args[1].parse().map_err(|_| bad())?,
                seed: args[2].parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        Ok(kind)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_edge() {
        let g = Graph::from_edge_list("0 1").unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.degrees(), &[1, 1]);
    }

    #[test]
    fn dedup_and_comments() {
        let g = Graph::from_edge_list("0 1\n1 0\n# c\n1 2").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
    }

    #[test]
    fn header_sets_node_count() {
        let g = Graph::from_edge_list("n 5\n0 1\n").unwrap();
        assert_eq!(g.n(), 5);
        assert!(g.require_no_isolated().is_err());
        assert!(Graph::from_edge_list("n 2\n0 4\n").is_err());
    }

    #[test]
    fn self_loop_rejected() {
        assert!(matches!(
            Graph::from_edge_list("0 0"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        match Graph::from_edge_list("0 1\n# ok\n1 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            Graph::from_edge_list("0 1 2"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::from_edge_list("-1 2"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_edge_set() {
        assert!(matches!(
            Graph::from_edge_list("# nothing\n\n"),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn generators() {
        let k22 = Graph::generate(&GraphKind::CompleteBipartite(2, 2)).unwrap();
        assert_eq!((k22.n(), k22.num_edges()), (4, 4));
        assert!(k22.degrees().iter().all(|&d| d == 2));

        let c4 = Graph::generate(&GraphKind::Cycle(4)).unwrap();
        assert_eq!((c4.n(), c4.num_edges()), (4, 4));
        assert_eq!(c4.degrees(), &[2, 2, 2, 2]);

        let k55 = Graph::generate(&GraphKind::CompleteBipartite(5, 5)).unwrap();
        assert_eq!((k55.n(), k55.num_edges()), (10, 25));
        assert!(k55.degrees().iter().all(|&d| d == 5));

        let p4 = Graph::generate(&GraphKind::Path(4)).unwrap();
        assert_eq!(p4.degrees(), &[1, 2, 2, 1]);
    }

    #[test]
    fn erdos_renyi_is_deterministic_and_connected() {
        let kind = GraphKind::ErdosRenyi { n: 25, p: 0.15, seed: 3 };
        let a = Graph::generate(&kind).unwrap();
        let b = Graph::generate(&kind).unwrap();
        assert_eq!(a, b);
        assert!(a.checks().connected);
    }

    #[test]
    fn erdos_renyi_gives_up() {
        let kind = GraphKind::ErdosRenyi { n: 200, p: 1e-6, seed: 0 };
        assert!(matches!(Graph::generate(&kind), Err(Error::Generation(_))));
    }

    #[test]
    fn structural_checks() {
        let k23 = Graph::generate(&GraphKind::CompleteBipartite(2, 3)).unwrap();
        assert_eq!(k23.checks(), GraphChecks { connected: true, bipartite: true });
        let c3 = Graph::generate(&GraphKind::Cycle(3)).unwrap();
        assert_eq!(c3.checks(), GraphChecks { connected: true, bipartite: false });
        let two = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(two.checks(), GraphChecks { connected: false, bipartite: true });
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Graph::generate(&GraphKind::ErdosRenyi { n: 12, p: 0.4, seed: 1 }).unwrap();
        assert_eq!(Graph::from_edge_list(&g.to_edge_list()).unwrap(), g);
    }

    #[test]
    fn generator_spec_parsing() {
        let k: GraphKind = "complete_bipartite(5, 5)".parse().unwrap();
        assert_eq!(k, GraphKind::CompleteBipartite(5, 5));
        let er: GraphKind = "erdos_renyi(20,0.3,7)".parse().unwrap();
        assert_eq!(er.to_string(), "erdos_renyi(20,0.3,7)");
        assert!("star(3)".parse::<GraphKind>().is_err());
    }
}
