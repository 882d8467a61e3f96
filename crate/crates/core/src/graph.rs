//! Undirected communication graphs.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;

/// An undirected simple graph on nodes `0..node_count`.
///
/// Neighbor lists are kept sorted, so iteration order over neighbors is the
/// canonical "ascending neighbor" order used by every stacked layout in the
/// crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    positions: Option<Vec<[f64; 2]>>,
}

impl Graph {
    /// Builds a graph from an edge list. Duplicate pairs (in either
    /// orientation) are merged; self-loops are rejected.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("a graph needs at least one node".into()));
        }
        let mut sets = vec![BTreeSet::new(); node_count];
        for &(i, j) in edges {
            for v in [i, j] {
                if v >= node_count {
                    return Err(Error::NodeOutOfRange { index: v, node_count });
                }
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at node {i}")));
            }
            sets[i].insert(j);
            sets[j].insert(i);
        }
        Ok(Self { adjacency: sets.into_iter().map(|s| s.into_iter().collect()).collect(), positions: None })
    }

    pub fn edgeless(node_count: usize) -> Result<Self> {
        Self::from_edges(node_count, &[])
    }

    pub fn path(node_count: usize) -> Result<Self> {
        let edges: Vec<_> = (1..node_count).map(|i| (i - 1, i)).collect();
        Self::from_edges(node_count, &edges)
    }

    pub fn complete(node_count: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..node_count {
            for j in i + 1..node_count {
                edges.push((i, j));
            }
        }
        Self::from_edges(node_count, &edges)
    }

    /// Random geometric graph: `n` points uniform on the unit square, an
    /// edge wherever the Euclidean distance is strictly below `radius`.
    pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("a graph needs at least one node".into()));
        }
        if !(radius >= 0.0) {
            return Err(Error::InvalidParameter(format!("radius must be nonnegative, got {radius}")));
        }
        let mut rng = seed::rng(seed);
        let positions: Vec<[f64; 2]> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        Ok(Self::from_positions(positions, radius))
    }

    /// Like [`Graph::random_geometric`], redrawing with fresh sub-seeds of
    /// `seed` until the graph is connected. Attempt `t` uses `sub_seed(seed, t)`.
    pub fn random_geometric_connected(n: usize, radius: f64, seed: u64, max_attempts: usize) -> Result<Self> {
        for attempt in 0..max_attempts {
            let g = Self::random_geometric(n, radius, seed::sub_seed(seed, attempt as u64))?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::ResampleCapExceeded { what: "connected random geometric graph", attempts: max_attempts })
    }

    fn from_positions(positions: Vec<[f64; 2]>, radius: f64) -> Self {
        let n = positions.len();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                let dx = positions[i][0] - positions[j][0];
                let dy = positions[i][1] - positions[j][1];
                if dx.hypot(dy) < radius {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { adjacency, positions: Some(positions) }
    }

    /// Attaches node coordinates, one per node.
    pub fn with_positions(mut self, positions: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != self.node_count() {
            return Err(Error::InvalidGraph(format!("{} positions for {} nodes", positions.len(), self.node_count())));
        }
        self.positions = Some(positions);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn positions(&self) -> Option<&[[f64; 2]]> {
        self.positions.as_deref()
    }

    /// Ascending neighbor list of node `i`.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(Error::NodeOutOfRange { index: i, node_count: self.node_count() })
    }

    pub fn degree(&self, i: usize) -> Result<usize> {
        self.neighbors(i).map(<[usize]>::len)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency.get(i).is_some_and(|l| l.binary_search(&j).is_ok())
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, l)| l.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Both orientations of every edge, sorted by `(from, to)`.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, l)| l.iter().map(move |&j| (i, j)))
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == n
    }

    /// Applies a relabeling: node `i` of `self` becomes node `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.node_count())?;
        let edges: Vec<_> = self.edges().map(|(i, j)| (perm[i], perm[j])).collect();
        let mut g = Self::from_edges(self.node_count(), &edges)?;
        if let Some(pos) = &self.positions {
            let mut moved = pos.clone();
            for (i, p) in pos.iter().enumerate() {
                moved[perm[i]] = *p;
            }
            g.positions = Some(moved);
        }
        Ok(g)
    }

    /// Plain-text adjacency list: a first line with `N`, one `i j` line per
    /// edge with `i < j`, then optional `pos i x y` lines.
    pub fn to_adjacency_text(&self) -> String {
        let mut out = format!("{}\n", self.node_count());
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        if let Some(pos) = &self.positions {
            for (i, p) in pos.iter().enumerate() {
                let _ = writeln!(out, "pos {i} {:?} {:?}", p[0], p[1]);
            }
        }
        out
    }

    pub fn from_adjacency_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("empty adjacency list".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("node count: {e}")))?;
        let mut edges = Vec::new();
        let mut positions: Vec<Option<[f64; 2]>> = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["pos", i, x, y] => {
                    let i = parse_field::<usize>(i, line)?;
                    if i >= n {
                        return Err(Error::NodeOutOfRange { index: i, node_count: n });
                    }
                    positions.resize(n, None);
                    positions[i] = Some([parse_field(x, line)?, parse_field(y, line)?]);
                }
                [i, j] => edges.push((parse_field(i, line)?, parse_field(j, line)?)),
                _ => return Err(Error::Parse(format!("unrecognized line `{line}`"))),
            }
        }
        let mut g = Self::from_edges(n, &edges)?;
        if !positions.is_empty() {
            let pos: Option<Vec<_>> = positions.into_iter().collect();
            g = g.with_positions(pos.ok_or_else(|| Error::Parse("positions listed for only some nodes".into()))?)?;
        }
        Ok(g)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, line: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(|e| Error::Parse(format!("`{line}`: {e}")))
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidParameter(format!("permutation has length {}, expected {n}", perm.len())));
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}
