//! Undirected graphs with a fixed orientation, oriented incidence matrices,
//! vertex bipartitions and the cuts they induce.
//!
//! Each edge is stored as `(tail, head)` in the order it was supplied. The
//! orientation only matters for bookkeeping: every quantity built on top of it
//! (cut sums, linearizations, potentials) is orientation independent.

use std::collections::{HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest vertex count for which all bipartitions are enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    /// Builds a graph on `n` vertices. Edge `e` is oriented `tail -> head` as
    /// given by `edge_pairs[e]`.
    pub fn new(n: usize, edge_pairs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = HashSet::with_capacity(edge_pairs.len());
        for &(a, b) in edge_pairs {
            for v in [a, b] {
                if v >= n {
                    return Err(Error::IndexOutOfRange { index: v, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateEdge(a, b));
            }
        }
        let mut adjacency = vec![Vec::new(); n];
        for (e, &(a, b)) in edge_pairs.iter().enumerate() {
            adjacency[a].push((b, e));
            adjacency[b].push((a, e));
        }
        Ok(Graph {
            n,
            edges: edge_pairs.to_vec(),
            adjacency,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        Graph::new(n, &edges)
    }

    pub fn ring(n: usize) -> Result<Self> {
        Graph::circulant(n, &[1])
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(n, &edges)
    }

    /// Circulant graph: vertex `i` is joined to `i + d (mod n)` for each offset `d`.
    /// Pairs that coincide for different offsets are only added once.
    pub fn circulant(n: usize, offsets: &[usize]) -> Result<Self> {
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for i in 0..n {
            for &d in offsets {
                let j = (i + d) % n;
                if j == i {
                    continue;
                }
                if seen.insert((i.min(j), i.max(j))) {
                    edges.push((i, j));
                }
            }
        }
        Graph::new(n, &edges)
    }

    /// Six vertices, each joined to its four nearest neighbours on a ring.
    pub fn six_node_example() -> Self {
        Graph::circulant(6, &[1, 2]).expect("valid circulant")
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(neighbour, edge index)` pairs incident to `v`.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency
            .get(a)?
            .iter()
            .find(|&&(w, _)| w == b)
            .map(|&(_, e)| e)
    }

    pub fn is_connected(&self) -> bool {
        let mut visited = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &self.adjacency[v] {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.n
    }

    pub fn incidence(&self) -> IncidenceMatrix {
        let mut entries = vec![0i8; self.n * self.edges.len()];
        let m = self.edges.len();
        for (e, &(tail, head)) in self.edges.iter().enumerate() {
            entries[tail * m + e] = -1;
            entries[head * m + e] = 1;
        }
        IncidenceMatrix {
            n_vertices: self.n,
            n_edges: m,
            entries,
        }
    }

    /// Edge differences `(Bᵀφ)_e = φ_head − φ_tail`.
    pub fn edge_differences(&self, phi: &[f64]) -> Vec<f64> {
        self.edges.iter().map(|&(t, h)| phi[h] - phi[t]).collect()
    }

    /// All bipartitions with vertex 0 pinned to `V⁻`.
    pub fn partitions(&self) -> Result<Partitions> {
        if self.n > EXHAUSTIVE_LIMIT {
            return Err(Error::TooLarge {
                n: self.n,
                limit: EXHAUSTIVE_LIMIT,
            });
        }
        Ok(Partitions {
            n: self.n,
            next: 1,
            end: 1u64 << (self.n - 1),
        })
    }

    /// Signed cut vector entries: `+1` for edges running `V⁻ → V⁺`, `−1` for
    /// edges running `V⁺ → V⁻`. Edges inside one side are omitted.
    pub fn cut_edges(&self, p: &Partition) -> Result<Vec<(usize, i8)>> {
        p.check(self.n)?;
        Ok(self
            .edges
            .iter()
            .enumerate()
            .filter_map(|(e, &(t, h))| match (p.contains(t), p.contains(h)) {
                (false, true) => Some((e, 1)),
                (true, false) => Some((e, -1)),
                _ => None,
            })
            .collect())
    }

    /// Reads the plain-text graph format: first non-comment line holds `N`,
    /// then one `i j` pair per line, 0-indexed. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let n: usize = lines
            .next()
            .ok_or_else(|| Error::Parse("missing vertex count".into()))?
            .parse()
            .map_err(|e| Error::Parse(format!("vertex count: {e}")))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("bad edge line `{line}`")))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bad edge line `{line}`: {e}")))
            };
            let a = next()?;
            let b = next()?;
            if it.next().is_some() {
                return Err(Error::Parse(format!("trailing data on edge line `{line}`")));
            }
            edges.push((a, b));
        }
        Graph::new(n, &edges)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Graph::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for &(a, b) in &self.edges {
            s.push_str(&format!("{a} {b}\n"));
        }
        s
    }
}

/// Dense `N × |E|` oriented incidence matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix {
    n_vertices: usize,
    n_edges: usize,
    entries: Vec<i8>,
}

impl IncidenceMatrix {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn get(&self, vertex: usize, edge: usize) -> i8 {
        self.entries[vertex * self.n_edges + edge]
    }

    pub fn row(&self, vertex: usize) -> &[i8] {
        &self.entries[vertex * self.n_edges..(vertex + 1) * self.n_edges]
    }

    pub fn column_sums(&self) -> Vec<i64> {
        (0..self.n_edges)
            .map(|e| (0..self.n_vertices).map(|v| self.get(v, e) as i64).sum())
            .collect()
    }

    /// `Bᵀx`
    pub fn transpose_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_edges)
            .map(|e| {
                (0..self.n_vertices)
                    .map(|v| self.get(v, e) as f64 * x[v])
                    .sum()
            })
            .collect()
    }

    /// `By`
    pub fn mul(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n_vertices)
            .map(|v| {
                self.row(v)
                    .iter()
                    .zip(y)
                    .map(|(&b, &ye)| b as f64 * ye)
                    .sum()
            })
            .collect()
    }
}

/// Vertex bipartition `P = (V⁻, V⁺)`; bit `i` set means `i ∈ V⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    pub n: usize,
    pub mask: u64,
}

impl Partition {
    pub fn new(n: usize, mask: u64) -> Self {
        Partition { n, mask }
    }

    /// Partition with the given vertices in `V⁺`.
    pub fn from_plus(n: usize, plus: &[usize]) -> Result<Self> {
        if n > 64 {
            return Err(Error::TooLarge { n, limit: 64 });
        }
        let mut mask = 0u64;
        for &v in plus {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            mask |= 1 << v;
        }
        Ok(Partition { n, mask })
    }

    pub fn contains(&self, v: usize) -> bool {
        self.mask >> v & 1 == 1
    }

    pub fn full_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }

    pub fn complement(&self) -> Self {
        Partition {
            n: self.n,
            mask: !self.mask & self.full_mask(),
        }
    }

    /// Representative with vertex 0 in `V⁻`.
    pub fn normalized(&self) -> Self {
        if self.contains(0) {
            self.complement()
        } else {
            *self
        }
    }

    pub fn plus(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| self.contains(v)).collect()
    }

    pub fn minus(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| !self.contains(v)).collect()
    }

    /// `x_P` with entries `±½`.
    pub fn indicator(&self) -> Vec<f64> {
        (0..self.n)
            .map(|v| if self.contains(v) { 0.5 } else { -0.5 })
            .collect()
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::PartitionSize {
                expected: n,
                got: self.n,
            });
        }
        if self.mask == 0 || self.mask == self.full_mask() {
            return Err(Error::EmptySide);
        }
        Ok(())
    }
}

/// Iterator over the `2^{N−1} − 1` bipartitions with vertex 0 in `V⁻`.
#[derive(Debug, Clone)]
pub struct Partitions {
    n: usize,
    next: u64,
    end: u64,
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.next >= self.end {
            return None;
        }
        let p = Partition::new(self.n, self.next << 1);
        self.next += 1;
        Some(p)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for Partitions {}
