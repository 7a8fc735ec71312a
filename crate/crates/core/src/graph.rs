//! Undirected simple graph in compressed adjacency form, per-edge weights, and
//! the sparse propagation kernels built on them.
//!
//! Every undirected edge `{u, v}` is stored once as an edge record (with `u < v`)
//! and appears as a half-edge in both endpoint rows. Both half-edges point at the
//! same record, so any per-edge quantity indexed by record is symmetric by
//! construction.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Dense;

/// Rows below this count are propagated serially.
const PAR_ROW_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    /// CSR row offsets, length `n + 1`.
    offsets: Vec<usize>,
    /// Neighbor ids, ascending within each row.
    neighbors: Vec<usize>,
    /// For each half-edge, the index of its undirected edge record.
    edge_slot: Vec<usize>,
    /// Undirected edge records `(u, v)` with `u < v`, sorted lexicographically.
    edges: Vec<(usize, usize)>,
}

impl SparseGraph {
    /// Builds a simple undirected graph on `n` nodes. Duplicate edges (in either
    /// orientation) are collapsed and self-loops dropped.
    pub fn build(edge_list: &[(usize, usize)], n: usize) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        for (i, &(u, v)) in edge_list.iter().enumerate() {
            if u >= n || v >= n {
                return Err(Error::Input(format!(
                    "edge #{i} ({u}, {v}) references a node outside [0, {n})"
                )));
            }
            if u != v {
                edges.push((u.min(v), u.max(v)));
            }
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degrees = vec![0usize; n];
        for &(u, v) in &edges {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0);
        for d in &degrees {
            offsets.push(offsets.last().unwrap() + d);
        }

        // Records are sorted by (u, v), so filling rows in record order leaves
        // every row sorted: row x first receives the smaller neighbors u (from
        // records (u, x), in u order) and then the larger v (records (x, v)).
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; 2 * edges.len()];
        let mut edge_slot = vec![0usize; 2 * edges.len()];
        let mut place = |row: usize, nb: usize, e: usize| {
            neighbors[cursor[row]] = nb;
            edge_slot[cursor[row]] = e;
            cursor[row] += 1;
        };
        // Pass 1: lower neighbors, pass 2: upper neighbors.
        for (e, &(u, v)) in edges.iter().enumerate() {
            place(v, u, e);
        }
        for (e, &(u, v)) in edges.iter().enumerate() {
            place(u, v, e);
        }

        Ok(SparseGraph {
            n,
            offsets,
            neighbors,
            edge_slot,
            edges,
        })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        SparseGraph::build(&[], n).expect("empty edge list is always valid")
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|v| self.degree(v)).collect()
    }

    /// Neighbors of `v` in ascending order.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// `(neighbor, edge record)` pairs of `v`, ascending by neighbor.
    pub fn half_edges(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        let r = self.offsets[v]..self.offsets[v + 1];
        self.neighbors[r.clone()]
            .iter()
            .copied()
            .zip(self.edge_slot[r].iter().copied())
    }

    /// Undirected edge records, each `(u, v)` with `u < v`.
    #[inline]
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Record index of edge `{u, v}`, if present.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let row = self.offsets[u]..self.offsets[u + 1];
        self.neighbors[row.clone()]
            .binary_search(&v)
            .ok()
            .map(|k| self.edge_slot[row.start + k])
    }

    /// Applies a permutation `perm[old] = new` to node ids.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::Dimension(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n
            )));
        }
        let edges: Vec<_> = self
            .edges
            .iter()
            .map(|&(u, v)| (perm[u], perm[v]))
            .collect();
        SparseGraph::build(&edges, self.n)
    }
}

/// One weight per undirected edge record. Both directions of an edge read the
/// same slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights(pub Vec<f64>);

impl EdgeWeights {
    /// `w_uv = 1 / sqrt(d_u d_v)`.
    pub fn degree_normalized(g: &SparseGraph) -> Self {
        EdgeWeights(
            g.edges()
                .iter()
                .map(|&(u, v)| 1.0 / ((g.degree(u) * g.degree(v)) as f64).sqrt())
                .collect(),
        )
    }

    pub fn constant(g: &SparseGraph, value: f64) -> Self {
        EdgeWeights(vec![value; g.edge_count()])
    }

    #[inline]
    pub fn get(&self, edge: usize) -> f64 {
        self.0[edge]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Weight of half-edge `(u, v)`, or `None` when the edge does not exist.
    pub fn between(&self, g: &SparseGraph, u: usize, v: usize) -> Option<f64> {
        g.edge_index(u, v).map(|e| self.0[e])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|w| w.is_finite())
    }
}

/// Initial edge weights: `1 / sqrt(d_u d_v)` per edge.
pub fn init_weights(g: &SparseGraph) -> EdgeWeights {
    EdgeWeights::degree_normalized(g)
}

fn check_weights(g: &SparseGraph, w: &EdgeWeights) -> Result<()> {
    if w.len() != g.edge_count() {
        return Err(Error::Dimension(format!(
            "{} weights for {} edges",
            w.len(),
            g.edge_count()
        )));
    }
    Ok(())
}

fn weighted_row_sum(g: &SparseGraph, w: &EdgeWeights, x: &Dense, v: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (u, e) in g.half_edges(v) {
        let wuv = w.0[e];
        for (o, &xu) in out.iter_mut().zip(x.row(u)) {
            *o += wuv * xu;
        }
    }
}

/// `W · X` for the symmetric weighted adjacency `W`. Each output row accumulates
/// its neighbors in ascending id order, so the result does not depend on thread
/// scheduling.
pub fn weighted_adjacency_mul(g: &SparseGraph, w: &EdgeWeights, x: &Dense) -> Result<Dense> {
    check_weights(g, w)?;
    if x.rows() != g.node_count() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, graph has {} nodes",
            x.rows(),
            g.node_count()
        )));
    }
    let cols = x.cols();
    let mut out = Dense::zeros(x.rows(), cols);
    if cols == 0 {
        return Ok(out);
    }
    if g.node_count() >= PAR_ROW_THRESHOLD {
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(v, row)| weighted_row_sum(g, w, x, v, row));
    } else {
        for v in 0..g.node_count() {
            weighted_row_sum(g, w, x, v, out.row_mut(v));
        }
    }
    Ok(out)
}

/// Right-multiplies every row of `x` by the `C×C` matrix `h`.
pub fn right_mul(x: &Dense, h: &Dense) -> Result<Dense> {
    if x.cols() != h.rows() {
        return Err(Error::Dimension(format!(
            "cannot multiply {}-column matrix by {}x{}",
            x.cols(),
            h.rows(),
            h.cols()
        )));
    }
    let cols = h.cols();
    let mut out = Dense::zeros(x.rows(), cols);
    let kernel = |(r, row): (usize, &mut [f64])| {
        for (k, &xk) in x.row(r).iter().enumerate() {
            for (o, &hk) in row.iter_mut().zip(h.row(k)) {
                *o += xk * hk;
            }
        }
    };
    if cols == 0 {
        return Ok(out);
    }
    if x.rows() >= PAR_ROW_THRESHOLD {
        out.as_mut_slice()
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(kernel);
    } else {
        out.as_mut_slice()
            .chunks_mut(cols)
            .enumerate()
            .for_each(kernel);
    }
    Ok(out)
}

/// The propagation term `W · P · H`, computed as `(W · P) · H`.
pub fn spmm_propagate(g: &SparseGraph, w: &EdgeWeights, p: &Dense, h: &Dense) -> Result<Dense> {
    if h.rows() != h.cols() || p.cols() != h.rows() {
        return Err(Error::Dimension(format!(
            "beliefs are {}x{}, coupling is {}x{}",
            p.rows(),
            p.cols(),
            h.rows(),
            h.cols()
        )));
    }
    let wp = weighted_adjacency_mul(g, w, p)?;
    right_mul(&wp, h)
}

/// Matrix-free `y = W x` on a single vector.
pub fn adjacency_apply(g: &SparseGraph, w: &EdgeWeights, x: &[f64], y: &mut [f64]) {
    for (v, yv) in y.iter_mut().enumerate().take(g.node_count()) {
        *yv = g.half_edges(v).map(|(u, e)| w.0[e] * x[u]).sum();
    }
}

/// Parses the edge-list text format: two whitespace-separated 0-indexed ids per
/// line, `#` comments and blank lines ignored. Returns the pairs together with
/// their 1-based line numbers.
pub fn parse_edge_list(text: &str, file: &Path) -> Result<Vec<((usize, usize), usize)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| Error::parse(file, i + 1, "expected two node ids"))?
                .parse::<usize>()
                .map_err(|e| Error::parse(file, i + 1, format!("bad node id: {e}")))
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::parse(file, i + 1, "trailing tokens after edge"));
        }
        out.push(((u, v), i + 1));
    }
    Ok(out)
}

/// Loads an edge-list file. With `n = None` the node count is inferred as
/// `max id + 1`.
pub fn read_edge_list(path: &Path, n: Option<usize>) -> Result<SparseGraph> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = parse_edge_list(&text, path)?;
    let n = n.unwrap_or_else(|| {
        parsed
            .iter()
            .map(|&((u, v), _)| u.max(v) + 1)
            .max()
            .unwrap_or(0)
    });
    for &((u, v), line) in &parsed {
        if u >= n || v >= n {
            return Err(Error::parse(
                path,
                line,
                format!("edge ({u}, {v}) references a node outside [0, {n})"),
            ));
        }
    }
    let pairs: Vec<_> = parsed.into_iter().map(|(e, _)| e).collect();
    SparseGraph::build(&pairs, n)
}
