//! Weighted undirected graphs, their Laplacians, and the reduction of graph
//! sparsification to factor sets in isotropic position.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::factors::{Factor, FactorSet};
use crate::linalg::{Matrix, Spectrum, Vector};
use crate::sparsify::SparsifierResult;

/// An undirected edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// A weighted undirected graph on vertices `0..n`.
///
/// Edges are stored canonically (`u < v`), sorted, with parallel edges merged by
/// summing their weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    /// Builds a validated, connected graph.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let g = Self::from_parts(n, edges)?;
        if !g.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(g)
    }

    /// Builds a graph, validating everything except connectivity.
    pub fn from_parts(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("graph has no vertices".into()));
        }
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) references a vertex outside [0, {n})"
                )));
            }
            if a == b {
                return Err(Error::Validation(format!("self-loop at vertex {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) has nonpositive or non-finite weight {w}"
                )));
            }
            *merged.entry((a.min(b), a.max(b))).or_insert(0.0) += w;
        }
        let edges = merged
            .into_iter()
            .map(|((u, v), weight)| Edge { u, v, weight })
            .collect();
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn is_connected(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut components = self.n;
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if ra != rb {
                parent[ra] = rb;
                components -= 1;
            }
        }
        components == 1
    }

    /// Weighted degree of every vertex.
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for e in &self.edges {
            deg[e.u] += e.weight;
            deg[e.v] += e.weight;
        }
        deg
    }

    /// `xᵀ L x = Σ w_uv (x_u − x_v)²`, evaluated edge by edge.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.edges
            .iter()
            .map(|e| {
                let d = x[e.u] - x[e.v];
                e.weight * d * d
            })
            .sum()
    }

    /// Serializes as `u v w` lines.
    pub fn write_edge_list(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{} {} {}", e.u, e.v, e.weight)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }
}

/// Parses whitespace-separated `u v w` lines; `#` lines and blank lines are skipped.
/// The vertex count is one more than the largest id seen. Connectivity is not checked.
pub fn parse_edge_list(text: &str) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut max_id = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let line_no = idx + 1;
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", tokens.len())));
        }
        let u: usize = tokens[0]
            .parse()
            .map_err(|_| bad(format!("invalid vertex id {:?}", tokens[0])))?;
        let v: usize = tokens[1]
            .parse()
            .map_err(|_| bad(format!("invalid vertex id {:?}", tokens[1])))?;
        let w: f64 = tokens[2]
            .parse()
            .map_err(|_| bad(format!("invalid weight {:?}", tokens[2])))?;
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        edges.push((u, v, w));
    }
    let n = max_id
        .map(|m| m + 1)
        .ok_or_else(|| Error::Validation("edge list contains no edges".into()))?;
    WeightedGraph::from_parts(n, edges)
}

/// Reads an edge-list file and rejects disconnected graphs.
pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    let text = fs::read_to_string(path)?;
    let g = parse_edge_list(&text)?;
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    Ok(g)
}

/// Dense Laplacian `L = D − W`.
pub fn laplacian(g: &WeightedGraph) -> Matrix {
    let mut l = Matrix::zeros(g.n, g.n);
    for e in &g.edges {
        l[(e.u, e.u)] += e.weight;
        l[(e.v, e.v)] += e.weight;
        l[(e.u, e.v)] -= e.weight;
        l[(e.v, e.u)] -= e.weight;
    }
    l
}

/// Orthonormal (Helmert) basis of the complement of the all-ones vector, as an
/// `n × (n−1)` matrix.
pub fn complement_basis(n: usize) -> Matrix {
    let mut q = Matrix::zeros(n, n.saturating_sub(1));
    for k in 0..n.saturating_sub(1) {
        let len = (k + 1) as f64;
        let norm = (len * (len + 1.0)).sqrt();
        for j in 0..=k {
            q[(j, k)] = 1.0 / norm;
        }
        q[(k + 1, k)] = -len / norm;
    }
    q
}

/// Laplacian restricted to the complement of the all-ones vector: `Qᵀ L Q`.
pub fn reduced_laplacian(g: &WeightedGraph, basis: &Matrix) -> Matrix {
    basis.transpose() * laplacian(g) * basis
}

/// Reduces a connected graph to a rank-one factor set in isotropic position.
///
/// Works in the `(n−1)`-dimensional complement of the all-ones vector, where the
/// Laplacian is invertible, and emits `v_e = √w_e · L_r^{-1/2} Qᵀ b_e` for each edge so
/// that `Σ v_e v_eᵀ = I_{n−1}`. Provenance maps factor `i` to edge `i`.
pub fn isotropize(g: &WeightedGraph) -> Result<FactorSet> {
    if g.n < 2 {
        return Err(Error::Validation(
            "isotropic reduction needs at least 2 vertices".into(),
        ));
    }
    let q = complement_basis(g.n);
    let reduced = reduced_laplacian(g, &q);
    let spec = Spectrum::of(&reduced)?;
    let max_degree = g.degrees().into_iter().fold(0.0, f64::max);
    let threshold = 1e-10 * max_degree;
    let lambda2 = spec.min();
    if lambda2 < threshold {
        return Err(Error::IllConditioned { lambda2, threshold });
    }
    let inv_sqrt = spec.map(|x| x.powf(-0.5));
    let d = g.n - 1;
    let factors = g
        .edges
        .iter()
        .map(|e| {
            let b: Vector = Vector::from_fn(d, |k, _| q[(e.u, k)] - q[(e.v, k)]);
            Factor::Rank1((&inv_sqrt * b) * e.weight.sqrt())
        })
        .collect();
    FactorSet::new(d, factors, Some((0..g.m()).collect()))
}

/// Maps a coefficient vector over factors back to a reweighted subgraph of `g`.
pub fn export_sparsifier(
    g: &WeightedGraph,
    factors: &FactorSet,
    result: &SparsifierResult,
) -> Result<WeightedGraph> {
    let provenance = factors.provenance().ok_or(Error::MissingProvenance)?;
    let mut edges = Vec::with_capacity(result.coefficients.len());
    for (&i, &c) in &result.coefficients {
        let edge_idx = *provenance.get(i).ok_or_else(|| {
            Error::Validation(format!("coefficient index {i} has no provenance entry"))
        })?;
        let e = g.edges.get(edge_idx).ok_or_else(|| {
            Error::Validation(format!("provenance points at missing edge {edge_idx}"))
        })?;
        edges.push((e.u, e.v, c * e.weight));
    }
    WeightedGraph::from_parts(g.n, edges)
}
