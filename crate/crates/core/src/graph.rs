//! Undirected state-transition graphs and their Laplacians.
//!
//! A [`FactorGraph`] is one agent's transition graph: node `i` is an
//! individual state and an edge joins two states that a single action moves
//! between (in either direction). Graphs are simple: no self-loops, no
//! multi-edges, no weights.

use std::fmt::Write as _;

use crate::error::SpectralError;
use crate::linalg::{sym_eig, Matrix, Spectrum};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    n: usize,
    adj: Vec<bool>,
    labels: Option<Vec<String>>,
}

impl FactorGraph {
    /// Edgeless graph on `n` nodes.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![false; n * n],
            labels: None,
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, SpectralError> {
        let mut g = Self::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::path(n);
        if n > 2 {
            g.add_edge(n - 1, 0).expect("cycle edge is valid");
        }
        g
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::new(n);
        for u in 0..n {
            for v in (u + 1)..n {
                g.add_edge(u, v).expect("complete edges are valid");
            }
        }
        g
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.n, "one label per node");
        self.labels = Some(labels);
        self
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    fn check(&self, i: usize) -> Result<(), SpectralError> {
        if i >= self.n {
            Err(SpectralError::IndexOutOfRange { index: i, len: self.n })
        } else {
            Ok(())
        }
    }

    /// Adds the undirected edge `u - v`. Returns whether it was new.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool, SpectralError> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Err(SpectralError::SelfLoop(u));
        }
        let fresh = !self.adj[u * self.n + v];
        self.adj[u * self.n + v] = true;
        self.adj[v * self.n + u] = true;
        Ok(fresh)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && v < self.n && self.adj[u * self.n + v]
    }

    pub fn neighbors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adj[u * self.n..(u + 1) * self.n];
        row.iter().enumerate().filter_map(|(v, &e)| e.then_some(v))
    }

    pub fn degree(&self, u: usize) -> usize {
        self.neighbors(u).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|u| self.degree(u)).collect()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().filter(|&&e| e).count() / 2
    }

    /// Edges `(u, v)` with `u < v`, in row order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.adj[u * self.n + v] {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Connected-component id for every node; ids follow first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut comp = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = next;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for v in self.neighbors(u) {
                    if comp[v] == usize::MAX {
                        comp[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        comp
    }

    pub fn n_components(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.n_components() <= 1
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n, self.n);
        for (u, v) in self.edges() {
            m[(u, v)] = 1.0;
            m[(v, u)] = 1.0;
        }
        m
    }

    /// Kronecker (tensor) product graph: `(g, h) ~ (g', h')` iff `g ~ g'`
    /// and `h ~ h'`. Node `(i, k)` maps to `i * |other| + k`.
    pub fn kron(&self, other: &FactorGraph) -> FactorGraph {
        let m = other.n;
        let mut out = FactorGraph::new(self.n * m);
        for (i, j) in self.edges() {
            for (k, l) in other.edges() {
                out.adj_set(i * m + k, j * m + l);
                out.adj_set(i * m + l, j * m + k);
            }
        }
        out
    }

    fn adj_set(&mut self, u: usize, v: usize) {
        self.adj[u * self.n + v] = true;
        self.adj[v * self.n + u] = true;
    }

    /// Writes the plain-text edge-list form: `n <nodes>` then one `u v` pair
    /// per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n {}\n", self.n);
        for (u, v) in self.edges() {
            let _ = writeln!(s, "{u} {v}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self, SpectralError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, header) = lines.next().ok_or(SpectralError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let mut parts = header.split_whitespace();
        let n = match (parts.next(), parts.next(), parts.next()) {
            (Some("n"), Some(count), None) => count.parse::<usize>().map_err(|e| SpectralError::Parse {
                line,
                msg: e.to_string(),
            })?,
            _ => {
                return Err(SpectralError::Parse {
                    line,
                    msg: format!("expected `n <count>`, got `{header}`"),
                })
            }
        };
        let mut g = Self::new(n);
        for (line, l) in lines {
            let nums: Vec<&str> = l.split_whitespace().collect();
            if nums.len() != 2 {
                return Err(SpectralError::Parse {
                    line,
                    msg: format!("expected `u v`, got `{l}`"),
                });
            }
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|e| SpectralError::Parse {
                    line,
                    msg: e.to_string(),
                })
            };
            g.add_edge(parse(nums[0])?, parse(nums[1])?)?;
        }
        Ok(g)
    }
}

/// `L = D - A`.
pub fn laplacian(g: &FactorGraph) -> Matrix {
    let n = g.n_nodes();
    let mut l = Matrix::zeros(n, n);
    for u in 0..n {
        l[(u, u)] = g.degree(u) as f64;
    }
    for (u, v) in g.edges() {
        l[(u, v)] = -1.0;
        l[(v, u)] = -1.0;
    }
    l
}

/// `D^{-1/2} (D - A) D^{-1/2}`; fails on isolated nodes.
pub fn normalized_laplacian(g: &FactorGraph) -> Result<Matrix, SpectralError> {
    let deg = g.degrees();
    if let Some(i) = deg.iter().position(|&d| d == 0) {
        return Err(SpectralError::IsolatedNode(i));
    }
    let n = g.n_nodes();
    let inv_sqrt: Vec<f64> = deg.iter().map(|&d| 1.0 / (d as f64).sqrt()).collect();
    let mut l = Matrix::identity(n);
    for (u, v) in g.edges() {
        let w = -inv_sqrt[u] * inv_sqrt[v];
        l[(u, v)] = w;
        l[(v, u)] = w;
    }
    Ok(l)
}

/// Which Laplacian a Fiedler computation runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LaplacianKind {
    #[default]
    Combinatorial,
    Normalized,
}

/// Spectrum of the chosen Laplacian of `g`.
pub fn laplacian_spectrum(g: &FactorGraph, kind: LaplacianKind) -> Result<Spectrum, SpectralError> {
    match kind {
        LaplacianKind::Combinatorial => sym_eig(&laplacian(g)),
        LaplacianKind::Normalized => sym_eig(&normalized_laplacian(g)?),
    }
}

/// Algebraic connectivity and Fiedler vector of `L = D - A`.
pub fn fiedler(g: &FactorGraph) -> Result<(f64, Vec<f64>), SpectralError> {
    fiedler_with(g, LaplacianKind::Combinatorial)
}

pub fn fiedler_with(g: &FactorGraph, kind: LaplacianKind) -> Result<(f64, Vec<f64>), SpectralError> {
    if g.n_nodes() < 2 {
        return Err(SpectralError::TooSmall(g.n_nodes()));
    }
    let s = laplacian_spectrum(g, kind)?;
    Ok((s.values[1], s.vector(1).to_vec()))
}

/// `lambda_2(L)` only.
pub fn algebraic_connectivity(g: &FactorGraph) -> Result<f64, SpectralError> {
    fiedler(g).map(|(l, _)| l)
}

/// First-order estimate of the gain in algebraic connectivity from joining
/// nodes `i` and `j`: `(f_i - f_j)^2`.
pub fn connectivity_gain(f: &[f64], i: usize, j: usize) -> Result<f64, SpectralError> {
    for &k in &[i, j] {
        if k >= f.len() {
            return Err(SpectralError::IndexOutOfRange { index: k, len: f.len() });
        }
    }
    let d = f[i] - f[j];
    Ok(d * d)
}

/// Indices of the first minimum and first maximum of `f`.
pub fn argmin_argmax(f: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (k, &x) in f.iter().enumerate() {
        if x < f[lo] {
            lo = k;
        }
        if x > f[hi] {
            hi = k;
        }
    }
    (lo, hi)
}
