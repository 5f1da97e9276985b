//! Communication graphs and mixing matrices.
//!
//! Agents sit on an undirected connected graph and average their iterates
//! with Metropolis weights: for an edge `{i, j}` the weight is
//! `1 / (max(deg i, deg j) + iota)` and each diagonal entry tops its row up
//! to one. The resulting matrix `W` is symmetric, doubly stochastic, and has
//! a positive diagonal, so repeated application contracts everyone toward the
//! network average. The speed of that contraction is governed by the
//! second-largest singular value `sigma2(W)`; `1 - sigma2` is the spectral
//! gap. `sigma2` is computed by power iteration on `W^T W` after deflating
//! the known top singular pair (value 1, vector `1/sqrt(n)`), which keeps the
//! crate free of a general eigensolver.

use crate::rng;
use crate::vecmath::{all_finite, norm2};
use rand::Rng;
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Errors from graph construction and mixing-matrix validation.
#[derive(Debug, thiserror::Error)]
pub enum TopologyError {
    #[error("graph must have at least one node")]
    Empty,
    #[error("edge probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("metropolis offset iota must be positive and finite, got {0}")]
    BadIota(f64),
    #[error("edge ({0}, {1}) is out of range for {2} nodes")]
    EdgeOutOfRange(usize, usize, usize),
    #[error("self loop at node {0}")]
    SelfLoop(usize),
    #[error("graph is not connected (node {0} is unreachable from node 0)")]
    Disconnected(usize),
    #[error("matrix is not square: {rows} rows but row {row} has {cols} columns")]
    NotSquare { rows: usize, row: usize, cols: usize },
    #[error("{which} {index} sums to {sum}, expected 1 within 1e-12")]
    NotStochastic { which: &'static str, index: usize, sum: f64 },
    #[error("entry ({0}, {1}) = {2} is negative or not finite")]
    BadEntry(usize, usize, f64),
    #[error("diagonal entry {0} = {1} is not positive")]
    NonPositiveDiagonal(usize, f64),
    #[error("iterate block has {got} rows, expected {expected}")]
    RowCountMismatch { got: usize, expected: usize },
    #[error("iterate rows have inconsistent lengths ({0} vs {1})")]
    RaggedRows(usize, usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

type Result<T> = std::result::Result<T, TopologyError>;

/// Undirected connected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// Normalized (i < j), sorted, deduplicated.
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Build from an explicit edge list; validates range, simplicity, and
    /// connectivity. Duplicate edges (in either orientation) collapse.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Graph> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(TopologyError::EdgeOutOfRange(a, b, n));
            }
            if a == b {
                return Err(TopologyError::SelfLoop(a));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let mut degrees = vec![0usize; n];
        for &(a, b) in &edges {
            degrees[a] += 1;
            degrees[b] += 1;
        }
        let g = Graph { n, edges, degrees };
        if let Some(unreached) = g.first_unreachable() {
            return Err(TopologyError::Disconnected(unreached));
        }
        Ok(g)
    }

    /// Random connected graph: a uniform random spanning tree (Pruefer
    /// decode) plus every remaining pair independently with probability `r`.
    /// Deterministic for a fixed `(n, r, seed)`.
    pub fn random_connected(n: usize, r: f64, seed: u64) -> Result<Graph> {
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        if !(0.0..=1.0).contains(&r) || !r.is_finite() {
            return Err(TopologyError::BadProbability(r));
        }
        let mut edges = spanning_tree(n, seed);
        let tree: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
        let mut extra = rng::stream(seed, &[2]);
        for i in 0..n {
            for j in (i + 1)..n {
                if tree.contains(&(i, j)) {
                    continue;
                }
                if extra.random::<f64>() < r {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(n, &edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Edge-list text: one `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }

    /// Parse edge-list text (`i j` per line; blank lines and `#` comments
    /// allowed). `n` must be supplied since isolated numbering is ambiguous.
    pub fn from_edge_list(n: usize, text: &str) -> Result<Graph> {
        let mut edges = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| TopologyError::Parse {
                    line: idx + 1,
                    msg: "expected two node indices".into(),
                })?
                .parse::<usize>()
                .map_err(|e| TopologyError::Parse { line: idx + 1, msg: e.to_string() })
            };
            let a = parse(it.next())?;
            let b = parse(it.next())?;
            if it.next().is_some() {
                return Err(TopologyError::Parse {
                    line: idx + 1,
                    msg: "expected exactly two node indices".into(),
                });
            }
            edges.push((a, b));
        }
        Graph::from_edges(n, &edges)
    }

    /// BFS from node 0; returns the smallest unreachable node, if any.
    fn first_unreachable(&self) -> Option<usize> {
        let mut seen = vec![false; self.n];
        let mut queue = vec![0usize];
        seen[0] = true;
        let mut adj = vec![Vec::new(); self.n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        while let Some(u) = queue.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push(v);
                }
            }
        }
        seen.iter().position(|s| !s)
    }
}

/// Uniform random spanning tree on `n` labeled nodes via a random Pruefer
/// sequence (the decode is a bijection, so trees come out exactly uniform).
fn spanning_tree(n: usize, seed: u64) -> Vec<(usize, usize)> {
    if n == 1 {
        return Vec::new();
    }
    if n == 2 {
        return vec![(0, 1)];
    }
    let mut r = rng::stream(seed, &[1]);
    let seq: Vec<usize> = (0..n - 2).map(|_| r.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &v in &seq {
        degree[v] += 1;
    }
    let mut leaves: BTreeSet<usize> =
        (0..n).filter(|&v| degree[v] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in &seq {
        let leaf = *leaves.iter().next().expect("pruefer decode invariant");
        leaves.remove(&leaf);
        edges.push((leaf.min(v), leaf.max(v)));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.insert(v);
        }
    }
    let mut last = leaves.into_iter();
    let (a, b) = (last.next().unwrap(), last.next().unwrap());
    edges.push((a.min(b), a.max(b)));
    edges
}

/// Doubly stochastic mixing matrix with a positive diagonal, plus its
/// second-largest singular value.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    /// Row-major n*n weights.
    w: Vec<f64>,
    sigma2: f64,
}

impl MixingMatrix {
    /// Metropolis weights for a connected graph: edge weight
    /// `1/(max(deg i, deg j) + iota)`, diagonal tops the row up to one.
    pub fn metropolis(g: &Graph, iota: f64) -> Result<MixingMatrix> {
        if !(iota > 0.0) || !iota.is_finite() {
            return Err(TopologyError::BadIota(iota));
        }
        let n = g.n();
        let mut w = vec![0.0; n * n];
        for &(a, b) in g.edges() {
            let weight = 1.0 / (g.degree(a).max(g.degree(b)) as f64 + iota);
            w[a * n + b] = weight;
            w[b * n + a] = weight;
        }
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| w[i * n + j]).sum();
            w[i * n + i] = 1.0 - off;
        }
        MixingMatrix::from_flat(n, w)
    }

    /// Validate an arbitrary candidate matrix (entrywise nonnegative and
    /// finite, rows and columns summing to one within 1e-12, positive
    /// diagonal) and compute its second singular value.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<MixingMatrix> {
        let n = rows.len();
        if n == 0 {
            return Err(TopologyError::Empty);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(TopologyError::NotSquare { rows: n, row: i, cols: row.len() });
            }
        }
        let mut w = Vec::with_capacity(n * n);
        for row in rows {
            w.extend_from_slice(row);
        }
        MixingMatrix::from_flat(n, w)
    }

    fn from_flat(n: usize, w: Vec<f64>) -> Result<MixingMatrix> {
        for i in 0..n {
            for j in 0..n {
                let v = w[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(TopologyError::BadEntry(i, j, v));
                }
            }
        }
        for i in 0..n {
            let sum: f64 = (0..n).map(|j| w[i * n + j]).sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(TopologyError::NotStochastic { which: "row", index: i, sum });
            }
            let colsum: f64 = (0..n).map(|j| w[j * n + i]).sum();
            if (colsum - 1.0).abs() > 1e-12 {
                return Err(TopologyError::NotStochastic { which: "column", index: i, sum: colsum });
            }
            if w[i * n + i] <= 0.0 {
                return Err(TopologyError::NonPositiveDiagonal(i, w[i * n + i]));
            }
        }
        let sigma2 = second_singular_value(&w, n);
        Ok(MixingMatrix { n, w, sigma2 })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    /// Second-largest singular value; 0 by definition for a single node.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Spectral gap `1 - sigma2`.
    pub fn gap(&self) -> f64 {
        1.0 - self.sigma2
    }

    /// One gossip round: row i of the result is `sum_j W_ij X_j`.
    /// Preserves the network average exactly up to rounding.
    pub fn mix(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.n {
            return Err(TopologyError::RowCountMismatch { got: x.len(), expected: self.n });
        }
        let p = x[0].len();
        for row in x {
            if row.len() != p {
                return Err(TopologyError::RaggedRows(p, row.len()));
            }
        }
        let mut out = vec![vec![0.0; p]; self.n];
        for i in 0..self.n {
            let weights = self.row(i);
            let target = &mut out[i];
            for (j, xj) in x.iter().enumerate() {
                let wij = weights[j];
                if wij != 0.0 {
                    for (t, v) in target.iter_mut().zip(xj) {
                        *t += wij * v;
                    }
                }
            }
        }
        Ok(out)
    }

    /// The lazy half-step matrix `(I + W) / 2` used by the corrected output
    /// rule. Inherits double stochasticity and a positive diagonal.
    pub fn lazy(&self) -> MixingMatrix {
        let n = self.n;
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut v = self.w[i * n + j] / 2.0;
                if i == j {
                    v += 0.5;
                }
                w[i * n + j] = v;
            }
        }
        let sigma2 = second_singular_value(&w, n);
        MixingMatrix { n, w, sigma2 }
    }

    /// Dense `W^t` (row-major), used to check how fast powers of the mixing
    /// matrix flatten toward the all-average matrix.
    pub fn power(&self, t: usize) -> Vec<f64> {
        let n = self.n;
        let mut acc = vec![0.0; n * n];
        for i in 0..n {
            acc[i * n + i] = 1.0;
        }
        for _ in 0..t {
            let mut next = vec![0.0; n * n];
            for i in 0..n {
                for k in 0..n {
                    let a = acc[i * n + k];
                    if a != 0.0 {
                        for j in 0..n {
                            next[i * n + j] += a * self.w[k * n + j];
                        }
                    }
                }
            }
            acc = next;
        }
        acc
    }

    /// CSV export: a header of n column labels, then n rows of n entries.
    /// Floats are written in shortest round-trip form, so importing the
    /// text reproduces the matrix bit-exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.n).map(|j| format!("c{j}")).collect();
        let _ = writeln!(out, "{}", header.join(","));
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parse the CSV form written by [`to_csv`](Self::to_csv); the imported
    /// matrix is re-validated.
    pub fn from_csv(text: &str) -> Result<MixingMatrix> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(TopologyError::Parse {
            line: 1,
            msg: "empty matrix file".into(),
        })?;
        let n = header.split(',').count();
        let mut rows = Vec::with_capacity(n);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(n);
            for tok in line.split(',') {
                let v: f64 = tok.trim().parse().map_err(|e| TopologyError::Parse {
                    line: idx + 1,
                    msg: format!("bad float {tok:?}: {e}"),
                })?;
                row.push(v);
            }
            if row.len() != n {
                return Err(TopologyError::Parse {
                    line: idx + 1,
                    msg: format!("expected {n} fields, got {}", row.len()),
                });
            }
            rows.push(row);
        }
        if rows.len() != n {
            return Err(TopologyError::Parse {
                line: 0,
                msg: format!("expected {n} data rows, got {}", rows.len()),
            });
        }
        MixingMatrix::from_rows(&rows)
    }
}

/// Second-largest singular value of a doubly stochastic matrix.
///
/// `W^T W` is symmetric PSD with top eigenpair `(1, 1/sqrt(n) * ones)`; after
/// deflating it, power iteration converges to `sigma2^2`. The iterate is
/// re-centered (mean removed) every step so the deflation stays exact under
/// rounding. Stops when the eigen-residual falls below 1e-12 (for symmetric
/// matrices the residual bounds the eigenvalue error) or after 10 000 rounds.
fn second_singular_value(w: &[f64], n: usize) -> f64 {
    if n == 1 {
        return 0.0;
    }
    // Fixed internal stream: the start vector is part of the algorithm, not
    // of any experiment's randomness budget.
    let mut r = rng::stream(0x5157_ED00, &[n as u64]);
    let mut v: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.5).collect();
    center(&mut v);
    let nv = norm2(&v);
    if nv == 0.0 {
        v[0] = 1.0;
        v[n - 1] = -1.0;
        center(&mut v);
    }
    normalize(&mut v);

    let mut lambda_prev = f64::INFINITY;
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        // u = W^T (W v), deflated by removing the mean component.
        let mut wv = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += w[i * n + j] * v[j];
            }
            wv[i] = acc;
        }
        let mut u = vec![0.0; n];
        for i in 0..n {
            let wvi = wv[i];
            if wvi != 0.0 {
                for j in 0..n {
                    u[j] += w[i * n + j] * wvi;
                }
            }
        }
        center(&mut u);
        // Rayleigh quotient (v is unit length).
        lambda = v.iter().zip(&u).map(|(a, b)| a * b).sum();
        let residual: f64 = v
            .iter()
            .zip(&u)
            .map(|(a, b)| (b - lambda * a) * (b - lambda * a))
            .sum::<f64>()
            .sqrt();
        let nu = norm2(&u);
        if residual <= 1e-12 || nu <= 1e-300 {
            break;
        }
        if (lambda - lambda_prev).abs() <= 1e-15 * lambda.abs().max(1.0) {
            break;
        }
        lambda_prev = lambda;
        for (vi, ui) in v.iter_mut().zip(&u) {
            *vi = ui / nu;
        }
    }
    lambda.clamp(0.0, 1.0).sqrt()
}

fn center(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn normalize(v: &mut [f64]) {
    let nv = norm2(v);
    if nv > 0.0 {
        v.iter_mut().for_each(|x| *x /= nv);
    }
}

/// Frobenius distance of an iterate block from consensus (all rows replaced
/// by their mean): `||X - 1 xbar^T||_F`. One mixing round shrinks this by at
/// least `sigma2`.
pub fn consensus_distance(x: &[Vec<f64>]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mean = crate::vecmath::row_mean(x);
    let mut acc = 0.0;
    for row in x {
        for (a, b) in row.iter().zip(&mean) {
            acc += (a - b) * (a - b);
        }
    }
    acc.sqrt()
}

/// Quick sanity check used by importers: all entries finite.
pub fn rows_finite(x: &[Vec<f64>]) -> bool {
    x.iter().all(|row| all_finite(row))
}
