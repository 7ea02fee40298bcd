//! Directed topologies and column-stochastic mixing matrices.
//!
//! Convention: `w[[i, j]]` is the weight node `j` puts on the message it
//! sends to node `i`, so every column of a mixing matrix sums to one and a
//! gossip round is the product `W * z` with one node per row of `z`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Column sums must equal one within this tolerance.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// A static directed graph on nodes `0..n`. An edge `(j, i)` means `j`
/// sends to `i`. Self-loops are implicit and never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    strongly_connected: bool,
}

impl Digraph {
    /// Builds a digraph, rejecting duplicate or out-of-range edges. Self-loop
    /// pairs `(j, j)` are dropped since every node keeps its own value.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("digraph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j >= n || i >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge {j}->{i} out of range for n={n}"
                )));
            }
            if i == j {
                continue;
            }
            if !set.insert((j, i)) {
                return Err(Error::InvalidParameter(format!("duplicate edge {j}->{i}")));
            }
        }
        let strongly_connected = check_strongly_connected(n, &set);
        Ok(Self {
            n,
            edges: set,
            strongly_connected,
        })
    }

    /// Directed ring `i -> i+1 (mod n)`.
    pub fn ring(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    /// Bidirectional 4-neighbour grid, row-major node numbering.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let u = r * cols + c;
                if c + 1 < cols {
                    edges.push((u, u + 1));
                    edges.push((u + 1, u));
                }
                if r + 1 < rows {
                    edges.push((u, u + cols));
                    edges.push((u + cols, u));
                }
            }
        }
        Self::new(rows * cols, edges)
    }

    /// Complete digraph.
    pub fn complete(n: usize) -> Result<Self> {
        Self::new(
            n,
            (0..n).flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i))),
        )
    }

    /// Directed exponential graph: `i -> i + 2^k (mod n)` for `2^k < n`.
    pub fn exponential(n: usize) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for i in 0..n {
            let mut hop = 1;
            while hop < n {
                let t = (i + hop) % n;
                if t != i {
                    edges.insert((i, t));
                }
                hop *= 2;
            }
        }
        Self::new(n, edges)
    }

    /// Topology of the skewed family: a forward chain `i -> i+1` plus every
    /// node sending back to node 0.
    pub fn skewed(n: usize) -> Result<Self> {
        let mut edges = BTreeSet::new();
        for i in 0..n.saturating_sub(1) {
            edges.insert((i, i + 1));
        }
        for j in 1..n {
            edges.insert((j, 0));
        }
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    /// Out-degree excluding the implicit self-loop.
    pub fn out_degree(&self, j: usize) -> usize {
        self.edges.range((j, 0)..(j + 1, 0)).count()
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.strongly_connected
    }

    /// Parses the edge-list text format: one `j i` pair per line, 0-based,
    /// `#` comments and blank lines ignored. `n` is the largest id plus one
    /// unless a `# n=<count>` header is present.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut declared_n = None;
        let mut max_id = None::<usize>;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("n=") {
                    declared_n = Some(v.trim().parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })?);
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut next_id = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse {
                        line: lineno + 1,
                        msg: "expected `j i`".into(),
                    })?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })
            };
            let j = next_id()?;
            let i = next_id()?;
            if it.next().is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "trailing tokens".into(),
                });
            }
            max_id = Some(max_id.map_or(i.max(j), |m| m.max(i).max(j)));
            edges.push((j, i));
        }
        let n = declared_n.unwrap_or_else(|| max_id.map_or(0, |m| m + 1));
        Self::new(n, edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("# n={}\n", self.n);
        for (j, i) in &self.edges {
            let _ = writeln!(out, "{j} {i}");
        }
        out
    }

    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }
}

fn check_strongly_connected(n: usize, edges: &BTreeSet<(usize, usize)>) -> bool {
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for &(j, i) in edges {
        fwd[j].push(i);
        bwd[i].push(j);
    }
    let reach_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &t in &adj[u] {
                if !seen[t] {
                    seen[t] = true;
                    count += 1;
                    queue.push_back(t);
                }
            }
        }
        count == n
    };
    reach_all(&fwd) && reach_all(&bwd)
}

/// Dense non-negative column-stochastic matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    w: Array2<f64>,
}

impl MixingMatrix {
    /// Validates squareness, entries in `[0, 1]` and unit column sums.
    pub fn new(w: Array2<f64>) -> Result<Self> {
        let (rows, cols) = w.dim();
        if rows != cols {
            return Err(Error::DimensionMismatch {
                expected: rows,
                got: cols,
            });
        }
        if rows == 0 {
            return Err(Error::InvalidParameter("empty matrix".into()));
        }
        for ((i, j), &x) in w.indexed_iter() {
            if !x.is_finite() || !(0.0..=1.0).contains(&x) {
                return Err(Error::NotColumnStochastic(format!(
                    "entry ({i},{j}) = {x} outside [0,1]"
                )));
            }
        }
        for (j, col) in w.columns().into_iter().enumerate() {
            let s: f64 = col.sum();
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::NotColumnStochastic(format!(
                    "column {j} sums to {s}"
                )));
            }
        }
        Ok(Self { w })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.w
    }

    pub fn into_weights(self) -> Array2<f64> {
        self.w
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[[i, j]]
    }

    pub fn trace(&self) -> f64 {
        self.w.diag().sum()
    }

    /// Digraph of the off-diagonal support.
    pub fn digraph(&self) -> Digraph {
        let n = self.n();
        let edges = self
            .w
            .indexed_iter()
            .filter(|&((i, j), &x)| i != j && x > 0.0)
            .map(|((i, j), _)| (j, i))
            .collect::<Vec<_>>();
        Digraph::new(n, edges).expect("support edges are unique and in range")
    }

    /// True when every positive off-diagonal weight is an edge of `g`.
    pub fn respects(&self, g: &Digraph) -> bool {
        g.n() == self.n()
            && self
                .w
                .indexed_iter()
                .all(|((i, j), &x)| x == 0.0 || i == j || g.has_edge(j, i))
    }

    /// Strongly connected support with positive trace, the sufficient
    /// condition for primitivity used throughout.
    pub fn is_primitive(&self) -> bool {
        self.trace() > 0.0 && self.digraph().is_strongly_connected()
    }

    /// `W^power`, computed by repeated multiplication.
    pub fn power(&self, power: usize) -> MixingMatrix {
        let mut acc = Array2::eye(self.n());
        for _ in 0..power {
            acc = self.w.dot(&acc);
        }
        renormalize_columns(&mut acc);
        MixingMatrix { w: acc }
    }

    /// Applies one gossip round to a node-stacked block.
    pub fn mix(&self, block: &Array2<f64>) -> Array2<f64> {
        self.w.dot(block)
    }

    pub fn mix_vec(&self, v: &Array1<f64>) -> Array1<f64> {
        self.w.dot(v)
    }

    /// CSV dump: `n` rows of `n` comma-separated values, row `i` is the
    /// receiving node. Values use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.w.rows() {
            let line = row.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split(',')
                .map(|t| {
                    t.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let n = rows.len();
        if let Some((idx, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected {n} columns, found {}", r.len()),
            });
        }
        let flat = rows.into_iter().flatten().collect::<Vec<_>>();
        let w = Array2::from_shape_vec((n, n), flat)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Self::new(w)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_csv(&std::fs::read_to_string(path)?)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn renormalize_columns(w: &mut Array2<f64>) {
    for mut col in w.columns_mut() {
        let s = col.sum();
        if s > 0.0 {
            col.mapv_inplace(|x| x / s);
        }
    }
}

/// `w[i][j] = 1/(1 + outdeg(j))` on every edge `j -> i` and on the diagonal.
pub fn build_out_degree_matrix(g: &Digraph) -> Result<MixingMatrix> {
    if !g.is_strongly_connected() {
        return Err(Error::NotStronglyConnected);
    }
    let n = g.n();
    let mut w = Array2::zeros((n, n));
    for j in 0..n {
        let share = 1.0 / (1.0 + g.out_degree(j) as f64);
        w[[j, j]] = share;
    }
    for (j, i) in g.edges() {
        w[[i, j]] = w[[j, j]];
    }
    MixingMatrix::new(w)
}

/// Skewed family `((1+eps)/2) J + ((1-eps)/2) e1 1^T` with `J` the cyclic
/// shift. Row 0 carries `(1-eps)/2` everywhere except the last column,
/// which sends everything to node 0; the subdiagonal is `(1+eps)/2`.
pub fn build_skewed_family(n: usize, eps: f64) -> Result<MixingMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(eps.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!("eps={eps} must lie in (-1,1)")));
    }
    if n == 1 {
        return MixingMatrix::new(Array2::ones((1, 1)));
    }
    let fwd = (1.0 + eps) / 2.0;
    let back = (1.0 - eps) / 2.0;
    let mut w = Array2::zeros((n, n));
    for j in 0..n - 1 {
        w[[0, j]] = back;
        w[[j + 1, j]] = fwd;
    }
    w[[0, n - 1]] = 1.0;
    MixingMatrix::new(w)
}

/// Lazy variant `laziness * I + (1 - laziness) * W_eps`. Shares the
/// equilibrium vector of `W_eps` (so `kappa_pi` is fixed by `eps`) while
/// `beta_pi` grows toward one as `laziness -> 1`. Every node gets a
/// self-loop for `laziness > 0`.
pub fn build_lazy_skewed(n: usize, eps: f64, laziness: f64) -> Result<MixingMatrix> {
    if !(0.0..1.0).contains(&laziness) {
        return Err(Error::InvalidParameter(format!(
            "laziness={laziness} must lie in [0,1)"
        )));
    }
    let base = build_skewed_family(n, eps)?.into_weights();
    let w = base * (1.0 - laziness) + Array2::<f64>::eye(n) * laziness;
    MixingMatrix::new(w)
}

/// Directed ring with the out-degree rule (each column: 1/2 self, 1/2 next).
pub fn build_ring(n: usize) -> Result<MixingMatrix> {
    if n < 2 {
        return Err(Error::InvalidParameter("ring needs n >= 2".into()));
    }
    build_out_degree_matrix(&Digraph::ring(n)?)
}

/// Bidirectional grid with the out-degree rule.
pub fn build_grid(rows: usize, cols: usize) -> Result<MixingMatrix> {
    if rows * cols < 2 {
        return Err(Error::InvalidParameter("grid needs at least two nodes".into()));
    }
    build_out_degree_matrix(&Digraph::grid(rows, cols)?)
}

/// Uniform averaging `11^T / n` (complete digraph, out-degree rule).
pub fn build_complete(n: usize) -> Result<MixingMatrix> {
    if n == 1 {
        return MixingMatrix::new(Array2::ones((1, 1)));
    }
    build_out_degree_matrix(&Digraph::complete(n)?)
}

/// Multiplies every nonzero weight by `exp(u * strength)` with `u` uniform
/// in `[-1, 1]`, then renormalizes columns. The sparsity pattern is kept.
pub fn perturb_weights(w: &MixingMatrix, seed: u64, strength: f64) -> Result<MixingMatrix> {
    if !(0.0..1.0).contains(&strength) {
        return Err(Error::InvalidParameter(format!(
            "strength={strength} must lie in [0,1)"
        )));
    }
    if strength == 0.0 {
        return Ok(w.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = w.weights().clone();
    // Column-major walk so the draw order does not depend on memory layout.
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            if out[[i, j]] > 0.0 {
                let u: f64 = rng.random_range(-1.0..=1.0);
                out[[i, j]] *= (u * strength).exp();
            }
        }
    }
    renormalize_columns(&mut out);
    MixingMatrix::new(out)
}
