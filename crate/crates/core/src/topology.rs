//! Agent graphs and doubly stochastic consensus weights.
//!
//! A [`NetworkTopology`] is an undirected, connected graph without self-loops.
//! A [`WeightMatrix`] is a symmetric, row-stochastic matrix supported on the
//! graph (plus the diagonal) whose diagonal is bounded away from one.

use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Absolute tolerance on row sums of a weight matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Second-largest eigenvalue of `W` must sit below `1 - SPECTRAL_GAP_TOL`.
pub const SPECTRAL_GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    neighbors: Vec<Vec<usize>>,
}

impl NetworkTopology {
    /// Builds a topology from neighbor lists, checking symmetry, self-loops and
    /// connectivity. Neighbor lists are sorted and deduplicated.
    pub fn from_neighbor_lists(mut neighbors: Vec<Vec<usize>>) -> Result<Self> {
        let n = neighbors.len();
        if n == 0 {
            return Err(Error::InvalidTopology("graph has no agents".into()));
        }
        for (i, list) in neighbors.iter_mut().enumerate() {
            list.sort_unstable();
            list.dedup();
            if list.contains(&i) {
                return Err(Error::InvalidTopology(format!("self-loop at agent {i}")));
            }
            if let Some(&j) = list.iter().find(|&&j| j >= n) {
                return Err(Error::InvalidTopology(format!(
                    "agent {i} lists neighbor {j} outside 0..{n}"
                )));
            }
        }
        for i in 0..n {
            for &j in &neighbors[i] {
                if neighbors[j].binary_search(&i).is_err() {
                    return Err(Error::InvalidTopology(format!(
                        "edge {i}->{j} has no reverse edge"
                    )));
                }
            }
        }
        let topo = Self { neighbors };
        if !topo.is_connected() {
            return Err(Error::InvalidTopology("graph is not connected".into()));
        }
        Ok(topo)
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Common degree if every agent has the same number of neighbors.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degree(0);
        self.neighbors.iter().all(|l| l.len() == d).then_some(d)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    visited += 1;
                    queue.push_back(j);
                }
            }
        }
        visited == n
    }

    /// Dense 0/1 adjacency as CSV rows.
    pub fn to_csv(&self) -> String {
        let n = self.n();
        let mut out = String::new();
        for i in 0..n {
            let row: Vec<&str> = (0..n)
                .map(|j| if self.is_adjacent(i, j) { "1" } else { "0" })
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Ring of `n` agents where each agent is linked to the `d/2` closest agents
/// on either side.
pub fn build_d_regular_cycle(n: usize, d: usize) -> Result<NetworkTopology> {
    if n < 3 {
        return Err(Error::InvalidTopology(format!("cycle needs n >= 3, got {n}")));
    }
    if d == 0 || d % 2 != 0 {
        return Err(Error::InvalidTopology(format!("degree must be positive and even, got {d}")));
    }
    if d >= n {
        return Err(Error::InvalidTopology(format!("degree {d} must be below n = {n}")));
    }
    let half = d / 2;
    let neighbors = (0..n)
        .map(|i| {
            (1..=half)
                .flat_map(|s| [(i + n - s) % n, (i + s) % n])
                .collect::<Vec<_>>()
        })
        .collect();
    NetworkTopology::from_neighbor_lists(neighbors)
}

/// Symmetric doubly stochastic weights together with their diagonal bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    delta: f64,
    big_delta: f64,
}

impl WeightMatrix {
    /// Wraps a dense matrix without validating it; see [`validate_weights`].
    pub fn from_dense(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "weight matrix must be square and non-empty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let diag = entries.diagonal();
        let delta = diag.min();
        let big_delta = diag.max();
        Ok(Self { entries, delta, big_delta })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.entries[(i, i)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Smallest diagonal weight.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Largest diagonal weight.
    pub fn big_delta(&self) -> f64 {
        self.big_delta
    }

    /// Eigenvalues sorted in decreasing order.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.symmetrized()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    fn symmetrized(&self) -> DMatrix<f64> {
        (&self.entries + self.entries.transpose()) * 0.5
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Parses the CSV produced by [`WeightMatrix::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split(',')
                    .map(|c| c.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{c:?}: {e}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Parse("weight CSV is not square".into()));
        }
        WeightMatrix::from_dense(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }
}

/// `w_ii = 1/2 + 1/(2(d+1))`, `w_ij = 1/(2(d+1))` on edges.
pub fn build_lazy_cycle_weights(topology: &NetworkTopology) -> Result<WeightMatrix> {
    let d = topology.regular_degree().ok_or_else(|| {
        Error::InvalidTopology("uniform-degree weights need a regular graph".into())
    })?;
    let n = topology.n();
    let off = 1.0 / (2.0 * (d as f64 + 1.0));
    let diag = 0.5 + off;
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = diag;
        for &j in topology.neighbors(i) {
            w[(i, j)] = off;
        }
    }
    WeightMatrix::from_dense(w)
}

/// Metropolis-Hastings weights `w_ij = 1/(1 + max(d_i, d_j))` for graphs
/// without uniform degree.
pub fn build_metropolis_weights(topology: &NetworkTopology) -> Result<WeightMatrix> {
    let n = topology.n();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for &j in topology.neighbors(i) {
            w[(i, j)] = 1.0 / (1.0 + topology.degree(i).max(topology.degree(j)) as f64);
        }
    }
    for i in 0..n {
        let off: f64 = w.row(i).sum();
        w[(i, i)] = 1.0 - off;
    }
    WeightMatrix::from_dense(w)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightViolation {
    DimensionMismatch { weights: usize, topology: usize },
    Asymmetric { i: usize, j: usize, magnitude: f64 },
    RowSum { row: usize, sum: f64 },
    Negative { i: usize, j: usize, value: f64 },
    OffPattern { i: usize, j: usize, value: f64 },
    DiagonalNotBelowOne { i: usize, value: f64 },
    RankDeficient { second_eigenvalue: f64 },
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DimensionMismatch { weights, topology } => {
                write!(f, "dimension mismatch: W is {weights}x{weights}, graph has {topology} agents")
            }
            Self::Asymmetric { i, j, magnitude } => {
                write!(f, "W not symmetric at ({i},{j}): |w_ij - w_ji| = {magnitude:e}")
            }
            Self::RowSum { row, sum } => write!(f, "row sum != 1 at row {row}: sum = {sum:.17}"),
            Self::Negative { i, j, value } => write!(f, "negative weight at ({i},{j}): {value:e}"),
            Self::OffPattern { i, j, value } => {
                write!(f, "weight outside graph pattern at ({i},{j}): {value:e}")
            }
            Self::DiagonalNotBelowOne { i, value } => {
                write!(f, "diagonal weight not below 1 at {i}: {value:.17}")
            }
            Self::RankDeficient { second_eigenvalue } => write!(
                f,
                "rank(I-W) != n-1: second eigenvalue of W = {second_eigenvalue:.17}"
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<WeightViolation>,
    /// Non-fatal findings (currently only a zero minimum diagonal).
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for v in &self.violations {
            let _ = writeln!(s, "violation: {v}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Checks every admissibility condition on `weights` relative to `topology`.
/// Failures are collected rather than returned as errors.
pub fn validate_weights(weights: &WeightMatrix, topology: &NetworkTopology) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = weights.n();
    if n != topology.n() {
        report.violations.push(WeightViolation::DimensionMismatch { weights: n, topology: topology.n() });
        return report;
    }
    let w = weights.entries();
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (w[(i, j)] - w[(j, i)]).abs();
            if gap > 0.0 {
                report.violations.push(WeightViolation::Asymmetric { i, j, magnitude: gap });
            }
        }
    }
    for i in 0..n {
        let sum: f64 = w.row(i).sum();
        if (sum - 1.0).abs() >= ROW_SUM_TOL {
            report.violations.push(WeightViolation::RowSum { row: i, sum });
        }
        for j in 0..n {
            let v = w[(i, j)];
            if v < 0.0 {
                report.violations.push(WeightViolation::Negative { i, j, value: v });
            } else if v > 0.0 && i != j && !topology.is_adjacent(i, j) {
                report.violations.push(WeightViolation::OffPattern { i, j, value: v });
            }
        }
        if w[(i, i)] >= 1.0 {
            report.violations.push(WeightViolation::DiagonalNotBelowOne { i, value: w[(i, i)] });
        }
    }
    if weights.delta() == 0.0 {
        report.warnings.push("minimum diagonal weight is zero".into());
    }
    let ev = weights.eigenvalues_desc();
    let second = if n > 1 { ev[1] } else { f64::NEG_INFINITY };
    if second >= 1.0 - SPECTRAL_GAP_TOL {
        report.violations.push(WeightViolation::RankDeficient { second_eigenvalue: second });
    }
    report
}
