//! Finite, homogeneous Markov chains: representation, validation,
//! stationary distributions and synthetic generators.

mod generate;
mod stationary;

pub use generate::{generate_ncd, random_chain_from_limit, NcdSpec};
pub use stationary::{stationary, stationary_power, StationaryDistribution};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::ALGEBRAIC_TOL;

/// Row-stochastic transition matrix. A zero entry means there is no
/// directed edge between the two states.
///
/// Construction only enforces stochasticity. Irreducibility and
/// aperiodicity are checked by [`validate`]; use
/// [`TransitionModel::ergodic`] when both are required.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    pi: DMatrix<f64>,
}

impl TransitionModel {
    pub fn new(pi: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&pi)?;
        Ok(Self { pi })
    }

    /// Like [`TransitionModel::new`] but also rejects reducible or periodic chains.
    pub fn ergodic(pi: DMatrix<f64>) -> Result<Self> {
        validate(&pi).into_result()?;
        Ok(Self { pi })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.pi.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.pi
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.pi
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[(i, j)]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.pi.row(i).iter().copied().collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.pi[(i, j)] > 0.0
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.pi)
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|row| row.len() != c) {
        return Err(Error::DimensionMismatch {
            what: "row length",
            expected: c,
            found: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn check_stochastic(pi: &DMatrix<f64>) -> Result<()> {
    if pi.nrows() != pi.ncols() || pi.nrows() == 0 {
        return Err(Error::NonSquare {
            rows: pi.nrows(),
            cols: pi.ncols(),
        });
    }
    for i in 0..pi.nrows() {
        for j in 0..pi.ncols() {
            let v = pi[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::NegativeEntry { row: i, col: j });
            }
        }
    }
    for i in 0..pi.nrows() {
        let deviation = pi.row(i).sum() - 1.0;
        if deviation.abs() > ALGEBRAIC_TOL {
            return Err(Error::RowSumViolation { row: i, deviation });
        }
    }
    Ok(())
}

/// Outcome of [`validate`]. Every problem found is listed; the model is
/// accepted only if the list of structural problems is empty and the
/// chain is irreducible and aperiodic.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub rows: usize,
    pub cols: usize,
    pub row_sum_violations: Vec<(usize, f64)>,
    pub negative_entries: Vec<(usize, usize)>,
    pub irreducible: bool,
    /// Period of the chain; `None` when it is not defined (reducible or non-square).
    pub period: Option<usize>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.rows == self.cols
            && self.rows > 0
            && self.row_sum_violations.is_empty()
            && self.negative_entries.is_empty()
            && self.irreducible
            && self.period == Some(1)
    }

    /// First problem, in the order: shape, entries, row sums, reducibility, period.
    pub fn into_result(self) -> Result<()> {
        if self.rows != self.cols || self.rows == 0 {
            return Err(Error::NonSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        if let Some(&(row, col)) = self.negative_entries.first() {
            return Err(Error::NegativeEntry { row, col });
        }
        if let Some(&(row, deviation)) = self.row_sum_violations.first() {
            return Err(Error::RowSumViolation { row, deviation });
        }
        if !self.irreducible {
            return Err(Error::Reducible);
        }
        match self.period {
            Some(1) => Ok(()),
            Some(period) => Err(Error::Periodic { period }),
            None => Err(Error::Reducible),
        }
    }
}

pub fn validate(pi: &DMatrix<f64>) -> ValidationReport {
    let (rows, cols) = pi.shape();
    let mut report = ValidationReport {
        rows,
        cols,
        row_sum_violations: Vec::new(),
        negative_entries: Vec::new(),
        irreducible: false,
        period: None,
    };
    if rows != cols || rows == 0 {
        return report;
    }
    for i in 0..rows {
        for j in 0..cols {
            let v = pi[(i, j)];
            if !(v >= 0.0) || !v.is_finite() {
                report.negative_entries.push((i, j));
            }
        }
        let deviation = pi.row(i).sum() - 1.0;
        if deviation.abs() > ALGEBRAIC_TOL {
            report.row_sum_violations.push((i, deviation));
        }
    }
    let adjacency: Vec<Vec<usize>> = (0..rows)
        .map(|i| (0..cols).filter(|&j| pi[(i, j)] > 0.0).collect())
        .collect();
    report.irreducible = strongly_connected(&adjacency);
    if report.irreducible {
        report.period = Some(period(&adjacency));
    }
    report
}

fn reach_all(adjacency: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn strongly_connected(adjacency: &[Vec<usize>]) -> bool {
    let n = adjacency.len();
    let mut reverse = vec![Vec::new(); n];
    for (u, out) in adjacency.iter().enumerate() {
        for &v in out {
            reverse[v].push(u);
        }
    }
    reach_all(adjacency) && reach_all(&reverse)
}

/// Period of an irreducible graph: gcd over edges u->v of level(u)+1-level(v),
/// levels taken from a breadth-first search.
fn period(adjacency: &[Vec<usize>]) -> usize {
    let n = adjacency.len();
    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = std::collections::VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in &adjacency[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for (u, out) in adjacency.iter().enumerate() {
        for &v in out {
            let d = (level[u] as i64 + 1 - level[v] as i64).unsigned_abs() as usize;
            g = gcd(g, d);
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
