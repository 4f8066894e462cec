//! Hard and soft partitions of the state index set.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chain::StationaryDistribution;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ALGEBRAIC_TOL};

/// Default tolerance for [`coincident_columns`].
pub const COINCIDENCE_TOL: f64 = 1e-6;

/// Surjective assignment of `n` states to `m` groups. Labels are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryPartition {
    m: usize,
    assignment: Vec<usize>,
}

impl BinaryPartition {
    /// Every label must lie in `0..m` and every group must be used.
    pub fn new(assignment: Vec<usize>, m: usize) -> Result<Self> {
        if assignment.is_empty() || m == 0 {
            return Err(Error::InvalidPartition("empty partition".into()));
        }
        let mut used = vec![false; m];
        for (i, &a) in assignment.iter().enumerate() {
            if a >= m {
                return Err(Error::InvalidPartition(format!(
                    "state {i} assigned to group {a} but m = {m}"
                )));
            }
            used[a] = true;
        }
        if let Some(j) = used.iter().position(|u| !u) {
            return Err(Error::InvalidPartition(format!("group {j} is empty")));
        }
        Ok(Self { m, assignment })
    }

    /// Relabels groups in order of first appearance, so any labelling
    /// without gaps is accepted.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let canon = canonical(labels);
        let m = canon.iter().copied().max().map_or(0, |x| x + 1);
        Self::new(canon, m)
    }

    pub(crate) fn from_rgs_unchecked(rgs: Vec<usize>, m: usize) -> Self {
        Self { m, assignment: rgs }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn group_of(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// States in group `j`, ascending.
    pub fn members(&self, j: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assignment[i] == j).collect()
    }

    /// Labels renumbered by order of first appearance.
    pub fn canonical(&self) -> Vec<usize> {
        canonical(&self.assignment)
    }

    /// The induced 0/1 matrix.
    pub fn to_probabilistic(&self) -> ProbabilisticPartition {
        let psi = DMatrix::from_fn(self.n(), self.m, |i, j| {
            if self.assignment[i] == j {
                1.0
            } else {
                0.0
            }
        });
        ProbabilisticPartition { psi }
    }
}

fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Row-stochastic `n x m` matrix of soft assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilisticPartition {
    psi: DMatrix<f64>,
}

impl ProbabilisticPartition {
    /// Entries must be in `[0, 1]` and rows must sum to one within `1e-12`.
    /// All-zero columns are allowed here; the solver removes them.
    pub fn new(psi: DMatrix<f64>) -> Result<Self> {
        if psi.nrows() == 0 || psi.ncols() == 0 {
            return Err(Error::InvalidPartition("empty matrix".into()));
        }
        for i in 0..psi.nrows() {
            for j in 0..psi.ncols() {
                let v = psi[(i, j)];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidPartition(format!(
                        "entry ({i}, {j}) = {v} outside [0, 1]"
                    )));
                }
            }
            let s = compensated_sum(psi.row(i).iter().copied());
            if (s - 1.0).abs() > ALGEBRAIC_TOL {
                return Err(Error::InvalidPartition(format!("row {i} sums to {s}")));
            }
        }
        Ok(Self { psi })
    }

    pub(crate) fn from_matrix_unchecked(psi: DMatrix<f64>) -> Self {
        Self { psi }
    }

    /// Single group holding every state.
    pub fn ones(n: usize) -> Self {
        Self {
            psi: DMatrix::from_element(n, 1, 1.0),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            psi: DMatrix::identity(n, n),
        }
    }

    pub fn uniform(n: usize, m: usize) -> Self {
        Self {
            psi: DMatrix::from_element(n, m, 1.0 / m as f64),
        }
    }

    /// Rows drawn uniformly from the simplex interior, seeded.
    pub fn random(n: usize, m: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut psi = DMatrix::zeros(n, m);
        for i in 0..n {
            let w: Vec<f64> = (0..m).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let total: f64 = w.iter().sum();
            for j in 0..m {
                psi[(i, j)] = w[j] / total;
            }
        }
        Self { psi }
    }

    pub fn n(&self) -> usize {
        self.psi.nrows()
    }

    pub fn m(&self) -> usize {
        self.psi.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.psi
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.psi
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.psi[(i, j)]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.psi.column(j).iter().copied().collect()
    }

    /// True when every entry is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.psi.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Keeps the listed columns, in the given order, and renormalises rows.
    /// Rows left with no mass are spread uniformly over the kept columns.
    pub fn select_columns(&self, keep: &[usize]) -> Self {
        let n = self.n();
        let mut psi = DMatrix::zeros(n, keep.len());
        for i in 0..n {
            let total = compensated_sum(keep.iter().map(|&j| self.psi[(i, j)]));
            for (c, &j) in keep.iter().enumerate() {
                psi[(i, c)] = if total > 0.0 {
                    self.psi[(i, j)] / total
                } else {
                    1.0 / keep.len() as f64
                };
            }
        }
        Self { psi }
    }
}

/// Marginal group masses `alpha_j = sum_i gamma_i psi_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMarginals {
    alpha: Vec<f64>,
}

impl ClusterMarginals {
    pub fn from_partition(
        gamma: &StationaryDistribution,
        part: &ProbabilisticPartition,
    ) -> Result<Self> {
        if gamma.len() != part.n() {
            return Err(Error::DimensionMismatch {
                what: "gamma length vs partition rows",
                expected: part.n(),
                found: gamma.len(),
            });
        }
        let g = gamma.as_slice();
        let alpha = (0..part.m())
            .map(|j| compensated_sum((0..part.n()).map(|i| g[i] * part.get(i, j))))
            .collect();
        Ok(Self { alpha })
    }

    /// Wraps an explicitly supplied vector without consistency checks.
    pub fn from_vec(alpha: Vec<f64>) -> Self {
        Self { alpha }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }
}

impl std::ops::Index<usize> for ClusterMarginals {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.alpha[j]
    }
}

/// Row-wise argmax with ties going to the lowest column index. Columns
/// that win no row are removed; the second value maps each output group
/// back to its source column.
pub fn harden_with_map(part: &ProbabilisticPartition) -> (BinaryPartition, Vec<usize>) {
    let raw: Vec<usize> = (0..part.n())
        .map(|i| {
            let mut best = 0;
            for j in 1..part.m() {
                if part.get(i, j) > part.get(i, best) {
                    best = j;
                }
            }
            best
        })
        .collect();
    let mut used = vec![false; part.m()];
    raw.iter().for_each(|&j| used[j] = true);
    let kept: Vec<usize> = (0..part.m()).filter(|&j| used[j]).collect();
    let mut index = vec![usize::MAX; part.m()];
    for (new, &old) in kept.iter().enumerate() {
        index[old] = new;
    }
    let assignment = raw.into_iter().map(|j| index[j]).collect();
    (
        BinaryPartition {
            m: kept.len(),
            assignment,
        },
        kept,
    )
}

pub fn harden(part: &ProbabilisticPartition) -> BinaryPartition {
    harden_with_map(part).0
}

/// Whether the two partitions induce the same equivalence relation on
/// states (equal co-membership), i.e. agree up to relabelling groups.
pub fn permutation_equivalent(a: &BinaryPartition, b: &BinaryPartition) -> bool {
    a.n() == b.n() && a.m() == b.m() && a.canonical() == b.canonical()
}

/// All column pairs `(j, k)`, `j < k`, whose max-abs difference is at most `tol`.
pub fn coincident_columns(part: &ProbabilisticPartition, tol: f64) -> Vec<(usize, usize)> {
    let psi = part.matrix();
    let mut out = Vec::new();
    for j in 0..part.m() {
        for k in j + 1..part.m() {
            let d = (0..part.n())
                .map(|i| (psi[(i, j)] - psi[(i, k)]).abs())
                .fold(0.0, f64::max);
            if d <= tol {
                out.push((j, k));
            }
        }
    }
    out
}
