//! Exhaustive search over binary partitions, for small chains.
//!
//! Every partition of `n` states into `m` nonempty groups is visited once,
//! as a restricted growth string in lexicographic order. The weight matrix
//! of each candidate is the closed form `Theta = U^T Pi`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{StationaryDistribution, TransitionModel};
use crate::distortion::total_distortion_binary;
use crate::error::{Error, Result};
use crate::joint::theta_of;
use crate::numeric::{CompensatedSum, ALGEBRAIC_TOL};
use crate::partition::BinaryPartition;

pub const MAX_STATES: usize = 12;
pub const DEFAULT_CAP: u128 = 10_000_000;

/// Stirling number of the second kind `S(n, m)`.
pub fn stirling2(n: usize, m: usize) -> u128 {
    if m > n {
        return 0;
    }
    let mut row = vec![0u128; m + 1];
    row[0] = 1;
    for i in 1..=n {
        for k in (1..=m.min(i)).rev() {
            row[k] = k as u128 * row[k] + row[k - 1];
        }
        row[0] = 0;
    }
    row[m]
}

/// Restricted growth strings of length `n` with maximum `m - 1`, in
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct Partitions {
    n: usize,
    m: usize,
    rgs: Vec<usize>,
    /// `prefix_max[i] = max(rgs[..=i])`.
    prefix_max: Vec<usize>,
    done: bool,
}

impl Partitions {
    fn new(n: usize, m: usize) -> Self {
        // smallest string: zeros followed by 1, 2, .., m-1 at the tail
        let mut rgs = vec![0; n];
        for k in 1..m {
            rgs[n - m + k] = k;
        }
        let mut p = Self {
            n,
            m,
            prefix_max: vec![0; n],
            rgs,
            done: false,
        };
        p.refresh_max(0);
        p
    }

    fn refresh_max(&mut self, from: usize) {
        for i in from..self.n {
            let before = if i == 0 { 0 } else { self.prefix_max[i - 1] };
            self.prefix_max[i] = before.max(self.rgs[i]);
        }
    }

    fn advance(&mut self) {
        let (n, m) = (self.n, self.m);
        for i in (1..n).rev() {
            let pm = self.prefix_max[i - 1];
            let tail = n - i - 1;
            // smallest larger value that still lets the tail reach m groups
            let need = (m - 1).saturating_sub(tail);
            let v = if pm >= need {
                self.rgs[i] + 1
            } else {
                (self.rgs[i] + 1).max(need)
            };
            if v > (pm + 1).min(m - 1) {
                continue;
            }
            self.rgs[i] = v;
            let mut top = pm.max(v);
            for k in i + 1..n {
                if m - 1 - top >= n - k {
                    top += 1;
                    self.rgs[k] = top;
                } else {
                    self.rgs[k] = 0;
                }
            }
            self.refresh_max(i);
            return;
        }
        self.done = true;
    }
}

impl Iterator for Partitions {
    type Item = BinaryPartition;

    fn next(&mut self) -> Option<BinaryPartition> {
        if self.done {
            return None;
        }
        let out = BinaryPartition::from_rgs_unchecked(self.rgs.clone(), self.m);
        self.advance();
        Some(out)
    }
}

fn check_size(n: usize, m: usize, cap: u128) -> Result<()> {
    if m == 0 || m > n || n > MAX_STATES {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= m ({m}) <= n ({n}) <= {MAX_STATES}"
        )));
    }
    let count = stirling2(n, m);
    if count > cap {
        return Err(Error::TooLarge { count, cap });
    }
    Ok(())
}

/// All partitions of `n` states into `m` groups, with the default cap.
pub fn enumerate_partitions(n: usize, m: usize) -> Result<Partitions> {
    enumerate_partitions_capped(n, m, DEFAULT_CAP)
}

pub fn enumerate_partitions_capped(n: usize, m: usize, cap: u128) -> Result<Partitions> {
    check_size(n, m, cap)?;
    Ok(Partitions::new(n, m))
}

/// Distortion of candidates from row sums `w_j = sum_{i in j} gamma_i pi_i`.
struct Evaluator<'a> {
    pi: &'a DMatrix<f64>,
    log_pi: DMatrix<f64>,
    gamma: &'a [f64],
    w: DMatrix<f64>,
    alpha: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    fn new(model: &'a TransitionModel, gamma: &'a StationaryDistribution, m: usize) -> Self {
        let pi = model.matrix();
        Self {
            pi,
            log_pi: crate::distortion::log_matrix(pi),
            gamma: gamma.as_slice(),
            w: DMatrix::zeros(m, pi.ncols()),
            alpha: vec![0.0; m],
        }
    }

    /// `sum_i gamma_i sum_k pi_ik ln(pi_ik alpha_j / w_jk)`.
    fn distortion(&mut self, labels: &[usize]) -> f64 {
        let n = self.pi.ncols();
        self.w.fill(0.0);
        self.alpha.iter_mut().for_each(|a| *a = 0.0);
        for (i, &j) in labels.iter().enumerate() {
            self.alpha[j] += self.gamma[i];
            for k in 0..n {
                self.w[(j, k)] += self.gamma[i] * self.pi[(i, k)];
            }
        }
        let log_theta = DMatrix::from_fn(self.w.nrows(), n, |j, k| {
            let v = self.w[(j, k)];
            if v > 0.0 {
                (v / self.alpha[j]).ln()
            } else {
                f64::NEG_INFINITY
            }
        });
        let mut acc = CompensatedSum::new();
        for (i, &j) in labels.iter().enumerate() {
            for k in 0..n {
                let p = self.pi[(i, k)];
                if p > 0.0 {
                    acc.add(self.gamma[i] * p * (self.log_pi[(i, k)] - log_theta[(j, k)]));
                }
            }
        }
        acc.value().max(0.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RankedPartition {
    /// Zero-based group of every state.
    pub assignment: Vec<usize>,
    pub distortion: f64,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub partition: BinaryPartition,
    pub distortion: f64,
    pub candidates: u128,
}

/// `a` beats the incumbent `b` only by more than rounding noise.
fn strictly_better(a: f64, b: f64) -> bool {
    a < b - ALGEBRAIC_TOL * b.abs().max(1.0)
}

/// Minimum total distortion over all `m`-group binary partitions. Ties
/// within rounding go to the lexicographically smallest string.
pub fn best_binary(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    m: usize,
) -> Result<OracleResult> {
    best_binary_capped(model, gamma, m, DEFAULT_CAP)
}

pub fn best_binary_capped(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    m: usize,
    cap: u128,
) -> Result<OracleResult> {
    let n = model.n();
    if gamma.len() != n {
        return Err(Error::DimensionMismatch {
            what: "gamma length vs chain size",
            expected: n,
            found: gamma.len(),
        });
    }
    let parts = enumerate_partitions_capped(n, m, cap)?;
    let mut eval = Evaluator::new(model, gamma, m);
    let mut best: Option<(BinaryPartition, f64)> = None;
    let mut count = 0u128;
    for p in parts {
        count += 1;
        let d = eval.distortion(p.assignment());
        match &best {
            Some((_, b)) if !strictly_better(d, *b) => {}
            _ => best = Some((p, d)),
        }
    }
    let (partition, _) = best.expect("at least one partition");
    // report the value through the public closed-form path
    let theta = theta_of(model, gamma, &partition.to_probabilistic())?;
    let distortion = total_distortion_binary(model, &theta, &partition, gamma)?;
    Ok(OracleResult {
        partition,
        distortion,
        candidates: count,
    })
}

/// Every candidate with its distortion, best first; equal values keep
/// enumeration order. `limit` truncates the list.
pub fn rank_partitions(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    m: usize,
    limit: Option<usize>,
) -> Result<Vec<RankedPartition>> {
    let parts = enumerate_partitions(model.n(), m)?;
    let mut eval = Evaluator::new(model, gamma, m);
    let mut out: Vec<RankedPartition> = parts
        .map(|p| {
            let distortion = eval.distortion(p.assignment());
            RankedPartition {
                assignment: p.assignment().to_vec(),
                distortion,
            }
        })
        .collect();
    out.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
    if let Some(l) = limit {
        out.truncate(l);
    }
    Ok(out)
}
