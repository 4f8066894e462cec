use nalgebra::{DMatrix, DVector};

use super::TransitionModel;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ALGEBRAIC_TOL, ITERATIVE_TOL};

/// Above this size the dense solve is replaced by power iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;
const POWER_MAX_ITERS: usize = 1_000_000;

/// Invariant probability vector of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    gamma: Vec<f64>,
}

impl StationaryDistribution {
    /// Wraps a probability vector. Entries must be non-negative and sum
    /// to one within `1e-12`.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(i) = gamma.iter().position(|&g| !(g >= 0.0) || !g.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {}",
                gamma[i]
            )));
        }
        let total = compensated_sum(gamma.iter().copied());
        if (total - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidDistribution(format!("sums to {total}")));
        }
        Ok(Self { gamma })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            gamma: vec![1.0 / n as f64; n],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// `max_j |(gamma^T Pi)_j - gamma_j|`.
    pub fn residual(&self, model: &TransitionModel) -> f64 {
        residual(model.matrix(), &self.gamma)
    }
}

impl std::ops::Index<usize> for StationaryDistribution {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.gamma[i]
    }
}

fn residual(pi: &DMatrix<f64>, gamma: &[f64]) -> f64 {
    let n = gamma.len();
    (0..n)
        .map(|j| {
            let flow = compensated_sum((0..n).map(|i| gamma[i] * pi[(i, j)]));
            (flow - gamma[j]).abs()
        })
        .fold(0.0, f64::max)
}

fn normalise(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    let total = compensated_sum(v.iter().copied());
    v.iter_mut().for_each(|x| *x /= total);
    v
}

/// Stationary distribution: dense LU solve for `n <= 2000`, power iteration
/// above.
pub fn stationary(model: &TransitionModel) -> Result<StationaryDistribution> {
    if model.n() > DIRECT_SOLVE_LIMIT {
        return stationary_power(model);
    }
    let pi = model.matrix();
    let n = model.n();
    let mut a = pi.transpose() - DMatrix::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let lu = a.clone().lu();
    let mut x = lu.solve(&b).ok_or(Error::NoConvergence { iterations: 0 })?;
    // two rounds of iterative refinement
    for _ in 0..2 {
        let r = &b - &a * &x;
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence { iterations: 0 });
    }
    let gamma = normalise(x.iter().copied().collect());
    if residual(pi, &gamma) > ITERATIVE_TOL {
        return Err(Error::NoConvergence { iterations: 3 });
    }
    Ok(StationaryDistribution { gamma })
}

/// Power iteration on the lazy chain `(I + Pi) / 2`, which shares the
/// stationary distribution and is always aperiodic.
pub fn stationary_power(model: &TransitionModel) -> Result<StationaryDistribution> {
    let pi = model.matrix();
    let n = model.n();
    let pt = pi.transpose();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for it in 1..=POWER_MAX_ITERS {
        let next = (&pt * &x + &x) * 0.5;
        let next = &next / next.sum();
        let change = (&next - &x).amax();
        x = next;
        if change < ITERATIVE_TOL * 1e-3 || it % 64 == 0 {
            let gamma = normalise(x.iter().copied().collect());
            if residual(pi, &gamma) <= ITERATIVE_TOL * 0.5 {
                return Ok(StationaryDistribution { gamma });
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: POWER_MAX_ITERS,
    })
}
