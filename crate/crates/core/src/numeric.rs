//! Small numeric helpers shared by the functionals and the solver.

use nalgebra::{DMatrix, SymmetricEigen};

/// Tolerance for algebraic identities (row sums, marginals).
pub const ALGEBRAIC_TOL: f64 = 1e-12;
/// Tolerance for iterative solves (stationary residuals).
pub const ITERATIVE_TOL: f64 = 1e-10;

/// Neumaier-compensated accumulator. Summation order is the caller's
/// iteration order, so results are reproducible.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// `x * ln(x / y)` with the `0 ln 0 = 0` convention. Returns `+inf` when
/// `x > 0` and `y == 0`.
#[inline]
pub fn xlogx_over_y(x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if y <= 0.0 {
        f64::INFINITY
    } else {
        x * (x / y).ln()
    }
}

/// In-place softmax of log-weights; `-inf` entries map to exactly zero.
pub fn softmax_in_place(logits: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // every weight is zero; caller guarantees this cannot happen for
        // a valid partition, but fall back to uniform rather than NaN
        let u = 1.0 / logits.len() as f64;
        logits.iter_mut().for_each(|x| *x = u);
        return;
    }
    let mut total = 0.0;
    for x in logits.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in logits.iter_mut() {
        *x /= total;
    }
}

/// Orthonormal basis (columns) of `{q in R^k : sum(q) = 0}`, Helmert form.
pub fn zero_sum_basis(k: usize) -> DMatrix<f64> {
    let mut z = DMatrix::zeros(k, k.saturating_sub(1));
    for r in 1..k {
        let norm = ((r * (r + 1)) as f64).sqrt();
        for i in 0..r {
            z[(i, r - 1)] = 1.0 / norm;
        }
        z[(r, r - 1)] = -(r as f64) / norm;
    }
    z
}

/// Smallest eigenvalue of a symmetric matrix restricted to the zero-sum
/// subspace, with its eigenvector expressed in the ambient coordinates.
/// Returns `None` when the subspace is trivial (k < 2).
pub fn min_zero_sum_eigenpair(m: &DMatrix<f64>) -> Option<(f64, Vec<f64>)> {
    let k = m.nrows();
    if k < 2 {
        return None;
    }
    let z = zero_sum_basis(k);
    let reduced = z.transpose() * m * &z;
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let v = &z * eig.eigenvectors.column(idx);
    Some((val, v.iter().copied().collect()))
}

/// Ordinary least squares fit `y = slope * x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_zero_sum() {
        for k in 2..7 {
            let z = zero_sum_basis(k);
            let gram = z.transpose() * &z;
            assert!((gram - DMatrix::identity(k - 1, k - 1)).amax() < 1e-14);
            for c in 0..k - 1 {
                assert!(z.column(c).sum().abs() < 1e-14);
            }
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let v = [1.0, 1e-16, 1e-16, -1.0];
        assert_eq!(compensated_sum(v), 2e-16);
    }

    #[test]
    fn softmax_handles_neg_infinity() {
        let mut l = [0.0, f64::NEG_INFINITY, 0.0];
        softmax_in_place(&mut l);
        assert_eq!(l, [0.5, 0.0, 0.5]);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let (s, i, r2) = linear_fit(&xs, &ys);
        assert!((s - 2.0).abs() < 1e-12 && (i + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
