use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, ALGEBRAIC_TOL};

/// Reversible chain with a prescribed stationary distribution.
///
/// A random symmetric proposal is drawn, a fraction `sparsity` of its
/// off-diagonal pairs is removed (the path `i <-> i+1` is always kept), and
/// Metropolis acceptance `min(1, gamma_j / gamma_i)` is applied. Every row
/// keeps a self-loop, so the result is irreducible and aperiodic.
pub fn random_chain_from_limit(
    gamma: &StationaryDistribution,
    sparsity: f64,
    seed: u64,
) -> Result<TransitionModel> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::InvalidArgument(format!(
            "sparsity {sparsity} outside [0, 1]"
        )));
    }
    let g = gamma.as_slice();
    if let Some(index) = g.iter().position(|&x| x <= 0.0) {
        return Err(Error::DegenerateGamma { index });
    }
    let n = g.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let w: f64 = rng.gen_range(0.05..1.0);
            let drop: f64 = rng.gen();
            if j == i + 1 || drop >= sparsity {
                s[(i, j)] = w;
                s[(j, i)] = w;
            }
        }
    }
    let max_row = (0..n).map(|i| s.row(i).sum()).fold(0.0, f64::max);
    let scale = if max_row > 0.0 { 1.0 / (1.25 * max_row) } else { 0.0 };
    let mut pi = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                pi[(i, j)] = s[(i, j)] * scale * (g[j] / g[i]).min(1.0);
            }
        }
        let off = compensated_sum((0..n).filter(|&j| j != i).map(|j| pi[(i, j)]));
        pi[(i, i)] = 1.0 - off;
    }
    TransitionModel::ergodic(pi)
}

/// Block structure of a nearly-completely-decomposable chain
/// `Pi = Pi* + epsilon * C`.
#[derive(Debug, Clone, PartialEq)]
pub struct NcdSpec {
    pub block_sizes: Vec<usize>,
    /// Block-diagonal stochastic matrix.
    pub pi_star: DMatrix<f64>,
    /// Zero row sums, maximum absolute row sum 1.
    pub coupling: DMatrix<f64>,
    pub epsilon: f64,
}

impl NcdSpec {
    /// Checks the structural invariants on explicitly supplied parts.
    pub fn new(
        block_sizes: Vec<usize>,
        pi_star: DMatrix<f64>,
        coupling: DMatrix<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let spec = Self {
            block_sizes,
            pi_star,
            coupling,
            epsilon,
        };
        spec.check()?;
        Ok(spec)
    }

    /// Draws `Pi*` and `C` from a seeded generator. Diagonal blocks have
    /// rows drawn uniformly from `[0.5, 1.5]` and normalised; `C` has
    /// uniform off-block entries, in-block entries proportional to `Pi*`
    /// that restore zero row sums, and is scaled to maximum absolute row
    /// sum 1.
    pub fn random(block_sizes: &[usize], epsilon: f64, seed: u64) -> Result<Self> {
        let b = block_sizes.len();
        Self::random_weighted(block_sizes, &DMatrix::from_element(b, b, 1.0), epsilon, seed)
    }

    /// As [`NcdSpec::random`], with every off-block coupling draw from block
    /// `a` to block `b` multiplied by `weights[(a, b)]`.
    pub fn random_weighted(
        block_sizes: &[usize],
        weights: &DMatrix<f64>,
        epsilon: f64,
        seed: u64,
    ) -> Result<Self> {
        if block_sizes.is_empty() || block_sizes.contains(&0) {
            return Err(Error::InvalidArgument(
                "block sizes must be a nonempty list of positive integers".into(),
            ));
        }
        let b = block_sizes.len();
        if weights.nrows() != b || weights.ncols() != b {
            return Err(Error::DimensionMismatch {
                what: "block weights",
                expected: b,
                found: weights.nrows(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument(
                "block weights must be finite and non-negative".into(),
            ));
        }
        let n: usize = block_sizes.iter().sum();
        let labels = labels_of(block_sizes);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pi_star = DMatrix::zeros(n, n);
        let mut start = 0;
        for &size in block_sizes {
            for i in start..start + size {
                let row: Vec<f64> = (0..size).map(|_| rng.gen_range(0.5..1.5)).collect();
                let total: f64 = row.iter().sum();
                for (k, v) in row.into_iter().enumerate() {
                    pi_star[(i, start + k)] = v / total;
                }
            }
            start += size;
        }
        let mut coupling = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut off = 0.0;
            for k in 0..n {
                if labels[k] != labels[i] {
                    let v = rng.gen_range(0.0..1.0) * weights[(labels[i], labels[k])];
                    coupling[(i, k)] = v;
                    off += v;
                }
            }
            for k in 0..n {
                if labels[k] == labels[i] {
                    coupling[(i, k)] = -off * pi_star[(i, k)];
                }
            }
        }
        let max_abs = (0..n)
            .map(|i| coupling.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if max_abs > 0.0 {
            coupling /= max_abs;
        }
        let spec = Self {
            block_sizes: block_sizes.to_vec(),
            pi_star,
            coupling,
            epsilon,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn blocks(&self) -> usize {
        self.block_sizes.len()
    }

    /// Zero-based block label of every state.
    pub fn labels(&self) -> Vec<usize> {
        labels_of(&self.block_sizes)
    }

    /// Half-open index range of every block.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut out = Vec::with_capacity(self.blocks());
        let mut start = 0;
        for &s in &self.block_sizes {
            out.push(start..start + s);
            start += s;
        }
        out
    }

    /// `Pi* + epsilon * C`. With `epsilon = 0` this is `Pi*` exactly, which
    /// is reducible and only suitable for analysis.
    pub fn chain(&self) -> Result<TransitionModel> {
        if self.epsilon < 0.0 || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon {} must be non-negative",
                self.epsilon
            )));
        }
        if self.epsilon == 0.0 {
            return TransitionModel::new(self.pi_star.clone());
        }
        let n = self.n();
        let mut pi = &self.pi_star + &self.coupling * self.epsilon;
        for i in 0..n {
            for j in 0..n {
                let v = pi[(i, j)];
                if v < 0.0 {
                    return Err(Error::NegativeEntryAfterPerturbation {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            // absorb rounding so rows sum to one
            let sum = compensated_sum(pi.row(i).iter().copied());
            let d = (0..n)
                .max_by(|&a, &b| pi[(i, a)].total_cmp(&pi[(i, b)]))
                .unwrap_or(0);
            pi[(i, d)] -= sum - 1.0;
        }
        TransitionModel::ergodic(pi)
    }

    fn check(&self) -> Result<()> {
        let n = self.n();
        for (what, m) in [("pi_star", &self.pi_star), ("coupling", &self.coupling)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: m.nrows(),
                });
            }
        }
        let labels = self.labels();
        let star = TransitionModel::new(self.pi_star.clone())?;
        for i in 0..n {
            for j in 0..n {
                if labels[i] != labels[j] && star.get(i, j) != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "pi_star has off-block entry at ({i}, {j})"
                    )));
                }
            }
        }
        let mut max_abs: f64 = 0.0;
        for i in 0..n {
            let row_sum = compensated_sum(self.coupling.row(i).iter().copied());
            if row_sum.abs() > ALGEBRAIC_TOL {
                return Err(Error::InvalidArgument(format!(
                    "coupling row {i} sums to {row_sum}"
                )));
            }
            max_abs = max_abs.max(self.coupling.row(i).iter().map(|v| v.abs()).sum());
        }
        if max_abs != 0.0 && (max_abs - 1.0).abs() > ALGEBRAIC_TOL {
            return Err(Error::InvalidArgument(format!(
                "coupling maximum absolute row sum is {max_abs}"
            )));
        }
        Ok(())
    }
}

fn labels_of(block_sizes: &[usize]) -> Vec<usize> {
    block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect()
}

/// Draws an NCD structure and returns it with its chain.
pub fn generate_ncd(
    block_sizes: &[usize],
    epsilon: f64,
    seed: u64,
) -> Result<(NcdSpec, TransitionModel)> {
    let spec = NcdSpec::random(block_sizes, epsilon, seed)?;
    let chain = spec.chain()?;
    Ok((spec, chain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary;

    #[test]
    fn zero_epsilon_returns_pi_star() {
        let (spec, chain) = generate_ncd(&[2, 3], 0.0, 7).unwrap();
        assert_eq!(chain.matrix(), &spec.pi_star);
        assert!(!chain.validate().irreducible);
    }

    #[test]
    fn off_block_mass_bounded_by_epsilon() {
        let (spec, chain) = generate_ncd(&[2, 2], 0.05, 11).unwrap();
        let labels = spec.labels();
        let mut max_off: f64 = 0.0;
        for i in 0..4 {
            let off: f64 = (0..4)
                .filter(|&k| labels[k] != labels[i])
                .map(|k| chain.get(i, k))
                .sum();
            let alloc: f64 = (0..4)
                .filter(|&k| labels[k] != labels[i])
                .map(|k| 0.05 * spec.coupling[(i, k)])
                .sum();
            assert!((off - alloc).abs() < 1e-15);
            max_off = max_off.max(off);
        }
        assert!(max_off <= 0.05);
    }

    #[test]
    fn three_blocks_are_visible() {
        let (spec, chain) = generate_ncd(&[3, 3, 3], 0.01, 3).unwrap();
        assert!(chain.validate().accepted());
        let labels = spec.labels();
        for i in 0..9 {
            let inside: f64 = (0..9)
                .filter(|&k| labels[k] == labels[i])
                .map(|k| chain.get(i, k))
                .sum();
            assert!(inside >= 1.0 - 0.01);
        }
    }

    #[test]
    fn too_large_epsilon_fails() {
        let spec = NcdSpec::random(&[2, 2], 0.0, 1).unwrap().with_epsilon(50.0);
        assert!(matches!(
            spec.chain(),
            Err(Error::NegativeEntryAfterPerturbation { .. })
        ));
    }

    #[test]
    fn limit_chain_reproduces_gamma() {
        let gamma = StationaryDistribution::new(vec![0.7, 0.3]).unwrap();
        let chain = random_chain_from_limit(&gamma, 0.0, 5).unwrap();
        let g = stationary(&chain).unwrap();
        assert!((g[0] - 0.7).abs() < 1e-8 && (g[1] - 0.3).abs() < 1e-8);
    }

    #[test]
    fn limit_chain_is_deterministic_and_doubly_stochastic_for_uniform() {
        let gamma = StationaryDistribution::uniform(5);
        let a = random_chain_from_limit(&gamma, 0.0, 9).unwrap();
        let b = random_chain_from_limit(&gamma, 0.0, 9).unwrap();
        assert_eq!(a, b);
        for j in 0..5 {
            let col: f64 = (0..5).map(|i| a.get(i, j)).sum();
            assert!((col - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_gamma_rejected() {
        let gamma = StationaryDistribution::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            random_chain_from_limit(&gamma, 0.0, 1),
            Err(Error::DegenerateGamma { index: 1 })
        ));
    }
}
