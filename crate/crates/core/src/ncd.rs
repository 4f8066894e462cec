//! Block aggregates of nearly completely decomposable chains and the
//! stationary error of their eigenvector approximation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{stationary, NcdSpec, StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::joint::{aggregate, theta_of};
use crate::numeric::{compensated_sum, linear_fit};
use crate::partition::{harden, permutation_equivalent, BinaryPartition};
use crate::schedule::{anneal, SweepConfig};

fn check_spec(model: &TransitionModel, spec: &NcdSpec) -> Result<()> {
    if spec.n() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "block structure vs chain size",
            expected: model.n(),
            found: spec.n(),
        });
    }
    Ok(())
}

/// `phi_ij = sum_{p in i} w_p sum_{q in j} pi_pq` for block-normalised
/// weights `w` (each block of `w` sums to one).
fn weighted_block_aggregate(model: &TransitionModel, spec: &NcdSpec, w: &[f64]) -> DMatrix<f64> {
    let ranges = spec.ranges();
    let b = ranges.len();
    let mut phi = DMatrix::zeros(b, b);
    for (i, ri) in ranges.iter().enumerate() {
        for (j, rj) in ranges.iter().enumerate() {
            phi[(i, j)] = compensated_sum(
                ri.clone()
                    .flat_map(|p| rj.clone().map(move |q| (p, q)))
                    .map(|(p, q)| w[p] * model.get(p, q)),
            );
        }
    }
    phi
}

/// Stationary masses renormalised within each block.
fn within_block(gamma: &[f64], spec: &NcdSpec) -> Vec<f64> {
    let mut w = gamma.to_vec();
    for r in spec.ranges() {
        let total = compensated_sum(r.clone().map(|p| gamma[p]));
        for p in r {
            w[p] = gamma[p] / total;
        }
    }
    w
}

/// Block aggregate of the chain, weighting each state by its stationary
/// mass within its block.
pub fn block_aggregate(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    spec: &NcdSpec,
) -> Result<DMatrix<f64>> {
    check_spec(model, spec)?;
    if gamma.len() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "gamma length vs chain size",
            expected: model.n(),
            found: gamma.len(),
        });
    }
    Ok(weighted_block_aggregate(
        model,
        spec,
        &within_block(gamma.as_slice(), spec),
    ))
}

/// Stationary vector of every diagonal block of `Pi*`, concatenated.
pub fn block_stationary(spec: &NcdSpec) -> Result<Vec<f64>> {
    let mut out = vec![0.0; spec.n()];
    for r in spec.ranges() {
        let sub = spec
            .pi_star
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned();
        let g = stationary(&TransitionModel::ergodic(sub)?)?;
        out[r].copy_from_slice(g.as_slice());
    }
    Ok(out)
}

/// Block aggregate with the within-block weights taken from the blocks
/// of `Pi*` instead of the stationary distribution of the chain.
pub fn approximate_aggregate(model: &TransitionModel, spec: &NcdSpec) -> Result<DMatrix<f64>> {
    check_spec(model, spec)?;
    Ok(weighted_block_aggregate(model, spec, &block_stationary(spec)?))
}

/// Block masses `gamma Psi` for the block partition.
pub fn block_masses(gamma: &[f64], spec: &NcdSpec) -> Vec<f64> {
    spec.ranges()
        .into_iter()
        .map(|r| compensated_sum(r.map(|p| gamma[p])))
        .collect()
}

/// `|| gamma(Phi_approx) - gamma(Pi) Psi ||_1` for the block partition.
/// Zero when `epsilon = 0`, where both sides are block-exact.
pub fn stationary_l1_error(spec: &NcdSpec) -> Result<f64> {
    if spec.epsilon == 0.0 {
        return Ok(0.0);
    }
    let model = spec.chain()?;
    let gamma = stationary(&model)?;
    let phi = approximate_aggregate(&model, spec)?;
    let macro_gamma = stationary(&TransitionModel::ergodic(phi)?)?;
    let masses = block_masses(gamma.as_slice(), spec);
    Ok(compensated_sum(
        macro_gamma
            .as_slice()
            .iter()
            .zip(&masses)
            .map(|(a, b)| (a - b).abs()),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct NcdAnalysisResult {
    pub epsilon: f64,
    #[serde(skip)]
    pub phi_formula: DMatrix<f64>,
    /// `Theta Psi` at the hardened solver partition, groups in block order.
    #[serde(skip)]
    pub phi_solver: DMatrix<f64>,
    pub l1_error: f64,
    /// Whether the hardened solver partition is the block partition.
    pub recovered_blocks: bool,
    pub hardened: Vec<usize>,
}

impl NcdAnalysisResult {
    /// Largest entrywise gap between the two aggregates.
    pub fn max_abs_gap(&self) -> f64 {
        if self.phi_formula.shape() != self.phi_solver.shape() {
            return f64::INFINITY;
        }
        (&self.phi_formula - &self.phi_solver).amax()
    }
}

/// Anneals the chain of `spec` to one group per block at `beta`, hardens,
/// and compares the resulting aggregate with the block formula.
pub fn analyze(spec: &NcdSpec, beta: f64, cfg: &SweepConfig) -> Result<NcdAnalysisResult> {
    let model = spec.chain()?;
    let gamma = stationary(&model)?;
    let b = spec.blocks();
    let report = anneal(&model, &gamma, b, beta, cfg)?;
    let hard = harden(&report.final_partition);
    let blocks = BinaryPartition::from_labels(&spec.labels())?;
    let recovered = permutation_equivalent(&hard, &blocks);
    let phi_formula = block_aggregate(&model, &gamma, spec)?;
    let phi_solver = if hard.m() == b {
        // first-appearance labels follow block order when the blocks are recovered
        let ordered = BinaryPartition::from_labels(hard.assignment())?.to_probabilistic();
        let theta = theta_of(&model, &gamma, &ordered)?;
        aggregate(&theta, &ordered)?.matrix().clone()
    } else {
        DMatrix::zeros(hard.m(), hard.m())
    };
    Ok(NcdAnalysisResult {
        epsilon: spec.epsilon,
        phi_formula,
        phi_solver,
        l1_error: stationary_l1_error(spec)?,
        recovered_blocks: recovered,
        hardened: hard.assignment().to_vec(),
    })
}

/// One row of `ncd_scaling.csv`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingPoint {
    pub epsilon: f64,
    pub seed: u64,
    pub l1_error: f64,
}

/// Contents of `ncd_fit.json`: least-squares line of `ln error` on
/// `ln epsilon` over all points with nonzero error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub block_sizes: Vec<usize>,
    pub points: Vec<ScalingPoint>,
    pub fit: ScalingFit,
}

/// For every seed draws one `(Pi*, C)` pair and evaluates the error at each
/// `epsilon`, so the points of one seed differ only in the coupling size.
pub fn stationary_error_experiment(
    block_sizes: &[usize],
    epsilons: &[f64],
    seeds: &[u64],
) -> Result<ScalingReport> {
    if epsilons.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be non-negative".into()));
    }
    let mut points = Vec::with_capacity(epsilons.len() * seeds.len());
    for &seed in seeds {
        let base = NcdSpec::random(block_sizes, 0.0, seed)?;
        for &eps in epsilons {
            let l1_error = stationary_l1_error(&base.with_epsilon(eps))?;
            points.push(ScalingPoint {
                epsilon: eps,
                seed,
                l1_error,
            });
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.l1_error > 0.0 && p.epsilon > 0.0)
        .map(|p| (p.epsilon.ln(), p.l1_error.ln()))
        .unzip();
    if xs.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two points with nonzero error to fit".into(),
        ));
    }
    let (slope, intercept, r2) = linear_fit(&xs, &ys);
    Ok(ScalingReport {
        block_sizes: block_sizes.to_vec(),
        points,
        fit: ScalingFit {
            slope,
            intercept,
            r2,
        },
    })
}

/// `error(epsilon) / error(epsilon / 2)` on one fixed `(Pi*, C)`.
pub fn halving_ratio(spec: &NcdSpec, epsilon: f64) -> Result<f64> {
    let full = stationary_l1_error(&spec.with_epsilon(epsilon))?;
    let half = stationary_l1_error(&spec.with_epsilon(epsilon / 2.0))?;
    Ok(full / half)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::generate_ncd;

    #[test]
    fn zero_coupling_gives_identity_and_no_error() {
        let spec = NcdSpec::random(&[2, 3], 0.0, 3).unwrap();
        let star = spec.chain().unwrap();
        let v = block_stationary(&spec).unwrap();
        let phi = weighted_block_aggregate(&star, &spec, &v);
        assert!((phi - DMatrix::identity(2, 2)).amax() < 1e-15);
        assert_eq!(stationary_l1_error(&spec).unwrap(), 0.0);
    }

    #[test]
    fn single_block_is_one() {
        let (spec, chain) = generate_ncd(&[4], 0.1, 1).unwrap();
        let g = stationary(&chain).unwrap();
        let phi = block_aggregate(&chain, &g, &spec).unwrap();
        assert_eq!(phi.shape(), (1, 1));
        assert!((phi[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn formula_matches_pipeline_at_block_partition() {
        let (spec, chain) = generate_ncd(&[3, 2, 4], 0.05, 9).unwrap();
        let g = stationary(&chain).unwrap();
        let blocks = BinaryPartition::from_labels(&spec.labels())
            .unwrap()
            .to_probabilistic();
        let theta = theta_of(&chain, &g, &blocks).unwrap();
        let phi = aggregate(&theta, &blocks).unwrap();
        let formula = block_aggregate(&chain, &g, &spec).unwrap();
        assert!((phi.matrix() - &formula).amax() < 1e-14);
        for i in 0..3 {
            assert!((formula.row(i).sum() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn block_stationary_is_invariant() {
        let spec = NcdSpec::random(&[3, 3], 0.1, 2).unwrap();
        let v = block_stationary(&spec).unwrap();
        for r in spec.ranges() {
            assert!((v[r.clone()].iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for k in r.clone() {
                let flow: f64 = r.clone().map(|p| v[p] * spec.pi_star[(p, k)]).sum();
                assert!((flow - v[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn error_shrinks_with_coupling() {
        let spec = NcdSpec::random(&[3, 3, 2], 0.1, 5).unwrap();
        let big = stationary_l1_error(&spec).unwrap();
        let small = stationary_l1_error(&spec.with_epsilon(0.01)).unwrap();
        assert!(big > 0.0 && small > 0.0 && small < big);
    }
}
