//! Scalar functionals: KL divergence between rows, expected distortion,
//! mutual information, entropies and the free energy.
//!
//! Logarithms are natural; [`EnergyBreakdown::mutual_information_bits`]
//! converts at the reporting boundary.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::joint::WeightMatrix;
use crate::numeric::{xlogx_over_y, CompensatedSum};
use crate::partition::{BinaryPartition, ClusterMarginals, ProbabilisticPartition};

/// `sum_k p_k ln(p_k / q_k)` with `0 ln 0 = 0`.
pub fn kl_row(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            what: "kl_row operands",
            expected: p.len(),
            found: q.len(),
        });
    }
    let mut acc = CompensatedSum::new();
    for (k, (&pk, &qk)) in p.iter().zip(q).enumerate() {
        if pk > 0.0 && qk <= 0.0 {
            return Err(Error::AbsoluteContinuityViolation {
                index: k,
                row: None,
                group: None,
            });
        }
        acc.add(xlogx_over_y(pk, qk));
    }
    Ok(acc.value().max(0.0))
}

/// `ln pi_ik`, with `-inf` for zero entries. Cached by the solver so each
/// divergence evaluation needs only `m * n` logarithms.
pub fn log_matrix(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
}

/// `g_ij = KL(pi_i || theta_j)` for every state and group; `+inf` marks an
/// absolute-continuity failure.
pub fn divergence_matrix(model: &TransitionModel, theta: &WeightMatrix) -> DMatrix<f64> {
    divergences_with_logs(model.matrix(), &log_matrix(model.matrix()), theta.matrix())
}

pub(crate) fn divergences_with_logs(
    pi: &DMatrix<f64>,
    log_pi: &DMatrix<f64>,
    theta: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (n, m) = (pi.nrows(), theta.nrows());
    let log_theta = log_matrix(theta);
    let mut g = DMatrix::zeros(n, m);
    for j in 0..m {
        for i in 0..n {
            let mut acc = CompensatedSum::new();
            let mut infinite = false;
            for k in 0..n {
                let p = pi[(i, k)];
                if p > 0.0 {
                    let lt = log_theta[(j, k)];
                    if lt == f64::NEG_INFINITY {
                        infinite = true;
                        break;
                    }
                    acc.add(p * (log_pi[(i, k)] - lt));
                }
            }
            g[(i, j)] = if infinite {
                f64::INFINITY
            } else {
                acc.value().max(0.0)
            };
        }
    }
    g
}

fn check_dims(
    model: &TransitionModel,
    theta: &WeightMatrix,
    part: &ProbabilisticPartition,
    gamma: &StationaryDistribution,
) -> Result<()> {
    let n = model.n();
    for (what, found) in [
        ("weight matrix columns", theta.n()),
        ("partition rows", part.n()),
        ("gamma length", gamma.len()),
    ] {
        if found != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found,
            });
        }
    }
    if theta.m() != part.m() {
        return Err(Error::DimensionMismatch {
            what: "weight matrix rows vs partition columns",
            expected: part.m(),
            found: theta.m(),
        });
    }
    Ok(())
}

pub(crate) fn distortion_from_g(
    g: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    gamma: &[f64],
) -> Result<f64> {
    let mut acc = CompensatedSum::new();
    for i in 0..psi.nrows() {
        for j in 0..psi.ncols() {
            let w = gamma[i] * psi[(i, j)];
            if w > 0.0 {
                if !g[(i, j)].is_finite() {
                    return Err(Error::AbsoluteContinuityViolation {
                        index: i,
                        row: Some(i),
                        group: Some(j),
                    });
                }
                acc.add(w * g[(i, j)]);
            }
        }
    }
    Ok(acc.value())
}

/// `sum_i sum_j gamma_i psi_ij KL(pi_i || theta_j)`; terms with
/// `psi_ij = 0` are skipped.
pub fn expected_distortion(
    model: &TransitionModel,
    theta: &WeightMatrix,
    part: &ProbabilisticPartition,
    gamma: &StationaryDistribution,
) -> Result<f64> {
    check_dims(model, theta, part, gamma)?;
    distortion_from_g(
        &divergence_matrix(model, theta),
        part.matrix(),
        gamma.as_slice(),
    )
}

/// `sum_i gamma_i KL(pi_i || theta_{psi(i)})` for a hard assignment.
pub fn total_distortion_binary(
    model: &TransitionModel,
    theta: &WeightMatrix,
    part: &BinaryPartition,
    gamma: &StationaryDistribution,
) -> Result<f64> {
    if part.n() != model.n() || gamma.len() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "binary partition size",
            expected: model.n(),
            found: part.n(),
        });
    }
    let mut acc = CompensatedSum::new();
    for i in 0..model.n() {
        let j = part.group_of(i);
        let g = kl_row(&model.row(i), &theta.row(j)).map_err(|_| {
            Error::AbsoluteContinuityViolation {
                index: i,
                row: Some(i),
                group: Some(j),
            }
        })?;
        acc.add(gamma[i] * g);
    }
    Ok(acc.value())
}

/// `sum_i sum_j gamma_i psi_ij ln(psi_ij / alpha_j)`.
pub fn mutual_information(
    part: &ProbabilisticPartition,
    gamma: &StationaryDistribution,
    alpha: &ClusterMarginals,
) -> f64 {
    mi_raw(part.matrix(), gamma.as_slice(), alpha.as_slice())
}

pub(crate) fn mi_raw(psi: &DMatrix<f64>, gamma: &[f64], alpha: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..psi.nrows() {
        for j in 0..psi.ncols() {
            acc.add(gamma[i] * xlogx_over_y(psi[(i, j)], alpha[j]));
        }
    }
    acc.value()
}

/// Unweighted `-sum_i sum_j psi_ij ln psi_ij`.
pub fn partition_entropy(part: &ProbabilisticPartition) -> f64 {
    let mut acc = CompensatedSum::new();
    for &v in part.matrix().iter() {
        acc.add(-xlogx_over_y(v, 1.0));
    }
    acc.value()
}

/// `-sum_i gamma_i sum_j psi_ij ln psi_ij`, the entropy of the group given
/// the state.
pub fn conditional_entropy(part: &ProbabilisticPartition, gamma: &StationaryDistribution) -> f64 {
    cond_entropy_raw(part.matrix(), gamma.as_slice())
}

pub(crate) fn cond_entropy_raw(psi: &DMatrix<f64>, gamma: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for i in 0..psi.nrows() {
        for j in 0..psi.ncols() {
            acc.add(-gamma[i] * xlogx_over_y(psi[(i, j)], 1.0));
        }
    }
    acc.value()
}

/// `-sum_i sum_j cur_ij ln prev_ij`. Returns `+inf` when `cur_ij > 0` and
/// `prev_ij = 0`.
pub fn partition_cross_entropy(
    prev: &ProbabilisticPartition,
    cur: &ProbabilisticPartition,
) -> Result<f64> {
    if prev.n() != cur.n() || prev.m() != cur.m() {
        return Err(Error::DimensionMismatch {
            what: "cross-entropy operands",
            expected: prev.n() * prev.m(),
            found: cur.n() * cur.m(),
        });
    }
    Ok(cross_entropy_raw(prev.matrix(), cur.matrix()))
}

pub(crate) fn cross_entropy_raw(prev: &DMatrix<f64>, cur: &DMatrix<f64>) -> f64 {
    let mut acc = CompensatedSum::new();
    for (&p, &c) in prev.iter().zip(cur.iter()) {
        if c > 0.0 {
            if p <= 0.0 {
                return f64::INFINITY;
            }
            acc.add(-c * p.ln());
        }
    }
    acc.value()
}

/// Energy terms at one point. `free_energy` is the objective the solver
/// minimises: `D + I / beta` for the mutual-information variant and
/// `D - H / beta` for the entropy variant, with `H` the conditional entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub beta: f64,
    pub expected_distortion: f64,
    /// Nats.
    pub mutual_information: f64,
    pub conditional_entropy: f64,
    pub free_energy: f64,
    /// `D - (1/beta) sum_j alpha_j sum_i psi_ij ln(psi_ij / gamma_i)`,
    /// the alternative sign and form, kept for audit.
    pub printed_sign_free_energy: f64,
}

impl EnergyBreakdown {
    pub fn mutual_information_bits(&self) -> f64 {
        self.mutual_information / std::f64::consts::LN_2
    }
}

pub(crate) fn printed_information(psi: &DMatrix<f64>, gamma: &[f64], alpha: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    for j in 0..psi.ncols() {
        let mut inner = CompensatedSum::new();
        for i in 0..psi.nrows() {
            inner.add(xlogx_over_y(psi[(i, j)], gamma[i]));
        }
        acc.add(alpha[j] * inner.value());
    }
    acc.value()
}

/// Free energy `D + I / beta` and its components.
pub fn free_energy(
    model: &TransitionModel,
    theta: &WeightMatrix,
    part: &ProbabilisticPartition,
    gamma: &StationaryDistribution,
    alpha: &ClusterMarginals,
    beta: f64,
) -> Result<EnergyBreakdown> {
    check_dims(model, theta, part, gamma)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} must be positive")));
    }
    let g = divergence_matrix(model, theta);
    breakdown(&g, part.matrix(), gamma.as_slice(), alpha.as_slice(), beta, false)
}

/// Entropy-variant objective `D - H / beta`.
pub fn entropy_free_energy(
    model: &TransitionModel,
    theta: &WeightMatrix,
    part: &ProbabilisticPartition,
    gamma: &StationaryDistribution,
    alpha: &ClusterMarginals,
    beta: f64,
) -> Result<EnergyBreakdown> {
    check_dims(model, theta, part, gamma)?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("beta {beta} must be positive")));
    }
    let g = divergence_matrix(model, theta);
    breakdown(&g, part.matrix(), gamma.as_slice(), alpha.as_slice(), beta, true)
}

pub(crate) fn breakdown(
    g: &DMatrix<f64>,
    psi: &DMatrix<f64>,
    gamma: &[f64],
    alpha: &[f64],
    beta: f64,
    entropy_variant: bool,
) -> Result<EnergyBreakdown> {
    let d = distortion_from_g(g, psi, gamma)?;
    let mi = mi_raw(psi, gamma, alpha);
    let h = cond_entropy_raw(psi, gamma);
    let free_energy = if entropy_variant {
        d - h / beta
    } else {
        d + mi / beta
    };
    Ok(EnergyBreakdown {
        beta,
        expected_distortion: d,
        mutual_information: mi,
        conditional_entropy: h,
        free_energy,
        printed_sign_free_energy: d - printed_information(psi, gamma, alpha) / beta,
    })
}

/// Free energy with the partition minimised out at fixed `(alpha, Theta)`:
/// `-(1/beta) sum_i gamma_i ln sum_j alpha_j exp(-beta g_ij)`.
///
/// `theta` rows need not be normalised, which allows probing perturbed
/// weight matrices.
pub fn collapsed_free_energy(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    alpha: &[f64],
    theta: &DMatrix<f64>,
    beta: f64,
) -> f64 {
    let g = divergences_with_logs(model.matrix(), &log_matrix(model.matrix()), theta);
    let mut acc = CompensatedSum::new();
    for i in 0..model.n() {
        let logits: Vec<f64> = (0..theta.nrows())
            .map(|j| alpha[j].ln() - beta * g[(i, j)])
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        acc.add(-gamma[i] * lse / beta);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::stationary;
    use crate::joint::theta_of;

    #[test]
    fn kl_closed_forms() {
        assert_eq!(kl_row(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert!((kl_row(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(
            kl_row(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::AbsoluteContinuityViolation { index: 1, .. })
        ));
    }

    #[test]
    fn kl_asymmetric_pair() {
        // 0.3 ln(3/7) + 0.7 ln(7/3) = 0.4 ln(7/3)
        let v = kl_row(&[0.3, 0.7], &[0.7, 0.3]).unwrap();
        assert!((v - 0.4 * (7.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn entropy_closed_forms() {
        assert_eq!(partition_entropy(&ProbabilisticPartition::identity(3)), 0.0);
        let u = ProbabilisticPartition::uniform(5, 3);
        assert!((partition_entropy(&u) - 5.0 * 3f64.ln()).abs() < 1e-13);
        assert_eq!(
            partition_cross_entropy(&ProbabilisticPartition::identity(3), &ProbabilisticPartition::identity(3))
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn cross_entropy_sentinel() {
        let prev = ProbabilisticPartition::identity(2);
        let cur = ProbabilisticPartition::uniform(2, 2);
        assert_eq!(partition_cross_entropy(&prev, &cur).unwrap(), f64::INFINITY);
    }

    #[test]
    fn binary_mi_is_label_entropy() {
        let g = StationaryDistribution::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let b = BinaryPartition::new(vec![0, 1, 1, 0], 2).unwrap().to_probabilistic();
        let a = ClusterMarginals::from_partition(&g, &b).unwrap();
        let h = -(a[0] * a[0].ln() + a[1] * a[1].ln());
        assert!((mutual_information(&b, &g, &a) - h).abs() < 1e-15);
    }

    #[test]
    fn identity_has_zero_distortion() {
        let p = TransitionModel::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let g = stationary(&p).unwrap();
        let id = ProbabilisticPartition::identity(2);
        let theta = theta_of(&p, &g, &id).unwrap();
        assert!(expected_distortion(&p, &theta, &id, &g).unwrap().abs() < 1e-15);
    }

    #[test]
    fn free_energy_limits() {
        let p = TransitionModel::from_rows(&[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let g = stationary(&p).unwrap();
        let psi = ProbabilisticPartition::random(2, 2, 3);
        let a = ClusterMarginals::from_partition(&g, &psi).unwrap();
        let theta = theta_of(&p, &g, &psi).unwrap();
        let e = free_energy(&p, &theta, &psi, &g, &a, 1e9).unwrap();
        assert!((e.free_energy - e.expected_distortion).abs() <= 1e-6 * e.expected_distortion);
        assert!(
            (e.free_energy - (e.expected_distortion + e.mutual_information / 1e9)).abs() < 1e-12
        );
    }

    #[test]
    fn collapsed_energy_equals_gibbs_free_energy() {
        let p = TransitionModel::from_rows(&[
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.6, 0.3],
            vec![0.4, 0.4, 0.2],
        ])
        .unwrap();
        let gam = stationary(&p).unwrap();
        let psi0 = ProbabilisticPartition::random(3, 2, 8);
        let a = ClusterMarginals::from_partition(&gam, &psi0).unwrap();
        let theta = theta_of(&p, &gam, &psi0).unwrap();
        let beta = 2.5;
        let g = divergence_matrix(&p, &theta);
        let mut psi = DMatrix::zeros(3, 2);
        for i in 0..3 {
            let z: f64 = (0..2).map(|j| a[j] * (-beta * g[(i, j)]).exp()).sum();
            for j in 0..2 {
                psi[(i, j)] = a[j] * (-beta * g[(i, j)]).exp() / z;
            }
        }
        // F at the Gibbs partition with the prior alpha held fixed
        let d = distortion_from_g(&g, &psi, gam.as_slice()).unwrap();
        let i_term = mi_raw(&psi, gam.as_slice(), a.as_slice());
        let l = collapsed_free_energy(&p, &gam, a.as_slice(), theta.matrix(), beta);
        assert!((d + i_term / beta - l).abs() < 1e-13);
    }
}
