//! Joint model between an original chain and its reduction: lifting
//! matrix `U`, weight matrix `Theta = U^T Pi` and aggregate `Phi = Theta Psi`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::partition::ProbabilisticPartition;

/// Normalisers below this are treated as an empty group.
pub const EMPTY_GROUP_MASS: f64 = 1e-300;

/// Column-stochastic `n x m` matrix `u_ij = gamma_i psi_ij / alpha_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingMatrix {
    u: DMatrix<f64>,
}

impl LiftingMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }
}

/// Row-stochastic `m x n` matrix whose row `j` is the group-conditional
/// next-state distribution over original states.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    theta: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn from_matrix(theta: DMatrix<f64>) -> Self {
        Self { theta }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.theta
    }

    pub fn m(&self) -> usize {
        self.theta.nrows()
    }

    pub fn n(&self) -> usize {
        self.theta.ncols()
    }

    pub fn row(&self, j: usize) -> Vec<f64> {
        self.theta.row(j).iter().copied().collect()
    }
}

/// Fingerprints of the inputs an aggregate was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Provenance {
    pub chain: Option<String>,
    pub partition: String,
    pub beta: Option<f64>,
}

/// Reduced `m x m` chain `Phi = Theta Psi`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedModel {
    phi: DMatrix<f64>,
    pub provenance: Provenance,
}

impl AggregatedModel {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn m(&self) -> usize {
        self.phi.nrows()
    }

    pub fn with_chain(mut self, model: &TransitionModel) -> Self {
        self.provenance.chain = Some(fingerprint(model.matrix()));
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.provenance.beta = Some(beta);
        self
    }
}

/// 64-bit FNV-1a digest of the shape and entry bit patterns, in hex.
pub fn fingerprint(m: &DMatrix<f64>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&(m.nrows() as u64).to_le_bytes());
    eat(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            eat(&m[(i, j)].to_bits().to_le_bytes());
        }
    }
    format!("{h:016x}")
}

pub fn lifting(
    gamma: &StationaryDistribution,
    part: &ProbabilisticPartition,
) -> Result<LiftingMatrix> {
    let (n, m) = (part.n(), part.m());
    if gamma.len() != n {
        return Err(Error::DimensionMismatch {
            what: "gamma length vs partition rows",
            expected: n,
            found: gamma.len(),
        });
    }
    let g = gamma.as_slice();
    let mut u = DMatrix::zeros(n, m);
    for j in 0..m {
        let alpha = compensated_sum((0..n).map(|i| g[i] * part.get(i, j)));
        if alpha < EMPTY_GROUP_MASS {
            return Err(Error::EmptyGroup { group: j });
        }
        for i in 0..n {
            u[(i, j)] = g[i] * part.get(i, j) / alpha;
        }
    }
    Ok(LiftingMatrix { u })
}

pub fn weight_matrix(model: &TransitionModel, lift: &LiftingMatrix) -> Result<WeightMatrix> {
    if lift.u.nrows() != model.n() {
        return Err(Error::DimensionMismatch {
            what: "lifting rows vs chain size",
            expected: model.n(),
            found: lift.u.nrows(),
        });
    }
    Ok(WeightMatrix {
        theta: lift.u.transpose() * model.matrix(),
    })
}

pub fn aggregate(theta: &WeightMatrix, part: &ProbabilisticPartition) -> Result<AggregatedModel> {
    if theta.n() != part.n() {
        return Err(Error::DimensionMismatch {
            what: "weight matrix columns vs partition rows",
            expected: part.n(),
            found: theta.n(),
        });
    }
    Ok(AggregatedModel {
        phi: theta.matrix() * part.matrix(),
        provenance: Provenance {
            chain: None,
            partition: fingerprint(part.matrix()),
            beta: None,
        },
    })
}

/// `Theta` straight from `(Pi, gamma, Psi)`.
pub fn theta_of(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    part: &ProbabilisticPartition,
) -> Result<WeightMatrix> {
    weight_matrix(model, &lifting(gamma, part)?)
}
