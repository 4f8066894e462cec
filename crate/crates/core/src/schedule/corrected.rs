use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::partition::harden;
use crate::solver::SolveReport;

/// How the corrected value is turned into the multiplier the solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CorrectedScale {
    /// The corrected value is a temperature; the solver uses its reciprocal.
    #[default]
    #[serde(rename = "temperature")]
    Temperature,
    /// The corrected value is used as the multiplier directly.
    #[serde(rename = "multiplier")]
    Multiplier,
}

/// Base of the information exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InformationUnit {
    /// `2^I` with `I` in bits.
    #[default]
    #[serde(rename = "bits")]
    Bits,
    /// `2^I` with `I` in nats.
    #[serde(rename = "nats")]
    Nats,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedConfig {
    pub scale: CorrectedScale,
    pub unit: InformationUnit,
    pub max_rounds: usize,
    /// Stop when `|Δβ| / β` falls below this.
    pub rel_tol: f64,
}

impl Default for CorrectedConfig {
    fn default() -> Self {
        Self {
            scale: CorrectedScale::Temperature,
            unit: InformationUnit::Bits,
            max_rounds: 100,
            rel_tol: 1e-6,
        }
    }
}

impl CorrectedConfig {
    /// Multiplier applied by the solver for a corrected value.
    pub fn multiplier(&self, corrected: f64) -> f64 {
        match self.scale {
            CorrectedScale::Temperature => 1.0 / corrected,
            CorrectedScale::Multiplier => corrected,
        }
    }
}

/// `2^I / (2n)` for a mutual information given in nats.
pub fn corrected_beta_with(mi_nats: f64, n: usize, unit: InformationUnit) -> f64 {
    let exponent = match unit {
        InformationUnit::Bits => mi_nats / std::f64::consts::LN_2,
        InformationUnit::Nats => mi_nats,
    };
    exponent.exp2() / (2.0 * n as f64)
}

/// `2^I / (2n)` with `I` the final mutual information of `report` in bits.
pub fn corrected_beta(report: &SolveReport, n: usize) -> f64 {
    corrected_beta_with(report.final_energy().mutual_information, n, InformationUnit::Bits)
}

/// Second-order corrected information
/// `I_bits + sum_j sum_i gamma_i psi_ij^2 / (2n ln2 alpha_j)`.
pub fn corrected_information(report: &SolveReport) -> f64 {
    let psi = report.final_partition.matrix();
    let n = psi.nrows();
    let mut acc = CompensatedSum::new();
    acc.add(report.final_energy().mutual_information_bits());
    for j in 0..psi.ncols() {
        let a = report.final_alpha[j];
        for i in 0..n {
            let p = psi[(i, j)];
            acc.add(report.gamma[i] * p * p / (2.0 * n as f64 * std::f64::consts::LN_2 * a));
        }
    }
    acc.value()
}

/// Lower bound on the slope rescaling, `ln2/β - ln2 2^I / (2βn)`.
pub fn slope_rescaling_bound(beta: f64, mi_bits: f64, n: usize) -> f64 {
    let ln2 = std::f64::consts::LN_2;
    ln2 / beta - ln2 * mi_bits.exp2() / (2.0 * beta * n as f64)
}

/// Self-consistent corrected value.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectedBeta {
    /// Value of `2^I / (2n)` at the fixed point.
    pub value: f64,
    /// Multiplier the solver applied.
    pub multiplier: f64,
    pub scale: CorrectedScale,
    pub unit: InformationUnit,
    pub mutual_information_bits: f64,
    /// Columns of the solution at the fixed point.
    pub m: usize,
    /// Groups after hardening.
    pub hardened_m: usize,
    pub rounds: usize,
    pub corrected_information: f64,
    pub slope_bound: f64,
    #[serde(skip)]
    pub report: Option<SolveReport>,
}

/// Fixed point of `x = 2^{I(x)} / (2n)`, where `I(x)` is the information of
/// the solution at the multiplier belonging to `x`.
///
/// The map `x - 2^{I(x)}/(2n)` is increasing (a larger temperature never
/// carries more information), so the root is unique in `[1/(2n), 1/2]`.
/// Plain iteration is used while it stays inside the current bracket and
/// bisection otherwise.
pub(crate) fn fixed_point<F>(n: usize, cfg: &CorrectedConfig, mut solve_at: F) -> Result<CorrectedBeta>
where
    F: FnMut(f64) -> Result<SolveReport>,
{
    let two_n = 2.0 * n as f64;
    let (mut lo, mut hi): (f64, f64) = (1.0 / two_n, 0.5);
    let mut x = lo;
    for round in 1..=cfg.max_rounds {
        let report = solve_at(cfg.multiplier(x))?;
        let fx = corrected_beta_with(report.final_energy().mutual_information, n, cfg.unit);
        if fx > x {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        if (fx - x).abs() <= cfg.rel_tol * x {
            return Ok(finish(x, round, n, cfg, report));
        }
        x = if fx > lo && fx < hi { fx } else { 0.5 * (lo + hi) };
        if (hi - lo) <= cfg.rel_tol * lo {
            let report = solve_at(cfg.multiplier(x))?;
            return Ok(finish(x, round, n, cfg, report));
        }
    }
    Err(Error::FixedPointDivergence { lo, hi })
}

fn finish(x: f64, rounds: usize, n: usize, cfg: &CorrectedConfig, report: SolveReport) -> CorrectedBeta {
    let bits = report.final_energy().mutual_information_bits();
    let value = x;
    CorrectedBeta {
        value,
        multiplier: cfg.multiplier(value),
        scale: cfg.scale,
        unit: cfg.unit,
        mutual_information_bits: bits,
        m: report.m(),
        hardened_m: harden(&report.final_partition).m(),
        rounds,
        corrected_information: corrected_information(&report),
        slope_bound: slope_rescaling_bound(value, bits, n),
        report: Some(report),
    }
}
