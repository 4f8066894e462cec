//! Annealing over `beta`: local stability of a solution, detection of the
//! critical values where a group splits, the column-split bootstrap, the
//! corrected `beta` and the full sweep.

mod corrected;
mod sweep;

pub use corrected::{
    corrected_beta, corrected_beta_with, corrected_information, slope_rescaling_bound,
    CorrectedBeta, CorrectedConfig, CorrectedScale, InformationUnit,
};
pub use sweep::{anneal, sweep, CriticalRecord, SWEEP_STALL_TOL, Plateau, SweepConfig, SweepEntry, SweepReport};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chain::{StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::numeric::min_zero_sum_eigenpair;
use crate::partition::{harden_with_map, ProbabilisticPartition};
use crate::solver::{SolveReport, Solver, SolverConfig};

/// Weight-matrix entries in `(0, SINGULAR_THETA)` cannot be inverted safely.
pub const SINGULAR_THETA: f64 = 1e-300;

/// Second-variation matrix of one group, restricted to the support of its
/// weight row.
#[derive(Debug, Clone)]
pub struct StabilityMatrix {
    pub group: usize,
    /// Original-state indices `k` with `theta_jk > 0`.
    pub support: Vec<usize>,
    /// `alpha_j`.
    pub alpha: f64,
    /// `(1/alpha_j) sum_i gamma_i psi_ij [diag(pi_i / theta_j^2) - beta (pi_i/theta_j)(pi_i/theta_j)^T]`
    /// on the support.
    pub matrix: DMatrix<f64>,
}

impl StabilityMatrix {
    /// The matrix without the `1/alpha_j` factor; its quadratic form is the
    /// curvature of the collapsed free energy along a split of group `j`.
    pub fn unnormalised(&self) -> DMatrix<f64> {
        &self.matrix * self.alpha
    }

    /// Smallest eigenvalue on the zero-sum subspace and its eigenvector
    /// embedded in `R^n`; `+inf` when the support has fewer than two states.
    pub fn min_eigenpair(&self, n: usize) -> (f64, Vec<f64>) {
        match min_zero_sum_eigenpair(&self.matrix) {
            None => (f64::INFINITY, vec![0.0; n]),
            Some((val, vec)) => {
                let mut full = vec![0.0; n];
                for (s, &k) in self.support.iter().enumerate() {
                    full[k] = vec[s];
                }
                (val, full)
            }
        }
    }

    /// `q^T M q` for a direction given in original-state coordinates.
    pub fn quadratic_form(&self, q: &[f64]) -> f64 {
        let v: Vec<f64> = self.support.iter().map(|&k| q[k]).collect();
        let mut acc = 0.0;
        for a in 0..v.len() {
            for b in 0..v.len() {
                acc += v[a] * self.matrix[(a, b)] * v[b];
            }
        }
        acc
    }
}

/// Stability matrix of group `j` from explicit `(Psi, alpha, Theta)`.
pub fn stability_matrix_parts(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    psi: &DMatrix<f64>,
    alpha: &[f64],
    theta: &DMatrix<f64>,
    group: usize,
    beta: f64,
) -> Result<StabilityMatrix> {
    let n = model.n();
    let j = group;
    let mut support = Vec::new();
    for k in 0..n {
        let t = theta[(j, k)];
        if t > 0.0 {
            if t < SINGULAR_THETA {
                return Err(Error::SingularTheta {
                    group: j,
                    column: k,
                });
            }
            support.push(k);
        }
    }
    let s = support.len();
    let pi = model.matrix();
    let mut diag = vec![0.0; s];
    let mut outer = DMatrix::zeros(s, s);
    let mut ratio = vec![0.0; s];
    for i in 0..n {
        let w = gamma[i] * psi[(i, j)];
        if w == 0.0 {
            continue;
        }
        for (a, &k) in support.iter().enumerate() {
            ratio[a] = pi[(i, k)] / theta[(j, k)];
            diag[a] += w * ratio[a] / theta[(j, k)];
        }
        for a in 0..s {
            if ratio[a] == 0.0 {
                continue;
            }
            for b in 0..s {
                outer[(a, b)] += w * ratio[a] * ratio[b];
            }
        }
    }
    let a_j = alpha[j];
    let mut matrix = outer * (-beta / a_j);
    for a in 0..s {
        matrix[(a, a)] += diag[a] / a_j;
    }
    Ok(StabilityMatrix {
        group: j,
        support,
        alpha: a_j,
        matrix,
    })
}

pub fn stability_matrix(
    model: &TransitionModel,
    report: &SolveReport,
    group: usize,
    beta: f64,
) -> Result<StabilityMatrix> {
    stability_matrix_parts(
        model,
        &report.gamma,
        report.final_partition.matrix(),
        report.final_alpha.as_slice(),
        report.final_theta.matrix(),
        group,
        beta,
    )
}

/// Minimum over groups of the smallest zero-sum eigenvalue.
#[derive(Debug, Clone, Serialize)]
pub struct Stability {
    pub min_eigenvalue: f64,
    pub group: usize,
    pub per_group: Vec<f64>,
    /// Unstable direction in original-state coordinates.
    pub direction: Vec<f64>,
}

pub fn stability_min_eig(model: &TransitionModel, report: &SolveReport, beta: f64) -> Result<Stability> {
    let mut best = Stability {
        min_eigenvalue: f64::INFINITY,
        group: 0,
        per_group: Vec::with_capacity(report.m()),
        direction: vec![0.0; model.n()],
    };
    for j in 0..report.m() {
        let sm = stability_matrix(model, report, j, beta)?;
        let (val, vec) = sm.min_eigenpair(model.n());
        best.per_group.push(val);
        if val < best.min_eigenvalue {
            best.min_eigenvalue = val;
            best.group = j;
            best.direction = vec;
        }
    }
    Ok(best)
}

/// Located bifurcation of the current branch.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalBetaResult {
    /// Smallest probed `beta` with a non-positive eigenvalue.
    pub beta_c: f64,
    /// Largest probed `beta` with a positive eigenvalue.
    pub beta_below: f64,
    pub group_index: usize,
    /// `(beta, min eigenvalue)` at every probe, in probe order.
    pub samples: Vec<(f64, f64)>,
    #[serde(skip)]
    pub report_below: Option<SolveReport>,
    #[serde(skip)]
    pub report_at: Option<SolveReport>,
}

/// Search controls for [`find_critical_beta`].
#[derive(Debug, Clone, Copy)]
pub struct CriticalSearch {
    /// Geometric step of the initial scan.
    pub scan_factor: f64,
    /// Relative bracket width at which bisection stops.
    pub rel_tol: f64,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            scan_factor: 1.25,
            rel_tol: 1e-8,
        }
    }
}

/// Finds the first `beta` in `(lo, hi]` at which the branch through
/// `current` (solved at `lo`) loses stability. Every probe re-solves,
/// warm-started from the last stable solution. If `current` is already
/// unstable, `lo` itself is returned.
pub fn find_critical_beta(
    solver: &Solver<'_>,
    current: &SolveReport,
    bracket: (f64, f64),
    config: &SolverConfig,
    search: CriticalSearch,
) -> Result<CriticalBetaResult> {
    let (lo0, hi0) = bracket;
    if !(lo0 > 0.0) || !(hi0 > lo0) {
        return Err(Error::InvalidArgument(format!(
            "bracket [{lo0}, {hi0}] is not increasing and positive"
        )));
    }
    let model = solver.model();
    let st0 = stability_min_eig(model, current, lo0)?;
    let mut samples = vec![(lo0, st0.min_eigenvalue)];
    if st0.min_eigenvalue <= 0.0 {
        return Ok(CriticalBetaResult {
            beta_c: lo0,
            beta_below: lo0,
            group_index: st0.group,
            samples,
            report_below: Some(current.clone()),
            report_at: Some(current.clone()),
        });
    }
    let solve_at = |beta: f64, from: &SolveReport| -> Result<(SolveReport, Stability)> {
        let cfg = SolverConfig { beta, ..*config };
        let r = solver.solve(&from.final_partition, &cfg)?;
        let s = stability_min_eig(model, &r, beta)?;
        Ok((r, s))
    };
    let mut lo = lo0;
    let mut lo_report = current.clone();
    let mut hi_probe: Option<(f64, SolveReport, Stability)> = None;
    while lo < hi0 {
        let beta = (lo * search.scan_factor).min(hi0);
        let (r, s) = solve_at(beta, &lo_report)?;
        samples.push((beta, s.min_eigenvalue));
        if r.m() < lo_report.m() {
            // the branch lost a group; treat as the end of the bracket
            break;
        }
        if s.min_eigenvalue <= 0.0 {
            hi_probe = Some((beta, r, s));
            break;
        }
        lo = beta;
        lo_report = r;
    }
    let (mut hi, mut hi_report, mut hi_stab) = match hi_probe {
        Some(p) => p,
        None => return Err(Error::NoCriticalPointInBracket { lo: lo0, hi: hi0 }),
    };
    while (hi - lo) > search.rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (r, s) = solve_at(mid, &lo_report)?;
        samples.push((mid, s.min_eigenvalue));
        if s.min_eigenvalue > 0.0 && r.m() == lo_report.m() {
            lo = mid;
            lo_report = r;
        } else {
            hi = mid;
            hi_report = r;
            hi_stab = s;
        }
    }
    Ok(CriticalBetaResult {
        beta_c: hi,
        beta_below: lo,
        group_index: hi_stab.group,
        samples,
        report_below: Some(lo_report),
        report_at: Some(hi_report),
    })
}

/// Duplicates column `group` and splits every member state's mass between
/// the old and the new column as `(0.5 ± u, 0.5 ∓ u)` with `u` uniform in
/// `[-0.1, 0.1]`. Members are the states whose hardened group is `group`.
/// Both halves are guaranteed to win at least one member under argmax; the
/// member with the highest affinity is moved if needed.
pub fn split_bootstrap(
    part: &ProbabilisticPartition,
    group: usize,
    seed: u64,
) -> Result<ProbabilisticPartition> {
    let (n, m) = (part.n(), part.m());
    if group >= m {
        return Err(Error::InvalidArgument(format!(
            "group {group} out of range for {m} groups"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (hard, kept) = harden_with_map(part);
    let members: Vec<usize> = (0..n)
        .filter(|&i| kept[hard.group_of(i)] == group)
        .collect();
    let mut psi = DMatrix::zeros(n, m + 1);
    for i in 0..n {
        for j in 0..m {
            psi[(i, j)] = part.get(i, j);
        }
    }
    let mut share = vec![0.5; n];
    for i in 0..n {
        let u: f64 = rng.gen_range(-0.1..=0.1);
        share[i] = 0.5 + u;
    }
    // share[i] goes to the new column; ties at exactly 0.5 stay with the old one
    let wins_new = |s: &[f64], i: usize| s[i] > 0.5;
    if !members.is_empty() {
        let top = *members
            .iter()
            .max_by(|&&a, &&b| part.get(a, group).total_cmp(&part.get(b, group)).then(b.cmp(&a)))
            .expect("nonempty");
        if !members.iter().any(|&i| wins_new(&share, i)) {
            share[top] = 0.6;
        }
        if !members.iter().any(|&i| !wins_new(&share, i)) {
            share[top] = 0.4;
        }
    }
    for i in 0..n {
        let mass = part.get(i, group);
        psi[(i, m)] = mass * share[i];
        psi[(i, group)] = mass - psi[(i, m)];
    }
    Ok(ProbabilisticPartition::from_matrix_unchecked(psi))
}
