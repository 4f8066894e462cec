use serde::Serialize;

use super::corrected::{fixed_point, CorrectedBeta, CorrectedConfig};
use super::{find_critical_beta, split_bootstrap, stability_min_eig, CriticalSearch};
use crate::chain::{StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::partition::{coincident_columns, ProbabilisticPartition, COINCIDENCE_TOL};
use crate::solver::{SolveReport, Solver, SolverConfig};

/// Stall threshold of the solves inside a sweep. Converged iterates can
/// cycle in their last bits forever, so a bitwise stall never triggers.
pub const SWEEP_STALL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    /// `beta` of the first single-group solve.
    pub beta_start: f64,
    pub beta_max: f64,
    /// Solver settings; `beta` is overridden per solve.
    pub solver: SolverConfig,
    pub search: CriticalSearch,
    /// A split group is first solved at `beta_c * (1 + split_delta)`.
    pub split_delta: f64,
    pub max_groups: Option<usize>,
    pub seed: u64,
    /// Largest ratio between consecutive `beta` values when following a
    /// branch from its anchor to a requested `beta`.
    pub continuation_factor: f64,
    pub corrected: Option<CorrectedConfig>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            beta_start: 1e-2,
            beta_max: 100.0,
            solver: SolverConfig {
                max_iters: 200_000,
                stall_tol: SWEEP_STALL_TOL,
                ..SolverConfig::default()
            },
            search: CriticalSearch::default(),
            split_delta: 1e-3,
            max_groups: None,
            seed: 0,
            continuation_factor: 2.0,
            corrected: Some(CorrectedConfig::default()),
        }
    }
}

/// Range of `beta` on which one group count is stable.
#[derive(Debug, Clone)]
pub struct Plateau {
    /// Critical value that opened this plateau (0 for the first).
    pub beta_lo: f64,
    /// Critical value that closed it (`+inf` for the last).
    pub beta_hi: f64,
    pub m: usize,
    /// `beta` at which `report` was solved.
    pub anchor_beta: f64,
    pub report: SolveReport,
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepEntry {
    pub beta: f64,
    pub m: usize,
    pub expected_distortion: f64,
    pub mutual_information: f64,
    pub free_energy: f64,
    pub is_critical: bool,
    pub is_corrected: bool,
}

impl SweepEntry {
    fn from_report(beta: f64, r: &SolveReport, is_critical: bool, is_corrected: bool) -> Self {
        let e = r.final_energy();
        Self {
            beta,
            m: r.m(),
            expected_distortion: e.expected_distortion,
            mutual_information: e.mutual_information,
            free_energy: e.free_energy,
            is_critical,
            is_corrected,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CriticalRecord {
    pub beta_c: f64,
    /// Group (zero-based, among the `m_before` columns) that was split.
    pub group_split: usize,
    pub m_before: usize,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub n: usize,
    /// Sorted by `beta`.
    pub entries: Vec<SweepEntry>,
    pub criticals: Vec<CriticalRecord>,
    pub plateaus: Vec<Plateau>,
    pub corrected: Option<CorrectedBeta>,
    /// Hardened group count at the corrected `beta`.
    pub knee_m: Option<usize>,
    /// Expected distortion at the start of each plateau, by group count.
    pub distortion_curve: Vec<(usize, f64)>,
    pub config: SweepConfig,
}

impl SweepReport {
    /// Plateau containing `beta`: the one with the largest `beta_lo < beta`.
    pub fn plateau_for(&self, beta: f64) -> &Plateau {
        self.plateaus
            .iter()
            .rev()
            .find(|p| p.beta_lo < beta)
            .unwrap_or(&self.plateaus[0])
    }

    /// Solves at `beta`, following the branch of the plateau containing it.
    pub fn solve_at(&self, solver: &Solver<'_>, beta: f64) -> Result<SolveReport> {
        let p = self.plateau_for(beta);
        follow(solver, &p.report, p.anchor_beta, beta, &self.config)
    }
}

/// Warm-started continuation from a solution at `from_beta` to `to_beta`
/// in geometric steps.
fn follow(
    solver: &Solver<'_>,
    start: &SolveReport,
    from_beta: f64,
    to_beta: f64,
    cfg: &SweepConfig,
) -> Result<SolveReport> {
    let ratio = to_beta / from_beta;
    let steps = (ratio.ln().abs() / cfg.continuation_factor.ln()).ceil().max(1.0) as usize;
    let mut part = start.final_partition.clone();
    let mut last = None;
    for s in 1..=steps {
        let beta = if s == steps {
            to_beta
        } else {
            from_beta * ratio.powf(s as f64 / steps as f64)
        };
        let r = solver.solve(&part, &SolverConfig { beta, ..cfg.solver })?;
        part = r.final_partition.clone();
        last = Some(r);
    }
    Ok(last.expect("at least one step"))
}

fn split_is_resolved(r: &SolveReport, m: usize) -> bool {
    r.m() == m && coincident_columns(&r.final_partition, COINCIDENCE_TOL).is_empty()
}

/// Anneals from a single group upward: find the next critical `beta`,
/// split the destabilised group, re-solve just above the critical value,
/// repeat until `beta_max`, `max_groups` or `n` groups. Finally locates
/// the self-consistent corrected `beta` when configured.
pub fn sweep(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    cfg: &SweepConfig,
) -> Result<SweepReport> {
    if !(cfg.beta_start > 0.0) || !(cfg.beta_max > cfg.beta_start) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_start ({}) < beta_max ({})",
            cfg.beta_start, cfg.beta_max
        )));
    }
    let n = model.n();
    let solver = Solver::new(model, gamma)?;
    let max_groups = cfg.max_groups.unwrap_or(n).min(n);
    let first = solver.solve(
        &ProbabilisticPartition::ones(n),
        &SolverConfig {
            beta: cfg.beta_start,
            ..cfg.solver
        },
    )?;
    let mut entries = vec![SweepEntry::from_report(cfg.beta_start, &first, false, false)];
    let mut plateaus = vec![Plateau {
        beta_lo: 0.0,
        beta_hi: f64::INFINITY,
        m: first.m(),
        anchor_beta: cfg.beta_start,
        report: first,
    }];
    let mut criticals = Vec::new();
    let mut split_count = 0u64;
    loop {
        let (current, beta_now) = {
            let p = plateaus.last().expect("nonempty");
            (p.report.clone(), p.anchor_beta)
        };
        let m = current.m();
        if m >= max_groups || beta_now >= cfg.beta_max {
            break;
        }
        let probe_cfg = SolverConfig {
            beta: beta_now,
            ..cfg.solver
        };
        let crit = match find_critical_beta(&solver, &current, (beta_now, cfg.beta_max), &probe_cfg, cfg.search) {
            Ok(c) => c,
            Err(Error::NoCriticalPointInBracket { .. }) => break,
            Err(e) => return Err(e),
        };
        let base = crit.report_below.as_ref().unwrap_or(&current);
        let mut delta = cfg.split_delta;
        let mut accepted = None;
        for attempt in 0..4 {
            let beta = (crit.beta_c * (1.0 + delta)).max(beta_now);
            let seed = cfg.seed.wrapping_add(split_count * 16 + attempt);
            let init = split_bootstrap(&base.final_partition, crit.group_index, seed)?;
            let r = solver.solve(&init, &SolverConfig { beta, ..cfg.solver })?;
            if split_is_resolved(&r, m + 1) {
                accepted = Some((beta, r));
                break;
            }
            delta *= 10.0;
            if crit.beta_c * (1.0 + delta) > cfg.beta_max {
                break;
            }
        }
        split_count += 1;
        let Some((beta, r)) = accepted else { break };
        criticals.push(CriticalRecord {
            beta_c: crit.beta_c,
            group_split: crit.group_index,
            m_before: m,
        });
        entries.push(SweepEntry::from_report(beta, &r, true, false));
        if let Some(p) = plateaus.last_mut() {
            p.beta_hi = crit.beta_c;
        }
        plateaus.push(Plateau {
            beta_lo: crit.beta_c,
            beta_hi: f64::INFINITY,
            m: r.m(),
            anchor_beta: beta,
            report: r,
        });
    }
    let distortion_curve = plateaus
        .iter()
        .map(|p| (p.m, p.report.final_energy().expected_distortion))
        .collect();
    let mut report = SweepReport {
        n,
        entries,
        criticals,
        plateaus,
        corrected: None,
        knee_m: None,
        distortion_curve,
        config: *cfg,
    };
    if let Some(ccfg) = cfg.corrected {
        let c = fixed_point(n, &ccfg, |mult| report.solve_at(&solver, mult))?;
        if let Some(r) = &c.report {
            report
                .entries
                .push(SweepEntry::from_report(c.multiplier, r, false, true));
        }
        report.knee_m = Some(c.hardened_m);
        report.corrected = Some(c);
    }
    report
        .entries
        .sort_by(|a, b| a.beta.total_cmp(&b.beta));
    Ok(report)
}

/// Solution with `m` groups at `beta`, reached by annealing: sweep until
/// `m` groups exist, forcing splits at `beta` when no further critical
/// point lies below it, then follow the branch to `beta`.
pub fn anneal(
    model: &TransitionModel,
    gamma: &StationaryDistribution,
    m: usize,
    beta: f64,
    cfg: &SweepConfig,
) -> Result<SolveReport> {
    if m == 0 || m > model.n() {
        return Err(Error::InvalidArgument(format!(
            "group count {m} outside 1..={}",
            model.n()
        )));
    }
    let scfg = SweepConfig {
        max_groups: Some(m),
        beta_max: cfg.beta_max.max(beta),
        beta_start: cfg.beta_start.min(beta * 0.5),
        corrected: None,
        ..*cfg
    };
    let report = sweep(model, gamma, &scfg)?;
    let solver = Solver::new(model, gamma)?;
    let mut r = report.solve_at(&solver, beta)?;
    let mut attempt = 0u64;
    while r.m() < m && attempt < 4 * m as u64 {
        let st = stability_min_eig(model, &r, beta)?;
        let init = split_bootstrap(&r.final_partition, st.group, cfg.seed.wrapping_add(1000 + attempt))?;
        let next = solver.solve(&init, &SolverConfig { beta, ..cfg.solver })?;
        attempt += 1;
        if next.m() > r.m() {
            r = next;
        }
    }
    Ok(r)
}
