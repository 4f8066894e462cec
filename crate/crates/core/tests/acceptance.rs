//! Acceptance suite. Runs every criterion, prints one line per criterion and
//! exits non-zero if any of them failed.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use markov_voi::chain::{
    generate_ncd, random_chain_from_limit, stationary, NcdSpec, StationaryDistribution,
    TransitionModel,
};
use markov_voi::distortion::{collapsed_free_energy, total_distortion_binary};
use markov_voi::fixtures::{duplicated_rows_nine_state, four_block_nine_state};
use markov_voi::io;
use markov_voi::joint::theta_of;
use markov_voi::ncd::{analyze, stationary_error_experiment};
use markov_voi::oracle::best_binary;
use markov_voi::partition::{
    coincident_columns, harden, permutation_equivalent, ProbabilisticPartition, COINCIDENCE_TOL,
};
use markov_voi::schedule::{anneal, stability_matrix_parts, sweep, SweepConfig};
use markov_voi::solver::{
    check_convergence_bounds, Solver, SolverConfig, Variant, MONOTONE_SLACK,
};

struct Outcome {
    passed: bool,
    detail: String,
}

struct Criterion {
    id: usize,
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn random_gamma(n: usize, rng: &mut ChaCha8Rng) -> StationaryDistribution {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    StationaryDistribution::new(w.iter().map(|x| x / total).collect()).unwrap()
}

/// Alternates Metropolis chains with a prescribed limit and block chains.
fn seeded_chain(n: usize, seed: u64) -> TransitionModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if seed.is_multiple_of(2) {
        let g = random_gamma(n, &mut rng);
        random_chain_from_limit(&g, rng.gen_range(0.0..0.6), seed).unwrap()
    } else {
        let first = n / 2;
        let eps = rng.gen_range(0.01..0.2);
        generate_ncd(&[first, n - first], eps, seed).unwrap().1
    }
}

fn monotone_free_energy() -> Outcome {
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0usize;
    for k in 0..200u64 {
        let n = 4 + (k % 6) as usize;
        let m = 1 + ((k / 6) % 4) as usize;
        let beta = 10f64.powf(-3.0 + 6.0 * k as f64 / 199.0);
        let p = seeded_chain(n, k);
        let g = stationary(&p).unwrap();
        let init = ProbabilisticPartition::random(n, m, 1000 + k);
        let cfg = SolverConfig {
            check_monotone: false,
            seed: k,
            ..SolverConfig::with_beta(beta)
        };
        let r = Solver::new(&p, &g).unwrap().solve(&init, &cfg).unwrap();
        let f = r.free_energies();
        for w in f.windows(2) {
            pairs += 1;
            let rise = w[1] - w[0];
            worst = worst.max(rise);
            if !(w[1] <= w[0] + MONOTONE_SLACK) {
                violations += 1;
            }
        }
    }
    Outcome {
        passed: violations == 0,
        detail: format!("200 solves, {pairs} steps, {violations} rises above 1e-10, largest change {worst:.3e}"),
    }
}

fn rate_bound() -> Outcome {
    let mut failed = 0;
    let mut incompatible = 0;
    let mut min_margin = f64::INFINITY;
    let mut cumulative_fail = 0;
    for k in 0..50u64 {
        let n = 4 + (k % 6) as usize;
        let m = 2 + (k % 3) as usize;
        let beta = 10f64.powf(-1.0 + 3.0 * k as f64 / 49.0);
        let p = seeded_chain(n, 500 + k);
        let g = stationary(&p).unwrap();
        let solver = Solver::new(&p, &g).unwrap();
        let init = ProbabilisticPartition::random(n, m, 2000 + k);
        let run = solver
            .solve(&init, &SolverConfig { max_iters: 2_000, ..SolverConfig::with_beta(beta) })
            .unwrap();
        let reference = solver
            .solve(
                &init,
                &SolverConfig {
                    max_iters: 500_000,
                    stall_tol: 1e-15,
                    ..SolverConfig::with_beta(beta)
                },
            )
            .unwrap();
        match check_convergence_bounds(&run, &reference) {
            Ok(b) => {
                min_margin = min_margin.min(b.rate.margin);
                if !b.rate.passed {
                    failed += 1;
                }
                if !b.cumulative.passed {
                    cumulative_fail += 1;
                }
            }
            Err(_) => incompatible += 1,
        }
    }
    Outcome {
        passed: failed == 0 && incompatible == 0,
        detail: format!(
            "50 runs, {failed} rate failures, {incompatible} incompatible, smallest margin {min_margin:.3e} (summed-gap bound failed in {cumulative_fail})"
        ),
    }
}

fn oracle_equivalence() -> Outcome {
    const LAYOUTS: [&[usize]; 4] = [&[3, 3], &[2, 2, 2], &[4, 4], &[3, 3, 2]];
    const EPSILONS: [f64; 4] = [0.05, 0.03, 0.02, 0.01];
    let mut equivalent = 0;
    let mut below = 0;
    let mut worst_gap = f64::INFINITY;
    for k in 0..100u64 {
        let sizes = LAYOUTS[(k % 4) as usize];
        let eps = EPSILONS[((k / 4) % 4) as usize];
        let (_, p) = generate_ncd(sizes, eps, 3000 + k).unwrap();
        let g = stationary(&p).unwrap();
        let b = sizes.len();
        let cfg = SweepConfig { seed: k, ..SweepConfig::default() };
        let r = anneal(&p, &g, b, 1e4, &cfg).unwrap();
        let hard = harden(&r.final_partition);
        let best = best_binary(&p, &g, b).unwrap();
        if permutation_equivalent(&hard, &best.partition) {
            equivalent += 1;
        }
        let theta = theta_of(&p, &g, &hard.to_probabilistic()).unwrap();
        let d = total_distortion_binary(&p, &theta, &hard, &g).unwrap();
        let gap = d - best.distortion;
        worst_gap = worst_gap.min(gap);
        if gap < -1e-12 {
            below += 1;
        }
    }
    Outcome {
        passed: equivalent >= 95 && below == 0,
        detail: format!("{equivalent}/100 equivalent, {below} below optimum, smallest gap {worst_gap:.3e}"),
    }
}

fn phase_plateaus() -> Outcome {
    let p = io::read_chain(&fixture_path("four_block_9.csv")).unwrap();
    let g = stationary(&p).unwrap();
    let cfg = SweepConfig::default();
    let report = sweep(&p, &g, &cfg).unwrap();
    let solver = Solver::new(&p, &g).unwrap();
    let mut edges = vec![cfg.beta_start];
    edges.extend(report.criticals.iter().map(|c| c.beta_c));
    edges.push(cfg.beta_max);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad_intervals = Vec::new();
    let mut column_changes = 0;
    let mut hardened_changes = 0;
    // largest relative distance above the opening critical value of a sample
    // that disagrees with its interval's majority partition
    let mut widest_lag = 0.0f64;
    for (idx, w) in edges.windows(2).enumerate() {
        let expected_m = report.plateaus[idx].m;
        let mut samples: Vec<(f64, Vec<usize>)> = Vec::with_capacity(100);
        for _ in 0..100 {
            let beta = rng.gen_range(w[0]..w[1]);
            let r = report.solve_at(&solver, beta).unwrap();
            let hard = harden(&r.final_partition);
            if r.m() != expected_m {
                column_changes += 1;
            }
            if hard.m() != expected_m {
                hardened_changes += 1;
            }
            samples.push((beta, hard.canonical()));
        }
        let majority = samples
            .iter()
            .max_by_key(|(_, c)| samples.iter().filter(|(_, d)| d == c).count())
            .map(|(_, c)| c.clone())
            .unwrap();
        let odd: Vec<f64> = samples
            .iter()
            .filter(|(_, c)| *c != majority)
            .map(|(b, _)| (b - w[0]) / w[0])
            .collect();
        if !odd.is_empty() {
            bad_intervals.push((idx, odd.len()));
            widest_lag = odd.iter().copied().fold(widest_lag, f64::max);
        }
    }
    Outcome {
        passed: bad_intervals.is_empty() && column_changes == 0 && hardened_changes == 0,
        detail: format!(
            "criticals {:?}, {} intervals x 100, (interval, disagreeing samples) {:?} all within {:.1e} relative above the opening critical, group-count mismatches: columns {}, hardened {}",
            report.criticals.iter().map(|c| (c.beta_c * 1e4).round() / 1e4).collect::<Vec<_>>(),
            edges.len() - 1,
            bad_intervals,
            widest_lag,
            column_changes,
            hardened_changes
        ),
    }
}

fn corrected_recovery() -> Outcome {
    const EPSILONS: [f64; 5] = [0.05, 0.04, 0.03, 0.02, 0.01];
    let mut hits = 0;
    let mut counts = [0usize; 10];
    for k in 0..50u64 {
        let eps = EPSILONS[(k % 5) as usize];
        let (_, p) = generate_ncd(&[3, 2, 2, 2], eps, 4000 + k).unwrap();
        let g = stationary(&p).unwrap();
        let cfg = SweepConfig {
            beta_max: 18.0,
            seed: k,
            ..SweepConfig::default()
        };
        let m = sweep(&p, &g, &cfg).unwrap().knee_m.unwrap_or(0);
        counts[m.min(9)] += 1;
        if m == 4 {
            hits += 1;
        }
    }
    Outcome {
        passed: hits >= 40,
        detail: format!("{hits}/50 with 4 groups, group-count histogram {counts:?}"),
    }
}

fn ncd_scaling() -> Outcome {
    let seeds: Vec<u64> = (0..10).collect();
    let report =
        stationary_error_experiment(&[3, 3, 3], &[0.1, 0.05, 0.02, 0.01, 0.005], &seeds).unwrap();
    let slope = report.fit.slope;
    Outcome {
        passed: (1.7..=2.3).contains(&slope),
        detail: format!("slope {slope:.4} (r2 {:.4}), target [1.7, 2.3]", report.fit.r2),
    }
}

fn coincidence() -> Outcome {
    let p = io::read_chain(&fixture_path("duplicated_rows_9.csv")).unwrap();
    assert_eq!(p.matrix(), duplicated_rows_nine_state().matrix());
    let g = stationary(&p).unwrap();
    let solver = Solver::new(&p, &g).unwrap();
    let init = ProbabilisticPartition::identity(9);
    let count = |variant| {
        let cfg = SolverConfig {
            variant,
            max_iters: 200_000,
            stall_tol: 1e-13,
            ..SolverConfig::with_beta(100.0)
        };
        let r = solver.solve(&init, &cfg).unwrap();
        coincident_columns(&r.final_partition, COINCIDENCE_TOL).len()
    };
    let entropy = count(Variant::Entropy);
    let mi = count(Variant::MutualInformation);
    Outcome {
        passed: entropy >= 1 && mi == 0,
        detail: format!("entropy variant {entropy} coincident pairs, mutual-information variant {mi}"),
    }
}

fn closed_form_aggregate() -> Outcome {
    let mut cases: Vec<(NcdSpec, f64)> = vec![(four_block_nine_state().unwrap().0, 5.0)];
    for (k, sizes) in [&[3usize, 3][..], &[2, 2, 2], &[4, 4], &[3, 3, 2], &[3, 2, 2, 2]]
        .iter()
        .enumerate()
    {
        for (e, eps) in [0.05, 0.01].iter().enumerate() {
            cases.push((NcdSpec::random(sizes, *eps, 5000 + 10 * k as u64 + e as u64).unwrap(), 1e4));
        }
    }
    let mut worst = 0.0f64;
    let mut unrecovered = 0;
    for (spec, beta) in &cases {
        let r = analyze(spec, *beta, &SweepConfig::default()).unwrap();
        if r.recovered_blocks {
            worst = worst.max(r.max_abs_gap());
        } else {
            unrecovered += 1;
        }
    }
    Outcome {
        passed: unrecovered == 0 && worst <= 1e-10,
        detail: format!("{} fixtures, {unrecovered} without block recovery, largest gap {worst:.3e}", cases.len()),
    }
}

/// Exact Gibbs partition of `(alpha, theta)`.
fn gibbs(solver: &Solver<'_>, alpha: &[f64], theta: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let div = solver.divergences(theta);
    let (n, m) = div.shape();
    let mut psi = DMatrix::zeros(n, m);
    for i in 0..n {
        let logits: Vec<f64> = (0..m).map(|j| alpha[j].ln() - beta * div[(i, j)]).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        for j in 0..m {
            psi[(i, j)] = (logits[j] - max).exp() / z;
        }
    }
    psi
}

/// Collapsed free energy with group `j` split into two halves whose weight
/// rows move to `theta_j + t q` and `theta_j - t q`.
#[allow(clippy::too_many_arguments)]
fn split_energy(
    p: &TransitionModel,
    g: &StationaryDistribution,
    alpha: &[f64],
    theta: &DMatrix<f64>,
    j: usize,
    q: &[f64],
    t: f64,
    beta: f64,
) -> f64 {
    let m = theta.nrows();
    let mut a = alpha.to_vec();
    a[j] /= 2.0;
    a.push(alpha[j] / 2.0);
    let mut th = theta.clone().insert_row(m, 0.0);
    for k in 0..theta.ncols() {
        th[(j, k)] = theta[(j, k)] + t * q[k];
        th[(m, k)] = theta[(j, k)] - t * q[k];
    }
    collapsed_free_energy(p, g, &a, &th, beta)
}

fn hessian_probe() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    for f in 0..10u64 {
        let n = 4 + (f % 5) as usize;
        let m = 2 + (f % 2) as usize;
        let beta = 1.5 + f as f64;
        let p = seeded_chain(n, 6000 + f);
        let g = stationary(&p).unwrap();
        let solver = Solver::new(&p, &g).unwrap();
        let r = solver
            .solve(
                &ProbabilisticPartition::random(n, m, f),
                &SolverConfig { max_iters: 50_000, stall_tol: 1e-13, ..SolverConfig::with_beta(beta) },
            )
            .unwrap();
        let alpha = r.final_alpha.as_slice().to_vec();
        let theta = r.final_theta.matrix().clone();
        let psi = gibbs(&solver, &alpha, &theta, beta);
        let j = (f as usize) % r.m();
        let sm = stability_matrix_parts(&p, &g, &psi, &alpha, &theta, j, beta).unwrap();
        let min_theta = sm.support.iter().map(|&k| theta[(j, k)]).fold(f64::INFINITY, f64::min);
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + f);
        for _ in 0..20 {
            let mut q = vec![0.0; n];
            for &k in &sm.support {
                q[k] = rng.gen_range(-1.0..1.0);
            }
            let mean = sm.support.iter().map(|&k| q[k]).sum::<f64>() / sm.support.len() as f64;
            for &k in &sm.support {
                q[k] -= mean;
            }
            let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
            q.iter_mut().for_each(|x| *x /= norm);
            let analytic = sm.alpha * sm.quadratic_form(&q);
            let f0 = split_energy(&p, &g, &alpha, &theta, j, &q, 0.0, beta);
            let second = |t: f64| {
                (split_energy(&p, &g, &alpha, &theta, j, &q, t, beta) - 2.0 * f0
                    + split_energy(&p, &g, &alpha, &theta, j, &q, -t, beta))
                    / (t * t)
            };
            let t = 1e-3 * min_theta;
            let numeric = (4.0 * second(t) - second(2.0 * t)) / 3.0;
            let rel = (numeric - analytic).abs() / analytic.abs().max(1e-12);
            worst = worst.max(rel);
            if !(rel <= 1e-5) {
                failures += 1;
            }
        }
    }
    Outcome {
        passed: failures == 0,
        detail: format!("10 fixtures x 20 directions, {failures} failures, worst relative error {worst:.3e}"),
    }
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "monotone free energy", limit: Duration::from_secs(60), run: monotone_free_energy },
        Criterion { id: 2, name: "1/k rate bound", limit: Duration::from_secs(60), run: rate_bound },
        Criterion { id: 3, name: "oracle equivalence", limit: Duration::from_secs(300), run: oracle_equivalence },
        Criterion { id: 4, name: "phase plateaus", limit: Duration::from_secs(300), run: phase_plateaus },
        Criterion { id: 5, name: "corrected-beta recovery", limit: Duration::from_secs(300), run: corrected_recovery },
        Criterion { id: 6, name: "block stationary scaling", limit: Duration::from_secs(120), run: ncd_scaling },
        Criterion { id: 7, name: "entropy vs information coincidence", limit: Duration::from_secs(30), run: coincidence },
        Criterion { id: 8, name: "closed-form aggregate", limit: Duration::from_secs(30), run: closed_form_aggregate },
        Criterion { id: 9, name: "stability matrix vs finite differences", limit: Duration::from_secs(60), run: hessian_probe },
    ];
    let filter: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let out = (c.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= c.limit;
        let ok = out.passed && in_time;
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} ({}; {:.1}s of {}s)",
            c.id,
            c.name,
            if ok { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
