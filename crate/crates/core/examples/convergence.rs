//! Free-energy trace of one solve, audited against a long reference run,
//! and the stability eigenvalue that locates the next split.

use markov_voi::chain::{generate_ncd, stationary};
use markov_voi::partition::ProbabilisticPartition;
use markov_voi::schedule::{find_critical_beta, stability_min_eig, CriticalSearch};
use markov_voi::solver::{check_convergence_bounds, Solver, SolverConfig};

fn main() -> markov_voi::Result<()> {
    let (_, chain) = generate_ncd(&[3, 3], 0.1, 5)?;
    let gamma = stationary(&chain)?;
    let solver = Solver::new(&chain, &gamma)?;
    let init = ProbabilisticPartition::random(6, 2, 9);
    let short = solver.solve(&init, &SolverConfig { max_iters: 25, ..SolverConfig::with_beta(4.0) })?;
    let long = solver.solve(
        &init,
        &SolverConfig { max_iters: 100_000, stall_tol: 1e-14, ..SolverConfig::with_beta(4.0) },
    )?;
    for t in short.trace.iter().take(8) {
        println!("iter {:>3}  F = {:.12}", t.iter, t.energy.free_energy);
    }
    let bounds = check_convergence_bounds(&short, &long)?;
    println!("{}", serde_json::to_string_pretty(&bounds)?);

    let one = solver.solve(&ProbabilisticPartition::ones(6), &SolverConfig::with_beta(0.1))?;
    println!("min stability eigenvalue at beta 0.1: {:.4}", stability_min_eig(&chain, &one, 0.1)?.min_eigenvalue);
    let crit = find_critical_beta(&solver, &one, (0.1, 100.0), &SolverConfig::with_beta(0.1), CriticalSearch::default())?;
    println!("first critical beta {:.6} splits group {}", crit.beta_c, crit.group_index);
    Ok(())
}
