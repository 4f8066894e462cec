//! Mutual-information and conditional-entropy penalties on a chain with
//! duplicated rows: only the entropy penalty produces coincident columns.

use markov_voi::chain::stationary;
use markov_voi::fixtures::duplicated_rows_nine_state;
use markov_voi::partition::{coincident_columns, harden, ProbabilisticPartition, COINCIDENCE_TOL};
use markov_voi::solver::{Solver, SolverConfig, Variant};

fn main() -> markov_voi::Result<()> {
    let chain = duplicated_rows_nine_state();
    let gamma = stationary(&chain)?;
    let solver = Solver::new(&chain, &gamma)?;
    for variant in [Variant::MutualInformation, Variant::Entropy] {
        let cfg = SolverConfig {
            variant,
            max_iters: 200_000,
            stall_tol: 1e-13,
            ..SolverConfig::with_beta(100.0)
        };
        let r = solver.solve(&ProbabilisticPartition::identity(9), &cfg)?;
        let pairs = coincident_columns(&r.final_partition, COINCIDENCE_TOL);
        println!(
            "{variant}: {} columns, {} hardened groups, coincident pairs {:?}",
            r.m(),
            harden(&r.final_partition).m(),
            pairs
        );
    }
    Ok(())
}
