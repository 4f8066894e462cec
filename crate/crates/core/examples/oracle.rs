//! Compare the annealed solution at large `beta` with exhaustive search
//! over all hard partitions.

use markov_voi::chain::{generate_ncd, stationary};
use markov_voi::distortion::total_distortion_binary;
use markov_voi::joint::theta_of;
use markov_voi::oracle::{best_binary, rank_partitions, stirling2};
use markov_voi::partition::{harden, permutation_equivalent};
use markov_voi::schedule::{anneal, SweepConfig};

fn main() -> markov_voi::Result<()> {
    let (spec, chain) = generate_ncd(&[3, 3, 2], 0.03, 11)?;
    let gamma = stationary(&chain)?;
    let m = spec.blocks();
    println!("searching {} partitions of {} states into {m} groups", stirling2(8, m), spec.n());
    let best = best_binary(&chain, &gamma, m)?;
    println!("oracle optimum {:?} distortion {:.8}", best.partition.canonical(), best.distortion);
    for (rank, r) in rank_partitions(&chain, &gamma, m, Some(5))?.iter().enumerate() {
        println!("  #{:<2} {:?} {:.8}", rank + 1, r.assignment, r.distortion);
    }

    let solved = anneal(&chain, &gamma, m, 1e4, &SweepConfig::default())?;
    let hard = harden(&solved.final_partition);
    let theta = theta_of(&chain, &gamma, &hard.to_probabilistic())?;
    let d = total_distortion_binary(&chain, &theta, &hard, &gamma)?;
    println!("annealed {:?} distortion {:.8}", hard.canonical(), d);
    println!("same partition up to relabelling: {}", permutation_equivalent(&hard, &best.partition));
    Ok(())
}
