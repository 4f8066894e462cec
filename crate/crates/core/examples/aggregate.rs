//! Reduce the bundled nine-state chain to four groups at a fixed `beta`.

use markov_voi::chain::stationary;
use markov_voi::fixtures::four_block_nine_state;
use markov_voi::partition::harden;
use markov_voi::schedule::{anneal, SweepConfig};

fn main() -> markov_voi::Result<()> {
    let (spec, chain) = four_block_nine_state()?;
    let gamma = stationary(&chain)?;
    let beta = 5.0;
    let report = anneal(&chain, &gamma, 4, beta, &SweepConfig::default())?;
    let energy = report.final_energy();
    println!("beta {beta}: {} groups after {} iterations", report.m(), report.iterations);
    println!(
        "distortion {:.6}, information {:.4} bits, free energy {:.6}",
        energy.expected_distortion,
        energy.mutual_information_bits(),
        energy.free_energy
    );
    println!("planted blocks:     {:?}", spec.labels());
    println!("hardened partition: {:?}", harden(&report.final_partition).canonical());
    println!("group masses: {:?}", report.final_alpha.as_slice());
    println!("reduced chain:");
    let phi = report.final_phi.matrix();
    for i in 0..phi.nrows() {
        let row: Vec<String> = phi.row(i).iter().map(|x| format!("{x:.4}")).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
