//! Anneal the bundled chain from one group upward, list the critical
//! values and report the self-consistent corrected `beta`.

use markov_voi::chain::stationary;
use markov_voi::fixtures::four_block_nine_state;
use markov_voi::partition::harden;
use markov_voi::schedule::{sweep, SweepConfig};

fn main() -> markov_voi::Result<()> {
    let (_, chain) = four_block_nine_state()?;
    let gamma = stationary(&chain)?;
    let cfg = SweepConfig {
        beta_max: 30.0,
        ..SweepConfig::default()
    };
    let report = sweep(&chain, &gamma, &cfg)?;
    for c in &report.criticals {
        println!("critical beta {:>10.5}: group {} of {} splits", c.beta_c, c.group_split, c.m_before);
    }
    for p in &report.plateaus {
        println!(
            "plateau ({:>8.4}, {:>8.4}) m = {}  hardened {:?}",
            p.beta_lo,
            p.beta_hi,
            p.m,
            harden(&p.report.final_partition).canonical()
        );
    }
    for (m, d) in &report.distortion_curve {
        println!("m = {m}: distortion {d:.6}");
    }
    if let Some(c) = &report.corrected {
        println!(
            "corrected value {:.5} (multiplier {:.4}, {:.3} bits) -> {} groups",
            c.value, c.multiplier, c.mutual_information_bits, c.hardened_m
        );
    }
    Ok(())
}
