//! Synthesise a block-structured chain and a chain with a prescribed
//! stationary distribution, and write them in both file formats.

use markov_voi::chain::{generate_ncd, random_chain_from_limit, stationary, StationaryDistribution};
use markov_voi::io::{self, Format};

fn main() -> markov_voi::Result<()> {
    let out = std::env::temp_dir().join("markov-voi-generate");
    std::fs::create_dir_all(&out)?;

    let (spec, chain) = generate_ncd(&[3, 2, 4], 0.05, 7)?;
    println!("block chain: n = {}, blocks {:?}, epsilon {}", spec.n(), spec.ranges(), spec.epsilon);
    let off_block: f64 = spec
        .ranges()
        .iter()
        .map(|r| {
            r.clone()
                .map(|i| r.clone().map(|k| chain.get(i, k)).sum::<f64>())
                .fold(0.0, |worst: f64, inside| worst.max(1.0 - inside))
        })
        .fold(0.0, f64::max);
    println!("largest mass leaving a block in one step: {off_block:.4}");
    io::write_chain(&out.join("ncd.csv"), &chain, Format::Csv)?;
    io::write_chain(&out.join("ncd.json"), &chain, Format::Json)?;

    let target = StationaryDistribution::new(vec![0.4, 0.3, 0.2, 0.1])?;
    let metropolis = random_chain_from_limit(&target, 0.5, 1)?;
    let recovered = stationary(&metropolis)?;
    println!("prescribed {:?}", target.as_slice());
    println!("recovered  {:?}", recovered.as_slice());
    io::write_chain(&out.join("metropolis.csv"), &metropolis, Format::Csv)?;
    println!("files written to {}", out.display());
    Ok(())
}
