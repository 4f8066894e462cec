//! Validate a chain and compute its stationary distribution two ways.
//!
//! cargo run --example stationary [-- path/to/chain.csv]

use std::path::PathBuf;

use markov_voi::chain::{stationary, stationary_power, validate};
use markov_voi::io;

fn main() -> markov_voi::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/four_block_9.csv"));
    let raw = io::parse_matrix_unchecked(&std::fs::read_to_string(&path)?)?;
    let report = validate(&raw);
    println!("validation: {}", serde_json::to_string(&report)?);
    report.into_result()?;

    let chain = io::read_chain(&path)?;
    let direct = stationary(&chain)?;
    let power = stationary_power(&chain)?;
    println!("{:>5} {:>20} {:>20}", "state", "direct", "power");
    for i in 0..chain.n() {
        println!("{i:>5} {:>20.15} {:>20.15}", direct[i], power[i]);
    }
    println!("residual |gamma Pi - gamma|_1 = {:.2e}", direct.residual(&chain));
    Ok(())
}
