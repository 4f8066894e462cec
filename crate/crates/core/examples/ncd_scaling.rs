//! Block aggregates of a nearly decomposable chain and the stationary
//! error of the block approximation as the coupling shrinks.

use markov_voi::chain::{stationary, NcdSpec};
use markov_voi::ncd::{analyze, block_aggregate, halving_ratio, stationary_error_experiment};
use markov_voi::schedule::SweepConfig;

fn main() -> markov_voi::Result<()> {
    let spec = NcdSpec::random(&[3, 3, 3], 0.05, 2)?;
    let chain = spec.chain()?;
    let gamma = stationary(&chain)?;
    println!("block aggregate:\n{:.5}", block_aggregate(&chain, &gamma, &spec)?);

    let analysis = analyze(&spec, 1e3, &SweepConfig::default())?;
    println!(
        "solver recovered the blocks: {}, largest gap to the block formula {:.2e}",
        analysis.recovered_blocks,
        analysis.max_abs_gap()
    );

    let epsilons = [0.1, 0.05, 0.02, 0.01, 0.005];
    let seeds: Vec<u64> = (0..10).collect();
    let report = stationary_error_experiment(&[3, 3, 3], &epsilons, &seeds)?;
    for eps in epsilons {
        let errs: Vec<f64> = report.points.iter().filter(|p| p.epsilon == eps).map(|p| p.l1_error).collect();
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        println!("epsilon {eps:<6} mean l1 error {mean:.3e}");
    }
    println!("log-log slope {:.3} (r2 {:.3})", report.fit.slope, report.fit.r2);
    println!("error ratio when halving 0.02: {:.3}", halving_ratio(&spec, 0.02)?);
    Ok(())
}
