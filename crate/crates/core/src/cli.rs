//! Command-line front end. Every command writes machine-readable files and,
//! on failure, a single JSON line `{"code": .., "message": ..}` to stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map};

use crate::chain::{
    generate_ncd, random_chain_from_limit, stationary, validate, StationaryDistribution,
};
use crate::error::{Error, Result};
use crate::io::{self, Format};
use crate::ncd::stationary_error_experiment;
use crate::oracle::{best_binary, rank_partitions};
use crate::partition::BinaryPartition;
use crate::schedule::{anneal, sweep, SweepConfig};
use crate::solver::{Solver, SolverConfig, Variant};

#[derive(Debug, Parser)]
#[command(name = "markov-voi", version, about = "Value-of-information aggregation of Markov chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a chain file; prints a JSON report.
    Validate {
        #[arg(long)]
        input: PathBuf,
    },
    /// Stationary distribution of a chain.
    Stationary {
        #[arg(long)]
        input: PathBuf,
        /// Writes `gamma.csv` or `gamma.json` here instead of stdout.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: Format,
    },
    /// Synthesise a chain.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Solve for a reduced chain at one `beta`.
    Aggregate {
        #[arg(long)]
        input: PathBuf,
        /// Required unless `--m auto`.
        #[arg(long)]
        beta: Option<f64>,
        /// Group count, or `auto` for the corrected `beta` of a full sweep.
        #[arg(long, default_value = "auto")]
        m: String,
        /// Starting partition; otherwise the solution is reached by annealing.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long, default_value_t = 100.0)]
        beta_max: f64,
        #[arg(long, default_value = "mi")]
        variant: Variant,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Anneal from one group upward and record every critical `beta`.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        beta_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Exhaustive best binary partition.
    Oracle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        m: usize,
        /// Keep only the best rows of `ranking.csv`.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Stationary error of the block approximation against coupling size.
    NcdScaling {
        #[arg(long, value_delimiter = ',', default_value = "3,3,3")]
        blocks: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.05,0.02,0.01,0.005")]
        epsilons: Vec<f64>,
        /// Number of seeds, starting at `--seed`.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output_dir: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenerateKind {
    /// Block-structured chain `Pi* + epsilon C`.
    Ncd {
        #[arg(long, value_delimiter = ',')]
        blocks: Vec<usize>,
        #[arg(long)]
        epsilon: f64,
        #[command(flatten)]
        out: GenerateOut,
    },
    /// Chain with a prescribed stationary distribution.
    FromLimit {
        /// Stationary distribution file (`n=..` and one row).
        #[arg(long, conflicts_with = "gamma_values")]
        gamma: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        gamma_values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        sparsity: f64,
        #[command(flatten)]
        out: GenerateOut,
    },
}

#[derive(Debug, Args)]
pub struct GenerateOut {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output_dir: PathBuf,
    #[arg(long, default_value = "csv")]
    pub format: Format,
}

fn chain_file(dir: &Path, format: Format) -> PathBuf {
    dir.join(match format {
        Format::Csv => "chain.csv",
        Format::Json => "chain.json",
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { input } => {
            let pi = io::parse_matrix_unchecked(&fs::read_to_string(&input)?)?;
            let report = validate(&pi);
            println!("{}", serde_json::to_string(&report)?);
            report.into_result()
        }
        Command::Stationary {
            input,
            output_dir,
            format,
        } => {
            let model = io::read_chain(&input)?;
            let gamma = stationary(&model)?;
            let text = match format {
                Format::Csv => io::gamma_to_csv(&gamma),
                Format::Json => {
                    serde_json::to_string(&json!({"n": gamma.len(), "gamma": gamma.as_slice()}))?
                        + "\n"
                }
            };
            match output_dir {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    let name = match format {
                        Format::Csv => "gamma.csv",
                        Format::Json => "gamma.json",
                    };
                    fs::write(dir.join(name), text)?;
                }
                None => print!("{text}"),
            }
            Ok(())
        }
        Command::Generate { kind } => match kind {
            GenerateKind::Ncd {
                blocks,
                epsilon,
                out,
            } => {
                let (spec, model) = generate_ncd(&blocks, epsilon, out.seed)?;
                fs::create_dir_all(&out.output_dir)?;
                io::write_chain(&chain_file(&out.output_dir, out.format), &model, out.format)?;
                let labels = BinaryPartition::from_labels(&spec.labels())?;
                fs::write(out.output_dir.join("blocks.csv"), io::assignment_to_csv(&labels))?;
                Ok(())
            }
            GenerateKind::FromLimit {
                gamma,
                gamma_values,
                sparsity,
                out,
            } => {
                let g = match (gamma, gamma_values) {
                    (Some(path), None) => io::parse_gamma_csv(&fs::read_to_string(path)?)?,
                    (None, Some(v)) => StationaryDistribution::new(v)?,
                    _ => {
                        return Err(Error::InvalidArgument(
                            "give exactly one of --gamma and --gamma-values".into(),
                        ))
                    }
                };
                let model = random_chain_from_limit(&g, sparsity, out.seed)?;
                fs::create_dir_all(&out.output_dir)?;
                io::write_chain(&chain_file(&out.output_dir, out.format), &model, out.format)
            }
        },
        Command::Aggregate {
            input,
            beta,
            m,
            init,
            beta_max,
            variant,
            seed,
            output_dir,
        } => {
            let model = io::read_chain(&input)?;
            let gamma = stationary(&model)?;
            let solver = Solver::new(&model, &gamma)?;
            let sweep_cfg = SweepConfig {
                beta_max,
                seed,
                ..SweepConfig::default()
            };
            let mut extra = Map::new();
            let (start, beta) = if m == "auto" {
                let report = sweep(&model, &gamma, &sweep_cfg)?;
                let c = report.corrected.ok_or_else(|| {
                    Error::InvalidArgument("sweep produced no corrected beta".into())
                })?;
                extra.insert("corrected_value".into(), json!(c.value));
                extra.insert("knee_m".into(), json!(c.hardened_m));
                let r = c.report.expect("fixed point keeps its solution");
                (r.final_partition, c.multiplier)
            } else {
                let k: usize = m.parse().map_err(|_| {
                    Error::InvalidArgument(format!("--m must be an integer or auto, got {m:?}"))
                })?;
                let beta = beta.ok_or_else(|| {
                    Error::InvalidArgument("--beta is required unless --m auto".into())
                })?;
                match init {
                    Some(path) => {
                        let p = io::read_partition(&path)?;
                        if p.m() != k {
                            return Err(Error::DimensionMismatch {
                                what: "init partition columns vs --m",
                                expected: k,
                                found: p.m(),
                            });
                        }
                        (p, beta)
                    }
                    None => (anneal(&model, &gamma, k, beta, &sweep_cfg)?.final_partition, beta),
                }
            };
            let cfg = SolverConfig {
                beta,
                variant,
                seed,
                max_iters: sweep_cfg.solver.max_iters,
                ..SolverConfig::default()
            };
            let report = solver.solve(&start, &cfg)?;
            io::write_solve_report(&output_dir, &report, extra)
        }
        Command::Sweep {
            input,
            beta_max,
            seed,
            output_dir,
        } => {
            let model = io::read_chain(&input)?;
            let gamma = stationary(&model)?;
            let cfg = SweepConfig {
                beta_max,
                seed,
                ..SweepConfig::default()
            };
            io::write_sweep(&output_dir, &sweep(&model, &gamma, &cfg)?)
        }
        Command::Oracle {
            input,
            m,
            limit,
            output_dir,
        } => {
            let model = io::read_chain(&input)?;
            let gamma = stationary(&model)?;
            let best = best_binary(&model, &gamma, m)?;
            let ranking = rank_partitions(&model, &gamma, m, limit)?;
            io::write_oracle(&output_dir, &model, &best, &ranking)
        }
        Command::NcdScaling {
            blocks,
            epsilons,
            seeds,
            seed,
            output_dir,
        } => {
            let seeds: Vec<u64> = (seed..seed + seeds).collect();
            let report = stationary_error_experiment(&blocks, &epsilons, &seeds)?;
            io::write_scaling(&output_dir, &report)
        }
    }
}

/// One-line JSON error record.
pub fn error_line(e: &Error) -> String {
    json!({"code": e.code(), "message": e.to_string()}).to_string()
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                print!("{e}");
                return 0;
            }
            let err = Error::InvalidArgument(e.to_string().lines().next().unwrap_or("").into());
            eprintln!("{}", error_line(&err));
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.exit_code()
        }
    }
}
