//! File formats.
//!
//! Matrices are UTF-8 CSV with a one-line size header followed by
//! comma-separated rows; numbers use the shortest representation that
//! parses back to the same `f64`. Chains also have a JSON form
//! `{"n": .., "pi": [[..]]}`. Partition assignment rows are one-based.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::{StationaryDistribution, TransitionModel};
use crate::error::{Error, Result};
use crate::joint::fingerprint;
use crate::ncd::ScalingReport;
use crate::oracle::{OracleResult, RankedPartition};
use crate::partition::{BinaryPartition, ProbabilisticPartition};
use crate::schedule::SweepReport;
use crate::solver::SolveReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

/// Shortest round-trip decimal form.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| Error::Parse {
        line,
        message: format!("{:?}: {e}", s.trim()),
    })
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| Error::Parse {
        line,
        message: format!("{:?}: {e}", s.trim()),
    })
}

fn row_string<I: IntoIterator<Item = f64>>(values: I) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

/// Header keys and values of a line such as `n=3,m=2`.
fn parse_header(line: &str) -> Result<Vec<(String, usize)>> {
    line.trim()
        .split(',')
        .map(|kv| {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected key=value header, found {:?}", line.trim()),
            })?;
            Ok((k.trim().to_string(), parse_usize(v, 1)?))
        })
        .collect()
}

fn header_value(header: &[(String, usize)], key: &str) -> Result<usize> {
    header
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("header lacks {key}="),
        })
}

/// Nonempty body lines with their one-based line numbers.
fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_rows(text: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows, cols);
    let mut count = 0;
    for (line, l) in body_lines(text) {
        if count == rows {
            return Err(Error::Parse {
                line,
                message: format!("more than {rows} rows"),
            });
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != cols {
            return Err(Error::Parse {
                line,
                message: format!("expected {cols} values, found {}", fields.len()),
            });
        }
        for (j, f) in fields.iter().enumerate() {
            m[(count, j)] = parse_f64(f, line)?;
        }
        count += 1;
    }
    if count != rows {
        return Err(Error::Parse {
            line: count + 1,
            message: format!("expected {rows} rows, found {count}"),
        });
    }
    Ok(m)
}

fn matrix_body(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        out.push_str(&row_string(m.row(i).iter().copied()));
        out.push('\n');
    }
    out
}

/// Square matrix in chain layout: `n=<n>` and `n` rows.
pub fn square_to_csv(m: &DMatrix<f64>) -> String {
    format!("n={}\n{}", m.nrows(), matrix_body(m))
}

/// Rectangular matrix: `rows=<r>,cols=<c>` and `r` rows.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    format!("rows={},cols={}\n{}", m.nrows(), m.ncols(), matrix_body(m))
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let header = parse_header(first_line(text)?)?;
    let rows = header_value(&header, "rows")?;
    let cols = header_value(&header, "cols")?;
    parse_rows(text, rows, cols)
}

fn first_line(text: &str) -> Result<&str> {
    text.lines().next().ok_or(Error::Parse {
        line: 1,
        message: "empty input".into(),
    })
}

pub fn chain_to_csv(model: &TransitionModel) -> String {
    square_to_csv(model.matrix())
}

/// Reads a chain in CSV layout and checks that it is ergodic.
pub fn parse_chain_csv(text: &str) -> Result<TransitionModel> {
    TransitionModel::ergodic(square_from_csv(text)?)
}

fn square_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let header = parse_header(first_line(text)?)?;
    let n = header_value(&header, "n")?;
    parse_rows(text, n, n)
}

#[derive(Serialize, Deserialize)]
struct ChainJson {
    n: usize,
    pi: Vec<Vec<f64>>,
}

pub fn chain_to_json(model: &TransitionModel) -> Result<String> {
    let m = model.matrix();
    let doc = ChainJson {
        n: model.n(),
        pi: (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn parse_chain_json(text: &str) -> Result<TransitionModel> {
    TransitionModel::ergodic(square_from_json(text)?)
}

fn square_from_json(text: &str) -> Result<DMatrix<f64>> {
    let doc: ChainJson = serde_json::from_str(text)?;
    if doc.pi.len() != doc.n {
        return Err(Error::DimensionMismatch {
            what: "chain rows vs n",
            expected: doc.n,
            found: doc.pi.len(),
        });
    }
    for (i, row) in doc.pi.iter().enumerate() {
        if row.len() != doc.n {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("row {i} has {} values, expected {}", row.len(), doc.n),
            });
        }
    }
    Ok(DMatrix::from_fn(doc.n, doc.n, |i, j| doc.pi[i][j]))
}

/// Parses either chain layout without any stochastic or ergodic check.
pub fn parse_matrix_unchecked(text: &str) -> Result<DMatrix<f64>> {
    if text.trim_start().starts_with('{') {
        square_from_json(text)
    } else {
        square_from_csv(text)
    }
}

/// Parses either layout, choosing JSON when the text starts with `{`.
pub fn parse_chain(text: &str) -> Result<TransitionModel> {
    TransitionModel::ergodic(parse_matrix_unchecked(text)?)
}

pub fn read_chain(path: &Path) -> Result<TransitionModel> {
    parse_chain(&fs::read_to_string(path)?)
}

pub fn write_chain(path: &Path, model: &TransitionModel, format: Format) -> Result<()> {
    let text = match format {
        Format::Csv => chain_to_csv(model),
        Format::Json => chain_to_json(model)? + "\n",
    };
    fs::write(path, text)?;
    Ok(())
}

/// `n=<len>` and a single row.
pub fn vector_to_csv(v: &[f64]) -> String {
    format!("n={}\n{}\n", v.len(), row_string(v.iter().copied()))
}

pub fn parse_vector_csv(text: &str) -> Result<Vec<f64>> {
    let header = parse_header(first_line(text)?)?;
    let n = header_value(&header, "n")?;
    Ok(parse_rows(text, 1, n)?.iter().copied().collect())
}

pub fn gamma_to_csv(gamma: &StationaryDistribution) -> String {
    vector_to_csv(gamma.as_slice())
}

pub fn parse_gamma_csv(text: &str) -> Result<StationaryDistribution> {
    StationaryDistribution::new(parse_vector_csv(text)?)
}

/// `n=<n>,m=<m>` and the `n x m` matrix.
pub fn partition_to_csv(part: &ProbabilisticPartition) -> String {
    format!("n={},m={}\n{}", part.n(), part.m(), matrix_body(part.matrix()))
}

/// `n=<n>,m=<m>` and one row of one-based group labels.
pub fn assignment_to_csv(part: &BinaryPartition) -> String {
    let labels: Vec<String> = part
        .assignment()
        .iter()
        .map(|g| (g + 1).to_string())
        .collect();
    format!("n={},m={}\n{}\n", part.n(), part.m(), labels.join(","))
}

/// Reads a partition in matrix layout, or in assignment-row layout when
/// the body is a single row of `n` labels.
pub fn parse_partition_csv(text: &str) -> Result<ProbabilisticPartition> {
    let header = parse_header(first_line(text)?)?;
    let n = header_value(&header, "n")?;
    let m = header_value(&header, "m")?;
    let body: Vec<(usize, &str)> = body_lines(text).collect();
    if body.len() == 1 && n > 1 {
        let (line, l) = body[0];
        let labels = l
            .split(',')
            .map(|f| {
                let g = parse_usize(f, line)?;
                if g == 0 || g > m {
                    return Err(Error::Parse {
                        line,
                        message: format!("label {g} outside 1..={m}"),
                    });
                }
                Ok(g - 1)
            })
            .collect::<Result<Vec<usize>>>()?;
        if labels.len() != n {
            return Err(Error::Parse {
                line,
                message: format!("expected {n} labels, found {}", labels.len()),
            });
        }
        return Ok(BinaryPartition::new(labels, m)?.to_probabilistic());
    }
    ProbabilisticPartition::new(parse_rows(text, n, m)?)
}

pub fn read_partition(path: &Path) -> Result<ProbabilisticPartition> {
    parse_partition_csv(&fs::read_to_string(path)?)
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    expected_distortion: f64,
    mutual_information: f64,
    free_energy: f64,
    cross_entropy: Option<f64>,
}

/// `iter,expected_distortion,mutual_information,free_energy,cross_entropy`.
pub fn trace_to_csv(report: &SolveReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for t in &report.trace {
        w.serialize(TraceRow {
            iter: t.iter,
            expected_distortion: t.energy.expected_distortion,
            mutual_information: t.energy.mutual_information,
            free_energy: t.energy.free_energy,
            cross_entropy: t.cross_entropy,
        })?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[derive(Serialize)]
struct SolveMeta<'a> {
    beta: f64,
    variant: String,
    seed: u64,
    iterations: usize,
    stalled: bool,
    m: usize,
    dropped_groups: &'a [usize],
    expected_distortion: f64,
    mutual_information: f64,
    mutual_information_bits: f64,
    free_energy: f64,
    chain: &'a Option<String>,
    partition: &'a str,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    extra: serde_json::Map<String, serde_json::Value>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}

/// Writes `psi.csv`, `alpha.csv`, `theta.csv`, `phi.csv`, `trace.csv` and
/// `meta.json` into `dir`. `extra` entries are merged into `meta.json`.
pub fn write_solve_report(
    dir: &Path,
    report: &SolveReport,
    extra: serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    create_dir(dir)?;
    fs::write(dir.join("psi.csv"), partition_to_csv(&report.final_partition))?;
    fs::write(dir.join("alpha.csv"), vector_to_csv(report.final_alpha.as_slice()))?;
    fs::write(dir.join("theta.csv"), matrix_to_csv(report.final_theta.matrix()))?;
    fs::write(dir.join("phi.csv"), square_to_csv(report.final_phi.matrix()))?;
    fs::write(dir.join("trace.csv"), trace_to_csv(report)?)?;
    let e = report.final_energy();
    let meta = SolveMeta {
        beta: report.config.beta,
        variant: report.config.variant.to_string(),
        seed: report.config.seed,
        iterations: report.iterations,
        stalled: report.stalled,
        m: report.m(),
        dropped_groups: &report.dropped_groups,
        expected_distortion: e.expected_distortion,
        mutual_information: e.mutual_information,
        mutual_information_bits: e.mutual_information_bits(),
        free_energy: e.free_energy,
        chain: &report.final_phi.provenance.chain,
        partition: &report.final_phi.provenance.partition,
        extra,
    };
    write_json(&dir.join("meta.json"), &meta)
}

/// Rows of `sweep.csv`.
pub fn sweep_to_csv(report: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in &report.entries {
        w.serialize(e)?;
    }
    into_string(w)
}

#[derive(Serialize)]
struct PlateauRow {
    beta_lo: f64,
    beta_hi: Option<f64>,
    m: usize,
    anchor_beta: f64,
    hardened: Vec<usize>,
}

/// Writes `sweep.csv`, `criticals.json`, `plateaus.json` and, when present,
/// `corrected.json`.
pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    create_dir(dir)?;
    fs::write(dir.join("sweep.csv"), sweep_to_csv(report)?)?;
    write_json(&dir.join("criticals.json"), &report.criticals)?;
    let plateaus: Vec<PlateauRow> = report
        .plateaus
        .iter()
        .map(|p| PlateauRow {
            beta_lo: p.beta_lo,
            beta_hi: p.beta_hi.is_finite().then_some(p.beta_hi),
            m: p.m,
            anchor_beta: p.anchor_beta,
            hardened: crate::partition::harden(&p.report.final_partition)
                .assignment()
                .iter()
                .map(|g| g + 1)
                .collect(),
        })
        .collect();
    write_json(&dir.join("plateaus.json"), &plateaus)?;
    if let Some(c) = &report.corrected {
        write_json(&dir.join("corrected.json"), c)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RankingRow {
    rank: usize,
    distortion: f64,
    assignment: String,
}

/// `rank,distortion,assignment` with space-separated one-based labels.
pub fn ranking_to_csv(ranking: &[RankedPartition]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (k, r) in ranking.iter().enumerate() {
        w.serialize(RankingRow {
            rank: k + 1,
            distortion: r.distortion,
            assignment: r
                .assignment
                .iter()
                .map(|g| (g + 1).to_string())
                .collect::<Vec<_>>()
                .join(" "),
        })?;
    }
    into_string(w)
}

#[derive(Serialize)]
struct OracleMeta {
    m: usize,
    distortion: f64,
    candidates: u128,
    chain: String,
}

/// Writes `best_partition.csv` (assignment row), `ranking.csv` and
/// `oracle.json`.
pub fn write_oracle(
    dir: &Path,
    model: &TransitionModel,
    best: &OracleResult,
    ranking: &[RankedPartition],
) -> Result<()> {
    create_dir(dir)?;
    fs::write(dir.join("best_partition.csv"), assignment_to_csv(&best.partition))?;
    fs::write(dir.join("ranking.csv"), ranking_to_csv(ranking)?)?;
    write_json(
        &dir.join("oracle.json"),
        &OracleMeta {
            m: best.partition.m(),
            distortion: best.distortion,
            candidates: best.candidates,
            chain: fingerprint(model.matrix()),
        },
    )
}

/// Writes `ncd_scaling.csv` and `ncd_fit.json`.
pub fn write_scaling(dir: &Path, report: &ScalingReport) -> Result<()> {
    create_dir(dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in &report.points {
        w.serialize(p)?;
    }
    fs::write(dir.join("ncd_scaling.csv"), into_string(w)?)?;
    write_json(&dir.join("ncd_fit.json"), &report.fit)
}
