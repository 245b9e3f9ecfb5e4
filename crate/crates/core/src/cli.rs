//! Command-line front-end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 solver or generation failure,
//! 4 nonpositive mean in `msharpe`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::error::Error;
use crate::fcfs::analyze;
use crate::market::{generate_random_market, load_market, write_market, GeneratorParams};
use crate::prob;
use crate::report::{leaf_table, leaf_table_header, round12, truncation_table, AnalysisReport};
use crate::sample::{load_sample, ColumnSpec};
use crate::selftest;
use crate::sharpe::monotone_sharpe;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_NONPOSITIVE_MEAN: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "mmv",
    version,
    about = "Monotone mean-variance analysis of scenario-tree markets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Analyze market files: optimal values, densities, Sharpe ratios and free cash-flow streams.
    Analyze {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Worker threads for several input files.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Sharpe and monotone Sharpe ratio of a sample or distribution CSV.
    Msharpe {
        csv: PathBuf,
        /// Value column, optionally followed by a probability column (names or 0-based indices).
        #[arg(long)]
        col: Option<ColumnSpec>,
        /// Also write the table K, SR(X ∧ K) to this CSV file.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write a random viable market, deterministic in the seed.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        periods: usize,
        #[arg(long, default_value_t = 3)]
        branching: usize,
        #[arg(long, default_value_t = 1)]
        assets: usize,
        #[arg(long, default_value_t = 0.2)]
        spread: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the built-in regression battery.
    Selftest,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_)
        | Error::Validation { .. }
        | Error::DimensionMismatch { .. }
        | Error::Domain(_)
        | Error::NoDownside
        | Error::NotViable
        | Error::Io(_) => EXIT_INPUT,
        Error::NonpositiveMean { .. } => EXIT_NONPOSITIVE_MEAN,
        Error::SolverFailure(_)
        | Error::IterationLimit(_)
        | Error::GenerationFailure(_)
        | Error::InconsistentEquivalence(_)
        | Error::CertificateInvalid(_) => EXIT_SOLVER,
    }
}

fn fail(context: &Path, err: &Error) -> i32 {
    eprintln!("error: {}: {err}", context.display());
    exit_code(err)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

type Analyzed = (AnalysisReport, Vec<Vec<String>>);

fn analyze_file(path: &Path, with_source: bool) -> Result<Analyzed, Error> {
    let tree = load_market(path)?;
    let report = analyze(&tree)?;
    let source = with_source.then(|| path.display().to_string());
    Ok((
        AnalysisReport::new(&tree, &report),
        leaf_table(&tree, &report, source.as_deref()),
    ))
}

pub fn cmd_analyze(files: &[PathBuf], out: Option<&Path>, format: Format, jobs: usize) -> i32 {
    let many = files.len() > 1;
    let run = || -> Vec<Result<Analyzed, Error>> {
        files.par_iter().map(|f| analyze_file(f, many)).collect()
    };
    let results = match rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
    {
        Ok(pool) => pool.install(run),
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_SOLVER;
        }
    };

    let mut analyzed = Vec::with_capacity(results.len());
    for (path, result) in files.iter().zip(results) {
        match result {
            Ok(a) => analyzed.push(a),
            Err(e) => return fail(path, &e),
        }
    }

    let text = match format {
        Format::Json => {
            let reports: Vec<&AnalysisReport> = analyzed.iter().map(|(r, _)| r).collect();
            let mut s = if many {
                serde_json::to_string_pretty(&reports).expect("reports serialize")
            } else {
                reports[0].to_json()
            };
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut rows = vec![leaf_table_header(many)
                .into_iter()
                .map(String::from)
                .collect::<Vec<_>>()];
            rows.extend(analyzed.into_iter().flat_map(|(_, t)| t));
            for row in rows {
                if let Err(e) = w.write_record(&row) {
                    eprintln!("error: {e}");
                    return EXIT_SOLVER;
                }
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
        }
    };
    match emit(out, &text) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(out.unwrap_or(Path::new("<stdout>")), &e),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| round12(x).to_string())
        .unwrap_or_else(|| "none".into())
}

pub fn cmd_msharpe(csv_path: &Path, col: Option<&ColumnSpec>, table: Option<&Path>) -> i32 {
    let x = match load_sample(csv_path, col) {
        Ok(x) => x,
        Err(e) => return fail(csv_path, &e),
    };
    let sr = prob::sharpe_ratio(&x);
    let result = match monotone_sharpe(&x) {
        Ok(r) => r,
        Err(e @ Error::NonpositiveMean { .. }) => {
            eprintln!(
                "error: {}: {e}. A payoff with nonpositive mean and some downside admits no positive \
                 monotone Sharpe ratio; scaling it down to zero is optimal.",
                csv_path.display()
            );
            return EXIT_NONPOSITIVE_MEAN;
        }
        Err(e) => return fail(csv_path, &e),
    };
    let fmt_ext = |v: prob::ExtendedReal| match v.finite() {
        Some(f) => round12(f).to_string(),
        None => v.to_string(),
    };
    println!("SR {}", fmt_ext(sr));
    println!("SR_m {}", fmt_ext(result.sr_m));
    println!("alpha_hat {}", fmt_opt(result.alpha_hat));
    println!("truncation {}", fmt_opt(result.truncation_level));
    println!("case {}", result.case.as_str());

    if let Some(path) = table {
        let write = || -> Result<(), Error> {
            let mut w = csv::Writer::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
            w.write_record(["K", "sr"])
                .map_err(|e| Error::Parse(e.to_string()))?;
            for (k, s) in truncation_table(&x, 101) {
                w.write_record([round12(k).to_string(), round12(s).to_string()])
                    .map_err(|e| Error::Parse(e.to_string()))?;
            }
            w.flush()?;
            Ok(())
        };
        if let Err(e) = write() {
            return fail(path, &e);
        }
    }
    EXIT_OK
}

pub fn cmd_generate(seed: u64, params: &GeneratorParams, out: &Path) -> i32 {
    match generate_random_market(seed, params).and_then(|t| write_market(&t, out)) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(out, &e),
    }
}

pub fn cmd_selftest() -> i32 {
    let outcomes = selftest::run();
    let mut ok = true;
    for c in &outcomes {
        if c.passed {
            println!("PASS {}", c.name);
        } else {
            ok = false;
            println!("FAIL {}: {}", c.name, c.detail);
        }
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_SOLVER
    }
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Analyze {
            files,
            out,
            format,
            jobs,
        } => cmd_analyze(&files, out.as_deref(), format, jobs),
        Command::Msharpe { csv, col, table } => cmd_msharpe(&csv, col.as_ref(), table.as_deref()),
        Command::Generate {
            seed,
            periods,
            branching,
            assets,
            spread,
            out,
        } => cmd_generate(
            seed,
            &GeneratorParams {
                periods,
                branching,
                assets,
                spread,
            },
            &out,
        ),
        Command::Selftest => cmd_selftest(),
    }
}
