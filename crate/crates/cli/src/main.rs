use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sparsest_core::generate::{generate, Family};
use sparsest_core::instance;
use sparsest_core::pipeline::{self, audit_gram, run_full, RunOptions};
use sparsest_core::{DMatrix, Error, SolverOptions, WeightedGraphPair};

const EXIT_USAGE: u8 = 5;

/// Approximate non-uniform sparsest cut via a semidefinite relaxation.
#[derive(Parser)]
#[command(name = "sparsest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, round and audit one instance, then print or write the JSON report.
    Run {
        file: PathBuf,
        /// Enumerate cuts exactly when the instance has at most this many vertices.
        #[arg(long, default_value_t = 16)]
        oracle_max: usize,
        #[arg(long, default_value_t = 1e-6)]
        feas_tol: f64,
        #[arg(long, default_value_t = 1e-4)]
        obj_tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_outer: usize,
        /// Triangle inequalities added per separation round (default 10 n).
        #[arg(long)]
        sep_batch: Option<usize>,
        #[arg(long, value_name = "OUT.json")]
        report: Option<PathBuf>,
        /// Write the solution Gram matrix, one row per line.
        #[arg(long, value_name = "OUT.txt")]
        dump_gram: Option<PathBuf>,
    },
    /// Write a deterministic random instance.
    Generate {
        family: String,
        n: usize,
        seed: u64,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Re-run the property audits on a Gram matrix written by `run --dump-gram`.
    Audit { gram: PathBuf, instance: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: pipeline::exit_code(&e) as u8,
            message: e.to_string(),
        }
    }
}

impl From<pipeline::PipelineError> for Failure {
    fn from(e: pipeline::PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        message: format!("{}: {e}", path.display()),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_failure(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn load_instance(path: &Path) -> Result<WeightedGraphPair, Failure> {
    instance::parse(&read(path)?).map_err(|e| Failure {
        code: pipeline::exit_code(&e) as u8,
        message: format!("{}: {e}", path.display()),
    })
}

fn format_gram(gram: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..gram.nrows() {
        let row: Vec<String> = (0..gram.ncols()).map(|c| format!("{:e}", gram[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn parse_gram(text: &str) -> Result<DMatrix<f64>, Error> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse {
                line: idx + 1,
                message: format!("bad Gram entry: {e}"),
            })?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line: idx + 1,
                message: "Gram entries must be finite".into(),
            });
        }
        if rows.first().is_some_and(|first| first.len() != row.len()) {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {} entries, found {}", rows[0].len(), row.len()),
            });
        }
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows[0].len() != n {
        return Err(Error::Input(format!(
            "Gram matrix must be square, got {n} rows of {} entries",
            rows.first().map_or(0, Vec::len)
        )));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run {
            file,
            oracle_max,
            feas_tol,
            obj_tol,
            max_outer,
            sep_batch,
            report,
            dump_gram,
        } => {
            let g = load_instance(&file)?;
            let opts = RunOptions {
                solver: SolverOptions {
                    feas_tol,
                    obj_tol,
                    max_outer,
                    sep_batch,
                    ..SolverOptions::default()
                },
                oracle_max,
            };
            let out = run_full(&g, &opts)?;
            if let Some(path) = dump_gram {
                write(&path, &format_gram(&out.gram))?;
            }
            let json = out.report.to_json();
            match report {
                Some(path) => {
                    write(&path, &(json + "\n"))?;
                    let r = &out.report;
                    println!("phi_sdp  {}", r.phi_sdp);
                    println!("phi_alg  {}", r.phi_alg);
                    if let Some(star) = r.phi_star {
                        println!("phi_star {star}");
                    }
                }
                None => println!("{json}"),
            }
            Ok(())
        }
        Command::Generate {
            family,
            n,
            seed,
            output,
        } => {
            let family: Family = family.parse()?;
            let text = instance::write(&generate(family, n, seed)?);
            match output {
                Some(path) => write(&path, &text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Audit { gram, instance } => {
            let g = load_instance(&instance)?;
            let matrix = parse_gram(&read(&gram)?).map_err(|e| Failure {
                code: pipeline::exit_code(&e) as u8,
                message: format!("{}: {e}", gram.display()),
            })?;
            let audit = audit_gram(&g, &matrix)?;
            println!("{}", serde_json::to_string_pretty(&audit).expect("audit serializes"));
            if audit.failures.is_empty() {
                Ok(())
            } else {
                Err(Failure {
                    code: 4,
                    message: format!("audits failed: {}", audit.failures.join("; ")),
                })
            }
        }
    }
}
