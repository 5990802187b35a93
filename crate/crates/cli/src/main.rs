use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsff_core::bvp1d::{cauchy_gap_profile, eigen_curves, OdeProblem, StepControl, VerifyOptions};
use gsff_core::harness::{
    catalog, catalog_entry, random_scenario, run_spec, write_curves_csv, write_gap_csv,
    write_summary_csv, MaslovSpec, MatrixPathSpec, ScenarioSpec, SuiteEntry, SuiteSummary,
};
use gsff_core::maslov::{maslov_index, maslov_via_crossings};
use gsff_core::specflow::{sf_partition, sf_tracking, FlowComputation};
use gsff_core::{Error, Tolerances};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "gsff", version, about = "Spectral flow, Maslov index and the spectral flow formula on interval ODEs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Relative singular-value threshold for rank decisions.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    /// Relative half-width of the zero band.
    #[arg(long, global = true)]
    tol_zero: Option<f64>,
    /// Initial integrator step.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Output file (a directory for `curves`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSON output (default).
    #[arg(long, global = true, conflicts_with = "csv")]
    json: bool,
    /// CSV output.
    #[arg(long, global = true)]
    csv: bool,
    /// Include wall-clock timings in reports (makes output nondeterministic).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectral flow of a matrix path by the partition algorithm.
    Sf {
        #[arg(long)]
        matrix_path: PathBuf,
    },
    /// Maslov index of a Lagrangian pair.
    Maslov {
        #[arg(long)]
        pair: PathBuf,
    },
    /// Spectral flow by eigenvalue tracking, for a matrix path or a scenario.
    Oracle {
        #[arg(long, conflicts_with = "scenario", required_unless_present = "scenario")]
        matrix_path: Option<PathBuf>,
        /// Scenario file or catalog label.
        #[arg(long)]
        scenario: Option<String>,
        /// Initial tracking grid.
        #[arg(long, default_value_t = 64)]
        grid: usize,
    },
    /// Both sides of the spectral flow formula for one scenario.
    Verify {
        /// Scenario file or catalog label.
        #[arg(long)]
        scenario: String,
    },
    /// Verify the catalog and/or a range of random scenarios.
    Suite {
        /// Inclusive seed range `a..b`.
        #[arg(long)]
        seeds: Option<String>,
        /// Boundary dimension of random scenarios.
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Include the built-in catalog.
        #[arg(long)]
        catalog: bool,
        /// Concurrent scenarios (defaults to the number of CPUs).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Eigenvalue curves and the Cauchy-data gap profile as CSV files.
    Curves {
        /// Scenario file or catalog label.
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

/// Process exit codes.
mod code {
    pub const MISMATCH: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const NUMERICAL: u8 = 3;
}

fn error_code(e: &Error) -> u8 {
    if e.is_numerical() {
        code::NUMERICAL
    } else {
        code::USAGE
    }
}

impl Global {
    fn tolerances(&self) -> Result<Tolerances, Error> {
        let mut t = Tolerances::default();
        if let Some(r) = self.tol_rank {
            t.rank_rel = positive("--tol-rank", r)?;
        }
        if let Some(z) = self.tol_zero {
            t.zero_rel = positive("--tol-zero", z)?;
        }
        Ok(t)
    }

    fn step_control(&self) -> Result<StepControl, Error> {
        let mut s = StepControl::default();
        if let Some(h) = self.step {
            s.initial_step = positive("--step", h)?;
        }
        Ok(s)
    }

    fn verify_options(&self) -> Result<VerifyOptions, Error> {
        Ok(VerifyOptions {
            timings: self.timings,
            step: self.step_control()?,
            ..Default::default()
        })
    }

    fn emit(&self, json: String, csv: impl FnOnce(&mut Vec<u8>) -> Result<(), Error>) -> Result<(), Error> {
        let mut bytes = Vec::new();
        if self.csv {
            csv(&mut bytes)?;
        } else {
            bytes.extend_from_slice(json.as_bytes());
            bytes.push(b'\n');
        }
        match &self.out {
            Some(p) => fs::write(p, bytes).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
            None => std::io::stdout().write_all(&bytes).map_err(Error::from),
        }
    }
}

fn positive(flag: &str, x: f64) -> Result<f64, Error> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(Error::InvalidInput(format!("{flag} must be a positive number, got {x}")))
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// A scenario file, or a catalog label when no such file exists.
fn load_scenario(arg: &str) -> Result<ScenarioSpec, Error> {
    let p = Path::new(arg);
    if p.exists() {
        return ScenarioSpec::from_file(p);
    }
    catalog_entry(arg).ok_or_else(|| {
        Error::InvalidInput(format!("`{arg}` is neither a scenario file nor a catalog label"))
    })
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    let bad = || Error::InvalidInput(format!("--seeds expects `a..b`, got `{text}`"));
    let (a, b) = text.split_once("..").ok_or_else(bad)?;
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes")
}

fn key_value_csv(out: &mut Vec<u8>, rows: &[(&str, String)]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(rows.iter().map(|r| r.0))?;
    w.write_record(rows.iter().map(|r| r.1.as_str()))?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SfOutput {
    spectral_flow: i64,
    computation: FlowComputation,
}

#[derive(Serialize)]
struct MaslovOutput {
    maslov_partition: i64,
    /// `None` when some crossing is not regular.
    maslov_crossings: Option<i64>,
    crossings_note: Option<String>,
    equal: bool,
}

#[derive(Serialize)]
struct OracleOutput {
    sf_oracle: i64,
}

#[derive(Serialize)]
struct CurvesOutput {
    curves: PathBuf,
    gap: PathBuf,
    max_gap_increment: f64,
}

fn run(cli: Cli) -> Result<u8, Error> {
    let g = &cli.global;
    let tol = g.tolerances()?;
    match cli.command {
        Command::Sf { matrix_path } => {
            let path = MatrixPathSpec::from_json(&read(&matrix_path)?)
                .and_then(|s| s.build())
                .map_err(|e| with_path(&matrix_path, e))?;
            let (total, computation) = sf_partition(&path, &tol)?;
            let out = SfOutput {
                spectral_flow: total,
                computation,
            };
            g.emit(to_json(&out), |w| key_value_csv(w, &[("spectral_flow", total.to_string())]))?;
            Ok(0)
        }
        Command::Maslov { pair } => {
            let (family, lambda, mu) = MaslovSpec::from_json(&read(&pair)?)
                .and_then(|s| s.build(&tol))
                .map_err(|e| with_path(&pair, e))?;
            let (mas, _) = maslov_index(&lambda, &mu, &family, &tol)?;
            let (via, note) = match maslov_via_crossings(&lambda, &mu, &family, &tol) {
                Ok(c) => (Some(c.total), None),
                Err(e @ Error::NonRegularCrossing { .. }) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let out = MaslovOutput {
                maslov_partition: mas,
                maslov_crossings: via,
                crossings_note: note,
                equal: via.map_or(true, |v| v == mas),
            };
            let opt = via.map(|v| v.to_string()).unwrap_or_default();
            g.emit(to_json(&out), |w| {
                key_value_csv(w, &[("maslov_partition", mas.to_string()), ("maslov_crossings", opt)])
            })?;
            Ok(if out.equal { 0 } else { code::MISMATCH })
        }
        Command::Oracle {
            matrix_path,
            scenario,
            grid,
        } => {
            let grid = grid.max(1);
            let total = if let Some(mp) = matrix_path {
                let path = MatrixPathSpec::from_json(&read(&mp)?)
                    .and_then(|s| s.build())
                    .map_err(|e| with_path(&mp, e))?;
                sf_tracking(&path, grid, &tol)?
            } else {
                let spec = load_scenario(scenario.as_deref().unwrap_or_default())?;
                let sc = spec.build(&tol)?;
                OdeProblem::new(&sc, &g.step_control()?, &tol)?.sf_oracle(grid)?
            };
            g.emit(to_json(&OracleOutput { sf_oracle: total }), |w| {
                key_value_csv(w, &[("sf_oracle", total.to_string())])
            })?;
            Ok(0)
        }
        Command::Verify { scenario } => {
            let spec = load_scenario(&scenario)?;
            spec.build(&tol)?;
            let entry = run_spec(&spec, &g.verify_options()?, &tol);
            emit_entries(g, vec![entry], true)
        }
        Command::Suite {
            seeds,
            m,
            catalog: with_catalog,
            jobs,
        } => {
            if m == 0 {
                return Err(Error::InvalidInput("--m must be positive".into()));
            }
            let mut specs = if with_catalog { catalog() } else { Vec::new() };
            if let Some(text) = &seeds {
                specs.extend(parse_seeds(text)?.into_iter().map(|s| random_scenario(s, m)));
            }
            if specs.is_empty() {
                return Err(Error::InvalidInput("nothing to run; pass --seeds and/or --catalog".into()));
            }
            let opts = g.verify_options()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(|e| Error::InvalidInput(format!("--jobs: {e}")))?;
            let entries = pool.install(|| specs.par_iter().map(|s| run_spec(s, &opts, &tol)).collect());
            emit_entries(g, entries, false)
        }
        Command::Curves { scenario, samples } => {
            let spec = load_scenario(&scenario)?;
            let sc = spec.build(&tol)?;
            let problem = OdeProblem::new(&sc, &g.step_control()?, &tol)?;
            let n = samples.max(1);
            let curves = eigen_curves(&problem, n)?;
            let gap = cauchy_gap_profile(&problem.cauchy_path(), n);
            let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("."));
            fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
            let label = spec.label();
            let out = CurvesOutput {
                curves: dir.join(format!("{label}_curves.csv")),
                gap: dir.join(format!("{label}_gap.csv")),
                max_gap_increment: gap.max_increment,
            };
            write_curves_csv(&curves, fs::File::create(&out.curves)?)?;
            write_gap_csv(&gap, fs::File::create(&out.gap)?)?;
            println!("{}", to_json(&out));
            Ok(0)
        }
    }
}

/// Writes a single report or a suite summary and picks the exit code.
fn emit_entries(g: &Global, entries: Vec<SuiteEntry>, single: bool) -> Result<u8, Error> {
    let summary = SuiteSummary::new(entries);
    let json = match (&summary.entries[..], single) {
        ([e], true) => match &e.report {
            Some(r) => to_json(r),
            None => to_json(e),
        },
        _ => to_json(&summary),
    };
    g.emit(json, |w| write_summary_csv(&summary, w))?;
    for e in &summary.entries {
        if let Some(msg) = &e.error {
            eprintln!("{}: {msg}", e.label);
        }
    }
    Ok(if summary.any_numerical_failure() {
        code::NUMERICAL
    } else if summary.entries.iter().any(|e| e.error.is_some()) {
        code::USAGE
    } else if summary.all_passed() {
        0
    } else {
        code::MISMATCH
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("gsff: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
