use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use susylat::car::Site;
use susylat::dynamics::{lie_series_evolve, EvolveOptions};
use susylat::fock::export::write_matrix_market;
use susylat::fock::{spectral_report, BoundaryMode, FockRepresentation, SusyOperators};
use susylat::model::{parse_model, parse_polynomial, parse_region, CheckName, Model};
use susylat::suite::{run_check, run_suite, Status};
use susylat::supercharge::Superderivation;
use susylat::SusyError;

#[derive(Parser)]
#[command(name = "susylat", version, about = "Checks for supersymmetric fermion lattice models")]
struct Cli {
    /// Write JSON output to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for concurrent checks.
    #[arg(long, global = true, env = "SUSYLAT_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArg {
    /// Model file (TOML).
    model: PathBuf,
}

#[derive(Args)]
struct RegionArg {
    /// Box region, `lo..hi` per axis separated by commas.
    #[arg(long, allow_hyphen_values = true)]
    region: String,
    #[arg(long, value_enum, default_value = "open")]
    boundary: BoundaryArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BoundaryArg {
    Open,
    Crossing,
}

impl From<BoundaryArg> for BoundaryMode {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Open => BoundaryMode::Open,
            BoundaryArg::Crossing => BoundaryMode::Crossing,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a model file; prints the canonical form.
    Validate(ModelArg),
    /// Exact nilpotency check over two periods.
    Nilpotent(ModelArg),
    /// Charges meeting a region and the local charge.
    Charges {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        region: RegionArg,
    },
    /// Finite-volume Hamiltonian; optionally exported in Matrix Market format.
    Hamiltonian {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        region: RegionArg,
        #[arg(long)]
        export_mtx: Option<PathBuf>,
    },
    /// Spectrum, kernel dimensions, Witten index and doublets.
    Spectrum {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        region: RegionArg,
    },
    /// Certified Lie-series evolution of an observable.
    Evolve {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, allow_hyphen_values = true)]
        region: String,
        /// Time, as a number or a multiple of the radius such as `0.5t0`.
        #[arg(long, allow_hyphen_values = true)]
        time: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Observable polynomial; defaults to the annihilator at the origin.
        #[arg(long)]
        observable: Option<String>,
        /// Fixed truncation order instead of the certified one.
        #[arg(long)]
        order: Option<usize>,
    },
    /// Fock and anti-Fock state checks on the model's chains.
    States {
        #[command(flatten)]
        model: ModelArg,
        /// Chain lengths (overrides the model parameters).
        #[arg(long, value_delimiter = ',')]
        chains: Vec<usize>,
    },
    /// Face and decomposition checks.
    Face {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        decompositions: Option<usize>,
    },
    /// Truncated free-field checks.
    Case2 {
        /// Model file supplying defaults for the parameters.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        cutoff: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        dp: Option<f64>,
        #[arg(long)]
        f: Option<String>,
        #[arg(long)]
        g: Option<String>,
    },
    /// Run the model's suite (or the listed checks).
    Run {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Omit timing fields for byte-identical reports.
        #[arg(long)]
        no_timings: bool,
    },
}

enum Failure {
    Config(String),
    Checks,
}

impl From<SusyError> for Failure {
    fn from(e: SusyError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load(path: &Path) -> Result<Model, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    parse_model(&text).map_err(|e| Failure::Config(format!("{}:{e}", path.display())))
}

fn parse_time(s: &str, t0: f64) -> Result<f64, Failure> {
    let bad = || Failure::Config(format!("invalid time '{s}'"));
    match s.trim().strip_suffix("t0") {
        Some("") => Ok(t0),
        Some(m) => Ok(m.trim_end_matches('*').parse::<f64>().map_err(|_| bad())? * t0),
        None => s.parse().map_err(|_| bad()),
    }
}

fn emit(out: &Option<PathBuf>, v: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(v).expect("json");
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}").map_err(|e| Failure::Config(e.to_string()))
        }
    }
}

fn status_exit(ok: bool) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Checks)
    }
}

fn check(model: &Model, name: CheckName, out: &Option<PathBuf>) -> Result<(), Failure> {
    let (status, details) = run_check(model, name)?;
    emit(out, &json!({ "check": name, "status": status, "details": details }))?;
    status_exit(status.is_ok() && status != Status::Error)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let out = &cli.out;
    match cli.command {
        Command::Validate(m) => {
            let model = load(&m.model)?;
            emit(
                out,
                &json!({
                    "valid": true,
                    "name": model.file.name,
                    "dim": model.file.dim,
                    "period": model.file.period,
                    "range": model.file.range,
                    "patterns": model.file.patterns.len(),
                    "canonical": model.to_toml(),
                }),
            )
        }
        Command::Nilpotent(m) => check(&load(&m.model)?, CheckName::Nilpotent, out),
        Command::Charges { model, region } => {
            let model = load(&model.model)?;
            let psi = &model.assignment;
            let r = parse_region(&region.region, psi.dim())?;
            let charges: Vec<Value> = psi
                .charges_meeting(&r)
                .into_iter()
                .map(|(x, q)| json!({ "region": x.to_string(), "polynomial": q.to_string() }))
                .collect();
            emit(
                out,
                &json!({
                    "region": r.to_string(),
                    "charges": charges,
                    "local_charge": psi.local_charge(&r).to_string(),
                    "inner_charge": psi.inner_charge(&r).to_string(),
                }),
            )
        }
        Command::Hamiltonian { model, region, export_mtx } => {
            let model = load(&model.model)?;
            let r = parse_region(&region.region, model.assignment.dim())?;
            let rep = FockRepresentation::new(r.clone())?;
            let ops = SusyOperators::build(&rep, &model.assignment, region.boundary.into())?;
            if let Some(path) = &export_mtx {
                let file = fs::File::create(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                write_matrix_market(&ops.h, std::io::BufWriter::new(file)).map_err(|e| Failure::Config(e.to_string()))?;
            }
            emit(
                out,
                &json!({
                    "region": r.to_string(),
                    "sites": r.len(),
                    "dim": ops.dim(),
                    "nnz": ops.h.nnz(),
                    "h_norm": ops.h_norm(),
                    "conserves_number": ops.conserves_number(),
                    "export": export_mtx.map(|p| p.display().to_string()),
                }),
            )
        }
        Command::Spectrum { model, region } => {
            let model = load(&model.model)?;
            let r = parse_region(&region.region, model.assignment.dim())?;
            let rep = FockRepresentation::new(r)?;
            let ops = SusyOperators::build(&rep, &model.assignment, region.boundary.into())?;
            emit(out, &serde_json::to_value(spectral_report(&ops)?).expect("json"))
        }
        Command::Evolve { model, region, time, tol, observable, order } => {
            let model = load(&model.model)?;
            let psi = &model.assignment;
            let d = Superderivation::new(psi.clone()).into_nilpotent()?;
            let r = parse_region(&region, psi.dim())?;
            let t = parse_time(&time, d.norm_constants().t0)?;
            let a = match observable {
                Some(text) => parse_polynomial(&text, psi.dim())?.polynomial,
                None => susylat::car::CarPolynomial::annihilate(Site::new(&vec![0; psi.dim()])),
            };
            let opts = EvolveOptions { fixed_order: order, ..EvolveOptions::default() };
            let res = lie_series_evolve(&d, &r, &a, t, tol, opts)?;
            emit(
                out,
                &json!({
                    "t": res.t,
                    "N": res.order,
                    "tail_bound": res.tail_bound,
                    "steps": res.steps,
                    "region": res.region.to_string(),
                    "support": res.support.to_string(),
                    "polynomial": res.polynomial.to_string(),
                }),
            )
        }
        Command::States { model, chains } => {
            let mut model = load(&model.model)?;
            if !chains.is_empty() {
                model.file.parameters.chains = chains;
            }
            check(&model, CheckName::States, out)
        }
        Command::Face { model, decompositions } => {
            let mut model = load(&model.model)?;
            if let Some(n) = decompositions {
                model.file.parameters.decompositions = n;
            }
            check(&model, CheckName::Face, out)
        }
        Command::Case2 { model, modes, cutoff, grid, dp, f, g } => {
            let mut m = match model {
                Some(p) => load(&p)?,
                None => Model::from_assignment("case2", susylat::supercharge::ChargeAssignment::zero(1)),
            };
            let q = &mut m.file.parameters.case2;
            q.modes = modes.unwrap_or(q.modes);
            q.cutoff = cutoff.unwrap_or(q.cutoff);
            q.grid = grid.unwrap_or(q.grid);
            q.dp = dp.unwrap_or(q.dp);
            q.f = f.unwrap_or(q.f.clone());
            q.g = g.unwrap_or(q.g.clone());
            check(&m, CheckName::Case2, out)
        }
        Command::Run { model, checks, seed, no_timings } => {
            let mut model = load(&model.model)?;
            if let Some(s) = seed {
                model.file.parameters.seed = s;
            }
            let names: Vec<CheckName> = if checks.is_empty() {
                model.file.suite.checks.clone()
            } else {
                checks.iter().map(|c| c.parse()).collect::<Result<_, _>>()?
            };
            let report = run_suite(&model, &names);
            let report = if no_timings { report.without_timings() } else { report };
            emit(out, &serde_json::to_value(&report).expect("json"))?;
            status_exit(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Checks) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
