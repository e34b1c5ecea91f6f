//! Command implementations behind the `metzler` binary. Each command
//! returns the text for stdout and the process exit code, so tests can call
//! them directly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use metzler::graph::{build_cycle_graphs, disjoint_cycle_sets, enumerate_simple_cycles, is_cactus};
use metzler::io::{format_matrix_text, parse_matrix, parse_network_spec};
use metzler::sampling::MetzlerSampler;
use metzler::simulate::{check_sum_iss_bound, inf_norm, integrate, ISS_SLACK};
use metzler::stability::sum_gain_analysis;
use metzler::{
    contract_check, expand, nonlinear, AnalysisConfig, Error, InputSignal, Method, MetzlerMatrix, MonotoneNetworkSpec,
    SquareMatrix, System, Verdict, WeightedDigraph,
};

pub const EXIT_HURWITZ: i32 = 0;
pub const EXIT_NOT_HURWITZ: i32 = 1;
pub const EXIT_MARGINAL: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Margin for strict inequalities.
    #[arg(long, global = true, env = "METZLER_TOL", default_value_t = 1e-9)]
    pub tol: f64,
    /// Maximum number of simple cycles to enumerate.
    #[arg(long, global = true, env = "METZLER_CYCLE_CAP", default_value_t = 100_000)]
    pub cycle_cap: usize,
    /// Maximum number of disjoint cycle families to enumerate.
    #[arg(long, global = true, env = "METZLER_FAMILY_CAP", default_value_t = 1_000_000)]
    pub family_cap: usize,
    #[arg(long, global = true, env = "METZLER_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Seed for commands that draw random data.
    #[arg(long, global = true, env = "METZLER_SEED", default_value_t = 0)]
    pub seed: u64,
}

impl GlobalOpts {
    pub fn config(&self) -> Result<AnalysisConfig, Error> {
        let cfg = AnalysisConfig {
            tol: self.tol,
            cycle_cap: self.cycle_cap,
            family_cap: self.family_cap,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Parser)]
#[command(name = "metzler", version, about = "Hurwitz certification of Metzler matrices via cycle gains")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SampleKind {
    Hurwitz,
    Mixed,
    Boundary,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full stability report. Exit 0 Hurwitz, 1 not Hurwitz, 2 marginal, 3 error.
    Analyze { file: PathBuf },
    /// Simple cycles, cycle gains, disjoint families and prefix total gains.
    Cycles { file: PathBuf },
    /// Expanded matrix with the origin of every added node.
    Expand {
        file: PathBuf,
        /// Also write the origin map as JSON to this file.
        #[arg(long)]
        origins: Option<PathBuf>,
    },
    /// Global stability certificate for a monotone network spec.
    /// Exit 0 certified, 1 not certified, 2 marginal, 3 error.
    Certify {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = CertifyMethod::Sum)]
        method: CertifyMethod,
    },
    /// RK4 simulation of a matrix or network spec.
    Simulate {
        file: PathBuf,
        /// Comma-separated initial state; all ones when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,
        #[arg(long, default_value_t = metzler::simulate::DEFAULT_HORIZON)]
        horizon: f64,
        #[arg(long, default_value_t = metzler::simulate::DEFAULT_STEP)]
        step: f64,
        /// `zero`, `const:v1,v2,...`, or a path to an input JSON file.
        #[arg(long, default_value = "zero")]
        input: String,
        /// Write the trajectory CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Random Metzler matrix in text format, drawn with `--seed`.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        density: f64,
        #[arg(long, value_enum, default_value_t = SampleKind::Mixed)]
        kind: SampleKind,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CertifyMethod {
    Sum,
    Max,
}

/// What a command produced: stdout text and an exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

#[derive(Debug)]
pub enum CliError {
    Io(PathBuf, std::io::Error),
    Analysis(Error),
    Usage(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
            CliError::Analysis(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Analysis(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialise");
    s.push('\n');
    s
}

pub fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Hurwitz => EXIT_HURWITZ,
        Verdict::NotHurwitz => EXIT_NOT_HURWITZ,
        Verdict::Marginal => EXIT_MARGINAL,
    }
}

/// Runs a parsed command line; errors become exit code 3 with the message
/// on stderr (returned in `Err`).
pub fn run(cli: &Cli) -> Result<Outcome, String> {
    dispatch(cli).map_err(|e| e.to_string())
}

fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    let g = &cli.global;
    let cfg = g.config()?;
    match &cli.command {
        Command::Analyze { file } => cmd_analyze(&read(file)?, &cfg, g.format),
        Command::Cycles { file } => cmd_cycles(&read(file)?, &cfg, g.format),
        Command::Expand { file, origins } => {
            let (out, origin_json) = cmd_expand(&read(file)?, g.format)?;
            if let Some(path) = origins {
                write(path, &origin_json)?;
            }
            Ok(out)
        }
        Command::Certify { file, method } => {
            let method = match method {
                CertifyMethod::Sum => Method::Sum,
                CertifyMethod::Max => Method::Max,
            };
            cmd_certify(&read(file)?, method, &cfg, g.format)
        }
        Command::Simulate { file, x0, horizon, step, input, csv } => {
            let input = parse_input(input)?;
            let (out, csv_text) = cmd_simulate(&read(file)?, x0.as_deref(), *horizon, *step, &input, g.format)?;
            if let Some(path) = csv {
                write(path, &csv_text)?;
            }
            Ok(out)
        }
        Command::Sample { n, density, kind } => cmd_sample(*n, *density, *kind, g.seed),
    }
}

fn parse_input(spec: &str) -> CliResult<InputSignal> {
    if spec == "zero" {
        return Ok(InputSignal::Zero);
    }
    if let Some(rest) = spec.strip_prefix("const:") {
        let value = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Usage(format!("bad constant input `{rest}`: {e}")))?;
        return Ok(InputSignal::Constant { value });
    }
    let path = Path::new(spec);
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Analysis(Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })
}

pub fn cmd_analyze(input: &str, cfg: &AnalysisConfig, format: Format) -> CliResult<Outcome> {
    let m = parse_matrix(input)?;
    let report = metzler::full_report(&m, cfg)?;
    let stdout = match format {
        Format::Json => to_json(&report),
        Format::Text => {
            let mut s = String::new();
            writeln!(s, "verdict: {}", report.verdict).unwrap();
            writeln!(s, "consistent: {}", report.consistency).unwrap();
            writeln!(s, "spectral abscissa: {:e}", report.oracle.abscissa).unwrap();
            for (name, v) in report.test_verdicts() {
                writeln!(s, "  {name:<16} {v}").unwrap();
            }
            if let Some(sc) = &report.sum_conditions {
                writeln!(s, "cycle gains: {:?}", sc.cycle_gains).unwrap();
                writeln!(s, "sum of cycle gains: {}", sc.gain_sum).unwrap();
                writeln!(s, "prefix total gains: {:?}", sc.prefix_gains).unwrap();
            }
            for d in &report.diagnostics {
                writeln!(s, "note: {d}").unwrap();
            }
            s
        }
    };
    Ok(Outcome { stdout, code: verdict_code(report.verdict) })
}

#[derive(Serialize)]
struct FamilyGroup {
    size: usize,
    /// 1-based cycle indices.
    families: Vec<Vec<usize>>,
}

#[derive(Serialize)]
struct CycleListing {
    n: usize,
    cycles: Vec<metzler::SimpleCycle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cycle_gains: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prefix_gains: Option<Vec<f64>>,
    disjoint_sets: Vec<FamilyGroup>,
    cycle_graph: Vec<(usize, usize)>,
    complement_graph: Vec<(usize, usize)>,
    cactus: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

pub fn cmd_cycles(input: &str, cfg: &AnalysisConfig, format: Format) -> CliResult<Outcome> {
    let m = MetzlerMatrix::new(parse_matrix(input)?)?;
    let cycles = enumerate_simple_cycles(&WeightedDigraph::from_matrix(&m), cfg.cycle_cap)?;
    let sets = disjoint_cycle_sets(&cycles, cfg.family_cap)?;
    let (meet, apart) = build_cycle_graphs(&cycles);
    let one_based = |edges: Vec<(usize, usize)>| edges.into_iter().map(|(a, b)| (a + 1, b + 1)).collect();
    let mut notes = Vec::new();
    let (cycle_gains, prefix_gains) = match sum_gain_analysis(&m, &cycles, cfg) {
        Ok(s) => (Some(s.cycle_gains), Some(s.prefix_gains)),
        Err(e) => {
            notes.push(format!("gains unavailable: {e}"));
            (None, None)
        }
    };
    let listing = CycleListing {
        n: m.dim(),
        disjoint_sets: sets
            .iter()
            .map(|(size, fams)| FamilyGroup {
                size,
                families: fams.iter().map(|f| f.iter().map(|i| i + 1).collect()).collect(),
            })
            .collect(),
        cactus: is_cactus(&cycles),
        cycles,
        cycle_gains,
        prefix_gains,
        cycle_graph: one_based(meet.edges),
        complement_graph: one_based(apart.edges),
        notes,
    };
    let stdout = match format {
        Format::Json => to_json(&listing),
        Format::Text => {
            let mut s = String::new();
            writeln!(s, "{} simple cycles", listing.cycles.len()).unwrap();
            for (k, c) in listing.cycles.iter().enumerate() {
                let gain = listing.cycle_gains.as_ref().map(|g| format!("  gain {}", g[k])).unwrap_or_default();
                writeln!(s, "c{}: {:?}{gain}", k + 1, c.one_based()).unwrap();
            }
            for g in &listing.disjoint_sets {
                writeln!(s, "K{}: {:?}", g.size, g.families).unwrap();
            }
            if let Some(p) = &listing.prefix_gains {
                writeln!(s, "prefix total gains: {p:?}").unwrap();
            }
            writeln!(s, "cactus: {}", listing.cactus).unwrap();
            for note in &listing.notes {
                writeln!(s, "note: {note}").unwrap();
            }
            s
        }
    };
    Ok(Outcome { stdout, code: 0 })
}

/// Returns the command output and the origin map as JSON.
pub fn cmd_expand(input: &str, format: Format) -> CliResult<(Outcome, String)> {
    let m = MetzlerMatrix::new(parse_matrix(input)?)?;
    let e = expand(&m);
    let origins = to_json(&e.origins);
    let stdout = match format {
        Format::Text => format_matrix_text(&e.matrix),
        Format::Json => to_json(&json!({
            "original_dim": m.dim(),
            "matrix": e.matrix,
            "origins": e.origins,
            "contract_check": contract_check(&e),
        })),
    };
    Ok((Outcome { stdout, code: 0 }, origins))
}

pub fn cmd_certify(input: &str, method: Method, cfg: &AnalysisConfig, format: Format) -> CliResult<Outcome> {
    let spec = parse_network_spec(input)?;
    let cert = nonlinear::certify(&spec, method, cfg)?;
    let stdout = match format {
        Format::Json => to_json(&cert),
        Format::Text => {
            let mut s = String::new();
            let method = match cert.method {
                Method::Sum => "sum",
                Method::Max => "max",
            };
            writeln!(s, "method: {method}").unwrap();
            writeln!(s, "certified: {}", cert.certified).unwrap();
            writeln!(s, "verdict: {}", cert.verdict).unwrap();
            if let Some(p) = &cert.prefix_gains {
                writeln!(s, "prefix total gains: {p:?}").unwrap();
            }
            if let Some(c) = &cert.check {
                writeln!(s, "row sums: {:?}", c.row_sums).unwrap();
                writeln!(s, "cycle products: {:?}", c.cycle_products).unwrap();
            }
            s
        }
    };
    Ok(Outcome { stdout, code: verdict_code(cert.verdict) })
}

enum Loaded {
    Linear(MetzlerMatrix),
    Network(MonotoneNetworkSpec),
}

fn load_system(input: &str) -> CliResult<Loaded> {
    let is_network = input.trim_start().starts_with('{')
        && serde_json::from_str::<serde_json::Value>(input)
            .map(|v| v.get("decay").is_some())
            .unwrap_or(false);
    if is_network {
        Ok(Loaded::Network(parse_network_spec(input)?))
    } else {
        Ok(Loaded::Linear(MetzlerMatrix::new(parse_matrix(input)?)?))
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    steps: usize,
    horizon: f64,
    final_state: Vec<f64>,
    final_norm: f64,
    initial_norm: f64,
    min_entry: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    iss_bound: Option<metzler::simulate::IssCheck>,
}

/// Returns the summary output and the trajectory CSV.
pub fn cmd_simulate(
    input: &str,
    x0: Option<&[f64]>,
    horizon: f64,
    step: f64,
    signal: &InputSignal,
    format: Format,
) -> CliResult<(Outcome, String)> {
    let loaded = load_system(input)?;
    let system = match &loaded {
        Loaded::Linear(m) => System::Linear(m),
        Loaded::Network(s) => System::Network(s),
    };
    let x0 = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; system.dim()]);
    let traj = integrate(system, &x0, signal, horizon, step)?;
    let iss_bound = match &loaded {
        Loaded::Linear(m) if (0..m.dim()).all(|i| m.get(i, i) < 0.0) => {
            Some(check_sum_iss_bound(&traj, m, ISS_SLACK)?)
        }
        _ => None,
    };
    let mut csv = Vec::new();
    traj.write_csv(&mut csv)?;
    let summary = SimulationSummary {
        steps: traj.times.len() - 1,
        horizon,
        final_state: traj.final_state().to_vec(),
        final_norm: inf_norm(traj.final_state()),
        initial_norm: inf_norm(&x0),
        min_entry: traj.min_entry(),
        iss_bound,
    };
    let stdout = match format {
        Format::Json => to_json(&summary),
        Format::Text => {
            let mut s = String::new();
            writeln!(s, "steps: {}", summary.steps).unwrap();
            writeln!(s, "final state: {:?}", summary.final_state).unwrap();
            writeln!(s, "final norm: {:e}", summary.final_norm).unwrap();
            if let Some(b) = &summary.iss_bound {
                writeln!(s, "iss bound holds: {}", b.holds).unwrap();
            }
            s
        }
    };
    Ok((Outcome { stdout, code: 0 }, String::from_utf8(csv).expect("csv is utf-8")))
}

pub fn cmd_sample(n: usize, density: f64, kind: SampleKind, seed: u64) -> CliResult<Outcome> {
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(CliError::Usage("--density must lie in [0, 1]".into()));
    }
    let sampler = match kind {
        SampleKind::Hurwitz => MetzlerSampler::hurwitz(n, density),
        SampleKind::Mixed => MetzlerSampler::mixed(n, density),
        SampleKind::Boundary => MetzlerSampler::boundary(n, density),
    };
    let m: SquareMatrix = sampler.sample(&mut ChaCha8Rng::seed_from_u64(seed)).into_inner();
    Ok(Outcome { stdout: format_matrix_text(&m), code: 0 })
}
