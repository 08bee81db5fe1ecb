//! `qnoise` command-line front end. Every run writes its outputs plus a
//! `manifest.json` into the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qnoise::dynamics::{evolve_markovian, evolve_markovian_dxi, PureState, QubitRegisterState};
use qnoise::golden;
use qnoise::io::{sig12, state_from_text};
use qnoise::linalg::herm_eigen;
use qnoise::noise_model::{build_dephasing_matrix, DephasingMatrix, PowerLawSpatialModel, DEFAULT_DIAG_SCALE};
use qnoise::pulse_filter::{
    coefficient_closed_form, optimize_shot_time, CutoffShape, DephasingCoefficient, PulseSequence, SpectralModel,
};
use qnoise::qfi::{fq_short_time, qfi_sld, QfiMethod};
use qnoise::scaling::{geometric_grid, sweep_nonmarkovian_advantage, SweepConfig};
use qnoise::verify::{run_suite, Suite};

const OUT_ENV: &str = "QNOISE_OUT";
const OMEGA_CUT: f64 = 1e-6;

#[derive(Parser, Debug, Serialize)]
#[command(name = "qnoise", version, about = "Sensing limits under power-law correlated dephasing")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
enum Command {
    /// Write the power-law dephasing matrix and its spectrum.
    Matrix(MatrixArgs),
    /// Short-time rate, fixed-time QFI or optimal shot time for a probe state.
    Qfi(QfiArgs),
    /// Entanglement-advantage sweep over N with a scaling verdict.
    Sweep(SweepArgs),
    /// Run an oracle battery.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = OUT_ENV, default_value = "qnoise-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct MatrixArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long, default_value_t = DEFAULT_DIAG_SCALE)]
    diag_scale: f64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct QfiArgs {
    /// `ghz`, `plus-product` or `file:PATH` (density matrix in `row,col,re,im` form).
    #[arg(long)]
    state: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_DIAG_SCALE)]
    diag_scale: f64,
    /// Spectral exponent of temporally correlated noise; omit for Markovian noise.
    #[arg(long)]
    p: Option<f64>,
    /// Pulse sequence: `fid`, `hahn`, `cpmg:K`, `udd:K` or comma-separated times in (0, 1).
    #[arg(long, default_value = "hahn", requires = "p")]
    pulses: String,
    /// Shot time at which to evaluate the QFI.
    #[arg(long)]
    time: Option<f64>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[arg(long)]
    n_min: usize,
    #[arg(long)]
    n_max: usize,
    #[arg(long, default_value_t = 25)]
    points: usize,
    #[arg(long, default_value_t = 1.0)]
    xi: f64,
    #[arg(long, default_value_t = DEFAULT_DIAG_SCALE)]
    diag_scale: f64,
    #[arg(long, default_value = "hahn")]
    pulses: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, Debug, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum SuiteArg {
    Lindblad,
    McWhite,
    McColored,
    QfiOracle,
    Filter,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Lindblad => Suite::Lindblad,
            SuiteArg::McWhite => Suite::McWhite,
            SuiteArg::McColored => Suite::McColored,
            SuiteArg::QfiOracle => Suite::QfiOracle,
            SuiteArg::Filter => Suite::Filter,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] qnoise::Error),
    #[error("{0} check(s) failed")]
    Failed(usize),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use qnoise::Error as E;
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidParameter(_) | E::DimensionMismatch { .. } | E::Parse(_) | E::Io(_) => 2,
                E::PsdViolation { .. }
                | E::NotHermitian(_)
                | E::Unnormalized(_)
                | E::NegativeEntries { .. }
                | E::NegativeEigenvalue { .. }
                | E::AsymmetricInformation { .. } => 3,
                E::UnsupportedExponent { .. }
                | E::Pole(_)
                | E::QuadratureNonConvergence { .. }
                | E::StepTooCoarse { .. }
                | E::GridTooCoarse { .. } => 4,
            },
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    argv: Vec<String>,
    parameters: &'a Cli,
    seed: Option<u64>,
    version: &'static str,
    threads: usize,
    outputs: Vec<String>,
    wall_time_s: f64,
}

/// Collects output files so the manifest can list them.
struct OutDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| qnoise::Error::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| qnoise::Error::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path.display().to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &Value) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
        self.write(name, &(text + "\n"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().expect("global pool is configured once");
    }
    let start = Instant::now();
    let result = match &cli.command {
        Command::Matrix(a) => cmd_matrix(a),
        Command::Qfi(a) => cmd_qfi(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
    };
    let (out, status) = match result {
        Ok((out, status)) => (out, status),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    let (name, seed) = match &cli.command {
        Command::Matrix(_) => ("matrix", None),
        Command::Qfi(_) => ("qfi", None),
        Command::Sweep(a) => ("sweep", Some(a.seed)),
        Command::Verify(a) => ("verify", Some(a.seed)),
    };
    let mut out = out;
    let manifest = RunManifest {
        command: name,
        argv: std::env::args().collect(),
        parameters: &cli,
        seed,
        version: env!("CARGO_PKG_VERSION"),
        threads: rayon::current_num_threads(),
        outputs: out.written.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let value = serde_json::to_value(&manifest).expect("manifest serializes");
    if let Err(e) = out.write_json("manifest.json", &value) {
        eprintln!("error: {e}");
        return ExitCode::from(e.exit_code());
    }
    match status {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Outputs written so far plus the verdict; a failed verdict still gets a manifest.
type CmdOutcome = CliResult<(OutDir, CliResult<()>)>;

fn cmd_matrix(args: &MatrixArgs) -> CmdOutcome {
    let model = PowerLawSpatialModel::with_diag_scale(args.n, args.alpha, args.xi, args.diag_scale)?;
    let a = build_dephasing_matrix(&model, 1.0)?;
    let mut out = OutDir::create(&args.out.out)?;
    let header: Vec<String> = (0..args.n).map(|j| format!("q{j}")).collect();
    let mut csv = header.join(",") + "\n";
    for row in a.entries().row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| sig12(v)).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    out.write("matrix.csv", &csv)?;
    let eig = a.eigenvalues();
    let summary = json!({
        "n": args.n,
        "alpha": args.alpha,
        "xi": args.xi,
        "diag_scale": args.diag_scale,
        "eigenvalues": eig,
        "min_eigenvalue": eig.iter().copied().fold(f64::INFINITY, f64::min),
        "max_eigenvalue": a.max_eigenvalue(),
        "trace": a.trace(),
        "total_sum": a.total_sum(),
    });
    out.write_json("eigen_summary.json", &summary)?;
    print!("{csv}");
    Ok((out, Ok(())))
}

fn parse_pulses(s: &str) -> CliResult<PulseSequence> {
    Ok(s.parse::<PulseSequence>()?)
}

/// Principal eigenvector of a density matrix that is pure to 1e-9.
fn pure_from_density(rho: &QubitRegisterState) -> CliResult<PureState> {
    let (vals, vecs) = herm_eigen(rho.matrix());
    let top = vals.imax();
    if (vals[top] - 1.0).abs() > 1e-9 {
        return Err(CliError::Usage(format!(
            "the short-time rate needs a pure state (largest eigenvalue {}); pass --time for mixed states",
            vals[top]
        )));
    }
    Ok(PureState::normalized(vecs.column(top).into_owned())?)
}

enum Probe {
    Pure(PureState),
    Mixed(QubitRegisterState),
}

impl Probe {
    fn density(&self) -> QubitRegisterState {
        match self {
            Probe::Pure(p) => p.density_matrix(),
            Probe::Mixed(m) => m.clone(),
        }
    }
}

fn load_probe(spec: &str, n: usize) -> CliResult<Probe> {
    let probe = match spec {
        "ghz" => Probe::Pure(PureState::ghz(n)?),
        "plus-product" => Probe::Pure(PureState::plus_product(n)?),
        other => match other.strip_prefix("file:") {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| qnoise::Error::Io(format!("{path}: {e}")))?;
                Probe::Mixed(QubitRegisterState::new(state_from_text(&text)?)?)
            }
            None => return Err(CliError::Usage(format!("unknown state {other:?}; use ghz, plus-product or file:PATH"))),
        },
    };
    let got = match &probe {
        Probe::Pure(p) => p.n_qubits(),
        Probe::Mixed(m) => m.n_qubits(),
    };
    if got != n {
        return Err(qnoise::Error::DimensionMismatch { expected: n, got }.into());
    }
    Ok(probe)
}

/// `ℱ_Q` about the noise strength after Markovian evolution for `t` under `a = A(ξ)`.
fn markovian_qfi(rho0: &QubitRegisterState, a: &DephasingMatrix, xi: f64, t: f64) -> CliResult<f64> {
    let rho = evolve_markovian(rho0, a, t)?;
    let d = evolve_markovian_dxi(rho0, a, xi, t)?;
    Ok(qfi_sld(rho.matrix(), &d)?.value)
}

fn cmd_qfi(args: &QfiArgs) -> CmdOutcome {
    let probe = load_probe(&args.state, args.n)?;
    let mut out = OutDir::create(&args.out.out)?;
    let report = match args.p {
        None => {
            let model = PowerLawSpatialModel::with_diag_scale(args.n, args.alpha, args.xi, args.diag_scale)?;
            let a = build_dephasing_matrix(&model, args.gamma)?;
            match args.time {
                Some(t) => {
                    let f = markovian_qfi(&probe.density(), &a, args.xi, t)?;
                    json!({ "F_Q": f, "time": t, "method": QfiMethod::Sld })
                }
                None => {
                    let psi = match &probe {
                        Probe::Pure(p) => p.clone(),
                        Probe::Mixed(m) => pure_from_density(m)?,
                    };
                    json!({ "f_q": fq_short_time(&psi, &a, args.xi)?, "method": QfiMethod::ShortTimeRate })
                }
            }
        }
        Some(p) => nonmarkovian_report(args, &probe, p)?,
    };
    out.write_json("qfi.json", &report)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("JSON values always serialize"));
    Ok((out, Ok(())))
}

/// Pulsed `1/f^p` noise with spatial profile `A₁` (unit strength) and
/// temporal strength `--xi`. Maps each shot onto Markovian evolution under
/// `ξ̃ A₁` for `t_eff = 4 t^{1+p} C`.
fn nonmarkovian_report(args: &QfiArgs, probe: &Probe, p: f64) -> CliResult<Value> {
    let pulses = parse_pulses(&args.pulses)?;
    let spec = SpectralModel::new(p, args.xi, OMEGA_CUT, CutoffShape::FlattenBelow)?;
    let coef = coefficient_closed_form(&pulses, p)?;
    let unit = build_dephasing_matrix(&PowerLawSpatialModel::with_diag_scale(args.n, args.alpha, 1.0, args.diag_scale)?, 1.0)?;
    let a = unit.scaled(args.xi);
    let rho0 = probe.density();
    let qfi_at = |t: f64| markovian_qfi(&rho0, &a, args.xi, 4.0 * t.powf(1.0 + p) * coef.value);
    let mut report = json!({
        "p": p,
        "pulses": pulses.to_string(),
        "coefficient": coef.value,
        "method": QfiMethod::Sld,
    });
    if let Some(t) = args.time {
        report["time"] = json!(t);
        report["F_Q"] = json!(qfi_at(t)?);
    }
    if p > 0.0 {
        // search ln t between y = 1e-4 for the fastest and y = 10 for the slowest coherence
        let to_t = |y: f64, q: f64| (y / (args.xi * coef.value * q)).powf(1.0 / (1.0 + p));
        let diag_min = (0..args.n).map(|j| unit.entries()[(j, j)]).fold(f64::INFINITY, f64::min);
        let (lo, hi) = (to_t(1e-4, unit.total_sum()).ln(), to_t(10.0, diag_min).ln());
        let rate = |s: f64| qfi_at(s.exp()).map(|f| f / s.exp()).unwrap_or(f64::NAN);
        let best = golden::maximize(rate, lo, hi, 1e-10);
        report["numerical"] = json!({ "t_opt": best.x.exp(), "rate": best.value });
    }
    if matches!(args.state.as_str(), "ghz") && p >= 0.0 {
        // the extreme GHZ coherence behaves as one qubit with coefficient C·ΣA₁
        let scaled = DephasingCoefficient { value: coef.value * unit.total_sum(), ..coef.clone() };
        let opt = optimize_shot_time(&spec, &pulses, &scaled)?;
        report["y0"] = json!(opt.y0);
        report["t_opt"] = json!(opt.t_opt);
        report["rate"] = json!(opt.max_rate);
    }
    Ok(report)
}

fn cmd_sweep(args: &SweepArgs) -> CmdOutcome {
    if args.n_min >= args.n_max {
        return Err(CliError::Usage(format!("need n-min < n-max, got {} and {}", args.n_min, args.n_max)));
    }
    let n_list = geometric_grid(args.n_min, args.n_max, args.points)?;
    let mut cfg = SweepConfig::new(args.alpha, args.p, n_list)?;
    cfg.xi = args.xi;
    cfg.diag_scale = args.diag_scale;
    cfg.pulses = parse_pulses(&args.pulses)?;
    cfg.seed = args.seed;
    cfg.validate()?;
    let result = sweep_nonmarkovian_advantage(&cfg)?;
    let mut out = OutDir::create(&args.out.out)?;
    out.write("sweep.csv", &result.to_csv())?;
    let summary = result.summary_json();
    out.write_json("fit.json", &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("JSON values always serialize"));
    let status = if result.verdict.pass { Ok(()) } else { Err(CliError::Failed(1)) };
    Ok((out, status))
}

fn cmd_verify(args: &VerifyArgs) -> CmdOutcome {
    let suite = Suite::from(args.suite);
    let report = run_suite(suite, args.seed)?;
    let mut out = OutDir::create(&args.out.out)?;
    let text = report.to_text();
    print!("{text}");
    out.write(&format!("verify-{suite}.txt"), &text)?;
    let value = serde_json::to_value(&report).expect("report serializes");
    out.write_json(&format!("verify-{suite}.json"), &value)?;
    let failed = report.failures().count();
    println!("{suite}: {} checks, {failed} failed (seed {})", report.checks.len(), args.seed);
    let status = if failed == 0 { Ok(()) } else { Err(CliError::Failed(failed)) };
    Ok((out, status))
}
