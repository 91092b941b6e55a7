//! `rabi-qst`: simulate Rabi traces, fit them, reconstruct qubit states, and
//! run the error-sensitivity / Monte-Carlo analyses from the command line.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rabi_qst::analysis::{
    error_sweep, monte_carlo_fidelity, octant_suite, McConfig, PerturbationMode,
    PerturbedQuantity, SweepSpec,
};
use rabi_qst::fit::{fit_series, FitOptions};
use rabi_qst::gates::{apply, build_v_gates, hybrid_ket, HybridState, Spin1, U3Variant};
use rabi_qst::io::{read_trace_csv, write_sweep_csv, write_trace_csv};
use rabi_qst::rabi::{
    init_sequence_ops, simulate_triple, RabiConfig, RabiTrace, TracePath, TraceTriple,
    DEFAULT_OMEGA,
};
use rabi_qst::spin::{angles_to_bloch, bloch_to_density, DensityMatrix, StateAngles};
use rabi_qst::tomo::{
    fit_triple, raqst, reconstruct_report, rpqst, standard_qst, FitTriple, TomographyMethod,
    TomographyResult,
};

use config::FileConfig;

#[derive(Parser)]
#[command(name = "rabi-qst", version, about = "Rabi-oscillation quantum state tomography")]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format where both are supported.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Output directory (simulate) or file (other commands).
    #[arg(short, long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Electron,
    Nuclear,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Raqst,
    Rpqst,
    Standard,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum QuantityArg {
    /// Perturb the x-trace amplitude ratio.
    Amplitude,
    /// Perturb the x-trace phase angle.
    Phase,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SignsArg {
    Worst,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum U3Arg {
    Corrected,
    NonUnitary,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the x-Rabi, y-Rabi and reference traces of a prepared state.
    Simulate(SimulateArgs),
    /// Fit one trace file to a sinusoid.
    Fit(FitArgs),
    /// Reconstruct a state from trace files.
    Tomo(TomoArgs),
    /// Error-sensitivity sweep over the polar angle.
    Sweep(SweepArgs),
    /// Monte-Carlo fidelity statistics over random states.
    Mc(McArgs),
    /// Run the register circuits and dump the intermediate states.
    Circuit(CircuitArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Polar angle of the prepared state, degrees.
    #[arg(long)]
    theta: Option<f64>,
    /// Azimuth of the prepared state, degrees.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Samples per trace.
    #[arg(long)]
    points: Option<usize>,
    /// Trace length in Rabi periods.
    #[arg(long)]
    periods: Option<f64>,
    /// Rabi angular frequency, rad/us.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    contrast: Option<f64>,
    #[arg(long)]
    offset: Option<f64>,
    /// Additive Gaussian noise standard deviation (signal units).
    #[arg(long)]
    sigma: Option<f64>,
    /// Cumulative per-trace contrast loss across the session.
    #[arg(long)]
    drift: Option<f64>,
    /// Exponential envelope time constant, us.
    #[arg(long)]
    decay_t: Option<f64>,
    /// Skip the reference trace.
    #[arg(long)]
    no_ref: bool,
}

#[derive(Args)]
struct FitArgs {
    /// Trace CSV file.
    #[arg(long, short)]
    input: PathBuf,
    /// Hold the angular frequency fixed, rad/us.
    #[arg(long)]
    fix_frequency: Option<f64>,
    /// Also fit an exponential envelope.
    #[arg(long)]
    decay: bool,
}

#[derive(Args)]
struct TomoArgs {
    /// Directory holding x_rabi.csv, y_rabi.csv, reference.csv and
    /// populations.json; individual paths override its entries.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long)]
    y: Option<PathBuf>,
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long)]
    populations: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Target polar angle for the fidelity report, degrees.
    #[arg(long)]
    target_theta: Option<f64>,
    /// Target azimuth for the fidelity report, degrees.
    #[arg(long)]
    target_phi: Option<f64>,
    /// Fit each trace separately instead of sharing one frequency.
    #[arg(long)]
    independent_fits: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    quantity: Option<QuantityArg>,
    /// Relative perturbation, e.g. 0.01.
    #[arg(long)]
    eps: Option<f64>,
    /// Fixed azimuth of the swept states, degrees.
    #[arg(long)]
    phi: Option<f64>,
    /// Polar grid as start:stop:step, degrees.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, value_enum)]
    signs: Option<SignsArg>,
}

#[derive(Args)]
struct McArgs {
    /// Number of random states.
    #[arg(long)]
    n: Option<usize>,
    /// Noise standard deviation as a fraction of the contrast.
    #[arg(long)]
    sigma: Option<f64>,
    /// Cumulative per-trace contrast loss across the session.
    #[arg(long)]
    drift: Option<f64>,
    /// Also run the octant demonstration table.
    #[arg(long)]
    octants: bool,
}

#[derive(Args)]
struct CircuitArgs {
    /// Which sequence to run: the initialisation chain or the prepare-and-
    /// read tomography chain.
    #[arg(long, default_value = "init")]
    sequence: String,
    #[arg(long, value_enum)]
    u3: Option<U3Arg>,
    /// Input for the initialisation chain: "mixed" or a ket "mS,mI".
    #[arg(long, default_value = "mixed")]
    input: String,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    phi: Option<f64>,
    /// Rabi nutation angle for the tomography chain, degrees.
    #[arg(long)]
    theta_r: Option<f64>,
    /// Drive axis phase, radians.
    #[arg(long)]
    zeta: Option<f64>,
    /// Emit the register state after every gate.
    #[arg(long)]
    dump_states: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let file_cfg = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let seed = cli.seed.or(file_cfg.seed).unwrap_or(0);
    let format = cli
        .format
        .or(match file_cfg.format.as_deref() {
            Some("csv") => Some(Format::Csv),
            Some("json") => Some(Format::Json),
            _ => None,
        })
        .unwrap_or(Format::Csv);
    let out = cli.out.clone().or_else(|| file_cfg.out.clone().map(PathBuf::from));

    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, &file_cfg, seed, format, out),
        Command::Fit(args) => cmd_fit(args, out),
        Command::Tomo(args) => cmd_tomo(args, &file_cfg, out),
        Command::Sweep(args) => cmd_sweep(args, &file_cfg, format, out),
        Command::Mc(args) => cmd_mc(args, &file_cfg, seed, out),
        Command::Circuit(args) => cmd_circuit(args, &file_cfg, out),
    }
}

fn build_rabi_config(args: &SimulateArgs, cfg: &FileConfig, seed: u64) -> Result<RabiConfig<f64>> {
    let mut base = RabiConfig::<f64>::default_config();
    base.rabi_frequency = args.omega.or(cfg.omega).unwrap_or(DEFAULT_OMEGA);
    let points = args.points.or(cfg.points).unwrap_or(61);
    let periods = args.periods.or(cfg.periods).unwrap_or(3.0);
    base.times_us = RabiConfig::<f64>::grid(
        periods * std::f64::consts::TAU / base.rabi_frequency,
        points,
    );
    base.contrast = args.contrast.or(cfg.contrast).unwrap_or(0.3);
    base.offset = args.offset.or(cfg.offset).unwrap_or(0.7);
    base.noise_sigma = args.sigma.or(cfg.sigma).unwrap_or(0.0);
    base.decay_t_us = args.decay_t.or(cfg.decay_t);
    base.seed = seed;
    base.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(base)
}

fn prepared_angles(
    theta: Option<f64>,
    phi: Option<f64>,
    cfg: &FileConfig,
) -> Result<StateAngles<f64>> {
    let theta = theta
        .or(cfg.theta)
        .ok_or_else(|| anyhow!("--theta is required (flag or config file)"))?;
    let phi = phi.or(cfg.phi).unwrap_or(0.0);
    StateAngles::from_degrees(theta, phi).map_err(|e| anyhow!("{e}"))
}

fn write_json<P: Serialize>(path: Option<&Path>, payload: &P) -> Result<()> {
    match path {
        Some(path) => {
            let mut w = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            serde_json::to_writer_pretty(&mut w, payload)?;
            w.write_all(b"\n")?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, payload)?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn write_trace(dir: &Path, name: &str, trace: &RabiTrace<f64>, format: Format) -> Result<PathBuf> {
    let (ext, path) = match format {
        Format::Csv => ("csv", dir.join(format!("{name}.csv"))),
        Format::Json => ("json", dir.join(format!("{name}.json"))),
    };
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    match ext {
        "csv" => write_trace_csv(&mut w, trace).map_err(|e| anyhow!("{e}"))?,
        _ => {
            serde_json::to_writer_pretty(&mut w, trace)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(path)
}

#[derive(Serialize, serde::Deserialize)]
struct Populations {
    p_z: f64,
    p_x: f64,
    p_y: f64,
}

fn cmd_simulate(
    args: SimulateArgs,
    cfg: &FileConfig,
    seed: u64,
    format: Format,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let angles = prepared_angles(args.theta, args.phi, cfg)?;
    let base = build_rabi_config(&args, cfg, seed)?;
    let drift = args.drift.or(cfg.drift).unwrap_or(0.0);
    let mode = args.mode.unwrap_or(match cfg.mode.as_deref() {
        Some("nuclear") => Mode::Nuclear,
        _ => Mode::Electron,
    });
    let path = match mode {
        Mode::Electron => TracePath::Electron,
        Mode::Nuclear => TracePath::Nuclear,
    };

    let dir = out.unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let triple = simulate_triple(angles, &base, path, drift).map_err(|e| anyhow!("{e}"))?;
    let mut written = vec![
        write_trace(&dir, "x_rabi", &triple.x, format)?,
        write_trace(&dir, "y_rabi", &triple.y, format)?,
    ];
    if !args.no_ref {
        written.push(write_trace(&dir, "reference", &triple.reference, format)?);
    }

    // rotated-readout populations of the ideal prepared state, for the
    // standard reconstruction baseline
    let rho = bloch_to_density(&angles_to_bloch(angles)).map_err(|e| anyhow!("{e}"))?;
    let (p_z, p_x, p_y) = rabi_qst::tomo::qubit_populations(&rho).map_err(|e| anyhow!("{e}"))?;
    let pop_path = dir.join("populations.json");
    write_json(Some(&pop_path), &Populations { p_z, p_x, p_y })?;
    written.push(pop_path);

    println!(
        "simulated {} traces: theta {:.4} deg, phi {:.4} deg, {} points, seed {}",
        match mode {
            Mode::Electron => "electron",
            Mode::Nuclear => "nuclear-circuit",
        },
        angles.theta_degrees(),
        angles.phi_degrees(),
        base.times_us.len(),
        seed,
    );
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn load_trace(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_trace_csv(BufReader::new(file)).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn cmd_fit(args: FitArgs, out: Option<PathBuf>) -> Result<ExitCode> {
    let (times, signal) = load_trace(&args.input)?;
    let fit = fit_series(
        &times,
        &signal,
        &FitOptions {
            fix_frequency: args.fix_frequency,
            fit_decay: args.decay,
        },
    )
    .map_err(|e| anyhow!("{e}"))?;
    write_json(out.as_deref(), &fit)?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct TomoOutput {
    results: Vec<TomographyResult<f64>>,
    reports: Vec<rabi_qst::tomo::Report<f64>>,
    errors: Vec<TomoError>,
}

#[derive(Serialize)]
struct TomoError {
    method: String,
    error: String,
}

fn cmd_tomo(args: TomoArgs, cfg: &FileConfig, out: Option<PathBuf>) -> Result<ExitCode> {
    let dir = args.dir.clone();
    let resolve = |explicit: &Option<PathBuf>, name: &str| -> Option<PathBuf> {
        explicit
            .clone()
            .or_else(|| dir.as_ref().map(|d| d.join(name)))
    };
    let x_path = resolve(&args.x, "x_rabi.csv")
        .ok_or_else(|| anyhow!("missing input: --x (or --dir) for the x-Rabi trace"))?;
    let y_path = resolve(&args.y, "y_rabi.csv")
        .ok_or_else(|| anyhow!("missing input: --y (or --dir) for the y-Rabi trace"))?;

    let method = args.method.unwrap_or(match cfg.method.as_deref() {
        Some("raqst") => MethodArg::Raqst,
        Some("rpqst") => MethodArg::Rpqst,
        Some("standard") => MethodArg::Standard,
        _ => MethodArg::All,
    });
    let wants = |m: MethodArg| method == m || method == MethodArg::All;

    let (xt, xs) = load_trace(&x_path)?;
    let (yt, ys) = load_trace(&y_path)?;

    // the reference is only required by the amplitude route
    let ref_path = resolve(&args.reference, "reference.csv");
    let reference = match (&ref_path, wants(MethodArg::Raqst)) {
        (Some(p), _) if p.exists() => Some(load_trace(p)?),
        (Some(p), true) if method == MethodArg::Raqst => {
            bail!("missing input: reference trace {} (required by raqst)", p.display())
        }
        (None, true) if method == MethodArg::Raqst => {
            bail!("missing input: --ref (or --dir) for the reference trace (required by raqst)")
        }
        _ => None,
    };

    let fits = build_fits(&xt, &xs, &yt, &ys, reference.as_ref(), !args.independent_fits)?;

    let target = match (args.target_theta, args.target_phi) {
        (Some(t), p) => Some(StateAngles::from_degrees(t, p.unwrap_or(0.0)).map_err(|e| anyhow!("{e}"))?),
        _ => None,
    };

    let mut output = TomoOutput {
        results: Vec::new(),
        reports: Vec::new(),
        errors: Vec::new(),
    };

    let record = |method: TomographyMethod,
                      outcome: rabi_qst::Result<TomographyResult<f64>>,
                      output: &mut TomoOutput| {
        match outcome {
            Ok(res) => {
                if let Some(t) = target {
                    match reconstruct_report(&res, t) {
                        Ok(report) => {
                            println!(
                                "{method}: F={:.8} theta={:.4} deg phi={:.4} deg",
                                report.fidelity,
                                report.result.angles.theta_degrees(),
                                report.result.angles.phi_degrees()
                            );
                            output.results.push(report.result.clone());
                            output.reports.push(report);
                            return;
                        }
                        Err(e) => {
                            output.errors.push(TomoError {
                                method: method.to_string(),
                                error: e.to_string(),
                            });
                            return;
                        }
                    }
                }
                println!(
                    "{method}: theta={:.4} deg phi={:.4} deg",
                    res.angles.theta_degrees(),
                    res.angles.phi_degrees()
                );
                output.results.push(res);
            }
            Err(e) => {
                eprintln!("{method}: {e}");
                output.errors.push(TomoError {
                    method: method.to_string(),
                    error: e.to_string(),
                });
            }
        }
    };

    if wants(MethodArg::Raqst) {
        match &fits.reference {
            Some(r) => record(TomographyMethod::Raqst, raqst(&fits.x, &fits.y, r), &mut output),
            None => {
                let msg = "missing input: reference trace (required by raqst)".to_string();
                eprintln!("raqst: {msg}");
                output.errors.push(TomoError {
                    method: "raqst".into(),
                    error: msg,
                });
            }
        }
    }
    if wants(MethodArg::Rpqst) {
        record(TomographyMethod::Rpqst, rpqst(&fits.x, &fits.y), &mut output);
    }
    if wants(MethodArg::Standard) {
        let pop_path = resolve(&args.populations, "populations.json");
        let outcome = match pop_path {
            Some(p) if p.exists() => {
                let file = File::open(&p).with_context(|| format!("opening {}", p.display()))?;
                let pops: Populations = serde_json::from_reader(BufReader::new(file))
                    .with_context(|| format!("parsing {}", p.display()))?;
                standard_qst(pops.p_z, pops.p_x, pops.p_y)
            }
            Some(p) => {
                let msg = format!("missing input: populations file {} (required by standard)", p.display());
                eprintln!("standard: {msg}");
                output.errors.push(TomoError { method: "standard".into(), error: msg });
                write_json(out.as_deref(), &output)?;
                return Ok(ExitCode::FAILURE);
            }
            None => {
                let msg = "missing input: --populations (or --dir) for the standard baseline".to_string();
                eprintln!("standard: {msg}");
                output.errors.push(TomoError { method: "standard".into(), error: msg });
                write_json(out.as_deref(), &output)?;
                return Ok(ExitCode::FAILURE);
            }
        };
        record(TomographyMethod::Standard, outcome, &mut output);
    }

    let failed = !output.errors.is_empty();
    write_json(out.as_deref(), &output)?;
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

struct OptionalRefFits {
    x: rabi_qst::fit::SineFit<f64>,
    y: rabi_qst::fit::SineFit<f64>,
    reference: Option<rabi_qst::fit::SineFit<f64>>,
}

fn build_fits(
    xt: &[f64],
    xs: &[f64],
    yt: &[f64],
    ys: &[f64],
    reference: Option<&(Vec<f64>, Vec<f64>)>,
    shared: bool,
) -> Result<OptionalRefFits> {
    if shared {
        match reference {
            Some((rt, rs)) => {
                let triple = TraceTriple {
                    x: trace_from(xt, xs),
                    y: trace_from(yt, ys),
                    reference: trace_from(rt, rs),
                };
                let FitTriple { x, y, reference } =
                    fit_triple(&triple, true).map_err(|e| anyhow!("fit failed: {e}"))?;
                Ok(OptionalRefFits { x, y, reference: Some(reference) })
            }
            None => {
                let fits = rabi_qst::fit::fit_shared_frequency(&[(xt, xs), (yt, ys)], None)
                    .map_err(|e| anyhow!("fit failed: {e}"))?;
                let mut it = fits.into_iter();
                Ok(OptionalRefFits {
                    x: it.next().expect("two fits"),
                    y: it.next().expect("two fits"),
                    reference: None,
                })
            }
        }
    } else {
        let opts = FitOptions::default();
        Ok(OptionalRefFits {
            x: fit_series(xt, xs, &opts).map_err(|e| anyhow!("fit failed (x): {e}"))?,
            y: fit_series(yt, ys, &opts).map_err(|e| anyhow!("fit failed (y): {e}"))?,
            reference: match reference {
                Some((rt, rs)) => {
                    Some(fit_series(rt, rs, &opts).map_err(|e| anyhow!("fit failed (ref): {e}"))?)
                }
                None => None,
            },
        })
    }
}

/// Wraps bare series into a trace with placeholder metadata for fitting.
fn trace_from(times: &[f64], signal: &[f64]) -> RabiTrace<f64> {
    let mut cfg = RabiConfig::<f64>::default_config();
    cfg.times_us = times.to_vec();
    RabiTrace {
        times_us: times.to_vec(),
        signal: signal.to_vec(),
        meta: rabi_qst::rabi::TraceMeta {
            config: cfg,
            prepared_state: "loaded from file".into(),
        },
    }
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:stop:step, got '{spec}'");
    }
    let start: f64 = parts[0].parse().context("grid start")?;
    let stop: f64 = parts[1].parse().context("grid stop")?;
    let step: f64 = parts[2].parse().context("grid step")?;
    if step <= 0.0 || stop < start {
        bail!("grid must advance from start to stop with positive step");
    }
    let mut grid = Vec::new();
    let mut t = start;
    while t <= stop + 1e-9 {
        grid.push(t);
        t += step;
    }
    Ok(grid)
}

fn cmd_sweep(
    args: SweepArgs,
    cfg: &FileConfig,
    format: Format,
    out: Option<PathBuf>,
) -> Result<ExitCode> {
    let method = match args.method.unwrap_or(match cfg.method.as_deref() {
        Some("rpqst") => MethodArg::Rpqst,
        _ => MethodArg::Raqst,
    }) {
        MethodArg::Raqst => TomographyMethod::Raqst,
        MethodArg::Rpqst => TomographyMethod::Rpqst,
        _ => bail!("sweep supports --method raqst or rpqst"),
    };
    let quantity = match args.quantity.unwrap_or(match cfg.quantity.as_deref() {
        Some("phase") => QuantityArg::Phase,
        _ => QuantityArg::Amplitude,
    }) {
        QuantityArg::Amplitude => PerturbedQuantity::AmplitudeX,
        QuantityArg::Phase => PerturbedQuantity::PhaseAlpha,
    };
    let eps = args.eps.or(cfg.eps).unwrap_or(0.01);
    let mut spec = SweepSpec::<f64>::standard(method, quantity, eps);
    if let Some(phi) = args.phi.or(cfg.sweep_phi) {
        spec.phi_deg = phi;
    }
    if let Some(grid) = &args.grid {
        spec.theta_grid_deg = parse_grid(grid)?;
    }
    spec.mode = match args.signs.unwrap_or(match cfg.signs.as_deref() {
        Some("both") => SignsArg::Both,
        _ => SignsArg::Worst,
    }) {
        SignsArg::Worst => PerturbationMode::WorstCaseSign,
        SignsArg::Both => PerturbationMode::BothSigns,
    };

    let result = error_sweep(&spec).map_err(|e| anyhow!("{e}"))?;
    match format {
        Format::Csv => match &out {
            Some(path) => {
                let mut w = BufWriter::new(
                    File::create(path).with_context(|| format!("creating {}", path.display()))?,
                );
                write_sweep_csv(&mut w, &result).map_err(|e| anyhow!("{e}"))?;
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                write_sweep_csv(&mut stdout, &result).map_err(|e| anyhow!("{e}"))?;
            }
        },
        Format::Json => write_json(out.as_deref(), &result)?,
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct McOutput {
    stats: Vec<rabi_qst::analysis::McStats<f64>>,
    records: Vec<rabi_qst::analysis::McRecord<f64>>,
    octants: Option<Vec<rabi_qst::analysis::OctantRow<f64>>>,
}

fn cmd_mc(args: McArgs, cfg: &FileConfig, seed: u64, out: Option<PathBuf>) -> Result<ExitCode> {
    let n = args.n.or(cfg.n).unwrap_or(40);
    let sigma = args.sigma.or(cfg.sigma).unwrap_or(0.01);
    let mut mc = McConfig::<f64>::new(n, sigma, seed);
    mc.session_drift = args.drift.or(cfg.drift).unwrap_or(0.0);
    let result = monte_carlo_fidelity(&mc).map_err(|e| anyhow!("{e}"))?;
    for s in &result.stats {
        println!(
            "{}: mean {:.6} median {:.6} min {:.6} max {:.6}",
            s.method, s.mean, s.median, s.min, s.max
        );
    }
    let octants = if args.octants {
        Some(octant_suite::<f64>(sigma, seed).map_err(|e| anyhow!("{e}"))?)
    } else {
        None
    };
    write_json(
        out.as_deref(),
        &McOutput {
            stats: result.stats,
            records: result.records,
            octants,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Snapshot {
    label: String,
    population_00: f64,
    state: DensityMatrix<f64>,
}

#[derive(Serialize)]
struct CircuitOutput {
    sequence: String,
    snapshots: Vec<Snapshot>,
}

fn parse_ket(text: &str) -> Result<HybridState<f64>> {
    let spin = |s: &str| -> Result<Spin1> {
        match s.trim() {
            "1" | "+1" => Ok(Spin1::Plus),
            "0" => Ok(Spin1::Zero),
            "-1" => Ok(Spin1::Minus),
            other => bail!("spin projection must be +1, 0 or -1, got '{other}'"),
        }
    };
    let (e, n) = text
        .split_once(',')
        .ok_or_else(|| anyhow!("ket must be 'mS,mI', got '{text}'"))?;
    Ok(HybridState::Pure(hybrid_ket(spin(e)?, spin(n)?)))
}

fn cmd_circuit(args: CircuitArgs, cfg: &FileConfig, out: Option<PathBuf>) -> Result<ExitCode> {
    let variant = match args.u3.unwrap_or(match cfg.u3.as_deref() {
        Some("non-unitary") => U3Arg::NonUnitary,
        _ => U3Arg::Corrected,
    }) {
        U3Arg::Corrected => U3Variant::Corrected,
        U3Arg::NonUnitary => U3Variant::NonUnitary,
    };

    let mut snapshots = Vec::new();
    let mut push = |label: String, state: &HybridState<f64>| {
        let rho = state.to_density();
        snapshots.push(Snapshot {
            label,
            population_00: rho.population(rabi_qst::gates::level_index(Spin1::Zero, Spin1::Zero)),
            state: rho,
        });
    };

    match args.sequence.as_str() {
        "init" => {
            let mut state = if args.input == "mixed" {
                HybridState::Density(DensityMatrix::maximally_mixed(9))
            } else {
                parse_ket(&args.input)?
            };
            push("input".into(), &state);
            for (label, gate) in init_sequence_ops::<f64>(variant) {
                let rho = gate
                    .apply_matrix(state.to_density().matrix())
                    .map_err(|e| anyhow!("{e}"))?;
                let tr = rho.trace().re;
                if tr < 1e-12 {
                    bail!("gate '{label}' annihilated the state (zero trace)");
                }
                let rho = rho.scale_re(1.0 / tr);
                state = HybridState::Density(DensityMatrix::new(rho).map_err(|e| anyhow!("{e}"))?);
                push(label, &state);
            }
        }
        "tomo" => {
            let theta = args.theta.or(cfg.theta).unwrap_or(0.0).to_radians();
            let phi = args.phi.or(cfg.phi).unwrap_or(0.0).to_radians();
            let theta_r = args.theta_r.unwrap_or(0.0).to_radians();
            let zeta = args.zeta.unwrap_or(0.0);
            let gates = build_v_gates::<f64>(theta, phi, theta_r, zeta);
            let mut state = HybridState::Pure(hybrid_ket(Spin1::Zero, Spin1::Zero));
            push("input |0,0>".into(), &state);
            for (label, gate) in [
                ("v1", &gates.v1),
                ("v2", &gates.v2),
                ("v3", &gates.v3),
                ("v4", &gates.v4),
            ] {
                state = apply(gate, &state).map_err(|e| anyhow!("{e}"))?;
                push(label.into(), &state);
            }
        }
        other => bail!("unknown sequence '{other}' (expected init or tomo)"),
    }

    if args.dump_states {
        write_json(
            out.as_deref(),
            &CircuitOutput {
                sequence: args.sequence,
                snapshots,
            },
        )?;
    } else {
        for s in &snapshots {
            println!("{:12} p(|0,0>) = {:.12}", s.label, s.population_00);
        }
    }
    Ok(ExitCode::SUCCESS)
}
