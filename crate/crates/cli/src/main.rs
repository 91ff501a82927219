mod catalog;
mod commands;
mod presets;
mod report;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use proctensor::instrument::SamplingMeasure;
use proctensor::recovery::{NoiseModel, ScanConvention};
use proctensor::tomo::DEFAULT_RESAMPLES;

use catalog::ProcessName;
use commands::{CircuitName, Emitted, Format, ScanRequest, SettingFamily};
use presets::{Preset, RunConfig, DEFAULT_SEED};

const EXIT_VALIDATION: u8 = 2;
const EXIT_CHECKS: u8 = 3;

#[derive(Parser)]
#[command(name = "proctensor", version, about = "Multi-time quantum process toolkit")]
struct Cli {
    /// Output format (each command has its own default).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a three-time process from a named common-cause state.
    Process {
        #[command(subcommand)]
        cmd: ProcessCmd,
    },
    /// Inspect a measurement instrument.
    Instrument {
        #[command(subcommand)]
        cmd: InstrumentCmd,
    },
    /// Memory strength per Bob event and instrument surveys.
    Memory {
        #[command(subcommand)]
        cmd: MemoryCmd,
    },
    /// Dump the named input states.
    States {
        #[command(subcommand)]
        cmd: StatesCmd,
    },
    /// Recovered process and deviation scans.
    Recover {
        #[command(subcommand)]
        cmd: RecoverCmd,
    },
    /// Quantum-walk realizations of qubit POVMs.
    Walk {
        #[command(subcommand)]
        cmd: WalkCmd,
    },
    /// Simulated state tomography.
    Tomo {
        #[command(subcommand)]
        cmd: TomoCmd,
    },
    /// Run a preset reproduction with its tolerance checks.
    Preset {
        #[arg(value_enum)]
        name: Preset,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Run a preset from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum ProcessCmd {
    Build {
        #[arg(long, value_enum)]
        process: ProcessName,
        /// Include the full process matrix.
        #[arg(long)]
        matrix: bool,
    },
}

#[derive(Args)]
struct InstrumentSource {
    /// Built-in instrument: theta, tetra, xi, sharp, z, z3.
    #[arg(long)]
    name: Option<String>,
    /// JSON file with `dim` and `elements`.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Subcommand)]
enum InstrumentCmd {
    Show(InstrumentSource),
    Validate(InstrumentSource),
    Dual(InstrumentSource),
}

#[derive(Subcommand)]
enum MemoryCmd {
    Strength {
        #[arg(long, value_enum)]
        process: ProcessName,
        #[command(flatten)]
        instrument: InstrumentSource,
    },
    Survey {
        #[arg(long, value_enum, default_value = "lambda")]
        process: ProcessName,
        #[arg(long, default_value_t = presets::SURVEY_CUTOFF)]
        cutoff: f64,
        #[arg(long, default_value_t = presets::SURVEY_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value = "haar")]
        measure: Measure,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Haar,
    UniformAngles,
}

impl From<Measure> for SamplingMeasure {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Haar => SamplingMeasure::Haar,
            Measure::UniformAngles => SamplingMeasure::UniformAngles,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Projector,
    Correlator,
}

impl From<Convention> for ScanConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Projector => ScanConvention::Projector,
            Convention::Correlator => ScanConvention::Correlator,
        }
    }
}

#[derive(Subcommand)]
enum StatesCmd {
    Emit {
        #[arg(long, value_enum)]
        state: ProcessName,
    },
}

#[derive(Subcommand)]
enum RecoverCmd {
    Build {
        #[arg(long, value_enum)]
        process: ProcessName,
        #[arg(long)]
        instrument: Option<String>,
    },
    Scan {
        #[arg(long, value_enum)]
        process: ProcessName,
        /// Defaults to Θ for lambda and Ξ for omega.
        #[arg(long)]
        instrument: Option<String>,
        #[arg(long, value_enum, default_value = "projector")]
        convention: Convention,
        #[arg(long, default_value_t = presets::SCAN_GRID)]
        grid: usize,
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        #[arg(long, default_value_t = std::f64::consts::PI)]
        psi: f64,
        /// Replay with leg-local depolarizing noise.
        #[arg(long)]
        noise_depolarizing: Option<f64>,
        /// Replay with seeded leg-local rotations of this scale.
        #[arg(long)]
        noise_rotation: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum WalkCmd {
    Verify {
        #[arg(long, value_enum)]
        circuit: Option<CircuitName>,
        #[arg(long)]
        circuit_file: Option<PathBuf>,
        /// Target instrument name.
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 100)]
        inputs: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Args)]
struct CountsSource {
    #[arg(long, value_enum)]
    state: ProcessName,
    #[arg(long, default_value_t = presets::TOMO_SHOTS)]
    shots: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Counts CSV from `tomo simulate`; simulated when absent.
    #[arg(long)]
    counts: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mub")]
    settings: SettingFamily,
}

#[derive(Subcommand)]
enum TomoCmd {
    Simulate(CountsSource),
    Reconstruct(CountsSource),
    Bootstrap {
        #[command(flatten)]
        source: CountsSource,
        /// trace, purity, non-markovianity, cmi or fidelity (to the named state).
        #[arg(long, default_value = "non-markovianity")]
        statistic: String,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
    },
}

/// What a command produced and whether the run counts as a success.
struct Outcome {
    emitted: Emitted,
    ok_code: u8,
}

impl From<Emitted> for Outcome {
    fn from(emitted: Emitted) -> Self {
        let ok_code = if emitted.checks.iter().all(|c| c.pass) { 0 } else { EXIT_CHECKS };
        Self { emitted, ok_code }
    }
}

fn instrument_of(src: &InstrumentSource) -> Result<(String, proctensor::instrument::Instrument)> {
    commands::load_instrument(src.name.as_deref(), src.file.as_deref())
}

fn counts_of(src: &CountsSource) -> Result<proctensor::tomo::CountsTable> {
    commands::counts_from(src.state, src.counts.as_deref(), src.shots, src.seed, src.settings)
}

fn dispatch(cli: &Cli) -> Result<(Outcome, Option<PathBuf>)> {
    let fmt = cli.format;
    let mut output = cli.output.clone();
    let out: Outcome = match &cli.command {
        Command::Process { cmd: ProcessCmd::Build { process, matrix } } => commands::process_build(*process, *matrix, fmt)?.into(),
        Command::Instrument { cmd } => match cmd {
            InstrumentCmd::Show(src) => {
                let (name, inst) = instrument_of(src)?;
                commands::instrument_show(&name, &inst, fmt)?.into()
            }
            InstrumentCmd::Validate(src) => {
                let (name, inst) = instrument_of(src)?;
                let (emitted, valid) = commands::instrument_validate(&name, &inst, fmt)?;
                Outcome { emitted, ok_code: if valid { 0 } else { EXIT_VALIDATION } }
            }
            InstrumentCmd::Dual(src) => {
                let (name, inst) = instrument_of(src)?;
                commands::instrument_dual(&name, &inst, fmt)?.into()
            }
        },
        Command::Memory { cmd } => match cmd {
            MemoryCmd::Strength { process, instrument } => {
                let (name, inst) = instrument_of(instrument)?;
                commands::memory_strength_cmd(*process, &name, &inst, fmt)?.into()
            }
            MemoryCmd::Survey { process, cutoff, samples, seed, measure } => {
                anyhow::ensure!(fmt != Some(Format::Csv), "memory survey has no tabular form; use --format json");
                Emitted::json(&commands::survey(*process, *cutoff, *samples, *seed, (*measure).into())?)?.into()
            }
        },
        Command::States { cmd: StatesCmd::Emit { state } } => commands::states_emit(*state, fmt)?.into(),
        Command::Recover { cmd } => match cmd {
            RecoverCmd::Build { process, instrument } => {
                let name = instrument.as_deref().unwrap_or(process.blocking_instrument_name());
                let (name, inst) = commands::load_instrument(Some(name), None)?;
                commands::recover_build(*process, &name, &inst, fmt)?.into()
            }
            RecoverCmd::Scan { process, instrument, convention, grid, phi, psi, noise_depolarizing, noise_rotation, seed } => {
                let noise = (noise_depolarizing.is_some() || noise_rotation.is_some()).then(|| NoiseModel {
                    depolarizing: noise_depolarizing.unwrap_or(0.0),
                    rotation: noise_rotation.unwrap_or(0.0),
                });
                let req = ScanRequest {
                    process: *process,
                    instrument: instrument.clone().unwrap_or_else(|| process.blocking_instrument_name().into()),
                    convention: (*convention).into(),
                    grid: *grid,
                    phi: *phi,
                    psi: *psi,
                    noise,
                    seed: *seed,
                };
                commands::recover_scan(&req, fmt)?.into()
            }
        },
        Command::Walk { cmd: WalkCmd::Verify { circuit, circuit_file, target, inputs, seed } } => {
            anyhow::ensure!(fmt != Some(Format::Csv), "walk verify has no tabular form; use --format json");
            let (name, c) = commands::load_circuit(*circuit, circuit_file.as_deref())?;
            let (value, pass) = commands::walk_verify(&name, &c, target, *inputs, *seed)?;
            Outcome { emitted: Emitted::json(&value)?, ok_code: if pass { 0 } else { EXIT_CHECKS } }
        }
        Command::Tomo { cmd } => match cmd {
            TomoCmd::Simulate(src) => commands::tomo_simulate(&counts_of(src)?, fmt)?.into(),
            TomoCmd::Reconstruct(src) => commands::tomo_reconstruct(src.state, &counts_of(src)?, fmt)?.into(),
            TomoCmd::Bootstrap { source, statistic, resamples } => {
                commands::tomo_bootstrap(source.state, &counts_of(source)?, statistic, *resamples, source.seed, fmt)?.into()
            }
        },
        Command::Preset { name, seed } => presets::run(*name, *seed, fmt, &BTreeMap::new())?.into(),
        Command::Run { config } => {
            let cfg = RunConfig::parse(&commands::read_text(config)?).with_context(|| format!("config {}", config.display()))?;
            if output.is_none() {
                output = cfg.output.clone();
            }
            presets::run(cfg.preset, cfg.seed, fmt.or(cfg.format), &cfg.tolerances)?.into()
        }
    };
    Ok((out, output))
}

fn write_output(body: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("PROCTENSOR_THREADS") {
        let n: usize = v.parse().with_context(|| format!("PROCTENSOR_THREADS={v}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION } else { 0 });
        }
    };
    let run = || -> Result<u8> {
        configure_threads()?;
        let (out, path) = dispatch(&cli)?;
        write_output(&out.emitted.body, path.as_deref())?;
        for name in report::failures(&out.emitted.checks) {
            eprintln!("check failed: {name}");
        }
        Ok(out.ok_code)
    };
    match run() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
