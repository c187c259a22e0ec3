use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use molrate::core::analysis::{lower_bound, minimize_eq5_with, MultiStart, OneMemProblem};
use molrate::core::transmitter::{calibrate_power, solve_levels};
use molrate::core::Error as CoreError;
use molrate::core::PowerConvention;
use molrate::experiment::{sweep, Axis, ExperimentSpec, PowerUnit, TxName};
use molrate::io::{self as csvio, fmt12};
use molrate::{sim, verify, Error};

const THREADS_ENV: &str = "MOLRATE_THREADS";

#[derive(Parser)]
#[command(
    name = "molrate",
    version,
    about = "Adaptive molecule-release rates for diffusion channels"
)]
struct Cli {
    /// Worker threads (default: $MOLRATE_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hitting probabilities from physical parameters.
    Pi {
        #[command(flatten)]
        physics: PhysicsArgs,
        #[arg(long = "memory", default_value_t = 10)]
        channel_memory: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the level table for a memory size and power or target rate.
    Levels {
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long = "memory-bits")]
        memory_bits: u32,
        #[arg(
            long,
            conflicts_with = "target_c",
            required_unless_present = "target_c"
        )]
        power: Option<f64>,
        #[arg(long)]
        target_c: Option<f64>,
        #[arg(long, value_enum, default_value_t = PowerUnit::PerSlot)]
        power_convention: PowerUnit,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo bit error rate of one configuration.
    Simulate {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Per-slot trace CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Bit error rate along one parameter axis.
    Sweep {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// One-memory lower bound for T = 1..t_max.
    Bound {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        t_max: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Minimize the one-memory error under a power budget.
    Optimize {
        #[arg(long)]
        r: f64,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        power: f64,
        #[arg(long, default_value_t = 0.1)]
        pi1: f64,
        #[arg(long, default_value_t = molrate::core::analysis::DEFAULT_STATES)]
        states: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the numerical self-check battery.
    Verify,
}

#[derive(Args, Clone, Default)]
struct PhysicsArgs {
    #[arg(long)]
    distance: Option<f64>,
    #[arg(long = "diffusion")]
    diffusion_coeff: Option<f64>,
    #[arg(long = "velocity")]
    drift_velocity: Option<f64>,
    #[arg(long = "slot")]
    slot_duration: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct ChannelArgs {
    #[command(flatten)]
    physics: PhysicsArgs,
    #[arg(long)]
    pi_file: Option<PathBuf>,
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long = "channel-memory")]
    channel_memory: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum)]
    transmitter: Option<TxName>,
    #[arg(long = "memory-bits")]
    memory_bits: Option<u32>,
    #[arg(long)]
    power: Option<f64>,
    #[arg(long, value_enum)]
    power_convention: Option<PowerUnit>,
    #[arg(long)]
    target_c: Option<f64>,
    #[arg(long)]
    threshold: Option<u32>,
    #[arg(long)]
    slots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ChannelArgs {
    fn spec(&self) -> ExperimentSpec {
        ExperimentSpec {
            distance: self.physics.distance,
            diffusion_coeff: self.physics.diffusion_coeff,
            drift_velocity: self.physics.drift_velocity,
            slot_duration: self.physics.slot_duration,
            pi_file: self.pi_file.clone(),
            lambda0: self.lambda0,
            channel_memory: self.channel_memory,
            ..Default::default()
        }
    }
}

impl ExperimentArgs {
    fn spec(&self) -> Result<ExperimentSpec, Error> {
        let base = match &self.spec {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => ExperimentSpec::default(),
        };
        // a pi file on the command line replaces file physics, and vice versa
        let mut base = base;
        let flags = self.channel.spec();
        if flags.pi_file.is_some() {
            base.distance = None;
            base.diffusion_coeff = None;
            base.drift_velocity = None;
            base.slot_duration = None;
            base.channel_memory = None;
        }
        if flags.physics()?.is_some() {
            base.pi_file = None;
        }
        if self.power.is_some() {
            base.target_c = None;
        }
        if self.target_c.is_some() {
            base.power = None;
        }
        let top = ExperimentSpec {
            transmitter: self.transmitter,
            memory_bits: self.memory_bits,
            power: self.power,
            power_convention: self.power_convention,
            target_c: self.target_c,
            threshold: self.threshold,
            slots: self.slots,
            seed: self.seed,
            warmup: self.warmup,
            output: self.output.clone(),
            ..flags
        };
        Ok(base.overlaid(&top))
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

enum Failure {
    Usage(String),
    Numerical(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match &e {
            Error::Core(CoreError::InvalidParameter { .. }) => Failure::Usage(e.to_string()),
            Error::Core(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Pi {
            physics,
            channel_memory,
            output,
        } => {
            let spec = ChannelArgs {
                physics,
                channel_memory: Some(channel_memory),
                ..Default::default()
            }
            .spec();
            if spec.physics()?.is_none() {
                return Err(Failure::Usage(
                    "pi needs --distance, --diffusion, --velocity and --slot".into(),
                ));
            }
            let channel = spec.channel()?;
            csvio::write_pi(sink(&output)?, channel.pi())?;
        }
        Command::Levels {
            channel,
            memory_bits,
            power,
            target_c,
            power_convention,
            output,
        } => {
            let ch = channel.spec().channel()?;
            let table = match (power, target_c) {
                (Some(k), None) => {
                    let k = PowerConvention::from(power_convention).per_slot(k);
                    calibrate_power(&ch, memory_bits, k).map_err(Error::from)?
                }
                (None, Some(c)) => solve_levels(&ch, memory_bits, c).map_err(Error::from)?,
                _ => {
                    return Err(Failure::Usage(
                        "give exactly one of --power and --target-c".into(),
                    ))
                }
            };
            if table.any_clamped() {
                eprintln!("warning: some levels were negative and clamped to zero");
            }
            csvio::write_levels(sink(&output)?, &table)?;
        }
        Command::Simulate { exp, trace } => {
            let spec = exp.spec()?;
            let built = spec.resolve()?;
            let cfg = &built.config;
            let est = if let Some(path) = &trace {
                let (est, rows) = sim::run_with_trace(cfg)?;
                csvio::write_trace(File::create(path).map_err(Error::from)?, &rows)?;
                est
            } else {
                sim::run(cfg)?
            };
            let mut w = csv::Writer::from_writer(sink(&spec.output)?);
            let analytic = built.analytic_error.map(fmt12).unwrap_or_default();
            let write = |w: &mut csv::Writer<Box<dyn Write>>| -> csv::Result<()> {
                w.write_record([
                    "threshold",
                    "trials",
                    "errors",
                    "ber",
                    "ci95",
                    "analytic_error",
                ])?;
                w.write_record([
                    cfg.decoder.threshold.to_string(),
                    est.trials.to_string(),
                    est.errors.to_string(),
                    fmt12(est.ber),
                    fmt12(est.ci95),
                    analytic,
                ])?;
                w.flush()?;
                Ok(())
            };
            write(&mut w).map_err(Error::from)?;
        }
        Command::Sweep { exp, axis, values } => {
            let mut spec = exp.spec()?;
            spec.axis = axis.or(spec.axis);
            spec.values = values.or(spec.values);
            let (Some(axis), Some(values)) = (&spec.axis, &spec.values) else {
                return Err(Failure::Usage("sweep needs an axis and values".into()));
            };
            let rows = sweep(&spec, Axis::parse(axis)?, values)?;
            csvio::write_sweep(sink(&spec.output)?, &rows)?;
        }
        Command::Bound { r, t_max, output } => {
            if t_max == 0 {
                return Err(Failure::Usage("--t-max must be at least 1".into()));
            }
            let rows = (1..=t_max)
                .map(|t| lower_bound(r, t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(Error::from)?;
            csvio::write_bounds(sink(&output)?, &rows)?;
        }
        Command::Optimize {
            r,
            t,
            power,
            pi1,
            states,
            seed,
            output,
        } => {
            let problem = OneMemProblem::new(r, t, power, pi1)
                .and_then(|p| p.with_states(states))
                .map_err(Error::from)?;
            let sol = minimize_eq5_with(
                &problem,
                &MultiStart {
                    seed,
                    ..Default::default()
                },
            );
            let mut w = csv::Writer::from_writer(sink(&output)?);
            let mut write = || -> csv::Result<()> {
                w.write_record(["state", "a", "release_rate"])?;
                for i in 0..states {
                    w.write_record([
                        i.to_string(),
                        fmt12(sol.rates.get(i)),
                        fmt12(sol.rates.release_rate(i, pi1)),
                    ])?;
                }
                w.flush()?;
                Ok(())
            };
            write().map_err(Error::from)?;
            eprintln!(
                "min_error={} kkt_residual={:.3e} converged={}",
                fmt12(sol.error),
                sol.kkt_residual,
                sol.converged
            );
            if !sol.converged {
                return Err(Failure::Numerical(
                    "optimizer did not reach the KKT tolerance".into(),
                ));
            }
        }
        Command::Verify => {
            let checks = verify::run_battery();
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if !checks.iter().all(|c| c.passed) {
                return Err(Failure::Verification);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let threads = cli
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Verification) => ExitCode::from(3),
    }
}
