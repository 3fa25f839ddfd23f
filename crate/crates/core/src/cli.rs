//! The `xbar` command-line front end.
//!
//! Settings resolve as flags, then the config file (`--config` or
//! `$XBAR_CONFIG`), then built-in defaults.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::config::{keys_help, ConfigError, RunConfig, CONFIG_ENV};
use crate::device::{trace_iv, DeviceError};
use crate::readout::{read, ReadError};
use crate::sweep::{self, Axis, SweepError, SweepRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{params}: {source}")]
    Read {
        params: String,
        #[source]
        source: ReadError,
    },
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("iv trace: {0}")]
    Trace(#[from] DeviceError),
    #[error("{path}: {source}")]
    Output {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "xbar",
    version,
    about = "Read margin and read power of memristive crossbar arrays",
    after_help = keys_help()
)]
pub struct Cli {
    /// Config file of `key = value` lines.
    #[arg(long, global = true, env = CONFIG_ENV, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Set any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// CSV output path (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<String>,
    /// Gnuplot script output path (sweeps only).
    #[arg(long, global = true, value_name = "PATH")]
    pub plot: Option<String>,
    /// Sweep worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<String>,
    #[arg(long, global = true)]
    pub n: Option<String>,
    #[arg(long, global = true)]
    pub scheme: Option<String>,
    /// Comma-separated schemes for sweeps.
    #[arg(long, global = true)]
    pub schemes: Option<String>,
    #[arg(long, global = true)]
    pub variant: Option<String>,
    #[arg(long, global = true)]
    pub pattern: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[arg(long = "r-wire", global = true)]
    pub r_wire: Option<String>,
    #[arg(long = "r-on", global = true)]
    pub r_on: Option<String>,
    #[arg(long = "r-off", global = true)]
    pub r_off: Option<String>,
    #[arg(long, global = true)]
    pub ratio: Option<String>,
    #[arg(long = "r-sense", global = true)]
    pub r_sense: Option<String>,
    #[arg(long = "v-ws", global = true)]
    pub v_ws: Option<String>,
    #[arg(long, global = true)]
    pub k: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    /// Comma-separated grid for the swept axis.
    #[arg(long, global = true)]
    pub values: Option<String>,
    #[arg(long, global = true)]
    pub amplitude: Option<String>,
    #[arg(long, global = true)]
    pub freq: Option<String>,
    #[arg(long, global = true)]
    pub cycles: Option<String>,
    #[arg(long = "steps-per-cycle", global = true)]
    pub steps_per_cycle: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sine-driven I-V trace of a single device.
    Iv,
    /// Read the target cell in LRS and HRS; print margin and power.
    Read,
    /// Sweep the array size.
    SweepSize,
    /// Sweep the interconnect resistance.
    SweepWire,
    /// Sweep R_ON at a fixed HRS/LRS ratio.
    SweepRon,
    /// Sweep the HRS/LRS ratio.
    SweepRatio,
    /// Sweep the selector nonlinearity k.
    SweepSelector,
    /// Size sweep of the linear device paired with the rectifying device.
    SweepLinear,
}

impl Command {
    fn axis(self) -> Option<(Axis, &'static str)> {
        match self {
            Command::Iv | Command::Read => None,
            Command::SweepSize | Command::SweepLinear => Some((Axis::Size, "sizes")),
            Command::SweepWire => Some((Axis::WireResistance, "wires")),
            Command::SweepRon => Some((Axis::ROn, "r_ons")),
            Command::SweepRatio => Some((Axis::RectRatio, "ratios")),
            Command::SweepSelector => Some((Axis::SelectorK, "ks")),
        }
    }
}

impl Cli {
    /// Resolves defaults, the config file and flags, in increasing priority.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.merge_file(path)?;
        }
        let grid_key = self.command.axis().map(|(_, key)| key).unwrap_or("sizes");
        let flags = [
            ("out", &self.out),
            ("plot", &self.plot),
            ("jobs", &self.jobs),
            ("n", &self.n),
            ("scheme", &self.scheme),
            ("schemes", &self.schemes),
            ("variant", &self.variant),
            ("pattern", &self.pattern),
            ("seed", &self.seed),
            ("r_wire", &self.r_wire),
            ("r_on", &self.r_on),
            ("r_off", &self.r_off),
            ("ratio", &self.ratio),
            ("r_sense", &self.r_sense),
            ("v_ws", &self.v_ws),
            ("k", &self.k),
            ("gamma", &self.gamma),
            (grid_key, &self.values),
            ("amplitude", &self.amplitude),
            ("freq", &self.freq),
            ("cycles", &self.cycles),
            ("steps_per_cycle", &self.steps_per_cycle),
        ];
        for assignment in &self.set {
            let Some((key, value)) = assignment.split_once('=') else {
                return Err(ConfigError::Value {
                    key: assignment.clone(),
                    message: "expected --set key=value".into(),
                }
                .into());
            };
            cfg.set(key.trim(), value)?;
        }
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

fn open(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

fn io_err(path: &str) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Output { path: path.to_string(), source }
}

/// Parses `args` (program name first) and runs the subcommand. CSV goes to
/// `--out` or else `out`; summaries and row diagnostics go to `diag`.
pub fn run<I, T>(args: I, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let cfg = cli.resolve()?;
    match cli.command {
        Command::Iv => run_iv(&cfg, out, diag),
        Command::Read => run_read(&cfg, out, diag),
        cmd => run_sweep(cmd, &cfg, out, diag),
    }
}

fn run_iv(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    let design = cfg.design()?;
    if design.variant == crate::crossbar::Variant::Selector {
        return Err(CliError::Unsupported("iv traces a bare memristor; use variant rectifying or linear".into()));
    }
    let mut params = design.device;
    params.rectifying = design.variant == crate::crossbar::Variant::Rectifying;
    let samples = trace_iv(&params, cfg.initial_state()?, &cfg.waveform, cfg.steps_per_cycle)?;
    let write = |w: &mut dyn Write| -> Result<(), CliError> {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["t", "v", "i", "w"])?;
        for s in &samples {
            csv.write_record([s.t, s.v, s.i, s.w].map(|x| format!("{x:.16e}")))?;
        }
        csv.flush().map_err(io_err("csv"))?;
        Ok(())
    };
    match &cfg.out {
        Some(path) => {
            let mut file = open(path)?;
            write(&mut file)?;
            file.flush().map_err(io_err(&path.display().to_string()))?;
            let w_max = samples.iter().map(|s| s.w).fold(0.0, f64::max);
            writeln!(diag, "iv: {} samples, peak w = {w_max:.4}, wrote {}", samples.len(), path.display())
                .map_err(io_err("stderr"))?;
        }
        None => write(out)?,
    }
    Ok(())
}

fn run_read(cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    let config = cfg.crossbar()?;
    let design = cfg.design()?;
    let params = format!(
        "read {}x{} scheme={} variant={} r_wire={} r_on={} r_off={}",
        config.n_rows, config.n_cols, config.scheme, design.variant, config.r_wire, design.device.r_on, design.device.r_off
    );
    let result = read(&config, &design, &cfg.solve).map_err(|source| CliError::Read { params: params.clone(), source })?;
    let summary = format!(
        "{params}: RM = {:.4} (v_out LRS {:.6} V, HRS {:.6} V), power LRS {:.4e} W, HRS {:.4e} W",
        result.read_margin, result.v_out_lrs, result.v_out_hrs, result.power_lrs, result.power_hrs
    );
    writeln!(out, "{summary}").map_err(io_err("stdout"))?;
    if let Some(path) = &cfg.out {
        let row = SweepRow::new(&config, &design, Ok(result));
        let mut file = open(path)?;
        sweep::write_csv(std::slice::from_ref(&row), &mut file)?;
        file.flush().map_err(io_err(&path.display().to_string()))?;
        writeln!(diag, "wrote {}", path.display()).map_err(io_err("stderr"))?;
    }
    Ok(())
}

fn run_sweep(cmd: Command, cfg: &RunConfig, out: &mut dyn Write, diag: &mut dyn Write) -> Result<(), CliError> {
    let (axis, _) = cmd.axis().expect("sweep subcommand");
    let spec = cfg.sweep_spec(axis, cmd == Command::SweepLinear)?;
    let jobs = cfg.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = match cmd {
        Command::SweepSize => sweep::sweep_size(&spec, jobs)?,
        Command::SweepWire => sweep::sweep_wire(&spec, jobs)?,
        Command::SweepRon => sweep::sweep_ron(&spec, jobs)?,
        Command::SweepRatio => sweep::sweep_ratio(&spec, jobs)?,
        Command::SweepSelector => sweep::sweep_selector(&spec, jobs)?,
        Command::SweepLinear => sweep::sweep_linear_comparison(&spec, jobs)?,
        Command::Iv | Command::Read => unreachable!(),
    };
    for row in rows.iter().filter(|r| r.failed()) {
        let k = row.k.map(|k| format!(" k={k}")).unwrap_or_default();
        writeln!(
            diag,
            "row failed: scheme={} variant={} n={} r_wire={} r_on={} r_off={}{k}: {}",
            row.scheme,
            row.variant,
            row.n,
            row.r_wire,
            row.r_on,
            row.r_off,
            row.result.as_ref().unwrap_err()
        )
        .map_err(io_err("stderr"))?;
    }
    let csv_name = match &cfg.out {
        Some(path) => {
            let mut file = open(path)?;
            sweep::write_csv(&rows, &mut file)?;
            file.flush().map_err(io_err(&path.display().to_string()))?;
            let failed = rows.iter().filter(|r| r.failed()).count();
            writeln!(diag, "wrote {} rows ({failed} failed) to {}", rows.len(), path.display())
                .map_err(io_err("stderr"))?;
            path.display().to_string()
        }
        None => {
            sweep::write_csv(&rows, &mut *out)?;
            "data.csv".to_string()
        }
    };
    if let Some(path) = &cfg.plot {
        let mut file = open(path)?;
        file.write_all(sweep::plot_script(axis, &csv_name, &rows).as_bytes())
            .and_then(|_| file.flush())
            .map_err(io_err(&path.display().to_string()))?;
    }
    Ok(())
}

/// Runs with process stdio and maps the outcome to an exit status.
pub fn main_exit<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut diag = stderr.lock();
    match run(args, &mut out, &mut diag) {
        Ok(()) => match out.flush() {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(diag, "xbar: stdout: {e}");
                1
            }
        },
        Err(CliError::Usage(e)) => {
            drop(out);
            drop(diag);
            let _ = e.print();
            e.exit_code()
        }
        Err(e) => {
            let _ = writeln!(diag, "xbar: {e}");
            1
        }
    }
}
