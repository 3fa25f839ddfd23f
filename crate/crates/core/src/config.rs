//! Flat key=value run configuration.
//!
//! ```text
//! # comment
//! r_on = 5e5
//! ratio = 1e3
//! schemes = v2, v3, ff
//! ```
//!
//! Every recognised key is listed in [`KEYS`]; anything else is rejected.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::crossbar::{sense_resistance, CellDesign, CrossbarConfig, Pattern, Scheme, Variant};
use crate::device::{DeviceParams, DeviceState, SelectorParams, Waveform, DEFAULT_STEPS_PER_CYCLE};
use crate::solver::{InitialGuess, SolveOptions};
use crate::sweep::{
    Axis, SweepSpec, DEFAULT_KS, DEFAULT_RATIOS, DEFAULT_R_ONS, DEFAULT_SIZES, DEFAULT_WIRES,
};

/// Environment variable naming the config file used when `--config` is absent.
pub const CONFIG_ENV: &str = "XBAR_CONFIG";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{path}:{line}: `{key}`: {message}")]
    Parse {
        path: String,
        line: usize,
        key: String,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("inconsistent configuration: {0}")]
    Inconsistent(String),
}

pub struct KeyDoc {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, help: &'static str) -> KeyDoc {
    KeyDoc { key, default, help }
}

pub const KEYS: &[KeyDoc] = &[
    key("r_off", "5e8", "HRS resistance (ohm)"),
    key("r_on", "5e5", "LRS resistance (ohm)"),
    key("ratio", "r_off/r_on", "HRS/LRS ratio; sets r_off = ratio * r_on"),
    key("r_sense", "sqrt(r_on*r_off) = 1.58e7", "sense resistor (ohm)"),
    key("r_wire", "5", "interconnect resistance per segment (ohm)"),
    key("v_th", "1.5", "switching threshold (V)"),
    key("alpha", "2.5e8", "state rate above threshold (1/(V s))"),
    key("beta", "0", "state rate below threshold (1/(V s))"),
    key("gamma", "1e-8", "selector current prefactor (A)"),
    key("k", "1", "selector nonlinearity"),
    key("p", "18.4", "selector exponent scale (1/V)"),
    key("variant", "rectifying", "cell: rectifying | linear | selector"),
    key("n", "64", "array size for `read` (square)"),
    key("rows", "n", "word lines for `read`"),
    key("cols", "n", "bit lines for `read`"),
    key("target_row", "0", "row of the cell under read"),
    key("target_col", "cols-1", "column of the cell under read"),
    key("scheme", "v2", "read scheme for `read`: v2 | v3 | ff"),
    key("schemes", "per sweep", "comma-separated read schemes for sweeps"),
    key("pattern", "all-lrs", "unselected data: all-lrs | all-hrs | checkerboard | random"),
    key("v_ws", "1", "read voltage on the selected word line (V)"),
    key("seed", "0", "global seed for random patterns"),
    key("max_iters", "100", "Newton iteration limit"),
    key("v_tol", "1e-9", "Newton step tolerance (V)"),
    key("i_tol", "1e-12", "KCL residual tolerance (A)"),
    key("damping", "1", "first trial Newton step scale, in (0, 1]"),
    key("initial_guess", "linear", "Newton start: linear | zero"),
    key("sizes", "4,8,16,32,64,128", "array sizes for sweep-size and sweep-linear"),
    key("wires", "5,10,20,40,80,160,320", "r_wire grid for sweep-wire (ohm)"),
    key("r_ons", "1e4,5e4,1e5,5e5,1e6,5e6", "r_on grid for sweep-ron (ohm)"),
    key("ratios", "1e1,1e2,1e3,1e4", "ratio grid for sweep-ratio"),
    key("ks", "0.001,...,10", "k grid for sweep-selector"),
    key("amplitude", "2", "iv drive peak voltage (V)"),
    key("freq", "1e7", "iv drive frequency (Hz)"),
    key("cycles", "1", "iv drive periods"),
    key("steps_per_cycle", "10000", "iv integration steps per period (>= 1000)"),
    key("w_init", "0", "iv initial state in [0, 1]"),
    key("jobs", "available cores", "sweep worker threads"),
    key("out", "stdout", "CSV output path"),
    key("plot", "none", "gnuplot script output path for sweeps"),
];

/// Every setting the command-line front end can consume.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub ratio: Option<f64>,
    pub r_sense: Option<f64>,
    pub selector: SelectorParams,
    pub variant: Variant,
    pub r_wire: f64,
    pub n: usize,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub target_row: Option<usize>,
    pub target_col: Option<usize>,
    pub scheme: Scheme,
    pub schemes: Option<Vec<Scheme>>,
    pub pattern: Pattern,
    pub v_ws: f64,
    pub seed: u64,
    pub solve: SolveOptions,
    pub sizes: Vec<f64>,
    pub wires: Vec<f64>,
    pub r_ons: Vec<f64>,
    pub ratios: Vec<f64>,
    pub ks: Vec<f64>,
    pub waveform: Waveform,
    pub steps_per_cycle: usize,
    pub w_init: f64,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    explicit: BTreeSet<&'static str>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            ratio: None,
            r_sense: None,
            selector: SelectorParams::default(),
            variant: Variant::Rectifying,
            r_wire: 5.0,
            n: 64,
            rows: None,
            cols: None,
            target_row: None,
            target_col: None,
            scheme: Scheme::V2,
            schemes: None,
            pattern: Pattern::AllLrs,
            v_ws: 1.0,
            seed: 0,
            solve: SolveOptions::default(),
            sizes: DEFAULT_SIZES.to_vec(),
            wires: DEFAULT_WIRES.to_vec(),
            r_ons: DEFAULT_R_ONS.to_vec(),
            ratios: DEFAULT_RATIOS.to_vec(),
            ks: DEFAULT_KS.to_vec(),
            waveform: Waveform::default(),
            steps_per_cycle: DEFAULT_STEPS_PER_CYCLE,
            w_init: 0.0,
            jobs: None,
            out: None,
            plot: None,
            explicit: BTreeSet::new(),
        }
    }
}

fn num<T: FromStr>(value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse `{value}` as a number"))
}

fn list<T: FromStr>(value: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("`{s}`: {e}")))
        .collect()
}

fn floats(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(num)
        .collect()
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        let err = |message: String| ConfigError::Value { key: key.to_string(), message };
        let Some(doc) = KEYS.iter().find(|d| d.key == key) else {
            return Err(err("unknown key".into()));
        };
        self.apply(key, value).map_err(err)?;
        self.explicit.insert(doc.key);
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "r_off" => self.device.r_off = num(value)?,
            "r_on" => self.device.r_on = num(value)?,
            "ratio" => self.ratio = Some(num(value)?),
            "r_sense" => self.r_sense = Some(num(value)?),
            "r_wire" => self.r_wire = num(value)?,
            "v_th" => self.device.v_th = num(value)?,
            "alpha" => self.device.alpha = num(value)?,
            "beta" => self.device.beta = num(value)?,
            "gamma" => self.selector.gamma = num(value)?,
            "k" => self.selector.k = num(value)?,
            "p" => self.selector.p = num(value)?,
            "variant" => self.variant = value.parse()?,
            "n" => self.n = num(value)?,
            "rows" => self.rows = Some(num(value)?),
            "cols" => self.cols = Some(num(value)?),
            "target_row" => self.target_row = Some(num(value)?),
            "target_col" => self.target_col = Some(num(value)?),
            "scheme" => self.scheme = value.parse()?,
            "schemes" => self.schemes = Some(list(value)?),
            "pattern" => self.pattern = value.parse()?,
            "v_ws" => self.v_ws = num(value)?,
            "seed" => self.seed = num(value)?,
            "max_iters" => self.solve.max_iters = num(value)?,
            "v_tol" => self.solve.v_tol = num(value)?,
            "i_tol" => self.solve.i_tol = num(value)?,
            "damping" => self.solve.damping = num(value)?,
            "initial_guess" => {
                self.solve.initial_guess = match value {
                    "linear" => InitialGuess::LinearizedNetwork,
                    "zero" => InitialGuess::Zero,
                    other => return Err(format!("unknown initial guess `{other}` (expected linear or zero)")),
                }
            }
            "sizes" => self.sizes = floats(value)?,
            "wires" => self.wires = floats(value)?,
            "r_ons" => self.r_ons = floats(value)?,
            "ratios" => self.ratios = floats(value)?,
            "ks" => self.ks = floats(value)?,
            "amplitude" => self.waveform.amplitude = num(value)?,
            "freq" => self.waveform.frequency = num(value)?,
            "cycles" => self.waveform.cycles = num(value)?,
            "steps_per_cycle" => self.steps_per_cycle = num(value)?,
            "w_init" => self.w_init = num(value)?,
            "jobs" => self.jobs = Some(num(value)?),
            "out" => self.out = path(),
            "plot" => self.plot = path(),
            _ => unreachable!("key table and setter out of sync: {key}"),
        }
        Ok(())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Applies a config document; `origin` names it in diagnostics.
    pub fn merge_str(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |key: &str, message: String| ConfigError::Parse {
                path: origin.to_string(),
                line: i + 1,
                key: key.to_string(),
                message,
            };
            let Some((k, v)) = line.split_once('=') else {
                return Err(parse_err(line, "expected `key = value`".into()));
            };
            let k = k.trim();
            self.set(k, v).map_err(|e| match e {
                ConfigError::Value { message, .. } => parse_err(k, message),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.merge_str(&text, &path.display().to_string())
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.merge_file(path)?;
        Ok(cfg)
    }

    /// Device constants with `ratio` resolved against `r_on`.
    pub fn device_params(&self) -> Result<DeviceParams, ConfigError> {
        let mut dev = self.device;
        if let Some(ratio) = self.ratio {
            let derived = ratio * dev.r_on;
            if self.is_explicit("r_off") && (dev.r_off - derived).abs() > 1e-9 * derived.abs() {
                return Err(ConfigError::Inconsistent(format!(
                    "r_off = {} contradicts ratio * r_on = {derived}",
                    dev.r_off
                )));
            }
            dev.r_off = derived;
        }
        dev.validate()
            .map_err(|e| ConfigError::Inconsistent(e.to_string()))?;
        Ok(dev)
    }

    pub fn design(&self) -> Result<CellDesign, ConfigError> {
        let device = self.device_params()?;
        Ok(CellDesign::selector(device, self.selector).with_variant(self.variant))
    }

    pub fn sense(&self, device: &DeviceParams) -> f64 {
        self.r_sense
            .unwrap_or_else(|| sense_resistance(device.r_on, device.r_off))
    }

    /// Array configuration for a single read.
    pub fn crossbar(&self) -> Result<CrossbarConfig, ConfigError> {
        let device = self.device_params()?;
        let rows = self.rows.unwrap_or(self.n);
        let cols = self.cols.unwrap_or(self.n);
        let mut cfg = CrossbarConfig::new(rows, cols);
        cfg.r_wire = self.r_wire;
        cfg.pattern = self.pattern.with_seed(self.seed);
        cfg.scheme = self.scheme;
        cfg.v_ws = self.v_ws;
        cfg.r_sense = self.sense(&device);
        cfg.target = (
            self.target_row.unwrap_or(cfg.target.0),
            self.target_col.unwrap_or(cfg.target.1),
        );
        Ok(cfg)
    }

    /// Sweep along `axis` built from the defaults for that axis, overridden by
    /// whatever this configuration sets explicitly.
    pub fn sweep_spec(&self, axis: Axis, linear: bool) -> Result<SweepSpec, ConfigError> {
        let mut spec = match (axis, linear) {
            (Axis::Size, true) => SweepSpec::linear_comparison(),
            (Axis::Size, false) => SweepSpec::size(),
            (Axis::WireResistance, _) => SweepSpec::wire(),
            (Axis::ROn, _) => SweepSpec::ron(),
            (Axis::RectRatio, _) => SweepSpec::ratio(),
            (Axis::SelectorK, _) => SweepSpec::selector(),
        };
        let mut design = self.design()?;
        if !self.is_explicit("variant") {
            design = design.with_variant(spec.design.variant);
        }
        spec.design = design;
        if let Some(schemes) = &self.schemes {
            spec.schemes = schemes.clone();
        }
        spec.values = match axis {
            Axis::Size => self.sizes.clone(),
            Axis::WireResistance => self.wires.clone(),
            Axis::ROn => self.r_ons.clone(),
            Axis::RectRatio => self.ratios.clone(),
            Axis::SelectorK => self.ks.clone(),
        };
        let mut base = self.crossbar()?;
        if !(self.is_explicit("n") || self.is_explicit("rows") || self.is_explicit("cols")) {
            base.n_rows = spec.base.n_rows;
            base.n_cols = spec.base.n_cols;
        }
        if !(self.is_explicit("target_row") || self.is_explicit("target_col")) {
            base.target = crate::crossbar::worst_case_target(&base);
        }
        spec.base = base;
        spec.options = self.solve.clone();
        spec.seed = self.seed;
        Ok(spec)
    }

    pub fn initial_state(&self) -> Result<DeviceState, ConfigError> {
        if !(0.0..=1.0).contains(&self.w_init) {
            return Err(ConfigError::Value {
                key: "w_init".into(),
                message: format!("{} is outside [0, 1]", self.w_init),
            });
        }
        Ok(DeviceState::new(self.w_init))
    }
}

/// `--help` appendix listing every key with its default.
pub fn keys_help() -> String {
    let width = KEYS.iter().map(|d| d.key.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (file `key = value`, or `--set key=value`), with defaults:\n");
    for d in KEYS {
        s.push_str(&format!("  {:width$}  {}  [default: {}]\n", d.key, d.help, d.default));
    }
    s
}
