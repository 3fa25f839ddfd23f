//! Declarative parameter sweeps over array size, interconnect resistance,
//! R_ON, HRS/LRS ratio and selector nonlinearity, emitted as CSV rows.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;
use thiserror::Error;

use crate::crossbar::{
    sense_resistance, worst_case_target, CellDesign, CrossbarConfig, Scheme, Variant,
};
use crate::readout::{read, ReadResult};
use crate::solver::SolveOptions;

/// Column set of every sweep CSV, in order.
pub const CSV_HEADER: [&str; 13] = [
    "scheme",
    "variant",
    "n",
    "r_wire",
    "r_on",
    "r_off",
    "ratio",
    "k",
    "v_out_lrs",
    "v_out_hrs",
    "read_margin",
    "power_lrs",
    "power_hrs",
];

pub const DEFAULT_SIZES: [f64; 6] = [4.0, 8.0, 16.0, 32.0, 64.0, 128.0];
pub const DEFAULT_WIRES: [f64; 7] = [5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0];
pub const DEFAULT_R_ONS: [f64; 6] = [1e4, 5e4, 1e5, 5e5, 1e6, 5e6];
pub const DEFAULT_RATIOS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];
pub const DEFAULT_KS: [f64; 12] = [
    0.001, 0.003, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0,
];

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("could not start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Size,
    WireResistance,
    ROn,
    RectRatio,
    SelectorK,
}

impl Axis {
    /// CSV column holding the swept quantity.
    pub fn column(self) -> &'static str {
        match self {
            Axis::Size => "n",
            Axis::WireResistance => "r_wire",
            Axis::ROn => "r_on",
            Axis::RectRatio => "ratio",
            Axis::SelectorK => "k",
        }
    }

    fn log_scale(self) -> bool {
        !matches!(self, Axis::WireResistance)
    }
}

/// One sweep: an axis with its grid, the schemes to run at every grid point,
/// and the base case the axis perturbs.
///
/// Coupled fields per axis:
/// - `Size`: square array, target moved to the worst-case corner
/// - `ROn`: `r_off` keeps the base ratio; `r_sense` tracks the geometric mean
/// - `RectRatio`: `r_off = ratio * r_on`; `r_sense` tracks the geometric mean
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub base: CrossbarConfig,
    pub design: CellDesign,
    pub options: SolveOptions,
    /// Mixed with the grid index to seed random data patterns.
    pub seed: u64,
}

impl SweepSpec {
    fn with_defaults(axis: Axis, values: &[f64], schemes: &[Scheme], n: usize, design: CellDesign) -> Self {
        Self {
            axis,
            values: values.to_vec(),
            schemes: schemes.to_vec(),
            base: CrossbarConfig::square(n),
            design,
            options: SolveOptions::default(),
            seed: 0,
        }
    }

    /// Read margin and power against array size, rectifying device.
    pub fn size() -> Self {
        Self::with_defaults(Axis::Size, &DEFAULT_SIZES, &Scheme::ALL, 64, CellDesign::default())
    }

    /// Interconnect resistance at 64×64 under V/2.
    pub fn wire() -> Self {
        Self::with_defaults(Axis::WireResistance, &DEFAULT_WIRES, &[Scheme::V2], 64, CellDesign::default())
    }

    /// R_ON at a fixed HRS/LRS ratio, 64×64, V/2.
    pub fn ron() -> Self {
        Self::with_defaults(Axis::ROn, &DEFAULT_R_ONS, &[Scheme::V2], 64, CellDesign::default())
    }

    /// HRS/LRS (rectification) ratio at fixed R_ON, 64×64.
    pub fn ratio() -> Self {
        Self::with_defaults(Axis::RectRatio, &DEFAULT_RATIOS, &Scheme::ALL, 64, CellDesign::default())
    }

    /// Selector nonlinearity of a 1S1M array, 64×64.
    pub fn selector() -> Self {
        let design = CellDesign::default().with_variant(Variant::Selector);
        Self::with_defaults(Axis::SelectorK, &DEFAULT_KS, &Scheme::ALL, 64, design)
    }

    /// Array size with the linear (non-rectifying) device.
    pub fn linear_comparison() -> Self {
        let design = CellDesign::default().with_variant(Variant::Linear);
        Self::with_defaults(Axis::Size, &DEFAULT_SIZES, &Scheme::ALL, 64, design)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: String| Err(SweepError::InvalidSpec(m));
        if self.values.is_empty() {
            return bad("empty value grid".into());
        }
        if self.schemes.is_empty() {
            return bad("no read schemes selected".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite grid value".into());
        }
        let increasing = self.values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return bad("grid values must be strictly monotone".into());
        }
        if self.axis == Axis::Size
            && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0)
        {
            return bad("array sizes must be positive integers".into());
        }
        if self.axis == Axis::SelectorK && self.design.variant != Variant::Selector {
            return bad("a selector-k sweep needs the selector cell variant".into());
        }
        Ok(())
    }

    /// Array configuration and cell design at grid point `index`.
    pub fn point(&self, index: usize, scheme: Scheme) -> (CrossbarConfig, CellDesign) {
        let value = self.values[index];
        let mut config = self.base.clone();
        let mut design = self.design;
        config.scheme = scheme;
        config.pattern = config.pattern.with_seed(mix_seed(self.seed, index as u64));
        match self.axis {
            Axis::Size => {
                let n = value as usize;
                config.n_rows = n;
                config.n_cols = n;
                config.target = worst_case_target(&config);
            }
            Axis::WireResistance => config.r_wire = value,
            Axis::ROn => {
                let ratio = design.device.ratio();
                design.device.r_on = value;
                design.device.r_off = value * ratio;
                config.r_sense = sense_resistance(design.device.r_on, design.device.r_off);
            }
            Axis::RectRatio => {
                design.device.r_off = design.device.r_on * value;
                config.r_sense = sense_resistance(design.device.r_on, design.device.r_off);
            }
            Axis::SelectorK => design.selector.k = value,
        }
        (config, design)
    }
}

// splitmix64 finalizer over (seed, index).
fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub variant: Variant,
    pub n: usize,
    pub r_wire: f64,
    pub r_on: f64,
    pub r_off: f64,
    pub ratio: f64,
    /// Selector nonlinearity, only for selector cells.
    pub k: Option<f64>,
    pub result: Result<ReadResult, String>,
}

impl SweepRow {
    pub fn new(config: &CrossbarConfig, design: &CellDesign, result: Result<ReadResult, String>) -> Self {
        Self {
            scheme: config.scheme,
            variant: design.variant,
            n: config.n_rows,
            r_wire: config.r_wire,
            r_on: design.device.r_on,
            r_off: design.device.r_off,
            ratio: design.device.ratio(),
            k: (design.variant == Variant::Selector).then_some(design.selector.k),
            result,
        }
    }

    pub fn read_margin(&self) -> f64 {
        self.result.as_ref().map_or(f64::NAN, |r| r.read_margin)
    }

    pub fn power_lrs(&self) -> f64 {
        self.result.as_ref().map_or(f64::NAN, |r| r.power_lrs)
    }

    pub fn power_hrs(&self) -> f64 {
        self.result.as_ref().map_or(f64::NAN, |r| r.power_hrs)
    }

    pub fn failed(&self) -> bool {
        self.result.is_err()
    }

    fn record(&self) -> Vec<String> {
        let f = |x: f64| format!("{x:.16e}");
        let (a, b, c, d, e) = match &self.result {
            Ok(r) => (r.v_out_lrs, r.v_out_hrs, r.read_margin, r.power_lrs, r.power_hrs),
            Err(_) => (f64::NAN, f64::NAN, f64::NAN, f64::NAN, f64::NAN),
        };
        vec![
            self.scheme.to_string(),
            self.variant.to_string(),
            self.n.to_string(),
            f(self.r_wire),
            f(self.r_on),
            f(self.r_off),
            f(self.ratio),
            self.k.map(f).unwrap_or_default(),
            f(a),
            f(b),
            f(c),
            f(d),
            f(e),
        ]
    }
}

/// Runs every (grid value × scheme) read on `jobs` worker threads. Rows come
/// back in grid order, schemes in the order given; a failed read yields a
/// row carrying its error instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    spec.validate()?;
    let points: Vec<(usize, Scheme)> = (0..spec.values.len())
        .flat_map(|i| spec.schemes.iter().map(move |&s| (i, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    let rows = pool.install(|| {
        points
            .par_iter()
            .map(|&(i, scheme)| {
                let (config, design) = spec.point(i, scheme);
                let result = read(&config, &design, &spec.options).map_err(|e| e.to_string());
                SweepRow::new(&config, &design, result)
            })
            .collect()
    });
    Ok(rows)
}

fn expect_axis(spec: &SweepSpec, axis: Axis) -> Result<(), SweepError> {
    if spec.axis == axis {
        Ok(())
    } else {
        Err(SweepError::InvalidSpec(format!("expected a {axis:?} sweep, got {:?}", spec.axis)))
    }
}

pub fn sweep_size(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    expect_axis(spec, Axis::Size)?;
    run_sweep(spec, jobs)
}

pub fn sweep_wire(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    expect_axis(spec, Axis::WireResistance)?;
    run_sweep(spec, jobs)
}

pub fn sweep_ron(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    expect_axis(spec, Axis::ROn)?;
    run_sweep(spec, jobs)
}

pub fn sweep_ratio(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    expect_axis(spec, Axis::RectRatio)?;
    run_sweep(spec, jobs)
}

pub fn sweep_selector(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    expect_axis(spec, Axis::SelectorK)?;
    run_sweep(spec, jobs)
}

/// Size sweep with the linear device, followed by the same sweep with the
/// rectifying device so the two can be differenced row by row.
pub fn sweep_linear_comparison(spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SweepError> {
    expect_axis(spec, Axis::Size)?;
    let linear = SweepSpec {
        design: spec.design.with_variant(Variant::Linear),
        ..spec.clone()
    };
    let rectifying = SweepSpec {
        design: spec.design.with_variant(Variant::Rectifying),
        ..spec.clone()
    };
    let mut rows = run_sweep(&linear, jobs)?;
    rows.extend(run_sweep(&rectifying, jobs)?);
    Ok(rows)
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], out: W) -> Result<(), SweepError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Gnuplot script plotting read margin and power against the swept column of
/// `csv_path`, one curve per (variant, scheme) present in `rows`.
pub fn plot_script(axis: Axis, csv_path: &str, rows: &[SweepRow]) -> String {
    let x_col = CSV_HEADER.iter().position(|c| *c == axis.column()).unwrap() + 1;
    let mut series: Vec<(Variant, Scheme)> = Vec::new();
    for r in rows {
        if !series.contains(&(r.variant, r.scheme)) {
            series.push((r.variant, r.scheme));
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile missing 'NaN'");
    let _ = writeln!(s, "set grid");
    let _ = writeln!(s, "set xlabel '{}'", axis.column());
    if axis.log_scale() {
        let _ = writeln!(s, "set logscale x");
    }
    let _ = writeln!(s, "set multiplot layout 1,2");
    for (col, label, log_y) in [(11, "read margin", false), (12, "power (LRS target) [W]", true)] {
        let _ = writeln!(s, "set ylabel '{label}'");
        let _ = writeln!(s, "{}", if log_y { "set logscale y" } else { "unset logscale y" });
        let curves: Vec<String> = series
            .iter()
            .map(|(v, sc)| {
                format!(
                    "'{csv_path}' every ::1 using (strcol(1) eq '{sc}' && strcol(2) eq '{v}' ? ${x_col} : NaN):{col} with linespoints title '{v} {sc}'"
                )
            })
            .collect();
        let _ = writeln!(s, "plot {}", curves.join(", \\\n     "));
    }
    let _ = writeln!(s, "unset multiplot");
    s
}
