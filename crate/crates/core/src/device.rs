//! Cell models: the intrinsically rectifying memristive device, the linear
//! memristive device, and the selector + resistor (1S1M) cell, together with
//! the threshold-driven state dynamics used for I-V traces.

use std::f64::consts::PI;

use thiserror::Error;

/// Width of the window above 0 V over which the rectifying device blends from
/// its reverse (R_OFF) conductance into its forward conductance.
pub const RECTIFY_WINDOW: f64 = 1e-3;

/// Residual bound on the internal series solve of a selector cell (A).
pub const SERIES_TOL: f64 = 1e-12;

const SERIES_MAX_ITERS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeviceError {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
    #[error("selector series solve did not converge at v = {voltage} V (residual {residual:e} A)")]
    SeriesSolveFailure { voltage: f64, residual: f64 },
    #[error("invalid trace request: {0}")]
    InvalidTrace(String),
}

/// Constants of the memristive device model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceParams {
    pub r_off: f64,
    pub r_on: f64,
    pub v_th: f64,
    /// Programming rate above threshold, 1/(V·s).
    pub alpha: f64,
    /// Programming rate below threshold, 1/(V·s).
    pub beta: f64,
    /// Reverse-biased cells stay at R_OFF regardless of state.
    pub rectifying: bool,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            r_off: 5e8,
            r_on: 5e5,
            v_th: 1.5,
            alpha: 2.5e8,
            beta: 0.0,
            rectifying: true,
        }
    }
}

impl DeviceParams {
    pub fn linear() -> Self {
        Self {
            rectifying: false,
            ..Self::default()
        }
    }

    /// HRS/LRS resistance ratio, which for the rectifying device is also its
    /// rectification ratio.
    pub fn ratio(&self) -> f64 {
        self.r_off / self.r_on
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let finite = [self.r_off, self.r_on, self.v_th, self.alpha, self.beta]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(DeviceError::InvalidParams("non-finite parameter".into()));
        }
        if !(self.r_on > 0.0 && self.r_off >= self.r_on) {
            return Err(DeviceError::InvalidParams(format!(
                "need r_off >= r_on > 0 (r_on = {}, r_off = {})",
                self.r_on, self.r_off
            )));
        }
        if self.v_th <= 0.0 {
            return Err(DeviceError::InvalidParams("v_th must be positive".into()));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(DeviceError::InvalidParams(
                "programming rates must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized state variable; 1 is fully ON (R_ON), 0 fully OFF (R_OFF).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct DeviceState {
    w: f64,
}

impl DeviceState {
    pub const ON: Self = Self { w: 1.0 };
    pub const OFF: Self = Self { w: 0.0 };

    /// Clamps `w` into `[0, 1]`.
    pub fn new(w: f64) -> Self {
        Self { w: w.clamp(0.0, 1.0) }
    }

    pub fn w(self) -> f64 {
        self.w
    }
}

/// Selector law `I = gamma * sinh(k * p * V)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectorParams {
    /// Current prefactor (A).
    pub gamma: f64,
    /// Nonlinearity multiplier.
    pub k: f64,
    /// Nonlinearity base (1/V).
    pub p: f64,
}

impl Default for SelectorParams {
    fn default() -> Self {
        Self {
            gamma: 1e-8,
            k: 1.0,
            p: 18.4,
        }
    }
}

impl SelectorParams {
    /// Exponent coefficient `k * p`.
    pub fn slope(&self) -> f64 {
        self.k * self.p
    }

    pub fn current(&self, v: f64) -> f64 {
        self.gamma * (self.slope() * v).sinh()
    }

    pub fn conductance(&self, v: f64) -> f64 {
        let a = self.slope();
        self.gamma * a * (a * v).cosh()
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(DeviceError::InvalidParams("gamma must be positive".into()));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(DeviceError::InvalidParams("k must be positive".into()));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(DeviceError::InvalidParams("p must be positive".into()));
        }
        Ok(())
    }
}

/// One crosspoint element, frozen at a given state for DC analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellModel {
    RectifyingMemristor(DeviceParams, DeviceState),
    LinearMemristor(DeviceParams, DeviceState),
    /// Selector in series with a fixed resistor (Ω).
    SelectorPlusResistor(SelectorParams, f64),
}

/// Current and small-signal conductance of a cell at one bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub current: f64,
    pub conductance: f64,
}

/// Memristance as a function of state and applied voltage.
///
/// The rectifying device reads R_OFF for any negative bias; otherwise the
/// resistance interpolates geometrically from R_OFF (w = 0) to R_ON (w = 1).
pub fn memristance(params: &DeviceParams, state: DeviceState, v: f64) -> f64 {
    if params.rectifying && v < 0.0 {
        params.r_off
    } else {
        forward_resistance(params, state)
    }
}

fn forward_resistance(params: &DeviceParams, state: DeviceState) -> f64 {
    params.r_off * (params.r_on / params.r_off).powf(state.w)
}

/// C1 blend weight: 0 for v <= 0, 1 for v >= RECTIFY_WINDOW. Returns the
/// weight and its derivative.
fn forward_weight(v: f64) -> (f64, f64) {
    if v <= 0.0 {
        (0.0, 0.0)
    } else if v >= RECTIFY_WINDOW {
        (1.0, 0.0)
    } else {
        let t = v / RECTIFY_WINDOW;
        let s = t * t * (3.0 - 2.0 * t);
        let ds = 6.0 * t * (1.0 - t) / RECTIFY_WINDOW;
        (s, ds)
    }
}

fn rectifying_point(params: &DeviceParams, state: DeviceState, v: f64) -> OperatingPoint {
    let g_rev = 1.0 / params.r_off;
    let g_fwd = 1.0 / forward_resistance(params, state);
    let (s, ds) = forward_weight(v);
    if s == 0.0 && ds == 0.0 {
        return OperatingPoint {
            current: v / params.r_off,
            conductance: g_rev,
        };
    }
    if s == 1.0 && ds == 0.0 {
        return OperatingPoint {
            current: v * g_fwd,
            conductance: g_fwd,
        };
    }
    let dg = g_fwd - g_rev;
    OperatingPoint {
        current: v * (g_rev + dg * s),
        conductance: g_rev + dg * (s + v * ds),
    }
}

/// Solves the selector/resistor series pair for a non-negative total bias.
fn series_point(sel: &SelectorParams, resistance: f64, v: f64) -> Result<OperatingPoint, DeviceError> {
    debug_assert!(v >= 0.0);
    if resistance == 0.0 {
        return Ok(OperatingPoint {
            current: sel.current(v),
            conductance: sel.conductance(v),
        });
    }
    let a = sel.slope();
    let g_res = 1.0 / resistance;
    if v == 0.0 {
        let g_sel = sel.gamma * a;
        return Ok(OperatingPoint {
            current: 0.0,
            conductance: g_sel / (1.0 + resistance * g_sel),
        });
    }

    // f(x) = I_sel(x) - (v - x)/R is increasing in the selector voltage x,
    // negative at 0 and non-negative at v.
    let f = |x: f64| sel.current(x) - (v - x) * g_res;
    let df = |x: f64| sel.conductance(x) + g_res;
    let (mut lo, mut hi) = (0.0_f64, v);
    // Start from the selector voltage that carries the resistor-limited current.
    let mut x = ((v * g_res) / sel.gamma).asinh() / a;
    if !(x > lo && x < hi) {
        x = 0.5 * (lo + hi);
    }
    let mut converged = false;
    for _ in 0..SERIES_MAX_ITERS {
        let fx = f(x);
        if fx == 0.0 {
            converged = true;
            break;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - fx / df(x);
        if !(next.is_finite() && next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi {
            converged = true;
            break;
        }
    }
    let residual = f(x).abs();
    if !converged && residual > SERIES_TOL {
        return Err(DeviceError::SeriesSolveFailure { voltage: v, residual });
    }
    let g_sel = sel.conductance(x);
    let conductance = if g_sel.is_finite() {
        g_sel / (1.0 + resistance * g_sel)
    } else {
        g_res
    };
    Ok(OperatingPoint {
        current: (v - x) * g_res,
        conductance,
    })
}

impl CellModel {
    /// Current (word side to bit side) and dI/dV at bias `v`.
    pub fn operating_point(&self, v: f64) -> Result<OperatingPoint, DeviceError> {
        match self {
            CellModel::RectifyingMemristor(params, state) => Ok(rectifying_point(params, *state, v)),
            CellModel::LinearMemristor(params, state) => {
                let g = 1.0 / forward_resistance(params, *state);
                Ok(OperatingPoint {
                    current: v * g,
                    conductance: g,
                })
            }
            CellModel::SelectorPlusResistor(sel, resistance) => {
                // Odd symmetry is exact: solve on |v| and restore the sign.
                let op = series_point(sel, *resistance, v.abs())?;
                Ok(OperatingPoint {
                    current: if v < 0.0 { -op.current } else { op.current },
                    conductance: op.conductance,
                })
            }
        }
    }
}

pub fn cell_current(model: &CellModel, v: f64) -> Result<f64, DeviceError> {
    model.operating_point(v).map(|op| op.current)
}

pub fn cell_conductance(model: &CellModel, v: f64) -> Result<f64, DeviceError> {
    model.operating_point(v).map(|op| op.conductance)
}

/// State derivative dw/dt under bias `v`.
pub fn state_rate(params: &DeviceParams, v: f64) -> f64 {
    if v >= params.v_th {
        params.alpha * (v - params.v_th)
    } else if v <= -params.v_th {
        params.alpha * (v + params.v_th)
    } else {
        params.beta * v
    }
}

/// Advances the state by one explicit step of length `dt` under bias `v`.
///
/// Reaching 1 under positive bias (or 0 under negative bias) pins the state
/// at that bound; the next step integrates again from the pinned value.
pub fn step_state(params: &DeviceParams, state: DeviceState, v: f64, dt: f64) -> DeviceState {
    let w = state.w + state_rate(params, v) * dt;
    if w >= 1.0 && v > 0.0 {
        DeviceState::ON
    } else if w <= 0.0 && v < 0.0 {
        DeviceState::OFF
    } else {
        DeviceState::new(w)
    }
}

/// Sinusoidal drive for an I-V trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waveform {
    /// Peak voltage (V).
    pub amplitude: f64,
    pub frequency: f64,
    pub cycles: usize,
}

impl Default for Waveform {
    fn default() -> Self {
        Self {
            amplitude: 2.0,
            frequency: 1e7,
            cycles: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IvSample {
    pub t: f64,
    pub v: f64,
    pub i: f64,
    pub w: f64,
}

pub const DEFAULT_STEPS_PER_CYCLE: usize = 10_000;

/// Integrates the state under a sine drive with fixed explicit steps,
/// sampling the cell current at the start of every step.
pub fn trace_iv(
    params: &DeviceParams,
    initial: DeviceState,
    waveform: &Waveform,
    steps_per_cycle: usize,
) -> Result<Vec<IvSample>, DeviceError> {
    params.validate()?;
    if steps_per_cycle < 1000 {
        return Err(DeviceError::InvalidTrace(format!(
            "steps_per_cycle must be at least 1000, got {steps_per_cycle}"
        )));
    }
    if !(waveform.frequency > 0.0 && waveform.frequency.is_finite()) {
        return Err(DeviceError::InvalidTrace("frequency must be positive".into()));
    }
    if !waveform.amplitude.is_finite() || waveform.cycles == 0 {
        return Err(DeviceError::InvalidTrace(
            "amplitude must be finite and cycles at least 1".into(),
        ));
    }

    let dt = 1.0 / (waveform.frequency * steps_per_cycle as f64);
    let omega = 2.0 * PI * waveform.frequency;
    let total = waveform.cycles * steps_per_cycle;
    let mut state = initial;
    let mut samples = Vec::with_capacity(total + 1);
    for step in 0..=total {
        let t = step as f64 * dt;
        let v = waveform.amplitude * (omega * t).sin();
        let cell = if params.rectifying {
            CellModel::RectifyingMemristor(*params, state)
        } else {
            CellModel::LinearMemristor(*params, state)
        };
        let i = cell_current(&cell, v)?;
        samples.push(IvSample { t, v, i, w: state.w });
        state = step_state(params, state, v, dt);
    }
    Ok(samples)
}
