//! Resistive-network construction for an N×M crossbar under a read bias.
//!
//! Word lines run horizontally and are driven from the left edge (column 0
//! side); bit lines run vertically and terminate at the bottom (last row
//! side). Each line is a chain of `r_wire` segments with one segment between
//! the driver (or terminal) and the nearest crosspoint. With `r_wire = 0`
//! every line collapses to a single node.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::device::{CellModel, DeviceError, DeviceParams, DeviceState, SelectorParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrossbarError {
    #[error("invalid crossbar configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

/// Biasing convention for unselected lines during a read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Unselected word and bit lines at V/2.
    V2,
    /// Unselected word lines at V/3, unselected bit lines at 2V/3.
    V3,
    /// Unselected lines left floating.
    Ff,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::V2, Scheme::V3, Scheme::Ff];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::V2 => "v2",
            Scheme::V3 => "v3",
            Scheme::Ff => "ff",
        }
    }

    /// (unselected word-line bias, unselected bit-line bias), or `None` when
    /// unselected lines float.
    pub fn unselected_bias(self, v_ws: f64) -> Option<(f64, f64)> {
        match self {
            Scheme::V2 => Some((v_ws / 2.0, v_ws / 2.0)),
            Scheme::V3 => Some((v_ws / 3.0, 2.0 * v_ws / 3.0)),
            Scheme::Ff => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v2" | "v/2" => Ok(Scheme::V2),
            "v3" | "v/3" => Ok(Scheme::V3),
            "ff" | "f-f" => Ok(Scheme::Ff),
            other => Err(format!("unknown read scheme `{other}` (expected v2, v3 or ff)")),
        }
    }
}

/// Stored resistance state of a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellState {
    Lrs,
    Hrs,
}

impl CellState {
    pub fn device_state(self) -> DeviceState {
        match self {
            CellState::Lrs => DeviceState::ON,
            CellState::Hrs => DeviceState::OFF,
        }
    }
}

impl fmt::Display for CellState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellState::Lrs => "LRS",
            CellState::Hrs => "HRS",
        })
    }
}

/// Data stored in the non-target cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    AllLrs,
    AllHrs,
    /// LRS where `row + col` is even.
    Checkerboard,
    /// Independent fair coin per cell, drawn in row-major order.
    Random { seed: u64 },
}

impl Pattern {
    /// Resolves the pattern into a row-major state table.
    pub fn states(&self, n_rows: usize, n_cols: usize) -> Vec<CellState> {
        let pick = |lrs: bool| if lrs { CellState::Lrs } else { CellState::Hrs };
        match *self {
            Pattern::AllLrs => vec![CellState::Lrs; n_rows * n_cols],
            Pattern::AllHrs => vec![CellState::Hrs; n_rows * n_cols],
            Pattern::Checkerboard => (0..n_rows * n_cols)
                .map(|i| pick((i / n_cols + i % n_cols).is_multiple_of(2)))
                .collect(),
            Pattern::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n_rows * n_cols).map(|_| pick(rng.random_bool(0.5))).collect()
            }
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            Pattern::Random { .. } => Pattern::Random { seed },
            other => other,
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::AllLrs => f.write_str("all-lrs"),
            Pattern::AllHrs => f.write_str("all-hrs"),
            Pattern::Checkerboard => f.write_str("checkerboard"),
            Pattern::Random { .. } => f.write_str("random"),
        }
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "all-lrs" | "lrs" => Ok(Pattern::AllLrs),
            "all-hrs" | "hrs" => Ok(Pattern::AllHrs),
            "checkerboard" => Ok(Pattern::Checkerboard),
            "random" => Ok(Pattern::Random { seed: 0 }),
            other => Err(format!(
                "unknown pattern `{other}` (expected all-lrs, all-hrs, checkerboard or random)"
            )),
        }
    }
}

/// Which cell technology occupies the crosspoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Rectifying,
    Linear,
    Selector,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Rectifying => "rectifying",
            Variant::Linear => "linear",
            Variant::Selector => "selector",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rectifying" => Ok(Variant::Rectifying),
            "linear" => Ok(Variant::Linear),
            "selector" | "1s1m" | "1s1r" => Ok(Variant::Selector),
            other => Err(format!(
                "unknown cell variant `{other}` (expected rectifying, linear or selector)"
            )),
        }
    }
}

/// Cell technology together with every model constant it may need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellDesign {
    pub variant: Variant,
    pub device: DeviceParams,
    pub selector: SelectorParams,
}

impl Default for CellDesign {
    fn default() -> Self {
        Self::rectifying(DeviceParams::default())
    }
}

impl CellDesign {
    pub fn rectifying(device: DeviceParams) -> Self {
        Self {
            variant: Variant::Rectifying,
            device: DeviceParams { rectifying: true, ..device },
            selector: SelectorParams::default(),
        }
    }

    pub fn linear(device: DeviceParams) -> Self {
        Self {
            variant: Variant::Linear,
            device: DeviceParams { rectifying: false, ..device },
            selector: SelectorParams::default(),
        }
    }

    pub fn selector(device: DeviceParams, selector: SelectorParams) -> Self {
        Self {
            variant: Variant::Selector,
            device,
            selector,
        }
    }

    pub fn with_variant(self, variant: Variant) -> Self {
        match variant {
            Variant::Rectifying => Self::rectifying(self.device),
            Variant::Linear => Self::linear(self.device),
            Variant::Selector => Self::selector(self.device, self.selector),
        }
    }

    pub fn cell(&self, state: CellState) -> CellModel {
        match self.variant {
            Variant::Rectifying => CellModel::RectifyingMemristor(
                DeviceParams { rectifying: true, ..self.device },
                state.device_state(),
            ),
            Variant::Linear => CellModel::LinearMemristor(
                DeviceParams { rectifying: false, ..self.device },
                state.device_state(),
            ),
            Variant::Selector => {
                let r = match state {
                    CellState::Lrs => self.device.r_on,
                    CellState::Hrs => self.device.r_off,
                };
                CellModel::SelectorPlusResistor(self.selector, r)
            }
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        self.device.validate()?;
        if self.variant == Variant::Selector {
            self.selector.validate()?;
        }
        Ok(())
    }
}

/// Optimal sense resistance: the geometric mean of R_ON and R_OFF.
pub fn sense_resistance(r_on: f64, r_off: f64) -> f64 {
    (r_on * r_off).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossbarConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Resistance of one interconnect segment (Ω).
    pub r_wire: f64,
    pub pattern: Pattern,
    /// (row, col) of the cell under read.
    pub target: (usize, usize),
    pub scheme: Scheme,
    /// Read voltage on the selected word line (V).
    pub v_ws: f64,
    pub r_sense: f64,
}

impl CrossbarConfig {
    /// Square array with default read conditions and the worst-case target.
    pub fn square(n: usize) -> Self {
        Self::new(n, n)
    }

    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        let dev = DeviceParams::default();
        Self {
            n_rows,
            n_cols,
            r_wire: 5.0,
            pattern: Pattern::AllLrs,
            target: far_corner(n_cols),
            scheme: Scheme::V2,
            v_ws: 1.0,
            r_sense: sense_resistance(dev.r_on, dev.r_off),
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<(), CrossbarError> {
        let bad = |msg: String| Err(CrossbarError::InvalidConfig(msg));
        if self.n_rows == 0 || self.n_cols == 0 {
            return bad(format!("array must be at least 1x1, got {}x{}", self.n_rows, self.n_cols));
        }
        if !(self.r_wire >= 0.0 && self.r_wire.is_finite()) {
            return bad(format!("r_wire must be finite and >= 0, got {}", self.r_wire));
        }
        if !(self.v_ws > 0.0 && self.v_ws.is_finite()) {
            return bad(format!("v_ws must be positive, got {}", self.v_ws));
        }
        if !(self.r_sense > 0.0 && self.r_sense.is_finite()) {
            return bad(format!("r_sense must be positive, got {}", self.r_sense));
        }
        let (r, c) = self.target;
        if r >= self.n_rows || c >= self.n_cols {
            return bad(format!(
                "target ({r}, {c}) outside a {}x{} array",
                self.n_rows, self.n_cols
            ));
        }
        Ok(())
    }
}

/// Cell farthest from both the word-line driver and the sense node.
pub fn worst_case_target(config: &CrossbarConfig) -> (usize, usize) {
    far_corner(config.n_cols)
}

// Drivers sit on the left edge and bit-line terminals at the bottom, so the
// top-right crosspoint has the longest selected path.
fn far_corner(n_cols: usize) -> (usize, usize) {
    (0, n_cols.saturating_sub(1))
}

/// Electrical role of a network node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeRole {
    Ground,
    /// Driver end of a word line.
    WordDriver { row: usize },
    /// Word-line node at a crosspoint.
    Word { row: usize, col: usize },
    /// Bit-line node at a crosspoint.
    Bit { row: usize, col: usize },
    /// Terminal end of a bit line (sense resistor or bias source).
    BitTerminal { col: usize },
    /// Whole word line when interconnect resistance is zero.
    WordLine { row: usize },
    /// Whole bit line when interconnect resistance is zero.
    BitLine { col: usize },
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NodeRole::Ground => write!(f, "gnd"),
            NodeRole::WordDriver { row } => write!(f, "wl{row}.drv"),
            NodeRole::Word { row, col } => write!(f, "wl{row}.c{col}"),
            NodeRole::Bit { row, col } => write!(f, "bl{col}.r{row}"),
            NodeRole::BitTerminal { col } => write!(f, "bl{col}.term"),
            NodeRole::WordLine { row } => write!(f, "wl{row}"),
            NodeRole::BitLine { col } => write!(f, "bl{col}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Resistor(f64),
    Cell(CellModel),
}

/// Two-terminal branch. Positive current flows `from` → `to`; cells are
/// oriented word line → bit line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub element: Element,
}

/// Ideal voltage source from `node` to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceStamp {
    pub node: usize,
    pub volts: f64,
}

/// Node/branch graph of one biased crossbar. Node 0 is ground and carries a
/// 0 V source stamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub nodes: Vec<NodeRole>,
    pub branches: Vec<Branch>,
    pub sources: Vec<SourceStamp>,
    pub sense_node: usize,
    /// Per-cell conductance used when the cells are linearized for a start
    /// point: `1/sqrt(r_on * r_off)`.
    pub nominal_cell_conductance: f64,
}

pub const GROUND: usize = 0;

impl Network {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn cell_count(&self) -> usize {
        self.branches
            .iter()
            .filter(|b| matches!(b.element, Element::Cell(_)))
            .count()
    }

    /// Source voltage per node, `None` for free nodes.
    pub fn fixed_voltages(&self) -> Vec<Option<f64>> {
        let mut fixed = vec![None; self.nodes.len()];
        for s in &self.sources {
            fixed[s.node] = Some(s.volts);
        }
        fixed
    }

    /// Plain-text adjacency listing, one branch or source per line.
    pub fn adjacency_listing(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} nodes, {} branches, {} sources, sense = {}",
            self.nodes.len(),
            self.branches.len(),
            self.sources.len(),
            self.nodes[self.sense_node]
        );
        for s in &self.sources {
            let _ = writeln!(out, "V {} {}", self.nodes[s.node], s.volts);
        }
        for b in &self.branches {
            let (a, c) = (self.nodes[b.from], self.nodes[b.to]);
            match b.element {
                Element::Resistor(r) => {
                    let _ = writeln!(out, "R {a} {c} {r}");
                }
                Element::Cell(cell) => {
                    let desc = match cell {
                        CellModel::RectifyingMemristor(_, s) => format!("rectifying w={}", s.w()),
                        CellModel::LinearMemristor(_, s) => format!("linear w={}", s.w()),
                        CellModel::SelectorPlusResistor(sel, r) => {
                            format!("selector k={} r={r}", sel.k)
                        }
                    };
                    let _ = writeln!(out, "X {a} {c} {desc}");
                }
            }
        }
        out
    }
}

struct Builder {
    nodes: Vec<NodeRole>,
    branches: Vec<Branch>,
}

impl Builder {
    fn node(&mut self, role: NodeRole) -> usize {
        self.nodes.push(role);
        self.nodes.len() - 1
    }

    fn resistor(&mut self, from: usize, to: usize, ohms: f64) {
        self.branches.push(Branch {
            from,
            to,
            element: Element::Resistor(ohms),
        });
    }
}

/// Builds the biased network for one read, with the target cell forced to
/// `target_state` and every other cell taken from the configured pattern.
pub fn build(
    config: &CrossbarConfig,
    design: &CellDesign,
    target_state: CellState,
) -> Result<Network, CrossbarError> {
    config.validate()?;
    design.validate()?;
    let (rows, cols) = (config.n_rows, config.n_cols);
    let mut b = Builder {
        nodes: vec![NodeRole::Ground],
        branches: Vec::new(),
    };

    let word_drivers: Vec<usize>;
    let bit_terminals: Vec<usize>;
    let word: Vec<usize>; // row-major crosspoint nodes
    let bit: Vec<usize>;

    if config.r_wire == 0.0 {
        word_drivers = (0..rows).map(|row| b.node(NodeRole::WordLine { row })).collect();
        bit_terminals = (0..cols).map(|col| b.node(NodeRole::BitLine { col })).collect();
        word = (0..rows * cols).map(|i| word_drivers[i / cols]).collect();
        bit = (0..rows * cols).map(|i| bit_terminals[i % cols]).collect();
    } else {
        word_drivers = (0..rows).map(|row| b.node(NodeRole::WordDriver { row })).collect();
        word = (0..rows * cols)
            .map(|i| b.node(NodeRole::Word { row: i / cols, col: i % cols }))
            .collect();
        bit = (0..rows * cols)
            .map(|i| b.node(NodeRole::Bit { row: i / cols, col: i % cols }))
            .collect();
        bit_terminals = (0..cols).map(|col| b.node(NodeRole::BitTerminal { col })).collect();

        for row in 0..rows {
            b.resistor(word_drivers[row], word[row * cols], config.r_wire);
            for col in 1..cols {
                b.resistor(word[row * cols + col - 1], word[row * cols + col], config.r_wire);
            }
        }
        for col in 0..cols {
            for row in 1..rows {
                b.resistor(bit[(row - 1) * cols + col], bit[row * cols + col], config.r_wire);
            }
            b.resistor(bit[(rows - 1) * cols + col], bit_terminals[col], config.r_wire);
        }
    }

    let states = config.pattern.states(rows, cols);
    let (t_row, t_col) = config.target;
    for row in 0..rows {
        for col in 0..cols {
            let i = row * cols + col;
            let state = if (row, col) == config.target { target_state } else { states[i] };
            b.branches.push(Branch {
                from: word[i],
                to: bit[i],
                element: Element::Cell(design.cell(state)),
            });
        }
    }

    let sense_node = bit_terminals[t_col];
    b.resistor(sense_node, GROUND, config.r_sense);

    let mut sources = vec![
        SourceStamp { node: GROUND, volts: 0.0 },
        SourceStamp { node: word_drivers[t_row], volts: config.v_ws },
    ];
    if let Some((v_word, v_bit)) = config.scheme.unselected_bias(config.v_ws) {
        for (row, &node) in word_drivers.iter().enumerate() {
            if row != t_row {
                sources.push(SourceStamp { node, volts: v_word });
            }
        }
        for (col, &node) in bit_terminals.iter().enumerate() {
            if col != t_col {
                sources.push(SourceStamp { node, volts: v_bit });
            }
        }
    }

    Ok(Network {
        nodes: b.nodes,
        branches: b.branches,
        sources,
        sense_node,
        nominal_cell_conductance: 1.0 / sense_resistance(design.device.r_on, design.device.r_off),
    })
}
