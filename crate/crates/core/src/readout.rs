//! Paired LRS/HRS reads: output voltages, read margin and read power.

use thiserror::Error;

use crate::crossbar::{build, CellDesign, CellState, CrossbarConfig, CrossbarError, Network};
use crate::solver::{solve, Solution, SolveError, SolveOptions, LEAK_CONDUCTANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadError {
    #[error(transparent)]
    Config(#[from] CrossbarError),
    #[error("{target} read failed: {source}")]
    Solve {
        target: CellState,
        #[source]
        source: SolveError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadResult {
    pub v_out_lrs: f64,
    pub v_out_hrs: f64,
    /// `(v_out_lrs - v_out_hrs) / v_ws`.
    pub read_margin: f64,
    pub power_lrs: f64,
    pub power_hrs: f64,
    /// Newton iterations of the (LRS, HRS) solves.
    pub iterations: (usize, usize),
}

/// Total power delivered by all voltage sources (W). This includes the
/// dissipation in the sense resistor.
pub fn power(solution: &Solution, network: &Network) -> f64 {
    network
        .sources
        .iter()
        .map(|s| s.volts * solution.source_current(network, s.node))
        .sum()
}

/// Power dissipated in every branch plus the node leaks (W).
pub fn dissipation(solution: &Solution, network: &Network) -> f64 {
    let v = &solution.node_voltages;
    let branches: f64 = network
        .branches
        .iter()
        .zip(&solution.branch_currents)
        .map(|(b, &i)| (v[b.from] - v[b.to]) * i)
        .sum();
    let fixed = network.fixed_voltages();
    let leaks: f64 = v
        .iter()
        .zip(&fixed)
        .filter(|(_, f)| f.is_none())
        .map(|(x, _)| LEAK_CONDUCTANCE * x * x)
        .sum();
    branches + leaks
}

/// Sense voltage and power for one target state.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRead {
    pub network: Network,
    pub solution: Solution,
    pub v_out: f64,
    pub power: f64,
}

pub fn read_state(
    config: &CrossbarConfig,
    design: &CellDesign,
    options: &SolveOptions,
    target: CellState,
) -> Result<SingleRead, ReadError> {
    let network = build(config, design, target)?;
    let solution = solve(&network, options).map_err(|source| ReadError::Solve { target, source })?;
    let v_out = solution.node_voltages[network.sense_node];
    let power = power(&solution, &network);
    Ok(SingleRead {
        network,
        solution,
        v_out,
        power,
    })
}

/// Reads the target cell in LRS and in HRS, all else identical.
pub fn read(
    config: &CrossbarConfig,
    design: &CellDesign,
    options: &SolveOptions,
) -> Result<ReadResult, ReadError> {
    config.validate()?;
    design.validate().map_err(CrossbarError::from)?;
    let (lrs, hrs) = rayon::join(
        || read_state(config, design, options, CellState::Lrs),
        || read_state(config, design, options, CellState::Hrs),
    );
    let (lrs, hrs) = (lrs?, hrs?);
    Ok(ReadResult {
        v_out_lrs: lrs.v_out,
        v_out_hrs: hrs.v_out,
        read_margin: (lrs.v_out - hrs.v_out) / config.v_ws,
        power_lrs: lrs.power,
        power_hrs: hrs.power,
        iterations: (lrs.solution.iterations, hrs.solution.iterations),
    })
}

/// Sum of branch currents into ground, leaks included.
pub fn ground_current(solution: &Solution, network: &Network) -> f64 {
    let v = &solution.node_voltages;
    let fixed = network.fixed_voltages();
    let leaks: f64 = v
        .iter()
        .zip(&fixed)
        .filter(|(_, f)| f.is_none())
        .map(|(x, _)| LEAK_CONDUCTANCE * x)
        .sum();
    leaks - solution.source_current(network, crate::crossbar::GROUND)
}
