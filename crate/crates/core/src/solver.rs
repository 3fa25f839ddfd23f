//! DC operating point of a crossbar network by damped Newton-Raphson.
//!
//! Source-driven nodes are eliminated, leaving the nodal equations of the free
//! nodes. Every cell is strictly monotone, so the Jacobian is symmetric
//! positive definite and is factored with a sparse Cholesky whose fill-reducing
//! symbolic analysis is computed once per network.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{
    factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering,
};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side};
use thiserror::Error;

use crate::crossbar::{Element, Network, GROUND};
use crate::device::{DeviceError, OperatingPoint};

/// Conductance from every free node to ground. Keeps floating subgraphs
/// non-singular.
pub const LEAK_CONDUCTANCE: f64 = 1e-15;

const MAX_HALVINGS: usize = 8;
const REFINEMENT_ROUNDS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("Newton iteration did not converge after {iterations} iterations (max KCL residual {residual:e} A)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular nodal system: {0}")]
    SingularSystem(String),
    #[error("malformed network: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Device(#[from] DeviceError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Zero,
    LinearizedNetwork,
    /// Full node-voltage vector; entries at source nodes are ignored.
    Provided(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Bound on the last applied Newton update (V).
    pub v_tol: f64,
    /// Bound on the KCL residual at every free node (A).
    pub i_tol: f64,
    /// Scale of the first trial step in each iteration.
    pub damping: f64,
    pub initial_guess: InitialGuess,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            v_tol: 1e-9,
            i_tol: 1e-12,
            damping: 1.0,
            initial_guess: InitialGuess::LinearizedNetwork,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.max_iters == 0 {
            return Err(SolveError::InvalidNetwork("max_iters must be at least 1".into()));
        }
        if !(self.v_tol > 0.0 && self.i_tol > 0.0) {
            return Err(SolveError::InvalidNetwork("tolerances must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(SolveError::InvalidNetwork("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Voltage of every network node, ground included.
    pub node_voltages: Vec<f64>,
    /// Current of every branch in its `from` → `to` direction.
    pub branch_currents: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl Solution {
    /// Current delivered into the network by the source at `node`.
    pub fn source_current(&self, network: &Network, node: usize) -> f64 {
        network
            .branches
            .iter()
            .zip(&self.branch_currents)
            .map(|(b, &i)| {
                if b.from == node {
                    i
                } else if b.to == node {
                    -i
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Value slots of one branch in the lower-triangular Jacobian storage.
#[derive(Debug, Clone, Copy)]
struct BranchSlots {
    from: Option<usize>,
    to: Option<usize>,
    off_diag: Option<usize>,
}

/// Free-node indexing, sparsity pattern and symbolic factorization of a
/// network's nodal system.
struct NodalSystem<'a> {
    network: &'a Network,
    /// Free-node index of each network node, `None` for source nodes.
    index: Vec<Option<usize>>,
    /// Network node of each free index.
    free_nodes: Vec<usize>,
    fixed: Vec<Option<f64>>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    diag_slot: Vec<usize>,
    slots: Vec<BranchSlots>,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    factor: Vec<f64>,
    factor_buf: MemBuffer,
    solve_buf: MemBuffer,
}

impl<'a> NodalSystem<'a> {
    fn new(network: &'a Network) -> Result<Self, SolveError> {
        let n_nodes = network.nodes.len();
        if network.sources.iter().filter(|s| s.node == GROUND && s.volts == 0.0).count() != 1 {
            return Err(SolveError::InvalidNetwork("exactly one ground reference required".into()));
        }
        for s in &network.sources {
            if s.node >= n_nodes || !s.volts.is_finite() {
                return Err(SolveError::InvalidNetwork(format!("bad source stamp {s:?}")));
            }
        }
        let fixed = network.fixed_voltages();
        let mut index = vec![None; n_nodes];
        let mut free_nodes = Vec::new();
        for node in 0..n_nodes {
            if fixed[node].is_none() {
                index[node] = Some(free_nodes.len());
                free_nodes.push(node);
            }
        }
        let n = free_nodes.len();

        // Lower-triangular pattern, column-major.
        let mut entries: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
        for b in &network.branches {
            if b.from >= n_nodes || b.to >= n_nodes || b.from == b.to {
                return Err(SolveError::InvalidNetwork(format!(
                    "branch {} -> {} is not a two-terminal element",
                    b.from, b.to
                )));
            }
            if let Element::Resistor(r) = b.element {
                if !(r > 0.0 && r.is_finite()) {
                    return Err(SolveError::InvalidNetwork(format!("resistor value {r}")));
                }
            }
            if let (Some(i), Some(j)) = (index[b.from], index[b.to]) {
                entries.push((i.min(j), i.max(j)));
            }
        }
        entries.sort_unstable();
        entries.dedup();
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(entries.len());
        for &(col, row) in &entries {
            col_ptr[col + 1] += 1;
            row_idx.push(row);
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        let slot_of = |row: usize, col: usize| -> usize {
            let start = col_ptr[col];
            let rows = &row_idx[start..col_ptr[col + 1]];
            start + rows.binary_search(&row).expect("pattern entry")
        };
        let diag_slot: Vec<usize> = (0..n).map(|i| slot_of(i, i)).collect();
        let slots = network
            .branches
            .iter()
            .map(|b| {
                let (fi, ti) = (index[b.from], index[b.to]);
                BranchSlots {
                    from: fi.map(|i| diag_slot[i]),
                    to: ti.map(|i| diag_slot[i]),
                    off_diag: match (fi, ti) {
                        (Some(i), Some(j)) => Some(slot_of(i.max(j), i.min(j))),
                        _ => None,
                    },
                }
            })
            .collect();

        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &col_ptr, None, &row_idx);
        let symbolic = factorize_symbolic_cholesky(
            pattern,
            Side::Lower,
            SymmetricOrdering::Amd,
            Default::default(),
        )
        .map_err(|e| SolveError::SingularSystem(format!("symbolic analysis failed: {e:?}")))?;
        let factor = vec![0.0; symbolic.len_val()];
        let factor_buf = MemBuffer::new(
            symbolic.factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()),
        );
        let solve_buf = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let values = vec![0.0; row_idx.len()];

        Ok(Self {
            network,
            index,
            free_nodes,
            fixed,
            col_ptr,
            row_idx,
            diag_slot,
            slots,
            symbolic,
            values,
            factor,
            factor_buf,
            solve_buf,
        })
    }

    fn n_free(&self) -> usize {
        self.free_nodes.len()
    }

    /// Scatters free-node values into a full node-voltage vector.
    fn expand(&self, free: &[f64]) -> Vec<f64> {
        self.fixed
            .iter()
            .zip(&self.index)
            .map(|(f, i)| match (f, i) {
                (Some(v), _) => *v,
                (None, Some(i)) => free[*i],
                (None, None) => unreachable!(),
            })
            .collect()
    }

    fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.free_nodes.iter().map(|&n| full[n]).collect()
    }

    /// Operating point of every branch at the given node voltages.
    fn evaluate(&self, volts: &[f64]) -> Result<Vec<OperatingPoint>, SolveError> {
        self.network
            .branches
            .iter()
            .map(|b| {
                let v = volts[b.from] - volts[b.to];
                match b.element {
                    Element::Resistor(r) => Ok(OperatingPoint {
                        current: v / r,
                        conductance: 1.0 / r,
                    }),
                    Element::Cell(cell) => cell.operating_point(v).map_err(SolveError::from),
                }
            })
            .collect()
    }

    /// KCL residual (net current leaving each free node).
    fn residual(&self, volts: &[f64], ops: &[OperatingPoint]) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .free_nodes
            .iter()
            .map(|&node| LEAK_CONDUCTANCE * volts[node])
            .collect();
        for (b, op) in self.network.branches.iter().zip(ops) {
            if let Some(i) = self.index[b.from] {
                r[i] += op.current;
            }
            if let Some(j) = self.index[b.to] {
                r[j] -= op.current;
            }
        }
        r
    }

    /// Factors the Jacobian for the given branch conductances and solves
    /// `J x = rhs` in place.
    fn solve_linear(
        &mut self,
        conductances: impl Iterator<Item = f64>,
        rhs: &mut [f64],
    ) -> Result<(), SolveError> {
        let n = self.n_free();
        if n == 0 {
            return Ok(());
        }
        self.values.iter_mut().for_each(|x| *x = 0.0);
        for &d in &self.diag_slot {
            self.values[d] = LEAK_CONDUCTANCE;
        }
        for (slots, g) in self.slots.iter().zip(conductances) {
            if let Some(s) = slots.from {
                self.values[s] += g;
            }
            if let Some(s) = slots.to {
                self.values[s] += g;
            }
            if let Some(s) = slots.off_diag {
                self.values[s] -= g;
            }
        }
        let pattern = SymbolicSparseColMatRef::new_checked(n, n, &self.col_ptr, None, &self.row_idx);
        let matrix = SparseColMatRef::new(pattern, &self.values);
        let llt = self
            .symbolic
            .factorize_numeric_llt(
                &mut self.factor,
                matrix,
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut self.factor_buf),
                Default::default(),
            )
            .map_err(|e| SolveError::SingularSystem(format!("{e:?}")))?;
        let llt: LltRef<'_, usize, f64> = llt;
        let b = rhs.to_vec();
        llt.solve_in_place_with_conj(
            Conj::No,
            MatMut::from_column_major_slice_mut(rhs, n, 1),
            Par::Seq,
            MemStack::new(&mut self.solve_buf),
        );
        // Weakly tied floating nodes make the system badly conditioned; a
        // few rounds of refinement recover full accuracy at little cost.
        for _ in 0..REFINEMENT_ROUNDS {
            let mut r = b.clone();
            for col in 0..n {
                for k in self.col_ptr[col]..self.col_ptr[col + 1] {
                    let (row, a) = (self.row_idx[k], self.values[k]);
                    r[row] -= a * rhs[col];
                    if row != col {
                        r[col] -= a * rhs[row];
                    }
                }
            }
            llt.solve_in_place_with_conj(
                Conj::No,
                MatMut::from_column_major_slice_mut(&mut r, n, 1),
                Par::Seq,
                MemStack::new(&mut self.solve_buf),
            );
            rhs.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(SolveError::SingularSystem("non-finite solution".into()));
        }
        Ok(())
    }

    fn linearized_voltages(&mut self) -> Result<Vec<f64>, SolveError> {
        let g_cell = self.network.nominal_cell_conductance;
        let conductances: Vec<f64> = self
            .network
            .branches
            .iter()
            .map(|b| match b.element {
                Element::Resistor(r) => 1.0 / r,
                Element::Cell(_) => g_cell,
            })
            .collect();
        // Right-hand side: currents injected by the fixed nodes.
        let mut rhs = vec![0.0; self.n_free()];
        for (b, &g) in self.network.branches.iter().zip(&conductances) {
            match (self.index[b.from], self.index[b.to]) {
                (Some(i), None) => rhs[i] += g * self.fixed[b.to].unwrap_or(0.0),
                (None, Some(j)) => rhs[j] += g * self.fixed[b.from].unwrap_or(0.0),
                _ => {}
            }
        }
        self.solve_linear(conductances.into_iter(), &mut rhs)?;
        Ok(self.expand(&rhs))
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Node voltages of the linear network obtained by replacing every cell with
/// the conductance `1/sqrt(r_on * r_off)`.
pub fn linearized_initial_guess(network: &Network) -> Result<Vec<f64>, SolveError> {
    NodalSystem::new(network)?.linearized_voltages()
}

/// Computes the DC operating point of `network`.
pub fn solve(network: &Network, options: &SolveOptions) -> Result<Solution, SolveError> {
    options.validate()?;
    let mut sys = NodalSystem::new(network)?;
    let start = match &options.initial_guess {
        InitialGuess::Zero => sys.expand(&vec![0.0; sys.n_free()]),
        InitialGuess::LinearizedNetwork => sys.linearized_voltages()?,
        InitialGuess::Provided(v) => {
            if v.len() != network.nodes.len() {
                return Err(SolveError::InvalidNetwork(format!(
                    "initial guess has {} entries for {} nodes",
                    v.len(),
                    network.nodes.len()
                )));
            }
            sys.expand(&sys.gather(v))
        }
    };

    let mut free = sys.gather(&start);
    let mut volts = start;
    let mut ops = sys.evaluate(&volts)?;
    let mut residual = sys.residual(&volts, &ops);
    let mut res_norm = norm2(&residual);

    for iteration in 1..=options.max_iters {
        let mut step: Vec<f64> = residual.iter().map(|r| -r).collect();
        let conductances: Vec<f64> = ops.iter().map(|op| op.conductance).collect();
        sys.solve_linear(conductances.into_iter(), &mut step)?;

        let trial = |scale: f64| -> Result<_, SolveError> {
            let trial_free: Vec<f64> = free.iter().zip(&step).map(|(x, d)| x + scale * d).collect();
            let trial_volts = sys.expand(&trial_free);
            let trial_ops = sys.evaluate(&trial_volts)?;
            let trial_res = sys.residual(&trial_volts, &trial_ops);
            let trial_norm = norm2(&trial_res);
            Ok((trial_free, trial_volts, trial_ops, trial_res, trial_norm))
        };
        let mut scale = options.damping;
        let mut halvings = 0;
        let mut candidate = trial(scale)?;
        // Once KCL holds the residual is near its rounding floor and cannot
        // resolve the remaining error on weakly coupled nodes, so the line
        // search only runs before that point.
        if max_abs(&residual) > options.i_tol {
            while candidate.4 >= res_norm && halvings < MAX_HALVINGS {
                scale *= 0.5;
                halvings += 1;
                candidate = trial(scale)?;
            }
        }
        let (trial_free, trial_volts, trial_ops, trial_res, trial_norm) = candidate;

        let applied = scale * max_abs(&step);
        free = trial_free;
        volts = trial_volts;
        ops = trial_ops;
        residual = trial_res;
        res_norm = trial_norm;

        if halvings == 0 && applied <= options.v_tol && max_abs(&residual) <= options.i_tol {
            return Ok(Solution {
                node_voltages: volts,
                branch_currents: ops.iter().map(|op| op.current).collect(),
                iterations: iteration,
                converged: true,
            });
        }
    }
    Err(SolveError::NonConvergence {
        iterations: options.max_iters,
        residual: max_abs(&residual),
    })
}
