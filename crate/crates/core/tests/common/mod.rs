//! Dense reference solver for small crossbars.
//!
//! Builds its own modified-nodal-analysis system straight from the array
//! configuration (source currents are extra unknowns, nothing is eliminated)
//! and runs a backtracking Newton iteration with dense LU. Only the cell I-V
//! evaluation is shared with the library.

#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use xbar_sim::DeviceParams;
use xbar_sim::crossbar::{CellDesign, CellState, CrossbarConfig, NodeRole};
use xbar_sim::solver::LEAK_CONDUCTANCE;

enum Elem {
    R(f64),
    Cell(xbar_sim::CellModel),
}

pub struct DenseSolution {
    /// Voltage of every named node.
    pub voltages: HashMap<NodeRole, f64>,
    pub v_out: f64,
    /// Power delivered by all sources.
    pub power: f64,
}

pub fn dense_solve(config: &CrossbarConfig, design: &CellDesign, target: CellState) -> DenseSolution {
    assert!(config.r_wire > 0.0, "reference solver needs distinct wire nodes");
    let (rows, cols) = (config.n_rows, config.n_cols);

    // Node 0 is the reference and does not appear among the unknowns.
    let mut roles = vec![NodeRole::Ground];
    fn add(role: NodeRole, roles: &mut Vec<NodeRole>) -> usize {
        roles.push(role);
        roles.len() - 1
    }
    let mut index = HashMap::new();
    for r in 0..rows {
        index.insert(NodeRole::WordDriver { row: r }, add(NodeRole::WordDriver { row: r }, &mut roles));
        for c in 0..cols {
            index.insert(NodeRole::Word { row: r, col: c }, add(NodeRole::Word { row: r, col: c }, &mut roles));
            index.insert(NodeRole::Bit { row: r, col: c }, add(NodeRole::Bit { row: r, col: c }, &mut roles));
        }
    }
    for c in 0..cols {
        index.insert(NodeRole::BitTerminal { col: c }, add(NodeRole::BitTerminal { col: c }, &mut roles));
    }
    let id = |role: NodeRole| index[&role];

    let mut elems: Vec<(usize, usize, Elem)> = Vec::new();
    let rw = config.r_wire;
    for r in 0..rows {
        elems.push((id(NodeRole::WordDriver { row: r }), id(NodeRole::Word { row: r, col: 0 }), Elem::R(rw)));
        for c in 1..cols {
            elems.push((
                id(NodeRole::Word { row: r, col: c - 1 }),
                id(NodeRole::Word { row: r, col: c }),
                Elem::R(rw),
            ));
        }
    }
    for c in 0..cols {
        for r in 1..rows {
            elems.push((
                id(NodeRole::Bit { row: r - 1, col: c }),
                id(NodeRole::Bit { row: r, col: c }),
                Elem::R(rw),
            ));
        }
        elems.push((id(NodeRole::Bit { row: rows - 1, col: c }), id(NodeRole::BitTerminal { col: c }), Elem::R(rw)));
    }
    let pattern = config.pattern.states(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let state = if (r, c) == config.target { target } else { pattern[r * cols + c] };
            elems.push((
                id(NodeRole::Word { row: r, col: c }),
                id(NodeRole::Bit { row: r, col: c }),
                Elem::Cell(design.cell(state)),
            ));
        }
    }
    let (tr, tc) = config.target;
    let sense = id(NodeRole::BitTerminal { col: tc });
    elems.push((sense, 0, Elem::R(config.r_sense)));

    let v = config.v_ws;
    let mut sources = vec![(id(NodeRole::WordDriver { row: tr }), v)];
    let bias = match config.scheme {
        xbar_sim::Scheme::V2 => Some((v / 2.0, v / 2.0)),
        xbar_sim::Scheme::V3 => Some((v / 3.0, 2.0 * v / 3.0)),
        xbar_sim::Scheme::Ff => None,
    };
    if let Some((vw, vb)) = bias {
        for r in (0..rows).filter(|&r| r != tr) {
            sources.push((id(NodeRole::WordDriver { row: r }), vw));
        }
        for c in (0..cols).filter(|&c| c != tc) {
            sources.push((id(NodeRole::BitTerminal { col: c }), vb));
        }
    }

    let n = roles.len() - 1;
    let m = sources.len();
    let driven: Vec<bool> = (0..=n).map(|k| sources.iter().any(|s| s.0 == k)).collect();
    let dim = n + m;

    // Unknown layout: node k -> k - 1, source j -> n + j.
    let residual_and_jacobian = |x: &DVector<f64>| {
        let volt = |k: usize| if k == 0 { 0.0 } else { x[k - 1] };
        let mut f = DVector::zeros(dim);
        let mut jac = DMatrix::zeros(dim, dim);
        for (a, b, e) in &elems {
            let vab = volt(*a) - volt(*b);
            let (i, g) = match e {
                Elem::R(r) => (vab / r, 1.0 / r),
                Elem::Cell(cell) => {
                    let op = cell.operating_point(vab).expect("cell evaluation");
                    (op.current, op.conductance)
                }
            };
            for (p, sp) in [(*a, 1.0), (*b, -1.0)] {
                if p == 0 {
                    continue;
                }
                f[p - 1] += sp * i;
                for (q, sq) in [(*a, 1.0), (*b, -1.0)] {
                    if q != 0 {
                        jac[(p - 1, q - 1)] += sp * sq * g;
                    }
                }
            }
        }
        for k in 1..=n {
            if !driven[k] {
                f[k - 1] += LEAK_CONDUCTANCE * x[k - 1];
                jac[(k - 1, k - 1)] += LEAK_CONDUCTANCE;
            }
        }
        for (j, &(node, volts)) in sources.iter().enumerate() {
            // Source current is injected into its node.
            f[node - 1] -= x[n + j];
            jac[(node - 1, n + j)] -= 1.0;
            f[n + j] = x[node - 1] - volts;
            jac[(n + j, node - 1)] = 1.0;
        }
        (f, jac)
    };

    let mut x = DVector::zeros(dim);
    let mut converged = false;
    for _ in 0..500 {
        let (f, jac) = residual_and_jacobian(&x);
        let dx = jac.lu().solve(&(-&f)).expect("singular reference system");
        let f0 = f.norm();
        let mut t = 1.0;
        let mut next = &x + &dx * t;
        while residual_and_jacobian(&next).0.norm() > f0 && t > 1e-6 {
            t *= 0.5;
            next = &x + &dx * t;
        }
        let step = (&dx * t).rows(0, n).amax();
        x = next;
        if step < 1e-14 {
            converged = true;
            break;
        }
    }
    assert!(converged, "reference Newton did not converge");

    let voltages = roles
        .iter()
        .enumerate()
        .map(|(k, role)| (*role, if k == 0 { 0.0 } else { x[k - 1] }))
        .collect();
    let power = sources.iter().enumerate().map(|(j, s)| s.1 * x[n + j]).sum();
    DenseSolution { voltages, v_out: x[sense - 1], power }
}

/// Largest node-voltage deviation between the library solve and the
/// reference, matched by node role.
pub fn max_deviation(config: &CrossbarConfig, design: &CellDesign, target: CellState) -> f64 {
    let net = xbar_sim::build(config, design, target).unwrap();
    let sol = xbar_sim::solve(&net, &Default::default()).unwrap();
    let reference = dense_solve(config, design, target);
    assert_eq!(net.nodes.len(), reference.voltages.len());
    net.nodes
        .iter()
        .zip(&sol.node_voltages)
        .map(|(role, v)| (v - reference.voltages[role]).abs())
        .fold(0.0, f64::max)
}

// Closed-form state under a sine drive starting from w = 0, valid until the
// first clamp at 1: integral of alpha * (a sin(wt) - v_th) from the threshold
// crossing onward.
pub fn analytic_switch_time(p: &DeviceParams, amplitude: f64, freq: f64) -> f64 {
    let omega = 2.0 * std::f64::consts::PI * freq;
    let t_on = (p.v_th / amplitude).asin() / omega;
    let w = |t: f64| p.alpha * (amplitude / omega * ((omega * t_on).cos() - (omega * t).cos()) - p.v_th * (t - t_on));
    // The drive drops back below threshold at t_off.
    let t_off = 0.5 / freq - t_on;
    assert!(w(t_off) >= 1.0, "drive too weak to switch within the half-cycle");
    let (mut lo, mut hi) = (t_on, t_off);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if w(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
