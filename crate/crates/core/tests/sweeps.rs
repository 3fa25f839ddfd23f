use xbar_sim::crossbar::{CellDesign, CellState, CrossbarConfig, Pattern, Scheme, Variant};
use xbar_sim::readout::read_state;
use xbar_sim::sweep::{self, Axis, SweepSpec};
use xbar_sim::{DeviceParams, SolveOptions};

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[test]
fn default_sweeps_converge_quickly() {
    let specs = [
        SweepSpec::size(),
        SweepSpec::wire(),
        SweepSpec::ron(),
        SweepSpec::ratio(),
        SweepSpec::selector(),
        SweepSpec::linear_comparison(),
    ];
    for spec in specs {
        let rows = sweep::run_sweep(&spec, jobs()).unwrap();
        assert_eq!(rows.len(), spec.values.len() * spec.schemes.len());
        for row in &rows {
            let res = row.result.as_ref().unwrap();
            assert!(
                res.iterations.0 <= 10 && res.iterations.1 <= 10,
                "{:?} {} n={} k={:?}: {:?}",
                spec.axis,
                row.scheme,
                row.n,
                row.k,
                res.iterations
            );
        }
    }
}

#[test]
fn linear_comparison_pairs_rows() {
    let mut spec = SweepSpec::linear_comparison();
    spec.values = vec![4.0, 8.0];
    let rows = sweep::sweep_linear_comparison(&spec, 2).unwrap();
    assert_eq!(rows.len(), 12);
    assert!(rows[..6].iter().all(|r| r.variant == Variant::Linear));
    assert!(rows[6..].iter().all(|r| r.variant == Variant::Rectifying));
    for (a, b) in rows[..6].iter().zip(&rows[6..]) {
        assert_eq!((a.n, a.scheme), (b.n, b.scheme));
    }
}

#[test]
fn coupled_sense_resistor_is_exact() {
    for axis_spec in [SweepSpec::ron(), SweepSpec::ratio()] {
        for i in 0..axis_spec.values.len() {
            let (cfg, design) = axis_spec.point(i, Scheme::V2);
            assert_eq!(cfg.r_sense, (design.device.r_on * design.device.r_off).sqrt());
        }
    }
    assert_eq!(SweepSpec::ron().axis, Axis::ROn);
}

#[test]
fn parallelism_does_not_change_rows() {
    let mut spec = SweepSpec::size();
    spec.values = vec![3.0, 9.0, 17.0];
    spec.base.pattern = Pattern::Random { seed: 0 };
    spec.seed = 99;
    let one = sweep::run_sweep(&spec, 1).unwrap();
    let many = sweep::run_sweep(&spec, 8).unwrap();
    let bytes = |rows: &[sweep::SweepRow]| {
        let mut buf = Vec::new();
        sweep::write_csv(rows, &mut buf).unwrap();
        buf
    };
    assert_eq!(bytes(&one), bytes(&many));
}

// With ideal lines and a biased unselected row and column, only the sensed
// bit line floats in a 2x2 array.
#[test]
fn wire_free_two_by_two_closed_form() {
    let dev = DeviceParams::linear();
    let design = CellDesign::linear(dev);
    for scheme in [Scheme::V2, Scheme::V3] {
        for bits in 0u8..16 {
            for target in [CellState::Lrs, CellState::Hrs] {
                let mut cfg = CrossbarConfig::square(2).with_scheme(scheme);
                cfg.r_wire = 0.0;
                cfg.pattern = Pattern::Random { seed: bits as u64 };
                let states = cfg.pattern.states(2, 2);
                let g = |s: CellState| if s == CellState::Lrs { 1.0 / dev.r_on } else { 1.0 / dev.r_off };
                let (v, v_row1) = match scheme {
                    Scheme::V2 => (1.0, 0.5),
                    _ => (1.0, 1.0 / 3.0),
                };
                // Target (0, 1); the other cell on the sensed line is (1, 1).
                let a = g(target);
                let b = g(states[3]);
                let s = 1.0 / cfg.r_sense;
                let expected = (v * a + v_row1 * b) / (a + b + s);
                let got = read_state(&cfg, &design, &SolveOptions::default(), target).unwrap().v_out;
                assert!((got - expected).abs() < 1e-9, "{scheme} {bits} {target}: {got} vs {expected}");
            }
        }
    }
}

// Exchanging every unselected state on a 2x2 with ideal lines swaps the
// conductance on the sensed line and nothing else.
#[test]
fn swapped_pattern_mirrors_sensed_conductance() {
    let dev = DeviceParams::linear();
    let design = CellDesign::linear(dev);
    let opts = SolveOptions::default();
    let read = |pattern: Pattern, target: CellState| {
        let mut cfg = CrossbarConfig::square(2).with_scheme(Scheme::V2);
        cfg.r_wire = 0.0;
        cfg.pattern = pattern;
        (read_state(&cfg, &design, &opts, target).unwrap().v_out, cfg.r_sense)
    };
    let (g_on, g_off) = (1.0 / dev.r_on, 1.0 / dev.r_off);
    for target in [CellState::Lrs, CellState::Hrs] {
        let a = if target == CellState::Lrs { g_on } else { g_off };
        let (lrs, r_sense) = read(Pattern::AllLrs, target);
        let (hrs, _) = read(Pattern::AllHrs, target);
        let s = 1.0 / r_sense;
        let model = |b: f64| (a + 0.5 * b) / (a + b + s);
        assert!((lrs - model(g_on)).abs() < 1e-9);
        assert!((hrs - model(g_off)).abs() < 1e-9);
    }
}
