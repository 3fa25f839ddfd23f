mod common;

use common::{dense_solve, max_deviation};
use proptest::prelude::*;
use xbar_sim::crossbar::{CellDesign, CellState, CrossbarConfig, Pattern, Scheme, Variant};
use xbar_sim::readout::read_state;
use xbar_sim::SolveOptions;

const VARIANTS: [Variant; 3] = [Variant::Rectifying, Variant::Linear, Variant::Selector];

#[test]
fn matches_reference_on_rectangular_arrays() {
    for (rows, cols) in [(1, 3), (3, 1), (2, 5), (4, 3)] {
        for variant in VARIANTS {
            for scheme in Scheme::ALL {
                let cfg = CrossbarConfig::new(rows, cols).with_scheme(scheme);
                let design = CellDesign::default().with_variant(variant);
                for target in [CellState::Lrs, CellState::Hrs] {
                    let dev = max_deviation(&cfg, &design, target);
                    assert!(dev <= 1e-9, "{rows}x{cols} {scheme} {variant} {target}: {dev:e}");
                }
            }
        }
    }
}

#[test]
fn output_and_power_match_reference() {
    let cfg = CrossbarConfig::square(3).with_scheme(Scheme::V3);
    let design = CellDesign::default();
    let ours = read_state(&cfg, &design, &SolveOptions::default(), CellState::Lrs).unwrap();
    let reference = dense_solve(&cfg, &design, CellState::Lrs);
    assert!((ours.v_out - reference.v_out).abs() < 1e-9);
    assert!((ours.power - reference.power).abs() <= 1e-9 * reference.power.abs());
}

fn pattern() -> impl Strategy<Value = Pattern> {
    prop_oneof![
        Just(Pattern::AllLrs),
        Just(Pattern::AllHrs),
        Just(Pattern::Checkerboard),
        any::<u64>().prop_map(|seed| Pattern::Random { seed }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_small_arrays_match_reference(
        rows in 1usize..=4,
        cols in 1usize..=4,
        variant in prop::sample::select(VARIANTS.to_vec()),
        scheme in prop::sample::select(Scheme::ALL.to_vec()),
        pattern in pattern(),
        r_wire in 0.5f64..200.0,
        v_ws in 0.2f64..2.0,
        k in 0.05f64..5.0,
        target_row in 0usize..4,
        target_col in 0usize..4,
        hrs in any::<bool>(),
    ) {
        let mut cfg = CrossbarConfig::new(rows, cols).with_scheme(scheme);
        cfg.pattern = pattern;
        cfg.r_wire = r_wire;
        cfg.v_ws = v_ws;
        cfg.target = (target_row % rows, target_col % cols);
        let mut design = CellDesign::default().with_variant(variant);
        design.selector.k = k;
        let target = if hrs { CellState::Hrs } else { CellState::Lrs };
        let dev = max_deviation(&cfg, &design, target);
        prop_assert!(dev <= 1e-9, "deviation {:e}", dev);
    }
}
