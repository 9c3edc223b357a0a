use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use oscsync::coupling::{convolve_delay, CouplingFunction, DelayDistribution, Tabulated};
use oscsync::dynamics::{order_parameter, PhaseModel};
use oscsync::equilibria::{arc_diameter, full_arc_diameter};
use oscsync::graph::{Graph, Partition};
use oscsync::stability::{
    all_negative_cut, classify, cut_sum, linearize, min_cut_scan, ScanMode, StabilityClass,
};

/// Connected graph from a spanning-tree parent list plus optional chords.
fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (2..=max_n).prop_flat_map(|n| {
        let parents: Vec<_> = (1..n).map(|v| 0..v).collect();
        (parents, proptest::collection::vec(any::<bool>(), n * n)).prop_map(move |(parents, chords)| {
            let mut edges: Vec<(usize, usize)> = parents.iter().enumerate().map(|(i, &p)| (p, i + 1)).collect();
            for a in 0..n {
                for b in a + 1..n {
                    if chords[a * n + b] && !edges.contains(&(a, b)) {
                        edges.push((a, b));
                    }
                }
            }
            Graph::new(n, &edges).unwrap()
        })
    })
}

fn coupling_strategy() -> impl Strategy<Value = CouplingFunction> {
    prop_oneof![
        (0.2..3.0f64).prop_map(CouplingFunction::sine),
        (0.2..PI - 0.2).prop_map(|b| CouplingFunction::fb(b, 1.0).unwrap()),
        (-0.4..0.4f64, -0.4..0.4f64).prop_map(|(a2, a3)| CouplingFunction::sine_series(vec![1.0, a2, a3])),
    ]
}

fn model_and_phases(max_n: usize) -> impl Strategy<Value = (PhaseModel, Vec<f64>)> {
    (graph_strategy(max_n), coupling_strategy(), 0.1..3.0f64).prop_flat_map(|(g, f, eps)| {
        let n = g.n_vertices();
        let model = PhaseModel::new(g, f, eps).unwrap();
        (Just(model), proptest::collection::vec(0.0..TAU, n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flow_is_the_scaled_negative_gradient((model, phi) in model_and_phases(7)) {
        let rhs = model.phase_rhs(&phi);
        let h = 1e-6;
        for i in 0..phi.len() {
            let mut up = phi.clone();
            let mut down = phi.clone();
            up[i] += h;
            down[i] -= h;
            let grad = (model.potential(&up).unwrap() - model.potential(&down).unwrap()) / (2.0 * h);
            prop_assert!((rhs[i] + model.epsilon() * grad).abs() < 1e-6 * (1.0 + rhs[i].abs()));
        }
    }

    #[test]
    fn linearization_rows_sum_to_zero((model, phi) in model_and_phases(8)) {
        let lin = linearize(&model, &phi).unwrap();
        for row in lin.matrix.row_iter() {
            prop_assert!(row.sum().abs() < 1e-12);
        }
        prop_assert!((&lin.matrix - lin.matrix.transpose()).amax() == 0.0);
    }

    #[test]
    fn dynamics_are_translation_equivariant((model, phi) in model_and_phases(8), c in -10.0..10.0f64) {
        let shifted: Vec<f64> = phi.iter().map(|p| p + c).collect();
        let a = model.phase_rhs(&phi);
        let b = model.phase_rhs(&shifted);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let va = model.potential(&phi).unwrap();
        let vb = model.potential(&shifted).unwrap();
        prop_assert!((va - vb).abs() < 1e-9 * (1.0 + va.abs()));
    }

    #[test]
    fn cuts_and_verdicts_are_rotation_invariant((model, phi) in model_and_phases(7), c in -10.0..10.0f64) {
        let shifted: Vec<f64> = phi.iter().map(|p| p + c).collect();
        let a = linearize(&model, &phi).unwrap();
        let b = linearize(&model, &shifted).unwrap();
        let n = phi.len();
        for mask in 1..(1u64 << (n - 1)) {
            let p = Partition::new(n, mask);
            prop_assert!((cut_sum(&a, &p).unwrap() - cut_sum(&b, &p).unwrap()).abs() < 1e-9);
        }
        let va = classify(&a).unwrap();
        let vb = classify(&b).unwrap();
        prop_assert!((va.max_nonflow_eigenvalue - vb.max_nonflow_eigenvalue).abs() < 1e-8);
    }

    #[test]
    fn arc_diameter_grows_with_the_subset(phi in proptest::collection::vec(-10.0..10.0f64, 2..12), k in 1usize..12) {
        let k = k.min(phi.len());
        let sub: Vec<usize> = (0..k).collect();
        let part = arc_diameter(&phi, &sub).unwrap();
        let whole = full_arc_diameter(&phi);
        prop_assert!(part <= whole + 1e-12);
        prop_assert!((0.0..=TAU).contains(&whole));
    }

    #[test]
    fn all_negative_cut_forces_instability((model, phi) in model_and_phases(8)) {
        let lin = linearize(&model, &phi).unwrap();
        if let Some(p) = all_negative_cut(&lin) {
            for (e, &(a, b)) in model.graph().edges().iter().enumerate() {
                if p.contains(a) != p.contains(b) {
                    prop_assert!(lin.edge_weights[e] < 0.0);
                }
            }
            prop_assert!(cut_sum(&lin, &p).unwrap() < 0.0);
            prop_assert_eq!(classify(&lin).unwrap().class, StabilityClass::Unstable);
        }
    }

    #[test]
    fn negative_cut_implies_positive_eigenvalue((model, phi) in model_and_phases(8)) {
        let lin = linearize(&model, &phi).unwrap();
        let (p, value) = min_cut_scan(&lin, ScanMode::Exhaustive).unwrap();
        prop_assert!((cut_sum(&lin, &p).unwrap() - value).abs() < 1e-9);
        if value < 0.0 {
            let max = lin.matrix.clone().symmetric_eigenvalues().max();
            prop_assert!(max > 0.0);
            prop_assert!(classify(&lin).unwrap().max_nonflow_eigenvalue > 0.0);
        }
    }

    #[test]
    fn heuristic_never_beats_exhaustive((model, phi) in model_and_phases(9), seed in any::<u64>()) {
        let lin = linearize(&model, &phi).unwrap();
        let (_, best) = min_cut_scan(&lin, ScanMode::Exhaustive).unwrap();
        let (p, found) = min_cut_scan(&lin, ScanMode::Heuristic { restarts: 4, seed }).unwrap();
        prop_assert!(found >= best - 1e-12);
        prop_assert!((cut_sum(&lin, &p).unwrap() - found).abs() < 1e-9);
    }

    #[test]
    fn order_parameter_is_bounded_and_rotation_invariant(phi in proptest::collection::vec(0.0..TAU, 1..20), c in -5.0..5.0f64) {
        let (r, _) = order_parameter(&phi);
        let shifted: Vec<f64> = phi.iter().map(|p| p + c).collect();
        let (r2, _) = order_parameter(&shifted);
        prop_assert!((0.0..=1.0).contains(&r));
        prop_assert!((r - r2).abs() < 1e-12);
    }

    #[test]
    fn point_delay_shifts_the_coupling(f in coupling_strategy(), psi in 0.0..10.0f64) {
        let h = convolve_delay(&f, &DelayDistribution::point(psi).unwrap(), 4096).unwrap();
        // fb is only C¹, so its interpolant converges algebraically.
        let tol = if matches!(f, CouplingFunction::Fb(_)) { 1e-4 } else { 1e-9 };
        for i in 0..64 {
            let t = TAU * i as f64 / 64.0;
            prop_assert!((h.eval(t) - f.eval(t - psi)).abs() < tol);
        }
    }

    #[test]
    fn graph_text_round_trips(g in graph_strategy(10)) {
        prop_assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn tabulated_text_round_trips(values in proptest::collection::vec(-5.0..5.0f64, 4..40)) {
        let t = Tabulated::from_values(values).unwrap();
        let back = Tabulated::parse(&t.to_text()).unwrap();
        prop_assert_eq!(back.values(), t.values());
    }
}
