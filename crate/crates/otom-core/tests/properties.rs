//! Randomized invariants over the library's numerical core.

use otom_core::experiments::{fit_powerlaw, moving_average, FitModel};
use otom_core::infotheory::{delta, entropy, qmi, standard_phi_grid};
use otom_core::kicked_rotor::{chirikov_step, ChirikovState};
use otom_core::otom::{ButterflyTarget, Dynamics, ProcessSpec};
use otom_core::quantum::{haar_unitary, seeded_rng, DensityMatrix, PureState};
use otom_core::tensor::{
    c, fourier_change_of_basis, partial_trace, trace_norm, unitary_exp, ComplexMatrix,
    FourierDirection, SubsystemLayout, C64,
};
use proptest::prelude::*;

fn cmat(d: usize, re: &[f64], im: &[f64]) -> ComplexMatrix {
    ComplexMatrix {
        rows: d,
        cols: d,
        data: re.iter().zip(im).map(|(&a, &b)| c(a, b)).collect(),
    }
}

/// ρ = GG†/tr GG† from raw entries: always a valid density matrix.
fn density_from(d: usize, re: &[f64], im: &[f64], layout: SubsystemLayout) -> DensityMatrix {
    let g = cmat(d, re, im);
    let mut m = g.mul(&g.dagger());
    let tr = m.trace().re.max(1e-12);
    m = m.scale(c(1.0 / tr, 0.0));
    DensityMatrix::new(m, layout).expect("Gram construction is PSD")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partial_trace_preserves_trace(
        da in 2usize..=3,
        db in 2usize..=3,
        re in prop::collection::vec(-1.0f64..1.0, 81),
        im in prop::collection::vec(-1.0f64..1.0, 81),
    ) {
        let d = da * db;
        let m = cmat(d, &re[..d * d], &im[..d * d]);
        let layout = SubsystemLayout::new(&[("x", da), ("y", db)]).unwrap();
        for keep in [["x"], ["y"]] {
            let (red, _) = partial_trace(&m, &layout, &keep).unwrap();
            prop_assert!((red.trace() - m.trace()).norm() < 1e-12);
        }
    }

    #[test]
    fn unitary_exp_is_unitary(
        d in 2usize..=5,
        re in prop::collection::vec(-1.0f64..1.0, 25),
        im in prop::collection::vec(-1.0f64..1.0, 25),
        scale in -3.0f64..3.0,
    ) {
        let m = cmat(d, &re[..d * d], &im[..d * d]);
        let h = m.add(&m.dagger());
        let u = unitary_exp(&h, scale).unwrap();
        prop_assert!(u.unitarity_defect() < 1e-9);
    }

    #[test]
    fn trace_norm_dominates_trace(
        d in 2usize..=4,
        re in prop::collection::vec(-1.0f64..1.0, 16),
        im in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let m = cmat(d, &re[..d * d], &im[..d * d]);
        prop_assert!(trace_norm(&m) >= m.trace().norm() - 1e-9);
    }

    #[test]
    fn chirikov_stays_wrapped(
        theta in -10.0f64..10.0,
        p in -10.0f64..10.0,
        k in 0.0f64..10.0,
        steps in 1usize..50,
    ) {
        let mut s = ChirikovState { theta, p };
        for _ in 0..steps {
            s = chirikov_step(s, k);
            prop_assert!((0.0..2.0 * std::f64::consts::PI).contains(&s.theta));
            prop_assert!((0.0..2.0 * std::f64::consts::PI).contains(&s.p));
        }
    }

    #[test]
    fn moving_average_shape_and_bounds(
        ys in prop::collection::vec(-5.0f64..5.0, 1..40),
        half in 0usize..=3,
    ) {
        let window = 2 * half + 1;
        prop_assume!(window <= ys.len());
        let out = moving_average(&ys, window).unwrap();
        prop_assert_eq!(out.len(), ys.len());
        let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in &out {
            prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
        }
        if window == 1 {
            prop_assert_eq!(out, ys);
        }
    }

    #[test]
    fn powerlaw_fit_is_scale_covariant(
        ys in prop::collection::vec(0.1f64..10.0, 3..10),
        factor in 0.01f64..100.0,
    ) {
        let xs: Vec<f64> = (1..=ys.len()).map(|k| k as f64).collect();
        let base = fit_powerlaw(&xs, &ys).unwrap();
        let scaled_ys: Vec<f64> = ys.iter().map(|y| factor * y).collect();
        let scaled = fit_powerlaw(&xs, &scaled_ys).unwrap();
        let FitModel::PowerLaw { alpha: a0, beta: b0 } = base.model else { unreachable!() };
        let FitModel::PowerLaw { alpha: a1, beta: b1 } = scaled.model else { unreachable!() };
        prop_assert!((a1 - factor * a0).abs() < 1e-9 * a1.abs().max(1.0));
        prop_assert!((b1 - b0).abs() < 1e-9);
    }

    #[test]
    fn entropy_within_dimension_bounds(
        d in 2usize..=4,
        re in prop::collection::vec(-1.0f64..1.0, 16),
        im in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let layout = SubsystemLayout::single("q", d).unwrap();
        let rho = density_from(d, &re[..d * d], &im[..d * d], layout);
        let s = entropy(&rho).unwrap();
        prop_assert!(s >= -1e-10);
        prop_assert!(s <= (d as f64).log2() + 1e-9);
    }

    #[test]
    fn qmi_is_symmetric_and_nonnegative(
        re in prop::collection::vec(-1.0f64..1.0, 16),
        im in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let layout = SubsystemLayout::new(&[("x", 2), ("y", 2)]).unwrap();
        let rho = density_from(4, &re, &im, layout);
        let ixy = qmi(&rho, &["x"], &["y"]).unwrap();
        let iyx = qmi(&rho, &["y"], &["x"]).unwrap();
        prop_assert!(ixy >= 0.0);
        prop_assert!((ixy - iyx).abs() < 1e-9);
    }

    #[test]
    fn fourier_round_trip_restores_amplitudes(
        d in prop::sample::select(vec![2usize, 4, 6, 8, 16]),
        re in prop::collection::vec(-1.0f64..1.0, 16),
        im in prop::collection::vec(-1.0f64..1.0, 16),
    ) {
        let mut amps: Vec<C64> = re[..d].iter().zip(&im[..d]).map(|(&a, &b)| c(a, b)).collect();
        let orig = amps.clone();
        fourier_change_of_basis(&mut amps, &[d], 0, FourierDirection::Forward).unwrap();
        fourier_change_of_basis(&mut amps, &[d], 0, FourierDirection::Inverse).unwrap();
        for (a, o) in amps.iter().zip(&orig) {
            prop_assert!((a - o).norm() < 1e-12);
        }
    }

    #[test]
    fn state_split_merge_round_trip(
        re in prop::collection::vec(-1.0f64..1.0, 6),
        im in prop::collection::vec(-1.0f64..1.0, 6),
    ) {
        let amps: Vec<C64> = re.iter().zip(&im).map(|(&a, &b)| c(a, b)).collect();
        let layout = SubsystemLayout::single("s", 6).unwrap();
        let mut st = PureState::new(amps.clone(), layout).unwrap();
        st.split("s", &[("hi", 2), ("lo", 3)]).unwrap();
        st.merge(&["hi", "lo"], "s").unwrap();
        prop_assert_eq!(st.layout.labels(), vec!["s"]);
        for (a, o) in st.amps.iter().zip(&amps) {
            prop_assert_eq!(a, o);
        }
    }
}

proptest! {
    // heavier cases: full OTOM pipeline per case
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn delta_lives_in_unit_interval(seed in 0u64..1_000_000) {
        let mut rng = seeded_rng(seed);
        let u = haar_unitary(4, &mut rng);
        let layout = SubsystemLayout::single("s", 2).unwrap();
        let process = ProcessSpec {
            forward: Dynamics::Unitary(u),
            rho_s: PureState::basis(layout, 0).unwrap().density(),
            probe_dim: 2,
            target: ButterflyTarget::Probe,
        };
        let d = delta(&process, &standard_phi_grid()).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
    }
}
