use std::sync::OnceLock;

use hom_core::analytic::{dip_large_aperture, dip_linear_tilt, tau_center, Modulation, TiltSpec};
use hom_core::kernels::{assemble, assemble_big};
use hom_core::zernike::{pixelize, StraddleRule};
use hom_core::{
    p_tilde, Aperture, ApertureLabel, CrystalParams, DelayScan, DipTrace, KernelConfig, KernelTable, OpticalLayout,
    PhaseMask, Vec2, ZernikeSpec, ZernikeTerm,
};
use proptest::prelude::*;

fn setup() -> (CrystalParams, OpticalLayout) {
    (
        CrystalParams::default_preset(),
        OpticalLayout::new(0.2, 0.1, 1.0, 0.05).unwrap(),
    )
}

fn table() -> &'static KernelTable {
    static TABLE: OnceLock<KernelTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let (c, o) = setup();
        let a = Aperture::gaussian(1.5e-3, ApertureLabel::A).unwrap();
        KernelTable::build(KernelConfig {
            crystal: c,
            layout: o,
            aperture_a: a,
            aperture_b: a.relabeled(ApertureLabel::B),
            pitch: 5e-4,
            half_extent: 2,
            scan: DelayScan::around_dip(&c, 9).unwrap(),
        })
        .unwrap()
    })
}

fn terms() -> impl Strategy<Value = Vec<ZernikeTerm>> {
    prop::collection::btree_map((0i32..=6, 0i32..=6), -3.0f64..3.0, 0..6).prop_map(|m| {
        m.into_iter()
            .filter(|&((n, k), _)| k <= n)
            .map(|((n, k), c)| {
                // map k in 0..=n onto m in -n..=n with n - |m| even
                let m = -n + 2 * k;
                ZernikeTerm::new(n, m, c)
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pupil_transform_is_real_even_bounded(r in 1e-4f64..1e-2, qx in -2e4f64..2e4, qy in -2e4f64..2e4, circ: bool) {
        let a = if circ {
            Aperture::circular(r, ApertureLabel::A).unwrap()
        } else {
            Aperture::gaussian(r, ApertureLabel::A).unwrap()
        };
        let q = Vec2::new(qx, qy);
        let v = p_tilde(&a, q);
        prop_assert!(v.abs() <= 1.0 + 1e-12);
        prop_assert!((v - p_tilde(&a, -q)).abs() <= 1e-12);
    }

    #[test]
    fn phase_difference_is_twice_odd_part(t in terms(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let spec = ZernikeSpec::new(t, 1.0).unwrap();
        let p = Vec2::new(x, y);
        let lhs = spec.phase_at(p) - spec.phase_at(-p);
        prop_assert!((lhs - 2.0 * spec.odd_part().phase_at(p)).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn pixelized_even_part_is_point_symmetric(t in terms()) {
        let spec = ZernikeSpec::new(t, 1e-3).unwrap().even_part();
        let m = pixelize(&spec, 2.5e-4, 4, 6, StraddleRule::WholePixel).unwrap();
        for l in -4..=4 {
            for k in -4..=4 {
                prop_assert!((m.phase(l, k) - m.phase(-l, -k)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn envelope_peaks_at_shift_law(s1y in -3000.0f64..3000.0) {
        let (c, o) = setup();
        let a = Aperture::gaussian(3e-3, ApertureLabel::A).unwrap();
        let scan = DelayScan::linspace(-600e-15, 600e-15, 1201).unwrap();
        let step = scan.taus()[1] - scan.taus()[0];
        let dip = dip_linear_tilt(&c, &o, &a, &TiltSpec::new(Vec2::new(0.0, s1y)), &scan);
        prop_assert!((dip.trace.envelope_center() - tau_center(&c, &o, s1y)).abs() <= step);
    }

    #[test]
    fn global_phase_offset_changes_nothing(
        phases in prop::collection::vec(-3.2f64..3.2, 25),
        offset in -10.0f64..10.0,
    ) {
        let mask = PhaseMask::new(5e-4, 2, phases, vec![1.0; 25]).unwrap();
        let a = assemble(table(), &mask).unwrap();
        let b = assemble(table(), &mask.offset(offset)).unwrap();
        prop_assert!(a.max_abs_diff(&b) <= 1e-10);
    }

    #[test]
    fn big_limit_sees_only_antisymmetric_phase(
        phases in prop::collection::vec(-3.2f64..3.2, 25),
        sym in prop::collection::vec(-3.2f64..3.2, 25),
    ) {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 9).unwrap();
        let mask = PhaseMask::new(5e-4, 2, phases, vec![1.0; 25]).unwrap();
        let even = PhaseMask::from_fn(5e-4, 2, |l, m| {
            let i = |l: i32, m: i32| ((l + 2) * 5 + m + 2) as usize;
            sym[i(l, m)] + sym[i(-l, -m)]
        })
        .unwrap();
        let t0 = assemble_big(&c, &o, 5e-4, 2, &mask, &scan).unwrap();
        let t1 = assemble_big(&c, &o, 5e-4, 2, &mask.plus(&even).unwrap(), &scan).unwrap();
        prop_assert!(t0.max_abs_diff(&t1) <= 1e-12);
    }

    #[test]
    fn large_aperture_ignores_even_terms(t in terms()) {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 21).unwrap();
        let spec = ZernikeSpec::new(t, 2.5e-4).unwrap();
        let full = dip_large_aperture(&c, &o, Modulation::Spec(&spec), &scan).unwrap();
        let odd = dip_large_aperture(&c, &o, Modulation::Spec(&spec.odd_part()), &scan).unwrap();
        prop_assert!(full.max_abs_diff(&odd) <= 1e-9);
    }

    #[test]
    fn trace_csv_round_trip(
        env in prop::collection::vec(-1.0f64..1.0, 1..40),
        bg in 1e-3f64..10.0,
    ) {
        let n = env.len();
        let taus: Vec<f64> = (0..n).map(|i| i as f64 * 3.7e-15 - 50e-15).collect();
        let tri = vec![0.5; n];
        let t = DipTrace::from_envelope(taus, tri, env, bg);
        let back = DipTrace::from_csv(&t.to_csv("h")).unwrap();
        prop_assert_eq!(back.r_norm, t.r_norm);
        prop_assert_eq!(back.envelope, t.envelope);
        prop_assert_eq!(back.background, t.background);
    }
}
