use super::*;
use crate::analytic::no_modulation_envelope;
use crate::apertures::ApertureLabel;
use crate::kernels::{assemble, assemble_rates, KernelConfig, KernelTable};
use crate::zernike::tests::random_spec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gauss(r: f64) -> Aperture {
    Aperture::gaussian(r, ApertureLabel::A).unwrap()
}

fn setup(d1: f64) -> (CrystalParams, OpticalLayout) {
    (
        CrystalParams::default_preset(),
        OpticalLayout::new(0.2, 0.1, d1, 0.05).unwrap(),
    )
}

fn random_mask(rng: &mut ChaCha8Rng, pitch: f64, n: usize) -> PhaseMask {
    PhaseMask::from_fn(pitch, n, |_, _| rng.gen_range(-PI..PI)).unwrap()
}

#[test]
fn grid_is_symmetric_with_positive_weights() {
    let g = QuadratureGrid::for_pixels(3.3e4, 1.9e4, 5e3, 1, OracleOrders::default());
    let n = g.s_nodes.len();
    for i in 0..n {
        assert!(g.s_nodes[i].1 > 0.0);
        assert!((g.s_nodes[i].0 + g.s_nodes[n - 1 - i].0).abs() < 1e-9);
    }
    let total: f64 = g.s_nodes.iter().map(|n| n.1).sum();
    assert!((total - 6.6e4).abs() < 1e-6);
}

#[test]
fn small_pupil_dip_is_deepest_at_center() {
    let (c, o) = setup(0.2);
    let scan = DelayScan::around_dip(&c, 21).unwrap();
    let a = gauss(3e-5);
    let mask = PhaseMask::zeros(5e-4, 3).unwrap();
    let t = direct_trace(&c, &o, &a, &a, Modulation::Mask(&mask), &scan, OracleOrders::default()).unwrap();
    let imin = (0..t.len())
        .min_by(|&i, &j| t.r_norm[i].total_cmp(&t.r_norm[j]))
        .unwrap();
    assert!((t.taus[imin] - c.dip_center()).abs() < 1e-18);
    assert!(t.min_r_norm() <= 0.05, "min {} bg {}", t.min_r_norm(), t.background);
}

#[test]
fn zero_mask_matches_closed_form() {
    let (c, o) = setup(1.0);
    let scan = DelayScan::around_dip(&c, 41).unwrap();
    let a = gauss(1.5e-3);
    let mask = PhaseMask::zeros(5e-4, 3).unwrap();
    let m = Modulation::Mask(&mask);
    let w = direct_w(&c, &o, &a, &a, m, &scan, OracleOrders::default()).unwrap();
    let r0 = direct_r0(&c, &o, &a, &a, m, OracleOrders::default()).unwrap();
    assert!((r0.re - 1.0).abs() <= 1e-3, "R0 = {r0}");
    for (&tau, v) in scan.taus().iter().zip(&w) {
        let expect = no_modulation_envelope(&c, &o, &a, &a, tau);
        assert!(
            (v.re / r0.re - expect).abs() <= 1e-3 * expect.max(1e-3),
            "tau={tau:e}: {v} vs {expect}"
        );
    }
}

#[test]
fn background_is_offset_invariant() {
    let (c, o) = setup(1.0);
    let a = gauss(1.5e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mask = random_mask(&mut rng, 5e-4, 2);
    let r = direct_r0(&c, &o, &a, &a, Modulation::Mask(&mask), OracleOrders::default()).unwrap();
    let shifted = mask.offset(2.7);
    let s = direct_r0(&c, &o, &a, &a, Modulation::Mask(&shifted), OracleOrders::default()).unwrap();
    assert!((r - s).norm() <= 1e-12 * r.norm());
}

fn kernel_config(
    c: CrystalParams,
    o: OpticalLayout,
    a: Aperture,
    pitch: f64,
    n: usize,
    scan: DelayScan,
) -> KernelConfig {
    KernelConfig {
        crystal: c,
        layout: o,
        aperture_a: a,
        aperture_b: a.relabeled(ApertureLabel::B),
        pitch,
        half_extent: n,
        scan,
    }
}

#[test]
fn piecewise_mask_matches_kernel_assembly() {
    let (c, o) = setup(1.0);
    let scan = DelayScan::around_dip(&c, 41).unwrap();
    let a = gauss(1.5e-3);
    let table = KernelTable::build(kernel_config(c, o, a, 5e-4, 1, scan.clone())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..3 {
        let mask = random_mask(&mut rng, 5e-4, 1);
        let k = assemble(&table, &mask).unwrap();
        let d = direct_trace(&c, &o, &a, &a, Modulation::Mask(&mask), &scan, OracleOrders::default()).unwrap();
        assert!((k.background - d.background).abs() <= 1e-2 * d.background.abs());
        for i in 0..k.len() {
            assert!((k.r_raw[i] - d.r_raw[i]).abs() <= 1e-2 * d.r_raw[i].abs(), "i={i}");
        }
    }
}

#[test]
fn random_mask_background_matches_kernels() {
    let (c, o) = setup(1.0);
    let scan = DelayScan::new(vec![0.0]).unwrap();
    let a = gauss(1e-3);
    let table = KernelTable::build(kernel_config(c, o, a, 5e-4, 2, scan)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mask = random_mask(&mut rng, 5e-4, 2);
    let k = assemble_rates(&table, &mask).unwrap().r0;
    let d = direct_r0(&c, &o, &a, &a, Modulation::Mask(&mask), OracleOrders::default()).unwrap();
    assert!((k - d).norm() <= 1e-2 * d.norm(), "{k} vs {d}");
}

#[test]
fn separable_and_full_paths_agree() {
    let (c, o) = setup(1.0);
    let scan = DelayScan::around_dip(&c, 5).unwrap();
    let a = gauss(1.5e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mask = random_mask(&mut rng, 5e-4, 1);
    let orders = OracleOrders::default();
    let (ws, rs) = direct_mask_on_path(&c, &o, &a, &a, &mask, &scan, orders, Path::Separable).unwrap();
    let (wf, rf) = direct_mask_on_path(&c, &o, &a, &a, &mask, &scan, orders, Path::Full).unwrap();
    assert!((rs - rf).norm() <= 1e-9 * rs.norm());
    for (u, v) in ws.iter().zip(&wf) {
        assert!((u - v).norm() <= 1e-9 * rs.norm());
    }
}

#[test]
fn doubling_orders_changes_little() {
    let (c, o) = setup(1.0);
    let scan = DelayScan::around_dip(&c, 9).unwrap();
    let a = gauss(1.5e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mask = random_mask(&mut rng, 5e-4, 2);
    let m = Modulation::Mask(&mask);
    let base = direct_w(&c, &o, &a, &a, m, &scan, OracleOrders::default()).unwrap();
    let fine = direct_w(&c, &o, &a, &a, m, &scan, OracleOrders::default().doubled()).unwrap();
    let peak = fine.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for (u, v) in base.iter().zip(&fine) {
        assert!((u - v).norm() <= 1e-3 * peak);
    }
}

#[test]
fn circular_pupils_use_full_path() {
    let (c, o) = setup(1.0);
    let a = Aperture::circular(2e-2, ApertureLabel::A).unwrap();
    let mask = PhaseMask::zeros(5e-4, 2).unwrap();
    let coarse = OracleOrders {
        s_order: 4,
        t_order: 4,
        ..OracleOrders::default()
    };
    let r = direct_r0(&c, &o, &a, &a, Modulation::Mask(&mask), coarse).unwrap();
    let scan = DelayScan::new(vec![0.0]).unwrap();
    let table = KernelTable::build(kernel_config(c, o, a, 5e-4, 2, scan.clone())).unwrap();
    let k = assemble_rates(&table, &mask).unwrap().r0;
    assert!((r - k).norm() <= 2e-2 * k.norm(), "{r} vs {k}");
    assert!(matches!(
        direct_r0(&c, &o, &a, &a, Modulation::Mask(&mask), OracleOrders::default()),
        Err(HomError::BudgetExceeded { .. })
    ));
    assert!(direct_mask_on_path(&c, &o, &a, &a, &mask, &scan, coarse, Path::Separable).is_err());
}

#[test]
fn oversized_grid_is_rejected() {
    let (c, o) = setup(1.0);
    let a = gauss(1e-5);
    let mask = PhaseMask::zeros(5e-4, 20).unwrap();
    let orders = OracleOrders {
        s_order: 512,
        t_order: 512,
        ..OracleOrders::default()
    };
    assert!(matches!(
        direct_r0(&c, &o, &a, &a, Modulation::Mask(&mask), orders),
        Err(HomError::BudgetExceeded { .. })
    ));
}

#[test]
fn spec_path_zero_phase_background_and_even_cancellation() {
    // wide pupils against a small modulator: window much narrower than the lens
    let (c, o) = setup(1.0);
    let a = gauss(0.2);
    let r = 2.5e-4;
    let scan = DelayScan::around_dip(&c, 11).unwrap();
    let orders = OracleOrders::default();
    let zero = ZernikeSpec::empty(r).unwrap();
    let t0 = direct_trace(&c, &o, &a, &a, Modulation::Spec(&zero), &scan, orders).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let spec = random_spec(&mut rng, 4, 2.0, r);
    let even = direct_trace(&c, &o, &a, &a, Modulation::Spec(&spec.even_part()), &scan, orders).unwrap();
    assert!(even.max_abs_diff(&t0) <= 1e-2, "{}", even.max_abs_diff(&t0));
    let coma = ZernikeSpec::new(vec![crate::zernike::ZernikeTerm::new(3, 1, 1.5)], r).unwrap();
    let odd = direct_trace(&c, &o, &a, &a, Modulation::Spec(&coma), &scan, orders).unwrap();
    assert!(odd.max_abs_diff(&t0) >= 0.1, "{}", odd.max_abs_diff(&t0));
}

#[test]
fn spec_path_matches_pixel_path_for_constant_phase() {
    let (c, o) = setup(1.0);
    let a = gauss(0.2);
    let r = 2.5e-4;
    let scan = DelayScan::around_dip(&c, 7).unwrap();
    let flat = ZernikeSpec::new(vec![crate::zernike::ZernikeTerm::new(0, 0, 1.3)], r).unwrap();
    let zero = ZernikeSpec::empty(r).unwrap();
    let orders = OracleOrders::default();
    let a1 = direct_w(&c, &o, &a, &a, Modulation::Spec(&flat), &scan, orders).unwrap();
    let a2 = direct_w(&c, &o, &a, &a, Modulation::Spec(&zero), &scan, orders).unwrap();
    for (u, v) in a1.iter().zip(&a2) {
        assert!((u - v).norm() <= 1e-10 * v.norm());
    }
}

#[test]
fn charfun_examples() {
    let x = Vec2::new(0.0, 0.0);
    assert_eq!(
        charfun_identity_check(&[PI / 3.0], &[vec![(0, 0)]], 1e-3, &[x]).unwrap(),
        0.0
    );
    let sets = vec![vec![(0, 0)], vec![(1, 0), (1, 1)], vec![(-1, 0)]];
    let dev = charfun_identity_check(&[0.1, 2.0, -1.0], &sets, 1e-3, &[Vec2::new(1.1e-3, 0.9e-3)]).unwrap();
    assert_eq!(dev, 0.0);
    let overlapping = vec![vec![(0, 0)], vec![(0, 0)]];
    assert!(matches!(
        charfun_identity_check(&[0.0, 1.0], &overlapping, 1e-3, &[x]),
        Err(HomError::OverlappingSets { first: 0, second: 1 })
    ));
    assert!(charfun_identity_check(&[0.0], &[vec![(5, 5)]], 1e-3, &[x]).is_err());
}

#[test]
fn charfun_random_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let pitch = 1e-3;
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let k = rng.gen_range(1..6);
        let mut sets = vec![Vec::new(); k];
        for l in -2..=2 {
            for m in -2..=2 {
                sets[rng.gen_range(0..k)].push((l, m));
            }
        }
        let phases: Vec<f64> = (0..k).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let samples: Vec<Vec2> = (0..5)
            .map(|_| Vec2::new(rng.gen_range(-2.4..2.4) * pitch, rng.gen_range(-2.4..2.4) * pitch))
            .collect();
        worst = worst.max(charfun_identity_check(&phases, &sets, pitch, &samples).unwrap());
    }
    assert!(worst <= 1e-15, "{worst:e}");
}
