//! Shared fixtures for the benchmarks.

use hom_core::{Aperture, ApertureLabel, CrystalParams, DelayScan, KernelConfig, OpticalLayout, PhaseMask};

/// Gaussian pupils of radius 2 mm, 0.25 mm pixels, `samples` delays.
pub fn config(half_extent: usize, samples: usize) -> KernelConfig {
    let c = CrystalParams::default_preset();
    let a = Aperture::gaussian(2e-3, ApertureLabel::A).expect("valid radius");
    KernelConfig {
        crystal: c,
        layout: OpticalLayout::new(0.2, 0.1, 1.0, 0.05).expect("valid layout"),
        aperture_a: a,
        aperture_b: a.relabeled(ApertureLabel::B),
        pitch: 2.5e-4,
        half_extent,
        scan: DelayScan::around_dip(&c, samples).expect("valid scan"),
    }
}

/// Deterministic pseudo-random phases on the fixture grid.
pub fn mask(half_extent: usize) -> PhaseMask {
    PhaseMask::from_fn(2.5e-4, half_extent, |l, m| ((l * 7 + m * 13) as f64).sin() * 3.0).expect("valid mask")
}
