//! Detection pupils and their momentum-space transforms.
//!
//! `p_tilde` is the transform of the intensity pupil |p|^2, `q_tilde` the
//! transform of the amplitude pupil p. Both are normalized to 1 at q = 0.

pub mod bessel;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::model::Vec2;

pub use bessel::{j1, jinc};

/// Cut-off below which the Gaussian pupil transforms are treated as zero.
pub const WINDOW_FLOOR: f64 = 1e-12;

/// Number of Bessel lobes kept when truncating a circular-pupil transform.
pub const CIRCULAR_LOBES: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApertureLabel {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApertureKind {
    /// `p(x) = exp(-|x|^2 / (2 R_G^2))`.
    Gaussian { radius: f64 },
    /// Hard circular pupil of radius R.
    Circular { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture {
    pub kind: ApertureKind,
    pub label: ApertureLabel,
}

impl Aperture {
    pub fn gaussian(radius: f64, label: ApertureLabel) -> Result<Self> {
        Self::new(ApertureKind::Gaussian { radius }, label)
    }

    pub fn circular(radius: f64, label: ApertureLabel) -> Result<Self> {
        Self::new(ApertureKind::Circular { radius }, label)
    }

    pub fn new(kind: ApertureKind, label: ApertureLabel) -> Result<Self> {
        let a = Self { kind, label };
        if !(a.radius() > 0.0) || !a.radius().is_finite() {
            return Err(invalid("aperture radius", "must be positive and finite"));
        }
        Ok(a)
    }

    pub fn radius(&self) -> f64 {
        match self.kind {
            ApertureKind::Gaussian { radius } | ApertureKind::Circular { radius } => radius,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, ApertureKind::Gaussian { .. })
    }

    /// Gaussian radius used by the closed-form results; circular pupils are
    /// mapped through [`gaussian_equivalent`].
    pub fn effective_gaussian_radius(&self) -> f64 {
        match self.kind {
            ApertureKind::Gaussian { radius } => radius,
            ApertureKind::Circular { radius } => gaussian_equivalent(radius),
        }
    }

    /// The same pupil with a different label.
    pub fn relabeled(self, label: ApertureLabel) -> Self {
        Self { label, ..self }
    }

    /// Radial profile of [`p_tilde`].
    pub fn p_tilde_radial(&self, q: f64) -> f64 {
        match self.kind {
            ApertureKind::Gaussian { radius } => (-0.25 * radius * radius * q * q).exp(),
            ApertureKind::Circular { radius } => jinc(2.0 * radius * q),
        }
    }

    /// Radial profile of [`q_tilde`].
    pub fn q_tilde_radial(&self, q: f64) -> f64 {
        match self.kind {
            ApertureKind::Gaussian { radius } => (-0.5 * radius * radius * q * q).exp(),
            // a hard pupil satisfies |p|^2 = p
            ApertureKind::Circular { radius } => jinc(2.0 * radius * q),
        }
    }

    /// Radius in q beyond which `p_tilde` is dropped.
    pub fn p_tilde_support(&self) -> f64 {
        match self.kind {
            ApertureKind::Gaussian { radius } => (-4.0 * WINDOW_FLOOR.ln()).sqrt() / radius,
            ApertureKind::Circular { radius } => (CIRCULAR_LOBES + 0.25) * std::f64::consts::PI / (2.0 * radius),
        }
    }

    /// Radius in q beyond which `q_tilde` is dropped.
    pub fn q_tilde_support(&self) -> f64 {
        match self.kind {
            ApertureKind::Gaussian { radius } => (-2.0 * WINDOW_FLOOR.ln()).sqrt() / radius,
            ApertureKind::Circular { .. } => self.p_tilde_support(),
        }
    }
}

/// Transform of the intensity pupil, normalized so that `p_tilde(0) = 1`.
pub fn p_tilde(a: &Aperture, q: Vec2) -> f64 {
    a.p_tilde_radial(q.norm())
}

/// Transform of the amplitude pupil, normalized so that `q_tilde(0) = 1`.
///
/// Real for the symmetric pupils supported here, so the transform of `p*`
/// is the complex conjugate of this value.
pub fn q_tilde(a: &Aperture, q: Vec2) -> Complex64 {
    Complex64::new(a.q_tilde_radial(q.norm()), 0.0)
}

/// Gaussian radius that roughly fits a hard circular pupil of radius `r`.
pub fn gaussian_equivalent(r: f64) -> f64 {
    r / (2.0 * std::f64::consts::SQRT_2)
}

/// Symmetrized pupil product `[P_A(s) P_B(-s) + P_A(-s) P_B(s)] / 2` that
/// windows every double-momentum integral.
pub fn pair_window(a: &Aperture, b: &Aperture, s: Vec2) -> f64 {
    pair_window_radial(a, b, s.norm())
}

pub fn pair_window_radial(a: &Aperture, b: &Aperture, s: f64) -> f64 {
    // both pupils are radially symmetric
    a.p_tilde_radial(s) * b.p_tilde_radial(s)
}

/// Radius in s beyond which [`pair_window`] is treated as zero.
pub fn pair_support(a: &Aperture, b: &Aperture) -> f64 {
    match (a.kind, b.kind) {
        (ApertureKind::Gaussian { radius: ra }, ApertureKind::Gaussian { radius: rb }) => {
            (-4.0 * WINDOW_FLOOR.ln() / (ra * ra + rb * rb)).sqrt()
        }
        _ => a.p_tilde_support().min(b.p_tilde_support()),
    }
}

/// Rough bound on the 1-D integral of |pair_window| beyond [`pair_support`]
/// for circular pupils, from |2 J1(x)/x| <= 2 sqrt(2/(pi x)) / x.
pub fn pair_tail_estimate(a: &Aperture, b: &Aperture) -> f64 {
    let s = pair_support(a, b);
    let tail = |ap: &Aperture| match ap.kind {
        ApertureKind::Gaussian { .. } => 0.0,
        ApertureKind::Circular { radius } => {
            let x = 2.0 * radius * s;
            2.0 / (std::f64::consts::PI * radius * x * x)
        }
    };
    tail(a).max(tail(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gauss(r: f64) -> Aperture {
        Aperture::gaussian(r, ApertureLabel::A).unwrap()
    }

    fn circ(r: f64) -> Aperture {
        Aperture::circular(r, ApertureLabel::A).unwrap()
    }

    #[test]
    fn normalized_at_origin() {
        assert_eq!(p_tilde(&gauss(1e-3), Vec2::ZERO), 1.0);
        assert_eq!(p_tilde(&circ(1e-3), Vec2::ZERO), 1.0);
        assert!(q_tilde(&gauss(1e-3), Vec2::ZERO).re > 0.0);
    }

    #[test]
    fn circular_first_zero() {
        // root of Bessel's integral (1/pi) int_0^pi cos(t - x sin t) dt by bisection
        let bessel_integral = |x: f64| {
            let n = 2000;
            let h = std::f64::consts::PI / n as f64;
            let mut s = 0.5 * (1.0 + (std::f64::consts::PI).cos());
            for i in 1..n {
                let t = i as f64 * h;
                s += (t - x * t.sin()).cos();
            }
            s * h / std::f64::consts::PI
        };
        let (mut lo, mut hi) = (3.0, 4.5);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if bessel_integral(lo) * bessel_integral(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - 3.8317).abs() < 1e-4);
        let r = 2e-3;
        let q = Vec2::new(0.0, root / (2.0 * r));
        assert!(p_tilde(&circ(r), q).abs() < 1e-12);
    }

    #[test]
    fn q_tilde_is_narrower_by_sqrt2() {
        // second moments of the radial profiles along one axis
        let a = gauss(1.5e-3);
        let h = 1.0;
        let moment = |f: &dyn Fn(f64) -> f64| {
            let (mut m0, mut m2) = (0.0, 0.0);
            for i in -20000..=20000 {
                let q = i as f64 * h;
                let v = f(q);
                m0 += v;
                m2 += v * q * q;
            }
            (m2 / m0).sqrt()
        };
        let wp = moment(&|q| a.p_tilde_radial(q));
        let wq = moment(&|q| a.q_tilde_radial(q));
        assert!((wp / wq - std::f64::consts::SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn q_tilde_even() {
        for a in [gauss(1e-3), circ(1e-3)] {
            let q = Vec2::new(321.0, -4567.0);
            assert_eq!(q_tilde(&a, q), q_tilde(&a, -q));
        }
    }

    #[test]
    fn gaussian_equivalent_values() {
        assert!((gaussian_equivalent(2.0 * std::f64::consts::SQRT_2) - 1.0).abs() < 1e-15);
        assert!((gaussian_equivalent(5.0) - 1.767_766_952_966_368_8).abs() < 1e-12);
        assert!(gaussian_equivalent(3.0) > gaussian_equivalent(2.0));
    }

    #[test]
    fn p_tilde_bounded_even_real() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for a in [gauss(1e-3), circ(1e-3)] {
            for _ in 0..10_000 {
                let q = Vec2::new(rng.gen_range(-5e4..5e4), rng.gen_range(-5e4..5e4));
                let v = p_tilde(&a, q);
                assert!(v.abs() <= 1.0);
                assert_eq!(v, p_tilde(&a, -q));
            }
        }
    }

    #[test]
    fn supports_respect_floor() {
        let g = gauss(2e-3);
        let s = pair_support(&g, &g);
        assert!((pair_window_radial(&g, &g, s) - WINDOW_FLOOR).abs() < 1e-15);
        let c = circ(2e-3);
        assert!(pair_tail_estimate(&c, &c) > 0.0);
        assert_eq!(pair_tail_estimate(&g, &g), 0.0);
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(Aperture::gaussian(0.0, ApertureLabel::A).is_err());
        assert!(Aperture::circular(-1.0, ApertureLabel::B).is_err());
    }
}
