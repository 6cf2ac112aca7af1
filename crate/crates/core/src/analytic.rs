//! Closed-form and reduced-integral coincidence patterns.
//!
//! Sign convention: a modulator phase `phi(x)` enters the pair amplitude so
//! that a linear phase `s1y * y` moves the walk-off envelope to
//! `tau = f D s1y / (k0 M)`. The same convention is used by the kernel
//! tables and the oracle.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::apertures::Aperture;
use crate::error::{HomError, Result};
use crate::model::{sinc, CrystalParams, DelayScan, OpticalLayout, Vec2};
use crate::quadrature::GaussLegendre;
use crate::trace::DipTrace;
use crate::zernike::{PhaseMask, ZernikeSpec};

/// Radial orders tried, in turn, by the reduced-integral evaluators.
pub const ESCALATION: [usize; 3] = [32, 64, 128];

/// Relative change between successive orders accepted as converged.
pub const ESCALATION_TOL: f64 = 1e-4;

/// Linear modulator phase `phi(x) = s1 . x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSpec {
    /// Phase gradient [rad/m].
    pub s1: Vec2,
    /// Mirror tilt that produced `s1`, when built from one [rad].
    pub theta: Option<f64>,
}

impl TiltSpec {
    pub fn new(s1: Vec2) -> Self {
        Self { s1, theta: None }
    }

    /// A reflective modulator tilted by `theta` about x: `phi = 2 k0 tan(theta) y`.
    pub fn from_mirror_tilt(theta: f64, k0: f64) -> Self {
        Self {
            s1: Vec2::new(0.0, 2.0 * k0 * theta.tan()),
            theta: Some(theta),
        }
    }
}

/// A closed-form dip with its Gaussian envelope parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticDip {
    /// Envelope width [s]; infinite without walk-off.
    pub tau1: f64,
    /// Envelope center [s].
    pub center: f64,
    pub trace: DipTrace,
}

/// Gaussian envelope width `2 d1 D / (k_p |M| R)` with `R^2` the mean of the
/// squared Gaussian-equivalent radii of the two pupils.
pub fn envelope_width(c: &CrystalParams, o: &OpticalLayout, a: &Aperture, b: &Aperture) -> f64 {
    let ra = a.effective_gaussian_radius();
    let rb = b.effective_gaussian_radius();
    let r = (0.5 * (ra * ra + rb * rb)).sqrt();
    let denom = c.pump_wavenumber * c.walkoff.abs() * r;
    if denom == 0.0 {
        f64::INFINITY
    } else {
        2.0 * o.d1 * c.group_delay / denom
    }
}

/// Envelope center produced by a vertical phase gradient `s1y`.
pub fn tau_center(c: &CrystalParams, o: &OpticalLayout, s1y: f64) -> f64 {
    if c.walkoff == 0.0 {
        return 0.0;
    }
    o.f * c.group_delay * s1y / (c.k0() * c.walkoff)
}

/// Gradient and mirror tilt that center the envelope on the dip:
/// `s1y = k0 M L / (2 f)`, `theta = atan(M L / (4 f))`.
pub fn compensation_tilt(c: &CrystalParams, f: f64) -> (f64, f64) {
    let ml = c.walkoff * c.length;
    (c.k0() * ml / (2.0 * f), (ml / (4.0 * f)).atan())
}

/// Exact unmodulated envelope for an unbounded modulator:
/// `sinc(M^2 L k_p tau T_tau / (2 d1 D)) P_A(u) P_B(u)` with
/// `u = M k_p tau / (2 d1 D)`.
pub fn no_modulation_envelope(c: &CrystalParams, o: &OpticalLayout, a: &Aperture, b: &Aperture, tau: f64) -> f64 {
    let u = c.walkoff * tau / (c.group_delay * o.propagation_coeff(c));
    sinc(c.walkoff * c.length * u * c.dip_triangle(tau)) * crate::apertures::pair_window_radial(a, b, u.abs())
}

/// Unmodulated dip with Gaussian pupils (circular pupils via their Gaussian
/// equivalent); the same pupil on both arms.
pub fn dip_no_modulation(c: &CrystalParams, o: &OpticalLayout, a: &Aperture, scan: &DelayScan) -> AnalyticDip {
    dip_linear_tilt(c, o, a, &TiltSpec::new(Vec2::ZERO), scan)
}

/// Dip with a linear modulator phase; `s1 = 0` reproduces [`dip_no_modulation`].
pub fn dip_linear_tilt(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    tilt: &TiltSpec,
    scan: &DelayScan,
) -> AnalyticDip {
    dip_linear_tilt_pair(c, o, a, a, tilt, scan)
}

pub fn dip_linear_tilt_pair(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    tilt: &TiltSpec,
    scan: &DelayScan,
) -> AnalyticDip {
    let tau1 = envelope_width(c, o, a, b);
    let center = tau_center(c, o, tilt.s1.y);
    // a horizontal gradient displaces the pupil window off-axis
    let ra = a.effective_gaussian_radius();
    let rb = b.effective_gaussian_radius();
    let sx = o.f * tilt.s1.x / (c.k0() * o.propagation_coeff(c));
    let x_atten = (-0.25 * (ra * ra + rb * rb) * sx * sx).exp();
    let taus = scan.taus().to_vec();
    let tri: Vec<f64> = taus.iter().map(|&t| c.dip_triangle(t)).collect();
    let env: Vec<f64> = taus
        .iter()
        .map(|&t| {
            let g = if tau1.is_infinite() {
                1.0
            } else {
                (-(t - center).powi(2) / (2.0 * tau1 * tau1)).exp()
            };
            g * x_atten
        })
        .collect();
    AnalyticDip {
        tau1,
        center,
        trace: DipTrace::from_envelope(taus, tri, env, 1.0),
    }
}

/// Phase source on the modulator.
#[derive(Debug, Clone, Copy)]
pub enum Modulation<'a> {
    Spec(&'a ZernikeSpec),
    Mask(&'a PhaseMask),
}

/// Polar nodes over a disk: radial Gauss-Legendre, uniform angle.
pub(crate) fn disk_nodes(center: Vec2, radius: f64, n: usize) -> Vec<(Vec2, f64)> {
    let gl = GaussLegendre::new(n);
    let na = 2 * n;
    let dth = std::f64::consts::TAU / na as f64;
    let mut out = Vec::with_capacity(n * na);
    for (r, wr) in gl.mapped(0.0, radius) {
        for k in 0..na {
            let th = (k as f64 + 0.5) * dth;
            out.push((center + Vec2::new(r * th.cos(), r * th.sin()), wr * r * dth));
        }
    }
    out
}

/// Runs `eval` at each order in [`ESCALATION`] until two successive results
/// agree to [`ESCALATION_TOL`] relative to their peak magnitude.
pub(crate) fn escalate<F>(what: &str, mut eval: F) -> Result<Vec<Complex64>>
where
    F: FnMut(usize) -> Vec<Complex64>,
{
    let mut prev = eval(ESCALATION[0]);
    let mut change = f64::INFINITY;
    for &n in &ESCALATION[1..] {
        let next = eval(n);
        let peak = next.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        change = prev.iter().zip(&next).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / peak;
        prev = next;
        if change < ESCALATION_TOL {
            return Ok(prev);
        }
    }
    Err(HomError::NotConverged(format!(
        "{what}: relative change {change:.3e} at order {}",
        ESCALATION[ESCALATION.len() - 1]
    )))
}

/// Large-pupil limit: the pupil windows act as delta functions and
///
/// `W(tau) = int dx exp(-i [phi(x) - phi(-x)]) exp(i (2 M k0 / (f D)) tau y)`
///
/// over the modulator. Normalized so the unmodulated background is 1.
pub fn dip_large_aperture(
    c: &CrystalParams,
    o: &OpticalLayout,
    modulation: Modulation<'_>,
    scan: &DelayScan,
) -> Result<DipTrace> {
    let gamma = 2.0 * c.walkoff * c.k0() / (o.f * c.group_delay);
    let taus = scan.taus().to_vec();
    let (w, norm) = match modulation {
        Modulation::Spec(spec) => {
            let r = spec.radius();
            let w = escalate("large-aperture integral", |n| {
                let nodes = disk_nodes(Vec2::ZERO, r, n);
                let weights: Vec<(f64, Complex64)> = nodes
                    .iter()
                    .map(|&(x, w)| (x.y, Complex64::from_polar(w, -spec.antisymmetric_part(x))))
                    .collect();
                taus.par_iter()
                    .map(|&t| {
                        weights
                            .iter()
                            .map(|&(y, g)| g * Complex64::from_polar(1.0, gamma * t * y))
                            .sum()
                    })
                    .collect()
            })?;
            (w, std::f64::consts::PI * r * r)
        }
        Modulation::Mask(mask) => {
            if mask.is_opaque() {
                return Err(HomError::EmptyAperture);
            }
            let h = mask.half_extent() as i32;
            let d = mask.pitch();
            let mut pairs = Vec::new();
            let mut norm = 0.0;
            for l in -h..=h {
                for m in -h..=h {
                    let tt = mask.transmission(l, m) * mask.transmission(-l, -m);
                    if tt == 0.0 {
                        continue;
                    }
                    norm += tt * d * d;
                    let g = Complex64::from_polar(tt * d * d, -(mask.phase(l, m) - mask.phase(-l, -m)));
                    pairs.push((m as f64 * d, g));
                }
            }
            let w = taus
                .par_iter()
                .map(|&t| {
                    let s = sinc(0.5 * gamma * t * d);
                    pairs
                        .iter()
                        .map(|&(y, g)| g * Complex64::from_polar(s, gamma * t * y))
                        .sum()
                })
                .collect();
            (w, norm)
        }
    };
    if !(norm > 0.0) {
        return Err(HomError::EmptyAperture);
    }
    let tri = taus.iter().map(|&t| c.dip_triangle(t)).collect();
    let env = w.iter().map(|v| v.re / norm).collect();
    Ok(DipTrace::from_envelope(taus, tri, env, 1.0))
}

/// Modulation term `R_M(x, tau)` for a finite pupil A with a pointlike
/// detector at `x`, pupil B large and integrated over.
#[derive(Debug, Clone, PartialEq)]
pub struct PointlikeTrace {
    pub taus: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Magnitude of the same integral with all phase factors set to 1.
    pub norm: f64,
}

impl PointlikeTrace {
    /// Trace whose envelope is `Re R_M / norm`, gated by the triangular dip.
    pub fn to_dip_trace(&self, c: &CrystalParams) -> DipTrace {
        let tri = self.taus.iter().map(|&t| c.dip_triangle(t)).collect();
        let env = self.values.iter().map(|v| v.re / self.norm).collect();
        let mut t = DipTrace::from_envelope(self.taus.clone(), tri, env, 1.0);
        t.r_raw = self.values.iter().map(|v| v.re).collect();
        t
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }
}

fn modulator_phase(modulation: Modulation<'_>, x: Vec2) -> Option<(f64, f64)> {
    match modulation {
        Modulation::Spec(s) => s.evaluate_phase(x).map(|p| (p, 1.0)),
        Modulation::Mask(m) => m
            .pixel_of(x)
            .map(|(l, k)| (m.phase(l, k), m.transmission(l, k)))
            .filter(|(_, t)| *t > 0.0),
    }
}

pub fn pointlike_modulation(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    modulation: Modulation<'_>,
    x: Vec2,
    scan: &DelayScan,
) -> Result<PointlikeTrace> {
    let k0 = c.k0();
    let kp = c.pump_wavenumber;
    let shift = x * (k0 / o.f0);
    let to_mod = o.f / k0;
    let window = a.q_tilde_support();
    let taus = scan.taus().to_vec();
    let mut norm = 0.0;
    let values = escalate("pointlike integral", |n| {
        // each bracket term is windowed around q = -shift or q = +shift
        let mut nodes = disk_nodes(-shift, window, n);
        nodes.extend(disk_nodes(shift, window, n));
        let mut acc = Vec::with_capacity(nodes.len());
        let mut total = 0.0;
        for (i, &(q, w)) in nodes.iter().enumerate() {
            let first_half = i < nodes.len() / 2;
            let qt = if first_half {
                a.q_tilde_radial((q + shift).norm()).powi(2)
            } else {
                a.q_tilde_radial((q - shift).norm()).powi(2)
            };
            let (Some((p1, t1)), Some((p2, t2))) = (
                modulator_phase(modulation, q * to_mod),
                modulator_phase(modulation, -q * to_mod),
            ) else {
                continue;
            };
            let q2 = q.norm_sqr();
            let amp = w * qt * t1 * t2 * sinc(2.0 * q2 * c.length / kp);
            total += w * qt;
            acc.push((q, q2, Complex64::from_polar(amp, -(p1 - p2))));
        }
        norm = total.abs();
        taus.par_iter()
            .map(|&t| {
                let lin = 2.0 * c.walkoff * t / c.group_delay;
                let quad = (2.0 / kp) * (2.0 * t / c.group_delay + c.length);
                acc.iter()
                    .map(|&(q, q2, g)| g * Complex64::from_polar(1.0, lin * q.y + quad * q2))
                    .sum()
            })
            .collect()
    })?;
    if !(norm > 0.0) {
        return Err(HomError::EmptyAperture);
    }
    Ok(PointlikeTrace { taus, values, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apertures::ApertureLabel;
    use crate::zernike::{NegativeM, ZernikeTerm};
    use rand::{Rng, SeedableRng};

    fn setup() -> (CrystalParams, OpticalLayout) {
        (
            CrystalParams::default_preset(),
            OpticalLayout::new(0.2, 0.1, 1.0, 0.05).unwrap(),
        )
    }

    fn gauss(r: f64) -> Aperture {
        Aperture::gaussian(r, ApertureLabel::A).unwrap()
    }

    #[test]
    fn no_modulation_examples() {
        let (c, o) = setup();
        let dl = c.dip_width();
        let scan = DelayScan::new(vec![0.0, 0.5 * dl, dl]).unwrap();
        let dip = dip_no_modulation(&c, &o, &gauss(1.5e-3), &scan);
        assert_eq!(dip.trace.r_norm[0], 1.0);
        let expect = 1.0 - (-(0.5 * dl).powi(2) / (2.0 * dip.tau1 * dip.tau1)).exp();
        assert!((dip.trace.r_norm[1] - expect).abs() < 1e-15);

        // tiny pupil: full-visibility triangle
        let small = dip_no_modulation(&c, &o, &gauss(1e-6), &scan);
        assert!(small.trace.r_norm[1] < 1e-6);
    }

    #[test]
    fn tau1_formulas() {
        let (c, o) = setup();
        let rg = 1e-3;
        let t = envelope_width(&c, &o, &gauss(rg), &gauss(rg));
        let expect = 2.0 * o.d1 * c.group_delay / (c.pump_wavenumber * c.walkoff * rg);
        assert!((t / expect - 1.0).abs() < 1e-14);
        let r = 4e-3;
        let circ = Aperture::circular(r, ApertureLabel::A).unwrap();
        let t = envelope_width(&c, &o, &circ, &circ);
        let expect = 4.0 * std::f64::consts::SQRT_2 * o.d1 * c.group_delay / (c.pump_wavenumber * c.walkoff * r);
        assert!((t / expect - 1.0).abs() < 1e-14);

        let mut flat = c;
        flat.walkoff = 0.0;
        assert!(envelope_width(&flat, &o, &gauss(rg), &gauss(rg)).is_infinite());
        let scan = DelayScan::around_dip(&flat, 21).unwrap();
        let dip = dip_no_modulation(&flat, &o, &gauss(rg), &scan);
        assert!(dip.trace.min_r_norm().abs() < 1e-12);
    }

    #[test]
    fn tilt_examples() {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 61).unwrap();
        let a = gauss(3e-3);
        let none = dip_no_modulation(&c, &o, &a, &scan);
        let zero = dip_linear_tilt(&c, &o, &a, &TiltSpec::new(Vec2::ZERO), &scan);
        assert_eq!(none, zero);

        let (s1y, _) = compensation_tilt(&c, o.f);
        let matched = dip_linear_tilt(&c, &o, &a, &TiltSpec::new(Vec2::new(0.0, s1y)), &scan);
        assert!((matched.center - c.dip_center()).abs() < 1e-27);
        assert!(matched.trace.min_r_norm() < 1e-12);

        let doubled = tau_center(&c, &o, 2.0 * s1y);
        assert!((doubled - 2.0 * matched.center).abs() < 1e-27);
    }

    #[test]
    fn compensation_values() {
        let (c, _) = setup();
        let (s1y, theta) = compensation_tilt(&c, 0.2);
        assert!((theta * 1e3 - 0.1356).abs() < 1e-4);
        let k0 = 2.0 * std::f64::consts::PI / 810e-9;
        assert!((s1y - k0 * 0.0723 * 1.5e-3 / 0.4).abs() < 1e-9);
        assert!((s1y - 2.10e3).abs() < 10.0);
        let mut flat = c;
        flat.walkoff = 0.0;
        assert_eq!(compensation_tilt(&flat, 0.2), (0.0, 0.0));
        // mirror tilt reproduces the gradient
        let t = TiltSpec::from_mirror_tilt(theta, c.k0());
        assert!((t.s1.y / s1y - 1.0).abs() < 1e-7);
    }

    #[test]
    fn envelope_shift_law() {
        let (c, o) = setup();
        let scan = DelayScan::linspace(-2.0 * c.dip_width(), 2.0 * c.dip_width(), 801).unwrap();
        let step = scan.taus()[1] - scan.taus()[0];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (s1y_ref, _) = compensation_tilt(&c, o.f);
        for _ in 0..20 {
            let s1y = rng.gen_range(-2.0..2.0) * s1y_ref;
            let dip = dip_linear_tilt(&c, &o, &gauss(2e-3), &TiltSpec::new(Vec2::new(0.0, s1y)), &scan);
            let expect = o.f * c.group_delay * s1y / (c.k0() * c.walkoff);
            assert!((dip.trace.envelope_center() - expect).abs() <= step);
        }
    }

    #[test]
    fn restoration_at_large_pupil() {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 301).unwrap();
        // radius where the unmodulated dip falls below 50 % visibility
        let mut r50 = 1e-4;
        while dip_no_modulation(&c, &o, &gauss(r50), &scan).trace.visibility() >= 0.5 {
            r50 *= 1.01;
        }
        let a = gauss(4.0 * r50);
        let (s1y, _) = compensation_tilt(&c, o.f);
        let dip = dip_linear_tilt(&c, &o, &a, &TiltSpec::new(Vec2::new(0.0, s1y)), &scan);
        assert!(dip.trace.min_r_norm() <= 0.05);
    }

    fn mod_radius() -> f64 {
        2.5e-4
    }

    #[test]
    fn large_aperture_zero_phase() {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 41).unwrap();
        let spec = ZernikeSpec::empty(mod_radius()).unwrap();
        let t = dip_large_aperture(&c, &o, Modulation::Spec(&spec), &scan).unwrap();
        // envelope is the disk transform 2 J1(u)/u with u = gamma tau r
        let gamma = 2.0 * c.walkoff * c.k0() / (o.f * c.group_delay);
        for (tau, e) in t.taus.iter().zip(&t.envelope) {
            let expect = crate::apertures::jinc(gamma * tau * mod_radius());
            assert!((e - expect).abs() < 1e-9, "tau={tau} {e} vs {expect}");
        }
        let at0 = DelayScan::new(vec![0.0]).unwrap();
        let t0 = dip_large_aperture(&c, &o, Modulation::Spec(&spec), &at0).unwrap();
        assert!((t0.envelope[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn large_aperture_even_and_odd() {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 41).unwrap();
        let r = mod_radius();
        let zero = dip_large_aperture(&c, &o, Modulation::Spec(&ZernikeSpec::empty(r).unwrap()), &scan).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let spec = crate::zernike::tests::random_spec(&mut rng, 6, 3.0, r);
            let even = dip_large_aperture(&c, &o, Modulation::Spec(&spec.even_part()), &scan).unwrap();
            assert!(even.max_abs_diff(&zero) <= 1e-9);
            let full = dip_large_aperture(&c, &o, Modulation::Spec(&spec), &scan).unwrap();
            let odd = dip_large_aperture(&c, &o, Modulation::Spec(&spec.odd_part()), &scan).unwrap();
            assert!(full.max_abs_diff(&odd) <= 1e-9);
        }
        let coma = ZernikeSpec::new(vec![ZernikeTerm::new(3, 1, 1.0)], r).unwrap();
        let t = dip_large_aperture(&c, &o, Modulation::Spec(&coma), &scan).unwrap();
        assert!(t.max_abs_diff(&zero) > 1e-2);
    }

    #[test]
    fn large_aperture_empty_errors() {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 5).unwrap();
        let mut mask = PhaseMask::zeros(1e-4, 1).unwrap();
        mask = PhaseMask::new(mask.pitch(), 1, mask.phases().to_vec(), vec![0.0; 9]).unwrap();
        assert!(matches!(
            dip_large_aperture(&c, &o, Modulation::Mask(&mask), &scan),
            Err(HomError::EmptyAperture)
        ));
    }

    #[test]
    fn pointlike_even_cancellation_and_symmetry() {
        let (c, o) = setup();
        let scan = DelayScan::around_dip(&c, 21).unwrap();
        let a = gauss(1e-3);
        let r = 1e-3;
        let zero = ZernikeSpec::empty(r).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let even = crate::zernike::tests::random_spec(&mut rng, 6, 3.0, r).even_part();
        let x = Vec2::new(2e-5, -1e-5);
        let p0 = pointlike_modulation(&c, &o, &a, Modulation::Spec(&zero), x, &scan).unwrap();
        let pe = pointlike_modulation(&c, &o, &a, Modulation::Spec(&even), x, &scan).unwrap();
        for (u, v) in p0.values.iter().zip(&pe.values) {
            assert!((u - v).norm() <= 1e-9 * p0.norm);
        }
        let pm = pointlike_modulation(&c, &o, &a, Modulation::Spec(&zero), -x, &scan).unwrap();
        for (u, v) in p0.values.iter().zip(&pm.values) {
            assert!((u - v).norm() <= 1e-9 * p0.norm);
        }
    }

    #[test]
    fn pointlike_tilt_shift() {
        let (c, o) = setup();
        let scan = DelayScan::linspace(-0.5 * c.dip_width(), 1.5 * c.dip_width(), 201).unwrap();
        let step = scan.taus()[1] - scan.taus()[0];
        let a = gauss(1e-3);
        let r = 1e-3;
        let (s1y, _) = compensation_tilt(&c, o.f);
        // phi = s1y * y expressed as a sine-branch tilt term
        let tilt = ZernikeSpec::with_negative_m(vec![ZernikeTerm::new(1, -1, s1y * r)], r, NegativeM::Sine).unwrap();
        let p = pointlike_modulation(&c, &o, &a, Modulation::Spec(&tilt), Vec2::ZERO, &scan).unwrap();
        let mags = p.magnitudes();
        let imax = (0..mags.len()).max_by(|&i, &j| mags[i].total_cmp(&mags[j])).unwrap();
        let expect = tau_center(&c, &o, s1y);
        assert!(
            (scan.taus()[imax] - expect).abs() <= step,
            "{} vs {expect}",
            scan.taus()[imax]
        );
    }
}
