//! Brute-force evaluation of the exact double-momentum integrals.
//!
//! Plain tensor Gauss-Legendre rules, no adaptivity. Each momentum pair
//! `(q, q')` is rotated to the sum and difference coordinates; the pupil
//! window lives on one of them and is integrated over its truncated support,
//! the other is integrated numerically over the region allowed by the mask.
//!
//! Piecewise-constant masks use the pixel decomposition of the modulator
//! phase factor, which is exact for such masks; Zernike specs are evaluated
//! pointwise over the modulator disk.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analytic::Modulation;
use crate::apertures::{pair_support, pair_window_radial, Aperture, ApertureKind};
use crate::error::{invalid, HomError, Result};
use crate::model::{sinc, CrystalParams, DelayScan, OpticalLayout, Vec2};
use crate::quadrature::GaussLegendre;
use crate::trace::DipTrace;
use crate::zernike::{PhaseMask, ZernikeSpec};

/// Largest tensor grid accepted.
pub const BUDGET: f64 = 4_294_967_296.0; // 256^4
/// Largest grid used when a circular pupil forces the non-separable path;
/// expect accuracy around 1e-2 at this size.
pub const CIRCULAR_BUDGET: f64 = 16_777_216.0; // 64^4

/// Rule sizes for the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOrders {
    /// Nodes per panel on the window coordinate.
    pub s_order: usize,
    /// Nodes per panel on the complementary coordinate.
    pub t_order: usize,
    /// Nodes per axis on the window coordinate for Zernike specs.
    pub spec_s_order: usize,
    /// Radial nodes on the complementary coordinate for Zernike specs.
    pub spec_radial: usize,
    /// Angular nodes on the complementary coordinate for Zernike specs.
    pub spec_angular: usize,
}

impl Default for OracleOrders {
    fn default() -> Self {
        Self {
            s_order: 8,
            t_order: 16,
            spec_s_order: 16,
            spec_radial: 48,
            spec_angular: 96,
        }
    }
}

impl OracleOrders {
    pub fn doubled(self) -> Self {
        Self {
            s_order: 2 * self.s_order,
            t_order: 2 * self.t_order,
            spec_s_order: 2 * self.spec_s_order,
            spec_radial: 2 * self.spec_radial,
            spec_angular: 2 * self.spec_angular,
        }
    }
}

/// Nodes on the window coordinate of one axis plus the rule on the
/// complementary coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    /// `(s, weight)` pairs, ascending and symmetric about 0.
    pub s_nodes: Vec<(f64, f64)>,
    pub t_order: usize,
    /// Panels of `t_order` nodes spanning the longest complementary range.
    pub t_panels: usize,
    /// Pixel width in q [1/m].
    pub kappa: f64,
    /// Window truncation radius [1/m].
    pub truncation: f64,
}

impl QuadratureGrid {
    /// Panels on `[-S, S]` split at every multiple of `kappa`, where the
    /// pixel-pair overlap length has a kink, and subdivided so no panel is
    /// wider than `max_panel`.
    pub fn for_pixels(truncation: f64, kappa: f64, max_panel: f64, t_panels: usize, orders: OracleOrders) -> Self {
        let gl = GaussLegendre::new(orders.s_order);
        let mut edges = vec![-truncation];
        let j_max = (truncation / kappa).ceil() as i64;
        for j in -j_max..=j_max {
            let e = j as f64 * kappa;
            if e > -truncation && e < truncation {
                edges.push(e);
            }
        }
        edges.push(truncation);
        let mut s_nodes = Vec::new();
        for w in edges.windows(2) {
            let pieces = ((w[1] - w[0]) / max_panel).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / pieces as f64;
            for k in 0..pieces {
                let lo = w[0] + k as f64 * h;
                let hi = if k + 1 == pieces { w[1] } else { lo + h };
                s_nodes.extend(gl.mapped(lo, hi));
            }
        }
        Self {
            s_nodes,
            t_order: orders.t_order,
            t_panels,
            kappa,
            truncation,
        }
    }

    /// Tensor points for one pixel pair on both axes: nodes on the window
    /// coordinate within one pair's range times nodes on the complementary
    /// coordinate, squared.
    pub fn effective_points(&self) -> f64 {
        let s = self.s_nodes.iter().filter(|n| n.0.abs() < self.kappa).count();
        let per_axis = (s * self.t_order * self.t_panels) as f64;
        per_axis * per_axis
    }
}

/// Common constants of one configuration.
struct Setup {
    beta: f64,
    ml: f64,
    a: Aperture,
    b: Aperture,
}

impl Setup {
    fn new(c: &CrystalParams, o: &OpticalLayout, a: &Aperture, b: &Aperture) -> Result<Self> {
        c.validate()?;
        o.validate()?;
        Ok(Self {
            beta: o.propagation_coeff(c),
            ml: c.walkoff * c.length,
            a: *a,
            b: *b,
        })
    }

    fn window(&self, s: f64) -> f64 {
        pair_window_radial(&self.a, &self.b, s)
    }
}

/// Length over which the pair window changes appreciably [1/m].
fn window_scale(setup: &Setup) -> f64 {
    let scale = |a: &Aperture| match a.kind {
        ApertureKind::Gaussian { radius } => 2.0 / radius,
        ApertureKind::Circular { radius } => PI / (2.0 * radius),
    };
    scale(&setup.a).min(scale(&setup.b))
}

/// `(1/2) int_lo^hi dt e^{i freq t}` by composite Gauss-Legendre, one
/// panel per oscillation period.
fn half_exp_integral(gl: &GaussLegendre, lo: f64, hi: f64, freq: f64) -> Complex64 {
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let pieces = ((hi - lo) * freq.abs() / (2.0 * PI)).ceil().max(1.0) as usize;
    let h = (hi - lo) / pieces as f64;
    let mut total = Complex64::new(0.0, 0.0);
    for k in 0..pieces {
        let a = lo + k as f64 * h;
        total += gl.integrate_complex(a, a + h, |t| Complex64::from_polar(1.0, freq * t));
    }
    0.5 * total
}

/// Range of `t = q - q'` when `q` is in pixel `i`, `q'` in pixel `j` and
/// `q + q' = s`.
fn difference_range(kappa: f64, i: i32, j: i32, s: f64) -> (f64, f64) {
    let (i, j) = (i as f64, j as f64);
    let lo = (2.0 * kappa * (i - 0.5) - s).max(s - 2.0 * kappa * (j + 0.5));
    let hi = (2.0 * kappa * (i + 0.5) - s).min(s - 2.0 * kappa * (j - 0.5));
    (lo, hi)
}

/// Range of `u = q + q'` when `q` is in pixel `i`, `q'` in pixel `j` and
/// `q - q' = s`.
fn sum_range(kappa: f64, i: i32, j: i32, s: f64) -> (f64, f64) {
    let (i, j) = (i as f64, j as f64);
    let lo = (2.0 * kappa * (i - 0.5) - s).max(2.0 * kappa * (j - 0.5) + s);
    let hi = (2.0 * kappa * (i + 0.5) - s).min(2.0 * kappa * (j + 0.5) + s);
    (lo, hi)
}

/// Per-pixel-pair axis integrands at one window node, row-major `(i, j)`.
fn axis_block(n: i32, f: impl Fn(i32, i32) -> Complex64) -> Vec<Complex64> {
    (-n..=n)
        .flat_map(|i| (-n..=n).map(move |j| (i, j)))
        .map(|(i, j)| f(i, j))
        .collect()
}

/// `sum_{l,m,lam,mu} E_lm conj(E_lam,mu) X_{l,lam} Y_{m,mu}`, written out.
fn quadruple_sum(e: &[Complex64], side: usize, x: &[Complex64], y: &[Complex64]) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for l in 0..side {
        for m in 0..side {
            let a = e[l * side + m];
            for lam in 0..side {
                let xl = x[l * side + lam];
                for mu in 0..side {
                    total += a * e[lam * side + mu].conj() * xl * y[m * side + mu];
                }
            }
        }
    }
    total
}

/// `E Y E^H`, row-major.
fn sandwich(e: &[Complex64], side: usize, y: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); side * side];
    for l in 0..side {
        for lam in 0..side {
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..side {
                for mu in 0..side {
                    acc += e[l * side + m] * y[m * side + mu] * e[lam * side + mu].conj();
                }
            }
            out[l * side + lam] = acc;
        }
    }
    out
}

/// Path taken by the pixel-mask evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    /// Product of two per-axis integrals (Gaussian pupils only).
    Separable,
    /// Window evaluated on the two-dimensional tensor grid.
    Full,
}

struct MaskIntegrals {
    w: Vec<Complex64>,
    r0: Complex64,
}

fn mask_integrals(
    setup: &Setup,
    c: &CrystalParams,
    o: &OpticalLayout,
    mask: &PhaseMask,
    taus: &[f64],
    orders: OracleOrders,
    path: Path,
) -> Result<MaskIntegrals> {
    if path == Path::Separable && !(setup.a.is_gaussian() && setup.b.is_gaussian()) {
        return Err(invalid("oracle path", "the separable path needs Gaussian pupils"));
    }
    let kappa = c.k0() * mask.pitch() / o.f;
    let n = mask.half_extent() as i32;
    let side = mask.side();
    let support = pair_support(&setup.a, &setup.b).min(kappa * (2 * n + 1) as f64);
    // one panel per oscillation period of the pixel-pair phase, and per
    // lobe or width of the window
    let period = 2.0 * PI / (setup.beta * kappa * side as f64);
    let max_shift = taus
        .iter()
        .map(|t| (c.walkoff * t / c.group_delay).abs())
        .fold(0.0, f64::max);
    let t_panels = (2.0 * kappa * (setup.beta * support + max_shift) / (2.0 * PI))
        .ceil()
        .max(1.0) as usize;
    let grid = QuadratureGrid::for_pixels(support, kappa, period.min(window_scale(setup)), t_panels, orders);
    let limit = if path == Path::Full && !(setup.a.is_gaussian() && setup.b.is_gaussian()) {
        CIRCULAR_BUDGET
    } else {
        BUDGET
    };
    if grid.effective_points() > limit {
        return Err(HomError::BudgetExceeded {
            points: grid.effective_points(),
            limit,
        });
    }
    let gl_t = GaussLegendre::new(grid.t_order);
    let e: Vec<Complex64> = mask
        .phases()
        .iter()
        .zip(mask.transmissions())
        .map(|(&p, &t)| Complex64::from_polar(t, -p))
        .collect();
    let beta = setup.beta;
    let ml = setup.ml;
    let norm = beta / PI;

    // per-axis blocks at every window node
    let wx: Vec<Vec<Complex64>> = grid
        .s_nodes
        .par_iter()
        .map(|&(s, _)| {
            axis_block(n, |l, lam| {
                let (lo, hi) = difference_range(kappa, l, lam, s);
                half_exp_integral(&gl_t, lo, hi, beta * s)
            })
        })
        .collect();
    let wy: Vec<Vec<Vec<Complex64>>> = taus
        .par_iter()
        .map(|&tau| {
            let lt = c.dip_triangle(tau);
            let shift = c.walkoff * tau / c.group_delay;
            grid.s_nodes
                .iter()
                .map(|&(s, _)| {
                    let damp = sinc(ml * s * lt);
                    axis_block(n, |m, mu| {
                        let (lo, hi) = difference_range(kappa, m, mu, s);
                        damp * half_exp_integral(&gl_t, lo, hi, beta * s + shift)
                    })
                })
                .collect()
        })
        .collect();
    let rx: Vec<Vec<Complex64>> = grid
        .s_nodes
        .par_iter()
        .map(|&(s, _)| {
            axis_block(n, |l, lam| {
                let (lo, hi) = sum_range(kappa, l, lam, s);
                half_exp_integral(&gl_t, lo, hi, beta * s)
            })
        })
        .collect();
    let ry: Vec<Vec<Complex64>> = grid
        .s_nodes
        .iter()
        .zip(&rx)
        .map(|(&(s, _), block)| {
            let f = Complex64::from_polar(sinc(ml * s), -0.5 * ml * s);
            block.iter().map(|v| v * f).collect()
        })
        .collect();

    let weights: Vec<f64> = grid.s_nodes.iter().map(|&(_, w)| w).collect();
    let s_vals: Vec<f64> = grid.s_nodes.iter().map(|&(s, _)| s).collect();
    let pp_axis = |s: f64| setup.window(s.abs());

    let (w, r0) = match path {
        Path::Separable => {
            // Gaussian window factorizes: PP(s) = PP_x(s_x) PP_y(s_y)
            let fold = |blocks: &[Vec<Complex64>]| {
                let mut acc = vec![Complex64::new(0.0, 0.0); side * side];
                for (k, b) in blocks.iter().enumerate() {
                    let f = weights[k] * pp_axis(s_vals[k]);
                    for (a, v) in acc.iter_mut().zip(b) {
                        *a += v * f;
                    }
                }
                acc
            };
            let kx = fold(&wx);
            let w = wy
                .par_iter()
                .map(|blocks| quadruple_sum(&e, side, &kx, &fold(blocks)) * (norm * norm))
                .collect();
            let r0 = quadruple_sum(&e, side, &fold(&rx), &fold(&ry)) * (norm * norm);
            (w, r0)
        }
        Path::Full => {
            let full = |xs: &[Vec<Complex64>], ys: &[Vec<Complex64>]| {
                let sand: Vec<Vec<Complex64>> = ys.iter().map(|y| sandwich(&e, side, y)).collect();
                let mut total = Complex64::new(0.0, 0.0);
                for (i, x) in xs.iter().enumerate() {
                    for (j, b) in sand.iter().enumerate() {
                        let r = s_vals[i].hypot(s_vals[j]);
                        let f = weights[i] * weights[j] * setup.window(r);
                        if f == 0.0 {
                            continue;
                        }
                        let dot: Complex64 = x.iter().zip(b).map(|(u, v)| u * v).sum();
                        total += dot * f;
                    }
                }
                total * (norm * norm)
            };
            let w = wy.par_iter().map(|ys| full(&wx, ys)).collect();
            let r0 = full(&rx, &ry);
            (w, r0)
        }
    };
    Ok(MaskIntegrals { w, r0 })
}

/// Largest distance from the origin along direction `e` such that both
/// `|s + t e| <= 2 rho` and `|s - t e| <= 2 rho`.
fn lens_extent(s: Vec2, e: Vec2, rho: f64) -> f64 {
    let p = s.dot(e).abs();
    let disc = p * p + 4.0 * rho * rho - s.norm_sqr();
    if disc <= 0.0 {
        0.0
    } else {
        (disc.sqrt() - p).max(0.0)
    }
}

fn spec_integrals(
    setup: &Setup,
    c: &CrystalParams,
    o: &OpticalLayout,
    spec: &ZernikeSpec,
    taus: &[f64],
    orders: OracleOrders,
) -> Result<MaskIntegrals> {
    let rho = c.k0() * spec.radius() / o.f;
    let support = pair_support(&setup.a, &setup.b).min(2.0 * rho);
    let points = (orders.spec_s_order * orders.spec_s_order * orders.spec_radial * orders.spec_angular) as f64;
    let limit = if setup.a.is_gaussian() && setup.b.is_gaussian() {
        BUDGET
    } else {
        CIRCULAR_BUDGET
    };
    if points > limit {
        return Err(HomError::BudgetExceeded { points, limit });
    }
    let gl_s = GaussLegendre::new(orders.spec_s_order);
    let gl_r = GaussLegendre::new(orders.spec_radial);
    let na = orders.spec_angular;
    let dth = 2.0 * PI / na as f64;
    let dirs: Vec<Vec2> = (0..na)
        .map(|k| {
            let th = (k as f64 + 0.5) * dth;
            Vec2::new(th.cos(), th.sin())
        })
        .collect();
    let s_axis: Vec<(f64, f64)> = gl_s.mapped(-support, support).collect();
    let s_nodes: Vec<(Vec2, f64)> = s_axis
        .iter()
        .flat_map(|&(x, wx)| s_axis.iter().map(move |&(y, wy)| (Vec2::new(x, y), wx * wy)))
        .collect();
    let to_mod = o.f / c.k0();
    let phase = |q: Vec2| spec.phase_at(q * to_mod);
    let beta = setup.beta;
    let ml = setup.ml;
    let shifts: Vec<f64> = taus.iter().map(|&t| c.walkoff * t / c.group_delay).collect();
    let damps: Vec<f64> = taus.iter().map(|&t| c.dip_triangle(t)).collect();

    // both integrals share the lens-shaped region for the complementary coordinate
    let contributions: Vec<(Vec<Complex64>, Complex64)> = s_nodes
        .par_iter()
        .map(|&(s, ws)| {
            let pp = setup.window(s.norm());
            let mut w = vec![Complex64::new(0.0, 0.0); taus.len()];
            let mut r0 = Complex64::new(0.0, 0.0);
            if pp == 0.0 {
                return (w, r0);
            }
            for &e in &dirs {
                let rmax = lens_extent(s, e, rho);
                if rmax == 0.0 {
                    continue;
                }
                for (r, wr) in gl_r.mapped(0.0, rmax) {
                    let t = e * r;
                    let weight = ws * wr * r * dth * pp;
                    let a = (s + t) * 0.5;
                    let b = (s - t) * 0.5;
                    // W: window on the sum q + q' = s, difference q - q' = t
                    let g = Complex64::from_polar(weight, beta * s.dot(t) - (phase(a) - phase(b)));
                    for k in 0..taus.len() {
                        let f = sinc(ml * s.y * damps[k]);
                        w[k] += g * Complex64::from_polar(f, shifts[k] * t.y);
                    }
                    // R0: window on the difference q - q' = s, sum q + q' = t
                    let bg = Complex64::from_polar(
                        weight * sinc(ml * s.y),
                        beta * s.dot(t) - 0.5 * ml * s.y - (phase(a) - phase(-b)),
                    );
                    r0 += bg;
                }
            }
            (w, r0)
        })
        .collect();
    let scale = (beta / PI).powi(2) * 0.25;
    let mut w = vec![Complex64::new(0.0, 0.0); taus.len()];
    let mut r0 = Complex64::new(0.0, 0.0);
    for (cw, cr) in contributions {
        for (acc, v) in w.iter_mut().zip(cw) {
            *acc += v;
        }
        r0 += cr;
    }
    Ok(MaskIntegrals {
        w: w.into_iter().map(|v| v * scale).collect(),
        r0: r0 * scale,
    })
}

fn integrals(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    modulation: Modulation<'_>,
    taus: &[f64],
    orders: OracleOrders,
) -> Result<MaskIntegrals> {
    let setup = Setup::new(c, o, a, b)?;
    match modulation {
        Modulation::Mask(mask) => {
            if mask.is_opaque() {
                return Err(HomError::EmptyAperture);
            }
            let path = if a.is_gaussian() && b.is_gaussian() {
                Path::Separable
            } else {
                Path::Full
            };
            mask_integrals(&setup, c, o, mask, taus, orders, path)
        }
        Modulation::Spec(spec) => spec_integrals(&setup, c, o, spec, taus, orders),
    }
}

/// Interference term `W(tau)` at each delay, normalized so the unmodulated
/// background of a fully covered pupil window is 1.
pub fn direct_w(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    modulation: Modulation<'_>,
    scan: &DelayScan,
    orders: OracleOrders,
) -> Result<Vec<Complex64>> {
    Ok(integrals(c, o, a, b, modulation, scan.taus(), orders)?.w)
}

/// Background rate `R0`.
pub fn direct_r0(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    modulation: Modulation<'_>,
    orders: OracleOrders,
) -> Result<Complex64> {
    Ok(integrals(c, o, a, b, modulation, &[], orders)?.r0)
}

/// Pixel-mask evaluation on an explicitly chosen path, returning `(W, R0)`.
#[allow(clippy::too_many_arguments)]
pub fn direct_mask_on_path(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    mask: &PhaseMask,
    scan: &DelayScan,
    orders: OracleOrders,
    path: Path,
) -> Result<(Vec<Complex64>, Complex64)> {
    let setup = Setup::new(c, o, a, b)?;
    let r = mask_integrals(&setup, c, o, mask, scan.taus(), orders, path)?;
    Ok((r.w, r.r0))
}

/// Normalized trace `1 - T(tau) W(tau) / R0`.
pub fn direct_trace(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    modulation: Modulation<'_>,
    scan: &DelayScan,
    orders: OracleOrders,
) -> Result<DipTrace> {
    let r = integrals(c, o, a, b, modulation, scan.taus(), orders)?;
    let r0 = r.r0.re;
    if !(r0.abs() > 0.0) {
        return Err(HomError::Degenerate("background vanishes".into()));
    }
    let taus = scan.taus().to_vec();
    let tri = taus.iter().map(|&t| c.dip_triangle(t)).collect();
    let env = r.w.iter().map(|w| w.re / r0).collect();
    Ok(DipTrace::from_envelope(taus, tri, env, r0))
}

/// Checks `exp(i sum_k phi_k chi_k(x)) = sum_k exp(i phi_k) chi_k(x)` for
/// indicator functions of disjoint pixel sets on a grid of pitch `pitch`.
/// Returns the largest deviation over `samples`.
pub fn charfun_identity_check(phases: &[f64], sets: &[Vec<(i32, i32)>], pitch: f64, samples: &[Vec2]) -> Result<f64> {
    if phases.len() != sets.len() {
        return Err(invalid("phases", "one phase per set"));
    }
    if !(pitch > 0.0) {
        return Err(invalid("pitch", "must be positive"));
    }
    let mut owner = std::collections::HashMap::new();
    for (k, set) in sets.iter().enumerate() {
        for &p in set {
            if let Some(&first) = owner.get(&p) {
                if first != k {
                    return Err(HomError::OverlappingSets { first, second: k });
                }
            }
            owner.insert(p, k);
        }
    }
    let mut worst = 0.0_f64;
    for &x in samples {
        let pixel = ((x.x / pitch).round() as i32, (x.y / pitch).round() as i32);
        let chi: Vec<f64> = sets
            .iter()
            .map(|s| if s.contains(&pixel) { 1.0 } else { 0.0 })
            .collect();
        if chi.iter().sum::<f64>() == 0.0 {
            return Err(invalid("samples", "every sample must lie in some set"));
        }
        let lhs = Complex64::from_polar(1.0, phases.iter().zip(&chi).map(|(p, c)| p * c).sum());
        let rhs: Complex64 = phases
            .iter()
            .zip(&chi)
            .map(|(&p, &c)| Complex64::from_polar(c, p))
            .sum();
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests;
