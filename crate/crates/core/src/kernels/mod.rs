//! Pixel-discretized kernel method.
//!
//! For a mask that is constant over square pixels of pitch `d`, the double
//! momentum integrals separate into per-axis kernels that depend only on the
//! optical configuration. Writing `kappa = k0 d / f` for the pixel width in
//! q-space, `beta = 2 d1 / k_p` and `PP` for the pupil pair window along one
//! axis, the kernels are single integrals over the sum coordinate `s`:
//!
//! ```text
//! alpha_{l,lam}  = c int ds PP(s) T(s/kappa - (l+lam)) sinc(beta kappa s T) e^{i beta kappa (l-lam) s}
//! I_{m,mu}(tau)  = c int ds PP(s) T(s/kappa - (m+mu)) sinc(M L s T_tau)
//!                    sinc(kappa (beta s + M tau/D) T) e^{i kappa (beta s + M tau/D) (m-mu)}
//! R0x_{l,lam}    = c int ds PP(s) T(s/kappa - (l-lam)) sinc(beta kappa s T) e^{i beta kappa (l+lam) s}
//! R0y_{m,mu}     = c int ds PP(s) T(s/kappa - (m-mu)) sinc(M L s) sinc(beta kappa s T)
//!                    e^{i [beta kappa (m+mu) - M L / 2] s}
//! ```
//!
//! with `T` the triangle function, `T_tau = T(1 - 2 tau / (D L))` and
//! `c = (beta / pi) kappa`, which normalizes the unmodulated background to
//! `P_A(0) P_B(0) = 1` once the grid covers the pupil window.

mod cache;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::apertures::{pair_support, pair_tail_estimate, pair_window_radial, Aperture, ApertureKind};
use crate::error::{invalid, HomError, Result};
use crate::model::{sinc, triangle, CrystalParams, DelayScan, OpticalLayout};
use crate::quadrature::{adaptive, AdaptiveTolerance};
use crate::trace::DipTrace;
use crate::zernike::PhaseMask;

pub use cache::{read_cache, write_cache, CACHE_MAGIC, CACHE_VERSION};

/// Everything a kernel table depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    pub crystal: CrystalParams,
    pub layout: OpticalLayout,
    pub aperture_a: Aperture,
    pub aperture_b: Aperture,
    /// Pixel pitch on the modulator [m].
    pub pitch: f64,
    /// Pixels span indices `-N..=N` on each axis.
    pub half_extent: usize,
    pub scan: DelayScan,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        self.crystal.validate()?;
        self.layout.validate()?;
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(invalid("pitch", "must be positive and finite"));
        }
        if self.half_extent > 200 {
            return Err(invalid("half_extent", "at most 200"));
        }
        Ok(())
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    fn axis(&self) -> Axis {
        Axis::new(
            &self.crystal,
            &self.layout,
            &self.aperture_a,
            &self.aperture_b,
            self.pitch,
        )
    }

    /// SHA-256 over every field, in a fixed byte layout.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"hom-kernels");
        let c = &self.crystal;
        for v in [c.length, c.group_delay, c.walkoff, c.pump_wavenumber, c.omega0] {
            h.update(v.to_le_bytes());
        }
        let o = &self.layout;
        for v in [o.f, o.f0, o.d1, o.d2] {
            h.update(v.to_le_bytes());
        }
        for a in [&self.aperture_a, &self.aperture_b] {
            let (tag, r) = match a.kind {
                ApertureKind::Gaussian { radius } => (0u8, radius),
                ApertureKind::Circular { radius } => (1u8, radius),
            };
            h.update([tag]);
            h.update(r.to_le_bytes());
        }
        h.update(self.pitch.to_le_bytes());
        h.update((self.half_extent as u64).to_le_bytes());
        h.update((self.scan.len() as u64).to_le_bytes());
        for t in self.scan.taus() {
            h.update(t.to_le_bytes());
        }
        h.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        self.hash().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Square complex matrix indexed by signed pixel indices `-N..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    half_extent: usize,
    data: Vec<Complex64>,
}

impl KernelMatrix {
    pub(crate) fn from_vec(half_extent: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), (2 * half_extent + 1).pow(2));
        Self { half_extent, data }
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn get(&self, row: i32, col: i32) -> Complex64 {
        let n = self.half_extent as i32;
        let side = self.side();
        self.data[(row + n) as usize * side + (col + n) as usize]
    }

    /// Row-major entries, rows and columns ascending from `-N`.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// `I_{m,mu}(tau_k)` stored row-major in `(m, mu, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTensor {
    half_extent: usize,
    n_tau: usize,
    data: Vec<Complex64>,
}

impl KernelTensor {
    pub(crate) fn from_vec(half_extent: usize, n_tau: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), (2 * half_extent + 1).pow(2) * n_tau);
        Self {
            half_extent,
            n_tau,
            data,
        }
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn get(&self, m: i32, mu: i32, k: usize) -> Complex64 {
        let n = self.half_extent as i32;
        let side = 2 * self.half_extent + 1;
        self.data[((m + n) as usize * side + (mu + n) as usize) * self.n_tau + k]
    }

    /// The `(m, mu)` matrix at delay sample `k`.
    pub fn at(&self, k: usize) -> KernelMatrix {
        let side = 2 * self.half_extent + 1;
        let data = (0..side * side).map(|i| self.data[i * self.n_tau + k]).collect();
        KernelMatrix::from_vec(self.half_extent, data)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Precomputed kernels for one configuration, reusable across masks.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    config: KernelConfig,
    hash: [u8; 32],
    alpha: KernelMatrix,
    i_tensor: KernelTensor,
    r0x: KernelMatrix,
    r0y: KernelMatrix,
}

impl KernelTable {
    /// Tabulates all four kernels.
    pub fn build(config: KernelConfig) -> Result<Self> {
        config.validate()?;
        let (c, o, a, b) = (&config.crystal, &config.layout, &config.aperture_a, &config.aperture_b);
        let n = config.half_extent;
        let alpha = tabulate_alpha(c, o, a, b, config.pitch, n)?;
        let i_tensor = tabulate_i(c, o, a, b, config.pitch, n, &config.scan)?;
        let (r0x, r0y) = tabulate_r0(c, o, a, b, config.pitch, n)?;
        Ok(Self::from_parts(config, alpha, i_tensor, r0x, r0y))
    }

    pub(crate) fn from_parts(
        config: KernelConfig,
        alpha: KernelMatrix,
        i_tensor: KernelTensor,
        r0x: KernelMatrix,
        r0y: KernelMatrix,
    ) -> Self {
        let hash = config.hash();
        Self {
            config,
            hash,
            alpha,
            i_tensor,
            r0x,
            r0y,
        }
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn hash(&self) -> &[u8; 32] {
        &self.hash
    }

    pub fn alpha(&self) -> &KernelMatrix {
        &self.alpha
    }

    pub fn i_tensor(&self) -> &KernelTensor {
        &self.i_tensor
    }

    pub fn r0x(&self) -> &KernelMatrix {
        &self.r0x
    }

    pub fn r0y(&self) -> &KernelMatrix {
        &self.r0y
    }
}

/// Per-axis constants and the 1-D pair window.
struct Axis {
    kappa: f64,
    beta: f64,
    norm: f64,
    support: f64,
    tail: f64,
    a: Aperture,
    b: Aperture,
}

impl Axis {
    fn new(c: &CrystalParams, o: &OpticalLayout, a: &Aperture, b: &Aperture, pitch: f64) -> Self {
        let kappa = c.k0() * pitch / o.f;
        let beta = o.propagation_coeff(c);
        Self {
            kappa,
            beta,
            norm: beta / PI * kappa,
            support: pair_support(a, b),
            tail: pair_tail_estimate(a, b),
            a: *a,
            b: *b,
        }
    }

    fn window(&self, s: f64) -> f64 {
        pair_window_radial(&self.a, &self.b, s.abs())
    }

    /// `c int ds PP(s) T(s/kappa - center) g(s, T)`, split at the triangle's
    /// kink and clipped to the window support.
    fn integrate<G>(&self, center: i32, g: G, kernel: &'static str, i: i32, j: i32) -> Result<Complex64>
    where
        G: Fn(f64, f64) -> Complex64,
    {
        let k = self.kappa;
        let mid = k * center as f64;
        let f = |s: f64| {
            let t = triangle(s / k - center as f64);
            g(s, t) * (self.window(s) * t)
        };
        let tol = AdaptiveTolerance::default();
        let mut total = Complex64::new(0.0, 0.0);
        let mut worst = 0.0_f64;
        for (lo, hi) in [(mid - k, mid), (mid, mid + k)] {
            let lo = lo.max(-self.support);
            let hi = hi.min(self.support);
            if hi <= lo {
                continue;
            }
            let r = adaptive(&f, lo, hi, tol);
            total += r.value;
            worst = worst.max(r.worst_unresolved);
        }
        if worst > tol.fail_rel {
            return Err(HomError::KernelNotConverged {
                kernel,
                i,
                j,
                change: worst,
            });
        }
        Ok(total * self.norm)
    }
}

fn index_pairs(n: usize) -> Vec<(i32, i32)> {
    let n = n as i32;
    (-n..=n).flat_map(|i| (-n..=n).map(move |j| (i, j))).collect()
}

fn alpha_element(ax: &Axis, l: i32, lam: i32) -> Result<Complex64> {
    let bk = ax.beta * ax.kappa;
    let dl = (l - lam) as f64;
    ax.integrate(
        l + lam,
        |s, t| Complex64::from_polar(sinc(bk * s * t), bk * dl * s),
        "alpha",
        l,
        lam,
    )
}

/// `alpha_{l,lam}` for `l, lam` in `-N..=N`.
pub fn tabulate_alpha(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    d: f64,
    n: usize,
) -> Result<KernelMatrix> {
    let ax = Axis::new(c, o, a, b, d);
    let data = index_pairs(n)
        .par_iter()
        .map(|&(l, lam)| alpha_element(&ax, l, lam))
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelMatrix::from_vec(n, data))
}

/// `I_{m,mu}(tau)` for every delay in `scan`.
pub fn tabulate_i(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    d: f64,
    n: usize,
    scan: &DelayScan,
) -> Result<KernelTensor> {
    let ax = Axis::new(c, o, a, b, d);
    let ml = c.walkoff * c.length;
    let jobs: Vec<(i32, i32, usize)> = index_pairs(n)
        .into_iter()
        .flat_map(|(m, mu)| (0..scan.len()).map(move |k| (m, mu, k)))
        .collect();
    let data = jobs
        .par_iter()
        .map(|&(m, mu, k)| {
            let tau = scan.taus()[k];
            let lam_tau = c.dip_triangle(tau);
            let shift = c.walkoff * tau / c.group_delay;
            let dm = (m - mu) as f64;
            ax.integrate(
                m + mu,
                |s, t| {
                    let u = ax.beta * s + shift;
                    Complex64::from_polar(sinc(ml * s * lam_tau) * sinc(ax.kappa * u * t), ax.kappa * u * dm)
                },
                "I",
                m,
                mu,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KernelTensor::from_vec(n, scan.len(), data))
}

/// Background kernels `(R0x, R0y)`.
pub fn tabulate_r0(
    c: &CrystalParams,
    o: &OpticalLayout,
    a: &Aperture,
    b: &Aperture,
    d: f64,
    n: usize,
) -> Result<(KernelMatrix, KernelMatrix)> {
    let ax = Axis::new(c, o, a, b, d);
    let bk = ax.beta * ax.kappa;
    let ml = c.walkoff * c.length;
    let pairs = index_pairs(n);
    let x = pairs
        .par_iter()
        .map(|&(l, lam)| {
            let sl = (l + lam) as f64;
            ax.integrate(
                l - lam,
                |s, t| Complex64::from_polar(sinc(bk * s * t), bk * sl * s),
                "R0x",
                l,
                lam,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let y = pairs
        .par_iter()
        .map(|&(m, mu)| {
            let sm = (m + mu) as f64;
            ax.integrate(
                m - mu,
                |s, t| Complex64::from_polar(sinc(ml * s) * sinc(bk * s * t), (bk * sm - 0.5 * ml) * s),
                "R0y",
                m,
                mu,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((KernelMatrix::from_vec(n, x), KernelMatrix::from_vec(n, y)))
}

/// Un-normalized assembled rates: background and interference term per delay.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledRates {
    pub r0: Complex64,
    pub w: Vec<Complex64>,
}

/// Pixel amplitudes `t_lm e^{-i phi_lm}`, row-major in `(l, m)`.
fn pixel_amplitudes(mask: &PhaseMask) -> Vec<Complex64> {
    mask.phases()
        .iter()
        .zip(mask.transmissions())
        .map(|(&p, &t)| Complex64::from_polar(t, -p))
        .collect()
}

/// `sum_{l,lam} K_{l,lam} (E Y E^H)_{l,lam}`.
fn contract(e: &[Complex64], side: usize, k: &[Complex64], y: &[Complex64]) -> Complex64 {
    // ey[l][mu] = sum_m E[l][m] Y[m][mu]
    let mut ey = vec![Complex64::new(0.0, 0.0); side * side];
    for l in 0..side {
        for m in 0..side {
            let elm = e[l * side + m];
            if elm == Complex64::new(0.0, 0.0) {
                continue;
            }
            for mu in 0..side {
                ey[l * side + mu] += elm * y[m * side + mu];
            }
        }
    }
    let mut total = Complex64::new(0.0, 0.0);
    for l in 0..side {
        for lam in 0..side {
            let kl = k[l * side + lam];
            let mut b = Complex64::new(0.0, 0.0);
            for mu in 0..side {
                b += ey[l * side + mu] * e[lam * side + mu].conj();
            }
            total += kl * b;
        }
    }
    total
}

fn check_mask(table: &KernelTable, mask: &PhaseMask) -> Result<()> {
    let cfg = table.config();
    if mask.half_extent() != cfg.half_extent {
        return Err(HomError::MaskMismatch(format!(
            "mask half extent {} vs table {}",
            mask.half_extent(),
            cfg.half_extent
        )));
    }
    if (mask.pitch() - cfg.pitch).abs() > 1e-12 * cfg.pitch {
        return Err(HomError::MaskMismatch(format!(
            "mask pitch {:e} m vs table {:e} m",
            mask.pitch(),
            cfg.pitch
        )));
    }
    Ok(())
}

/// Double sums for `R0` and `W(tau)` without normalization.
pub fn assemble_rates(table: &KernelTable, mask: &PhaseMask) -> Result<AssembledRates> {
    check_mask(table, mask)?;
    let side = table.config().side();
    let e = pixel_amplitudes(mask);
    let r0 = contract(&e, side, table.r0x.as_slice(), table.r0y.as_slice());
    let w = (0..table.i_tensor.n_tau())
        .into_par_iter()
        .map(|k| {
            let ik = table.i_tensor.at(k);
            contract(&e, side, table.alpha.as_slice(), ik.as_slice())
        })
        .collect();
    Ok(AssembledRates { r0, w })
}

/// Coincidence trace for `mask`, normalized by the assembled background.
pub fn assemble(table: &KernelTable, mask: &PhaseMask) -> Result<DipTrace> {
    let rates = assemble_rates(table, mask)?;
    let c = &table.config().crystal;
    let r0 = rates.r0.re;
    if !(r0.abs() > 0.0) {
        return Err(HomError::Degenerate("assembled background vanishes".into()));
    }
    let taus = table.config().scan.taus().to_vec();
    let tri = taus.iter().map(|&t| c.dip_triangle(t)).collect();
    let env = rates.w.iter().map(|w| w.re / r0).collect();
    Ok(DipTrace::from_envelope(taus, tri, env, r0))
}

/// Large-pupil assembly with `alpha_{l,lam} = delta_{l,-lam}` and
/// `I_{m,-m}(tau) = sinc(kappa M tau / D) e^{2 i kappa M m tau / D}`; only
/// the phase differences `phi_lm - phi_{-l,-m}` survive.
pub fn assemble_big(
    c: &CrystalParams,
    o: &OpticalLayout,
    d: f64,
    n: usize,
    mask: &PhaseMask,
    scan: &DelayScan,
) -> Result<DipTrace> {
    if mask.half_extent() != n || (mask.pitch() - d).abs() > 1e-12 * d {
        return Err(HomError::MaskMismatch(format!(
            "mask ({:e} m, N={}) vs requested ({d:e} m, N={n})",
            mask.pitch(),
            mask.half_extent()
        )));
    }
    let kappa = c.k0() * d / o.f;
    let h = n as i32;
    let mut r0 = 0.0;
    let mut pairs = Vec::new();
    for l in -h..=h {
        for m in -h..=h {
            let t = mask.transmission(l, m);
            r0 += t * t;
            let tt = t * mask.transmission(-l, -m);
            if tt != 0.0 {
                let dphi = mask.phase(l, m) - mask.phase(-l, -m);
                pairs.push((m as f64, Complex64::from_polar(tt, -dphi)));
            }
        }
    }
    if r0 == 0.0 {
        return Err(HomError::EmptyAperture);
    }
    let taus = scan.taus().to_vec();
    let env = taus
        .iter()
        .map(|&tau| {
            let u = kappa * c.walkoff * tau / c.group_delay;
            let w: Complex64 = pairs
                .iter()
                .map(|&(m, g)| g * Complex64::from_polar(sinc(u), 2.0 * u * m))
                .sum();
            w.re / r0
        })
        .collect();
    let tri = taus.iter().map(|&t| c.dip_triangle(t)).collect();
    Ok(DipTrace::from_envelope(taus, tri, env, 1.0))
}

/// Leakage of `alpha` off its anti-diagonal: `|alpha_{0,1}|^2 / |alpha_{0,0}|^2`.
pub fn rho0(c: &CrystalParams, o: &OpticalLayout, a: &Aperture, d: f64) -> Result<f64> {
    let ax = Axis::new(c, o, a, a, d);
    let a00 = alpha_element(&ax, 0, 0)?;
    let a01 = alpha_element(&ax, 0, 1)?;
    if a00.norm() == 0.0 {
        return Err(HomError::Degenerate("alpha_00 vanishes".into()));
    }
    Ok(a01.norm_sqr() / a00.norm_sqr())
}

/// Bound on the window integral dropped by truncation [1/m]; zero for
/// Gaussian pupils.
pub fn truncation_estimate(config: &KernelConfig) -> f64 {
    config.axis().tail
}
