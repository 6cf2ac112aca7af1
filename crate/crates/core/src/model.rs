//! Physical parameters, the phase-mismatch function and the scalar
//! primitives (rect, triangle, sinc) shared by every other module.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A transverse 2-vector. Used both for momenta [1/m] and for positions [m].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm_sqr(self) -> f64 {
        self.x * self.x + self.y * self.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Rectangular window: 1 inside |x| < 1/2, 0 elsewhere (including the edge).
pub fn rect(x: f64) -> f64 {
    if x.abs() < 0.5 {
        1.0
    } else {
        0.0
    }
}

/// Triangular window `1 - |x|` on |x| <= 1.
pub fn triangle(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0 - a
    } else {
        0.0
    }
}

/// Unnormalized sinc, `sin(x)/x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Phase-matching constants of a type-II crystal.
///
/// The walk-off direction is fixed to +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrystalParams {
    /// Crystal length L [m].
    pub length: f64,
    /// Inverse group-velocity difference D [s/m].
    pub group_delay: f64,
    /// Walk-off slope M (sign gives the walk-off direction).
    pub walkoff: f64,
    /// Pump wavenumber k_p [1/m].
    pub pump_wavenumber: f64,
    /// Central down-converted angular frequency Omega_0 [rad/s].
    pub omega0: f64,
}

impl CrystalParams {
    pub fn new(length: f64, group_delay: f64, walkoff: f64, pump_wavenumber: f64, omega0: f64) -> Result<Self> {
        let c = Self {
            length,
            group_delay,
            walkoff,
            pump_wavenumber,
            omega0,
        };
        c.validate()?;
        Ok(c)
    }

    /// Builds the parameters from vacuum wavelengths of the down-converted
    /// photons and of the pump.
    pub fn from_wavelengths(
        length: f64,
        group_delay: f64,
        walkoff: f64,
        signal_wavelength: f64,
        pump_wavelength: f64,
    ) -> Result<Self> {
        if !(signal_wavelength > 0.0) || !(pump_wavelength > 0.0) {
            return Err(invalid("wavelength", "must be positive"));
        }
        let tau = 2.0 * std::f64::consts::PI;
        Self::new(
            length,
            group_delay,
            walkoff,
            tau / pump_wavelength,
            tau * SPEED_OF_LIGHT / signal_wavelength,
        )
    }

    /// 1.5 mm crystal, M = 0.0723, 405 nm pump, 810 nm down-conversion and
    /// D = 250 fs/mm. The value of D is a placeholder default.
    pub fn default_preset() -> Self {
        Self::from_wavelengths(1.5e-3, 250e-15 / 1e-3, 0.0723, 810e-9, 405e-9).expect("preset is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0) {
            return Err(invalid("length", "must be positive"));
        }
        if !(self.group_delay > 0.0) {
            return Err(invalid("group_delay", "must be positive"));
        }
        if !self.walkoff.is_finite() {
            return Err(invalid("walkoff", "must be finite"));
        }
        if !(self.pump_wavenumber > 0.0) {
            return Err(invalid("pump_wavenumber", "must be positive"));
        }
        if !(self.omega0 > 0.0) {
            return Err(invalid("omega0", "must be positive"));
        }
        Ok(())
    }

    /// Central down-converted wavenumber k_0 = Omega_0 / c.
    pub fn k0(&self) -> f64 {
        self.omega0 / SPEED_OF_LIGHT
    }

    /// Full width of the triangular dip in delay, D*L [s].
    pub fn dip_width(&self) -> f64 {
        self.group_delay * self.length
    }

    /// Delay of the dip minimum, D*L/2 [s].
    pub fn dip_center(&self) -> f64 {
        0.5 * self.dip_width()
    }

    /// The triangular dip factor `triangle(1 - 2 tau / DL)`.
    pub fn dip_triangle(&self, tau: f64) -> f64 {
        triangle(1.0 - 2.0 * tau / self.dip_width())
    }
}

/// Focal lengths and distances of the optical layout [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalLayout {
    /// Focal length of the Fourier-transform system.
    pub f: f64,
    /// Focal length of the detection lenses.
    pub f0: f64,
    /// Distance from the modulation plane to the detection apertures.
    pub d1: f64,
    /// Distance from the detection apertures to the lenses.
    pub d2: f64,
}

impl OpticalLayout {
    pub fn new(f: f64, f0: f64, d1: f64, d2: f64) -> Result<Self> {
        let o = Self { f, f0, d1, d2 };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f > 0.0) {
            return Err(invalid("f", "must be positive"));
        }
        if !(self.f0 > 0.0) {
            return Err(invalid("f0", "must be positive"));
        }
        if !(self.d1 > 0.0) {
            return Err(invalid("d1", "must be positive"));
        }
        if !self.d2.is_finite() {
            return Err(invalid("d2", "must be finite"));
        }
        Ok(())
    }

    /// Coefficient of the quadratic free-propagation phase, 2 d1 / k_p [m^2].
    pub fn propagation_coeff(&self, crystal: &CrystalParams) -> f64 {
        2.0 * self.d1 / crystal.pump_wavenumber
    }
}

/// Ordered delay samples [s].
#[derive(Debug, Clone, PartialEq)]
pub struct DelayScan {
    taus: Vec<f64>,
}

impl DelayScan {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.is_empty() {
            return Err(invalid("scan", "needs at least one delay"));
        }
        if taus.iter().any(|t| !t.is_finite()) {
            return Err(invalid("scan", "delays must be finite"));
        }
        if taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("scan", "delays must be strictly increasing"));
        }
        Ok(Self { taus })
    }

    /// `samples` evenly spaced delays from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, samples: usize) -> Result<Self> {
        match samples {
            0 => Err(invalid("scan", "needs at least one sample")),
            1 => Self::new(vec![start]),
            _ => {
                let step = (stop - start) / (samples - 1) as f64;
                Self::new((0..samples).map(|i| start + step * i as f64).collect())
            }
        }
    }

    /// The recommended span `[-0.25 DL, 1.25 DL]`.
    pub fn around_dip(crystal: &CrystalParams, samples: usize) -> Result<Self> {
        let w = crystal.dip_width();
        Self::linspace(-0.25 * w, 1.25 * w, samples)
    }

    pub fn taus(&self) -> &[f64] {
        &self.taus
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}

/// Phase mismatch `-nu D + M q_y + 2 |q|^2 / k_p` [1/m].
pub fn phase_mismatch(c: &CrystalParams, q: Vec2, nu: f64) -> f64 {
    -nu * c.group_delay + c.walkoff * q.y + 2.0 * q.norm_sqr() / c.pump_wavenumber
}

/// Biphoton amplitude `sinc(L Delta / 2) exp(i Delta L / 2)`.
pub fn biphoton_amplitude(c: &CrystalParams, q: Vec2, nu: f64) -> Complex64 {
    let half = 0.5 * c.length * phase_mismatch(c, q, nu);
    Complex64::from_polar(sinc(half), half)
}
