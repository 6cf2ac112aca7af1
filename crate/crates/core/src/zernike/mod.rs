//! Zernike synthesis of modulator phases and their parity structure.
//!
//! Terms are unit-amplitude `R_n^m(rho) cos(m theta)`. Negative `m` keeps
//! the cosine form unless [`NegativeM::Sine`] is selected.

mod mask;

pub use mask::{pixelize, PhaseMask, StraddleRule};

use std::collections::HashSet;

use crate::error::{invalid, HomError, Result};
use crate::model::Vec2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZernikeTerm {
    pub n: i32,
    pub m: i32,
    /// Coefficient [rad].
    pub coeff: f64,
}

impl ZernikeTerm {
    pub fn new(n: i32, m: i32, coeff: f64) -> Self {
        Self { n, m, coeff }
    }

    pub fn is_odd(&self) -> bool {
        self.m.rem_euclid(2) == 1
    }
}

/// Angular function used for terms with negative azimuthal order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NegativeM {
    #[default]
    Cosine,
    Sine,
}

/// A phase over the modulator disk of radius `radius` [m].
#[derive(Debug, Clone, PartialEq)]
pub struct ZernikeSpec {
    terms: Vec<ZernikeTerm>,
    radius: f64,
    negative_m: NegativeM,
}

pub fn check_indices(n: i32, m: i32) -> Result<()> {
    if n < 0 {
        return Err(HomError::InvalidZernike {
            n,
            m,
            reason: "radial order must be non-negative",
        });
    }
    if m.abs() > n {
        return Err(HomError::InvalidZernike {
            n,
            m,
            reason: "|m| exceeds n",
        });
    }
    if (n - m.abs()) % 2 != 0 {
        return Err(HomError::InvalidZernike {
            n,
            m,
            reason: "n - |m| must be even",
        });
    }
    Ok(())
}

/// Zernike radial polynomial `R_n^m(rho)`.
pub fn radial_poly(n: i32, m: i32, rho: f64) -> Result<f64> {
    check_indices(n, m)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid("rho", "must lie in [0, 1]"));
    }
    Ok(radial_unchecked(n, m.abs(), rho))
}

fn factorial(k: i32) -> f64 {
    (1..=k).map(f64::from).product()
}

pub(crate) fn radial_unchecked(n: i32, m: i32, rho: f64) -> f64 {
    let half_plus = (n + m) / 2;
    let half_minus = (n - m) / 2;
    let mut sum = 0.0;
    for k in 0..=half_minus {
        let c = factorial(n - k) / (factorial(k) * factorial(half_plus - k) * factorial(half_minus - k));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * c * rho.powi(n - 2 * k);
    }
    sum
}

impl ZernikeSpec {
    pub fn new(terms: Vec<ZernikeTerm>, radius: f64) -> Result<Self> {
        Self::with_negative_m(terms, radius, NegativeM::Cosine)
    }

    pub fn with_negative_m(terms: Vec<ZernikeTerm>, radius: f64, negative_m: NegativeM) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("modulator radius", "must be positive and finite"));
        }
        let mut seen = HashSet::new();
        for t in &terms {
            check_indices(t.n, t.m)?;
            if !t.coeff.is_finite() {
                return Err(invalid("Zernike coefficient", "must be finite"));
            }
            if !seen.insert((t.n, t.m)) {
                return Err(HomError::DuplicateZernike { n: t.n, m: t.m });
            }
        }
        Ok(Self {
            terms,
            radius,
            negative_m,
        })
    }

    pub fn empty(radius: f64) -> Result<Self> {
        Self::new(Vec::new(), radius)
    }

    pub fn terms(&self) -> &[ZernikeTerm] {
        &self.terms
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn negative_m(&self) -> NegativeM {
        self.negative_m
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, x: Vec2) -> bool {
        x.norm() <= self.radius
    }

    /// Polynomial value at `x`, continued analytically outside the disk.
    pub fn phase_at(&self, x: Vec2) -> f64 {
        if self.terms.is_empty() {
            return 0.0;
        }
        let rho = x.norm() / self.radius;
        let theta = x.y.atan2(x.x);
        self.terms
            .iter()
            .map(|t| {
                let ang = if t.m < 0 && self.negative_m == NegativeM::Sine {
                    (t.m.abs() as f64 * theta).sin()
                } else {
                    (t.m as f64 * theta).cos()
                };
                t.coeff * radial_unchecked(t.n, t.m.abs(), rho) * ang
            })
            .sum()
    }

    /// Phase at `x` [rad], or `None` outside the modulator disk.
    pub fn evaluate_phase(&self, x: Vec2) -> Option<f64> {
        self.contains(x).then(|| self.phase_at(x))
    }

    /// Splits into even-m and odd-m parts.
    pub fn parity_split(&self) -> (ZernikeSpec, ZernikeSpec) {
        let (odd, even): (Vec<_>, Vec<_>) = self.terms.iter().partition(|t| t.is_odd());
        let mk = |terms| ZernikeSpec {
            terms,
            radius: self.radius,
            negative_m: self.negative_m,
        };
        (mk(even), mk(odd))
    }

    pub fn even_part(&self) -> ZernikeSpec {
        self.parity_split().0
    }

    pub fn odd_part(&self) -> ZernikeSpec {
        self.parity_split().1
    }

    /// `phi(x) - phi(-x)`, which equals twice the odd-m part.
    pub fn antisymmetric_part(&self, x: Vec2) -> f64 {
        self.phase_at(x) - self.phase_at(-x)
    }

    /// Same terms with every coefficient added to those of `other`'s terms
    /// (terms missing on one side are copied).
    pub fn combined(&self, other: &ZernikeSpec) -> Result<ZernikeSpec> {
        let mut terms = self.terms.clone();
        for t in &other.terms {
            match terms.iter_mut().find(|u| u.n == t.n && u.m == t.m) {
                Some(u) => u.coeff += t.coeff,
                None => terms.push(*t),
            }
        }
        Self::with_negative_m(terms, self.radius, self.negative_m)
    }
}
