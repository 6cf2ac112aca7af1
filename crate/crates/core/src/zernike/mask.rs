use std::fmt::Write as _;
use std::path::Path;

use crate::error::{invalid, HomError, Result};
use crate::model::Vec2;
use crate::quadrature::GaussLegendre;

use super::ZernikeSpec;

/// Handling of pixels cut by the modulator edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StraddleRule {
    /// Any pixel not entirely outside the disk transmits fully, with the
    /// phase averaged over the whole pixel.
    #[default]
    WholePixel,
    /// Average only over the inside region; transmission is the area fraction.
    AreaFraction,
}

/// Piecewise-constant phase on a centered square grid.
///
/// Pixel `(l, m)` covers `(l - 1/2) d < x < (l + 1/2) d` and likewise in y,
/// for `l, m` in `[-N, N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMask {
    pitch: f64,
    half_extent: usize,
    phases: Vec<f64>,
    transmission: Vec<f64>,
}

impl PhaseMask {
    pub fn new(pitch: f64, half_extent: usize, phases: Vec<f64>, transmission: Vec<f64>) -> Result<Self> {
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(invalid("pitch", "must be positive and finite"));
        }
        let side = 2 * half_extent + 1;
        if phases.len() != side * side || transmission.len() != side * side {
            return Err(invalid("mask", format!("expected {} pixels", side * side)));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(invalid("mask", "phases must be finite"));
        }
        if transmission.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("mask", "transmission must lie in [0, 1]"));
        }
        Ok(Self {
            pitch,
            half_extent,
            phases,
            transmission,
        })
    }

    /// All pixels transmitting with zero phase.
    pub fn zeros(pitch: f64, half_extent: usize) -> Result<Self> {
        let n = (2 * half_extent + 1).pow(2);
        Self::new(pitch, half_extent, vec![0.0; n], vec![1.0; n])
    }

    /// Fully transmitting mask with phases from `f(l, m)`.
    pub fn from_fn(pitch: f64, half_extent: usize, mut f: impl FnMut(i32, i32) -> f64) -> Result<Self> {
        let h = half_extent as i32;
        let mut phases = Vec::with_capacity((2 * half_extent + 1).pow(2));
        for l in -h..=h {
            for m in -h..=h {
                phases.push(f(l, m));
            }
        }
        let n = phases.len();
        Self::new(pitch, half_extent, phases, vec![1.0; n])
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn half_extent(&self) -> usize {
        self.half_extent
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    fn index(&self, l: i32, m: i32) -> usize {
        let h = self.half_extent as i32;
        debug_assert!(l.abs() <= h && m.abs() <= h);
        ((l + h) as usize) * self.side() + (m + h) as usize
    }

    pub fn phase(&self, l: i32, m: i32) -> f64 {
        self.phases[self.index(l, m)]
    }

    pub fn transmission(&self, l: i32, m: i32) -> f64 {
        self.transmission[self.index(l, m)]
    }

    /// Row-major phases, l outer.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn transmissions(&self) -> &[f64] {
        &self.transmission
    }

    pub fn is_opaque(&self) -> bool {
        self.transmission.iter().all(|&t| t == 0.0)
    }

    /// Pixel containing `x`, if any.
    pub fn pixel_of(&self, x: Vec2) -> Option<(i32, i32)> {
        let h = self.half_extent as i32;
        let l = (x.x / self.pitch).round() as i32;
        let m = (x.y / self.pitch).round() as i32;
        (l.abs() <= h && m.abs() <= h).then_some((l, m))
    }

    /// Mask with every phase shifted by `offset`.
    pub fn offset(&self, offset: f64) -> Self {
        Self {
            phases: self.phases.iter().map(|p| p + offset).collect(),
            ..self.clone()
        }
    }

    /// Pixelwise sum of the phases of two masks on the same grid.
    pub fn plus(&self, other: &PhaseMask) -> Result<Self> {
        if self.half_extent != other.half_extent || self.pitch != other.pitch {
            return Err(HomError::MaskMismatch("grids differ".into()));
        }
        Ok(Self {
            phases: self.phases.iter().zip(&other.phases).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// Plain-text grid: header lines, then one `l m phase transmission` row
    /// per pixel. Floats carry 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let h = self.half_extent as i32;
        let _ = writeln!(
            s,
            "# phase mask: pitch [m], half-extent N, then rows l m phase[rad] transmission"
        );
        let _ = writeln!(s, "pitch {:.16e}", self.pitch);
        let _ = writeln!(s, "half_extent {}", self.half_extent);
        for l in -h..=h {
            for m in -h..=h {
                let t = self.transmission(l, m);
                let ts = if t == 0.0 || t == 1.0 {
                    format!("{t}")
                } else {
                    format!("{t:.16e}")
                };
                let _ = writeln!(s, "{l} {m} {:.16e} {ts}", self.phase(l, m));
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |reason: String| HomError::Format {
            what: "phase mask",
            reason,
        };
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad(format!("missing `{key}` line")))?;
            let rest = line
                .strip_prefix(key)
                .ok_or_else(|| bad(format!("expected `{key}`, found `{line}`")))?;
            Ok(rest.trim().to_string())
        };
        let pitch: f64 = header("pitch")?.parse().map_err(|e| bad(format!("pitch: {e}")))?;
        let half_extent: usize = header("half_extent")?
            .parse()
            .map_err(|e| bad(format!("half_extent: {e}")))?;
        let side = 2 * half_extent + 1;
        let h = half_extent as i32;
        let mut phases = vec![f64::NAN; side * side];
        let mut transmission = vec![f64::NAN; side * side];
        let mut count = 0;
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(format!("row `{line}` needs 4 fields")));
            }
            let l: i32 = f[0].parse().map_err(|e| bad(format!("l: {e}")))?;
            let m: i32 = f[1].parse().map_err(|e| bad(format!("m: {e}")))?;
            if l.abs() > h || m.abs() > h {
                return Err(bad(format!("pixel ({l}, {m}) outside grid")));
            }
            let idx = ((l + h) as usize) * side + (m + h) as usize;
            if !phases[idx].is_nan() {
                return Err(bad(format!("pixel ({l}, {m}) repeated")));
            }
            phases[idx] = f[2].parse().map_err(|e| bad(format!("phase: {e}")))?;
            transmission[idx] = f[3].parse().map_err(|e| bad(format!("transmission: {e}")))?;
            count += 1;
        }
        if count != side * side {
            return Err(bad(format!("expected {} rows, found {count}", side * side)));
        }
        Self::new(pitch, half_extent, phases, transmission)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Averages `spec` over each pixel of a `(2N+1)^2` grid of pitch `pitch`
/// using a tensor Gauss-Legendre rule of `order` nodes per axis.
pub fn pixelize(
    spec: &ZernikeSpec,
    pitch: f64,
    half_extent: usize,
    order: usize,
    rule: StraddleRule,
) -> Result<PhaseMask> {
    if !(pitch > 0.0) {
        return Err(invalid("pitch", "must be positive"));
    }
    if order == 0 {
        return Err(invalid("quadrature order", "must be positive"));
    }
    let gl = GaussLegendre::new(order);
    let h = half_extent as i32;
    let r = spec.radius();
    let side = 2 * half_extent + 1;
    let mut phases = Vec::with_capacity(side * side);
    let mut transmission = Vec::with_capacity(side * side);
    for l in -h..=h {
        for m in -h..=h {
            let (x0, y0) = (l as f64 * pitch, m as f64 * pitch);
            let half = 0.5 * pitch;
            // nearest point of the pixel to the origin
            let nx = (x0.abs() - half).max(0.0);
            let ny = (y0.abs() - half).max(0.0);
            if nx.hypot(ny) >= r {
                phases.push(0.0);
                transmission.push(0.0);
                continue;
            }
            let (mut acc, mut wsum, mut wtot) = (0.0, 0.0, 0.0);
            for (x, wx) in gl.mapped(x0 - half, x0 + half) {
                for (y, wy) in gl.mapped(y0 - half, y0 + half) {
                    let p = Vec2::new(x, y);
                    let w = wx * wy;
                    wtot += w;
                    if rule == StraddleRule::WholePixel || spec.contains(p) {
                        acc += w * spec.phase_at(p);
                        wsum += w;
                    }
                }
            }
            if wsum == 0.0 {
                phases.push(0.0);
                transmission.push(0.0);
            } else {
                phases.push(acc / wsum);
                transmission.push(match rule {
                    StraddleRule::WholePixel => 1.0,
                    StraddleRule::AreaFraction => (wsum / wtot).min(1.0),
                });
            }
        }
    }
    PhaseMask::new(pitch, half_extent, phases, transmission)
}
