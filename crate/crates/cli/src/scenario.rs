//! Scenario files: TOML or JSON, lengths in mm, delays in fs, angles in mrad.

use std::path::{Path, PathBuf};

use hom_core::analytic::{compensation_tilt, TiltSpec};
use hom_core::oracle::OracleOrders;
use hom_core::zernike::{NegativeM, StraddleRule};
use hom_core::{
    Aperture, ApertureKind, ApertureLabel, CrystalParams, DelayScan, OpticalLayout, PhaseMask, Vec2, ZernikeSpec,
    ZernikeTerm,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

const MM: f64 = 1e-3;
const FS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Analytic,
    Kernels,
    LargeAperture,
    Oracle,
    Pointlike,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Kernels => "kernels",
            Method::LargeAperture => "large-aperture",
            Method::Oracle => "oracle",
            Method::Pointlike => "pointlike",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScenario {
    pub name: String,
    pub method: Method,
    #[serde(default)]
    pub crystal: RawCrystal,
    pub layout: RawLayout,
    pub aperture_a: RawAperture,
    pub aperture_b: Option<RawAperture>,
    #[serde(default)]
    pub scan: RawScan,
    #[serde(default)]
    pub mask: RawMask,
    pub grid: Option<RawGrid>,
    pub modulator: Option<RawModulator>,
    pub sweep: Option<RawSweep>,
    pub detector: Option<RawDetector>,
    pub oracle: Option<RawOracle>,
    pub diag: Option<RawDiag>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCrystal {
    pub length_mm: f64,
    pub group_delay_fs_per_mm: f64,
    pub walkoff: f64,
    pub signal_wavelength_nm: f64,
    pub pump_wavelength_nm: f64,
}

impl Default for RawCrystal {
    fn default() -> Self {
        Self {
            length_mm: 1.5,
            group_delay_fs_per_mm: 250.0,
            walkoff: 0.0723,
            signal_wavelength_nm: 810.0,
            pump_wavelength_nm: 405.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLayout {
    pub f_mm: f64,
    pub d1_mm: f64,
    pub f0_mm: Option<f64>,
    #[serde(default)]
    pub d2_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Gaussian,
    Circular,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAperture {
    pub shape: Shape,
    pub radius_mm: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawScan {
    pub start_fs: Option<f64>,
    pub stop_fs: Option<f64>,
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeMName {
    #[default]
    Cosine,
    Sine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTerm {
    pub n: i32,
    pub m: i32,
    pub coeff_rad: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RawMask {
    #[default]
    None,
    Zernike {
        radius_mm: f64,
        #[serde(default)]
        negative_m: NegativeMName,
        terms: Vec<RawTerm>,
    },
    File {
        path: String,
    },
    Tilt {
        theta_mrad: Option<f64>,
        s1x_per_mm: Option<f64>,
        s1y_per_mm: Option<f64>,
        #[serde(default)]
        compensate: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StraddleName {
    #[default]
    WholePixel,
    AreaFraction,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub pitch_mm: f64,
    pub half_extent: usize,
    pub quadrature_order: Option<usize>,
    #[serde(default)]
    pub straddle: StraddleName,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawModulator {
    pub radius_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub radii_mm: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDetector {
    pub x_mm: f64,
    pub y_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOracle {
    pub s_order: Option<usize>,
    pub t_order: Option<usize>,
    pub spec_s_order: Option<usize>,
    pub spec_radial: Option<usize>,
    pub spec_angular: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDiag {
    pub d1_mm: Vec<f64>,
    pub pitch_mm: Vec<f64>,
    pub radii_mm: Vec<f64>,
}

/// Modulator phase after unit conversion.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    None,
    Zernike(ZernikeSpec),
    File(PhaseMask),
    Tilt(TiltSpec),
}

impl MaskSource {
    pub fn label(&self) -> &'static str {
        match self {
            MaskSource::None => "none",
            MaskSource::Zernike(_) => "zernike",
            MaskSource::File(_) => "file",
            MaskSource::Tilt(_) => "tilt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub pitch: f64,
    pub half_extent: usize,
    pub order: usize,
    pub straddle: StraddleRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagSweep {
    pub d1: Vec<f64>,
    pub pitch: Vec<f64>,
    pub radii: Vec<f64>,
}

/// A validated scenario in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub method: Method,
    pub crystal: CrystalParams,
    pub layout: OpticalLayout,
    pub aperture_a: Aperture,
    pub aperture_b: Aperture,
    pub scan: DelayScan,
    pub mask: MaskSource,
    pub grid: Option<Grid>,
    pub modulator_radius: Option<f64>,
    /// Pupil radii to sweep; empty runs the apertures as given.
    pub sweep: Vec<f64>,
    pub detector: Vec2,
    pub oracle: OracleOrders,
    pub oracle_tolerance: f64,
    pub diag: Option<DiagSweep>,
    /// SHA-256 of the parsed scenario and any mask file it references.
    pub config_hash: String,
}

fn positive(path: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::config(path, format!("must be positive, got {v}")))
    }
}

fn core(path: &str) -> impl Fn(hom_core::HomError) -> CliError + '_ {
    move |e| CliError::config(path, e.to_string())
}

fn aperture(path: &str, raw: &RawAperture, label: ApertureLabel) -> CliResult<Aperture> {
    let r = positive(&format!("{path}.radius_mm"), raw.radius_mm)? * MM;
    let kind = match raw.shape {
        Shape::Gaussian => ApertureKind::Gaussian { radius: r },
        Shape::Circular => ApertureKind::Circular { radius: r },
    };
    Aperture::new(kind, label).map_err(core(path))
}

/// Replaces the radius of `a`, keeping its shape and label.
pub fn with_radius(a: &Aperture, radius: f64) -> hom_core::Result<Aperture> {
    let kind = match a.kind {
        ApertureKind::Gaussian { .. } => ApertureKind::Gaussian { radius },
        ApertureKind::Circular { .. } => ApertureKind::Circular { radius },
    };
    Aperture::new(kind, a.label)
}

fn parse_raw(text: &str, json: bool) -> CliResult<RawScenario> {
    let wrap = |path: String, msg: String| {
        let path = if path.is_empty() || path == "." {
            "scenario".to_string()
        } else {
            path
        };
        CliError::config(path, msg)
    };
    if json {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| wrap(e.path().to_string(), e.inner().to_string()))
    } else {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| wrap(e.path().to_string(), e.inner().message().to_string()))
    }
}

impl Scenario {
    /// Reads and validates a scenario; `.json` files are parsed as JSON,
    /// anything else as TOML. Relative mask paths resolve against the
    /// scenario's directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, json, &base)
    }

    pub fn parse(text: &str, json: bool, base: &Path) -> CliResult<Self> {
        let raw = parse_raw(text, json)?;
        Self::resolve(raw, base)
    }

    pub fn resolve(raw: RawScenario, base: &Path) -> CliResult<Self> {
        if raw.name.trim().is_empty() || raw.name.contains(['/', '\\']) {
            return Err(CliError::config("name", "must be a non-empty file-name-safe string"));
        }
        let rc = &raw.crystal;
        let crystal = CrystalParams::from_wavelengths(
            positive("crystal.length_mm", rc.length_mm)? * MM,
            positive("crystal.group_delay_fs_per_mm", rc.group_delay_fs_per_mm)? * FS / MM,
            rc.walkoff,
            positive("crystal.signal_wavelength_nm", rc.signal_wavelength_nm)? * 1e-9,
            positive("crystal.pump_wavelength_nm", rc.pump_wavelength_nm)? * 1e-9,
        )
        .map_err(core("crystal"))?;
        let rl = &raw.layout;
        let f = positive("layout.f_mm", rl.f_mm)? * MM;
        let f0 = match rl.f0_mm {
            Some(v) => positive("layout.f0_mm", v)? * MM,
            None => f,
        };
        let layout = OpticalLayout::new(f, f0, positive("layout.d1_mm", rl.d1_mm)? * MM, rl.d2_mm * MM)
            .map_err(core("layout"))?;
        let aperture_a = aperture("aperture_a", &raw.aperture_a, ApertureLabel::A)?;
        let aperture_b = match &raw.aperture_b {
            Some(b) => aperture("aperture_b", b, ApertureLabel::B)?,
            None => aperture_a.relabeled(ApertureLabel::B),
        };

        let dl = crystal.dip_width();
        let start = raw.scan.start_fs.map(|v| v * FS).unwrap_or(-0.25 * dl);
        let stop = raw.scan.stop_fs.map(|v| v * FS).unwrap_or(1.25 * dl);
        let samples = raw.scan.samples.unwrap_or(201);
        if samples < 2 {
            return Err(CliError::config("scan.samples", "need at least 2 samples"));
        }
        if !(stop > start) {
            return Err(CliError::config("scan", "stop_fs must exceed start_fs"));
        }
        let scan = DelayScan::linspace(start, stop, samples).map_err(core("scan"))?;

        let mut file_bytes = Vec::new();
        let mask = match &raw.mask {
            RawMask::None => MaskSource::None,
            RawMask::Zernike {
                radius_mm,
                negative_m,
                terms,
            } => {
                let r = positive("mask.radius_mm", *radius_mm)? * MM;
                let terms = terms.iter().map(|t| ZernikeTerm::new(t.n, t.m, t.coeff_rad)).collect();
                let neg = match negative_m {
                    NegativeMName::Cosine => NegativeM::Cosine,
                    NegativeMName::Sine => NegativeM::Sine,
                };
                MaskSource::Zernike(ZernikeSpec::with_negative_m(terms, r, neg).map_err(core("mask.terms"))?)
            }
            RawMask::File { path } => {
                let p: PathBuf = if Path::new(path).is_absolute() {
                    PathBuf::from(path)
                } else {
                    base.join(path)
                };
                let text = std::fs::read_to_string(&p).map_err(|source| CliError::Read {
                    path: p.clone(),
                    source,
                })?;
                file_bytes = text.as_bytes().to_vec();
                MaskSource::File(PhaseMask::from_text(&text).map_err(core("mask.path"))?)
            }
            RawMask::Tilt {
                theta_mrad,
                s1x_per_mm,
                s1y_per_mm,
                compensate,
            } => {
                let given = [
                    theta_mrad.is_some() || s1y_per_mm.is_some() || s1x_per_mm.is_some(),
                    *compensate,
                ];
                if given.iter().filter(|&&g| g).count() != 1 {
                    return Err(CliError::config(
                        "mask",
                        "tilt needs either `compensate = true` or explicit theta_mrad / s1x_per_mm / s1y_per_mm",
                    ));
                }
                if theta_mrad.is_some() && s1y_per_mm.is_some() {
                    return Err(CliError::config("mask", "give theta_mrad or s1y_per_mm, not both"));
                }
                let k0 = crystal.k0();
                let mut tilt = if *compensate {
                    let (s1y, theta) = compensation_tilt(&crystal, layout.f);
                    TiltSpec {
                        s1: Vec2::new(0.0, s1y),
                        theta: Some(theta),
                    }
                } else if let Some(t) = theta_mrad {
                    TiltSpec::from_mirror_tilt(t * 1e-3, k0)
                } else {
                    TiltSpec::new(Vec2::new(0.0, s1y_per_mm.unwrap_or(0.0) / MM))
                };
                if let Some(sx) = s1x_per_mm {
                    tilt.s1.x = sx / MM;
                }
                MaskSource::Tilt(tilt)
            }
        };

        let grid = match &raw.grid {
            Some(g) => {
                let order = g.quadrature_order.unwrap_or(4);
                if order == 0 {
                    return Err(CliError::config("grid.quadrature_order", "must be positive"));
                }
                Some(Grid {
                    pitch: positive("grid.pitch_mm", g.pitch_mm)? * MM,
                    half_extent: g.half_extent,
                    order,
                    straddle: match g.straddle {
                        StraddleName::WholePixel => StraddleRule::WholePixel,
                        StraddleName::AreaFraction => StraddleRule::AreaFraction,
                    },
                })
            }
            None => None,
        };
        if let (Some(g), MaskSource::File(m)) = (&grid, &mask) {
            if g.half_extent != m.half_extent() || (g.pitch - m.pitch()).abs() > 1e-12 * g.pitch {
                return Err(CliError::config(
                    "grid",
                    "disagrees with the mask file's pitch or extent",
                ));
            }
        }
        let modulator_radius = match &raw.modulator {
            Some(m) => Some(positive("modulator.radius_mm", m.radius_mm)? * MM),
            None => None,
        };
        let sweep = match &raw.sweep {
            Some(s) => {
                if s.radii_mm.is_empty() {
                    return Err(CliError::config("sweep.radii_mm", "must not be empty"));
                }
                s.radii_mm
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| positive(&format!("sweep.radii_mm[{i}]"), r).map(|r| r * MM))
                    .collect::<CliResult<Vec<_>>>()?
            }
            None => Vec::new(),
        };
        let detector = raw
            .detector
            .as_ref()
            .map(|d| Vec2::new(d.x_mm * MM, d.y_mm * MM))
            .unwrap_or(Vec2::ZERO);
        let mut oracle = OracleOrders::default();
        let mut oracle_tolerance = 1e-2;
        if let Some(o) = &raw.oracle {
            let set = |slot: &mut usize, v: Option<usize>, name: &str| -> CliResult<()> {
                if let Some(v) = v {
                    if v == 0 {
                        return Err(CliError::config(format!("oracle.{name}"), "must be positive"));
                    }
                    *slot = v;
                }
                Ok(())
            };
            set(&mut oracle.s_order, o.s_order, "s_order")?;
            set(&mut oracle.t_order, o.t_order, "t_order")?;
            set(&mut oracle.spec_s_order, o.spec_s_order, "spec_s_order")?;
            set(&mut oracle.spec_radial, o.spec_radial, "spec_radial")?;
            set(&mut oracle.spec_angular, o.spec_angular, "spec_angular")?;
            if let Some(t) = o.tolerance {
                oracle_tolerance = positive("oracle.tolerance", t)?;
            }
        }
        let diag = match &raw.diag {
            Some(d) => {
                let conv = |name: &str, v: &[f64]| -> CliResult<Vec<f64>> {
                    if v.is_empty() {
                        return Err(CliError::config(format!("diag.{name}"), "must not be empty"));
                    }
                    v.iter()
                        .enumerate()
                        .map(|(i, &x)| positive(&format!("diag.{name}[{i}]"), x).map(|x| x * MM))
                        .collect()
                };
                Some(DiagSweep {
                    d1: conv("d1_mm", &d.d1_mm)?,
                    pitch: conv("pitch_mm", &d.pitch_mm)?,
                    radii: conv("radii_mm", &d.radii_mm)?,
                })
            }
            None => None,
        };

        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&raw).expect("scenario serializes"));
        h.update(&file_bytes);
        let config_hash = h.finalize().iter().map(|b| format!("{b:02x}")).collect();

        let s = Scenario {
            name: raw.name,
            method: raw.method,
            crystal,
            layout,
            aperture_a,
            aperture_b,
            scan,
            mask,
            grid,
            modulator_radius,
            sweep,
            detector,
            oracle,
            oracle_tolerance,
            diag,
            config_hash,
        };
        s.check_method()?;
        Ok(s)
    }

    /// Pixel grid from `[grid]` or the mask file.
    pub fn pixel_grid(&self) -> Option<(f64, usize)> {
        match (&self.grid, &self.mask) {
            (Some(g), _) => Some((g.pitch, g.half_extent)),
            (None, MaskSource::File(m)) => Some((m.pitch(), m.half_extent())),
            _ => None,
        }
    }

    fn check_method(&self) -> CliResult<()> {
        let needs_disk = matches!(self.mask, MaskSource::None | MaskSource::Tilt(_));
        match self.method {
            Method::Analytic => {
                if !matches!(self.mask, MaskSource::None | MaskSource::Tilt(_)) {
                    return Err(CliError::config(
                        "mask.source",
                        format!(
                            "method `analytic` supports `none` or `tilt`, not `{}`",
                            self.mask.label()
                        ),
                    ));
                }
            }
            Method::Kernels => {
                if self.pixel_grid().is_none() {
                    return Err(CliError::config(
                        "grid",
                        "method `kernels` needs a [grid] table or a mask file",
                    ));
                }
            }
            Method::LargeAperture | Method::Pointlike => {
                if needs_disk && self.modulator_radius.is_none() {
                    return Err(CliError::config(
                        "modulator.radius_mm",
                        format!(
                            "method `{}` with mask `{}` needs the modulator radius",
                            self.method.as_str(),
                            self.mask.label()
                        ),
                    ));
                }
            }
            Method::Oracle => {
                if needs_disk && self.pixel_grid().is_none() && self.modulator_radius.is_none() {
                    return Err(CliError::config(
                        "grid",
                        "method `oracle` needs a [grid] table or a modulator radius",
                    ));
                }
            }
        }
        Ok(())
    }
}
