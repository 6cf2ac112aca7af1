//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hom_core::analytic::{self, Modulation, TiltSpec};
use hom_core::kernels::{self, read_cache, write_cache};
use hom_core::zernike::{pixelize, NegativeM};
use hom_core::{oracle, Aperture, DipTrace, KernelConfig, KernelTable, PhaseMask, Vec2, ZernikeSpec, ZernikeTerm};

use crate::error::{CliError, CliResult};
use crate::output::{plot_script, write_atomic, Summary, TraceSummary};
use crate::scenario::{with_radius, MaskSource, Method, Scenario};

/// Environment variable naming the kernel cache directory.
pub const CACHE_ENV: &str = "HOM_CACHE_DIR";

pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".hom-cache"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Hit,
    Built,
}

/// Aperture pairs to evaluate, with the swept radius when there is one.
fn aperture_pairs(s: &Scenario) -> CliResult<Vec<(Option<f64>, Aperture, Aperture)>> {
    if s.sweep.is_empty() {
        return Ok(vec![(None, s.aperture_a, s.aperture_b)]);
    }
    s.sweep
        .iter()
        .map(|&r| Ok((Some(r), with_radius(&s.aperture_a, r)?, with_radius(&s.aperture_b, r)?)))
        .collect()
}

/// Phase of a tilt as Zernike tip/tilt terms over a disk of radius `r`.
fn tilt_spec(t: &TiltSpec, r: f64) -> hom_core::Result<ZernikeSpec> {
    let mut terms = Vec::new();
    if t.s1.x != 0.0 {
        terms.push(ZernikeTerm::new(1, 1, t.s1.x * r));
    }
    if t.s1.y != 0.0 {
        terms.push(ZernikeTerm::new(1, -1, t.s1.y * r));
    }
    ZernikeSpec::with_negative_m(terms, r, NegativeM::Sine)
}

/// The modulator phase as a continuous spec, for methods that take one.
fn disk_spec(s: &Scenario) -> CliResult<Option<ZernikeSpec>> {
    Ok(match (&s.mask, s.modulator_radius) {
        (MaskSource::Zernike(z), _) => Some(z.clone()),
        (MaskSource::None, Some(r)) => Some(ZernikeSpec::empty(r)?),
        (MaskSource::Tilt(t), Some(r)) => Some(tilt_spec(t, r)?),
        _ => None,
    })
}

/// The modulator phase on the scenario's pixel grid.
pub fn grid_mask(s: &Scenario) -> CliResult<PhaseMask> {
    if let MaskSource::File(m) = &s.mask {
        return Ok(m.clone());
    }
    let g = s
        .grid
        .ok_or_else(|| CliError::config("grid", "this method needs a [grid] table"))?;
    let mask = match disk_spec(s)? {
        Some(spec) => pixelize(&spec, g.pitch, g.half_extent, g.order, g.straddle)?,
        None => match &s.mask {
            MaskSource::Tilt(t) => PhaseMask::from_fn(g.pitch, g.half_extent, |l, m| {
                t.s1.dot(Vec2::new(l as f64, m as f64) * g.pitch)
            })?,
            _ => PhaseMask::zeros(g.pitch, g.half_extent)?,
        },
    };
    Ok(mask)
}

pub fn kernel_config(s: &Scenario, a: Aperture, b: Aperture) -> CliResult<KernelConfig> {
    let (pitch, half_extent) = s
        .pixel_grid()
        .ok_or_else(|| CliError::config("grid", "kernel tables need a [grid] table or a mask file"))?;
    Ok(KernelConfig {
        crystal: s.crystal,
        layout: s.layout,
        aperture_a: a,
        aperture_b: b,
        pitch,
        half_extent,
        scan: s.scan.clone(),
    })
}

pub fn cache_path(dir: &Path, config: &KernelConfig) -> PathBuf {
    dir.join(format!("{}.homk", config.hash_hex()))
}

/// Loads the table for `config` from `dir`, building and storing it on a miss.
pub fn load_or_build(dir: &Path, config: KernelConfig) -> CliResult<(KernelTable, CacheStatus)> {
    let path = cache_path(dir, &config);
    if let Some(t) = read_cache(&config, &path)? {
        return Ok((t, CacheStatus::Hit));
    }
    let t = KernelTable::build(config)?;
    write_cache(&t, &path).map_err(|e| match e {
        hom_core::HomError::Io(source) => CliError::Write {
            path: path.clone(),
            source,
        },
        e => e.into(),
    })?;
    Ok((t, CacheStatus::Built))
}

fn modulation<'a>(spec: &'a Option<ZernikeSpec>, mask: &'a Option<PhaseMask>) -> Modulation<'a> {
    match (mask, spec) {
        (Some(m), _) => Modulation::Mask(m),
        (None, Some(z)) => Modulation::Spec(z),
        (None, None) => unreachable!("scenario validation guarantees a modulator"),
    }
}

/// Phase source for the integral methods: the pixel mask when a grid or
/// mask file is given, otherwise the continuous spec.
fn phase_source(s: &Scenario) -> CliResult<(Option<ZernikeSpec>, Option<PhaseMask>)> {
    if s.pixel_grid().is_some() {
        Ok((None, Some(grid_mask(s)?)))
    } else {
        Ok((disk_spec(s)?, None))
    }
}

/// Evaluates the scenario's method for one aperture pair.
pub fn trace_for(s: &Scenario, a: &Aperture, b: &Aperture) -> CliResult<DipTrace> {
    let (c, o, scan) = (&s.crystal, &s.layout, &s.scan);
    Ok(match s.method {
        Method::Analytic => {
            let tilt = match &s.mask {
                MaskSource::Tilt(t) => *t,
                _ => TiltSpec::new(Vec2::ZERO),
            };
            analytic::dip_linear_tilt_pair(c, o, a, b, &tilt, scan).trace
        }
        Method::Kernels => {
            let mask = grid_mask(s)?;
            let (table, _) = load_or_build(&cache_dir(), kernel_config(s, *a, *b)?)?;
            kernels::assemble(&table, &mask)?
        }
        Method::LargeAperture => {
            let (spec, mask) = phase_source(s)?;
            analytic::dip_large_aperture(c, o, modulation(&spec, &mask), scan)?
        }
        Method::Oracle => {
            let (spec, mask) = phase_source(s)?;
            oracle::direct_trace(c, o, a, b, modulation(&spec, &mask), scan, s.oracle)?
        }
        Method::Pointlike => {
            let (spec, mask) = phase_source(s)?;
            analytic::pointlike_modulation(c, o, a, modulation(&spec, &mask), s.detector, scan)?.to_dip_trace(c)
        }
    })
}

/// Result of `run`: the traces and the files written.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub traces: Vec<DipTrace>,
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

pub fn run(s: &Scenario, out: &Path, emit_plot: bool) -> CliResult<RunReport> {
    let pairs = aperture_pairs(s)?;
    let single = pairs.len() == 1;
    let mut traces = Vec::new();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut plotted = Vec::new();
    for (i, (radius, a, b)) in pairs.iter().enumerate() {
        let t = trace_for(s, a, b)?;
        let name = if single {
            "trace.csv".to_string()
        } else {
            format!("trace_r{i}.csv")
        };
        let path = out.join(&name);
        write_atomic(&path, t.to_csv(&s.config_hash).as_bytes())?;
        files.push(path);
        let label = match radius {
            Some(r) => format!("R = {} mm", mm(*r)),
            None => s.name.clone(),
        };
        plotted.push((name.clone(), label));
        rows.push(TraceSummary {
            file: name,
            radius_mm: radius.map(mm),
            r0: t.background,
            min_r_norm: t.min_r_norm(),
            visibility: t.visibility(),
            envelope_center_fs: t.envelope_center() * 1e15,
        });
        traces.push(t);
    }
    let summary = Summary {
        name: s.name.clone(),
        method: s.method.as_str().to_string(),
        mask: s.mask.label().to_string(),
        config_hash: s.config_hash.clone(),
        trace: rows,
    };
    let path = out.join("summary.toml");
    write_atomic(&path, summary.to_toml().as_bytes())?;
    files.push(path);
    if emit_plot {
        let path = out.join("plot.py");
        write_atomic(&path, plot_script(&s.name, &plotted).as_bytes())?;
        files.push(path);
    }
    Ok(RunReport { traces, files, summary })
}

/// Builds (or finds) the kernel table of every aperture pair.
pub fn tabulate(s: &Scenario, dir: &Path) -> CliResult<Vec<(PathBuf, CacheStatus)>> {
    aperture_pairs(s)?
        .into_iter()
        .map(|(_, a, b)| {
            let config = kernel_config(s, a, b)?;
            let path = cache_path(dir, &config);
            let (_, status) = load_or_build(dir, config)?;
            Ok((path, status))
        })
        .collect()
}

/// Millimetres for display, rounded to drop conversion noise.
fn mm(x: f64) -> f64 {
    (x * 1e12).round() / 1e9
}

/// `rho0` over the `[diag]` grid of distances, pitches and radii.
pub fn rho0_sweep(s: &Scenario, out: &Path) -> CliResult<PathBuf> {
    let d = s
        .diag
        .as_ref()
        .ok_or_else(|| CliError::config("diag", "rho0-sweep needs a [diag] table"))?;
    let mut csv = String::from("# rho0 = |alpha_01|^2 / |alpha_00|^2\n# columns: d1_mm,pitch_mm,radius_mm,rho0\n");
    for &d1 in &d.d1 {
        let mut layout = s.layout;
        layout.d1 = d1;
        for &pitch in &d.pitch {
            for &r in &d.radii {
                let a = with_radius(&s.aperture_a, r)?;
                let v = kernels::rho0(&s.crystal, &layout, &a, pitch)?;
                let _ = writeln!(csv, "{},{},{},{:.16e}", mm(d1), mm(pitch), mm(r), v);
            }
        }
    }
    let path = out.join("rho0_sweep.csv");
    write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}

/// `|alpha_{l,lam}|^2` on the scenario's pixel grid.
pub fn alpha_matrix(s: &Scenario, out: &Path) -> CliResult<PathBuf> {
    let (pitch, n) = s
        .pixel_grid()
        .ok_or_else(|| CliError::config("grid", "alpha-matrix needs a [grid] table or a mask file"))?;
    let m = kernels::tabulate_alpha(&s.crystal, &s.layout, &s.aperture_a, &s.aperture_b, pitch, n)?;
    let h = n as i32;
    let mut csv = String::from("# columns: l,lambda,abs2,re,im\n");
    for l in -h..=h {
        for lam in -h..=h {
            let v = m.get(l, lam);
            let _ = writeln!(csv, "{l},{lam},{:.16e},{:.16e},{:.16e}", v.norm_sqr(), v.re, v.im);
        }
    }
    let path = out.join("alpha_matrix.csv");
    write_atomic(&path, csv.as_bytes())?;
    Ok(path)
}

/// Outcome of an oracle cross-check.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub max_trace_diff: f64,
    pub r0_rel_diff: f64,
    pub tolerance: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.max_trace_diff <= self.tolerance && self.r0_rel_diff <= self.tolerance
    }
}

/// Compares the kernel assembly against the direct integrals on the
/// scenario's pixel mask.
pub fn verify(s: &Scenario) -> CliResult<Verification> {
    let mask = grid_mask(s)?;
    let (c, o) = (&s.crystal, &s.layout);
    let (a, b) = (&s.aperture_a, &s.aperture_b);
    let table = KernelTable::build(kernel_config(s, *a, *b)?)?;
    let k = kernels::assemble(&table, &mask)?;
    let d = oracle::direct_trace(c, o, a, b, Modulation::Mask(&mask), &s.scan, s.oracle)?;
    Ok(Verification {
        max_trace_diff: k.max_abs_diff(&d),
        r0_rel_diff: (k.background - d.background).abs() / d.background.abs(),
        tolerance: s.oracle_tolerance,
    })
}
