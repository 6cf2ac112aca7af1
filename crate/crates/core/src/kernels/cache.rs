//! Binary kernel cache.
//!
//! Layout: `"HOMK"`, format version (u16 LE), config hash (32 bytes),
//! half extent N (u32 LE), delay count (u32 LE), then little-endian f64
//! `(re, im)` pairs for alpha `(l, lam)`, I `(m, mu, tau)`, R0x `(l, lam)`
//! and R0y `(m, mu)`, each row-major with indices ascending from `-N`.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::{KernelConfig, KernelMatrix, KernelTable, KernelTensor};
use crate::error::{HomError, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"HOMK";
pub const CACHE_VERSION: u16 = 1;

fn encode(table: &KernelTable) -> Vec<u8> {
    let cfg = table.config();
    let side = cfg.side();
    let n_tau = cfg.scan.len();
    let count = 3 * side * side + side * side * n_tau;
    let mut out = Vec::with_capacity(46 + 16 * count);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(table.hash());
    out.extend_from_slice(&(cfg.half_extent as u32).to_le_bytes());
    out.extend_from_slice(&(n_tau as u32).to_le_bytes());
    for block in [
        table.alpha().as_slice(),
        table.i_tensor().as_slice(),
        table.r0x().as_slice(),
        table.r0y().as_slice(),
    ] {
        for z in block {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

fn bad(reason: impl Into<String>) -> HomError {
    HomError::Format {
        what: "kernel cache",
        reason: reason.into(),
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| bad("truncated file"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn complex(&mut self, count: usize) -> Result<Vec<Complex64>> {
        let raw = self.take(16 * count)?;
        Ok(raw
            .chunks_exact(16)
            .map(|c| {
                Complex64::new(
                    f64::from_le_bytes(c[..8].try_into().unwrap()),
                    f64::from_le_bytes(c[8..].try_into().unwrap()),
                )
            })
            .collect())
    }
}

/// Writes the table atomically (temporary file, then rename).
pub fn write_cache(table: &KernelTable, path: &Path) -> Result<()> {
    let bytes = encode(table);
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("kernels");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Loads a cached table for `config`. Returns `Ok(None)` when the file is
/// absent or was written for a different configuration or format version.
pub fn read_cache(config: &KernelConfig, path: &Path) -> Result<Option<KernelTable>> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4)? != CACHE_MAGIC {
        return Err(bad("missing magic bytes"));
    }
    let version = u16::from_le_bytes(r.take(2)?.try_into().unwrap());
    if version != CACHE_VERSION {
        return Ok(None);
    }
    if r.take(32)? != config.hash() {
        return Ok(None);
    }
    let n = r.u32()? as usize;
    let n_tau = r.u32()? as usize;
    if n != config.half_extent || n_tau != config.scan.len() {
        return Err(bad("dimensions disagree with the configuration hash"));
    }
    let sq = (2 * n + 1) * (2 * n + 1);
    let alpha = KernelMatrix::from_vec(n, r.complex(sq)?);
    let i_tensor = KernelTensor::from_vec(n, n_tau, r.complex(sq * n_tau)?);
    let r0x = KernelMatrix::from_vec(n, r.complex(sq)?);
    let r0y = KernelMatrix::from_vec(n, r.complex(sq)?);
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(Some(KernelTable::from_parts(config.clone(), alpha, i_tensor, r0x, r0y)))
}
