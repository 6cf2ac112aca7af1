//! Atomic file output and the summary / plot-script writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Writes `bytes` to a temporary sibling, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(wrap)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(wrap)?;
    f.write_all(bytes).map_err(wrap)?;
    f.sync_all().map_err(wrap)?;
    drop(f);
    fs::rename(&tmp, path).map_err(wrap)
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceSummary {
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_mm: Option<f64>,
    pub r0: f64,
    pub min_r_norm: f64,
    pub visibility: f64,
    pub envelope_center_fs: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub name: String,
    pub method: String,
    pub mask: String,
    pub config_hash: String,
    pub trace: Vec<TraceSummary>,
}

impl Summary {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("summary serializes")
    }
}

/// A matplotlib script that overlays every trace file in `files`.
pub fn plot_script(title: &str, files: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str("import numpy as np\nimport matplotlib.pyplot as plt\n\n");
    s.push_str("fig, ax = plt.subplots()\n");
    for (file, label) in files {
        s.push_str(&format!(
            "d = np.loadtxt({file:?}, delimiter=\",\", comments=\"#\")\nax.plot(d[:, 0], d[:, 1], label={label:?})\n"
        ));
    }
    s.push_str("ax.set_xlabel(\"tau [fs]\")\nax.set_ylabel(\"R / R0\")\n");
    s.push_str(&format!("ax.set_title({title:?})\n"));
    if files.len() > 1 {
        s.push_str("ax.legend()\n");
    }
    s.push_str("fig.savefig(\"plot.png\", dpi=150)\n");
    s
}
