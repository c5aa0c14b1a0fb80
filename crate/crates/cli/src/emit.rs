//! Output writing: fixed float formatting, stdout-or-file dispatch, and the
//! run manifest that accompanies every output file.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

/// 17 significant digits; byte-identical reruns depend on this.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct RunContext {
    subcommand: &'static str,
    config: Value,
    started: Instant,
    out: Option<PathBuf>,
}

impl RunContext {
    pub fn new(subcommand: &'static str, config: Value, out: Option<PathBuf>) -> Self {
        Self {
            subcommand,
            config,
            started: Instant::now(),
            out,
        }
    }

    /// Write `body` to the destination and, when that is a file, a sibling
    /// `<out>.manifest.json` recording the resolved configuration.
    pub fn finish(self, body: &str) -> std::io::Result<()> {
        match &self.out {
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
                stdout.flush()
            }
            Some(path) => {
                std::fs::write(path, body.as_bytes())?;
                let manifest = json!({
                    "subcommand": self.subcommand,
                    "artifact_version": env!("CARGO_PKG_VERSION"),
                    "config": self.config,
                    "outputs": [path.to_string_lossy()],
                    "duration_seconds": self.started.elapsed().as_secs_f64(),
                });
                let manifest_path = manifest_path(path);
                std::fs::write(&manifest_path, format!("{:#}\n", manifest))
            }
        }
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Pretty JSON with a trailing newline.
pub fn json_body(value: &Value) -> String {
    format!("{value:#}\n")
}
