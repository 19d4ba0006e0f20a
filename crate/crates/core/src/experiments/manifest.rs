use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Everything needed to re-run a command: its argument vector, resolved
/// configuration and the files it touched. Wall-clock fields are the only
/// non-reproducible part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    /// Directory relative paths in `args` resolve against.
    #[serde(default)]
    pub working_dir: Option<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub started_unix_ms: u128,
    pub wall_clock_ms: u128,
}

pub struct ManifestClock {
    started_unix_ms: u128,
    started: Instant,
}

impl RunManifest {
    pub fn start() -> ManifestClock {
        ManifestClock {
            started_unix_ms: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0),
            started: Instant::now(),
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        clock: ManifestClock,
        command: &str,
        args: Vec<String>,
        seed: u64,
        config: serde_json::Value,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> Self {
        let show = |v: Vec<PathBuf>| v.into_iter().map(|p| p.display().to_string()).collect();
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            working_dir: std::env::current_dir().ok().map(|d| d.display().to_string()),
            seed,
            config,
            inputs: show(inputs),
            outputs: show(outputs),
            started_unix_ms: clock.started_unix_ms,
            wall_clock_ms: clock.started.elapsed().as_millis(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}
