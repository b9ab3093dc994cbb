//! Output directory handling: CSV tables and the JSON run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

pub struct Run {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
    timings: Vec<(String, f64)>,
    outputs: Vec<String>,
}

impl Run {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            started: Instant::now(),
            timings: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.timings
            .push((stage.to_string(), t0.elapsed().as_secs_f64()));
        out
    }

    /// Writes rows of string cells under a header.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes serializable records with their derived header.
    pub fn write_records<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("cannot write {}", path.display()))?;
        for r in records {
            w.serialize(r)?;
        }
        w.flush()?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(fs::File) -> ergodicity_core::Result<()>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let file =
            fs::File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        f(file)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Writes `manifest.json` with the configuration, seed, versions and timings.
    pub fn finish(mut self, config: Value, seed: Option<u64>) -> Result<()> {
        let mut timings = serde_json::Map::new();
        for (stage, secs) in &self.timings {
            timings.insert(stage.clone(), json!(secs));
        }
        timings.insert("total".into(), json!(self.started.elapsed().as_secs_f64()));
        let manifest = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": ergodicity_core::VERSION,
            "config": config,
            "seed": seed,
            "outputs": self.outputs,
            "timings_seconds": timings,
        });
        let outputs = std::mem::take(&mut self.outputs);
        self.write_json("manifest.json", &manifest)?;
        self.outputs = outputs;
        Ok(())
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
