use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command: its arguments, the seed, the tool
/// version and digests of every input file.
#[derive(Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub command: String,
    pub config: C,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub elapsed_seconds: f64,
}

pub struct Recorder {
    command: String,
    started: Instant,
    inputs: Vec<InputDigest>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn start(command: &str) -> Self {
        Self { command: command.to_owned(), started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    /// Reads an input file, recording its digest.
    pub fn input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(InputDigest { path: path.to_owned(), sha256: hex::encode(Sha256::digest(&bytes)) });
        Ok(bytes)
    }

    /// Creates an output file, recording its path.
    pub fn output(&mut self, path: PathBuf) -> Result<std::io::BufWriter<fs::File>> {
        let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        self.outputs.push(path);
        Ok(std::io::BufWriter::new(file))
    }

    pub fn finish<C: Serialize>(self, dir: &Path, config: C, seed: Option<u64>) -> Result<()> {
        let manifest = RunManifest {
            command: self.command,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            inputs: self.inputs,
            outputs: self.outputs,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = dir.join("manifest.json");
        let mut f = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        serde_json::to_writer_pretty(&mut f, &manifest)?;
        writeln!(f)?;
        Ok(())
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}
