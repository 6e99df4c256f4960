//! The run manifest written next to every output set: enough to tell later
//! which tool version, arguments and input bytes produced the files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Vec<String>,
    pub timestamp: String,
    pub inputs: Vec<InputDigest>,
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(inputs: &[&Path], parameters: serde_json::Value) -> Result<Self, CliError> {
        let mut digests = Vec::with_capacity(inputs.len());
        for path in inputs {
            digests.push(InputDigest {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            });
        }
        Ok(RunManifest {
            tool: "adr-signal",
            version: env!("CARGO_PKG_VERSION"),
            command: std::env::args().skip(1).collect(),
            timestamp: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            inputs: digests,
            parameters,
        })
    }

    pub fn write(&self, out_dir: &Path) -> Result<(), CliError> {
        write_json(&out_dir.join("manifest.json"), self)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file
            .read(&mut buf)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(format!("{:x}", hasher.finalize()))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    writer
        .write_all(b"\n")
        .and_then(|_| writer.flush())
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
