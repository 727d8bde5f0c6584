// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Output directory handling, CSV formatting and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "UDD_ECHO_OUTPUT_DIR";

/// Floats in CSV files carry 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects the files written by one run.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn record(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<PathBuf, CliError> {
        let path = self.record(name);
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Writes a header row followed by `rows`.
    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf, CliError> {
        let path = self.record(name);
        let mut w = csv::Writer::from_path(&path)
            .map_err(|e| CliError::Other(format!("{}: {e}", path.display())))?;
        let csv_err = |e: csv::Error| CliError::Other(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Written next to the outputs of every run as `<subcommand>.manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<P: Serialize> {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub parameters: P,
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

impl<P: Serialize> RunManifest<P> {
    pub fn new(subcommand: &'static str, parameters: P, seeds: Vec<u64>) -> Self {
        Self {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            parameters,
            seeds,
            wall_time_s: 0.0,
            outputs: Vec::new(),
        }
    }

    /// Lists everything written so far plus the manifest itself, then writes it.
    pub fn finish(mut self, out: &mut OutputDir, wall_time_s: f64) -> Result<PathBuf, CliError> {
        let name = format!("{}.manifest.json", self.subcommand);
        self.wall_time_s = wall_time_s;
        self.outputs = out.written().to_vec();
        self.outputs.push(name.clone());
        out.write_json(&name, &self)
    }
}
