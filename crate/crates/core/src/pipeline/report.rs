use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::pipeline::ExperimentConfig;

/// One CSV file: a header and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file_name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file_name: &str, header: &[&str]) -> Self {
        Self {
            file_name: file_name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(file_name: &str, header: Vec<String>) -> Self {
        Self {
            file_name: file_name.to_string(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Shortest round-trip decimal form; non-finite values become `NA`.
pub(crate) fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".to_string()
    }
}

pub(crate) fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), num)
}

/// All files one runner writes, besides the manifest.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReportBundle {
    pub tables: Vec<Table>,
    pub documents: Vec<(String, Value)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            master_seed: config.master_seed,
            config: config.clone(),
            files: Vec::new(),
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes every table and document plus `manifest.json` into `output_dir`.
/// Returns the paths written, manifest last.
pub fn emit_reports(bundle: &ReportBundle, mut manifest: Manifest, output_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(output_dir).map_err(|e| Error::io(output_dir, e))?;
    let mut written = Vec::new();
    for table in &bundle.tables {
        let path = output_dir.join(&table.file_name);
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        write_file(&path, &bytes)?;
        manifest.files.push(table.file_name.clone());
        written.push(path);
    }
    for (name, value) in &bundle.documents {
        let path = output_dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write_file(&path, text.as_bytes())?;
        manifest.files.push(name.clone());
        written.push(path);
    }
    let path = output_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_file(&path, text.as_bytes())?;
    written.push(path);
    Ok(written)
}
