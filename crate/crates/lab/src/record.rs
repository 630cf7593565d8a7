//! Self-describing result records: config echo, scalar outputs, table files,
//! findings, and provenance (tool version + config fingerprint).

use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::experiment::LabError;

pub const RECORD_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub kind: String,
    pub tool_version: String,
    pub seed: u64,
    pub config_fingerprint: String,
    pub config: serde_json::Value,
    /// Deterministic scalar outputs (bit-for-bit reproducible per seed).
    pub scalars: BTreeMap<String, f64>,
    /// CSV tables written next to the record.
    pub tables: Vec<TableRef>,
    /// Lemma-violation findings: reportable events, mapped to exit code 4.
    pub findings: Vec<String>,
    pub wall_clock_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct TableRef {
    pub name: String,
    pub path: String,
    pub rows: usize,
}

impl ResultRecord {
    pub fn new(kind: &str, seed: u64, fingerprint: String, config: serde_json::Value) -> Self {
        ResultRecord {
            schema_version: RECORD_SCHEMA_VERSION,
            kind: kind.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_fingerprint: fingerprint,
            config,
            scalars: BTreeMap::new(),
            tables: Vec::new(),
            findings: Vec::new(),
            wall_clock_ms: 0,
        }
    }

    pub fn scalar(&mut self, name: &str, value: f64) -> &mut Self {
        self.scalars.insert(name.to_string(), value);
        self
    }

    pub fn finding(&mut self, text: String) {
        self.findings.push(text);
    }

    /// Write one CSV table (RFC-4180 quoting via the csv writer) into the
    /// output directory and register it on the record.
    pub fn write_table(
        &mut self,
        out_dir: &Path,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), LabError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| LabError::Config(format!("creating {out_dir:?}: {e}")))?;
        let file = out_dir.join(format!(
            "{}-{}-{}.csv",
            self.kind, self.config_fingerprint, name
        ));
        let mut w = csv::Writer::from_path(&file)
            .map_err(|e| LabError::Config(format!("opening {file:?}: {e}")))?;
        w.write_record(header)
            .and_then(|()| rows.iter().try_for_each(|r| w.write_record(r)))
            .and_then(|()| w.flush().map_err(csv::Error::from))
            .map_err(|e| LabError::Config(format!("writing {file:?}: {e}")))?;
        self.tables.push(TableRef {
            name: name.to_string(),
            path: file.to_string_lossy().into_owned(),
            rows: rows.len(),
        });
        Ok(())
    }

    /// Persist the JSON record; returns the path written.
    pub fn write_json(&self, out_dir: &Path) -> Result<PathBuf, LabError> {
        std::fs::create_dir_all(out_dir)
            .map_err(|e| LabError::Config(format!("creating {out_dir:?}: {e}")))?;
        let file = out_dir.join(format!("{}-{}.json", self.kind, self.config_fingerprint));
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| LabError::Config(format!("serializing record: {e}")))?;
        std::fs::write(&file, text)
            .map_err(|e| LabError::Config(format!("writing {file:?}: {e}")))?;
        Ok(file)
    }
}
