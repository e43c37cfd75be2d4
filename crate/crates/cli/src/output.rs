//! Artifact directories.
//!
//! A run directory holds `config.toml` (the resolved scenario), one CSV per
//! table with a `.json` sidecar echoing the configuration, and a `MANIFEST`.
//! The manifest reads `status = incomplete` from creation until `finish`, so a
//! run that stops early is recognizable from the directory alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nlkg::series::DiagnosticSeries;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ScenarioConfig;

pub struct RunDir {
    root: PathBuf,
    config: Value,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, config: &ScenarioConfig) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let mut dir = Self { root: root.to_path_buf(), config: serde_json::to_value(config)?, files: Vec::new() };
        dir.write_manifest("incomplete", None)?;
        dir.write_text("config.toml", &toml::to_string(config)?)?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    fn write_manifest(&self, status: &str, error: Option<&str>) -> Result<()> {
        let mut text = format!("status = {status}\n");
        if let Some(e) = error {
            text.push_str(&format!("error = {}\n", e.replace('\n', " ")));
        }
        for f in &self.files {
            text.push_str(&format!("file = {f}\n"));
        }
        fs::write(self.root.join("MANIFEST"), text)?;
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let body = json!({ "config": self.config, "report": value });
        self.write_text(name, &(serde_json::to_string_pretty(&body)? + "\n"))
    }

    /// `name.csv` with a header row, plus `name.json` describing it.
    pub fn write_rows(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(columns)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
        let csv_name = format!("{name}.csv");
        self.write_text(&csv_name, std::str::from_utf8(&bytes)?)?;
        let sidecar = json!({ "file": csv_name, "columns": columns, "rows": rows.len(), "config": self.config });
        self.write_text(&format!("{name}.json"), &(serde_json::to_string_pretty(&sidecar)? + "\n"))
    }

    /// Numeric table keeping every `stride`-th row.
    pub fn write_table(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>], stride: usize) -> Result<()> {
        let text: Vec<Vec<String>> =
            rows.iter().step_by(stride.max(1)).map(|r| r.iter().map(|v| format!("{v}")).collect()).collect();
        self.write_rows(name, columns, &text)
    }

    pub fn write_series(&mut self, name: &str, series: &DiagnosticSeries, stride: usize) -> Result<()> {
        let rows: Vec<Vec<f64>> = series.times.iter().zip(&series.values).map(|(&t, &v)| vec![t, v]).collect();
        self.write_table(name, &["time", &series.name], &rows, stride)
    }

    /// Series sharing one time axis as columns of a single table.
    pub fn write_aligned(&mut self, name: &str, series: &[DiagnosticSeries], stride: usize) -> Result<()> {
        let Some(first) = series.first() else {
            return self.write_table(name, &["time"], &[], stride);
        };
        let mut columns = vec!["time"];
        columns.extend(series.iter().map(|s| s.name.as_str()));
        let rows: Vec<Vec<f64>> = first
            .times
            .iter()
            .enumerate()
            .map(|(i, &t)| std::iter::once(t).chain(series.iter().map(|s| s.values[i])).collect())
            .collect();
        self.write_table(name, &columns, &rows, stride)
    }

    pub fn register(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    pub fn finish(self) -> Result<()> {
        self.write_manifest("complete", None)
    }

    pub fn fail(self, error: &str) -> Result<()> {
        self.write_manifest("incomplete", Some(error))
    }
}
