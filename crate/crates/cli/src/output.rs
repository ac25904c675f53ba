//! CSV and JSON writers. Every file carries the merged config: CSV as a
//! block of `#` lines, JSON under a `config` key.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Format, ScenarioConfig};
use crate::error::CliError;

/// Twelve significant digits.
pub fn fmt12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        "nan".into()
    }
}

pub struct Output {
    dir: PathBuf,
    prefix: String,
    config_toml: String,
    csv: bool,
    json: bool,
    written: Vec<String>,
}

impl Output {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self, CliError> {
        let dir = PathBuf::from(&cfg.output.directory);
        fs::create_dir_all(&dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
        Ok(Self {
            dir,
            prefix: cfg.scenario.clone(),
            config_toml: cfg.to_toml(),
            csv: cfg.output.formats.contains(&Format::Csv),
            json: cfg.output.formats.contains(&Format::Json),
            written: vec![],
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    fn path(&self, suffix: &str, ext: &str) -> (String, PathBuf) {
        let name = if suffix.is_empty() { format!("{}.{ext}", self.prefix) } else { format!("{}_{suffix}.{ext}", self.prefix) };
        let path = self.dir.join(&name);
        (name, path)
    }

    fn write(&mut self, name: String, path: PathBuf, body: &[u8]) -> Result<(), CliError> {
        let io = |source| CliError::Io { path: path.display().to_string(), source };
        let mut f = fs::File::create(&path).map_err(io)?;
        f.write_all(body).map_err(io)?;
        self.written.push(name);
        Ok(())
    }

    /// Numeric table; `rows` must match `columns` in width.
    pub fn csv(&mut self, suffix: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
        if !self.csv {
            return Ok(());
        }
        let mut body = String::new();
        for line in self.config_toml.lines() {
            body.push('#');
            if !line.is_empty() {
                body.push(' ');
                body.push_str(line);
            }
            body.push('\n');
        }
        body.push_str(&columns.join(","));
        body.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            let cells: Vec<String> = row.into_iter().map(fmt12).collect();
            body.push_str(&cells.join(","));
            body.push('\n');
        }
        let (name, path) = self.path(suffix, "csv");
        self.write(name, path, body.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, suffix: &str, key: &str, payload: &T) -> Result<(), CliError> {
        if !self.json {
            return Ok(());
        }
        self.json_always(suffix, key, payload)
    }

    pub fn json_always<T: Serialize>(&mut self, suffix: &str, key: &str, payload: &T) -> Result<(), CliError> {
        let mut doc = serde_json::Map::new();
        doc.insert("config".into(), serde_json::Value::String(self.config_toml.clone()));
        let value = serde_json::to_value(payload).map_err(|e| CliError::Config(format!("serialising {key}: {e}")))?;
        doc.insert(key.into(), value);
        let mut text = serde_json::to_string_pretty(&doc).expect("json map serialises");
        text.push('\n');
        let (name, path) = self.path(suffix, "json");
        self.write(name, path, text.as_bytes())
    }
}
