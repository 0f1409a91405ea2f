use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use carnot_lift::Result;
use serde::Serialize;
use serde_json::Value;

use crate::{EXIT_NOT_LIFTABLE, EXIT_OK, EXIT_VALIDATION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ValidationFailed,
    NotLiftable,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::ValidationFailed => EXIT_VALIDATION,
            Status::NotLiftable => EXIT_NOT_LIFTABLE,
        }
    }

    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Ok
        } else {
            Status::ValidationFailed
        }
    }
}

/// Result of a subcommand: exit status, the printed line and the JSON body
/// of its summary.
#[derive(Debug)]
pub struct Outcome {
    pub status: Status,
    pub line: String,
    pub summary: Value,
}

impl Outcome {
    pub fn new(status: Status, line: impl Into<String>, summary: impl Serialize) -> Self {
        Self { status, line: line.into(), summary: serde_json::to_value(summary).unwrap_or(Value::Null) }
    }
}

/// Output directory and the files written into it, in order.
#[derive(Debug)]
pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
    }

    pub fn write_with(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut out = BufWriter::new(File::create(self.path(name))?);
        body(&mut out)?;
        out.flush()?;
        self.record(name);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("summary serializes");
        std::fs::write(self.path(name), text + "\n")?;
        self.record(name);
        Ok(())
    }

    /// Rows of numbers under a header, in shortest round-trip form.
    pub fn write_table(&mut self, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
        self.write_with(name, |w| {
            writeln!(w, "{}", header.join(","))?;
            for r in rows {
                writeln!(w, "{}", crate::input::join(r))?;
            }
            Ok(())
        })
    }

    pub fn write_matrix(&mut self, name: &str, m: &nalgebra::DMatrix<f64>) -> Result<()> {
        let header: Vec<String> = (1..=m.ncols()).map(|j| format!("c{j}")).collect();
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        self.write_table(name, &header, &rows)
    }
}
