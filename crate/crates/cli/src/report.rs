use std::fs;
use std::path::Path;

use crate::CliError;

/// Full-precision CSV field.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Output of one command.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportBundle {
    pub summary: String,
    pub tables: Vec<Table>,
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

impl ReportBundle {
    pub fn success(summary: String, tables: Vec<Table>) -> Self {
        ReportBundle {
            summary,
            tables,
            ..Default::default()
        }
    }

    pub fn failure(exit_code: i32, stderr: String) -> Self {
        ReportBundle {
            stderr,
            exit_code,
            ..Default::default()
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// All tables, each preceded by a `# name` line and separated by a blank line.
    pub fn csv_text(&self) -> String {
        self.tables
            .iter()
            .map(|t| format!("# {}\n{}", t.name, t.to_csv()))
            .collect::<Vec<_>>()
            .join("\n")
    }

    pub fn write_tables(&self, dir: &Path) -> Result<(), CliError> {
        let io = |source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        };
        fs::create_dir_all(dir).map_err(io)?;
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            fs::write(&path, t.to_csv()).map_err(|source| CliError::Io { path, source })?;
        }
        Ok(())
    }
}
