//! CSV and number formatting. Numbers use Rust's shortest round-trip
//! representation, so output is locale independent and re-parses exactly.

use crate::error::{CliError, CliResult};

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Empty cell for absent values.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct CsvTable {
    writer: csv::Writer<Vec<u8>>,
    header: Vec<String>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self::with_header(header.iter().map(|s| s.to_string()).collect())
    }

    pub fn with_header(header: Vec<String>) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        // writing to memory cannot fail
        writer.write_record(&header).expect("in-memory write");
        Self { writer, header }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.header.len());
        self.writer.write_record(&cells).expect("in-memory write");
    }

    pub fn finish(self) -> CliResult<String> {
        let bytes = self
            .writer
            .into_inner()
            .map_err(|e| CliError::Io { path: "<csv buffer>".into(), source: e.into_error() })?;
        String::from_utf8(bytes)
            .map_err(|e| CliError::Io { path: "<csv buffer>".into(), source: std::io::Error::other(e) })
    }
}
