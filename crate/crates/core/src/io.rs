//! Plain-text table output shared by the CSV exporters.
//!
//! Numbers are written with 17 significant digits (`{:.16e}`), enough to
//! round-trip any `f64` exactly.

use crate::scalar::Real;

/// Formats one scalar for CSV output.
pub fn num<R: Real>(x: R) -> String {
    format!("{:.16e}", x.as_f64())
}

/// Accumulates comma-separated rows under a fixed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    columns: usize,
    text: String,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { columns: header.len(), text }
    }

    /// Appends a row; panics if the arity differs from the header.
    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.columns, "row arity must match the header");
        let joined: Vec<&str> = cells.iter().map(AsRef::as_ref).collect();
        self.text.push_str(&joined.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}
