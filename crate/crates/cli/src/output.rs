use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Scientific notation with 17 significant digits; independent of locale.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table accumulated in memory.
#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    buf: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self {
            columns: header.len(),
            buf,
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        assert_eq!(cells.len(), self.columns, "row width must match the header");
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match cell {
                Cell::Int(v) => write!(self.buf, "{v}").unwrap(),
                Cell::Float(v) => self.buf.push_str(&float(*v)),
                Cell::Text(s) => self.buf.push_str(&quote(s)),
                Cell::Bool(b) => self.buf.push_str(if *b { "true" } else { "false" }),
            }
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numeric(format!("cannot serialize output: {e}")))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to standard output when there is none.
pub fn emit(path: Option<&Path>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(content.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Config(format!("cannot write to standard output: {e}")))
        }
    }
}
