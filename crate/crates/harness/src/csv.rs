//! Minimal CSV writer: header row, comma separated, floats at 17 significant
//! digits so values round-trip exactly.

use std::fmt::Write;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct Csv {
    columns: usize,
    out: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut out = String::new();
        push_row(&mut out, header.iter().map(|h| h.as_ref().to_string()));
        Self {
            columns: header.len(),
            out,
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns, "csv row width");
        push_row(&mut self.out, cells.into_iter());
    }

    pub fn finish(self) -> String {
        self.out
    }
}

fn push_row(out: &mut String, cells: impl Iterator<Item = String>) {
    let mut first = true;
    for c in cells {
        if !first {
            out.push(',');
        }
        first = false;
        if c.contains([',', '"', '\n']) {
            let _ = write!(out, "\"{}\"", c.replace('"', "\"\""));
        } else {
            out.push_str(&c);
        }
    }
    out.push('\n');
}

/// Parses a CSV produced by [`Csv`] (no embedded newlines) into header and rows.
pub fn parse(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().map(split_line);
    let header = lines.next().unwrap_or_default();
    (header, lines.collect())
}

fn split_line(line: &str) -> Vec<String> {
    let mut cells = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(ch) = chars.next() {
        match (ch, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => cells.push(std::mem::take(&mut cur)),
            _ => cur.push(ch),
        }
    }
    cells.push(cur);
    cells
}
