//! CSV tables and coordinate-format matrix dumps.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::{HarnessError, Result};

/// Scientific notation with 17 significant digits.
pub fn real(v: f64) -> String {
    format!("{:.16e}", v + 0.0)
}

pub fn optional(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

/// A header plus rows of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = create(path)?;
        self.write_to(BufWriter::new(file))
            .map_err(|e| HarnessError::io(path, e))
    }
}

/// Writes `row col value` lines, one per stored entry.
pub fn write_triplets(
    mut w: impl Write,
    entries: impl IntoIterator<Item = (usize, usize, f64)>,
) -> io::Result<()> {
    for (i, j, v) in entries {
        writeln!(w, "{i} {j} {}", real(v))?;
    }
    w.flush()
}

pub fn save_triplets(
    path: &Path,
    entries: impl IntoIterator<Item = (usize, usize, f64)>,
) -> Result<()> {
    let file = create(path)?;
    write_triplets(BufWriter::new(file), entries).map_err(|e| HarnessError::io(path, e))
}

/// Reads back a coordinate-format dump.
pub fn read_triplets(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let bad = |line: &str| {
        HarnessError::io(
            path,
            io::Error::new(io::ErrorKind::InvalidData, format!("bad line `{line}`")),
        )
    };
    text.lines()
        .map(|line| {
            let mut it = line.split_whitespace();
            let (Some(i), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(bad(line));
            };
            Ok((
                i.parse().map_err(|_| bad(line))?,
                j.parse().map_err(|_| bad(line))?,
                v.parse().map_err(|_| bad(line))?,
            ))
        })
        .collect()
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path).map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, std::f64::consts::PI, -1e-300, 6.02214076e23] {
            let s = real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17);
        }
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![real(1.0), optional(None)]);
        assert_eq!(t.to_csv(), "a,b\n1.0000000000000000e0,\n");
    }

    #[test]
    fn triplet_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/m.txt");
        let entries = vec![(0, 0, 2.0), (0, 1, -1.0 / 3.0), (1, 0, -1.0 / 3.0)];
        save_triplets(&path, entries.clone()).unwrap();
        assert_eq!(read_triplets(&path).unwrap(), entries);
    }
}
