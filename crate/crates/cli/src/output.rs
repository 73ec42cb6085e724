use std::fs::{self, File};
use std::path::Path;

use d2rnn::train::ConfusionMatrix;

use crate::Failure;

/// Rows of string cells under a header.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), Failure> {
        let file = File::create(path).map_err(|e| Failure::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        let err = |e: csv::Error| Failure::Data(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        w.flush().map_err(|e| Failure::io(path, e))
    }

    /// Space-aligned text rendering, numbers right-aligned.
    pub fn render(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                self.rows
                    .iter()
                    .map(|r| r[c].len())
                    .chain([self.header[c].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            cells
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| {
                    if cell.parse::<f64>().is_ok() {
                        format!("{cell:>w$}")
                    } else {
                        format!("{cell:<w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * widths.len().saturating_sub(1)));
        for r in &self.rows {
            out.push('\n');
            out.push_str(&line(r));
        }
        out
    }
}

/// Shortest decimal that round-trips.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Fixed four-decimal rendering for console tables.
pub fn short(x: f64) -> String {
    format!("{x:.4}")
}

pub fn confusion_table(m: &ConfusionMatrix, class_names: &[String]) -> Table {
    let mut t = Table::new(std::iter::once("truth".to_string()).chain(class_names.iter().cloned()));
    for (c, row) in m.rows().iter().enumerate() {
        let mut cells = vec![class_names[c].clone()];
        cells.extend(row.iter().map(usize::to_string));
        t.push(cells);
    }
    t
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_floats_round_trip() {
        for x in [0.1, 1e-7, 123456.789, -0.0, 2.0 / 3.0] {
            let s = num(x);
            assert!(!s.contains('e'), "{s}");
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn rendering_aligns_columns() {
        let mut t = Table::new(["model", "accuracy"]);
        t.push(vec!["lstm".into(), "0.5".into()]);
        t.push(vec!["d2rnn:3".into(), "0.975".into()]);
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "model    accuracy");
        assert_eq!(lines[2], "lstm          0.5");
        assert_eq!(lines[3], "d2rnn:3     0.975");
    }

    #[test]
    fn csv_has_header_then_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["x,y".into(), num(0.25)]);
        t.write_csv(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "a,b\n\"x,y\",0.25\n");
    }
}
