//! Minimal CSV emission: UTF-8, header row, comma separators, decimal
//! point, deterministic column order. Floats are printed at 9 significant
//! digits so a round-trip parse recovers them within 1e-9 relative.

use std::fmt;
use std::io::Write;
use std::path::Path;

use cpuformer_core::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::UInt(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v:.8e}"),
            Cell::Str(s) => write!(f, "{s}"),
        }
    }
}

pub fn render_csv(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let line: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut file = std::fs::File::create(path)?;
    file.write_all(render_csv(header, rows).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_gives_header_only() {
        let s = render_csv(&["a", "b"], &[]);
        assert_eq!(s, "a,b\n");
    }

    #[test]
    fn float_round_trip_within_1e9() {
        let vals = [1.0 / 3.0, 12345.6789, 1e-7, -0.000123456789];
        for v in vals {
            let s = Cell::Float(v).to_string();
            let back: f64 = s.parse().unwrap();
            assert!(((back - v) / v.abs().max(1e-12)).abs() < 1e-9, "{v} -> {s} -> {back}");
        }
        assert_eq!(Cell::Int(-5).to_string(), "-5");
        assert_eq!(Cell::UInt(7).to_string(), "7");
    }

    #[test]
    fn write_and_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = vec![
            vec![Cell::Str("x".into()), Cell::Int(1), Cell::Float(0.5)],
            vec![Cell::Str("y".into()), Cell::Int(2), Cell::Float(1.5)],
        ];
        write_csv(&path, &["name", "n", "v"], &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "name,n,v");
        assert!(lines[1].starts_with("x,1,"));
    }
}
