//! Field files.
//!
//! CSV: a header line `# grid d=<d> n=<n>` followed by `n` rows of `n`
//! comma-separated values (one row in 1D). Values are written in shortest
//! round-trip scientific notation, so reading back is bit-exact.
//!
//! PGM: plain `P2` with max value 65535; the top image row is the largest `y`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Field, Grid};
use crate::error::{Error, Result};

pub fn field_to_csv(u: &Field) -> String {
    let grid = u.grid();
    let n = grid.n();
    let mut out = format!("# grid d={} n={}\n", grid.dim(), n);
    for row in u.values().chunks(n) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn field_from_csv(text: &str) -> Result<Field> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    let grid = parse_header(header)?;
    let n = grid.n();
    let rows = if grid.dim() == 1 { 1 } else { n };
    let mut values = Vec::with_capacity(grid.len());
    for r in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Format(format!("expected {rows} data rows, found {r}")))?;
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|_| {
                Error::Format(format!("bad number {:?} in row {}", tok.trim(), r + 1))
            })?;
            values.push(v);
        }
        if values.len() - before != n {
            return Err(Error::Format(format!(
                "row {} has {} columns, expected {n}",
                r + 1,
                values.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(Error::Format("trailing rows after field data".into()));
    }
    Field::from_values(grid, values)
}

fn parse_header(line: &str) -> Result<Grid> {
    let rest = line
        .trim()
        .strip_prefix("# grid")
        .ok_or_else(|| Error::Format(format!("bad header {line:?}")))?;
    let mut dim = None;
    let mut n = None;
    for tok in rest.split_whitespace() {
        match tok.split_once('=') {
            Some(("d", v)) => dim = v.parse::<usize>().ok(),
            Some(("n", v)) => n = v.parse::<usize>().ok(),
            _ => return Err(Error::Format(format!("bad header token {tok:?}"))),
        }
    }
    match (dim, n) {
        (Some(d), Some(n)) => Grid::new(d, n).map_err(|e| Error::Format(e.to_string())),
        _ => Err(Error::Format(format!("header missing d or n: {line:?}"))),
    }
}

pub fn write_field(path: impl AsRef<Path>, u: &Field) -> Result<()> {
    fs::write(path, field_to_csv(u))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field> {
    field_from_csv(&fs::read_to_string(path)?)
}

/// Reads a field and checks it lives on `grid`.
pub fn read_field_on(path: impl AsRef<Path>, grid: &Grid) -> Result<Field> {
    let u = read_field(path)?;
    if u.grid() != *grid {
        return Err(Error::Format(format!(
            "dimension mismatch: file has {}, expected {grid}",
            u.grid()
        )));
    }
    Ok(u)
}

/// Linear map of `[min, max]` onto `[0, 65535]`; a constant field is mid-gray.
pub fn field_to_pgm(u: &Field) -> Result<String> {
    let grid = u.grid();
    if grid.dim() != 2 {
        return Err(Error::invalid("field", "PGM export needs a 2D grid"));
    }
    let n = grid.n();
    let (lo, hi) = (u.min(), u.max());
    let level = |v: f64| -> u32 {
        if hi > lo {
            ((v - lo) / (hi - lo) * 65535.0).round() as u32
        } else {
            32768
        }
    };
    let mut out = format!("P2\n{n} {n}\n65535\n");
    for j in (0..n).rev() {
        let row: Vec<String> = (0..n)
            .map(|i| level(u.values()[j * n + i]).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_pgm(path: impl AsRef<Path>, u: &Field) -> Result<()> {
    fs::write(path, field_to_pgm(u)?)?;
    Ok(())
}

/// Two-column `x,u` profile of a 1D field.
pub fn field_to_profile_csv(u: &Field) -> String {
    let grid = u.grid();
    let mut out = String::from("x,u\n");
    for (k, v) in u.values().iter().enumerate() {
        let (x, _) = grid.coords(k);
        writeln!(out, "{x:e},{v:e}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_2d() {
        let g = Grid::square(4).unwrap();
        let u = Field::from_fn(g, |x, y| x - 2.0 * y);
        let text = field_to_csv(&u);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "# grid d=2 n=4");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let g = Grid::line(9).unwrap();
        let u = Field::from_fn(g, |x, _| (x * 13.7).exp().sin() / 3.0);
        assert_eq!(field_from_csv(&field_to_csv(&u)).unwrap(), u);
    }

    #[test]
    fn malformed_inputs() {
        assert!(field_from_csv("").is_err());
        assert!(field_from_csv("# grid d=1 n=3\n1,2\n").is_err());
        assert!(field_from_csv("# grid d=1 n=3\n1,2,x\n").is_err());
        assert!(field_from_csv("# grid d=2 n=3\n1,2,3\n").is_err());
        assert!(field_from_csv("# mesh d=1 n=3\n1,2,3\n").is_err());
        assert!(field_from_csv("# grid d=1 n=3\n1,2,3\n4,5,6\n").is_err());
    }

    #[test]
    fn constant_field_is_mid_gray() {
        let g = Grid::square(3).unwrap();
        let text = field_to_pgm(&Field::zeros(g)).unwrap();
        let body: Vec<&str> = text.lines().skip(3).flat_map(|l| l.split(' ')).collect();
        assert_eq!(body.len(), 9);
        assert!(body.iter().all(|v| *v == "32768"));
        assert!(field_to_pgm(&Field::zeros(Grid::line(3).unwrap())).is_err());
    }

    #[test]
    fn pgm_spans_full_range() {
        let g = Grid::square(5).unwrap();
        let text = field_to_pgm(&Field::from_fn(g, |x, y| x + y)).unwrap();
        assert!(text.starts_with("P2\n5 5\n65535\n"));
        let vals: Vec<u32> = text
            .lines()
            .skip(3)
            .flat_map(|l| l.split(' ').map(|v| v.parse().unwrap()))
            .collect();
        assert_eq!(*vals.iter().max().unwrap(), 65535);
        assert_eq!(*vals.iter().min().unwrap(), 0);
    }
}
