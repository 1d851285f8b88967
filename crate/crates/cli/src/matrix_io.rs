//! Matrix text files: a `rows cols` header, then `rows·cols` lines of
//! `re im` in row-major order. Numbers are written in the shortest form that
//! reads back to the same bits.

use std::fmt::Write as _;
use std::path::Path;

use ando_core::{CMat, Error};
use num_complex::Complex;

use crate::error::{CliError, Result};

pub fn format_matrix(m: &CMat) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            let _ = writeln!(s, "{} {}", z.re, z.im);
        }
    }
    s
}

fn number(tok: &str, line: usize) -> Result<f64, Error> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Format(format!("line {line}: '{tok}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Format(format!("line {line}: non-finite value '{tok}'")));
    }
    Ok(v)
}

pub fn parse_matrix(text: &str) -> Result<CMat, Error> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Format("empty matrix file".into()))?;
    let dims: Vec<&str> = header.split_whitespace().collect();
    let [rows, cols] = dims[..] else {
        return Err(Error::Format("line 1: expected 'rows cols'".into()));
    };
    let size = |t: &str| t.parse::<usize>().map_err(|_| Error::Format(format!("line 1: bad dimension '{t}'")));
    let (rows, cols) = (size(rows)?, size(cols)?);
    let mut data = Vec::with_capacity(rows * cols);
    for (i, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [re, im] = toks[..] else {
            return Err(Error::Format(format!("line {}: expected 're im'", i + 1)));
        };
        data.push(Complex::new(number(re, i + 1)?, number(im, i + 1)?));
    }
    if data.len() != rows * cols {
        return Err(Error::Format(format!("{rows}x{cols} matrix needs {} entries, found {}", rows * cols, data.len())));
    }
    Ok(CMat::from_row_slice(rows, cols, &data))
}

pub fn read_matrix(path: &Path) -> Result<CMat> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    parse_matrix(&text).map_err(|source| CliError::Matrix { path: path.into(), source })
}

pub fn write_matrix(path: &Path, m: &CMat) -> Result<()> {
    std::fs::write(path, format_matrix(m)).map_err(|source| CliError::Io { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_one_by_one() {
        let m = parse_matrix("1 1\n0 0\n").unwrap();
        assert_eq!(format_matrix(&m), "1 1\n0 0\n");
    }

    #[test]
    fn awkward_values_round_trip() {
        let vals = [0.1, -0.0, 1e-300, 5e-324, f64::MAX, 1.0 / 3.0, -2.5e17];
        let data: Vec<Complex<f64>> = vals.iter().map(|&v| Complex::new(v, -v * 0.7)).collect();
        let m = CMat::from_row_slice(1, vals.len(), &data);
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_matrix("1 1\nNaN 0\n"), Err(Error::Format(_))));
        assert!(matches!(parse_matrix("1 1\ninf 0\n"), Err(Error::Format(_))));
        assert!(matches!(parse_matrix("2 2\n0 0\n"), Err(Error::Format(_))));
        assert!(matches!(parse_matrix("1 1\n0 0\n0 0\n"), Err(Error::Format(_))));
        assert!(matches!(parse_matrix("1\n0 0\n"), Err(Error::Format(_))));
        assert!(matches!(parse_matrix("1 1\n0\n"), Err(Error::Format(_))));
    }
}
