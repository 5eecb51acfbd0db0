//! Plain CSV readers and writers for matrices, masks and label vectors.
//!
//! Matrices are written one row per line with comma-separated decimal
//! entries. Masks use `0`/`1`. Labels are one integer per line.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::scalar::Real;

fn rows_to_string<V: Display>(rows: impl Iterator<Item = Vec<V>>) -> String {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_rows<V: FromStr>(text: &str) -> Result<Vec<Vec<V>>> {
    let mut rows = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim().parse::<V>().map_err(|_| {
                    Error::Parse(format!("line {}: cannot parse {:?}", ln + 1, tok.trim()))
                })
            })
            .collect::<Result<Vec<V>>>()?;
        if let Some(first) = rows.first().map(|r: &Vec<V>| r.len()) {
            if first != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {first} fields, found {}",
                    ln + 1,
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn matrix_to_csv<T: Real>(m: &Matrix<T>) -> String {
    rows_to_string((0..m.rows()).map(|r| m.row(r).to_vec()))
}

pub fn matrix_from_csv<T: Real>(text: &str) -> Result<Matrix<T>> {
    let rows: Vec<Vec<f64>> = parse_rows(text)?;
    let rows: Vec<Vec<T>> = rows
        .into_iter()
        .map(|r| r.into_iter().map(T::lit).collect())
        .collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, 0));
    }
    Matrix::from_rows(&rows)
}

pub fn write_matrix<T: Real>(path: impl AsRef<Path>, m: &Matrix<T>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix<T: Real>(path: impl AsRef<Path>) -> Result<Matrix<T>> {
    matrix_from_csv(&fs::read_to_string(path)?)
}

/// Writes a row-major mask of shape `rows x cols`.
pub fn write_mask(path: impl AsRef<Path>, mask: &[bool], rows: usize, cols: usize) -> Result<()> {
    if mask.len() != rows * cols {
        return Err(Error::Dimension(format!(
            "mask has {} entries for {rows}x{cols}",
            mask.len()
        )));
    }
    let text = rows_to_string((0..rows).map(|r| {
        mask[r * cols..(r + 1) * cols]
            .iter()
            .map(|&b| u8::from(b))
            .collect()
    }));
    fs::write(path, text)?;
    Ok(())
}

/// Reads a mask, returning `(row-major entries, rows, cols)`.
pub fn read_mask(path: impl AsRef<Path>) -> Result<(Vec<bool>, usize, usize)> {
    let rows: Vec<Vec<u8>> = parse_rows(&fs::read_to_string(path)?)?;
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    let mut mask = Vec::with_capacity(nrows * ncols);
    for row in rows {
        for v in row {
            match v {
                0 => mask.push(false),
                1 => mask.push(true),
                other => return Err(Error::Parse(format!("mask entry {other} is not 0 or 1"))),
            }
        }
    }
    Ok((mask, nrows, ncols))
}

pub fn write_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    let text: String = labels.iter().map(|l| format!("{l}\n")).collect();
    fs::write(path, text)?;
    Ok(())
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let rows: Vec<Vec<usize>> = parse_rows(&fs::read_to_string(path)?)?;
    Ok(rows.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let m = Matrix::from_rows(&[vec![0.1, -2.5e-17, 3.0], vec![1.0 / 3.0, 7.0, -0.0]]).unwrap();
        let back: Matrix<f64> = matrix_from_csv(&matrix_to_csv(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = vec![true, false, false, true, true, true];
        write_mask(dir.path().join("mask.csv"), &mask, 2, 3).unwrap();
        assert_eq!(
            read_mask(dir.path().join("mask.csv")).unwrap(),
            (mask, 2, 3)
        );
        write_labels(dir.path().join("labels.csv"), &[0, 2, 1]).unwrap();
        assert_eq!(
            read_labels(dir.path().join("labels.csv")).unwrap(),
            vec![0, 2, 1]
        );
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(matrix_from_csv::<f64>("1,2\n3\n").is_err());
        assert!(matrix_from_csv::<f64>("1,x\n").is_err());
    }
}
