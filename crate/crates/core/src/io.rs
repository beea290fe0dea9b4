//! Deterministic CSV tables and binary correlation-matrix snapshots.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so identical
//! inputs give byte-identical files and every `f64` round-trips exactly.
//!
//! Snapshot layout: a stream of records, one per sampled time. Each record
//! is `t` followed by the `N x N` matrix in row-major order with real and
//! imaginary parts interleaved, all as little-endian `f64`:
//!
//! ```text
//! t, Re C_11, Im C_11, Re C_12, Im C_12, ..., Re C_NN, Im C_NN
//! ```
//!
//! so a record holds `1 + 2 N^2` values.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{to_f64, Complex, Real};

/// Canonical float formatting for every numeric column.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table with a fixed header.
pub struct CsvTable<W: Write> {
    out: W,
    columns: usize,
}

impl CsvTable<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let file = File::create(path.as_ref())?;
        CsvTable::new(BufWriter::new(file), header)
    }
}

impl<W: Write> CsvTable<W> {
    pub fn new(mut out: W, header: &[&str]) -> Result<Self> {
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvTable {
            out,
            columns: header.len(),
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        if n != self.columns {
            return Err(Error::DimensionMismatch {
                expected: self.columns,
                got: n,
            });
        }
        Ok(())
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.check(values.len())?;
        let line: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    /// Row whose first column is an integer label.
    pub fn labelled_row(&mut self, label: usize, values: &[f64]) -> Result<()> {
        self.check(values.len() + 1)?;
        let mut line = vec![label.to_string()];
        line.extend(values.iter().map(|v| fmt_f64(*v)));
        writeln!(self.out, "{}", line.join(","))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Header `t, n_1, ..., n_N`.
pub fn population_header(sites: usize) -> Vec<String> {
    std::iter::once("t".to_string())
        .chain((1..=sites).map(|i| format!("n_{i}")))
        .collect()
}

/// Appends one snapshot record.
pub fn write_snapshot<T: Real, W: Write>(
    out: &mut W,
    time: T,
    c: &DMatrix<Complex<T>>,
) -> Result<()> {
    out.write_all(&to_f64(time).to_le_bytes())?;
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            let z = c[(i, j)];
            out.write_all(&to_f64(z.re).to_le_bytes())?;
            out.write_all(&to_f64(z.im).to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads every record of an `N`-site snapshot stream.
pub fn read_snapshots<R: Read>(
    mut input: R,
    sites: usize,
) -> Result<Vec<(f64, DMatrix<Complex<f64>>)>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let record = 8 * (1 + 2 * sites * sites);
    if bytes.len() % record != 0 {
        return Err(Error::invalid(format!(
            "snapshot stream length {} is not a multiple of the record size {record}",
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok(values
        .chunks_exact(1 + 2 * sites * sites)
        .map(|r| {
            let m = DMatrix::from_fn(sites, sites, |i, j| {
                let k = 1 + 2 * (i * sites + j);
                Complex::new(r[k], r[k + 1])
            });
            (r[0], m)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_text() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn csv_rejects_wrong_width() {
        let mut t = CsvTable::new(Vec::new(), &["a", "b"]).unwrap();
        t.row(&[1.0, 2.0]).unwrap();
        assert!(t.row(&[1.0]).is_err());
        let text = String::from_utf8(t.finish().unwrap()).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }

    #[test]
    fn snapshot_layout_is_row_major_interleaved() {
        let c = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex::new(1.0, 0.0),
                Complex::new(2.0, 3.0),
                Complex::new(2.0, -3.0),
                Complex::new(4.0, 0.0),
            ],
        );
        let mut buf = Vec::new();
        write_snapshot(&mut buf, 0.5, &c).unwrap();
        write_snapshot(&mut buf, 1.5, &c).unwrap();
        assert_eq!(buf.len(), 2 * 8 * 9);
        let third = f64::from_le_bytes(buf[24..32].try_into().unwrap());
        assert_eq!(third, 2.0);
        let recs = read_snapshots(&buf[..], 2).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].0, 1.5);
        assert_eq!(recs[1].1, c);
    }
}
