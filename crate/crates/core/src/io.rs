//! Plain numeric CSV for matrices.
//!
//! No header by default. Values are written with 17 significant digits so
//! every `f64` survives a write/read cycle unchanged.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn read_matrix<R: Read>(reader: R, has_header: bool) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: cannot parse {field:?} as a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_matrix_file(path: impl AsRef<Path>, has_header: bool) -> Result<DenseMatrix> {
    let file = std::fs::File::open(path.as_ref())?;
    read_matrix(file, has_header)
}

pub fn write_matrix<W: Write>(writer: W, m: &DenseMatrix, header: Option<&[String]>) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    if let Some(h) = header {
        if h.len() != m.cols() {
            return Err(Error::Shape(format!("header has {} names for {} columns", h.len(), m.cols())));
        }
        wtr.write_record(h)?;
    }
    for i in 0..m.rows() {
        wtr.write_record((0..m.cols()).map(|j| fmt_f64(m.get(i, j))))?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_matrix_file(path: impl AsRef<Path>, m: &DenseMatrix, header: Option<&[String]>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_matrix(std::io::BufWriter::new(file), m, header)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_row_is_skipped_when_flagged() {
        let text = "a,b\n1,2\n3.5,-4e-3\n";
        let m = read_matrix(text.as_bytes(), true).unwrap();
        assert_eq!(m.to_row_major(), vec![1.0, 2.0, 3.5, -4e-3]);
        assert!(read_matrix(text.as_bytes(), false).is_err());
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(read_matrix("1,2\n3\n".as_bytes(), false).is_err());
    }

    proptest! {
        #[test]
        fn write_then_read_is_exact(vals in proptest::collection::vec(-1e300f64..1e300, 6)) {
            let m = DenseMatrix::new(2, 3, vals).unwrap();
            let mut buf = Vec::new();
            write_matrix(&mut buf, &m, None).unwrap();
            let back = read_matrix(buf.as_slice(), false).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
