//! Tabular trajectory output: a header row, then one row of full-precision
//! floats per sample.

use std::io::{Read, Write};

use thiserror::Error;
use varmech_core::Trajectory;

use crate::expr::format_float;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}, column {col}: '{text}' is not a number")]
    BadNumber { row: usize, col: usize, text: String },
    #[error("row {row} has {found} fields, header has {expected}")]
    Ragged { row: usize, expected: usize, found: usize },
    #[error("missing header row")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let mut header = vec![traj.stamp.clone()];
        header.extend(traj.labels.iter().cloned());
        let rows = traj
            .times
            .iter()
            .zip(&traj.states)
            .map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect())
            .collect();
        Table { header, rows }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<(), TableError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_float(*x)))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is ASCII")
    }

    pub fn read<R: Read>(input: R) -> Result<Self, TableError> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(input);
        let mut records = r.records();
        let header: Vec<String> = match records.next() {
            Some(rec) => rec?.iter().map(str::to_string).collect(),
            None => return Err(TableError::Empty),
        };
        let mut rows = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            let row = i + 2;
            if rec.len() != header.len() {
                return Err(TableError::Ragged {
                    row,
                    expected: header.len(),
                    found: rec.len(),
                });
            }
            let values = rec
                .iter()
                .enumerate()
                .map(|(j, s)| {
                    s.trim().parse::<f64>().map_err(|_| TableError::BadNumber {
                        row,
                        col: j + 1,
                        text: s.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(values);
        }
        Ok(Table { header, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let t = Table {
            header: vec!["t".into(), "q1".into()],
            rows: vec![
                vec![0.0, 0.1 + 0.2],
                vec![1e-300, -2.0f64.sqrt()],
                vec![1e20, f64::MIN_POSITIVE],
            ],
        };
        let back = Table::read(t.to_csv_string().as_bytes()).unwrap();
        for (a, b) in t.rows.iter().flatten().zip(back.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.header, t.header);
    }

    #[test]
    fn malformed_input() {
        assert!(matches!(Table::read("".as_bytes()), Err(TableError::Empty)));
        assert!(matches!(
            Table::read("a,b\n1\n".as_bytes()),
            Err(TableError::Ragged { row: 2, .. })
        ));
        assert!(matches!(
            Table::read("a,b\n1,x\n".as_bytes()),
            Err(TableError::BadNumber { row: 2, col: 2, .. })
        ));
    }
}
