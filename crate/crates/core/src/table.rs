//! Plain comma-separated tables with a header row. Floats are written with
//! 17 significant digits so that reruns are comparable bit for bit.

use std::fmt::LowerExp;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

fn csv_error(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

pub fn float<T: LowerExp>(x: T) -> String {
    format!("{x:.16e}")
}

/// Header plus rows of already formatted cells.
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

    pub fn write<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_error)?;
        for r in &self.rows {
            out.write_record(r).map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(r);
        let header: Vec<String> = input.headers().map_err(csv_error)?.iter().map(str::to_owned).collect();
        if header.is_empty() {
            return Err(Error::Format("empty table".into()));
        }
        let rows = input
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()).map_err(csv_error))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(Table { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Format(format!("missing column {name}")))
    }

    /// Numeric column by name.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number {:?} in column {name}", r[c])))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let xs = [0.1f64, -1.0 / 3.0, 8.0 * std::f64::consts::PI, 1e-300];
        let mut t = Table::new(["i", "x"]);
        for (i, x) in xs.iter().enumerate() {
            t.push(vec![i.to_string(), float(*x)]);
        }
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = Table::read(&buf[..]).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.floats("x").unwrap(), xs);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Table::read(&b"a,b\n1\n"[..]).is_err());
        assert!(Table::read(&b""[..]).is_err());
    }
}
