//! Observation matrices and their CSV form.
//!
//! CSV layout: one observation per row, one variable per column. A header
//! row is only skipped when the caller asks for it.

use std::io::{Read, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `n × p` matrix of observations. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Validated constructor: rectangular, finite, `n ≥ 2`, `p ≥ 1`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 observations, got {}",
                rows.len()
            )));
        }
        let m = Self::build(rows)?;
        if let Some((k, j)) = m.first_non_finite() {
            return Err(Error::Parse {
                line: k + 1,
                column: j + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(m)
    }

    /// Skips the `n ≥ 2` check; rows must still be rectangular.
    pub fn from_rows_unchecked(rows: Vec<Vec<f64>>) -> Self {
        Self::build(&rows).expect("rows must be rectangular and non-empty")
    }

    pub fn from_matrix(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 observations, got {}",
                values.nrows()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::Parameter("data has no columns".into()));
        }
        let m = DataMatrix { values };
        if let Some((k, j)) = m.first_non_finite() {
            return Err(Error::Parse {
                line: k + 1,
                column: j + 1,
                message: "non-finite value".into(),
            });
        }
        Ok(m)
    }

    fn build(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map(Vec::len).unwrap_or(0);
        if p == 0 {
            return Err(Error::Parameter("data has no columns".into()));
        }
        for (k, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::Parse {
                    line: k + 1,
                    column: r.len().min(p) + 1,
                    message: format!("expected {p} fields, found {}", r.len()),
                });
            }
        }
        let values = DMatrix::from_fn(rows.len(), p, |k, j| rows[k][j]);
        Ok(DataMatrix { values })
    }

    fn first_non_finite(&self) -> Option<(usize, usize)> {
        for k in 0..self.n() {
            for j in 0..self.p() {
                if !self.values[(k, j)].is_finite() {
                    return Some((k, j));
                }
            }
        }
        None
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.values[(k, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.values.as_slice()[j * n..(j + 1) * n]
    }

    pub fn means(&self) -> Vec<f64> {
        (0..self.p())
            .map(|j| crate::mathcore::pairwise_sum(self.column(j)) / self.n() as f64)
            .collect()
    }

    /// Column-centered copy.
    pub fn centered(&self) -> DMatrix<f64> {
        let means = self.means();
        let mut c = self.values.clone();
        for (j, m) in means.iter().enumerate() {
            c.column_mut(j).iter_mut().for_each(|v| *v -= m);
        }
        c
    }

    /// Copy with every entry multiplied by `c`.
    pub fn scaled(&self, c: f64) -> DataMatrix {
        DataMatrix {
            values: &self.values * c,
        }
    }

    /// Copy with columns reordered so that new column `j` is old column `perm[j]`.
    pub fn permuted_columns(&self, perm: &[usize]) -> DataMatrix {
        assert_eq!(perm.len(), self.p());
        DataMatrix {
            values: DMatrix::from_fn(self.n(), self.p(), |k, j| self.values[(k, perm[j])]),
        }
    }

    /// First column (0-based) whose sample variance is zero, if any.
    pub fn constant_column(&self) -> Option<usize> {
        (0..self.p()).find(|&j| {
            let col = self.column(j);
            col.iter().all(|&v| v == col[0])
        })
    }

    /// Parses numeric CSV. With `header`, the first record is skipped.
    pub fn read_csv<R: Read>(reader: R, header: bool) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                Error::Parse {
                    line,
                    column: 0,
                    message: e.to_string(),
                }
            })?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 1);
            if rec.len() == 1 && rec[0].is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(rec.len());
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    column: j + 1,
                    message: format!("cannot parse {field:?} as a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        column: j + 1,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                row.push(v);
            }
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        line,
                        column: row.len().min(first.len()) + 1,
                        message: format!("expected {} fields, found {}", first.len(), row.len()),
                    });
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Writes headerless CSV with 17 significant digits, which round-trips exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for k in 0..self.n() {
            let line: Vec<String> = (0..self.p())
                .map(|j| format!("{:.16e}", self.values[(k, j)]))
                .collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}
