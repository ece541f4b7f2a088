use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n x d` panel of observations, one series per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    data: DMatrix<f64>,
    names: Vec<String>,
    dates: Option<Vec<String>>,
}

impl TimeSeriesPanel {
    pub fn new(data: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        let (n, d) = data.shape();
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!("empty panel ({n}x{d})")));
        }
        if names.len() != d {
            return Err(Error::Dimension(format!("{} names for {d} series", names.len())));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate series name `{name}`")));
            }
        }
        for j in 0..d {
            for i in 0..n {
                if !data[(i, j)].is_finite() {
                    return Err(Error::NonFiniteCell {
                        row: i + 1,
                        series: names[j].clone(),
                    });
                }
            }
        }
        Ok(Self {
            data,
            names,
            dates: None,
        })
    }

    /// Panel with generated names `w1..wd`.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let names = (1..=data.ncols()).map(|j| format!("w{j}")).collect();
        Self::new(data, names)
    }

    pub fn with_dates(mut self, dates: Vec<String>) -> Result<Self> {
        if dates.len() != self.n() {
            return Err(Error::Dimension(format!(
                "{} date labels for {} rows",
                dates.len(),
                self.n()
            )));
        }
        self.dates = Some(dates);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn d(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Copy with every column centred at zero.
    pub fn demeaned(&self) -> Self {
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        Self {
            data,
            names: self.names.clone(),
            dates: self.dates.clone(),
        }
    }

    /// Reorders columns; `order[k]` is the source column placed at position `k`.
    pub fn select_columns(&self, order: &[usize]) -> Result<Self> {
        if order.iter().any(|&j| j >= self.d()) {
            return Err(Error::InvalidInput("column index out of range".into()));
        }
        let data = DMatrix::from_fn(self.n(), order.len(), |i, k| self.data[(i, order[k])]);
        let names = order.iter().map(|&j| self.names[j].clone()).collect();
        let mut out = Self::new(data, names)?;
        out.dates = self.dates.clone();
        Ok(out)
    }

    /// Stacked regressor `W_t = (w_t', w_{t-1}', ..., w_{t-p+1}')'` for 0-based `t >= p-1`.
    pub fn stacked_lags(&self, t: usize, p: usize) -> DVector<f64> {
        let d = self.d();
        DVector::from_fn(d * p, |k, _| self.data[(t - k / d, k % d)])
    }

    /// Reads RFC-4180 CSV with a header row of series names. A leading
    /// column named `date` is kept as row labels.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let has_date = headers.first().map(|h| h.eq_ignore_ascii_case("date")).unwrap_or(false);
        let offset = usize::from(has_date);
        let names: Vec<String> = headers[offset..].to_vec();
        let d = names.len();
        let mut values = Vec::new();
        let mut dates = Vec::new();
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            if record.len() != headers.len() {
                return Err(Error::InvalidInput(format!(
                    "row {} has {} fields, expected {}",
                    i + 1,
                    record.len(),
                    headers.len()
                )));
            }
            if has_date {
                dates.push(record[0].to_string());
            }
            for (j, field) in record.iter().skip(offset).enumerate() {
                let field = field.trim();
                let v = if field.is_empty() || field.eq_ignore_ascii_case("na") {
                    f64::NAN
                } else {
                    field.parse::<f64>().map_err(|_| {
                        Error::InvalidInput(format!(
                            "cannot parse `{field}` at row {}, series `{}`",
                            i + 1,
                            names[j]
                        ))
                    })?
                };
                if !v.is_finite() {
                    return Err(Error::NonFiniteCell {
                        row: i + 1,
                        series: names[j].clone(),
                    });
                }
                values.push(v);
            }
        }
        let n = values.len() / d.max(1);
        let panel = Self::new(DMatrix::from_row_slice(n, d, &values), names)?;
        if has_date {
            panel.with_dates(dates)
        } else {
            Ok(panel)
        }
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = Vec::with_capacity(self.d() + 1);
        if self.dates.is_some() {
            header.push("date");
        }
        header.extend(self.names.iter().map(String::as_str));
        wtr.write_record(&header)?;
        for i in 0..self.n() {
            let mut row: Vec<String> = Vec::with_capacity(self.d() + 1);
            if let Some(dates) = &self.dates {
                row.push(dates[i].clone());
            }
            row.extend((0..self.d()).map(|j| format!("{:?}", self.data[(i, j)])));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_dates() {
        let text = "date,US,CN\n2003-01,1.5,2\n2003-02,-0.25,3e-1\n";
        let panel = TimeSeriesPanel::from_csv_reader(text.as_bytes()).unwrap();
        assert_eq!(panel.names(), ["US", "CN"]);
        assert_eq!(panel.dates().unwrap(), ["2003-01", "2003-02"]);
        assert_eq!(panel.data()[(1, 1)], 0.3);
        let mut buf = Vec::new();
        panel.write_csv(&mut buf).unwrap();
        let again = TimeSeriesPanel::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(again, panel);
    }

    #[test]
    fn nan_cell_is_named() {
        let text = "a,b\n1,2\n3,NaN\n";
        let err = TimeSeriesPanel::from_csv_reader(text.as_bytes()).unwrap_err();
        match err {
            Error::NonFiniteCell { row, series } => {
                assert_eq!(row, 2);
                assert_eq!(series, "b");
            }
            other => panic!("unexpected {other}"),
        }
        let missing = "a,b\n1,\n";
        assert!(TimeSeriesPanel::from_csv_reader(missing.as_bytes()).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let m = DMatrix::zeros(3, 2);
        assert!(TimeSeriesPanel::new(m, vec!["x".into(), "x".into()]).is_err());
    }

    #[test]
    fn stacked_lags_layout() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let panel = TimeSeriesPanel::from_matrix(m).unwrap();
        let w = panel.stacked_lags(2, 2);
        assert_eq!(w.as_slice(), &[5.0, 6.0, 3.0, 4.0]);
    }
}
