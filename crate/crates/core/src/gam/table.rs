use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Named numeric columns of equal length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::invalid(format!("{} names for {} columns", names.len(), columns.len())));
        }
        if names.is_empty() {
            return Err(Error::invalid("a feature table needs at least one column"));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::invalid(format!("duplicate column `{n}`")));
            }
        }
        let n = columns[0].len();
        if let Some((name, col)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n) {
            return Err(Error::invalid(format!("column `{name}` has {} rows, expected {n}", col.len())));
        }
        Ok(FeatureTable { names, columns })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn require(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| Error::invalid(format!("feature table has no column `{name}`")))
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
        }
    }

    /// Keeps only the named columns, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureTable> {
        let columns = names.iter().map(|n| self.require(n).map(<[f64]>::to_vec)).collect::<Result<_>>()?;
        FeatureTable::new(names.to_vec(), columns)
    }

    /// Copy with every entry of column `name` set to `value`.
    pub fn with_constant(&self, name: &str, value: f64) -> Result<FeatureTable> {
        let i = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::invalid(format!("feature table has no column `{name}`")))?;
        let mut out = self.clone();
        out.columns[i].iter_mut().for_each(|v| *v = value);
        Ok(out)
    }

    /// CSV with a header row of column names.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        for r in 0..self.n_rows() {
            w.write_record(self.columns.iter().map(|c| c[r].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<FeatureTable> {
        let mut rd = csv::Reader::from_reader(reader);
        let names: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
        let mut columns = vec![Vec::new(); names.len()];
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            for (c, field) in rec.iter().enumerate() {
                let v = field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    line: line + 2,
                    message: format!("column `{}`: {e}", names[c]),
                })?;
                columns[c].push(v);
            }
        }
        FeatureTable::new(names, columns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> FeatureTable {
        FeatureTable::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.5]]).unwrap()
    }

    #[test]
    fn rejects_ragged_and_duplicates() {
        assert!(FeatureTable::new(vec!["a".into(), "b".into()], vec![vec![1.0], vec![]]).is_err());
        assert!(FeatureTable::new(vec!["a".into(), "a".into()], vec![vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn select_and_constant() {
        let t = table();
        assert_eq!(t.select_rows(&[2, 0]).column("b").unwrap(), &[6.5, 4.0]);
        assert_eq!(t.with_constant("a", 9.0).unwrap().column("a").unwrap(), &[9.0; 3]);
        assert_eq!(t.select_columns(&["b".into()]).unwrap().n_columns(), 1);
        assert!(t.require("c").is_err());
    }

    #[test]
    fn csv_round_trip() {
        let t = table();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(FeatureTable::read_csv(buf.as_slice()).unwrap(), t);
    }
}
