//! Plain CSV tables.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Flag(bool),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // shortest representation that parses back to the same f64
            Cell::Num(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i32> for Cell {
    fn from(v: i32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Flag(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns.iter().position(|c| c == name).ok_or_else(|| LabError::MissingColumn(name.to_string()))
    }

    /// Numeric values of a column; non-numeric cells are an error.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| match &r[i] {
                Cell::Int(v) => Ok(*v as f64),
                Cell::Num(v) => Ok(*v),
                other => Err(LabError::invalid("column", format!("`{name}` holds non-numeric {other:?}"))),
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for r in &self.rows {
            wr.write_record(r.iter().map(Cell::render))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8 cells")
    }

    /// Reads a table back; cells parse as integers, then floats, then booleans.
    pub fn read_csv<R: Read>(r: R) -> Result<Table> {
        let mut rd = csv::Reader::from_reader(r);
        let columns: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            rows.push(rec.iter().map(parse_cell).collect());
        }
        Ok(Table { columns, rows })
    }
}

fn parse_cell(s: &str) -> Cell {
    if let Ok(v) = s.parse::<i64>() {
        Cell::Int(v)
    } else if let Ok(v) = s.parse::<f64>() {
        Cell::Num(v)
    } else if let Ok(b) = s.parse::<bool>() {
        Cell::Flag(b)
    } else {
        Cell::Text(s.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        let mut t = Table::new(&["x", "y", "name"]);
        let y = 0.1 + 0.2;
        t.push(vec![3usize.into(), y.into(), "a,b".into()]);
        t.push(vec![4usize.into(), 1e-300.into(), "c".into()]);
        let back = Table::read_csv(t.to_csv_string().as_bytes()).unwrap();
        assert_eq!(back.numbers("y").unwrap(), vec![y, 1e-300]);
        assert_eq!(back.rows[0][2], Cell::Text("a,b".into()));
        assert!(back.numbers("name").is_err());
        assert!(matches!(back.numbers("z"), Err(LabError::MissingColumn(_))));
    }
}
