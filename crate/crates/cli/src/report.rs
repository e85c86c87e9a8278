//! JSON reports and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use alphamod::almostdiag::DecayMatrix;
use alphamod::covering::Ix;
use alphamod::frame::CoeffSeq;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `<=`, `>=` or `==`.
    pub relation: String,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn le(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: "<=".into(),
            limit,
            pass: value <= limit,
        }
    }

    pub fn ge(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: ">=".into(),
            limit,
            pass: value >= limit,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            value: ok as u8 as f64,
            relation: "==".into(),
            limit: 1.0,
            pass: ok,
        }
    }
}

/// Experiment result. Wall time is printed by the binary and kept out of
/// the file so reports are byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub experiment: String,
    pub seed: u64,
    pub inputs: ExperimentConfig,
    pub scalars: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub tables: Vec<String>,
    pub pass: bool,
}

impl Report {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn scalar_f64(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).and_then(Value::as_f64)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Float(v) => format!("{v:.16e}"),
            Self::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Self::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Self::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Self::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Self::Text(v.into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header row, then one record per row; floats with 17 significant digits.
    pub fn write_csv(&self, w: impl Write) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record(r.iter().map(Cell::render))
                .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

/// Report plus its tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub tables: Vec<Table>,
}

impl Outcome {
    /// `DIR/report.json` and `DIR/tables/<name>.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let tdir = dir.join("tables");
        fs::create_dir_all(&tdir)?;
        fs::write(dir.join("report.json"), self.report.to_json())?;
        for t in &self.tables {
            t.write_csv(fs::File::create(tdir.join(format!("{}.csv", t.name)))?)?;
        }
        Ok(())
    }
}

/// One record per `(k, l)`: `k0,k1,l0,l1,re0,im0,...`, sorted k-major.
pub fn coeff_table(name: &str, c: &CoeffSeq) -> Table {
    let mut header = vec!["k0".to_string(), "k1".into(), "l0".into(), "l1".into()];
    for i in 0..c.n {
        header.push(format!("re{i}"));
        header.push(format!("im{i}"));
    }
    let mut t = Table {
        name: name.into(),
        header,
        rows: Vec::new(),
    };
    for (&(k, l), v) in &c.entries {
        let mut row: Vec<Cell> = [k.0[0], k.0[1], l.0[0], l.0[1]]
            .iter()
            .map(|&x| Cell::Int(x))
            .collect();
        for z in v {
            row.push(Cell::Float(z.re));
            row.push(Cell::Float(z.im));
        }
        t.rows.push(row);
    }
    t
}

/// Inverse of [`coeff_table`] on its CSV text.
pub fn read_coeff_csv(r: impl Read) -> Result<CoeffSeq, CliError> {
    let bad = |m: String| CliError::Config(format!("coefficient csv: {m}"));
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() < 6 || header.len() % 2 != 0 || &header[0] != "k0" {
        return Err(bad("expected header k0,k1,l0,l1,re0,im0,...".into()));
    }
    let n = (header.len() - 4) / 2;
    let mut c = CoeffSeq::new(n);
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let int = |i: usize| {
            rec[i]
                .parse::<i64>()
                .map_err(|e| bad(format!("record {}: {e}", line + 1)))
        };
        let fl = |i: usize| {
            rec[i]
                .parse::<f64>()
                .map_err(|e| bad(format!("record {}: {e}", line + 1)))
        };
        let k = Ix([int(0)?, int(1)?]);
        let l = Ix([int(2)?, int(3)?]);
        let v = (0..n)
            .map(|i| Ok(Complex64::new(fl(4 + 2 * i)?, fl(5 + 2 * i)?)))
            .collect::<Result<_, CliError>>()?;
        c.insert(k, l, v);
    }
    Ok(c)
}

/// Triplets `((j,l),(k,m), re, im)`, sorted.
pub fn matrix_table(name: &str, a: &DecayMatrix) -> Table {
    let mut t = Table::new(
        name,
        &["j0", "j1", "l0", "l1", "k0", "k1", "m0", "m1", "re", "im"],
    );
    for (&((j, l), (k, m)), v) in &a.entries {
        let mut row: Vec<Cell> = [
            j.0[0], j.0[1], l.0[0], l.0[1], k.0[0], k.0[1], m.0[0], m.0[1],
        ]
        .iter()
        .map(|&x| Cell::Int(x))
        .collect();
        row.push(Cell::Float(v.re));
        row.push(Cell::Float(v.im));
        t.rows.push(row);
    }
    t
}
