//! Self-describing output files: CSV with a leading `# {manifest}` line,
//! Hessenberg dumps and operator JSON lines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::krylov::HessenbergMatrix;
use crate::majorana::OperatorVector;

pub const MANIFEST_PREFIX: &str = "# ";

/// Adds the crate version to a manifest object.
pub fn stamp(mut manifest: Value) -> Value {
    if let Value::Object(m) = &mut manifest {
        m.insert("dsyk_version".into(), json!(env!("CARGO_PKG_VERSION")));
    }
    manifest
}

pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push<S: ToString>(&mut self, row: impl IntoIterator<Item = S>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    pub fn write(&self, w: impl Write, manifest: &Value) -> Result<()> {
        let mut w = BufWriter::new(w);
        writeln!(w, "{MANIFEST_PREFIX}{}", serde_json::to_string(manifest)?)?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header).map_err(std::io::Error::from)?;
        for r in &self.rows {
            csv.write_record(r).map_err(std::io::Error::from)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_file(&self, path: impl AsRef<Path>, manifest: &Value) -> Result<()> {
        self.write(File::create(path)?, manifest)
    }
}

/// Reads back the manifest line and the table of a file written by [`CsvTable`].
pub fn read_csv(path: impl AsRef<Path>) -> Result<(Value, CsvTable)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let manifest = first
        .strip_prefix(MANIFEST_PREFIX)
        .ok_or_else(|| Error::InvalidModel("missing manifest line".into()))?;
    let manifest: Value = serde_json::from_str(manifest.trim_end())?;
    let mut csv = csv::Reader::from_reader(r);
    let header = csv.headers().map_err(std::io::Error::from)?.iter().map(String::from).collect();
    let mut table = CsvTable { header, rows: Vec::new() };
    for rec in csv.records() {
        table.rows.push(rec.map_err(std::io::Error::from)?.iter().map(String::from).collect());
    }
    Ok((manifest, table))
}

/// Non-zero entries `(m, n, re, im)` of the active block.
pub fn hessenberg_table(h: &HessenbergMatrix) -> CsvTable {
    let a = h.active();
    let mut t = CsvTable::new(["m", "n", "re", "im"]);
    for n in 0..a.ncols() {
        for m in 0..a.nrows() {
            let z = a[(m, n)];
            if z.re != 0.0 || z.im != 0.0 {
                t.push([m.to_string(), n.to_string(), fmt(z.re), fmt(z.im)]);
            }
        }
    }
    t
}

pub fn hessenberg_json(h: &HessenbergMatrix) -> Value {
    let a = h.active();
    let rows: Vec<Vec<[f64; 2]>> =
        (0..a.nrows()).map(|m| (0..a.ncols()).map(|n| [a[(m, n)].re, a[(m, n)].im]).collect()).collect();
    json!({
        "basis_dim": h.basis_dim,
        "residual": h.residual,
        "reorth": h.reorth,
        "breakdown": h.breakdown,
        "h": rows,
    })
}

pub fn write_operator_jsonl(path: impl AsRef<Path>, o: &OperatorVector) -> Result<()> {
    std::fs::write(path, o.to_jsonl())?;
    Ok(())
}

/// Shortest round-trip decimal form.
pub fn fmt(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let mut t = CsvTable::new(["t", "K"]);
        t.push([fmt(0.0), fmt(0.1)]);
        t.push([fmt(1.0), fmt(1.0 / 3.0)]);
        let manifest = stamp(json!({"u": 0.1, "seed": 7}));
        t.write_file(&path, &manifest).unwrap();
        let (m, back) = read_csv(&path).unwrap();
        assert_eq!(m, manifest);
        assert_eq!(back.header, t.header);
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.rows[1][1].parse::<f64>().unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn hessenberg_entries() {
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 0)] = Complex64::new(0.0, 0.5);
        h[(1, 0)] = Complex64::new(2.0, 0.0);
        let hm = HessenbergMatrix { h, basis_dim: 3, residual: 0.0, reorth: true, breakdown: None };
        let t = hessenberg_table(&hm);
        assert_eq!(t.rows, vec![vec!["0", "0", "0.0", "0.5"], vec!["1", "0", "2.0", "0.0"]]);
        assert_eq!(hessenberg_json(&hm)["h"][1][0], json!([2.0, 0.0]));
    }
}
