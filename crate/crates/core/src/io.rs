//! Plain-text output: legacy VTK scalar snapshots and CSV tables.
//!
//! Floats are written with 17 significant digits so values round-trip.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::direct_solver::TensorMesh;
use crate::error::{Error, Result};
use crate::tensor_ops::Grid3;

/// `{:.16e}`: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `field` as legacy ASCII `STRUCTURED_POINTS`. GLL nodes are not
/// equispaced, so origin and spacing are nominal (first node, mean gap);
/// the point data is the exact nodal field in x-fastest order.
pub fn write_vtk(path: &Path, name: &str, title: &str, mesh: &TensorMesh, field: &Grid3) -> Result<()> {
    field.check_dims(mesh.dims())?;
    let dims = field.dims();
    let mut origin = [0.0; 3];
    let mut spacing = [1.0; 3];
    for (d, op) in mesh.ops().iter().enumerate() {
        let n = &op.nodes;
        origin[d] = n[0];
        if n.len() > 1 {
            spacing[d] = (n[n.len() - 1] - n[0]) / (n.len() - 1) as f64;
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.replace('\n', " "))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "ORIGIN {} {} {}", fmt_f64(origin[0]), fmt_f64(origin[1]), fmt_f64(origin[2]))?;
    writeln!(w, "SPACING {} {} {}", fmt_f64(spacing[0]), fmt_f64(spacing[1]), fmt_f64(spacing[2]))?;
    writeln!(w, "POINT_DATA {}", field.len())?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for row in field.as_slice().chunks(dims[0].max(1)) {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Dimensions and scalar values of a legacy ASCII `STRUCTURED_POINTS` file.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkScalars {
    pub dims: [usize; 3],
    pub name: String,
    pub values: Vec<f64>,
}

/// Minimal reader for files produced by [`write_vtk`].
pub fn read_vtk(path: &Path) -> Result<VtkScalars> {
    let bad = |m: &str| Error::Config(format!("{}: {m}", path.display()));
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("unexpected end of file"))?.map_err(Error::from) };
    if !next()?.starts_with("# vtk DataFile") {
        return Err(bad("missing vtk header"));
    }
    let _title = next()?;
    if next()?.trim() != "ASCII" {
        return Err(bad("only ASCII files are supported"));
    }
    if next()?.trim() != "DATASET STRUCTURED_POINTS" {
        return Err(bad("expected DATASET STRUCTURED_POINTS"));
    }
    let mut dims = None;
    let mut count = None;
    let mut name = None;
    loop {
        let line = next()?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("DIMENSIONS") => {
                let v: Vec<usize> = it.map(|s| s.parse().map_err(|_| bad("bad DIMENSIONS"))).collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(bad("DIMENSIONS needs three values"));
                }
                dims = Some([v[0], v[1], v[2]]);
            }
            Some("POINT_DATA") => {
                count = Some(it.next().and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| bad("bad POINT_DATA"))?);
            }
            Some("SCALARS") => name = it.next().map(str::to_owned),
            Some("LOOKUP_TABLE") => break,
            _ => {}
        }
    }
    let dims = dims.ok_or_else(|| bad("missing DIMENSIONS"))?;
    let count = count.ok_or_else(|| bad("missing POINT_DATA"))?;
    if count != dims.iter().product::<usize>() {
        return Err(bad("POINT_DATA does not match DIMENSIONS"));
    }
    let mut values = Vec::with_capacity(count);
    for line in lines {
        for tok in line?.split_whitespace() {
            values.push(tok.parse::<f64>().map_err(|_| bad("bad scalar value"))?);
        }
    }
    if values.len() != count {
        return Err(bad(&format!("expected {count} values, found {}", values.len())));
    }
    Ok(VtkScalars {
        dims,
        name: name.ok_or_else(|| bad("missing SCALARS"))?,
        values,
    })
}

/// A CSV cell: integers print as-is, floats with 17 significant digits,
/// missing values as an empty field.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

/// A header plus rows, written with the `csv` crate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("csv output is utf-8")
    }
}
