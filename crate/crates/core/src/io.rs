//! Result files. Every CSV starts with a `# config_hash=..., seed=...` line;
//! floats are written in shortest round-trip exponent form so that identical
//! runs give identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::eigensolver::SingularTriplet;
use crate::error::{Error, Result};
use crate::mesh::FunctionSpace;
use crate::verification::TaylorReport;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn comment(&self) -> String {
        format!("# config_hash={}, seed={}", self.config_hash, self.seed)
    }
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

fn csv_writer(path: &Path, prov: &Provenance) -> Result<csv::Writer<BufWriter<File>>> {
    let mut file = BufWriter::new(File::create(path)?);
    writeln!(file, "{}", prov.comment())?;
    Ok(csv::Writer::from_writer(file))
}

/// `index, sigma, residual`, one row per triplet.
pub fn write_triplets(path: &Path, prov: &Provenance, triplets: &[SingularTriplet]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["index", "sigma", "residual"])?;
    for (i, t) in triplets.iter().enumerate() {
        w.write_record([i.to_string(), num(t.sigma), num(t.residual)])?;
    }
    w.flush()?;
    Ok(())
}

fn component_header(space: &FunctionSpace) -> Vec<String> {
    let mut h = vec!["x".to_string()];
    h.extend((0..space.components()).map(|c| format!("c{c}")));
    h
}

/// Node coordinate followed by one column per component.
pub fn write_vector(path: &Path, prov: &Provenance, space: &FunctionSpace, values: &[f64]) -> Result<()> {
    if values.len() != space.dof_count() {
        return Err(Error::DimensionMismatch {
            expected: space.dof_count(),
            got: values.len(),
            context: "vector file",
        });
    }
    let mut w = csv_writer(path, prov)?;
    w.write_record(component_header(space))?;
    for node in 0..space.node_count() {
        let mut row = vec![num(space.node_coordinate(node))];
        row.extend((0..space.components()).map(|c| num(values[space.dof(node, c)])));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_vector`]: dof values in space order.
pub fn read_vector(path: &Path, space: &FunctionSpace) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let mut values = Vec::with_capacity(space.dof_count());
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != space.components() + 1 {
            return Err(Error::DimensionMismatch {
                expected: space.components() + 1,
                got: rec.len(),
                context: "columns in vector file",
            });
        }
        for field in rec.iter().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{}: row {}: `{field}` is not a number", path.display(), line + 1)))?;
            values.push(v);
        }
    }
    if values.len() != space.dof_count() {
        return Err(Error::DimensionMismatch {
            expected: space.dof_count(),
            got: values.len(),
            context: "values in vector file",
        });
    }
    Ok(values)
}

/// `step, t, x, c0, ...` for every node of every stored state.
pub fn write_states(path: &Path, prov: &Provenance, space: &FunctionSpace, dt: f64, states: &[Vec<f64>]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(component_header(space));
    w.write_record(header)?;
    for (k, s) in states.iter().enumerate() {
        for node in 0..space.node_count() {
            let mut row = vec![k.to_string(), num(k as f64 * dt), num(space.node_coordinate(node))];
            row.extend((0..space.components()).map(|c| num(s[space.dof(node, c)])));
            w.write_record(row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `t, ratio`.
pub fn write_growth_curve(path: &Path, prov: &Provenance, curve: &[(f64, f64)]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(["t", "ratio"])?;
    for (t, g) in curve {
        w.write_record([num(*t), num(*g)])?;
    }
    w.flush()?;
    Ok(())
}

/// One block of rows per gradient mode.
pub fn write_taylor_reports(path: &Path, prov: &Provenance, reports: &[TaylorReport]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record([
        "mode",
        "h",
        "remainder_first",
        "order_first",
        "remainder_corrected",
        "order_corrected",
        "at_floor",
    ])?;
    for r in reports {
        let mode = match r.mode {
            crate::tape::GradientMode::Tlm => "tlm",
            crate::tape::GradientMode::Adjoint => "adjoint",
        };
        for k in 0..r.h_values.len() {
            let order = |v: &[f64]| if k == 0 { String::new() } else { num(v[k - 1]) };
            w.write_record([
                mode.to_string(),
                num(r.h_values[k]),
                num(r.remainders_first[k]),
                order(&r.orders_first),
                num(r.remainders_corrected[k]),
                order(&r.orders_corrected),
                r.at_floor[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Plain CSV with a header, for informational tables.
pub fn write_table(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path, prov)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut file, value)?;
    writeln!(file)?;
    file.flush()?;
    Ok(())
}
