//! Loaded-Q1 T1 tables as CSV with columns `g1_mhz, detuning_mhz, t1_ns`.
//! Frequencies are f/2π. An infinite lifetime is written `inf`.

use std::path::{Path, PathBuf};

use qlink_core::circuit::T1Table;
use qlink_core::units::{mhz, to_mhz};

use crate::bundle::{num, Table};
use crate::error::{HarnessError, Result};

pub fn write_t1_table(path: &Path, table: &T1Table) -> Result<PathBuf> {
    let header = ["g1_mhz", "detuning_mhz", "t1_ns"].map(String::from);
    let mut t = Table::create(path, &header)?;
    for (i, &g) in table.couplings().iter().enumerate() {
        for (j, &d) in table.detunings().iter().enumerate() {
            t.row([num(to_mhz(g)), num(to_mhz(d)), num(table.node(i, j))])?;
        }
    }
    t.finish()
}

/// Reads a table written by [`write_t1_table`]. Rows may come in any order
/// but must cover the full coupling × detuning grid exactly once.
pub fn read_t1_table(path: &Path) -> Result<T1Table> {
    let origin = path.display().to_string();
    let bad = |msg: String| HarnessError::config(origin.clone(), msg);
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col =
        |name: &str| headers.iter().position(|h| h.trim() == name).ok_or_else(|| bad(format!("missing column {name}")));
    let (ig, id, it) = (col("g1_mhz")?, col("detuning_mhz")?, col("t1_ns")?);
    let mut cells = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<f64>().map_err(|_| bad(format!("row {}: {:?} is not a number", k + 2, s)))
        };
        cells.push((field(ig)?, field(id)?, field(it)?));
    }
    let mut gs: Vec<f64> = cells.iter().map(|c| c.0).collect();
    let mut ds: Vec<f64> = cells.iter().map(|c| c.1).collect();
    for v in [&mut gs, &mut ds] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    if gs.len() * ds.len() != cells.len() {
        return Err(bad(format!("{} rows do not form a {}×{} grid", cells.len(), gs.len(), ds.len())));
    }
    let mut values = vec![f64::NAN; cells.len()];
    for (g, d, t) in cells {
        let i = gs.iter().position(|&x| x == g).unwrap_or_default();
        let j = ds.iter().position(|&x| x == d).unwrap_or_default();
        let slot = &mut values[i * ds.len() + j];
        if !slot.is_nan() {
            return Err(bad(format!("duplicate cell g1 = {g} MHz, detuning = {d} MHz")));
        }
        *slot = t;
    }
    let couplings = gs.into_iter().map(mhz).collect();
    let detunings = ds.into_iter().map(mhz).collect();
    T1Table::from_parts(couplings, detunings, values).map_err(|e| bad(e.to_string()))
}
