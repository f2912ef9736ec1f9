//! Flat string table behind both the CSV writer and the plotter.
//!
//! Floats are written with Rust's shortest round-trip `{:e}` rendering, so
//! parsing a cell gives back the exact f64. Missing values are empty cells.

use std::path::Path;

use super::sweep::{SweepResult, SweepRow};
use crate::error::{Error, Result};
use crate::simulator::Stat;

pub const COLUMNS: &[&str] = &[
    "scenario",
    "phi",
    "psi",
    "gamma",
    "lambda",
    "c",
    "t",
    "phi_realized",
    "psi_realized",
    "n",
    "d",
    "m",
    "sigma1_sq",
    "sigma2_sq",
    "seed",
    "th_r1j",
    "th_r2j",
    "th_r1s",
    "th_r2s",
    "th_odd",
    "th_edd",
    "th_add",
    "mc_replicates",
    "mc_r1j_mean",
    "mc_r1j_std",
    "mc_r2j_mean",
    "mc_r2j_std",
    "mc_r1s_mean",
    "mc_r1s_std",
    "mc_r2s_mean",
    "mc_r2s_std",
    "mc_odd_mean",
    "mc_odd_std",
    "mc_edd_mean",
    "mc_edd_std",
    "mc_add",
    "residual",
    "iters",
    "flags",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn row_cells(scenario: &str, r: &SweepRow) -> Vec<String> {
    let mut out = vec![
        scenario.to_string(),
        fmt_f64(r.phi),
        fmt_f64(r.psi),
        fmt_f64(r.psi / r.phi),
        fmt_f64(r.lambda),
        opt(r.c),
        fmt_f64(1.0 / r.lambda),
        fmt_f64(r.phi_realized),
        fmt_f64(r.psi_realized),
        r.n.to_string(),
        r.d.to_string(),
        r.m.to_string(),
        fmt_f64(r.sigma1_sq),
        fmt_f64(r.sigma2_sq),
        r.seed.to_string(),
    ];
    match &r.theory {
        Some(t) => {
            for x in [t.r1_joint.total, t.r2_joint.total, t.r1_sep.total, t.r2_sep.total, t.metrics.odd, t.metrics.edd] {
                out.push(fmt_f64(x));
            }
            out.push(opt(t.metrics.add));
        }
        None => out.extend(std::iter::repeat(String::new()).take(7)),
    }
    match &r.empirical {
        Some(e) => {
            out.push(e.replicates.len().to_string());
            let ms = |s: &Stat| [fmt_f64(s.mean), fmt_f64(s.std)];
            for s in [&e.r1_joint, &e.r2_joint, &e.r1_sep, &e.r2_sep] {
                out.extend(ms(s));
            }
            // Disparities of the mean risks, with the spread of the signed
            // per-replicate differences.
            out.push(fmt_f64(e.signed_odd.mean.abs()));
            out.push(fmt_f64(e.signed_odd.std));
            out.push(fmt_f64(e.signed_edd.mean.abs()));
            out.push(fmt_f64(e.signed_edd.std));
            out.push(opt(e.add_of_means));
        }
        None => out.extend(std::iter::repeat(String::new()).take(14)),
    }
    out.push(opt(r.residual));
    out.push(r.iters.map(|i| i.to_string()).unwrap_or_default());
    out.push(r.flags.join("; "));
    debug_assert_eq!(out.len(), COLUMNS.len());
    out
}

impl Table {
    pub fn from_sweep(result: &SweepResult) -> Table {
        let name = result.scenario.name();
        Table {
            header: COLUMNS.iter().map(|s| s.to_string()).collect(),
            rows: result.rows.iter().map(|r| row_cells(name, r)).collect(),
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Plot(format!("no column `{name}`")))
    }

    /// Numeric view of a column; empty or unparsable cells are `None`.
    pub fn column(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.get(k).and_then(|s| s.parse::<f64>().ok())).collect())
    }

    pub fn text_column(&self, name: &str) -> Result<Vec<&str>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r.get(k).map(String::as_str).unwrap_or("")).collect())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_bytes()?)?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Table> {
        let mut rd = csv::Reader::from_path(path)?;
        let header = rd.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            rows.push(rec?.iter().map(str::to_string).collect());
        }
        Ok(Table { header, rows })
    }
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    Table::from_sweep(result).write_csv(path)
}
