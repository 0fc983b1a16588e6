//! Parameter sweeps: one CSV row per (spec, clause).

use std::io::Write;

use cansub_core::rational::fmt_q;
use cansub_core::{gen_bt1, verify_instance, GenSpec, KisinModule, SampleGrid, VerifyReport, Q};
use rayon::prelude::*;

use crate::report::{clause_columns, pass_cell};

pub const HEADER: [&str; 12] = ["p", "m", "e", "h", "d", "w", "seed", "clause", "applicable", "pass", "value", "expected"];

#[derive(Clone, Debug, Default)]
pub struct SweepGrid {
    pub p: Vec<u32>,
    pub m: Vec<usize>,
    pub e: Vec<usize>,
    pub h: Vec<usize>,
    pub d: Vec<usize>,
    pub w: Vec<Q>,
    pub seeds: Vec<u64>,
    pub precision: usize,
    pub triangular_hint: bool,
    pub max_h_points: usize,
}

impl SweepGrid {
    /// Valid specs in lexicographic order of `(p, m, e, h, d, w, seed)`;
    /// combinations rejected by `GenSpec::validate` are dropped.
    pub fn specs(&self) -> Vec<GenSpec> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &m in &self.m {
                for &e in &self.e {
                    for &h in &self.h {
                        for &d in &self.d {
                            for &w in &self.w {
                                for &seed in &self.seeds {
                                    let spec = GenSpec {
                                        p,
                                        m,
                                        e,
                                        h,
                                        d,
                                        w,
                                        seed,
                                        precision: self.precision,
                                        triangular_hint: self.triangular_hint,
                                    };
                                    if spec.validate().is_ok() {
                                        out.push(spec);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub type Row = [String; 12];

fn row(spec: &GenSpec, clause: &str, applicable: bool, pass: &str, value: String, expected: String) -> Row {
    [
        spec.p.to_string(),
        spec.m.to_string(),
        spec.e.to_string(),
        spec.h.to_string(),
        spec.d.to_string(),
        fmt_q(&spec.w),
        spec.seed.to_string(),
        clause.into(),
        applicable.to_string(),
        pass.into(),
        value,
        expected,
    ]
}

fn invariants_row(spec: &GenSpec, m: &KisinModule) -> Row {
    let measured = (|| -> cansub_core::Result<(bool, usize, Q, Q)> {
        let (ok, d) = m.validate_bt1()?;
        Ok((ok, d, m.degree()?, m.hodge_height()?))
    })();
    match measured {
        Ok((ok, d, degree, w)) => {
            let pass = ok && d == spec.d && degree == Q::from_integer(spec.d as i128) && w == spec.w;
            row(spec, "invariants", true, if pass { "true" } else { "false" }, fmt_q(&w), fmt_q(&spec.w))
        }
        Err(e) => row(spec, "invariants", true, "errored", e.to_string(), String::new()),
    }
}

/// Rows of one isolated entry; engine errors become an errored row.
pub fn entry_rows(spec: &GenSpec, grid: &SampleGrid) -> Vec<Row> {
    let m = match gen_bt1(spec) {
        Ok(m) => m,
        Err(e) => return vec![row(spec, "gen", true, "errored", e.to_string(), String::new())],
    };
    let mut rows = vec![invariants_row(spec, &m)];
    match verify_instance(&m, grid) {
        Ok(report) => rows.extend(report_rows(spec, &report)),
        Err(e) => rows.push(row(spec, "verify", true, "errored", e.to_string(), String::new())),
    }
    rows
}

fn report_rows(spec: &GenSpec, r: &VerifyReport) -> Vec<Row> {
    r.clauses
        .iter()
        .map(|c| {
            let (value, expected) = clause_columns(c, r);
            row(spec, &c.name, c.applicable, pass_cell(c), value, expected)
        })
        .collect()
}

/// Entries run in parallel; rows are assembled in spec order.
pub fn run_sweep(grid: &SweepGrid) -> Vec<Row> {
    let mut sample = SampleGrid::default();
    sample.point_options.max_h = grid.max_h_points;
    let specs = grid.specs();
    let per_entry: Vec<Vec<Row>> = specs.par_iter().map(|s| entry_rows(s, &sample)).collect();
    per_entry.into_iter().flatten().collect()
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
