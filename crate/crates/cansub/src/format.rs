//! Module JSON and the JSON shapes of derived objects.
//!
//! A series is a list of `[exponent, [c_0, .., c_{m-1}]]` pairs with
//! nonzero coefficients in increasing exponent order; a coefficient lists
//! its coordinates in the power basis of `field_poly`.

use std::sync::Arc;

use anyhow::{bail, ensure, Context};
use cansub_core::rational::fmt_q;
use cansub_core::{CanSubResult, Fe, Field, KisinModule, PuiseuxSeries, SeriesMatrix, TruncSeries};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub type SeriesJson = Vec<(usize, Vec<u32>)>;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleJson {
    pub p: u32,
    pub field_degree: usize,
    pub field_poly: Vec<u32>,
    pub e: usize,
    pub cbar0: Vec<u32>,
    pub h: usize,
    pub precision: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<SeriesJson>>,
}

fn coords(field: &Field, c: &Fe) -> Vec<u32> {
    let mut v = c.to_vec();
    v.resize(field.degree(), 0);
    v
}

pub fn series_json(s: &TruncSeries) -> SeriesJson {
    s.terms().map(|(k, c)| (k, coords(s.field(), c))).collect()
}

pub fn matrix_json(m: &SeriesMatrix) -> Vec<Vec<SeriesJson>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| series_json(m.get(i, j))).collect()).collect()
}

fn matrix_value(m: &SeriesMatrix) -> Value {
    json!({ "precision": m.prec(), "entries": matrix_json(m) })
}

pub fn puiseux_json(s: &PuiseuxSeries) -> Value {
    let terms: Vec<Value> = s.terms().map(|(r, c)| json!([fmt_q(r), coords(s.field(), c)])).collect();
    json!({ "precision": fmt_q(&s.prec()), "terms": terms })
}

impl ModuleJson {
    pub fn from_module(m: &KisinModule) -> Self {
        let f = m.field();
        ModuleJson {
            p: f.p(),
            field_degree: f.degree(),
            field_poly: f.modulus().to_vec(),
            e: m.e(),
            cbar0: coords(f, m.cbar0()),
            h: m.h(),
            precision: m.prec(),
            a: matrix_json(m.matrix()),
        }
    }

    /// Validates the schema and builds the module; any failure here is
    /// invalid input.
    pub fn to_module(&self) -> anyhow::Result<KisinModule> {
        ensure!(self.field_poly.len() == self.field_degree + 1, "field_poly must have field_degree + 1 entries");
        let field = Arc::new(Field::new(self.p, &self.field_poly)?);
        ensure!(self.precision > 0, "precision must be positive");
        ensure!(self.a.len() == self.h, "A must have h rows");
        let mut entries = Vec::with_capacity(self.h * self.h);
        for row in &self.a {
            ensure!(row.len() == self.h, "A must have h columns");
            for s in row {
                let mut terms = Vec::with_capacity(s.len());
                let mut last = None;
                for (k, c) in s {
                    ensure!(*k < self.precision, "exponent {k} not below precision {}", self.precision);
                    ensure!(last.map_or(true, |l| l < *k), "exponents must be strictly increasing");
                    last = Some(*k);
                    terms.push((*k, field.from_coords(c)?));
                }
                entries.push(TruncSeries::from_terms(&field, &terms, self.precision));
            }
        }
        let cbar0 = field.from_coords(&self.cbar0)?;
        let a = SeriesMatrix::new(&field, self.h, self.h, entries);
        Ok(KisinModule::new(&field, self.e, cbar0, a)?)
    }

    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("module JSON serializes")
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_bytes()))
    }
}

pub fn parse_module(text: &str) -> anyhow::Result<KisinModule> {
    let j: ModuleJson = serde_json::from_str(text).context("malformed module JSON")?;
    j.to_module()
}

pub fn module_to_string(m: &KisinModule) -> String {
    String::from_utf8(ModuleJson::from_module(m).canonical_bytes()).expect("JSON is UTF-8")
}

pub fn cansub_json(res: &CanSubResult) -> Value {
    json!({
        "w": fmt_q(&res.w),
        "ew": res.ew,
        "B": matrix_value(&res.b),
        "D": matrix_value(&res.d_matrix),
        "L_basis": matrix_value(&res.l_basis),
        "L_orig": matrix_value(&res.l_orig),
        "N": matrix_value(&res.n_matrix),
        "U": matrix_value(&res.adapted.u),
        "iterations": res.iterations,
        "residual_val": res.residual_val,
        "stability_val": res.stability_val,
        "certified_prec": res.certified_prec,
    })
}

/// Parses `a/b` or an integer into a rational.
pub fn parse_rational(s: &str) -> anyhow::Result<cansub_core::Q> {
    match cansub_core::rational::parse_q(s.trim()) {
        Ok(q) => Ok(q),
        Err(_) => bail!("not a rational number: {s:?}"),
    }
}
