use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use cansub::format::{cansub_json, module_to_string, parse_module, parse_rational, puiseux_json, ModuleJson};
use cansub::report::{exit_code, report_json, EXIT_ENGINE, EXIT_INVALID, EXIT_PASS};
use cansub::sweep::{run_sweep, write_csv, SweepGrid};
use cansub_core::points::{enumerate_points, lower_breaks, restriction_kernel, DEFAULT_MAX_H};
use cansub_core::rational::fmt_q;
use cansub_core::verify::verify_instance_with_clock;
use cansub_core::{gen_bt1, solve_canonical, Error, FieldRegistry, GenSpec, KisinModule, PointOptions, SampleGrid};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "cansub", version, about = "Canonical subgroups of mod-p Kisin modules")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Generate a BT1 module with prescribed invariants.
    Gen(Common),
    /// Elementary divisors, dimension, degree and Hodge height.
    Invariants(Common),
    /// Solve for the canonical submodule.
    Cansub(Common),
    /// The dual module.
    Dual(Common),
    /// Enumerate points as Puiseux series.
    Points(Common),
    /// Lower ramification breaks of the module and its dual.
    Ramify(Common),
    /// Check every clause of the theorem.
    Verify(Common),
    /// Run a grid of generated modules and write CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct Common {
    /// Module JSON file (`-` for stdin); generated from the flags when absent.
    input: Option<PathBuf>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    e: Option<usize>,
    #[arg(long, default_value_t = 2)]
    h: usize,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value = "0")]
    w: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// u-adic precision; defaults to 24 e.
    #[arg(long)]
    precision: Option<usize>,
    #[arg(long)]
    triangular: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_H)]
    max_h_points: usize,
    /// Write JSON here instead of stdout.
    #[arg(short = 'o', long = "json")]
    out: Option<PathBuf>,
    /// Also write breaks as CSV rows (ramify).
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated lists; an empty list gives an empty grid.
    #[arg(long, default_value = "3")]
    p: String,
    #[arg(long, default_value = "1")]
    m: String,
    #[arg(long, default_value = "4")]
    e: String,
    #[arg(long, default_value = "2")]
    h: String,
    #[arg(long, default_value = "1")]
    d: String,
    #[arg(long, default_value = "0")]
    w: String,
    #[arg(long, default_value = "0")]
    seed: String,
    #[arg(long, default_value_t = 64)]
    precision: usize,
    #[arg(long)]
    triangular: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_H)]
    max_h_points: usize,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn list<T>(s: &str, parse: impl Fn(&str) -> anyhow::Result<T>) -> anyhow::Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(parse).collect()
}

fn num<T: std::str::FromStr>(t: &str) -> anyhow::Result<T> {
    t.parse().map_err(|_| anyhow::anyhow!("not a number: {t:?}"))
}

impl Common {
    fn spec(&self) -> anyhow::Result<GenSpec> {
        let (Some(p), Some(e)) = (self.p, self.e) else {
            bail!("give a module file or at least --p and --e");
        };
        Ok(GenSpec {
            p,
            m: self.m,
            e,
            h: self.h,
            d: self.d,
            w: parse_rational(&self.w)?,
            seed: self.seed,
            precision: self.precision.unwrap_or(24 * e),
            triangular_hint: self.triangular,
        })
    }

    fn module(&self) -> anyhow::Result<KisinModule> {
        match &self.input {
            Some(path) => {
                let text = if path.as_os_str() == "-" {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s)?;
                    s
                } else {
                    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
                };
                let m = parse_module(&text)?;
                Ok(match self.precision {
                    Some(n) if n < m.prec() => m.truncate(n),
                    _ => m,
                })
            }
            None => Ok(gen_bt1(&self.spec()?)?),
        }
    }

    fn point_options(&self) -> PointOptions {
        PointOptions { max_h: self.max_h_points, ..PointOptions::default() }
    }

    fn emit(&self, text: &str) -> anyhow::Result<()> {
        match &self.out {
            Some(path) => fs::write(path, format!("{text}\n")).with_context(|| format!("writing {}", path.display())),
            None => {
                let mut out = io::stdout().lock();
                writeln!(out, "{text}")?;
                Ok(())
            }
        }
    }

    fn emit_json(&self, v: &Value) -> anyhow::Result<()> {
        self.emit(&serde_json::to_string_pretty(v)?)
    }
}

fn sha(m: &KisinModule) -> String {
    ModuleJson::from_module(m).sha256()
}

fn invariants(c: &Common) -> anyhow::Result<i32> {
    let m = c.module()?;
    let divisors = m.elementary_divisors()?;
    let (ok, d) = m.validate_bt1()?;
    let w = if ok { Some(fmt_q(&m.hodge_height()?)) } else { None };
    c.emit_json(&json!({
        "module_sha256": sha(&m),
        "p": m.p(),
        "m": m.field().degree(),
        "e": m.e(),
        "h": m.h(),
        "precision": m.prec(),
        "elementary_divisors": divisors,
        "bt1": ok,
        "d": d,
        "degree": fmt_q(&m.degree()?),
        "degree_from_divisors": fmt_q(&m.degree_from_divisors()?),
        "w": w,
    }))?;
    Ok(EXIT_PASS)
}

fn points(c: &Common) -> anyhow::Result<i32> {
    let m = c.module()?;
    let mut reg = FieldRegistry::new(m.field().clone());
    let ps = enumerate_points(&m, &c.point_options(), &mut reg)?;
    let rep = lower_breaks(&ps)?;
    let basis: Vec<Value> = ps.basis.iter().map(|x| Value::Array(x.iter().map(puiseux_json).collect())).collect();
    let pts: Vec<Value> = (0..ps.len())
        .map(|i| json!({ "coords": ps.coords(i), "break": rep.point_breaks[i].as_ref().map(fmt_q) }))
        .collect();
    let segments: Vec<Value> =
        ps.segments.iter().map(|s| json!({ "from": s.a, "to": s.b, "slope": fmt_q(&s.val) })).collect();
    c.emit_json(&json!({
        "module_sha256": sha(&m),
        "count": ps.len(),
        "point_field_poly": reg.top().modulus(),
        "functional": ps.functional,
        "segments": segments,
        "basis": basis,
        "basis_prec": ps.basis_prec.iter().map(fmt_q).collect::<Vec<_>>(),
        "residual_prec": ps.residual_prec.iter().map(fmt_q).collect::<Vec<_>>(),
        "points": pts,
    }))?;
    Ok(EXIT_PASS)
}

fn breaks_json(b: &[(cansub_core::Q, usize)]) -> Value {
    Value::Array(b.iter().map(|(v, n)| json!([fmt_q(v), n])).collect())
}

fn ramify(c: &Common) -> anyhow::Result<i32> {
    let m = c.module()?;
    let opts = c.point_options();
    let mut reg = FieldRegistry::new(m.field().clone());
    let ps = enumerate_points(&m, &opts, &mut reg)?;
    let rep = lower_breaks(&ps)?;
    let dual = m.dual()?;
    let mut dreg = FieldRegistry::new(dual.field().clone());
    let dps = enumerate_points(&dual, &opts, &mut dreg)?;
    let drep = lower_breaks(&dps)?;
    let w = m.hodge_height()?;
    let canonical = match solve_canonical(&m) {
        Ok(res) => {
            let ker = restriction_kernel(&ps, &res.l_orig, &reg)?;
            let b = ker.iter().filter_map(|&i| rep.point_breaks[i]).min();
            json!({ "order": ker.len(), "points": ker, "break": b.as_ref().map(fmt_q) })
        }
        Err(e) => json!({ "error": e.to_string() }),
    };
    if let Some(path) = &c.csv {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["w", "break", "multiplicity"])?;
        for (v, n) in &rep.breaks {
            wtr.write_record([fmt_q(&w), fmt_q(v), n.to_string()])?;
        }
        wtr.flush()?;
    }
    c.emit_json(&json!({
        "module_sha256": sha(&m),
        "w": fmt_q(&w),
        "breaks": breaks_json(&rep.breaks),
        "dual_breaks": breaks_json(&drep.breaks),
        "canonical": canonical,
    }))?;
    Ok(EXIT_PASS)
}

fn verify(c: &Common) -> anyhow::Result<i32> {
    let m = c.module()?;
    let grid = SampleGrid { point_options: c.point_options(), ..SampleGrid::default() };
    let start = Instant::now();
    let clock = move || start.elapsed().as_millis() as u64;
    let report = verify_instance_with_clock(&m, &grid, &clock)?;
    c.emit_json(&report_json(&report, &sha(&m)))?;
    Ok(exit_code(&report))
}

fn sweep(a: &SweepArgs) -> anyhow::Result<i32> {
    let grid = SweepGrid {
        p: list(&a.p, num)?,
        m: list(&a.m, num)?,
        e: list(&a.e, num)?,
        h: list(&a.h, num)?,
        d: list(&a.d, num)?,
        w: list(&a.w, parse_rational)?,
        seeds: list(&a.seed, num)?,
        precision: a.precision,
        triangular_hint: a.triangular,
        max_h_points: a.max_h_points,
    };
    let rows = run_sweep(&grid);
    match &a.csv {
        Some(path) => write_csv(&rows, fs::File::create(path)?)?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    let failed = rows.iter().any(|r| r[9] == "false" && r[8] == "true");
    let errored = rows.iter().any(|r| r[9] == "errored");
    Ok(if failed { 1 } else if errored { EXIT_ENGINE } else { EXIT_PASS })
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match &cli.verb {
        Verb::Gen(c) => {
            let m = gen_bt1(&c.spec()?)?;
            c.emit(&module_to_string(&m))?;
            Ok(EXIT_PASS)
        }
        Verb::Invariants(c) => invariants(c),
        Verb::Cansub(c) => {
            let m = c.module()?;
            let res = solve_canonical(&m)?;
            let mut v = cansub_json(&res);
            v["module_sha256"] = json!(sha(&m));
            c.emit_json(&v)?;
            Ok(EXIT_PASS)
        }
        Verb::Dual(c) => {
            let m = c.module()?;
            c.emit(&module_to_string(&m.dual()?))?;
            Ok(EXIT_PASS)
        }
        Verb::Points(c) => points(c),
        Verb::Ramify(c) => ramify(c),
        Verb::Verify(c) => verify(c),
        Verb::Sweep(a) => sweep(a),
    }
}

/// Invalid input is anything rejected before the engine runs.
fn classify(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidInput(_) | Error::NotBT1 | Error::HodgeTooLarge) => EXIT_INVALID,
        Some(_) => EXIT_ENGINE,
        None => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            classify(&err)
        }
    };
    ExitCode::from(code as u8)
}
