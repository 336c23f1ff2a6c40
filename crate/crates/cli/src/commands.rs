use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use heunc::reference::{
    check_point, identity_case, in_exclusion_zone, summarize, CaseSummary, GridSpec, PointOutcome, Thresholds,
};
use heunc::{evaluate, evaluate_with_trace, EvalQuad, HeunError};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::args::{EvalArgs, Format, GridArgs, Range, VerifyArgs};

pub const CSV_HEADER: &str = "re,im,f_re,f_im,df_re,df_im,err,n_terms,status";

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Evaluation(HeunError),
    Io(String, io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Evaluation(_) | Failure::Io(..) => 1,
        }
    }

    pub fn to_json(&self) -> Value {
        let body = match self {
            Failure::Usage(msg) => json!({ "kind": "usage", "message": msg.trim_end() }),
            Failure::Io(path, e) => json!({ "kind": "io", "message": format!("{path}: {e}") }),
            Failure::Evaluation(e) => {
                let mut body = json!({
                    "kind": "evaluation",
                    "message": e.to_string(),
                    "cause": e.root().to_string(),
                });
                if let HeunError::Dispatch { region, module, .. } = e {
                    body["region"] = json!(format!("{region:?}"));
                    body["module"] = json!(module);
                }
                if let Some(hop) = e.hop() {
                    body["hop"] = json!(hop);
                }
                body
            }
        };
        json!({ "error": body })
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn pair(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn eval(a: &EvalArgs) -> Result<ExitCode, Failure> {
    let params = a.params.params().map_err(|e| usage(e.to_string()))?;
    let cfg = a.config.config().map_err(usage)?;
    let (q, trace, record) = evaluate_with_trace(a.kind, &params, a.z, &cfg, a.config.improvements())
        .map_err(Failure::Evaluation)?;
    let out = json!({
        "f": pair(q.f),
        "df": pair(q.df),
        "err": q.r,
        "n_terms": q.n_terms,
        "dispatch": record.module,
        "region": format!("{:?}", record.region),
        "steps": trace.steps,
    });
    println!("{out}");
    Ok(ExitCode::SUCCESS)
}

fn grid_spec(re: Range, im: Range, offset: Complex64) -> Result<GridSpec, Failure> {
    for (axis, r) in [("re", re), ("im", im)] {
        if r.count < 2 {
            return Err(usage(format!("--{axis} needs at least 2 points, got {}", r.count)));
        }
        if r.min > r.max {
            return Err(usage(format!("--{axis} has min {} above max {}", r.min, r.max)));
        }
    }
    Ok(GridSpec {
        re: (re.min, re.max, re.count),
        im: (im.min, im.max, im.count),
        offset,
    })
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Io(p.display().to_string(), e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

enum Status {
    Ok(EvalQuad),
    Excluded,
    Error,
}

impl Status {
    fn name(&self) -> &'static str {
        match self {
            Status::Ok(_) => "ok",
            Status::Excluded => "excluded",
            Status::Error => "error",
        }
    }
}

/// `{:?}` on f64 prints the shortest decimal that reads back to the same value.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn csv_row(z: Complex64, s: &Status) -> String {
    let values = match s {
        Status::Ok(q) => [
            num(q.f.re),
            num(q.f.im),
            num(q.df.re),
            num(q.df.im),
            num(q.r),
            q.n_terms.to_string(),
        ]
        .join(","),
        _ => ",,,,,".to_string(),
    };
    format!("{},{},{values},{}", num(z.re), num(z.im), s.name())
}

fn json_row(z: Complex64, s: &Status) -> Value {
    let mut row = json!({
        "re": z.re,
        "im": z.im,
        "f_re": null,
        "f_im": null,
        "df_re": null,
        "df_im": null,
        "err": null,
        "n_terms": null,
        "status": s.name(),
    });
    if let Status::Ok(q) = s {
        row["f_re"] = json!(q.f.re);
        row["f_im"] = json!(q.f.im);
        row["df_re"] = json!(q.df.re);
        row["df_im"] = json!(q.df.im);
        row["err"] = json!(q.r);
        row["n_terms"] = json!(q.n_terms);
    }
    row
}

pub fn grid(a: &GridArgs) -> Result<ExitCode, Failure> {
    let params = a.params.params().map_err(|e| usage(e.to_string()))?;
    let cfg = a.config.config().map_err(usage)?;
    let spec = grid_spec(a.re, a.im, Complex64::new(0.0, 0.0))?;
    let improvements = a.config.improvements();
    let points = spec.points();
    let statuses: Vec<Status> = points
        .par_iter()
        .map(|z| {
            if in_exclusion_zone(*z) {
                return Status::Excluded;
            }
            match evaluate(a.kind, &params, *z, &cfg, improvements) {
                Ok(q) => Status::Ok(q),
                Err(_) => Status::Error,
            }
        })
        .collect();
    let target = a.output.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    let io_err = |e| Failure::Io(target.clone(), e);
    let mut out = open_output(a.output.as_deref())?;
    if a.format == Format::Csv {
        writeln!(out, "{CSV_HEADER}").map_err(io_err)?;
    }
    for (z, s) in points.iter().zip(&statuses) {
        match a.format {
            Format::Csv => writeln!(out, "{}", csv_row(*z, s)),
            Format::Jsonl => writeln!(out, "{}", json_row(*z, s)),
        }
        .map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(ExitCode::SUCCESS)
}

fn summary_json(s: &CaseSummary) -> Value {
    json!({
        "case": s.index,
        "points": s.points,
        "excluded": s.excluded,
        "failures": s.failures,
        "median": s.median,
        "p95": s.p95,
        "max": s.max,
        "max_far": s.max_far,
        "n_terms": s.n_terms_total,
        "pass": s.pass,
    })
}

pub fn verify(a: &VerifyArgs) -> Result<ExitCode, Failure> {
    let cfg = a.config.config().map_err(usage)?;
    let cases: Vec<usize> = if a.cases.is_empty() { (1..=9).collect() } else { a.cases.clone() };
    for &c in &cases {
        identity_case(c).map_err(|e| usage(e.to_string()))?;
    }
    let spec = grid_spec(a.re, a.im, a.offset)?;
    let thresholds = Thresholds {
        median: a.median_threshold,
        p95: a.p95_threshold,
        max_far: a.max_threshold,
        ..Thresholds::default()
    };
    let improvements = a.config.improvements();
    let points = spec.points();
    let mut dump = match &a.dump {
        Some(p) => {
            let mut w = open_output(Some(p))?;
            writeln!(w, "case,re,im,lambda,n_terms,status").map_err(|e| Failure::Io(p.display().to_string(), e))?;
            Some((p.display().to_string(), w))
        }
        None => None,
    };
    let mut summaries = Vec::new();
    for &index in &cases {
        let case = identity_case(index).expect("validated above");
        let outcomes: Vec<PointOutcome> = points
            .par_iter()
            .map(|z| check_point(&case, *z, &cfg, improvements))
            .collect();
        if let Some((path, w)) = dump.as_mut() {
            for (z, o) in points.iter().zip(&outcomes) {
                let (lambda, n, status) = match o {
                    PointOutcome::Evaluated { lambda, n_terms, .. } => (num(*lambda), n_terms.to_string(), "ok"),
                    PointOutcome::Excluded => (String::new(), String::new(), "excluded"),
                    PointOutcome::Failed(_) => (String::new(), String::new(), "error"),
                };
                writeln!(w, "{index},{},{},{lambda},{n},{status}", num(z.re), num(z.im))
                    .map_err(|e| Failure::Io(path.clone(), e))?;
            }
        }
        summaries.push(summarize(index, &points, &outcomes, &thresholds));
    }
    if let Some((path, mut w)) = dump {
        w.flush().map_err(|e| Failure::Io(path, e))?;
    }
    let pass = summaries.iter().all(|s| s.pass);
    let out = json!({
        "grid": {
            "re": [spec.re.0, spec.re.1, spec.re.2],
            "im": [spec.im.0, spec.im.1, spec.im.2],
            "offset": pair(spec.offset),
        },
        "improvements": improvements,
        "thresholds": {
            "median": thresholds.median,
            "p95": thresholds.p95,
            "max_far": thresholds.max_far,
        },
        "cases": summaries.iter().map(summary_json).collect::<Vec<_>>(),
        "pass": pass,
    });
    println!("{out}");
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0, -2.5e-300, 1e-20, 123_456_789.123_456_79, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(0.1), "0.1");
    }

    #[test]
    fn rows_have_header_width() {
        let width = CSV_HEADER.split(',').count();
        let z = Complex64::new(0.5, 0.25);
        assert_eq!(csv_row(z, &Status::Excluded).split(',').count(), width);
        let q = EvalQuad {
            f: z,
            df: z,
            r: 1e-16,
            n_terms: 7,
        };
        assert_eq!(csv_row(z, &Status::Ok(q)).split(',').count(), width);
    }

    #[test]
    fn error_objects() {
        let f = Failure::Usage("bad flag\n".into());
        assert_eq!(f.exit_code(), 2);
        assert_eq!(f.to_json()["error"]["message"], "bad flag");
        let f = Failure::Evaluation(HeunError::EpsilonZero { what: "AInf" });
        assert_eq!(f.exit_code(), 1);
        assert_eq!(f.to_json()["error"]["kind"], "evaluation");
    }
}
