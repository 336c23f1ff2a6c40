use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use heunc::{Config, FarFieldRadius, FunctionKind, Params};
use num_complex::Complex64;

#[derive(Debug, Parser)]
#[command(name = "heunc", version, about = "Evaluate confluent Heun functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one function at one point and print a JSON record.
    Eval(EvalArgs),
    /// Evaluate over a rectangular grid and write CSV or JSON lines.
    Grid(GridArgs),
    /// Compare against the closed-form identity cases over a grid.
    Verify(VerifyArgs),
}

/// Parses `a,b` as `a + bi` and a bare `a` as real.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let part = |t: &str| {
        t.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{t}` is not a number"))
    };
    let z = match s.split_once(',') {
        Some((re, im)) => Complex64::new(part(re)?, part(im)?),
        None => Complex64::new(part(s)?, 0.0),
    };
    if z.is_finite() {
        Ok(z)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

/// Parses `min,max,count`.
pub fn parse_range(s: &str) -> Result<Range, String> {
    let fields: Vec<&str> = s.split(',').map(str::trim).collect();
    let [lo, hi, count] = fields[..] else {
        return Err(format!("`{s}` is not of the form min,max,count"));
    };
    let num = |t: &str| {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{t}` is not a finite number"))
    };
    let count = count
        .parse::<usize>()
        .map_err(|_| format!("`{count}` is not a point count"))?;
    Ok(Range {
        min: num(lo)?,
        max: num(hi)?,
        count,
    })
}

fn parse_radius(s: &str) -> Result<FarFieldRadius, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(FarFieldRadius::Auto);
    }
    match s.parse::<f64>() {
        Ok(r) if r.is_finite() && r > 0.0 => Ok(FarFieldRadius::Fixed(r)),
        _ => Err(format!("`{s}` is neither `auto` nor a positive radius")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Args)]
pub struct ParamArgs {
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub q: Complex64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub alpha: Complex64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub gamma: Complex64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub delta: Complex64,
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub epsilon: Complex64,
}

impl ParamArgs {
    pub fn params(&self) -> Result<Params, heunc::HeunError> {
        Params::new(self.q, self.alpha, self.gamma, self.delta, self.epsilon)
    }
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Step size factor relative to the distance to the nearest singular point.
    #[arg(long, env = "HEUN_KAPPA")]
    pub kappa: Option<f64>,
    /// Target number of terms per Taylor step.
    #[arg(long = "n-diamond", env = "HEUN_NDIAMOND")]
    pub n_diamond: Option<usize>,
    /// Radius around z = 1 evaluated through the connection to 1.
    #[arg(long = "near-one-r", env = "HEUN_NEAR_ONE_R")]
    pub near_one_r: Option<f64>,
    /// Far-field threshold on |εz|, or `auto`.
    #[arg(long = "farfield-r", env = "HEUN_FARFIELD_R", value_parser = parse_radius)]
    pub farfield_r: Option<FarFieldRadius>,
    #[arg(long = "max-terms", env = "HEUN_MAX_TERMS")]
    pub max_terms: Option<usize>,
    #[arg(long = "max-steps", env = "HEUN_MAX_STEPS")]
    pub max_steps: Option<usize>,
    /// Use only local series and continuation.
    #[arg(long = "no-improvements")]
    pub no_improvements: bool,
}

impl ConfigArgs {
    pub fn config(&self) -> Result<Config, String> {
        let mut cfg = Config::default();
        if let Some(k) = self.kappa {
            if !(k > 0.0 && k < 1.0) {
                return Err(format!("kappa must lie in (0, 1), got {k}"));
            }
            cfg.kappa = k;
        }
        if let Some(n) = self.n_diamond {
            if n == 0 {
                return Err("n-diamond must be positive".into());
            }
            cfg.n_diamond = n;
        }
        if let Some(r) = self.near_one_r {
            if !(r > 0.0 && r < 0.5) {
                return Err(format!("near-one-r must lie in (0, 0.5), got {r}"));
            }
            cfg.near_one_radius = r;
        }
        if let Some(r) = self.farfield_r {
            cfg.far_field_r = r;
        }
        if let Some(n) = self.max_terms {
            cfg.max_terms = n;
        }
        if let Some(n) = self.max_steps {
            cfg.max_steps = n;
        }
        Ok(cfg)
    }

    pub fn improvements(&self) -> bool {
        !self.no_improvements
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Evaluation point, `re,im` or `re`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub z: Complex64,
    /// cl, cs, ainf or binf.
    #[arg(long, default_value = "cl")]
    pub kind: FunctionKind,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Real axis as `min,max,count`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub re: Range,
    /// Imaginary axis as `min,max,count`.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    pub im: Range,
    #[arg(long, default_value = "cl")]
    pub kind: FunctionKind,
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Identity cases to check, e.g. `1,7,8`; all nine when omitted.
    #[arg(long, value_delimiter = ',')]
    pub cases: Vec<usize>,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-40,40,101")]
    pub re: Range,
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true, default_value = "-40,40,101")]
    pub im: Range,
    /// Added to every grid point, `re,im` or `re`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true, default_value = "0")]
    pub offset: Complex64,
    #[arg(long, default_value_t = 1e-11)]
    pub median_threshold: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub p95_threshold: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub max_threshold: f64,
    /// Write every point's Λ as CSV to this file.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_syntax() {
        assert_eq!(parse_complex("1.5,-2").unwrap(), Complex64::new(1.5, -2.0));
        assert_eq!(parse_complex("-3").unwrap(), Complex64::new(-3.0, 0.0));
        assert_eq!(parse_complex(" 0.25 , 0 ").unwrap(), Complex64::new(0.25, 0.0));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
        assert!(parse_complex("inf").is_err());
    }

    #[test]
    fn range_syntax() {
        assert_eq!(
            parse_range("-5,5,41").unwrap(),
            Range {
                min: -5.0,
                max: 5.0,
                count: 41
            }
        );
        assert!(parse_range("0,1").is_err());
        assert!(parse_range("0,1,-2").is_err());
    }

    #[test]
    fn radius_syntax() {
        assert_eq!(parse_radius("auto").unwrap(), FarFieldRadius::Auto);
        assert_eq!(parse_radius("25").unwrap(), FarFieldRadius::Fixed(25.0));
        assert!(parse_radius("-1").is_err());
    }
}
