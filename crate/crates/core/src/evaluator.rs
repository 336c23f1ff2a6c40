//! Single-point evaluation of `HeunCl`, `HeunCs`, `A∞` and `B∞` with
//! region-based dispatch.
//!
//! With improvements on, points near z = 1 use the connection to the local
//! solutions at 1 and points with `|εz|` beyond the far-field radius use the
//! connection to infinity. With improvements off every point goes through
//! the local series and Taylor-step continuation.

use num_complex::Complex64;

use crate::connection::{a_inf_traced, b_inf_traced, eval_far_field_traced, eval_near_one_traced, CoeffCache};
use crate::continuation::{eval_raw_traced, ContinuationTrace, Which};
use crate::domain::{classify_point, upper_limit, Config, EvalQuad, Params, Region};
use crate::error::{HeunError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    Cl,
    Cs,
    AInf,
    BInf,
}

impl FunctionKind {
    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Cl => "cl",
            FunctionKind::Cs => "cs",
            FunctionKind::AInf => "ainf",
            FunctionKind::BInf => "binf",
        }
    }
}

impl std::str::FromStr for FunctionKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cl" | "l" => Ok(FunctionKind::Cl),
            "cs" | "s" => Ok(FunctionKind::Cs),
            "ainf" | "a" => Ok(FunctionKind::AInf),
            "binf" | "b" => Ok(FunctionKind::BInf),
            other => Err(format!("unknown function kind `{other}` (expected cl, cs, ainf or binf)")),
        }
    }
}

/// How a point was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DispatchRecord {
    pub region: Region,
    pub module: &'static str,
}

/// Evaluates `kind` at `z`. Points on a cut take the limit from the upper
/// half-plane.
pub fn evaluate(
    kind: FunctionKind,
    params: &Params,
    z: Complex64,
    cfg: &Config,
    use_improvements: bool,
) -> Result<EvalQuad> {
    evaluate_with_trace(kind, params, z, cfg, use_improvements).map(|(q, _, _)| q)
}

pub fn evaluate_with_trace(
    kind: FunctionKind,
    params: &Params,
    z: Complex64,
    cfg: &Config,
    use_improvements: bool,
) -> Result<(EvalQuad, ContinuationTrace, DispatchRecord)> {
    params.validate()?;
    if !z.is_finite() {
        return Err(HeunError::NonFinite { name: "z" });
    }
    let z = upper_limit(z);
    let region = classify_point(params, z, cfg);
    let module = route(kind, params, z, region, cfg, use_improvements);
    let record = DispatchRecord { region, module };
    let mut trace = ContinuationTrace::default();
    let cache = CoeffCache::global();
    let outcome = match (kind, module) {
        (FunctionKind::Cl | FunctionKind::Cs, "connection-one") => {
            eval_near_one_traced(cache, params, z, which(kind), cfg, &mut trace)
        }
        (FunctionKind::Cl | FunctionKind::Cs, "connection-infinity") => {
            eval_far_field_traced(cache, params, z, which(kind), cfg, &mut trace)
        }
        (FunctionKind::Cl | FunctionKind::Cs, _) => {
            eval_raw_traced(params, which(kind), z, cfg, &mut trace)
        }
        (FunctionKind::AInf | FunctionKind::BInf, _) => {
            asymptotic_kind(kind, params, z, cfg, &mut trace)
        }
    };
    match outcome {
        Ok(q) => Ok((q, trace, record)),
        Err(e) => Err(HeunError::Dispatch {
            region,
            module,
            source: Box::new(e),
        }),
    }
}

fn which(kind: FunctionKind) -> Which {
    match kind {
        FunctionKind::Cs => Which::S,
        _ => Which::L,
    }
}

fn route(
    kind: FunctionKind,
    params: &Params,
    z: Complex64,
    region: Region,
    cfg: &Config,
    improvements: bool,
) -> &'static str {
    match kind {
        FunctionKind::AInf | FunctionKind::BInf => {
            let far = (params.epsilon * z).norm() >= cfg.far_field_radius();
            if far {
                "asymptotics"
            } else {
                "continuation"
            }
        }
        FunctionKind::Cl | FunctionKind::Cs => match region {
            Region::LocalZero => "series_zero",
            Region::SingularPoint if z == Complex64::new(0.0, 0.0) => "series_zero",
            Region::SingularPoint | Region::NearOne if improvements => "connection-one",
            Region::FarField if improvements => "connection-infinity",
            _ => "continuation",
        },
    }
}

fn asymptotic_kind(
    kind: FunctionKind,
    params: &Params,
    z: Complex64,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    if params.epsilon_is_zero(cfg.tau_zero) {
        return Err(HeunError::EpsilonZero {
            what: match kind {
                FunctionKind::AInf => "AInf",
                _ => "BInf",
            },
        });
    }
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0) {
        return Err(HeunError::SingularPoint { z });
    }
    match kind {
        FunctionKind::AInf => a_inf_traced(params, z, cfg, trace),
        _ => b_inf_traced(params, z, cfg, trace),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FarFieldRadius;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn h7() -> Params {
        Params::real(0.75, 1.5, 0.5, 0.5, 1.0)
    }

    #[test]
    fn local_value_and_record() {
        let p = Params::real(0.25, 0.0, 0.5, 0.5, 0.0);
        let (q, trace, rec) =
            evaluate_with_trace(FunctionKind::Cl, &p, c(0.25, 0.0), &Config::default(), true).unwrap();
        assert!((q.f.re - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert_eq!(rec.region, Region::LocalZero);
        assert_eq!(trace.steps, 0);
    }

    #[test]
    fn improved_and_basic_agree_in_far_field() {
        let cfg = Config {
            far_field_r: FarFieldRadius::Fixed(25.0),
            ..Config::default()
        };
        let z = c(20.0, 20.0);
        let (on, _, rec) = evaluate_with_trace(FunctionKind::Cl, &h7(), z, &cfg, true).unwrap();
        assert_eq!(rec.module, "connection-infinity");
        let (off, _, rec) = evaluate_with_trace(FunctionKind::Cl, &h7(), z, &cfg, false).unwrap();
        assert_eq!(rec.module, "continuation");
        assert!((on.f - off.f).norm() <= 1e-8 * off.f.norm());
    }

    #[test]
    fn improvements_save_terms_once_cached() {
        let cfg = Config::default();
        let z = c(45.0, 3.0);
        evaluate(FunctionKind::Cl, &h7(), z, &cfg, true).unwrap();
        let (_, t_on, _) = evaluate_with_trace(FunctionKind::Cl, &h7(), z, &cfg, true).unwrap();
        let (_, t_off, _) = evaluate_with_trace(FunctionKind::Cl, &h7(), z, &cfg, false).unwrap();
        assert!(t_on.n_sigma < t_off.n_sigma, "{} vs {}", t_on.n_sigma, t_off.n_sigma);
    }

    #[test]
    fn errors_name_their_origin() {
        let p = Params::real(0.1, 0.2, 1.5, 0.3, 0.4);
        let err = evaluate(FunctionKind::Cs, &p, c(0.0, 0.0), &Config::default(), true).unwrap_err();
        assert!(matches!(err.root(), HeunError::SingularValue { .. }));
        match err {
            HeunError::Dispatch { module, .. } => assert_eq!(module, "series_zero"),
            other => panic!("{other:?}"),
        }
        let p0 = Params::real(0.1, 0.2, 1.5, 0.3, 0.0);
        let err = evaluate(FunctionKind::AInf, &p0, c(5.0, 1.0), &Config::default(), true).unwrap_err();
        assert!(matches!(err.root(), HeunError::EpsilonZero { .. }));
    }

    #[test]
    fn deterministic() {
        let z = c(-7.0, 3.5);
        let a = evaluate(FunctionKind::Cs, &h7(), z, &Config::default(), true).unwrap();
        let b = evaluate(FunctionKind::Cs, &h7(), z, &Config::default(), true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn asymptotic_kinds() {
        let cfg = Config::default();
        let z = c(3.0, 50.0);
        let (a, _, rec) = evaluate_with_trace(FunctionKind::AInf, &h7(), z, &cfg, true).unwrap();
        assert_eq!(rec.module, "asymptotics");
        let direct = crate::asymptotics::eval_a_inf(&h7(), z).unwrap();
        assert_eq!(a.f, direct.f);
        let (b, _, rec) = evaluate_with_trace(FunctionKind::BInf, &h7(), c(2.0, 5.0), &cfg, true).unwrap();
        assert_eq!(rec.module, "continuation");
        assert!(b.f.is_finite());
    }
}
