//! Analytic continuation by Taylor stepping along polylines.
//!
//! A run starts from a seed `(f, f')` at the first waypoint and advances
//! toward each subsequent waypoint with steps of length at most
//! `κ·min(|z_p|, |z_p - 1|)`. After each step the next length is rescaled by
//! `N◇/N_p`, clamped below by `min_step` and above by the κ limit at the new
//! point.

use num_complex::Complex64;

use crate::domain::{principal_pow, upper_limit, Config, EvalQuad, GammaClass, Params};
use crate::error::{HeunError, Result};
use crate::series_zero::{local_cl, local_cs, log_mixing_constant, scale_by_exp};
use crate::taylor_step::{eval_step, StepSeed};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which of the two Frobenius solutions at 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Which {
    /// `HeunCl`, normalised to 1 at the origin.
    L,
    /// `HeunCs`, the companion solution.
    S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Complex64>,
}

fn is_singular(z: Complex64) -> bool {
    z == ZERO || z == ONE
}

impl Path {
    /// At least two points, consecutive points distinct, and no point in
    /// {0, 1} except a leading 0.
    pub fn new(waypoints: Vec<Complex64>) -> Result<Path> {
        if waypoints.len() < 2 {
            return Err(HeunError::InvalidPath("a path needs at least two points".into()));
        }
        if let Some(bad) = waypoints.iter().find(|w| !w.is_finite()) {
            return Err(HeunError::InvalidPath(format!("waypoint {bad} is not finite")));
        }
        for (i, w) in waypoints.iter().enumerate() {
            if is_singular(*w) && !(i == 0 && *w == ZERO) {
                return Err(HeunError::InvalidPath(format!(
                    "waypoint {i} ({w}) is a singular point"
                )));
            }
        }
        if let Some(i) = waypoints.windows(2).position(|p| p[0] == p[1]) {
            return Err(HeunError::InvalidPath(format!(
                "waypoints {i} and {} coincide",
                i + 1
            )));
        }
        Ok(Path { waypoints })
    }

    pub fn waypoints(&self) -> &[Complex64] {
        &self.waypoints
    }

    pub fn origin(&self) -> Complex64 {
        self.waypoints[0]
    }

    pub fn target(&self) -> Complex64 {
        *self.waypoints.last().expect("paths are nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HopKind {
    /// Local expansion at the origin.
    Local,
    /// Caller-supplied seed.
    Seed,
    /// Asymptotic expansion at infinity.
    Asymptotic,
    /// One Taylor step.
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hop {
    pub kind: HopKind,
    pub from: Complex64,
    pub to: Complex64,
    pub r: f64,
    pub n_terms: u64,
}

/// Accumulated cost and error of one or more continuation runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContinuationTrace {
    /// Sum of the error estimates of every evaluation.
    pub r_sigma: f64,
    /// Sum of series terms plus the number of evaluations.
    pub n_sigma: u64,
    /// Number of Taylor steps.
    pub steps: usize,
    pub hops: Vec<Hop>,
}

impl ContinuationTrace {
    pub(crate) fn record(&mut self, hop: Hop) {
        self.r_sigma += hop.r;
        self.n_sigma += hop.n_terms + 1;
        if hop.kind == HopKind::Step {
            self.steps += 1;
        }
        self.hops.push(hop);
    }
}

/// `[0, 1 ± i, z]` for `z` in `ω± = {Re z > 1, 0 < ±Im z < Re z}`, else `[0, z]`.
/// A target on the cut `(1, ∞)` counts as a point of `ω+`.
pub fn build_default_path(z: Complex64) -> Result<Path> {
    let z = upper_limit(z);
    if is_singular(z) {
        return Err(HeunError::SingularPoint { z });
    }
    let pts = if z.re > 1.0 && z.im >= 0.0 && z.im < z.re {
        vec![ZERO, Complex64::new(1.0, 1.0), z]
    } else if z.re > 1.0 && z.im < 0.0 && -z.im < z.re {
        vec![ZERO, Complex64::new(1.0, -1.0), z]
    } else {
        vec![ZERO, z]
    };
    Path::new(pts)
}

fn singular_distance(z: Complex64) -> f64 {
    z.norm().min((z - 1.0).norm())
}

/// Steps from `start` through `legs` (the remaining waypoints), appending
/// every evaluation to `trace`.
pub(crate) fn run(
    params: &Params,
    start: Complex64,
    seed: EvalQuad,
    seed_kind: HopKind,
    legs: &[Complex64],
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    trace.record(Hop {
        kind: seed_kind,
        from: start,
        to: start,
        r: seed.r,
        n_terms: seed.n_terms,
    });
    let mut zp = start;
    let (mut f, mut df) = (seed.f, seed.df);
    let mut r_total = seed.r;
    let mut n_total = seed.n_terms + 1;
    let mut step = cfg.kappa * singular_distance(zp);
    let mut steps = 0usize;
    for &target in legs {
        while zp != target {
            let limit = cfg.kappa * singular_distance(zp);
            let rp = step.min(limit);
            if !(rp >= 1e-12 * (1.0 + zp.norm())) {
                return Err(HeunError::StepUnderflow {
                    hop: trace.hops.len(),
                    z: zp,
                    step: rp,
                });
            }
            if steps >= cfg.max_steps {
                return Err(HeunError::MaxSteps { max: cfg.max_steps });
            }
            let d = target - zp;
            let dist = d.norm();
            let next = if dist <= rp { target } else { zp + d * (rp / dist) };
            let hop_index = trace.hops.len();
            let wrap = |e: HeunError| HeunError::Hop {
                hop: hop_index,
                from: zp,
                to: next,
                source: Box::new(e),
            };
            let seed = StepSeed::new(zp, f, df).map_err(wrap)?;
            let q = eval_step(params, &seed, next, cfg).map_err(wrap)?;
            if !q.is_finite() {
                return Err(wrap(HeunError::NoConvergence {
                    terms: q.n_terms as usize,
                    last_term: f64::INFINITY,
                }));
            }
            trace.record(Hop {
                kind: HopKind::Step,
                from: zp,
                to: next,
                r: q.r,
                n_terms: q.n_terms,
            });
            r_total += q.r;
            n_total += q.n_terms + 1;
            steps += 1;
            step = (rp * cfg.n_diamond as f64 / q.n_terms.max(1) as f64).max(cfg.min_step);
            zp = next;
            f = q.f;
            df = q.df;
        }
    }
    Ok(EvalQuad {
        f,
        df,
        r: r_total,
        n_terms: n_total,
    })
}

/// Continues a solution given by `seed` at the first waypoint of `path`.
pub fn continue_along(
    params: &Params,
    path: &Path,
    seed: EvalQuad,
    cfg: &Config,
) -> Result<(EvalQuad, ContinuationTrace)> {
    let start = path.origin();
    if is_singular(start) {
        return Err(HeunError::InvalidPath(
            "a seeded continuation cannot start at a singular point".into(),
        ));
    }
    let mut trace = ContinuationTrace::default();
    let q = run(params, start, seed, HopKind::Seed, &path.waypoints()[1..], cfg, &mut trace)?;
    Ok((q, trace))
}

fn local(params: &Params, which: Which, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    let v = match which {
        Which::L => local_cl(params, z, cfg)?,
        Which::S => local_cs(params, z, cfg)?,
    };
    if z == ZERO {
        Ok(EvalQuad {
            f: v.f,
            df: v.df,
            r: 0.0,
            n_terms: 0,
        })
    } else {
        Ok(v.into_quad(params, z, cfg))
    }
}

/// Local evaluation near 0 followed by continuation along `path`, which
/// must start at 0.
fn from_origin(
    params: &Params,
    which: Which,
    path: &Path,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    let w = path.waypoints();
    debug_assert_eq!(w[0], ZERO);
    let first = w[1];
    let (z1, legs) = if first.norm() <= cfg.kappa {
        (first, &w[2..])
    } else {
        (first * (cfg.kappa / first.norm()), &w[1..])
    };
    let seed = local(params, which, z1, cfg)?;
    if legs.is_empty() {
        trace.record(Hop {
            kind: HopKind::Local,
            from: ZERO,
            to: z1,
            r: seed.r,
            n_terms: seed.n_terms,
        });
        return Ok(EvalQuad {
            n_terms: seed.n_terms + 1,
            ..seed
        });
    }
    run(params, z1, seed, HopKind::Local, legs, cfg, trace)
}

/// The plain algorithm: the local series for `|z| < κ`, continuation along
/// the default path otherwise.
fn basic(
    params: &Params,
    which: Which,
    z: Complex64,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    if z.norm() < cfg.kappa {
        let q = local(params, which, z, cfg)?;
        trace.record(Hop {
            kind: HopKind::Local,
            from: ZERO,
            to: z,
            r: q.r,
            n_terms: q.n_terms,
        });
        return Ok(EvalQuad {
            n_terms: q.n_terms + 1,
            ..q
        });
    }
    let path = build_default_path(z)?;
    from_origin(params, which, &path, cfg, trace)
}

fn use_exp_reduction(params: &Params, z: Complex64, cfg: &Config) -> bool {
    cfg.exp_reduction
        && !params.epsilon_is_zero(cfg.tau_zero)
        && (-params.epsilon * z).re > 0.0
        && z.norm() >= cfg.kappa
}

fn cl(params: &Params, z: Complex64, cfg: &Config, trace: &mut ContinuationTrace) -> Result<EvalQuad> {
    if !use_exp_reduction(params, z, cfg) {
        return basic(params, Which::L, z, cfg, trace);
    }
    // HeunCl(P) = e^{-εz} HeunCl(P') - 𝒜 HeunCs(P), with 𝒜 = 0 unless γ ∈ {0, -1, ...}
    let g = cl(&params.exp_transformed(), z, cfg, trace)?;
    let mut out = scale_by_exp(params.epsilon, z, &g)?;
    if let GammaClass::NonPositiveInteger { .. } = params.gamma_class(cfg.tau_int) {
        let a = log_mixing_constant(params)?;
        if a != ZERO {
            let s = cs(params, z, cfg, trace)?;
            out.f -= a * s.f;
            out.df -= a * s.df;
            out.r += a.norm() * s.r;
            out.n_terms += s.n_terms;
        }
    }
    Ok(out)
}

fn cs(params: &Params, z: Complex64, cfg: &Config, trace: &mut ContinuationTrace) -> Result<EvalQuad> {
    if !use_exp_reduction(params, z, cfg) || params.gamma_class(cfg.tau_int) == GammaClass::One {
        return basic(params, Which::S, z, cfg, trace);
    }
    let g = cl(&params.second_solution_inner(), z, cfg, trace)?;
    Ok(times_power(&g, z, ONE - params.gamma))
}

/// `z^w g(z)` for an evaluation `g`.
pub(crate) fn times_power(g: &EvalQuad, z: Complex64, w: Complex64) -> EvalQuad {
    let pw = principal_pow(z, w);
    EvalQuad {
        f: pw * g.f,
        df: pw * (g.df + w / z * g.f),
        r: pw.norm() * g.r,
        n_terms: g.n_terms,
    }
}

fn check_target(z: Complex64) -> Result<Complex64> {
    if !z.is_finite() {
        return Err(HeunError::InvalidPath(format!("target {z} is not finite")));
    }
    let z = upper_limit(z);
    if z == ONE {
        return Err(HeunError::SingularPoint { z });
    }
    Ok(z)
}

/// `HeunCl` by local series and continuation, with the `e^{-εz}` reduction
/// when `Re(-εz) > 0` and `cfg.exp_reduction` is set.
pub fn eval_heun_cl(params: &Params, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    eval_heun_cl_traced(params, z, cfg).map(|(q, _)| q)
}

pub fn eval_heun_cl_traced(
    params: &Params,
    z: Complex64,
    cfg: &Config,
) -> Result<(EvalQuad, ContinuationTrace)> {
    let z = check_target(z)?;
    let mut trace = ContinuationTrace::default();
    let q = cl(params, z, cfg, &mut trace)?;
    Ok((q, trace))
}

/// `HeunCs` by local series and continuation. The `e^{-εz}` reduction goes
/// through `z^{1-γ} HeunCl(...)` and is skipped for γ = 1.
pub fn eval_heun_cs(params: &Params, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    eval_heun_cs_traced(params, z, cfg).map(|(q, _)| q)
}

pub fn eval_heun_cs_traced(
    params: &Params,
    z: Complex64,
    cfg: &Config,
) -> Result<(EvalQuad, ContinuationTrace)> {
    let z = check_target(z)?;
    let mut trace = ContinuationTrace::default();
    let q = cs(params, z, cfg, &mut trace)?;
    Ok((q, trace))
}

/// Like the public evaluators but without the upper-limit normalisation, so
/// a signed zero in `z` selects the side of a cut.
pub(crate) fn eval_raw_traced(
    params: &Params,
    which: Which,
    z: Complex64,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    if !z.is_finite() {
        return Err(HeunError::InvalidPath(format!("target {z} is not finite")));
    }
    if z == ONE {
        return Err(HeunError::SingularPoint { z });
    }
    match which {
        Which::L => cl(params, z, cfg, trace),
        Which::S => cs(params, z, cfg, trace),
    }
}

/// Continuation strictly along `path` (which must start at 0), with no
/// reductions and no cut conventions: the value of the multivalued function
/// on the branch reached by the path.
pub fn eval_multivalued(
    params: &Params,
    path: &Path,
    which: Which,
    cfg: &Config,
) -> Result<(EvalQuad, ContinuationTrace)> {
    if path.origin() != ZERO {
        return Err(HeunError::InvalidPath("multivalued paths start at 0".into()));
    }
    let mut trace = ContinuationTrace::default();
    let q = from_origin(params, which, path, cfg, &mut trace)?;
    Ok((q, trace))
}
