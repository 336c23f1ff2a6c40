//! Closed-form special cases used to check the evaluators, the error metric
//! Λ, the Wronskian check, and grid verification helpers.
//!
//! | case | function | parameters `(q, α, γ, δ, ε)` | closed form |
//! |------|----------|------------------------------|-------------|
//! | 1 | HeunCl | (1/4, 0, 1/2, 1/2, 0) | √(1-z) |
//! | 2 | HeunCs | (1/4, 0, 1/2, 1/2, 0) | √z |
//! | 3 | HeunCl | (6, 0, 1, 1, 0) | 6z²-6z+1 |
//! | 4 | HeunCs | (6, 0, 1, 1, 0) | (6z²-6z+1)(log z - log(1-z) - 3) - 6z + 3 |
//! | 5 | HeunCl | (-1/4, 0, 1/2, 1/2, 0) | cos log(√(1-z) + i√z) |
//! | 6 | HeunCs | (-1/4, 0, 1/2, 1/2, 0) | -i sin log(√(1-z) + i√z) |
//! | 7 | HeunCl | (3/4, 3/2, 1/2, 1/2, 1) | e^{-z} √(1-z) |
//! | 8 | HeunCs | (5/4, 3/2, 1/2, 1/2, 1) | e^{-z} √z |
//! | 9 | HeunCl + (3/2) HeunCs | (-2, 0, -1, 0, 1) | e^{-z} (1-z) |

use num_complex::Complex64;

use crate::continuation::Which;
use crate::domain::{one_minus, principal_pow, upper_limit, Config, EvalQuad, Params};
use crate::error::{HeunError, Result};
use crate::evaluator::{evaluate, FunctionKind};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Radius of the discs around 0 and 1 left out of metric grids.
pub const SINGULAR_EXCLUSION: f64 = 1e-6;
/// Half-width of the bands over the cuts left out of metric grids.
pub const CUT_EXCLUSION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCase {
    pub index: usize,
    pub params: Params,
    /// `(weight, function)` pairs summed to form the checked combination.
    pub terms: Vec<(Complex64, FunctionKind)>,
    pub formula: &'static str,
    /// Points where the closed form or its derivative is singular.
    pub singular_points: &'static [f64],
}

pub fn identity_case(index: usize) -> Result<IdentityCase> {
    let l = |p: Params, formula, singular_points| IdentityCase {
        index,
        params: p,
        terms: vec![(ONE, FunctionKind::Cl)],
        formula,
        singular_points,
    };
    let s = |p: Params, formula, singular_points| IdentityCase {
        index,
        params: p,
        terms: vec![(ONE, FunctionKind::Cs)],
        formula,
        singular_points,
    };
    let h12 = Params::real(0.25, 0.0, 0.5, 0.5, 0.0);
    let h34 = Params::real(6.0, 0.0, 1.0, 1.0, 0.0);
    let h56 = Params::real(-0.25, 0.0, 0.5, 0.5, 0.0);
    Ok(match index {
        1 => l(h12, "sqrt(1-z)", &[1.0]),
        2 => s(h12, "sqrt(z)", &[0.0]),
        3 => l(h34, "6z^2-6z+1", &[]),
        4 => s(h34, "(6z^2-6z+1)(log z - log(1-z) - 3) - 6z + 3", &[0.0, 1.0]),
        5 => l(h56, "cos log(sqrt(1-z) + i sqrt(z))", &[0.0, 1.0]),
        6 => s(h56, "-i sin log(sqrt(1-z) + i sqrt(z))", &[0.0, 1.0]),
        7 => l(Params::real(0.75, 1.5, 0.5, 0.5, 1.0), "exp(-z) sqrt(1-z)", &[1.0]),
        8 => s(Params::real(1.25, 1.5, 0.5, 0.5, 1.0), "exp(-z) sqrt(z)", &[0.0]),
        9 => IdentityCase {
            index,
            params: Params::real(-2.0, 0.0, -1.0, 0.0, 1.0),
            terms: vec![
                (ONE, FunctionKind::Cl),
                (Complex64::new(1.5, 0.0), FunctionKind::Cs),
            ],
            formula: "exp(-z) (1-z)",
            singular_points: &[],
        },
        other => return Err(HeunError::UnknownCase(other)),
    })
}

pub fn all_cases() -> Vec<IdentityCase> {
    (1..=9).map(|i| identity_case(i).expect("cases 1..=9 exist")).collect()
}

/// `(h, h', h'')` of case `index` at `z`, principal branches, upper limit on
/// the cuts.
pub fn closed_form_with_second(index: usize, z: Complex64) -> Result<[Complex64; 3]> {
    let case = identity_case(index)?;
    let z = upper_limit(z);
    if case
        .singular_points
        .iter()
        .any(|s| (z - s).norm() < SINGULAR_EXCLUSION)
    {
        return Err(HeunError::Excluded { case: index, z });
    }
    let w = one_minus(z);
    Ok(match index {
        1 => {
            let g = w.sqrt();
            [g, -0.5 / g, -0.25 / (g * g * g)]
        }
        2 => {
            let g = z.sqrt();
            [g, 0.5 / g, -0.25 / (g * g * g)]
        }
        3 => [6.0 * z * z - 6.0 * z + 1.0, 12.0 * z - 6.0, Complex64::new(12.0, 0.0)],
        4 => {
            let p = 6.0 * z * z - 6.0 * z + 1.0;
            let dp = 12.0 * z - 6.0;
            let l = z.ln() - w.ln() - 3.0;
            let dl = 1.0 / z + 1.0 / w;
            let d2l = -1.0 / (z * z) + 1.0 / (w * w);
            [
                p * l - 6.0 * z + 3.0,
                dp * l + p * dl - 6.0,
                12.0 * l + 2.0 * dp * dl + p * d2l,
            ]
        }
        5 | 6 => {
            let (sw, sz) = (w.sqrt(), z.sqrt());
            let i = Complex64::i();
            let u = sw + i * sz;
            // u (√(1-z) - i√z) = 1; take whichever form avoids cancellation
            let log_u = if u.norm() >= 1.0 { u.ln() } else { -(sw - i * sz).ln() };
            let s = sz * sw;
            let dl = i / (2.0 * s);
            let d2l = -i * (1.0 - 2.0 * z) / (4.0 * s * s * s);
            let (sin, cos) = (log_u.sin(), log_u.cos());
            if index == 5 {
                [cos, -sin * dl, -cos * dl * dl - sin * d2l]
            } else {
                [-i * sin, -i * cos * dl, i * sin * dl * dl - i * cos * d2l]
            }
        }
        7 => {
            let e = (-z).exp();
            let g = w.sqrt();
            [e * g, -e * g - e / (2.0 * g), e * (g + 1.0 / g - 0.25 / (g * g * g))]
        }
        8 => {
            let e = (-z).exp();
            let g = z.sqrt();
            [e * g, -e * g + e / (2.0 * g), e * (g - 1.0 / g - 0.25 / (g * g * g))]
        }
        9 => {
            let e = (-z).exp();
            [e * w, e * (z - 2.0), e * (3.0 - z)]
        }
        _ => unreachable!("identity_case rejected the index"),
    })
}

/// `(h, h')` of case `index` at `z`.
pub fn closed_form(index: usize, z: Complex64) -> Result<(Complex64, Complex64)> {
    closed_form_with_second(index, z).map(|[h, dh, _]| (h, dh))
}

/// `|Δ|/(1+|h|) + |Δ'|/(1+|h'|)` with `Δ = f - h`, `Δ' = f' - h'`.
pub fn lambda(h: Complex64, dh: Complex64, f: Complex64, df: Complex64) -> f64 {
    (f - h).norm() / (1.0 + h.norm()) + (df - dh).norm() / (1.0 + dh.norm())
}

/// Λ of an evaluation of case `index` at `z` against the closed form.
pub fn lambda_metric(index: usize, z: Complex64, evaluated: &EvalQuad) -> Result<f64> {
    let (h, dh) = closed_form(index, z)?;
    Ok(lambda(h, dh, evaluated.f, evaluated.df))
}

/// Evaluates the weighted combination of case `index` with the library.
pub fn evaluate_case(case: &IdentityCase, z: Complex64, cfg: &Config, improvements: bool) -> Result<EvalQuad> {
    let mut out = EvalQuad {
        f: ZERO,
        df: ZERO,
        r: 0.0,
        n_terms: 0,
    };
    for (weight, kind) in &case.terms {
        let q = evaluate(*kind, &case.params, z, cfg, improvements)?;
        out.f += weight * q.f;
        out.df += weight * q.df;
        out.r += weight.norm() * q.r;
        out.n_terms += q.n_terms;
    }
    Ok(out)
}

/// `z^{-γ} (1-z)^{-δ} e^{-εz}`, to which every Wronskian is proportional.
pub fn wronskian_weight(params: &Params, z: Complex64) -> Complex64 {
    principal_pow(z, -params.gamma) * principal_pow(one_minus(z), -params.delta) * (-params.epsilon * z).exp()
}

/// `|W(z1) w(z2) / (W(z2) w(z1)) - 1|` with `W = L S' - L' S` computed from
/// `eval(which, z)`.
pub fn wronskian_check<F>(params: &Params, z1: Complex64, z2: Complex64, mut eval: F) -> Result<f64>
where
    F: FnMut(Which, Complex64) -> Result<EvalQuad>,
{
    let mut w = |z: Complex64| -> Result<Complex64> {
        let l = eval(Which::L, z)?;
        let s = eval(Which::S, z)?;
        Ok(l.f * s.df - l.df * s.f)
    };
    let (w1, w2) = (w(z1)?, w(z2)?);
    let (g1, g2) = (wronskian_weight(params, z1), wronskian_weight(params, z2));
    let ratio = (w1 * g2) / (w2 * g1);
    if !ratio.is_finite() || w1 == ZERO || w2 == ZERO {
        return Err(HeunError::SingularValue {
            z: if w1 == ZERO { z1 } else { z2 },
            detail: "the Wronskian underflowed",
        });
    }
    Ok((ratio - 1.0).norm())
}

/// True inside the discs of radius [`SINGULAR_EXCLUSION`] about 0 and 1 or
/// within [`CUT_EXCLUSION`] of a cut.
pub fn in_exclusion_zone(z: Complex64) -> bool {
    z.norm() < SINGULAR_EXCLUSION
        || (z - 1.0).norm() < SINGULAR_EXCLUSION
        || (z.im.abs() < CUT_EXCLUSION && (z.re < 0.0 || z.re > 1.0))
}

/// Distance from `z` to the closed cuts `(-∞, 0]` and `[1, ∞)`, which include
/// both singular points.
pub fn distance_to_cuts(z: Complex64) -> f64 {
    let d0 = if z.re <= 0.0 { z.im.abs() } else { z.norm() };
    let d1 = if z.re >= 1.0 { z.im.abs() } else { (z - 1.0).norm() };
    d0.min(d1)
}

/// `n` points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n)
            .map(|k| {
                if k == n - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// A rectangular grid, row-major with the real part varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub re: (f64, f64, usize),
    pub im: (f64, f64, usize),
    /// Added to every point after spacing.
    pub offset: Complex64,
}

impl GridSpec {
    pub fn square(lo: f64, hi: f64, count: usize, offset: f64) -> Self {
        GridSpec {
            re: (lo, hi, count),
            im: (lo, hi, count),
            offset: Complex64::new(offset, offset),
        }
    }

    pub fn points(&self) -> Vec<Complex64> {
        let xs = linspace(self.re.0, self.re.1, self.re.2);
        let ys = linspace(self.im.0, self.im.1, self.im.2);
        ys.iter()
            .flat_map(|y| xs.iter().map(move |x| Complex64::new(*x, *y)))
            .map(|z| z + self.offset)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PointOutcome {
    Excluded,
    Failed(HeunError),
    Evaluated { lambda: f64, n_terms: u64, r: f64 },
}

/// Evaluates case `case` at `z` and compares with the closed form.
pub fn check_point(case: &IdentityCase, z: Complex64, cfg: &Config, improvements: bool) -> PointOutcome {
    if in_exclusion_zone(z) {
        return PointOutcome::Excluded;
    }
    let q = match evaluate_case(case, z, cfg, improvements) {
        Ok(q) => q,
        Err(e) => return PointOutcome::Failed(e),
    };
    match lambda_metric(case.index, z, &q) {
        Ok(l) => PointOutcome::Evaluated {
            lambda: if l.is_nan() { f64::INFINITY } else { l },
            n_terms: q.n_terms,
            r: q.r,
        },
        Err(_) => PointOutcome::Excluded,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub median: f64,
    pub p95: f64,
    pub max_far: f64,
    /// Points closer than this to a cut or singular point are not held to
    /// `max_far`.
    pub far_margin: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            median: 1e-11,
            p95: 1e-8,
            max_far: 1e-6,
            far_margin: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseSummary {
    pub index: usize,
    pub points: usize,
    pub excluded: usize,
    pub failures: usize,
    pub median: f64,
    pub p95: f64,
    pub max: f64,
    /// Largest Λ over points farther than `far_margin` from the cuts.
    pub max_far: f64,
    pub n_terms_total: u64,
    pub pass: bool,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Aggregates outcomes at `points`; failed evaluations count as Λ = ∞.
pub fn summarize(
    index: usize,
    points: &[Complex64],
    outcomes: &[PointOutcome],
    thresholds: &Thresholds,
) -> CaseSummary {
    let mut lambdas = Vec::with_capacity(outcomes.len());
    let mut excluded = 0;
    let mut failures = 0;
    let mut max_far = 0.0f64;
    let mut n_terms_total = 0u64;
    for (z, o) in points.iter().zip(outcomes) {
        let l = match o {
            PointOutcome::Excluded => {
                excluded += 1;
                continue;
            }
            PointOutcome::Failed(_) => {
                failures += 1;
                f64::INFINITY
            }
            PointOutcome::Evaluated { lambda, n_terms, .. } => {
                n_terms_total += n_terms;
                *lambda
            }
        };
        if distance_to_cuts(*z) > thresholds.far_margin {
            max_far = max_far.max(l);
        }
        lambdas.push(l);
    }
    lambdas.sort_by(|a, b| a.total_cmp(b));
    let median = percentile(&lambdas, 0.5);
    let p95 = percentile(&lambdas, 0.95);
    let max = lambdas.last().copied().unwrap_or(f64::NAN);
    let pass = !lambdas.is_empty()
        && median <= thresholds.median
        && p95 <= thresholds.p95
        && max_far <= thresholds.max_far;
    CaseSummary {
        index,
        points: points.len(),
        excluded,
        failures,
        median,
        p95,
        max,
        max_far,
        n_terms_total,
        pass,
    }
}

/// Runs `case` over every point of `grid` sequentially.
pub fn verify_case(
    index: usize,
    grid: &GridSpec,
    cfg: &Config,
    improvements: bool,
    thresholds: &Thresholds,
) -> Result<CaseSummary> {
    let case = identity_case(index)?;
    let points = grid.points();
    if points.is_empty() {
        return Err(HeunError::EmptyGrid);
    }
    let outcomes: Vec<PointOutcome> = points
        .iter()
        .map(|z| check_point(&case, *z, cfg, improvements))
        .collect();
    Ok(summarize(index, &points, &outcomes, thresholds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ode_residual;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form(3, ONE).unwrap().0, ONE);
        assert_eq!(closed_form(9, ONE).unwrap().0, ZERO);
        let (h4, _) = closed_form(4, c(0.5, 0.0)).unwrap();
        assert!((h4 - c(1.5, 0.0)).norm() < 1e-15);
        assert!(matches!(closed_form(1, ONE), Err(HeunError::Excluded { .. })));
        assert!(matches!(closed_form(10, ONE), Err(HeunError::UnknownCase(10))));
    }

    #[test]
    fn closed_forms_satisfy_equation() {
        for case in all_cases() {
            for z in [c(0.3, 0.4), c(-2.0, 1.5), c(3.0, -2.0), c(0.5, -0.1), c(7.0, 7.0)] {
                let [h, dh, d2h] = closed_form_with_second(case.index, z).unwrap();
                let res = ode_residual(&case.params, z, h, dh, d2h).unwrap();
                assert!(res.norm() <= 1e-10 * (1.0 + d2h.norm()), "case {} at {z}: {res}", case.index);
            }
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let step = 1e-6;
        for case in all_cases() {
            let z = c(0.7, 0.9);
            let [_, dh, d2h] = closed_form_with_second(case.index, z).unwrap();
            let [hp, dhp, _] = closed_form_with_second(case.index, z + step).unwrap();
            let [hm, dhm, _] = closed_form_with_second(case.index, z - step).unwrap();
            assert!(((hp - hm) / (2.0 * step) - dh).norm() < 1e-7 * (1.0 + dh.norm()));
            assert!(((dhp - dhm) / (2.0 * step) - d2h).norm() < 1e-6 * (1.0 + d2h.norm()));
        }
    }

    #[test]
    fn conjugation_of_closed_forms() {
        for case in all_cases() {
            for z in [c(0.3, 0.4), c(-2.0, 1.5), c(3.0, 2.0), c(1.5, 0.2)] {
                let (h, dh) = closed_form(case.index, z).unwrap();
                let (hc, dhc) = closed_form(case.index, z.conj()).unwrap();
                assert!((hc - h.conj()).norm() <= 1e-13 * (1.0 + h.norm()), "{} {z}", case.index);
                assert!((dhc - dh.conj()).norm() <= 1e-13 * (1.0 + dh.norm()));
            }
        }
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda(ONE, ONE, ONE, ONE), 0.0);
        let l = lambda(ONE, ZERO, c(1.0 + 1e-12, 0.0), ZERO);
        assert_eq!(l, ((1.0 + 1e-12) - 1.0) / 2.0);
        let (h, dh, f, df) = (c(0.3, 0.2), c(-1.0, 2.0), c(0.31, 0.2), c(-1.0, 2.1));
        assert_eq!(lambda(h, dh, f, df), lambda(h.conj(), dh.conj(), f.conj(), df.conj()));
    }

    #[test]
    fn wronskian_of_closed_forms() {
        let p = Params::real(0.25, 0.0, 0.5, 0.5, 0.0);
        let exact = |which: Which, z: Complex64| {
            let (h, dh) = closed_form(if which == Which::L { 1 } else { 2 }, z)?;
            Ok(EvalQuad {
                f: h,
                df: dh,
                r: 0.0,
                n_terms: 0,
            })
        };
        let dev = wronskian_check(&p, c(0.3, 0.2), c(-1.5, 2.0), exact).unwrap();
        assert!(dev < 1e-14);
    }

    #[test]
    fn grid_helpers() {
        assert_eq!(linspace(0.2, 0.4, 2), vec![0.2, 0.4]);
        let l = linspace(-40.0, 40.0, 101);
        assert_eq!(l[50], 0.0);
        let g = GridSpec::square(0.2, 0.4, 2, 0.0);
        assert_eq!(g.points(), vec![c(0.2, 0.2), c(0.4, 0.2), c(0.2, 0.4), c(0.4, 0.4)]);
        assert!(in_exclusion_zone(c(-3.0, 0.0)));
        assert!(in_exclusion_zone(c(1.0 + 1e-7, 0.0)));
        assert!(!in_exclusion_zone(c(0.5, 0.0)));
        assert_eq!(distance_to_cuts(c(-3.0, 0.25)), 0.25);
        assert_eq!(distance_to_cuts(c(0.5, 0.0)), 0.5);
    }

    #[test]
    fn small_grid_passes() {
        let g = GridSpec::square(-5.0, 5.0, 11, 0.01);
        for index in [1, 7, 9] {
            let s = verify_case(index, &g, &Config::default(), true, &Thresholds::default()).unwrap();
            assert!(s.pass, "{s:?}");
        }
    }
}
