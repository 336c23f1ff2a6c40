//! Power series about an arbitrary regular point `z0` with prescribed value
//! and derivative, and the two error estimators shared by every series
//! evaluation in the crate.
//!
//! The coefficients obey the four-term recurrence
//!
//! ```text
//! P_n c_n = Q_n c_{n-1} + R_n c_{n-2} + S_n c_{n-3}
//! P_n = n(1-n) z0(z0-1)
//! Q_n = (n-1)(ε z0² + z0(γ+δ-ε+2(n-2)) - γ - n + 2)
//! R_n = z0(2(n-2)ε + α) + (n-2)(γ-ε+δ+n-3) - q
//! S_n = (n-3)ε + α
//! ```
//!
//! with `c_{-1} = 0`, `c_0 = H0`, `c_1 = H0'`.

use num_complex::Complex64;

use crate::domain::{Config, EvalQuad, Params};
use crate::error::{HeunError, Result};

/// Number of consecutive indices over which both partial sums must stay
/// bitwise unchanged before a series is considered summed. Three covers
/// accidental zero coefficients of the four-term recurrence.
pub(crate) const STABLE_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSeed {
    pub z0: Complex64,
    pub h0: Complex64,
    pub h0p: Complex64,
}

impl StepSeed {
    pub fn new(z0: Complex64, h0: Complex64, h0p: Complex64) -> Result<Self> {
        if is_singular(z0) {
            return Err(HeunError::SingularPoint { z: z0 });
        }
        Ok(StepSeed { z0, h0, h0p })
    }
}

fn is_singular(z: Complex64) -> bool {
    z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0)
}

/// Truncated series with its first two derivatives, before error estimation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LocalValue {
    pub f: Complex64,
    pub df: Complex64,
    pub d2f: Complex64,
    /// Magnitude of the last term added.
    pub last_term: f64,
    /// Index of the last term.
    pub n: u64,
}

impl LocalValue {
    pub fn into_quad(self, params: &Params, z: Complex64, cfg: &Config) -> EvalQuad {
        EvalQuad {
            f: self.f,
            df: self.df,
            r: estimate_error(params, z, &self, cfg),
            n_terms: self.n,
        }
    }
}

/// Tracks the "two consecutive partial sums are indistinguishable" stopping rule.
#[derive(Debug, Default)]
pub(crate) struct Stability {
    prev: Option<(Complex64, Complex64)>,
    run: usize,
}

impl Stability {
    /// Returns true once `(f, df)` has been bitwise constant for `STABLE_RUN`
    /// consecutive updates.
    pub fn settled(&mut self, f: Complex64, df: Complex64) -> bool {
        let same = matches!(self.prev, Some((pf, pd)) if bits_eq(pf, f) && bits_eq(pd, df));
        self.run = if same { self.run + 1 } else { 0 };
        self.prev = Some((f, df));
        self.run >= STABLE_RUN
    }
}

fn bits_eq(a: Complex64, b: Complex64) -> bool {
    a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
}

struct StepCoefficients<'a> {
    p: &'a Params,
    z0: Complex64,
}

impl StepCoefficients<'_> {
    fn pqrs(&self, n: usize) -> (Complex64, Complex64, Complex64, Complex64) {
        let Params {
            q,
            alpha,
            gamma,
            delta,
            epsilon,
        } = *self.p;
        let z0 = self.z0;
        let nf = n as f64;
        let pn = nf * (1.0 - nf) * z0 * (z0 - 1.0);
        let qn = (nf - 1.0)
            * (epsilon * z0 * z0 + z0 * (gamma + delta - epsilon + 2.0 * (nf - 2.0)) - gamma - nf
                + 2.0);
        let rn = z0 * (2.0 * (nf - 2.0) * epsilon + alpha)
            + (nf - 2.0) * (gamma - epsilon + delta + nf - 3.0)
            - q;
        let sn = (nf - 3.0) * epsilon + alpha;
        (pn, qn, rn, sn)
    }
}

/// Coefficients `c_0 ..= c_up_to` of the expansion about `seed.z0`.
pub fn step_coeffs(params: &Params, seed: &StepSeed, up_to: usize) -> Result<Vec<Complex64>> {
    if is_singular(seed.z0) {
        return Err(HeunError::SingularPoint { z: seed.z0 });
    }
    let rec = StepCoefficients {
        p: params,
        z0: seed.z0,
    };
    let mut c = Vec::with_capacity(up_to + 1);
    c.push(seed.h0);
    if up_to >= 1 {
        c.push(seed.h0p);
    }
    for n in 2..=up_to {
        let (pn, qn, rn, sn) = rec.pqrs(n);
        let c3 = if n >= 3 { c[n - 3] } else { Complex64::new(0.0, 0.0) };
        c.push((qn * c[n - 1] + rn * c[n - 2] + sn * c3) / pn);
    }
    Ok(c)
}

pub(crate) fn step_local(
    params: &Params,
    seed: &StepSeed,
    z: Complex64,
    cfg: &Config,
) -> Result<LocalValue> {
    if is_singular(seed.z0) {
        return Err(HeunError::SingularPoint { z: seed.z0 });
    }
    let radius = seed.z0.norm().min((seed.z0 - 1.0).norm());
    let h = z - seed.z0;
    if h.norm() >= radius {
        return Err(HeunError::OutOfDisc {
            z,
            center: seed.z0,
            radius,
        });
    }
    if h == Complex64::new(0.0, 0.0) {
        let (c1, c0) = crate::domain::ode_coefficients(params, z)?;
        return Ok(LocalValue {
            f: seed.h0,
            df: seed.h0p,
            d2f: -(c1 * seed.h0p + c0 * seed.h0),
            last_term: 0.0,
            n: 0,
        });
    }

    // Work with the scaled terms u_n = c_n h^n.
    let rec = StepCoefficients {
        p: params,
        z0: seed.z0,
    };
    let (h2, h3) = (h * h, h * h * h);
    let zero = Complex64::new(0.0, 0.0);
    let (mut u3, mut u2, mut u1) = (zero, seed.h0, seed.h0p * h);
    // Sums of u_n, n u_n and n(n-1) u_n; divided by h and h² at the end.
    let mut s0 = u2 + u1;
    let mut s1 = u1;
    let mut s2 = zero;
    let mut stable = Stability::default();
    stable.settled(s0, s1);
    let mut n = 1usize;
    let mut last = u1.norm();
    loop {
        n += 1;
        if n > cfg.max_terms {
            let scale = s0.norm().max(s1.norm() / h.norm());
            if last <= cfg.machine_eps * scale {
                break;
            }
            return Err(HeunError::NoConvergence {
                terms: cfg.max_terms,
                last_term: last,
            });
        }
        let (pn, qn, rn, sn) = rec.pqrs(n);
        let un = (qn * u1 * h + rn * u2 * h2 + sn * u3 * h3) / pn;
        let nf = n as f64;
        s0 += un;
        s1 += nf * un;
        s2 += nf * (nf - 1.0) * un;
        last = un.norm();
        u3 = u2;
        u2 = u1;
        u1 = un;
        if !un.is_finite() {
            return Err(HeunError::NoConvergence {
                terms: n,
                last_term: last,
            });
        }
        if stable.settled(s0, s1) {
            break;
        }
    }
    Ok(LocalValue {
        f: s0,
        df: s1 / h,
        d2f: s2 / h2,
        last_term: last,
        n: n as u64,
    })
}

/// Sums the series about `seed.z0` at `z` until the partial sums of `f` and
/// `f'` stop changing.
pub fn eval_step(params: &Params, seed: &StepSeed, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    step_local(params, seed, z, cfg).map(|v| v.into_quad(params, z, cfg))
}

/// `true` when `z` is close enough to `z* = q/α` that the residual estimate
/// loses its significant digits.
pub fn near_z_star(params: &Params, z: Complex64) -> bool {
    let d = (params.q - params.alpha * z).norm();
    d < 1e-2 * (1.0 + params.q.norm() + params.alpha.norm() * z.norm())
}

/// `|f̲(z) - Σ(z)|`, where `f̲` is recovered from the equation using the
/// truncated series' own first and second derivatives.
pub fn residual_estimate(
    params: &Params,
    z: Complex64,
    f: Complex64,
    df: Complex64,
    d2f: Complex64,
) -> Result<f64> {
    if is_singular(z) {
        return Err(HeunError::SingularPoint { z });
    }
    if near_z_star(params, z) {
        return Err(HeunError::NearZStar);
    }
    let zm1 = z - 1.0;
    let first = params.gamma * zm1 + params.delta * z + params.epsilon * z * zm1;
    let recovered = (z * zm1 * d2f + first * df) / (params.q - params.alpha * z);
    Ok((recovered - f).norm())
}

/// `√N·|last term| + ε·N·|partial sum|`.
pub fn heuristic_estimate(last_term: f64, n: u64, partial_sum: f64, machine_eps: f64) -> f64 {
    let nf = n as f64;
    nf.sqrt() * last_term + machine_eps * nf * partial_sum
}

/// Reported error: the larger of the two estimates, or only the heuristic one
/// near `z*` and at the singular points.
pub(crate) fn estimate_error(params: &Params, z: Complex64, v: &LocalValue, cfg: &Config) -> f64 {
    let heuristic = heuristic_estimate(v.last_term, v.n.max(1), v.f.norm(), cfg.machine_eps);
    match residual_estimate(params, z, v.f, v.df, v.d2f) {
        Ok(r) if r.is_finite() => r.max(heuristic),
        _ => heuristic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn h1() -> Params {
        Params::real(0.25, 0.0, 0.5, 0.5, 0.0)
    }

    #[test]
    fn second_coefficient_matches_direct_solve() {
        let seed = StepSeed::new(c(0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let cs = step_coeffs(&h1(), &seed, 4).unwrap();
        assert!((cs[2] - c(-0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_seed_gives_zero_series() {
        let p = Params::real(0.3, 1.2, 0.7, -0.4, 2.0);
        let seed = StepSeed::new(c(0.4, 0.9), c(0.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(step_coeffs(&p, &seed, 30)
            .unwrap()
            .iter()
            .all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn reproduces_sqrt_one_minus_z() {
        let z0 = c(0.5, 0.0);
        let h0 = c(0.5f64.sqrt(), 0.0);
        let seed = StepSeed::new(z0, h0, -0.5 / h0).unwrap();
        let cfg = Config::default();
        for z in [c(0.6, 0.0), c(0.4, 0.0), c(0.5, 0.1), c(0.5, -0.1)] {
            let q = eval_step(&h1(), &seed, z, &cfg).unwrap();
            let exact = crate::domain::one_minus(z).sqrt();
            assert!((q.f - exact).norm() < 1e-12, "{z}: {} vs {exact}", q.f);
            assert!((q.df + 0.5 / exact).norm() < 1e-12);
        }
        let q = eval_step(&h1(), &seed, c(0.6, 0.0), &cfg).unwrap();
        assert!((q.f.re - 0.632_455_532_033_675_9).abs() < 1e-14);
    }

    #[test]
    fn center_returns_seed_exactly() {
        let seed = StepSeed::new(c(0.3, 0.4), c(1.5, -2.0), c(0.25, 7.0)).unwrap();
        let q = eval_step(&h1(), &seed, c(0.3, 0.4), &Config::default()).unwrap();
        assert_eq!((q.f, q.df), (seed.h0, seed.h0p));
        assert!(q.n_terms <= 1);
    }

    #[test]
    fn out_of_disc_and_singular_center() {
        let seed = StepSeed::new(c(0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(matches!(
            eval_step(&h1(), &seed, c(1.2, 0.0), &Config::default()),
            Err(HeunError::OutOfDisc { .. })
        ));
        assert!(StepSeed::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).is_err());
    }

    #[test]
    fn heuristic_examples() {
        let eps = 2.22e-16;
        assert!((heuristic_estimate(0.0, 1, 1.0, eps) - 2.22e-16).abs() < 1e-30);
        let r = heuristic_estimate(1e-17, 100, 2.0, eps);
        assert!((r - 4.45e-14).abs() < 1e-16);
        let a = heuristic_estimate(0.0, 7, 1.0, eps);
        let b = heuristic_estimate(0.0, 7, 10.0, eps);
        assert!((b - 10.0 * a).abs() < 1e-28);
    }

    #[test]
    fn residual_zero_for_exact_solution() {
        // sqrt(1-z) and its exact derivatives
        let z = c(0.3, 0.2);
        let s = crate::domain::one_minus(z).sqrt();
        let f = s;
        let df = -0.5 / s;
        let d2f = -0.25 / (s * s * s);
        let r = residual_estimate(&h1(), z, f, df, d2f).unwrap();
        assert!(r < 1e-15);
    }

    #[test]
    fn residual_near_z_star_is_refused() {
        let p = Params::real(0.3, 1.0, 0.5, 0.5, 0.0);
        let r = residual_estimate(&p, c(0.3, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0));
        assert_eq!(r, Err(HeunError::NearZStar));
    }

    #[test]
    fn step_error_estimate_bounds_true_error() {
        let z0 = c(0.5, 0.0);
        let h0 = c(0.5f64.sqrt(), 0.0);
        let seed = StepSeed::new(z0, h0, -0.5 / h0).unwrap();
        let z = c(0.3, 0.0);
        let q = eval_step(&h1(), &seed, z, &Config::default()).unwrap();
        let err = (q.f - crate::domain::one_minus(z).sqrt()).norm();
        assert!(q.r <= 1e-13);
        assert!(err <= 100.0 * q.r);
    }
}
