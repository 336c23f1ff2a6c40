//! Formal solutions at infinity.
//!
//! For ε ≠ 0 the power-type solution is
//!
//! ```text
//! A∞(z) = (-z)^{-α/ε} Σ β_n n! / (εz)^n
//! β_n = Q̃_n β_{n-1} + R̃_n β_{n-2},  β_{-1} = 0, β_0 = 1
//! ```
//!
//! and its exponential partner is `B∞(P; z) = e^{-εz} A∞(P'; z)` with `P'` the
//! exponentially transformed parameters. Both series diverge and are summed
//! up to their least term.
//!
//! For ε = 0, α ≠ 0 the pair `z^Λ e^{±2i√(αz)} Σ β±_n z^{-n/2}` with
//! `Λ = 1/4 - (γ+δ)/2` is provided for completeness; the evaluator does not
//! route through it.

use num_complex::Complex64;

use crate::domain::{exp_factor, principal_pow, EvalQuad, Params};
use crate::error::{HeunError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Value, first two derivatives and truncation data of an asymptotic sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticValue {
    pub f: Complex64,
    pub df: Complex64,
    pub d2f: Complex64,
    /// Estimated truncation error of `f`.
    pub r: f64,
    /// Index of the last term kept.
    pub n: u64,
    /// Magnitude of the least term relative to the prefactor.
    pub least_term: f64,
}

impl AsymptoticValue {
    pub fn quad(&self) -> EvalQuad {
        EvalQuad {
            f: self.f,
            df: self.df,
            r: self.r,
            n_terms: self.n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

fn require_nonzero_epsilon(params: &Params) -> Result<()> {
    if params.epsilon == ZERO {
        return Err(HeunError::EpsilonZero {
            what: "the expansion at infinity",
        });
    }
    Ok(())
}

/// `(n Q̃_n, n(n-1) R̃_n)`: the recurrence multipliers for the scaled terms
/// `u_n = β_n n! / (εz)^n`, which satisfy
/// `u_n = w n Q̃_n u_{n-1} + w² n(n-1) R̃_n u_{n-2}` with `w = 1/(εz)`.
fn scaled_multipliers(params: &Params, n: usize) -> (Complex64, Complex64) {
    let Params {
        q,
        alpha,
        gamma,
        delta,
        epsilon,
    } = *params;
    let a = alpha / epsilon;
    let nf = n as f64;
    let inner = -q + a * (2.0 * nf - gamma - delta - 1.0 + a)
        + (gamma + delta - epsilon + 1.0) * (1.0 - nf)
        + alpha
        - 1.0;
    let nq = nf + inner / nf;
    let nr = epsilon * (nf - 2.0 + a) * (gamma - nf + 1.0 - a) / nf;
    (nq, nr)
}

/// `β_0 ..= β_up_to`.
pub fn beta_coeffs(params: &Params, up_to: usize) -> Result<Vec<Complex64>> {
    require_nonzero_epsilon(params)?;
    let mut b = Vec::with_capacity(up_to + 1);
    b.push(ONE);
    for n in 1..=up_to {
        let nf = n as f64;
        let (nq, nr) = scaled_multipliers(params, n);
        let prev2 = if n >= 2 { b[n - 2] } else { ZERO };
        // Q̃_n = nq / n, R̃_n = nr / (n(n-1)); the R̃ term is absent at n = 1.
        let r_term = if n >= 2 {
            nr / (nf * (nf - 1.0)) * prev2
        } else {
            ZERO
        };
        b.push(nq / nf * b[n - 1] + r_term);
    }
    Ok(b)
}

/// Magnitudes `|β_n n! / (εz)^n|` for `n = 0 ..= up_to`.
pub fn term_magnitudes(params: &Params, z: Complex64, up_to: usize) -> Result<Vec<f64>> {
    require_nonzero_epsilon(params)?;
    let w = 1.0 / (params.epsilon * z);
    let mut out = Vec::with_capacity(up_to + 1);
    let (mut u2, mut u1) = (ZERO, ONE);
    out.push(1.0);
    for n in 1..=up_to {
        let (nq, nr) = scaled_multipliers(params, n);
        let un = w * nq * u1 + w * w * nr * u2;
        out.push(un.norm());
        u2 = u1;
        u1 = un;
    }
    Ok(out)
}

/// `A∞` at `z`, summed to its least term.
pub fn eval_a_inf(params: &Params, z: Complex64) -> Result<AsymptoticValue> {
    eval_a_inf_eps(params, z, f64::EPSILON)
}

pub(crate) fn eval_a_inf_eps(params: &Params, z: Complex64, machine_eps: f64) -> Result<AsymptoticValue> {
    require_nonzero_epsilon(params)?;
    if z == ZERO {
        return Err(HeunError::SingularValue {
            z,
            detail: "the expansion at infinity is meaningless at the origin",
        });
    }
    let a = params.alpha / params.epsilon;
    let w = 1.0 / (params.epsilon * z);
    let scan_limit = (2.0 * w.norm().recip()).ceil() as usize + 20;

    let mut terms = Vec::with_capacity(64);
    terms.push(ONE);
    let (mut u2, mut u1) = (ZERO, ONE);
    let mut best_mag = 1.0f64;
    let mut best_at = 0usize;
    let mut running = ONE;
    let mut converged = false;
    let mut n = 1usize;
    loop {
        let (nq, nr) = scaled_multipliers(params, n);
        let un = w * nq * u1 + w * w * nr * u2;
        if !un.is_finite() {
            break;
        }
        let mag = un.norm();
        terms.push(un);
        running += un;
        if mag < best_mag {
            best_mag = mag;
            best_at = n;
        }
        let tiny = 1e-3 * machine_eps * running.norm();
        if mag <= tiny && u1.norm() <= tiny {
            converged = true;
            break;
        }
        if n >= scan_limit || (n > best_at + 2 && mag > 1e6 * best_mag.max(f64::MIN_POSITIVE)) {
            break;
        }
        u2 = u1;
        u1 = un;
        n += 1;
    }
    // Keep u_0..=u_m with m minimising the size of the next two terms, so an
    // isolated zero term does not cut the sum short.
    let mag_at = |k: usize| {
        terms
            .get(k)
            .map_or(if converged { 0.0 } else { f64::INFINITY }, |t| t.norm())
    };
    let mut best = 0usize;
    let mut omitted = f64::INFINITY;
    for m in 0..terms.len() {
        let e = mag_at(m + 1) + mag_at(m + 2);
        if e < omitted {
            omitted = e;
            best = m;
        }
    }
    if !omitted.is_finite() {
        omitted = mag_at(best);
    }
    let kept = &terms[..=best];

    let mut s = ZERO;
    let mut s1 = ZERO;
    let mut s2 = ZERO;
    for (k, u) in kept.iter().enumerate() {
        let kf = k as f64;
        s += u;
        s1 += kf * u;
        s2 += kf * (kf + 1.0) * u;
    }
    let pre = principal_pow(-z, -a);
    let inv = 1.0 / z;
    let f = pre * s;
    let df = pre * (-a * s - s1) * inv;
    let d2f = pre * (a * (a + 1.0) * s + 2.0 * a * s1 + s2) * inv * inv;
    let n_kept = best as u64;
    let r = pre.norm() * (omitted + machine_eps * (n_kept.max(1) as f64) * s.norm());
    Ok(AsymptoticValue {
        f,
        df,
        d2f,
        r,
        n: n_kept,
        least_term: best_mag,
    })
}

/// `B∞(P; z) = e^{-εz} A∞(P'; z)`.
pub fn eval_b_inf(params: &Params, z: Complex64) -> Result<AsymptoticValue> {
    eval_b_inf_eps(params, z, f64::EPSILON)
}

pub(crate) fn eval_b_inf_eps(params: &Params, z: Complex64, machine_eps: f64) -> Result<AsymptoticValue> {
    require_nonzero_epsilon(params)?;
    let inner = eval_a_inf_eps(&params.exp_transformed(), z, machine_eps)?;
    let e = exp_factor(params.epsilon, z)?;
    let eps = params.epsilon;
    Ok(AsymptoticValue {
        f: e * inner.f,
        df: e * (inner.df - eps * inner.f),
        d2f: e * (inner.d2f - 2.0 * eps * inner.df + eps * eps * inner.f),
        r: e.norm() * inner.r,
        n: inner.n,
        least_term: inner.least_term,
    })
}

fn require_eps_zero_case(params: &Params) -> Result<()> {
    if params.epsilon != ZERO || params.alpha == ZERO {
        return Err(HeunError::WrongAsymptoticCase {
            what: "the epsilon = 0 expansion at infinity",
        });
    }
    Ok(())
}

/// `β±_0 ..= β±_up_to` of the ε = 0 expansion:
/// `P°_n β_n = ±Q°_n β_{n-1} + R°_n β_{n-2} ± S°_n β_{n-3}`.
pub fn eps_zero_coeffs(params: &Params, sign: Sign, up_to: usize) -> Result<Vec<Complex64>> {
    require_eps_zero_case(params)?;
    let Params {
        q,
        alpha,
        gamma,
        delta,
        ..
    } = *params;
    let sa = alpha.sqrt();
    let g = gamma + delta;
    let sg = sign.value();
    let i = Complex64::i();
    let mut b = Vec::with_capacity(up_to + 1);
    b.push(ONE);
    let at = |b: &Vec<Complex64>, k: isize| if k < 0 { ZERO } else { b[k as usize] };
    for n in 1..=up_to {
        let nf = n as f64;
        let ni = n as isize;
        let pn = 4.0 * i * nf * sa;
        let qn = (nf - 1.5) * (nf + 0.5) + 4.0 * (alpha - q) - g * (g - 2.0);
        let rn = 4.0 * i * sa * (nf - 2.0 + delta);
        let sn = -(nf - 1.5 - gamma + delta) * (nf - 3.5 + gamma + delta);
        let v = (sg * qn * at(&b, ni - 1) + rn * at(&b, ni - 2) + sg * sn * at(&b, ni - 3)) / pn;
        b.push(v);
    }
    Ok(b)
}

/// `K`-term partial sum of the ε = 0 expansion with the `sign` exponential,
/// together with its first two derivatives.
pub fn eval_eps_zero(params: &Params, sign: Sign, z: Complex64, terms: usize) -> Result<AsymptoticValue> {
    require_eps_zero_case(params)?;
    if z == ZERO {
        return Err(HeunError::SingularValue {
            z,
            detail: "the expansion at infinity is meaningless at the origin",
        });
    }
    let b = eps_zero_coeffs(params, sign, terms.saturating_sub(1))?;
    let sa = params.alpha.sqrt();
    // s² = z with √α s = √(αz) principal
    let s = (params.alpha * z).sqrt() / sa;
    let lambda = Complex64::new(0.25, 0.0) - (params.gamma + params.delta) / 2.0;
    let i = Complex64::i();
    let sg = sign.value();
    let pre = principal_pow(z, lambda) * (sg * 2.0 * i * sa * s).exp();

    let inv_s = 1.0 / s;
    let (mut sum, mut sum_z, mut sum_zz) = (ZERO, ZERO, ZERO);
    let mut pw = ONE;
    for (n, bn) in b.iter().enumerate() {
        let h = n as f64 / 2.0;
        let t = bn * pw;
        sum += t;
        sum_z += -h * t;
        sum_zz += h * (h + 1.0) * t;
        pw *= inv_s;
    }
    let inv_z = 1.0 / z;
    sum_z *= inv_z;
    sum_zz *= inv_z * inv_z;
    let l = lambda * inv_z + sg * i * sa * inv_s;
    let dl = -lambda * inv_z * inv_z - sg * i * sa * inv_s * inv_s * inv_s / 2.0;
    let f = pre * sum;
    let df = pre * (l * sum + sum_z);
    let d2f = pre * ((l * l + dl) * sum + 2.0 * l * sum_z + sum_zz);
    let last = b.last().map_or(0.0, |v| v.norm()) * inv_s.norm().powi(b.len() as i32 - 1);
    Ok(AsymptoticValue {
        f,
        df,
        d2f,
        r: pre.norm() * last,
        n: b.len() as u64,
        least_term: last,
    })
}

/// Smallest `R` on a grid of step 1/2 for which `min_n n!/Rⁿ < machine_eps`.
pub fn far_field_radius(machine_eps: f64) -> f64 {
    let target = machine_eps.ln();
    let mut k = 2u32;
    loop {
        let r = 0.5 * k as f64;
        if min_log_term(r) < target {
            return r;
        }
        k += 1;
    }
}

/// `min_n (ln n! - n ln R)`.
fn min_log_term(r: f64) -> f64 {
    let lr = r.ln();
    let mut log_fact = 0.0f64;
    let mut best = 0.0f64;
    let upper = (r.ceil() as usize) + 2;
    for n in 1..=upper {
        log_fact += (n as f64).ln();
        best = best.min(log_fact - n as f64 * lr);
    }
    best
}
