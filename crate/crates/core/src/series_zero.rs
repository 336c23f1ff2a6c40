//! Frobenius solutions at z = 0.
//!
//! `HeunCl` is the solution normalised to 1 at the origin. For generic γ it is
//! `Σ b_n z^n` with
//!
//! ```text
//! P_n b_n = Q_n b_{n-1} + R_n b_{n-2}
//! P_n = n(γ-1+n),  Q_n = -q + (n-1)(γ+δ-ε+n-2),  R_n = (n-2)ε + α
//! ```
//!
//! For γ ∈ {0, -1, ...} the exponents differ by the integer `n* = 1 - γ` and
//! the normalised solution carries a logarithm:
//! `Σ_{n≠n*} c_n z^n + log z Σ_{n≥n*} s_n z^n` with `c_{n*} = 0`. Other
//! software may fix `c_{n*}` differently, which changes `HeunCl` by a
//! multiple of `HeunCs`.
//!
//! `HeunCs` is `z^{1-γ}` times a `HeunCl` with shifted parameters, except at
//! γ = 1 where it is `Σ_{n≥1} d_n z^n + log z Σ t_n z^n`.

use num_complex::Complex64;

use crate::domain::{exp_factor, principal_pow, Config, EvalQuad, GammaClass, Params, DEFAULT_TAU_INT};
use crate::error::{HeunError, Result};
use crate::taylor_step::{LocalValue, Stability};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeroSeriesKind {
    /// `Σ b_n z^n`.
    GenericL,
    /// `Σ c_n z^n + log z Σ s_n z^n`, γ ∈ {0, -1, ...}.
    LogL { n_star: usize },
    /// `Σ d_n z^n + log z Σ t_n z^n`, the second solution at γ = 1.
    Sgamma1,
    /// `z^{1-γ}` times a `HeunCl` with shifted parameters.
    SviaReduction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogCoeffs {
    pub c: Vec<Complex64>,
    pub s: Vec<Complex64>,
    pub n_star: usize,
}

/// Lazily extended coefficient sequences of one local expansion at 0. `regular`
/// holds b_n, c_n or d_n; `log` holds s_n or t_n (empty for the generic case).
#[derive(Debug, Clone)]
pub(crate) struct ZeroRecurrence {
    p: Params,
    kind: ZeroSeriesKind,
    regular: Vec<Complex64>,
    log: Vec<Complex64>,
}

impl ZeroRecurrence {
    pub fn heun_cl(params: &Params, tau_int: f64) -> Self {
        let kind = match params.gamma_class(tau_int) {
            GammaClass::NonPositiveInteger { n_star } => ZeroSeriesKind::LogL { n_star },
            _ => ZeroSeriesKind::GenericL,
        };
        Self::with_kind(params.with_snapped_gamma(tau_int), kind)
    }

    pub fn gamma_one(params: &Params, tau_int: f64) -> Self {
        Self::with_kind(params.with_snapped_gamma(tau_int), ZeroSeriesKind::Sgamma1)
    }

    fn with_kind(p: Params, kind: ZeroSeriesKind) -> Self {
        ZeroRecurrence {
            p,
            kind,
            regular: Vec::with_capacity(64),
            log: Vec::with_capacity(64),
        }
    }

    pub fn has_log(&self) -> bool {
        !matches!(self.kind, ZeroSeriesKind::GenericL)
    }

    fn pqr(&self, n: usize) -> (Complex64, Complex64, Complex64) {
        let Params {
            q,
            alpha,
            gamma,
            delta,
            epsilon,
        } = self.p;
        let nf = n as f64;
        let pn = nf * (gamma - 1.0 + nf);
        let qn = -q + (nf - 1.0) * (gamma + delta - epsilon + nf - 2.0);
        let rn = (nf - 2.0) * epsilon + alpha;
        (pn, qn, rn)
    }

    fn stu(&self, n: usize) -> (Complex64, Complex64, Complex64) {
        let Params {
            gamma,
            delta,
            epsilon,
            ..
        } = self.p;
        let nf = n as f64;
        (
            1.0 - gamma - 2.0 * nf,
            gamma + delta - epsilon + 2.0 * nf - 3.0,
            epsilon,
        )
    }

    fn at(v: &[Complex64], n: isize) -> Complex64 {
        if n < 0 {
            ZERO
        } else {
            v[n as usize]
        }
    }

    /// Makes coefficients `0..=n` available.
    pub fn ensure(&mut self, n: usize) {
        while self.regular.len() <= n {
            let k = self.regular.len();
            let ki = k as isize;
            let (reg, lg) = match self.kind {
                ZeroSeriesKind::GenericL | ZeroSeriesKind::SviaReduction => {
                    if k == 0 {
                        (ONE, ZERO)
                    } else {
                        let (pn, qn, rn) = self.pqr(k);
                        let b = (qn * self.regular[k - 1] + rn * Self::at(&self.regular, ki - 2)) / pn;
                        (b, ZERO)
                    }
                }
                ZeroSeriesKind::LogL { n_star } => {
                    if k == 0 {
                        (ONE, ZERO)
                    } else if k < n_star {
                        let (pn, qn, rn) = self.pqr(k);
                        let c = (qn * self.regular[k - 1] + rn * Self::at(&self.regular, ki - 2)) / pn;
                        (c, ZERO)
                    } else if k == n_star {
                        let Params {
                            q,
                            alpha,
                            gamma,
                            delta,
                            epsilon,
                        } = self.p;
                        let c1 = self.regular[k - 1];
                        let c2 = Self::at(&self.regular, ki - 2);
                        let s = (c1 * (-q + gamma * (1.0 - delta + epsilon))
                            + c2 * (alpha - epsilon * (1.0 + gamma)))
                            / (n_star as f64);
                        (ZERO, s)
                    } else {
                        self.log_step(k)
                    }
                }
                ZeroSeriesKind::Sgamma1 => {
                    if k == 0 {
                        (ZERO, ONE)
                    } else {
                        self.log_step(k)
                    }
                }
            };
            self.regular.push(reg);
            self.log.push(lg);
        }
    }

    /// Shared step for the log forms past the seed index: the log sequence
    /// follows the three-term recurrence, the regular one picks up the
    /// S/T/U forcing from it.
    fn log_step(&self, k: usize) -> (Complex64, Complex64) {
        let ki = k as isize;
        let (pn, qn, rn) = self.pqr(k);
        let (sn, tn, un) = self.stu(k);
        let s = (qn * self.log[k - 1] + rn * Self::at(&self.log, ki - 2)) / pn;
        let s1 = self.log[k - 1];
        let s2 = Self::at(&self.log, ki - 2);
        let c = (qn * self.regular[k - 1]
            + rn * Self::at(&self.regular, ki - 2)
            + sn * s
            + tn * s1
            + un * s2)
            / pn;
        (c, s)
    }

    /// Partial sums at `z ≠ 0`, stopping once both `f` and `f'` are bitwise
    /// stable.
    pub fn sum(&mut self, z: Complex64, cfg: &Config) -> Result<LocalValue> {
        debug_assert!(z != ZERO);
        let log_z = if self.has_log() { z.ln() } else { ZERO };
        // Σ a_n z^n and Σ a_n' z^n with derivatives.
        let (mut r0, mut r1, mut r2) = (ZERO, ZERO, ZERO);
        let (mut l0, mut l1, mut l2) = (ZERO, ZERO, ZERO);
        // z^n, z^{n-1}, z^{n-2}
        let (mut pw, mut pw1, mut pw2) = (ONE, ZERO, ZERO);
        let inv_z = 1.0 / z;
        let mut stable = Stability::default();
        let mut n = 0usize;
        let mut last;
        loop {
            self.ensure(n);
            let (a, s) = (self.regular[n], self.log[n]);
            let nf = n as f64;
            let ta = a * pw;
            let ts = s * pw;
            r0 += ta;
            r1 += nf * a * pw1;
            r2 += nf * (nf - 1.0) * a * pw2;
            l0 += ts;
            l1 += nf * s * pw1;
            l2 += nf * (nf - 1.0) * s * pw2;
            last = (ta + ts * log_z).norm();

            let (f, df) = if self.has_log() {
                (r0 + log_z * l0, r1 + l0 * inv_z + log_z * l1)
            } else {
                (r0, r1)
            };
            if !f.is_finite() || !df.is_finite() {
                return Err(HeunError::NoConvergence {
                    terms: n,
                    last_term: last,
                });
            }
            if stable.settled(f, df) {
                break;
            }
            n += 1;
            if n > cfg.max_terms {
                if last <= cfg.machine_eps * f.norm().max(f64::MIN_POSITIVE) {
                    n -= 1;
                    break;
                }
                return Err(HeunError::NoConvergence {
                    terms: cfg.max_terms,
                    last_term: last,
                });
            }
            pw2 = pw1;
            pw1 = pw;
            pw *= z;
        }
        let (f, df, d2f) = if self.has_log() {
            (
                r0 + log_z * l0,
                r1 + l0 * inv_z + log_z * l1,
                r2 - l0 * inv_z * inv_z + 2.0 * l1 * inv_z + log_z * l2,
            )
        } else {
            (r0, r1, r2)
        };
        Ok(LocalValue {
            f,
            df,
            d2f,
            last_term: last,
            n: n as u64,
        })
    }
}

/// `b_0 ..= b_up_to` of `HeunCl` for γ ∉ {0, -1, ...}.
pub fn coeffs_generic(params: &Params, up_to: usize) -> Result<Vec<Complex64>> {
    if let GammaClass::NonPositiveInteger { .. } = params.gamma_class(DEFAULT_TAU_INT) {
        return Err(HeunError::NonPositiveIntegerGamma {
            gamma: params.gamma,
        });
    }
    let mut rec = ZeroRecurrence::with_kind(*params, ZeroSeriesKind::GenericL);
    rec.ensure(up_to);
    Ok(rec.regular)
}

/// `c_n`, `s_n` (indices `0..=up_to`, `s_n = 0` below `n*`) of the logarithmic
/// `HeunCl` for γ ∈ {0, -1, ...}.
pub fn coeffs_log(params: &Params, up_to: usize) -> Result<LogCoeffs> {
    let n_star = match params.gamma_class(DEFAULT_TAU_INT) {
        GammaClass::NonPositiveInteger { n_star } => n_star,
        _ => {
            return Err(HeunError::WrongGammaClass {
                gamma: params.gamma,
                what: "the logarithmic HeunCl series",
            })
        }
    };
    let mut rec = ZeroRecurrence::heun_cl(params, DEFAULT_TAU_INT);
    rec.ensure(up_to);
    Ok(LogCoeffs {
        c: rec.regular,
        s: rec.log,
        n_star,
    })
}

/// `(d_n, t_n)` of `HeunCs` at γ = 1.
pub fn coeffs_gamma_one(
    params: &Params,
    up_to: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if params.gamma_class(DEFAULT_TAU_INT) != GammaClass::One {
        return Err(HeunError::WrongGammaClass {
            gamma: params.gamma,
            what: "the gamma = 1 HeunCs series",
        });
    }
    let mut rec = ZeroRecurrence::gamma_one(params, DEFAULT_TAU_INT);
    rec.ensure(up_to);
    Ok((rec.regular, rec.log))
}

/// Which local expansion `HeunCl` / `HeunCs` use for these parameters.
pub fn series_kind(params: &Params, second: bool, tau_int: f64) -> ZeroSeriesKind {
    match (second, params.gamma_class(tau_int)) {
        (false, GammaClass::NonPositiveInteger { n_star }) => ZeroSeriesKind::LogL { n_star },
        (false, _) => ZeroSeriesKind::GenericL,
        (true, GammaClass::One) => ZeroSeriesKind::Sgamma1,
        (true, _) => ZeroSeriesKind::SviaReduction,
    }
}

pub(crate) fn local_cl(params: &Params, z: Complex64, cfg: &Config) -> Result<LocalValue> {
    let mut rec = ZeroRecurrence::heun_cl(params, cfg.tau_int);
    if z == ZERO {
        let n_star = match rec.kind {
            ZeroSeriesKind::LogL { n_star } => n_star,
            _ => usize::MAX,
        };
        if n_star == 1 {
            return Err(HeunError::SingularValue {
                z,
                detail: "HeunCl' diverges like -q log z at the origin when gamma = 0",
            });
        }
        rec.ensure(2);
        // second derivative is singular when n* = 2 (z² log z term)
        let d2f = if n_star == 2 {
            Complex64::new(f64::NAN, f64::NAN)
        } else {
            2.0 * rec.regular[2]
        };
        return Ok(LocalValue {
            f: rec.regular[0],
            df: rec.regular[1],
            d2f,
            last_term: 0.0,
            n: 0,
        });
    }
    rec.sum(z, cfg)
}

pub(crate) fn local_cs(params: &Params, z: Complex64, cfg: &Config) -> Result<LocalValue> {
    if params.gamma_class(cfg.tau_int) == GammaClass::One {
        if z == ZERO {
            return Err(HeunError::SingularValue {
                z,
                detail: "HeunCs contains log z when gamma = 1",
            });
        }
        return ZeroRecurrence::gamma_one(params, cfg.tau_int).sum(z, cfg);
    }
    let expo = ONE - params.gamma;
    let inner_params = params.second_solution_inner();
    if z == ZERO {
        // z^{1-γ} g(z) with g(0) = 1
        if expo.re <= 0.0 || inner_params.gamma_class(cfg.tau_int) != GammaClass::Generic {
            return Err(HeunError::SingularValue {
                z,
                detail: "HeunCs is unbounded at the origin for Re(gamma) >= 1",
            });
        }
        let df = if expo == ONE {
            ONE
        } else if expo.re > 1.0 {
            ZERO
        } else {
            return Err(HeunError::SingularValue {
                z,
                detail: "HeunCs' is unbounded at the origin for 0 < Re(gamma) < 1",
            });
        };
        return Ok(LocalValue {
            f: ZERO,
            df,
            d2f: Complex64::new(f64::NAN, f64::NAN),
            last_term: 0.0,
            n: 0,
        });
    }
    let g = local_cl(&inner_params, z, cfg)?;
    Ok(times_power(&g, z, expo))
}

/// `z^w g(z)` with first and second derivatives by the product rule.
pub(crate) fn times_power(g: &LocalValue, z: Complex64, w: Complex64) -> LocalValue {
    let pw = principal_pow(z, w);
    let inv = 1.0 / z;
    let d1 = w * inv;
    let d2 = w * (w - 1.0) * inv * inv;
    LocalValue {
        f: pw * g.f,
        df: pw * (g.df + d1 * g.f),
        d2f: pw * (g.d2f + 2.0 * d1 * g.df + d2 * g.f),
        last_term: g.last_term * pw.norm(),
        n: g.n,
    }
}

/// `HeunCl` and its derivative from the local expansion at 0 (|z| < 1).
pub fn eval_heun_cl_at0(params: &Params, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    let v = local_cl(params, z, cfg)?;
    Ok(finish(params, z, v, cfg))
}

/// `HeunCs` and its derivative from the local expansion at 0 (|z| < 1).
pub fn eval_heun_cs_at0(params: &Params, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    let v = local_cs(params, z, cfg)?;
    Ok(finish(params, z, v, cfg))
}

fn finish(params: &Params, z: Complex64, v: LocalValue, cfg: &Config) -> EvalQuad {
    if z == ZERO {
        EvalQuad {
            f: v.f,
            df: v.df,
            r: 0.0,
            n_terms: 0,
        }
    } else {
        v.into_quad(params, z, cfg)
    }
}

/// `(q - εγ, α - ε(γ+δ), γ, δ, -ε)`: the parameters `P'` with
/// `HeunC(P; z) = e^{-εz} HeunC(P'; z)`.
pub fn exp_transform(params: &Params) -> Params {
    params.exp_transformed()
}

/// The constant 𝒜 in
/// `HeunCl(P; z) + 𝒜 HeunCs(P; z) = e^{-εz} HeunCl(P'; z)` for γ ∈ {0, -1, ...}:
/// `𝒜 = -Σ_{n=0}^{n*} c_n ε^{n*-n} / (n*-n)!`.
pub fn log_mixing_constant(params: &Params) -> Result<Complex64> {
    let coeffs = coeffs_log(params, 0).and_then(|lc| coeffs_log(params, lc.n_star))?;
    let n_star = coeffs.n_star;
    let eps = params.epsilon;
    let mut acc = ZERO;
    let mut fact = 1.0;
    let mut eps_pow = ONE;
    // k = n* - n runs 0..=n*
    for k in 0..=n_star {
        if k > 0 {
            fact *= k as f64;
            eps_pow *= eps;
        }
        acc += coeffs.c[n_star - k] * eps_pow / fact;
    }
    Ok(-acc)
}

/// `e^{-εz}` times an evaluation of the transformed function.
pub(crate) fn scale_by_exp(eps: Complex64, z: Complex64, g: &EvalQuad) -> Result<EvalQuad> {
    let e = exp_factor(eps, z)?;
    Ok(EvalQuad {
        f: e * g.f,
        df: e * (g.df - eps * g.f),
        r: e.norm() * g.r,
        n_terms: g.n_terms,
    })
}
