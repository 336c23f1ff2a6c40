//! Parameters, result tuples, configuration, and the geometry used to route
//! a point to an evaluation method.
//!
//! The equation is
//!
//! ```text
//! f'' + (γ/z + δ/(z-1) + ε) f' + (αz - q)/(z(z-1)) f = 0
//! ```
//!
//! with regular singular points at 0 and 1 and an irregular singular point
//! of rank 1 at infinity. Single-valued functions use the cuts (-∞, 0) and
//! (1, +∞). All logarithms and powers are principal; a point lying exactly on
//! a cut takes the limit from the upper half-plane.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{HeunError, Result};

pub const DEFAULT_TAU_INT: f64 = 1e-12;

/// The five complex parameters `(q, α, γ, δ, ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub q: Complex64,
    pub alpha: Complex64,
    pub gamma: Complex64,
    pub delta: Complex64,
    pub epsilon: Complex64,
}

/// How γ sits relative to the integers that make the local exponents at 0
/// differ by an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaClass {
    /// γ ∈ {0, -1, -2, ...}; `n_star = 1 - γ`.
    NonPositiveInteger { n_star: usize },
    /// γ = 1.
    One,
    Generic,
}

impl Params {
    pub fn new(
        q: Complex64,
        alpha: Complex64,
        gamma: Complex64,
        delta: Complex64,
        epsilon: Complex64,
    ) -> Result<Self> {
        let p = Params {
            q,
            alpha,
            gamma,
            delta,
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    /// Real-valued parameters, mostly for tests and examples.
    pub fn real(q: f64, alpha: f64, gamma: f64, delta: f64, epsilon: f64) -> Self {
        Params {
            q: Complex64::new(q, 0.0),
            alpha: Complex64::new(alpha, 0.0),
            gamma: Complex64::new(gamma, 0.0),
            delta: Complex64::new(delta, 0.0),
            epsilon: Complex64::new(epsilon, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("q", self.q),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(HeunError::NonFinite { name });
            }
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        [self.q, self.alpha, self.gamma, self.delta, self.epsilon]
            .iter()
            .all(|v| v.im == 0.0)
    }

    pub fn gamma_class(&self, tau_int: f64) -> GammaClass {
        let g = self.gamma;
        let nearest = g.re.round();
        if (g - Complex64::new(nearest, 0.0)).norm() <= tau_int {
            if nearest <= 0.0 {
                return GammaClass::NonPositiveInteger {
                    n_star: (1.0 - nearest) as usize,
                };
            }
            if nearest == 1.0 {
                return GammaClass::One;
            }
        }
        GammaClass::Generic
    }

    pub fn epsilon_is_zero(&self, tau_zero: f64) -> bool {
        self.epsilon.norm() <= tau_zero
    }

    /// Parameters of the companion function after pulling out `e^{-εz}`:
    /// `(q - εγ, α - ε(γ+δ), γ, δ, -ε)`.
    pub fn exp_transformed(&self) -> Params {
        let e = self.epsilon;
        Params {
            q: self.q - e * self.gamma,
            alpha: self.alpha - e * (self.gamma + self.delta),
            gamma: self.gamma,
            delta: self.delta,
            epsilon: -e,
        }
    }

    /// Parameters of the local solutions at z = 1 written in the variable `1 - z`:
    /// `(q - α, -α, δ, γ, -ε)`.
    pub fn mirrored(&self) -> Params {
        Params {
            q: self.q - self.alpha,
            alpha: -self.alpha,
            gamma: self.delta,
            delta: self.gamma,
            epsilon: -self.epsilon,
        }
    }

    /// Parameters of the analytic factor in `HeunCs = z^{1-γ} HeunCl(...)`.
    /// The map is an involution.
    pub fn second_solution_inner(&self) -> Params {
        let one = Complex64::new(1.0, 0.0);
        let g = self.gamma;
        Params {
            q: self.q + (g - one) * (self.delta - self.epsilon),
            alpha: self.alpha + self.epsilon * (one - g),
            gamma: Complex64::new(2.0, 0.0) - g,
            delta: self.delta,
            epsilon: self.epsilon,
        }
    }

    /// Replaces γ by the integer it was classified as.
    pub(crate) fn with_snapped_gamma(&self, tau_int: f64) -> Params {
        let mut p = *self;
        match self.gamma_class(tau_int) {
            GammaClass::NonPositiveInteger { n_star } => {
                p.gamma = Complex64::new(1.0 - n_star as f64, 0.0)
            }
            GammaClass::One => p.gamma = Complex64::new(1.0, 0.0),
            GammaClass::Generic => {}
        }
        p
    }

    /// Exact bit pattern, used as a cache key.
    pub fn bits(&self) -> [u64; 10] {
        let v = [self.q, self.alpha, self.gamma, self.delta, self.epsilon];
        let mut out = [0u64; 10];
        for (i, c) in v.iter().enumerate() {
            out[2 * i] = c.re.to_bits();
            out[2 * i + 1] = c.im.to_bits();
        }
        out
    }
}

/// `[f, f', r, N]`: value, derivative, error estimate and number of series
/// terms consumed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalQuad {
    pub f: Complex64,
    pub df: Complex64,
    pub r: f64,
    pub n_terms: u64,
}

impl EvalQuad {
    pub fn is_finite(&self) -> bool {
        self.f.is_finite() && self.df.is_finite() && self.r.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarFieldRadius {
    /// Resolved from the machine epsilon once per process.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Fraction of the distance to the nearest singular point used as the
    /// local series radius and continuation step.
    pub kappa: f64,
    /// Target number of terms per continuation step.
    pub n_diamond: usize,
    pub near_one_radius: f64,
    pub far_field_r: FarFieldRadius,
    pub max_terms: usize,
    pub max_steps: usize,
    pub tau_int: f64,
    pub tau_zero: f64,
    pub machine_eps: f64,
    /// Lower clamp for the adaptive step.
    pub min_step: f64,
    /// Evaluate through `e^{-εz}` and the transformed parameters when
    /// `Re(-εz) > 0`.
    pub exp_reduction: bool,
    /// Matching point used for the connection to z = 1.
    pub one_matching_point: f64,
    /// Radius of the matching points used for the connection to infinity.
    pub infinity_matching_radius: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            kappa: 0.38,
            n_diamond: 40,
            near_one_radius: 0.05,
            far_field_r: FarFieldRadius::Auto,
            max_terms: 2000,
            max_steps: 5000,
            tau_int: DEFAULT_TAU_INT,
            tau_zero: 0.0,
            machine_eps: f64::EPSILON,
            min_step: 1e-3,
            exp_reduction: true,
            one_matching_point: 0.5,
            infinity_matching_radius: 1.25,
        }
    }
}

impl Config {
    pub fn far_field_radius(&self) -> f64 {
        match self.far_field_r {
            FarFieldRadius::Fixed(r) => r,
            FarFieldRadius::Auto => {
                if self.machine_eps == f64::EPSILON {
                    static AUTO: OnceLock<f64> = OnceLock::new();
                    *AUTO.get_or_init(|| crate::asymptotics::far_field_radius(f64::EPSILON))
                } else {
                    crate::asymptotics::far_field_radius(self.machine_eps)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    LocalZero,
    NearOne,
    FarField,
    Generic,
    OnCutZero,
    OnCutOne,
    SingularPoint,
}

/// Routes `z` to an evaluation region. Precedence:
/// SingularPoint > LocalZero > NearOne > FarField > OnCut > Generic.
pub fn classify_point(params: &Params, z: Complex64, cfg: &Config) -> Region {
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0) {
        return Region::SingularPoint;
    }
    if z.norm() < cfg.kappa {
        return Region::LocalZero;
    }
    if (z - 1.0).norm() < cfg.near_one_radius {
        return Region::NearOne;
    }
    if !params.epsilon_is_zero(cfg.tau_zero) && (params.epsilon * z).norm() > cfg.far_field_radius()
    {
        return Region::FarField;
    }
    if z.im == 0.0 {
        if z.re < 0.0 {
            return Region::OnCutZero;
        }
        if z.re > 1.0 {
            return Region::OnCutOne;
        }
    }
    Region::Generic
}

/// Coefficients `(c1, c0)` such that the equation reads `f'' + c1 f' + c0 f = 0`.
pub fn ode_coefficients(params: &Params, z: Complex64) -> Result<(Complex64, Complex64)> {
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0) {
        return Err(HeunError::SingularPoint { z });
    }
    let zm1 = z - 1.0;
    let c1 = params.gamma / z + params.delta / zm1 + params.epsilon;
    let c0 = (params.alpha * z - params.q) / (z * zm1);
    Ok((c1, c0))
}

/// `f'' + c1 f' + c0 f` at `z`.
pub fn ode_residual(
    params: &Params,
    z: Complex64,
    f: Complex64,
    df: Complex64,
    d2f: Complex64,
) -> Result<Complex64> {
    let (c1, c0) = ode_coefficients(params, z)?;
    Ok(d2f + c1 * df + c0 * f)
}

/// Maps a signed-zero imaginary part to `+0.0`, so that points on a cut are
/// treated as limits from the upper half-plane.
pub fn upper_limit(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        Complex64::new(z.re, 0.0)
    } else {
        z
    }
}

/// `1 - z` with the sign of the imaginary zero flipped, so `arg(1 - z)` is the
/// correct one-sided limit when `z` sits on a cut.
pub fn one_minus(z: Complex64) -> Complex64 {
    Complex64::new(1.0 - z.re, -z.im)
}

/// Principal `z^w = exp(w log z)`.
pub fn principal_pow(z: Complex64, w: Complex64) -> Complex64 {
    if w == Complex64::new(0.0, 0.0) {
        return Complex64::new(1.0, 0.0);
    }
    (w * z.ln()).exp()
}

/// `e^{-εz}`, refusing values whose magnitude would overflow.
pub(crate) fn exp_factor(epsilon: Complex64, z: Complex64) -> Result<Complex64> {
    let arg = -epsilon * z;
    if arg.re > 700.0 {
        return Err(HeunError::Overflow {
            log_magnitude: arg.re,
        });
    }
    Ok(arg.exp())
}
