//! Connection coefficients between the solutions at 0 and those at 1 and at
//! infinity, found by matching at a finite point, and the evaluators built on
//! them.
//!
//! Near z = 1 the solutions at 1 are `HeunCl(P̄; 1-z)` and `HeunCs(P̄; 1-z)`
//! with `P̄ = (q-α, -α, δ, γ, -ε)`; they are matched against the requested
//! function at z = 1/2.
//!
//! Near infinity each half-plane sector `S± = {±Im z > 0}` gets its own
//! matrix. `A∞` and `B∞` are continued inward along the anti-Stokes ray from
//! the far-field radius to `(5/4) e^{iθ±}` and matched there against
//! `HeunCl` and `HeunCs`:
//!
//! ```text
//! A∞ = E1 HeunCl + E2 HeunCs,   B∞ = D1 HeunCl + D2 HeunCs
//! [HeunCl; HeunCs] = d [A∞; B∞],  d = [[E1, E2], [D1, D2]]^{-1}
//! ```

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{OnceLock, RwLock};

use num_complex::Complex64;

use crate::asymptotics::eval_a_inf_eps;
use crate::continuation::{self, run, ContinuationTrace, Hop, HopKind, Which};
use crate::domain::{exp_factor, one_minus, upper_limit, Config, EvalQuad, Params};
use crate::error::{HeunError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Threshold on `|det| / (‖row1‖ ‖row2‖)` below which a matching system is
/// rejected.
pub const MIN_SCALED_DET: f64 = 1e-10;

type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sector {
    /// `Im z > 0`, and the upper limit on the cuts.
    Upper,
    Lower,
}

impl Sector {
    pub fn of(z: Complex64) -> Sector {
        if upper_limit(z).im >= 0.0 {
            Sector::Upper
        } else {
            Sector::Lower
        }
    }
}

/// `f = C1 f1(1-z) + C2 f2(1-z)` for the requested function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneConnection {
    pub c1: Complex64,
    pub c2: Complex64,
    /// Propagated uncertainty of `(C1, C2)`.
    pub dc: [f64; 2],
    pub scaled_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InfinityConnection {
    pub sector: Sector,
    pub theta: f64,
    pub matching_point: Complex64,
    pub far_seed: Complex64,
    pub e: [Complex64; 2],
    pub d_rows: [Complex64; 2],
    /// Inverse of `[[E1, E2], [D1, D2]]`.
    pub d: Mat2,
    /// Propagated uncertainty of the entries of `d`.
    pub dd: [[f64; 2]; 2],
    /// `max |d M - I|` over the entries.
    pub inverse_residual: f64,
    pub scaled_det: f64,
}

/// Every coefficient available for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionSet {
    /// For `HeunCl`.
    pub one_l: OneConnection,
    /// For `HeunCs`.
    pub one_s: OneConnection,
    /// `None` when ε = 0.
    pub upper: Option<InfinityConnection>,
    pub lower: Option<InfinityConnection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Slot {
    One(Which),
    Infinity(Sector),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    params: [u64; 10],
    cfg: [u64; 9],
    slot: Slot,
}

fn cfg_fingerprint(cfg: &Config) -> [u64; 9] {
    [
        cfg.kappa.to_bits(),
        cfg.n_diamond as u64,
        cfg.min_step.to_bits(),
        cfg.exp_reduction as u64,
        cfg.far_field_radius().to_bits(),
        cfg.one_matching_point.to_bits(),
        cfg.infinity_matching_radius.to_bits(),
        cfg.machine_eps.to_bits(),
        cfg.tau_int.to_bits(),
    ]
}

#[derive(Debug, Clone, Copy)]
enum Entry {
    One(OneConnection),
    Infinity(InfinityConnection),
}

/// Process-lifetime store of matching results keyed by the exact parameter
/// bits. The first stored value for a key is served thereafter.
#[derive(Debug, Default)]
pub struct CoeffCache {
    map: RwLock<HashMap<Key, Entry>>,
    solves: AtomicUsize,
}

impl CoeffCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn global() -> &'static CoeffCache {
        static GLOBAL: OnceLock<CoeffCache> = OnceLock::new();
        GLOBAL.get_or_init(CoeffCache::new)
    }

    /// Number of matching computations performed so far.
    pub fn solves(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_compute(&self, key: Key, compute: impl FnOnce() -> Result<Entry>) -> Result<Entry> {
        if let Some(e) = self.map.read().ok().and_then(|m| m.get(&key).copied()) {
            return Ok(e);
        }
        let fresh = compute()?;
        self.solves.fetch_add(1, Ordering::Relaxed);
        let mut map = self.map.write().unwrap_or_else(|p| p.into_inner());
        Ok(*map.entry(key).or_insert(fresh))
    }

    pub fn match_at_one(&self, params: &Params, which: Which, cfg: &Config) -> Result<OneConnection> {
        let key = Key {
            params: params.bits(),
            cfg: cfg_fingerprint(cfg),
            slot: Slot::One(which),
        };
        match self.get_or_compute(key, || compute_one(params, which, cfg).map(Entry::One))? {
            Entry::One(c) => Ok(c),
            Entry::Infinity(_) => unreachable!("slot kinds are keyed"),
        }
    }

    pub fn match_at_infinity(
        &self,
        params: &Params,
        sector: Sector,
        cfg: &Config,
    ) -> Result<InfinityConnection> {
        let key = Key {
            params: params.bits(),
            cfg: cfg_fingerprint(cfg),
            slot: Slot::Infinity(sector),
        };
        match self.get_or_compute(key, || compute_infinity(params, sector, cfg).map(Entry::Infinity))? {
            Entry::Infinity(c) => Ok(c),
            Entry::One(_) => unreachable!("slot kinds are keyed"),
        }
    }

    pub fn connection_set(&self, params: &Params, cfg: &Config) -> Result<ConnectionSet> {
        let one_l = self.match_at_one(params, Which::L, cfg)?;
        let one_s = self.match_at_one(params, Which::S, cfg)?;
        let (upper, lower) = if params.epsilon_is_zero(cfg.tau_zero) {
            (None, None)
        } else {
            (
                Some(self.match_at_infinity(params, Sector::Upper, cfg)?),
                Some(self.match_at_infinity(params, Sector::Lower, cfg)?),
            )
        };
        Ok(ConnectionSet {
            one_l,
            one_s,
            upper,
            lower,
        })
    }
}

/// Solves `m x = b` by the closed-form inverse, rejecting nearly singular
/// matrices. Returns the solution, the componentwise magnitude of `m^{-1}`,
/// and the scaled determinant.
fn solve2(m: &Mat2, b: [Complex64; 2]) -> Result<([Complex64; 2], [[f64; 2]; 2], f64)> {
    let (inv, scaled) = invert2(m)?;
    let x = [
        inv[0][0] * b[0] + inv[0][1] * b[1],
        inv[1][0] * b[0] + inv[1][1] * b[1],
    ];
    let mag = [
        [inv[0][0].norm(), inv[0][1].norm()],
        [inv[1][0].norm(), inv[1][1].norm()],
    ];
    Ok((x, mag, scaled))
}

fn invert2(m: &Mat2) -> Result<(Mat2, f64)> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let row0 = (m[0][0].norm_sqr() + m[0][1].norm_sqr()).sqrt();
    let row1 = (m[1][0].norm_sqr() + m[1][1].norm_sqr()).sqrt();
    let scaled = det.norm() / (row0 * row1);
    if !(scaled >= MIN_SCALED_DET) {
        return Err(HeunError::SingularMatrix { scaled_det: scaled });
    }
    let inv = [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ];
    Ok((inv, scaled))
}

/// Error of `x` in `m x = b` given absolute errors of the columns' values
/// (`col_err`, applied to both rows) and of `b`.
fn propagate(inv_mag: &[[f64; 2]; 2], x: [Complex64; 2], col_err: [f64; 2], b_err: f64) -> [f64; 2] {
    let row_err = b_err + col_err[0] * x[0].norm() + col_err[1] * x[1].norm();
    [
        (inv_mag[0][0] + inv_mag[0][1]) * row_err,
        (inv_mag[1][0] + inv_mag[1][1]) * row_err,
    ]
}

fn eval_zero_solution(
    params: &Params,
    which: Which,
    z: Complex64,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    continuation::eval_raw_traced(params, which, z, cfg, trace)
}

fn compute_one(params: &Params, which: Which, cfg: &Config) -> Result<OneConnection> {
    let zh = Complex64::new(cfg.one_matching_point, 0.0);
    let w = one_minus(zh);
    let mirrored = params.mirrored();
    let mut scratch = ContinuationTrace::default();
    let f0 = eval_zero_solution(params, which, zh, cfg, &mut scratch)?;
    let f1 = eval_zero_solution(&mirrored, Which::L, w, cfg, &mut scratch)?;
    let f2 = eval_zero_solution(&mirrored, Which::S, w, cfg, &mut scratch)?;
    let m = [[f1.f, f2.f], [-f1.df, -f2.df]];
    let (c, inv_mag, scaled_det) = solve2(&m, [f0.f, f0.df])?;
    let dc = propagate(&inv_mag, c, [f1.r, f2.r], f0.r);
    Ok(OneConnection {
        c1: c[0],
        c2: c[1],
        dc,
        scaled_det,
    })
}

/// `(C1, C2)` for `which = L` (`HeunCl`) or `(C1', C2')` for `which = S`,
/// from the global cache.
pub fn match_at_one(params: &Params, which: Which, cfg: &Config) -> Result<OneConnection> {
    CoeffCache::global().match_at_one(params, which, cfg)
}

/// The requested solution at 0 evaluated through the local solutions at 1.
pub fn eval_near_one(params: &Params, z: Complex64, which: Which, cfg: &Config) -> Result<EvalQuad> {
    let mut trace = ContinuationTrace::default();
    eval_near_one_traced(CoeffCache::global(), params, z, which, cfg, &mut trace)
}

pub(crate) fn eval_near_one_traced(
    cache: &CoeffCache,
    params: &Params,
    z: Complex64,
    which: Which,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    let z = upper_limit(z);
    let conn = cache.match_at_one(params, which, cfg)?;
    let mirrored = params.mirrored();
    let w = one_minus(z);
    let (c1, c2) = (conn.c1, conn.c2);
    let f1 = eval_zero_solution(&mirrored, Which::L, w, cfg, trace)?;
    let drop_second = c2.norm() <= 1e-12 * (c1.norm() + c2.norm());
    let f2 = match eval_zero_solution(&mirrored, Which::S, w, cfg, trace) {
        Ok(v) => v,
        Err(_) if w == ZERO && drop_second => EvalQuad {
            f: ZERO,
            df: ZERO,
            r: 0.0,
            n_terms: 0,
        },
        Err(HeunError::SingularValue { .. }) if w == ZERO => {
            return Err(HeunError::SingularValue {
                z,
                detail: "the requested function has a nonzero singular component at z = 1",
            })
        }
        Err(e) => return Err(e),
    };
    let (c2, f2) = if w == ZERO && drop_second {
        (ZERO, f2)
    } else {
        (c2, f2)
    };
    Ok(EvalQuad {
        f: c1 * f1.f + c2 * f2.f,
        df: -(c1 * f1.df + c2 * f2.df),
        r: c1.norm() * f1.r
            + c2.norm() * f2.r
            + conn.dc[0] * f1.f.norm()
            + conn.dc[1] * f2.f.norm(),
        n_terms: f1.n_terms + f2.n_terms,
    })
}

/// Angle of the matching ray in `sector`: `arg(i/ε)` if that lies inside the
/// sector, else `arg(-i/ε)`; a ray on the real axis is turned 1e-6 rad into
/// the sector.
pub fn matching_angle(epsilon: Complex64, sector: Sector) -> f64 {
    let w = Complex64::i() / epsilon;
    let inside = |v: Complex64| match sector {
        Sector::Upper => v.im > 0.0,
        Sector::Lower => v.im < 0.0,
    };
    if inside(w) {
        return w.arg();
    }
    if inside(-w) {
        return (-w).arg();
    }
    let nudge = 1e-6;
    match (sector, w.re > 0.0) {
        (Sector::Upper, true) => nudge,
        (Sector::Upper, false) => std::f64::consts::PI - nudge,
        (Sector::Lower, true) => -nudge,
        (Sector::Lower, false) => -std::f64::consts::PI + nudge,
    }
}

/// Waypoints from a far seed at `from` to `to`, detouring through `1 ± i`
/// when the straight segment passes within 1/2 of z = 1 away from its ends.
fn inward_legs(from: Complex64, to: Complex64) -> Vec<Complex64> {
    let d = to - from;
    let t = ((ONE - from) * d.conj()).re / d.norm_sqr();
    let mut legs = Vec::with_capacity(2);
    if t > 0.0 && t < 1.0 && (from + d * t - ONE).norm() < 0.5 {
        legs.push(Complex64::new(1.0, if Sector::of(to) == Sector::Upper { 1.0 } else { -1.0 }));
    }
    legs.push(to);
    legs
}

/// `A∞` at `z`: directly when `|εz|` reaches the far-field radius, otherwise
/// continued inward from `(R/|ε|) z/|z|`.
pub(crate) fn a_inf_traced(
    params: &Params,
    z: Complex64,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    let radius = cfg.far_field_radius();
    let eps = params.epsilon;
    if (eps * z).norm() >= radius {
        let v = eval_a_inf_eps(params, z, cfg.machine_eps)?.quad();
        trace.record(Hop {
            kind: HopKind::Asymptotic,
            from: z,
            to: z,
            r: v.r,
            n_terms: v.n_terms,
        });
        return Ok(EvalQuad {
            n_terms: v.n_terms + 1,
            ..v
        });
    }
    if z == ZERO {
        return Err(HeunError::SingularPoint { z });
    }
    let seed_at = z * (radius / (eps.norm() * z.norm()));
    let seed = eval_a_inf_eps(params, seed_at, cfg.machine_eps)?.quad();
    run(
        params,
        seed_at,
        seed,
        HopKind::Asymptotic,
        &inward_legs(seed_at, z),
        cfg,
        trace,
    )
}

/// `B∞(P; z) = e^{-εz} A∞(P'; z)`, with `A∞(P')` direct or continued.
pub(crate) fn b_inf_traced(
    params: &Params,
    z: Complex64,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    let g = a_inf_traced(&params.exp_transformed(), z, cfg, trace)?;
    let e = exp_factor(params.epsilon, z)?;
    Ok(EvalQuad {
        f: e * g.f,
        df: e * (g.df - params.epsilon * g.f),
        r: e.norm() * g.r,
        n_terms: g.n_terms,
    })
}

/// `A∞` at any `z ≠ 0`, continued inward from the far field when needed.
pub fn eval_a_inf_continued(params: &Params, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    require_epsilon(params, cfg)?;
    let mut trace = ContinuationTrace::default();
    a_inf_traced(params, upper_limit(z), cfg, &mut trace)
}

/// `B∞` at any `z ≠ 0`, continued inward from the far field when needed.
pub fn eval_b_inf_continued(params: &Params, z: Complex64, cfg: &Config) -> Result<EvalQuad> {
    require_epsilon(params, cfg)?;
    let mut trace = ContinuationTrace::default();
    b_inf_traced(params, upper_limit(z), cfg, &mut trace)
}

fn require_epsilon(params: &Params, cfg: &Config) -> Result<()> {
    if params.epsilon_is_zero(cfg.tau_zero) {
        return Err(HeunError::EpsilonZero {
            what: "the connection to infinity",
        });
    }
    Ok(())
}

fn compute_infinity(params: &Params, sector: Sector, cfg: &Config) -> Result<InfinityConnection> {
    require_epsilon(params, cfg)?;
    let eps = params.epsilon;
    let theta = matching_angle(eps, sector);
    let dir = Complex64::from_polar(1.0, theta);
    let zh = dir * cfg.infinity_matching_radius;
    let far_seed = dir * (cfg.far_field_radius() / eps.norm());

    let mut scratch = ContinuationTrace::default();
    let a = a_inf_traced(params, zh, cfg, &mut scratch)?;
    let b = b_inf_traced(params, zh, cfg, &mut scratch)?;
    let f1 = continuation::eval_heun_cl(params, zh, cfg)?;
    let f2 = continuation::eval_heun_cs(params, zh, cfg)?;

    let m = [[f1.f, f2.f], [f1.df, f2.df]];
    let (e, inv_e, det_e) = solve2(&m, [a.f, a.df])?;
    let (dr, inv_d, det_d) = solve2(&m, [b.f, b.df])?;
    let de = propagate(&inv_e, e, [f1.r, f2.r], a.r);
    let dd_rows = propagate(&inv_d, dr, [f1.r, f2.r], b.r);

    let big = [[e[0], e[1]], [dr[0], dr[1]]];
    let (d, det_big) = invert2(&big)?;
    // δd ≈ |d| |δM| |d|
    let dm = [[de[0], de[1]], [dd_rows[0], dd_rows[1]]];
    let mut dd = [[0.0; 2]; 2];
    for (i, row) in dd.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, dm_row) in dm.iter().enumerate() {
                for (l, dm_kl) in dm_row.iter().enumerate() {
                    acc += d[i][k].norm() * dm_kl * d[l][j].norm();
                }
            }
            *out = acc;
        }
    }
    let mut inverse_residual = 0.0f64;
    for (i, d_row) in d.iter().enumerate() {
        for j in 0..2 {
            let v = d_row[0] * big[0][j] + d_row[1] * big[1][j];
            let target = if i == j { ONE } else { ZERO };
            inverse_residual = inverse_residual.max((v - target).norm());
        }
    }
    Ok(InfinityConnection {
        sector,
        theta,
        matching_point: zh,
        far_seed,
        e,
        d_rows: dr,
        d,
        dd,
        inverse_residual,
        scaled_det: det_e.min(det_d).min(det_big),
    })
}

/// `(E±, D±, d±)` for `sector`, from the global cache.
pub fn match_at_infinity(params: &Params, sector: Sector, cfg: &Config) -> Result<InfinityConnection> {
    CoeffCache::global().match_at_infinity(params, sector, cfg)
}

/// Every available coefficient for `params`, from the global cache.
pub fn connection_set(params: &Params, cfg: &Config) -> Result<ConnectionSet> {
    CoeffCache::global().connection_set(params, cfg)
}

/// `HeunCl = d11 A∞ + d12 B∞` or `HeunCs = d21 A∞ + d22 B∞` in the sector
/// of `z`. Points with `|εz|` below the far-field radius are accepted; the
/// asymptotic solutions are then continued inward.
pub fn eval_far_field(params: &Params, z: Complex64, which: Which, cfg: &Config) -> Result<EvalQuad> {
    let mut trace = ContinuationTrace::default();
    eval_far_field_traced(CoeffCache::global(), params, z, which, cfg, &mut trace)
}

pub(crate) fn eval_far_field_traced(
    cache: &CoeffCache,
    params: &Params,
    z: Complex64,
    which: Which,
    cfg: &Config,
    trace: &mut ContinuationTrace,
) -> Result<EvalQuad> {
    require_epsilon(params, cfg)?;
    let z = upper_limit(z);
    let conn = cache.match_at_infinity(params, Sector::of(z), cfg)?;
    let row = match which {
        Which::L => 0,
        Which::S => 1,
    };
    let (d1, d2) = (conn.d[row][0], conn.d[row][1]);
    let (e1, e2) = (conn.dd[row][0], conn.dd[row][1]);
    let a = a_inf_traced(params, z, cfg, trace)?;
    let b = b_inf_traced(params, z, cfg, trace)?;
    Ok(EvalQuad {
        f: d1 * a.f + d2 * b.f,
        df: d1 * a.df + d2 * b.df,
        r: d1.norm() * a.r + d2.norm() * b.r + e1 * a.f.norm() + e2 * b.f.norm(),
        n_terms: a.n_terms + b.n_terms,
    })
}
