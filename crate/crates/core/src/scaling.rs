//! Scaling functions `Θ⁰_h`, `Θ^∞_h`, `Θ_h`, the composite `Ξ_{ψ,B}` and
//! the vanishing/stable classification.

use crate::asymptotics::LogPowerForm;
use crate::convex_calculus::YoungFunction;
use crate::error::{Error, Result};
use crate::numeric::lstsq;
use crate::table::{uniform_grid, LogFunction, LogTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Right limits `Θ(x⁺)` are evaluated at `x (1 + EPS_RIGHT)`.
pub const EPS_RIGHT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum MonotoneRepr {
    Power { gamma: f64 },
    Table(LogTable),
}

/// Increasing positive function on `(0, ∞)`, tabulated in log-log form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMap {
    repr: MonotoneRepr,
    /// Closed asymptotic form, when one is known.
    pub form: Option<LogPowerForm>,
    pub valid_near_zero: bool,
    pub valid_near_infinity: bool,
}

impl LogFunction for MonotoneMap {
    fn ln_eval(&self, x: f64) -> f64 {
        match &self.repr {
            MonotoneRepr::Power { gamma } => gamma * x,
            MonotoneRepr::Table(t) => t.ln_eval(x),
        }
    }

    fn ln_slope(&self, x: f64) -> f64 {
        match &self.repr {
            MonotoneRepr::Power { gamma } => *gamma,
            MonotoneRepr::Table(t) => t.ln_slope(x),
        }
    }

    fn log_domain(&self) -> (f64, f64) {
        match &self.repr {
            MonotoneRepr::Power { .. } => (-1500.0, 1500.0),
            MonotoneRepr::Table(t) => t.x_range(),
        }
    }
}

impl MonotoneMap {
    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::param(format!("exponent must be positive, got {gamma}")));
        }
        Ok(MonotoneMap {
            repr: MonotoneRepr::Power { gamma },
            form: None,
            valid_near_zero: true,
            valid_near_infinity: true,
        })
    }

    pub fn from_table(t: LogTable) -> Result<Self> {
        let ks = t.knots();
        let vals: Vec<f64> = ks.iter().map(|&x| t.ln_eval(x)).collect();
        if vals.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("monotone map is not strictly increasing".into()));
        }
        Ok(MonotoneMap {
            repr: MonotoneRepr::Table(t),
            form: None,
            valid_near_zero: true,
            valid_near_infinity: true,
        })
    }

    /// Tabulate `x ↦ ln h(e^x)` on a uniform grid.
    pub fn from_log_fn<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, step: f64) -> Result<Self> {
        let xs = uniform_grid(lo, hi, step);
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        if ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("monotone map sample not finite".into()));
        }
        Self::from_table(LogTable::from_log_values(xs, &ys, None, 0.0)?)
    }

    pub fn with_form(mut self, form: LogPowerForm) -> Self {
        self.form = Some(form);
        self
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.ln_eval(t.ln()).exp()
    }

    /// Inverse by bisection on the tabulated range.
    pub fn inverse(&self, y: f64) -> Result<f64> {
        crate::convex_calculus::inverse(self, y)
    }
}

/// `B^{-1}` viewed as a log-log function.
pub struct InverseYoung<'a>(pub &'a YoungFunction);

impl LogFunction for InverseYoung<'_> {
    fn ln_eval(&self, y: f64) -> f64 {
        self.0.ln_inverse(y).unwrap_or(f64::NAN)
    }

    fn log_domain(&self) -> (f64, f64) {
        let (a, b) = self.0.log_domain();
        (self.0.ln_eval(a), self.0.ln_eval(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThetaRegime {
    Zero,
    Infinity,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptions {
    /// Sample `t = 2^{∓k}` for `k = 1..=depth`.
    pub depth: usize,
    /// Spacing in `ln t` of the grid used by the global regime.
    pub global_step: f64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        ThetaOptions {
            depth: 60,
            global_step: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaEstimate {
    /// Estimated limit (limsup, or liminf for the lower variant).
    pub value: f64,
    /// Extreme ratio over all sampled `t` and its `ln t`.
    pub raw_extreme: f64,
    pub raw_at: f64,
    /// `(ln t, h(rt)/h(t))` in sampling order.
    pub sequence: Vec<(f64, f64)>,
    /// Whether `value` came from the polynomial fit in `1/k`.
    pub extrapolated: bool,
    pub unbounded: bool,
}

fn ratio<F: LogFunction + ?Sized>(h: &F, lr: f64, x: f64) -> Result<f64> {
    let a = h.ln_eval(x + lr);
    let b = h.ln_eval(x);
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Input(format!("h not positive and finite near ln t = {x}")));
    }
    Ok((a - b).exp())
}

/// Limit of `ratio_k` from `ratio_k ≈ a + b/k + c/k² + d/k³` over the
/// second half of the sequence; falls back to the extreme of that half.
fn extrapolate(seq: &[(f64, f64)], upper: bool) -> (f64, bool) {
    let m = seq.len();
    let start = m / 2;
    let tail: Vec<(f64, f64)> = (start..m).map(|i| ((i + 1) as f64, seq[i].1)).collect();
    let fallback = if upper {
        tail.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
    } else {
        tail.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    };
    if tail.len() < 8 {
        return (fallback, false);
    }
    let rows: Vec<Vec<f64>> = tail
        .iter()
        .map(|&(k, _)| vec![1.0, 1.0 / k, 1.0 / (k * k), 1.0 / (k * k * k)])
        .collect();
    let ys: Vec<f64> = tail.iter().map(|p| p.1).collect();
    let scale = ys.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    match lstsq(&rows, &ys) {
        Ok((c, rss)) => {
            let rms = (rss / ys.len() as f64).sqrt();
            if rms <= 1e-4 * scale && c[0].is_finite() && c[0] >= 0.0 {
                (c[0], true)
            } else {
                (fallback, false)
            }
        }
        Err(_) => (fallback, false),
    }
}

fn theta_impl<F: LogFunction + ?Sized>(
    h: &F,
    r: f64,
    regime: ThetaRegime,
    opts: ThetaOptions,
    upper: bool,
) -> Result<ThetaEstimate> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Input(format!("Θ needs r > 0, got {r}")));
    }
    if opts.depth < 2 {
        return Err(Error::param("Θ depth must be at least 2"));
    }
    let lr = r.ln();
    let pick = |a: f64, b: f64| if upper { a.max(b) } else { a.min(b) };
    let edge = |seq: &[(f64, f64)]| {
        let init = if upper { f64::NEG_INFINITY } else { f64::INFINITY };
        seq.iter().fold((init, 0.0), |acc, &(x, v)| {
            if (upper && v > acc.0) || (!upper && v < acc.0) {
                (v, x)
            } else {
                acc
            }
        })
    };
    let directional = |sign: f64| -> Result<ThetaEstimate> {
        let mut seq = Vec::with_capacity(opts.depth);
        for k in 1..=opts.depth {
            let x = sign * k as f64 * LN_2;
            seq.push((x, ratio(h, lr, x)?));
        }
        let (value, extrapolated) = extrapolate(&seq, upper);
        let (re, ra) = edge(&seq);
        Ok(ThetaEstimate {
            value,
            raw_extreme: re,
            raw_at: ra,
            unbounded: !value.is_finite() || value > 1e300,
            sequence: seq,
            extrapolated,
        })
    };
    match regime {
        ThetaRegime::Zero => directional(-1.0),
        ThetaRegime::Infinity => directional(1.0),
        ThetaRegime::Global => {
            let z = directional(-1.0)?;
            let i = directional(1.0)?;
            let (lo, hi) = h.log_domain();
            let a = lo.max(lo - lr);
            let b = hi.min(hi - lr);
            let mut seq = Vec::new();
            if b > a {
                for x in uniform_grid(a, b, opts.global_step) {
                    seq.push((x, ratio(h, lr, x)?));
                }
            }
            let (re, ra) = edge(&seq);
            let value = pick(pick(re, z.value), i.value);
            let (re, ra) = if pick(re, z.raw_extreme) == re {
                (re, ra)
            } else {
                (z.raw_extreme, z.raw_at)
            };
            let (re, ra) = if pick(re, i.raw_extreme) == re {
                (re, ra)
            } else {
                (i.raw_extreme, i.raw_at)
            };
            Ok(ThetaEstimate {
                value,
                raw_extreme: re,
                raw_at: ra,
                unbounded: !value.is_finite() || value > 1e300,
                sequence: seq,
                extrapolated: z.extrapolated || i.extrapolated,
            })
        }
    }
}

/// `Θ⁰_h(r)`, `Θ^∞_h(r)` or `Θ_h(r)`.
pub fn theta<F: LogFunction + ?Sized>(h: &F, r: f64, regime: ThetaRegime) -> Result<ThetaEstimate> {
    theta_impl(h, r, regime, ThetaOptions::default(), true)
}

pub fn theta_with<F: LogFunction + ?Sized>(
    h: &F,
    r: f64,
    regime: ThetaRegime,
    opts: ThetaOptions,
) -> Result<ThetaEstimate> {
    theta_impl(h, r, regime, opts, true)
}

/// Lower scaling function `Θ_*` (liminf / inf in place of limsup / sup).
pub fn theta_lower<F: LogFunction + ?Sized>(
    h: &F,
    r: f64,
    regime: ThetaRegime,
    opts: ThetaOptions,
) -> Result<ThetaEstimate> {
    theta_impl(h, r, regime, opts, false)
}

/// `Ξ_{ψ,B}(r) = r Θ_ψ(Θ_{B^{-1}}(1/r)⁺)`, with `Ξ(0) = 0`.
pub fn xi<F: LogFunction + ?Sized>(psi: &F, b: &YoungFunction, r: f64) -> Result<f64> {
    xi_with(psi, b, r, ThetaOptions::default())
}

pub fn xi_with<F: LogFunction + ?Sized>(
    psi: &F,
    b: &YoungFunction,
    r: f64,
    opts: ThetaOptions,
) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Input(format!("Ξ needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let inner = theta_with(&InverseYoung(b), 1.0 / r, ThetaRegime::Global, opts)?;
    if inner.unbounded {
        return Ok(f64::INFINITY);
    }
    let outer = theta_with(psi, inner.value * (1.0 + EPS_RIGHT), ThetaRegime::Global, opts)?;
    Ok(r * outer.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Vanishing,
    Stable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub class: Stability,
    /// `Θ⁰_ψ(2^{-8})` and `Θ⁰_ψ(2^{-16})`.
    pub theta_psi: (f64, f64),
    /// `Θ^∞_{B^{-1}}(2^{-8})` and `Θ^∞_{B^{-1}}(2^{-16})`.
    pub theta_b_inverse: (f64, f64),
    /// Whether `Θ(r₀²) <= Θ(r₀)²` held for both functions.
    pub submultiplicative_decay: bool,
    pub note: String,
}

pub const STABILITY_BAND: f64 = 0.02;

fn classify_one(t1: f64) -> Stability {
    if t1 < 1.0 - STABILITY_BAND {
        Stability::Vanishing
    } else if (t1 - 1.0).abs() <= STABILITY_BAND {
        Stability::Stable
    } else {
        Stability::Inconclusive
    }
}

/// Vanishing iff `Θ⁰_ψ(r) → 0` and `Θ^∞_{B^{-1}}(r) → 0` as `r → 0⁺`.
///
/// Each scaling function either tends to zero or is identically one on
/// `(0, 1]`, so its value at `r₀ = 2^{-8}` decides the case.
pub fn classify_stability<F: LogFunction + ?Sized>(psi: &F, b: &YoungFunction) -> Result<StabilityReport> {
    let r0 = 2f64.powi(-8);
    let p1 = theta(psi, r0, ThetaRegime::Zero)?.value;
    let p2 = theta(psi, r0 * r0, ThetaRegime::Zero)?.value;
    let binv = InverseYoung(b);
    let b1 = theta(&binv, r0, ThetaRegime::Infinity)?.value;
    let b2 = theta(&binv, r0 * r0, ThetaRegime::Infinity)?.value;
    let decay = p2 <= p1 * p1 * (1.0 + 1e-3) + 1e-12 && b2 <= b1 * b1 * (1.0 + 1e-3) + 1e-12;
    let (cp, cb) = (classify_one(p1), classify_one(b1));
    let class = match (cp, cb) {
        (Stability::Vanishing, Stability::Vanishing) => Stability::Vanishing,
        (Stability::Inconclusive, _) | (_, Stability::Inconclusive) => Stability::Inconclusive,
        _ => Stability::Stable,
    };
    Ok(StabilityReport {
        class,
        theta_psi: (p1, p2),
        theta_b_inverse: (b1, b2),
        submultiplicative_decay: decay,
        note: format!("ψ: {cp:?}, B^-1: {cb:?}"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingLawReport {
    pub regime: ThetaRegime,
    pub gamma: f64,
    pub points: usize,
    /// Largest relative excursion of `Θ(r)` outside `[min{1,r^γ}, max{1,r^γ}]`.
    pub bracket_excess: f64,
    /// Largest `Θ(rs) / (Θ(r)Θ(s)) - 1`.
    pub submultiplicative_excess: f64,
    /// Largest `|Θ_*(r) Θ(1/r) - 1|`.
    pub reciprocity_error: f64,
    /// Largest relative decrease of `Θ` between sorted sample points.
    pub monotone_excess: f64,
}

impl ScalingLawReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.bracket_excess <= tol
            && self.submultiplicative_excess <= tol
            && self.reciprocity_error <= tol
            && self.monotone_excess <= tol
    }
}

/// Sequence depth used by [`scaling_laws`]; slowly varying factors need
/// the longer tail.
pub const LAW_DEPTH: usize = 120;

/// Samples `ln r` uniformly in `[-span, span]` and checks the bracket,
/// submultiplicativity and reciprocity laws of `Θ` for an increasing `h`
/// with `h(t)/t^γ` non-increasing.
pub fn scaling_laws<F: LogFunction + ?Sized + Sync>(
    h: &F,
    gamma: f64,
    regime: ThetaRegime,
    points: usize,
    span: f64,
    seed: u64,
) -> Result<ScalingLawReport> {
    let opts = ThetaOptions {
        depth: LAW_DEPTH,
        ..ThetaOptions::default()
    };
    scaling_laws_with(h, gamma, regime, points, span, seed, opts)
}

pub fn scaling_laws_with<F: LogFunction + ?Sized + Sync>(
    h: &F,
    gamma: f64,
    regime: ThetaRegime,
    points: usize,
    span: f64,
    seed: u64,
    opts: ThetaOptions,
) -> Result<ScalingLawReport> {
    if regime == ThetaRegime::Global {
        return Err(Error::param("scaling laws are checked for the one-sided limits"));
    }
    if !(span > 0.0) || points == 0 {
        return Err(Error::param("need a positive span and at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(f64, f64)> = (0..points)
        .map(|_| (rng.random_range(-span..span), rng.random_range(-span..span)))
        .collect();
    let th = |lr: f64| theta_with(h, lr.exp(), regime, opts).map(|e| e.value);
    let rows: Vec<(f64, f64, f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(a, b)| -> Result<_> {
            let ta = th(a)?;
            let (lo, hi) = if a < 0.0 {
                ((gamma * a).exp(), 1.0)
            } else {
                (1.0, (gamma * a).exp())
            };
            let bracket = ((lo - ta) / lo).max((ta - hi) / hi).max(0.0);
            let sub = th(a + b)? / (ta * th(b)?) - 1.0;
            let low = theta_lower(h, a.exp(), regime, opts)?.value;
            let recip = (low * th(-a)? - 1.0).abs();
            Ok((a, ta, bracket, sub, recip))
        })
        .collect::<Result<_>>()?;
    let mut sorted: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0));
    let monotone_excess = sorted
        .windows(2)
        .map(|w| (w[0].1 - w[1].1) / w[0].1)
        .fold(0.0, f64::max);
    let worst = |f: fn(&(f64, f64, f64, f64, f64)) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(ScalingLawReport {
        regime,
        gamma,
        points,
        bracket_excess: worst(|r| r.2),
        submultiplicative_excess: worst(|r| r.3),
        reciprocity_error: worst(|r| r.4),
        monotone_excess,
    })
}
