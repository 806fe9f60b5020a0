//! Young functions: closed-form families and log-log tables, with
//! evaluation, inversion, Legendre conjugation, Matuszewska-Orlicz
//! indices, integrability conditions and Luxemburg norms.

use crate::error::{Error, Result};
use crate::numeric::{bisect_full, log1mexp, logaddexp, tail_fit, TailFit, Tolerance};
use crate::table::{uniform_grid, LogFunction, LogTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

pub const CLOSED_FORM_LOG_EXTENT: f64 = 1500.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum YoungRepr {
    Power { p: f64 },
    /// `t^p (log_base(shift + t))^q`
    PowerLog { p: f64, q: f64, shift: f64, base: f64 },
    /// `exp(t^gamma) - 1`
    Exp { gamma: f64 },
    Table(LogTable),
    /// Power head `t^m` (matched in value) below `e^x0`, `inner` above.
    Glued { m: f64, x0: f64, l0: f64, inner: Box<YoungRepr> },
}

fn ln_log_shift(x: f64, shift: f64) -> f64 {
    // ln(shift + e^x)
    let ls = shift.ln();
    if x > ls {
        x + (shift * (-x).exp()).ln_1p()
    } else {
        ls + ((x - ls).exp()).ln_1p()
    }
}

fn frac_up(x: f64, shift: f64) -> f64 {
    // e^x / (shift + e^x)
    if x > 0.0 {
        1.0 / (1.0 + shift * (-x).exp())
    } else {
        let ex = x.exp();
        ex / (shift + ex)
    }
}

impl YoungRepr {
    fn ln_eval(&self, x: f64) -> f64 {
        match self {
            YoungRepr::Power { p } => p * x,
            YoungRepr::PowerLog { p, q, shift, base } => {
                p * x + q * (ln_log_shift(x, *shift).ln() - base.ln().ln())
            }
            YoungRepr::Exp { gamma } => {
                let gx = gamma * x;
                if gx < -20.0 {
                    gx + 0.5 * gx.exp()
                } else {
                    crate::numeric::ln_expm1(gx.exp())
                }
            }
            YoungRepr::Table(t) => t.ln_eval(x),
            YoungRepr::Glued { m, x0, l0, inner } => {
                if x < *x0 {
                    l0 + m * (x - x0)
                } else {
                    inner.ln_eval(x)
                }
            }
        }
    }

    fn ln_slope(&self, x: f64) -> f64 {
        match self {
            YoungRepr::Power { p } => *p,
            YoungRepr::PowerLog { p, q, shift, .. } => {
                p + q * frac_up(x, *shift) / ln_log_shift(x, *shift)
            }
            YoungRepr::Exp { gamma } => {
                let gx = gamma * x;
                if gx < -20.0 {
                    gamma * (1.0 + 0.5 * gx.exp())
                } else {
                    let u = gx.exp();
                    gamma * u / (-(-u).exp_m1())
                }
            }
            YoungRepr::Table(t) => t.ln_slope(x),
            YoungRepr::Glued { m, x0, inner, .. } => {
                if x < *x0 {
                    *m
                } else {
                    inner.ln_slope(x)
                }
            }
        }
    }
}

/// A Young function `A`, handled through `ln A(e^x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoungFunction {
    repr: YoungRepr,
    ln_floor: f64,
    ln_ceil: f64,
}

impl LogFunction for YoungFunction {
    fn ln_eval(&self, x: f64) -> f64 {
        self.repr.ln_eval(x)
    }

    fn ln_slope(&self, x: f64) -> f64 {
        self.repr.ln_slope(x)
    }

    fn log_domain(&self) -> (f64, f64) {
        (self.ln_floor, self.ln_ceil)
    }
}

/// JSON description of a Young function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum YoungSpec {
    Power {
        p: f64,
        #[serde(default)]
        head: Option<f64>,
    },
    Powerlog {
        p: f64,
        q: f64,
        #[serde(default = "default_e")]
        shift: f64,
        #[serde(default = "default_e")]
        base: f64,
        #[serde(default)]
        head: Option<f64>,
    },
    Exp {
        gamma: f64,
        #[serde(default)]
        head: Option<f64>,
    },
    Table {
        log_knots: Vec<[f64; 2]>,
        #[serde(default)]
        head: Option<f64>,
    },
}

pub(crate) fn default_e() -> f64 {
    E
}

impl YoungFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::param(format!("power exponent must exceed 1, got {p}")));
        }
        Self::closed(YoungRepr::Power { p }, CLOSED_FORM_LOG_EXTENT)
    }

    /// `t^p (ln(e + t))^q`
    pub fn power_log(p: f64, q: f64) -> Result<Self> {
        Self::power_log_with(p, q, E, E)
    }

    pub fn power_log_with(p: f64, q: f64, shift: f64, base: f64) -> Result<Self> {
        if !(p >= 1.0) || !q.is_finite() || !p.is_finite() {
            return Err(Error::param(format!("power-log parameters invalid: p={p}, q={q}")));
        }
        if !(shift > 1.0) || !(base > 1.0) || !shift.is_finite() || !base.is_finite() {
            return Err(Error::param("power-log shift and base must exceed 1"));
        }
        Self::closed(YoungRepr::PowerLog { p, q, shift, base }, CLOSED_FORM_LOG_EXTENT)
    }

    /// `exp(t^gamma) - 1`
    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::param(format!("gamma must be positive, got {gamma}")));
        }
        let f = Self::exponential_raw(gamma);
        f.validate()?;
        Ok(f)
    }

    fn exponential_raw(gamma: f64) -> Self {
        YoungFunction {
            repr: YoungRepr::Exp { gamma },
            ln_floor: -CLOSED_FORM_LOG_EXTENT,
            ln_ceil: 1e5f64.ln() / gamma,
        }
    }

    /// Tabulated from `(ln t, ln A(t))` knots.
    pub fn from_log_knots(knots: &[[f64; 2]]) -> Result<Self> {
        let xs: Vec<f64> = knots.iter().map(|k| k[0]).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k[1]).collect();
        let t = LogTable::from_log_values(xs, &ys, None, 0.0)?;
        Self::from_table(t)
    }

    pub fn from_table(t: LogTable) -> Result<Self> {
        let (a, b) = t.x_range();
        let f = YoungFunction {
            repr: YoungRepr::Table(t),
            ln_floor: a,
            ln_ceil: b,
        };
        f.validate()?;
        Ok(f)
    }

    pub(crate) fn from_table_unchecked(t: LogTable) -> Self {
        let (a, b) = t.x_range();
        YoungFunction {
            repr: YoungRepr::Table(t),
            ln_floor: a,
            ln_ceil: b,
        }
    }

    fn closed(repr: YoungRepr, extent: f64) -> Result<Self> {
        let f = YoungFunction {
            repr,
            ln_floor: -extent,
            ln_ceil: extent,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn from_spec(spec: &YoungSpec) -> Result<Self> {
        let (f, head) = match spec {
            YoungSpec::Power { p, head } => (Self::power(*p)?, *head),
            YoungSpec::Powerlog {
                p,
                q,
                shift,
                base,
                head,
            } => (Self::power_log_with(*p, *q, *shift, *base)?, *head),
            YoungSpec::Exp { gamma, head } => {
                if !(*gamma > 0.0) || !gamma.is_finite() {
                    return Err(Error::param(format!("gamma must be positive, got {gamma}")));
                }
                match head {
                    Some(m) => return Self::exponential_raw(*gamma).with_head(*m),
                    None => (Self::exponential(*gamma)?, None),
                }
            }
            YoungSpec::Table { log_knots, head } => (Self::from_log_knots(log_knots)?, *head),
        };
        match head {
            Some(m) => f.with_head(m),
            None => Ok(f),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: YoungSpec = serde_json::from_str(s).map_err(|e| Error::from_json(&e))?;
        Self::from_spec(&spec)
    }

    pub fn repr(&self) -> &YoungRepr {
        &self.repr
    }

    pub fn domain_floor(&self) -> f64 {
        self.ln_floor.exp()
    }

    pub fn domain_ceil(&self) -> f64 {
        self.ln_ceil.exp()
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.ln_eval(t.ln()).exp()
    }

    /// `ln A^{-1}(e^y)`, continuing past the representable domain the same
    /// way evaluation does.
    pub fn ln_inverse(&self, y: f64) -> Result<f64> {
        match &self.repr {
            YoungRepr::Power { p } => Ok(y / p),
            YoungRepr::Table(t) => t.ln_inverse(y),
            _ => ln_inverse_unbounded(self, y),
        }
    }

    pub fn as_table(&self) -> Option<&LogTable> {
        match &self.repr {
            YoungRepr::Table(t) => Some(t),
            _ => None,
        }
    }

    /// Replace `A` below the point where its log-slope first reaches `m`
    /// by the matching power `c t^m`. The result is equivalent to `A`
    /// near infinity.
    pub fn with_head(&self, m: f64) -> Result<Self> {
        if !(m > 1.0) || !m.is_finite() {
            return Err(Error::param(format!("head exponent must exceed 1, got {m}")));
        }
        let inner = match &self.repr {
            YoungRepr::Glued { inner, .. } => (**inner).clone(),
            r => r.clone(),
        };
        let grid = uniform_grid(self.ln_floor, self.ln_ceil, 0.05);
        let k = grid
            .iter()
            .position(|&x| inner.ln_slope(x) >= m)
            .ok_or_else(|| Error::Domain(format!("log-slope never reaches head exponent {m}")))?;
        let x0 = if k == 0 {
            grid[0]
        } else {
            bisect_full(|x| inner.ln_slope(x), grid[k - 1], grid[k], m)
        };
        let l0 = inner.ln_eval(x0);
        let f = YoungFunction {
            repr: YoungRepr::Glued {
                m,
                x0,
                l0,
                inner: Box::new(inner),
            },
            ln_floor: self.ln_floor,
            ln_ceil: self.ln_ceil,
        };
        f.validate()?;
        Ok(f)
    }

    /// Convexity and monotonicity of `A(t)/t` on the evaluation grid.
    pub fn validate(&self) -> Result<()> {
        let grid = uniform_grid(self.ln_floor, self.ln_ceil, 0.25);
        let mut prev = f64::NEG_INFINITY;
        for &x in &grid {
            let l = self.ln_eval(x);
            let s = self.ln_slope(x);
            if !l.is_finite() || !s.is_finite() {
                return Err(Error::param(format!("Young function not finite at ln t = {x}")));
            }
            if s < 1.0 - 1e-9 {
                return Err(Error::param(format!(
                    "A(t)/t decreases near ln t = {x} (log-slope {s})"
                )));
            }
            let d = l - x + s.ln();
            if d < prev - 1e-9 * (1.0 + prev.abs()) {
                return Err(Error::param(format!("A is not convex near ln t = {x}")));
            }
            prev = prev.max(d);
        }
        Ok(())
    }
}

/// Solve `ln F(e^x) = y` for increasing `F`, widening the bracket beyond
/// the representable domain when needed.
pub fn ln_inverse_unbounded<F: LogFunction + ?Sized>(f: &F, y: f64) -> Result<f64> {
    let (mut a, mut b) = f.log_domain();
    let w = (b - a).max(1.0);
    let mut step = w;
    for _ in 0..60 {
        if f.ln_eval(a) <= y {
            break;
        }
        a -= step;
        step *= 2.0;
    }
    step = w;
    for _ in 0..60 {
        if f.ln_eval(b) >= y {
            break;
        }
        b += step;
        step *= 2.0;
    }
    let (fa, fb) = (f.ln_eval(a), f.ln_eval(b));
    if !(fa <= y && y <= fb) {
        return Err(Error::Range {
            value: y.exp(),
            lo: fa.exp(),
            hi: fb.exp(),
        });
    }
    Ok(bisect_full(|x| f.ln_eval(x), a, b, y))
}

/// Solve `F(t) = y` by certified bisection on the representable domain.
pub fn inverse<F: LogFunction + ?Sized>(f: &F, y: f64) -> Result<f64> {
    inverse_with(f, y, Tolerance::default())
}

pub fn inverse_with<F: LogFunction + ?Sized>(f: &F, y: f64, tol: Tolerance) -> Result<f64> {
    if y.is_nan() || y < 0.0 {
        return Err(Error::Input(format!("inverse needs a nonnegative target, got {y}")));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let (a, b) = f.log_domain();
    let (fa, fb) = (f.ln_eval(a), f.ln_eval(b));
    let ly = y.ln();
    if ly < fa || ly > fb {
        return Err(Error::Range {
            value: y,
            lo: fa.exp(),
            hi: fb.exp(),
        });
    }
    let mut lo = a;
    let mut hi = b;
    for _ in 0..tol.max_iter.max(1) {
        let m = 0.5 * (lo + hi);
        let fm = f.ln_eval(m).exp();
        if (fm - y).abs() <= tol.rtol * y + tol.atol {
            lo = m;
            hi = m;
            break;
        }
        if fm < y {
            lo = m;
        } else {
            hi = m;
        }
        if hi - lo <= 4.0 * f64::EPSILON * m.abs().max(1.0) {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    let t = x.exp();
    let fx = f.ln_eval(x).exp();
    if (fx - y).abs() > tol.rtol * y + tol.atol && (hi - lo) > 1e-12 * x.abs().max(1.0) {
        return Err(Error::Numerical("inverse did not reach tolerance".into()));
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConjugateOptions {
    /// Spacing of the output grid in `ln s`.
    pub step: f64,
    /// Output grid is clipped to `|ln s| <= window`.
    pub window: f64,
}

impl Default for ConjugateOptions {
    fn default() -> Self {
        ConjugateOptions {
            step: 0.02,
            window: 1000.0,
        }
    }
}

/// `ln A'(e^u) = ln A(e^u) - u + ln (d ln A / d ln t)`.
fn ln_derivative<F: LogFunction + ?Sized>(a: &F, u: f64) -> f64 {
    a.ln_eval(u) - u + a.ln_slope(u).ln()
}

/// Young conjugate `sup {s t - A(t)}` tabulated on a log grid.
pub fn conjugate(a: &YoungFunction) -> Result<YoungFunction> {
    conjugate_with(a, ConjugateOptions::default())
}

pub fn conjugate_with(a: &YoungFunction, opts: ConjugateOptions) -> Result<YoungFunction> {
    let t = conjugate_table(a, opts, 0.0)?;
    Ok(YoungFunction::from_table_unchecked(t))
}

pub(crate) fn conjugate_table<F: LogFunction + Sync + ?Sized>(
    a: &F,
    opts: ConjugateOptions,
    shift: f64,
) -> Result<LogTable> {
    let (lo, hi) = a.log_domain();
    let us = uniform_grid(lo, hi, 0.05);
    let fs: Vec<f64> = us.iter().map(|&u| ln_derivative(a, u)).collect();
    if fs.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("derivative not finite on the grid".into()));
    }
    let mut fmono = fs.clone();
    for i in 1..fmono.len() {
        if fmono[i] < fmono[i - 1] {
            if fmono[i - 1] - fmono[i] > 1e-8 * (1.0 + fmono[i].abs()) {
                return Err(Error::Numerical(format!(
                    "derivative decreases near ln t = {}",
                    us[i]
                )));
            }
            fmono[i] = fmono[i - 1];
        }
    }
    let s_lo = fmono[0].max(-opts.window);
    let s_hi = fmono[fmono.len() - 1].min(opts.window);
    if !(s_hi - s_lo > 4.0 * opts.step) {
        return Err(Error::Range {
            value: s_hi.exp(),
            lo: fmono[0].exp(),
            hi: fmono[fmono.len() - 1].exp(),
        });
    }
    let ys = uniform_grid(s_lo, s_hi, opts.step);
    let solved: Result<Vec<(f64, f64)>> = ys
        .par_iter()
        .map(|&y| {
            let k = fmono.partition_point(|&v| v < y).clamp(1, fmono.len() - 1);
            let u = bisect_full(|u| ln_derivative(a, u), us[k - 1], us[k], y);
            let arg = a.ln_eval(u) - u - y;
            if !(arg < 0.0) {
                return Err(Error::Numerical(format!(
                    "conjugate degenerate at ln s = {y}: A(t)/t is not below s t"
                )));
            }
            let v = y + u + log1mexp(arg);
            let slope = (y + u - v).exp();
            Ok((v, slope))
        })
        .collect();
    let solved = solved?;
    let vals: Vec<f64> = solved.iter().map(|p| p.0).collect();
    let slopes: Vec<f64> = solved.iter().map(|p| p.1).collect();
    LogTable::from_log_values(ys, &vals, Some(&slopes), shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexRegime {
    Infinity,
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexEstimate {
    /// Last value of the sequence, or `cap` when the sequence exceeded it.
    pub value: f64,
    /// `(lambda, estimate)` for `lambda = 2, 4, ..., 2^20`.
    pub sequence: Vec<(f64, f64)>,
    pub converged: bool,
    pub exceeds_cap: bool,
    pub cap: f64,
}

pub const INDEX_CAP: f64 = 1000.0;

/// Lower Matuszewska-Orlicz index near infinity or globally.
pub fn matuszewska_index<F: LogFunction + ?Sized>(a: &F, regime: IndexRegime) -> Result<IndexEstimate> {
    let (lo, hi) = a.log_domain();
    let mut seq = Vec::with_capacity(20);
    for k in 1..=20 {
        let lam = 2f64.powi(k);
        let ll = lam.ln();
        let xs: Vec<f64> = match regime {
            IndexRegime::Infinity => uniform_grid(hi - 10f64.ln(), hi, 10f64.ln() / 63.0),
            IndexRegime::Global => {
                let top = (hi - ll).max(lo);
                uniform_grid(lo, top, ((top - lo) / 2000.0).max(1e-3))
            }
        };
        let mut m = f64::INFINITY;
        for &x in &xs {
            let r = (a.ln_eval(x + ll) - a.ln_eval(x)) / ll;
            if !r.is_finite() {
                return Err(Error::Numerical(format!("index ratio not finite at ln t = {x}")));
            }
            m = m.min(r);
        }
        seq.push((lam, m));
    }
    let last = seq[seq.len() - 1].1;
    let exceeds_cap = last > INDEX_CAP;
    let tail: Vec<f64> = seq[seq.len() - 4..].iter().map(|p| p.1).collect();
    let spread = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let converged = !exceeds_cap && spread <= 1e-2 * last.abs().max(1.0);
    Ok(IndexEstimate {
        value: if exceeds_cap { INDEX_CAP } else { last },
        sequence: seq,
        converged,
        exceeds_cap,
        cap: INDEX_CAP,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    True,
    False,
    Inconclusive,
}

impl Verdict {
    pub fn is_true(self) -> bool {
        self == Verdict::True
    }

    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }

    pub fn negate(self) -> Self {
        match self {
            Verdict::True => Verdict::False,
            Verdict::False => Verdict::True,
            Verdict::Inconclusive => Verdict::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    EmbeddingFeb1,
    DivergenceFeb7,
    Positivity0inf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub verdict: Verdict,
    /// Fitted exponential rate and logarithmic exponent of the integrand.
    pub fit: Option<TailFit>,
    pub note: String,
}

pub(crate) const EPS_LAMBDA: f64 = 1e-6;
pub(crate) const EPS_K: f64 = 0.05;

/// Integrability of `exp(e(z))` at `z = ∞` from a tail fit.
pub(crate) fn integrable(fit: &TailFit) -> Verdict {
    if fit.rms > 1e-3 * (1.0 + fit.lambda.abs() * fit.z_end) {
        return Verdict::Inconclusive;
    }
    if fit.lambda > EPS_LAMBDA {
        Verdict::True
    } else if fit.lambda < -EPS_LAMBDA {
        Verdict::False
    } else if fit.k > 1.0 + EPS_K {
        Verdict::True
    } else if fit.k < 1.0 - EPS_K {
        Verdict::False
    } else {
        Verdict::Inconclusive
    }
}

pub fn check_condition<F: LogFunction + ?Sized>(a: &F, n: usize, which: Condition) -> Result<ConditionReport> {
    if n == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    let (lo, hi) = a.log_domain();
    match which {
        Condition::Positivity0inf => {
            let grid = uniform_grid(lo, hi, 0.25);
            let ok = grid.iter().all(|&x| a.ln_eval(x).is_finite());
            Ok(ConditionReport {
                verdict: Verdict::from_bool(ok),
                fit: None,
                note: "finite and positive on the representable domain".into(),
            })
        }
        Condition::EmbeddingFeb1 | Condition::DivergenceFeb7 if n == 1 => Ok(ConditionReport {
            verdict: Verdict::True,
            fit: None,
            note: "vacuous in dimension 1".into(),
        }),
        Condition::EmbeddingFeb1 => {
            let nm1 = (n - 1) as f64;
            let e = |z: f64| z + (z - a.ln_eval(z)) / nm1;
            let fit = tail_fit(e, tail_start(hi), hi)?;
            Ok(ConditionReport {
                verdict: integrable_or_superlinear(&e, &fit),
                fit: Some(fit),
                note: "integrability of (t/A(t))^(1/(n-1)) at infinity".into(),
            })
        }
        Condition::DivergenceFeb7 => {
            let nm1 = (n - 1) as f64;
            let e = |z: f64| -z + (-z - a.ln_eval(-z)) / nm1;
            let zend = -lo;
            let fit = tail_fit(e, tail_start(zend), zend)?;
            Ok(ConditionReport {
                verdict: integrable_or_superlinear(&e, &fit).negate(),
                fit: Some(fit),
                note: "divergence of (t/A(t))^(1/(n-1)) at zero".into(),
            })
        }
    }
}

/// Falls back on the local slope when `e` leaves the log-power class, as
/// for exponential growth of `A`.
fn integrable_or_superlinear<E: Fn(f64) -> f64>(e: &E, fit: &TailFit) -> Verdict {
    let v = integrable(fit);
    if v != Verdict::Inconclusive {
        return v;
    }
    let z1 = fit.z_end;
    let z0 = tail_start(z1);
    let h = 1e-3 * (z1 - z0);
    let slope = |z: f64| (e(z) - e(z - h)) / h;
    let (s0, s1) = (slope(z0 + h), slope(z1));
    if !(s0.is_finite() && s1.is_finite()) {
        return Verdict::Inconclusive;
    }
    if s1 < -1.0 && s1 < 2.0 * s0.min(0.0) {
        Verdict::True
    } else if s1 > 1.0 && s1 > 2.0 * s0.max(0.0) {
        Verdict::False
    } else {
        Verdict::Inconclusive
    }
}

pub(crate) fn tail_start(zend: f64) -> f64 {
    if zend > 8.0 {
        zend / 4.0
    } else {
        (zend - 2.0).max(0.5 * zend)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub location: Vec<f64>,
    pub weight: f64,
}

/// Discretized field: one magnitude per weighted sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub points: Vec<SamplePoint>,
    pub values: Vec<f64>,
}

impl FieldSample {
    pub fn new(points: Vec<SamplePoint>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::Input("points and values differ in length".into()));
        }
        if points.iter().any(|p| !(p.weight > 0.0) || !p.weight.is_finite()) {
            return Err(Error::Input("weights must be positive and finite".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input("values must be finite and nonnegative".into()));
        }
        Ok(FieldSample { points, values })
    }

    /// Values with weights and no locations.
    pub fn weighted(weights: &[f64], values: &[f64]) -> Result<Self> {
        let pts = weights
            .iter()
            .map(|&w| SamplePoint {
                location: Vec::new(),
                weight: w,
            })
            .collect();
        FieldSample::new(pts, values.to_vec())
    }

    pub fn scaled(&self, c: f64) -> Self {
        FieldSample {
            points: self.points.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }
}

/// `ln ∫ A(|f|/λ)` at `ln λ = ll`.
pub fn ln_modular<F: LogFunction + ?Sized>(f: &FieldSample, a: &F, ll: f64) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for (p, &v) in f.points.iter().zip(&f.values) {
        if v > 0.0 {
            acc = logaddexp(acc, p.weight.ln() + a.ln_eval(v.ln() - ll));
        }
    }
    acc
}

/// Luxemburg norm; the modular at the returned value lies in `[1 - 1e-10, 1]`.
pub fn luxemburg_norm<F: LogFunction + ?Sized>(f: &FieldSample, a: &F) -> Result<f64> {
    if f.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input("field values must be finite and nonnegative".into()));
    }
    let vmax = f.values.iter().cloned().fold(0.0, f64::max);
    if vmax == 0.0 {
        return Ok(0.0);
    }
    let m = |ll: f64| ln_modular(f, a, ll);
    let mut hi = vmax.ln();
    let mut step = 1.0;
    while m(hi) > 0.0 {
        hi += step;
        step *= 2.0;
    }
    let mut lo = hi - 1.0;
    step = 1.0;
    while m(lo) <= 0.0 {
        lo -= step;
        step *= 2.0;
    }
    let target = (1.0 - 1e-10f64).ln();
    for _ in 0..200 {
        if m(hi) >= target {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if m(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi.exp())
}
