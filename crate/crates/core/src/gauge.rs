//! Gauge functions `φ`, their normalization `φ°(r) = r^n inf_{t≤r} φ(t)/t^n`
//! and the scaled family `φ_k(t) = φ(kt)`.
//!
//! Closed forms use `log_base(shift + 1/r)` in place of `log(1/r)`, so that
//! every family is an increasing function on all of `(0, ∞)` with the same
//! behaviour near zero.

use crate::convex_calculus::{default_e, Verdict, EPS_K, EPS_LAMBDA};
use crate::error::{Error, Result};
use crate::numeric::{tail_fit, TailFit};
use crate::table::{uniform_grid, LogFunction, LogTable};
use serde::{Deserialize, Serialize};
use std::f64::consts::E;

pub const GAUGE_LOG_EXTENT: f64 = 1500.0;
const NORMALIZE_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GaugeRepr {
    Power { alpha: f64 },
    /// `r^alpha (log_base(shift + 1/r))^beta`
    PowerLog { alpha: f64, beta: f64, shift: f64, base: f64 },
    Table(LogTable),
}

fn ln_log_inv(x: f64, shift: f64) -> f64 {
    // ln(shift + e^{-x})
    let ls = shift.ln();
    if -x > ls {
        -x + (shift * x.exp()).ln_1p()
    } else {
        ls + ((-x - ls).exp()).ln_1p()
    }
}

impl GaugeRepr {
    fn ln_eval(&self, x: f64) -> f64 {
        match self {
            GaugeRepr::Power { alpha } => alpha * x,
            GaugeRepr::PowerLog {
                alpha,
                beta,
                shift,
                base,
            } => alpha * x + beta * (ln_log_inv(x, *shift).ln() - base.ln().ln()),
            GaugeRepr::Table(t) => t.ln_eval(x),
        }
    }

    fn ln_slope(&self, x: f64) -> f64 {
        match self {
            GaugeRepr::Power { alpha } => *alpha,
            GaugeRepr::PowerLog {
                alpha, beta, shift, ..
            } => {
                let w = if x < 0.0 {
                    1.0 / (1.0 + shift * x.exp())
                } else {
                    let e = (-x).exp();
                    e / (e + shift)
                };
                alpha - beta * w / ln_log_inv(x, *shift)
            }
            GaugeRepr::Table(t) => t.ln_slope(x),
        }
    }

    fn log_domain(&self) -> (f64, f64) {
        match self {
            GaugeRepr::Table(t) => t.x_range(),
            _ => (-GAUGE_LOG_EXTENT, GAUGE_LOG_EXTENT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Normalization {
    /// `φ(r)/r^n` was already non-increasing.
    Identity,
    /// Running minimum of `ln φ - n ln r`.
    Table(LogTable),
}

/// A gauge function in dimension `n`, normalized at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    repr: GaugeRepr,
    norm: Normalization,
    n: usize,
    /// `ln k` for the scaled gauge `φ(k·)`.
    offset: f64,
}

/// JSON description of a gauge function family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum GaugeSpec {
    Power {
        alpha: f64,
    },
    Powerlog {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_e")]
        shift: f64,
        #[serde(default = "default_e")]
        base: f64,
    },
    Logpower {
        beta: f64,
        #[serde(default = "default_e")]
        shift: f64,
        #[serde(default = "default_e")]
        base: f64,
    },
    Table {
        log_knots: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeDocument {
    pub n: usize,
    #[serde(flatten)]
    pub gauge: GaugeSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaugeCondition {
    NontrivialFeb3,
    RatioFeb8,
    NotLebesgueFeb4,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaugeReport {
    pub verdict: Verdict,
    /// Fit of `ln(φ(r)/r^n)` against `ln(1/r)` near zero.
    pub fit: Option<TailFit>,
    pub note: String,
}

impl LogFunction for GaugeFunction {
    fn ln_eval(&self, x: f64) -> f64 {
        let y = x + self.offset;
        match &self.norm {
            Normalization::Identity => self.repr.ln_eval(y),
            Normalization::Table(t) => t.ln_eval(y),
        }
    }

    fn ln_slope(&self, x: f64) -> f64 {
        let y = x + self.offset;
        match &self.norm {
            Normalization::Identity => self.repr.ln_slope(y),
            Normalization::Table(t) => t.ln_slope(y),
        }
    }

    fn log_domain(&self) -> (f64, f64) {
        let (a, b) = match &self.norm {
            Normalization::Identity => self.repr.log_domain(),
            Normalization::Table(t) => t.x_range(),
        };
        (a - self.offset, b - self.offset)
    }
}

impl GaugeFunction {
    pub fn power(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::param(format!("gauge power must be positive, got {alpha}")));
        }
        Self::from_repr(GaugeRepr::Power { alpha }, n)
    }

    /// `r^alpha (ln(e + 1/r))^beta`
    pub fn power_log(alpha: f64, beta: f64, n: usize) -> Result<Self> {
        Self::power_log_with(alpha, beta, E, E, n)
    }

    pub fn power_log_with(alpha: f64, beta: f64, shift: f64, base: f64, n: usize) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || alpha < 0.0 {
            return Err(Error::param(format!("invalid gauge exponents ({alpha}, {beta})")));
        }
        if alpha == 0.0 && !(beta < 0.0) {
            return Err(Error::param("a pure logarithmic gauge needs beta < 0"));
        }
        if !(shift > 1.0) || !(base > 1.0) || !shift.is_finite() || !base.is_finite() {
            return Err(Error::param("gauge shift and base must exceed 1"));
        }
        Self::from_repr(
            GaugeRepr::PowerLog {
                alpha,
                beta,
                shift,
                base,
            },
            n,
        )
    }

    /// `(ln(e + 1/r))^beta` with `beta < 0`.
    pub fn log_power(beta: f64, n: usize) -> Result<Self> {
        Self::power_log(0.0, beta, n)
    }

    pub fn from_log_knots(knots: &[[f64; 2]], n: usize) -> Result<Self> {
        let xs: Vec<f64> = knots.iter().map(|k| k[0]).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k[1]).collect();
        let t = LogTable::from_log_values(xs, &ys, None, 0.0)?;
        Self::from_repr(GaugeRepr::Table(t), n)
    }

    pub fn from_spec(spec: &GaugeSpec, n: usize) -> Result<Self> {
        match spec {
            GaugeSpec::Power { alpha } => Self::power(*alpha, n),
            GaugeSpec::Powerlog {
                alpha,
                beta,
                shift,
                base,
            } => Self::power_log_with(*alpha, *beta, *shift, *base, n),
            GaugeSpec::Logpower { beta, shift, base } => {
                Self::power_log_with(0.0, *beta, *shift, *base, n)
            }
            GaugeSpec::Table { log_knots } => Self::from_log_knots(log_knots, n),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: GaugeDocument = serde_json::from_str(s).map_err(|e| Error::from_json(&e))?;
        Self::from_spec(&doc.gauge, doc.n)
    }

    /// Validates `φ`, checks the nontriviality condition at zero and
    /// normalizes.
    pub fn from_repr(repr: GaugeRepr, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        let (lo, hi) = repr.log_domain();
        let grid = uniform_grid(lo, hi, NORMALIZE_STEP);
        let vals: Vec<f64> = grid.iter().map(|&x| repr.ln_eval(x)).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("gauge not finite on its domain"));
        }
        if vals.windows(2).any(|w| w[1] < w[0]) || !(vals[1] > vals[0]) {
            return Err(Error::param("gauge is not increasing on its domain"));
        }
        let raw = GaugeFunction {
            repr,
            norm: Normalization::Identity,
            n,
            offset: 0.0,
        };
        let feb3 = check_gauge(&raw, GaugeCondition::NontrivialFeb3)?;
        if feb3.verdict == Verdict::False {
            return Err(Error::ConditionFailed(format!(
                "liminf φ(r)/r^n = 0 at the origin; the measure vanishes identically ({:?})",
                feb3.fit
            )));
        }
        let nf = n as f64;
        let gs: Vec<f64> = grid.iter().zip(&vals).map(|(x, v)| v - nf * x).collect();
        if gs.windows(2).all(|w| w[1] <= w[0]) {
            return Ok(raw);
        }
        let mut run = gs.clone();
        for i in 1..run.len() {
            run[i] = run[i].min(run[i - 1]);
        }
        let ds: Vec<f64> = grid
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let d = raw.repr.ln_slope(x) - nf;
                if run[i] == gs[i] && d <= 0.0 {
                    d
                } else {
                    0.0
                }
            })
            .collect();
        let t = LogTable::new(grid, run, Some(ds), nf)?;
        Ok(GaugeFunction {
            norm: Normalization::Table(t),
            ..raw
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn repr(&self) -> &GaugeRepr {
        &self.repr
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn scale_offset(&self) -> f64 {
        self.offset
    }

    pub fn eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.ln_eval(r.ln()).exp()
    }

    /// `ln φ` before normalization.
    pub fn ln_eval_raw(&self, x: f64) -> f64 {
        self.repr.ln_eval(x + self.offset)
    }

    pub fn eval_raw(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.ln_eval_raw(r.ln()).exp()
    }

    pub fn is_identity_normalized(&self) -> bool {
        matches!(self.norm, Normalization::Identity)
    }
}

/// `φ°`; idempotent since construction already normalizes.
pub fn normalize_gauge(phi: &GaugeFunction) -> Result<GaugeFunction> {
    Ok(phi.clone())
}

/// `φ_k(t) = φ(kt)`.
pub fn scale_gauge(phi: &GaugeFunction, k: f64) -> Result<GaugeFunction> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::param(format!("scale must be positive, got {k}")));
    }
    Ok(GaugeFunction {
        offset: phi.offset + k.ln(),
        ..phi.clone()
    })
}

/// Verdict on a condition at the origin, judged on the raw gauge.
pub fn check_gauge(phi: &GaugeFunction, which: GaugeCondition) -> Result<GaugeReport> {
    let nf = phi.n as f64;
    let (lo, hi) = phi.repr.log_domain();
    let (lo, hi) = (lo - phi.offset, hi - phi.offset);
    if which == GaugeCondition::RatioFeb8 {
        let grid = uniform_grid(lo, hi, NORMALIZE_STEP);
        let mut worst: f64 = 0.0;
        let mut prev = f64::INFINITY;
        for &x in &grid {
            let g = phi.ln_eval_raw(x) - nf * x;
            worst = worst.max(g - prev);
            prev = g;
        }
        return Ok(GaugeReport {
            verdict: Verdict::from_bool(worst <= 1e-12),
            fit: None,
            note: format!("largest increase of ln(φ(r)/r^n) between grid points: {worst:e}"),
        });
    }
    let zend = -lo;
    if !(zend > 1.0) {
        return Err(Error::Input("gauge domain does not reach below r = 1/e".into()));
    }
    let e = |z: f64| phi.ln_eval_raw(-z) + nf * z;
    let fit = tail_fit(e, crate::convex_calculus::tail_start(zend), zend)?;
    let constant = fit.lambda.abs() < 1e-9 && fit.k.abs() < 1e-6;
    // sign of the drift of ln(φ/r^n) as r -> 0: -1 toward -∞, +1 toward +∞
    let drift = if fit.rms > 1e-3 * (1.0 + fit.lambda.abs() * zend) {
        None
    } else if constant {
        Some(0)
    } else if fit.lambda > EPS_LAMBDA {
        Some(-1)
    } else if fit.lambda < -EPS_LAMBDA {
        Some(1)
    } else if fit.k > EPS_K {
        Some(-1)
    } else if fit.k < -EPS_K {
        Some(1)
    } else {
        None
    };
    let (verdict, note) = match which {
        GaugeCondition::NontrivialFeb3 => (
            match drift {
                Some(-1) => Verdict::False,
                Some(_) => Verdict::True,
                None => Verdict::Inconclusive,
            },
            "liminf of φ(r)/r^n at 0 positive",
        ),
        GaugeCondition::NotLebesgueFeb4 => (
            match drift {
                Some(1) => Verdict::True,
                Some(_) => Verdict::False,
                None => Verdict::Inconclusive,
            },
            "φ(r)/r^n unbounded at 0",
        ),
        GaugeCondition::RatioFeb8 => unreachable!(),
    };
    Ok(GaugeReport {
        verdict,
        fit: Some(fit),
        note: note.into(),
    })
}
