//! Closed-form algebra on log-power classes: the distortion case tables
//! for power, power-log and exponential Young functions against power-log
//! gauges, exponent fitting, and comparison with the numeric pipeline.

use crate::distortion::DistortionBundle;
use crate::error::{Error, Result};
use crate::numeric::lstsq;
use crate::table::LogFunction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormRegime {
    /// `r^a (log 1/r)^b (log log 1/r)^c` as `r → 0⁺`
    NearZero,
    /// `t^a (log t)^b (log log t)^c` as `t → ∞`
    NearInfinity,
    /// `exp(t^a)` as `t → ∞`
    ExpNearInfinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPowerForm {
    pub regime: FormRegime,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl LogPowerForm {
    pub fn near_zero(a: f64, b: f64, c: f64) -> Self {
        LogPowerForm {
            regime: FormRegime::NearZero,
            a,
            b,
            c,
        }
    }

    pub fn near_infinity(a: f64, b: f64) -> Self {
        LogPowerForm {
            regime: FormRegime::NearInfinity,
            a,
            b,
            c: 0.0,
        }
    }

    pub fn exponential(gamma: f64) -> Self {
        LogPowerForm {
            regime: FormRegime::ExpNearInfinity,
            a: gamma,
            b: 0.0,
            c: 0.0,
        }
    }

    /// Logarithm of the form at `x = ln r` (or `ln t`).
    pub fn ln_eval(&self, x: f64) -> f64 {
        match self.regime {
            FormRegime::NearZero => {
                let l = -x;
                let mut v = self.a * x;
                if self.b != 0.0 {
                    v += self.b * l.ln();
                }
                if self.c != 0.0 {
                    v += self.c * l.ln().ln();
                }
                v
            }
            FormRegime::NearInfinity => {
                let mut v = self.a * x;
                if self.b != 0.0 {
                    v += self.b * x.ln();
                }
                if self.c != 0.0 {
                    v += self.c * x.ln().ln();
                }
                v
            }
            FormRegime::ExpNearInfinity => (self.a * x).exp(),
        }
    }

    /// Admissible as a gauge near zero: `a > 0`, or `a = 0` with `b < 0`.
    pub fn is_gauge_admissible(&self) -> bool {
        self.regime == FormRegime::NearZero
            && (self.a > 0.0 || (self.a == 0.0 && (self.b < 0.0 || (self.b == 0.0 && self.c < 0.0))))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormOutcome {
    pub form: LogPowerForm,
    /// Which case table and branch produced the form.
    pub case: String,
    pub flag: Option<String>,
}

pub fn distort_form(a_form: &LogPowerForm, phi_form: &LogPowerForm, n: usize) -> Result<LogPowerForm> {
    Ok(distort_form_detailed(a_form, phi_form, n)?.form)
}

pub fn distort_form_detailed(
    a_form: &LogPowerForm,
    phi_form: &LogPowerForm,
    n: usize,
) -> Result<FormOutcome> {
    if n == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    let nf = n as f64;
    if phi_form.regime != FormRegime::NearZero || phi_form.c != 0.0 {
        return Err(Error::Domain(
            "gauge form must be r^α (log 1/r)^β near zero".into(),
        ));
    }
    let (al, be) = (phi_form.a, phi_form.b);
    #[derive(PartialEq)]
    enum Gauge {
        Sub,
        Edge,
        EdgeLog,
    }
    let gk = if al > 0.0 && al < nf {
        Gauge::Sub
    } else if al == 0.0 && be < 0.0 {
        Gauge::Sub
    } else if al == nf && be == 0.0 {
        Gauge::Edge
    } else if al == nf && be > 0.0 {
        Gauge::EdgeLog
    } else {
        return Err(Error::Domain(format!(
            "no closed form: gauge exponents (α, β) = ({al}, {be}) outside the admissible alternatives"
        )));
    };
    let z = LogPowerForm::near_zero;
    let out = |form: LogPowerForm, case: &str, flag: Option<String>| {
        Ok(FormOutcome {
            form,
            case: case.to_string(),
            flag,
        })
    };
    match a_form.regime {
        FormRegime::NearZero => Err(Error::Domain(
            "Young function form must describe behaviour at infinity".into(),
        )),
        FormRegime::NearInfinity => {
            if a_form.c != 0.0 {
                return Err(Error::Domain("no closed form for Young functions with log-log factors".into()));
            }
            let (p, q) = (a_form.a, a_form.b);
            if p > nf {
                let d = p + al - nf;
                match gk {
                    Gauge::Sub => {
                        let flag = if al == 0.0 && q != 0.0 {
                            Some(format!(
                                "α = 0 with q = {q} ≠ 0: the first branch is applied literally and q drops out"
                            ))
                        } else {
                            None
                        };
                        out(
                            z(al * p / d, al * (q - be) / d + be, 0.0),
                            "power-log, p > n, 0 <= α < n",
                            flag,
                        )
                    }
                    Gauge::EdgeLog => out(
                        z(nf, be * (p - nf) / p, q * nf / p),
                        "power-log, p > n, α = n, β > 0",
                        None,
                    ),
                    Gauge::Edge => out(z(nf, 0.0, 0.0), "power-log, p > n, α = n, β = 0", None),
                }
            } else if p == nf && q > nf - 1.0 {
                let e = q - (nf - 1.0);
                match gk {
                    Gauge::Sub if al == 0.0 => out(
                        z(nf * be / (be + (nf - 1.0) - q), 0.0, 0.0),
                        "critical power, α = 0",
                        None,
                    ),
                    Gauge::Sub => out(z(nf, e, 0.0), "critical power, 0 < α < n", None),
                    Gauge::EdgeLog => out(z(nf, 0.0, e), "critical power, α = n, β > 0", None),
                    Gauge::Edge => out(z(nf, 0.0, 0.0), "critical power, α = n, β = 0", None),
                }
            } else {
                Err(Error::Domain(format!(
                    "no closed form: t^{p} (log t)^{q} does not give a continuous embedding in dimension {n}"
                )))
            }
        }
        FormRegime::ExpNearInfinity => {
            let g = a_form.a;
            if !(g > 0.0) {
                return Err(Error::Domain("exponential form needs γ > 0".into()));
            }
            match gk {
                Gauge::Sub => out(z(al, be - al / g, 0.0), "exponential, 0 <= α < n", None),
                Gauge::EdgeLog => out(z(nf, be, -nf / g), "exponential, α = n, β > 0", None),
                Gauge::Edge => out(z(nf, 0.0, 0.0), "exponential, α = n, β = 0", None),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub form: LogPowerForm,
    /// Root-mean-square residual in `ln value`.
    pub residual: f64,
    pub intercept: f64,
}

/// Least-squares fit of `ln v ≈ k + a ln r + b ln ln(1/r) [+ c ln ln ln(1/r)]`.
pub fn fit_exponents(samples: &[(f64, f64)], with_c: bool) -> Result<ExponentFit> {
    if samples.len() < 20 {
        return Err(Error::Input(format!(
            "need at least 20 samples, got {}",
            samples.len()
        )));
    }
    let rmax = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let rmin = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if !(rmin > 0.0) || !(rmax < 1.0) {
        return Err(Error::Input("samples must lie in (0, 1)".into()));
    }
    if with_c && !(rmax < (-1f64).exp()) {
        return Err(Error::Input("log-log fits need r < 1/e".into()));
    }
    if rmax / rmin < 1e4 {
        return Err(Error::Numerical(format!(
            "samples span {:.2} decades; at least 4 are needed",
            (rmax / rmin).log10()
        )));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut ys = Vec::with_capacity(samples.len());
    for &(r, v) in samples {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Input(format!("non-positive sample value {v}")));
        }
        let l = (1.0 / r).ln();
        let mut row = vec![1.0, r.ln(), l.ln()];
        if with_c {
            row.push(l.ln().ln());
        }
        rows.push(row);
        ys.push(v.ln());
    }
    let (c, rss) = lstsq(&rows, &ys)?;
    Ok(ExponentFit {
        form: LogPowerForm::near_zero(c[1], c[2], if with_c { c[3] } else { 0.0 }),
        residual: (rss / ys.len() as f64).sqrt(),
        intercept: c[0],
    })
}

pub const CROSSCHECK_R_MIN: f64 = 1e-12;
pub const CROSSCHECK_DECADES: f64 = 3.0;

/// `sup |d - mean d|` with `d = ln(ψ/form)` over `[r_lo, r_hi]`.
pub fn crosscheck_range<F: LogFunction + ?Sized>(
    psi: &F,
    form: &LogPowerForm,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64> {
    if form.regime != FormRegime::NearZero {
        return Err(Error::Domain("crosscheck compares forms near zero".into()));
    }
    if !(0.0 < r_lo && r_lo < r_hi && r_hi < 1.0) {
        return Err(Error::Input("crosscheck range must satisfy 0 < r_lo < r_hi < 1".into()));
    }
    let m = 301;
    let (a, b) = (r_lo.ln(), r_hi.ln());
    let mut d = Vec::with_capacity(m);
    for i in 0..m {
        let x = a + (b - a) * i as f64 / (m - 1) as f64;
        let v = psi.ln_eval(x) - form.ln_eval(x);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("log-ratio not finite at ln r = {x}")));
        }
        d.push(v);
    }
    let mean = d.iter().sum::<f64>() / m as f64;
    Ok(d.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max))
}

/// Deviation of the numeric `ψ` from `form` over three decades starting at
/// `r = 1e-12`.
pub fn crosscheck(bundle: &DistortionBundle, form: &LogPowerForm) -> Result<f64> {
    crosscheck_range(
        bundle,
        form,
        CROSSCHECK_R_MIN,
        CROSSCHECK_R_MIN * 10f64.powf(CROSSCHECK_DECADES),
    )
}
