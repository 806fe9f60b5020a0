//! Shape-preserving cubic Hermite tables in log-log coordinates.
//!
//! A table stores `g(x) = ln F(e^x) - shift * x` at knots together with
//! slopes `g'`. Slopes pass through the Fritsch-Carlson limiter, so `g`
//! is monotone on every segment where the knot data are monotone. Outside
//! the knots the table continues linearly in `g`, i.e. as a power law.

use crate::error::{Error, Result};
use crate::numeric::bisect_full;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogTable {
    xs: Vec<f64>,
    gs: Vec<f64>,
    ds: Vec<f64>,
    shift: f64,
}

fn pchip_slopes(xs: &[f64], gs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|k| (gs[k + 1] - gs[k]) / h[k]).collect();
    let mut d = vec![0.0; n];
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    for k in 1..n - 1 {
        if del[k - 1] * del[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
        }
    }
    let end = |h0: f64, h1: f64, d0: f64, d1: f64| {
        let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if s * d0 <= 0.0 {
            0.0
        } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
            3.0 * d0
        } else {
            s
        }
    };
    d[0] = end(h[0], h[1], del[0], del[1]);
    d[n - 1] = end(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
    d
}

fn limit_slopes(xs: &[f64], gs: &[f64], ds: &mut [f64]) {
    for k in 0..xs.len() - 1 {
        let del = (gs[k + 1] - gs[k]) / (xs[k + 1] - xs[k]);
        if del == 0.0 {
            ds[k] = 0.0;
            ds[k + 1] = 0.0;
            continue;
        }
        let mut a = ds[k] / del;
        let mut b = ds[k + 1] / del;
        if a < 0.0 {
            ds[k] = 0.0;
            a = 0.0;
        }
        if b < 0.0 {
            ds[k + 1] = 0.0;
            b = 0.0;
        }
        let r = a * a + b * b;
        if r > 9.0 {
            let tau = 3.0 / r.sqrt();
            ds[k] = tau * a * del;
            ds[k + 1] = tau * b * del;
        }
    }
}

impl LogTable {
    /// Build from knots `xs`, residual values `gs` and optional slopes of
    /// `gs`; without slopes, monotone PCHIP slopes are used.
    pub fn new(xs: Vec<f64>, gs: Vec<f64>, slopes: Option<Vec<f64>>, shift: f64) -> Result<Self> {
        if xs.len() < 2 || xs.len() != gs.len() {
            return Err(Error::Input("table needs at least two knots".into()));
        }
        if xs.iter().chain(gs.iter()).any(|v| !v.is_finite()) || !shift.is_finite() {
            return Err(Error::Input("table knots must be finite".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("table abscissae must be strictly increasing".into()));
        }
        let mut ds = match slopes {
            Some(d) => {
                if d.len() != xs.len() || d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Input("slope vector malformed".into()));
                }
                d
            }
            None => pchip_slopes(&xs, &gs),
        };
        limit_slopes(&xs, &gs, &mut ds);
        Ok(LogTable { xs, gs, ds, shift })
    }

    /// Build from `ln F` values and optional `d ln F / d ln t` slopes.
    pub fn from_log_values(
        xs: Vec<f64>,
        ln_f: &[f64],
        ln_slopes: Option<&[f64]>,
        shift: f64,
    ) -> Result<Self> {
        if ln_f.len() != xs.len() {
            return Err(Error::Input("value vector length mismatch".into()));
        }
        let gs = xs.iter().zip(ln_f).map(|(x, f)| f - shift * x).collect();
        let ds = ln_slopes.map(|s| s.iter().map(|v| v - shift).collect());
        LogTable::new(xs, gs, ds, shift)
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn knots(&self) -> &[f64] {
        &self.xs
    }

    pub fn residuals(&self) -> &[f64] {
        &self.gs
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&v| v <= x);
        k.clamp(1, self.xs.len() - 1) - 1
    }

    /// Residual `g(x)` and its slope.
    pub fn g_and_slope(&self, x: f64) -> (f64, f64) {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return (self.gs[0] + self.ds[0] * (x - self.xs[0]), self.ds[0]);
        }
        if x >= self.xs[n - 1] {
            return (
                self.gs[n - 1] + self.ds[n - 1] * (x - self.xs[n - 1]),
                self.ds[n - 1],
            );
        }
        let k = self.segment(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (g0, g1, d0, d1) = (self.gs[k], self.gs[k + 1], self.ds[k], self.ds[k + 1]);
        let omt = 1.0 - t;
        let h00 = (1.0 + 2.0 * t) * omt * omt;
        let h10 = t * omt * omt;
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let g = h00 * g0 + h10 * h * d0 + h01 * g1 + h11 * h * d1;
        let dg = (6.0 * t * t - 6.0 * t) * (g0 - g1) / h
            + (3.0 * t * t - 4.0 * t + 1.0) * d0
            + (3.0 * t * t - 2.0 * t) * d1;
        (g, dg)
    }

    pub fn ln_eval(&self, x: f64) -> f64 {
        self.shift * x + self.g_and_slope(x).0
    }

    pub fn ln_slope(&self, x: f64) -> f64 {
        self.shift + self.g_and_slope(x).1
    }

    /// Solve `ln_eval(x) = y`, assuming `ln_eval` is increasing.
    pub fn ln_inverse(&self, y: f64) -> Result<f64> {
        let n = self.xs.len();
        let v0 = self.shift * self.xs[0] + self.gs[0];
        let vn = self.shift * self.xs[n - 1] + self.gs[n - 1];
        if y < v0 {
            let s = self.shift + self.ds[0];
            if s <= 0.0 {
                return Err(Error::Range { value: y, lo: v0, hi: vn });
            }
            return Ok(self.xs[0] + (y - v0) / s);
        }
        if y > vn {
            let s = self.shift + self.ds[n - 1];
            if s <= 0.0 {
                return Err(Error::Range { value: y, lo: v0, hi: vn });
            }
            return Ok(self.xs[n - 1] + (y - vn) / s);
        }
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.shift * self.xs[mid] + self.gs[mid] < y {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let k = lo;
        if k == 0 {
            return Ok(self.xs[0]);
        }
        let (a, b) = (self.xs[k - 1], self.xs[k]);
        Ok(bisect_full(|x| self.ln_eval(x), a, b, y))
    }

    /// Largest decrease of `g` between consecutive knots (0 if nondecreasing).
    pub fn max_decrease(&self) -> f64 {
        self.gs
            .windows(2)
            .map(|w| (w[0] - w[1]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest increase of `g` between consecutive knots (0 if nonincreasing).
    pub fn max_increase(&self) -> f64 {
        self.gs
            .windows(2)
            .map(|w| (w[1] - w[0]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// A positive function handled through `x = ln t ↦ ln F(e^x)`.
pub trait LogFunction {
    fn ln_eval(&self, x: f64) -> f64;

    fn ln_slope(&self, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1.0);
        (self.ln_eval(x + h) - self.ln_eval(x - h)) / (2.0 * h)
    }

    /// Range of `ln t` on which the function is represented.
    fn log_domain(&self) -> (f64, f64);
}

impl LogFunction for LogTable {
    fn ln_eval(&self, x: f64) -> f64 {
        LogTable::ln_eval(self, x)
    }

    fn ln_slope(&self, x: f64) -> f64 {
        LogTable::ln_slope(self, x)
    }

    fn log_domain(&self) -> (f64, f64) {
        self.x_range()
    }
}

/// Uniform grid on `[a, b]` with spacing close to `h`, endpoints included.
pub fn uniform_grid(a: f64, b: f64, h: f64) -> Vec<f64> {
    let m = (((b - a) / h).ceil() as usize).max(1);
    (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect()
}
