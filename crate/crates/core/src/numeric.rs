//! Small numerical kernels shared by the modules: certified bisection,
//! log-space arithmetic, Gauss-Legendre rules, least squares and exact
//! floating-point sums.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::cmp::Ordering;

/// Stopping rule for bracketed root finding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rtol: 1e-8,
            atol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Solve `f(t) = y` for nondecreasing `f` on `[lo, hi]`.
///
/// The bracket is checked before iterating; a target outside
/// `[f(lo), f(hi)]` is a range error carrying the attained bounds.
pub fn bisect_increasing<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    y: f64,
    tol: Tolerance,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if !(fa.is_finite() || fa == f64::NEG_INFINITY) || fb.is_nan() {
        return Err(Error::Numerical("non-finite bracket values".into()));
    }
    let slack = tol.rtol * y.abs() + tol.atol;
    if y < fa - slack || y > fb + slack {
        return Err(Error::Range {
            value: y,
            lo: fa,
            hi: fb,
        });
    }
    if (fa - y).abs() <= slack {
        return Ok(a);
    }
    if (fb - y).abs() <= slack {
        return Ok(b);
    }
    for _ in 0..tol.max_iter {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if (fm - y).abs() <= slack {
            return Ok(m);
        }
        if fm < y {
            a = m;
        } else {
            b = m;
        }
        if b - a <= f64::EPSILON * m.abs().max(f64::MIN_POSITIVE) {
            return Ok(0.5 * (a + b));
        }
    }
    Err(Error::Numerical(format!(
        "bisection did not converge in {} iterations",
        tol.max_iter
    )))
}

/// Bisect an increasing `f` on `[a, b]` until the bracket cannot shrink.
/// Assumes `f(a) <= y <= f(b)`; returns the point nearest the crossing.
pub fn bisect_full<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, y: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) < y {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub fn logaddexp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// `ln(1 - e^a)` for `a <= 0`.
pub fn log1mexp(a: f64) -> f64 {
    if a > -std::f64::consts::LN_2 {
        (-a.exp_m1()).ln()
    } else {
        (-a.exp()).ln_1p()
    }
}

/// `ln(e^u - 1)` for `u > 0`.
pub fn ln_expm1(u: f64) -> f64 {
    if u > 40.0 {
        u + (-(-u).exp()).ln_1p()
    } else if u < 1e-5 {
        u.ln() + 0.5 * u
    } else {
        u.exp_m1().ln()
    }
}

/// Five-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_47),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// Integrate `f` over `[a, b]` with `panels` equal five-point panels.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for i in 0..panels {
        let c = a + (i as f64 + 0.5) * h;
        for &(x, w) in GL5.iter() {
            s += w * f(c + 0.5 * h * x);
        }
    }
    0.5 * h * s
}

/// Least-squares fit `rows * coef ≈ y`; returns coefficients and the
/// residual sum of squares.
pub fn lstsq(rows: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let m = rows.len();
    if m == 0 || m != y.len() {
        return Err(Error::Input("empty or mismatched design".into()));
    }
    let k = rows[0].len();
    if m < k {
        return Err(Error::Input("fewer samples than unknowns".into()));
    }
    let a = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-12 * smax) {
        return Err(Error::Numerical(format!(
            "ill-conditioned design (singular values {smin:e} / {smax:e})"
        )));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let r = &a * &x - b;
    Ok((x.iter().copied().collect(), r.norm_squared()))
}

/// Ordinary least-squares line; returns `(slope, intercept)`.
pub fn linreg(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| vec![v, 1.0]).collect();
    let (c, _) = lstsq(&rows, y)?;
    Ok((c[0], c[1]))
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Exact sum of doubles held as a nonoverlapping expansion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        ExactSum::default()
    }

    pub fn from_value(x: f64) -> Self {
        let mut s = ExactSum::new();
        s.add(x);
        s
    }

    pub fn add(&mut self, mut x: f64) {
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let (hi, lo) = two_sum(x, y);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        if x != 0.0 {
            self.partials.push(x);
        }
    }

    pub fn add_sum(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// Multiply by `2^k`; exact as long as no partial leaves the normal range.
    pub fn scale_pow2(&self, k: i32) -> ExactSum {
        let f = 2f64.powi(k);
        ExactSum {
            partials: self.partials.iter().map(|p| p * f).collect(),
        }
    }

    /// Correctly rounded value of the sum.
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        if p.is_empty() {
            return 0.0;
        }
        let mut n = p.len() - 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            n -= 1;
            let x = hi;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }

    /// Sign of the exact sum.
    pub fn signum(&self) -> Ordering {
        match self.partials.last() {
            None => Ordering::Equal,
            Some(&x) => x.partial_cmp(&0.0).unwrap_or(Ordering::Equal),
        }
    }

    /// Exact comparison of two sums.
    pub fn cmp_exact(&self, other: &ExactSum) -> Ordering {
        let mut d = self.clone();
        for &p in &other.partials {
            d.add(-p);
        }
        d.signum()
    }
}

/// Fit of `e(z) ≈ a - lambda*z - k*ln z` on a window of large `z`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TailFit {
    pub lambda: f64,
    pub k: f64,
    pub rms: f64,
    pub z_end: f64,
}

pub fn tail_fit<F: Fn(f64) -> f64>(e: F, z0: f64, z1: f64) -> Result<TailFit> {
    let m = 64;
    let mut rows = Vec::with_capacity(m);
    let mut ys = Vec::with_capacity(m);
    let (l0, l1) = (z0.ln(), z1.ln());
    for i in 0..m {
        let z = (l0 + (l1 - l0) * i as f64 / (m - 1) as f64).exp();
        let v = e(z);
        if !v.is_finite() {
            return Err(Error::Numerical(format!("non-finite tail sample at z={z}")));
        }
        rows.push(vec![1.0, -z / z1, -z.ln()]);
        ys.push(v);
    }
    let (c, rss) = lstsq(&rows, &ys)?;
    Ok(TailFit {
        lambda: c[1] / z1,
        k: c[2],
        rms: (rss / m as f64).sqrt(),
        z_end: z1,
    })
}
