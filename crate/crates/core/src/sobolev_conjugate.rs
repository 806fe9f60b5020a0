//! The Sobolev conjugate `B` of a Young function `A` in dimension `n`,
//! obtained as the Young conjugate of
//! `B̃(t) = t^{n'} ∫_t^∞ Ã(s) / s^{1+n'} ds`, and the companion
//! `Φ_B(r) = r B^{-1}(1/r)^n`.

use crate::convex_calculus::{
    check_condition, conjugate_table, Condition, ConjugateOptions, Verdict, YoungFunction,
};
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, logaddexp, GL5};
use crate::table::{uniform_grid, LogFunction, LogTable};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SobolevReport {
    pub n: usize,
    #[serde(skip)]
    pub b: YoungFunction,
    #[serde(skip)]
    pub b_tilde: Option<YoungFunction>,
    /// Largest correction applied to keep `B(t)/t^n` non-decreasing.
    pub monotone_repair: f64,
    /// Tail remainder of the last knot relative to the full tail integral.
    pub tail_remainder_fraction: f64,
    /// Fitted `(lambda, k)` of `ln(Ã(s)/s^{n'}) ≈ a - lambda ln s - k ln ln s`.
    pub tail_fit: Option<(f64, f64)>,
    /// Extreme values of `B^{-1}/A^{-1}` on the tail of the grid.
    pub equivalence: (f64, f64),
    /// Smallest `c` with `B(t) <= A(c t)` on the grid.
    pub domination: f64,
}

pub fn sobolev_conjugate(a: &YoungFunction, n: usize) -> Result<YoungFunction> {
    Ok(sobolev_conjugate_report(a, n)?.b)
}

pub fn sobolev_conjugate_report(a: &YoungFunction, n: usize) -> Result<SobolevReport> {
    sobolev_conjugate_with(a, n, ConjugateOptions::default())
}

pub fn sobolev_conjugate_with(
    a: &YoungFunction,
    n: usize,
    opts: ConjugateOptions,
) -> Result<SobolevReport> {
    if n == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if n == 1 {
        return Ok(SobolevReport {
            n,
            b: a.clone(),
            b_tilde: None,
            monotone_repair: 0.0,
            tail_remainder_fraction: 0.0,
            tail_fit: None,
            equivalence: (1.0, 1.0),
            domination: 1.0,
        });
    }
    for which in [Condition::EmbeddingFeb1, Condition::DivergenceFeb7] {
        let rep = check_condition(a, n, which)?;
        match rep.verdict {
            Verdict::True => {}
            Verdict::False => {
                return Err(Error::ConditionFailed(format!("{which:?} fails: {:?}", rep.fit)))
            }
            Verdict::Inconclusive => {
                return Err(Error::Inconclusive(format!(
                    "{which:?} undecided: {:?}",
                    rep.fit
                )))
            }
        }
    }
    let nf = n as f64;
    let np = nf / (nf - 1.0);
    let at = conjugate_table(a, opts, 0.0)?;
    let xs = at.knots().to_vec();
    let g = |y: f64| at.ln_eval(y) - np * y;
    let m = xs.len();
    let x_end = xs[m - 1];

    // remainder beyond the last knot from a local log-power model
    let gx = g(x_end);
    let d1 = at.ln_slope(x_end) - np;
    let x0 = (0.5 * x_end).max(xs[0]);
    let d0 = at.ln_slope(x0) - np;
    let (k, lam) = if x_end > 2.0 && x0 > 1.0 {
        let k = (d1 - d0) / (1.0 / x0 - 1.0 / x_end);
        (k, -d1 - k / x_end)
    } else {
        (0.0, -d1)
    };
    let ln_rem = tail_remainder(gx, x_end, lam, k)?;

    let mut ln_i = vec![0.0; m];
    ln_i[m - 1] = ln_rem;
    for j in (0..m - 1).rev() {
        let (y0, y1) = (xs[j], xs[j + 1]);
        let h = 0.5 * (y1 - y0);
        let c = 0.5 * (y0 + y1);
        let mut seg = f64::NEG_INFINITY;
        for &(u, w) in GL5.iter() {
            seg = logaddexp(seg, w.ln() + g(c + h * u));
        }
        ln_i[j] = logaddexp(ln_i[j + 1], seg + h.ln());
    }
    let full = ln_i[m - 1 - (m - 1).min(500)];
    let tail_remainder_fraction = (ln_rem - full).exp();
    let slopes: Vec<f64> = (0..m)
        .map(|j| -(g(xs[j]) - ln_i[j]).exp())
        .collect();
    let bt_table = LogTable::new(xs, ln_i, Some(slopes), np)?;
    if bt_table.max_increase() > 0.0 {
        return Err(Error::Numerical("tail integral is not monotone".into()));
    }
    let b_tilde = YoungFunction::from_table_unchecked(bt_table);

    let bt = conjugate_table(&b_tilde, opts, nf)?;
    let bx = bt.knots().to_vec();
    let mut bg = bt.residuals().to_vec();
    let mut repair: f64 = 0.0;
    for i in 1..bg.len() {
        if bg[i] < bg[i - 1] {
            repair = repair.max(bg[i - 1] - bg[i]);
            bg[i] = bg[i - 1];
        }
    }
    if repair > 1e-9 {
        return Err(Error::Numerical(format!(
            "B(t)/t^n decreases by {repair:e} on the grid"
        )));
    }
    let bd: Vec<f64> = bx.iter().map(|&x| (bt.ln_slope(x) - nf).max(0.0)).collect();
    let b = YoungFunction::from_table_unchecked(LogTable::new(bx, bg, Some(bd), nf)?);

    let equivalence = equivalence_constants(a, &b)?;
    let domination = domination_constant(a, &b)?;
    Ok(SobolevReport {
        n,
        b,
        b_tilde: Some(b_tilde),
        monotone_repair: repair,
        tail_remainder_fraction,
        tail_fit: Some((lam, k)),
        equivalence,
        domination,
    })
}

/// `ln ∫_X^∞ exp(g)` for `g(y) ≈ g(X) - lam (y - X) - k ln(y/X)`.
fn tail_remainder(gx: f64, x_end: f64, lam: f64, k: f64) -> Result<f64> {
    let lam_eff = if lam.abs() < 1e-3 && k > 1.05 { lam.max(0.0) } else { lam };
    if lam_eff < 0.0 || (lam_eff == 0.0 && k <= 1.0) {
        return Err(Error::ConditionFailed(format!(
            "tail integral diverges (rate {lam:e}, log exponent {k})"
        )));
    }
    if x_end <= 1.0 {
        return Ok(gx - lam_eff.ln());
    }
    if lam_eff == 0.0 {
        return Ok(gx + x_end.ln() - (k - 1.0).ln());
    }
    if lam_eff * x_end < 1e-6 * k {
        return Ok(gx + x_end.ln() - (k - 1.0).ln());
    }
    let lx = lam_eff * x_end;
    let expo = |w: f64| -lx * w.exp_m1() + (1.0 - k) * w;
    let mut wmax = 1e-3;
    while expo(wmax) > -60.0 && wmax < 1e4 {
        wmax *= 2.0;
    }
    let v = gauss_legendre(|w| expo(w).exp(), 0.0, wmax, 400);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Numerical("tail remainder quadrature failed".into()));
    }
    Ok(gx + x_end.ln() + v.ln())
}

fn equivalence_constants(a: &YoungFunction, b: &YoungFunction) -> Result<(f64, f64)> {
    let (_, ahi) = a.log_domain();
    let (_, bhi) = b.log_domain();
    let top = a.ln_eval(ahi).min(b.ln_eval(bhi));
    let bottom = top - 10f64.ln() * 3.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for y in uniform_grid(bottom, top, (top - bottom) / 200.0) {
        let r = (b.ln_inverse(y)? - a.ln_inverse(y)?).exp();
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

fn domination_constant(a: &YoungFunction, b: &YoungFunction) -> Result<f64> {
    let (lo, hi) = b.log_domain();
    let mut c: f64 = 0.0;
    for x in uniform_grid(lo, hi, 0.5) {
        let v = a.ln_inverse(b.ln_eval(x))? - x;
        c = c.max(v.exp());
    }
    Ok(c)
}

/// `Φ_B(r) = r B^{-1}(1/r)^n`, with `Φ_B(0) = 0`.
pub fn phi_b(b: &YoungFunction, n: usize, r: f64) -> Result<f64> {
    if r.is_nan() || r < 0.0 {
        return Err(Error::Input(format!("Φ_B needs r >= 0, got {r}")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    Ok(ln_phi_b(b, n, r.ln())?.exp())
}

pub fn ln_phi_b(b: &YoungFunction, n: usize, x: f64) -> Result<f64> {
    Ok(x + n as f64 * b.ln_inverse(-x)?)
}
