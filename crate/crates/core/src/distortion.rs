//! The distortion pipeline `J(s) = s B^{-1}(φ(s)/s^n)`, `ψ = φ ∘ J^{-1}`,
//! and the measure, content and Lebesgue-image bounds built on it.

use crate::convex_calculus::{check_condition, Condition, ConjugateOptions, Verdict, YoungFunction};
use crate::error::{Error, Result};
use crate::gauge::{GaugeFunction, GaugeRepr};
use crate::numeric::{bisect_full, logaddexp};
use crate::scaling::{
    classify_stability, theta, xi, InverseYoung, MonotoneMap, Stability, StabilityReport,
    ThetaRegime, EPS_RIGHT,
};
use crate::sobolev_conjugate::{ln_phi_b, sobolev_conjugate_with, SobolevReport};
use crate::table::{uniform_grid, LogFunction, LogTable};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    pub conjugate: ConjugateOptions,
    /// Spacing of the `ln s` grid on which `J` is tabulated.
    pub j_step: f64,
    /// `J` is tabulated for `|ln s| <= j_window`.
    pub j_window: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            conjugate: ConjugateOptions::default(),
            j_step: 0.05,
            j_window: 1000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DistortionBundle {
    /// Young function as supplied.
    pub a: YoungFunction,
    /// Young function actually used; differs from `a` when a power head was
    /// glued on to restore divergence at zero.
    pub a_used: YoungFunction,
    pub head_exponent: Option<f64>,
    pub b: YoungFunction,
    pub sobolev: SobolevReport,
    pub phi: GaugeFunction,
    pub n: usize,
    j_x: Vec<f64>,
    j_ln: Vec<f64>,
    psi: MonotoneMap,
}

pub fn build_distortion(a: &YoungFunction, phi: &GaugeFunction, n: usize) -> Result<DistortionBundle> {
    build_distortion_with(a, phi, n, BuildOptions::default())
}

fn require(rep_verdict: Verdict, what: &str, detail: String) -> Result<()> {
    match rep_verdict {
        Verdict::True => Ok(()),
        Verdict::False => Err(Error::ConditionFailed(format!("{what}: {detail}"))),
        Verdict::Inconclusive => Err(Error::Inconclusive(format!("{what}: {detail}"))),
    }
}

pub fn build_distortion_with(
    a: &YoungFunction,
    phi: &GaugeFunction,
    n: usize,
    opts: BuildOptions,
) -> Result<DistortionBundle> {
    if n == 0 || phi.n() != n {
        return Err(Error::param(format!(
            "dimension mismatch: n = {n}, gauge dimension {}",
            phi.n()
        )));
    }
    let pos = check_condition(a, n, Condition::Positivity0inf)?;
    require(pos.verdict, "A not finite and positive", pos.note)?;
    let feb1 = check_condition(a, n, Condition::EmbeddingFeb1)?;
    require(feb1.verdict, "∫^∞ (t/A(t))^(1/(n-1)) dt diverges", format!("{:?}", feb1.fit))?;
    let feb7 = check_condition(a, n, Condition::DivergenceFeb7)?;
    let (a_used, head) = if feb7.verdict.is_true() {
        (a.clone(), None)
    } else {
        let m = n as f64;
        (a.with_head(m)?, Some(m))
    };
    let sobolev = sobolev_conjugate_with(&a_used, n, opts.conjugate)?;
    let b = sobolev.b.clone();
    let nf = n as f64;

    let (plo, phi_hi) = phi.log_domain();
    let (blo, bhi) = b.log_domain();
    let (yl, yh) = (b.ln_eval(blo), b.ln_eval(bhi));
    let arg = |x: f64| phi.ln_eval(x) - nf * x;
    let mut lo = plo.max(-opts.j_window);
    let mut hi = phi_hi.min(opts.j_window);
    // the argument of B^{-1} is non-increasing in s; keep it inside B's table
    if arg(lo) > yh {
        lo = bisect_full(|x| -arg(x), lo, hi, -yh);
    }
    if arg(hi) < yl {
        hi = bisect_full(|x| -arg(x), lo, hi, -yl);
    }
    if !(hi - lo > 10.0 * opts.j_step) {
        return Err(Error::Range {
            value: hi,
            lo: plo,
            hi: phi_hi,
        });
    }
    let mut j_x = uniform_grid(lo, hi, opts.j_step);
    // drop the range where φ has saturated in floating point
    let saturated = j_x
        .windows(2)
        .position(|w| phi.ln_eval(w[1]) <= phi.ln_eval(w[0]))
        .map(|k| k + 1);
    if let Some(k) = saturated {
        j_x.truncate(k);
    }
    if j_x.len() < 10 {
        return Err(Error::Numerical("gauge increases on too short a range".into()));
    }
    let mut j_ln = Vec::with_capacity(j_x.len());
    let mut psi_slopes = Vec::with_capacity(j_x.len());
    for &x in &j_x {
        let y = arg(x);
        let u = b.ln_inverse(y)?;
        j_ln.push(x + u);
        let ps = phi.ln_slope(x);
        let js = 1.0 + (ps - nf) / b.ln_slope(u);
        psi_slopes.push(ps / js);
    }
    if j_ln.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Numerical("J is not strictly increasing on its grid".into()));
    }
    let psi_vals: Vec<f64> = j_x.iter().map(|&x| phi.ln_eval(x)).collect();
    let psi_table = LogTable::from_log_values(j_ln.clone(), &psi_vals, Some(&psi_slopes), 0.0)?;
    let psi = MonotoneMap::from_table(psi_table)?;
    Ok(DistortionBundle {
        a: a.clone(),
        a_used,
        head_exponent: head,
        b,
        sobolev,
        phi: phi.clone(),
        n,
        j_x,
        j_ln,
        psi,
    })
}

impl LogFunction for DistortionBundle {
    fn ln_eval(&self, x: f64) -> f64 {
        self.ln_psi(x)
    }

    fn log_domain(&self) -> (f64, f64) {
        (self.j_ln[0], self.j_ln[self.j_ln.len() - 1])
    }
}

impl DistortionBundle {
    /// `ln J_r(e^x)`; `lr = ln r`, and `r = 1` gives `J`.
    pub fn ln_j_r(&self, lr: f64, x: f64) -> f64 {
        let y = lr + self.phi.ln_eval(x) - self.n as f64 * x;
        x + self.b.ln_inverse(y).unwrap_or(f64::NAN)
    }

    pub fn ln_j(&self, x: f64) -> f64 {
        self.ln_j_r(0.0, x)
    }

    pub fn j(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.ln_j(s.ln()).exp()
    }

    /// `ln J^{-1}(e^y)`, bracketed by the tabulated grid.
    pub fn ln_j_inverse(&self, y: f64) -> f64 {
        let m = self.j_ln.len();
        let k = self.j_ln.partition_point(|&v| v < y);
        let (a, b) = if k == 0 || k >= m {
            return self.ln_j_r_inverse(0.0, y);
        } else {
            (self.j_x[k - 1], self.j_x[k])
        };
        bisect_full(|x| self.ln_j(x), a, b, y)
    }

    /// `ln J_r^{-1}(e^y)` with an expanding bracket.
    pub fn ln_j_r_inverse(&self, lr: f64, y: f64) -> f64 {
        let (mut a, mut b) = (self.j_x[0], self.j_x[self.j_x.len() - 1]);
        let mut step = 1.0;
        for _ in 0..64 {
            let v = self.ln_j_r(lr, a);
            if v.is_nan() || v <= y {
                break;
            }
            a -= step;
            step *= 2.0;
        }
        step = 1.0;
        for _ in 0..64 {
            let v = self.ln_j_r(lr, b);
            if v.is_nan() || v >= y {
                break;
            }
            b += step;
            step *= 2.0;
        }
        bisect_full(|x| self.ln_j_r(lr, x), a, b, y)
    }

    pub fn j_inverse(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.ln_j_inverse(r.ln()).exp()
    }

    /// `ln ψ(e^x)` with `ψ = φ ∘ J^{-1}` evaluated by bisection.
    pub fn ln_psi(&self, x: f64) -> f64 {
        self.phi.ln_eval(self.ln_j_inverse(x))
    }

    pub fn psi(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.ln_psi(r.ln()).exp()
    }

    /// Tabulated `ψ`, exact at the knots `J(s_k)`.
    pub fn psi_map(&self) -> &MonotoneMap {
        &self.psi
    }

    /// `ψ` as a gauge function.
    pub fn psi_gauge(&self) -> Result<GaugeFunction> {
        let (lo, hi) = self.psi.log_domain();
        let knots: Vec<[f64; 2]> = uniform_grid(lo, hi, 0.05)
            .into_iter()
            .map(|x| [x, self.psi.ln_eval(x)])
            .collect();
        let xs: Vec<f64> = knots.iter().map(|k| k[0]).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k[1]).collect();
        let t = LogTable::from_log_values(xs, &ys, None, 0.0)?;
        GaugeFunction::from_repr(GaugeRepr::Table(t), self.n)
    }

    /// `(ln s, ln J(s))` grid.
    pub fn j_grid(&self) -> (&[f64], &[f64]) {
        (&self.j_x, &self.j_ln)
    }

    /// `ln ψ(st)` and `ln(φ(t) + t^n B(s))`.
    fn key_sides(&self, lr: f64, ls: f64, lt: f64) -> (f64, f64) {
        let nf = self.n as f64;
        let left = self.phi.ln_eval(self.ln_j_r_inverse_fast(lr, ls + lt));
        let right = logaddexp(self.phi.ln_eval(lt), nf * lt - lr + self.b.ln_eval(ls));
        (left, right)
    }

    fn ln_j_r_inverse_fast(&self, lr: f64, y: f64) -> f64 {
        if lr == 0.0 {
            self.ln_j_inverse(y)
        } else {
            self.ln_j_r_inverse(lr, y)
        }
    }

    /// Relative gap `ψ(st) / (φ(t) + t^n B(s)) - 1`; non-positive when the
    /// key inequality holds.
    pub fn key_inequality_relative_gap(&self, s: f64, t: f64) -> f64 {
        self.key_inequality_relative_gap_r(1.0, s, t)
    }

    /// Relative gap of `φ(J_r^{-1}(st)) <= φ(t) + (t^n / r) B(s)`.
    pub fn key_inequality_relative_gap_r(&self, r: f64, s: f64, t: f64) -> f64 {
        let (l, rt) = self.key_sides(r.ln(), s.ln(), t.ln());
        (l - rt).exp_m1()
    }

    pub fn invariants(&self) -> InvariantReport {
        let nf = self.n as f64;
        let j_increasing = self.j_ln.windows(2).all(|w| w[1] > w[0]);
        let mut psi_ratio_worst: f64 = 0.0;
        let mut prev = f64::INFINITY;
        for (&x, &lj) in self.j_x.iter().zip(&self.j_ln) {
            let g = self.phi.ln_eval(x) - nf * lj;
            psi_ratio_worst = psi_ratio_worst.max(g - prev);
            prev = g;
        }
        let (lo, hi) = self.log_domain();
        let mut delta2_worst = f64::NEG_INFINITY;
        let mut jr_worst: f64 = 0.0;
        for i in 0..40 {
            let x = lo + (hi - lo) * (i as f64 + 0.5) / 40.0;
            for lk in [-3.0f64, -0.5, 0.7, 2.0] {
                if x + lk < lo || x + lk > hi {
                    continue;
                }
                let d = self.psi.ln_eval(x + lk) - self.psi.ln_eval(x) - (nf * lk).max(0.0);
                delta2_worst = delta2_worst.max(d);
            }
            let y = x;
            let mut prev = f64::INFINITY;
            for lr in [-4.0, -1.0, 0.0, 1.0, 4.0] {
                let v = self.ln_j_r_inverse(lr, y);
                jr_worst = jr_worst.max(v - prev);
                prev = v;
            }
        }
        InvariantReport {
            j_increasing,
            psi_ratio_increase: psi_ratio_worst,
            delta2_excess: delta2_worst,
            j_r_inverse_increase: jr_worst,
            j_span_decades: (self.j_ln[self.j_ln.len() - 1] - self.j_ln[0]) / 10f64.ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub j_increasing: bool,
    /// Largest increase of `ln(ψ(r)/r^n)` between grid points.
    pub psi_ratio_increase: f64,
    /// Largest `ln ψ(kr) - ln ψ(r) - ln max{1, k^n}` sampled.
    pub delta2_excess: f64,
    /// Largest increase of `ln J_r^{-1}(s)` as `r` grows.
    pub j_r_inverse_increase: f64,
    pub j_span_decades: f64,
}

impl InvariantReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.j_increasing
            && self.psi_ratio_increase <= tol
            && self.delta2_excess <= tol
            && self.j_r_inverse_increase <= tol
            && self.j_span_decades >= 6.0
    }
}

/// Absolute gap `ψ(st) - φ(t) - t^n B(s)`.
pub fn key_inequality_gap(bundle: &DistortionBundle, s: f64, t: f64) -> f64 {
    let (l, r) = bundle.key_sides(0.0, s.ln(), t.ln());
    l.exp() - r.exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub value: f64,
    pub stability: Stability,
    /// Multiplicative constant in front of the measure.
    pub constant: f64,
    pub theta: f64,
    pub kappa: f64,
    pub c_n: f64,
    pub note: String,
}

pub const DEFAULT_KAPPA: f64 = 1.0;

pub fn default_cn(n: usize) -> f64 {
    6f64.powi(n as i32)
}

fn check_positive(v: f64, what: &str) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::param(format!("{what} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn check_nonneg(v: f64, what: &str) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::param(format!("{what} must be nonnegative and finite, got {v}")));
    }
    Ok(())
}

/// `H^ψ(u(E)) <= c Θ⁰_ψ(κ‖∇u‖⁺) H^φ(E)`; zero in the vanishing regime.
pub fn measure_bound(
    bundle: &DistortionBundle,
    grad_norm: f64,
    h_phi: f64,
    kappa: f64,
    c_n: f64,
) -> Result<BoundReport> {
    check_nonneg(grad_norm, "gradient norm")?;
    check_nonneg(h_phi, "measure")?;
    check_positive(kappa, "κ")?;
    check_positive(c_n, "c_n")?;
    let st: StabilityReport = classify_stability(bundle.psi_map(), &bundle.b)?;
    match st.class {
        Stability::Vanishing => Ok(BoundReport {
            value: 0.0,
            stability: st.class,
            constant: 0.0,
            theta: 0.0,
            kappa,
            c_n,
            note: "both scaling limits vanish: φ-null images, the measure of u(E) is zero".into(),
        }),
        Stability::Inconclusive => Err(Error::Inconclusive(format!(
            "stability classification undecided: {}",
            st.note
        ))),
        Stability::Stable => {
            let psi = bundle.psi_map();
            let inner = theta(&InverseYoung(&bundle.b), 2f64.powi(-20), ThetaRegime::Infinity)?;
            let outer = theta(psi, inner.value * (1.0 + EPS_RIGHT), ThetaRegime::Zero)?;
            let constant = c_n * outer.value;
            let th = if grad_norm == 0.0 {
                0.0
            } else {
                theta(psi, kappa * grad_norm * (1.0 + EPS_RIGHT), ThetaRegime::Zero)?.value
            };
            Ok(BoundReport {
                value: constant * th * h_phi,
                stability: st.class,
                constant,
                theta: th,
                kappa,
                c_n,
                note: "stable regime".into(),
            })
        }
    }
}

/// `H^ψ_∞(u(E)) <= 2κ Θ_ψ(κ‖∇u‖⁺) Ξ_{ψ,B}(c_n H^φ_∞(E)/κ)`.
pub fn content_bound(
    bundle: &DistortionBundle,
    grad_norm: f64,
    h_phi_inf: f64,
    kappa: f64,
    c_n: f64,
) -> Result<BoundReport> {
    check_nonneg(grad_norm, "gradient norm")?;
    check_nonneg(h_phi_inf, "content")?;
    check_positive(kappa, "κ")?;
    check_positive(c_n, "c_n")?;
    if h_phi_inf == 0.0 || grad_norm == 0.0 {
        return Ok(BoundReport {
            value: 0.0,
            stability: Stability::Inconclusive,
            constant: 0.0,
            theta: 0.0,
            kappa,
            c_n,
            note: "zero content or constant map".into(),
        });
    }
    let psi = bundle.psi_map();
    let th = theta(psi, kappa * grad_norm * (1.0 + EPS_RIGHT), ThetaRegime::Global)?.value;
    let x = xi(psi, &bundle.b, c_n * h_phi_inf / kappa)?;
    Ok(BoundReport {
        value: 2.0 * kappa * th * x,
        stability: Stability::Inconclusive,
        constant: 2.0 * kappa * x,
        theta: th,
        kappa,
        c_n,
        note: "content bound".into(),
    })
}

/// `2 c_n p^{α/(α+p-n)} ((p-1)/(n'-p'))^{α(p-1)/(α+p-n)}`.
pub fn kaufman_constant(n: usize, p: f64, alpha: f64, c_n: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain("the constant needs n >= 2".into()));
    }
    let nf = n as f64;
    if !(p > nf) || !p.is_finite() {
        return Err(Error::Domain(format!("need p > n, got p = {p}, n = {n}")));
    }
    if !(alpha > 0.0 && alpha <= nf) {
        return Err(Error::Domain(format!("need 0 < α <= n, got {alpha}")));
    }
    check_positive(c_n, "c_n")?;
    let np = nf / (nf - 1.0);
    let pp = p / (p - 1.0);
    let d = alpha + p - nf;
    Ok(2.0 * c_n * p.powf(alpha / d) * ((p - 1.0) / (np - pp)).powf(alpha * (p - 1.0) / d))
}

/// `H^n_∞(u(E)) <= 2κ^{n+1} ‖∇u‖^n Φ_B(L^n(E) n^{n/2}/κ)`.
pub fn lebesgue_image_bound(
    b: &YoungFunction,
    n: usize,
    grad_norm: f64,
    lebesgue_e: f64,
    kappa: f64,
) -> Result<f64> {
    check_nonneg(grad_norm, "gradient norm")?;
    check_nonneg(lebesgue_e, "Lebesgue measure")?;
    check_positive(kappa, "κ")?;
    if lebesgue_e == 0.0 || grad_norm == 0.0 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let arg = lebesgue_e * nf.powf(nf / 2.0) / kappa;
    let lphi = ln_phi_b(b, n, arg.ln())?;
    Ok((2f64.ln() + (nf + 1.0) * kappa.ln() + nf * grad_norm.ln() + lphi).exp())
}
