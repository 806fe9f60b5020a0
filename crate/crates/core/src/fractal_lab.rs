//! Cantor-type sets with double-exponentially shrinking cubes, bump maps
//! built on them, random maps `u_ξ`, and desk-scale probes of their
//! gradient norms, energy integrals and image covers.

use crate::asymptotics::{FormRegime, LogPowerForm};
use crate::convex_calculus::{ln_modular, luxemburg_norm, FieldSample, YoungFunction};
use crate::distortion::build_distortion;
use crate::error::{Error, Result};
use crate::gauge::GaugeFunction;
use crate::hausdorff_net::{ln_level_sum, CubeSet, DyadicCube, MAX_LEVEL};
use crate::numeric::GL5;
use crate::table::LogFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CantorSpec {
    pub n: usize,
    pub nu: f64,
    pub levels: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CantorSet {
    pub spec: CantorSpec,
    /// `cubes[j-1]` lists `A_j` (side `2^{-2^j}`) grouped by parent.
    pub cubes: Vec<Vec<DyadicCube>>,
    /// Index of each cube's parent in the previous level.
    pub parents: Vec<Vec<usize>>,
    /// Mass of each cube under the natural level measure.
    pub masses: Vec<Vec<f64>>,
    pub max_children: usize,
}

pub fn dyadic_level(j: usize) -> u32 {
    1u32 << j
}

/// `#A_j = ⌊2^{jν}⌋`.
pub fn level_count(nu: f64, j: usize) -> usize {
    (j as f64 * nu).exp2().floor() as usize
}

fn split_counts(total: usize, parents: usize) -> Vec<usize> {
    let base = total / parents;
    let rem = total % parents;
    (0..parents)
        .map(|i| base + usize::from((i + 1) * rem / parents > i * rem / parents))
        .collect()
}

pub fn build_cantor(spec: &CantorSpec) -> Result<CantorSet> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::param("dimension must be positive"));
    }
    if !(spec.nu > 0.0) || !spec.nu.is_finite() {
        return Err(Error::param(format!("ν must be positive, got {}", spec.nu)));
    }
    if spec.levels == 0 {
        return Err(Error::param("need at least one level"));
    }
    if spec.levels > 5 || dyadic_level(spec.levels) > MAX_LEVEL {
        return Err(Error::Input(format!(
            "{} levels need cubes of side 2^-{}, beyond the coordinate width",
            spec.levels,
            1u64 << spec.levels
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut prev = vec![DyadicCube::root(n)];
    let mut prev_mass = vec![1.0];
    let mut out = CantorSet {
        spec: spec.clone(),
        cubes: Vec::new(),
        parents: Vec::new(),
        masses: Vec::new(),
        max_children: 0,
    };
    for j in 1..=spec.levels {
        let total = level_count(spec.nu, j);
        if total < prev.len() {
            return Err(Error::Input(format!(
                "level {j} would have fewer cubes than level {}",
                j - 1
            )));
        }
        let lv = dyadic_level(j);
        let counts = split_counts(total, prev.len());
        let mut cubes = Vec::with_capacity(total);
        let mut par = Vec::with_capacity(total);
        let mut mass = Vec::with_capacity(total);
        for (pi, (p, &k)) in prev.iter().zip(&counts).enumerate() {
            out.max_children = out.max_children.max(k);
            let slots = 1i64 << (lv - p.level);
            let g = ((k as f64).powf(1.0 / n as f64).ceil() as i64).max(1);
            if g > slots {
                return Err(Error::Input(format!(
                    "level {j}: {k} children do not fit in a parent with {slots}^{n} slots"
                )));
            }
            let strata = (g as u64).pow(n as u32);
            let rot = rng.random_range(0..strata);
            for i in 0..k as u64 {
                let mut s = (i * strata / k as u64 + rot) % strata;
                let mut coords = Vec::with_capacity(n);
                for &pc in &p.coords {
                    let t = (s % g as u64) as i64;
                    s /= g as u64;
                    let a = t * slots / g;
                    let b = (t + 1) * slots / g;
                    coords.push(pc * slots + rng.random_range(a..b));
                }
                cubes.push(DyadicCube { level: lv, coords });
                par.push(pi);
                mass.push(prev_mass[pi] / k as f64);
            }
        }
        out.cubes.push(cubes.clone());
        out.parents.push(par);
        out.masses.push(mass.clone());
        prev = cubes;
        prev_mass = mass;
    }
    Ok(out)
}

impl CantorSet {
    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn depth(&self) -> usize {
        self.cubes.len()
    }

    /// `A_j` as a cube set.
    pub fn level_set(&self, j: usize) -> Result<CubeSet> {
        CubeSet::new(self.n(), self.cubes[j - 1].clone())
    }

    pub fn level_sets(&self) -> Result<Vec<CubeSet>> {
        (1..=self.depth()).map(|j| self.level_set(j)).collect()
    }

    /// Index of the ancestor at each level (`[j-1]`) of finest cube `i`.
    pub fn chain(&self, i: usize) -> Vec<usize> {
        let d = self.depth();
        let mut out = vec![0; d];
        let mut k = i;
        for j in (0..d).rev() {
            out[j] = k;
            if j > 0 {
                k = self.parents[j][k];
            }
        }
        out
    }

    /// Finest-level descendants of cube `k` of `A_j`.
    pub fn descendants(&self, j: usize, k: usize) -> Vec<usize> {
        let d = self.depth();
        (0..self.cubes[d - 1].len())
            .filter(|&i| self.chain(i)[j - 1] == k)
            .collect()
    }

    /// Largest number of cubes of `A_j` whose bump supports meet the
    /// support around a single cube of `A_j`.
    pub fn max_support_overlap(&self, j: usize) -> usize {
        let h = support_half_width(j);
        let centers: Vec<Vec<f64>> = self.cubes[j - 1].iter().map(|c| c.center()).collect();
        centers
            .iter()
            .map(|a| centers.iter().filter(|b| sup_dist(a, b) < 2.0 * h).count())
            .max()
            .unwrap_or(0)
    }

    /// `3^n c`, with `c` the largest number of children of a cube.
    pub fn overlap_bound(&self) -> usize {
        3usize.pow(self.n() as u32) * self.max_children
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn adjacent(a: &DyadicCube, b: &DyadicCube) -> bool {
    a.coords.iter().zip(&b.coords).all(|(x, y)| (x - y).abs() <= 1)
}

/// Half side of the support of a level-`j` bump, `2^{-2^{j-1}-1}`.
pub fn support_half_width(j: usize) -> f64 {
    (-((1u64 << (j - 1)) as f64) - 1.0).exp2()
}

/// Bump of level `j` centred at `center`: 1 on the level-`j` cube, 0 outside
/// the cube of side `2^{-2^{j-1}}`, linear in `log₂(1/|x|_∞)` between.
pub fn eta_bump(j: usize, center: &[f64], x: &[f64]) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let t = 2.0 * sup_dist(center, x);
    let inner = (1u64 << j) as f64;
    let outer = (1u64 << (j - 1)) as f64;
    if t <= (-inner).exp2() {
        return 1.0;
    }
    if t >= (-outer).exp2() {
        return 0.0;
    }
    ((-t.log2() - outer) / outer).clamp(0.0, 1.0)
}

/// `|∇η_j|` on the annulus as a radial field: nodes in `ln |x|_∞`, weights
/// carrying the volume of the cube shells.
pub fn bump_gradient_field(j: usize, n: usize, panels: usize) -> Result<FieldSample> {
    if j == 0 || n == 0 || panels == 0 {
        return Err(Error::param("bump gradient needs j, n, panels >= 1"));
    }
    let s0 = -((1u64 << j) as f64 + 1.0) * LN_2;
    let s1 = -((1u64 << (j - 1)) as f64 + 1.0) * LN_2;
    let nf = n as f64;
    let c = 1.0 / ((1u64 << (j - 1)) as f64 * LN_2);
    let h = (s1 - s0) / panels as f64;
    let mut w = Vec::with_capacity(5 * panels);
    let mut v = Vec::with_capacity(5 * panels);
    for p in 0..panels {
        let mid = s0 + (p as f64 + 0.5) * h;
        for &(u, wt) in GL5.iter() {
            let s = mid + 0.5 * h * u;
            w.push(nf * 2f64.powf(nf) * (nf * s).exp() * wt * 0.5 * h);
            v.push(c * (-s).exp());
        }
    }
    FieldSample::weighted(&w, &v)
}

/// `t^n log₂^q(t + 2)`.
pub fn log_young(n: usize, q: f64) -> Result<YoungFunction> {
    YoungFunction::power_log_with(n as f64, q, 2.0, 2.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMapSpec {
    pub n: usize,
    pub q: f64,
    pub nu: f64,
    pub delta: f64,
    /// Log exponent of the target gauge `r^σ log^μ`.
    pub mu: f64,
    pub levels: usize,
    #[serde(default)]
    pub seed: u64,
}

impl RandomMapSpec {
    /// `σ = nν / (q - n + 1 + ν)`.
    pub fn sigma(&self) -> f64 {
        let nf = self.n as f64;
        nf * self.nu / (self.q - nf + 1.0 + self.nu)
    }

    /// Admissible damping exponents `δ ∈ (1, (μ-1)/σ)`, if any.
    pub fn delta_interval(&self) -> Option<(f64, f64)> {
        let hi = (self.mu - 1.0) / self.sigma();
        (hi > 1.0).then_some((1.0, hi))
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.n as f64;
        if self.n == 0 || !(self.q > nf - 1.0) || !(self.nu > 0.0) {
            return Err(Error::param(format!(
                "need n >= 1, q > n - 1, ν > 0; got n = {}, q = {}, ν = {}",
                self.n, self.q, self.nu
            )));
        }
        if self.levels < 2 || self.levels > 5 {
            return Err(Error::param("truncation level must lie in 2..=5"));
        }
        match self.delta_interval() {
            None => Err(Error::Domain(format!(
                "no admissible δ > 1 with 1 + δσ < μ (σ = {}, μ = {})",
                self.sigma(),
                self.mu
            ))),
            Some((lo, hi)) if !(self.delta > lo && self.delta < hi) => Err(Error::Domain(format!(
                "δ = {} outside the admissible interval ({lo}, {hi})",
                self.delta
            ))),
            Some(_) => Ok(()),
        }
    }

    /// `j^{-δ} 2^{-jν/σ}`.
    pub fn coefficient(&self, j: usize) -> f64 {
        let jf = j as f64;
        jf.powf(-self.delta) * (-jf * self.nu / self.sigma()).exp2()
    }

    pub fn cantor(&self) -> CantorSpec {
        CantorSpec {
            n: self.n,
            nu: self.nu,
            levels: self.levels,
            seed: self.seed,
        }
    }

    /// `Σ_{j>J} j^{-δ} 2^{-jν/σ}`, bounding the sup distance between the
    /// truncated and the full map.
    pub fn truncation_tail(&self) -> f64 {
        let mut s = 0.0;
        for j in self.levels + 1..self.levels + 400 {
            let c = self.coefficient(j);
            s += c;
            if c < 1e-18 * s {
                break;
            }
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientNormReport {
    pub j: usize,
    pub single: f64,
    /// `single / 2^{j(q-n+1)/n}`
    pub ratio: f64,
    pub count: usize,
    /// Norm of `count` disjoint translates.
    pub aggregate: f64,
    /// `count^{1/n} single`
    pub aggregate_bound: f64,
    /// `j^{-δ} 2^{-jν/σ} aggregate`
    pub level_norm: f64,
}

const BUMP_PANELS: usize = 64;

pub fn single_bump_norm(j: usize, n: usize, q: f64) -> Result<f64> {
    let f = bump_gradient_field(j, n, BUMP_PANELS)?;
    luxemburg_norm(&f, &log_young(n, q)?)
}

pub fn gradient_norm_estimate(spec: &RandomMapSpec, j: usize) -> Result<GradientNormReport> {
    if j == 0 || j > spec.levels {
        return Err(Error::param(format!("level {j} outside 1..={}", spec.levels)));
    }
    let n = spec.n;
    let nf = n as f64;
    let a = log_young(n, spec.q)?;
    let f = bump_gradient_field(j, n, BUMP_PANELS)?;
    let single = luxemburg_norm(&f, &a)?;
    let count = level_count(spec.nu, j);
    let weights: Vec<f64> = f.points.iter().map(|p| p.weight * count as f64).collect();
    let agg = FieldSample::weighted(&weights, &f.values)?;
    let aggregate = luxemburg_norm(&agg, &a)?;
    Ok(GradientNormReport {
        j,
        single,
        ratio: single / (j as f64 * (spec.q - nf + 1.0) / nf).exp2(),
        count,
        aggregate,
        aggregate_bound: (count as f64).powf(1.0 / nf) * single,
        level_norm: spec.coefficient(j) * aggregate,
    })
}

/// `r^σ log₂^μ(b + 1/r)` with the least `b >= 2` making it increasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeGauge {
    pub sigma: f64,
    pub mu: f64,
    pub b: f64,
}

impl ProbeGauge {
    pub fn new(sigma: f64, mu: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() {
            return Err(Error::param(format!("probe needs σ > 0, got ({sigma}, {mu})")));
        }
        // increasing iff σ (b+s) ln(b+s) >= μ s for all s = 1/r > 0
        let ok = |b: f64| {
            (0..=400).all(|i| {
                let s = (-20.0 + 60.0 * i as f64 / 400.0f64).exp();
                sigma * (b + s) * (b + s).ln() >= mu * s
            })
        };
        let mut b = 2.0;
        if !ok(b) {
            let mut hi = 4.0;
            while !ok(hi) {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::Numerical("no increasing probe gauge found".into()));
                }
            }
            let mut lo = b;
            for _ in 0..100 {
                let m = 0.5 * (lo + hi);
                if ok(m) {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            b = hi * 1.01;
        }
        Ok(ProbeGauge { sigma, mu, b })
    }

    pub fn from_form(form: &LogPowerForm) -> Result<Self> {
        if form.regime != FormRegime::NearZero || form.c != 0.0 {
            return Err(Error::Domain("probe gauge must be r^σ (log 1/r)^μ".into()));
        }
        ProbeGauge::new(form.a, form.b)
    }

    pub fn ln_eval(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.sigma * r.ln() + self.mu * (self.b + 1.0 / r).log2().ln()
    }
}

/// A realization of `u_ξ` truncated at the deepest level of `cantor`.
#[derive(Debug, Clone)]
pub struct RandomMap {
    pub spec: RandomMapSpec,
    pub cantor: CantorSet,
    centers: Vec<Vec<Vec<f64>>>,
    xi: Vec<Vec<Vec<f64>>>,
}

/// Uniform point of the unit ball.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let r = rng.random::<f64>().powf(1.0 / n as f64);
            return g.into_iter().map(|v| v * r / norm).collect();
        }
    }
}

fn centers_of(cantor: &CantorSet) -> Vec<Vec<Vec<f64>>> {
    cantor
        .cubes
        .iter()
        .map(|l| l.iter().map(|c| c.center()).collect())
        .collect()
}

pub fn sample_map(spec: &RandomMapSpec, cantor: &CantorSet, seed: u64) -> Result<RandomMap> {
    spec.validate()?;
    if cantor.n() != spec.n || cantor.depth() < spec.levels {
        return Err(Error::Input("Cantor set does not match the map specification".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xi = cantor.cubes[..spec.levels]
        .iter()
        .map(|l| l.iter().map(|_| uniform_ball(&mut rng, spec.n)).collect())
        .collect();
    Ok(RandomMap {
        spec: spec.clone(),
        cantor: cantor.clone(),
        centers: centers_of(cantor),
        xi,
    })
}

impl RandomMap {
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.spec.n];
        for j in 1..=self.spec.levels {
            let c = self.spec.coefficient(j);
            for (k, ctr) in self.centers[j - 1].iter().enumerate() {
                let e = eta_bump(j, ctr, x);
                if e != 0.0 {
                    for (o, v) in out.iter_mut().zip(&self.xi[j - 1][k]) {
                        *o += c * e * v;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelEnergy {
    pub j: usize,
    pub contribution: f64,
    pub stderr: f64,
    pub pairs: u64,
    /// `contribution / j^{δσ-μ}`
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub probe: ProbeGauge,
    /// Pairs by `j(x,y)`, the deepest level at which `x` and `y` lie in the
    /// same or adjacent cubes; level 0 collects non-adjacent level-1 cubes.
    pub levels: Vec<LevelEnergy>,
    pub total: f64,
    pub total_stderr: f64,
    pub samples: u64,
    /// Pairs with `u(x) = u(y)` exactly, excluded from the mean.
    pub excluded_zero: u64,
    /// Smallest `‖a(x,y)‖_∞ / (j+2)^{-δ} 2^{-(j+2)ν/σ}` seen on pairs with
    /// `j + 2 <=` truncation.
    pub coefficient_margin: f64,
    /// `max / min` of the normalized contributions over `1 <= j < J`.
    pub shape_spread: f64,
    /// Spread after normalizing by `(j+2)^{δσ-μ}` instead.
    pub shifted_shape_spread: f64,
}

struct Sampler<'a> {
    spec: &'a RandomMapSpec,
    cantor: &'a CantorSet,
    centers: Vec<Vec<Vec<f64>>>,
    cum: Vec<f64>,
}

impl Sampler<'_> {
    fn point<R: Rng>(&self, rng: &mut R) -> (usize, Vec<f64>) {
        let u: f64 = rng.random();
        let i = self
            .cum
            .partition_point(|&c| c <= u * self.cum[self.cum.len() - 1])
            .min(self.cum.len() - 1);
        let cube = &self.cantor.cubes[self.cantor.depth() - 1][i];
        let s = cube.side();
        let x = cube
            .coords
            .iter()
            .map(|&c| (c as f64 + rng.random::<f64>()) * s)
            .collect();
        (i, x)
    }

    fn level(&self, cx: &[usize], cy: &[usize]) -> usize {
        let mut j = 0;
        for l in 0..cx.len() {
            let a = &self.cantor.cubes[l][cx[l]];
            let b = &self.cantor.cubes[l][cy[l]];
            if adjacent(a, b) {
                j = l + 1;
            } else {
                break;
            }
        }
        j
    }
}

const MC_CHUNK: u64 = 2048;

/// Monte Carlo estimate of `E_ξ ∫∫ dμ dμ / φ(|u_ξ(x) - u_ξ(y)|)` with `ξ`
/// resampled for every pair, split by `j(x,y)`.
pub fn energy_integral_mc(
    spec: &RandomMapSpec,
    cantor: &CantorSet,
    target: &LogPowerForm,
    samples: u64,
) -> Result<EnergyReport> {
    spec.validate()?;
    let sigma = spec.sigma();
    if (target.a - sigma).abs() > 1e-12 * sigma.max(1.0) {
        return Err(Error::param(format!(
            "target power {} differs from σ = {sigma}",
            target.a
        )));
    }
    if !(target.b > 1.0 + spec.delta * sigma) {
        return Err(Error::Domain(format!(
            "μ = {} must exceed 1 + δσ = {}",
            target.b,
            1.0 + spec.delta * sigma
        )));
    }
    if samples == 0 {
        return Err(Error::param("need at least one sample"));
    }
    let probe = ProbeGauge::from_form(target)?;
    let depth = spec.levels;
    let finest = &cantor.masses[depth - 1];
    let mut cum = Vec::with_capacity(finest.len());
    let mut acc = 0.0;
    for m in finest {
        acc += m;
        cum.push(acc);
    }
    let sampler = Sampler {
        spec,
        cantor,
        centers: centers_of(cantor),
        cum,
    };
    let chains: Vec<Vec<usize>> = (0..finest.len()).map(|i| cantor.chain(i)).collect();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<(Vec<(f64, f64, u64)>, u64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(c + 1);
            let mut sums = vec![(0.0, 0.0, 0u64); depth + 1];
            let mut zero = 0u64;
            let mut margin = f64::INFINITY;
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut a = Vec::new();
            for _ in 0..count {
                let (ix, x) = sampler.point(&mut rng);
                let (iy, y) = sampler.point(&mut rng);
                let j = sampler.level(&chains[ix], &chains[iy]);
                a.clear();
                let mut v = vec![0.0; spec.n];
                let mut amax: f64 = 0.0;
                for l in 1..=depth {
                    let coef = sampler.spec.coefficient(l);
                    for ctr in &sampler.centers[l - 1] {
                        let d = eta_bump(l, ctr, &x) - eta_bump(l, ctr, &y);
                        if d != 0.0 {
                            let aq = coef * d;
                            amax = amax.max(aq.abs());
                            a.push(aq);
                        }
                    }
                }
                for &aq in &a {
                    let xi = uniform_ball(&mut rng, spec.n);
                    for (o, e) in v.iter_mut().zip(&xi) {
                        *o += aq * e;
                    }
                }
                if j + 2 <= depth {
                    margin = margin.min(amax / sampler.spec.coefficient(j + 2));
                }
                let r = v.iter().map(|e| e * e).sum::<f64>().sqrt();
                if r == 0.0 {
                    zero += 1;
                    continue;
                }
                let f = (-probe.ln_eval(r)).exp();
                let s = &mut sums[j];
                s.0 += f;
                s.1 += f * f;
                s.2 += 1;
            }
            (sums, zero, margin)
        })
        .collect();
    let mut sums = vec![(0.0, 0.0, 0u64); depth + 1];
    let mut zero = 0;
    let mut margin = f64::INFINITY;
    for (s, z, m) in parts {
        for (t, u) in sums.iter_mut().zip(s) {
            t.0 += u.0;
            t.1 += u.1;
            t.2 += u.2;
        }
        zero += z;
        margin = margin.min(m);
    }
    let ns = samples as f64;
    let expo = spec.delta * sigma - target.b;
    let mut levels = Vec::with_capacity(depth + 1);
    let (mut total, mut var) = (0.0, 0.0);
    for (j, &(s, s2, k)) in sums.iter().enumerate() {
        let mean = s / ns;
        let v = (s2 / ns - mean * mean).max(0.0) / ns;
        total += mean;
        var += v;
        levels.push(LevelEnergy {
            j,
            contribution: mean,
            stderr: v.sqrt(),
            pairs: k,
            normalized: if j == 0 { f64::NAN } else { mean / (j as f64).powf(expo) },
        });
    }
    let spread = |shift: f64| {
        let v: Vec<f64> = levels[1..depth]
            .iter()
            .map(|l| l.contribution / (l.j as f64 + shift).powf(expo))
            .collect();
        v.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            / v.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let (shape_spread, shifted_shape_spread) = (spread(0.0), spread(2.0));
    Ok(EnergyReport {
        probe,
        levels,
        total,
        total_stderr: var.sqrt(),
        samples,
        excluded_zero: zero,
        coefficient_margin: margin,
        shape_spread,
        shifted_shape_spread,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageLevel {
    pub j: usize,
    pub cubes: usize,
    pub sum: f64,
    pub max_diameter: f64,
}

/// Per-level `Σ_{Q∈A_j} φ(diam u(Q ∩ M))`, diameters estimated on the
/// images of the finest cube centres below each `Q`.
pub fn image_cover_sums<G: Fn(f64) -> f64>(map: &RandomMap, ln_probe: G, levels: &[usize]) -> Result<Vec<ImageLevel>> {
    let c = &map.cantor;
    let d = map.spec.levels;
    let finest = &c.cubes[d - 1];
    let images: Vec<Vec<f64>> = finest.par_iter().map(|q| map.eval(&q.center())).collect();
    let chains: Vec<Vec<usize>> = (0..finest.len()).map(|i| c.chain(i)).collect();
    let mut out = Vec::with_capacity(levels.len());
    for &j in levels {
        if j == 0 || j > d {
            return Err(Error::param(format!("level {j} outside 1..={d}")));
        }
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); c.cubes[j - 1].len()];
        for (i, ch) in chains.iter().enumerate() {
            groups[ch[j - 1]].push(i);
        }
        let diams: Vec<f64> = groups
            .par_iter()
            .map(|g| {
                let mut m: f64 = 0.0;
                for (a, &p) in g.iter().enumerate() {
                    for &q in &g[a + 1..] {
                        let dd = images[p]
                            .iter()
                            .zip(&images[q])
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum::<f64>();
                        m = m.max(dd);
                    }
                }
                m.sqrt()
            })
            .collect();
        let sum = diams
            .iter()
            .filter(|&&r| r > 0.0)
            .fold(0.0, |s, &r| s + ln_probe(r.ln()).exp());
        out.push(ImageLevel {
            j,
            cubes: groups.len(),
            sum,
            max_diameter: diams.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(out)
}

/// A map sampled on a cube `Q`: diameter of `Q`, diameter of `u(Q)` and the
/// field `|∇u|` with volume weights.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledMap {
    pub n: usize,
    pub diameter: f64,
    pub image_diameter: f64,
    pub gradient: Option<FieldSample>,
}

impl SampledMap {
    pub fn constant(n: usize, side: f64) -> Self {
        SampledMap {
            n,
            diameter: (n as f64).sqrt() * side,
            image_diameter: 0.0,
            gradient: None,
        }
    }

    /// `u(x) = Mx` on `[0, side]^n`; `|∇u|` is the Frobenius norm.
    pub fn linear(m: &[Vec<f64>], side: f64) -> Result<Self> {
        let n = m.len();
        if n == 0 || m.iter().any(|r| r.len() != n) || !(side > 0.0) {
            return Err(Error::param("linear map needs a square matrix and side > 0"));
        }
        let mut diam: f64 = 0.0;
        for code in 0..3usize.pow(n as u32) {
            let mut c = code;
            let v: Vec<f64> = (0..n)
                .map(|_| {
                    let t = (c % 3) as f64 - 1.0;
                    c /= 3;
                    t * side
                })
                .collect();
            let img: f64 = m
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>().powi(2))
                .sum();
            diam = diam.max(img.sqrt());
        }
        let frob = m.iter().flatten().map(|a| a * a).sum::<f64>().sqrt();
        let gradient = (frob > 0.0)
            .then(|| FieldSample::weighted(&[side.powi(n as i32)], &[frob]))
            .transpose()?;
        Ok(SampledMap {
            n,
            diameter: (n as f64).sqrt() * side,
            image_diameter: diam,
            gradient,
        })
    }

    /// `height · η_j · e₁` on the support cube of `η_j`.
    pub fn bump(j: usize, n: usize, height: f64) -> Result<Self> {
        let f = bump_gradient_field(j, n, BUMP_PANELS)?;
        Ok(SampledMap {
            n,
            diameter: (n as f64).sqrt() * 2.0 * support_half_width(j),
            image_diameter: height.abs(),
            gradient: (height != 0.0).then(|| f.scaled(height.abs())),
        })
    }
}

/// `d(Q)^n/κ · B(d(u(Q)) / (κλ d(Q))) - ∫_Q A(|∇u|/λ)`.
pub fn morrey_residual(
    u: &SampledMap,
    a: &YoungFunction,
    b: &YoungFunction,
    lambda: f64,
    kappa: f64,
) -> Result<f64> {
    if !(lambda > 0.0) || !(kappa > 0.0) {
        return Err(Error::param("λ and κ must be positive"));
    }
    let nf = u.n as f64;
    let right = match &u.gradient {
        Some(f) => ln_modular(f, a, lambda.ln()).exp(),
        None => 0.0,
    };
    let left = if u.image_diameter == 0.0 {
        0.0
    } else {
        let arg = u.image_diameter / (kappa * lambda * u.diameter);
        (nf * u.diameter.ln() - kappa.ln() + b.ln_eval(arg.ln())).exp()
    };
    if !right.is_finite() {
        return Err(Error::Numerical("modular is not finite for this λ".into()));
    }
    Ok(left - right)
}

/// Least `κ` (to a relative `1e-6`) keeping every residual non-positive.
pub fn calibrate_kappa(
    maps: &[SampledMap],
    a: &YoungFunction,
    b: &YoungFunction,
    lambdas: &[f64],
) -> Result<f64> {
    let worst = |k: f64| -> Result<f64> {
        let mut w = f64::NEG_INFINITY;
        for m in maps {
            for &l in lambdas {
                w = w.max(morrey_residual(m, a, b, l, k)?);
            }
        }
        Ok(w)
    };
    let (mut lo, mut hi) = (1e-6f64.ln(), 1e6f64.ln());
    if worst(hi.exp())? > 0.0 {
        return Err(Error::Inconclusive("no κ up to 1e6 satisfies the inequality".into()));
    }
    if worst(lo.exp())? <= 0.0 {
        return Ok(lo.exp());
    }
    while hi - lo > 1e-6 {
        let m = 0.5 * (lo + hi);
        if worst(m.exp())? <= 0.0 {
            hi = m;
        } else {
            lo = m;
        }
    }
    Ok(hi.exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractalConfig {
    pub n: usize,
    pub q: f64,
    pub nu: f64,
    pub delta: f64,
    /// Defaults to `2 + δσ`.
    #[serde(default)]
    pub mu: Option<f64>,
    pub levels: usize,
    #[serde(default)]
    pub seed: u64,
    pub samples: u64,
    /// Also probe image covers with the distortion gauge of the pipeline.
    #[serde(default = "default_true")]
    pub psi_probe: bool,
}

fn default_true() -> bool {
    true
}

impl FractalConfig {
    pub fn preset() -> Self {
        FractalConfig {
            n: 2,
            q: 1.5,
            nu: 2.0,
            delta: 1.1,
            mu: None,
            levels: 5,
            seed: 7,
            samples: 200_000,
            psi_probe: true,
        }
    }

    pub fn map_spec(&self) -> RandomMapSpec {
        let mut s = RandomMapSpec {
            n: self.n,
            q: self.q,
            nu: self.nu,
            delta: self.delta,
            mu: 0.0,
            levels: self.levels,
            seed: self.seed,
        };
        s.mu = self.mu.unwrap_or(2.0 + self.delta * s.sigma());
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractalRow {
    pub j: usize,
    pub cubes: usize,
    pub support_overlap: usize,
    /// `ln Σ (log 1/d(Q))^{-ν}` over `A_j`.
    pub ln_level_sum: f64,
    pub single_norm: f64,
    pub norm_ratio: f64,
    pub aggregate_norm: f64,
    pub aggregate_bound: f64,
    pub level_norm: f64,
    pub energy: f64,
    pub energy_stderr: f64,
    pub energy_normalized: f64,
    pub image_sum_probe: f64,
    pub image_sum_psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractalReport {
    pub config: FractalConfig,
    pub sigma: f64,
    pub mu: f64,
    pub delta_interval: Option<(f64, f64)>,
    pub probe_shift: f64,
    pub max_children: usize,
    pub overlap_bound: usize,
    pub rows: Vec<FractalRow>,
    pub energy_total: f64,
    pub energy_stderr: f64,
    pub excluded_zero: u64,
    pub coefficient_margin: f64,
    pub energy_shape_spread: f64,
    pub shifted_shape_spread: f64,
    pub norm_ratio_spread: f64,
    pub truncation_tail: f64,
    /// Probe sums increase strictly across levels `1..J-1`.
    pub image_trend_increasing: bool,
}

pub fn run_fractal(cfg: &FractalConfig) -> Result<FractalReport> {
    let spec = cfg.map_spec();
    spec.validate()?;
    let cantor = build_cantor(&spec.cantor())?;
    let sigma = spec.sigma();
    let target = LogPowerForm::near_zero(sigma, spec.mu, 0.0);
    let energy = energy_integral_mc(&spec, &cantor, &target, cfg.samples)?;
    let map = sample_map(&spec, &cantor, spec.seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let levels: Vec<usize> = (1..=spec.levels).collect();
    let probe = energy.probe;
    let img = image_cover_sums(&map, |x| probe.ln_eval(x.exp()), &levels)?;
    let img_psi = if cfg.psi_probe {
        let a = log_young(spec.n, spec.q)?;
        let phi = GaugeFunction::log_power(-spec.nu, spec.n)?;
        let bundle = build_distortion(&a, &phi, spec.n)?;
        image_cover_sums(&map, |x| bundle.ln_psi(x), &levels)?
    } else {
        img.iter().map(|l| ImageLevel { sum: f64::NAN, ..l.clone() }).collect()
    };
    let nu = spec.nu;
    let mut rows = Vec::with_capacity(spec.levels);
    for j in 1..=spec.levels {
        let g = gradient_norm_estimate(&spec, j)?;
        let set = cantor.level_set(j)?;
        let e = &energy.levels[j];
        rows.push(FractalRow {
            j,
            cubes: set.len(),
            support_overlap: cantor.max_support_overlap(j),
            ln_level_sum: ln_level_sum(&set, &|x: f64| -nu * (-x).ln()),
            single_norm: g.single,
            norm_ratio: g.ratio,
            aggregate_norm: g.aggregate,
            aggregate_bound: g.aggregate_bound,
            level_norm: g.level_norm,
            energy: e.contribution,
            energy_stderr: e.stderr,
            energy_normalized: e.normalized,
            image_sum_probe: img[j - 1].sum,
            image_sum_psi: img_psi[j - 1].sum,
        });
    }
    let ratios: Vec<f64> = rows.iter().take(4).map(|r| r.norm_ratio).collect();
    let norm_ratio_spread = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let probe_sums: Vec<f64> = rows[..spec.levels - 1].iter().map(|r| r.image_sum_probe).collect();
    Ok(FractalReport {
        config: cfg.clone(),
        sigma,
        mu: spec.mu,
        delta_interval: spec.delta_interval(),
        probe_shift: probe.b,
        max_children: cantor.max_children,
        overlap_bound: cantor.overlap_bound(),
        rows,
        energy_total: energy.total,
        energy_stderr: energy.total_stderr,
        excluded_zero: energy.excluded_zero,
        coefficient_margin: energy.coefficient_margin,
        energy_shape_spread: energy.shape_spread,
        shifted_shape_spread: energy.shifted_shape_spread,
        norm_ratio_spread,
        truncation_tail: spec.truncation_tail(),
        image_trend_increasing: probe_sums.windows(2).all(|w| w[1] > w[0]),
    })
}
