//! Dyadic net pre-measures `Λ^φ_σ` on finite unions of dyadic cubes in the
//! unit cube, computed exactly by a dynamic program on the dyadic tree,
//! together with Hausdorff content lower bounds and gauge-dimension fits.

use crate::error::{Error, Result};
use crate::gauge::GaugeFunction;
use crate::numeric::{linreg, logaddexp, ExactSum};
use crate::table::LogFunction;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::io::Read;

/// Deepest supported level; coordinates must fit in `i64`.
pub const MAX_LEVEL: u32 = 62;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub coords: Vec<i64>,
}

impl DyadicCube {
    pub fn new(level: u32, coords: Vec<i64>) -> Result<Self> {
        let c = DyadicCube { level, coords };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.coords.is_empty() {
            return Err(Error::Input("cube needs at least one coordinate".into()));
        }
        if self.level > MAX_LEVEL {
            return Err(Error::Input(format!(
                "level {} exceeds the coordinate width (max {MAX_LEVEL})",
                self.level
            )));
        }
        let side = 1i64 << self.level;
        if self.coords.iter().any(|&c| c < 0 || c >= side) {
            return Err(Error::Input(format!(
                "cube {:?} at level {} lies outside the unit cube",
                self.coords, self.level
            )));
        }
        Ok(())
    }

    pub fn root(n: usize) -> Self {
        DyadicCube {
            level: 0,
            coords: vec![0; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn side(&self) -> f64 {
        2f64.powi(-(self.level as i32))
    }

    pub fn diameter(&self) -> f64 {
        (self.dim() as f64).sqrt() * self.side()
    }

    pub fn ln_diameter(&self) -> f64 {
        ln_diameter(self.dim(), self.level)
    }

    pub fn center(&self) -> Vec<f64> {
        let s = self.side();
        self.coords.iter().map(|&c| (c as f64 + 0.5) * s).collect()
    }

    pub fn parent(&self) -> Option<DyadicCube> {
        (self.level > 0).then(|| DyadicCube {
            level: self.level - 1,
            coords: self.coords.iter().map(|c| c >> 1).collect(),
        })
    }

    pub fn ancestor(&self, level: u32) -> DyadicCube {
        let k = self.level.saturating_sub(level);
        DyadicCube {
            level: self.level - k,
            coords: self.coords.iter().map(|c| c >> k).collect(),
        }
    }

    pub fn children(&self) -> Vec<DyadicCube> {
        let n = self.dim();
        (0..1usize << n)
            .map(|b| DyadicCube {
                level: self.level + 1,
                coords: self
                    .coords
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| 2 * c + ((b >> i) & 1) as i64)
                    .collect(),
            })
            .collect()
    }

    /// Whether `other` is contained in (or equal to) `self`.
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }

    fn child_index(&self, member: &DyadicCube) -> usize {
        let shift = member.level - self.level - 1;
        member
            .coords
            .iter()
            .enumerate()
            .map(|(i, &c)| (((c >> shift) & 1) as usize) << i)
            .sum()
    }
}

pub fn ln_diameter(n: usize, level: u32) -> f64 {
    0.5 * (n as f64).ln() - level as f64 * std::f64::consts::LN_2
}

/// A finite antichain of dyadic cubes inside `[0,1)^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CubeSet {
    n: usize,
    cubes: Vec<DyadicCube>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CubeSetSpec {
    Cubes { n: Option<usize>, cubes: Vec<DyadicCube> },
    Points { level: u32, points: Vec<Vec<f64>> },
}

impl CubeSet {
    pub fn new(n: usize, mut cubes: Vec<DyadicCube>) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("dimension must be positive"));
        }
        for c in &cubes {
            c.validate()?;
            if c.dim() != n {
                return Err(Error::Input(format!(
                    "cube {:?} has dimension {}, expected {n}",
                    c.coords,
                    c.dim()
                )));
            }
        }
        cubes.sort();
        let set: HashSet<&DyadicCube> = cubes.iter().collect();
        if set.len() != cubes.len() {
            return Err(Error::Input("duplicate cubes in the set".into()));
        }
        for c in &cubes {
            let mut a = c.parent();
            while let Some(p) = a {
                if set.contains(&p) {
                    return Err(Error::Input(format!(
                        "not an antichain: {:?} at level {} lies inside {:?} at level {}",
                        c.coords, c.level, p.coords, p.level
                    )));
                }
                a = p.parent();
            }
        }
        Ok(CubeSet { n, cubes })
    }

    pub fn empty(n: usize) -> Self {
        CubeSet {
            n,
            cubes: Vec::new(),
        }
    }

    /// Snaps points of `[0,1]^n` to the level-`level` cubes containing them,
    /// then removes cubes covered by others.
    pub fn from_points(n: usize, points: &[Vec<f64>], level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Input(format!("level {level} exceeds {MAX_LEVEL}")));
        }
        let side = 1i64 << level;
        let scale = 2f64.powi(level as i32);
        let mut cubes = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != n {
                return Err(Error::Input(format!(
                    "point {i} has {} coordinates, expected {n}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::Input(format!("point {i} lies outside [0,1]^{n}")));
            }
            let coords = p
                .iter()
                .map(|&x| ((x * scale).floor() as i64).min(side - 1))
                .collect();
            cubes.push(DyadicCube { level, coords });
        }
        cubes.sort();
        cubes.dedup();
        CubeSet::new(n, cubes)
    }

    pub fn from_spec(spec: &CubeSetSpec) -> Result<Self> {
        match spec {
            CubeSetSpec::Cubes { n, cubes } => {
                let n = match (n, cubes.first()) {
                    (Some(n), _) => *n,
                    (None, Some(c)) => c.dim(),
                    (None, None) => {
                        return Err(Error::Input("empty cube set needs an explicit n".into()))
                    }
                };
                CubeSet::new(n, cubes.clone())
            }
            CubeSetSpec::Points { level, points } => {
                let n = points.first().map(|p| p.len()).unwrap_or(1);
                CubeSet::from_points(n, points, *level)
            }
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: CubeSetSpec = serde_json::from_str(s).map_err(|e| Error::from_json(&e))?;
        CubeSet::from_spec(&spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    pub fn finest_level(&self) -> Option<u32> {
        self.cubes.iter().map(|c| c.level).max()
    }

    /// Union with another set; cubes covered by a coarser cube are dropped.
    pub fn union(&self, other: &CubeSet) -> Result<CubeSet> {
        if self.n != other.n {
            return Err(Error::Input("dimension mismatch in union".into()));
        }
        let mut all: Vec<DyadicCube> = self.cubes.iter().chain(&other.cubes).cloned().collect();
        all.sort();
        all.dedup();
        let set: HashSet<DyadicCube> = all.iter().cloned().collect();
        let keep = all
            .into_iter()
            .filter(|c| {
                let mut a = c.parent();
                while let Some(p) = a {
                    if set.contains(&p) {
                        return false;
                    }
                    a = p.parent();
                }
                true
            })
            .collect();
        CubeSet::new(self.n, keep)
    }
}

/// Reads a point cloud, one point per row, as comma separated numbers.
pub fn read_points_csv<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 1);
            Error::Spec {
                line,
                column: 1,
                msg: e.to_string(),
            }
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 1);
        let mut row = Vec::with_capacity(rec.len());
        for (j, field) in rec.iter().enumerate() {
            match field.parse::<f64>() {
                Ok(v) => row.push(v),
                Err(_) if i == 0 => {
                    row.clear();
                    break;
                }
                Err(e) => {
                    return Err(Error::Spec {
                        line,
                        column: j + 1,
                        msg: format!("not a number: {field:?} ({e})"),
                    })
                }
            }
        }
        if !row.is_empty() {
            out.push(row);
        }
    }
    Ok(out)
}

/// A cover piece: `cube` itself when `subdivide_to == cube.level`, otherwise
/// all of its descendants at level `subdivide_to`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverPiece {
    pub cube: DyadicCube,
    pub subdivide_to: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetResult {
    pub value: f64,
    #[serde(skip)]
    pub exact: ExactSum,
    pub cover: Vec<CoverPiece>,
}

/// Gauge before normalization, so that `Λ^φ` and `Λ^{φ°}` can be compared.
pub struct RawGauge<'a>(pub &'a GaugeFunction);

impl LogFunction for RawGauge<'_> {
    fn ln_eval(&self, x: f64) -> f64 {
        self.0.ln_eval_raw(x)
    }

    fn log_domain(&self) -> (f64, f64) {
        self.0.log_domain()
    }
}

struct Ctx {
    n: usize,
    finest: u32,
    /// `φ(√n 2^{-m})` when that diameter is admissible, else `None`.
    cost: Vec<Option<f64>>,
}

impl Ctx {
    fn new<G: LogFunction + ?Sized>(n: usize, finest: u32, phi: &G, sigma: f64) -> Result<Self> {
        let mut cost = Vec::with_capacity(finest as usize + 1);
        for m in 0..=finest {
            let ld = ln_diameter(n, m);
            if ld > sigma.ln() + 1e-12 {
                cost.push(None);
                continue;
            }
            let v = phi.ln_eval(ld).exp();
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Numerical(format!("gauge not finite at diameter e^{ld}")));
            }
            cost.push(Some(v));
        }
        if cost[finest as usize].is_none() {
            return Err(Error::Range {
                value: sigma,
                lo: ln_diameter(n, finest).exp(),
                hi: f64::INFINITY,
            });
        }
        Ok(Ctx { n, finest, cost })
    }

    fn leaf(&self, cube: &DyadicCube) -> (ExactSum, CoverPiece) {
        let mut best: Option<(ExactSum, u32)> = None;
        for m in cube.level..=self.finest {
            if let Some(c) = self.cost[m as usize] {
                let k = (self.n as u32 * (m - cube.level)) as i32;
                let v = ExactSum::from_value(c).scale_pow2(k);
                let better = match &best {
                    None => true,
                    Some((b, _)) => v.cmp_exact(b) == Ordering::Less,
                };
                if better {
                    best = Some((v, m));
                }
            }
        }
        let (v, m) = best.expect("finest level admissible");
        (
            v,
            CoverPiece {
                cube: cube.clone(),
                subdivide_to: m,
            },
        )
    }

    fn solve(&self, node: &DyadicCube, members: &[DyadicCube]) -> (ExactSum, Vec<CoverPiece>) {
        if members.len() == 1 && members[0] == *node {
            let (v, p) = self.leaf(node);
            return (v, vec![p]);
        }
        let mut buckets: BTreeMap<usize, Vec<DyadicCube>> = BTreeMap::new();
        for m in members {
            buckets.entry(node.child_index(m)).or_default().push(m.clone());
        }
        let children = node.children();
        let solve_one = |(k, ms): (&usize, &Vec<DyadicCube>)| self.solve(&children[*k], ms);
        let parts: Vec<(ExactSum, Vec<CoverPiece>)> = if members.len() > 64 {
            buckets.par_iter().map(solve_one).collect()
        } else {
            buckets.iter().map(solve_one).collect()
        };
        let mut sum = ExactSum::new();
        for (v, _) in &parts {
            sum.add_sum(v);
        }
        if let Some(c) = self.cost[node.level as usize] {
            let own = ExactSum::from_value(c);
            if own.cmp_exact(&sum) != Ordering::Greater {
                return (
                    own,
                    vec![CoverPiece {
                        cube: node.clone(),
                        subdivide_to: node.level,
                    }],
                );
            }
        }
        (sum, parts.into_iter().flat_map(|(_, c)| c).collect())
    }
}

/// Exact `Λ^φ_σ(E)` over covers by dyadic cubes no finer than the finest
/// cube of `E`; `σ = ∞` is allowed.
pub fn net_premeasure<G: LogFunction + ?Sized>(e: &CubeSet, phi: &G, sigma: f64) -> Result<NetResult> {
    if !(sigma > 0.0) {
        return Err(Error::param(format!("σ must be positive, got {sigma}")));
    }
    let Some(finest) = e.finest_level() else {
        return Ok(NetResult {
            value: 0.0,
            exact: ExactSum::new(),
            cover: Vec::new(),
        });
    };
    let ctx = Ctx::new(e.n, finest, phi, sigma)?;
    let (v, cover) = ctx.solve(&DyadicCube::root(e.n), &e.cubes);
    Ok(NetResult {
        value: v.value(),
        exact: v,
        cover,
    })
}

/// Sum of `φ(d(Q))` over the cover pieces, recomputed independently.
pub fn cover_cost<G: LogFunction + ?Sized>(cover: &[CoverPiece], phi: &G) -> f64 {
    let mut s = ExactSum::new();
    for p in cover {
        let c = phi.ln_eval(ln_diameter(p.cube.dim(), p.subdivide_to)).exp();
        let k = (p.cube.dim() as u32 * (p.subdivide_to - p.cube.level)) as i32;
        s.add_sum(&ExactSum::from_value(c).scale_pow2(k));
    }
    s.value()
}

/// `2^{n⌈log₂ √n⌉} 2^n (2√n)^n`, valid for normalized gauges.
pub fn apriori_cn(n: usize) -> f64 {
    let nf = n as f64;
    let m = (0.5 * nf.log2()).ceil();
    2f64.powf(nf * m) * 2f64.powf(nf) * (2.0 * nf.sqrt()).powf(nf)
}

/// Lower bound for `H^φ_σ(E)`: a set of diameter `d <= σ` meets at most
/// `2^n` dyadic cubes of diameter `< 2√n d`.
pub fn hausdorff_lower_bound<G: LogFunction + ?Sized>(e: &CubeSet, phi: &G, sigma: f64) -> Result<f64> {
    let nf = e.n as f64;
    let k = 2.0 * nf.sqrt();
    let lam = net_premeasure(e, phi, k * sigma)?.value;
    Ok(lam / (2f64.powf(nf) * k.powf(nf)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub sigma: f64,
    pub lambda_sigma: f64,
    pub lambda_half: f64,
    /// Lower bounds for `H^φ_σ` and `H^φ_{σ/2}`.
    pub h_lower_sigma: f64,
    pub h_lower_half: f64,
    pub c_n: f64,
    /// `Λ_σ / h_lower(σ/2)`: the best constant certified by this instance.
    pub measured_cn: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// `H^φ_σ <= Λ^φ_σ <= c_n H^φ_{σ/2}`, with `H` replaced by certified lower
/// bounds (so the upper check is the stronger one).
pub fn sandwich_check(e: &CubeSet, phi: &GaugeFunction, sigma: f64, c_n: f64) -> Result<SandwichReport> {
    if !(c_n > 0.0) {
        return Err(Error::param("c_n must be positive"));
    }
    let lambda_sigma = net_premeasure(e, phi, sigma)?.value;
    let lambda_half = net_premeasure(e, phi, sigma / 2.0)?.value;
    let h_lower_sigma = hausdorff_lower_bound(e, phi, sigma)?;
    let h_lower_half = hausdorff_lower_bound(e, phi, sigma / 2.0)?;
    let measured_cn = if h_lower_half > 0.0 {
        lambda_sigma / h_lower_half
    } else {
        0.0
    };
    Ok(SandwichReport {
        sigma,
        lambda_sigma,
        lambda_half,
        h_lower_sigma,
        h_lower_half,
        c_n,
        measured_cn,
        lower_holds: h_lower_sigma <= lambda_sigma,
        upper_holds: lambda_sigma <= c_n * h_lower_half * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationReport {
    pub lambda_raw: f64,
    pub lambda_normalized: f64,
    /// `Λ^{φ°} / Λ^φ`; bounded below by a positive constant.
    pub ratio: f64,
    pub holds: bool,
}

/// Compares `Λ^φ_σ` and `Λ^{φ°}_σ`.
pub fn normalization_check(e: &CubeSet, phi: &GaugeFunction, sigma: f64) -> Result<NormalizationReport> {
    let raw = net_premeasure(e, &RawGauge(phi), sigma)?.value;
    let norm = net_premeasure(e, phi, sigma)?.value;
    let ratio = if raw > 0.0 { norm / raw } else { 1.0 };
    Ok(NormalizationReport {
        lambda_raw: raw,
        lambda_normalized: norm,
        ratio,
        holds: norm <= raw * (1.0 + 1e-12) && (raw == 0.0 || ratio > 0.0),
    })
}

/// `ln Σ_{Q∈E} φ(d(Q))`.
pub fn ln_level_sum<G: Fn(f64) -> f64 + ?Sized>(e: &CubeSet, ln_phi: &G) -> f64 {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for c in &e.cubes {
        *counts.entry(c.level).or_default() += 1;
    }
    counts.iter().fold(f64::NEG_INFINITY, |acc, (&l, &k)| {
        logaddexp(acc, (k as f64).ln() + ln_phi(ln_diameter(e.n, l)))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionFit {
    /// Parameter where the level sums stop growing.
    pub critical: Option<f64>,
    /// `(θ, slope of ln S_j against j)`.
    pub slopes: Vec<(f64, f64)>,
    pub degenerate: bool,
    pub flags: Vec<String>,
}

/// Locates the parameter `θ` at which the level sums of `φ_θ` change from
/// growing to decaying. `ln_phi(θ, x)` is `ln φ_θ(e^x)`; the slope must be
/// non-increasing in `θ`.
pub fn dimension_fit<F>(levels: &[CubeSet], ln_phi: F, lo: f64, hi: f64) -> Result<DimensionFit>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    if levels.len() < 4 {
        return Err(Error::Input(format!("need at least 4 levels, got {}", levels.len())));
    }
    if !(lo < hi) {
        return Err(Error::param("empty parameter interval"));
    }
    if levels.iter().all(|l| l.is_empty()) {
        return Ok(DimensionFit {
            critical: None,
            slopes: Vec::new(),
            degenerate: true,
            flags: vec!["empty set: all level sums vanish".into()],
        });
    }
    if levels.iter().any(|l| l.is_empty()) {
        return Err(Error::Input("some levels are empty".into()));
    }
    let js: Vec<f64> = (1..=levels.len()).map(|j| j as f64).collect();
    let sums = |t: f64| -> Vec<f64> {
        levels
            .iter()
            .map(|e| ln_level_sum(e, &|x: f64| ln_phi(t, x)))
            .collect()
    };
    // regression over the deeper half of the levels, at least three
    let from = levels.len() - (levels.len() / 2).max(3);
    let slope = |t: f64| -> Result<f64> { Ok(linreg(&js[from..], &sums(t)[from..])?.0) };
    let mut flags = Vec::new();
    let probe: Vec<f64> = (0..=8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect();
    let mut slopes = Vec::with_capacity(probe.len());
    for &t in &probe {
        let s = sums(t);
        let up = s.windows(2).all(|w| w[1] >= w[0]);
        let down = s.windows(2).all(|w| w[1] <= w[0]);
        if !up && !down {
            flags.push(format!("level sums not monotone at θ = {t}"));
        }
        slopes.push((t, slope(t)?));
    }
    let (s_lo, s_hi) = (slopes[0].1, slopes[slopes.len() - 1].1);
    let critical = if s_lo > 0.0 && s_hi < 0.0 {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if slope(m)? > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        Some(0.5 * (a + b))
    } else {
        flags.push(format!(
            "no sign change of the level-sum slope on [{lo}, {hi}] ({s_lo:e}, {s_hi:e})"
        ));
        None
    };
    Ok(DimensionFit {
        critical,
        slopes,
        degenerate: false,
        flags,
    })
}
