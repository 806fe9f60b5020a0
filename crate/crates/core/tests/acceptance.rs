use orlicz_distort::asymptotics::{crosscheck, distort_form, LogPowerForm};
use orlicz_distort::cli::{self, Command, RunConfig};
use orlicz_distort::convex_calculus::YoungFunction;
use orlicz_distort::distortion::{build_distortion, DistortionBundle};
use orlicz_distort::fractal_lab::*;
use orlicz_distort::gauge::GaugeFunction;
use orlicz_distort::hausdorff_net::*;
use orlicz_distort::numeric::linreg;
use orlicz_distort::table::{uniform_grid, LogFunction};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), String>;

fn bundle(a: YoungFunction, phi: GaugeFunction, n: usize) -> Result<DistortionBundle, String> {
    build_distortion(&a, &phi, n).map_err(|e| e.to_string())
}

fn c1() -> Outcome {
    let b = bundle(YoungFunction::power(4.0).unwrap(), GaugeFunction::power(1.0, 2).unwrap(), 2)?;
    let xs = uniform_grid(1e-9f64.ln(), 1e-3f64.ln(), 6.0 * 10f64.ln() / 200.0);
    let ys: Vec<f64> = xs.iter().map(|&x| b.ln_psi(x)).collect();
    let s = linreg(&xs, &ys).map_err(|e| e.to_string())?.0;
    let rel = (s / (4.0 / 3.0) - 1.0).abs();
    Ok((rel <= 0.02, format!("slope {s:.6}, relative error {rel:.2e}")))
}

fn form_check(a: YoungFunction, af: LogPowerForm, phi: GaugeFunction, pf: LogPowerForm, limit: f64) -> Outcome {
    let form = distort_form(&af, &pf, 2).map_err(|e| e.to_string())?;
    let b = bundle(a, phi, 2)?;
    let d = crosscheck(&b, &form).map_err(|e| e.to_string())?;
    Ok((
        d < limit,
        format!("form r^{} (log 1/r)^{}, log-ratio spread {d:.4} over r in [1e-12, 1e-9]", form.a, form.b),
    ))
}

fn c2() -> Outcome {
    form_check(
        YoungFunction::power_log(2.0, 2.0).unwrap(),
        LogPowerForm::near_infinity(2.0, 2.0),
        GaugeFunction::power(1.0, 2).unwrap(),
        LogPowerForm::near_zero(1.0, 0.0, 0.0),
        0.1,
    )
}

fn c3() -> Outcome {
    form_check(
        YoungFunction::exponential(1.0).unwrap(),
        LogPowerForm::exponential(1.0),
        GaugeFunction::power(1.0, 2).unwrap(),
        LogPowerForm::near_zero(1.0, 0.0, 0.0),
        0.15,
    )
}

fn c4() -> Outcome {
    let b = bundle(YoungFunction::power(4.0).unwrap(), GaugeFunction::log_power(-1.0, 2).unwrap(), 2)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in uniform_grid(-300.0, -30.0, 1.0) {
        let d = b.ln_psi(x) - b.phi.ln_eval(x);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    Ok((hi - lo < 0.1, format!("ψ/φ log-ratio spread {:.4} over ln r in [-300, -30]", hi - lo)))
}

fn suite_checks(suites: &[&str]) -> Outcome {
    static SUITE: OnceLock<Vec<cli::Check>> = OnceLock::new();
    let checks: Vec<&cli::Check> = SUITE
        .get_or_init(|| cli::verify_suite(cli::DEFAULT_TOL, 1))
        .iter()
        .filter(|c| suites.contains(&c.suite.as_str()))
        .collect();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| format!("{}/{}: {}", c.suite, c.instance, c.detail))
        .collect();
    let instances: std::collections::BTreeSet<&str> = checks.iter().map(|c| c.instance.as_str()).collect();
    Ok((
        failed.is_empty() && !checks.is_empty(),
        if failed.is_empty() {
            format!("{} checks over {} instances", checks.len(), instances.len())
        } else {
            failed.join("; ")
        },
    ))
}

fn c5() -> Outcome {
    let families = cli::identity_corpus().len();
    let (ok, d) = suite_checks(&["identity"])?;
    Ok((ok && families >= 5, format!("{families} Young functions, {d}")))
}

fn c6() -> Outcome {
    suite_checks(&["key_inequality"])
}

fn c7() -> Outcome {
    suite_checks(&["scaling_laws_psi", "scaling_laws_b_inverse", "stability"])
}

fn exhaustive(node: &DyadicCube, cells: &[DyadicCube], finest: u32, cost: &dyn Fn(u32) -> Option<f64>) -> Vec<f64> {
    let inside: Vec<DyadicCube> = cells.iter().filter(|c| node.contains(c)).cloned().collect();
    if inside.is_empty() {
        return vec![0.0];
    }
    let mut out: Vec<f64> = cost(node.level).into_iter().collect();
    if node.level < finest {
        let mut acc = vec![0.0];
        for child in node.children() {
            let sub = exhaustive(&child, &inside, finest, cost);
            acc = acc.iter().flat_map(|a| sub.iter().map(move |s| a + s)).collect();
        }
        out.extend(acc);
    }
    out
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> CubeSet {
    let side = 1i64 << depth;
    let total = 1usize << (n as u32 * depth);
    let mut idx: Vec<usize> = (0..total).collect();
    idx.shuffle(rng);
    let size = rng.random_range(1..=total.min(20));
    let mut cubes: Vec<DyadicCube> = idx[..size]
        .iter()
        .map(|&k| {
            let coords = (0..n).map(|i| ((k >> (i as u32 * depth)) as i64) % side).collect();
            let up = rng.random_range(0..=depth / 2);
            DyadicCube::new(depth, coords).unwrap().ancestor(depth - up)
        })
        .collect();
    cubes.sort();
    cubes.dedup();
    let keep = cubes.iter().filter(|c| !cubes.iter().any(|o| o != *c && o.contains(c))).cloned().collect();
    CubeSet::new(n, keep).unwrap()
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let wavy_knots: Vec<[f64; 2]> = uniform_grid(-10.0, 10.0, 0.05)
        .into_iter()
        .map(|x| {
            let r = f64::exp(x);
            [x, (r + r * r * (1.0 + 0.5 * x.sin())).ln()]
        })
        .collect();
    let wavy = GaugeFunction::from_log_knots(&wavy_knots, 2).map_err(|e| e.to_string())?;
    let mut mismatches = 0;
    let mut sandwich_fail = 0;
    let mut norm_fail = 0;
    let (mut worst_cn, mut min_ratio) = (0.0f64, f64::INFINITY);
    for i in 0..100 {
        let (n, depth, phi) = match i % 3 {
            0 => (1, 4, GaugeFunction::power(0.7, 1).unwrap()),
            1 => (2, 3, GaugeFunction::power(1.3, 2).unwrap()),
            _ => (2, 3, wavy.clone()),
        };
        let e = random_instance(&mut rng, n, depth);
        let finest = e.finest_level().unwrap();
        let cells: Vec<DyadicCube> = e
            .cubes()
            .iter()
            .flat_map(|c| {
                let mut layer = vec![c.clone()];
                while layer[0].level < finest {
                    layer = layer.iter().flat_map(|q| q.children()).collect();
                }
                layer
            })
            .collect();
        let cost = |m: u32| Some(phi.ln_eval(ln_diameter(n, m)).exp());
        let want = exhaustive(&DyadicCube::root(n), &cells, finest, &cost).into_iter().fold(f64::INFINITY, f64::min);
        let got = net_premeasure(&e, &phi, f64::INFINITY).map_err(|e| e.to_string())?.value;
        if (got / want - 1.0).abs() > 1e-12 {
            mismatches += 1;
        }
        let sigma = ln_diameter(n, finest).exp() * 2.0;
        let s = sandwich_check(&e, &phi, sigma, apriori_cn(n)).map_err(|e| e.to_string())?;
        if !(s.lower_holds && s.upper_holds) {
            sandwich_fail += 1;
        }
        worst_cn = worst_cn.max(s.measured_cn);
        let nr = normalization_check(&e, &phi, sigma).map_err(|e| e.to_string())?;
        if !nr.holds {
            norm_fail += 1;
        }
        min_ratio = min_ratio.min(nr.ratio);
    }
    Ok((
        mismatches == 0 && sandwich_fail == 0 && norm_fail == 0,
        format!(
            "100 instances: {mismatches} DP mismatches, {sandwich_fail} sandwich and {norm_fail} normalization failures; measured c_n up to {worst_cn:.3}, Λ°/Λ at least {min_ratio:.3}"
        ),
    ))
}

fn c9() -> Outcome {
    let c = build_cantor(&CantorSpec { n: 2, nu: 1.0, levels: 5, seed: 1 }).map_err(|e| e.to_string())?;
    let sets = c.level_sets().map_err(|e| e.to_string())?;
    let fit = dimension_fit(&sets, |th, x| -th * (-x).ln(), 0.2, 3.0).map_err(|e| e.to_string())?;
    match fit.critical {
        Some(v) => Ok(((v - 1.0).abs() <= 0.1, format!("critical ν' = {v:.4}"))),
        None => Ok((false, format!("no critical exponent: {:?}", fit.flags))),
    }
}

fn c10() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for q in [1.5, 2.0] {
        let spec = RandomMapSpec { n: 2, q, nu: 2.0, delta: 1.1, mu: 10.0, levels: 5, seed: 1 };
        let mut ratios = Vec::new();
        let mut agg_ok = true;
        for j in 1..=4 {
            let g = gradient_norm_estimate(&spec, j).map_err(|e| e.to_string())?;
            ratios.push(g.ratio);
            agg_ok &= g.aggregate <= g.aggregate_bound * (1.0 + 1e-3);
        }
        let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= spread <= 3.0 && agg_ok;
        parts.push(format!("q={q}: ratio spread {spread:.3}, aggregate bound {}", if agg_ok { "holds" } else { "violated" }));
    }
    Ok((ok, parts.join("; ")))
}

fn c11() -> Outcome {
    let cfg = FractalConfig { psi_probe: false, ..FractalConfig::preset() };
    let r = run_fractal(&cfg).map_err(|e| e.to_string())?;
    let expected_mu = 1.0 + cfg.delta * r.sigma + 1.0;
    let preset_ok = (r.mu - expected_mu).abs() < 1e-12;
    let shape_ok = r.energy_shape_spread <= 3.0;
    let ok = preset_ok && shape_ok && r.image_trend_increasing;
    Ok((
        ok,
        format!(
            "μ = {:.4}, spread of contribution / j^(δσ-μ) over j=1..{} is {:.3} (with (j+2) in place of j: {:.3}); image sums increasing over levels 1..{}: {}",
            r.mu,
            cfg.levels - 1,
            r.energy_shape_spread,
            r.shifted_shape_spread,
            cfg.levels - 1,
            r.image_trend_increasing
        ),
    ))
}

fn c12() -> Outcome {
    let base = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = base.join(format!("run{k}"));
        let _ = fs::remove_dir_all(&out);
        let rc = RunConfig {
            command: Command::Fractal,
            config: None,
            out: out.clone(),
            seed: Some(11),
            kappa: 1.0,
            cn: None,
            tol: cli::DEFAULT_TOL,
        };
        let o = cli::run(&rc).map_err(|e| e.to_string())?;
        if o.exit != 0 {
            return Ok((false, format!("exit {}", o.exit)));
        }
        outs.push(fs::read(out.join("fractal.csv")).map_err(|e| e.to_string())?);
    }
    Ok((outs[0] == outs[1], format!("two seeded runs, {} bytes each, identical: {}", outs[0].len(), outs[0] == outs[1])))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 12] = [
        ("Kaufman exponent recovery", c1, Duration::from_secs(5)),
        ("critical power-log refinement", c2, Duration::from_secs(10)),
        ("exponential Young function", c3, Duration::from_secs(10)),
        ("stable logarithmic gauge", c4, Duration::from_secs(5)),
        ("identity gauge preserved", c5, Duration::MAX),
        ("key inequality", c6, Duration::MAX),
        ("scaling laws and stability classes", c7, Duration::MAX),
        ("net measure DP exactness and sandwiches", c8, Duration::from_secs(30)),
        ("Cantor gauge criticality", c9, Duration::from_secs(20)),
        ("bump norm scaling", c10, Duration::from_secs(60)),
        ("energy series shape", c11, Duration::from_secs(300)),
        ("fractal determinism", c12, Duration::MAX),
    ];
    let mut passed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let el = t.elapsed();
        let (ok, detail) = match res {
            Ok((ok, d)) => (ok && el <= *limit, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = if *limit == Duration::MAX {
            format!("{:.2}s", el.as_secs_f64())
        } else {
            format!("{:.2}s of {}s", el.as_secs_f64(), limit.as_secs())
        };
        println!("criterion {:>2} {}: {name}: {detail} [{timing}]", i + 1, if ok { "PASS" } else { "FAIL" });
        passed += usize::from(ok);
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
}
