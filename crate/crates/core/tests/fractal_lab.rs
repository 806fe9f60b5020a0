use orlicz_distort::asymptotics::LogPowerForm;
use orlicz_distort::distortion::DEFAULT_KAPPA;
use orlicz_distort::fractal_lab::*;
use orlicz_distort::hausdorff_net::{ln_level_sum, DyadicCube};
use orlicz_distort::sobolev_conjugate::sobolev_conjugate;
use orlicz_distort::convex_calculus::YoungFunction;
use orlicz_distort::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;

fn spec(levels: usize) -> RandomMapSpec {
    RandomMapSpec { n: 2, q: 1.5, nu: 2.0, delta: 1.1, mu: 10.0, levels, seed: 3 }
}

#[test]
fn cube_counts() {
    assert_eq!(level_count(1.0, 3), 8);
    assert_eq!(level_count(1.5, 2), 8);
    let c = build_cantor(&CantorSpec { n: 2, nu: 1.0, levels: 3, seed: 0 }).unwrap();
    assert_eq!(c.cubes[2].len(), 8);
    assert!(c.cubes[2].iter().all(|q| q.level == 8 && q.side() == 2f64.powi(-8)));
    let c = build_cantor(&CantorSpec { n: 1, nu: 1.5, levels: 2, seed: 0 }).unwrap();
    assert_eq!(c.cubes[1].len(), 8);
    assert_eq!(c.cubes[0].len(), 2);
}

#[test]
fn nesting_and_even_distribution() {
    for (n, nu, levels) in [(2, 1.0, 5), (2, 2.0, 5), (1, 0.7, 5), (3, 1.5, 4)] {
        let c = build_cantor(&CantorSpec { n, nu, levels, seed: 9 }).unwrap();
        let mut prev = vec![DyadicCube::root(n)];
        for j in 1..=levels {
            let cubes = &c.cubes[j - 1];
            assert_eq!(cubes.len(), level_count(nu, j));
            let mut kids = vec![0usize; prev.len()];
            for (q, &p) in cubes.iter().zip(&c.parents[j - 1]) {
                assert!(prev[p].contains(q), "n={n} ν={nu} j={j}");
                kids[p] += 1;
            }
            let (lo, hi) = (*kids.iter().min().unwrap(), *kids.iter().max().unwrap());
            assert!(hi <= c.max_children && hi - lo <= 1, "{kids:?}");
            let mass: f64 = c.masses[j - 1].iter().sum();
            assert!((mass - 1.0).abs() < 1e-12);
            let mut sorted = cubes.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), cubes.len());
            prev = cubes.clone();
        }
    }
}

#[test]
fn level_sums_follow_closed_form() {
    let (n, nu) = (2usize, 1.0);
    let c = build_cantor(&CantorSpec { n, nu, levels: 5, seed: 4 }).unwrap();
    let mut vals = Vec::new();
    for j in 1..=5 {
        let set = c.level_set(j).unwrap();
        let got = ln_level_sum(&set, &|x: f64| -nu * (-x).ln());
        // log 1/d = 2^j log 2 - (1/2) log n
        let l = (1u64 << j) as f64 * LN_2 - 0.5 * (n as f64).ln();
        let want = (level_count(nu, j) as f64).ln() - nu * l.ln();
        assert!((got - want).abs() < 1e-12, "j={j}");
        vals.push(got.exp());
    }
    assert!(vals.iter().all(|&v| v > 0.5 && v < 2.0), "{vals:?}");
}

#[test]
fn overflowing_levels_are_rejected() {
    let e = build_cantor(&CantorSpec { n: 2, nu: 1.0, levels: 6, seed: 0 }).unwrap_err();
    assert!(matches!(e, Error::Input(_)));
    assert!(build_cantor(&CantorSpec { n: 2, nu: 0.0, levels: 3, seed: 0 }).is_err());
    assert!(build_cantor(&CantorSpec { n: 0, nu: 1.0, levels: 3, seed: 0 }).is_err());
    // 2^{16} children cannot fit in a parent with 2^{2} slots per side in 1d
    assert!(build_cantor(&CantorSpec { n: 1, nu: 9.0, levels: 2, seed: 0 }).is_err());
}

#[test]
fn bump_values() {
    let c = [0.3, 0.6];
    for j in 1..=4 {
        assert_eq!(eta_bump(j, &c, &c), 1.0);
        let h = support_half_width(j);
        assert_eq!(eta_bump(j, &c, &[0.3 + h, 0.6]), 0.0);
        assert_eq!(eta_bump(j, &c, &[0.3 - 0.2 * h, 0.6 + 1.5 * h]), 0.0);
        let inner = 0.5 * 2f64.powf(-((1u64 << j) as f64));
        assert_eq!(eta_bump(j, &c, &[0.3 + inner, 0.6 - 0.5 * inner]), 1.0);
    }
    for j in 2..=4 {
        // log 1/(2|x|_∞) = 3·2^{j-2}
        let t = 2f64.powf(-3.0 * (1u64 << (j - 2)) as f64);
        let v = eta_bump(j, &c, &[0.3 + 0.5 * t, 0.6]);
        assert!((v - 0.5).abs() < 1e-12, "j={j}: {v}");
    }
    assert_eq!(eta_bump(0, &c, &c), 0.0);
}

#[test]
fn support_overlap_is_bounded() {
    for nu in [1.0, 2.0] {
        let c = build_cantor(&CantorSpec { n: 2, nu, levels: 5, seed: 11 }).unwrap();
        for j in 1..=5 {
            let k = c.max_support_overlap(j);
            assert!(k >= 1 && k <= c.overlap_bound(), "ν={nu} j={j}: {k} > {}", c.overlap_bound());
        }
    }
}

#[test]
fn delta_interval_and_errors() {
    let s = spec(4);
    assert!((s.sigma() - 2.0 * 2.0 / (1.5 - 1.0 + 2.0)).abs() < 1e-15);
    let (lo, hi) = s.delta_interval().unwrap();
    assert_eq!(lo, 1.0);
    assert!((hi - 9.0 / 1.6).abs() < 1e-12);
    s.validate().unwrap();
    let wide = RandomMapSpec { delta: 6.0, ..s.clone() };
    assert!(matches!(wide.validate(), Err(Error::Domain(_))));
    let tight = RandomMapSpec { mu: 2.0, ..s.clone() };
    assert!(tight.delta_interval().is_none());
    assert!(matches!(tight.validate(), Err(Error::Domain(_))));
    assert!(RandomMapSpec { levels: 1, ..s.clone() }.validate().is_err());
    assert!(RandomMapSpec { q: 0.5, ..s.clone() }.validate().is_err());

    let c = build_cantor(&s.cantor()).unwrap();
    let low = LogPowerForm::near_zero(s.sigma(), 1.0 + s.delta * s.sigma(), 0.0);
    let low_spec = RandomMapSpec { mu: low.b, ..s.clone() };
    assert!(energy_integral_mc(&low_spec, &c, &low, 100).is_err());
    let off = LogPowerForm::near_zero(1.0, s.mu, 0.0);
    assert!(energy_integral_mc(&s, &c, &off, 100).is_err());
}

#[test]
fn gradient_norms_scale() {
    let s = spec(5);
    let mut ratios = Vec::new();
    let mut partial = 0.0;
    let mut steps = Vec::new();
    for j in 1..=5 {
        let g = gradient_norm_estimate(&s, j).unwrap();
        assert!(g.single.is_finite() && g.single > 0.0);
        assert!(g.aggregate <= g.aggregate_bound * (1.0 + 1e-6), "j={j}: {g:?}");
        assert_eq!(g.count, level_count(s.nu, j));
        if j <= 4 {
            ratios.push(g.ratio);
        }
        partial += g.level_norm;
        steps.push(g.level_norm);
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 3.0, "{ratios:?}");
    // level norms are O(j^{-δ}), so the partial sums converge
    let scaled: Vec<f64> = steps.iter().enumerate().map(|(i, v)| v * ((i + 1) as f64).powf(s.delta)).collect();
    let spread = scaled.iter().cloned().fold(0.0, f64::max) / scaled.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 3.0, "{scaled:?}");
    assert!(steps[4] < 0.2 * partial);
    assert!(gradient_norm_estimate(&s, 6).is_err());
    assert!(single_bump_norm(1, 2, 2.0).unwrap().is_finite());
}

#[test]
fn uniform_ball_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1usize, 2, 3] {
        let mut below = 0;
        let k = 20_000;
        for _ in 0..k {
            let v = uniform_ball(&mut rng, n);
            let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(r <= 1.0);
            // half the volume lies within radius 2^{-1/n}
            if r < 0.5f64.powf(1.0 / n as f64) {
                below += 1;
            }
        }
        let frac = below as f64 / k as f64;
        assert!((frac - 0.5).abs() < 0.02, "n={n}: {frac}");
    }
}

#[test]
fn energy_estimate_is_deterministic_and_decays() {
    let s = spec(5);
    let c = build_cantor(&s.cantor()).unwrap();
    let target = LogPowerForm::near_zero(s.sigma(), s.mu, 0.0);
    let a = energy_integral_mc(&s, &c, &target, 20_000).unwrap();
    let b = energy_integral_mc(&s, &c, &target, 20_000).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert!(a.total.is_finite() && a.total > 0.0);
    assert!(a.coefficient_margin >= 1.0, "{}", a.coefficient_margin);
    assert_eq!(a.levels.iter().map(|l| l.pairs).sum::<u64>() + a.excluded_zero, 20_000);
    let contrib: Vec<f64> = a.levels[1..5].iter().map(|l| l.contribution).collect();
    assert!(contrib.windows(2).all(|w| w[1] < w[0]), "{contrib:?}");
    let other = energy_integral_mc(&RandomMapSpec { seed: 4, ..s.clone() }, &c, &target, 20_000).unwrap();
    assert_ne!(other.total, a.total);
}

#[test]
fn construction_is_deterministic() {
    let cs = CantorSpec { n: 2, nu: 2.0, levels: 5, seed: 21 };
    let a = serde_json::to_string(&build_cantor(&cs).unwrap()).unwrap();
    let b = serde_json::to_string(&build_cantor(&cs).unwrap()).unwrap();
    assert_eq!(a, b);
    let s = spec(5);
    let c = build_cantor(&s.cantor()).unwrap();
    let m1 = sample_map(&s, &c, 5).unwrap();
    let m2 = sample_map(&s, &c, 5).unwrap();
    for q in &c.cubes[4][..20] {
        assert_eq!(m1.eval(&q.center()), m2.eval(&q.center()));
    }
}

#[test]
fn truncations_differ_by_the_tail() {
    let deep = spec(5);
    let shallow = spec(4);
    let c = build_cantor(&deep.cantor()).unwrap();
    let u5 = sample_map(&deep, &c, 8).unwrap();
    let u4 = sample_map(&shallow, &c, 8).unwrap();
    let tail = shallow.truncation_tail();
    assert!(tail >= deep.coefficient(5));
    let mut worst: f64 = 0.0;
    for q in c.cubes[4].iter().step_by(7) {
        let x = q.center();
        let d = u5.eval(&x).iter().zip(u4.eval(&x)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    assert!(worst > 0.0 && worst <= tail, "{worst} {tail}");
}

#[test]
fn image_sums_with_a_constant_probe() {
    let s = spec(4);
    let c = build_cantor(&s.cantor()).unwrap();
    let map = sample_map(&s, &c, 2).unwrap();
    let levels = [1usize, 2, 3];
    let out = image_cover_sums(&map, |_| 5f64.ln(), &levels).unwrap();
    for l in &out {
        let multi = (0..c.cubes[l.j - 1].len()).filter(|&k| c.descendants(l.j, k).len() >= 2).count();
        assert_eq!(l.cubes, c.cubes[l.j - 1].len());
        assert!((l.sum - 5.0 * multi as f64).abs() < 1e-9, "j={}: {} vs {multi}", l.j, l.sum);
    }
    assert!(image_cover_sums(&map, |x| x, &[0]).is_err());
}

#[test]
fn morrey_residuals() {
    let a = YoungFunction::power(4.0).unwrap();
    let b = sobolev_conjugate(&a, 2).unwrap();
    let u = SampledMap::constant(2, 0.5);
    assert_eq!(morrey_residual(&u, &a, &b, 1.0, DEFAULT_KAPPA).unwrap(), 0.0);
    let maps = [
        SampledMap::linear(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap(),
        SampledMap::linear(&[vec![3.0, 1.0], vec![0.0, 0.2]], 0.25).unwrap(),
        SampledMap::linear(&[vec![1.0, 1.0], vec![1.0, 1.0]], 2.0).unwrap(),
    ];
    // rank one: the image of the unit square is a segment of length 2√2
    assert!((maps[2].image_diameter - 8f64.sqrt() * 2.0).abs() < 1e-12);
    assert!((maps[0].image_diameter - 2f64.sqrt()).abs() < 1e-12);
    let la = log_young(2, 2.0).unwrap();
    let lb = sobolev_conjugate(&la, 2).unwrap();
    for (a, b) in [(&a, &b), (&la, &lb)] {
        for m in &maps {
            for lam in [0.1, 1.0, 10.0] {
                assert!(morrey_residual(m, a, b, lam, DEFAULT_KAPPA).unwrap() <= 0.0);
            }
        }
        for j in 1..=3 {
            let m = SampledMap::bump(j, 2, 1.0).unwrap();
            for lam in [0.1, 1.0, 10.0] {
                assert!(morrey_residual(&m, a, b, lam, DEFAULT_KAPPA).unwrap() <= 0.0, "j={j} λ={lam}");
            }
        }
        let k = calibrate_kappa(&maps, a, b, &[0.1, 1.0, 10.0]).unwrap();
        assert!(k <= DEFAULT_KAPPA, "{k}");
    }
    assert!(morrey_residual(&maps[0], &a, &b, 0.0, 1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bump_is_a_unit_interval_value(j in 1usize..5, dx in -0.3f64..0.3, dy in -0.3f64..0.3) {
        let v = eta_bump(j, &[0.5, 0.5], &[0.5 + dx, 0.5 + dy]);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn bump_decreases_radially(j in 1usize..5, a in 1e-6f64..0.3, f in 1.0f64..4.0) {
        let near = eta_bump(j, &[0.5], &[0.5 + a / f]);
        let far = eta_bump(j, &[0.5], &[0.5 + a]);
        prop_assert!(far <= near);
    }
}
