use orlicz_distort::convex_calculus::*;
use orlicz_distort::table::{uniform_grid, LogFunction};
use orlicz_distort::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn quadratic_half() -> YoungFunction {
    let knots: Vec<[f64; 2]> = uniform_grid(-40.0, 40.0, 0.1)
        .into_iter()
        .map(|x| [x, 2.0 * x - 2f64.ln()])
        .collect();
    YoungFunction::from_log_knots(&knots).unwrap()
}

fn t4_log2() -> YoungFunction {
    YoungFunction::power_log(4.0, 2.0).unwrap()
}

fn t4_log2_exact(t: f64) -> f64 {
    t.powi(4) * (std::f64::consts::E + t).ln().powi(2)
}

/// `sup_tau (s tau - A(tau))` over a 10^5 point geometric grid around the
/// coarse maximizer.
fn brute_conjugate(a: impl Fn(f64) -> f64, s: f64) -> f64 {
    let coarse: Vec<f64> = (0..4000).map(|i| (-40.0 + i as f64 * 0.02f64).exp()).collect();
    let best = coarse
        .iter()
        .cloned()
        .max_by(|x, y| (s * x - a(*x)).total_cmp(&(s * y - a(*y))))
        .unwrap();
    let (lo, hi) = (best.ln() - 0.05, best.ln() + 0.05);
    (0..100_000)
        .map(|i| {
            let tau = (lo + (hi - lo) * i as f64 / 99_999.0).exp();
            s * tau - a(tau)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn quadratic_is_self_conjugate() {
    let a = quadratic_half();
    let c = conjugate(&a).unwrap();
    for s in [1e-6, 1e-3, 0.5, 1.0, 7.0, 1e4] {
        assert!(rel(c.eval(s), s * s / 2.0) < 1e-6, "s={s}");
    }
}

#[test]
fn power_pair_is_forced() {
    let a = YoungFunction::power(4.0).unwrap();
    let c = conjugate(&a).unwrap();
    // sup (s tau - tau^4) = 3 (s/4)^{4/3}
    for s in [1e-8f64, 1e-2, 1.0, 3.0, 1e5] {
        let want = 3.0 * (s / 4.0).powf(4.0 / 3.0);
        assert!(rel(c.eval(s), want) < 1e-6, "s={s}");
    }
    let quarter: Vec<[f64; 2]> = uniform_grid(-30.0, 30.0, 0.1)
        .into_iter()
        .map(|x| [x, 4.0 * x - 4f64.ln()])
        .collect();
    let c = conjugate(&YoungFunction::from_log_knots(&quarter).unwrap()).unwrap();
    for s in [1e-3f64, 1.0, 20.0] {
        let want = s.powf(4.0 / 3.0) / (4.0 / 3.0);
        assert!(rel(c.eval(s), want) < 1e-6, "s={s}");
    }
}

#[test]
fn power_log_conjugate_matches_brute_supremum() {
    let c = conjugate(&t4_log2()).unwrap();
    for s in [1e-4, 0.01, 0.3, 1.0, 4.0, 50.0, 1e3, 1e5] {
        let want = brute_conjugate(t4_log2_exact, s);
        assert!(rel(c.eval(s), want) < 1e-6, "s={s}: {} vs {want}", c.eval(s));
    }
}

#[test]
fn conjugate_involution_on_corpus() {
    let table: Vec<[f64; 2]> = uniform_grid(-30.0, 30.0, 0.25)
        .into_iter()
        .map(|x| [x, 3.0 * x + (2.0 * x).exp().ln_1p()])
        .collect();
    let corpus = [
        (YoungFunction::power(4.0).unwrap(), -20.0, 20.0),
        (YoungFunction::power(1.5).unwrap(), -20.0, 20.0),
        (t4_log2(), -20.0, 20.0),
        (YoungFunction::power_log(2.0, -0.5).unwrap(), -20.0, 20.0),
        (YoungFunction::exponential(1.0).unwrap().with_head(2.0).unwrap(), -10.0, 5.0),
        (YoungFunction::from_log_knots(&table).unwrap(), -20.0, 20.0),
    ];
    for (a, lo, hi) in corpus {
        let c = conjugate(&a).unwrap_or_else(|e| panic!("{:?}: {e}", a.repr()));
        let cc = conjugate(&c).unwrap_or_else(|e| panic!("second {:?}: {e}", a.repr()));
        let worst = uniform_grid(lo, hi, 0.137)
            .into_iter()
            .map(|x| (cc.ln_eval(x) - a.ln_eval(x)).exp_m1().abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{:?}: {worst}", a.repr());
    }
}

#[test]
fn conjugate_of_positive_slope_at_zero_is_degenerate() {
    // e^t - 1 has derivative 1 at zero, so its conjugate vanishes on [0, 1]
    let e = conjugate(&YoungFunction::exponential(1.0).unwrap()).unwrap_err();
    assert!(matches!(e, Error::Numerical(_)), "{e:?}");
}

#[test]
fn youngs_inequality_on_random_pairs() {
    let a = t4_log2();
    let c = conjugate(&a).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let s = rng.random_range(-12.0f64..12.0).exp();
        let t = rng.random_range(-12.0f64..12.0).exp();
        let rhs = a.eval(s) + c.eval(t);
        assert!(s * t <= rhs * (1.0 + 1e-12), "s={s} t={t}");
    }
}

#[test]
fn inverse_product_between_t_and_2t() {
    let a = t4_log2();
    let c = conjugate(&a).unwrap();
    for x in uniform_grid(-20.0, 20.0, 0.5) {
        let t = x.exp();
        let p = inverse(&a, t).unwrap() * inverse(&c, t).unwrap();
        assert!(p >= t * (1.0 - 1e-7) && p <= 2.0 * t * (1.0 + 1e-7), "t={t}: {}", p / t);
    }
}

#[test]
fn inverse_cases() {
    let cube = YoungFunction::power(3.0).unwrap();
    assert!((inverse(&cube, 8.0).unwrap() - 2.0).abs() < 1e-8);
    assert_eq!(inverse(&cube, 0.0).unwrap(), 0.0);
    let c = conjugate(&quadratic_half()).unwrap();
    assert!((inverse(&c, 2.0).unwrap() - 2.0).abs() < 1e-7);
    assert!(matches!(inverse(&cube, -1.0), Err(Error::Input(_))));
    let narrow = YoungFunction::from_log_knots(&[[0.0, 0.0], [1.0, 3.0], [2.0, 6.0]]).unwrap();
    assert!(matches!(inverse(&narrow, 1e9), Err(Error::Range { .. })));
}

#[test]
fn inverse_of_tabulated_matches_grid_scan() {
    let knots: Vec<[f64; 2]> = uniform_grid(-20.0, 20.0, 0.05)
        .into_iter()
        .map(|x| [x, t4_log2_exact(x.exp()).ln()])
        .collect();
    let f = YoungFunction::from_log_knots(&knots).unwrap();
    let y = 100.0;
    // scan a dense grid for the crossing, then interpolate linearly
    let ts: Vec<f64> = (0..1_000_001).map(|i| 1.0 + 4.0 * i as f64 / 1e6).collect();
    let k = ts.iter().position(|&t| f.eval(t) >= y).unwrap();
    let (t0, t1) = (ts[k - 1], ts[k]);
    let (f0, f1) = (f.eval(t0), f.eval(t1));
    let want = t0 + (y - f0) / (f1 - f0) * (t1 - t0);
    let got = inverse(&f, y).unwrap();
    assert!(rel(got, want) < 1e-6, "{got} vs {want}");
}

#[test]
fn index_values() {
    let p4 = YoungFunction::power(4.0).unwrap();
    for regime in [IndexRegime::Infinity, IndexRegime::Global] {
        let e = matuszewska_index(&p4, regime).unwrap();
        assert!((e.value - 4.0).abs() < 1e-9 && e.converged);
        assert_eq!(e.sequence.len(), 20);
    }
    let e = matuszewska_index(&t4_log2(), IndexRegime::Infinity).unwrap();
    assert!((e.value - 4.0).abs() < 0.05, "{}", e.value);
    let e = matuszewska_index(&YoungFunction::exponential(1.0).unwrap(), IndexRegime::Infinity).unwrap();
    assert!(e.exceeds_cap && !e.converged && e.value == INDEX_CAP);
}

#[test]
fn integrability_conditions() {
    let v = |a: &YoungFunction, n: usize| check_condition(a, n, Condition::EmbeddingFeb1).unwrap().verdict;
    assert_eq!(v(&YoungFunction::power(4.0).unwrap(), 2), Verdict::True);
    assert_eq!(v(&YoungFunction::power_log(2.0, 1.5).unwrap(), 2), Verdict::True);
    assert_eq!(v(&YoungFunction::power(2.0).unwrap(), 2), Verdict::False);
    assert_eq!(v(&YoungFunction::power_log(2.0, 0.5).unwrap(), 2), Verdict::False);
    assert_eq!(v(&YoungFunction::power_log(2.0, 1.0).unwrap(), 2), Verdict::Inconclusive);
    assert_eq!(v(&YoungFunction::exponential(1.0).unwrap(), 3), Verdict::True);
    assert_eq!(v(&YoungFunction::power(1.5).unwrap(), 1), Verdict::True);
    let d = check_condition(&YoungFunction::power(4.0).unwrap(), 2, Condition::DivergenceFeb7).unwrap();
    assert_eq!(d.verdict, Verdict::True);
    let d = check_condition(&YoungFunction::power(1.5).unwrap(), 2, Condition::DivergenceFeb7).unwrap();
    assert_eq!(d.verdict, Verdict::False);
    let p = check_condition(&t4_log2(), 2, Condition::Positivity0inf).unwrap();
    assert_eq!(p.verdict, Verdict::True);
    assert!(check_condition(&t4_log2(), 0, Condition::EmbeddingFeb1).is_err());
}

#[test]
fn construction_rejects_invalid() {
    assert!(YoungFunction::power(1.0).is_err());
    assert!(YoungFunction::exponential(0.0).is_err());
    assert!(YoungFunction::from_log_knots(&[[0.0, 0.0], [1.0, 0.5], [2.0, 1.0]]).is_err());
    let e = YoungFunction::from_json("{\"family\": \"power\",\n\"p\": oops}").unwrap_err();
    assert!(matches!(e, Error::Spec { line: 2, .. }), "{e:?}");
    let y = YoungFunction::from_json(r#"{"family": "powerlog", "p": 4, "q": 2}"#).unwrap();
    assert_eq!(y, t4_log2());
}

#[test]
fn luxemburg_cases() {
    let sq = YoungFunction::power(2.0).unwrap();
    let f = FieldSample::weighted(&[0.25; 4], &[3.0; 4]).unwrap();
    assert!(rel(luxemburg_norm(&f, &sq).unwrap(), 3.0) < 1e-9);
    let z = FieldSample::weighted(&[0.5, 0.5], &[0.0, 0.0]).unwrap();
    assert_eq!(luxemburg_norm(&z, &sq).unwrap(), 0.0);
    let q = YoungFunction::power(4.0).unwrap();
    let (w, v) = ([0.3, 0.7], [2.0, 5.0]);
    let f = FieldSample::weighted(&w, &v).unwrap();
    let want = (w[0] * v[0].powi(4) + w[1] * v[1].powi(4)).powf(0.25);
    assert!(rel(luxemburg_norm(&f, &q).unwrap(), want) < 1e-9);
    assert!(FieldSample::weighted(&[1.0], &[f64::INFINITY]).is_err());
    assert!(FieldSample::weighted(&[0.0], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn luxemburg_is_homogeneous(
        vals in prop::collection::vec(0.0f64..100.0, 1..12),
        c in 0.01f64..100.0,
    ) {
        let w = vec![1.0 / vals.len() as f64; vals.len()];
        let f = FieldSample::weighted(&w, &vals).unwrap();
        let a = t4_log2();
        let n1 = luxemburg_norm(&f, &a).unwrap();
        let n2 = luxemburg_norm(&f.scaled(c), &a).unwrap();
        if n1 == 0.0 {
            prop_assert_eq!(n2, 0.0);
        } else {
            prop_assert!(rel(n2, c * n1) < 1e-8);
        }
    }

    #[test]
    fn modular_at_norm_is_one(vals in prop::collection::vec(0.1f64..10.0, 1..8)) {
        let w = vec![0.5; vals.len()];
        let f = FieldSample::weighted(&w, &vals).unwrap();
        let a = YoungFunction::exponential(2.0).unwrap();
        let l = luxemburg_norm(&f, &a).unwrap();
        let m = ln_modular(&f, &a, l.ln());
        prop_assert!(m <= 1e-12 && m >= -1e-9);
    }

    #[test]
    fn inverse_round_trips(x in -30.0f64..30.0) {
        let a = t4_log2();
        let y = a.eval(x.exp());
        let t = inverse(&a, y).unwrap();
        prop_assert!((a.eval(t) - y).abs() <= 1e-8 * y + 1e-12 + 1e-14 * y);
    }

    #[test]
    fn young_inequality_for_power_pairs(p in 1.2f64..6.0, s in -8.0f64..8.0, t in -8.0f64..8.0) {
        let a = YoungFunction::power(p).unwrap();
        let c = conjugate(&a).unwrap();
        let (s, t) = (s.exp(), t.exp());
        prop_assert!(s * t <= (a.eval(s) + c.eval(t)) * (1.0 + 1e-10));
    }
}
