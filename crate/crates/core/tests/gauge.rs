use orlicz_distort::convex_calculus::Verdict;
use orlicz_distort::gauge::*;
use orlicz_distort::table::{uniform_grid, LogFunction};
use orlicz_distort::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wavy_ln(x: f64) -> f64 {
    // r + r^2 (1 + sin(ln r) / 2)
    let r = x.exp();
    (r + r * r * (1.0 + 0.5 * x.sin())).ln()
}

fn wavy() -> GaugeFunction {
    let knots: Vec<[f64; 2]> = uniform_grid(-10.0, 10.0, 0.05)
        .into_iter()
        .map(|x| [x, wavy_ln(x)])
        .collect();
    GaugeFunction::from_log_knots(&knots, 2).unwrap()
}

fn corpus() -> Vec<GaugeFunction> {
    vec![
        GaugeFunction::power(1.0, 2).unwrap(),
        GaugeFunction::power(2.0, 2).unwrap(),
        GaugeFunction::power(0.5, 1).unwrap(),
        GaugeFunction::power_log(1.5, -0.5, 3).unwrap(),
        GaugeFunction::log_power(-1.0, 2).unwrap(),
        wavy(),
    ]
}

#[test]
fn normalization_is_running_minimum() {
    let phi = wavy();
    assert!(!phi.is_identity_normalized());
    let xs = uniform_grid(-10.0, 10.0, 0.05);
    let mut run = f64::INFINITY;
    let mut changed = 0;
    for &x in &xs {
        let g = wavy_ln(x) - 2.0 * x;
        run = run.min(g);
        let want = run + 2.0 * x;
        assert!((phi.ln_eval(x) - want).abs() < 1e-9, "x={x}");
        if want < g - 1e-6 {
            changed += 1;
        }
    }
    assert!(changed > 20);
}

#[test]
fn normalized_below_raw_and_ratio_monotone() {
    for phi in corpus() {
        let (lo, hi) = phi.log_domain();
        let (lo, hi) = (lo.max(-40.0), hi.min(40.0));
        let nf = phi.n() as f64;
        let mut prev = f64::INFINITY;
        for x in uniform_grid(lo, hi, 0.05) {
            assert!(phi.ln_eval(x) <= phi.ln_eval_raw(x) + 1e-12, "{:?} at {x}", phi.repr());
        }
        for x in uniform_grid(lo, hi, 0.013) {
            let l = phi.ln_eval(x);
            // between knots both sides are interpolants
            assert!(l <= phi.ln_eval_raw(x) + 1e-3, "{:?} at {x}", phi.repr());
            let g = l - nf * x;
            assert!(g <= prev + 1e-9, "{:?} at {x}", phi.repr());
            prev = g;
        }
    }
}

#[test]
fn closed_forms_need_no_normalization() {
    assert!(GaugeFunction::power(1.0, 2).unwrap().is_identity_normalized());
    assert!(GaugeFunction::power(2.0, 2).unwrap().is_identity_normalized());
    assert!(GaugeFunction::log_power(-1.0, 2).unwrap().is_identity_normalized());
}

#[test]
fn normalization_is_idempotent() {
    let phi = wavy();
    let twice = normalize_gauge(&normalize_gauge(&phi).unwrap()).unwrap();
    let knots: Vec<[f64; 2]> = uniform_grid(-10.0, 10.0, 0.05)
        .into_iter()
        .map(|x| [x, phi.ln_eval(x)])
        .collect();
    let rebuilt = GaugeFunction::from_log_knots(&knots, 2).unwrap();
    for x in uniform_grid(-10.0, 10.0, 0.05) {
        assert!((twice.ln_eval(x) - phi.ln_eval(x)).abs() < 1e-12);
        assert!((rebuilt.ln_eval(x) - phi.ln_eval(x)).abs() < 1e-9);
    }
}

#[test]
fn gauge_conditions() {
    let v = |phi: &GaugeFunction, c| check_gauge(phi, c).unwrap().verdict;
    let sub = GaugeFunction::power(1.0, 2).unwrap();
    let leb = GaugeFunction::power(2.0, 2).unwrap();
    let logp = GaugeFunction::log_power(-1.0, 2).unwrap();
    assert_eq!(v(&sub, GaugeCondition::NotLebesgueFeb4), Verdict::True);
    assert_eq!(v(&leb, GaugeCondition::NotLebesgueFeb4), Verdict::False);
    assert_eq!(v(&leb, GaugeCondition::NontrivialFeb3), Verdict::True);
    assert_eq!(v(&logp, GaugeCondition::NontrivialFeb3), Verdict::True);
    assert_eq!(v(&logp, GaugeCondition::NotLebesgueFeb4), Verdict::True);
    assert_eq!(v(&sub, GaugeCondition::RatioFeb8), Verdict::True);
    assert_eq!(v(&wavy(), GaugeCondition::RatioFeb8), Verdict::False);
    let e = GaugeFunction::power(3.0, 2).unwrap_err();
    assert!(matches!(e, Error::ConditionFailed(_)), "{e:?}");
}

#[test]
fn scaling_cases() {
    let phi = GaugeFunction::power(2.0, 2).unwrap();
    let same = scale_gauge(&phi, 1.0).unwrap();
    assert_eq!(same, phi);
    let k3 = scale_gauge(&phi, 3.0).unwrap();
    for r in [1e-5, 0.1, 2.0] {
        assert!((k3.eval(r) / (9.0 * r * r) - 1.0).abs() < 1e-12);
        assert!(k3.eval(r) <= 9.0 * phi.eval(r) * (1.0 + 1e-12));
    }
    let w = wavy();
    let half = scale_gauge(&w, 0.5).unwrap();
    for x in uniform_grid(-9.0, 9.0, 0.031) {
        let r = x.exp();
        assert!((half.eval(r) / w.eval(0.5 * r) - 1.0).abs() < 1e-12);
    }
    assert!(scale_gauge(&phi, 0.0).is_err());
}

#[test]
fn delta2_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for phi in corpus() {
        let nf = phi.n() as f64;
        let (lo, hi) = phi.log_domain();
        for _ in 0..1000 {
            let k = rng.random_range(-5.0f64..5.0).exp();
            let x = rng.random_range(lo.max(-30.0) + 5.0..hi.min(30.0) - 5.0);
            let r = x.exp();
            let bound = 1f64.max(k.powf(nf)) * phi.eval(r);
            assert!(phi.eval(k * r) <= bound * (1.0 + 1e-9), "{:?} k={k} r={r}", phi.repr());
        }
    }
}

#[test]
fn json_documents() {
    let g = GaugeFunction::from_json(r#"{"n": 2, "family": "logpower", "beta": -1}"#).unwrap();
    assert_eq!(g, GaugeFunction::log_power(-1.0, 2).unwrap());
    let e = GaugeFunction::from_json("{\"n\": 2,\n \"family\": \"cubic\"}").unwrap_err();
    assert!(matches!(e, Error::Spec { line: 2, .. }), "{e:?}");
    assert!(GaugeFunction::power(1.0, 0).is_err());
    assert!(GaugeFunction::power_log(0.0, 0.5, 2).is_err());
}

proptest! {
    #[test]
    fn eval_is_increasing(alpha in 0.1f64..2.0, beta in -2.0f64..0.0, a in -20.0f64..5.0, d in 0.001f64..3.0) {
        let phi = GaugeFunction::power_log(alpha, beta, 2).unwrap();
        prop_assert!(phi.ln_eval(a + d) >= phi.ln_eval(a));
    }

    #[test]
    fn scaling_composes(k1 in 0.1f64..10.0, k2 in 0.1f64..10.0, x in -10.0f64..10.0) {
        let phi = wavy();
        let a = scale_gauge(&scale_gauge(&phi, k1).unwrap(), k2).unwrap();
        let b = scale_gauge(&phi, k1 * k2).unwrap();
        prop_assert!((a.ln_eval(x - 1.0) - b.ln_eval(x - 1.0)).abs() < 1e-9);
    }
}
