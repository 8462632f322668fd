mod common;

use ostop::{
    coefficients, make_brownian, negative_set, real_fn, solve, verify_solution, CustomDiffusion, Interval, Polynomial,
    Region, RewardSpec, SolverOptions, VerifyOptions,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Root of an increasing function on `[lo, hi]`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn quintic_negative_sets_are_the_density_roots() {
    // (α − L)g for the quintic is −α x⁵ + (5α + 10) x³ − (4α + 15) x
    for alpha in [2.0, 1.5] {
        let (model, reward) = common::quintic(alpha);
        let [r1, r2] = common::biquadratic_roots(alpha, -(5.0 * alpha + 10.0), 4.0 * alpha + 15.0);
        let n = negative_set(&model, &reward, &SolverOptions::default()).unwrap();
        assert_eq!(n.len(), 3);
        let expected = [(-r2, -r1), (0.0, r1), (r2, f64::INFINITY)];
        for (got, (lo, hi)) in n.iter().zip(expected) {
            assert!(close(got.lo(), lo, 1e-8), "{got} vs ({lo}, {hi})");
            assert!(got.hi() == hi || close(got.hi(), hi, 1e-8), "{got} vs ({lo}, {hi})");
        }
    }
}

#[test]
fn quintic_alpha2_needs_no_merge() {
    let (model, reward) = common::quintic(2.0);
    let solution = solve(&model, &reward, &SolverOptions::default()).unwrap();
    assert_eq!(solution.stats().merges, 0);
    let c = solution.continuation();
    let expected = [(-3.23, -0.50), (-0.36, 1.43), (1.78, f64::INFINITY)];
    assert_eq!(c.len(), 3);
    for (got, (lo, hi)) in c.iter().zip(expected) {
        assert!(close(got.lo(), lo, 0.02) && (got.hi() == hi || close(got.hi(), hi, 0.02)), "{got}");
    }
    for d in solution.diagnostics() {
        assert!(d.satisfied, "{d:?}");
    }
    for n in &solution.stats().negative_set {
        assert!(c.iter().any(|ci| n.is_subset_of(ci)));
    }
}

#[test]
fn quintic_alpha15_merges_once() {
    let (model, reward) = common::quintic(1.5);
    let solution = solve(&model, &reward, &SolverOptions::default()).unwrap();
    let stats = solution.stats();
    assert_eq!(stats.merges, 1);
    let base: Vec<Interval> = stats.base_pairs.iter().map(|p| p.c).collect();
    assert!(base[0].hi() > base[1].lo(), "first two enlargements should overlap: {base:?}");
    let merged = stats.merged[0].n;
    assert!(close(merged.lo(), -3.21, 0.02) && close(merged.hi(), 1.17, 0.02), "{merged}");
    let c = solution.continuation();
    assert_eq!(c.len(), 2);
    assert!(close(c[0].lo(), -3.53, 0.02) && close(c[0].hi(), 1.46, 0.02));
    assert!(close(c[1].lo(), 1.76, 0.02) && c[1].hi() == f64::INFINITY);
}

#[test]
fn excessive_reward_stops_everywhere() {
    let model = make_brownian(50.0, 0.0, 1.0).unwrap();
    let reward = RewardSpec::polynomial(&model, &[1.0, 0.0, 0.1]).unwrap();
    let opts = SolverOptions::default();
    let solution = solve(&model, &reward, &opts).unwrap();
    assert!(solution.continuation().is_empty());
    assert_eq!(solution.region(0.3), Region::Stop);
    let report = verify_solution(&solution, &VerifyOptions::from(&opts)).unwrap();
    assert_eq!(report.stop_region_max_gap, 0.0);
    assert_eq!(report.majorant_min_gap, 0.0);
}

#[test]
fn kinked_reward_alpha1() {
    let (model, reward) = common::kinked(1.0);
    let solution = solve(&model, &reward, &SolverOptions::default()).unwrap();
    let iv = solution.intervals();
    assert_eq!(iv.len(), 2);
    // left piece: V = k2 e^{√2 x} touching g = x with slope 1 at 1/√2
    assert!(iv[0].c.lo() == f64::NEG_INFINITY && close(iv[0].c.hi(), 0.5f64.sqrt(), 1e-8));
    assert!(close(iv[0].k2, 1.0 / (std::f64::consts::E * 2f64.sqrt()), 1e-8));
    // symmetric piece around 2: V = A cosh(√2 (x − 2)) with t tanh t = 1 at t = √2 d
    let t = bisect(|t| t * t.tanh() - 1.0, 0.5, 2.0);
    let d = t / 2f64.sqrt();
    assert!(close(iv[1].c.lo(), 2.0 - d, 1e-7) && close(iv[1].c.hi(), 2.0 + d, 1e-7), "{}", iv[1].c);
    assert!(close(iv[1].k1, 3.96, 0.05) && close(iv[1].k2, 0.013, 0.003));
}

#[test]
fn kinked_reward_alpha05_rests_on_the_kink() {
    let (model, reward) = common::kinked(0.5);
    let opts = SolverOptions::default();
    let solution = solve(&model, &reward, &opts).unwrap();
    let iv = solution.intervals();
    assert_eq!(iv.len(), 2);
    assert_eq!(iv[0].c.hi(), 1.0);
    assert_eq!(iv[1].c.lo(), 1.0);
    // oracle: with the left end held at 1, the right end maximizes the value at 2
    let g = reward.g_fn();
    let value = |y: f64| {
        let (k1, k2) = coefficients(&model, &*g, Interval::new(1.0, y).unwrap()).unwrap();
        k1 * model.phi(2.0) + k2 * model.psi(2.0)
    };
    let (mut lo, mut hi) = (2.5, 4.0);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if value(m1) < value(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    assert!(close(iv[1].c.hi(), 0.5 * (lo + hi), 1e-5), "{} vs {}", iv[1].c.hi(), 0.5 * (lo + hi));
    let report = verify_solution(&solution, &VerifyOptions::from(&opts)).unwrap();
    assert_eq!(report.kink_contacts, 1);
    assert!(report.majorant_min_gap >= -1e-8, "{report:?}");
    assert!(report.smooth_fit_max < 1e-3 && report.representation_max < 1e-6, "{report:?}");
}

#[test]
fn perpetual_put_under_gbm() {
    let (r, sigma) = (0.04, 0.2);
    let gamma: f64 = 2.0 * r / (sigma * sigma);
    let model = CustomDiffusion {
        domain: Interval::new(0.0, f64::INFINITY).unwrap(),
        alpha: r,
        phi: real_fn(move |x| x.powf(-gamma)),
        psi: real_fn(|x| x),
        scale_density: real_fn(move |x| x.powf(-gamma)),
        speed_density: real_fn(move |x| 2.0 / (sigma * sigma * x * x * x.powf(-gamma))),
        reference_point: Some(1.0),
    }
    .build()
    .unwrap();
    let reward = RewardSpec::piecewise_linear(&model, &[(1.0, 0.0)], Some(-1.0), Some(0.0)).unwrap();
    let solution = solve(&model, &reward, &SolverOptions::default()).unwrap();
    let iv = solution.intervals();
    assert_eq!(iv.len(), 1);
    let b = gamma / (gamma + 1.0);
    assert!(close(iv[0].c.lo(), b, 1e-7));
    // V = (K − b)(x/b)^(−γ) above the boundary
    let x = 1.3;
    assert!(close(solution.evaluate(x).unwrap(), (1.0 - b) * (x / b).powf(-gamma), 1e-7));
}

#[test]
fn shifted_and_scaled_quintic_keeps_structure() {
    // drift and volatility move the problem but the guarantees stay
    let model = make_brownian(1.0, 0.3, 1.4).unwrap();
    let p = Polynomial::from_roots(-0.5, &[-2.0, -1.0, 0.0, 1.0, 2.0]).unwrap();
    let reward = RewardSpec::polynomial(&model, p.coefficients()).unwrap();
    let opts = SolverOptions::default();
    let solution = solve(&model, &reward, &opts).unwrap();
    for d in solution.diagnostics() {
        assert!(d.satisfied);
    }
    let report = verify_solution(&solution, &VerifyOptions::from(&opts)).unwrap();
    assert!(report.majorant_min_gap >= -1e-8 && report.smooth_fit_max < 1e-3, "{report:?}");
    assert!(report.representation_max < 1e-6 && report.harmonicity_relative < 1e-4, "{report:?}");
}
