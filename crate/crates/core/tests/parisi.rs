use std::f64::consts::{FRAC_1_SQRT_2, LN_2};

use proptest::prelude::*;
use sglab::parisi::*;
use sglab::{Error, FunctionalOrderParameter, ModelSpec, RandomStream};

// E g(z) for standard normal z by the trapezoid rule on [-L, L].
fn normal_expect(g: impl Fn(f64) -> f64, n: usize, l: f64) -> f64 {
    let h = 2.0 * l / (n - 1) as f64;
    let c = h / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = 0.0;
    for i in 0..n {
        let z = -l + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += w * g(z) * (-0.5 * z * z).exp();
    }
    s * c
}

fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

fn rs_oracle(beta: f64, q: f64) -> f64 {
    let s = beta * (2.0 * q).sqrt();
    LN_2 + normal_expect(|z| log_cosh(s * z), 8001, 40.0) + 0.5 * beta * beta * (1.0 - q).powi(2)
}

fn golden(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-9 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let q = 0.5 * (a + b);
    (q, f(q))
}

fn solve(fop: &FunctionalOrderParameter, m: &ModelSpec) -> ParisiSolution {
    solve_recursion(fop, m, &ParisiGrid::default_for(m)).unwrap()
}

#[test]
fn dirac_at_zero_is_annealed() {
    for beta in [0.3, 0.5, 1.0] {
        let m = ModelSpec::sk(beta);
        let s = solve(&FunctionalOrderParameter::delta(0.0).unwrap(), &m);
        assert!((s.total - (LN_2 + 0.5 * beta * beta)).abs() < 1e-10, "beta {beta}: {}", s.total);
    }
    let s = solve(&FunctionalOrderParameter::delta(0.0).unwrap(), &ModelSpec::sk(0.5));
    assert!((s.total - 0.818147180559945).abs() < 1e-12);
}

#[test]
fn dirac_at_q_matches_rs_formula() {
    for beta in [0.6, 1.0] {
        let m = ModelSpec::sk(beta);
        for q in [0.2, 0.5, 0.8] {
            let s = solve(&FunctionalOrderParameter::delta(q).unwrap(), &m);
            let want = rs_oracle(beta, q);
            assert!((s.total - want).abs() < 1e-7, "beta {beta} q {q}: {} vs {want}", s.total);
            assert!((rs_value(&m, q) - want).abs() < 1e-10);
        }
    }
}

#[test]
fn one_step_matches_closed_form() {
    // qs = (0, q, 1), cdf = (0, m, 1): P = E_u (1/m) log E_z ch^m(s0 u + s1 z)
    let beta = 1.0;
    let model = ModelSpec::sk(beta);
    for (q, mm) in [(0.5, 0.4), (0.3, 0.8), (0.7, 0.1)] {
        let fop = FunctionalOrderParameter::new(vec![0.0, q, 1.0], vec![0.0, mm, 1.0]).unwrap();
        let s = solve(&fop, &model);
        let s0 = beta * (2.0 * q).sqrt();
        let s1 = beta * (2.0 * (1.0 - q)).sqrt();
        let inner = |x: f64| {
            // factor out e^{m|x|} to keep the integrand bounded
            let e = normal_expect(|z| (mm * (log_cosh(x + s1 * z) - x.abs())).exp(), 1201, 12.0 + 3.0 * s1);
            e.ln() / mm + x.abs()
        };
        let p = normal_expect(|u| inner(s0 * u), 1201, 12.0);
        let corr = 0.5 * beta * beta * mm * (1.0 - q * q);
        assert!((s.value - p).abs() < 1e-9, "{} vs {p}", s.value);
        assert!((s.correction - corr).abs() < 1e-14);
        assert!((s.total - (LN_2 + p - corr)).abs() < 1e-9);
    }
}

#[test]
fn zero_beta_gives_log_two() {
    let m = ModelSpec::sk(0.0);
    let fop = FunctionalOrderParameter::new(vec![0.1, 0.4, 1.0], vec![0.3, 0.7, 1.0]).unwrap();
    assert!((solve(&fop, &m).total - LN_2).abs() < 1e-14);
}

#[test]
fn mixed_model_dirac_matches_general_rs() {
    // xi(x) = beta^2 (c2^2 x^2 + c3^2 x^3)
    let m = ModelSpec { beta: 0.8, h: 0.0, mixture: vec![0.0, 0.8, 0.6] };
    for q in [0.3, 0.7] {
        let s = solve(&FunctionalOrderParameter::delta(q).unwrap(), &m);
        let sd = m.xi_prime(q).sqrt();
        let e = normal_expect(|z| log_cosh(sd * z), 8001, 40.0);
        let want = LN_2 + e + 0.5 * (m.xi_prime(1.0) - m.xi_prime(q))
            - 0.5 * (m.xi_prime(1.0) - m.xi_prime(q) * q - (m.xi(1.0) - m.xi(q)));
        assert!((s.total - want).abs() < 1e-8, "{} vs {want}", s.total);
    }
}

#[test]
fn top_level_is_log_cosh_and_top_atom_is_appended() {
    let fop = FunctionalOrderParameter::new(vec![0.2, 0.6], vec![0.5, 1.0]).unwrap();
    let s = solve(&fop, &ModelSpec::sk(1.0));
    assert_eq!(s.fop.qs, vec![0.2, 0.6, 1.0]);
    assert!(matches!(s.levels.last(), Some(Level::LogCosh)));
}

#[test]
fn rejects_invalid_inputs() {
    let bad = FunctionalOrderParameter { qs: vec![0.5, 0.2], cdf: vec![0.3, 1.0] };
    let m = ModelSpec::sk(1.0);
    assert!(matches!(solve_recursion(&bad, &m, &ParisiGrid::default_for(&m)), Err(Error::InvalidFop(_))));
    let g = ParisiGrid { x_max: 4.0, ..ParisiGrid::default_for(&m) };
    assert!(solve_recursion(&FunctionalOrderParameter::delta(0.0).unwrap(), &m, &g).is_err());
    let g = ParisiGrid::default_for(&m).with_spacing(0.1);
    assert!(solve_recursion(&FunctionalOrderParameter::delta(0.0).unwrap(), &m, &g).is_err());
}

#[test]
fn grid_refinement_is_stable_on_acceptance_fops() {
    let cases = [
        (0.5, FunctionalOrderParameter::delta(0.0).unwrap()),
        (1.0, FunctionalOrderParameter::delta(0.8).unwrap()),
        (1.0, FunctionalOrderParameter::new(vec![0.0, 0.4, 1.0], vec![0.3, 0.7, 1.0]).unwrap()),
    ];
    for (beta, fop) in cases {
        let m = ModelSpec::sk(beta);
        let (_, rep) = solve_checked(&fop, &m, &ParisiGrid::default_for(&m)).unwrap();
        assert!(rep.refined_change.unwrap() < REFINE_TOL);
    }
}

#[test]
fn truncated_grid_is_reported() {
    let m = ModelSpec::sk(5.0);
    let g = ParisiGrid { x_max: 8.0, ..ParisiGrid::default_for(&m) };
    let fop = FunctionalOrderParameter::new(vec![0.3, 0.8, 1.0], vec![0.05, 0.2, 1.0]).unwrap();
    assert!(matches!(solve_checked(&fop, &m, &g), Err(Error::GridTooCoarse(_))));
}

fn arb_fop() -> impl Strategy<Value = FunctionalOrderParameter> {
    (1usize..=3)
        .prop_flat_map(|r| (prop::collection::vec(0.0..1.0f64, r), prop::collection::vec(0.0..1.0f64, r)))
        .prop_map(|(mut q, mut c)| {
            q.sort_by(f64::total_cmp);
            c.sort_by(f64::total_cmp);
            q.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
            c.truncate(q.len());
            if *q.last().unwrap() > 0.999 {
                q.pop();
                c.pop();
            }
            q.push(1.0);
            c.push(1.0);
            FunctionalOrderParameter::new(q, c).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn levels_are_even_lipschitz_convex(fop in arb_fop(), beta in 0.2..2.0f64) {
        let m = ModelSpec::sk(beta);
        let s = solve(&fop, &m);
        for lvl in &s.levels {
            let x0 = lvl.eval(0.0);
            let mut prev = x0;
            let mut prev_slope = f64::NEG_INFINITY;
            let d = 0.037;
            for k in 1..600 {
                let x = k as f64 * d;
                let v = lvl.eval(x);
                prop_assert!((v - lvl.eval(-x)).abs() < 1e-12);
                let slope = (v - prev) / d;
                prop_assert!(slope.abs() <= 1.0 + 1e-9, "slope {} at {}", slope, x);
                prop_assert!(slope >= prev_slope - 1e-7, "concavity at {}", x);
                prop_assert!((v - x).abs() <= x0 + LN_2 + 1e-9);
                prev = v;
                prev_slope = slope;
            }
        }
    }

    #[test]
    fn value_is_below_annealed(fop in arb_fop(), beta in 0.0..1.5f64) {
        // Jensen at every level: P <= xi'(1)/2
        let m = ModelSpec::sk(beta);
        let s = solve(&fop, &m);
        prop_assert!(s.correction >= -1e-15);
        prop_assert!(s.value <= 0.5 * m.xi_prime(1.0) + 1e-9);
        prop_assert!(s.total >= LN_2 - 1e-12 || beta == 0.0);
    }
}

#[test]
fn high_temperature_minimum_is_replica_symmetric() {
    let m = ModelSpec::sk(0.5);
    let res = minimize(&m, 2, &RandomStream::new(11)).unwrap();
    assert!((res.value - (LN_2 + 0.125)).abs() < 1e-6, "{}", res.value);
    assert!(res.fop.zeta(0.01) >= 0.999);
}

#[test]
fn one_step_minimum_is_rs_minimum() {
    let beta = 1.0;
    let m = ModelSpec::sk(beta);
    let chain = minimize_chain(&m, 2, &RandomStream::new(3), &MinimizeOptions::default()).unwrap();
    let (q_star, v_star) = golden(|q| rs_oracle(beta, q), 0.0, 1.0);
    assert!((chain[0].value - v_star).abs() < 1e-7, "{} vs {v_star}", chain[0].value);
    let (q_rs, v_rs) = rs_minimum(&m);
    assert!((q_rs - q_star).abs() < 1e-5 && (v_rs - v_star).abs() < 1e-10);
    assert!(chain[1].value <= chain[0].value + 1e-9);
    assert!(v_star - chain[1].value >= 1e-4, "gain {}", v_star - chain[1].value);
}

#[test]
fn minimum_is_an_upper_bound_for_every_fop() {
    let m = ModelSpec::sk(1.0);
    let res = minimize(&m, 1, &RandomStream::new(5)).unwrap();
    for q in [0.0, 0.1, 0.3, 0.5, 0.9] {
        assert!(res.value <= rs_oracle(1.0, q) + 1e-9);
    }
}

#[test]
fn minimize_rejects_out_of_range_r() {
    let m = ModelSpec::sk(1.0);
    assert!(minimize(&m, 0, &RandomStream::new(1)).is_err());
    assert!(minimize(&m, 7, &RandomStream::new(1)).is_err());
}

#[test]
fn minimize_is_deterministic_across_pools() {
    let m = ModelSpec::sk(0.9);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| minimize(&m, 2, &RandomStream::new(21)).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(a.fop, b.fop);
}

#[test]
fn fixed_point_matches_trapezoid_oracle() {
    let beta = 1.0;
    let th2 = |q: f64| {
        let s = beta * (2.0 * q).sqrt();
        normal_expect(|z| (s * z).tanh().powi(2), 2000, 12.0)
    };
    let (mut lo, mut hi) = (0.05, 1.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if th2(mid) > mid {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = rs_fixed_point(&ModelSpec::sk(beta)).unwrap();
    assert!((q - 0.5 * (lo + hi)).abs() < 1e-10, "{q} vs {lo}");
}

#[test]
fn fixed_point_vanishes_at_high_temperature() {
    assert_eq!(rs_fixed_point(&ModelSpec::sk(0.5)).unwrap(), 0.0);
    assert_eq!(rs_fixed_point(&ModelSpec::sk(FRAC_1_SQRT_2)).unwrap(), 0.0);
}

#[test]
fn dat_line() {
    let crit = dat_condition(&ModelSpec::sk(FRAC_1_SQRT_2)).unwrap();
    assert!((crit.lhs - 0.5).abs() < 1e-10);
    let hot = dat_condition(&ModelSpec::sk(0.5)).unwrap();
    assert!((hot.lhs - 0.25).abs() < 1e-14 && hot.in_rs_region);
    let cold = dat_condition(&ModelSpec::sk(1.0)).unwrap();
    let s = (2.0 * cold.q).sqrt();
    let oracle = normal_expect(|z| (s * z).cosh().powi(-4), 2000, 12.0);
    assert!((cold.lhs - oracle).abs() < 1e-10);
    assert!(cold.lhs > 0.5 && !cold.in_rs_region);
}

#[test]
fn dat_requires_sk() {
    let m = ModelSpec { beta: 1.0, h: 0.0, mixture: vec![0.0, 0.6, 0.8] };
    assert!(dat_condition(&m).is_err());
}

#[test]
fn bracket_tightens_with_beta() {
    let opts = MinimizeOptions { restarts: 2, ..Default::default() };
    let b8 = ground_state_bracket(&ModelSpec::sk(8.0), 1, &RandomStream::new(2), &opts).unwrap();
    let b12 = ground_state_bracket(&ModelSpec::sk(12.0), 1, &RandomStream::new(2), &opts).unwrap();
    assert!(b12.hi <= b8.hi + 1e-6, "{} vs {}", b12.hi, b8.hi);
    assert!(b8.lo < b8.hi && b8.gap >= 0.0);
    assert!((b8.hi - b8.lo - LN_2 / (8.0 * 2f64.sqrt())).abs() < 1e-12);
}
