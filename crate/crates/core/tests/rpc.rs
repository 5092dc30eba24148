use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use sglab::overlap::{ScalarFn, TestFunction};
use sglab::parisi::rs_value;
use sglab::rpc::*;
use sglab::{Error, ModelSpec, RandomStream};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

fn two_level(k: usize) -> CascadeParams {
    CascadeParams::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], k).unwrap()
}

#[test]
fn threestep_counts_follow_poisson_law() {
    // mu([1, inf)) = 1 and mu([4, inf)) = 1/2 for zeta = 1/2
    for (a, mean) in [(1.0, 1.0), (4.0, 0.5)] {
        let spec = PoissonSpec { zeta: 0.5, k: 1 };
        let draws = 100_000;
        let cells = 6;
        let mut counts = vec![0.0; cells];
        let root = RandomStream::new(18);
        for i in 0..draws {
            let pts = sample_poisson_threestep(&spec, a, f64::INFINITY, &root.child(i)).unwrap();
            assert!(pts.iter().all(|&x| x >= a));
            counts[pts.len().min(cells - 1)] += 1.0;
        }
        let law = Poisson::new(mean).unwrap();
        let mut chi2 = 0.0;
        for c in 0..cells {
            let p = if c + 1 == cells { 1.0 - (0..c).map(|j| law.pmf(j as u64)).sum::<f64>() } else { law.pmf(c as u64) };
            let e = p * draws as f64;
            chi2 += (counts[c] - e).powi(2) / e;
        }
        let p_value = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(chi2);
        assert!(p_value > 0.01, "window {a}: chi2 {chi2}, p {p_value}, counts {counts:?}");
    }
}

#[test]
fn largest_point_is_frechet() {
    let spec = PoissonSpec { zeta: 0.4, k: 3 };
    let draws = 20_000;
    let root = RandomStream::new(5);
    let mut u1: Vec<f64> = (0..draws)
        .map(|i| {
            let u = sample_poisson_ordered(&spec, &root.child(i)).unwrap();
            assert!(u.windows(2).all(|w| w[0] > w[1]) && u[2] > 0.0);
            u[0]
        })
        .collect();
    u1.sort_by(f64::total_cmp);
    let n = draws as f64;
    let ks = u1
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (-x.powf(-spec.zeta)).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    // 1% critical value of the Kolmogorov distribution
    assert!(ks < 1.63 / n.sqrt(), "KS {ks}");
}

#[test]
fn ordered_and_threestep_agree_on_windows() {
    // mean number of points >= 1, >= 2 from both samplers
    let spec = PoissonSpec { zeta: 0.5, k: 64 };
    let draws = 20_000;
    let (mut ord, mut three) = ([0.0; 2], [0.0; 2]);
    for i in 0..draws {
        let s = RandomStream::new(8).child(i);
        let u = sample_poisson_ordered(&spec, &s).unwrap();
        let t = sample_poisson_threestep(&spec, 1.0, f64::INFINITY, &s.fork("w")).unwrap();
        for (w, a) in [1.0, 2.0].iter().enumerate() {
            ord[w] += u.iter().filter(|&&x| x >= *a).count() as f64;
            three[w] += t.iter().filter(|&&x| x >= *a).count() as f64;
        }
    }
    for (w, a) in [1.0f64, 2.0].iter().enumerate() {
        let mean = a.powf(-0.5);
        let se = (mean / draws as f64).sqrt();
        assert!((ord[w] / draws as f64 - mean).abs() < 4.0 * se);
        assert!((three[w] / draws as f64 - mean).abs() < 4.0 * se);
    }
}

#[test]
fn poisson_rejects_bad_parameters() {
    assert!(sample_poisson_ordered(&PoissonSpec { zeta: 1.0, k: 4 }, &RandomStream::new(0)).is_err());
    assert!(sample_poisson_ordered(&PoissonSpec { zeta: 0.5, k: 0 }, &RandomStream::new(0)).is_err());
    let spec = PoissonSpec { zeta: 0.5, k: 1 };
    assert!(matches!(sample_poisson_threestep(&spec, 0.0, 1.0, &RandomStream::new(0)), Err(Error::InfiniteMass(_))));
}

#[test]
fn single_level_weights() {
    let p = CascadeParams::new(vec![0.5], vec![0.0, 1.0], 256).unwrap();
    let m = 2000;
    let sq: Vec<f64> = (0..m)
        .map(|j| {
            let c = Cascade::build(&p, &RandomStream::new(2).child(j)).unwrap();
            assert!((c.total() - 1.0).abs() < 1e-12);
            assert!(c.mass[1].windows(2).all(|w| w[0] >= w[1]));
            c.mass[1].iter().map(|v| v * v).sum()
        })
        .collect();
    let mean = sq.iter().sum::<f64>() / m as f64;
    let se = (sq.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m * (m - 1)) as f64).sqrt();
    assert!((mean - 0.5).abs() < 3.0 * se + 2e-3, "E sum v^2 = {mean} +- {se}");
}

#[test]
fn two_level_overlaps_take_three_values() {
    let c = build_cascade(&two_level(64), &RandomStream::new(4)).unwrap();
    let mut rng = RandomStream::new(6).rng();
    let mut seen = [false; 3];
    for _ in 0..2000 {
        let reps = c.sample_leaves(4, &mut rng);
        let r = c.overlaps(&reps);
        assert_eq!(r.ultrametric_violations(), 0);
        for a in 0..4 {
            assert_eq!(r.get(a, a), 1.0);
            for b in 0..4 {
                let x = r.get(a, b);
                assert!(x >= 0.0);
                let p = [0.0, 0.4, 1.0].iter().position(|&q| q == x).expect("atom");
                seen[p] = true;
            }
        }
    }
    assert_eq!(seen, [true; 3]);
    assert_eq!(sample_leaves(&c, 1, &RandomStream::new(0)).entries(), &[1.0]);
}

#[test]
fn leaf_sampling_matches_weights() {
    let c = Cascade::build(&two_level(8), &RandomStream::new(9)).unwrap();
    let mut rng = RandomStream::new(10).rng();
    let draws = 200_000;
    let mut hits = vec![0.0; c.mass[2].len()];
    let mut dust = vec![0.0; c.dust.len()];
    for _ in 0..draws {
        let l = c.sample_leaf(&mut rng);
        match l.child {
            Some(j) => hits[l.parent * 8 + j] += 1.0,
            None => dust[l.parent] += 1.0,
        }
    }
    for (h, v) in hits.iter().zip(&c.mass[2]).chain(dust.iter().zip(&c.dust)) {
        let se = (v * (1.0 - v) / draws as f64).sqrt();
        assert!((h / draws as f64 - v).abs() < 5.0 * se + 1e-9);
    }
}

#[test]
fn overlap_law_matches_zeta() {
    let est = overlap_law_rpc(&two_level(64), 1000, 8, &RandomStream::new(12)).unwrap();
    assert_eq!(est.ultrametric_violations, 0);
    assert!(est.min_overlap >= 0.0);
    assert!(est.max_z() < 3.5, "{est:?}");
    // exact per-cascade law averages to the same thing
    let m = 300;
    let mut acc = [0.0; 3];
    for j in 0..m {
        let c = Cascade::build(&two_level(64), &RandomStream::new(13).child(j)).unwrap();
        for (a, p) in acc.iter_mut().zip(c.level_law()) {
            *a += p / m as f64;
        }
    }
    for (a, x) in acc.iter().zip(two_level(64).overlap_law()) {
        assert!((a - x).abs() < 0.05, "{acc:?}");
    }
}

#[test]
fn relabeling_siblings_does_not_change_ranked_weights() {
    let c = Cascade::build(&two_level(16), &RandomStream::new(14)).unwrap();
    let mut rng = RandomStream::new(15).rng();
    for group in c.mass[2].chunks(16) {
        let mut shuffled = group.to_vec();
        shuffled.shuffle(&mut rng);
        shuffled.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(shuffled, group);
    }
}

#[test]
fn field_covariance_follows_tree() {
    let p = CascadeParams::new(vec![0.3, 0.7], vec![0.2, 0.5, 1.0], 2).unwrap();
    let c = Cascade::build(&p, &RandomStream::new(1)).unwrap();
    let draws = 100_000;
    let (mut v00, mut v01, mut v02, mut cross) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..draws {
        let s = RandomStream::new(20).child(i);
        let g = tree_gaussian(&c, 2, &s.fork("p2"));
        let h = tree_gaussian(&c, 1, &s.fork("p1"));
        v00 += g.leaves[0] * g.leaves[0];
        v01 += g.leaves[0] * g.leaves[1];
        v02 += g.leaves[0] * g.leaves[2];
        cross += g.leaves[0] * h.leaves[0];
    }
    let n = draws as f64;
    let tol = 5.0 * (2.0 / n).sqrt();
    assert!((v00 / n - 1.0).abs() < tol);
    assert!((v01 / n - 0.25).abs() < tol);
    assert!((v02 / n - 0.04).abs() < tol);
    assert!((cross / n).abs() < tol);
    let flat = CascadeParams::new(vec![0.5], vec![0.0, 1.0], 4).unwrap();
    let f = tree_gaussian(&Cascade::build(&flat, &RandomStream::new(0)).unwrap(), 1, &RandomStream::new(3));
    assert_eq!(f.parents, vec![0.0]);
    assert_eq!(f.top_var, 1.0);
}

#[test]
fn guerra_at_infinite_temperature_is_log_two() {
    let e = guerra_rhs_mc(&two_level(64), 0.0, 50, &RandomStream::new(1)).unwrap();
    assert!((e.estimate - LN_2).abs() < 1e-14);
    assert!(e.se < 1e-14);
}

#[test]
fn guerra_mc_matches_recursion_on_small_trees() {
    let p = two_level(64);
    let e = guerra_rhs_mc(&p, 1.0, 600, &RandomStream::new(21)).unwrap();
    let a = guerra_analytic(&p, 1.0).unwrap();
    assert!((e.estimate - a).abs() <= 4.0 * e.se, "{e:?} vs {a}");
    let plain = guerra_rhs_mc_with(&p, 1.0, &GuerraOptions { cascades: 600, fields: 1, control_variates: false }, &RandomStream::new(21)).unwrap();
    assert!((plain.estimate - a).abs() <= 4.0 * plain.se);
    assert!(plain.se > e.se);
}

#[test]
fn guerra_approaches_replica_symmetric_value() {
    // zeta_0 -> 1 with q = (0, 1) collapses to the delta_0 order parameter
    let beta = 0.5;
    let rs = rs_value(&ModelSpec::sk(beta), 0.0);
    assert!((rs - (LN_2 + beta * beta / 2.0)).abs() < 1e-9);
    let mut gaps = vec![];
    for z in [0.8, 0.9] {
        let p = CascadeParams::new(vec![z], vec![0.0, 1.0], 512).unwrap();
        let a = guerra_analytic(&p, beta).unwrap();
        let e = guerra_rhs_mc(&p, beta, 400, &RandomStream::new(22)).unwrap();
        assert!((e.estimate - a).abs() <= 4.0 * e.se + 1e-6, "{e:?} vs {a}");
        gaps.push(a - rs);
    }
    assert!(gaps[1].abs() < gaps[0].abs());
    assert!(gaps[1].abs() < 0.01);
}

#[test]
fn guerra_argument_checks() {
    let p = CascadeParams::new(vec![0.3, 0.7], vec![0.0, 0.4, 0.9], 16).unwrap();
    assert!(matches!(guerra_rhs_mc(&p, 1.0, 10, &RandomStream::new(0)), Err(Error::InvalidParameter(_))));
    assert!(guerra_rhs_mc(&two_level(16), 2.0, 10, &RandomStream::new(0)).is_err());
    assert!(CascadeParams::new(vec![0.7, 0.3], vec![0.0, 0.4, 1.0], 16).is_err());
}

#[test]
fn truncation_gate_rejects_tiny_trees() {
    let p = CascadeParams::new(vec![0.9], vec![0.0, 1.0], 2).unwrap();
    let mut failed = false;
    for j in 0..20 {
        failed |= matches!(build_cascade(&p, &RandomStream::new(j)), Err(Error::TruncationUnstable(_)));
    }
    assert!(failed);
}

#[test]
fn gg_on_cascades() {
    let p = two_level(64);
    let one = gg_residual_rpc(&p, &TestFunction::constant(1.0), 3, 2, 50, 4, &RandomStream::new(1)).unwrap();
    assert!(one.delta < 1e-12);
    let single = CascadeParams::new(vec![0.4], vec![0.0, 1.0], 64).unwrap();
    let f = TestFunction::parse("I(R12=1)").unwrap();
    let e = gg_residual_rpc(&single, &f, 2, 1, 2000, 4, &RandomStream::new(2)).unwrap();
    assert!(e.within(5.0), "{e:?}");
    // E <I(R12 = 1)> = 1 - zeta_0
    assert!((e.terms[1] - 0.6).abs() < 0.03);
    let g = TestFunction::parse("R12^2").unwrap();
    let e = gg_residual_rpc(&p, &g, 3, 2, 1000, 8, &RandomStream::new(3)).unwrap();
    assert!(e.within(5.0), "{e:?}");
}

#[test]
fn invariance_without_tilt_is_trivial() {
    let p = two_level(32);
    let phi = TestFunction::parse("I(R12=0)").unwrap();
    let zero = vec![ScalarFn::zero(), ScalarFn::zero()];
    let e = invariance_residual(&p, &phi, &zero, 1.0, 100, 4, &RandomStream::new(4)).unwrap();
    assert!((e.lhs.mean - e.rhs.mean).abs() < 1e-12);
    let f = vec![ScalarFn::parse("0.5*I(x>=0.4)").unwrap(), ScalarFn::zero()];
    let e0 = invariance_residual(&p, &phi, &f, 0.0, 100, 4, &RandomStream::new(4)).unwrap();
    assert!((e0.lhs.mean - e0.rhs.mean).abs() < 1e-12);
    assert_eq!(e0.lhs, e.lhs);
}

#[test]
fn invariance_holds_on_two_level_cascade() {
    let p = two_level(64);
    let phi = TestFunction::parse("I(R12=0)").unwrap();
    let f = vec![ScalarFn::parse("0.5*I(x>=0.4)").unwrap(), ScalarFn::zero()];
    let e = invariance_residual(&p, &phi, &f, 1.0, 1500, 4, &RandomStream::new(5)).unwrap();
    assert!(e.within(5.0), "{e:?}");
    assert!(invariance_residual(&p, &TestFunction::parse("I(R13=0)").unwrap(), &f, 1.0, 10, 1, &RandomStream::new(0)).is_err());
}

#[test]
fn ensembles_do_not_depend_on_pool_size() {
    let p = two_level(32);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            (
                guerra_rhs_mc(&p, 1.0, 40, &RandomStream::new(7)).unwrap(),
                overlap_law_rpc(&p, 40, 4, &RandomStream::new(7)).unwrap(),
            )
        })
    };
    assert_eq!(run(1), run(4));
}
