use sglab::gaussian::*;
use sglab::overlap::{overlap_bits, spins_from_bits};
use sglab::{Error, RandomStream};
use statrs::distribution::{ContinuousCDF, Normal};

// SK covariance (N R^2 - 1) / 2 between configurations a and b at size n.
fn sk_cov(n: usize) -> impl Fn(usize, usize) -> f64 + Copy {
    move |a, b| {
        let r = overlap_bits(a as u64, b as u64, n);
        (n as f64 * r * r - 1.0) / 2.0
    }
}

#[test]
fn hermite_log_cosh_against_order_256() {
    // the kink of log ch at scale 1/a limits the 40-point rule as a grows
    let lo = gauss_hermite(40).unwrap();
    let hi = gauss_hermite(256).unwrap();
    for (a, tol) in [(0.5, 1e-12), (1.0, 1e-8), (1.5, 5e-6)] {
        let f = |z: f64| (a * z).cosh().ln();
        assert!((lo.expect(f) - hi.expect(f)).abs() < tol);
    }
}

#[test]
fn field_samples_have_prescribed_covariance() {
    let one = GaussianFieldSpec::from_fn(1, |_, _| 1.0);
    let draws = 100_000;
    let root = RandomStream::new(1);
    let xs: Vec<f64> = (0..draws).map(|i| sample_field(&one, &root.child(i)).unwrap()[0]).collect();
    let mean = xs.iter().sum::<f64>() / draws as f64;
    let var = xs.iter().map(|x| x * x).sum::<f64>() / draws as f64;
    assert!(mean.abs() < 5.0 / (draws as f64).sqrt());
    assert!((var - 1.0).abs() < 5.0 * (2.0 / draws as f64).sqrt());

    // R = 0.5 between two fixed configurations, C = R^2
    let s1 = spins_from_bits(0b0000, 4);
    let s2 = spins_from_bits(0b1000, 4);
    let r = s1.iter().zip(&s2).map(|(x, y)| (*x as f64) * (*y as f64)).sum::<f64>() / 4.0;
    assert_eq!(r, 0.5);
    let spec = GaussianFieldSpec::from_fn(2, |i, j| if i == j { 1.0 } else { r * r });
    let identity = GaussianFieldSpec::from_fn(3, |i, j| (i == j) as u8 as f64);
    let (mut c, mut c3) = (0.0, [0.0; 3]);
    for i in 0..draws {
        let v = sample_field(&spec, &root.fork("pair").child(i)).unwrap();
        c += v[0] * v[1];
        let w = sample_field(&identity, &root.fork("id").child(i)).unwrap();
        c3[0] += w[0] * w[1];
        c3[1] += w[0] * w[2];
        c3[2] += w[1] * w[2];
    }
    let tol = 5.0 * (1.0625 / draws as f64).sqrt();
    assert!((c / draws as f64 - 0.25).abs() < tol);
    assert!(c3.iter().all(|x| (x / draws as f64).abs() < 5.0 / (draws as f64).sqrt()));
}

#[test]
fn exchangeable_fields_have_equal_marginals() {
    let spec = GaussianFieldSpec::from_fn(4, |i, j| if i == j { 1.0 } else { 0.3 });
    let draws = 40_000;
    let mut above = [0.0; 4];
    for i in 0..draws {
        let v = sample_field(&spec, &RandomStream::new(2).child(i)).unwrap();
        for k in 0..4 {
            above[k] += (v[k] > 0.5) as u8 as f64;
        }
    }
    let p = 1.0 - Normal::standard().cdf(0.5);
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    for a in above {
        assert!((a / draws as f64 - p).abs() < 5.0 * se);
    }
}

#[test]
fn gip_trivial_cases() {
    let one = JointFieldSpec::same(1, |_, _| 1.0);
    let r = gip_residual(&one, &[1.0], &RandomStream::new(3), 2000).unwrap();
    assert!(r.rhs == 0.0 && r.within(5.0));
    let indep = JointFieldSpec::from_fns(3, |i, j| (i == j) as u8 as f64, |_, _| 0.0, |i, j| (i == j) as u8 as f64);
    let r = gip_residual(&indep, &[1.0, 2.0, 1.0], &RandomStream::new(4), 4000).unwrap();
    assert!(r.rhs == 0.0 && r.within(5.0));
    assert!(matches!(gip_residual(&indep, &[1.0], &RandomStream::new(4), 10), Err(Error::LengthMismatch(1, 3))));
}

#[test]
fn gip_on_sk_hamiltonian() {
    let spec = JointFieldSpec::same(16, sk_cov(4));
    let g = vec![1.0; 16];
    let r = gip_residual(&spec, &g, &RandomStream::new(5), 200_000).unwrap();
    assert!(r.within(5.0), "{r:?}");
    assert!(r.rhs > 0.1);
}

#[test]
fn gip_multi_cases() {
    let spec = JointFieldSpec::same(16, sk_cov(4));
    let g = vec![1.0; 16];
    let stream = RandomStream::new(6);
    let single = gip_residual(&spec, &g, &stream, 5000).unwrap();
    let multi = gip_multi_residual(&spec, &g, &|_| 1.0, 1, &stream, 5000).unwrap();
    assert!((single.lhs - multi.lhs).abs() < 1e-12 && (single.rhs - multi.rhs).abs() < 1e-12);
    let zero = gip_multi_residual(&spec, &g, &|_| 0.0, 2, &stream, 100).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    let r12 = |idx: &[usize]| overlap_bits(idx[0] as u64, idx[1] as u64, 4);
    let r = gip_multi_residual(&spec, &g, &r12, 2, &RandomStream::new(7), 20_000).unwrap();
    assert!(r.within(5.0), "{r:?}");
}

#[test]
fn gip_error_shrinks_like_root_m() {
    let spec = JointFieldSpec::same(16, sk_cov(4));
    let g = vec![1.0; 16];
    let a = gip_residual(&spec, &g, &RandomStream::new(8), 10_000).unwrap();
    let b = gip_residual(&spec, &g, &RandomStream::new(9), 40_000).unwrap();
    let ratio = a.se / b.se;
    assert!((ratio - 2.0).abs() < 0.4, "{ratio}");
    let r12 = |idx: &[usize]| overlap_bits(idx[0] as u64, idx[1] as u64, 4);
    let a = gip_multi_residual(&spec, &g, &r12, 2, &RandomStream::new(8), 4000).unwrap();
    let b = gip_multi_residual(&spec, &g, &r12, 2, &RandomStream::new(9), 16_000).unwrap();
    assert!((a.se / b.se - 2.0).abs() < 0.4);
}

#[test]
fn concentration_bounds() {
    let one = GaussianFieldSpec::from_fn(1, |_, _| 1.0);
    let c = concentration_check(&one, &[1.0], 3.0, 100_000, &RandomStream::new(10)).unwrap();
    let tail = 2.0 * (1.0 - Normal::standard().cdf(3.0));
    assert!((c.empirical - tail).abs() < 5.0 * (tail / 1e5).sqrt());
    assert!((c.bound - 2.0 * (-2.25f64).exp()).abs() < 1e-15);
    assert!(c.holds(3.0));
    let zero = concentration_check(&one, &[1.0], 0.0, 100, &RandomStream::new(10)).unwrap();
    assert_eq!(zero.bound, 2.0);
    assert!(zero.holds(0.0));

    // X = log Z at N = 8, beta = 1: g(s) = H(s), a = (N - 1) / 2
    let spec = GaussianFieldSpec::from_fn(256, sk_cov(8));
    let x = 2.0 * spec.max_variance().sqrt();
    let c = concentration_check(&spec, &vec![1.0; 256], x, 10_000, &RandomStream::new(11)).unwrap();
    assert!((c.bound - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
    assert!(c.holds(3.0), "{c:?}");
}
