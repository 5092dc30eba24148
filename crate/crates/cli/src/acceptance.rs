//! The acceptance criteria. Each criterion runs at its pinned settings and
//! seed, and reports a pass flag with a JSON detail object.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2, PI};
use std::time::Instant;

use clap::Parser;
use serde::Serialize;
use serde_json::{json, Value};
use sglab::cavity::{
    asymptotic_constant, empirical_limit, min_matching_exact, solve_g, tsp_exact, IntegralEquationSpec, Kind,
    RandomInstance,
};
use sglab::gaussian::{concentration_check, gip_multi_residual, gip_residual, GaussianFieldSpec, JointFieldSpec};
use sglab::overlap::{overlap_bits, spins_from_bits, ScalarFn};
use sglab::parisi::{dat_condition, ground_state_bracket, minimize, rs_minimum, MinimizeOptions, ParisiGrid};
use sglab::rpc::{gg_residual_rpc, guerra_analytic, guerra_rhs_mc, invariance_residual, overlap_law_rpc, CascadeParams};
use sglab::sk::{
    dean_comparison, free_energy, gg_residual, overlap_histogram, summarize, Disorder, McmcOptions, PertSpec, Sampler,
};
use sglab::stats::combined_se;
use sglab::{Error, ModelSpec, RandomStream, TestFunction};

use crate::args::{Cli, Command, Suite};
use crate::run::execute;

type Check = Result<(bool, Value), Error>;

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    /// Draws random numbers (and so takes part in the determinism check).
    pub randomized: bool,
    run: fn() -> Check,
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub criterion: u32,
    pub name: String,
    pub pass: bool,
    pub seconds: f64,
    pub detail: Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: usize,
    pub failed: Vec<u32>,
    pub seconds: f64,
}

const DETERMINISM: u32 = 14;

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { id: 1, name: "rs value", randomized: false, run: c1_rs_value },
        Criterion { id: 2, name: "rs formula identity", randomized: false, run: c2_rs_formula },
        Criterion { id: 3, name: "phase boundary", randomized: true, run: c3_phase_boundary },
        Criterion { id: 4, name: "ground-state constant", randomized: true, run: c4_ground_state },
        Criterion { id: 5, name: "guerra dominance at finite n", randomized: true, run: c5_guerra_finite_n },
        Criterion { id: 6, name: "rpc cross-oracle", randomized: true, run: c6_rpc_guerra },
        Criterion { id: 7, name: "rpc overlap law", randomized: true, run: c7_rpc_overlap_law },
        Criterion { id: 8, name: "ghirlanda-guerra identities", randomized: true, run: c8_gg },
        Criterion { id: 9, name: "invariance property", randomized: true, run: c9_invariance },
        Criterion { id: 10, name: "matching", randomized: true, run: c10_matching },
        Criterion { id: 11, name: "tsp", randomized: true, run: c11_tsp },
        Criterion { id: 12, name: "dean's problem", randomized: true, run: c12_dean },
        Criterion { id: 13, name: "oracle equivalences", randomized: true, run: c13_oracles },
    ]
}

/// Criterion ids run by a suite; the determinism check is always last.
pub fn suite_ids(suite: Suite) -> Vec<u32> {
    match suite {
        Suite::Fast => vec![1, 2, 3, 7, 10, 11, 12, 13, DETERMINISM],
        Suite::Full => (1..=DETERMINISM).collect(),
    }
}

fn pool(threads: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool")
}

fn report(id: u32, name: &str, start: Instant, res: Check) -> CriterionReport {
    let (pass, detail) = match res {
        Ok(x) => x,
        Err(e) => (false, json!({ "error": e.to_string() })),
    };
    CriterionReport { criterion: id, name: name.into(), pass, seconds: start.elapsed().as_secs_f64(), detail }
}

/// Runs a suite, handing each criterion's report to `emit` as it completes.
/// Randomized criteria run in an 8-worker pool; the determinism criterion
/// re-runs them in a 1-worker pool and compares the serialized details.
pub fn run_suite(suite: Suite, emit: &mut dyn FnMut(&CriterionReport)) -> SuiteReport {
    let start = Instant::now();
    let ids = suite_ids(suite);
    let all = criteria();
    let eight = pool(8);
    let one = pool(1);
    let mut reports = vec![];
    let mut first_runs: Vec<(u32, String)> = vec![];
    for c in all.iter().filter(|c| ids.contains(&c.id)) {
        let t = Instant::now();
        let r = report(c.id, c.name, t, eight.install(c.run));
        if c.randomized {
            first_runs.push((c.id, serde_json::to_string(&r.detail).expect("json")));
        }
        emit(&r);
        reports.push(r);
    }
    if ids.contains(&DETERMINISM) {
        let t = Instant::now();
        let mut mismatches = vec![];
        for (id, first) in &first_runs {
            let c = all.iter().find(|c| c.id == *id).unwrap();
            let again = report(c.id, c.name, t, one.install(c.run));
            if serde_json::to_string(&again.detail).expect("json") != *first {
                mismatches.push(*id);
            }
        }
        let argv = [
            "sglab", "--seed", "7", "sk", "overlap", "--beta", "1", "--n", "8", "--m", "20", "--mcmc", "--chains", "4",
            "--sweeps", "2000",
        ];
        let a = eight.install(|| crate::record_bytes(&argv));
        let b = one.install(|| crate::record_bytes(&argv));
        let records_equal = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
        let rerun: Vec<u32> = first_runs.iter().map(|(id, _)| *id).collect();
        let r = report(
            DETERMINISM,
            "determinism",
            t,
            Ok((
                mismatches.is_empty() && records_equal,
                json!({ "rerun": rerun, "mismatches": mismatches, "run_record_identical": records_equal }),
            )),
        );
        emit(&r);
        reports.push(r);
    }
    let failed = reports.iter().filter(|r| !r.pass).map(|r| r.criterion).collect::<Vec<_>>();
    SuiteReport { suite, passed: reports.len() - failed.len(), failed, seconds: start.elapsed().as_secs_f64() }
}

// Runs a command line through the normal dispatcher and returns its results.
fn cli_results(argv: &[&str]) -> Result<Value, Error> {
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    assert!(!matches!(cli.command, Command::Acceptance { .. }));
    Ok(execute(&cli.command, cli.seed.unwrap_or(0))?.results)
}

fn c1_rs_value() -> Check {
    let res = cli_results(&["sglab", "parisi", "solve", "--beta", "0.5", "--qs", "0", "--cdf", "1"])?;
    let value = res["value"].as_f64().unwrap_or(f64::NAN);
    let expected = LN_2 + 0.125;
    Ok(((value - expected).abs() <= 1e-6, json!({ "value": value, "expected": expected, "tol": 1e-6 })))
}

// log ch, written independently of the library.
fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

// E g(z) for standard normal z by the composite trapezoid rule on [-40, 40].
fn trapezoid_normal(g: impl Fn(f64) -> f64) -> f64 {
    let (n, l) = (8001, 40.0);
    let h = 2.0 * l / (n - 1) as f64;
    let mut s = 0.0;
    for i in 0..n {
        let z = -l + i as f64 * h;
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        s += w * g(z) * (-0.5 * z * z).exp();
    }
    s * h / (2.0 * PI).sqrt()
}

fn c2_rs_formula() -> Check {
    let mut rows = vec![];
    let mut worst: f64 = 0.0;
    for beta in [0.6f64, 1.0] {
        for q in [0.2f64, 0.5, 0.8] {
            let argv = ["sglab", "parisi", "solve", "--beta", &beta.to_string(), "--qs", &q.to_string(), "--cdf", "1"];
            let value = cli_results(&argv)?["value"].as_f64().unwrap_or(f64::NAN);
            let s = beta * (2.0 * q).sqrt();
            let oracle = LN_2 + trapezoid_normal(|z| log_cosh(s * z)) + 0.5 * beta * beta * (1.0 - q) * (1.0 - q);
            let err = (value - oracle).abs();
            worst = if err.is_nan() { f64::NAN } else { worst.max(err) };
            rows.push(json!({ "beta": beta, "q": q, "value": value, "oracle": oracle }));
        }
    }
    Ok((worst <= 1e-7, json!({ "rows": rows, "max_error": worst, "tol": 1e-7 })))
}

fn c3_phase_boundary() -> Check {
    let dat = dat_condition(&ModelSpec::sk(FRAC_1_SQRT_2))?;
    let hot = minimize(&ModelSpec::sk(0.55), 2, &RandomStream::new(301))?;
    let mass_near_zero = hot.fop.zeta(0.01);
    let cold_model = ModelSpec::sk(1.0);
    let cold = minimize(&cold_model, 2, &RandomStream::new(302))?;
    let (q_rs, v_rs) = rs_minimum(&cold_model);
    let gain = v_rs - cold.value;
    let pass = (dat.lhs - 0.5).abs() <= 1e-10 && mass_near_zero >= 0.999 && gain >= 1e-4;
    Ok((
        pass,
        json!({
            "dat_lhs": dat.lhs,
            "mass_at_q_le_0.01": mass_near_zero,
            "fop_beta_0.55": hot.fop,
            "rs_best": { "q": q_rs, "value": v_rs },
            "r2_value_beta_1": cold.value,
            "rsb_gain": gain,
        }),
    ))
}

fn c4_ground_state() -> Check {
    let model = ModelSpec::sk(10.0);
    let opts = MinimizeOptions {
        restarts: 2,
        grid: Some(ParisiGrid::default_for(&model).with_spacing(0.05)),
        ..Default::default()
    };
    let b = ground_state_bracket(&model, 3, &RandomStream::new(401), &opts)?;
    let target = 0.7633;
    let pass = b.lo <= target && target <= b.hi && b.hi - b.lo <= 0.06 && b.gap.abs() <= 2e-3;
    Ok((pass, json!({ "bracket": b, "width": b.hi - b.lo, "target": target })))
}

fn c5_guerra_finite_n() -> Check {
    let mut rows = vec![];
    let mut pass = true;
    for (n, beta) in [(12, 0.5), (12, 1.0), (18, 1.0)] {
        let model = ModelSpec::sk(beta);
        let f = free_energy(&model, n, 300, &RandomStream::new(500 + n as u64))?;
        let bound = minimize(&model, 2, &RandomStream::new(510))?.value;
        pass &= f.mean - 3.0 * f.se <= bound;
        rows.push(json!({ "n": n, "beta": beta, "free_energy": f, "parisi_minimum": bound }));
    }
    Ok((pass, json!({ "rows": rows })))
}

fn two_level() -> Result<CascadeParams, Error> {
    CascadeParams::new(vec![0.3, 0.7], vec![0.0, 0.4, 1.0], 256)
}

fn c6_rpc_guerra() -> Check {
    let p = two_level()?;
    let e = guerra_rhs_mc(&p, 1.0, 4000, &RandomStream::new(601))?;
    let analytic = guerra_analytic(&p, 1.0)?;
    let pass = (e.estimate - analytic).abs() <= 3.0 * e.se && e.se <= 5e-3;
    Ok((pass, json!({ "estimate": e, "analytic": analytic })))
}

fn c7_rpc_overlap_law() -> Check {
    let e = overlap_law_rpc(&two_level()?, 4000, 8, &RandomStream::new(701))?;
    let z = e.max_z();
    let pass = z <= 3.0 && e.ultrametric_violations == 0 && e.min_overlap >= 0.0;
    Ok((pass, json!({ "law": e, "max_z": z })))
}

fn c8_gg() -> Check {
    let p = two_level()?;
    let mut rows = vec![];
    let mut pass = true;
    for f in ["1", "R12^2", "I(R12=0.4)"] {
        let tf = TestFunction::parse(f)?;
        for (n, pw) in [(2, 1), (2, 2), (3, 2)] {
            let e = gg_residual_rpc(&p, &tf, n, pw, 5000, 16, &RandomStream::new(801))?;
            pass &= e.within(5.0);
            rows.push(json!({ "f": f, "n": n, "p": pw, "delta": e.delta, "se": e.se }));
        }
    }
    let tf = TestFunction::parse("R12^2")?;
    let pert = PertSpec { gamma: 0.49, ..PertSpec::default() };
    let sizes: Vec<_> = [8, 12]
        .iter()
        .map(|&n| gg_residual(&ModelSpec::sk(1.0), n, &tf, 2, 2, 300, Some(&pert), 0, &RandomStream::new(802)))
        .collect::<Result<_, _>>()?;
    let (e8, e12) = (&sizes[0], &sizes[1]);
    let trend = e12.delta <= e8.delta + 3.0 * combined_se(e8.se, e12.se);
    Ok((
        pass && trend,
        json!({
            "cascade": rows,
            "finite_n": { "n8": { "delta": e8.delta, "se": e8.se }, "n12": { "delta": e12.delta, "se": e12.se } },
            "trend_ok": trend,
        }),
    ))
}

fn c9_invariance() -> Check {
    let phi = TestFunction::parse("I(R12=0)")?;
    let fs = vec![ScalarFn::parse("0.5*I(x>=0.4)")?, ScalarFn::zero()];
    let e = invariance_residual(&two_level()?, &phi, &fs, 1.0, 5000, 4, &RandomStream::new(901))?;
    Ok((e.within(5.0), json!(e)))
}

fn c10_matching() -> Check {
    let g = solve_g(&IntegralEquationSpec::new(Kind::Matching, 1.0))?;
    let sup = g.x.iter().zip(&g.g).map(|(&x, &v)| (v - (1.0 + (2.0 * x).exp()).ln()).abs()).fold(0.0, f64::max);
    let c = asymptotic_constant(&IntegralEquationSpec::new(Kind::Matching, 1.0))?;
    let e = empirical_limit(Kind::Matching, 1.0, &[8, 12, 16], 2000, &RandomStream::new(1001))?;
    let pass = sup <= 1e-6 && (c - 0.82247).abs() <= 1e-4 && e.trend_ok;
    Ok((pass, json!({ "sup_error": sup, "iterations": g.iterations, "constant": c, "empirical": e })))
}

fn c11_tsp() -> Check {
    let c = asymptotic_constant(&IntegralEquationSpec::new(Kind::Tsp, 1.0))?;
    let stream = RandomStream::new(1101);
    let mut violations = 0;
    let mut min_ratio = f64::INFINITY;
    for j in 0..1000 {
        let inst = RandomInstance::random(12, 1.0, &stream.child(j))?;
        let (tour, matching) = (tsp_exact(&inst)?, min_matching_exact(&inst)?);
        if tour < 2.0 * matching - 1e-12 {
            violations += 1;
        }
        min_ratio = min_ratio.min(tour / matching);
    }
    let pass = (c - 2.04).abs() <= 0.01 && violations == 0;
    Ok((pass, json!({ "constant": c, "instances": 1000, "violations": violations, "min_tour_over_matching": min_ratio })))
}

fn c12_dean() -> Check {
    let c = dean_comparison(16, 300, &RandomStream::new(1201))?;
    let pass = c.ground.mean < c.random.mean && c.p_value < 0.01;
    Ok((pass, json!({ "comparison": c, "asymptotic_reference": { "n": 10_000, "ground": 2462, "random": 2500 } })))
}

// log Z and max H by direct summation over all states.
fn naive_sums(d: &Disorder, beta: f64) -> Result<(f64, f64), Error> {
    let mut expo = vec![];
    let mut max_h = f64::NEG_INFINITY;
    for s in 0..1u64 << d.n {
        let sigma = spins_from_bits(s, d.n);
        expo.push(d.exponent(beta, &sigma)?);
        max_h = max_h.max(d.main_hamiltonian(&sigma)?);
    }
    let top = expo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((top + expo.iter().map(|e| (e - top).exp()).sum::<f64>().ln(), max_h))
}

// Minimum perfect matching by recursive pairing of the lowest free vertex.
fn pairing_enumeration(inst: &RandomInstance, free: &[usize]) -> f64 {
    if free.is_empty() {
        return 0.0;
    }
    let (i, rest) = (free[0], &free[1..]);
    (0..rest.len())
        .map(|k| {
            let others: Vec<usize> = rest.iter().enumerate().filter(|&(m, _)| m != k).map(|(_, &v)| v).collect();
            inst.len(i, rest[k]) + pairing_enumeration(inst, &others)
        })
        .fold(f64::INFINITY, f64::min)
}

// Shortest tour by enumerating every ordering of vertices 1..n.
fn brute_force_tour(inst: &RandomInstance) -> f64 {
    fn go(inst: &RandomInstance, last: usize, used: &mut [bool], left: usize, acc: f64, best: &mut f64) {
        if left == 0 {
            *best = best.min(acc + inst.len(last, 0));
            return;
        }
        for v in 1..inst.n {
            if !used[v] {
                used[v] = true;
                go(inst, v, used, left - 1, acc + inst.len(last, v), best);
                used[v] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; inst.n];
    go(inst, 0, &mut used, inst.n - 1, 0.0, &mut best);
    best
}

fn c13_oracles() -> Check {
    // Gray-code enumeration against direct summation
    let models = [
        ModelSpec::sk(1.3),
        ModelSpec { beta: 0.9, h: 0.3, mixture: vec![0.5, 1.0, 0.7] },
    ];
    let mut enum_err: f64 = 0.0;
    for (k, model) in models.iter().enumerate() {
        for n in 1..=10 {
            let d = Disorder::draw(model, n, &RandomStream::new(1301).child(k as u64).child(n as u64))?;
            let fast = summarize(&d, model.beta)?;
            let (log_z, max_h) = naive_sums(&d, model.beta)?;
            enum_err = enum_err.max((fast.log_z - log_z).abs()).max((fast.max_h - max_h).abs());
        }
    }

    // Metropolis against exact overlap histograms
    let model = ModelSpec::sk(1.0);
    let opts = McmcOptions { burn_in: 1000, sweeps: 100_000, ..McmcOptions::default() };
    let st = RandomStream::new(1302);
    let exact = overlap_histogram(&model, 8, 4, None, &Sampler::Exact, &st)?;
    let chain = overlap_histogram(&model, 8, 4, None, &Sampler::Mcmc { opts, chains: 8 }, &st)?;
    let tv = exact.mass.iter().zip(&chain.mass).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;

    // exact optimizers against enumeration
    let mut matching_err: f64 = 0.0;
    let mut tour_err: f64 = 0.0;
    for j in 0..5 {
        let inst = RandomInstance::random(10, 1.0, &RandomStream::new(1303).child(j))?;
        let all: Vec<usize> = (0..10).collect();
        matching_err = matching_err.max((min_matching_exact(&inst)? - pairing_enumeration(&inst, &all)).abs());
        tour_err = tour_err.max((tsp_exact(&inst)? - brute_force_tour(&inst)).abs());
    }

    // Gaussian integration by parts on the N = 4 SK field, covariance (N R^2 - 1) / 2
    let sk_cov = |a: usize, b: usize| {
        let r = overlap_bits(a as u64, b as u64, 4);
        (4.0 * r * r - 1.0) / 2.0
    };
    let spec = JointFieldSpec::same(16, sk_cov);
    let g = vec![1.0; 16];
    let gip = gip_residual(&spec, &g, &RandomStream::new(1304), 200_000)?;
    let r12 = |idx: &[usize]| overlap_bits(idx[0] as u64, idx[1] as u64, 4);
    let gip_multi = gip_multi_residual(&spec, &g, &r12, 2, &RandomStream::new(1305), 20_000)?;

    // concentration of a single Gaussian and of log Z at N = 8
    let one = GaussianFieldSpec::from_fn(1, |_, _| 1.0);
    let single = concentration_check(&one, &[1.0], 3.0, 100_000, &RandomStream::new(1306))?;
    let field8 = GaussianFieldSpec::from_fn(256, |a, b| {
        let r = overlap_bits(a as u64, b as u64, 8);
        (8.0 * r * r - 1.0) / 2.0
    });
    let x = 2.0 * field8.max_variance().sqrt();
    let log_z = concentration_check(&field8, &vec![1.0; 256], x, 10_000, &RandomStream::new(1307))?;

    let pass = enum_err <= 1e-9
        && tv <= 0.02
        && matching_err <= 1e-12
        && tour_err <= 1e-12
        && gip.within(5.0)
        && gip_multi.within(5.0)
        && single.holds(3.0)
        && log_z.holds(3.0);
    Ok((
        pass,
        json!({
            "enumeration_max_error": enum_err,
            "mcmc_total_variation": tv,
            "matching_max_error": matching_err,
            "tour_max_error": tour_err,
            "gip": gip,
            "gip_multi": gip_multi,
            "concentration": [single, log_z],
        }),
    ))
}
