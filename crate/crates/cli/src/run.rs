//! Dispatch of a parsed command onto the library.

use serde::Serialize;
use serde_json::{json, Value};
use sglab::cavity::{
    asymptotic_constant, empirical_limit, min_matching_exact, solve_g, tsp_exact, IntegralEquationSpec, Kind,
    RandomInstance,
};
use sglab::parisi::{
    dat_condition, ground_state_bracket, minimize_with, rs_minimum, rs_value, solve_checked, MinimizeOptions,
    ParisiGrid,
};
use sglab::rpc::{
    build_cascade, gg_residual_rpc, guerra_analytic, guerra_rhs_mc, invariance_residual, sample_leaves,
    CascadeParams,
};
use sglab::sk::{
    cavity_series, dean_comparison, free_energy, gg_residual, ground_state_density, overlap_histogram,
    ultrametric_violation, McmcOptions, PertSpec, Sampler,
};
use sglab::overlap::ScalarFn;
use sglab::{Error, FunctionalOrderParameter, ModelSpec, RandomStream, TestFunction};

use crate::args::{CascadeArgs, CavityCmd, Command, KindArg, McmcArgs, ModelArgs, ParisiCmd, RpcCmd, SkCmd};

/// What a command produced, before it is wrapped into a run record.
#[derive(Debug)]
pub struct Outcome {
    pub results: Value,
    pub diagnostics: Value,
    /// Tabular form for `--format csv`, when the command has one.
    pub csv: Option<String>,
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("serializable")
}

fn outcome<T: Serialize>(results: &T) -> Outcome {
    Outcome { results: to_value(results), diagnostics: json!({}), csv: None }
}

impl ModelArgs {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec { beta: self.beta, h: self.h, mixture: self.mixture.clone() }
    }
}

impl CascadeArgs {
    fn params(&self) -> Result<CascadeParams, Error> {
        CascadeParams::new(self.zetas.clone(), self.qs.clone(), self.k)
    }
}

impl From<KindArg> for Kind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Matching => Kind::Matching,
            KindArg::Tsp => Kind::Tsp,
        }
    }
}

impl McmcArgs {
    fn sampler(&self) -> Sampler {
        if !self.mcmc {
            return Sampler::Exact;
        }
        let opts = McmcOptions {
            burn_in: self.burn_in,
            sweeps: self.sweeps,
            thin: 1,
            ladder: self.ladder.clone(),
            rhat_max: self.rhat_max,
        };
        Sampler::Mcmc { opts, chains: self.chains }
    }
}

fn single(v: Value) -> (String, Value) {
    match v {
        Value::Object(m) if m.len() == 1 => m.into_iter().next().unwrap(),
        other => (String::new(), other),
    }
}

/// Space-separated command path (`parisi solve`) and the command's own
/// arguments.
pub fn describe(cmd: &Command) -> (String, Value) {
    let (top, inner) = single(to_value(cmd));
    if let Command::Acceptance { suite } = cmd {
        return (format!("{top} {}", to_value(suite).as_str().unwrap_or_default()), inner);
    }
    let (leaf, params) = single(inner);
    (format!("{top} {leaf}"), params)
}

/// Whether the command draws random numbers and therefore needs a seed.
pub fn is_randomized(cmd: &Command) -> bool {
    match cmd {
        Command::Parisi(p) => matches!(p, ParisiCmd::Minimize { .. } | ParisiCmd::GroundState { .. }),
        Command::Sk(_) | Command::Rpc(_) => true,
        Command::Cavity(c) => matches!(c, CavityCmd::Empirical { .. } | CavityCmd::Exact { .. }),
        Command::Acceptance { .. } => false,
    }
}

pub fn execute(cmd: &Command, seed: u64) -> Result<Outcome, Error> {
    let stream = RandomStream::new(seed);
    match cmd {
        Command::Parisi(p) => parisi(p, &stream),
        Command::Sk(s) => sk(s, &stream),
        Command::Rpc(r) => rpc(r, &stream),
        Command::Cavity(c) => cavity(c, &stream),
        Command::Acceptance { .. } => unreachable!("the acceptance suite is driven separately"),
    }
}

fn parisi(cmd: &ParisiCmd, stream: &RandomStream) -> Result<Outcome, Error> {
    match cmd {
        ParisiCmd::Solve { model, qs, cdf, spacing } => {
            let spec = model.spec();
            let fop = FunctionalOrderParameter::new(qs.clone(), cdf.clone())?;
            let mut grid = ParisiGrid::default_for(&spec);
            if let Some(s) = spacing {
                grid = grid.with_spacing(*s);
            }
            let (sol, report) = solve_checked(&fop, &spec, &grid)?;
            Ok(Outcome {
                results: json!({
                    "value": sol.total,
                    "p": sol.value,
                    "correction": sol.correction,
                    "fop": sol.fop,
                }),
                diagnostics: json!({ "grid": report }),
                csv: None,
            })
        }
        ParisiCmd::Minimize { model, r, restarts } => {
            let opts = MinimizeOptions { restarts: *restarts, ..Default::default() };
            let res = minimize_with(&model.spec(), *r, stream, &opts)?;
            Ok(Outcome {
                results: json!({ "value": res.value, "fop": res.fop, "r": res.r }),
                diagnostics: json!({ "evaluations": res.evals }),
                csv: None,
            })
        }
        ParisiCmd::Rs { model, q } => {
            let spec = model.spec();
            spec.validate()?;
            match q {
                Some(q) => {
                    if !(0.0..=1.0).contains(q) {
                        return Err(Error::OutOfRange { value: *q, lo: 0.0, hi: 1.0 });
                    }
                    Ok(outcome(&json!({ "q": q, "value": rs_value(&spec, *q) })))
                }
                None => {
                    let (q, v) = rs_minimum(&spec);
                    Ok(outcome(&json!({ "q": q, "value": v })))
                }
            }
        }
        ParisiCmd::Dat { model } => Ok(outcome(&dat_condition(&model.spec())?)),
        ParisiCmd::GroundState { beta, r, restarts, spacing } => {
            let spec = ModelSpec::sk(*beta);
            let opts = MinimizeOptions {
                restarts: *restarts,
                grid: Some(ParisiGrid::default_for(&spec).with_spacing(*spacing)),
                ..Default::default()
            };
            let b = ground_state_bracket(&spec, *r, stream, &opts)?;
            Ok(Outcome {
                results: json!({ "lo": b.lo, "hi": b.hi, "r": b.r }),
                diagnostics: json!({ "value_r": b.value_r, "value_next": b.value_next, "gap": b.gap }),
                csv: None,
            })
        }
    }
}

fn sk(cmd: &SkCmd, stream: &RandomStream) -> Result<Outcome, Error> {
    match cmd {
        SkCmd::FreeEnergy { model, size } => Ok(outcome(&free_energy(&model.spec(), size.n, size.m, stream)?)),
        SkCmd::GroundState { size } => {
            Ok(outcome(&ground_state_density(&ModelSpec::sk(1.0), size.n, size.m, stream)?))
        }
        SkCmd::Overlap { model, size, bins, mcmc } => {
            let h = overlap_histogram(&model.spec(), size.n, size.m, *bins, &mcmc.sampler(), stream)?;
            Ok(Outcome {
                results: json!({ "edges": h.edges, "mass": h.mass, "se": h.se }),
                diagnostics: json!({
                    "symmetry_defect": h.symmetry_defect,
                    "symmetry_se": h.symmetry_se,
                    "symmetric": h.symmetric,
                    "disorders": h.disorders,
                }),
                csv: Some(h.to_csv()),
            })
        }
        SkCmd::Gg { model, size, f, replicas, p, gamma, p_max, samples } => {
            let f = TestFunction::parse(f)?;
            let pert = gamma.map(|gamma| PertSpec { gamma, p_max: *p_max, xs: None });
            let e = gg_residual(&model.spec(), size.n, &f, *replicas, *p, size.m, pert.as_ref(), *samples, stream)?;
            Ok(Outcome {
                results: json!({ "delta": e.delta, "se": e.se }),
                diagnostics: json!({ "terms": e.terms, "measures": e.measures }),
                csv: None,
            })
        }
        SkCmd::Ultra { model, size, eps, triples, abs } => {
            let e = ultrametric_violation(&model.spec(), size.n, *eps, size.m, *triples, *abs, stream)?;
            Ok(outcome(&e))
        }
        SkCmd::Cavity { model, size } => {
            let s = cavity_series(&model.spec(), size.n, size.m, stream)?;
            let cesaro: Vec<f64> = (1..=size.n).map(|k| s.cesaro(k)).collect();
            let mut csv = String::from("k,increment,se,cesaro\n");
            for (k, a) in s.increments.iter().enumerate() {
                csv.push_str(&format!("{},{},{},{}\n", k, a.mean, a.se, cesaro[k]));
            }
            Ok(Outcome {
                results: json!({ "increments": s.increments, "cesaro": cesaro }),
                diagnostics: json!({ "log_z": s.log_z }),
                csv: Some(csv),
            })
        }
        SkCmd::Dean { size } => Ok(outcome(&dean_comparison(size.n, size.m, stream)?)),
    }
}

fn rpc(cmd: &RpcCmd, stream: &RandomStream) -> Result<Outcome, Error> {
    match cmd {
        RpcCmd::Build { cascade, top } => {
            let tree = build_cascade(&cascade.params()?, stream)?;
            let mut leaves = tree.mass.last().cloned().unwrap_or_default();
            leaves.sort_by(|a, b| b.total_cmp(a));
            leaves.truncate(*top);
            Ok(Outcome {
                results: json!({
                    "total": tree.total(),
                    "top_leaf_weights": leaves,
                    "nodes_per_level": tree.mass.iter().map(Vec::len).collect::<Vec<_>>(),
                }),
                diagnostics: json!({ "truncation": tree.diagnostic, "dust": tree.dust }),
                csv: None,
            })
        }
        RpcCmd::Sample { cascade, replicas } => {
            let tree = build_cascade(&cascade.params()?, stream)?;
            if *replicas == 0 {
                return Err(Error::InvalidParameter("need at least one replica".into()));
            }
            let ov = sample_leaves(&tree, *replicas, &stream.fork("replicas"));
            let rows: Vec<Vec<f64>> = (0..ov.n()).map(|i| (0..ov.n()).map(|j| ov.get(i, j)).collect()).collect();
            Ok(Outcome {
                results: json!({ "overlaps": rows }),
                diagnostics: json!({
                    "truncation": tree.diagnostic,
                    "ultrametric_violations": ov.ultrametric_violations(),
                }),
                csv: Some(ov.to_csv()),
            })
        }
        RpcCmd::Guerra { cascade, beta, m } => {
            let params = cascade.params()?;
            let e = guerra_rhs_mc(&params, *beta, *m, stream)?;
            let analytic = guerra_analytic(&params, *beta)?;
            Ok(Outcome {
                results: json!({ "estimate": e.estimate, "se": e.se, "analytic": analytic }),
                diagnostics: json!({ "truncation": e.diagnostic, "cascades": e.cascades }),
                csv: None,
            })
        }
        RpcCmd::Gg { cascade, f, replicas, p, m, samples } => {
            let f = TestFunction::parse(f)?;
            let e = gg_residual_rpc(&cascade.params()?, &f, *replicas, *p, *m, *samples, stream)?;
            Ok(Outcome {
                results: json!({ "delta": e.delta, "se": e.se }),
                diagnostics: json!({ "terms": e.terms, "measures": e.measures }),
                csv: None,
            })
        }
        RpcCmd::Invariance { cascade, phi, fs, t, m, tuples } => {
            let phi = TestFunction::parse(phi)?;
            let fs = fs.iter().map(|s| ScalarFn::parse(s)).collect::<Result<Vec<_>, _>>()?;
            let e = invariance_residual(&cascade.params()?, &phi, &fs, *t, *m, *tuples, stream)?;
            Ok(Outcome {
                results: json!({ "lhs": e.lhs, "rhs": e.rhs, "difference": e.difference }),
                diagnostics: json!({ "truncation": e.diagnostic }),
                csv: None,
            })
        }
    }
}

fn cavity(cmd: &CavityCmd, stream: &RandomStream) -> Result<Outcome, Error> {
    match cmd {
        CavityCmd::Solve { kind, d, x_max, spacing, damping } => {
            let base = IntegralEquationSpec::new((*kind).into(), *d);
            let spec = IntegralEquationSpec {
                x_max: x_max.unwrap_or(base.x_max),
                spacing: *spacing,
                damping: *damping,
                ..base
            };
            let g = solve_g(&spec)?;
            let constant = sglab::cavity::constant_of(spec.kind, spec.d, &g.x, &g.g);
            Ok(Outcome {
                results: json!({ "g0": g.at(0.0), "constant": constant, "x": g.x, "g": g.g }),
                diagnostics: json!({
                    "residual": g.residual,
                    "iterations": g.iterations,
                    "tail_mass": g.tail_mass,
                    "x_max": spec.x_max,
                }),
                csv: Some(g.to_csv()),
            })
        }
        CavityCmd::Constant { kind, d } => {
            let c = asymptotic_constant(&IntegralEquationSpec::new((*kind).into(), *d))?;
            Ok(outcome(&json!({ "constant": c })))
        }
        CavityCmd::Empirical { kind, d, ns, m } => {
            let e = empirical_limit((*kind).into(), *d, ns, *m, stream)?;
            let mut csv = String::from("n,mean,se\n");
            for r in &e.rows {
                csv.push_str(&format!("{},{},{}\n", r.n, r.value.mean, r.value.se));
            }
            Ok(Outcome {
                results: json!({ "rows": e.rows, "constant": e.constant }),
                diagnostics: json!({ "trend_ok": e.trend_ok }),
                csv: Some(csv),
            })
        }
        CavityCmd::Exact { kind, n, d } => {
            let inst = RandomInstance::random(*n, *d, stream)?;
            let value = match Kind::from(*kind) {
                Kind::Matching => min_matching_exact(&inst)?,
                Kind::Tsp => tsp_exact(&inst)?,
            };
            Ok(outcome(&json!({ "value": value, "scaled": value / (*n as f64).powf(1.0 - 1.0 / d) })))
        }
    }
}
