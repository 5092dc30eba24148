//! Nelder-Mead simplex search.

#[derive(Clone, Debug)]
pub struct NmOptions {
    pub ftol: f64,
    pub max_evals: usize,
    pub step: f64,
    /// Rebuild the simplex around the best point until a pass gains less
    /// than `ftol`.
    pub max_rebuilds: usize,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self { ftol: 1e-9, max_evals: 20_000, step: 0.3, max_rebuilds: 6 }
    }
}

#[derive(Clone, Debug)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
}

pub fn minimize(f: &mut dyn FnMut(&[f64]) -> f64, x0: &[f64], opts: &NmOptions) -> NmResult {
    let mut evals = 0;
    let mut best_x = x0.to_vec();
    let mut best_f = f(x0);
    evals += 1;
    if x0.is_empty() {
        return NmResult { x: best_x, f: best_f, evals };
    }
    for _ in 0..=opts.max_rebuilds {
        let before = best_f;
        let (x, fx, used) = simplex_pass(f, &best_x, best_f, opts, opts.max_evals.saturating_sub(evals));
        evals += used;
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
        if before - best_f < opts.ftol || evals >= opts.max_evals {
            break;
        }
    }
    NmResult { x: best_x, f: best_f, evals }
}

fn simplex_pass(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x0: &[f64],
    f0: f64,
    opts: &NmOptions,
    budget: usize,
) -> (Vec<f64>, f64, usize) {
    let n = x0.len();
    let mut evals = 0;
    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    let mut vals = vec![f0];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += opts.step;
        vals.push(f(&p));
        evals += 1;
        pts.push(p);
    }
    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while evals < budget {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if vals[n] - vals[0] <= opts.ftol {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&pts[n]).map(|(c, w)| c + t * (c - w)).collect()
        };
        let xr = along(alpha);
        let fr = f(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(gamma);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let xc = along(rho);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = along(-rho);
                let fc = f(&xc);
                (xc, fc)
            };
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> =
                        pts[0].iter().zip(&pts[i]).map(|(b, x)| b + sigma * (x - b)).collect();
                    vals[i] = f(&p);
                    pts[i] = p;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best].clone(), vals[best], evals)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let mut f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(&mut f, &[-1.2, 1.0], &NmOptions { ftol: 1e-14, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn never_worse_than_start() {
        let mut f = |x: &[f64]| x.iter().map(|v| v.sin()).sum::<f64>();
        let x0 = [0.3, -0.2, 1.0];
        let f0 = f(&x0);
        let r = minimize(&mut f, &x0, &NmOptions::default());
        assert!(r.f <= f0);
    }
}
