//! Nelder–Mead simplex search with jittered restarts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmOptions {
    /// Stop when `f_max − f_min ≤ rel_tol·|f_min| + abs_tol` on the simplex.
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Iterations per restart.
    pub max_iter: usize,
    /// Total simplex searches, the first from the supplied start.
    pub restarts: usize,
    /// Restart simplices are centred on the incumbent shifted by
    /// `jitter · step_i · N(0, 1)` per coordinate.
    pub jitter: f64,
    pub seed: u64,
    /// Stop everything once the objective reaches this value.
    pub target: Option<f64>,
    /// Cap on objective evaluations over all restarts.
    pub max_evals: Option<usize>,
}

impl Default for NmOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-14,
            max_iter: 2000,
            restarts: 5,
            jitter: 0.5,
            seed: 0,
            target: None,
            max_evals: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NmOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// The tolerance test (or the target) was met in the last search.
    pub converged: bool,
    pub restarts_used: usize,
}

struct Budget<'a, F> {
    f: &'a mut F,
    evals: usize,
    cap: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.cap
    }
}

fn search<F: FnMut(&[f64]) -> f64>(
    b: &mut Budget<'_, F>,
    x0: &[f64],
    steps: &[f64],
    opts: &NmOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += steps[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| b.eval(p)).collect();
    let reached = |v: f64| opts.target.is_some_and(|t| v <= t);
    let mut iter = 0;
    let mut converged = false;
    while iter < opts.max_iter && !b.exhausted() {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let (best, worst) = (vals[0], vals[n]);
        if reached(best) || (worst - best) <= opts.rel_tol * best.abs() + opts.abs_tol {
            converged = true;
            break;
        }
        iter += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = b.eval(&xr);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = b.eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = along(0.5);
            let fc = b.eval(&xc);
            (xc, if fc <= fr { fc } else { f64::INFINITY })
        } else {
            let xc = along(-0.5);
            let fc = b.eval(&xc);
            (xc, if fc < vals[n] { fc } else { f64::INFINITY })
        };
        if fc.is_finite() {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            let p: Vec<f64> = pts[0]
                .iter()
                .zip(&pts[i])
                .map(|(a, x)| a + 0.5 * (x - a))
                .collect();
            vals[i] = b.eval(&p);
            pts[i] = p;
            if b.exhausted() {
                break;
            }
        }
    }
    let k = (0..=n)
        .min_by(|&i, &j| vals[i].total_cmp(&vals[j]))
        .unwrap_or(0);
    (pts[k].clone(), vals[k], iter, converged)
}

/// Minimizes `f` from `x0` with initial simplex edges `steps`.
/// Deterministic for a fixed `opts.seed`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    steps: &[f64],
    opts: &NmOptions,
) -> NmOutcome {
    assert_eq!(x0.len(), steps.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut b = Budget {
        f: &mut f,
        evals: 0,
        cap: opts.max_evals.unwrap_or(usize::MAX),
    };
    let mut best_x = x0.to_vec();
    let mut best_f = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut used = 0;
    for r in 0..opts.restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            x0.to_vec()
        } else {
            best_x
                .iter()
                .zip(steps)
                .map(|(x, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x + opts.jitter * s * z
                })
                .collect()
        };
        let (x, fx, it, conv) = search(&mut b, &start, steps, opts);
        used += 1;
        iterations += it;
        converged = conv;
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
        if opts.target.is_some_and(|t| best_f <= t) || b.exhausted() {
            break;
        }
    }
    NmOutcome {
        x: best_x,
        f: best_f,
        iterations,
        evaluations: b.evals,
        converged,
        restarts_used: used,
    }
}
