//! Expectation over the monthly Gaussian inflation shock on the π grid.

use rayon::prelude::*;

use crate::model::ModelParams;
use crate::pide::{Grid, Lattice};

/// Shock quadrature is truncated at this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 8.0;

/// Sub-steps per standard deviation when the shock is narrower than the
/// grid spacing and nodes must be reached by interpolation.
const FINE_STEPS_PER_SIGMA: f64 = 4.0;

/// Precomputed quadrature for `(Bf)(π_l, r, z) = E f(γ(π_l, r) + ε, r, z)`.
///
/// For each `(row, l)` the operator is a short list of `(node, weight)`
/// pairs with nonnegative weights summing to one. When `v ≥ Δπ` the shock
/// abscissae are `u = π_{l'} − γ`, i.e. the trapezoidal rule on the grid
/// shifted by `γ`, so every evaluation point is a node. For narrower shocks
/// the abscissae are multiples of `v/4` and each point is spread onto its
/// two neighbouring nodes by linear interpolation. Points beyond the grid
/// take the end value.
#[derive(Debug, Clone)]
pub struct GaussianShift {
    rows: usize,
    npi: usize,
    /// Offsets into `weights` per `(row, l)`.
    start: Vec<usize>,
    /// First node of each stencil; the nodes of one stencil are contiguous.
    first: Vec<usize>,
    weights: Vec<f64>,
}

impl GaussianShift {
    pub fn new(mp: &ModelParams, grid: &Grid) -> Self {
        let inf = mp.inflation();
        let v = inf.v;
        let pi = grid.pi();
        let npi = pi.len();
        let rows = grid.rows();
        let mut start = Vec::with_capacity(rows * npi + 1);
        let mut first = Vec::with_capacity(rows * npi);
        let mut weights = Vec::new();
        let mut acc = vec![0.0; npi];
        let mut touched: Vec<usize> = Vec::new();
        let dpi = grid.dpi();
        let resolved = npi > 1 && v >= dpi;
        let half = TRUNCATION_SIGMAS * v;
        for row in 0..rows {
            let r = grid.rate(row);
            for &p in pi {
                start.push(weights.len());
                let g = inf.gamma(p, r);
                let mut add = |node: usize, w: f64| {
                    if acc[node] == 0.0 {
                        touched.push(node);
                    }
                    acc[node] += w;
                };
                if npi == 1 {
                    add(0, 1.0);
                } else if resolved {
                    let kmin = ((g - half - pi[0]) / dpi).ceil() as i64;
                    let kmax = ((g + half - pi[0]) / dpi).floor() as i64;
                    for k in kmin..=kmax {
                        let u = pi[0] + k as f64 * dpi - g;
                        let w = (-0.5 * (u / v) * (u / v)).exp();
                        add(k.clamp(0, npi as i64 - 1) as usize, w);
                    }
                } else {
                    let du = v / FINE_STEPS_PER_SIGMA;
                    let n = (TRUNCATION_SIGMAS * FINE_STEPS_PER_SIGMA) as i64;
                    for k in -n..=n {
                        let u = k as f64 * du;
                        let w = (-0.5 * (u / v) * (u / v)).exp();
                        let x = ((g + u - pi[0]) / dpi).clamp(0.0, (npi - 1) as f64);
                        let i0 = (x.floor() as usize).min(npi - 2);
                        let frac = x - i0 as f64;
                        if frac < 1.0 {
                            add(i0, w * (1.0 - frac));
                        }
                        if frac > 0.0 {
                            add(i0 + 1, w * frac);
                        }
                    }
                }
                touched.sort_unstable();
                let total: f64 = touched.iter().map(|&i| acc[i]).sum();
                let (lo, hi) = (touched[0], touched[touched.len() - 1]);
                first.push(lo);
                for a in &mut acc[lo..=hi] {
                    weights.push(*a / total);
                    *a = 0.0;
                }
                touched.clear();
            }
        }
        start.push(weights.len());
        Self {
            rows,
            npi,
            start,
            first,
            weights,
        }
    }

    /// `(node, weight)` pairs for one `(row, l)`.
    pub fn stencil(&self, row: usize, l: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let k = row * self.npi + l;
        let first = self.first[k];
        self.weights[self.start[k]..self.start[k + 1]]
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(move |(i, &w)| (first + i, w))
    }

    /// `B f`.
    pub fn apply(&self, f: &Lattice) -> Lattice {
        self.apply_scaled(f, &[])
    }

    /// `B(e^{c·π} f)` where `scale[l] = e^{c·π_l}`; an empty `scale` means 1.
    pub fn apply_scaled(&self, f: &Lattice, scale: &[f64]) -> Lattice {
        let (npi, rows, nz) = f.dims();
        assert_eq!(npi, self.npi);
        assert_eq!(rows, self.rows);
        let mut out = f.clone();
        out.time_index = 0;
        let src = f.as_slice();
        let block = nz * npi;
        out.as_mut_slice()
            .par_chunks_mut(block)
            .enumerate()
            .for_each(|(row, dst)| {
                let mut scaled = vec![0.0; npi];
                for j in 0..nz {
                    let s = &src[row * block + j * npi..row * block + (j + 1) * npi];
                    let s: &[f64] = if scale.is_empty() {
                        s
                    } else {
                        for ((o, a), b) in scaled.iter_mut().zip(s).zip(scale) {
                            *o = a * b;
                        }
                        &scaled
                    };
                    let d = &mut dst[j * npi..(j + 1) * npi];
                    for (l, dl) in d.iter_mut().enumerate() {
                        let k = row * npi + l;
                        let w = &self.weights[self.start[k]..self.start[k + 1]];
                        let x = &s[self.first[k]..self.first[k] + w.len()];
                        *dl = centred_dot(w, x);
                    }
                }
            });
        out
    }
}

/// `Σ w_i x_i` for weights summing to one, evaluated as
/// `c + Σ w_i (x_i − c)` with `c` the middle value so that constant data
/// is reproduced bit for bit. Four independent accumulators let the loop
/// vectorize.
fn centred_dot(w: &[f64], x: &[f64]) -> f64 {
    let c = x[x.len() / 2];
    let mut acc = [0.0; 4];
    let (cw, cx) = (w.chunks_exact(4), x.chunks_exact(4));
    let tail: f64 = cw
        .remainder()
        .iter()
        .zip(cx.remainder())
        .map(|(a, b)| a * (b - c))
        .sum();
    for (a, b) in cw.zip(cx) {
        for i in 0..4 {
            acc[i] += a[i] * (b[i] - c);
        }
    }
    c + ((acc[0] + acc[1]) + (acc[2] + acc[3]) + tail)
}

/// One-shot `B f`; see [`GaussianShift`].
pub fn apply_b(f: &Lattice, mp: &ModelParams, grid: &Grid) -> Lattice {
    GaussianShift::new(mp, grid).apply(f)
}
