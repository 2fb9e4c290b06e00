//! Finite-difference solver for the valuation PIDE on one observation
//! interval, for every inflation node at once.
//!
//! In `τ = t1 − t` the equation for fixed `π` reads
//!
//! ```text
//! ψ_τ = k(b(r) − z) ψ_z + ½ σ̄²(|r − z|²) z ψ_zz
//!       + λ̄ Σ_k [ψ(r + kδ) − ψ(r)] q(π, r, kδ) − z ψ
//! ```
//!
//! Diffusion, drift and discounting are Crank–Nicolson in z; at `z = 0`
//! the equation is hyperbolic and uses a one-sided second-order difference;
//! at `z_max` a Neumann condition `ψ_J = ψ_{J−1}` holds. The jump term is
//! explicit, so rate rows decouple within a step and each row is one banded
//! solve shared by all inflation nodes.

mod coeffs;
mod gauss;
mod grid;
mod lattice;

pub use coeffs::{assemble_coeffs, build_matrix, rhs_q, BandedMatrix, Factorized, StepCoeffs};
pub use gauss::{apply_b, GaussianShift, TRUNCATION_SIGMAS};
pub use grid::{rate_levels, Grid, GridSpec};
pub use lattice::Lattice;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::ModelParams;

struct RowOperator {
    /// Explicit stencil `(c_{j−1}, c_j, c_{j+1})` for `j ≥ 1`.
    down: Vec<f64>,
    mid: Vec<f64>,
    up: Vec<f64>,
    /// Explicit boundary stencil on `(ψ_0, ψ_1, ψ_2)`.
    boundary: [f64; 3],
    factors: Factorized,
    /// `(row offset, Δτ λ̄ q(π_l, r, kδ) per l)`.
    jumps: Vec<(isize, Vec<f64>)>,
}

/// Time stepper for a fixed `Δτ`: coefficients, factorizations and jump
/// weights are built once and reused for every step.
pub struct IntervalSolver {
    dtau: f64,
    npi: usize,
    nz: usize,
    rows: Vec<RowOperator>,
}

impl IntervalSolver {
    pub fn new(mp: &ModelParams, grid: &Grid, dtau: f64) -> Result<Self> {
        if !(dtau >= 0.0 && dtau.is_finite()) {
            return Err(Error::Grid(format!("invalid time step {dtau}")));
        }
        let ecb = mp.ecb();
        let m = ecb.m();
        let nrows = grid.rows();
        let npi = grid.n_pi();
        let nj = grid.n_z();
        let mut q = vec![0.0; 2 * m + 1];
        let mut rows = Vec::with_capacity(nrows);
        for row in 0..nrows {
            let c = assemble_coeffs(mp, grid, row, dtau)?;
            let factors = build_matrix(&c).factorize()?;
            let mut down = vec![0.0; nj];
            let mut mid = vec![0.0; nj];
            let mut up = vec![0.0; nj];
            for j in 1..nj {
                down[j] = c.xi[j] - c.nu[j];
                mid[j] = 1.0 - 2.0 * c.xi[j] - 0.5 * grid.z(j) * dtau;
                up[j] = c.xi[j] + c.nu[j];
            }
            let nu0 = c.nu[0];
            let boundary = [1.0 - 3.0 * nu0, 4.0 * nu0, -nu0];

            let mut jumps = Vec::new();
            if ecb.lambda_bar > 0.0 && dtau > 0.0 {
                let r = grid.rate(row);
                let kmin = -(m.min(row) as isize);
                let kmax = m.min(nrows - 1 - row) as isize;
                let mut per_k: Vec<(isize, Vec<f64>)> = (kmin..=kmax)
                    .filter(|&k| k != 0)
                    .map(|k| (k, vec![0.0; npi]))
                    .collect();
                for (l, &pi) in grid.pi().iter().enumerate() {
                    ecb.q_probs_into(pi, r, &mut q)?;
                    for (k, w) in per_k.iter_mut() {
                        w[l] = dtau * ecb.lambda_bar * q[(*k + m as isize) as usize];
                    }
                }
                per_k.retain(|(_, w)| w.iter().any(|&x| x != 0.0));
                jumps = per_k;
            }
            rows.push(RowOperator {
                down,
                mid,
                up,
                boundary,
                factors,
                jumps,
            });
        }
        Ok(Self {
            dtau,
            npi,
            nz: nj + 1,
            rows,
        })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    /// One step `ψ^n → ψ^{n+1}`.
    pub fn step(&self, src: &Lattice, dst: &mut Lattice) {
        let (npi, nz) = (self.npi, self.nz);
        let block = nz * npi;
        let s = src.as_slice();
        dst.as_mut_slice()
            .par_chunks_mut(block)
            .enumerate()
            .for_each(|(row, out)| self.step_row(s, row, out));
        dst.time_index = src.time_index + 1;
    }

    fn step_row(&self, src: &[f64], row: usize, out: &mut [f64]) {
        let (npi, nz) = (self.npi, self.nz);
        let nj = nz - 1;
        let block = nz * npi;
        let op = &self.rows[row];
        let own = &src[row * block..(row + 1) * block];
        let at = |j: usize| &own[j * npi..(j + 1) * npi];
        let neighbours: Vec<(&[f64], &[f64])> = op
            .jumps
            .iter()
            .map(|(k, w)| {
                let r = (row as isize + k) as usize;
                (&src[r * block..(r + 1) * block], w.as_slice())
            })
            .collect();

        // explicit half-step and jump term, eliminating each z row as soon
        // as it is assembled so the lattice is traversed only twice
        for j in 0..nj {
            let o = &mut out[j * npi..(j + 1) * npi];
            let p0 = at(j);
            if j == 0 {
                let [a, b, c] = op.boundary;
                for (((o, x0), x1), x2) in o.iter_mut().zip(p0).zip(at(1)).zip(at(2)) {
                    *o = a * x0 + b * x1 + c * x2;
                }
            } else {
                let (dn, md, up) = (op.down[j], op.mid[j], op.up[j]);
                for (((o, xm), x0), xp) in o.iter_mut().zip(at(j - 1)).zip(p0).zip(at(j + 1)) {
                    *o = dn * xm + md * x0 + up * xp;
                }
            }
            for (other, w) in &neighbours {
                let ph = &other[j * npi..(j + 1) * npi];
                for (((o, w), xh), x0) in o.iter_mut().zip(*w).zip(ph).zip(p0) {
                    *o += w * (xh - x0);
                }
            }
            if j > 0 {
                op.factors.forward_lanes(out, j, npi);
            }
        }
        op.factors.back_substitute_lanes(&mut out[..nj * npi], npi);
        let (head, tail) = out.split_at_mut(nj * npi);
        tail.copy_from_slice(&head[(nj - 1) * npi..]);
    }

    /// Applies `steps` time steps to `lat`.
    pub fn advance(&self, lat: Lattice, steps: usize) -> Lattice {
        let mut cur = lat;
        if steps == 0 {
            return cur;
        }
        cur.apply_neumann();
        let mut next = cur.clone();
        for _ in 0..steps {
            self.step(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }
}

/// Number of steps and step size for an interval of `length` years.
pub fn steps_for(grid: &Grid, length: f64) -> (usize, f64) {
    if length <= 0.0 {
        return (0, 0.0);
    }
    let n = ((grid.n_steps() as f64 * length / grid.t1()) - 1e-9).ceil().max(1.0) as usize;
    (n, length / n as f64)
}

/// One time step of size `grid.dtau()`.
pub fn time_step(lat: &Lattice, mp: &ModelParams, grid: &Grid) -> Result<Lattice> {
    check_lattice(lat, grid)?;
    let solver = IntervalSolver::new(mp, grid, grid.dtau())?;
    let mut src = lat.clone();
    src.apply_neumann();
    let mut out = src.clone();
    solver.step(&src, &mut out);
    Ok(out)
}

/// Solves one full observation interval backwards from `terminal`.
pub fn solve_interval(terminal: &Lattice, mp: &ModelParams, grid: &Grid) -> Result<Lattice> {
    solve_duration(terminal, mp, grid, grid.t1())
}

/// Solves over `length ≤ t1` years with steps no larger than `grid.dtau()`.
pub fn solve_duration(
    terminal: &Lattice,
    mp: &ModelParams,
    grid: &Grid,
    length: f64,
) -> Result<Lattice> {
    check_lattice(terminal, grid)?;
    let (n, dtau) = steps_for(grid, length);
    if n == 0 {
        return Ok(terminal.clone());
    }
    let solver = IntervalSolver::new(mp, grid, dtau)?;
    Ok(solver.advance(terminal.clone(), n))
}

fn check_lattice(lat: &Lattice, grid: &Grid) -> Result<()> {
    if !lat.matches(grid) {
        return Err(Error::Grid("lattice does not match grid".into()));
    }
    if !lat.is_finite() {
        return Err(Error::Numerical("non-finite lattice values".into()));
    }
    Ok(())
}
