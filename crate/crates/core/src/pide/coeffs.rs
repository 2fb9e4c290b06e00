//! Crank–Nicolson coefficients in z and the per-row linear system.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::pide::{Grid, Lattice};

/// Stencil coefficients of one rate row for a given time step.
///
/// Index `j` runs over `0..J`; entry 0 of `xi` holds the boundary value
/// `ξ_{h,0} = ¾ k b(r_h) Δτ/Δz`, and `eta`, `theta`, `w` are meaningful for
/// `j ≥ 1` only.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCoeffs {
    pub nu: Vec<f64>,
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
}

/// Assembles the stencil for rate row `row` (0-based, rate `r_{row+1}`)
/// and checks strict diagonal dominance of the resulting matrix.
pub fn assemble_coeffs(mp: &ModelParams, grid: &Grid, row: usize, dtau: f64) -> Result<StepCoeffs> {
    if row >= grid.rows() {
        return Err(Error::Grid(format!(
            "rate row {row} out of range 0..{}",
            grid.rows()
        )));
    }
    let sr = mp.short();
    let r = grid.rate(row);
    let b = sr.drift_b(r);
    let dz = grid.dz();
    let nj = grid.n_z();
    let mut c = StepCoeffs {
        nu: vec![0.0; nj],
        xi: vec![0.0; nj],
        eta: vec![0.0; nj],
        theta: vec![0.0; nj],
        w: vec![0.0; nj],
    };
    for j in 0..nj {
        let z = grid.z(j);
        let nu = 0.25 * sr.k_sh * (b - z) * dtau / dz;
        c.nu[j] = nu;
        if j == 0 {
            c.xi[0] = 0.75 * sr.k_sh * b * dtau / dz;
            continue;
        }
        let spread = r - z;
        let xi = 0.25 * z * sr.sigma_sq_unchecked(spread * spread) * dtau / (dz * dz);
        c.xi[j] = xi;
        c.eta[j] = xi + nu;
        c.theta[j] = nu - xi;
        c.w[j] = 2.0 * xi + 0.5 * dtau * z + 1.0;
    }
    check_dominance(&c, row)?;
    Ok(c)
}

fn check_dominance(c: &StepCoeffs, row: usize) -> Result<()> {
    let nu0 = c.nu[0];
    if !(1.0 + c.xi[0] > 5.0 * nu0.abs()) {
        return Err(Error::Numerical(format!(
            "row {row}: boundary row not diagonally dominant (nu0 = {nu0}); refine the time step"
        )));
    }
    for j in 1..c.w.len() {
        if !(c.w[j] > c.theta[j].abs() + c.eta[j].abs()) {
            return Err(Error::Numerical(format!(
                "row {row}, j = {j}: w = {} <= |theta| + |eta| = {}; refine the time step",
                c.w[j],
                c.theta[j].abs() + c.eta[j].abs()
            )));
        }
    }
    Ok(())
}

/// The `J × J` matrix `A_h`: tridiagonal except for one entry at `(0, 2)`
/// coming from the one-sided derivative at `z = 0`; the Neumann condition
/// is folded into the last diagonal entry.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    /// Entry `(0, 2)`.
    pub corner: f64,
}

pub fn build_matrix(c: &StepCoeffs) -> BandedMatrix {
    let n = c.nu.len();
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    diag[0] = 1.0 + c.xi[0];
    upper[0] = -4.0 * c.nu[0];
    for j in 1..n {
        lower[j] = c.theta[j];
        diag[j] = c.w[j];
        upper[j] = -c.eta[j];
    }
    diag[n - 1] = c.w[n - 1] - c.eta[n - 1];
    upper[n - 1] = 0.0;
    BandedMatrix {
        lower,
        diag,
        upper,
        corner: c.nu[0],
    }
}

impl BandedMatrix {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for j in 0..n {
            a[j][j] = self.diag[j];
            if j > 0 {
                a[j][j - 1] = self.lower[j];
            }
            if j + 1 < n {
                a[j][j + 1] = self.upper[j];
            }
        }
        a[0][2] = self.corner;
        a
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let mut s = self.diag[j] * x[j];
                if j > 0 {
                    s += self.lower[j] * x[j - 1];
                }
                if j + 1 < n {
                    s += self.upper[j] * x[j + 1];
                }
                if j == 0 {
                    s += self.corner * x[2];
                }
                s
            })
            .collect()
    }

    /// Row-wise strict diagonal dominance.
    pub fn is_diagonally_dominant(&self) -> bool {
        let n = self.len();
        (0..n).all(|j| {
            let mut off = 0.0;
            if j > 0 {
                off += self.lower[j].abs();
            }
            if j + 1 < n {
                off += self.upper[j].abs();
            }
            if j == 0 {
                off += self.corner.abs();
            }
            self.diag[j].abs() > off
        })
    }

    /// LU factors without pivoting. Row 1 absorbs the fill-in produced by
    /// eliminating column 0, after which the sweep is an ordinary Thomas
    /// recursion.
    pub fn factorize(&self) -> Result<Factorized> {
        let n = self.len();
        let mut mult = vec![0.0; n];
        let mut inv_d = vec![0.0; n];
        let mut up = self.upper.clone();
        let mut d = self.diag[0];
        if d == 0.0 || !d.is_finite() {
            return Err(Error::Numerical("singular banded matrix at row 0".into()));
        }
        inv_d[0] = 1.0 / d;
        for j in 1..n {
            let l = self.lower[j] / d;
            mult[j] = l;
            d = self.diag[j] - l * up[j - 1];
            if j == 1 {
                up[1] = self.upper[1] - l * self.corner;
            }
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Numerical(format!("singular banded matrix at row {j}")));
            }
            inv_d[j] = 1.0 / d;
        }
        Ok(Factorized {
            mult,
            inv_d,
            up,
            corner: self.corner,
        })
    }
}

/// Factors of a [`BandedMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Factorized {
    mult: Vec<f64>,
    inv_d: Vec<f64>,
    up: Vec<f64>,
    corner: f64,
}

impl Factorized {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_lanes(&mut x, 1);
        x
    }

    /// Solves in place for `lanes` right-hand sides interleaved as
    /// `x[j * lanes + lane]`.
    pub fn solve_lanes(&self, x: &mut [f64], lanes: usize) {
        let n = self.inv_d.len();
        debug_assert_eq!(x.len(), n * lanes);
        for j in 1..n {
            self.forward_lanes(x, j, lanes);
        }
        self.back_substitute_lanes(x, lanes);
    }

    /// Forward elimination of row `j ≥ 1`, given that rows `< j` are done.
    #[inline]
    pub(crate) fn forward_lanes(&self, x: &mut [f64], j: usize, lanes: usize) {
        let l = self.mult[j];
        let (prev, cur) = x[(j - 1) * lanes..(j + 1) * lanes].split_at_mut(lanes);
        for (c, p) in cur.iter_mut().zip(prev.iter()) {
            *c -= l * *p;
        }
    }

    /// Backward pass after all rows have been eliminated.
    pub(crate) fn back_substitute_lanes(&self, x: &mut [f64], lanes: usize) {
        let n = self.inv_d.len();
        {
            let inv = self.inv_d[n - 1];
            for v in &mut x[(n - 1) * lanes..n * lanes] {
                *v *= inv;
            }
        }
        for j in (1..n - 1).rev() {
            let (u, inv) = (self.up[j], self.inv_d[j]);
            let (cur, next) = x[j * lanes..(j + 2) * lanes].split_at_mut(lanes);
            for (c, nx) in cur.iter_mut().zip(next.iter()) {
                *c = (*c - u * *nx) * inv;
            }
        }
        let (u0, e0, inv0) = (self.up[0], self.corner, self.inv_d[0]);
        let (first, rest) = x.split_at_mut(lanes);
        let (x1, rest) = rest.split_at(lanes);
        let x2 = &rest[..lanes];
        for ((c, a), b) in first.iter_mut().zip(x1).zip(x2) {
            *c = (*c - u0 * *a - e0 * *b) * inv0;
        }
    }
}

/// Right-hand side `K_h^n` for one `(l, row)`: explicit half of the
/// Crank–Nicolson stencil plus the explicit jump term, with the jump index
/// range truncated so that `h + k` stays among the interior rows.
pub fn rhs_q(
    lat: &Lattice,
    l: usize,
    row: usize,
    coeffs: &StepCoeffs,
    mp: &ModelParams,
    grid: &Grid,
    dtau: f64,
) -> Result<Vec<f64>> {
    let nj = grid.n_z();
    let psi = |h: usize, j: usize| lat.get(l, h, j);
    let ecb = mp.ecb();
    let m = ecb.m() as i64;
    let q = ecb.q_probs(grid.pi()[l], grid.rate(row))?;
    let rows = grid.rows() as i64;
    let kmin = -m.min(row as i64);
    let kmax = m.min(rows - 1 - row as i64);
    let jump = |j: usize| -> f64 {
        let centre = psi(row, j);
        (kmin..=kmax)
            .filter(|&k| k != 0)
            .map(|k| (psi((row as i64 + k) as usize, j) - centre) * q[(k + m) as usize])
            .sum::<f64>()
            * dtau
            * ecb.lambda_bar
    };
    let mut out = vec![0.0; nj];
    let nu0 = coeffs.nu[0];
    out[0] = psi(row, 0) + nu0 * (-psi(row, 2) + 4.0 * psi(row, 1) - 3.0 * psi(row, 0)) + jump(0);
    for j in 1..nj {
        let (nu, xi) = (coeffs.nu[j], coeffs.xi[j]);
        let (pm, p0, pp) = (psi(row, j - 1), psi(row, j), psi(row, j + 1));
        out[j] = p0 + nu * (pp - pm) + xi * (pp - 2.0 * p0 + pm) + jump(j)
            - 0.5 * grid.z(j) * dtau * p0;
    }
    Ok(out)
}
