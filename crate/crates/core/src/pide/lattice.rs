use std::io::Write;

use crate::error::{Error, Result};
use crate::pide::Grid;

/// Solution values over the grid, stored rate-row major with the inflation
/// index innermost: `[row][j][l]`. Rows are the interior rate levels, `j`
/// runs over `0..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    rows: usize,
    nz: usize,
    npi: usize,
    data: Vec<f64>,
    /// Time steps taken since the terminal slice.
    pub time_index: usize,
}

impl Lattice {
    pub fn zeros(grid: &Grid) -> Self {
        Self::filled(grid, 0.0)
    }

    pub fn filled(grid: &Grid, value: f64) -> Self {
        let (rows, nz, npi) = (grid.rows(), grid.n_z() + 1, grid.n_pi());
        Self {
            rows,
            nz,
            npi,
            data: vec![value; rows * nz * npi],
            time_index: 0,
        }
    }

    /// Samples `f(π, r, z)` at every node.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let mut lat = Self::zeros(grid);
        for row in 0..lat.rows {
            let r = grid.rate(row);
            for j in 0..lat.nz {
                let z = grid.z(j);
                for (l, &pi) in grid.pi().iter().enumerate() {
                    let idx = lat.index(l, row, j);
                    lat.data[idx] = f(pi, r, z);
                }
            }
        }
        lat
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.npi, self.rows, self.nz)
    }

    #[inline]
    fn index(&self, l: usize, row: usize, j: usize) -> usize {
        (row * self.nz + j) * self.npi + l
    }

    #[inline]
    pub fn get(&self, l: usize, row: usize, j: usize) -> f64 {
        self.data[self.index(l, row, j)]
    }

    #[inline]
    pub fn set(&mut self, l: usize, row: usize, j: usize, value: f64) {
        let idx = self.index(l, row, j);
        self.data[idx] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values along z for one `(l, row)`.
    pub fn z_profile(&self, l: usize, row: usize) -> Vec<f64> {
        (0..self.nz).map(|j| self.get(l, row, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.rows == grid.rows() && self.nz == grid.n_z() + 1 && self.npi == grid.n_pi()
    }

    /// Imposes `ψ_J = ψ_{J−1}` on every `(l, row)`.
    pub fn apply_neumann(&mut self) {
        let (npi, nz) = (self.npi, self.nz);
        for row in 0..self.rows {
            let base = row * nz * npi;
            let (head, tail) = self.data[base..base + nz * npi].split_at_mut((nz - 1) * npi);
            tail.copy_from_slice(&head[(nz - 2) * npi..]);
        }
    }

    pub fn max_abs_diff(&self, other: &Lattice) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// CSV snapshot with columns `pi,r,z,psi`.
    pub fn write_csv<W: Write>(&self, grid: &Grid, out: W) -> Result<()> {
        if !self.matches(grid) {
            return Err(Error::Grid("lattice does not match grid".into()));
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pi", "r", "z", "psi"])?;
        for (l, &pi) in grid.pi().iter().enumerate() {
            for row in 0..self.rows {
                for j in 0..self.nz {
                    w.write_record(&[
                        pi.to_string(),
                        grid.rate(row).to_string(),
                        grid.z(j).to_string(),
                        self.get(l, row, j).to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}
