//! Claims of the form `Y(T)^p Φ(Π(T), R(T), R^sh(T))` priced by the monthly
//! recursion: a PIDE solve on every observation interval, linked by the
//! Gaussian shock operator `B` at each observation date.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{ModelParams, State};
use crate::pide::{steps_for, GaussianShift, Grid, IntervalSolver, Lattice};

/// Terminal payoff `Φ(π, r, z)`.
pub type Payoff = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Observation dates closer than this to the maturity are treated as equal.
const TIME_TOL: f64 = 1e-9;

#[derive(Clone)]
pub struct ClaimSpec {
    /// Exponent on the inflation index.
    pub p: f64,
    pub maturity: f64,
    phi: Payoff,
    /// Declared growth bound `|Φ| ≤ c0 e^{c1|π|}(1 + z)`.
    pub c0: f64,
    pub c1: f64,
}

impl fmt::Debug for ClaimSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClaimSpec")
            .field("p", &self.p)
            .field("maturity", &self.maturity)
            .field("c0", &self.c0)
            .field("c1", &self.c1)
            .finish_non_exhaustive()
    }
}

impl ClaimSpec {
    pub fn new(p: f64, maturity: f64, phi: Payoff, c0: f64, c1: f64) -> Result<Self> {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::Claim(format!("index exponent p = {p} must be >= 0")));
        }
        if !(maturity >= 0.0 && maturity.is_finite()) {
            return Err(Error::Claim(format!("maturity {maturity} must be >= 0")));
        }
        if !(c0 >= 0.0 && c1 >= 0.0 && c0.is_finite() && c1.is_finite()) {
            return Err(Error::Claim("growth constants must be finite and >= 0".into()));
        }
        Ok(Self {
            p,
            maturity,
            phi,
            c0,
            c1,
        })
    }

    /// Pays `Y(T)^p` at `maturity`: the nominal (`p = 0`) or real (`p = 1`)
    /// zero-coupon bond.
    pub fn unit(p: f64, maturity: f64) -> Result<Self> {
        Self::new(p, maturity, Arc::new(|_, _, _| 1.0), 1.0, 0.0)
    }

    pub fn payoff(&self, pi: f64, r: f64, z: f64) -> f64 {
        (self.phi)(pi, r, z)
    }

    /// Checks the declared growth bound on every grid node.
    pub fn check_growth(&self, grid: &Grid) -> Result<()> {
        for &pi in grid.pi() {
            let cap = self.c0 * (self.c1 * pi.abs()).exp();
            for row in 0..grid.rows() {
                let r = grid.rate(row);
                for j in 0..=grid.n_z() {
                    let z = grid.z(j);
                    let v = self.payoff(pi, r, z);
                    if !v.is_finite() || v.abs() > cap * (1.0 + z) * (1.0 + 1e-12) {
                        return Err(Error::Claim(format!(
                            "payoff {v} at (π={pi}, r={r}, z={z}) breaks the growth bound"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Claim values at the valuation time over the whole grid.
///
/// The lattice holds the recursion values `φ`; the factor
/// `e^{p·readout·π}` for the remaining known inflation accrual is applied
/// when values are read.
#[derive(Debug, Clone)]
pub struct PriceSurface {
    grid: Grid,
    values: Lattice,
    p: f64,
    readout: f64,
    pub maturity: f64,
    pub offset: f64,
}

impl PriceSurface {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn lattice(&self) -> &Lattice {
        &self.values
    }

    /// Price at node `(l, row, j)`.
    pub fn node(&self, l: usize, row: usize, j: usize) -> f64 {
        (self.p * self.readout * self.grid.pi()[l]).exp() * self.values.get(l, row, j)
    }

    /// Price surface sampled on every node, in lattice layout.
    pub fn prices(&self) -> Lattice {
        let mut out = self.values.clone();
        let (npi, rows, nz) = out.dims();
        for row in 0..rows {
            for j in 0..nz {
                for l in 0..npi {
                    out.set(l, row, j, self.node(l, row, j));
                }
            }
        }
        out
    }

    /// Price at an arbitrary state: linear in `π` and `z`, with `r` snapped
    /// to the rate lattice.
    pub fn value_at(&self, s: State) -> Result<f64> {
        let g = &self.grid;
        let row = g.rate_row(s.r)?;
        if !(s.z >= 0.0 && s.z <= g.z_max()) {
            return Err(Error::Domain {
                what: "z",
                value: s.z,
                domain: format!("[0, {}]", g.z_max()),
            });
        }
        let (l0, wl) = locate(g.pi(), s.pi)?;
        let x = s.z / g.dz();
        let j0 = (x.floor() as usize).min(g.n_z() - 1);
        let wz = x - j0 as f64;
        let at = |l: usize, j: usize| self.values.get(l, row, j);
        let interp = |l: usize| (1.0 - wz) * at(l, j0) + wz * at(l, j0 + 1);
        let v = if wl == 0.0 {
            interp(l0)
        } else {
            (1.0 - wl) * interp(l0) + wl * interp(l0 + 1)
        };
        Ok((self.p * self.readout * s.pi).exp() * v)
    }

    /// CSV export with columns `pi,r,z,psi`, where `psi` is the price.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.prices().write_csv(&self.grid, out)
    }
}

fn locate(nodes: &[f64], x: f64) -> Result<(usize, f64)> {
    let n = nodes.len();
    let tol = 1e-12 * (1.0 + x.abs());
    if n == 1 {
        if (x - nodes[0]).abs() <= tol {
            return Ok((0, 0.0));
        }
    } else if x >= nodes[0] - tol && x <= nodes[n - 1] + tol {
        let d = nodes[1] - nodes[0];
        let t = ((x - nodes[0]) / d).clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        return Ok((i, t - i as f64));
    }
    Err(Error::Domain {
        what: "pi",
        value: x,
        domain: format!("inflation grid [{}, {}]", nodes[0], nodes[n - 1]),
    })
}

/// Splits `T` into `M` whole observation periods and a residual `ρ`.
fn split_maturity(t: f64, t1: f64) -> (usize, f64) {
    let m = (t / t1 + TIME_TOL).floor().max(0.0);
    let rho = (t - m * t1).max(0.0);
    let rho = if rho < TIME_TOL * t1 { 0.0 } else { rho };
    (m as usize, rho)
}

/// Shared machinery for one grid: solvers for recurring step sizes and the
/// shock operator are built once.
struct Recursion<'a> {
    mp: &'a ModelParams,
    grid: &'a Grid,
    full: IntervalSolver,
    full_steps: usize,
    shift: GaussianShift,
}

impl<'a> Recursion<'a> {
    fn new(mp: &'a ModelParams, grid: &'a Grid) -> Result<Self> {
        let (full_steps, dtau) = steps_for(grid, grid.t1());
        Ok(Self {
            mp,
            grid,
            full: IntervalSolver::new(mp, grid, dtau)?,
            full_steps,
            shift: GaussianShift::new(mp, grid),
        })
    }

    fn solve(&self, lat: Lattice, length: f64) -> Result<Lattice> {
        if (length - self.grid.t1()).abs() <= TIME_TOL * self.grid.t1() {
            return Ok(self.full.advance(lat, self.full_steps));
        }
        let (n, dtau) = steps_for(self.grid, length);
        if n == 0 {
            return Ok(lat);
        }
        Ok(IntervalSolver::new(self.mp, self.grid, dtau)?.advance(lat, n))
    }

    /// `B(e^{p·accrual·π} f)`.
    fn link(&self, f: &Lattice, p: f64, accrual: f64) -> Lattice {
        if p * accrual == 0.0 {
            return self.shift.apply(f);
        }
        let scale: Vec<f64> = self
            .grid
            .pi()
            .iter()
            .map(|&pi| (p * accrual * pi).exp())
            .collect();
        self.shift.apply_scaled(f, &scale)
    }
}

fn check_offset(offset: f64, t1: f64) -> Result<()> {
    if !(offset >= 0.0 && offset < t1) {
        return Err(Error::Claim(format!(
            "valuation offset {offset} must lie in [0, {t1})"
        )));
    }
    Ok(())
}

/// Prices `claim` at time `offset ∈ [0, t1)` after the last observation
/// date, over every node of `grid`.
pub fn price_claim(
    claim: &ClaimSpec,
    mp: &ModelParams,
    grid: &Grid,
    offset: f64,
) -> Result<PriceSurface> {
    let t1 = mp.t1();
    check_offset(offset, t1)?;
    if (grid.t1() - t1).abs() > 1e-15 {
        return Err(Error::Grid("grid and model disagree on t1".into()));
    }
    claim.check_growth(grid)?;
    let (m, rho) = split_maturity(claim.maturity, t1);
    if m == 0 && claim.maturity + TIME_TOL < offset {
        return Err(Error::Claim(format!(
            "maturity {} precedes the valuation offset {offset}",
            claim.maturity
        )));
    }
    let rec = Recursion::new(mp, grid)?;
    let terminal = Lattice::from_fn(grid, |pi, r, z| claim.payoff(pi, r, z));
    let p = claim.p;

    let (values, readout) = if m == 0 {
        let len = (claim.maturity - offset).max(0.0);
        (rec.solve(terminal, len)?, len)
    } else {
        let mut g = rec.solve(terminal, rho)?;
        for i in (0..m).rev() {
            let accrual = if i == m - 1 { rho } else { t1 };
            let h = rec.link(&g, p, accrual);
            let len = if i == 0 { t1 - offset } else { t1 };
            g = rec.solve(h, len)?;
        }
        (g, t1 - offset)
    };
    if !values.is_finite() {
        return Err(Error::Numerical("non-finite claim values".into()));
    }
    Ok(PriceSurface {
        grid: grid.clone(),
        values,
        p,
        readout,
        maturity: claim.maturity,
        offset,
    })
}

/// Nominal zero-coupon bond maturing `maturity` years after the last
/// observation date, valued `offset` years after it.
pub fn nominal_bond(
    mp: &ModelParams,
    grid: &Grid,
    offset: f64,
    maturity: f64,
) -> Result<PriceSurface> {
    price_claim(&ClaimSpec::unit(0.0, maturity)?, mp, grid, offset)
}

/// Real zero-coupon bond, paying `Y(T)/Y(valuation)`.
pub fn real_bond(mp: &ModelParams, grid: &Grid, offset: f64, maturity: f64) -> Result<PriceSurface> {
    price_claim(&ClaimSpec::unit(1.0, maturity)?, mp, grid, offset)
}

/// Fair zero-coupon inflation swap rate from the two bond prices and the
/// time to maturity: `(P_R/P_N)^{1/τ} − 1`.
pub fn zciis_from_bonds(nominal: f64, real: f64, tau: f64) -> Result<f64> {
    if !(nominal > 0.0 && real > 0.0) {
        return Err(Error::Numerical(format!(
            "non-positive bond price (nominal {nominal}, real {real})"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::Claim(format!("swap tenor {tau} must be positive")));
    }
    Ok((real / nominal).powf(1.0 / tau) - 1.0)
}

/// ZCIIS rate for one maturity at `state`.
pub fn zciis_rate(
    mp: &ModelParams,
    grid: &Grid,
    offset: f64,
    maturity: f64,
    state: State,
) -> Result<f64> {
    let pn = nominal_bond(mp, grid, offset, maturity)?.value_at(state)?;
    let pr = real_bond(mp, grid, offset, maturity)?.value_at(state)?;
    zciis_from_bonds(pn, pr, maturity - offset)
}

/// Nominal and real bond prices at `state` for a set of maturities.
///
/// Maturities sharing the same residual after whole observation periods
/// are priced by a single backward sweep, reading each one off as the
/// recursion passes its period count.
pub fn bond_curve(
    mp: &ModelParams,
    grid: &Grid,
    offset: f64,
    maturities: &[f64],
    state: State,
) -> Result<Vec<(f64, f64)>> {
    let t1 = mp.t1();
    check_offset(offset, t1)?;
    let mut out = vec![(f64::NAN, f64::NAN); maturities.len()];
    let rec = Recursion::new(mp, grid)?;
    grid.rate_row(state.r)?;
    // bucket maturities by residual
    let mut groups: Vec<(f64, Vec<(usize, usize)>)> = Vec::new();
    for (k, &t) in maturities.iter().enumerate() {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Claim(format!("bad maturity {t}")));
        }
        let (m, rho) = split_maturity(t, t1);
        if m == 0 && t + TIME_TOL < offset {
            return Err(Error::Claim(format!("maturity {t} precedes the offset")));
        }
        match groups
            .iter_mut()
            .find(|(r, _)| (r - rho).abs() <= TIME_TOL * t1)
        {
            Some((_, v)) => v.push((k, m)),
            None => groups.push((rho, vec![(k, m)])),
        }
    }
    let read = |lat: Lattice, p: f64, readout: f64, maturity: f64| -> Result<f64> {
        PriceSurface {
            grid: grid.clone(),
            values: lat,
            p,
            readout,
            maturity,
            offset,
        }
        .value_at(state)
    };
    for (rho, mut members) in groups {
        members.sort_by_key(|&(_, m)| m);
        let m_max = members.last().map_or(0, |&(_, m)| m);
        let g0 = rec.solve(Lattice::filled(grid, 1.0), rho)?;
        let mut g = [g0.clone(), g0];
        let mut next = 0usize;
        // M = 0 members
        while next < members.len() && members[next].1 == 0 {
            let (k, _) = members[next];
            let len = (maturities[k] - offset).max(0.0);
            let lat = rec.solve(Lattice::filled(grid, 1.0), len)?;
            out[k] = (
                read(lat.clone(), 0.0, len, maturities[k])?,
                read(lat, 1.0, len, maturities[k])?,
            );
            next += 1;
        }
        for i in 1..=m_max {
            let accrual = if i == 1 { rho } else { t1 };
            let h = [rec.link(&g[0], 0.0, accrual), rec.link(&g[1], 1.0, accrual)];
            let ends_here = next < members.len() && members[next].1 == i;
            if ends_here && offset > 0.0 {
                let pn = rec.solve(h[0].clone(), t1 - offset)?;
                let pr = rec.solve(h[1].clone(), t1 - offset)?;
                while next < members.len() && members[next].1 == i {
                    let (k, _) = members[next];
                    out[k] = (
                        read(pn.clone(), 0.0, t1 - offset, maturities[k])?,
                        read(pr.clone(), 1.0, t1 - offset, maturities[k])?,
                    );
                    next += 1;
                }
            }
            if i == m_max && offset > 0.0 {
                break;
            }
            let [h0, h1] = h;
            g = [rec.solve(h0, t1)?, rec.solve(h1, t1)?];
            while next < members.len() && members[next].1 == i {
                let (k, _) = members[next];
                out[k] = (
                    read(g[0].clone(), 0.0, t1, maturities[k])?,
                    read(g[1].clone(), 1.0, t1, maturities[k])?,
                );
                next += 1;
            }
        }
    }
    Ok(out)
}

/// ZCIIS rates at `state` for several maturities (decimal units).
pub fn zciis_curve(
    mp: &ModelParams,
    grid: &Grid,
    offset: f64,
    maturities: &[f64],
    state: State,
) -> Result<Vec<f64>> {
    bond_curve(mp, grid, offset, maturities, state)?
        .into_iter()
        .zip(maturities)
        .map(|((pn, pr), &t)| zciis_from_bonds(pn, pr, t - offset))
        .collect()
}
