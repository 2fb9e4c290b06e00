mod common;

use std::sync::Arc;

use ecb_inflation::claims::{
    bond_curve, nominal_bond, price_claim, real_bond, zciis_curve, zciis_from_bonds, zciis_rate,
    ClaimSpec,
};
use ecb_inflation::pide::{solve_duration, Grid, GridSpec, IntervalSolver, Lattice};
use ecb_inflation::simulator::{mc_price, PathConfig};
use ecb_inflation::{Error, ModelParams, State};

use common::{cir_model, cir_price, custom, with_jumps, SymmetricRule};

fn spec(n_steps: usize, n_z: usize, n_pi: usize) -> GridSpec {
    GridSpec {
        n_steps,
        n_z,
        z_max: Some(0.18),
        n_pi,
        pi_range: None,
    }
}

#[test]
fn short_maturity_is_a_single_solve() {
    let mp = ModelParams::reference();
    let g = Grid::build(&spec(24, 60, 11), &mp, 0.1, None).unwrap();
    let t = 0.5 * mp.t1();
    let surf = nominal_bond(&mp, &g, 0.0, t).unwrap();
    let direct = solve_duration(&Lattice::filled(&g, 1.0), &mp, &g, t).unwrap();
    assert_eq!(surf.lattice(), &direct);
}

#[test]
fn zero_maturity_returns_the_payoff() {
    let mp = ModelParams::reference();
    let g = Grid::build(&spec(24, 60, 11), &mp, 1.0, None).unwrap();
    let claim = ClaimSpec::new(0.0, 0.0, Arc::new(|_, _, z| 1.0 + z), 1.0, 0.0).unwrap();
    let surf = price_claim(&claim, &mp, &g, 0.0).unwrap();
    // linear in z, so interpolation between nodes is exact
    for z in [0.0123, 0.05, 0.1111] {
        let v = surf.value_at(State::new(g.pi()[3], g.rate(4), z)).unwrap();
        assert!((v - (1.0 + z)).abs() < 1e-14);
    }
}

#[test]
fn nominal_bond_matches_cir_without_jumps() {
    let (k, b, s) = (0.8, 0.02, 0.05);
    let mp = cir_model(k, b, s);
    let g = Grid::build(&spec(48, 240, 5), &mp, 1.0, None).unwrap();
    let surf = nominal_bond(&mp, &g, 0.0, 1.0).unwrap();
    let mut worst = 0.0f64;
    for l in 0..g.n_pi() {
        for row in 0..g.rows() {
            for j in 0..=g.n_z() / 2 {
                let exact = cir_price(k, b, s, 1.0, g.z(j));
                worst = worst.max((surf.node(l, row, j) - exact).abs() / exact);
            }
        }
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn bonds_lie_in_the_unit_interval_and_fall_with_z() {
    let mp = ModelParams::reference();
    let g = Grid::build(&spec(12, 60, 21), &mp, 1.0, None).unwrap();
    let p = nominal_bond(&mp, &g, 0.0, 1.0).unwrap().prices();
    for l in 0..g.n_pi() {
        for row in 0..g.rows() {
            let prof = p.z_profile(l, row);
            assert!(prof.iter().all(|&v| v > 0.0 && v <= 1.0));
            assert!(prof.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        }
    }
}

#[test]
fn longer_bonds_are_cheaper() {
    let mp = ModelParams::reference();
    let s0 = State::new(0.025, 0.0105, 0.015);
    let g = Grid::build(&spec(12, 60, 31), &mp, 3.0, Some(s0)).unwrap();
    let mats = [0.25, 0.5, 1.0, 2.0, 3.0];
    let curve = bond_curve(&mp, &g, 0.0, &mats, s0).unwrap();
    for w in curve.windows(2) {
        assert!(w[1].0 < w[0].0);
    }
    // the curve sweep agrees with one-maturity pricing
    for (&t, &(pn, pr)) in mats.iter().zip(&curve) {
        assert_eq!(nominal_bond(&mp, &g, 0.0, t).unwrap().value_at(s0).unwrap(), pn);
        assert_eq!(real_bond(&mp, &g, 0.0, t).unwrap().value_at(s0).unwrap(), pr);
    }
}

#[test]
fn nominal_bond_ignores_inflation_when_decoupled() {
    // β = 0 in the inflation block is not needed: the nominal PIDE does not
    // see π once the jump law ignores it
    let mp = with_jumps(1.5, custom(SymmetricRule { p: 0.3 }));
    let g = Grid::build(&spec(12, 60, 21), &mp, 2.0, None).unwrap();
    let v = nominal_bond(&mp, &g, 0.0, 2.0).unwrap();
    for row in 0..g.rows() {
        for j in 0..=g.n_z() {
            let first = v.node(0, row, j);
            for l in 1..g.n_pi() {
                assert_eq!(v.node(l, row, j), first);
            }
        }
    }
}

#[test]
fn stitching_reproduces_a_single_long_solve() {
    let mp = with_jumps(1.5, custom(SymmetricRule { p: 0.3 }));
    let g = Grid::build(&spec(12, 60, 5), &mp, 0.25, None).unwrap();
    let stitched = nominal_bond(&mp, &g, 0.0, 0.25).unwrap();
    let solver = IntervalSolver::new(&mp, &g, g.dtau()).unwrap();
    let single = solver.advance(Lattice::filled(&g, 1.0), 3 * g.n_steps());
    assert!(stitched.lattice().max_abs_diff(&single) < 1e-14);
}

#[test]
fn offset_valuation_shortens_the_first_interval() {
    let mp = with_jumps(1.5, custom(SymmetricRule { p: 0.3 }));
    let g = Grid::build(&spec(24, 60, 5), &mp, 1.0, None).unwrap();
    let s = 0.5 * mp.t1();
    let a = nominal_bond(&mp, &g, s, 1.0).unwrap();
    let b = nominal_bond(&mp, &g, 0.0, 1.0 - s).unwrap();
    assert!(a.lattice().max_abs_diff(b.lattice()) < 1e-6);
    assert!(nominal_bond(&mp, &g, mp.t1(), 1.0).is_err());
}

#[test]
fn zero_inflation_makes_real_equal_nominal() {
    let mp = common::with_inflation(1.0, 0.0, 0.001, 0.0, 1e-6);
    let s0 = State::new(0.0, 0.0105, 0.015);
    let g = Grid::build(&spec(12, 60, 41), &mp, 2.0, Some(s0)).unwrap();
    let pn = nominal_bond(&mp, &g, 0.0, 2.0).unwrap().value_at(s0).unwrap();
    let pr = real_bond(&mp, &g, 0.0, 2.0).unwrap().value_at(s0).unwrap();
    assert!((pr / pn - 1.0).abs() < 1e-9, "{pr} vs {pn}");
}

#[test]
fn deterministic_inflation_accrues_exactly() {
    // β = 0 and a negligible shock: Y(T) = exp(t1 Σ π_i) along the
    // deterministic recursion π_{i+1} = γ(π_i)
    let mp = common::with_inflation(1.0, 0.0, 0.05, 0.02, 1e-7);
    let pi0 = 0.035;
    let s0 = State::new(pi0, 0.0105, 0.015);
    let g = Grid::build(&spec(12, 60, 201), &mp, 1.5, Some(s0)).unwrap();
    let inf = mp.inflation();
    for t in [0.25, 1.0, 1.5, 0.5 + 0.5 / 12.0] {
        let pn = nominal_bond(&mp, &g, 0.0, t).unwrap().value_at(s0).unwrap();
        let pr = real_bond(&mp, &g, 0.0, t).unwrap().value_at(s0).unwrap();
        let (mut pi, mut acc, mut left) = (pi0, 0.0, t);
        while left > 1e-12 {
            let dt = left.min(mp.t1());
            acc += pi * dt;
            left -= dt;
            pi = inf.gamma(pi, 0.0);
        }
        let ratio = pr / pn;
        assert!((ratio / acc.exp() - 1.0).abs() < 1e-6, "T = {t}: {ratio} vs {}", acc.exp());
    }
}

#[test]
fn swap_rate_algebra() {
    assert_eq!(zciis_from_bonds(0.9, 0.9, 3.0).unwrap(), 0.0);
    let tau = 7.0;
    let pn = 0.8;
    let k = zciis_from_bonds(pn, pn * 1.02f64.powf(tau), tau).unwrap();
    assert!((k - 0.02).abs() < 1e-15);
    assert!(matches!(zciis_from_bonds(0.0, 0.9, 1.0), Err(Error::Numerical(_))));
    assert!(zciis_from_bonds(0.9, 0.9, 0.0).is_err());
}

#[test]
fn swap_rate_matches_monte_carlo() {
    let mp = ModelParams::reference();
    let s0 = State::new(mp.inflation().pi_star + 0.006, 0.0105, 0.015);
    let t = 0.5;
    let g = Grid::build(&GridSpec::default(), &mp, t, Some(s0)).unwrap();
    let k = zciis_rate(&mp, &g, 0.0, t, s0).unwrap();
    assert_eq!(zciis_curve(&mp, &g, 0.0, &[t], s0).unwrap()[0], k);

    let cfg = PathConfig::new(t, 1.0 / 600.0, 7);
    let n = 40_000;
    let (mn, sn) = mc_price(&ClaimSpec::unit(0.0, t).unwrap(), &mp, s0, n, &cfg).unwrap();
    let (mr, sr) = mc_price(&ClaimSpec::unit(1.0, t).unwrap(), &mp, s0, n, &cfg).unwrap();
    let k_mc = (mr / mn).powf(1.0 / t) - 1.0;
    // first-order propagation, ignoring the (positive) correlation of the
    // two estimates, which only widens the band
    let se = (mr / mn).powf(1.0 / t) / t * ((sr / mr).powi(2) + (sn / mn).powi(2)).sqrt();
    assert!((k - k_mc).abs() < 3.0 * se, "PIDE {k} vs MC {k_mc} ± {se}");
}

#[test]
fn growth_bound_is_enforced() {
    let mp = ModelParams::reference();
    let g = Grid::build(&spec(12, 30, 11), &mp, 1.0, None).unwrap();
    let wild = ClaimSpec::new(0.0, 1.0, Arc::new(|pi: f64, _, _| (50.0 * pi).exp()), 1.0, 0.0)
        .unwrap();
    assert!(matches!(price_claim(&wild, &mp, &g, 0.0), Err(Error::Claim(_))));
    let tame = ClaimSpec::new(0.0, 1.0, Arc::new(|pi: f64, _, _| (50.0 * pi).exp()), 1.0, 50.0)
        .unwrap();
    assert!(price_claim(&tame, &mp, &g, 0.0).is_ok());
    assert!(ClaimSpec::unit(-1.0, 1.0).is_err());
}

#[test]
fn surfaces_export_as_csv() {
    let mp = ModelParams::reference();
    let g = Grid::build(&spec(12, 10, 3), &mp, 0.1, None).unwrap();
    let surf = real_bond(&mp, &g, 0.0, 0.1).unwrap();
    let mut buf = Vec::new();
    surf.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + g.n_pi() * g.rows() * (g.n_z() + 1));
}
