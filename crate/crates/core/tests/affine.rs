use ecb_inflation::affine::{
    bond_price_affine, integrate, solve_ab, zciis_curve_affine, zciis_from_solutions,
    zciis_rate_affine, AffineParams, Leg, DEFAULT_ODE_STEP,
};

fn one_factor(kappa: f64, sigma: f64, lambda: f64, rho0: f64) -> AffineParams {
    // factors 2 and 3 revert fast and do not load on either short rate
    AffineParams {
        kappa: [kappa, 20.0, 20.0],
        sigma_diag: [sigma, 0.01, 0.01],
        sigma_lower: [0.0; 3],
        rho0_n: rho0,
        rho0_r: rho0,
        rho1_n: [1.0, 0.0, 0.0],
        rho1_r: [1.0, 0.0, 0.0],
        lambda0: [lambda, 0.0, 0.0],
    }
}

/// Vasicek `(A, B₁)` for `r = ρ0 + x`, `dx = (σλ − κx)dt + σ dW`.
fn vasicek_ab(kappa: f64, sigma: f64, lambda: f64, rho0: f64, tau: f64) -> (f64, f64) {
    let b = (1.0 - (-kappa * tau).exp()) / kappa;
    let int_b = (tau - b) / kappa;
    let int_b2 =
        (tau - 2.0 * b + (1.0 - (-2.0 * kappa * tau).exp()) / (2.0 * kappa)) / (kappa * kappa);
    (-sigma * lambda * int_b + 0.5 * sigma * sigma * int_b2 - rho0 * tau, -b)
}

fn sample() -> AffineParams {
    AffineParams {
        kappa: [0.15, 0.6, 1.2],
        sigma_diag: [0.01; 3],
        sigma_lower: [0.002, -0.001, 0.003],
        rho0_n: 0.035,
        rho0_r: 0.012,
        rho1_n: [1.0, 0.8, 0.1],
        rho1_r: [0.9, 0.1, 1.1],
        lambda0: [0.2, -0.1, 0.3],
    }
}

#[test]
fn one_factor_reduction_is_vasicek() {
    let (kappa, sigma, lambda, rho0) = (0.35, 0.012, -0.4, 0.025);
    let p = one_factor(kappa, sigma, lambda, rho0);
    let sol = solve_ab(&p, Leg::Nominal, 30.0, DEFAULT_ODE_STEP).unwrap();
    for tau in [0.5, 1.0, 5.0, 10.0, 30.0] {
        let (a, b) = sol.at(tau).unwrap();
        let (ea, eb) = vasicek_ab(kappa, sigma, lambda, rho0, tau);
        assert!((a - ea).abs() < 1e-8, "A({tau}) = {a} vs {ea}");
        assert!((b[0] - eb).abs() < 1e-8, "B({tau}) = {} vs {eb}", b[0]);
        assert_eq!((b[1], b[2]), (0.0, 0.0));
        let x = [0.006, 0.1, -0.1];
        let price = bond_price_affine(&sol, &x, tau).unwrap();
        assert!((price / (ea + eb * x[0]).exp() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn terminal_normalization_and_zero_state() {
    let p = sample();
    for leg in [Leg::Nominal, Leg::Real] {
        let sol = solve_ab(&p, leg, 10.0, DEFAULT_ODE_STEP).unwrap();
        assert_eq!((sol.a[0], sol.b[0]), (0.0, [0.0; 3]));
        assert_eq!(bond_price_affine(&sol, &[0.05, -0.02, 0.01], 0.0).unwrap(), 1.0);
        let (a, _) = sol.at(7.3).unwrap();
        assert_eq!(bond_price_affine(&sol, &[0.0; 3], 7.3).unwrap(), a.exp());
        assert!(bond_price_affine(&sol, &[0.0; 3], 10.5).is_err());
        assert!(sol.at(-0.1).is_err());
    }
}

#[test]
fn halving_the_step_changes_little_at_thirty_years() {
    let p = sample();
    for leg in [Leg::Nominal, Leg::Real] {
        let coarse = integrate(&p, leg, 30.0, DEFAULT_ODE_STEP).unwrap();
        let fine = integrate(&p, leg, 30.0, DEFAULT_ODE_STEP / 2.0).unwrap();
        let (a, b) = coarse.at(30.0).unwrap();
        let (af, bf) = fine.at(30.0).unwrap();
        assert!((a - af).abs() < 1e-8);
        for i in 0..3 {
            assert!((b[i] - bf[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn price_is_continuous_in_maturity() {
    let p = sample();
    let sol = solve_ab(&p, Leg::Real, 5.0, DEFAULT_ODE_STEP).unwrap();
    let x = [0.01, 0.002, -0.003];
    let mut prev = 1.0;
    for i in 1..=5000 {
        let v = bond_price_affine(&sol, &x, i as f64 * 1e-3).unwrap();
        assert!((v - prev).abs() < 1e-4);
        prev = v;
    }
}

#[test]
fn swap_rate_depends_on_the_intercept_spread_only() {
    let p = sample();
    let x = [0.004, -0.003, 0.002];
    let k = zciis_rate_affine(&p, &x, 0.0, 10.0).unwrap();
    let shifted = AffineParams {
        rho0_n: p.rho0_n + 0.013,
        rho0_r: p.rho0_r + 0.013,
        ..p.clone()
    };
    assert!((zciis_rate_affine(&shifted, &x, 0.0, 10.0).unwrap() - k).abs() < 1e-12);
    // only the tenor matters, not the start date
    assert_eq!(zciis_rate_affine(&p, &x, 2.0, 12.0).unwrap(), k);
}

#[test]
fn constant_spread_with_zero_loadings() {
    let p = AffineParams {
        rho0_n: 0.03,
        rho0_r: 0.01,
        rho1_n: [0.0; 3],
        rho1_r: [0.0; 3],
        ..sample()
    };
    for t in [1.0, 5.0, 30.0] {
        let k = zciis_rate_affine(&p, &[0.1, 0.1, 0.1], 0.0, t).unwrap();
        assert!((k - (0.02f64.exp() - 1.0)).abs() < 1e-13);
    }
}

#[test]
fn curve_matches_single_tenor_composition() {
    let p = sample();
    let x = [0.004, -0.003, 0.002];
    let tenors = [1.0, 2.0, 5.0, 10.0];
    let curve = zciis_curve_affine(&p, &x, &tenors, DEFAULT_ODE_STEP).unwrap();
    let n = solve_ab(&p, Leg::Nominal, 10.0, DEFAULT_ODE_STEP).unwrap();
    let r = solve_ab(&p, Leg::Real, 10.0, DEFAULT_ODE_STEP).unwrap();
    for (&t, &k) in tenors.iter().zip(&curve) {
        assert_eq!(zciis_from_solutions(&n, &r, &x, t).unwrap(), k);
        let pn = bond_price_affine(&n, &x, t).unwrap();
        let pr = bond_price_affine(&r, &x, t).unwrap();
        assert!(((pr / pn).powf(1.0 / t) - 1.0 - k).abs() < 1e-14);
    }
    assert!(zciis_from_solutions(&n, &r, &x, 0.0).is_err());
}

#[test]
fn parameters_are_validated() {
    let p = AffineParams {
        kappa: [0.1, -0.2, 1.0],
        ..sample()
    };
    assert!(solve_ab(&p, Leg::Nominal, 1.0, DEFAULT_ODE_STEP).is_err());
    let p = AffineParams {
        rho0_n: f64::NAN,
        ..sample()
    };
    assert!(p.validate().is_err());
    assert_eq!(sample().extra_scalars().len(), 11);
}
