mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ecb_inflation::calibration::{CalibSpec, ModelKind};
use ecb_inflation::pide::GridSpec;

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(common::ecbinfl())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

/// Coarse grid shared by the data generator and the fits below.
fn coarse_spec() -> CalibSpec {
    let mut spec = CalibSpec::new(ModelKind::Ours);
    spec.ours.grid = GridSpec {
        n_steps: 6,
        n_z: 30,
        z_max: Some(0.18),
        n_pi: 15,
        pi_range: None,
    };
    spec
}
const COARSE_FLAG: &str = "6,18,30,0.18";

#[test]
fn help_lists_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 4] = [
        ("simulate", &["--paths", "--horizon", "--dt", "--state"]),
        ("price", &["--model", "--maturity", "--state", "--mc-check", "--mc-paths", "--mc-dt"]),
        ("calibrate", &["--model", "--quotes", "--hicp", "--ecb-rates", "--warm-start", "--max-evals"]),
        ("compare", &["--quotes", "--hicp", "--ecb-rates", "--period", "--warm-start"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(&run(&[cmd, "--help"], dir.path()));
        for f in flags
            .iter()
            .chain(&["--config", "--out", "--seed", "--threads", "--grid"])
        {
            assert!(help.contains(f), "`{cmd} --help` lacks {f}");
        }
    }
}

#[test]
fn unknown_flags_and_keys_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!run(&["simulate", "--paths", "3", "--bogus"], dir.path()).status.success());
    fs::write(dir.path().join("bad.toml"), "[model]\nbeta = 0.1\nfoo = 1\n").unwrap();
    let out = run(&["--config", "bad.toml", "simulate", "--paths", "3"], dir.path());
    assert!(!out.status.success());
}

#[test]
fn simulate_is_reproducible_and_summary_matches_paths() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        vec![
            "--out", o, "--seed", "7", "simulate", "--paths", "40", "--horizon", "0.25",
        ]
    };
    ok(&run(&args("a"), dir.path()));
    ok(&run(&args("b"), dir.path()));
    let a = fs::read(dir.path().join("a/simulate_summary.csv")).unwrap();
    let b = fs::read(dir.path().join("b/simulate_summary.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        fs::read(dir.path().join("a/paths/path_000017.csv")).unwrap(),
        fs::read(dir.path().join("b/paths/path_000017.csv")).unwrap()
    );

    // re-aggregate the terminal rows of the dumped paths
    let mut sums = [0.0; 3];
    for i in 0..40 {
        let rows = read_csv(&dir.path().join(format!("a/paths/path_{i:06}.csv")));
        assert_eq!(rows[0], ["time", "pi", "r", "rsh"]);
        let last = rows.last().unwrap();
        for k in 0..3 {
            sums[k] += last[k + 1].parse::<f64>().unwrap();
        }
    }
    let summary = read_csv(&dir.path().join("a/simulate_summary.csv"));
    assert_eq!(summary[0], ["variable", "mean", "std"]);
    for (k, name) in ["pi", "r", "rsh"].iter().enumerate() {
        assert_eq!(summary[k + 1][0], *name);
        let mean: f64 = summary[k + 1][1].parse().unwrap();
        let again = sums[k] / 40.0;
        assert!((mean - again).abs() <= 1e-12 * again.abs().max(1e-3), "{name}: {mean} vs {again}");
    }
}

#[test]
fn simulate_rejects_zero_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["simulate", "--paths", "0"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--paths"));
}

#[test]
fn price_at_zero_maturity_is_one() {
    let dir = tempfile::tempdir().unwrap();
    for model in ["ours", "hhy"] {
        ok(&run(&["price", "--model", model, "--maturity", "0"], dir.path()));
        let label = if model == "ours" { "ours" } else { "affine" };
        let rows = read_csv(&dir.path().join(format!("out/price_{label}.csv")));
        assert_eq!(rows[0], ["maturity", "nominal", "real", "zciis_percent"]);
        assert_eq!(rows[1][1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(rows[1][2].parse::<f64>().unwrap(), 1.0);
    }
}

fn cir(k: f64, theta: f64, s: f64, tau: f64, z: f64) -> f64 {
    let g = (k * k + 2.0 * s * s).sqrt();
    let e = (g * tau).exp() - 1.0;
    let den = (g + k) * e + 2.0 * g;
    let a = (2.0 * g * ((k + g) * tau / 2.0).exp() / den).powf(2.0 * k * theta / (s * s));
    a * (-2.0 * e / den * z).exp()
}

#[test]
fn price_without_jumps_matches_cir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cir.toml"),
        "[model]\nlambda_bar = 0.0\nk_sh = 0.8\nb0 = 0.02\nb1 = 0.0\nsigma0 = 0.05\n",
    )
    .unwrap();
    ok(&run(
        &[
            "--config", "cir.toml", "price", "--maturity", "1,5", "--state", "pi=0.02,r=0.0105,z=0.025",
        ],
        dir.path(),
    ));
    let rows = read_csv(&dir.path().join("out/price_ours.csv"));
    for row in &rows[1..] {
        let tau: f64 = row[0].parse().unwrap();
        let p: f64 = row[1].parse().unwrap();
        let exact = cir(0.8, 0.02, 0.05, tau, 0.025);
        assert!((p - exact).abs() / exact < 1e-4, "tau {tau}: {p} vs {exact}");
    }
}

#[test]
fn one_factor_affine_matches_vasicek() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("vas.toml"),
        "[affine]\nkappa = [0.35, 0.7, 1.3]\nsigma_diag = [0.012, 0.01, 0.01]\n\
         sigma_lower = [0.0, 0.0, 0.0]\nrho0_n = 0.025\nrho1_n = [1.0, 0.0, 0.0]\n\
         lambda0 = [-0.4, 0.0, 0.0]\n",
    )
    .unwrap();
    ok(&run(
        &["--config", "vas.toml", "price", "--model", "hhy", "--maturity", "1,5,10,30", "--state", "x1=0.006"],
        dir.path(),
    ));
    let (k, s, l, r0, x) = (0.35f64, 0.012, -0.4, 0.025, 0.006);
    for row in &read_csv(&dir.path().join("out/price_affine.csv"))[1..] {
        let tau: f64 = row[0].parse().unwrap();
        let b = (1.0 - (-k * tau).exp()) / k;
        let ib = (tau - b) / k;
        let ib2 = (tau - 2.0 * b + (1.0 - (-2.0 * k * tau).exp()) / (2.0 * k)) / (k * k);
        let exact = (-s * l * ib + 0.5 * s * s * ib2 - r0 * tau - b * x).exp();
        let p: f64 = row[1].parse().unwrap();
        assert!((p - exact).abs() / exact < 1e-6, "tau {tau}: {p} vs {exact}");
    }
}

#[test]
fn grid_flag_checks_rate_levels() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--grid", "24,17,120,0.18", "price", "--maturity", "1"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rate levels"));
}

#[test]
fn empty_quotes_give_a_clean_error() {
    let dir = tempfile::tempdir().unwrap();
    let hicp = common::synthetic_hicp(12);
    hicp.write(fs::File::create(dir.path().join("hicp.csv")).unwrap()).unwrap();
    fs::write(dir.path().join("quotes.csv"), "date,maturity_years,rate_percent\n").unwrap();
    let out = run(
        &["calibrate", "--quotes", "quotes.csv", "--hicp", "hicp.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no quotes"));
}

#[test]
fn calibrate_round_trip_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 1, &coarse_spec());
    fs::write(
        dir.path().join("run.toml"),
        "[grid]\nn_pi = 15\n\n[optimizer]\npresolve = false\ntarget = 1e-3\n",
    )
    .unwrap();
    let base = ["--config", "run.toml", "--grid", COARSE_FLAG, "--seed", "4"];
    let data = ["--quotes", "quotes.csv", "--hicp", "hicp.csv"];
    let mut args: Vec<&str> = base.to_vec();
    args.extend(["--out", "ours", "calibrate"]);
    args.extend(data);
    ok(&run(&args, dir.path()));
    let per_date = read_csv(&dir.path().join("ours/calib_ours_per_date.csv"));
    assert_eq!(per_date[0], ["date", "model", "rmse", "arpe", "params"]);
    let rmse: f64 = per_date[1][2].parse().unwrap();
    assert!(rmse < 5e-3, "round-trip RMSE {rmse}");
    let summary = read_csv(&dir.path().join("ours/calib_ours_summary.csv"));
    assert_eq!(summary[0], ["model", "rmse_bar", "arpe_bar"]);

    for out in ["aff1", "aff2"] {
        let mut args: Vec<&str> = base.to_vec();
        args.extend(["--out", out, "calibrate", "--model", "hhy"]);
        args.extend(data);
        ok(&run(&args, dir.path()));
    }
    assert_eq!(
        fs::read(dir.path().join("aff1/calib_affine_per_date.csv")).unwrap(),
        fs::read(dir.path().join("aff2/calib_affine_per_date.csv")).unwrap()
    );
}

#[test]
fn compare_favours_the_generating_model() {
    let dir = tempfile::tempdir().unwrap();
    common::write_synthetic(dir.path(), 1, &coarse_spec());
    let start: Vec<String> = common::TRUTH_OURS.iter().map(|x| x.to_string()).collect();
    fs::write(
        dir.path().join("run.toml"),
        format!(
            "[grid]\nn_pi = 15\n\n[optimizer]\npresolve = false\nmax_evals = 20\nours_start = [{}]\n",
            start.join(", ")
        ),
    )
    .unwrap();
    let stdout = ok(&run(
        &[
            "--config", "run.toml", "--grid", COARSE_FLAG, "compare", "--quotes", "quotes.csv",
            "--hicp", "hicp.csv",
        ],
        dir.path(),
    ));
    assert!(stdout.contains("Our model") && stdout.contains("Affine benchmark"));

    let summary = read_csv(&dir.path().join("out/compare_summary.csv"));
    assert_eq!(summary[0], ["model", "rmse_bar", "arpe_bar"]);
    assert_eq!(summary[1][0], "ours");
    assert_eq!(summary[2][0], "affine");
    let per_date = read_csv(&dir.path().join("out/compare_per_date.csv"));
    assert_eq!(per_date[0], ["date", "model", "rmse", "arpe", "params"]);
    // a single date: the averages are the per-date values
    for k in 1..=2 {
        assert_eq!(per_date[k][1], summary[k][0]);
        assert_eq!(per_date[k][2], summary[k][1]);
        assert_eq!(per_date[k][3], summary[k][2]);
    }
    let ours: f64 = summary[1][1].parse().unwrap();
    let affine: f64 = summary[2][1].parse().unwrap();
    assert!(ours < affine, "ours {ours} vs affine {affine}");
    let fits = read_csv(&dir.path().join("out/compare_fits.csv"));
    assert_eq!(
        fits[0],
        ["date", "model", "maturity", "market_percent", "fitted_percent"]
    );
    assert_eq!(fits.len(), 1 + 2 * common::MATURITIES.len());
    let table = fs::read_to_string(dir.path().join("out/compare_table.txt")).unwrap();
    assert!(table.contains("expressed in percentage"));
}
