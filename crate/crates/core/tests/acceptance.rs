//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use robust_huber::datagen::{self, RegressionSeeds};
use robust_huber::estimators::{self, EstimatorConstants};
use robust_huber::experiments::{self, ExperimentSpec, ResultRow};
use robust_huber::huber::{self, HuberParams, Residuals};
use robust_huber::{prox, verification, DenseVector, NoiseSpec, PcaProblem, RegressionProblem, Seed, SolverConfig};

type Outcome = Result<(bool, String), String>;

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<ExperimentSpec, String> {
    ExperimentSpec::from_path(&configs_dir().join(name)).map_err(|e| e.to_string())
}

fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, String> {
    let rows = experiments::run_experiment(spec).map_err(|e| e.to_string())?;
    if let Some(bad) = rows.iter().find(|r| !r.is_ok()) {
        return Err(format!("job {:?} trial {} failed with status {}", bad.point, bad.trial, bad.status));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Oracles

fn f_h(t: f64, h: f64) -> f64 {
    if t.abs() <= h {
        0.5 * t * t
    } else {
        h * (t.abs() - 0.5 * h)
    }
}

fn df_h(t: f64, h: f64) -> f64 {
    t.clamp(-h, h)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

/// Ordinary least-squares slope of `ln y` on `ln x`.
fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Median of `metric` for each value of grid key `key`, ascending.
fn medians(rows: &[ResultRow], key: &str, metric: &str) -> Vec<(f64, f64)> {
    let mut groups: BTreeMap<i64, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let x = r.point[key];
        groups.entry((x * 1e9).round() as i64).or_insert((x, Vec::new())).1.push(r.metrics[metric]);
    }
    groups.into_values().map(|(x, v)| (x, median(&v))).collect()
}

fn nuclear_norm_oracle(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().sum()
}

fn spectral_norm_oracle(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

// ---------------------------------------------------------------------------
// 1. Huber unit suite

fn criterion_1() -> Outcome {
    let p2 = HuberParams::new(2.0).map_err(|e| e.to_string())?;
    let pen = |t: f64| huber::huber_penalty(t, p2).unwrap();
    let der = |t: f64| huber::huber_penalty_deriv(t, p2).unwrap();
    let examples = pen(0.0) == 0.0
        && pen(1.0) == 0.5
        && pen(3.0) == 4.0
        && pen(-3.0) == 4.0
        && der(1.0) == 1.0
        && der(5.0) == 2.0
        && der(-5.0) == -2.0
        && huber::huber_loss(&Residuals::vector(vec![1.0, 3.0]), p2).unwrap() == 4.5
        && huber::huber_loss_grad(&Residuals::vector(vec![1.0, 5.0, -5.0]), p2).unwrap().values() == [1.0, 2.0, -2.0]
        && huber::huber_penalty(f64::NAN, p2).is_err();

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_fd = 0.0f64;
    for _ in 0..1000 {
        let h = rng.random_range(0.5..3.0);
        let p = HuberParams::new(h).unwrap();
        let len = rng.random_range(1..30);
        let mut r: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0 * h..3.0 * h)).collect();
        for v in r.iter_mut() {
            if (v.abs() - h).abs() < 1e-4 {
                *v += 1e-3;
            }
        }
        let g = huber::huber_loss_grad(&Residuals::vector(r.clone()), p).unwrap();
        for i in 0..len {
            let step = 1e-6;
            let mut up = r.clone();
            let mut down = r.clone();
            up[i] += step;
            down[i] -= step;
            let fd = (huber::huber_loss(&Residuals::vector(up), p).unwrap()
                - huber::huber_loss(&Residuals::vector(down), p).unwrap())
                / (2.0 * step);
            let gi = g.values()[i];
            worst_fd = worst_fd.max((gi - fd).abs() / gi.abs().max(1.0));
            worst_fd = worst_fd.max((gi - df_h(r[i], h)).abs());
        }
    }

    let mut curvature_false = 0usize;
    let mut oracle_false = 0usize;
    for _ in 0..1_000_000 {
        let h = rng.random_range(0.1..4.0);
        let p = HuberParams::new(h).unwrap();
        let eta = rng.random_range(-3.0 * h..3.0 * h);
        let delta = rng.random_range(-3.0 * h..3.0 * h);
        let tau = rng.random_range(0.0..=h);
        if !huber::curvature_lower_bound_holds(eta, delta, tau, p).unwrap() {
            curvature_false += 1;
        }
        let lhs = f_h(eta + delta, h) - f_h(eta, h) - df_h(eta, h) * delta;
        let active = eta.abs() <= h - tau && delta.abs() <= tau;
        let rhs = if active { 0.5 * delta * delta } else { 0.0 };
        if lhs < rhs - 1e-12 * (1.0 + lhs.abs()) {
            oracle_false += 1;
        }
    }
    let ok = examples && worst_fd <= 1e-5 && curvature_false == 0 && oracle_false == 0;
    Ok((
        ok,
        format!(
            "examples {examples}, worst gradient rel. err {worst_fd:.2e} (<= 1e-5), curvature predicate false on {curvature_false}/1e6, direct evaluation false on {oracle_false}/1e6"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 2. Prox oracle suite

/// Minimizer of `(z - v)^2 / 2 + t |z|` by bisection on its monotone
/// subgradient `z - v + t sign(z)`.
fn scalar_l1_prox_oracle(v: f64, t: f64) -> f64 {
    let phi = |z: f64| z - v + t * if z > 0.0 { 1.0 } else if z < 0.0 { -1.0 } else { 0.0 };
    let (mut lo, mut hi) = (-v.abs() - 1.0, v.abs() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_l1 = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..8);
        let v = DenseVector::from_fn(len, |_, _| rng.random_range(-5.0..5.0));
        let t = rng.random_range(0.0..3.0);
        let x = prox::prox_l1(&v, t).map_err(|e| e.to_string())?;
        for i in 0..len {
            let vi = v[i];
            let xi = scalar_l1_prox_oracle(vi, t);
            worst_l1 = worst_l1.max((x[i] - xi).abs());
        }
    }
    let fixed = prox::prox_l1(&DenseVector::from_vec(vec![3.0, -1.0, 0.5]), 1.0).unwrap()
        == DenseVector::from_vec(vec![2.0, 0.0, 0.0]);

    let diag = prox::prox_nuclear(&DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]), 2.0).unwrap();
    let diag_ok = (diag - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0])).norm() <= 1e-12;

    let mut worst_gap = f64::INFINITY;
    for _ in 0..100 {
        let m = gaussian_matrix(&mut rng, 5, 5);
        let t = 0.7;
        let p = prox::prox_nuclear(&m, t).map_err(|e| e.to_string())?;
        let obj = |x: &DMatrix<f64>| 0.5 * (x - &m).norm_squared() + t * nuclear_norm_oracle(x);
        let base = obj(&p);
        for j in 0..1000 {
            let scale = 10f64.powi(-(j % 6) as i32);
            let q = &p + gaussian_matrix(&mut rng, 5, 5) * scale;
            worst_gap = worst_gap.min(obj(&q) - base);
        }
    }
    let nuclear_ok = worst_gap >= -1e-10;

    let mut psd_err = 0.0f64;
    for _ in 0..50 {
        let b = gaussian_matrix(&mut rng, 6, 6);
        let a = &b * b.transpose();
        let t = rng.random_range(0.0..5.0);
        let eig = a.clone().symmetric_eigen();
        let shrunk = eig.eigenvalues.map(|l| (l - t).max(0.0));
        let oracle = &eig.eigenvectors * DMatrix::from_diagonal(&shrunk) * eig.eigenvectors.transpose();
        psd_err = psd_err.max((prox::prox_nuclear(&a, t).unwrap() - oracle).norm());
    }

    let mut expansion = 0.0f64;
    for i in 0..1000 {
        let t = rng.random_range(0.0..2.0);
        if i % 2 == 0 {
            let a = DenseVector::from_fn(10, |_, _| rng.random_range(-3.0..3.0));
            let b = DenseVector::from_fn(10, |_, _| rng.random_range(-3.0..3.0));
            let d = (prox::prox_l1(&a, t).unwrap() - prox::prox_l1(&b, t).unwrap()).norm();
            expansion = expansion.max(d - (&a - &b).norm());
        } else {
            let a = gaussian_matrix(&mut rng, 5, 5);
            let b = gaussian_matrix(&mut rng, 5, 5);
            let d = (prox::prox_nuclear(&a, t).unwrap() - prox::prox_nuclear(&b, t).unwrap()).norm();
            expansion = expansion.max(d - (&a - &b).norm());
        }
    }
    let ok = worst_l1 <= 1e-8 && fixed && diag_ok && nuclear_ok && psd_err <= 1e-8 && expansion <= 1e-10;
    Ok((
        ok,
        format!(
            "prox_l1 vs numeric max err {worst_l1:.1e} (<= 1e-8), nuclear min perturbation gain {worst_gap:.1e} (>= -1e-10), PSD eigen-shrinkage err {psd_err:.1e}, worst expansion {expansion:.1e}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 3. Solver oracle suite

fn regression_objective(x: &DMatrix<f64>, y: &DenseVector, gamma: f64, b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..x.nrows() {
        let pred: f64 = (0..x.ncols()).map(|j| x[(i, j)] * b[j]).sum();
        s += f_h(y[i] - pred, 2.0);
    }
    s + gamma * b.iter().map(|v| v.abs()).sum::<f64>()
}

fn criterion_3() -> Outcome {
    let tight = SolverConfig { rel_tol: 1e-12, max_iters: 200_000, ..SolverConfig::default() };
    let zero_gamma = EstimatorConstants { gamma_override: Some(0.0), ..EstimatorConstants::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut certified = 0usize;
    let mut instances = 0usize;
    let mut count_cert = |r: &robust_huber::SolveResult| {
        instances += 1;
        if r.reference_dominated == Some(true) {
            certified += 1;
        }
    };

    // Least-squares regime: every residual of the least-squares fit is in
    // the quadratic branch, so the Huber fit equals it.
    let mut ls_err = 0.0f64;
    for _ in 0..20 {
        let x = gaussian_matrix(&mut rng, 40, 3);
        let beta = DenseVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
        let y = &x * &beta + DenseVector::from_fn(40, |_, _| rng.random_range(-0.5..0.5));
        let ls = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
        assert!((&y - &x * &ls).amax() < 2.0);
        let p = RegressionProblem::new(x, y).unwrap().with_truth(beta, vec![0, 1, 2]).unwrap();
        let (b, res) = estimators::estimate_sparse_regression(&p, &zero_gamma, &tight).map_err(|e| e.to_string())?;
        ls_err = ls_err.max((b - ls).amax());
        count_cert(&res);
    }

    // d = 2 with an l1 penalty against a grid over [-2, 2]^2.
    let mut reg_gap = f64::NEG_INFINITY;
    let mut in_grid = true;
    for _ in 0..3 {
        let x = gaussian_matrix(&mut rng, 10, 2);
        let beta = DenseVector::from_vec(vec![rng.random_range(-1.5..1.5), 0.0]);
        let noise = DenseVector::from_fn(10, |i, _| if i % 5 == 0 { 8.0 } else { rng.random_range(-0.5..0.5) });
        let y = &x * &beta + noise;
        let gamma = 0.3;
        let c = EstimatorConstants { gamma_override: Some(gamma), ..EstimatorConstants::default() };
        let p = RegressionProblem::new(x.clone(), y.clone()).unwrap().with_truth(beta, vec![0]).unwrap();
        let (b, res) = estimators::estimate_sparse_regression(&p, &c, &tight).map_err(|e| e.to_string())?;
        let mut grid_min = f64::INFINITY;
        for i in 0..=400 {
            for j in 0..=400 {
                let g = [-2.0 + 0.01 * i as f64, -2.0 + 0.01 * j as f64];
                grid_min = grid_min.min(regression_objective(&x, &y, gamma, &g));
            }
        }
        reg_gap = reg_gap.max(regression_objective(&x, &y, gamma, b.as_slice()) - grid_min);
        in_grid &= b.amax() <= 2.0;
        count_cert(&res);
    }

    // 2 x 2 PCA against a 41^4 grid over the feasible box.
    let mut pca_gap = f64::NEG_INFINITY;
    let mut feasible = true;
    for _ in 0..2 {
        let l = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, 0.5, -0.5]);
        let noise = DMatrix::from_fn(2, 2, |i, j| if i == j { 3.0 } else { rng.random_range(-0.5..0.5) });
        let y = &l + noise;
        let gamma = 0.3;
        let zeta = 0.5;
        let rho = 1.5;
        let h = zeta + rho;
        let c = EstimatorConstants { gamma_override: Some(gamma), ..EstimatorConstants::default() };
        let p = PcaProblem::new(y.clone(), rho, zeta).unwrap().with_truth(l, 1).unwrap();
        let (lh, res) = estimators::estimate_pca(&p, &c, &tight).map_err(|e| e.to_string())?;
        feasible &= lh.amax() <= rho + 1e-12;
        let obj = |a: f64, b: f64, cc: f64, d: f64| {
            let fro2 = a * a + b * b + cc * cc + d * d;
            let nuc = (fro2 + 2.0 * (a * d - b * cc).abs()).sqrt();
            f_h(y[(0, 0)] - a, h) + f_h(y[(0, 1)] - b, h) + f_h(y[(1, 0)] - cc, h) + f_h(y[(1, 1)] - d, h) + gamma * nuc
        };
        let axis: Vec<f64> = (0..=40).map(|i| -rho + 2.0 * rho * i as f64 / 40.0).collect();
        let mut grid_min = f64::INFINITY;
        for &a in &axis {
            for &b in &axis {
                for &cc in &axis {
                    for &d in &axis {
                        grid_min = grid_min.min(obj(a, b, cc, d));
                    }
                }
            }
        }
        pca_gap = pca_gap.max(obj(lh[(0, 0)], lh[(0, 1)], lh[(1, 0)], lh[(1, 1)]) - grid_min);
        count_cert(&res);
    }

    // Larger synthetic instances with the default tolerance.
    let cfg = SolverConfig::default();
    for s in 0..5u64 {
        let sigma = DMatrix::identity(20, 20);
        let noise = NoiseSpec::mixture(0.5, 1.0, 100.0);
        let p = datagen::gen_regression_problem(400, &sigma, 3, 2.0, &noise, RegressionSeeds::from_master(Seed(s)))
            .map_err(|e| e.to_string())?;
        let (_, res) = estimators::estimate_sparse_regression(&p, &EstimatorConstants::with_scale(2.0), &cfg)
            .map_err(|e| e.to_string())?;
        count_cert(&res);
        let q = datagen::gen_pca_problem(30, 2, 1.0, &NoiseSpec::mixture(0.8, 1.0, 100.0), Seed(100 + s))
            .map_err(|e| e.to_string())?;
        let (_, res) = estimators::estimate_pca(&q, &EstimatorConstants::with_scale(1.0), &cfg).map_err(|e| e.to_string())?;
        count_cert(&res);
    }

    let ok = ls_err <= 1e-6 && in_grid && reg_gap <= 1e-4 && pca_gap <= 1e-4 && feasible && certified == instances;
    Ok((
        ok,
        format!(
            "normal-equations err {ls_err:.1e} (<= 1e-6), d=2 grid gap {reg_gap:.1e} (minimizers inside grid {in_grid}), 2x2 PCA grid gap {pca_gap:.1e} (<= 1e-4), reference dominated on {certified}/{instances}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 4. Regression rate

fn criterion_4() -> Outcome {
    let n_spec = load("regression_n_sweep.toml")?;
    let a_spec = load("regression_alpha_sweep.toml")?;
    let m = &n_spec.model;
    let setup_ok = m.d == 100
        && m.k == 5
        && m.alpha == 0.5
        && n_spec.trials_per_point == 21
        && n_spec.grid.get("n") == Some(&vec![500.0, 2000.0, 8000.0])
        && a_spec.model.n == 4000
        && a_spec.grid.get("alpha") == Some(&vec![0.25, 0.5, 1.0]);
    let rows = run(&n_spec)?;
    let by_n = medians(&rows, "n", "prediction_error");
    let bound = |n: f64, alpha: f64| 100.0 * 5.0 * 100f64.ln() / (alpha * alpha * n);
    let worst = by_n.iter().map(|&(n, e)| e / bound(n, 0.5)).fold(0.0, f64::max);
    let slope_n = loglog_slope(&by_n);
    let a_rows = run(&a_spec)?;
    let by_a = medians(&a_rows, "alpha", "prediction_error");
    let worst_a = by_a.iter().map(|&(a, e)| e / bound(4000.0, a)).fold(0.0, f64::max);
    let slope_a = loglog_slope(&by_a);
    let ok = setup_ok && worst <= 1.0 && worst_a <= 1.0 && (slope_n + 1.0).abs() <= 0.25 && (slope_a + 2.0).abs() <= 0.4;
    Ok((
        ok,
        format!(
            "(a) worst median/bound {worst:.3}, alpha sweep {worst_a:.3} (<= 1); (b) n slope {slope_n:.3} (-1 +- 0.25); (c) alpha slope {slope_a:.3} (-2 +- 0.4)"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 5. PCA rate

fn criterion_5() -> Outcome {
    let n_spec = load("pca_n_sweep.toml")?;
    let a_spec = load("pca_alpha_sweep.toml")?;
    let m = &n_spec.model;
    let setup_ok = m.r == 2
        && m.alpha == 0.8
        && m.zeta == 1.0
        && m.rho_over_n == 1.0
        && n_spec.trials_per_point == 11
        && n_spec.grid.get("n") == Some(&vec![50.0, 100.0, 200.0]);
    let bound = |n: f64, alpha: f64| 10.0 * (2.0 * n).sqrt() / alpha * 2.0;
    let rows = run(&n_spec)?;
    let by_n = medians(&rows, "n", "frobenius_error");
    let worst = by_n.iter().map(|&(n, e)| e / bound(n, 0.8)).fold(0.0, f64::max);
    let slope_n = loglog_slope(&by_n);
    let a_rows = run(&a_spec)?;
    let na = a_spec.model.n as f64;
    let by_a = medians(&a_rows, "alpha", "frobenius_error");
    let worst_a = by_a.iter().map(|&(a, e)| e / bound(na, a)).fold(0.0, f64::max);
    let slope_a = loglog_slope(&by_a);
    let dominated = rows.iter().chain(&a_rows).all(|r| r.flags["reference_dominated"]);
    let ok = setup_ok
        && worst <= 1.0
        && worst_a <= 1.0
        && (slope_n - 0.5).abs() <= 0.2
        && (slope_a + 1.0).abs() <= 0.3
        && dominated;
    Ok((
        ok,
        format!(
            "worst median/bound {worst:.3}, alpha sweep {worst_a:.3} (<= 1); n slope {slope_n:.3} (0.5 +- 0.2); alpha slope {slope_a:.3} (-1 +- 0.3); reference dominated {dominated}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 6. Meta-certificate

fn certificate_rows(name: &str) -> Result<(usize, usize, usize, usize), String> {
    let rows = run(&load(name)?)?;
    let mut good = 0;
    let mut hard = 0;
    let mut vacuous = 0;
    for r in &rows {
        let f = |k: &str| r.flags[k];
        let flags = ["decomposability", "contraction", "gradient", "rsc", "radius_bound"].iter().all(|k| f(k));
        let within = r.metrics["error"] < r.metrics["radius"];
        let kappa = r.metrics["kappa"];
        let formula = !kappa.is_finite()
            || 4.0 * r.metrics["gamma"] * r.metrics["s"] / kappa <= r.metrics["radius"] * (1.0 + 1e-9);
        let gradient = r.metrics["gamma_measured"] <= r.metrics["gamma"];
        if flags && !within {
            hard += 1;
        }
        if flags && within && formula && gradient && f("cone_membership") && f("reference_dominated") {
            good += 1;
        }
        if f("rsc_vacuous") {
            vacuous += 1;
        }
    }
    Ok((rows.len(), good, hard, vacuous))
}

fn criterion_6() -> Outcome {
    let (rn, rg, rh, rv) = certificate_rows("meta_certificate_regression.toml")?;
    let (pn, pg, ph, pv) = certificate_rows("meta_certificate_pca.toml")?;
    let ok = rn == 20 && pn == 10 && rg == rn && pg == pn && rh + ph == 0;
    Ok((
        ok,
        format!(
            "regression {rg}/{rn} certified ({rv} vacuous curvature), PCA {pg}/{pn} certified ({pv} vacuous curvature: radius exceeds the feasible diameter), implication violations {}",
            rh + ph
        ),
    ))
}

// ---------------------------------------------------------------------------
// 7. Gradient bounds

fn criterion_7() -> Outcome {
    let delta = 0.05;
    let redraws = 200;
    let allowed = delta + 2.0 * (delta * (1.0 - delta) / redraws as f64).sqrt();

    let (n, d) = (500, 50);
    let sigma = DMatrix::identity(d, d);
    let x = datagen::gen_gaussian_design(n, d, &sigma, Seed(700)).map_err(|e| e.to_string())?;
    let nu = (0..d).map(|j| x.column(j).norm_squared() / n as f64).fold(0.0, f64::max);
    let reg_bound = 20.0 * (nu * n as f64 * ((d as f64).ln() + (2.0 / delta).ln())).sqrt();
    let lib_bound_ok = (verification::regression_gradient_bound(n, d, nu, delta) - reg_bound).abs() <= 1e-9 * reg_bound;
    let noise = NoiseSpec::mixture(0.5, 1.0, 100.0);
    let mut reg_exceed = 0;
    let mut agree = true;
    for t in 0..redraws {
        let eta = datagen::gen_noise_vector(n, &noise, Seed(7000 + t)).map_err(|e| e.to_string())?;
        let clipped = eta.map(|v| df_h(v, 2.0));
        let g = x.transpose() * clipped;
        let dual = g.amax();
        if dual > reg_bound {
            reg_exceed += 1;
        }
        if t < 5 {
            let beta = DenseVector::zeros(d);
            let p = RegressionProblem::new(x.clone(), eta.clone()).unwrap().with_truth(beta, vec![0]).unwrap();
            let inst = verification::Instance::Regression { problem: &p, constants: EstimatorConstants::default() };
            let lib = verification::measure_gradient_dual_norm(&inst).map_err(|e| e.to_string())?;
            agree &= (lib - dual).abs() <= 1e-9 * dual.max(1.0);
        }
    }

    let np = 100;
    let h = 2.0;
    let pca_bound = 10.0 * h * (np as f64 + (2.0 / delta).ln()).sqrt();
    let lib_bound_ok = lib_bound_ok && (verification::pca_gradient_bound(np, h, delta) - pca_bound).abs() <= 1e-9 * pca_bound;
    let mut pca_exceed = 0;
    for t in 0..redraws {
        let nm = datagen::gen_oblivious_noise_matrix(np, &NoiseSpec::mixture(0.8, 1.0, 100.0), Seed(9000 + t))
            .map_err(|e| e.to_string())?;
        if spectral_norm_oracle(&nm.map(|v| df_h(v, h))) > pca_bound {
            pca_exceed += 1;
        }
    }
    let fr = reg_exceed as f64 / redraws as f64;
    let fp = pca_exceed as f64 / redraws as f64;
    let ok = fr <= allowed && fp <= allowed && lib_bound_ok && agree;
    Ok((
        ok,
        format!(
            "regression exceedance {fr:.3}, PCA exceedance {fp:.3} (<= {allowed:.4}); library bounds match formulas {lib_bound_ok}; library gradient matches oracle {agree}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 8. Gaussian-design structure

fn criterion_8() -> Outcome {
    let (n, d, k) = (2000, 50, 3);
    let mut conc = true;
    let mut re_ok = true;
    let mut spread = true;
    let mut details = Vec::new();
    for (i, c) in [0.0, 0.5].into_iter().enumerate() {
        let sigma = experiments::toeplitz_covariance(d, c).map_err(|e| e.to_string())?;
        let x = datagen::gen_gaussian_design(n, d, &sigma, Seed(800 + i as u64)).map_err(|e| e.to_string())?;
        let support: Vec<usize> = (0..k).map(|j| 7 * j + 1).collect();
        conc &= verification::check_gaussian_concentration(&x, &sigma, k, 1000, Seed(810)).map_err(|e| e.to_string())?;
        let sigma_min = sigma.clone().symmetric_eigen().eigenvalues.min();
        let lam = verification::check_re_property(&x, &support, 1000, Seed(820)).map_err(|e| e.to_string())?;
        re_ok &= lam >= sigma_min / 4.0;
        details.push(format!("rho={c}: RE {lam:.3} vs {:.3}", sigma_min / 4.0));
        spread &= verification::check_well_spread(&x, &support, n / 1000, 1000, Seed(830)).map_err(|e| e.to_string())?;
    }
    let sigma = DMatrix::identity(500, 500);
    let small = datagen::gen_gaussian_design(10, 500, &sigma, Seed(840)).map_err(|e| e.to_string())?;
    let conc_neg = !verification::check_gaussian_concentration(&small, &sigma, 5, 1000, Seed(841)).map_err(|e| e.to_string())?;

    let mut spiky = datagen::gen_gaussian_design(200, 10, &DMatrix::identity(10, 10), Seed(850)).map_err(|e| e.to_string())?;
    spiky.row_mut(0).scale_mut(1e4);
    let spread_neg = !verification::check_well_spread(&spiky, &[0, 1], 1, 200, Seed(851)).map_err(|e| e.to_string())?;
    let ok = conc && conc_neg && re_ok && spread && spread_neg;
    Ok((
        ok,
        format!(
            "concentration in-regime {conc}, under-sampled control rejected {conc_neg}; {}; well-spread in-regime {spread}, concentrated-row control rejected {spread_neg}",
            details.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// 9. Noise models

/// `sup_t |F(t) + F(-t^-) - 1|` of the empirical CDF.
fn symmetry_statistic(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let below = |t: f64| s.partition_point(|&x| x < t) as f64 / n;
    let at_most = |t: f64| s.partition_point(|&x| x <= t) as f64 / n;
    s.iter().map(|&t| (at_most(t) + below(-t) - 1.0).abs()).fold(0.0, f64::max)
}

fn criterion_9() -> Outcome {
    let mut norm_ok = true;
    for (n, r, xi) in [(4usize, 1usize, 0.5f64), (100, 2, 0.25), (400, 1, 0.5), (400, 1, 8.0)] {
        let (a, q) = datagen::lb_noise_law(n, r, xi).map_err(|e| e.to_string())?;
        let t = xi * (r as f64 / n as f64).sqrt();
        norm_ok &= (a - t / (2.0 - t)).abs() <= 1e-15 && (q - (1.0 - t)).abs() <= 1e-15;
        let mut total = a;
        let mut term = a;
        for _ in 0..100_000 {
            term *= q;
            total += 2.0 * term;
        }
        norm_ok &= total >= 1.0 - 1e-9 && total <= 1.0 + 1e-9;
    }
    let (a4, _) = datagen::lb_noise_law(4, 1, 0.5).unwrap();
    norm_ok &= (a4 - 1.0 / 7.0).abs() <= 1e-15;

    let mut worst_z = 0.0f64;
    let mut worst_sym = 0.0f64;
    let mut z = |count: usize, total: usize, p: f64| {
        let se = (p * (1.0 - p) / total as f64).sqrt();
        let zz = if se > 0.0 { (count as f64 / total as f64 - p).abs() / se } else { 0.0 };
        worst_z = worst_z.max(zz);
    };

    let n = 100_000;
    for (spec, label) in [(NoiseSpec::mixture(0.3, 1.0, 100.0), "mixture"), (NoiseSpec::gaussian(0.6, 1.0), "gaussian")] {
        let v = datagen::gen_noise_vector(n, &spec, Seed(900)).map_err(|e| format!("{label}: {e}"))?;
        z(v.iter().filter(|x| x.abs() <= spec.zeta).count(), n, spec.alpha);
        worst_sym = worst_sym.max(symmetry_statistic(v.as_slice()));
    }
    let lb = datagen::gen_lb_noise(400, 1, 4.0, Seed(901)).map_err(|e| e.to_string())?;
    let (a, _) = datagen::lb_noise_law(400, 1, 4.0).unwrap();
    z(lb.iter().filter(|&&x| x == 0.0).count(), lb.len(), a);
    let even = lb.iter().all(|&x| x % 2.0 == 0.0);
    worst_sym = worst_sym.max(symmetry_statistic(lb.as_slice()));
    let (p, mask) = datagen::gen_matrix_completion_scenario(300, 2, 0.7, 1.0, 1.0, Seed(902)).map_err(|e| e.to_string())?;
    z(mask.iter().filter(|&&o| o).count(), mask.len(), 0.7);
    let noise = &p.y - &p.truth().unwrap().l;
    worst_sym = worst_sym.max(symmetry_statistic(noise.as_slice()));
    let det = datagen::gen_deterministic_outlier_noise(1000, 0.37, Seed(903)).map_err(|e| e.to_string())?;
    let det_ok = det.iter().filter(|x| x.abs() <= 1.0).count() == 370;

    let ok = norm_ok && worst_z <= 3.0 && worst_sym <= 0.01 && even && det_ok;
    Ok((
        ok,
        format!(
            "normalization and closed forms {norm_ok}, worst inlier-fraction z-score {worst_z:.2} (<= 3), worst symmetry statistic {worst_sym:.4} (<= 0.01), even support {even}, deterministic count {det_ok}"
        ),
    ))
}

// ---------------------------------------------------------------------------
// 10. Lower-bound phase

fn criterion_10() -> Outcome {
    let spec = load("lowerbound_phase.toml")?;
    let m = &spec.model;
    let factors = spec.grid.get("alpha_factor").cloned().unwrap_or_default();
    let setup_ok = m.n == 400 && m.r == 1 && m.epsilon == 0.5 && factors == vec![0.2, 0.5, 1.0, 2.0, 5.0];
    let rows = run(&spec)?;
    let mut law_ok = true;
    let mut by: BTreeMap<i64, (f64, usize, usize)> = BTreeMap::new();
    for r in &rows {
        let f = r.point["alpha_factor"];
        let alpha = f * (1.0 / 400f64).sqrt();
        let xi = r.metrics["xi"];
        let t = xi * (1.0 / 400f64).sqrt();
        law_ok &= (r.metrics["alpha_effective"] - alpha).abs() <= 1e-12 && (t / (2.0 - t) - alpha).abs() <= 1e-12;
        let e = by.entry((f * 1e9).round() as i64).or_insert((f, 0, 0));
        e.1 += 1;
        if r.metrics["relative_error"] <= m.epsilon {
            e.2 += 1;
        }
    }
    let fr: Vec<(f64, f64, usize)> = by.into_values().map(|(f, t, s)| (f, s as f64 / t as f64, t)).collect();
    let lowest = fr.first().map(|v| v.1).unwrap_or(1.0);
    let highest = fr.last().map(|v| v.1).unwrap_or(0.0);
    let monotone = fr.windows(2).all(|w| {
        let (p, q) = (w[0].1, w[1].1);
        let se = (p * (1.0 - p) / w[0].2 as f64 + q * (1.0 - q) / w[1].2 as f64).sqrt();
        q >= p - 2.0 * se
    });
    let curve: Vec<String> = fr.iter().map(|v| format!("{}:{:.2}", v.0, v.1)).collect();
    let ok = setup_ok && law_ok && lowest <= 0.5 && highest >= 0.9 && monotone;
    Ok((
        ok,
        format!(
            "success by alpha factor [{}]; lowest {lowest:.2} (<= 0.5), highest {highest:.2} (>= 0.9), monotone within 2 sigma {monotone}",
            curve.join(", ")
        ),
    ))
}

// ---------------------------------------------------------------------------
// 11. Reproducibility

fn criterion_11() -> Outcome {
    let mut spec = load("regression_n_sweep.toml")?;
    let smallest = spec.grid["n"].iter().cloned().fold(f64::INFINITY, f64::min);
    spec.grid.insert("n".into(), vec![smallest]);
    let csv = |rows: &[ResultRow]| -> Result<Vec<u8>, String> {
        let mut buf = Vec::new();
        experiments::write_csv(rows, &mut buf, std::path::Path::new("memory")).map_err(|e| e.to_string())?;
        Ok(buf)
    };
    let serial = csv(&experiments::run_experiment_with_threads(&spec, 1).map_err(|e| e.to_string())?)?;
    let parallel = csv(&experiments::run_experiment_with_threads(&spec, 4).map_err(|e| e.to_string())?)?;
    let again = csv(&experiments::run_experiment_with_threads(&spec, 1).map_err(|e| e.to_string())?)?;
    let ok = serial == parallel && serial == again && !serial.is_empty();
    Ok((
        ok,
        format!(
            "n = {smallest}: {} bytes, serial == parallel {}, rerun identical {}",
            serial.len(),
            serial == parallel,
            serial == again
        ),
    ))
}

// ---------------------------------------------------------------------------

fn main() {
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Criterion = (u32, &'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 11] = [
        (1, "huber unit suite", 10, criterion_1),
        (2, "prox oracle suite", 30, criterion_2),
        (3, "solver oracle suite", 120, criterion_3),
        (4, "regression rate", 900, criterion_4),
        (5, "PCA rate", 1200, criterion_5),
        (6, "meta-certificate", 600, criterion_6),
        (7, "gradient bounds", 300, criterion_7),
        (8, "gaussian-design structure", 300, criterion_8),
        (9, "noise models", 60, criterion_9),
        (10, "lower-bound phase", 900, criterion_10),
        (11, "reproducibility", 60, criterion_11),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, limit, f) in criteria {
        if !args.is_empty() && !args.iter().any(|a| a == &id.to_string()) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = elapsed < Duration::from_secs(limit);
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {detail}; {:.1} s (limit {limit} s)",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
