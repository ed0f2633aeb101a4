//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `--nocapture`). Trial counts are desk-scale;
//! tolerances are fixed in the assertions.

use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use relay_optim::designer::{
    design, nonrobust_design, waterfill_capacity, waterfill_maxmse, waterfill_weighted_mse,
    waterfill_weighted_sumrate, DesignOptions,
};
use relay_optim::linalg::{sample_kronecker_gaussian, CMat};
use relay_optim::objectives::Objective;
use relay_optim::sim::{
    generate_scenario, render_csv, run_point, sweep, SimConfig, SweepAxis, TrialRecord,
};
use relay_optim::verify::{
    grid_search_alternating, grid_search_single_hop, suite_convergence, suite_gamma_identity,
    suite_lmmse_dominance, suite_power_closure, suite_rotation_optimality, OracleObjective,
};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn report(criterion: &str, detail: String) {
    println!("[acceptance] {criterion}: PASS ({detail})");
}

fn fig_config(k_hops: usize, objective: Objective) -> SimConfig {
    SimConfig {
        k_hops,
        n_streams: 4,
        n_antennas: 4,
        alpha: 0.6,
        beta: 0.0,
        sigma_e_sq: 0.004,
        snr_db: vec![30.0; k_hops],
        trials: 200,
        symbols_per_stream: 1000,
        seed: 0xFEED_2024,
        objective,
    }
}

/// Paired one-sided comparison: mean of `d = n - r` positive with 95%
/// confidence (normal approximation).
fn paired_t_stat(diffs: &[f64]) -> (f64, f64) {
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    (mean, mean / se)
}

#[test]
fn criterion_01_single_hop_weighted_mse_grid_oracle() {
    let start = Instant::now();
    let gains = vec![vec![2.0, 1.0]];
    let w = [1.0, 1.0];
    let alloc = waterfill_weighted_mse(&gains, &w, &[2.0], 1e-10, 200).unwrap();
    let oracle_obj = OracleObjective::WeightedMse(w.to_vec());
    let solver = oracle_obj.eval(&alloc.f_sq, &gains);
    let oracle = grid_search_single_hop(&oracle_obj, &[2.0, 1.0], 2.0, 2000);
    let rel = (solver - oracle).abs() / oracle.abs();
    let elapsed = start.elapsed();
    assert!(rel < 0.01, "solver {solver} vs grid oracle {oracle} (rel {rel})");
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    report(
        "criterion 01 (single-hop weighted-MSE grid oracle)",
        format!("rel dev {rel:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_02_two_hop_all_solvers_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0A11);
    let mut seeded_row = || {
        let mut row: Vec<f64> = (0..2).map(|_| rng.random_range(0.4..2.2)).collect();
        row.sort_by(|a, b| b.partial_cmp(a).unwrap());
        row
    };
    let gains = vec![seeded_row(), seeded_row()];
    let budgets = [2.0, 3.0];
    let cases: Vec<(&str, OracleObjective)> = vec![
        ("weighted_mse", OracleObjective::WeightedMse(vec![1.3, 0.8])),
        ("capacity", OracleObjective::Capacity),
        ("max_mse", OracleObjective::MaxMse),
        ("weighted_sum_rate", OracleObjective::WeightedSumRate(vec![2.0, 1.0])),
    ];
    let mut worst = 0.0f64;
    for (name, oracle_obj) in &cases {
        let alloc = match oracle_obj {
            OracleObjective::WeightedMse(w) => {
                waterfill_weighted_mse(&gains, w, &budgets, 1e-10, 200).unwrap()
            }
            OracleObjective::Capacity => waterfill_capacity(&gains, &budgets, 1e-10, 200).unwrap(),
            OracleObjective::MaxMse => waterfill_maxmse(&gains, &budgets, 1e-10, 200).unwrap(),
            OracleObjective::WeightedSumRate(v) => {
                waterfill_weighted_sumrate(&gains, v, &budgets, 1e-10, 200).unwrap()
            }
        };
        let solver = oracle_obj.eval(&alloc.f_sq, &gains);
        let oracle = grid_search_alternating(oracle_obj, &gains, &budgets, 200, 40);
        let rel = (solver - oracle).abs() / oracle.abs().max(1e-9);
        assert!(rel < 0.01, "{name}: solver {solver} vs oracle {oracle} (rel {rel})");
        worst = worst.max(rel);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    report(
        "criterion 02 (two-hop grid oracle, all four solvers)",
        format!("worst rel dev {worst:.2e}, {elapsed:?}"),
    );
}

#[test]
fn criterion_03_gamma_product_identity() {
    let res = suite_gamma_identity(0xC3, 50);
    assert!(res.passed, "{}: worst {} ({})", res.name, res.worst, res.detail);
    assert!(res.worst < 1e-8);
    report("criterion 03 (gamma-product identity, 50 designs)", format!("worst {:.2e}", res.worst));
}

#[test]
fn criterion_04_power_closure() {
    let res = suite_power_closure(0xC4, 50);
    assert!(res.passed, "{}: worst {} ({})", res.name, res.worst, res.detail);
    assert!(res.worst < 1e-6);
    report("criterion 04 (power closure, 50 designs)", format!("worst rel {:.2e}", res.worst));
}

#[test]
fn criterion_05_lmmse_dominance() {
    let res = suite_lmmse_dominance(0xC5, 50, 100);
    assert!(res.passed, "{}: worst {} ({})", res.name, res.worst, res.detail);
    assert!(res.worst >= -1e-10);
    report(
        "criterion 05 (LMMSE dominance, 100 perturbations/design)",
        format!("min eigenvalue {:.2e}", res.worst),
    );
}

#[test]
fn criterion_06_rotation_optimality() {
    let res = suite_rotation_optimality(0xC6, 50, 20);
    assert!(res.passed, "{}: worst {} ({})", res.name, res.worst, res.detail);
    assert!(res.worst <= 1e-9);
    report(
        "criterion 06 (rotation optimality, 50 designs x 20 swaps)",
        format!("max improvement {:.2e}", res.worst),
    );
}

#[test]
fn criterion_07_zero_error_coincidence() {
    let objectives = [
        Objective::weighted_mse(CMat::from_fn(4, 4, |i, j| {
            if i == j {
                c([0.3, 0.3, 0.26, 0.26][i])
            } else {
                c(0.0)
            }
        }))
        .unwrap(),
        Objective::Capacity,
        Objective::MaxMse,
        Objective::weighted_sum_rate(vec![2.0, 1.5, 1.0, 0.5]).unwrap(),
    ];
    let mut worst = 0.0f64;
    for (idx, objective) in objectives.iter().enumerate() {
        let mut cfg = fig_config(2, objective.clone());
        cfg.sigma_e_sq = 0.0;
        for trial in 0..5 {
            let scen = generate_scenario(&cfg, trial).unwrap();
            let opts = DesignOptions::default();
            let robust = design(&scen.estimated, objective, &opts).unwrap();
            let baseline = nonrobust_design(&scen.estimated, objective, &opts).unwrap();
            let a = robust.internals.unwrap().objective_value;
            let b = baseline.internals.unwrap().objective_value;
            worst = worst.max((a - b).abs());
            assert!(
                (a - b).abs() < 1e-9,
                "objective {idx} trial {trial}: robust {a} vs nonrobust {b}"
            );
        }
    }
    report("criterion 07 (zero-error coincidence)", format!("worst gap {worst:.2e}"));
}

fn paired_records(cfg: &SimConfig) -> Vec<TrialRecord> {
    run_point(cfg, true).expect("point runs")
}

#[test]
fn criterion_08_weighted_mse_trend() {
    let start = Instant::now();
    let w = CMat::from_fn(4, 4, |i, j| {
        if i == j {
            c([0.3, 0.3, 0.26, 0.26][i])
        } else {
            c(0.0)
        }
    });
    let cfg = fig_config(2, Objective::weighted_mse(w).unwrap());
    let grid = [0.002, 0.004, 0.006, 0.008, 0.01];
    let mut detail = String::new();
    for &sigma in &grid {
        let mut point_cfg = cfg.clone();
        point_cfg.sigma_e_sq = sigma;
        let records = paired_records(&point_cfg);
        let diffs: Vec<f64> = records
            .iter()
            .map(|r| {
                let rob = r.robust.expect("robust design succeeded");
                let non = r.nonrobust.expect("nonrobust design succeeded");
                non.weighted_mse_empirical - rob.weighted_mse_empirical
            })
            .collect();
        let (mean, t) = paired_t_stat(&diffs);
        assert!(
            mean > 0.0 && t > 1.645,
            "sigma_e_sq {sigma}: mean gap {mean:.3e}, t {t:.2} (robust must win at 95%)"
        );
        detail.push_str(&format!("{sigma}: t={t:.1} "));
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    report(
        "criterion 08 (weighted-MSE trend, K=2, 200 trials)",
        format!("{detail}, {elapsed:?}"),
    );
}

#[test]
fn criterion_09_sum_rate_gap_widens() {
    let start = Instant::now();
    let cfg = fig_config(3, Objective::Capacity);
    let grid = [0.002, 0.004, 0.006, 0.008, 0.01];
    let mut gaps = Vec::new();
    let mut ses = Vec::new();
    for &sigma in &grid {
        let mut point_cfg = cfg.clone();
        point_cfg.sigma_e_sq = sigma;
        let records = paired_records(&point_cfg);
        let diffs: Vec<f64> = records
            .iter()
            .map(|r| {
                let rob = r.robust.expect("robust design succeeded");
                let non = r.nonrobust.expect("nonrobust design succeeded");
                rob.sum_rate - non.sum_rate
            })
            .collect();
        let (mean, t) = paired_t_stat(&diffs);
        let se = mean / t;
        gaps.push(mean);
        ses.push(se);
    }
    for i in 1..gaps.len() {
        let slack = 1.645 * (ses[i] * ses[i] + ses[i - 1] * ses[i - 1]).sqrt();
        assert!(
            gaps[i] >= gaps[i - 1] - slack,
            "gap fell from {} to {} (slack {slack}) between grid points {} and {}",
            gaps[i - 1],
            gaps[i],
            grid[i - 1],
            grid[i]
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    report(
        "criterion 09 (sum-rate gap monotone, K=3, 200 trials)",
        format!("gaps {gaps:.3?} bits, {elapsed:?}"),
    );
}

#[test]
fn criterion_10_convergence() {
    let res = suite_convergence(0xCA, 1000);
    assert!(res.passed, "{}: worst {} ({})", res.name, res.worst, res.detail);
    assert!(res.worst <= 1e-10);
    report(
        "criterion 10 (water-filling convergence, 1000 instances)",
        format!("max trace increase {:.2e}", res.worst),
    );
}

#[test]
fn criterion_11_kronecker_sampler_moments() {
    // row-major vec of Σ^{1/2} H_w Ψ^{1/2} has covariance Σ ⊗ Ψᵀ
    let sigma = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(1.0),
        (1, 1) => c(0.8),
        (0, 1) => Complex64::new(0.3, 0.2),
        _ => Complex64::new(0.3, -0.2),
    });
    let psi = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => c(0.9),
        (1, 1) => c(1.1),
        (0, 1) => Complex64::new(0.25, -0.15),
        _ => Complex64::new(0.25, 0.15),
    });
    let (m, n) = (2usize, 2usize);
    let mut rng = ChaCha8Rng::seed_from_u64(0xCB);
    let samples = 100_000;
    let mut cov = CMat::zeros(m * n, m * n);
    for _ in 0..samples {
        let s = sample_kronecker_gaussian(m, n, &sigma, &psi, &mut rng).unwrap();
        let vec_rm = CMat::from_fn(m * n, 1, |idx, _| s[(idx / n, idx % n)]);
        cov += &vec_rm * vec_rm.adjoint();
    }
    cov *= c(1.0 / samples as f64);

    let mut expect = CMat::zeros(m * n, m * n);
    for i in 0..m {
        for j in 0..m {
            for p in 0..n {
                for q in 0..n {
                    expect[(i * n + p, j * n + q)] = sigma[(i, j)] * psi[(q, p)];
                }
            }
        }
    }
    let rel = (&cov - &expect).norm() / expect.norm();
    assert!(rel < 0.05, "empirical covariance off by {rel}");
    report(
        "criterion 11 (Kronecker sampler moments, 1e5 samples)",
        format!("rel Frobenius dev {rel:.3}"),
    );
}

#[test]
fn criterion_12_sweep_determinism_across_thread_counts() {
    let mut cfg = fig_config(2, Objective::MaxMse);
    cfg.trials = 8;
    cfg.symbols_per_stream = 100;
    let values = [0.004, 0.008];

    let run_with = |threads: usize| -> String {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let points = sweep(&cfg, SweepAxis::SigmaESq, &values).unwrap();
            render_csv(&points, &cfg.objective)
        })
    };
    let csv1 = run_with(1);
    let csv4 = run_with(4);
    assert_eq!(csv1, csv4, "CSV differs across thread counts");
    assert!(csv1.lines().count() == 5);
    report(
        "criterion 12 (sweep determinism across thread counts)",
        format!("{} identical bytes", csv1.len()),
    );
}
