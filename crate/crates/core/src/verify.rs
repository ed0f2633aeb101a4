//! Property suites and brute-force oracles.
//!
//! Each suite checks one structural guarantee of the design pipeline over a
//! batch of seeded instances and reports its worst residual. The grid-search
//! oracles re-solve small scalar allocation problems by exhaustive search,
//! with their own objective evaluation, so they share no code path with the
//! water-filling solvers they check.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::designer::{
    a_matrices, design, mmse_from_rotation, theta_from_rotations,
    waterfill_capacity, waterfill_maxmse, waterfill_weighted_mse, waterfill_weighted_sumrate,
    DesignOptions, Transceiver,
};
use crate::error::Result;
use crate::linalg::{
    hermitize, ordered_eig_hermitian, ordered_svd, standard_complex_gaussian, CMat,
};
use crate::model::{lmmse_equalizer, mse_matrix, HopModel, NetworkModel};
use crate::objectives::Objective;
use crate::sim::error_covariances_exponential;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Verification depth: `Fast` runs the structural suites, `Full` adds the
/// grid-search oracles and the large convergence batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyLevel {
    Fast,
    Full,
}

/// Options for [`run_all`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub level: VerifyLevel,
    pub seed: u64,
    /// Test hook: corrupt one interior rotation inside the majorization
    /// suite; the suite must then fail.
    pub corrupt_rotations: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { level: VerifyLevel::Fast, seed: 0x5EED, corrupt_rotations: false }
    }
}

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst residual observed, in the suite's own units.
    pub worst: f64,
    pub cases: usize,
    pub detail: String,
}

impl SuiteResult {
    fn pass(name: &'static str, worst: f64, cases: usize) -> Self {
        SuiteResult { name, passed: true, worst, cases, detail: String::new() }
    }

    fn fail(name: &'static str, worst: f64, cases: usize, detail: String) -> Self {
        SuiteResult { name, passed: false, worst, cases, detail }
    }
}

// ── Instance fixtures ────────────────────────────────────────────────

/// Error statistics regime of a generated instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorRegime {
    /// `Σ = Ψ = 0`.
    Perfect,
    /// `Σ ∝ I` (receive side white), `Ψ` exponentially correlated.
    SigmaProportional,
    /// `Ψ ∝ I` (transmit side white), `Σ` exponentially correlated.
    PsiProportional,
    /// Neither proportional: the designer falls back to the bounded
    /// surrogate.
    General,
}

/// Regimes under which the designed structure is exactly optimal.
pub const EXACT_REGIMES: [ErrorRegime; 3] = [
    ErrorRegime::Perfect,
    ErrorRegime::SigmaProportional,
    ErrorRegime::PsiProportional,
];

/// Deterministic random network: node dimensions in `[n_streams, max_dim]`,
/// unit noise, per-hop SNR in `[8, 18]` dB.
pub fn random_network(
    seed: u64,
    k_hops: usize,
    n_streams: usize,
    max_dim: usize,
    regime: ErrorRegime,
) -> NetworkModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<usize> = (0..=k_hops)
        .map(|_| rng.random_range(n_streams..=max_dim.max(n_streams)))
        .collect();
    let sigma_e_sq = rng.random_range(0.01..0.08);
    let mut hops = Vec::with_capacity(k_hops);
    for k in 0..k_hops {
        let (rx, tx) = (dims[k + 1], dims[k]);
        let h_bar = standard_complex_gaussian(rx, tx, &mut rng);
        let (alpha, beta) = match regime {
            ErrorRegime::Perfect => (0.0, 0.0),
            ErrorRegime::SigmaProportional => (0.6, 0.0),
            ErrorRegime::PsiProportional => (0.0, 0.6),
            ErrorRegime::General => (0.5, 0.5),
        };
        let (mut psi, mut sigma) = {
            let (p, _) = error_covariances_exponential(tx, alpha, 0.0, sigma_e_sq).unwrap();
            let (_, s) = error_covariances_exponential(rx, 0.0, beta, sigma_e_sq).unwrap();
            (p, s)
        };
        if regime == ErrorRegime::Perfect {
            psi = CMat::zeros(tx, tx);
            sigma = CMat::zeros(rx, rx);
        }
        let power = 10f64.powf(rng.random_range(8.0..18.0) / 10.0);
        hops.push(HopModel::new(h_bar, sigma, psi, 1.0, power).unwrap());
    }
    NetworkModel::new(hops, n_streams).unwrap()
}

/// Deterministic objective cycling over the four kinds.
pub fn cycle_objective(index: usize, n_streams: usize, seed: u64) -> Objective {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (index as u64).wrapping_mul(0x9E37));
    match index % 4 {
        0 => {
            let b = standard_complex_gaussian(n_streams, n_streams, &mut rng);
            Objective::weighted_mse(hermitize(&(b.adjoint() * &b))).unwrap()
        }
        1 => Objective::Capacity,
        2 => Objective::MaxMse,
        _ => {
            let mut v: Vec<f64> = (0..n_streams).map(|_| rng.random_range(0.2..2.0)).collect();
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            Objective::weighted_sum_rate(v).unwrap()
        }
    }
}

/// Haar-like deterministic random unitary (left factor of a Gaussian SVD).
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMat {
    ordered_svd(&standard_complex_gaussian(n, n, rng)).unwrap().u
}

fn seeded_design(
    seed: u64,
    index: usize,
    k_choices: &[usize],
    regimes: &[ErrorRegime],
) -> Result<(NetworkModel, Objective, Transceiver)> {
    let k = k_choices[index % k_choices.len()];
    let regime = regimes[index % regimes.len()];
    let n_streams = 2 + index % 2;
    let net = random_network(seed.wrapping_add(index as u64), k, n_streams, 4, regime);
    let objective = cycle_objective(index, n_streams, seed ^ 0xABCD);
    let tx = design(&net, &objective, &DesignOptions::default())?;
    Ok((net, objective, tx))
}

// ── Suites ───────────────────────────────────────────────────────────

/// Transmit power of every hop equals its budget after recovery.
pub fn suite_power_closure(seed: u64, n_designs: usize) -> SuiteResult {
    const NAME: &str = "power-closure";
    let regimes = [
        ErrorRegime::Perfect,
        ErrorRegime::SigmaProportional,
        ErrorRegime::PsiProportional,
        ErrorRegime::General,
    ];
    let mut worst = 0.0f64;
    for idx in 0..n_designs {
        let (net, _, tx) = match seeded_design(seed, idx, &[1, 2, 3], &regimes) {
            Ok(v) => v,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        let covs = match crate::model::signal_covariances(&net, &tx.precoders) {
            Ok(v) => v,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        let n = net.n_streams();
        for k in 0..net.n_hops() {
            let r_prev = if k == 0 { CMat::identity(n, n) } else { covs[k - 1].clone() };
            let p = &tx.precoders[k];
            let power = (p * r_prev * p.adjoint()).trace().re;
            let budget = net.hops()[k].power_budget;
            worst = worst.max((power - budget).abs() / budget);
        }
    }
    if worst < 1e-6 {
        SuiteResult::pass(NAME, worst, n_designs)
    } else {
        SuiteResult::fail(NAME, worst, n_designs, "relative power deviation above 1e-6".into())
    }
}

/// Eigenvalues of `Θ` equal the per-stream products `γ_i` (exact regimes).
pub fn suite_gamma_identity(seed: u64, n_designs: usize) -> SuiteResult {
    const NAME: &str = "gamma-identity";
    let mut worst = 0.0f64;
    for idx in 0..n_designs {
        let (_, _, tx) = match seeded_design(seed, idx, &[1, 2, 3], &EXACT_REGIMES) {
            Ok(v) => v,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        let ints = tx.internals.expect("design keeps internals");
        for (l, g) in ints.theta_eigenvalues.iter().zip(&ints.gamma) {
            worst = worst.max((l - g).abs());
        }
    }
    if worst < 1e-8 {
        SuiteResult::pass(NAME, worst, n_designs)
    } else {
        SuiteResult::fail(NAME, worst, n_designs, "eigenvalue/product gap above 1e-8".into())
    }
}

/// `Φ(G) ⪰ Φ(G_LMMSE)` for random equalizer perturbations.
pub fn suite_lmmse_dominance(seed: u64, n_designs: usize, perturbations: usize) -> SuiteResult {
    const NAME: &str = "lmmse-dominance";
    let regimes = [
        ErrorRegime::SigmaProportional,
        ErrorRegime::PsiProportional,
        ErrorRegime::General,
    ];
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    for idx in 0..n_designs {
        let (net, _, tx) = match seeded_design(seed, idx, &[1, 2], &regimes) {
            Ok(v) => v,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        let g_opt = lmmse_equalizer(&net, &tx.precoders).unwrap();
        let phi_opt = mse_matrix(&net, &tx.precoders, &g_opt).unwrap();
        let (rows, cols) = g_opt.shape();
        for _ in 0..perturbations {
            let delta = standard_complex_gaussian(rows, cols, &mut rng) * c(0.5);
            let phi = mse_matrix(&net, &tx.precoders, &(&g_opt + delta)).unwrap();
            let eig = ordered_eig_hermitian(&hermitize(&(&phi - &phi_opt))).unwrap();
            worst = worst.min(*eig.eigenvalues.last().unwrap());
        }
    }
    if worst >= -1e-10 {
        SuiteResult::pass(NAME, worst, n_designs * perturbations)
    } else {
        SuiteResult::fail(NAME, worst, n_designs * perturbations, "Φ(G) - Φ(G_LMMSE) indefinite".into())
    }
}

/// No random unitary replacement of `Q_0` or an interior rotation improves
/// the objective (exact regimes).
pub fn suite_rotation_optimality(seed: u64, n_designs: usize, replacements: usize) -> SuiteResult {
    const NAME: &str = "rotation-optimality";
    let mut worst = 0.0f64; // largest observed improvement
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
    for idx in 0..n_designs {
        let (net, objective, tx) = match seeded_design(seed, idx, &[1, 2, 3], &EXACT_REGIMES) {
            Ok(v) => v,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        let ints = tx.internals.expect("design keeps internals");
        let a_list = a_matrices(&net, &ints.f_mats).unwrap();
        let interior: Vec<CMat> = ints.rotations[1..].to_vec();
        let theta = theta_from_rotations(&a_list, &interior);
        let q0 = &ints.rotations[0];
        let base = objective.matrix_objective(&mmse_from_rotation(&theta, q0)).unwrap();
        let n = net.n_streams();

        for _ in 0..replacements {
            // replace the output rotation
            let q0_rand = random_unitary(n, &mut rng);
            let obj = objective
                .matrix_objective(&mmse_from_rotation(&theta, &q0_rand))
                .unwrap();
            worst = worst.max(base - obj);

            // replace one interior rotation (when one exists)
            if net.n_hops() >= 2 {
                let pick = rng.random_range(0..net.n_hops() - 1);
                let mut modified = interior.clone();
                let dim = modified[pick].nrows();
                modified[pick] = random_unitary(dim, &mut rng);
                let theta_mod = theta_from_rotations(&a_list, &modified);
                let obj = objective
                    .matrix_objective(&mmse_from_rotation(&theta_mod, q0))
                    .unwrap();
                worst = worst.max(base - obj);
            }
        }
    }
    if worst <= 1e-9 {
        SuiteResult::pass(NAME, worst, n_designs * replacements)
    } else {
        SuiteResult::fail(NAME, worst, n_designs * replacements, "a random rotation improved the objective".into())
    }
}

/// Weak majorization: random interior rotations never push any partial sum
/// of `λ(Θ)` above the optimal design's partial sums; with optimal rotations
/// the eigenvalues match `γ` exactly.
pub fn suite_majorization(
    seed: u64,
    n_designs: usize,
    replacements: usize,
    corrupt: bool,
) -> SuiteResult {
    const NAME: &str = "majorization";
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x33);
    for idx in 0..n_designs {
        let (net, _, tx) = match seeded_design(seed, idx, &[2, 3], &EXACT_REGIMES) {
            Ok(v) => v,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        let ints = tx.internals.expect("design keeps internals");
        let a_list = a_matrices(&net, &ints.f_mats).unwrap();
        let mut interior: Vec<CMat> = ints.rotations[1..].to_vec();
        if corrupt {
            // test hook: break the first alignment on purpose
            let dim = interior[0].nrows();
            interior[0] = random_unitary(dim, &mut rng);
        }

        // identity at the (possibly corrupted) rotations
        let theta = theta_from_rotations(&a_list, &interior);
        let eig = ordered_eig_hermitian(&theta).unwrap();
        for (l, g) in eig.eigenvalues.iter().zip(&ints.gamma) {
            worst = worst.max((l - g).abs());
        }

        // partial-sum dominance under random replacements
        for _ in 0..replacements {
            let pick = rng.random_range(0..net.n_hops() - 1);
            let mut modified: Vec<CMat> = ints.rotations[1..].to_vec();
            let dim = modified[pick].nrows();
            modified[pick] = random_unitary(dim, &mut rng);
            let theta_mod = theta_from_rotations(&a_list, &modified);
            let eig_mod = ordered_eig_hermitian(&theta_mod).unwrap();
            let mut sum_mod = 0.0;
            let mut sum_opt = 0.0;
            for i in 0..net.n_streams() {
                sum_mod += eig_mod.eigenvalues[i];
                sum_opt += ints.gamma[i];
                worst = worst.max(sum_mod - sum_opt);
            }
        }
    }
    if worst < 1e-8 {
        SuiteResult::pass(NAME, worst, n_designs * (replacements + 1))
    } else {
        SuiteResult::fail(NAME, worst, n_designs * (replacements + 1), "majorization bound violated".into())
    }
}

/// Every water-filling trace is non-increasing and terminates in bound.
pub fn suite_convergence(seed: u64, instances: usize) -> SuiteResult {
    const NAME: &str = "convergence";
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x44);
    let mut worst = 0.0f64; // largest trace increase
    for idx in 0..instances {
        let k = 1 + idx % 3;
        let n = 2 + idx % 3;
        let gains: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let mut row: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..3.0)).collect();
                row.sort_by(|a, b| b.partial_cmp(a).unwrap());
                row
            })
            .collect();
        let budgets: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..100.0)).collect();
        let alloc = match idx % 4 {
            0 => {
                let mut w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
                w.sort_by(|a, b| b.partial_cmp(a).unwrap());
                waterfill_weighted_mse(&gains, &w, &budgets, 1e-8, 200)
            }
            1 => waterfill_capacity(&gains, &budgets, 1e-8, 200),
            2 => waterfill_maxmse(&gains, &budgets, 1e-8, 200),
            _ => {
                let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..2.0)).collect();
                v.sort_by(|a, b| b.partial_cmp(a).unwrap());
                waterfill_weighted_sumrate(&gains, &v, &budgets, 1e-8, 200)
            }
        };
        let alloc = match alloc {
            Ok(a) => a,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, idx, e.to_string()),
        };
        if alloc.sweeps > 200 {
            return SuiteResult::fail(NAME, f64::NAN, idx, "sweep budget exceeded".into());
        }
        for w in alloc.objective_trace.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    if worst <= 1e-10 {
        SuiteResult::pass(NAME, worst, instances)
    } else {
        SuiteResult::fail(NAME, worst, instances, "objective trace increased".into())
    }
}

// ── Grid-search oracles ──────────────────────────────────────────────

/// Objective evaluation used by the oracles only; deliberately re-derived
/// instead of calling the solver-side formulas.
#[derive(Debug, Clone)]
pub enum OracleObjective {
    WeightedMse(Vec<f64>),
    Capacity,
    MaxMse,
    WeightedSumRate(Vec<f64>),
}

impl OracleObjective {
    pub fn eval(&self, f_sq: &[Vec<f64>], gains: &[Vec<f64>]) -> f64 {
        let n = gains[0].len();
        let gamma: Vec<f64> = (0..n)
            .map(|i| {
                let mut num = 1.0;
                let mut den = 1.0;
                for (fr, hr) in f_sq.iter().zip(gains) {
                    let x = fr[i] * hr[i] * hr[i];
                    num *= x;
                    den *= x + 1.0;
                }
                num / den
            })
            .collect();
        match self {
            OracleObjective::WeightedMse(w) => {
                w.iter().zip(&gamma).map(|(&wi, &g)| wi * (1.0 - g)).sum()
            }
            OracleObjective::Capacity => gamma.iter().map(|&g| (1.0 - g).log2()).sum(),
            OracleObjective::MaxMse => 1.0 - gamma.iter().sum::<f64>() / n as f64,
            OracleObjective::WeightedSumRate(v) => {
                v.iter().zip(&gamma).map(|(&vi, &g)| vi * (1.0 - g).log2()).sum()
            }
        }
    }
}

/// Exhaustive two-stream single-hop search over `f²_1 ∈ [0, P]` with
/// `f²_2 = P - f²_1`; returns the best objective found.
pub fn grid_search_single_hop(
    oracle: &OracleObjective,
    gains: &[f64; 2],
    budget: f64,
    points: usize,
) -> f64 {
    let mut best = f64::INFINITY;
    for s in 0..points {
        let f1 = budget * s as f64 / (points - 1) as f64;
        let f_sq = vec![vec![f1, budget - f1]];
        best = best.min(oracle.eval(&f_sq, &[gains.to_vec()]));
    }
    best
}

/// Alternating per-hop exhaustive search for two-stream multi-hop problems:
/// each sweep re-grids every hop while the others stay fixed, until the
/// objective stops improving.
pub fn grid_search_alternating(
    oracle: &OracleObjective,
    gains: &[Vec<f64>],
    budgets: &[f64],
    points: usize,
    max_sweeps: usize,
) -> f64 {
    let k = gains.len();
    let mut f_sq: Vec<Vec<f64>> = budgets.iter().map(|&p| vec![p / 2.0; 2]).collect();
    let mut best = oracle.eval(&f_sq, gains);
    for _ in 0..max_sweeps {
        let before = best;
        for hop in 0..k {
            let mut local_best = best;
            let mut local_split = f_sq[hop].clone();
            for s in 0..points {
                let f1 = budgets[hop] * s as f64 / (points - 1) as f64;
                f_sq[hop] = vec![f1, budgets[hop] - f1];
                let obj = oracle.eval(&f_sq, gains);
                if obj < local_best {
                    local_best = obj;
                    local_split = f_sq[hop].clone();
                }
            }
            f_sq[hop] = local_split;
            best = local_best;
        }
        if (before - best).abs() <= 1e-12 * before.abs().max(1.0) {
            break;
        }
    }
    best
}

/// Water-filling versus exhaustive search on fixed two-stream instances.
pub fn suite_grid_oracles(_seed: u64) -> SuiteResult {
    const NAME: &str = "grid-oracles";
    let mut worst = 0.0f64;
    let mut cases = 0;

    // single hop, gains (2, 1), unit weights
    {
        let gains = vec![vec![2.0, 1.0]];
        let alloc = waterfill_weighted_mse(&gains, &[1.0, 1.0], &[2.0], 1e-10, 200).unwrap();
        let solver = OracleObjective::WeightedMse(vec![1.0, 1.0]).eval(&alloc.f_sq, &gains);
        let oracle = grid_search_single_hop(
            &OracleObjective::WeightedMse(vec![1.0, 1.0]),
            &[2.0, 1.0],
            2.0,
            2000,
        );
        worst = worst.max((solver - oracle).abs() / oracle.abs());
        cases += 1;
    }

    // two hops, seeded gains, all four objectives
    let gains = vec![vec![1.9, 0.8], vec![1.3, 0.6]];
    let budgets = [2.0, 3.0];
    let oracle_objs = [
        OracleObjective::WeightedMse(vec![1.4, 0.7]),
        OracleObjective::Capacity,
        OracleObjective::MaxMse,
        OracleObjective::WeightedSumRate(vec![2.0, 1.0]),
    ];
    for oracle_obj in &oracle_objs {
        let alloc = match oracle_obj {
            OracleObjective::WeightedMse(w) => {
                waterfill_weighted_mse(&gains, w, &budgets, 1e-10, 200)
            }
            OracleObjective::Capacity => waterfill_capacity(&gains, &budgets, 1e-10, 200),
            OracleObjective::MaxMse => waterfill_maxmse(&gains, &budgets, 1e-10, 200),
            OracleObjective::WeightedSumRate(v) => {
                waterfill_weighted_sumrate(&gains, v, &budgets, 1e-10, 200)
            }
        };
        let alloc = match alloc {
            Ok(a) => a,
            Err(e) => return SuiteResult::fail(NAME, f64::NAN, cases, e.to_string()),
        };
        let solver = oracle_obj.eval(&alloc.f_sq, &gains);
        let oracle = grid_search_alternating(oracle_obj, &gains, &budgets, 200, 40);
        worst = worst.max((solver - oracle).abs() / oracle.abs().max(1e-9));
        cases += 1;
    }

    if worst < 0.01 {
        SuiteResult::pass(NAME, worst, cases)
    } else {
        SuiteResult::fail(NAME, worst, cases, "solver objective off the grid optimum by more than 1%".into())
    }
}

/// Runs the configured suites.
pub fn run_all(cfg: &VerifyConfig) -> Vec<SuiteResult> {
    let full = cfg.level == VerifyLevel::Full;
    let designs = if full { 50 } else { 20 };
    let mut out = vec![
        suite_power_closure(cfg.seed, designs),
        suite_gamma_identity(cfg.seed, designs),
        suite_lmmse_dominance(cfg.seed, if full { 20 } else { 8 }, 100),
        suite_rotation_optimality(cfg.seed, if full { 50 } else { 15 }, 20),
        suite_majorization(cfg.seed, if full { 25 } else { 10 }, 10, cfg.corrupt_rotations),
        suite_convergence(cfg.seed, if full { 1000 } else { 200 }),
    ];
    if full {
        out.push(suite_grid_oracles(cfg.seed));
    }
    out
}
