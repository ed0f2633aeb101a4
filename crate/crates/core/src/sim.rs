//! Seeded Monte Carlo link-level simulation.
//!
//! A trial draws one scenario (estimated channels plus one realization of
//! the estimation errors), designs both the robust and the non-robust
//! transceiver on the *estimated* network, pushes a block of Gray-coded
//! QPSK symbols through the *true* channel chain with fresh noise, and
//! records model-based and empirical metrics for both designs. Trials are
//! independent; every random stream is derived deterministically from
//! `(seed, trial, hop, purpose)`, so results are bit-identical regardless
//! of execution order or thread count.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::designer::{design, nonrobust_design, DesignOptions, Transceiver};
use crate::error::{Error, Result};
use crate::linalg::{
    hermitize, is_hermitian, sample_kronecker_gaussian, standard_complex_gaussian, CMat,
};
use crate::model::{max_diagonal, mse_matrix, rate_from_mmse, weighted_mse, HopModel, NetworkModel};
use crate::objectives::Objective;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Scenario and trial parameters for one simulation campaign.
///
/// Every node carries `n_antennas` antennas; hop `k` transmits with
/// `P_k = σ² · 10^(snr_db[k]/10)` at unit noise variance.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub k_hops: usize,
    pub n_streams: usize,
    pub n_antennas: usize,
    /// Transmit-side error correlation coefficient `α ∈ [0, 1)`.
    pub alpha: f64,
    /// Receive-side error correlation coefficient `β ∈ [0, 1)`.
    pub beta: f64,
    /// Estimation error variance `σ²_e ∈ [0, 1)`.
    pub sigma_e_sq: f64,
    /// Per-hop SNR in dB; length must equal `k_hops`.
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub symbols_per_stream: usize,
    pub seed: u64,
    pub objective: Objective,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_hops == 0 {
            return Err(Error::validation("k_hops must be at least 1"));
        }
        if self.n_streams == 0 || self.n_antennas < self.n_streams {
            return Err(Error::validation(
                "need n_antennas >= n_streams >= 1",
            ));
        }
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("sigma_e_sq", self.sigma_e_sq),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::validation(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.snr_db.len() != self.k_hops {
            return Err(Error::validation(format!(
                "expected {} snr_db entries, got {}",
                self.k_hops,
                self.snr_db.len()
            )));
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("snr_db entries must be finite"));
        }
        if self.trials == 0 {
            return Err(Error::validation("trials must be at least 1"));
        }
        if self.symbols_per_stream == 0 {
            return Err(Error::validation("symbols_per_stream must be at least 1"));
        }
        self.objective.validate(self.n_streams)
    }

    /// Unit noise variance at every node.
    pub fn noise_var(&self) -> f64 {
        1.0
    }

    /// Power budget of hop `k` from its SNR.
    pub fn power_budget(&self, k: usize) -> f64 {
        self.noise_var() * 10f64.powf(self.snr_db[k] / 10.0)
    }
}

// ── Error covariance construction ────────────────────────────────────

/// Exponential correlation model: `Ψ[i,j] = σ²_e α^|i-j|`,
/// `Σ[i,j] = β^|i-j|`. Both are Hermitian PSD for coefficients in `[0, 1)`.
pub fn error_covariances_exponential(
    dim: usize,
    alpha: f64,
    beta: f64,
    sigma_e_sq: f64,
) -> Result<(CMat, CMat)> {
    if dim == 0 {
        return Err(Error::validation("dimension must be at least 1"));
    }
    for (name, v) in [("alpha", alpha), ("beta", beta), ("sigma_e_sq", sigma_e_sq)] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::validation(format!("{name} must lie in [0, 1), got {v}")));
        }
    }
    let psi = CMat::from_fn(dim, dim, |i, j| {
        c(sigma_e_sq * alpha.powi((i as i32 - j as i32).abs()))
    });
    let sigma = CMat::from_fn(dim, dim, |i, j| c(beta.powi((i as i32 - j as i32).abs())));
    Ok((psi, sigma))
}

/// Error covariances induced by pilot-based linear channel estimation with
/// antenna correlations `R_T` (transmit) and `R_R` (receive):
/// `Ψ = R_T`, `Σ = σ²_e (I + σ²_e R_R^{-1})^{-1}`.
pub fn estimation_error_covariances(
    r_t: &CMat,
    r_r: &CMat,
    sigma_e_sq: f64,
) -> Result<(CMat, CMat)> {
    if !is_hermitian(r_t) || !is_hermitian(r_r) {
        return Err(Error::validation("antenna correlation matrices must be Hermitian"));
    }
    if !(sigma_e_sq >= 0.0) || !sigma_e_sq.is_finite() {
        return Err(Error::validation("sigma_e_sq must be finite and >= 0"));
    }
    let m = r_r.nrows();
    let inv_rr = r_r.clone().cholesky().map(|ch| ch.inverse()).ok_or_else(|| {
        Error::IllConditioned { min_eigenvalue: f64::NAN }
    })?;
    let inner = hermitize(&(CMat::identity(m, m) + inv_rr * c(sigma_e_sq)));
    let sigma = inner
        .clone()
        .cholesky()
        .map(|ch| ch.inverse() * c(sigma_e_sq))
        .ok_or(Error::IllConditioned { min_eigenvalue: f64::NAN })?;
    Ok((r_t.clone(), hermitize(&sigma)))
}

// ── Deterministic substreams ─────────────────────────────────────────

const PURPOSE_ESTIMATE: u64 = 0;
const PURPOSE_ERROR: u64 = 1;
const PURPOSE_DATA: u64 = 2;
const PURPOSE_NOISE: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of one random substream. Parallel trial order cannot
/// influence any stream because nothing is shared between substreams.
pub fn substream_seed(master: u64, trial: u64, hop: u64, purpose: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ trial);
    s = splitmix64(s ^ hop);
    s = splitmix64(s ^ purpose);
    s
}

fn substream(cfg: &SimConfig, trial: usize, hop: usize, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(cfg.seed, trial as u64, hop as u64, purpose))
}

// ── Scenario generation ──────────────────────────────────────────────

/// One drawn scenario: the estimated network the designers see and the true
/// channel realizations the symbols propagate through.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub estimated: NetworkModel,
    pub true_channels: Vec<CMat>,
}

/// Draws the scenario of one trial.
///
/// For `σ²_e > 0` the estimated channel is Kronecker Gaussian with row
/// factor `(1-σ²_e)/σ²_e · Σ` and column factor `Ψ`, and the error is drawn
/// independently with `(Σ, Ψ)`, which gives each true-channel entry unit
/// variance. For `σ²_e = 0` the estimate itself is i.i.d. unit variance and
/// the error vanishes.
pub fn generate_scenario(cfg: &SimConfig, trial: usize) -> Result<Scenario> {
    cfg.validate()?;
    let dim = cfg.n_antennas;
    let mut hops = Vec::with_capacity(cfg.k_hops);
    let mut true_channels = Vec::with_capacity(cfg.k_hops);
    for k in 0..cfg.k_hops {
        let (psi, sigma) =
            error_covariances_exponential(dim, cfg.alpha, cfg.beta, cfg.sigma_e_sq)?;
        let mut rng_h = substream(cfg, trial, k, PURPOSE_ESTIMATE);
        let (h_bar, delta) = if cfg.sigma_e_sq > 0.0 {
            let scale = (1.0 - cfg.sigma_e_sq) / cfg.sigma_e_sq;
            let h_bar =
                sample_kronecker_gaussian(dim, dim, &(&sigma * c(scale)), &psi, &mut rng_h)?;
            let mut rng_d = substream(cfg, trial, k, PURPOSE_ERROR);
            let delta = sample_kronecker_gaussian(dim, dim, &sigma, &psi, &mut rng_d)?;
            (h_bar, delta)
        } else {
            let eye = CMat::identity(dim, dim);
            let h_bar = sample_kronecker_gaussian(dim, dim, &eye, &eye, &mut rng_h)?;
            (h_bar, CMat::zeros(dim, dim))
        };
        true_channels.push(&h_bar + &delta);
        hops.push(HopModel::new(h_bar, sigma, psi, cfg.noise_var(), cfg.power_budget(k))?);
    }
    Ok(Scenario { estimated: NetworkModel::new(hops, cfg.n_streams)?, true_channels })
}

// ── QPSK ─────────────────────────────────────────────────────────────

/// Gray-coded unit-energy QPSK: bit 0 selects the sign of the in-phase
/// component, bit 1 the quadrature component.
pub fn qpsk_modulate(bits: &[bool], n_streams: usize, symbols: usize) -> CMat {
    assert_eq!(bits.len(), 2 * n_streams * symbols);
    let a = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(n_streams, symbols, |i, t| {
        let base = 2 * (i * symbols + t);
        let re = if bits[base] { -a } else { a };
        let im = if bits[base + 1] { -a } else { a };
        Complex64::new(re, im)
    })
}

fn qpsk_bit_errors(received: &CMat, bits: &[bool]) -> usize {
    let symbols = received.ncols();
    let mut errors = 0;
    for i in 0..received.nrows() {
        for t in 0..symbols {
            let base = 2 * (i * symbols + t);
            let z = received[(i, t)];
            if (z.re < 0.0) != bits[base] {
                errors += 1;
            }
            if (z.im < 0.0) != bits[base + 1] {
                errors += 1;
            }
        }
    }
    errors
}

// ── Trials ───────────────────────────────────────────────────────────

/// Metrics of one design evaluated within one trial.
#[derive(Debug, Clone, Copy)]
pub struct TrialMetrics {
    /// `Tr(W Φ)` with `Φ` the model MSE matrix of the design's own equalizer
    /// under the true error statistics.
    pub weighted_mse_model: f64,
    /// `Tr(W Φ̂)` with `Φ̂` the sample covariance of the detection errors.
    pub weighted_mse_empirical: f64,
    /// `-log₂ det Φ` of the model MSE matrix.
    pub sum_rate: f64,
    /// Largest diagonal entry of the model MSE matrix.
    pub max_mse: f64,
    /// Bit errors over transmitted bits.
    pub ber: f64,
}

/// Robust and non-robust outcomes of one trial; a failed design leaves
/// `None` and is counted by the aggregation.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub robust: Option<TrialMetrics>,
    pub nonrobust: Option<TrialMetrics>,
}

fn metric_weight(objective: &Objective, n: usize) -> CMat {
    match objective {
        Objective::WeightedMse { w } => w.clone(),
        _ => CMat::identity(n, n),
    }
}

fn evaluate_design(
    tx: &Transceiver,
    scenario: &Scenario,
    w_metric: &CMat,
    data: &CMat,
    bits: &[bool],
    noises: &[CMat],
) -> Result<TrialMetrics> {
    // model metrics under the true error statistics, at the design's own
    // equalizer (for the robust design this is exactly the MMSE matrix)
    let phi = mse_matrix(&scenario.estimated, &tx.precoders, &tx.equalizer)?;
    let weighted_mse_model = weighted_mse(w_metric, &phi)?;
    let sum_rate = rate_from_mmse(&phi)?;
    let max_mse = max_diagonal(&phi);

    // link-level propagation through the true channels
    let symbols = data.ncols();
    let mut x = data.clone();
    for (k, p) in tx.precoders.iter().enumerate() {
        x = &scenario.true_channels[k] * (p * x) + &noises[k];
    }
    let detected = &tx.equalizer * x;
    let err = &detected - data;
    let emp_phi = hermitize(&(&err * err.adjoint())) * c(1.0 / symbols as f64);
    let weighted_mse_empirical = weighted_mse(w_metric, &emp_phi)?;
    let ber = qpsk_bit_errors(&detected, bits) as f64 / bits.len() as f64;

    Ok(TrialMetrics { weighted_mse_model, weighted_mse_empirical, sum_rate, max_mse, ber })
}

/// Runs one seeded trial: scenario, both designs, shared data and noise.
pub fn run_trial(cfg: &SimConfig, trial: usize) -> Result<TrialRecord> {
    let scenario = generate_scenario(cfg, trial)?;
    let n = cfg.n_streams;
    let symbols = cfg.symbols_per_stream;
    let w_metric = metric_weight(&cfg.objective, n);

    let mut rng_data = substream(cfg, trial, 0, PURPOSE_DATA);
    let bits: Vec<bool> = (0..2 * n * symbols)
        .map(|_| rand::Rng::random::<bool>(&mut rng_data))
        .collect();
    let data = qpsk_modulate(&bits, n, symbols);

    // one noise draw per hop, shared by both designs
    let noises: Vec<CMat> = scenario
        .estimated
        .hops()
        .iter()
        .enumerate()
        .map(|(k, hop)| {
            let mut rng = substream(cfg, trial, k, PURPOSE_NOISE);
            standard_complex_gaussian(hop.n_rx(), symbols, &mut rng) * c(hop.noise_var.sqrt())
        })
        .collect();

    let opts = DesignOptions::default();
    let robust = design(&scenario.estimated, &cfg.objective, &opts)
        .and_then(|tx| evaluate_design(&tx, &scenario, &w_metric, &data, &bits, &noises))
        .ok();
    let nonrobust = nonrobust_design(&scenario.estimated, &cfg.objective, &opts)
        .and_then(|tx| evaluate_design(&tx, &scenario, &w_metric, &data, &bits, &noises))
        .ok();
    Ok(TrialRecord { robust, nonrobust })
}

// ── Aggregation and sweeps ───────────────────────────────────────────

/// Sample means and standard errors over the successful trials of one
/// parameter point.
#[derive(Debug, Clone, Copy)]
pub struct AggregateMetrics {
    pub weighted_mse_model: f64,
    pub weighted_mse_empirical: f64,
    pub sum_rate: f64,
    pub max_mse: f64,
    pub ber: f64,
    /// Standard error of the empirical weighted MSE (the reported column).
    pub stderr_wmse: f64,
    pub stderr_rate: f64,
    pub stderr_maxmse: f64,
    pub stderr_ber: f64,
    pub trials_used: usize,
    pub trials_failed: usize,
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates one arm (robust or non-robust) of a list of trial records.
pub fn aggregate(metrics: &[Option<TrialMetrics>]) -> AggregateMetrics {
    let used: Vec<&TrialMetrics> = metrics.iter().flatten().collect();
    let failed = metrics.len() - used.len();
    let col = |f: fn(&TrialMetrics) -> f64| -> Vec<f64> { used.iter().map(|m| f(m)).collect() };
    let (wmse_model, _) = mean_and_stderr(&col(|m| m.weighted_mse_model));
    let (wmse_emp, se_wmse) = mean_and_stderr(&col(|m| m.weighted_mse_empirical));
    let (rate, se_rate) = mean_and_stderr(&col(|m| m.sum_rate));
    let (maxm, se_maxm) = mean_and_stderr(&col(|m| m.max_mse));
    let (ber, se_ber) = mean_and_stderr(&col(|m| m.ber));
    AggregateMetrics {
        weighted_mse_model: wmse_model,
        weighted_mse_empirical: wmse_emp,
        sum_rate: rate,
        max_mse: maxm,
        ber,
        stderr_wmse: se_wmse,
        stderr_rate: se_rate,
        stderr_maxmse: se_maxm,
        stderr_ber: se_ber,
        trials_used: used.len(),
        trials_failed: failed,
    }
}

/// Swept parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    SigmaESq,
    SnrDb,
}

impl SweepAxis {
    pub fn key(&self) -> &'static str {
        match self {
            SweepAxis::SigmaESq => "sigma_e_sq",
            SweepAxis::SnrDb => "snr_db",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigma_e_sq" => Ok(SweepAxis::SigmaESq),
            "snr_db" => Ok(SweepAxis::SnrDb),
            other => Err(Error::validation(format!(
                "unknown sweep axis `{other}` (expected sigma_e_sq or snr_db)"
            ))),
        }
    }

    fn apply(&self, cfg: &SimConfig, value: f64) -> SimConfig {
        let mut out = cfg.clone();
        match self {
            SweepAxis::SigmaESq => out.sigma_e_sq = value,
            SweepAxis::SnrDb => out.snr_db = vec![value; cfg.k_hops],
        }
        out
    }
}

/// Aggregated results of one grid point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub robust: AggregateMetrics,
    pub nonrobust: AggregateMetrics,
}

/// Per-trial records of one grid point, for paired statistics.
pub fn run_point(cfg: &SimConfig, use_threads: bool) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    if use_threads {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect()
    } else {
        (0..cfg.trials).map(|t| run_trial(cfg, t)).collect()
    }
}

/// Runs the grid: one aggregate pair per axis value. Trials execute in the
/// ambient rayon pool; per-trial seeding keeps the output order-independent.
pub fn sweep(cfg: &SimConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::validation("sweep grid must be non-empty"));
    }
    let mut out = Vec::with_capacity(values.len());
    for &value in values {
        let point_cfg = axis.apply(cfg, value);
        let records = run_point(&point_cfg, true)?;
        let robust: Vec<Option<TrialMetrics>> = records.iter().map(|r| r.robust).collect();
        let nonrobust: Vec<Option<TrialMetrics>> = records.iter().map(|r| r.nonrobust).collect();
        out.push(SweepPoint {
            axis_value: value,
            robust: aggregate(&robust),
            nonrobust: aggregate(&nonrobust),
        });
    }
    Ok(out)
}

/// Formats a float with 12 significant digits, locale-independent.
pub fn fmt_sig(x: f64) -> String {
    format!("{:.11e}", x)
}

/// Renders sweep results as CSV. Columns:
/// `axis,objective,design,weighted_mse,sum_rate,max_mse,ber,stderr_wmse,stderr_rate,stderr_maxmse,stderr_ber,trials`.
/// The weighted-MSE column carries the empirical (detected-data) value;
/// sum-rate and MAX-MSE come from the model MSE matrix.
pub fn render_csv(points: &[SweepPoint], objective: &Objective) -> String {
    let mut out = String::from(
        "axis,objective,design,weighted_mse,sum_rate,max_mse,ber,stderr_wmse,stderr_rate,stderr_maxmse,stderr_ber,trials\n",
    );
    for point in points {
        for (label, agg) in [("robust", &point.robust), ("nonrobust", &point.nonrobust)] {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                fmt_sig(point.axis_value),
                objective.name(),
                label,
                fmt_sig(agg.weighted_mse_empirical),
                fmt_sig(agg.sum_rate),
                fmt_sig(agg.max_mse),
                fmt_sig(agg.ber),
                fmt_sig(agg.stderr_wmse),
                fmt_sig(agg.stderr_rate),
                fmt_sig(agg.stderr_maxmse),
                fmt_sig(agg.stderr_ber),
                agg.trials_used,
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base_config(objective: Objective) -> SimConfig {
        SimConfig {
            k_hops: 2,
            n_streams: 2,
            n_antennas: 2,
            alpha: 0.6,
            beta: 0.0,
            sigma_e_sq: 0.01,
            snr_db: vec![20.0, 20.0],
            trials: 4,
            symbols_per_stream: 200,
            seed: 7,
            objective,
        }
    }

    #[test]
    fn exponential_covariances_examples() {
        // α = 0 → Ψ diagonal
        let (psi, _) = error_covariances_exponential(3, 0.0, 0.0, 0.004).unwrap();
        assert!((psi - CMat::identity(3, 3) * c(0.004)).norm() < 1e-15);

        // β = 0 → Σ = I
        let (_, sigma) = error_covariances_exponential(3, 0.5, 0.0, 0.01).unwrap();
        assert!((sigma - CMat::identity(3, 3)).norm() < 1e-15);

        let (psi, _) = error_covariances_exponential(2, 0.6, 0.0, 0.01).unwrap();
        assert!((psi[(0, 1)].re - 0.006).abs() < 1e-15);
        assert!((psi[(0, 0)].re - 0.01).abs() < 1e-15);

        assert!(error_covariances_exponential(2, 1.0, 0.0, 0.01).is_err());
    }

    #[test]
    fn estimation_covariances_examples() {
        let r = CMat::identity(3, 3);
        let (psi, sigma) = estimation_error_covariances(&r, &r, 0.01).unwrap();
        assert!((psi - CMat::identity(3, 3)).norm() < 1e-15);
        assert!((sigma - CMat::identity(3, 3) * c(0.01 / 1.01)).norm() < 1e-12);

        let (_, sigma) = estimation_error_covariances(&r, &r, 0.0).unwrap();
        assert!(sigma.norm() < 1e-15);

        // seeded R_R: Σ Hermitian PD with eigenvalues below σ²_e
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = standard_complex_gaussian(3, 3, &mut rng);
        let r_r = hermitize(&(b.adjoint() * &b)) + CMat::identity(3, 3) * c(0.2);
        let (_, sigma) = estimation_error_covariances(&r, &r_r, 0.05).unwrap();
        let eig = crate::linalg::ordered_eig_hermitian(&sigma).unwrap();
        assert!(*eig.eigenvalues.last().unwrap() > 0.0);
        assert!(eig.eigenvalues[0] < 0.05);
    }

    #[test]
    fn scenario_is_deterministic_and_exact_at_zero_error() {
        let mut cfg = base_config(Objective::MaxMse);
        cfg.sigma_e_sq = 0.0;
        let a = generate_scenario(&cfg, 3).unwrap();
        let b = generate_scenario(&cfg, 3).unwrap();
        for (x, y) in a.true_channels.iter().zip(&b.true_channels) {
            assert_eq!(x, y);
        }
        for (hop, truth) in a.estimated.hops().iter().zip(&a.true_channels) {
            assert_eq!(&hop.h_bar, truth);
        }
    }

    #[test]
    fn scenario_true_channel_unit_variance() {
        let mut cfg = base_config(Objective::MaxMse);
        cfg.k_hops = 1;
        cfg.snr_db = vec![20.0];
        cfg.sigma_e_sq = 0.05;
        cfg.alpha = 0.6;
        cfg.beta = 0.3;
        let trials = 100_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let scen = generate_scenario(&cfg, t).unwrap();
            let h = &scen.true_channels[0];
            acc += h.norm_squared() / (h.nrows() * h.ncols()) as f64;
        }
        let var = acc / trials as f64;
        assert!((var - 1.0).abs() < 0.03, "true-channel entry variance {var}");
    }

    #[test]
    fn qpsk_roundtrip_and_energy() {
        let bits: Vec<bool> = vec![false, false, false, true, true, false, true, true];
        let s = qpsk_modulate(&bits, 1, 4);
        for t in 0..4 {
            assert!((s[(0, t)].norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(qpsk_bit_errors(&s, &bits), 0);
        let flipped: Vec<bool> = bits.iter().map(|b| !b).collect();
        assert_eq!(qpsk_bit_errors(&s, &flipped), 8);
    }

    #[test]
    fn noiseless_identity_link_has_zero_ber() {
        let mut cfg = base_config(Objective::MaxMse);
        cfg.k_hops = 1;
        cfg.n_antennas = 2;
        cfg.sigma_e_sq = 0.0;
        cfg.snr_db = vec![60.0];
        cfg.symbols_per_stream = 1000;
        let record = run_trial(&cfg, 0).unwrap();
        let m = record.robust.expect("design succeeded");
        assert_eq!(m.ber, 0.0);
    }

    #[test]
    fn model_and_empirical_mse_agree_without_estimation_error() {
        let mut cfg = base_config(Objective::MaxMse);
        cfg.sigma_e_sq = 0.0;
        cfg.symbols_per_stream = 10_000;
        cfg.snr_db = vec![15.0, 15.0];
        let record = run_trial(&cfg, 1).unwrap();
        let m = record.robust.expect("design succeeded");
        let rel = (m.weighted_mse_model - m.weighted_mse_empirical).abs() / m.weighted_mse_model;
        assert!(rel < 0.10, "model {} empirical {}", m.weighted_mse_model, m.weighted_mse_empirical);
    }

    #[test]
    fn aggregation_matches_manual_mean() {
        let cfg = base_config(Objective::MaxMse);
        let records = run_point(&cfg, false).unwrap();
        let robust: Vec<Option<TrialMetrics>> = records.iter().map(|r| r.robust).collect();
        let agg = aggregate(&robust);
        let manual: Vec<f64> = robust.iter().flatten().map(|m| m.sum_rate).collect();
        let mean = manual.iter().sum::<f64>() / manual.len() as f64;
        assert!((agg.sum_rate - mean).abs() < 1e-12);
        assert_eq!(agg.trials_used, 4);
        assert_eq!(agg.trials_failed, 0);
    }

    #[test]
    fn sweep_single_point_shape_and_determinism() {
        let cfg = base_config(Objective::MaxMse);
        let points = sweep(&cfg, SweepAxis::SigmaESq, &[0.01]).unwrap();
        assert_eq!(points.len(), 1);
        let csv_a = render_csv(&points, &cfg.objective);
        assert_eq!(csv_a.lines().count(), 3);

        let again = sweep(&cfg, SweepAxis::SigmaESq, &[0.01]).unwrap();
        assert_eq!(csv_a, render_csv(&again, &cfg.objective));
    }

    #[test]
    fn zero_error_trials_coincide() {
        let mut cfg = base_config(Objective::MaxMse);
        cfg.sigma_e_sq = 0.0;
        let record = run_trial(&cfg, 2).unwrap();
        let r = record.robust.unwrap();
        let n = record.nonrobust.unwrap();
        assert!((r.weighted_mse_model - n.weighted_mse_model).abs() < 1e-12);
        assert!((r.sum_rate - n.sum_rate).abs() < 1e-12);
        assert_eq!(r.ber, n.ber);
    }
}
