//! Robust transceiver design pipeline.
//!
//! The joint precoder/equalizer problem is solved structurally:
//!
//! 1. every hop is reduced to an *effective channel*: the estimated channel
//!    whitened on the left by the normalized error covariance `K_F/η` and on
//!    the right by `(α P Ψ + σ² I)^{-1/2}` ([`effective_channel`]);
//! 2. the per-stream power split against the effective gains is found by
//!    cyclic per-hop water-filling with a bisected Lagrange multiplier
//!    ([`waterfill_weighted_mse`] and friends);
//! 3. the inner forwarding factors `F_k` are assembled from the closed-form
//!    structure ([`assemble_f`]), the alignment rotations `Q_0 .. Q_K` from
//!    the ordered SVDs of the composite factors ([`assemble_rotations`]),
//!    and the actual precoders recovered by inverting the variable
//!    substitution ([`recover_precoders`]).
//!
//! The structure is optimal when, per hop, either error covariance is
//! proportional to the identity. Otherwise `K_F/η` is replaced by a constant
//! upper bound and the design is a bounded surrogate; this is surfaced via
//! [`EffectiveHop::surrogate`] and [`DesignInternals::surrogate`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    hermitian_inv_sqrt, hermitize, max_abs, ordered_eig_hermitian, ordered_svd, CMat, OrderedSvd,
};
use crate::model::{lmmse_equalizer, signal_covariances, HopModel, NetworkModel};
use crate::objectives::Objective;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Stopping rule for the iterative water-filling sweep.
#[derive(Debug, Clone, Copy)]
pub struct DesignOptions {
    /// Relative objective change below which the sweep stops.
    pub tol: f64,
    /// Maximum number of outer sweeps over the hops.
    pub max_sweeps: usize,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions { tol: 1e-8, max_sweeps: 200 }
    }
}

/// Whitened form of one hop, the only thing the scalar problem sees.
#[derive(Debug, Clone)]
pub struct EffectiveHop {
    /// Normalized error covariance `K_F/η` (constant under the optimality
    /// conditions), `M × M`.
    pub norm_error_cov: CMat,
    /// Right whitener `(α P Ψ + σ² I)^{-1/2}`, `N_tx × N_tx`.
    pub whitener: CMat,
    /// Whitened channel `(K_F/η)^{-1/2} H̄ (α P Ψ + σ² I)^{-1/2}`.
    pub channel: CMat,
    /// Ordered SVD of [`Self::channel`].
    pub svd: OrderedSvd,
    /// Leading `N` singular values — the effective per-stream gains.
    pub gains: Vec<f64>,
    /// Leading `N` right singular vectors (`N_tx × N`).
    pub input_basis: CMat,
    /// `Tr(Σ)/M`.
    pub alpha: f64,
    /// True when the general-case upper bound replaced `K_F/η`; the design
    /// is then a bounded surrogate rather than the optimum.
    pub surrogate: bool,
}

/// Result of a water-filling run.
#[derive(Debug, Clone)]
pub struct Allocation {
    /// Squared diagonal factors `f²_{k,i}`, one row per hop.
    pub f_sq: Vec<Vec<f64>>,
    /// Final Lagrange multiplier per hop.
    pub multipliers: Vec<f64>,
    /// Objective value before the first sweep and after each sweep.
    pub objective_trace: Vec<f64>,
    /// Number of sweeps actually performed.
    pub sweeps: usize,
}

/// Designed transceiver: per-hop precoders plus the destination equalizer.
#[derive(Debug, Clone)]
pub struct Transceiver {
    /// `P_1 .. P_K`; `P_1` is `N_1 × N`, `P_k` is `N_k × M_{k-1}`.
    pub precoders: Vec<CMat>,
    /// LMMSE equalizer `G` (`N × M_K`).
    pub equalizer: CMat,
    /// Intermediate factors, kept for diagnostics and verification.
    pub internals: Option<DesignInternals>,
}

/// Intermediate quantities of the design pipeline.
#[derive(Debug, Clone)]
pub struct DesignInternals {
    /// Forwarding factors `F_1 .. F_K`.
    pub f_mats: Vec<CMat>,
    /// Rotations `Q_0 .. Q_K`.
    pub rotations: Vec<CMat>,
    /// Diagonal factors `f_{k,i}` (square roots of the allocation).
    pub lambda_f: Vec<Vec<f64>>,
    /// Power normalization scalar `η_k = ξ_k` per hop.
    pub eta_f: Vec<f64>,
    /// Effective per-stream gains `h_{k,i}` per hop.
    pub gains: Vec<Vec<f64>>,
    /// Per-stream gain products `γ_i`.
    pub gamma: Vec<f64>,
    /// Eigenvalues of the composite matrix `Θ`, non-increasing.
    pub theta_eigenvalues: Vec<f64>,
    /// Scalar objective value at the allocation.
    pub objective_value: f64,
    /// Water-filling objective trace.
    pub objective_trace: Vec<f64>,
    /// Water-filling sweeps performed.
    pub sweeps: usize,
    /// Any hop used the general-case bound instead of the exact closed form.
    pub surrogate: bool,
}

// ── Effective channel ────────────────────────────────────────────────

/// Normalized error covariance `K_F/η` of a hop and whether the general-case
/// upper bound had to be used.
///
/// `Σ ∝ I` gives the identity; `Ψ ∝ I` gives
/// `(β P Σ + σ² I)/(α β P + σ²)`; otherwise the constant upper bound
/// `P λ₁(Ψ)/(P λ₁(Ψ) α + σ²) Σ + σ²/(P λ₁(Ψ) α + σ²) I` is substituted and
/// the surrogate flag is set.
pub fn normalized_error_cov(hop: &HopModel) -> Result<(CMat, bool)> {
    let m = hop.n_rx();
    let nt = hop.n_tx();
    let alpha = hop.sigma.trace().re / m as f64;
    let beta = hop.psi.trace().re / nt as f64;
    let eye_m = CMat::identity(m, m);

    let sigma_dev = max_abs(&(&hop.sigma - &eye_m * c(alpha)));
    if sigma_dev <= 1e-10 * max_abs(&hop.sigma).max(1.0) {
        return Ok((eye_m, false));
    }

    let psi_dev = max_abs(&(&hop.psi - CMat::identity(nt, nt) * c(beta)));
    if psi_dev <= 1e-10 * max_abs(&hop.psi).max(1.0) {
        let denom = alpha * beta * hop.power_budget + hop.noise_var;
        let num = &hop.sigma * c(beta * hop.power_budget) + &eye_m * c(hop.noise_var);
        return Ok((hermitize(&(num * c(1.0 / denom))), false));
    }

    // general case: constant upper bound on K_F/η
    let lambda1 = ordered_eig_hermitian(&hop.psi)?.eigenvalues[0].max(0.0);
    let denom = hop.power_budget * lambda1 * alpha + hop.noise_var;
    let bound = &hop.sigma * c(hop.power_budget * lambda1 / denom)
        + &eye_m * c(hop.noise_var / denom);
    Ok((hermitize(&bound), true))
}

/// Whitens a hop and extracts the effective per-stream gains.
pub fn effective_channel(hop: &HopModel, n_streams: usize) -> Result<EffectiveHop> {
    if hop.n_rx() < n_streams || hop.n_tx() < n_streams {
        return Err(Error::validation(format!(
            "hop dimensions {}x{} below stream count {n_streams}",
            hop.n_rx(),
            hop.n_tx()
        )));
    }
    let (norm_error_cov, surrogate) = normalized_error_cov(hop)?;
    let alpha = hop.sigma.trace().re / hop.n_rx() as f64;
    let nt = hop.n_tx();
    let arg = hermitize(
        &(&hop.psi * c(alpha * hop.power_budget) + CMat::identity(nt, nt) * c(hop.noise_var)),
    );
    let whitener = hermitian_inv_sqrt(&arg)?;
    let left = hermitian_inv_sqrt(&norm_error_cov)?;
    let channel = &left * &hop.h_bar * &whitener;
    let svd = ordered_svd(&channel)?;
    let gains = svd.singular_values[..n_streams].to_vec();
    let input_basis = svd.v_leading(n_streams);
    Ok(EffectiveHop {
        norm_error_cov,
        whitener,
        channel,
        svd,
        gains,
        input_basis,
        alpha,
        surrogate,
    })
}

// ── Scalar water-filling ─────────────────────────────────────────────

fn gain_factor(f_sq: f64, h: f64) -> f64 {
    let x = f_sq * h * h;
    x / (x + 1.0)
}

/// Cross-hop coupling `a_{k,i} = Π_{l≠k} f²h²/(f²h² + 1)`; the empty product
/// (single hop) is exactly 1.
fn cross_product(f_sq: &[Vec<f64>], gains: &[Vec<f64>], skip: usize, stream: usize) -> f64 {
    let mut a = 1.0;
    for l in 0..f_sq.len() {
        if l != skip {
            a *= gain_factor(f_sq[l][stream], gains[l][stream]);
        }
    }
    a
}

/// Per-stream gain products `γ_i = Π_k f²h²/(f²h² + 1)` of an allocation.
pub fn gamma_from_allocation(f_sq: &[Vec<f64>], gains: &[Vec<f64>]) -> Vec<f64> {
    let n = gains[0].len();
    (0..n)
        .map(|i| {
            f_sq.iter()
                .zip(gains)
                .map(|(fr, hr)| gain_factor(fr[i], hr[i]))
                .product()
        })
        .collect()
}

enum SolverKind<'a> {
    /// Trace-weighted MSE; also serves MAX-MSE with unit weights.
    WeightedMse { weights: &'a [f64] },
    /// Sum-rate; `rate_weights` adds the per-stream multiplier divisor.
    Rate { rate_weights: Option<&'a [f64]> },
}

impl SolverKind<'_> {
    fn objective(&self, gamma: &[f64]) -> f64 {
        match self {
            SolverKind::WeightedMse { weights } => weights
                .iter()
                .zip(gamma)
                .map(|(&w, &g)| w * (1.0 - g))
                .sum(),
            SolverKind::Rate { rate_weights: None } => {
                gamma.iter().map(|&g| (1.0 - g).log2()).sum()
            }
            SolverKind::Rate { rate_weights: Some(v) } => v
                .iter()
                .zip(gamma)
                .map(|(&vi, &g)| vi * (1.0 - g).log2())
                .sum(),
        }
    }
}

/// Water-filling level for one stream of the weighted-MSE objective.
fn weighted_f_sq(mu: f64, w: f64, a: f64, h: f64) -> f64 {
    if h <= 0.0 || w <= 0.0 || a <= 0.0 {
        return 0.0;
    }
    let h2 = h * h;
    ((w * a / mu).sqrt() / h - 1.0 / h2).max(0.0)
}

/// Water-filling level for one stream of the rate objectives.
///
/// Algebraically identical to the quadratic-root update but written so the
/// `(1-a)` factor cancels: stable for `a → 1` and exact at the single-hop
/// limit `a = 1`, where it reduces to classic water-filling.
fn rate_f_sq(mu_eff: f64, a: f64, h: f64) -> f64 {
    if h <= 0.0 || a <= 0.0 {
        return 0.0;
    }
    let h2 = h * h;
    if a >= 1.0 {
        return (1.0 / mu_eff - 1.0 / h2).max(0.0);
    }
    let eps = 4.0 * (1.0 - a) * a * h2 / mu_eff;
    let root = (a * a + eps).sqrt();
    let x = 2.0 * a * h2 / (mu_eff * (root + a));
    (x - 1.0).max(0.0) / h2
}

/// Bisects the multiplier `mu` on `(0, mu_upper]` so the allocated power sums
/// to `budget`; the sum is continuous and non-increasing in `mu`. Runs until
/// the bracket collapses at 64-bit resolution.
fn bisect_multiplier<F>(allocate: F, budget: f64, mu_upper: f64) -> (f64, Vec<f64>)
where
    F: Fn(f64) -> Vec<f64>,
{
    let total = |row: &[f64]| -> f64 { row.iter().sum() };
    let mut hi = mu_upper;
    let mut lo = mu_upper;
    for _ in 0..4000 {
        lo *= 0.5;
        if total(&allocate(lo)) >= budget || lo < 1e-290 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(&allocate(mid)) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let row_lo = allocate(lo);
    let row_hi = allocate(hi);
    if (total(&row_lo) - budget).abs() <= (total(&row_hi) - budget).abs() {
        (lo, row_lo)
    } else {
        (hi, row_hi)
    }
}

fn validate_waterfill_inputs(gains: &[Vec<f64>], budgets: &[f64]) -> Result<usize> {
    if gains.is_empty() {
        return Err(Error::validation("at least one hop of gains required"));
    }
    let n = gains[0].len();
    if n == 0 {
        return Err(Error::validation("at least one stream required"));
    }
    for (k, row) in gains.iter().enumerate() {
        if row.len() != n {
            return Err(Error::validation("ragged gain matrix"));
        }
        if row.iter().any(|&h| !(h >= 0.0) || !h.is_finite()) {
            return Err(Error::validation(format!("hop {k}: gains must be finite and >= 0")));
        }
        if row.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(Error::validation(format!(
                "hop {k}: gains must be sorted non-increasing"
            )));
        }
        if row.iter().all(|&h| h <= 0.0) {
            return Err(Error::DegenerateChannel { hop: k });
        }
    }
    if budgets.len() != gains.len() {
        return Err(Error::validation("one power budget per hop required"));
    }
    if budgets.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::validation("power budgets must be strictly positive"));
    }
    Ok(n)
}

/// Cyclic per-hop water-filling over a generic solver kind.
fn iterative_waterfill(
    gains: &[Vec<f64>],
    budgets: &[f64],
    kind: SolverKind<'_>,
    tol: f64,
    max_sweeps: usize,
) -> Result<Allocation> {
    let n = validate_waterfill_inputs(gains, budgets)?;
    let k_hops = gains.len();
    if max_sweeps == 0 {
        return Err(Error::validation("max_sweeps must be at least 1"));
    }

    let mut f_sq: Vec<Vec<f64>> = budgets.iter().map(|&p| vec![p / n as f64; n]).collect();
    let mut multipliers = vec![f64::NAN; k_hops];
    let mut obj_prev = kind.objective(&gamma_from_allocation(&f_sq, gains));
    let mut trace = vec![obj_prev];
    let mut sweeps = max_sweeps;

    for sweep in 1..=max_sweeps {
        for k in 0..k_hops {
            let a: Vec<f64> = (0..n).map(|i| cross_product(&f_sq, gains, k, i)).collect();
            let h = &gains[k];
            // highest multiplier at which any stream still takes power
            let mu_upper = match &kind {
                SolverKind::WeightedMse { weights } => (0..n)
                    .map(|i| weights[i] * a[i] * h[i] * h[i])
                    .fold(0.0f64, f64::max),
                SolverKind::Rate { rate_weights } => (0..n)
                    .filter(|&i| a[i] > 0.0)
                    .map(|i| rate_weights.map_or(1.0, |v| v[i]) * h[i] * h[i])
                    .fold(0.0f64, f64::max),
            };
            if mu_upper <= 0.0 {
                return Err(Error::DegenerateChannel { hop: k });
            }
            let (mu, row) = match &kind {
                SolverKind::WeightedMse { weights } => bisect_multiplier(
                    |mu| (0..n).map(|i| weighted_f_sq(mu, weights[i], a[i], h[i])).collect(),
                    budgets[k],
                    mu_upper,
                ),
                SolverKind::Rate { rate_weights } => bisect_multiplier(
                    |mu| {
                        (0..n)
                            .map(|i| {
                                let mu_eff = rate_weights.map_or(mu, |v| mu / v[i]);
                                rate_f_sq(mu_eff, a[i], h[i])
                            })
                            .collect()
                    },
                    budgets[k],
                    mu_upper,
                ),
            };
            multipliers[k] = mu;
            f_sq[k] = row;
        }
        let obj = kind.objective(&gamma_from_allocation(&f_sq, gains));
        trace.push(obj);
        if (obj_prev - obj).abs() <= tol * obj_prev.abs().max(1e-300) {
            sweeps = sweep;
            break;
        }
        obj_prev = obj;
    }

    for (k, row) in f_sq.iter().enumerate() {
        let total: f64 = row.iter().sum();
        if (total - budgets[k]).abs() > 1e-8 * budgets[k] {
            return Err(Error::InternalConsistency(format!(
                "hop {k} allocation sums to {total:.12e}, budget {:.12e}",
                budgets[k]
            )));
        }
    }
    Ok(Allocation { f_sq, multipliers, objective_trace: trace, sweeps })
}

/// Minimizes `Σ w_i (1 - γ_i)`; `w` pairs with the sorted gains stream by
/// stream.
pub fn waterfill_weighted_mse(
    gains: &[Vec<f64>],
    w: &[f64],
    budgets: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Allocation> {
    let n = gains.first().map_or(0, Vec::len);
    if w.len() != n {
        return Err(Error::validation("one MSE weight per stream required"));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::validation("MSE weights must be finite and >= 0"));
    }
    iterative_waterfill(gains, budgets, SolverKind::WeightedMse { weights: w }, tol, max_sweeps)
}

/// Maximizes the sum rate `Σ -log₂(1 - γ_i)`.
pub fn waterfill_capacity(
    gains: &[Vec<f64>],
    budgets: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Allocation> {
    iterative_waterfill(gains, budgets, SolverKind::Rate { rate_weights: None }, tol, max_sweeps)
}

/// Minimizes the worst per-stream MSE: the weighted-MSE solver with unit
/// weights (the output rotation equalizes the streams afterwards).
pub fn waterfill_maxmse(
    gains: &[Vec<f64>],
    budgets: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Allocation> {
    let n = gains.first().map_or(0, Vec::len);
    waterfill_weighted_mse(gains, &vec![1.0; n], budgets, tol, max_sweeps)
}

/// Maximizes `Σ v_i · rate_i` with per-stream weights `v` sorted
/// non-increasing; stream `i` sees the effective multiplier `μ_k / v_i`.
pub fn waterfill_weighted_sumrate(
    gains: &[Vec<f64>],
    v: &[f64],
    budgets: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Allocation> {
    let n = gains.first().map_or(0, Vec::len);
    if v.len() != n {
        return Err(Error::validation("one rate weight per stream required"));
    }
    if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::validation("rate weights must be strictly positive"));
    }
    if v.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::validation("rate weights must be sorted non-increasing"));
    }
    iterative_waterfill(gains, budgets, SolverKind::Rate { rate_weights: Some(v) }, tol, max_sweeps)
}

// ── Assembly ─────────────────────────────────────────────────────────

/// Builds the forwarding factor
/// `F = √ξ · (α P Ψ + σ² I)^{-1/2} · V_N · Λ_F · [I_N 0]`
/// for one hop, returning `(F, ξ)`.
///
/// The scaling `ξ` is chosen so that the recomputed normalization
/// `η = α Tr(F Fᴴ Ψ) + σ²` equals `ξ` and `Tr(F Fᴴ)` lands exactly on the
/// power budget; both identities are checked and a violation reports an
/// internal inconsistency.
pub fn assemble_f(
    hop: &HopModel,
    eff: &EffectiveHop,
    lambda_f: &[f64],
    out_cols: usize,
) -> Result<(CMat, f64)> {
    let n = lambda_f.len();
    if eff.input_basis.ncols() != n {
        return Err(Error::validation(format!(
            "expected {} diagonal factors, got {n}",
            eff.input_basis.ncols()
        )));
    }
    if out_cols < n {
        return Err(Error::validation("output column count below stream count"));
    }
    if lambda_f.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::validation("diagonal factors must be finite and >= 0"));
    }

    let wpw = hermitize(&(&eff.whitener * &hop.psi * &eff.whitener));
    let t = eff.input_basis.adjoint() * wpw * &eff.input_basis;
    let coupling: f64 = (0..n).map(|i| t[(i, i)].re * lambda_f[i] * lambda_f[i]).sum();
    let denom = 1.0 - eff.alpha * coupling;
    if denom <= 0.0 {
        return Err(Error::InfeasibleStructure(format!(
            "nonpositive power-normalization denominator {denom:.3e}"
        )));
    }
    let xi = hop.noise_var / denom;

    let lam = CMat::from_fn(n, n, |i, j| if i == j { c(lambda_f[i]) } else { c(0.0) });
    let core = &eff.whitener * &eff.input_basis * lam * c(xi.sqrt());
    let mut f = CMat::zeros(hop.n_tx(), out_cols);
    f.view_mut((0, 0), (hop.n_tx(), n)).copy_from(&core);

    let ff = &f * f.adjoint();
    let power = ff.trace().re;
    let budget = hop.power_budget;
    if (power - budget).abs() > 1e-6 * budget {
        return Err(Error::InternalConsistency(format!(
            "forwarding factor power {power:.12e} deviates from budget {budget:.12e}"
        )));
    }
    let eta = eff.alpha * (&ff * &hop.psi).trace().re + hop.noise_var;
    if (eta - xi).abs() > 1e-8 * xi.abs() {
        return Err(Error::InternalConsistency(format!(
            "recomputed normalization {eta:.12e} deviates from closed form {xi:.12e}"
        )));
    }
    Ok((f, xi))
}

/// `K_F = Tr(F Fᴴ Ψ) Σ + σ² I` for a hop's assembled factor.
fn k_f_matrix(hop: &HopModel, f: &CMat) -> CMat {
    let t = (&(f * f.adjoint()) * &hop.psi).trace().re;
    let m = hop.n_rx();
    hermitize(&(&hop.sigma * c(t) + CMat::identity(m, m) * c(hop.noise_var)))
}

/// Composite per-hop factors `A_k = Π_k^{-1/2} K_F^{-1/2} H̄_k F_k` with
/// `Π_k = K_F^{-1/2} H̄ F Fᴴ H̄ᴴ K_F^{-1/2} + I`.
pub fn a_matrices(network: &NetworkModel, f_mats: &[CMat]) -> Result<Vec<CMat>> {
    if f_mats.len() != network.n_hops() {
        return Err(Error::validation("one forwarding factor per hop required"));
    }
    let mut out = Vec::with_capacity(f_mats.len());
    for (hop, f) in network.hops().iter().zip(f_mats) {
        let kf = k_f_matrix(hop, f);
        let kf_inv_sqrt = hermitian_inv_sqrt(&kf)?;
        let hf = &kf_inv_sqrt * &hop.h_bar * f;
        let m = hop.n_rx();
        let pi = hermitize(&(&hf * hf.adjoint() + CMat::identity(m, m)));
        let pi_inv_sqrt = hermitian_inv_sqrt(&pi)?;
        out.push(&pi_inv_sqrt * &hf);
    }
    Ok(out)
}

/// Composite matrix `Θ = Cᴴ C` with `C = Q_K A_K ⋯ Q_1 A_1` for arbitrary
/// interior rotations (used both for assembly and for checking that any
/// other rotation choice is weakly dominated).
pub fn theta_from_rotations(a_list: &[CMat], interior: &[CMat]) -> CMat {
    assert_eq!(a_list.len(), interior.len());
    let mut acc = &interior[0] * &a_list[0];
    for k in 1..a_list.len() {
        acc = &interior[k] * &a_list[k] * acc;
    }
    hermitize(&(acc.adjoint() * &acc))
}

/// MSE matrix induced by an output rotation: `I - Q₀ᴴ Θ Q₀`.
pub fn mmse_from_rotation(theta: &CMat, q0: &CMat) -> CMat {
    let n = q0.nrows();
    hermitize(&(CMat::identity(n, n) - q0.adjoint() * theta * q0))
}

/// Alignment rotations `Q_0 .. Q_K`.
#[derive(Debug, Clone)]
pub struct Rotations {
    /// Output rotation `Q_0 = U_Θ U_Ωᴴ`.
    pub q0: CMat,
    /// `Q_1 .. Q_K`; `Q_k = V_{A_{k+1}} U_{A_k}ᴴ`, `Q_K = I`.
    pub interior: Vec<CMat>,
    /// Composite matrix `Θ` at the optimal interior rotations.
    pub theta: CMat,
    /// Its eigenvalues, non-increasing.
    pub theta_eigenvalues: Vec<f64>,
}

/// Aligns consecutive hops (interior rotations) and matches the output
/// eigenbasis to the objective's rotation.
pub fn assemble_rotations(
    network: &NetworkModel,
    objective: &Objective,
    f_mats: &[CMat],
) -> Result<Rotations> {
    let a_list = a_matrices(network, f_mats)?;
    let svds: Vec<OrderedSvd> = a_list
        .iter()
        .map(ordered_svd)
        .collect::<Result<_>>()?;
    let k_hops = a_list.len();
    let mut interior = Vec::with_capacity(k_hops);
    for k in 0..k_hops - 1 {
        interior.push(&svds[k + 1].v * svds[k].u.adjoint());
    }
    let m_last = network.hops().last().expect("nonempty").n_rx();
    interior.push(CMat::identity(m_last, m_last));

    let theta = theta_from_rotations(&a_list, &interior);
    let eig = ordered_eig_hermitian(&theta)?;
    let u_omega = objective.rotation_matrix(network.n_streams())?;
    let q0 = &eig.u * u_omega.adjoint();
    Ok(Rotations { q0, interior, theta, theta_eigenvalues: eig.eigenvalues })
}

/// Inverts the variable substitution to obtain the actual precoders, then
/// cross-checks the transmit power of every hop against its budget. The
/// power closure exercises the whole substitution chain, so a violation is
/// reported as an internal inconsistency rather than silently accepted.
pub fn recover_precoders(
    network: &NetworkModel,
    f_mats: &[CMat],
    rotations: &Rotations,
) -> Result<(Vec<CMat>, CMat)> {
    let hops = network.hops();
    let mut precoders = Vec::with_capacity(hops.len());
    precoders.push(&f_mats[0] * &rotations.q0);
    for k in 1..hops.len() {
        let prev = &hops[k - 1];
        let kf = k_f_matrix(prev, &f_mats[k - 1]);
        let kf_inv_sqrt = hermitian_inv_sqrt(&kf)?;
        let hf = &kf_inv_sqrt * &prev.h_bar * &f_mats[k - 1];
        let m = prev.n_rx();
        let pi = hermitize(&(&hf * hf.adjoint() + CMat::identity(m, m)));
        let pi_inv_sqrt = hermitian_inv_sqrt(&pi)?;
        precoders.push(&f_mats[k] * &rotations.interior[k - 1] * pi_inv_sqrt * kf_inv_sqrt);
    }

    let covs = signal_covariances(network, &precoders)?;
    let n = network.n_streams();
    for k in 0..hops.len() {
        let r_prev = if k == 0 { CMat::identity(n, n) } else { covs[k - 1].clone() };
        let p = &precoders[k];
        let tx_power = (p * r_prev * p.adjoint()).trace().re;
        let budget = hops[k].power_budget;
        if (tx_power - budget).abs() > 1e-6 * budget {
            return Err(Error::InternalConsistency(format!(
                "hop {k} transmit power {tx_power:.12e} deviates from budget {budget:.12e}"
            )));
        }
    }
    let equalizer = lmmse_equalizer(network, &precoders)?;
    Ok((precoders, equalizer))
}

// ── Top-level pipeline ───────────────────────────────────────────────

/// Designs the robust transceiver for the given network and objective.
pub fn design(
    network: &NetworkModel,
    objective: &Objective,
    options: &DesignOptions,
) -> Result<Transceiver> {
    let n = network.n_streams();
    objective.validate(n)?;

    let effs: Vec<EffectiveHop> = network
        .hops()
        .iter()
        .map(|h| effective_channel(h, n))
        .collect::<Result<_>>()?;
    let gains: Vec<Vec<f64>> = effs.iter().map(|e| e.gains.clone()).collect();
    let budgets: Vec<f64> = network.hops().iter().map(|h| h.power_budget).collect();

    let alloc = match objective {
        Objective::WeightedMse { w } => {
            let eig = ordered_eig_hermitian(w)?;
            let weights: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
            waterfill_weighted_mse(&gains, &weights, &budgets, options.tol, options.max_sweeps)?
        }
        Objective::Capacity => {
            waterfill_capacity(&gains, &budgets, options.tol, options.max_sweeps)?
        }
        Objective::MaxMse => waterfill_maxmse(&gains, &budgets, options.tol, options.max_sweeps)?,
        Objective::WeightedSumRate { v } => {
            waterfill_weighted_sumrate(&gains, v, &budgets, options.tol, options.max_sweeps)?
        }
    };

    let lambda_f: Vec<Vec<f64>> = alloc
        .f_sq
        .iter()
        .map(|row| row.iter().map(|&x| x.sqrt()).collect())
        .collect();
    let mut f_mats = Vec::with_capacity(network.n_hops());
    let mut eta_f = Vec::with_capacity(network.n_hops());
    for k in 0..network.n_hops() {
        let out_cols = network.precoder_shape(k).1;
        let (f, xi) = assemble_f(&network.hops()[k], &effs[k], &lambda_f[k], out_cols)?;
        f_mats.push(f);
        eta_f.push(xi);
    }

    let rotations = assemble_rotations(network, objective, &f_mats)?;
    let (precoders, equalizer) = recover_precoders(network, &f_mats, &rotations)?;

    let gamma = gamma_from_allocation(&alloc.f_sq, &gains);
    let objective_value = objective.scalar_objective(&gamma)?;

    let mut all_rotations = Vec::with_capacity(network.n_hops() + 1);
    all_rotations.push(rotations.q0.clone());
    all_rotations.extend(rotations.interior.iter().cloned());

    Ok(Transceiver {
        precoders,
        equalizer,
        internals: Some(DesignInternals {
            f_mats,
            rotations: all_rotations,
            lambda_f,
            eta_f,
            gains,
            gamma,
            theta_eigenvalues: rotations.theta_eigenvalues,
            objective_value,
            objective_trace: alloc.objective_trace,
            sweeps: alloc.sweeps,
            surrogate: effs.iter().any(|e| e.surrogate),
        }),
    })
}

/// Baseline that treats the estimated channels as exact: the design runs on
/// a copy of the network with both error covariances zeroed. Evaluating the
/// result under the true error statistics is the caller's responsibility.
pub fn nonrobust_design(
    network: &NetworkModel,
    objective: &Objective,
    options: &DesignOptions,
) -> Result<Transceiver> {
    design(&network.perfect_csi(), objective, options)
}
