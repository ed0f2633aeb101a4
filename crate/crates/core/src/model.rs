//! Multi-hop amplify-and-forward signal model.
//!
//! A `K`-hop chain carries `N` data streams from the source through `K-1`
//! relays to the destination. Hop `k` has an estimated channel `H̄_k`
//! (`M_k × N_k`) and a Kronecker-structured estimation error
//! `ΔH_k = Σ_k^{1/2} H_w Ψ_k^{1/2}`. This module evaluates, for a given set
//! of precoders, the received-signal covariance recursion, the data MSE
//! matrix for an arbitrary equalizer, the LMMSE equalizer and the resulting
//! MMSE matrix, together with the scalar metrics derived from them.
//!
//! The per-hop transmit power constraint is an average over the estimation
//! errors; that expectation is already embedded in the trace terms of the
//! covariance recursion, so no additional averaging is performed anywhere.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{hermitize, is_hermitian, ordered_eig_hermitian, validate_finite, CMat};

/// One hop of the relay chain: estimated channel, error covariances, noise
/// level and transmit power budget.
#[derive(Debug, Clone)]
pub struct HopModel {
    /// Estimated channel `H̄` (`M × N_tx`).
    pub h_bar: CMat,
    /// Receive-side (row) error covariance `Σ` (`M × M`, Hermitian PSD).
    pub sigma: CMat,
    /// Transmit-side (column) error covariance `Ψ` (`N_tx × N_tx`, Hermitian PSD).
    pub psi: CMat,
    /// Noise variance at the receiving node, strictly positive.
    pub noise_var: f64,
    /// Average transmit power budget, strictly positive.
    pub power_budget: f64,
}

impl HopModel {
    pub fn new(
        h_bar: CMat,
        sigma: CMat,
        psi: CMat,
        noise_var: f64,
        power_budget: f64,
    ) -> Result<Self> {
        let hop = HopModel { h_bar, sigma, psi, noise_var, power_budget };
        hop.validate()?;
        Ok(hop)
    }

    /// Receive dimension `M`.
    pub fn n_rx(&self) -> usize {
        self.h_bar.nrows()
    }

    /// Transmit dimension `N_tx`.
    pub fn n_tx(&self) -> usize {
        self.h_bar.ncols()
    }

    /// Same hop with the error statistics zeroed (the estimate treated as
    /// exact).
    pub fn perfect_csi(&self) -> HopModel {
        HopModel {
            h_bar: self.h_bar.clone(),
            sigma: CMat::zeros(self.n_rx(), self.n_rx()),
            psi: CMat::zeros(self.n_tx(), self.n_tx()),
            noise_var: self.noise_var,
            power_budget: self.power_budget,
        }
    }

    fn validate(&self) -> Result<()> {
        validate_finite(&self.h_bar)?;
        if self.sigma.shape() != (self.n_rx(), self.n_rx()) {
            return Err(Error::validation("sigma must be M x M"));
        }
        if self.psi.shape() != (self.n_tx(), self.n_tx()) {
            return Err(Error::validation("psi must be N_tx x N_tx"));
        }
        for (name, m) in [("sigma", &self.sigma), ("psi", &self.psi)] {
            validate_finite(m)?;
            if !is_hermitian(m) {
                return Err(Error::validation(format!("{name} must be Hermitian")));
            }
            let eig = ordered_eig_hermitian(m)?;
            let min = *eig.eigenvalues.last().expect("nonempty");
            if min < -1e-10 {
                return Err(Error::NotPsd { min_eigenvalue: min });
            }
        }
        if !(self.noise_var > 0.0) || !self.noise_var.is_finite() {
            return Err(Error::validation("noise_var must be strictly positive"));
        }
        if !(self.power_budget > 0.0) || !self.power_budget.is_finite() {
            return Err(Error::validation("power_budget must be strictly positive"));
        }
        Ok(())
    }
}

/// Ordered chain of hops plus the stream count; immutable after validation.
#[derive(Debug, Clone)]
pub struct NetworkModel {
    hops: Vec<HopModel>,
    n_streams: usize,
}

impl NetworkModel {
    /// Validates per-hop shapes and the chaining rule: the transmit dimension
    /// of hop `k+1` must equal the receive dimension of hop `k`, and every
    /// dimension must be at least the stream count.
    pub fn new(hops: Vec<HopModel>, n_streams: usize) -> Result<Self> {
        if hops.is_empty() {
            return Err(Error::validation("network must have at least one hop"));
        }
        if n_streams == 0 {
            return Err(Error::validation("n_streams must be at least 1"));
        }
        for (k, hop) in hops.iter().enumerate() {
            hop.validate()?;
            if hop.n_rx() < n_streams || hop.n_tx() < n_streams {
                return Err(Error::validation(format!(
                    "hop {k}: dimensions {}x{} below stream count {n_streams}",
                    hop.n_rx(),
                    hop.n_tx()
                )));
            }
        }
        for k in 1..hops.len() {
            if hops[k].n_tx() != hops[k - 1].n_rx() {
                return Err(Error::validation(format!(
                    "hop {k}: transmit dimension {} does not match hop {} receive dimension {}",
                    hops[k].n_tx(),
                    k - 1,
                    hops[k - 1].n_rx()
                )));
            }
        }
        Ok(NetworkModel { hops, n_streams })
    }

    pub fn hops(&self) -> &[HopModel] {
        &self.hops
    }

    pub fn n_hops(&self) -> usize {
        self.hops.len()
    }

    pub fn n_streams(&self) -> usize {
        self.n_streams
    }

    /// Copy of the network with all error covariances zeroed.
    pub fn perfect_csi(&self) -> NetworkModel {
        NetworkModel {
            hops: self.hops.iter().map(HopModel::perfect_csi).collect(),
            n_streams: self.n_streams,
        }
    }

    /// Expected precoder shape for hop `k` (0-based): `N_1 × N` at the source,
    /// `N_k × M_{k-1}` at the relays.
    pub fn precoder_shape(&self, k: usize) -> (usize, usize) {
        let cols = if k == 0 { self.n_streams } else { self.hops[k - 1].n_rx() };
        (self.hops[k].n_tx(), cols)
    }
}

fn validate_precoders(network: &NetworkModel, precoders: &[CMat]) -> Result<()> {
    if precoders.len() != network.n_hops() {
        return Err(Error::validation(format!(
            "expected {} precoders, got {}",
            network.n_hops(),
            precoders.len()
        )));
    }
    for (k, p) in precoders.iter().enumerate() {
        validate_finite(p)?;
        let want = network.precoder_shape(k);
        if p.shape() != want {
            return Err(Error::validation(format!(
                "precoder {k}: expected {}x{}, got {}x{}",
                want.0,
                want.1,
                p.nrows(),
                p.ncols()
            )));
        }
    }
    Ok(())
}

fn real_trace(m: &CMat) -> f64 {
    m.trace().re
}

/// Received-signal covariances `R_{x_1} .. R_{x_K}` from the recursion
/// `R_{x_k} = H̄_k P_k R_{x_{k-1}} P_kᴴ H̄_kᴴ
///            + Tr(P_k R_{x_{k-1}} P_kᴴ Ψ_k) Σ_k + σ²_k I`,
/// starting from `R_{x_0} = I_N`.
pub fn signal_covariances(network: &NetworkModel, precoders: &[CMat]) -> Result<Vec<CMat>> {
    validate_precoders(network, precoders)?;
    let mut out = Vec::with_capacity(network.n_hops());
    let mut r_prev = CMat::identity(network.n_streams(), network.n_streams());
    for (hop, p) in network.hops().iter().zip(precoders) {
        let prp = p * &r_prev * p.adjoint();
        let eff = &hop.h_bar * &prp * hop.h_bar.adjoint();
        let t = real_trace(&(&prp * &hop.psi));
        let m = hop.n_rx();
        let r = hermitize(
            &(eff
                + &hop.sigma * Complex64::new(t, 0.0)
                + CMat::identity(m, m) * Complex64::new(hop.noise_var, 0.0)),
        );
        out.push(r.clone());
        r_prev = r;
    }
    Ok(out)
}

/// Product of the estimated per-hop transfer matrices,
/// `H̄_K P_K ⋯ H̄_1 P_1` (`M_K × N`).
pub fn chain_transfer(network: &NetworkModel, precoders: &[CMat]) -> CMat {
    let mut t = CMat::identity(network.n_streams(), network.n_streams());
    for (hop, p) in network.hops().iter().zip(precoders) {
        t = &hop.h_bar * p * t;
    }
    t
}

/// Data MSE matrix `Φ(G) = G R_{x_K} Gᴴ + I_N - Tᴴ Gᴴ - G T` for an arbitrary
/// equalizer `G`, averaged over data, noise and estimation errors.
pub fn mse_matrix(network: &NetworkModel, precoders: &[CMat], equalizer: &CMat) -> Result<CMat> {
    let covs = signal_covariances(network, precoders)?;
    let n = network.n_streams();
    let m_last = network.hops().last().expect("nonempty").n_rx();
    validate_finite(equalizer)?;
    if equalizer.shape() != (n, m_last) {
        return Err(Error::validation(format!(
            "equalizer must be {n}x{m_last}, got {}x{}",
            equalizer.nrows(),
            equalizer.ncols()
        )));
    }
    let r_last = covs.last().expect("nonempty");
    let t = chain_transfer(network, precoders);
    let gt = equalizer * &t;
    let phi = equalizer * r_last * equalizer.adjoint() + CMat::identity(n, n)
        - gt.adjoint()
        - gt;
    Ok(hermitize(&phi))
}

/// LMMSE equalizer `G = Tᴴ R_{x_K}^{-1}`.
pub fn lmmse_equalizer(network: &NetworkModel, precoders: &[CMat]) -> Result<CMat> {
    let covs = signal_covariances(network, precoders)?;
    let r_last = covs.last().expect("nonempty").clone();
    let t = chain_transfer(network, precoders);
    let chol = r_last.clone().cholesky().ok_or_else(|| {
        let min = ordered_eig_hermitian(&r_last)
            .map(|e| *e.eigenvalues.last().expect("nonempty"))
            .unwrap_or(f64::NAN);
        Error::IllConditioned { min_eigenvalue: min }
    })?;
    Ok(chol.solve(&t).adjoint())
}

/// MMSE matrix `Φ_MMSE = I_N - Tᴴ R_{x_K}^{-1} T`, i.e. the MSE matrix
/// evaluated at the LMMSE equalizer. Eigenvalues lie in `[0, 1]` up to
/// round-off.
pub fn mmse_matrix(network: &NetworkModel, precoders: &[CMat]) -> Result<CMat> {
    let covs = signal_covariances(network, precoders)?;
    let r_last = covs.last().expect("nonempty").clone();
    let t = chain_transfer(network, precoders);
    let n = network.n_streams();
    let chol = r_last.clone().cholesky().ok_or_else(|| {
        let min = ordered_eig_hermitian(&r_last)
            .map(|e| *e.eigenvalues.last().expect("nonempty"))
            .unwrap_or(f64::NAN);
        Error::IllConditioned { min_eigenvalue: min }
    })?;
    let x = chol.solve(&t);
    Ok(hermitize(&(CMat::identity(n, n) - t.adjoint() * x)))
}

/// Sum-rate lower bound `-log₂ det(Φ_MMSE)` in bits.
pub fn sum_rate(network: &NetworkModel, precoders: &[CMat]) -> Result<f64> {
    let phi = mmse_matrix(network, precoders)?;
    rate_from_mmse(&phi)
}

/// Sum-rate from an already computed MMSE matrix.
pub fn rate_from_mmse(phi: &CMat) -> Result<f64> {
    let eig = ordered_eig_hermitian(phi)?;
    let mut rate = 0.0;
    for &l in &eig.eigenvalues {
        if l <= 0.0 {
            return Err(Error::IllConditioned { min_eigenvalue: l });
        }
        rate -= l.log2();
    }
    Ok(rate)
}

/// Weighted MSE `Tr(W Φ)`; the result of a Hermitian product is real up to
/// round-off.
pub fn weighted_mse(w: &CMat, phi: &CMat) -> Result<f64> {
    if w.shape() != phi.shape() || !w.is_square() {
        return Err(Error::validation(format!(
            "weight/MSE shape mismatch: {}x{} vs {}x{}",
            w.nrows(),
            w.ncols(),
            phi.nrows(),
            phi.ncols()
        )));
    }
    let t = (w * phi).trace();
    debug_assert!(
        t.im.abs() <= 1e-9 * t.re.abs().max(1.0),
        "imaginary residual {} in weighted MSE",
        t.im
    );
    Ok(t.re)
}

/// Largest diagonal entry of an MSE matrix (the worst stream).
pub fn max_diagonal(phi: &CMat) -> f64 {
    (0..phi.nrows()).fold(f64::NEG_INFINITY, |acc, i| acc.max(phi[(i, i)].re))
}
