//! The four transceiver design objectives.
//!
//! Every objective is a matrix-increasing function of the MSE matrix, so all
//! four reduce — after the optimal output rotation — to a scalar function
//! `g(γ)` of the per-stream gain products `γ_i`, with `g` decreasing and
//! Schur-concave. Rates use base-2 logarithms throughout.

use crate::error::{Error, Result};
use crate::linalg::{dft_matrix, is_hermitian, ordered_eig_hermitian, CMat};
use crate::model::max_diagonal;

/// Design objective for the unified problem.
///
/// `WeightedMse` and `MaxMse` are minimized MSE criteria; `Capacity` and
/// `WeightedSumRate` maximize rate (internally still expressed as a
/// minimization of `g`).
#[derive(Debug, Clone)]
pub enum Objective {
    /// Minimize `Tr(W Φ)` for a Hermitian PSD weighting matrix `W`.
    WeightedMse { w: CMat },
    /// Maximize the sum-rate lower bound `-log₂|Φ|`.
    Capacity,
    /// Minimize the largest per-stream MSE.
    MaxMse,
    /// Maximize `Σ v_i · rate_(i)` with positive weights sorted
    /// non-increasing; the largest weight attaches to the best stream.
    WeightedSumRate { v: Vec<f64> },
}

impl Objective {
    /// Weighted-MSE objective; validates that `w` is Hermitian PSD.
    pub fn weighted_mse(w: CMat) -> Result<Self> {
        if !is_hermitian(&w) {
            return Err(Error::validation("weighting matrix must be Hermitian"));
        }
        let eig = ordered_eig_hermitian(&w)?;
        let min = *eig.eigenvalues.last().expect("nonempty");
        if min < -1e-10 {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
        Ok(Objective::WeightedMse { w })
    }

    /// Weighted sum-rate objective; weights must be positive and sorted
    /// non-increasing.
    pub fn weighted_sum_rate(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() {
            return Err(Error::validation("rate weights must be non-empty"));
        }
        if v.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::validation("rate weights must be strictly positive"));
        }
        if v.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::validation("rate weights must be sorted non-increasing"));
        }
        Ok(Objective::WeightedSumRate { v })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Objective::WeightedMse { .. } => "weighted_mse",
            Objective::Capacity => "capacity",
            Objective::MaxMse => "max_mse",
            Objective::WeightedSumRate { .. } => "weighted_sum_rate",
        }
    }

    /// Checks the objective parameters against the stream count.
    pub fn validate(&self, n_streams: usize) -> Result<()> {
        match self {
            Objective::WeightedMse { w } => {
                if w.shape() != (n_streams, n_streams) {
                    return Err(Error::validation(format!(
                        "weighting matrix must be {n_streams}x{n_streams}, got {}x{}",
                        w.nrows(),
                        w.ncols()
                    )));
                }
            }
            Objective::WeightedSumRate { v } => {
                if v.len() != n_streams {
                    return Err(Error::validation(format!(
                        "expected {n_streams} rate weights, got {}",
                        v.len()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Output rotation `U_Ω` applied to the eigenbasis of the gain product:
    /// the eigenbasis of `W` for weighted MSE, the DFT for MAX-MSE (it
    /// equalizes the per-stream MSEs), identity otherwise. Capacity admits
    /// any unitary; identity is the deterministic choice.
    pub fn rotation_matrix(&self, n: usize) -> Result<CMat> {
        self.validate(n)?;
        match self {
            Objective::WeightedMse { w } => Ok(ordered_eig_hermitian(w)?.u),
            Objective::Capacity => Ok(CMat::identity(n, n)),
            Objective::MaxMse => dft_matrix(n),
            Objective::WeightedSumRate { .. } => Ok(CMat::identity(n, n)),
        }
    }

    /// Scalar reduction `g(γ)` of the objective.
    ///
    /// `γ` must be sorted non-increasing: the convention pairs the i-th
    /// largest gain product with the i-th largest weight, and sorting is the
    /// caller's responsibility so that mispairing bugs surface here instead
    /// of being masked.
    pub fn scalar_objective(&self, gamma: &[f64]) -> Result<f64> {
        self.validate(gamma.len())?;
        for (i, &g) in gamma.iter().enumerate() {
            if !(g >= -1e-15) || !(g <= 1.0) || !g.is_finite() {
                return Err(Error::Domain(format!("gamma[{i}] = {g} outside [0, 1]")));
            }
        }
        if gamma.windows(2).any(|w| w[1] > w[0] + 1e-12) {
            return Err(Error::validation("gamma must be sorted non-increasing"));
        }
        let log_domain = |g: f64, i: usize| -> Result<f64> {
            if g > 1.0 - 1e-12 {
                return Err(Error::Domain(format!(
                    "gamma[{i}] = {g} too close to 1 for a log objective"
                )));
            }
            Ok((1.0 - g).log2())
        };
        match self {
            Objective::WeightedMse { w } => {
                let eig = ordered_eig_hermitian(w)?;
                Ok(eig
                    .eigenvalues
                    .iter()
                    .zip(gamma)
                    .map(|(&wi, &gi)| wi * (1.0 - gi))
                    .sum())
            }
            Objective::Capacity => {
                let mut acc = 0.0;
                for (i, &g) in gamma.iter().enumerate() {
                    acc += log_domain(g, i)?;
                }
                Ok(acc)
            }
            Objective::MaxMse => {
                let n = gamma.len() as f64;
                Ok(1.0 - gamma.iter().sum::<f64>() / n)
            }
            Objective::WeightedSumRate { v } => {
                let mut acc = 0.0;
                for (i, (&vi, &g)) in v.iter().zip(gamma).enumerate() {
                    acc += vi * log_domain(g, i)?;
                }
                Ok(acc)
            }
        }
    }

    /// Full-matrix form of the objective, evaluated on an MSE matrix. Used to
    /// compare designs whose rotations are not optimal.
    pub fn matrix_objective(&self, phi: &CMat) -> Result<f64> {
        self.validate(phi.nrows())?;
        match self {
            Objective::WeightedMse { w } => crate::model::weighted_mse(w, phi),
            Objective::Capacity => {
                let eig = ordered_eig_hermitian(phi)?;
                let mut acc = 0.0;
                for &l in &eig.eigenvalues {
                    if l <= 0.0 {
                        return Err(Error::IllConditioned { min_eigenvalue: l });
                    }
                    acc += l.log2();
                }
                Ok(acc)
            }
            Objective::MaxMse => Ok(max_diagonal(phi)),
            Objective::WeightedSumRate { v } => {
                // the i-th largest weight pairs with the i-th smallest
                // diagonal entry (the best stream)
                let mut d: Vec<f64> = (0..phi.nrows()).map(|i| phi[(i, i)].re).collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut acc = 0.0;
                for (&vi, &di) in v.iter().zip(&d) {
                    if di <= 0.0 {
                        return Err(Error::IllConditioned { min_eigenvalue: di });
                    }
                    acc += vi * di.log2();
                }
                Ok(acc)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitize, standard_complex_gaussian};
    use num_complex::Complex64;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(values: &[f64]) -> CMat {
        CMat::from_fn(values.len(), values.len(), |i, j| {
            if i == j {
                c(values[i])
            } else {
                c(0.0)
            }
        })
    }

    #[test]
    fn rotation_for_diagonal_weights_is_identity() {
        let obj = Objective::weighted_mse(diag(&[0.3, 0.3, 0.26, 0.26])).unwrap();
        let u = obj.rotation_matrix(4).unwrap();
        assert!((&u - CMat::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn rotation_for_maxmse_is_dft() {
        let u = Objective::MaxMse.rotation_matrix(2).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((u[(0, 0)].re - s).abs() < 1e-12);
        assert!((u[(1, 1)].re + s).abs() < 1e-12);
    }

    #[test]
    fn rotation_diagonalizes_general_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = standard_complex_gaussian(2, 2, &mut rng);
        let svd = crate::linalg::ordered_svd(&b).unwrap();
        let w = &svd.u * diag(&[2.0, 1.0]) * svd.u.adjoint();
        let obj = Objective::weighted_mse(hermitize(&w)).unwrap();
        let u = obj.rotation_matrix(2).unwrap();
        let d = u.adjoint() * hermitize(&w) * &u;
        assert!((d[(0, 0)].re - 2.0).abs() < 1e-10);
        assert!((d[(1, 1)].re - 1.0).abs() < 1e-10);
        assert!(d[(0, 1)].norm() < 1e-10);
    }

    #[test]
    fn scalar_values_match_hand_arithmetic() {
        assert!((Objective::Capacity.scalar_objective(&[0.0, 0.0]).unwrap()).abs() < 1e-12);

        let obj = Objective::weighted_mse(diag(&[0.3, 0.3, 0.26, 0.26])).unwrap();
        let v = obj.scalar_objective(&[0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((v - 1.12).abs() < 1e-12);

        let v = Objective::MaxMse.scalar_objective(&[0.5, 0.5]).unwrap();
        assert!((v - 0.5).abs() < 1e-12);

        let obj = Objective::weighted_sum_rate(vec![2.0, 1.0]).unwrap();
        let v = obj.scalar_objective(&[0.5, 0.0]).unwrap();
        assert!((v + 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_rejects_bad_gamma() {
        assert!(matches!(
            Objective::Capacity.scalar_objective(&[1.0, 0.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            Objective::MaxMse.scalar_objective(&[0.2, 0.4]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn sum_rate_weights_must_be_sorted_positive() {
        assert!(Objective::weighted_sum_rate(vec![1.0, 2.0]).is_err());
        assert!(Objective::weighted_sum_rate(vec![1.0, 0.0]).is_err());
        assert!(Objective::weighted_sum_rate(vec![2.0, 1.0]).is_ok());
    }

    fn random_objectives(n: usize, rng: &mut ChaCha8Rng) -> Vec<Objective> {
        let b = standard_complex_gaussian(n, n, rng);
        let w = hermitize(&(b.adjoint() * &b));
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vec![
            Objective::weighted_mse(w).unwrap(),
            Objective::Capacity,
            Objective::MaxMse,
            Objective::weighted_sum_rate(v).unwrap(),
        ]
    }

    fn sorted_gamma(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut g: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.95)).collect();
        g.sort_by(|a, b| b.partial_cmp(a).unwrap());
        g
    }

    #[test]
    fn g_is_monotone_decreasing() {
        // raising any component of gamma can only lower g
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..1000 {
            let n = 2 + (trial % 3);
            let objs = random_objectives(n, &mut rng);
            let g1 = sorted_gamma(n, &mut rng);
            let mut g2 = g1.clone();
            for x in &mut g2 {
                *x = (*x + rng.random_range(0.0..0.04)).min(0.97);
            }
            g2.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for obj in &objs {
                let v1 = obj.scalar_objective(&g1).unwrap();
                let v2 = obj.scalar_objective(&g2).unwrap();
                assert!(v2 <= v1 + 1e-12, "{} increased: {v1} -> {v2}", obj.name());
            }
        }
    }

    #[test]
    fn g_is_schur_concave_under_robin_hood_transfers() {
        // moving mass from a larger to a smaller entry (keeping the sum and
        // the sorted order) cannot lower g
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for trial in 0..1000 {
            let n = 2 + (trial % 3);
            let objs = random_objectives(n, &mut rng);
            let g1 = sorted_gamma(n, &mut rng);
            let hi = 0;
            let lo = n - 1;
            // keep the vector sorted after the transfer
            let room = ((g1[hi] - g1[lo]) / 2.0)
                .min(g1[hi] - g1[hi + 1])
                .min(g1[lo - 1] - g1[lo])
                .max(0.0);
            let t = rng.random_range(0.0..=1.0) * room;
            let mut g2 = g1.clone();
            g2[hi] -= t;
            g2[lo] += t;
            for obj in &objs {
                let v1 = obj.scalar_objective(&g1).unwrap();
                let v2 = obj.scalar_objective(&g2).unwrap();
                assert!(
                    v2 >= v1 - 1e-10,
                    "{} fell under Robin Hood transfer: {v1} -> {v2}",
                    obj.name()
                );
            }
        }
    }
}
