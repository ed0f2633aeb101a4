//! Deterministic complex dense linear algebra.
//!
//! Everything downstream (channel whitening, rotation alignment, Monte Carlo
//! sampling) depends on decompositions with *fixed* conventions:
//!
//! - singular values and eigenvalues are returned in non-increasing order;
//! - left/right factors are full square unitary matrices (thin factors are
//!   completed to a full orthonormal basis);
//! - each factor column is gauge-fixed: its largest-magnitude entry is made
//!   real and positive (ties resolved to the lowest row index).
//!
//! With these conventions identical inputs produce bit-identical outputs,
//! which makes assembled designs reproducible across runs and thread counts.
//! Repeated singular values keep a deterministic but otherwise arbitrary
//! ordering; callers must not rely on the gauge inside a degenerate subspace.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Dense complex double-precision matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// Tolerance for accepting a matrix as Hermitian (relative to entry scale).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_CLIP, 0)` are clipped to zero; below is an error.
const PSD_CLIP: f64 = 1e-12;
/// Smallest eigenvalue accepted when an inverse square root is requested.
const PD_MIN_EIG: f64 = 1e-12;

/// Singular value decomposition `A = U Σ Vᴴ` with `U`, `V` square unitary and
/// the singular values sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct OrderedSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

impl OrderedSvd {
    /// Rebuilds the decomposed matrix from the factors.
    pub fn reconstruct(&self) -> CMat {
        let (m, n) = (self.u.nrows(), self.v.nrows());
        let mut sigma = CMat::zeros(m, n);
        for (i, s) in self.singular_values.iter().enumerate() {
            sigma[(i, i)] = Complex64::new(*s, 0.0);
        }
        &self.u * sigma * self.v.adjoint()
    }

    /// First `n` columns of `v` (the dominant right singular subspace).
    pub fn v_leading(&self, n: usize) -> CMat {
        self.v.columns(0, n).into_owned()
    }
}

/// Eigendecomposition `A = U diag(λ) Uᴴ` of a Hermitian matrix with the
/// eigenvalues sorted in non-increasing order.
#[derive(Debug, Clone)]
pub struct OrderedEig {
    pub u: CMat,
    pub eigenvalues: Vec<f64>,
}

impl OrderedEig {
    pub fn reconstruct(&self) -> CMat {
        let d = DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)),
        );
        &self.u * CMat::from_diagonal(&d) * self.u.adjoint()
    }
}

// ── Validation helpers ───────────────────────────────────────────────

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn validate_finite(a: &CMat) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::validation("matrix must have at least one row and column"));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::validation("matrix contains non-finite entries"));
    }
    Ok(())
}

/// Largest entrywise deviation between `a` and `aᴴ`.
pub fn asymmetry(a: &CMat) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in i..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn is_hermitian(a: &CMat) -> bool {
    a.is_square() && asymmetry(a) <= HERMITIAN_TOL * max_abs(a).max(1.0)
}

fn check_hermitian(a: &CMat) -> Result<()> {
    if !a.is_square() {
        return Err(Error::validation(format!(
            "expected a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let worst = asymmetry(a);
    if worst > HERMITIAN_TOL * max_abs(a).max(1.0) {
        return Err(Error::NotHermitian { max_asymmetry: worst });
    }
    Ok(())
}

/// `(A + Aᴴ)/2`, suppressing asymmetric round-off before eigenanalysis.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

// ── Decompositions ───────────────────────────────────────────────────

/// Eigendecomposition of a Hermitian matrix with non-increasing eigenvalues
/// and gauge-fixed eigenvector columns.
pub fn ordered_eig_hermitian(a: &CMat) -> Result<OrderedEig> {
    validate_finite(a)?;
    check_hermitian(a)?;
    let sym = nalgebra::SymmetricEigen::try_new(hermitize(a), f64::EPSILON, 10_000)
        .ok_or(Error::Numerical("Hermitian eigendecomposition did not converge"))?;
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sym.eigenvalues[j].partial_cmp(&sym.eigenvalues[i]).unwrap());
    let mut u = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &sym.eigenvectors.column(src));
        vals.push(sym.eigenvalues[src]);
    }
    for j in 0..n {
        phase_fix_column(&mut u, j);
    }
    Ok(OrderedEig { u, eigenvalues: vals })
}

/// Full SVD with non-increasing singular values, square unitary factors and
/// gauge-fixed columns. The paired phase fix leaves `U Σ Vᴴ` unchanged.
pub fn ordered_svd(a: &CMat) -> Result<OrderedSvd> {
    validate_finite(a)?;
    let (m, n) = a.shape();
    let r = m.min(n);
    let svd = a
        .clone()
        .try_svd(true, true, f64::EPSILON, 10_000)
        .ok_or(Error::Numerical("SVD did not converge"))?;
    let u_thin = svd.u.expect("u requested");
    let v_thin = svd.v_t.expect("v_t requested").adjoint();

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());

    let mut u = CMat::zeros(m, m);
    let mut v = CMat::zeros(n, n);
    let mut vals = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &u_thin.column(src));
        v.set_column(dst, &v_thin.column(src));
        vals.push(svd.singular_values[src]);
    }
    complete_orthonormal(&mut u, r)?;
    complete_orthonormal(&mut v, r)?;

    // Joint gauge fix on paired columns, independent fix on completed ones.
    for j in 0..r {
        let corr = phase_fix_column(&mut u, j);
        scale_column(&mut v, j, corr);
    }
    for j in r..m {
        phase_fix_column(&mut u, j);
    }
    for j in r..n {
        phase_fix_column(&mut v, j);
    }
    Ok(OrderedSvd { u, singular_values: vals, v })
}

/// Hermitian square root of a PSD matrix: returns `S` with `S S = A`.
///
/// Slightly negative eigenvalues (round-off on a PSD input) are clipped to
/// zero; anything below `-1e-12` is rejected.
pub fn hermitian_sqrt(a: &CMat) -> Result<CMat> {
    let eig = ordered_eig_hermitian(a)?;
    let mut vals = eig.eigenvalues.clone();
    for v in &mut vals {
        if *v < -PSD_CLIP {
            return Err(Error::NotPsd { min_eigenvalue: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&x| Complex64::new(x.sqrt(), 0.0)));
    Ok(hermitize(&(&eig.u * CMat::from_diagonal(&d) * eig.u.adjoint())))
}

/// Hermitian inverse square root of a PD matrix: returns `T` with `T A T = I`.
pub fn hermitian_inv_sqrt(a: &CMat) -> Result<CMat> {
    let eig = ordered_eig_hermitian(a)?;
    let min = *eig.eigenvalues.last().expect("nonempty");
    if min <= PD_MIN_EIG {
        return Err(Error::IllConditioned { min_eigenvalue: min });
    }
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&x| Complex64::new(1.0 / x.sqrt(), 0.0)),
    );
    Ok(hermitize(&(&eig.u * CMat::from_diagonal(&d) * eig.u.adjoint())))
}

/// Unitary DFT matrix `Q[m, l] = exp(-i 2π m l / n) / √n`.
///
/// Conjugating any real diagonal by `Q` equalizes the diagonal: every entry
/// of `Q D Qᴴ` equals `trace(D)/n`.
pub fn dft_matrix(n: usize) -> Result<CMat> {
    if n == 0 {
        return Err(Error::validation("DFT size must be at least 1"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(CMat::from_fn(n, n, |m, l| {
        let angle = -2.0 * PI * ((m * l) % n) as f64 / n as f64;
        Complex64::from_polar(scale, angle)
    }))
}

// ── Sampling ─────────────────────────────────────────────────────────

/// Matrix of i.i.d. circularly-symmetric complex Gaussian entries with unit
/// total variance (real and imaginary parts each of variance 1/2). Entries
/// are drawn in row-major order so the stream layout is part of the contract.
pub fn standard_complex_gaussian<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> CMat {
    let mut out = CMat::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out[(i, j)] = Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2);
        }
    }
    out
}

/// Draws `Σ^{1/2} H_w Ψ^{1/2}` where `H_w` is an i.i.d. unit-variance complex
/// Gaussian matrix, `row_cov = Σ` (m×m) and `col_cov = Ψ` (n×n).
///
/// The row-major vectorization of the sample has covariance `Σ ⊗ Ψᵀ`.
pub fn sample_kronecker_gaussian<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    row_cov: &CMat,
    col_cov: &CMat,
    rng: &mut R,
) -> Result<CMat> {
    if row_cov.shape() != (m, m) {
        return Err(Error::validation(format!(
            "row covariance must be {m}x{m}, got {}x{}",
            row_cov.nrows(),
            row_cov.ncols()
        )));
    }
    if col_cov.shape() != (n, n) {
        return Err(Error::validation(format!(
            "column covariance must be {n}x{n}, got {}x{}",
            col_cov.nrows(),
            col_cov.ncols()
        )));
    }
    let sr = hermitian_sqrt(row_cov)?;
    let sc = hermitian_sqrt(col_cov)?;
    Ok(sr * standard_complex_gaussian(m, n, rng) * sc)
}

// ── Internals ────────────────────────────────────────────────────────

/// Extends the first `filled` orthonormal columns of `m` to a full basis.
///
/// Candidates are the identity columns; each round greedily takes the one
/// with the largest residual after two Gram-Schmidt passes (ties to the
/// lowest index), so the completion is deterministic.
fn complete_orthonormal(m: &mut CMat, filled: usize) -> Result<()> {
    let dim = m.nrows();
    let mut have = filled;
    while have < dim {
        let mut best: Option<(usize, f64, DVector<Complex64>)> = None;
        for cand in 0..dim {
            let mut v = DVector::<Complex64>::zeros(dim);
            v[cand] = Complex64::new(1.0, 0.0);
            for _pass in 0..2 {
                for c in 0..have {
                    let col = m.column(c);
                    let inner = col.dotc(&v);
                    v -= DVector::from(col) * inner;
                }
            }
            let norm = v.norm();
            if best.as_ref().map_or(true, |(_, bn, _)| norm > *bn) {
                best = Some((cand, norm, v));
            }
        }
        let (_, norm, v) = best.expect("dim >= 1");
        if norm <= 1e-8 {
            return Err(Error::Numerical("orthonormal basis completion failed"));
        }
        let v = v / Complex64::new(norm, 0.0);
        m.set_column(have, &v);
        have += 1;
    }
    Ok(())
}

/// Rotates column `col` so its largest-magnitude entry becomes real-positive;
/// returns the applied unit factor.
fn phase_fix_column(m: &mut CMat, col: usize) -> Complex64 {
    let mut idx = 0usize;
    let mut mag = -1.0f64;
    for i in 0..m.nrows() {
        let cur = m[(i, col)].norm();
        if cur > mag {
            mag = cur;
            idx = i;
        }
    }
    if mag <= 1e-300 {
        return Complex64::new(1.0, 0.0);
    }
    let z = m[(idx, col)];
    let corr = z.conj() / Complex64::new(z.norm(), 0.0);
    scale_column(m, col, corr);
    corr
}

fn scale_column(m: &mut CMat, col: usize, factor: Complex64) {
    for i in 0..m.nrows() {
        m[(i, col)] *= factor;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cm(rows: usize, cols: usize, data: &[(f64, f64)]) -> CMat {
        CMat::from_fn(rows, cols, |i, j| {
            let (re, im) = data[i * cols + j];
            Complex64::new(re, im)
        })
    }

    fn random_complex(m: usize, n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        standard_complex_gaussian(m, n, &mut rng)
    }

    fn rel_err(a: &CMat, b: &CMat) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn hermitian_sqrt_identity_and_diagonal() {
        let i4 = CMat::identity(4, 4);
        assert!(rel_err(&hermitian_sqrt(&i4).unwrap(), &i4) < 1e-12);

        let d = cm(2, 2, &[(4.0, 0.0), (0.0, 0.0), (0.0, 0.0), (9.0, 0.0)]);
        let expect = cm(2, 2, &[(2.0, 0.0), (0.0, 0.0), (0.0, 0.0), (3.0, 0.0)]);
        assert!(rel_err(&hermitian_sqrt(&d).unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn hermitian_sqrt_reconstructs_random_psd() {
        let b = random_complex(5, 5, 11);
        let a = hermitize(&(b.adjoint() * &b));
        let s = hermitian_sqrt(&a).unwrap();
        assert!(rel_err(&(&s * &s), &a) < 1e-9);
        assert!(is_hermitian(&s));
    }

    #[test]
    fn hermitian_sqrt_rejects_indefinite() {
        let d = cm(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-0.5, 0.0)]);
        match hermitian_sqrt(&d) {
            Err(Error::NotPsd { min_eigenvalue }) => assert!(min_eigenvalue < -0.4),
            other => panic!("expected NotPsd, got {other:?}"),
        }
    }

    #[test]
    fn hermitian_sqrt_rejects_non_hermitian() {
        let d = cm(2, 2, &[(1.0, 0.0), (0.5, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert!(matches!(hermitian_sqrt(&d), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn inv_sqrt_diagonal_and_random() {
        let d = cm(2, 2, &[(4.0, 0.0), (0.0, 0.0), (0.0, 0.0), (9.0, 0.0)]);
        let t = hermitian_inv_sqrt(&d).unwrap();
        assert!((t[(0, 0)].re - 0.5).abs() < 1e-12);
        assert!((t[(1, 1)].re - 1.0 / 3.0).abs() < 1e-12);

        let b = random_complex(4, 4, 3);
        let a = hermitize(&(b.adjoint() * &b)) + CMat::identity(4, 4) * Complex64::new(0.1, 0.0);
        let t = hermitian_inv_sqrt(&a).unwrap();
        let recon = &t * &a * &t;
        assert!((recon - CMat::identity(4, 4)).norm() < 1e-9);
    }

    #[test]
    fn inv_sqrt_reports_conditioning() {
        let d = cm(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1e-14, 0.0)]);
        match hermitian_inv_sqrt(&d) {
            Err(Error::IllConditioned { min_eigenvalue }) => assert!(min_eigenvalue < 1e-12),
            other => panic!("expected IllConditioned, got {other:?}"),
        }
    }

    #[test]
    fn svd_reorders_diagonal() {
        let d = cm(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (3.0, 0.0)]);
        let svd = ordered_svd(&d).unwrap();
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 1.0).abs() < 1e-12);
        assert!(rel_err(&svd.reconstruct(), &d) < 1e-12);
    }

    #[test]
    fn svd_identity_has_unit_values() {
        let svd = ordered_svd(&CMat::identity(3, 3)).unwrap();
        for s in &svd.singular_values {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_reconstructs_seeded_square_and_rect() {
        for (m, n, seed) in [(4, 4, 5u64), (5, 3, 6), (3, 5, 7)] {
            let a = random_complex(m, n, seed);
            let svd = ordered_svd(&a).unwrap();
            assert!(rel_err(&svd.reconstruct(), &a) < 1e-10, "{m}x{n}");
            // full factors are unitary
            assert!((svd.u.adjoint() * &svd.u - CMat::identity(m, m)).norm() < 1e-10);
            assert!((svd.v.adjoint() * &svd.v - CMat::identity(n, n)).norm() < 1e-10);
            // ordering
            for w in svd.singular_values.windows(2) {
                assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn eig_sorts_and_reconstructs() {
        let d = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                Complex64::new([1.0, 5.0, 2.0][i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let eig = ordered_eig_hermitian(&d).unwrap();
        assert_eq!(
            eig.eigenvalues
                .iter()
                .map(|x| x.round() as i64)
                .collect::<Vec<_>>(),
            vec![5, 2, 1]
        );

        let b = random_complex(4, 4, 9);
        let h = hermitize(&b);
        let eig = ordered_eig_hermitian(&h).unwrap();
        assert!(rel_err(&eig.reconstruct(), &h) < 1e-10);
    }

    #[test]
    fn eig_identity_all_ones() {
        let eig = ordered_eig_hermitian(&CMat::identity(3, 3)).unwrap();
        for v in &eig.eigenvalues {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dft_small_cases() {
        let q1 = dft_matrix(1).unwrap();
        assert!((q1[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let q2 = dft_matrix(2).unwrap();
        let s = FRAC_1_SQRT_2;
        let expect = cm(2, 2, &[(s, 0.0), (s, 0.0), (s, 0.0), (-s, 0.0)]);
        assert!((q2 - expect).norm() < 1e-12);

        assert!(matches!(dft_matrix(0), Err(Error::Validation(_))));
    }

    #[test]
    fn dft_equalizes_diagonals() {
        // n=4, D = diag(4,0,0,0): every diagonal entry of Q D Qᴴ equals 1.
        let q = dft_matrix(4).unwrap();
        let mut d = CMat::zeros(4, 4);
        d[(0, 0)] = Complex64::new(4.0, 0.0);
        let m = &q * d * q.adjoint();
        for i in 0..4 {
            assert!((m[(i, i)].re - 1.0).abs() < 1e-12);
            assert!(m[(i, i)].im.abs() < 1e-12);
        }

        // 100 seeded random real diagonals for n in {2,4,8}.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for n in [2usize, 4, 8] {
            let q = dft_matrix(n).unwrap();
            assert!((q.adjoint() * &q - CMat::identity(n, n)).norm() < 1e-12);
            for _ in 0..100 {
                let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
                let d = CMat::from_fn(n, n, |i, j| {
                    if i == j {
                        Complex64::new(diag[i], 0.0)
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                });
                let target = diag.iter().sum::<f64>() / n as f64;
                let m = &q * d * q.adjoint();
                for i in 0..n {
                    assert!((m[(i, i)].re - target).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn sampler_zero_covariance_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = CMat::zeros(3, 3);
        let psi = CMat::identity(2, 2);
        let s = sample_kronecker_gaussian(3, 2, &zero, &psi, &mut rng).unwrap();
        assert!(s.norm() < 1e-300);
    }

    #[test]
    fn sampler_rejects_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cov = CMat::identity(2, 2);
        assert!(matches!(
            sample_kronecker_gaussian(3, 2, &cov, &cov, &mut rng),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn sampler_is_deterministic() {
        let cov = CMat::identity(3, 3);
        let mut r1 = ChaCha8Rng::seed_from_u64(99);
        let mut r2 = ChaCha8Rng::seed_from_u64(99);
        let a = sample_kronecker_gaussian(3, 3, &cov, &cov, &mut r1).unwrap();
        let b = sample_kronecker_gaussian(3, 3, &cov, &cov, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_unit_variance_moments() {
        // identity covariances: per-entry variance 1 within 3% over 1e5 draws
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cov = CMat::identity(2, 2);
        let trials = 100_000;
        let mut second = [0.0f64; 4];
        for _ in 0..trials {
            let s = sample_kronecker_gaussian(2, 2, &cov, &cov, &mut rng).unwrap();
            for (e, z) in second.iter_mut().zip(s.iter()) {
                *e += z.norm_sqr();
            }
        }
        for e in second {
            let var = e / trials as f64;
            assert!((var - 1.0).abs() < 0.03, "variance {var}");
        }
    }

    proptest! {
        #[test]
        fn svd_reconstruction_property(m in 1usize..5, n in 1usize..5, seed in 0u64..1000) {
            let a = random_complex(m, n, seed);
            let svd = ordered_svd(&a).unwrap();
            prop_assert!(rel_err(&svd.reconstruct(), &a) < 1e-9);
            for w in svd.singular_values.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }

        #[test]
        fn sqrt_inverse_roundtrip_property(n in 1usize..5, seed in 0u64..1000) {
            let b = random_complex(n, n, seed);
            let a = hermitize(&(b.adjoint() * &b)) + CMat::identity(n, n) * Complex64::new(0.05, 0.0);
            let s = hermitian_sqrt(&a).unwrap();
            let t = hermitian_inv_sqrt(&a).unwrap();
            prop_assert!(rel_err(&(&s * &s), &a) < 1e-9);
            prop_assert!((&t * &a * &t - CMat::identity(n, n)).norm() < 1e-8);
        }
    }
}
