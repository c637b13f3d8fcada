//! Closed forms for Gaussian measures.
//!
//! For `μ = 𝒩(a, A)` and `ν = 𝒩(b, B)`,
//!
//! ```text
//! W₂²(μ, ν) = ‖a − b‖² + Bures²(A, B),   Bures²(A, B) = tr A + tr B − 2 tr S,
//! S = (A^{1/2} B A^{1/2})^{1/2}
//! ```
//!
//! and the entropic cost has the explicit expression evaluated by
//! [`entropic_cost_gaussian`]. Matrix functions go through a symmetric
//! eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Relative floor applied to eigenvalues before taking roots.
const EIG_FLOOR: f64 = 1e-14;
/// Tolerated asymmetry `‖A − Aᵀ‖_max / ‖A‖_max`.
const SYM_TOL: f64 = 1e-12;
/// Largest condition number accepted when inverting.
const MAX_CONDITION: f64 = 1e12;

/// `𝒩(mean, covariance)` with a symmetric positive definite covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMeasure {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianMeasure {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.nrows(),
            });
        }
        let eig = checked_eigen(&covariance)?;
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::NotPositiveDefinite(min));
        }
        if mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("mean".into()));
        }
        Ok(Self { mean, covariance })
    }

    /// Centered Gaussian.
    pub fn centered(covariance: DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        Self::new(DVector::zeros(d), covariance)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Square, finite and symmetric up to [`SYM_TOL`]; returns the eigensystem of
/// the symmetrized matrix.
fn checked_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if a.nrows() == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    let scale = max_abs(a);
    let asym = max_abs(&(a - a.transpose()));
    if asym > SYM_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym / scale));
    }
    Ok(SymmetricEigen::new((a + a.transpose()) * 0.5))
}

/// `A^p` for SPD `A` through its eigendecomposition. Eigenvalues down to
/// `−1e-14‖A‖` are clamped to `1e-14‖A‖`; anything smaller is an error.
pub fn spd_power(a: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    let eig = checked_eigen(a)?;
    let norm = eig.eigenvalues.amax();
    let floor = EIG_FLOOR * norm;
    let min = eig.eigenvalues.min();
    if min < -floor || !(norm > 0.0) {
        return Err(Error::NotPositiveDefinite(min));
    }
    let vals = eig.eigenvalues.map(|x| x.max(floor).powf(p));
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&vals) * q.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Principal square root of an SPD matrix.
pub fn spd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(a, 0.5)
}

/// Inverse of an SPD matrix, rejecting condition numbers above 1e12.
pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = checked_eigen(a)?;
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) {
        return Err(Error::NotPositiveDefinite(min));
    }
    if max / min > MAX_CONDITION {
        return Err(Error::IllConditioned(max / min));
    }
    spd_power(a, -1.0)
}

fn same_dims(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(())
}

/// Eigenvalues of `A^{1/2} B A^{1/2}`, clamped at zero.
fn product_spectrum(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DVector<f64>> {
    same_dims(a, b)?;
    checked_eigen(b)?;
    let ra = spd_sqrt(a)?;
    let m = &ra * b * &ra;
    let m = (&m + m.transpose()) * 0.5;
    Ok(SymmetricEigen::new(m).eigenvalues.map(|x| x.max(0.0)))
}

/// `Bures²(A, B) = tr A + tr B − 2 tr (A^{1/2} B A^{1/2})^{1/2}`, clamped at 0.
pub fn bures_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let spec = product_spectrum(a, b)?;
    let tr_s: f64 = spec.iter().map(|x| x.sqrt()).sum();
    Ok((a.trace() + b.trace() - 2.0 * tr_s).max(0.0))
}

fn same_measure_dims(mu: &GaussianMeasure, nu: &GaussianMeasure) -> Result<()> {
    if mu.dim() != nu.dim() {
        return Err(Error::DimensionMismatch {
            expected: mu.dim(),
            found: nu.dim(),
        });
    }
    Ok(())
}

/// `W₂²(μ, ν) = ‖a − b‖² + Bures²(A, B)`.
pub fn w2sq_gaussian(mu: &GaussianMeasure, nu: &GaussianMeasure) -> Result<f64> {
    same_measure_dims(mu, nu)?;
    let shift = (&mu.mean - &nu.mean).norm_squared();
    Ok(shift + bures_sq(&mu.covariance, &nu.covariance)?)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Entropic cost between Gaussians:
///
/// ```text
/// T_λ = ‖a−b‖² + tr A + tr B − 2 tr D + dλ(1 − log 2λ) + λ log det(2D + λI),
/// D = (A^{1/2} B A^{1/2} + λ²I/4)^{1/2}
/// ```
///
/// Evaluated on the spectrum `mᵢ` of `A^{1/2}BA^{1/2}`, where `D` has
/// eigenvalues `√(mᵢ + λ²/4)`.
pub fn entropic_cost_gaussian(mu: &GaussianMeasure, nu: &GaussianMeasure, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    same_measure_dims(mu, nu)?;
    let spec = product_spectrum(&mu.covariance, &nu.covariance)?;
    let d = mu.dim() as f64;
    let quarter = 0.25 * lambda * lambda;
    let mut tr_d = 0.0;
    let mut log_det = 0.0;
    for &m in spec.iter() {
        let di = (m + quarter).sqrt();
        tr_d += di;
        log_det += (2.0 * di + lambda).ln();
    }
    let shift = (&mu.mean - &nu.mean).norm_squared();
    Ok(shift + mu.covariance.trace() + nu.covariance.trace() - 2.0 * tr_d
        + d * lambda * (1.0 - (2.0 * lambda).ln())
        + lambda * log_det)
}

/// `S_λ(μ, ν) = T_λ(μ, ν) − ½(T_λ(μ, μ) + T_λ(ν, ν))` in closed form.
pub fn sinkhorn_divergence_gaussian(mu: &GaussianMeasure, nu: &GaussianMeasure, lambda: f64) -> Result<f64> {
    let cross = entropic_cost_gaussian(mu, nu, lambda)?;
    let a = entropic_cost_gaussian(mu, mu, lambda)?;
    let b = entropic_cost_gaussian(nu, nu, lambda)?;
    Ok(cross - 0.5 * (a + b))
}

/// Fisher information of the Gaussian geodesic, `tr S⁻¹` with
/// `S = (A^{1/2} B A^{1/2})^{1/2}`.
pub fn fisher_info_geodesic(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    let spec = product_spectrum(a, b)?;
    let max = spec.max();
    let min = spec.min();
    if !(min > EIG_FLOOR * max) {
        return Err(Error::NotPositiveDefinite(min));
    }
    Ok(spec.iter().map(|m| 1.0 / m.sqrt()).sum())
}

/// Coefficients of the small-λ expansion
/// `S_λ − W₂² = c₂λ² + c₄λ⁴ + O(λ⁵)`:
/// `c₂ = −Bures²(A⁻¹, B⁻¹)/8` and `c₄ = Bures²(A⁻³, B⁻³)/384`.
pub fn expansion_coefficients(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, f64)> {
    same_dims(a, b)?;
    let ai = spd_inverse(a)?;
    let bi = spd_inverse(b)?;
    let c2 = -bures_sq(&ai, &bi)? / 8.0;
    let c4 = bures_sq(&spd_power(a, -3.0)?, &spd_power(b, -3.0)?)? / 384.0;
    Ok((c2, c4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_spd(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::<f64>::from_fn(d, d + 2, |_, _| StandardNormal.sample(rng));
        &m * m.transpose() / d as f64 + DMatrix::identity(d, d) * 0.1
    }

    fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::<f64>::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        m.qr().q()
    }

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn sqrt_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_abs_diff_eq!(spd_sqrt(&id).unwrap(), id, epsilon = 1e-15);
        assert_abs_diff_eq!(spd_sqrt(&diag(&[4.0, 9.0])).unwrap(), diag(&[2.0, 3.0]), epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let a = random_spd(5, &mut rng);
            let r = spd_sqrt(&a).unwrap();
            assert_eq!(r, r.transpose());
            assert!((&r * &r - &a).norm() <= 1e-10 * a.norm());
        }
    }

    #[test]
    fn sqrt_rejects_bad_input() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(spd_sqrt(&asym), Err(Error::NotSymmetric(_))));
        assert!(matches!(spd_sqrt(&diag(&[1.0, -1.0])), Err(Error::NotPositiveDefinite(_))));
        assert!(matches!(
            GaussianMeasure::centered(diag(&[1.0, 0.0])),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn sqrt_of_diagonal_is_idempotent_under_squaring() {
        let a = diag(&[0.3, 2.0, 7.0]);
        let r = spd_sqrt(&a).unwrap();
        assert_abs_diff_eq!(spd_power(&(&r * &r), 0.5).unwrap(), r, epsilon = 1e-14);
    }

    #[test]
    fn bures_examples() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert_eq!(bures_sq(&id, &id).unwrap(), 0.0);
        assert_abs_diff_eq!(bures_sq(&scalar(4.0), &scalar(9.0)).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            bures_sq(&diag(&[1.0, 4.0]), &diag(&[9.0, 16.0])).unwrap(),
            8.0,
            epsilon = 1e-13
        );
        assert!(bures_sq(&id, &scalar(1.0)).is_err());
    }

    #[test]
    fn w2_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_spd(4, &mut rng);
        let mu = GaussianMeasure::centered(a.clone()).unwrap();
        assert_abs_diff_eq!(w2sq_gaussian(&mu, &mu).unwrap(), 0.0, epsilon = 1e-12);
        let nu = GaussianMeasure::new(DVector::from_element(4, 1.0), a).unwrap();
        assert_abs_diff_eq!(w2sq_gaussian(&mu, &nu).unwrap(), 4.0, epsilon = 1e-12);
    }

    #[test]
    fn entropic_cost_small_lambda_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mu = GaussianMeasure::new(DVector::from_vec(vec![0.2, -0.1]), random_spd(2, &mut rng)).unwrap();
        let nu = GaussianMeasure::centered(random_spd(2, &mut rng)).unwrap();
        let t = entropic_cost_gaussian(&mu, &nu, 1e-4).unwrap();
        let w = w2sq_gaussian(&mu, &nu).unwrap();
        assert!((t - w).abs() < 1e-2);
    }

    #[test]
    fn entropic_cost_scalar_reference() {
        // d=1, A=B=1, λ=2: D = √(1 + 1) = √2, so
        // T = 2 − 2√2 + 2(1 − ln 4) + 2 ln(2√2 + 2), from 50-digit arithmetic.
        let reference = 1.548_025_688_173_005_334_027_376_958_6_f64;
        let mu = GaussianMeasure::centered(scalar(1.0)).unwrap();
        let t = entropic_cost_gaussian(&mu, &mu, 2.0).unwrap();
        assert_abs_diff_eq!(t, reference, epsilon = 1e-14);
        assert!(entropic_cost_gaussian(&mu, &mu, 0.0).is_err());
    }

    #[test]
    fn divergence_vanishes_on_identical_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mu = GaussianMeasure::centered(random_spd(3, &mut rng)).unwrap();
        for lambda in [0.01, 0.1, 1.0, 10.0] {
            assert_abs_diff_eq!(sinkhorn_divergence_gaussian(&mu, &mu, lambda).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fisher_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_abs_diff_eq!(fisher_info_geodesic(&id, &id).unwrap(), 3.0, epsilon = 1e-14);
        // S = (2 · 9 · 2)^{1/2} = 6
        assert_abs_diff_eq!(
            fisher_info_geodesic(&scalar(4.0), &scalar(9.0)).unwrap(),
            1.0 / 6.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn fisher_consistency_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [1, 2, 3, 5] {
            for _ in 0..10 {
                let a = random_spd(d, &mut rng);
                let b = random_spd(d, &mut rng);
                let lhs = 2.0 * fisher_info_geodesic(&a, &b).unwrap()
                    - fisher_info_geodesic(&a, &a).unwrap()
                    - fisher_info_geodesic(&b, &b).unwrap();
                let rhs = -bures_sq(&spd_inverse(&a).unwrap(), &spd_inverse(&b).unwrap()).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10, "{lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn expansion_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_spd(3, &mut rng);
        let (c2, c4) = expansion_coefficients(&a, &a).unwrap();
        assert_abs_diff_eq!(c2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c4, 0.0, epsilon = 1e-12);
        let (c2, c4) = expansion_coefficients(&scalar(1.0), &scalar(4.0)).unwrap();
        assert_abs_diff_eq!(c2, -1.0 / 32.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c4, 49.0 / 24576.0, epsilon = 1e-15);
        assert!(matches!(
            expansion_coefficients(&diag(&[1.0, 1e-13]), &diag(&[1.0, 1.0])),
            Err(Error::IllConditioned(_))
        ));
    }

    #[test]
    fn second_order_coefficient_from_fisher_information() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_spd(4, &mut rng);
            let b = random_spd(4, &mut rng);
            let (c2, _) = expansion_coefficients(&a, &b).unwrap();
            let ai = spd_inverse(&a).unwrap();
            let bi = spd_inverse(&b).unwrap();
            let fisher = (2.0 * fisher_info_geodesic(&a, &b).unwrap() - ai.trace() - bi.trace()) / 8.0;
            assert!((c2 - fisher).abs() < 1e-10);
        }
    }

    #[test]
    fn entropic_cost_nondecreasing_in_lambda() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let mu = GaussianMeasure::centered(random_spd(3, &mut rng)).unwrap();
            let nu = GaussianMeasure::new(DVector::from_element(3, 0.3), random_spd(3, &mut rng)).unwrap();
            let mut prev = f64::NEG_INFINITY;
            for lambda in [0.01, 0.1, 1.0, 10.0] {
                let t = entropic_cost_gaussian(&mu, &nu, lambda).unwrap();
                assert!(t >= prev);
                prev = t;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn bures_symmetric_bounded_and_rotation_invariant(seed in 0u64..100_000, d in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_spd(d, &mut rng);
            let b = random_spd(d, &mut rng);
            let ab = bures_sq(&a, &b).unwrap();
            let ba = bures_sq(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-10);
            prop_assert!(ab <= a.trace() + b.trace());
            let q = random_orthogonal(d, &mut rng);
            let qa = &q * &a * q.transpose();
            let qb = &q * &b * q.transpose();
            let rotated = bures_sq(&((&qa + qa.transpose()) * 0.5), &((&qb + qb.transpose()) * 0.5)).unwrap();
            prop_assert!((rotated - ab).abs() <= 1e-9);
            let perturbed = &a + DMatrix::identity(d, d) * 1e-3;
            prop_assert!(bures_sq(&a, &perturbed).unwrap() > 0.0);
        }

        #[test]
        fn entropic_cost_symmetric(seed in 0u64..100_000, d in 1usize..5, lambda in 0.01f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = GaussianMeasure::new(DVector::from_element(d, 0.5), random_spd(d, &mut rng)).unwrap();
            let nu = GaussianMeasure::centered(random_spd(d, &mut rng)).unwrap();
            let a = entropic_cost_gaussian(&mu, &nu, lambda).unwrap();
            let b = entropic_cost_gaussian(&nu, &mu, lambda).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }
}
