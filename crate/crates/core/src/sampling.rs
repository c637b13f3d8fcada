//! Compactly supported elliptical distributions with a prescribed covariance.
//!
//! A draw is `X = R · A^{1/2} U` with `U` uniform on the unit sphere,
//! `R = α |arctan(Z/β)|^{1/d}` and `Z` standard normal. The scale `α` is
//! calibrated by Monte-Carlo so that `E[R²] = d`, which makes the covariance
//! of `X` equal to `A`. Two such laws with covariances `A` and `B` are
//! related by the linear map `x ↦ Hx`, so their transport cost and
//! potential are known in closed form ([`elliptic_ground_truth`]).

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gaussian::{bures_sq, spd_inverse, spd_power, spd_sqrt, GaussianMeasure};
use crate::measures::{DiscreteMeasure, Geometry};
use crate::{Error, Result};

/// Default Monte-Carlo sample count for [`calibrate_alpha`].
pub const DEFAULT_N_MC: usize = 1_000_000;

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Distinct stream ids give independent ChaCha streams under the same key,
/// so per-trial generators can be built in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// A fresh generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Stream for sub-task `index` of this one (e.g. one trial of a sweep).
    pub fn derive(&self, index: u64) -> Self {
        // splitmix64 finalizer on the pair keeps derived ids well spread
        let mut z = self
            .stream_id
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(index.wrapping_add(1));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        Self {
            seed: self.seed,
            stream_id: z ^ (z >> 31),
        }
    }
}

/// Trace-one random covariance `MMᵀ / tr(MMᵀ)` where `M` is `d × k` with
/// standard normal entries and `k = round(d / aspect)` (at least `d`).
pub fn random_covariance<R: Rng + ?Sized>(d: usize, aspect: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if !(aspect > 0.0 && aspect < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "aspect must lie in (0, 1), got {aspect}"
        )));
    }
    let k = ((d as f64 / aspect).round() as usize).max(d);
    let m = DMatrix::<f64>::from_fn(d, k, |_, _| StandardNormal.sample(rng));
    let a = &m * m.transpose();
    let a = (&a + a.transpose()) * 0.5;
    Ok(&a / a.trace())
}

fn alpha_cache() -> &'static Mutex<HashMap<(usize, u64, RngStream, usize), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64, RngStream, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Radial scale `α = √(d / E[|arctan(Z/β)|^{2/d}])`, with the expectation
/// replaced by an `n_mc`-sample mean drawn from `stream`.
///
/// Results are cached per `(d, β, stream, n_mc)`.
pub fn calibrate_alpha(d: usize, beta: f64, stream: RngStream, n_mc: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if n_mc < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "n_mc must be at least 10000, got {n_mc}"
        )));
    }
    let key = (d, beta.to_bits(), stream, n_mc);
    if let Some(&alpha) = alpha_cache().lock().unwrap().get(&key) {
        return Ok(alpha);
    }
    let mut rng = stream.rng();
    let p = 2.0 / d as f64;
    let mut sum = 0.0;
    for _ in 0..n_mc {
        let z: f64 = StandardNormal.sample(&mut rng);
        sum += (z / beta).atan().abs().powf(p);
    }
    let alpha = (d as f64 / (sum / n_mc as f64)).sqrt();
    alpha_cache().lock().unwrap().insert(key, alpha);
    Ok(alpha)
}

/// Parameters of the elliptical sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSpec {
    covariance: DMatrix<f64>,
    sqrt_cov: DMatrix<f64>,
    inv_cov: DMatrix<f64>,
    beta: f64,
    alpha: f64,
}

impl EllipticSpec {
    pub fn new(covariance: DMatrix<f64>, beta: f64, alpha: f64) -> Result<Self> {
        if !(beta > 0.0) || !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta and alpha must be positive, got {beta}, {alpha}"
            )));
        }
        let sqrt_cov = spd_sqrt(&covariance)?;
        let inv_cov = spd_inverse(&covariance)?;
        Ok(Self {
            covariance,
            sqrt_cov,
            inv_cov,
            beta,
            alpha,
        })
    }

    /// Spec with `α` from [`calibrate_alpha`] at [`DEFAULT_N_MC`] samples.
    pub fn calibrated(covariance: DMatrix<f64>, beta: f64, stream: RngStream) -> Result<Self> {
        let alpha = calibrate_alpha(covariance.nrows(), beta, stream, DEFAULT_N_MC)?;
        Self::new(covariance, beta, alpha)
    }

    pub fn dim(&self) -> usize {
        self.covariance.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Bound on `‖A^{-1/2} X‖` over the support, `α (π/2)^{1/d}`.
    pub fn support_radius(&self) -> f64 {
        self.alpha * FRAC_PI_2.powf(1.0 / self.dim() as f64)
    }

    /// `‖x‖_{A⁻¹} = √(xᵀA⁻¹x)`.
    pub fn mahalanobis(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.inv_cov * &v)).max(0.0).sqrt()
    }
}

/// Draws `n` points as a flat row-major buffer of length `n · d`.
pub fn sample_elliptic_flat<R: Rng + ?Sized>(n: usize, spec: &EllipticSpec, rng: &mut R) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let d = spec.dim();
    let inv_d = 1.0 / d as f64;
    let mut out = Vec::with_capacity(n * d);
    let mut u = vec![0.0; d];
    for _ in 0..n {
        let norm = loop {
            for x in u.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break norm;
            }
        };
        let z: f64 = StandardNormal.sample(rng);
        let r = spec.alpha * (z / spec.beta).atan().abs().powf(inv_d);
        let scale = r / norm;
        for row in 0..d {
            let mut acc = 0.0;
            for (k, uk) in u.iter().enumerate() {
                acc += spec.sqrt_cov[(row, k)] * uk;
            }
            out.push(scale * acc);
        }
    }
    Ok(out)
}

/// Draws `n` points `X = R · A^{1/2} U`.
pub fn sample_elliptic<R: Rng + ?Sized>(n: usize, spec: &EllipticSpec, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let d = spec.dim();
    let flat = sample_elliptic_flat(n, spec, rng)?;
    Ok(flat.chunks_exact(d).map(|c| c.to_vec()).collect())
}

/// Uniform empirical measure of `n` draws.
pub fn sample_elliptic_measure<R: Rng + ?Sized>(
    n: usize,
    spec: &EllipticSpec,
    rng: &mut R,
) -> Result<DiscreteMeasure> {
    let flat = sample_elliptic_flat(n, spec, rng)?;
    DiscreteMeasure::from_flat(flat, spec.dim(), None, Geometry::Euclidean)
}

/// Unnormalized density `(1 + tan²y) exp(−β² tan²y / 2)` with
/// `y = (‖x‖_{A⁻¹}/α)^d`; zero outside the support (`y ≥ π/2`).
pub fn elliptic_density(x: &[f64], spec: &EllipticSpec) -> f64 {
    if x.len() != spec.dim() {
        return f64::NAN;
    }
    let y = (spec.mahalanobis(x) / spec.alpha).powi(spec.dim() as i32);
    if y >= FRAC_PI_2 {
        return 0.0;
    }
    let t2 = y.tan().powi(2);
    (1.0 + t2) * (-0.5 * spec.beta * spec.beta * t2).exp()
}

/// `n` draws from a Gaussian measure, row-major `n × d`.
pub fn sample_gaussian_flat<R: Rng + ?Sized>(n: usize, law: &GaussianMeasure, rng: &mut R) -> Result<Vec<f64>> {
    let d = law.dim();
    let root = spd_sqrt(law.covariance())?;
    let mut out = Vec::with_capacity(n * d);
    let mut z = DVector::zeros(d);
    for _ in 0..n {
        z.iter_mut().for_each(|x| *x = StandardNormal.sample(rng));
        let x = law.mean() + &root * &z;
        out.extend(x.iter());
    }
    Ok(out)
}

/// Uniformly weighted empirical measure of `n` Gaussian draws.
pub fn sample_gaussian_measure<R: Rng + ?Sized>(
    n: usize,
    law: &GaussianMeasure,
    rng: &mut R,
) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    DiscreteMeasure::from_flat(sample_gaussian_flat(n, law, rng)?, law.dim(), None, Geometry::Euclidean)
}

/// Quadratic Kantorovich potential `φ(x) = xᵀ(I − H)x − 2mᵀx` for the cost
/// `‖x − y‖²`, where `x ↦ Hx + m` is the optimal map (`m = 0` unless the
/// target was translated).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential {
    /// `I − H`.
    form: DMatrix<f64>,
    map: DMatrix<f64>,
    offset: DVector<f64>,
}

impl QuadraticPotential {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        v.dot(&(&self.form * &v)) - 2.0 * self.offset.dot(&v)
    }

    /// `∇φ(x) = 2(x − T(x))`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (2.0 * (&self.form * v - &self.offset)).iter().copied().collect()
    }

    /// Optimal transport map `x ↦ Hx + m`.
    pub fn transport(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (&self.map * v + &self.offset).iter().copied().collect()
    }

    pub fn map_matrix(&self) -> &DMatrix<f64> {
        &self.map
    }

    /// Potential for the same pair after translating the target by `m`;
    /// the transport cost grows by `‖m‖²`.
    pub fn with_target_shift(mut self, m: &[f64]) -> Result<Self> {
        if m.len() != self.offset.len() {
            return Err(Error::DimensionMismatch {
                expected: self.offset.len(),
                found: m.len(),
            });
        }
        self.offset += DVector::from_column_slice(m);
        Ok(self)
    }
}

/// `W₂²` and the first potential between centered elliptical laws of the
/// same family with covariances `A` and `B`:
/// `W₂² = Bures²(A, B)` and `φ(x) = xᵀ(I − H)x` with
/// `H = A^{-1/2} (A^{1/2} B A^{1/2})^{1/2} A^{-1/2}`.
pub fn elliptic_ground_truth(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(f64, QuadraticPotential)> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let w2 = bures_sq(a, b)?;
    let ra = spd_sqrt(a)?;
    let ria = spd_power(a, -0.5)?;
    let s = spd_sqrt(&(&ra * b * &ra).symmetric_part())?;
    let h = &ria * s * &ria;
    let h = h.symmetric_part();
    let d = a.nrows();
    Ok((
        w2,
        QuadraticPotential {
            form: DMatrix::identity(d, d) - &h,
            map: h,
            offset: DVector::zeros(d),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::{prop_assert, proptest, ProptestConfig};

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = (0..5).map(|_| 0).scan(s.rng(), |r, _| Some(r.random())).collect();
        let b: Vec<u64> = (0..5).map(|_| 0).scan(s.rng(), |r, _| Some(r.random())).collect();
        assert_eq!(a, b);
        let c: u64 = RngStream::new(7, 4).rng().random();
        assert_ne!(a[0], c);
        assert_ne!(s.derive(0), s.derive(1));
        assert_eq!(s.derive(5), s.derive(5));
    }

    #[test]
    fn covariance_is_trace_one_spd() {
        let mut rng = RngStream::new(1, 0).rng();
        for d in [1, 2, 5, 10] {
            let a = random_covariance(d, 1.0 / 3.0, &mut rng).unwrap();
            assert_abs_diff_eq!(a.trace(), 1.0, epsilon = 1e-12);
            assert_eq!(a, a.transpose());
            assert!(a.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        }
        assert!(random_covariance(3, 1.0, &mut rng).is_err());
        assert!(random_covariance(0, 0.5, &mut rng).is_err());
    }

    #[test]
    fn covariance_anisotropy_in_expected_range() {
        let mut rng = RngStream::new(2, 0).rng();
        let mut ratios: Vec<f64> = (0..100)
            .map(|_| {
                let e = random_covariance(30, 1.0 / 3.0, &mut rng).unwrap().symmetric_eigen().eigenvalues;
                e.min() / e.max()
            })
            .collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (ratios[49] + ratios[50]);
        assert!((0.02..=0.25).contains(&median), "median ratio {median}");
    }

    #[test]
    fn calibration_hits_second_moment() {
        for d in [1, 2, 5] {
            let alpha = calibrate_alpha(d, 2.0, RngStream::new(3, d as u64), DEFAULT_N_MC).unwrap();
            let mut rng = RngStream::new(4, d as u64).rng();
            let n = 1_000_000;
            let mut m2 = 0.0;
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                let r = alpha * (z / 2.0).atan().abs().powf(1.0 / d as f64);
                m2 += r * r;
            }
            let m2 = m2 / n as f64;
            assert!((m2 / d as f64 - 1.0).abs() <= 0.02, "d={d}: E[R²] = {m2}");
        }
    }

    #[test]
    fn calibration_is_cached_and_deterministic() {
        let s = RngStream::new(99, 1);
        let a = calibrate_alpha(3, 2.0, s, 20_000).unwrap();
        let b = calibrate_alpha(3, 2.0, s, 20_000).unwrap();
        assert_eq!(a, b);
        assert!(calibrate_alpha(3, 2.0, s, 100).is_err());
        for beta in [0.5, 2.0, 8.0] {
            let a = calibrate_alpha(4, beta, s, 20_000).unwrap();
            assert!(a.is_finite() && a > 0.0);
        }
    }

    #[test]
    fn alpha_grows_with_beta_in_one_dimension() {
        let s = RngStream::new(5, 0);
        let alphas: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&b| calibrate_alpha(1, b, s, 200_000).unwrap())
            .collect();
        assert!(alphas.windows(2).all(|w| w[1] > w[0]), "{alphas:?}");
    }

    #[test]
    fn samples_stay_in_support() {
        let mut rng = RngStream::new(6, 0).rng();
        let a = random_covariance(4, 1.0 / 3.0, &mut rng).unwrap();
        let spec = EllipticSpec::calibrated(a, 2.0, RngStream::new(6, 1)).unwrap();
        let radius = spec.support_radius();
        for x in sample_elliptic(20_000, &spec, &mut rng).unwrap() {
            assert!(spec.mahalanobis(&x) <= radius * (1.0 + 1e-12));
        }
        assert!(sample_elliptic(0, &spec, &mut rng).is_err());
    }

    #[test]
    fn empirical_moments_match() {
        let mut rng = RngStream::new(7, 0).rng();
        let a = random_covariance(3, 1.0 / 3.0, &mut rng).unwrap();
        let spec = EllipticSpec::calibrated(a.clone(), 2.0, RngStream::new(7, 1)).unwrap();
        let n = 100_000;
        let xs = sample_elliptic(n, &spec, &mut rng).unwrap();
        let mut mean = DVector::<f64>::zeros(3);
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        for x in &xs {
            let v = DVector::from_column_slice(x);
            mean += &v;
            cov += &v * v.transpose();
        }
        mean /= n as f64;
        cov /= n as f64;
        assert!(mean.norm() <= 3.0 * (a.trace() / n as f64).sqrt());
        assert!((&cov - &a).norm() <= 0.05 * a.norm());
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = DMatrix::<f64>::identity(2, 2) * 0.5;
        let spec = EllipticSpec::new(a, 2.0, 1.3).unwrap();
        let s = RngStream::new(8, 2);
        let x = sample_elliptic_flat(100, &spec, &mut s.rng()).unwrap();
        let y = sample_elliptic_flat(100, &spec, &mut s.rng()).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn affine_consistency_of_second_moments() {
        let mut rng = RngStream::new(9, 0).rng();
        let a = random_covariance(3, 1.0 / 3.0, &mut rng).unwrap();
        let alpha = calibrate_alpha(3, 2.0, RngStream::new(9, 1), DEFAULT_N_MC).unwrap();
        let direct = EllipticSpec::new(a.clone(), 2.0, alpha).unwrap();
        let unit = EllipticSpec::new(DMatrix::identity(3, 3) / 3.0, 2.0, alpha).unwrap();
        let l = a.clone().cholesky().unwrap().l() * 3f64.sqrt();
        let n = 100_000;
        let second = |xs: &[Vec<f64>], map: Option<&DMatrix<f64>>| {
            let mut m = DMatrix::<f64>::zeros(3, 3);
            for x in xs {
                let mut v = DVector::from_column_slice(x);
                if let Some(l) = map {
                    v = l * v;
                }
                m += &v * v.transpose();
            }
            m / n as f64
        };
        let m1 = second(&sample_elliptic(n, &direct, &mut rng).unwrap(), None);
        let m2 = second(&sample_elliptic(n, &unit, &mut rng).unwrap(), Some(&l));
        assert!((&m1 - &m2).norm() <= 0.05 * a.norm(), "{m1} vs {m2}");
    }

    #[test]
    fn density_examples() {
        let spec = EllipticSpec::new(DMatrix::identity(2, 2), 2.0, 1.5).unwrap();
        assert_eq!(elliptic_density(&[0.0, 0.0], &spec), 1.0);
        let edge = spec.support_radius() * (1.0 - 1e-6);
        let v = elliptic_density(&[edge, 0.0], &spec);
        assert!(v < 1e-100, "{v}");
        assert_eq!(elliptic_density(&[10.0, 0.0], &spec), 0.0);
    }

    #[test]
    fn one_dimensional_histogram_matches_density() {
        let spec = EllipticSpec::calibrated(scalar(0.7), 2.0, RngStream::new(10, 0)).unwrap();
        let radius = spec.support_radius() * 0.7f64.sqrt();
        let bins = 100;
        let width = 2.0 * radius / bins as f64;
        let mut probs: Vec<f64> = (0..bins)
            .map(|b| {
                let lo = -radius + b as f64 * width;
                let k = 200;
                (0..k)
                    .map(|i| elliptic_density(&[lo + (i as f64 + 0.5) * width / k as f64], &spec))
                    .sum::<f64>()
            })
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);

        let n = 1_000_000;
        let mut counts = vec![0usize; bins];
        let xs = sample_elliptic_flat(n, &spec, &mut RngStream::new(10, 1).rng()).unwrap();
        for x in xs {
            let b = (((x + radius) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let (mut chi2, mut dof) = (0.0, 0usize);
        for (c, p) in counts.iter().zip(&probs) {
            let e = p * n as f64;
            if e >= 5.0 {
                chi2 += (*c as f64 - e).powi(2) / e;
                dof += 1;
            }
        }
        let ratio = chi2 / (dof - 1) as f64;
        assert!(ratio < 1.5, "chi2/dof = {ratio}");
    }

    #[test]
    fn ground_truth_examples() {
        let mut rng = RngStream::new(11, 0).rng();
        let a = random_covariance(3, 1.0 / 3.0, &mut rng).unwrap();
        let (w, phi) = elliptic_ground_truth(&a, &a).unwrap();
        assert_abs_diff_eq!(w, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi.eval(&[0.3, -0.2, 0.1]), 0.0, epsilon = 1e-12);

        let (w, phi) = elliptic_ground_truth(&scalar(1.0), &scalar(4.0)).unwrap();
        assert_abs_diff_eq!(w, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(phi.map_matrix()[(0, 0)], 2.0, epsilon = 1e-14);
        for x in [-1.0, 0.3, 2.0] {
            assert_abs_diff_eq!(phi.eval(&[x]), -x * x, epsilon = 1e-13);
        }
        assert!(elliptic_ground_truth(&scalar(1.0), &a).is_err());
    }

    #[test]
    fn ground_truth_map_pushes_covariance_forward() {
        // H A H = B characterizes the linear optimal map between centered laws
        let mut rng = RngStream::new(12, 0).rng();
        let a = random_covariance(4, 1.0 / 3.0, &mut rng).unwrap();
        let b = random_covariance(4, 1.0 / 3.0, &mut rng).unwrap();
        let (w, phi) = elliptic_ground_truth(&a, &b).unwrap();
        let h = phi.map_matrix();
        assert!((h * &a * h - &b).norm() < 1e-10);
        assert!(h.clone().symmetric_eigen().eigenvalues.min() > 0.0);
        // E‖X − HX‖² = tr((I−H)A(I−H)) recovers the cost
        let i_h = DMatrix::identity(4, 4) - h;
        assert!(((&i_h * &a * &i_h).trace() - w).abs() < 1e-10);
    }

    #[test]
    fn shifted_target_adds_linear_term() {
        let (_, phi) = elliptic_ground_truth(&scalar(1.0), &scalar(4.0)).unwrap();
        let phi = phi.with_target_shift(&[0.5]).unwrap();
        // T(x) = 2x + ½, φ(x) = −x² − x
        assert_abs_diff_eq!(phi.transport(&[1.0])[0], 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(phi.eval(&[1.0]), -2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(phi.gradient(&[1.0])[0], 2.0 * (1.0 - 2.5), epsilon = 1e-13);
        assert!(phi.with_target_shift(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn gaussian_draws_match_moments() {
        let mut rng = RngStream::new(13, 0).rng();
        let cov = random_covariance(3, 1.0 / 3.0, &mut rng).unwrap();
        let mean = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let law = GaussianMeasure::new(mean.clone(), cov.clone()).unwrap();
        let n = 200_000;
        let m = sample_gaussian_measure(n, &law, &mut rng).unwrap();
        let mut mu = DVector::zeros(3);
        let mut second = DMatrix::zeros(3, 3);
        for p in m.iter_points() {
            let x = DVector::from_column_slice(p);
            mu += &x;
            second += &x * x.transpose();
        }
        mu /= n as f64;
        let emp = second / n as f64 - &mu * mu.transpose();
        assert!((mu - mean).norm() < 0.02);
        assert!((emp - cov).norm() < 0.01);
        assert!(sample_gaussian_measure(0, &law, &mut rng).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn potential_gradient_is_displacement(seed in 0u64..100_000, x in proptest::collection::vec(-1.0f64..1.0, 3)) {
            let mut rng = RngStream::new(seed, 0).rng();
            let a = random_covariance(3, 1.0 / 3.0, &mut rng).unwrap();
            let b = random_covariance(3, 1.0 / 3.0, &mut rng).unwrap();
            let (_, phi) = elliptic_ground_truth(&a, &b).unwrap();
            let g = phi.gradient(&x);
            let t = phi.transport(&x);
            for k in 0..3 {
                prop_assert!((g[k] - 2.0 * (x[k] - t[k])).abs() <= 1e-10);
            }
            // finite differences of the quadratic form agree with the gradient
            let h = 1e-6;
            for k in 0..3 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (phi.eval(&xp) - phi.eval(&xm)) / (2.0 * h);
                prop_assert!((fd - g[k]).abs() <= 1e-6);
            }
        }
    }
}
