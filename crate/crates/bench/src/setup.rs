//! Sampled problem instances with closed-form answers.

use nalgebra::DMatrix;
use w2est::gaussian::GaussianMeasure;
use w2est::measures::DiscreteMeasure;
use w2est::sampling::{
    elliptic_ground_truth, random_covariance, sample_elliptic_measure, sample_gaussian_measure, EllipticSpec,
    QuadraticPotential, RngStream,
};

use crate::{ExperimentConfig, Law, Result};

/// Stream ids under the experiment seed.
const LAW_STREAM: u64 = 0;
const DRAW_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub enum SampledLaw {
    Elliptic(EllipticSpec),
    Gaussian(GaussianMeasure),
}

impl SampledLaw {
    pub fn sample(&self, n: usize, stream: RngStream) -> Result<DiscreteMeasure> {
        let mut rng = stream.rng();
        Ok(match self {
            SampledLaw::Elliptic(spec) => sample_elliptic_measure(n, spec, &mut rng)?,
            SampledLaw::Gaussian(law) => sample_gaussian_measure(n, law, &mut rng)?,
        })
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        match self {
            SampledLaw::Elliptic(spec) => spec.covariance(),
            SampledLaw::Gaussian(law) => law.covariance(),
        }
    }
}

/// Two centred laws from the same family with covariances `A`, `B`; the
/// optimal map between them is linear, so `W₂² = Bures²(A, B)` and the first
/// potential is the quadratic `xᵀ(I − H)x`.
#[derive(Debug, Clone)]
pub struct PairSetup {
    pub mu: SampledLaw,
    pub nu: SampledLaw,
    pub w2sq: f64,
    pub potential: QuadraticPotential,
    seed: u64,
    identical_samples: bool,
}

/// One trial's samples plus a held-out sample of `μ` for potential errors.
#[derive(Debug, Clone)]
pub struct Draw {
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub eval: DiscreteMeasure,
}

impl PairSetup {
    /// Covariances are drawn once per seed with trace one and the given
    /// aspect; with `same_distribution` both laws share `A`, and with
    /// `identical_samples` both measures are the same cloud.
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let root = RngStream::new(cfg.seed, LAW_STREAM);
        let a = random_covariance(cfg.d, cfg.aspect, &mut root.derive(0).rng())?;
        let b = if cfg.same_distribution || cfg.identical_samples {
            a.clone()
        } else {
            random_covariance(cfg.d, cfg.aspect, &mut root.derive(1).rng())?
        };
        Self::with_covariances(cfg, a, b)
    }

    pub fn with_covariances(cfg: &ExperimentConfig, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let root = RngStream::new(cfg.seed, LAW_STREAM);
        let (w2sq, potential) = elliptic_ground_truth(&a, &b)?;
        let (mu, nu) = match cfg.law {
            Law::Elliptic => {
                // α depends on (d, β) only; one calibration serves both laws
                let spec_a = EllipticSpec::calibrated(a, cfg.beta, root.derive(2))?;
                let spec_b = EllipticSpec::new(b, cfg.beta, spec_a.alpha())?;
                (SampledLaw::Elliptic(spec_a), SampledLaw::Elliptic(spec_b))
            }
            Law::Gaussian => (
                SampledLaw::Gaussian(GaussianMeasure::centered(a)?),
                SampledLaw::Gaussian(GaussianMeasure::centered(b)?),
            ),
        };
        Ok(Self {
            mu,
            nu,
            w2sq,
            potential,
            seed: cfg.seed,
            identical_samples: cfg.identical_samples,
        })
    }

    /// Samples for sample size `n` and trial `trial`. Streams are keyed on
    /// `(seed, n, trial)`, so a row does not depend on the other rows or on
    /// the order in which trials run.
    pub fn draw(&self, n: usize, trial: usize, eval_points: usize) -> Result<Draw> {
        let stream = RngStream::new(self.seed, DRAW_STREAM).derive(n as u64).derive(trial as u64);
        let mu = self.mu.sample(n, stream.derive(0))?;
        let nu = if self.identical_samples {
            mu.clone()
        } else {
            self.nu.sample(n, stream.derive(1))?
        };
        Ok(Draw {
            mu,
            nu,
            eval: self.mu.sample(eval_points, stream.derive(2))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Experiment;

    #[test]
    fn draws_are_keyed_on_size_and_trial() {
        let mut cfg = ExperimentConfig::new(Experiment::SampleComplexity);
        cfg.d = 3;
        let setup = PairSetup::from_config(&cfg).unwrap();
        let a = setup.draw(50, 3, 10).unwrap();
        let b = setup.draw(50, 3, 10).unwrap();
        assert_eq!(a.mu, b.mu);
        assert_eq!(a.eval, b.eval);
        assert_ne!(a.mu, a.nu);
        assert_ne!(a.mu, setup.draw(50, 4, 10).unwrap().mu);
        assert_ne!(a.mu.points()[..3], setup.draw(51, 3, 10).unwrap().mu.points()[..3]);
        assert!(setup.w2sq > 0.0);
    }

    #[test]
    fn same_distribution_has_zero_truth() {
        let mut cfg = ExperimentConfig::new(Experiment::SampleComplexity);
        cfg.same_distribution = true;
        cfg.law = Law::Gaussian;
        let setup = PairSetup::from_config(&cfg).unwrap();
        assert!(setup.w2sq.abs() < 1e-12);
        assert!(setup.potential.eval(&[0.3, -0.2, 0.1, 0.5, 0.0]).abs() < 1e-10);
        assert_eq!(setup.mu.covariance(), setup.nu.covariance());
    }
}
