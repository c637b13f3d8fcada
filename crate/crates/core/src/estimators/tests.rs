use super::*;
use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pts(points: &[&[f64]]) -> DiscreteMeasure {
    let v: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    DiscreteMeasure::from_samples(&v, None, Geometry::Euclidean).unwrap()
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let flat = (0..n * d).map(|_| scale * rng.random::<f64>()).collect();
    DiscreteMeasure::from_flat(flat, d, None, Geometry::Euclidean).unwrap()
}

fn tight(lambda: f64) -> SolverConfig {
    SolverConfig::new(lambda).with_tolerance(1e-11).with_max_iters(100_000)
}

/// Brute-force `T_λ` on a uniform 2 × 2 instance: plans are
/// `[[a, ½−a], [½−a, a]]`, minimized over `a` by golden-section search.
fn brute_force_2x2(x: [f64; 2], y: [f64; 2], lambda: f64) -> f64 {
    let objective = |a: f64| {
        let g = [[a, 0.5 - a], [0.5 - a, a]];
        let mut total = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let d = x[i] - y[j];
                total += g[i][j] * d * d + 2.0 * lambda * g[i][j] * (g[i][j] / 0.25).ln();
            }
        }
        total
    };
    let (mut lo, mut hi) = (1e-300, 0.5 - 1e-16);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-15 {
        let c = hi - r * (hi - lo);
        let d = lo + r * (hi - lo);
        if objective(c) < objective(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    objective(0.5 * (lo + hi))
}

#[test]
fn dirac_examples() {
    let a = pts(&[&[0.0, 0.0]]);
    let b = pts(&[&[1.0, 2.0]]);
    let cfg = SolverConfig::new(0.3);
    assert_abs_diff_eq!(entropic_cost(&a, &b, &cfg).unwrap().value, 5.0, epsilon = 1e-10);
    let s = sinkhorn_divergence(&a, &b, &cfg, DivergenceOptions::default()).unwrap();
    assert_abs_diff_eq!(s.value, 5.0, epsilon = 1e-10);
    let c = s.components.unwrap();
    assert_abs_diff_eq!(c.self_mu, 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(c.self_nu, 0.0, epsilon = 1e-12);
}

#[test]
fn matches_two_by_two_brute_force() {
    for (x, y, lambda) in [([0.0, 1.0], [0.3, 1.4], 0.5), ([0.0, 1.0], [1.0, 0.2], 0.1), ([-0.5, 0.5], [0.0, 2.0], 2.0)] {
        let mu = pts(&[&[x[0]], &[x[1]]]);
        let nu = pts(&[&[y[0]], &[y[1]]]);
        let t = entropic_cost(&mu, &nu, &tight(lambda)).unwrap().value;
        let b = brute_force_2x2(x, y, lambda);
        assert!((t - b).abs() <= 1e-6, "{t} vs {b}");
    }
}

#[test]
fn self_cost_decreases_to_entropy_of_diagonal_plan() {
    let mu = pts(&[&[0.0], &[1.0]]);
    let mut last = f64::INFINITY;
    for lambda in [1.0, 0.3, 0.1, 0.03, 0.01] {
        let t = entropic_cost(&mu, &mu, &tight(lambda)).unwrap().value;
        assert!(t >= 0.0 && t < last);
        last = t;
    }
    // the diagonal plan pays only its entropy, 2λ ln 2
    assert_abs_diff_eq!(last, 0.02 * 2f64.ln(), epsilon = 1e-9);
}

#[test]
fn divergence_of_identical_inputs_is_exactly_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mu = cloud(&mut rng, 30, 2, 1.0);
    let cfg = SolverConfig::new(0.2);
    let opts = DivergenceOptions::default();
    assert_eq!(sinkhorn_divergence(&mu, &mu, &cfg, opts).unwrap().value, 0.0);
    let copy = mu.clone();
    assert_eq!(sinkhorn_divergence(&mu, &copy, &cfg, opts).unwrap().value, 0.0);
    let problem = DivergenceProblem::new(&mu, &copy, opts).unwrap();
    assert!(problem.identical());
    assert_eq!(problem.divergence(&cfg).unwrap().0.value, 0.0);
    assert_eq!(problem.richardson(&cfg).unwrap().0.value, 0.0);
    assert_eq!(richardson(&mu, &copy, &cfg, opts).unwrap().value, 0.0);
}

#[test]
fn divergence_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mu = cloud(&mut rng, 40, 2, 1.0);
    let nu = cloud(&mut rng, 35, 2, 1.0);
    let cfg = SolverConfig::new(0.1);
    let opts = DivergenceOptions::default();
    let a = sinkhorn_divergence(&mu, &nu, &cfg, opts).unwrap();
    let b = sinkhorn_divergence(&nu, &mu, &cfg, opts).unwrap();
    let cmax = cost_matrix(&mu, &nu).unwrap().max_entry();
    assert!((a.value - b.value).abs() <= 4.0 * cfg.marginal_tol * cmax);
}

#[test]
fn report_value_equals_recorded_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mu = cloud(&mut rng, 25, 3, 1.0);
    let nu = cloud(&mut rng, 20, 3, 1.0);
    let cfg = SolverConfig::new(0.15);
    let problem = DivergenceProblem::new(&mu, &nu, DivergenceOptions::default()).unwrap();
    let (s, sols) = problem.divergence(&cfg).unwrap();
    let c = s.components.unwrap();
    assert_eq!(s.value, c.cross - 0.5 * (c.self_mu + c.self_nu));
    assert_eq!(c.cross, sols.cross.value());
    assert!(s.converged);
    let total = sols.cross.solution.iterations + sols.self_mu.solution.iterations + sols.self_nu.solution.iterations;
    assert_eq!(s.iterations_total, total);

    let (r, _) = problem.richardson(&cfg).unwrap();
    let (fine, coarse) = r.levels.unwrap();
    assert_eq!(r.value, 2.0 * fine - coarse);
    assert_eq!(fine, s.value);
    let coarse_direct = problem.divergence(&cfg.with_lambda(std::f64::consts::SQRT_2 * 0.15)).unwrap().0.value;
    assert_eq!(coarse, coarse_direct);
}

#[test]
fn extrapolation_cancels_quadratic_term() {
    let (s0, c) = (0.731, -2.4);
    let r = richardson_with(0.37, |l| Ok(s0 + c * l * l)).unwrap();
    assert_abs_diff_eq!(r, s0, epsilon = 1e-14);
    assert!(richardson_with(0.0, |_| Ok(0.0)).is_err());
}

#[test]
fn split_self_uses_halves() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mu = cloud(&mut rng, 40, 2, 1.0);
    let nu = cloud(&mut rng, 40, 2, 1.0);
    let cfg = SolverConfig::new(0.2);
    let opts = DivergenceOptions { split_self: true };
    let problem = DivergenceProblem::new(&mu, &nu, opts).unwrap();
    let (s, sols) = problem.divergence(&cfg).unwrap();
    assert_eq!(sols.self_mu.mu.len(), 20);
    assert_eq!(sols.self_mu.nu.len(), 20);
    assert_ne!(sols.self_mu.mu, sols.self_mu.nu);
    assert!(s.value.is_finite());
    // on identical inputs the split variant is not forced to zero
    let same = DivergenceProblem::new(&mu, &mu, opts).unwrap().divergence(&cfg).unwrap().0;
    let c = same.components.unwrap();
    assert_eq!(same.value, c.cross - c.self_mu);
}

#[test]
fn estimators_are_translation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mu = cloud(&mut rng, 30, 2, 1.0);
    let nu = cloud(&mut rng, 30, 2, 1.0);
    let shift = [3.0, -1.5];
    let (mu2, nu2) = (mu.translated(&shift).unwrap(), nu.translated(&shift).unwrap());
    let cfg = SolverConfig::new(0.1).with_tolerance(1e-10);
    let opts = DivergenceOptions::default();
    let pairs = [
        (entropic_cost(&mu, &nu, &cfg).unwrap().value, entropic_cost(&mu2, &nu2, &cfg).unwrap().value),
        (
            sinkhorn_divergence(&mu, &nu, &cfg, opts).unwrap().value,
            sinkhorn_divergence(&mu2, &nu2, &cfg, opts).unwrap().value,
        ),
        (richardson(&mu, &nu, &cfg, opts).unwrap().value, richardson(&mu2, &nu2, &cfg, opts).unwrap().value),
        (
            plugin_w2sq(&mu, &nu, &cfg, PluginMode::ExactAssignment).unwrap().value,
            plugin_w2sq(&mu2, &nu2, &cfg, PluginMode::ExactAssignment).unwrap().value,
        ),
    ];
    for (a, b) in pairs {
        assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
    }
}

fn enumerate_min(x: &DiscreteMeasure, y: &DiscreteMeasure) -> f64 {
    fn rec(k: usize, perm: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if k == perm.len() {
            f(perm);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            rec(k + 1, perm, f);
            perm.swap(k, i);
        }
    }
    let n = x.len();
    let mut best = f64::INFINITY;
    let mut perm: Vec<usize> = (0..n).collect();
    rec(0, &mut perm, &mut |p| {
        let c: f64 = p
            .iter()
            .enumerate()
            .map(|(i, &j)| x.point(i).iter().zip(y.point(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        best = best.min(c);
    });
    best / n as f64
}

#[test]
fn exact_plugin_examples() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = cloud(&mut rng, 7, 2, 1.0);
    let exact = plugin_w2sq(&x, &x, &cfg, PluginMode::ExactAssignment).unwrap();
    assert_eq!(exact.value, 0.0);
    assert_eq!(exact.lambda, 0.0);
    let a = pts(&[&[1.0, 1.0]]);
    let b = pts(&[&[2.0, 3.0]]);
    assert_abs_diff_eq!(plugin_w2sq(&a, &b, &cfg, PluginMode::ExactAssignment).unwrap().value, 5.0, epsilon = 1e-14);
    for n in 1..=8 {
        let x = cloud(&mut rng, n, 2, 1.0);
        let y = cloud(&mut rng, n, 2, 1.0);
        let v = plugin_w2sq(&x, &y, &cfg, PluginMode::ExactAssignment).unwrap().value;
        assert!((v - enumerate_min(&x, &y)).abs() <= 1e-12);
    }
    let weighted = DiscreteMeasure::from_flat(vec![0.0, 1.0], 1, Some(vec![1.0, 2.0]), Geometry::Euclidean).unwrap();
    let other = pts(&[&[0.0], &[1.0]]);
    assert!(plugin_w2sq(&weighted, &other, &cfg, PluginMode::ExactAssignment).is_err());
    assert!(plugin_w2sq(&pts(&[&[0.0]]), &other, &cfg, PluginMode::ExactAssignment).is_err());
}

#[test]
fn small_lambda_plugin_is_the_entropic_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = cloud(&mut rng, 20, 2, 1.0);
    let y = cloud(&mut rng, 20, 2, 1.0);
    let cfg = SolverConfig::new(0.01);
    let p = plugin_w2sq(&x, &y, &cfg, PluginMode::SmallLambda).unwrap();
    assert_eq!(p.value, entropic_cost(&x, &y, &cfg).unwrap().value);
    assert_eq!(p.lambda, 0.01);
}

#[test]
fn debiased_potential_vanishes_on_identical_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mu = cloud(&mut rng, 30, 2, 1.0);
    let problem = DivergenceProblem::new(&mu, &mu, DivergenceOptions::default()).unwrap();
    let (_, sols) = problem.divergence(&SolverConfig::new(0.1)).unwrap();
    let phi = PotentialFunction::from_divergence(&sols).unwrap();
    assert_eq!(phi.kind(), PotentialKind::Debiased);
    for _ in 0..20 {
        let x = [rng.random::<f64>() * 2.0 - 0.5, rng.random::<f64>()];
        assert!(phi.eval(&x).abs() < 1e-10);
    }
}

#[test]
fn biased_potential_of_diracs_has_displacement_gradient() {
    let a = pts(&[&[0.2, -0.4]]);
    let b = pts(&[&[1.0, 0.5]]);
    let problem = DivergenceProblem::new(&a, &b, DivergenceOptions::default()).unwrap();
    let (_, pair) = problem.entropic(&SolverConfig::new(0.5)).unwrap();
    let phi = PotentialFunction::biased(&pair);
    let h = 1e-6;
    let x = [0.2, -0.4];
    for (k, expect) in [2.0 * (0.2 - 1.0), 2.0 * (-0.4 - 0.5)].into_iter().enumerate() {
        let mut xp = x;
        let mut xm = x;
        xp[k] += h;
        xm[k] -= h;
        let fd = (phi.eval(&xp) - phi.eval(&xm)) / (2.0 * h);
        assert!((fd - expect).abs() < 1e-6, "{fd} vs {expect}");
    }
}

#[test]
fn potential_constructors_check_lambda() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mu = cloud(&mut rng, 12, 1, 1.0);
    let nu = cloud(&mut rng, 12, 1, 1.0);
    let problem = DivergenceProblem::new(&mu, &nu, DivergenceOptions::default()).unwrap();
    let (_, a) = problem.divergence(&SolverConfig::new(0.1)).unwrap();
    let (_, b) = problem.divergence(&SolverConfig::new(0.2)).unwrap();
    assert!(matches!(PotentialFunction::debiased(&a.cross, &b.self_mu), Err(Error::LambdaMismatch(..))));
    let fine = PotentialFunction::from_divergence(&a).unwrap();
    let wrong = PotentialFunction::from_divergence(&b).unwrap();
    assert!(matches!(PotentialFunction::extrapolated(&fine, &wrong), Err(Error::LambdaMismatch(..))));
    assert!(PotentialFunction::extrapolated(&PotentialFunction::biased(&a.cross), &wrong).is_err());

    let (_, levels) = problem.richardson(&SolverConfig::new(0.1)).unwrap();
    let ext = PotentialFunction::from_richardson(&levels).unwrap();
    let f = PotentialFunction::from_divergence(&levels[0]).unwrap();
    let c = PotentialFunction::from_divergence(&levels[1]).unwrap();
    for x in [-0.3, 0.1, 0.8] {
        assert_abs_diff_eq!(ext.eval(&[x]), 2.0 * f.eval(&[x]) - c.eval(&[x]), epsilon = 1e-12);
    }
    let batch = ext.eval_measure(&mu);
    for (i, v) in batch.iter().enumerate() {
        assert_eq!(*v, ext.eval(mu.point(i)));
    }
}

#[test]
fn smooth_potential_respects_torus() {
    let a = DiscreteMeasure::from_flat(vec![0.05], 1, None, Geometry::Torus).unwrap();
    let b = DiscreteMeasure::from_flat(vec![0.95], 1, None, Geometry::Torus).unwrap();
    let problem = DivergenceProblem::new(&a, &b, DivergenceOptions::default()).unwrap();
    let (r, pair) = problem.entropic(&SolverConfig::new(0.1)).unwrap();
    assert_abs_diff_eq!(r.value, 0.01, epsilon = 1e-12);
    let phi = PotentialFunction::biased(&pair);
    // periodic in x
    assert_abs_diff_eq!(phi.eval(&[0.2]), phi.eval(&[1.2]), epsilon = 1e-12);
}

#[test]
fn l1_error_examples() {
    let m = pts(&[&[0.0], &[1.0]]);
    let reference = |x: &[f64]| x[0] * x[0];
    assert_eq!(potential_l1_error(reference, reference, &m, Gauge::None).unwrap(), 0.0);
    let shifted = |x: &[f64]| x[0] * x[0] + 7.0;
    assert_abs_diff_eq!(potential_l1_error(shifted, reference, &m, Gauge::MeanZeroMatch).unwrap(), 0.0, epsilon = 1e-14);
    let tilted = |x: &[f64]| x[0] * x[0] + x[0];
    assert_abs_diff_eq!(potential_l1_error(tilted, reference, &m, Gauge::None).unwrap(), 0.5, epsilon = 1e-14);
    assert!(potential_l1_error(|_| f64::NAN, reference, &m, Gauge::None).is_err());
    assert!(l1_from_differences(&[], &[], Gauge::None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn divergence_is_nonnegative(seed in 0u64..100_000, n in 2usize..25, m in 2usize..25, lambda in 0.02f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // unit diameter: points in a square of side 1/√2
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mu = cloud(&mut rng, n, 2, s);
        let nu = cloud(&mut rng, m, 2, s);
        let v = sinkhorn_divergence(&mu, &nu, &SolverConfig::new(lambda), DivergenceOptions::default()).unwrap().value;
        prop_assert!(v >= -1e-6, "S = {}", v);
    }

    #[test]
    fn richardson_identity_holds_on_components(seed in 0u64..100_000, lambda in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = cloud(&mut rng, 10, 2, 1.0);
        let nu = cloud(&mut rng, 12, 2, 1.0);
        let r = richardson(&mu, &nu, &SolverConfig::new(lambda), DivergenceOptions::default()).unwrap();
        let (fine, coarse) = r.levels.unwrap();
        prop_assert_eq!(r.value, 2.0 * fine - coarse);
    }
}
