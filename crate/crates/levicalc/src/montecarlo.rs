//! Pathwise simulation of the random integral: drives a jump process
//! along the clock image grid, evaluates the integration-by-parts
//! formula per path, and compares empirical characteristic functions
//! against the analytic transform.
//!
//! Small jumps below the truncation threshold are dropped together with
//! their compensators, which keeps the increment mean exact; an optional
//! Gaussian substitute for their variance is off by default. Every path
//! owns a counter-based random stream derived from (seed, path index),
//! so results are bit-reproducible regardless of scheduling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CalcError, Result};
use crate::id_measures::{Atom, LevyTriple, Parametric, BALL_RADIUS};
use crate::kernels::IntegralMap;
use crate::quad::QuadTol;
use crate::transform::transform_exponent;

/// Simulation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathConfig {
    pub n_paths: usize,
    /// Number of grid steps on the mapping interval.
    pub resolution: usize,
    /// Jump truncation threshold.
    pub epsilon: f64,
    pub seed: u64,
    /// Replace dropped small jumps by their compensator drift (keeping the
    /// increment mean exact). Dropping the compensated pair is the
    /// default behavior; disabling this flag is only useful for bias
    /// experiments.
    #[serde(default = "default_true")]
    pub compensate_small_jumps: bool,
    /// Substitute a Gaussian with the variance of the dropped jumps.
    #[serde(default)]
    pub gaussian_substitute: bool,
    /// Upper truncation of unbounded mapping intervals.
    #[serde(default)]
    pub truncation: Option<f64>,
    /// Bins used when discretizing density jump measures.
    #[serde(default = "default_bins")]
    pub density_bins: usize,
}

fn default_true() -> bool {
    true
}

fn default_bins() -> usize {
    400
}

impl PathConfig {
    pub fn new(n_paths: usize, resolution: usize, epsilon: f64, seed: u64) -> Result<Self> {
        let cfg = PathConfig {
            n_paths,
            resolution,
            epsilon,
            seed,
            compensate_small_jumps: true,
            gaussian_substitute: false,
            truncation: None,
            density_bins: default_bins(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_truncation(mut self, t: f64) -> Self {
        self.truncation = Some(t);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(CalcError::invalid("path config", "need at least one path"));
        }
        if self.resolution < 2 {
            return Err(CalcError::invalid(
                "path config",
                "grid resolution must be at least 2",
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err(CalcError::invalid(
                "path config",
                "jump truncation must be positive",
            ));
        }
        Ok(())
    }
}

/// Per-path values of the random integral, with provenance.
#[derive(Debug, Clone)]
pub struct IntegralSample {
    pub values: Vec<f64>,
    pub map: IntegralMap,
    pub law: LevyTriple,
    pub config: PathConfig,
    pub warnings: Vec<String>,
}

/// Precomputed increment machinery for one law.
struct IncrementSampler {
    drift: f64,
    gaussian_var: f64,
    /// Atoms above the truncation threshold with their ball-compensator
    /// drift folded in.
    atoms: Vec<Atom>,
    compensator_rate: f64,
    substitute_var_rate: f64,
    families: Vec<Parametric>,
    warnings: Vec<String>,
}

impl IncrementSampler {
    fn new(law: &LevyTriple, cfg: &PathConfig) -> Result<Self> {
        let mut warnings = Vec::new();
        let (all_atoms, families) = law.levy.jump_components(cfg.epsilon, cfg.density_bins)?;

        let smallest = all_atoms
            .iter()
            .map(|a| a.x.abs())
            .fold(f64::INFINITY, f64::min);
        if smallest < cfg.epsilon {
            warnings.push(format!(
                "jump truncation eps = {} drops atoms below {smallest:.3e}",
                cfg.epsilon
            ));
        }

        let mut atoms = Vec::new();
        let mut substitute_var_rate = 0.0;
        for a in &all_atoms {
            if a.x.abs() > cfg.epsilon {
                atoms.push(*a);
            } else {
                substitute_var_rate += a.mass * a.x * a.x;
            }
        }
        // Compensator drift per unit time for retained atoms inside the
        // ball.
        let compensator_rate: f64 = atoms
            .iter()
            .filter(|a| a.x.abs() <= BALL_RADIUS)
            .map(|a| a.x * a.mass)
            .sum();

        Ok(IncrementSampler {
            drift: law.shift,
            gaussian_var: law.gaussian_var,
            atoms,
            compensator_rate,
            substitute_var_rate,
            families,
            warnings,
        })
    }

    /// One increment of the driving process over a window of length dt.
    fn sample(&self, dt: f64, cfg: &PathConfig, rng: &mut ChaCha8Rng) -> f64 {
        if dt <= 0.0 {
            return 0.0;
        }
        let mut x = self.drift * dt;
        if self.gaussian_var > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            x += (self.gaussian_var * dt).sqrt() * n;
        }
        for a in &self.atoms {
            let count = Poisson::new(a.mass * dt)
                .map(|p| p.sample(rng))
                .unwrap_or(0.0);
            x += a.x * count;
        }
        if cfg.compensate_small_jumps {
            x -= self.compensator_rate * dt;
        }
        if cfg.gaussian_substitute && self.substitute_var_rate > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            x += (self.substitute_var_rate * dt).sqrt() * n;
        }
        for fam in &self.families {
            x += sample_parametric_increment(fam, dt, rng);
        }
        x
    }
}

fn sample_parametric_increment(fam: &Parametric, dt: f64, rng: &mut ChaCha8Rng) -> f64 {
    match fam {
        Parametric::SymStable { index, coeff } => {
            let scale = Parametric::stable_scale(*index, *coeff);
            (scale * dt).powf(1.0 / index) * sample_standard_sym_stable(*index, rng)
        }
        Parametric::Gamma { shape, rate, side } => {
            let g = Gamma::new(shape * dt, 1.0 / rate)
                .map(|d| d.sample(rng))
                .unwrap_or(0.0);
            let comp = dt * shape * (1.0 - (-rate).exp()) / rate;
            f64::from(*side) * (g - comp)
        }
    }
}

/// Standard symmetric stable variate with characteristic function
/// e^{-|y|^p} (Chambers-Mallows-Stuck).
fn sample_standard_sym_stable(p: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    let v = std::f64::consts::PI * (u - 0.5);
    if (p - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = Exp1.sample(rng);
    let a = (p * v).sin() / v.cos().powf(1.0 / p);
    let b = ((1.0 - p) * v).cos() / w;
    a * b.powf((1.0 - p) / p)
}

fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path + 1);
    rng
}

/// Independent increments of the driving process over windows of length
/// dt, sampled from the given stream.
pub fn sample_levy_increments(
    law: &LevyTriple,
    dt: f64,
    n: usize,
    cfg: &PathConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let sampler = IncrementSampler::new(law, cfg)?;
    Ok((0..n).map(|_| sampler.sample(dt, cfg, rng)).collect())
}

/// Per-path evaluation of
/// h(b) Y(r(b)) - h(a) Y(r(a)) - Σ Y(r(t_i)) [h(t_{i+1}) - h(t_i)]
/// on the configured grid, simulating Y on the clock image of the grid.
pub fn pathwise_integral(
    map: &IntegralMap,
    law: &LevyTriple,
    cfg: &PathConfig,
) -> Result<IntegralSample> {
    cfg.validate()?;
    let lo = map.interval.lo;
    let hi = if map.interval.hi.is_finite() {
        map.interval.hi
    } else {
        cfg.truncation.ok_or_else(|| {
            CalcError::invalid(
                "simulation",
                "unbounded interval requires a truncation window",
            )
        })?
    };
    if !(hi > lo) {
        return Err(CalcError::invalid("simulation", "empty interval"));
    }

    // Grid in t and its clock image.
    let n = cfg.resolution;
    let ts: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let taus: Vec<f64> = ts.iter().map(|&t| map.r.eval(t)).collect();
    if taus.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CalcError::invalid(
            "simulation",
            "clock image of the grid is not finite and nonnegative",
        ));
    }
    let hs: Vec<f64> = ts.iter().map(|&t| map.h.eval(t)).collect();
    if hs.iter().any(|h| !h.is_finite()) {
        return Err(CalcError::invalid(
            "simulation",
            "space transform is not finite on the grid",
        ));
    }

    // The driving process is simulated at the sorted distinct clock times,
    // forward from time zero.
    let mut order: Vec<usize> = (0..taus.len()).collect();
    order.sort_by(|&i, &j| taus[i].total_cmp(&taus[j]));

    let sampler = IncrementSampler::new(law, cfg)?;
    let warnings = sampler.warnings.clone();

    let values: Vec<f64> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rng = path_rng(cfg.seed, path as u64);
            // Y at each grid clock time.
            let mut y_at = vec![0.0f64; taus.len()];
            let mut level = 0.0f64;
            let mut prev_time = 0.0f64;
            for &idx in &order {
                let dt = taus[idx] - prev_time;
                level += sampler.sample(dt, cfg, &mut rng);
                prev_time = taus[idx];
                y_at[idx] = level;
            }
            // Integration by parts with left-endpoint sums for the
            // Stieltjes term against dh.
            let boundary = hs[n] * y_at[n] - hs[0] * y_at[0];
            let mut stieltjes = 0.0f64;
            for i in 0..n {
                stieltjes += y_at[i] * (hs[i + 1] - hs[i]);
            }
            boundary - stieltjes
        })
        .collect();

    Ok(IntegralSample {
        values,
        map: map.clone(),
        law: law.clone(),
        config: cfg.clone(),
        warnings,
    })
}

/// One point of an empirical characteristic function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CfPoint {
    pub y: f64,
    pub re: f64,
    pub im: f64,
    pub stderr: f64,
}

/// (1/n) Σ e^{iyX_k} per grid point, with compensated summation so the
/// result is independent of aggregation order.
pub fn empirical_cf(values: &[f64], y_grid: &[f64]) -> Result<Vec<CfPoint>> {
    if values.len() < 100 {
        return Err(CalcError::invalid(
            "empirical cf",
            "need at least 100 samples",
        ));
    }
    let n = values.len() as f64;
    let mut out = Vec::with_capacity(y_grid.len());
    for &y in y_grid {
        let mut sum_re = 0.0f64;
        let mut c_re = 0.0f64;
        let mut sum_im = 0.0f64;
        let mut c_im = 0.0f64;
        for &x in values {
            let (s, c) = (y * x).sin_cos();
            let t = sum_re + (c - c_re);
            c_re = (t - sum_re) - (c - c_re);
            sum_re = t;
            let t = sum_im + (s - c_im);
            c_im = (t - sum_im) - (s - c_im);
            sum_im = t;
        }
        let re = sum_re / n;
        let im = sum_im / n;
        let stderr = ((1.0 - (re * re + im * im)).max(0.0) / n).sqrt();
        out.push(CfPoint { y, re, im, stderr });
    }
    Ok(out)
}

/// One comparison row of a validation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub y: f64,
    pub cf_empirical_re: f64,
    pub cf_empirical_im: f64,
    pub cf_analytic_re: f64,
    pub cf_analytic_im: f64,
    pub stderr: f64,
}

/// Monte Carlo versus analytic-transform comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub points: Vec<ValidationPoint>,
    pub sup_error: f64,
    pub threshold: f64,
    pub n_paths: usize,
    pub pass: bool,
    pub warnings: Vec<String>,
}

/// Simulates the pathwise integral and compares its empirical
/// characteristic function against exp of the analytic transformed
/// exponent. The threshold is five standard errors plus the declared
/// discretization slack.
pub fn validate_map(
    map: &IntegralMap,
    law: &LevyTriple,
    cfg: &PathConfig,
    y_grid: &[f64],
    discretization_slack: f64,
    tol: QuadTol,
) -> Result<ValidationReport> {
    let sample = pathwise_integral(map, law, cfg)?;
    let empirical = empirical_cf(&sample.values, y_grid)?;

    let phi = transform_exponent(map, &law.exponent_fn(tol), tol);
    let mut points = Vec::with_capacity(y_grid.len());
    let mut sup_error: f64 = 0.0;
    for pt in &empirical {
        let analytic = phi.eval(pt.y)?.exp();
        let diff = (Complex64::new(pt.re, pt.im) - analytic).norm();
        sup_error = sup_error.max(diff);
        points.push(ValidationPoint {
            y: pt.y,
            cf_empirical_re: pt.re,
            cf_empirical_im: pt.im,
            cf_analytic_re: analytic.re,
            cf_analytic_im: analytic.im,
            stderr: pt.stderr,
        });
    }
    let threshold = 5.0 / (cfg.n_paths as f64).sqrt() + discretization_slack;
    Ok(ValidationReport {
        points,
        sup_error,
        threshold,
        n_paths: cfg.n_paths,
        pass: sup_error < threshold,
        warnings: sample.warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::id_measures::{LevyMeasure, DEFAULT_Y_GRID};
    use crate::kernels::{Interval, SpaceTransform, TimeChange};

    fn cp_law() -> LevyTriple {
        LevyTriple::new(
            0.1,
            0.2,
            LevyMeasure::atoms(vec![
                Atom::new(0.6, 0.8),
                Atom::new(1.5, 0.5),
                Atom::new(-1.0, 0.4),
            ]),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_increment_moments() {
        let law = LevyTriple::new(0.5, 2.0, LevyMeasure::empty()).unwrap();
        let cfg = PathConfig::new(1, 2, 0.01, 3).unwrap();
        let mut rng = path_rng(3, 0);
        let xs = sample_levy_increments(&law, 1.0, 100_000, &cfg, &mut rng).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        // 4-sigma bounds on the moment estimators.
        assert!((mean - 0.5).abs() < 4.0 * (2.0f64 / n).sqrt(), "mean {mean}");
        assert!(
            (var - 2.0).abs() < 4.0 * 2.0 * (2.0 / n).sqrt(),
            "variance {var}"
        );
    }

    #[test]
    fn poisson_jump_counts() {
        // Single unit atom: counts recover exactly and follow the Poisson
        // law (chi-square goodness of fit, fixed stream).
        let lambda = 2.0;
        let dt = 0.5;
        let law = LevyTriple::compound_poisson(vec![Atom::new(1.0, lambda)]).unwrap();
        let cfg = PathConfig::new(1, 2, 0.01, 9).unwrap();
        let mut rng = path_rng(9, 0);
        let n = 20_000usize;
        let xs = sample_levy_increments(&law, dt, n, &cfg, &mut rng).unwrap();
        // x = count - lambda dt (the atom sits inside the ball).
        let mean_rate = lambda * dt;
        let counts: Vec<usize> = xs
            .iter()
            .map(|x| (x + mean_rate).round() as usize)
            .collect();
        let k_max = 8usize;
        let mut observed = vec![0.0f64; k_max + 1];
        for &k in &counts {
            observed[k.min(k_max)] += 1.0;
        }
        let mut pmf = vec![0.0f64; k_max + 1];
        let mut acc = (-mean_rate).exp();
        for k in 0..k_max {
            pmf[k] = acc;
            acc *= mean_rate / (k as f64 + 1.0);
        }
        pmf[k_max] = 1.0 - pmf[..k_max].iter().sum::<f64>();
        let chi2: f64 = (0..=k_max)
            .map(|k| {
                let e = pmf[k] * n as f64;
                (observed[k] - e) * (observed[k] - e) / e
            })
            .sum();
        // 0.999 quantile of chi-square with 8 degrees of freedom is 26.12.
        assert!(chi2 < 26.12, "chi2 {chi2}");
    }

    #[test]
    fn stable_increments_match_cf() {
        let law = LevyTriple::new(
            0.0,
            0.0,
            LevyMeasure::Parametric {
                family: Parametric::SymStable {
                    index: 1.4,
                    coeff: 0.5,
                },
            },
        )
        .unwrap();
        let cfg = PathConfig::new(1, 2, 0.01, 21).unwrap();
        let mut rng = path_rng(21, 0);
        let dt = 0.7;
        let n = 50_000usize;
        let xs = sample_levy_increments(&law, dt, n, &cfg, &mut rng).unwrap();
        let cf = empirical_cf(&xs, &[0.5, 1.0, 2.0]).unwrap();
        let scale = Parametric::stable_scale(1.4, 0.5);
        for pt in cf {
            let expected = (-scale * dt * pt.y.abs().powf(1.4)).exp();
            let diff = (Complex64::new(pt.re, pt.im) - Complex64::new(expected, 0.0)).norm();
            assert!(diff < 5.0 / (n as f64).sqrt(), "y {}: diff {diff}", pt.y);
        }
    }

    #[test]
    fn empirical_cf_degenerate_and_zero() {
        let xs = vec![2.0; 500];
        let cf = empirical_cf(&xs, &[0.0, 1.3]).unwrap();
        assert_eq!(cf[0].re, 1.0);
        assert_eq!(cf[0].im, 0.0);
        let expected = Complex64::new(0.0, 1.3 * 2.0).exp();
        assert!((Complex64::new(cf[1].re, cf[1].im) - expected).norm() < 1e-12);
        assert!(cf[0].stderr <= 1.0 / (500f64).sqrt());
    }

    #[test]
    fn identity_map_reproduces_the_law() {
        let law = cp_law();
        let cfg = PathConfig::new(20_000, 50, 0.01, 5).unwrap();
        let report = validate_map(
            &IntegralMap::identity(),
            &law,
            &cfg,
            &DEFAULT_Y_GRID,
            0.0,
            QuadTol::default(),
        )
        .unwrap();
        // No discretization error for the neutral map: 3 standard errors.
        assert!(
            report.sup_error < 3.0 / (cfg.n_paths as f64).sqrt(),
            "sup {}",
            report.sup_error
        );
    }

    #[test]
    fn constant_space_transform_is_a_pure_boundary_term() {
        // h ≡ 2 with a finite clock: the integral is 2 Y(r(b) - r(a)).
        let map = IntegralMap::new(
            SpaceTransform::Const { value: 2.0 },
            TimeChange::Linear,
            Interval::unit(),
        )
        .unwrap();
        let law = cp_law();
        let cfg = PathConfig::new(20_000, 40, 0.01, 6).unwrap();
        let report = validate_map(&map, &law, &cfg, &DEFAULT_Y_GRID, 0.0, QuadTol::default())
            .unwrap();
        assert!(report.pass, "sup {}", report.sup_error);
    }

    #[test]
    fn linear_map_gaussian_variance() {
        // h = t, r = t on (0, 1] maps unit Gaussian variance to 1/3.
        let map = IntegralMap::u_beta(1.0).unwrap();
        let law = LevyTriple::gaussian(1.0);
        let cfg = PathConfig::new(20_000, 400, 0.01, 7).unwrap();
        let sample = pathwise_integral(&map, &law, &cfg).unwrap();
        let n = sample.values.len() as f64;
        let mean = sample.values.iter().sum::<f64>() / n;
        let var = sample
            .values
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / n;
        // Var estimator sd ≈ var·sqrt(2/n); allow 5 plus grid bias.
        assert!(
            (var - 1.0 / 3.0).abs() < 5.0 * (1.0 / 3.0) * (2.0 / n).sqrt() + 2e-3,
            "variance {var}"
        );
    }

    #[test]
    fn decreasing_clock_reflected_construction() {
        // r(t) = 1 - t on (0, 1]: the simulated law must match the
        // analytic transform, which reflects the driving law.
        let map = IntegralMap::new(
            SpaceTransform::Linear,
            TimeChange::Flipped {
                inner: Box::new(TimeChange::Linear),
                anchor: 1.0,
            },
            Interval::unit(),
        )
        .unwrap();
        let law = cp_law();
        let cfg = PathConfig::new(20_000, 300, 0.01, 8).unwrap();
        let report = validate_map(&map, &law, &cfg, &DEFAULT_Y_GRID, 0.005, QuadTol::default())
            .unwrap();
        assert!(report.pass, "sup {} vs {}", report.sup_error, report.threshold);
    }

    #[test]
    fn determinism_bit_identical() {
        let map = IntegralMap::u_beta(1.0).unwrap();
        let law = cp_law();
        let cfg = PathConfig::new(500, 30, 0.01, 1234).unwrap();
        let a = pathwise_integral(&map, &law, &cfg).unwrap();
        let b = pathwise_integral(&map, &law, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        let mut other = cfg.clone();
        other.seed = 1235;
        let c = pathwise_integral(&map, &law, &other).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn grid_refinement_reduces_discretization_error() {
        // Gaussian case: the exact transformed law is known, so the
        // comparison error isolates the Stieltjes-sum discretization.
        let map = IntegralMap::u_beta(1.0).unwrap();
        let law = LevyTriple::gaussian(1.0);
        let grid = [0.5, 1.0, 2.0];
        let mut med = Vec::new();
        for res in [2usize, 8, 64] {
            let cfg = PathConfig::new(50_000, res, 0.01, 4242).unwrap();
            let report =
                validate_map(&map, &law, &cfg, &grid, 0.0, QuadTol::default()).unwrap();
            let mut errs: Vec<f64> = report
                .points
                .iter()
                .map(|p| {
                    (Complex64::new(p.cf_empirical_re, p.cf_empirical_im)
                        - Complex64::new(p.cf_analytic_re, p.cf_analytic_im))
                    .norm()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            med.push(errs[errs.len() / 2]);
        }
        assert!(
            med[0] > med[1] && med[1] >= med[2] - 5e-3,
            "medians {med:?}"
        );
    }

    #[test]
    fn unbounded_interval_requires_truncation() {
        let err = pathwise_integral(
            &IntegralMap::class_l(),
            &cp_law(),
            &PathConfig::new(10, 10, 0.01, 1).unwrap(),
        );
        assert!(err.is_err());
    }

    #[test]
    fn truncated_selfdecomposable_map_validates() {
        let map = IntegralMap::class_l();
        let law = cp_law();
        let cfg = PathConfig::new(20_000, 2_000, 0.01, 99)
            .unwrap()
            .with_truncation(20.0);
        let report = validate_map(&map, &law, &cfg, &DEFAULT_Y_GRID, 0.0, QuadTol::default())
            .unwrap();
        assert!(report.pass, "sup {} vs {}", report.sup_error, report.threshold);
    }

    #[test]
    fn doubling_paths_with_fresh_seed_stays_valid() {
        let map = IntegralMap::u_beta(1.0).unwrap();
        let law = cp_law();
        for (n, seed) in [(10_000usize, 31u64), (20_000, 32)] {
            let cfg = PathConfig::new(n, 60, 0.01, seed).unwrap();
            let report =
                validate_map(&map, &law, &cfg, &DEFAULT_Y_GRID, 0.0, QuadTol::default()).unwrap();
            assert!(report.pass, "n {n}: sup {}", report.sup_error);
        }
    }
}
