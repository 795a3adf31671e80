//! Monte Carlo validation harness: empirical distributions of the squared
//! triangular diagonal, the pure-noise chi-square law, replicated density
//! estimates and the smoothing monotonicity study.
//!
//! Replicates derive per-index generators from one master seed, so runs are
//! reproducible bit-for-bit regardless of the number of worker threads:
//! parallel maps collect into replicate-ordered buffers and all reductions
//! happen sequentially on those buffers.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{self, DensityField, Grid, SmoothingParams};
use crate::laguerre::{self, LaguerreExpansion};
use crate::linalg::{qr_gram_schmidt, ComplexMatrix};
use crate::model::{self, derive_rng};
use crate::special::{chi2_cdf, ks_critical, ks_statistic};
use crate::{Error, Result};

/// Plain counting histogram.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// Freedman-Diaconis binning over the sample range.
    pub fn freedman_diaconis(samples: &[f64]) -> Self {
        assert!(!samples.is_empty());
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
        let n = sorted.len();
        let q = |frac: f64| sorted[((n - 1) as f64 * frac).round() as usize];
        let iqr = q(0.75) - q(0.25);
        let lo = sorted[0];
        let hi = sorted[n - 1];
        let width = 2.0 * iqr * (n as f64).powf(-1.0 / 3.0);
        let bins = if width > 0.0 && hi > lo {
            (((hi - lo) / width).ceil() as usize).clamp(1, 2000)
        } else {
            1
        };
        Self::with_bins(lo, hi, bins, samples)
    }

    /// Fixed equal-width bins on `[lo, hi]`; samples outside are clipped to
    /// the boundary bins.
    pub fn with_bins(lo: f64, hi: f64, bins: usize, samples: &[f64]) -> Self {
        assert!(bins >= 1 && hi >= lo);
        let span = (hi - lo).max(f64::MIN_POSITIVE);
        let edges: Vec<f64> = (0..=bins).map(|i| lo + span * i as f64 / bins as f64).collect();
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let idx = (((x - lo) / span) * bins as f64).floor() as isize;
            let idx = idx.clamp(0, bins as isize - 1) as usize;
            counts[idx] += 1;
        }
        Histogram { edges, counts, total: samples.len() as u64 }
    }

    pub fn bin_width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.edges[i] + self.edges[i + 1])
    }

    /// Empirical density value of bin `i`.
    pub fn density(&self, i: usize) -> f64 {
        self.counts[i] as f64 / (self.total as f64 * self.bin_width(i))
    }
}

/// Empirical study of `R_kk^2` at one lattice point.
#[derive(Debug, Clone)]
pub struct RkkEmpirical {
    /// 1-based diagonal index.
    pub k: usize,
    pub samples: Vec<f64>,
    pub histogram: Histogram,
    /// Raw sample moments `E[Y^r]`, `r = 1..=10`.
    pub moments: [f64; 10],
}

/// Replicated draws of `R_kk^2(z)` for several diagonal indices at once
/// (one pencil per replicate, shared across the requested `k`).
pub fn empirical_rkk_multi(
    signal: &[Complex64],
    sigma: f64,
    n_replicates: usize,
    z: Complex64,
    ks: &[usize],
    seed: u64,
) -> Result<Vec<RkkEmpirical>> {
    let n = signal.len();
    if n < 4 || n % 2 != 0 {
        return Err(Error::contract(format!("signal length must be even and >= 4, got {n}")));
    }
    let p = n / 2;
    if ks.is_empty() || ks.iter().any(|&k| k == 0 || k > p) {
        return Err(Error::contract(format!("diagonal indices must lie in 1..={p}")));
    }
    if n_replicates < 1 {
        return Err(Error::contract("need at least one replicate"));
    }
    let rows: Vec<Vec<f64>> = (0..n_replicates)
        .into_par_iter()
        .map_init(
            || crate::density::ProfileWorkspace::new(p),
            |ws, r| {
                let mut rng = derive_rng(seed, r as u64);
                let series = model::add_noise(signal, sigma, &mut rng);
                let pencil = model::build_pencil(&series).expect("validated length");
                let profile = ws.profile(&pencil, z);
                ks.iter().map(|&k| profile[k - 1]).collect()
            },
        )
        .collect();
    let out = ks
        .iter()
        .enumerate()
        .map(|(col, &k)| {
            let samples: Vec<f64> = rows.iter().map(|row| row[col]).collect();
            let mut moments = [0.0; 10];
            for &y in &samples {
                let mut pow = 1.0;
                for m in moments.iter_mut() {
                    pow *= y;
                    *m += pow;
                }
            }
            for m in moments.iter_mut() {
                *m /= samples.len() as f64;
            }
            let histogram = Histogram::freedman_diaconis(&samples);
            RkkEmpirical { k, samples, histogram, moments }
        })
        .collect();
    Ok(out)
}

/// Single-index variant of [`empirical_rkk_multi`].
pub fn empirical_rkk(
    signal: &[Complex64],
    sigma: f64,
    n_replicates: usize,
    z: Complex64,
    k: usize,
    seed: u64,
) -> Result<RkkEmpirical> {
    Ok(empirical_rkk_multi(signal, sigma, n_replicates, z, &[k], seed)?.remove(0))
}

/// L2 distances between the fitted truncated densities and the empirical
/// histogram, one value per requested truncation order. The coefficients
/// are fitted from the samples (stable also when the law is concentrated
/// and the equivalent moment formula cancels).
pub fn fit_vs_histogram_l2(emp: &RkkEmpirical, orders: &[usize]) -> Result<(LaguerreExpansion, Vec<f64>)> {
    let max_order = orders.iter().copied().max().unwrap_or(0).max(2);
    let expansion = laguerre::fit_from_samples(&emp.samples, max_order)?;
    let hist = &emp.histogram;
    let distances = orders
        .iter()
        .map(|&order| {
            let mut acc = 0.0;
            for i in 0..hist.counts.len() {
                let y = hist.center(i).max(0.0);
                let fitted = laguerre::density_eval(&expansion, y, order);
                let diff = fitted - hist.density(i);
                acc += diff * diff * hist.bin_width(i);
            }
            acc.sqrt()
        })
        .collect();
    Ok((expansion, distances))
}

/// Draws of `R_kk^2` from pure unit-per-component complex Gaussian matrices
/// (the regime in which the law is exactly chi-square with `2(p-k+1)`
/// degrees of freedom).
pub fn chi2_samples(p: usize, k: usize, n_replicates: usize, seed: u64) -> Result<Vec<f64>> {
    if k == 0 || k > p {
        return Err(Error::contract(format!("k must lie in 1..={p}")));
    }
    Ok((0..n_replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_rng(seed, r as u64);
            let g = ComplexMatrix::from_fn(p, p, |_, _| {
                Complex64::new(
                    rng.sample(rand_distr::StandardNormal),
                    rng.sample(rand_distr::StandardNormal),
                )
            });
            qr_gram_schmidt(&g).diag_sq[k - 1]
        })
        .collect())
}

/// Goodness-of-fit report of `R_kk^2` against `chi^2_{2(p-k+1)}`.
#[derive(Debug, Clone, Serialize)]
pub struct Chi2Report {
    pub p: usize,
    pub k: usize,
    pub df: f64,
    pub n_replicates: usize,
    pub seed: u64,
    pub mean: f64,
    pub mean_expected: f64,
    pub variance: f64,
    pub variance_expected: f64,
    pub ks_statistic: f64,
    pub ks_critical_1pct: f64,
    pub pass_mean: bool,
    pub pass_variance: bool,
    pub pass_ks: bool,
    pub pass: bool,
}

/// Compare the empirical law of `R_kk^2` under pure unit noise with a
/// chi-square reference of `df` degrees of freedom.
pub fn chi2_check_against(
    p: usize,
    k: usize,
    n_replicates: usize,
    seed: u64,
    df: f64,
) -> Result<Chi2Report> {
    let mut samples = chi2_samples(p, k, n_replicates, seed)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let variance = samples.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let ks = ks_statistic(&mut samples, |x| chi2_cdf(df, x).expect("df > 0"));
    let critical = ks_critical(0.01, n_replicates);
    let pass_mean = (mean / df - 1.0).abs() <= 0.01;
    let pass_variance = (variance / (2.0 * df) - 1.0).abs() <= 0.03;
    let pass_ks = ks < critical;
    Ok(Chi2Report {
        p,
        k,
        df,
        n_replicates,
        seed,
        mean,
        mean_expected: df,
        variance,
        variance_expected: 2.0 * df,
        ks_statistic: ks,
        ks_critical_1pct: critical,
        pass_mean,
        pass_variance,
        pass_ks,
        pass: pass_mean && pass_variance && pass_ks,
    })
}

/// Chi-square check with the correct reference `df = 2(p - k + 1)`.
pub fn chi2_check(p: usize, k: usize, n_replicates: usize, seed: u64) -> Result<Chi2Report> {
    chi2_check_against(p, k, n_replicates, seed, 2.0 * (p - k + 1) as f64)
}

/// Replicated smoothed density: `n_replicates` independent records feed one
/// averaged potential (the Monte Carlo variant of the estimator).
pub fn mc_condensed_density(
    signal: &[Complex64],
    sigma: f64,
    n_replicates: usize,
    grid: &Grid,
    params: &SmoothingParams,
    seed: u64,
) -> Result<DensityField> {
    if n_replicates < 1 {
        return Err(Error::contract("need at least one replicate"));
    }
    let pencils: Vec<_> = (0..n_replicates)
        .map(|r| {
            let mut rng = derive_rng(seed, r as u64);
            let series = model::add_noise(signal, sigma, &mut rng);
            model::build_pencil(&series)
        })
        .collect::<Result<_>>()?;
    density::condensed_density_grid(&pencils, grid, params)
}

/// Gamma fit of `R_kk^2(z)` at one noise level, with a bootstrap standard
/// error for the scale parameter.
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityPoint {
    pub sigma: f64,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub beta_se: f64,
}

/// Fitted Gamma parameters per noise level. The scale `beta_k` is expected
/// to be nondecreasing in `sigma^2`; the report states whether that holds
/// within two bootstrap standard errors (an observational check, not a
/// hypothesis test).
#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub k: usize,
    #[serde(with = "crate::model::serde_complex")]
    pub z: Complex64,
    pub n_replicates: usize,
    pub n_bootstrap: usize,
    pub seed: u64,
    pub points: Vec<MonotonicityPoint>,
    pub beta_nondecreasing_within_error: bool,
}

fn gamma_fit(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let g1 = samples.iter().sum::<f64>() / n;
    let g2 = samples.iter().map(|&x| x * x).sum::<f64>() / n;
    let var = g2 - g1 * g1;
    (g1 * g1 / var, var / g1)
}

/// Fit `(alpha_k, beta_k)` from Monte Carlo draws of `R_kk^2(z)` at each
/// noise level in `sigmas` (strictly positive, nondecreasing).
pub fn monotonicity_check(
    signal: &[Complex64],
    sigmas: &[f64],
    z: Complex64,
    k: usize,
    n_replicates: usize,
    n_bootstrap: usize,
    seed: u64,
) -> Result<MonotonicityReport> {
    if sigmas.len() < 2 {
        return Err(Error::contract("need at least two noise levels"));
    }
    if sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::contract("noise levels must be positive"));
    }
    let mut points = Vec::with_capacity(sigmas.len());
    for (si, &sigma) in sigmas.iter().enumerate() {
        // distinct master stream per noise level
        let level_seed = seed ^ ((si as u64 + 1) << 32);
        let emp = empirical_rkk(signal, sigma, n_replicates, z, k, level_seed)?;
        let (alpha_hat, beta_hat) = gamma_fit(&emp.samples);
        let mut boot_rng = derive_rng(level_seed, u64::MAX);
        let mut betas = Vec::with_capacity(n_bootstrap);
        for _ in 0..n_bootstrap {
            let resample: Vec<f64> = (0..emp.samples.len())
                .map(|_| emp.samples[boot_rng.random_range(0..emp.samples.len())])
                .collect();
            betas.push(gamma_fit(&resample).1);
        }
        let mean_b = betas.iter().sum::<f64>() / betas.len() as f64;
        let beta_se = (betas.iter().map(|b| (b - mean_b) * (b - mean_b)).sum::<f64>()
            / (betas.len() as f64 - 1.0))
            .sqrt();
        points.push(MonotonicityPoint { sigma, alpha_hat, beta_hat, beta_se });
    }
    let beta_nondecreasing_within_error = points.windows(2).all(|w| {
        w[1].beta_hat >= w[0].beta_hat - 2.0 * (w[0].beta_se + w[1].beta_se)
    });
    Ok(MonotonicityReport {
        k,
        z,
        n_replicates,
        n_bootstrap,
        seed,
        points,
        beta_nondecreasing_within_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{synth_signal, ExponentialModel};
    use approx::assert_relative_eq;

    #[test]
    fn histogram_bins_and_density() {
        let samples = [0.5, 1.5, 1.5, 2.5];
        let h = Histogram::with_bins(0.0, 3.0, 3, &samples);
        assert_eq!(h.counts, vec![1, 2, 1]);
        assert_eq!(h.total, 4);
        assert_relative_eq!(h.density(1), 0.5, epsilon = 1e-12);
        assert_relative_eq!(h.center(0), 0.5, epsilon = 1e-12);
        // density integrates to one
        let mass: f64 = (0..3).map(|i| h.density(i) * h.bin_width(i)).sum();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn pure_noise_first_diagonal_mean() {
        let signal = vec![Complex64::new(0.0, 0.0); 8]; // p = 4
        let emp =
            empirical_rkk(&signal, 1.0, 100_000, Complex64::new(0.0, 0.0), 1, 99).unwrap();
        // E R_11^2 = 2p = 8 per-component unit variance
        assert!((emp.moments[0] / 8.0 - 1.0).abs() < 0.01, "mean {}", emp.moments[0]);
    }

    #[test]
    fn moments_converge_with_replicates() {
        let model = ExponentialModel::benchmark_five();
        let signal = synth_signal(&model, 20);
        let z = Complex64::new(0.54, 0.8);
        let small = empirical_rkk(&signal, 0.5, 1_000, z, 3, 5).unwrap();
        let mid = empirical_rkk(&signal, 0.5, 10_000, z, 3, 5).unwrap();
        let large = empirical_rkk(&signal, 0.5, 100_000, z, 3, 5).unwrap();
        let err_small = (small.moments[0] - large.moments[0]).abs();
        let err_mid = (mid.moments[0] - large.moments[0]).abs();
        assert!(
            err_mid < err_small,
            "first moment not converging: {err_small} vs {err_mid}"
        );
    }

    #[test]
    fn replicates_are_deterministic() {
        let signal = vec![Complex64::new(1.0, 0.0); 8];
        let a = empirical_rkk(&signal, 0.3, 2_000, Complex64::new(0.2, 0.1), 2, 7).unwrap();
        let b = empirical_rkk(&signal, 0.3, 2_000, Complex64::new(0.2, 0.1), 2, 7).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.moments, b.moments);
    }

    #[test]
    fn chi2_law_holds_for_first_and_last_diagonal() {
        let report = chi2_check(8, 1, 100_000, 11).unwrap();
        assert!(report.pass, "k=1 report {report:?}");
        assert!((report.mean - 16.0).abs() < 0.16);
        let report = chi2_check(8, 8, 100_000, 12).unwrap();
        assert!(report.pass, "k=8 report {report:?}");
        assert!((report.mean - 2.0).abs() < 0.02);
        assert!((report.variance - 4.0).abs() < 0.12);
    }

    #[test]
    fn chi2_wrong_reference_fails() {
        // deliberately offset degrees of freedom: 2(p-k) instead of 2(p-k+1)
        let report = chi2_check_against(8, 1, 100_000, 11, 14.0).unwrap();
        assert!(!report.pass_ks, "wrong reference must fail the KS test");
        assert!(!report.pass);
    }

    #[test]
    fn single_replicate_density_equals_direct_path() {
        let model = ExponentialModel::benchmark_five();
        let signal = synth_signal(&model, 16);
        let grid = Grid::new(-1.2, -1.2, 0.1, 25).unwrap();
        let params = SmoothingParams::new(0.4, 80.0).unwrap();
        let mc = mc_condensed_density(&signal, 0.4, 1, &grid, &params, 31).unwrap();
        let mut rng = derive_rng(31, 0);
        let series = model::add_noise(&signal, 0.4, &mut rng);
        let pencil = model::build_pencil(&series).unwrap();
        let direct = density::condensed_density_grid(&[pencil], &grid, &params).unwrap();
        assert_eq!(mc.potential(), direct.potential());
        assert_eq!(mc.density(), direct.density());
    }

    #[test]
    fn monotonicity_beta_grows_with_sigma() {
        let model = ExponentialModel::benchmark_five();
        let signal = synth_signal(&model, 20);
        let z = Complex64::new(0.54, 0.8);
        let report =
            monotonicity_check(&signal, &[0.1, 0.2, 0.4], z, 5, 20_000, 100, 3).unwrap();
        assert!(report.beta_nondecreasing_within_error, "{report:?}");
        // strict growth is expected at these separations
        assert!(report.points[2].beta_hat > report.points[0].beta_hat);
    }

    #[test]
    fn monotonicity_vanishing_noise_gives_vanishing_beta() {
        let model = ExponentialModel::benchmark_five();
        let signal = synth_signal(&model, 20);
        let z = Complex64::new(0.54, 0.8);
        let report =
            monotonicity_check(&signal, &[1e-3, 0.4], z, 5, 5_000, 50, 4).unwrap();
        assert!(report.points[0].beta_hat < 1e-3 * report.points[1].beta_hat);
    }

    #[test]
    fn monotonicity_identical_sigmas_agree_within_noise() {
        let model = ExponentialModel::benchmark_five();
        let signal = synth_signal(&model, 20);
        let z = Complex64::new(0.54, 0.8);
        let report =
            monotonicity_check(&signal, &[0.3, 0.3], z, 5, 20_000, 100, 8).unwrap();
        let (a, b) = (&report.points[0], &report.points[1]);
        assert!(
            (a.beta_hat - b.beta_hat).abs() < 4.0 * (a.beta_se + b.beta_se),
            "{a:?} vs {b:?}"
        );
    }

    #[test]
    fn fit_distances_decrease_with_order_on_benchmark() {
        let model = ExponentialModel::benchmark_five();
        let signal = synth_signal(&model, 74);
        let z = Complex64::new(1.0f64.cos(), 0.8);
        let emp = empirical_rkk(&signal, 0.5, 20_000, z, 18, 6).unwrap();
        let (expansion, d) = fit_vs_histogram_l2(&emp, &[0, 10]).unwrap();
        assert!(expansion.alpha > 0.0 && expansion.beta > 0.0);
        assert!(d[1] < d[0], "10-term distance {} should beat 1-term {}", d[1], d[0]);
    }
}
