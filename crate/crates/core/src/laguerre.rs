//! Laguerre-series machinery for the distribution of the squared triangular
//! diagonal entries: generalized Laguerre coefficients, moment-based fits,
//! truncated density evaluation, the closed-form expected log, and the
//! first two moments of quadratic forms in Gaussian vectors.
//!
//! The expansion `L(alpha, beta, tau)` has a Gamma(alpha, beta) leading term
//! whose first two moments match the data; the correction coefficients `b_m`
//! are determined by the higher moments. With `tau = beta` the coefficients
//! take the binomial form implemented in [`fit_from_moments`], the moments
//! entering it scaled by `beta^r` so that fitting a Gamma to its own moments
//! terminates the series (`b_0 = 1`, `b_m = 0` for `m >= 1`).

use nalgebra::DVector;

use crate::linalg::RealMatrix;
use crate::special::{digamma, ln_binomial, ln_gamma};
use crate::{Error, Result};

/// Truncated Laguerre expansion of a density on the positive half line.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreExpansion {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    /// `b[0] = 1` when `tau == beta`.
    pub b: Vec<f64>,
}

/// Coefficient `c_hm` of `x^h` in the generalized Laguerre polynomial
/// `L_m(x, alpha) = sum_h c_hm x^h` with
/// `c_hm = (-1)^h Gamma(alpha+m) / (h! (m-h)! Gamma(alpha+h))`.
pub fn laguerre_coeff(h: usize, m: usize, alpha: f64) -> Result<f64> {
    if h > m {
        return Err(Error::contract(format!("laguerre_coeff requires h <= m, got h={h}, m={m}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain(format!("laguerre_coeff requires alpha > 0, got {alpha}")));
    }
    let ln_mag = ln_gamma(alpha + m as f64)
        - ln_gamma(h as f64 + 1.0)
        - ln_gamma((m - h) as f64 + 1.0)
        - ln_gamma(alpha + h as f64);
    let sign = if h % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * ln_mag.exp())
}

/// Evaluate `L_m(x, alpha)` by its coefficient expansion.
pub fn laguerre_eval(m: usize, alpha: f64, x: f64) -> f64 {
    let mut acc = 0.0;
    let mut x_pow = 1.0;
    for h in 0..=m {
        acc += laguerre_coeff(h, m, alpha).expect("h <= m") * x_pow;
        x_pow *= x;
    }
    acc
}

/// Fit an expansion with `tau = beta` from raw moments `gamma_hat[r-1] =
/// E[Y^r]`, `r = 1..=M`, `M >= 2`. Coefficients `b_0..b_M` are returned;
/// `b_1 = b_2 = 0` holds by moment matching.
pub fn fit_from_moments(gamma_hat: &[f64]) -> Result<LaguerreExpansion> {
    if gamma_hat.len() < 2 {
        return Err(Error::Fit(format!("need at least two moments, got {}", gamma_hat.len())));
    }
    let g1 = gamma_hat[0];
    let g2 = gamma_hat[1];
    if !(g1 > 0.0) || !(g2 > g1 * g1) {
        return Err(Error::Fit(format!(
            "degenerate moments: need gamma2 > gamma1^2 > 0, got gamma1={g1}, gamma2={g2}"
        )));
    }
    if gamma_hat.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
        return Err(Error::Fit("raw moments of a nonnegative variable must be positive".into()));
    }
    let variance = g2 - g1 * g1;
    let alpha = g1 * g1 / variance;
    let beta = variance / g1;
    // scaled log-moments ln E[(Y/beta)^r], with the r = 0 entry prepended
    let ln_beta = beta.ln();
    let mut ln_scaled = Vec::with_capacity(gamma_hat.len() + 1);
    ln_scaled.push(0.0);
    for (idx, &g) in gamma_hat.iter().enumerate() {
        let r = (idx + 1) as f64;
        ln_scaled.push(g.ln() - r * ln_beta);
    }
    let ln_gamma_alpha = ln_gamma(alpha);
    let mut b = Vec::with_capacity(gamma_hat.len() + 1);
    b.push(1.0); // exact with tau = beta
    for h in 1..=gamma_hat.len() {
        let mut acc = 0.0;
        for j in 0..=h {
            let ln_term = ln_gamma_alpha + ln_binomial(h as u32, j as u32) + ln_scaled[h - j]
                - ln_gamma(alpha + (h - j) as f64);
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * ln_term.exp();
        }
        let sign_h = if h % 2 == 0 { 1.0 } else { -1.0 };
        b.push(sign_h * acc);
    }
    Ok(LaguerreExpansion { alpha, beta, tau: beta, b })
}

/// Evaluate `L_0..L_order` at `x` by the stable three-term recurrence
/// `(m+1) L_{m+1} = (2m + alpha - x) L_m - (m + alpha - 1) L_{m-1}`.
pub fn laguerre_eval_all(order: usize, alpha: f64, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if order == 0 {
        return;
    }
    out.push(alpha - x);
    for m in 1..order {
        let mf = m as f64;
        let next = ((2.0 * mf + alpha - x) * out[m] - (mf + alpha - 1.0) * out[m - 1])
            / (mf + 1.0);
        out.push(next);
    }
}

/// Fit an expansion with `tau = beta` directly from samples. The
/// coefficients are the same moment combinations as in
/// [`fit_from_moments`] — `b_m = m! Gamma(alpha) / Gamma(alpha+m) *
/// E[L_m(Y/beta, alpha)]` expands to exactly the binomial formula — but the
/// sample average with the recurrence evaluation stays accurate when
/// `alpha` is large, where the alternating moment sum cancels
/// catastrophically.
pub fn fit_from_samples(samples: &[f64], order: usize) -> Result<LaguerreExpansion> {
    if samples.len() < 2 {
        return Err(Error::Fit("need at least two samples".into()));
    }
    let n = samples.len() as f64;
    let g1 = samples.iter().sum::<f64>() / n;
    let g2 = samples.iter().map(|&y| y * y).sum::<f64>() / n;
    if !(g1 > 0.0) || !(g2 > g1 * g1) {
        return Err(Error::Fit(format!(
            "degenerate sample moments: gamma1={g1}, gamma2={g2}"
        )));
    }
    let variance = g2 - g1 * g1;
    let alpha = g1 * g1 / variance;
    let beta = variance / g1;
    let mut sums = vec![0.0f64; order + 1];
    let mut values = Vec::with_capacity(order + 1);
    for &y in samples {
        laguerre_eval_all(order, alpha, y / beta, &mut values);
        for (s, v) in sums.iter_mut().zip(&values) {
            *s += v;
        }
    }
    let ln_gamma_alpha = ln_gamma(alpha);
    let mut b = Vec::with_capacity(order + 1);
    b.push(1.0);
    for (m, &s) in sums.iter().enumerate().skip(1) {
        let scale =
            (ln_gamma(m as f64 + 1.0) + ln_gamma_alpha - ln_gamma(alpha + m as f64)).exp();
        b.push(scale * s / n);
    }
    Ok(LaguerreExpansion { alpha, beta, tau: beta, b })
}

impl LaguerreExpansion {
    /// The leading Gamma term alone (no corrections).
    pub fn gamma_only(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::domain(format!("need alpha, beta > 0, got {alpha}, {beta}")));
        }
        Ok(LaguerreExpansion { alpha, beta, tau: beta, b: vec![1.0] })
    }

    /// Replace the free parameter `tau` (the coefficients are kept; callers
    /// experimenting with `tau != beta` should check convergence first).
    pub fn with_tau(mut self, tau: f64) -> Self {
        assert!(tau > 0.0);
        self.tau = tau;
        self
    }

    /// Sufficient condition for uniform convergence given the largest
    /// eigenvalue of the underlying covariance:
    /// `1/tau > 2 (1/beta - 1/(2 lambda_max))`.
    pub fn uniform_convergence_ok(&self, lambda_max: f64) -> bool {
        1.0 / self.tau > 2.0 * (1.0 / self.beta - 1.0 / (2.0 * lambda_max))
    }

    /// Maximum usable truncation order.
    pub fn max_order(&self) -> usize {
        self.b.len() - 1
    }
}

/// Evaluate the truncated density at `y >= 0` using terms `m = 0..=n_terms`.
/// Low truncation orders may dip slightly negative in the tails; values are
/// reported as-is.
pub fn density_eval(exp: &LaguerreExpansion, y: f64, n_terms: usize) -> f64 {
    assert!(y >= 0.0, "density is supported on y >= 0");
    assert!(
        n_terms < exp.b.len(),
        "truncation order {} exceeds available coefficients {}",
        n_terms,
        exp.b.len() - 1
    );
    let (alpha, beta, tau) = (exp.alpha, exp.beta, exp.tau);
    let kernel = if y == 0.0 {
        if alpha > 1.0 {
            0.0
        } else if alpha == 1.0 {
            1.0 / beta
        } else {
            f64::INFINITY
        }
    } else {
        ((alpha - 1.0) * y.ln() - y / beta - alpha * beta.ln() - ln_gamma(alpha)).exp()
    };
    if kernel == 0.0 {
        return 0.0;
    }
    let x = y / tau;
    let mut values = Vec::with_capacity(n_terms + 1);
    laguerre_eval_all(n_terms, alpha, x, &mut values);
    let series: f64 = exp.b[..=n_terms].iter().zip(&values).map(|(b, l)| b * l).sum();
    kernel * series
}

/// Closed-form `E[log Y]` of the truncated expansion:
/// `b_0 (log beta + psi(alpha)) + sum_m b_m sum_h c_hm (Gamma(alpha+h) /
/// Gamma(alpha)) (beta/tau)^h (log beta + psi(alpha+h))`.
/// At `n_terms = 0` this is exactly `log beta + psi(alpha)`.
///
/// When `tau = beta` the inner sum collapses to `-1/m` exactly (the
/// `log beta + psi(alpha)` part is annihilated by Laguerre orthogonality,
/// the rest telescopes through the digamma recurrence), which is also the
/// only stable evaluation for large `alpha`.
pub fn elog_closed_form(exp: &LaguerreExpansion, n_terms: usize) -> f64 {
    assert!(n_terms < exp.b.len());
    let (alpha, beta, tau) = (exp.alpha, exp.beta, exp.tau);
    let ln_beta = beta.ln();
    let mut acc = exp.b[0] * (ln_beta + digamma(alpha).expect("alpha > 0"));
    if tau == beta {
        for m in 1..=n_terms {
            acc -= exp.b[m] / m as f64;
        }
        return acc;
    }
    let ln_ratio = (beta / tau).ln();
    let ln_gamma_alpha = ln_gamma(alpha);
    for m in 1..=n_terms {
        let mut inner = 0.0;
        for h in 0..=m {
            let hf = h as f64;
            let ln_mag = ln_gamma(alpha + m as f64)
                - ln_gamma_alpha
                - ln_gamma(hf + 1.0)
                - ln_gamma((m - h) as f64 + 1.0)
                + hf * ln_ratio;
            let sign = if h % 2 == 0 { 1.0 } else { -1.0 };
            inner += sign * ln_mag.exp() * (ln_beta + digamma(alpha + hf).expect("positive"));
        }
        acc += exp.b[m] * inner;
    }
    acc
}

/// A quadratic form `x^T A x` with `x ~ N(mu, Sigma)` real Gaussian; `A` is
/// the real isomorph of a Hermitian matrix (symmetric by construction).
#[derive(Debug, Clone)]
pub struct QuadraticFormSpec {
    pub mu: DVector<f64>,
    pub sigma: RealMatrix,
    pub a_iso: RealMatrix,
}

impl QuadraticFormSpec {
    pub fn new(mu: DVector<f64>, sigma: RealMatrix, a_iso: RealMatrix) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d || a_iso.nrows() != d || a_iso.ncols() != d {
            return Err(Error::contract(format!(
                "dimension mismatch: mu {}, Sigma {}x{}, A {}x{}",
                d,
                sigma.nrows(),
                sigma.ncols(),
                a_iso.nrows(),
                a_iso.ncols()
            )));
        }
        let sym_err = |m: &RealMatrix| -> f64 {
            let mut worst = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                }
            }
            worst
        };
        let scale_s = sigma.amax().max(1e-30);
        let scale_a = a_iso.amax().max(1e-30);
        if sym_err(&sigma) > 1e-10 * scale_s || sym_err(&a_iso) > 1e-10 * scale_a {
            return Err(Error::contract("Sigma and A must be symmetric"));
        }
        Ok(QuadraticFormSpec { mu, sigma, a_iso })
    }
}

/// First two raw moments of the quadratic form:
/// `gamma1 = tr[(Sigma + mu mu^T) A]`,
/// `gamma2 = 2 tr[(Sigma + 2 mu mu^T) A Sigma A] + gamma1^2`.
pub fn qf_moments(spec: &QuadraticFormSpec) -> (f64, f64) {
    let a = &spec.a_iso;
    let s = &spec.sigma;
    let mu = &spec.mu;
    let a_mu = a * mu;
    let gamma1 = (a * s).trace() + mu.dot(&a_mu);
    let asa = a * s * a;
    let quad = mu.dot(&(&asa * mu));
    let gamma2 = 2.0 * ((s * &asa).trace() + 2.0 * quad) + gamma1 * gamma1;
    (gamma1, gamma2)
}

/// Real isomorph of the tridiagonal column covariance `Z` of a Hankel pencil
/// at `z = x + i y`: `Z` has `1 + |z|^2` on the diagonal, `-z` below and
/// `-conj(z)` above. The result is symmetric positive semidefinite with the
/// eigenvalues of `Z`, each doubled.
pub fn tridiagonal_z_isomorph(z: num_complex::Complex64, p: usize) -> RealMatrix {
    assert!(p >= 1);
    let (x, y) = (z.re, z.im);
    let diag = 1.0 + z.norm_sqr();
    let mut out = RealMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        out[(i, i)] = diag;
        out[(p + i, p + i)] = diag;
    }
    for i in 0..p.saturating_sub(1) {
        // Re Z: (-x, diag, -x) on both diagonal blocks
        out[(i + 1, i)] = -x;
        out[(i, i + 1)] = -x;
        out[(p + i + 1, p + i)] = -x;
        out[(p + i, p + i + 1)] = -x;
        // -Im Z = (y, 0, -y) upper right, Im Z = (-y, 0, y) lower left
        out[(i + 1, p + i)] = y;
        out[(i, p + i + 1)] = -y;
        out[(p + i + 1, i)] = -y;
        out[(p + i, i + 1)] = y;
    }
    out
}

/// One aggregated eigen-block of the quadratic form representation
/// `sum_r lambda_r chi^2_{nu_r}(delta_r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenComponent {
    pub lambda: f64,
    pub nu: usize,
    pub delta: f64,
}

/// Eigen representation of the quadratic form: distinct nonzero eigenvalues
/// of `Sigma^{1/2} A Sigma^{1/2}` with multiplicities (grouped at relative
/// tolerance 1e-8) and noncentralities `delta_r = sum (u_i^T Sigma^{-1/2}
/// mu)^2` over each group. Requires strictly positive definite `Sigma`.
pub fn qf_eigen_representation(spec: &QuadraticFormSpec) -> Result<Vec<EigenComponent>> {
    let d = spec.mu.len();
    let eig_s = nalgebra::SymmetricEigen::new(spec.sigma.clone());
    let min_ev = eig_s.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_ev = eig_s.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if min_ev <= 1e-12 * max_ev.max(1.0) {
        return Err(Error::Numerical(format!(
            "Sigma is numerically singular (min eigenvalue {min_ev:.3e})"
        )));
    }
    let mut sqrt_s = RealMatrix::zeros(d, d);
    let mut inv_sqrt_s = RealMatrix::zeros(d, d);
    for k in 0..d {
        let lam = eig_s.eigenvalues[k];
        let u = eig_s.eigenvectors.column(k);
        let root = lam.sqrt();
        for i in 0..d {
            for j in 0..d {
                sqrt_s[(i, j)] += root * u[i] * u[j];
                inv_sqrt_s[(i, j)] += u[i] * u[j] / root;
            }
        }
    }
    let mut b = &sqrt_s * &spec.a_iso * &sqrt_s;
    // symmetrize roundoff
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (b[(i, j)] + b[(j, i)]);
            b[(i, j)] = avg;
            b[(j, i)] = avg;
        }
    }
    let eig_b = nalgebra::SymmetricEigen::new(b);
    let w = &inv_sqrt_s * &spec.mu;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| {
        eig_b.eigenvalues[j].partial_cmp(&eig_b.eigenvalues[i]).expect("finite eigenvalues")
    });
    let lam_scale =
        eig_b.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v.abs())).max(1e-300);
    let mut out: Vec<EigenComponent> = Vec::new();
    for &idx in &order {
        let lam = eig_b.eigenvalues[idx];
        if lam.abs() <= 1e-12 * lam_scale {
            continue;
        }
        let proj = eig_b.eigenvectors.column(idx).dot(&w);
        let contrib = proj * proj;
        match out.last_mut() {
            Some(last) if (last.lambda - lam).abs() <= 1e-8 * lam_scale => {
                last.nu += 1;
                last.delta += contrib;
            }
            _ => out.push(EigenComponent { lambda: lam, nu: 1, delta: contrib }),
        }
    }
    Ok(out)
}
