//! Signal synthesis, complex Gaussian noise and Hankel pencil construction.
//!
//! Noise convention: the real and imaginary parts of each sample are
//! independent zero-mean Gaussians with variance `sigma^2` each, so
//! `E|eps_k|^2 = 2 sigma^2`. This is the convention under which the pencil
//! column covariance is `sigma^2 * R(Z)` with `1 + |z|^2` on the diagonal,
//! and under which pure unit noise makes `R_kk^2` exactly chi-square.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, ComplexMatrix};
use crate::{Error, Result};

/// Serialize a complex value as a `[re, im]` pair.
pub mod serde_complex {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Complex64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(Complex64::new(re, im))
    }
}

/// Serialize a sequence of complex values as `[[re, im], ...]`.
pub mod serde_complex_vec {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(
        v: &[Complex64],
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

/// One complex exponential component: amplitude `c` and node `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    #[serde(with = "serde_complex")]
    pub c: Complex64,
    #[serde(with = "serde_complex")]
    pub xi: Complex64,
}

/// Ground-truth description of a signal `s_k = sum_j c_j xi_j^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialModel {
    pub components: Vec<Component>,
}

impl ExponentialModel {
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let model = ExponentialModel { components };
        model.validate()?;
        Ok(model)
    }

    /// Number of components `p*`.
    pub fn p_star(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::contract("model needs at least one component"));
        }
        for (j, comp) in self.components.iter().enumerate() {
            if !(comp.c.norm() > 0.0) {
                return Err(Error::contract(format!("component {j} has zero amplitude")));
            }
            if !comp.c.is_finite() || !comp.xi.is_finite() {
                return Err(Error::contract(format!("component {j} is not finite")));
            }
        }
        for i in 0..self.components.len() {
            for j in (i + 1)..self.components.len() {
                if self.components[i].xi == self.components[j].xi {
                    return Err(Error::contract(format!("nodes {i} and {j} coincide")));
                }
            }
        }
        Ok(())
    }

    /// The five-component damped-exponential benchmark used throughout the
    /// test-suite and docs: amplitudes `[6, 3, 1, 1, 20]`, nodes
    /// `exp(d_j + i 2 pi f_j)` with two components closer than the Nyquist
    /// resolution (a super-resolution configuration).
    pub fn benchmark_five() -> Self {
        let node = |damp: f64, freq: f64| {
            Complex64::new(damp, std::f64::consts::TAU * freq).exp()
        };
        let amp = |a: f64| Complex64::new(a, 0.0);
        ExponentialModel {
            components: vec![
                Component { c: amp(6.0), xi: node(-0.1, -0.3) },
                Component { c: amp(3.0), xi: node(-0.05, -0.28) },
                Component { c: amp(1.0), xi: node(-0.0001, 0.2) },
                Component { c: amp(1.0), xi: node(-0.0001, 0.21) },
                Component { c: amp(20.0), xi: node(-0.3, -0.35) },
            ],
        }
    }
}

/// A noisy record `a_k = s_k + eps_k` together with its noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisySeries {
    pub a: Vec<Complex64>,
    pub sigma: f64,
}

impl NoisySeries {
    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn norm(&self) -> f64 {
        self.a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Evaluate `s_k = sum_j c_j xi_j^k` for `k = 0..n`.
pub fn synth_signal(model: &ExponentialModel, n: usize) -> Vec<Complex64> {
    assert!(n >= 2, "need at least two samples");
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for comp in &model.components {
        let mut power = Complex64::new(1.0, 0.0);
        for s in out.iter_mut() {
            *s += comp.c * power;
            power *= comp.xi;
        }
    }
    out
}

/// Add complex white Gaussian noise (variance `sigma^2` per real component).
pub fn add_noise(s: &[Complex64], sigma: f64, rng: &mut impl Rng) -> NoisySeries {
    assert!(sigma >= 0.0);
    let a = s
        .iter()
        .map(|&sk| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            sk + Complex64::new(sigma * re, sigma * im)
        })
        .collect();
    NoisySeries { a, sigma }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-stream generator derived from a master seed. Streams
/// with different indices are statistically independent, so replicated
/// experiments parallelize without sharing generator state.
pub fn derive_rng(master: u64, stream: u64) -> ChaCha8Rng {
    let mixed = splitmix64(master ^ splitmix64(stream));
    ChaCha8Rng::seed_from_u64(mixed)
}

/// The Hankel pencil of a record: `U0`, `U1`, the z-independent `p x (p+1)`
/// Hankel matrix `U` with `U0 = U E0`, `U1 = U E1`, and the cached upper
/// trapezoidal factor of `U` that powers the fast per-z profile.
#[derive(Debug, Clone)]
pub struct HankelPencil {
    p: usize,
    u0: ComplexMatrix,
    u1: ComplexMatrix,
    u: ComplexMatrix,
    r_of_u: ComplexMatrix,
}

/// Build the pencil from an even-length record (`n >= 4`).
pub fn build_pencil(series: &NoisySeries) -> Result<HankelPencil> {
    let n = series.n();
    if n % 2 != 0 {
        return Err(Error::contract(format!("series length must be even, got {n}")));
    }
    if n < 4 {
        return Err(Error::contract(format!("series too short for a pencil: n={n}")));
    }
    let p = n / 2;
    let a = &series.a;
    let u0 = ComplexMatrix::from_fn(p, p, |i, j| a[i + j]);
    let u1 = ComplexMatrix::from_fn(p, p, |i, j| a[i + j + 1]);
    let u = ComplexMatrix::from_fn(p, p + 1, |i, j| a[i + j]);
    let (_, r_of_u) = linalg::qr_householder(&u);
    Ok(HankelPencil { p, u0, u1, u, r_of_u })
}

impl HankelPencil {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn u0(&self) -> &ComplexMatrix {
        &self.u0
    }

    pub fn u1(&self) -> &ComplexMatrix {
        &self.u1
    }

    pub fn u(&self) -> &ComplexMatrix {
        &self.u
    }

    /// Cached upper-trapezoidal factor of `U`.
    pub fn r_of_u(&self) -> &ComplexMatrix {
        &self.r_of_u
    }

    /// The pencil matrix `G(z) = U1 - z U0`.
    pub fn g_of(&self, z: Complex64) -> ComplexMatrix {
        let mut g = self.u1.clone();
        g.zip_apply(&self.u0, |u1e, u0e| *u1e -= z * u0e);
        g
    }
}

/// Complex amplitude least squares on explicit basis columns; shared by the
/// estimation pipeline. Returns the coefficient vector, the residual norm and
/// a condition estimate (ratio of extreme `|R_kk|`).
pub(crate) fn least_squares(
    v: &ComplexMatrix,
    b: &DVector<Complex64>,
) -> Result<(DVector<Complex64>, f64, f64)> {
    let (m, q) = (v.nrows(), v.ncols());
    if m < q || b.len() != m {
        return Err(Error::contract(format!(
            "least squares shape mismatch: {m}x{q} vs rhs {}",
            b.len()
        )));
    }
    let f = linalg::HouseholderQr::factor(v);
    let diag: Vec<f64> = f.diag_abs_sq().iter().map(|d| d.sqrt()).collect();
    let dmax = diag.iter().cloned().fold(0.0f64, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
    let y = f.q_adjoint_mul(b);
    // back substitution on the leading q x q block of R
    let r = f.r();
    let mut x = DVector::<Complex64>::zeros(q);
    for k in (0..q).rev() {
        let mut acc = y[k];
        for j in (k + 1)..q {
            acc -= r[(k, j)] * x[j];
        }
        let d = r[(k, k)];
        if d.norm() == 0.0 {
            return Err(Error::Estimation(format!(
                "rank-deficient least squares system (R[{k},{k}] = 0, cond est {cond:.3e})"
            )));
        }
        x[k] = acc / d;
    }
    let residual = (q..m).map(|i| y[i].norm_sqr()).sum::<f64>().sqrt();
    Ok((x, residual, cond))
}
