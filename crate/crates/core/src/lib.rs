//! Condensed density of the generalized eigenvalues of noisy Hankel pencils.
//!
//! Given an even number `n = 2p` of noisy samples `a_k = s_k + eps_k` of a
//! signal, the pair of Hankel matrices `(U1, U0)` built from the samples forms
//! a random pencil `G(z) = U1 - z*U0`. The generalized eigenvalues of the
//! pencil (the roots of `det G(z)`) carry the nonlinear parameters of the
//! signal, but computing them directly from one noisy record is hopeless.
//! Their *condensed density* — the expected normalized counting measure of the
//! roots, `h(z) = (1/4*pi) * Laplacian of u(z)` with logarithmic potential
//! `u(z) = (1/p) E[log |det G(z)|^2]` — is a much better behaved object.
//!
//! This crate evaluates a closed-form, smoothable approximation of `h(z)` from
//! a single record: the squared triangular-factor diagonal `|R_kk(z)|^2` of
//! the QR factorization of `G(z)` is treated as the mode of a Gamma
//! distribution whose expected log has a closed form in the digamma function.
//! A cached factorization of the z-independent `p x (p+1)` Hankel matrix `U`
//! reduces the per-grid-point work to a Givens sweep over a Hessenberg matrix.
//!
//! Two applications are built on the density:
//!
//! * [`estimate`] — recover the number, nodes and amplitudes of a linear
//!   combination of complex exponentials from one noisy record;
//! * [`fourier`] — reconstruct a piecewise-constant function from noisy
//!   Fourier coefficients without Gibbs artifacts, using density maxima as
//!   breakpoint detectors.
//!
//! The [`mc`] module is a Monte Carlo harness validating the distributional
//! claims (chi-square law for pure noise, Laguerre-series approximation of the
//! law of `R_kk^2`, smoothing monotonicity).
//!
//! # Quick start
//!
//! ```
//! use hankel_pencil::model::{self, ExponentialModel};
//! use hankel_pencil::density::{self, Grid, SmoothingParams};
//!
//! let model = ExponentialModel::benchmark_five();
//! let n = 74;
//! let s = model::synth_signal(&model, n);
//! let mut rng = model::derive_rng(12345, 0);
//! let series = model::add_noise(&s, 0.2, &mut rng);
//! let pencil = model::build_pencil(&series).unwrap();
//!
//! let grid = Grid::new(-1.5, -1.5, 3.0 / 99.0, 100).unwrap();
//! let params = SmoothingParams::new(0.2, 5.0 * n as f64).unwrap();
//! let field = density::condensed_density_grid(&[pencil], &grid, &params).unwrap();
//! assert!((field.total_mass() - 1.0).abs() < 1e-9);
//! ```

// `!(x > 0.0)`-style guards are deliberate: they reject NaN along with the
// out-of-domain values, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod density;
pub mod estimate;
mod error;
pub mod fourier;
pub mod laguerre;
pub mod linalg;
pub mod mc;
pub mod model;
pub mod special;

pub use error::{Error, Result};

pub use num_complex::Complex64;
