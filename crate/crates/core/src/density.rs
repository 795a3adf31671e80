//! Logarithmic potential and condensed density on a square lattice.
//!
//! For each lattice node `z` the squared triangular diagonal `|R_kk(z)|^2`
//! of the pencil QR is computed from the cached factor of `U` by a Givens
//! sweep over the Hessenberg matrix `C(z) = R (E1 - z E0)`; the smoothed
//! potential replaces `log R_kk^2` with `psi(R_kk^2 / (sigma^2 beta) + 1)`
//! (the Gamma-mode substitution, with `beta_k = sigma^2 beta` fixed across
//! `k`), and the density is the clamped, renormalized discrete Laplacian of
//! the potential divided by `4 pi`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::linalg::{self, ComplexMatrix};
use crate::model::HankelPencil;
use crate::{Error, Result};

pub use crate::special::digamma;

/// Floor below which a squared diagonal entry is treated as an exact zero.
pub const SINGULAR_FLOOR: f64 = 1e-300;

/// Square lattice: lower-left corner, mesh size and nodes per side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub delta: f64,
    pub m: usize,
}

impl Grid {
    pub fn new(x0: f64, y0: f64, delta: f64, m: usize) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::contract(format!("mesh size must be positive, got {delta}")));
        }
        if m < 3 {
            return Err(Error::contract(format!(
                "grid needs at least 3 nodes per side for the Laplacian stencil, got {m}"
            )));
        }
        Ok(Grid { x0, y0, delta, m })
    }

    /// Default lattice of the experiments: `[-1.5, 1.5]^2` with 100 nodes.
    pub fn default_square() -> Self {
        Grid { x0: -1.5, y0: -1.5, delta: 3.0 / 99.0, m: 100 }
    }

    pub fn node(&self, ix: usize, iy: usize) -> Complex64 {
        Complex64::new(self.x0 + ix as f64 * self.delta, self.y0 + iy as f64 * self.delta)
    }
}

/// Noise scale and the dimensionless smoothing parameter `beta`; the Gamma
/// scale used everywhere is their combination `sigma^2 beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub sigma: f64,
    pub beta: f64,
}

impl SmoothingParams {
    pub fn new(sigma: f64, beta: f64) -> Result<Self> {
        let scale = sigma * sigma * beta;
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::contract(format!(
                "sigma^2 * beta must be positive and finite, got sigma={sigma}, beta={beta}"
            )));
        }
        Ok(SmoothingParams { sigma, beta })
    }

    pub fn scale(&self) -> f64 {
        self.sigma * self.sigma * self.beta
    }
}

/// Reusable per-thread state for the fast profile path.
pub(crate) struct ProfileWorkspace {
    work: ComplexMatrix,
    out: Vec<f64>,
}

impl ProfileWorkspace {
    pub(crate) fn new(p: usize) -> Self {
        ProfileWorkspace { work: ComplexMatrix::zeros(p, p), out: vec![0.0; p] }
    }

    pub(crate) fn profile(&mut self, pencil: &HankelPencil, z: Complex64) -> &[f64] {
        let p = pencil.p();
        debug_assert_eq!(self.work.nrows(), p);
        let r = pencil.r_of_u();
        // C(z) = R (E1 - z E0): column j selects columns j+1 and j of R.
        // Only the Hessenberg envelope is written; entries below the first
        // subdiagonal stay zero and are never read by the sweep.
        for j in 0..p {
            let top = (j + 1).min(p - 1);
            for i in 0..=top {
                self.work[(i, j)] = r[(i, j + 1)] - z * r[(i, j)];
            }
        }
        linalg::reduce_hessenberg_in_place(&mut self.work, &mut self.out);
        &self.out
    }
}

/// Squared triangular diagonal of `U1 - z U0` via the cached factor of `U`:
/// one Givens sweep over the Hessenberg `C(z)`, no per-z refactorization.
pub fn rkk_profile(pencil: &HankelPencil, z: Complex64) -> Vec<f64> {
    let mut ws = ProfileWorkspace::new(pencil.p());
    ws.profile(pencil, z).to_vec()
}

/// Reference path: full Gram-Schmidt QR of `U1 - z U0`.
pub fn rkk_profile_direct(pencil: &HankelPencil, z: Complex64) -> Vec<f64> {
    linalg::qr_gram_schmidt(&pencil.g_of(z)).diag_sq
}

/// Smoothed per-node potential `(1/p) sum_k psi(rkk2[k] / (sigma^2 beta) + 1)`.
///
/// The additive `log(sigma^2 beta)` term of the Gamma expected log is
/// z-independent and annihilated by the Laplacian, so it is omitted. A zero
/// diagonal entry contributes `psi(1)`, which is finite: the smoothing
/// regularizes singular pencils by construction.
pub fn potential_smoothed(rkk2: &[f64], params: &SmoothingParams) -> f64 {
    let scale = params.scale();
    let p = rkk2.len() as f64;
    rkk2.iter()
        .map(|&r| digamma(r / scale + 1.0).expect("argument >= 1"))
        .sum::<f64>()
        / p
}

/// Exact per-node potential `(1/p) sum_k log(max(rkk2[k], floor))`, the
/// diagnostic used to reproduce Monte Carlo potential averages.
pub fn potential_exact(rkk2: &[f64]) -> f64 {
    let p = rkk2.len() as f64;
    rkk2.iter().map(|&r| r.max(SINGULAR_FLOOR).ln()).sum::<f64>() / p
}

/// Expected log of a Gamma(alpha, beta) variable: `log beta + psi(alpha)`.
pub fn potential_gamma(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::domain(format!(
            "potential_gamma requires positive parameters, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(beta.ln() + digamma(alpha)?)
}

/// Five-point discrete Laplacian of an `m x m` field (row-major, row = y),
/// evaluated on the `(m-2) x (m-2)` interior nodes.
pub fn discrete_laplacian(field: &[f64], m: usize, delta: f64) -> Vec<f64> {
    assert!(m >= 3, "stencil needs interior nodes");
    assert_eq!(field.len(), m * m);
    let inv_d2 = 1.0 / (delta * delta);
    let mi = m - 2;
    let mut out = vec![0.0; mi * mi];
    for iy in 1..(m - 1) {
        for ix in 1..(m - 1) {
            let c = field[iy * m + ix];
            let sum = field[iy * m + ix - 1]
                + field[iy * m + ix + 1]
                + field[(iy - 1) * m + ix]
                + field[(iy + 1) * m + ix]
                - 4.0 * c;
            out[(iy - 1) * mi + (ix - 1)] = sum * inv_d2;
        }
    }
    out
}

/// Recommended mesh size `C * epsilon^(1/4)` for a potential known to
/// absolute accuracy `epsilon`. Advisory; callers keep their own grid.
pub fn mesh_from_epsilon(epsilon: f64, c: f64) -> f64 {
    assert!(epsilon > 0.0 && c > 0.0);
    c * epsilon.powf(0.25)
}

/// Potential and condensed density over a grid.
#[derive(Debug, Clone)]
pub struct DensityField {
    grid: Grid,
    potential: Vec<f64>,
    density_raw: Vec<f64>,
    density: Vec<f64>,
    normalized: bool,
}

impl DensityField {
    /// Build a field from given interior density values (row-major,
    /// `(m-2) x (m-2)`); values are clamped and renormalized, the potential
    /// is left at zero. Intended for planted-peak fixtures and tests.
    pub fn from_interior_density(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let mi = grid.m - 2;
        if values.len() != mi * mi {
            return Err(Error::contract(format!(
                "expected {} interior values, got {}",
                mi * mi,
                values.len()
            )));
        }
        let density_raw = values;
        let clamped: Vec<f64> = density_raw.iter().map(|&v| v.max(0.0)).collect();
        let mass: f64 = clamped.iter().sum::<f64>() * grid.delta * grid.delta;
        let (density, normalized) = if mass > 0.0 {
            (clamped.iter().map(|v| v / mass).collect(), true)
        } else {
            (clamped, false)
        };
        Ok(DensityField {
            grid,
            potential: vec![0.0; grid.m * grid.m],
            density_raw,
            density,
            normalized,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Interior side length `m - 2`.
    pub fn interior_m(&self) -> usize {
        self.grid.m - 2
    }

    /// Potential values, `m x m` row-major (row = y index).
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Normalized density on interior nodes, `(m-2) x (m-2)` row-major.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// Unclamped Laplacian / (4 pi), before clamping and normalization.
    pub fn density_raw(&self) -> &[f64] {
        &self.density_raw
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn density_at(&self, jx: usize, jy: usize) -> f64 {
        self.density[jy * self.interior_m() + jx]
    }

    /// Complex coordinate of interior density node `(jx, jy)`.
    pub fn interior_node(&self, jx: usize, jy: usize) -> Complex64 {
        self.grid.node(jx + 1, jy + 1)
    }

    /// Total mass `sum density * delta^2`.
    pub fn total_mass(&self) -> f64 {
        let d2 = self.grid.delta * self.grid.delta;
        self.density.iter().sum::<f64>() * d2
    }

    /// Mass of the normalized density inside the annulus `r0 <= |z| <= r1`.
    pub fn mass_in_annulus(&self, r0: f64, r1: f64) -> f64 {
        let mi = self.interior_m();
        let d2 = self.grid.delta * self.grid.delta;
        let mut mass = 0.0;
        for jy in 0..mi {
            for jx in 0..mi {
                let r = self.interior_node(jx, jy).norm();
                if r >= r0 && r <= r1 {
                    mass += self.density[jy * mi + jx];
                }
            }
        }
        mass * d2
    }

    /// Largest density value and its node.
    pub fn global_max(&self) -> (Complex64, f64) {
        let mi = self.interior_m();
        let mut best = (self.interior_node(0, 0), f64::NEG_INFINITY);
        for jy in 0..mi {
            for jx in 0..mi {
                let v = self.density[jy * mi + jx];
                if v > best.1 {
                    best = (self.interior_node(jx, jy), v);
                }
            }
        }
        best
    }

    /// CSV dump `x,y,potential,density`, row-major over the full grid;
    /// boundary nodes (where the Laplacian is undefined) carry density 0.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "x,y,potential,density")?;
        let m = self.grid.m;
        let mi = self.interior_m();
        for iy in 0..m {
            for ix in 0..m {
                let z = self.grid.node(ix, iy);
                let pot = self.potential[iy * m + ix];
                let den = if ix >= 1 && ix <= mi && iy >= 1 && iy <= mi {
                    self.density[(iy - 1) * mi + (ix - 1)]
                } else {
                    0.0
                };
                writeln!(w, "{},{},{},{}", z.re, z.im, pot, den)?;
            }
        }
        Ok(())
    }

    /// ASCII PGM (P2) heatmap of the normalized density, max-scaled to 255,
    /// top row = largest y.
    pub fn write_pgm(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let mi = self.interior_m();
        let max = self.density.iter().cloned().fold(0.0f64, f64::max);
        writeln!(w, "P2")?;
        writeln!(w, "{mi} {mi}")?;
        writeln!(w, "255")?;
        for jy in (0..mi).rev() {
            let row: Vec<String> = (0..mi)
                .map(|jx| {
                    let v = self.density[jy * mi + jx];
                    let level = if max > 0.0 { (255.0 * v / max).round() as i64 } else { 0 };
                    level.clamp(0, 255).to_string()
                })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

fn potential_grid(
    pencils: &[HankelPencil],
    grid: &Grid,
    node_potential: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<Vec<f64>> {
    if pencils.is_empty() {
        return Err(Error::contract("need at least one pencil"));
    }
    let p = pencils[0].p();
    if pencils.iter().any(|pc| pc.p() != p) {
        return Err(Error::contract("all pencils must share the same order p"));
    }
    let m = grid.m;
    let inv_count = 1.0 / pencils.len() as f64;
    let potential: Vec<f64> = (0..m * m)
        .into_par_iter()
        .map_init(
            || ProfileWorkspace::new(p),
            |ws, idx| {
                let z = grid.node(idx % m, idx / m);
                let mut acc = 0.0;
                for pencil in pencils {
                    acc += node_potential(ws.profile(pencil, z));
                }
                acc * inv_count
            },
        )
        .collect();
    if potential.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite potential value on the grid".into()));
    }
    Ok(potential)
}

fn field_from_potential(grid: &Grid, potential: Vec<f64>) -> DensityField {
    let lap = discrete_laplacian(&potential, grid.m, grid.delta);
    let density_raw: Vec<f64> = lap
        .iter()
        .map(|v| v / (4.0 * std::f64::consts::PI))
        .collect();
    let clamped: Vec<f64> = density_raw.iter().map(|&v| v.max(0.0)).collect();
    let d2 = grid.delta * grid.delta;
    let mass: f64 = clamped.iter().sum::<f64>() * d2;
    if mass > 0.0 {
        let density = clamped.iter().map(|v| v / mass).collect();
        DensityField { grid: *grid, potential, density_raw, density, normalized: true }
    } else {
        DensityField { grid: *grid, potential, density_raw, density: clamped, normalized: false }
    }
}

/// Smoothed condensed density over the grid. With several pencils the
/// potential is averaged before the Laplacian (the Monte Carlo variant).
pub fn condensed_density_grid(
    pencils: &[HankelPencil],
    grid: &Grid,
    params: &SmoothingParams,
) -> Result<DensityField> {
    let potential = potential_grid(pencils, grid, |rkk2| potential_smoothed(rkk2, params))?;
    Ok(field_from_potential(grid, potential))
}

/// Condensed density from the exact (floored) log potential, the diagnostic
/// route used for Monte Carlo comparisons.
pub fn condensed_density_grid_exact(
    pencils: &[HankelPencil],
    grid: &Grid,
) -> Result<DensityField> {
    let potential = potential_grid(pencils, grid, potential_exact)?;
    Ok(field_from_potential(grid, potential))
}
