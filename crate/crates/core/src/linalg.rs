//! Dense complex linear algebra: QR factorizations, Givens reduction of
//! Hessenberg matrices, determinants and the real isomorph.
//!
//! Two QR routes coexist on purpose. Classical Gram-Schmidt is the reference
//! algorithm whose diagonal `R_kk = sqrt(w_k^H w_k)` defines the quantities the
//! density machinery consumes; Householder reflections are the production
//! factorization (stable, used for the cached factor of the wide Hankel
//! matrix and for least squares). Both produce the same `|R_kk|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Result of the classical Gram-Schmidt factorization `G = Q R`.
///
/// `diag_sq[k]` is `w_k^H w_k`, the squared norm of the k-th residual column
/// before normalization — exactly the quantity whose distribution the rest of
/// the crate models. A structurally dependent column yields `diag_sq[k] = 0`
/// and a zero column in `Q`; no error is raised, the caller decides.
pub struct GramSchmidtQr {
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
    pub diag_sq: Vec<f64>,
}

/// Classical Gram-Schmidt QR of a square complex matrix.
pub fn qr_gram_schmidt(g: &ComplexMatrix) -> GramSchmidtQr {
    let p = g.nrows();
    assert_eq!(p, g.ncols(), "qr_gram_schmidt requires a square matrix");
    assert!(p >= 1);
    let mut q = ComplexMatrix::zeros(p, p);
    let mut r = ComplexMatrix::zeros(p, p);
    let mut diag_sq = vec![0.0; p];
    for k in 0..p {
        let mut w: DVector<Complex64> = g.column(k).into_owned();
        for i in 0..k {
            let rik: Complex64 = q.column(i).dotc(&g.column(k));
            r[(i, k)] = rik;
            w.axpy(-rik, &q.column(i).into_owned(), Complex64::new(1.0, 0.0));
        }
        let norm_sq = w.dotc(&w).re;
        diag_sq[k] = norm_sq;
        let rkk = norm_sq.sqrt();
        r[(k, k)] = Complex64::new(rkk, 0.0);
        if rkk > 0.0 {
            q.set_column(k, &(w / Complex64::new(rkk, 0.0)));
        }
    }
    GramSchmidtQr { q, r, diag_sq }
}

/// Householder QR factorization of an `m x n` complex matrix, any shape.
///
/// Reflectors are stored in factored form; `r` is upper trapezoidal with a
/// real nonnegative diagonal (phases are absorbed into `Q`).
pub struct HouseholderQr {
    m: usize,
    n: usize,
    reflectors: Vec<DVector<Complex64>>,
    r: ComplexMatrix,
    // unit phase applied to each row of R to make its diagonal real >= 0
    row_phases: Vec<Complex64>,
}

impl HouseholderQr {
    pub fn factor(a: &ComplexMatrix) -> Self {
        let (m, n) = (a.nrows(), a.ncols());
        let steps = m.min(n);
        let mut work = a.clone();
        let mut reflectors = Vec::with_capacity(steps);
        for j in 0..steps {
            let mut v = DVector::<Complex64>::zeros(m - j);
            for i in j..m {
                v[i - j] = work[(i, j)];
            }
            let norm = v.norm();
            if norm == 0.0 {
                reflectors.push(DVector::zeros(m - j));
                continue;
            }
            let x0 = v[0];
            let phase = if x0.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                x0 / x0.norm()
            };
            // v = x + phase * |x| * e1 avoids cancellation
            v[0] += phase * norm;
            let vnorm = v.norm();
            if vnorm == 0.0 {
                reflectors.push(DVector::zeros(m - j));
                continue;
            }
            v /= Complex64::new(vnorm, 0.0);
            // apply H = I - 2 v v^H to the trailing block
            for k in j..n {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in j..m {
                    dot += v[i - j].conj() * work[(i, k)];
                }
                let two_dot = 2.0 * dot;
                for i in j..m {
                    let upd = work[(i, k)] - two_dot * v[i - j];
                    work[(i, k)] = upd;
                }
            }
            reflectors.push(v);
        }
        // zero out the subdiagonal noise and normalize diagonal phases
        let mut r = ComplexMatrix::zeros(m, n);
        for i in 0..m {
            for j in i..n {
                r[(i, j)] = work[(i, j)];
            }
        }
        let mut row_phases = vec![Complex64::new(1.0, 0.0); m];
        for k in 0..steps {
            let d = r[(k, k)];
            if d.norm() > 0.0 {
                let ph = d / d.norm();
                row_phases[k] = ph;
                for j in k..n {
                    r[(k, j)] *= ph.conj();
                }
            }
        }
        HouseholderQr { m, n, reflectors, r, row_phases }
    }

    pub fn r(&self) -> &ComplexMatrix {
        &self.r
    }

    pub fn into_r(self) -> ComplexMatrix {
        self.r
    }

    /// Squared magnitudes of the diagonal of R.
    pub fn diag_abs_sq(&self) -> Vec<f64> {
        (0..self.m.min(self.n)).map(|k| self.r[(k, k)].norm_sqr()).collect()
    }

    /// The full `m x m` unitary factor.
    pub fn q(&self) -> ComplexMatrix {
        let mut q = ComplexMatrix::identity(self.m, self.m);
        // Q = H_0 H_1 ... H_{s-1} * diag(phases)
        for (j, v) in self.reflectors.iter().enumerate().rev() {
            if v.iter().all(|c| c.norm() == 0.0) {
                continue;
            }
            for k in 0..self.m {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in j..self.m {
                    dot += v[i - j].conj() * q[(i, k)];
                }
                let two_dot = 2.0 * dot;
                for i in j..self.m {
                    let upd = q[(i, k)] - two_dot * v[i - j];
                    q[(i, k)] = upd;
                }
            }
        }
        // absorb the row phases of R into the columns of Q
        for k in 0..self.m {
            let ph = self.row_phases[k];
            if (ph - Complex64::new(1.0, 0.0)).norm() > 0.0 {
                for i in 0..self.m {
                    q[(i, k)] *= ph;
                }
            }
        }
        q
    }

    /// Apply `Q^H` to a vector of length `m`.
    pub fn q_adjoint_mul(&self, b: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(b.len(), self.m);
        let mut y = b.clone();
        for (j, v) in self.reflectors.iter().enumerate() {
            if v.iter().all(|c| c.norm() == 0.0) {
                continue;
            }
            let mut dot = Complex64::new(0.0, 0.0);
            for i in j..self.m {
                dot += v[i - j].conj() * y[i];
            }
            let two_dot = 2.0 * dot;
            for i in j..self.m {
                y[i] -= two_dot * v[i - j];
            }
        }
        for k in 0..self.m.min(self.n) {
            y[k] *= self.row_phases[k].conj();
        }
        y
    }
}

/// Householder QR of a wide matrix (`rows <= cols`), as used for the cached
/// factor of the `p x (p+1)` Hankel matrix. Returns `(Q, R)` with `Q` unitary
/// `p x p` and `R` upper trapezoidal with real nonnegative diagonal.
pub fn qr_householder(a: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    assert!(
        a.nrows() <= a.ncols(),
        "qr_householder expects rows <= cols, got {}x{}",
        a.nrows(),
        a.ncols()
    );
    let f = HouseholderQr::factor(a);
    (f.q(), f.r)
}

/// Reduce an upper-Hessenberg matrix to triangular form by Givens rotations,
/// returning only the squared diagonal magnitudes `|R_kk|^2`.
pub fn givens_reduce_hessenberg(c: &ComplexMatrix) -> Result<Vec<f64>> {
    let p = c.nrows();
    if p != c.ncols() {
        return Err(Error::contract(format!(
            "givens_reduce_hessenberg requires a square matrix, got {}x{}",
            p,
            c.ncols()
        )));
    }
    for j in 0..p {
        for i in (j + 2)..p {
            if c[(i, j)] != Complex64::new(0.0, 0.0) {
                return Err(Error::contract(format!(
                    "matrix is not upper Hessenberg: nonzero entry at ({i}, {j})"
                )));
            }
        }
    }
    let mut work = c.clone();
    let mut out = vec![0.0; p];
    reduce_hessenberg_in_place(&mut work, &mut out);
    Ok(out)
}

/// In-place Givens sweep; `work` must be upper Hessenberg on entry. Only the
/// rows involved in each rotation are updated, entries below the subdiagonal
/// are never read.
pub(crate) fn reduce_hessenberg_in_place(work: &mut ComplexMatrix, out: &mut [f64]) {
    let p = work.nrows();
    debug_assert_eq!(out.len(), p);
    for k in 0..p.saturating_sub(1) {
        let a = work[(k, k)];
        let b = work[(k + 1, k)];
        let r_sq = a.norm_sqr() + b.norm_sqr();
        out[k] = r_sq;
        if r_sq == 0.0 {
            continue;
        }
        let r = r_sq.sqrt();
        let cc = a / r;
        let ss = b / r;
        let (ccc, scc) = (cc.conj(), ss.conj());
        for j in (k + 1)..p {
            let top = work[(k, j)];
            let bot = work[(k + 1, j)];
            work[(k, j)] = ccc * top + scc * bot;
            work[(k + 1, j)] = cc * bot - ss * top;
        }
    }
    if p > 0 {
        out[p - 1] = work[(p - 1, p - 1)].norm_sqr();
    }
}

/// The real isomorph `[[Re G, -Im G], [Im G, Re G]]` of a complex matrix.
pub fn real_isomorph(g: &ComplexMatrix) -> RealMatrix {
    let p = g.nrows();
    assert_eq!(p, g.ncols(), "real_isomorph requires a square matrix");
    let mut out = RealMatrix::zeros(2 * p, 2 * p);
    for i in 0..p {
        for j in 0..p {
            let v = g[(i, j)];
            out[(i, j)] = v.re;
            out[(i, j + p)] = -v.im;
            out[(i + p, j)] = v.im;
            out[(i + p, j + p)] = v.re;
        }
    }
    out
}

/// `|det G|^2` as the product of the squared Gram-Schmidt diagonal.
pub fn det_abs2(g: &ComplexMatrix) -> f64 {
    qr_gram_schmidt(g).diag_sq.iter().product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_complex_matrix(rng: &mut impl Rng, m: usize, n: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(m, n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn frob(a: &ComplexMatrix) -> f64 {
        a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn gram_schmidt_one_by_one() {
        let g = ComplexMatrix::from_row_slice(1, 1, &[Complex64::new(1.0, 1.0)]);
        let f = qr_gram_schmidt(&g);
        let s = std::f64::consts::SQRT_2;
        assert_relative_eq!(f.r[(0, 0)].re, s, epsilon = 1e-15);
        assert_relative_eq!(f.q[(0, 0)].re, 1.0 / s, epsilon = 1e-15);
        assert_relative_eq!(f.q[(0, 0)].im, 1.0 / s, epsilon = 1e-15);
        assert_relative_eq!(f.diag_sq[0], 2.0, epsilon = 1e-15);
    }

    #[test]
    fn gram_schmidt_identity() {
        let g = ComplexMatrix::identity(2, 2);
        let f = qr_gram_schmidt(&g);
        assert_eq!(f.diag_sq, vec![1.0, 1.0]);
        assert!(frob(&(&f.q - ComplexMatrix::identity(2, 2))) < 1e-15);
        assert!(frob(&(&f.r - ComplexMatrix::identity(2, 2))) < 1e-15);
    }

    #[test]
    fn gram_schmidt_reconstructs_random_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let g = random_complex_matrix(&mut rng, 5, 5);
        let f = qr_gram_schmidt(&g);
        let qr = &f.q * &f.r;
        assert!(frob(&(&qr - &g)) / frob(&g) < 1e-12);
        let qhq = f.q.adjoint() * &f.q;
        assert!(frob(&(&qhq - ComplexMatrix::identity(5, 5))) < 1e-12);
        // R_kk real nonnegative by construction
        for k in 0..5 {
            assert!(f.r[(k, k)].im == 0.0 && f.r[(k, k)].re >= 0.0);
        }
    }

    #[test]
    fn gram_schmidt_rank_deficient_reports_zero() {
        // second column is a multiple of the first
        let c1 = Complex64::new(1.0, 2.0);
        let g = ComplexMatrix::from_row_slice(
            2,
            2,
            &[c1, c1 * 3.0, c1 * 2.0, c1 * 6.0],
        );
        let f = qr_gram_schmidt(&g);
        assert!(f.diag_sq[1] < 1e-28 * f.diag_sq[0]);
    }

    #[test]
    fn householder_trivial_wide_row() {
        let a = ComplexMatrix::from_row_slice(
            1,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
        );
        let (q, r) = qr_householder(&a);
        assert_relative_eq!(r[(0, 0)].re, 1.0, epsilon = 1e-14);
        assert_relative_eq!(r[(0, 1)].norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!(q[(0, 0)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn householder_reconstructs_and_matches_gram_schmidt() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(m, n) in &[(4usize, 4usize), (5, 6), (6, 9), (8, 5)] {
            let a = random_complex_matrix(&mut rng, m, n);
            let f = HouseholderQr::factor(&a);
            let qr = f.q() * f.r();
            assert!(frob(&(&qr - &a)) / frob(&a) < 1e-12, "reconstruction {m}x{n}");
            let q = f.q();
            let qhq = q.adjoint() * &q;
            assert!(frob(&(&qhq - ComplexMatrix::identity(m, m))) < 1e-12);
            if m == n {
                let gs = qr_gram_schmidt(&a);
                for k in 0..m {
                    assert_relative_eq!(
                        f.r()[(k, k)].norm(),
                        gs.r[(k, k)].re,
                        max_relative = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn householder_diag_of_wide_hankel_matches_gram_schmidt() {
        // the R diagonal of the wide p x (p+1) factorization depends only on
        // the leading p columns, i.e. on the square Hankel block
        let model = crate::model::ExponentialModel::benchmark_five();
        let s = crate::model::synth_signal(&model, 10);
        let p = 5;
        let wide = ComplexMatrix::from_fn(p, p + 1, |i, j| s[i + j]);
        let square = ComplexMatrix::from_fn(p, p, |i, j| s[i + j]);
        let (_, r) = qr_householder(&wide);
        let gs = qr_gram_schmidt(&square);
        let scale = gs.r[(0, 0)].re;
        for k in 0..p {
            assert!(
                (r[(k, k)].norm() - gs.r[(k, k)].re).abs() <= 1e-10 * scale,
                "diagonal {k}: householder {} vs gram-schmidt {}",
                r[(k, k)].norm(),
                gs.r[(k, k)].re
            );
        }
    }

    #[test]
    fn householder_equal_columns_give_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random_complex_matrix(&mut rng, 2, 3);
        let col0 = a.column(0).into_owned();
        a.set_column(1, &col0);
        let f = HouseholderQr::factor(&a);
        assert!(f.r()[(1, 1)].norm() < 1e-12 * frob(&a));
    }

    #[test]
    fn givens_on_upper_triangular_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = random_complex_matrix(&mut rng, 4, 4);
        for i in 1..4 {
            for j in 0..i {
                c[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        let d = givens_reduce_hessenberg(&c).unwrap();
        for k in 0..4 {
            assert_relative_eq!(d[k], c[(k, k)].norm_sqr(), max_relative = 1e-14);
        }
    }

    #[test]
    fn givens_two_by_two_swap() {
        let c = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let d = givens_reduce_hessenberg(&c).unwrap();
        assert_relative_eq!(d[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(d[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn givens_rejects_non_hessenberg() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let c = random_complex_matrix(&mut rng, 4, 4);
        assert!(givens_reduce_hessenberg(&c).is_err());
    }

    #[test]
    fn givens_matches_full_qr_on_random_hessenberg() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let p = 2 + (rng.random::<u32>() % 10) as usize;
            let mut c = random_complex_matrix(&mut rng, p, p);
            for i in 0..p {
                for j in 0..p {
                    if i > j + 1 {
                        c[(i, j)] = Complex64::new(0.0, 0.0);
                    }
                }
            }
            let fast = givens_reduce_hessenberg(&c).unwrap();
            let direct = qr_gram_schmidt(&c);
            for k in 0..p {
                assert_relative_eq!(fast[k], direct.diag_sq[k], max_relative = 1e-10, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn givens_diag_invariant_under_row_phases() {
        // premultiplying by a unitary diagonal leaves |R_kk| unchanged
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let p = 7;
        let mut c = random_complex_matrix(&mut rng, p, p);
        for i in 0..p {
            for j in 0..p {
                if i > j + 1 {
                    c[(i, j)] = Complex64::new(0.0, 0.0);
                }
            }
        }
        let base = givens_reduce_hessenberg(&c).unwrap();
        let mut scaled = c.clone();
        for i in 0..p {
            let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            let ph = Complex64::new(theta.cos(), theta.sin());
            for j in 0..p {
                scaled[(i, j)] *= ph;
            }
        }
        let rotated = givens_reduce_hessenberg(&scaled).unwrap();
        for k in 0..p {
            assert_relative_eq!(base[k], rotated[k], max_relative = 1e-10);
        }
    }

    #[test]
    fn real_isomorph_small_cases() {
        let g = ComplexMatrix::from_row_slice(1, 1, &[Complex64::new(0.0, 1.0)]);
        let r = real_isomorph(&g);
        assert_eq!(
            (r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]),
            (0.0, -1.0, 1.0, 0.0)
        );
        let g = ComplexMatrix::from_row_slice(1, 1, &[Complex64::new(1.0, 1.0)]);
        let r = real_isomorph(&g);
        assert_eq!(
            (r[(0, 0)], r[(0, 1)], r[(1, 0)], r[(1, 1)]),
            (1.0, -1.0, 1.0, 1.0)
        );
        assert_relative_eq!(r.determinant(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn det_abs2_diagonal_and_identity() {
        assert_relative_eq!(det_abs2(&ComplexMatrix::identity(3, 3)), 1.0, epsilon = 1e-14);
        let g = ComplexMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 3.0),
            ],
        );
        assert_relative_eq!(det_abs2(&g), 36.0, epsilon = 1e-12);
    }

    #[test]
    fn det_abs2_matches_real_isomorph_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let g = random_complex_matrix(&mut rng, 5, 5);
            let lhs = det_abs2(&g);
            let rhs = real_isomorph(&g).determinant();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn proposition_real_isomorph_det_up_to_p16() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        for _ in 0..30 {
            let p = 1 + (rng.random::<u32>() % 16) as usize;
            let g = random_complex_matrix(&mut rng, p, p);
            let lhs = det_abs2(&g);
            let rhs = real_isomorph(&g).determinant();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-8);
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn prop_qr_reconstructs_and_is_unitary(
            seed in 0u64..1u64 << 48,
            p in 1usize..12,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_complex_matrix(&mut rng, p, p);
            let f = qr_gram_schmidt(&g);
            let scale = frob(&g).max(1e-12);
            proptest::prop_assert!(frob(&(&f.q * &f.r - &g)) <= 1e-10 * scale);
            let h = HouseholderQr::factor(&g);
            proptest::prop_assert!(frob(&(h.q() * h.r() - &g)) <= 1e-10 * scale);
            // Proposition-1 identity on the same draw
            let lhs = det_abs2(&g);
            let rhs = real_isomorph(&g).determinant();
            let denom = lhs.abs().max(rhs.abs()).max(1e-300);
            proptest::prop_assert!((lhs - rhs).abs() / denom <= 1e-8);
        }
    }

    #[test]
    fn qr_reconstruction_up_to_p64() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for &p in &[2usize, 16, 64] {
            let g = random_complex_matrix(&mut rng, p, p);
            let f = qr_gram_schmidt(&g);
            assert!(frob(&(&f.q * &f.r - &g)) <= 1e-10 * frob(&g), "p={p}");
            let qhq = f.q.adjoint() * &f.q;
            assert!(frob(&(&qhq - ComplexMatrix::identity(p, p))) <= 1e-10, "p={p}");
            let h = HouseholderQr::factor(&g);
            assert!(frob(&(h.q() * h.r() - &g)) <= 1e-10 * frob(&g), "householder p={p}");
        }
    }
}
