//! Parameter estimation from a density field and the observed record: peak
//! extraction, model-order selection by data fit, amplitude least squares
//! and replicate scoring.
//!
//! Order selection deserves a note. Candidate prefixes of the value-sorted
//! peak list are fitted by least squares; because the candidate node sets
//! are nested, the raw residual decreases monotonically in the prefix size
//! and its minimum always sits at the largest candidate. The Gaussian noise
//! model supplies the missing yardstick: a prefix containing the true
//! support has expected squared residual `2 sigma^2 (n - q)`, so the
//! selector returns the *smallest* prefix whose residual is consistent with
//! the noise floor (within a factor [`NOISE_WINDOW`]). When no prefix is
//! consistent, the minimum-residual prefix is returned and the result is
//! marked not noise-consistent. For noiseless records the criterion
//! degenerates to an exact-fit test.

use num_complex::Complex64;
use serde::Serialize;

use crate::density::DensityField;
use crate::model::{self, ExponentialModel, NoisySeries};
use crate::{Error, Result};

/// Residual-consistency window: a support qualifies when its squared
/// residual is at most this multiple of the expected noise energy
/// `2 sigma^2 (n - q)`. Under the correct support the chi-square ratio
/// concentrates around 1 with relative spread `1/sqrt(n-q)`. Candidate
/// nodes are lattice nodes, and quantization of near-unit-modulus nodes
/// costs extra residual; the greedy search then spends one or two more
/// peaks to reach the window, so the selected order can overshoot by that
/// much at coarse meshes. Raising the window instead makes it swallow
/// whole weak components, which is the worse failure mode.
pub const NOISE_WINDOW: f64 = 2.0;

/// Relative residual threshold qualifying an exact fit when `sigma = 0`.
pub const EXACT_FIT_TOL: f64 = 1e-8;

/// Minimum explained-energy fraction `1 - |r|^2 / |a|^2` for a result to be
/// flagged identifiable. Pure-noise records fit only a few percent of their
/// energy with small prefixes; signal-bearing records at usable SNR explain
/// well above half.
pub const IDENTIFIABLE_MIN_EXPLAINED: f64 = 0.5;

/// Condition-estimate guard for the Vandermonde least squares.
pub const MAX_VANDERMONDE_COND: f64 = 1e12;

/// A strict 8-neighborhood local maximum of the density field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub z: Complex64,
    pub value: f64,
}

/// Interior local maxima of the density, strictly greater than all eight
/// neighbors, sorted by decreasing value. Plateau ties are discarded.
pub fn local_maxima(field: &DensityField) -> Vec<Peak> {
    let mi = field.interior_m();
    let d = field.density();
    let mut peaks = Vec::new();
    for jy in 1..mi.saturating_sub(1) {
        for jx in 1..mi.saturating_sub(1) {
            let v = d[jy * mi + jx];
            let mut strict = true;
            'scan: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = (jx as i64 + dx) as usize;
                    let ny = (jy as i64 + dy) as usize;
                    if d[ny * mi + nx] >= v {
                        strict = false;
                        break 'scan;
                    }
                }
            }
            if strict {
                peaks.push(Peak { z: field.interior_node(jx, jy), value: v });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .expect("finite density")
            .then(a.z.re.partial_cmp(&b.z.re).expect("finite"))
            .then(a.z.im.partial_cmp(&b.z.im).expect("finite"))
    });
    peaks
}

/// Least squares amplitudes for fixed nodes: minimize `|V c - a|_2` with
/// `V[k][j] = xi_j^k`. Rejects numerically rank-deficient systems
/// (condition estimate above [`MAX_VANDERMONDE_COND`]).
pub fn vandermonde_ls(
    xi: &[Complex64],
    series: &NoisySeries,
) -> Result<(Vec<Complex64>, f64)> {
    let q = xi.len();
    let n = series.n();
    if q == 0 || q > n {
        return Err(Error::contract(format!("need 1 <= q <= n, got q={q}, n={n}")));
    }
    for i in 0..q {
        for j in (i + 1)..q {
            if xi[i] == xi[j] {
                return Err(Error::contract(format!("nodes {i} and {j} coincide")));
            }
        }
    }
    let mut v = crate::linalg::ComplexMatrix::zeros(n, q);
    for (j, &node) in xi.iter().enumerate() {
        let mut pow = Complex64::new(1.0, 0.0);
        for k in 0..n {
            v[(k, j)] = pow;
            pow *= node;
        }
    }
    let b = nalgebra::DVector::from_column_slice(&series.a);
    let (c, residual, cond) = model::least_squares(&v, &b)?;
    if cond > MAX_VANDERMONDE_COND {
        return Err(Error::Estimation(format!(
            "Vandermonde system too ill-conditioned (estimate {cond:.3e})"
        )));
    }
    Ok((c.iter().cloned().collect(), residual))
}

/// Outcome of the threshold selection.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Number of peaks kept.
    pub q: usize,
    /// Smallest density value among the selected peaks.
    pub threshold: f64,
    /// Locations of the selected peaks, in selection order.
    pub nodes: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
    pub residual: f64,
    /// Whether the selected support met the noise-floor criterion (or the
    /// exact-fit criterion for noiseless data).
    pub noise_consistent: bool,
}

fn prefix_qualifies(residual: f64, q: usize, series: &NoisySeries) -> bool {
    let n = series.n();
    if series.sigma > 0.0 {
        let floor = 2.0 * series.sigma * series.sigma * (n - q) as f64;
        residual * residual <= NOISE_WINDOW * floor
    } else {
        residual <= EXACT_FIT_TOL * series.norm()
    }
}

/// Multiple of the expected pure-overfit residual reduction below which an
/// added peak is considered insignificant (fallback order selection).
const SIGNIFICANT_GAIN: f64 = 5.0;

/// Select the signal group among the peaks by greedy best-fit growth: from
/// the `max_candidates` largest maxima, repeatedly add the peak that most
/// reduces the least-squares residual, stopping at the first support
/// consistent with the noise level. The greedy order matters because a
/// single-record density ranks occasional noise maxima above weak signal
/// ones; fit gain separates the groups where raw height does not.
///
/// When no support reaches the noise floor (the record is not strongly
/// identifiable) the support is cut after the last *significant* residual
/// drop — one exceeding [`SIGNIFICANT_GAIN`] times the expected reduction
/// from fitting a pure-noise direction — and the selection is marked not
/// noise-consistent.
pub fn threshold_select(
    peaks: &[Peak],
    series: &NoisySeries,
    max_candidates: usize,
) -> Result<Selection> {
    if peaks.is_empty() {
        return Err(Error::Estimation("no peaks to threshold".into()));
    }
    let pool: Vec<&Peak> = peaks.iter().take(max_candidates.min(series.n() - 1)).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..pool.len()).collect();
    let norm = series.norm();
    let mut trail: Vec<(Vec<usize>, Vec<Complex64>, f64)> = Vec::new();
    while !remaining.is_empty() {
        let mut best: Option<(usize, Vec<Complex64>, f64)> = None;
        for (slot, &cand) in remaining.iter().enumerate() {
            let mut nodes: Vec<Complex64> = selected.iter().map(|&i| pool[i].z).collect();
            nodes.push(pool[cand].z);
            match vandermonde_ls(&nodes, series) {
                Ok((amplitudes, residual)) => {
                    if best.as_ref().is_none_or(|(_, _, r)| residual < *r) {
                        best = Some((slot, amplitudes, residual));
                    }
                }
                Err(Error::Estimation(_)) => continue, // ill-conditioned with this peak
                Err(e) => return Err(e),
            }
        }
        let Some((slot, amplitudes, residual)) = best else {
            break; // every extension is degenerate
        };
        selected.push(remaining.remove(slot));
        let q = selected.len();
        if prefix_qualifies(residual, q, series) {
            let threshold =
                selected.iter().map(|&i| pool[i].value).fold(f64::INFINITY, f64::min);
            return Ok(Selection {
                q,
                threshold,
                nodes: selected.iter().map(|&i| pool[i].z).collect(),
                amplitudes,
                residual,
                noise_consistent: true,
            });
        }
        trail.push((selected.clone(), amplitudes, residual));
    }
    if trail.is_empty() {
        return Err(Error::Estimation("every candidate peak was degenerate".into()));
    }
    // fallback: keep everything up to the last significant residual drop
    let n = series.n() as f64;
    let mut cut = 0usize;
    let mut before_sq = norm * norm;
    for (idx, (_, _, residual)) in trail.iter().enumerate() {
        let after_sq = residual * residual;
        let expected_gain = before_sq / (n - idx as f64);
        if before_sq - after_sq > SIGNIFICANT_GAIN * expected_gain {
            cut = idx + 1;
        }
        before_sq = after_sq;
    }
    let cut = cut.max(1);
    let (support, amplitudes, residual) = trail[cut - 1].clone();
    let threshold = support.iter().map(|&i| pool[i].value).fold(f64::INFINITY, f64::min);
    Ok(Selection {
        q: cut,
        threshold,
        nodes: support.iter().map(|&i| pool[i].z).collect(),
        amplitudes,
        residual,
        noise_consistent: false,
    })
}

/// Full estimation result for one record.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateResult {
    pub p_hat: usize,
    #[serde(rename = "xi", with = "model::serde_complex_vec")]
    pub xi_hat: Vec<Complex64>,
    #[serde(rename = "c", with = "model::serde_complex_vec")]
    pub c_hat: Vec<Complex64>,
    pub residual: f64,
    #[serde(rename = "threshold")]
    pub threshold_value: f64,
    /// False when no prefix reduced the residual to the noise floor or the
    /// explained energy is small (pure-noise diagnostic).
    pub identifiable: bool,
}

/// Sub-cell quadratic refinement of a peak location: independent parabola
/// fits through the three density values along each axis. Off by default
/// in the pipeline — estimates are reported at lattice resolution — but
/// available behind [`estimate_model_refined`].
pub fn refine_peak_quadratic(field: &DensityField, peak: &Peak) -> Complex64 {
    let grid = field.grid();
    let mi = field.interior_m();
    let d = field.density();
    // locate the interior indices of the peak node
    let jx = ((peak.z.re - grid.x0) / grid.delta).round() as isize - 1;
    let jy = ((peak.z.im - grid.y0) / grid.delta).round() as isize - 1;
    if jx < 1 || jy < 1 || jx as usize >= mi - 1 || jy as usize >= mi - 1 {
        return peak.z;
    }
    let (jx, jy) = (jx as usize, jy as usize);
    let at = |x: usize, y: usize| d[y * mi + x];
    let shift = |lo: f64, mid: f64, hi: f64| -> f64 {
        let denom = lo - 2.0 * mid + hi;
        if denom < 0.0 {
            (0.5 * (lo - hi) / denom).clamp(-0.5, 0.5)
        } else {
            0.0
        }
    };
    let dx = shift(at(jx - 1, jy), at(jx, jy), at(jx + 1, jy));
    let dy = shift(at(jx, jy - 1), at(jx, jy), at(jx, jy + 1));
    peak.z + Complex64::new(dx * grid.delta, dy * grid.delta)
}

/// Peak extraction, threshold selection and amplitude fit in one call. The
/// field must have been computed from the same record.
pub fn estimate_model(
    field: &DensityField,
    series: &NoisySeries,
    max_candidates: usize,
) -> Result<EstimateResult> {
    estimate_model_refined(field, series, max_candidates, false)
}

/// [`estimate_model`] with optional sub-cell quadratic refinement of the
/// candidate peak locations before selection.
pub fn estimate_model_refined(
    field: &DensityField,
    series: &NoisySeries,
    max_candidates: usize,
    refine_peaks: bool,
) -> Result<EstimateResult> {
    let mut peaks = local_maxima(field);
    if refine_peaks {
        for peak in peaks.iter_mut() {
            peak.z = refine_peak_quadratic(field, peak);
        }
    }
    let selection = threshold_select(&peaks, series, max_candidates)?;
    let norm = series.norm();
    let explained = if norm > 0.0 {
        1.0 - (selection.residual / norm).powi(2)
    } else {
        0.0
    };
    Ok(EstimateResult {
        p_hat: selection.q,
        xi_hat: selection.nodes,
        c_hat: selection.amplitudes,
        residual: selection.residual,
        threshold_value: selection.threshold,
        identifiable: selection.noise_consistent && explained >= IDENTIFIABLE_MIN_EXPLAINED,
    })
}

/// Statistics of one estimated parameter across replicates.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreRow {
    pub parameter: String,
    #[serde(with = "model::serde_complex")]
    pub truth: Complex64,
    #[serde(with = "model::serde_complex")]
    pub bias: Complex64,
    pub sd: f64,
    pub mse: f64,
}

/// Replicate scoring table: bias, standard deviation and MSE per parameter.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub n_total: usize,
    pub n_used: usize,
    pub discarded: usize,
}

impl ScoreTable {
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "parameter,truth,bias,sd,mse")?;
        let fmt_c = |c: Complex64| format!("{}{}{}i", c.re, if c.im < 0.0 { "-" } else { "+" }, c.im.abs());
        for row in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                row.parameter,
                fmt_c(row.truth),
                fmt_c(row.bias),
                row.sd,
                row.mse
            )?;
        }
        Ok(())
    }
}

fn stats_complex(name: &str, truth: Complex64, values: &[Complex64]) -> ScoreRow {
    let n = values.len() as f64;
    let mean = values.iter().sum::<Complex64>() / n;
    let bias = mean - truth;
    let var = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / n;
    let mse = values.iter().map(|v| (v - truth).norm_sqr()).sum::<f64>() / n;
    ScoreRow { parameter: name.to_string(), truth, bias, sd: var.sqrt(), mse }
}

/// Score replicate estimates against the generating model. Each true node
/// is matched to its nearest estimate; a replicate is discarded when it
/// found fewer components than the truth or when one estimate matches two
/// true nodes.
pub fn score_replicates(results: &[EstimateResult], truth: &ExponentialModel) -> ScoreTable {
    let p_star = truth.p_star();
    let mut p_hats: Vec<f64> = Vec::new();
    let mut xi_cols: Vec<Vec<Complex64>> = vec![Vec::new(); p_star];
    let mut c_cols: Vec<Vec<Complex64>> = vec![Vec::new(); p_star];
    let mut discarded = 0usize;
    for result in results {
        if result.p_hat < p_star {
            discarded += 1;
            continue;
        }
        let mut assignment = Vec::with_capacity(p_star);
        for comp in &truth.components {
            let (j_best, _) = result
                .xi_hat
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - comp.xi)
                        .norm()
                        .partial_cmp(&(*b - comp.xi).norm())
                        .expect("finite")
                })
                .expect("p_hat >= 1");
            assignment.push(j_best);
        }
        let mut unique = assignment.clone();
        unique.sort_unstable();
        unique.dedup();
        if unique.len() < p_star {
            discarded += 1;
            continue;
        }
        p_hats.push(result.p_hat as f64);
        for (k, &j) in assignment.iter().enumerate() {
            xi_cols[k].push(result.xi_hat[j]);
            c_cols[k].push(result.c_hat[j]);
        }
    }
    let mut rows = Vec::new();
    if !p_hats.is_empty() {
        let as_complex: Vec<Complex64> =
            p_hats.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        rows.push(stats_complex("p_hat", Complex64::new(p_star as f64, 0.0), &as_complex));
        for k in 0..p_star {
            rows.push(stats_complex(
                &format!("xi_{}", k + 1),
                truth.components[k].xi,
                &xi_cols[k],
            ));
        }
        for k in 0..p_star {
            rows.push(stats_complex(
                &format!("c_{}", k + 1),
                truth.components[k].c,
                &c_cols[k],
            ));
        }
    }
    ScoreTable { rows, n_total: results.len(), n_used: results.len() - discarded, discarded }
}
