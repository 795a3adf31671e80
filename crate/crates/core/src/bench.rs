//! Timing study of the per-grid-point profile cost: cached-factor Givens
//! sweep versus full QR at every node. Fits log-log cost exponents in the
//! pencil order `p`.

use num_complex::Complex64;
use serde::Serialize;

use crate::density::{Grid, ProfileWorkspace};
use crate::model::{self, ExponentialModel};
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub p: usize,
    /// Seconds per grid node, cached-factor Givens path.
    pub fast_per_point: f64,
    /// Seconds per grid node, full QR path.
    pub direct_per_point: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub m: usize,
    pub seed: u64,
    pub points: Vec<BenchPoint>,
    pub fast_exponent: f64,
    pub direct_exponent: f64,
    /// Largest relative profile deviation between the two paths seen while
    /// timing (cross-check that the fast path computes the same numbers).
    pub max_profile_deviation: f64,
}

impl BenchReport {
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "p,fast_per_point_s,direct_per_point_s")?;
        for pt in &self.points {
            writeln!(w, "{},{},{}", pt.p, pt.fast_per_point, pt.direct_per_point)?;
        }
        Ok(())
    }
}

fn fit_exponent(ps: &[usize], ts: &[f64]) -> f64 {
    let n = ps.len() as f64;
    let xs: Vec<f64> = ps.iter().map(|&p| (p as f64).ln()).collect();
    let ys: Vec<f64> = ts.iter().map(|&t| t.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    v[v.len() / 2]
}

/// Measure per-grid-point profile costs for each order in `p_list` over an
/// `m x m` lattice. Timing runs single-threaded; repeats are reduced by
/// the median to tame scheduler noise.
pub fn profile_cost_study(p_list: &[usize], m: usize, seed: u64) -> Result<BenchReport> {
    assert!(p_list.len() >= 2);
    let grid = Grid::new(-1.5, -1.5, 3.0 / (m as f64 - 1.0), m)?;
    let model = ExponentialModel::benchmark_five();
    let mut points = Vec::with_capacity(p_list.len());
    let mut max_dev = 0.0f64;
    for &p in p_list {
        let n = 2 * p;
        let signal = model::synth_signal(&model, n);
        let mut rng = model::derive_rng(seed, p as u64);
        let series = model::add_noise(&signal, 0.5, &mut rng);
        let pencil = model::build_pencil(&series)?;
        let nodes: Vec<Complex64> =
            (0..m * m).map(|idx| grid.node(idx % m, idx / m)).collect();

        let mut ws = ProfileWorkspace::new(p);
        let fast_repeats = 5;
        let mut fast_times = Vec::with_capacity(fast_repeats);
        let mut sink = 0.0f64;
        for _ in 0..fast_repeats {
            let t0 = std::time::Instant::now();
            for &z in &nodes {
                sink += ws.profile(&pencil, z)[p - 1];
            }
            fast_times.push(t0.elapsed().as_secs_f64());
        }

        let direct_repeats = 3;
        let mut direct_times = Vec::with_capacity(direct_repeats);
        for _ in 0..direct_repeats {
            let t0 = std::time::Instant::now();
            for &z in &nodes {
                sink += crate::density::rkk_profile_direct(&pencil, z)[p - 1];
            }
            direct_times.push(t0.elapsed().as_secs_f64());
        }
        std::hint::black_box(sink);

        // cross-check on a handful of nodes
        for &z in nodes.iter().step_by((m * m / 16).max(1)) {
            let fast = ws.profile(&pencil, z).to_vec();
            let direct = crate::density::rkk_profile_direct(&pencil, z);
            for k in 0..p {
                let scale = direct[k].abs().max(1e-300);
                max_dev = max_dev.max((fast[k] - direct[k]).abs() / scale);
            }
        }

        points.push(BenchPoint {
            p,
            fast_per_point: median(fast_times) / (m * m) as f64,
            direct_per_point: median(direct_times) / (m * m) as f64,
        });
    }
    let ps: Vec<usize> = points.iter().map(|pt| pt.p).collect();
    let fast: Vec<f64> = points.iter().map(|pt| pt.fast_per_point).collect();
    let direct: Vec<f64> = points.iter().map(|pt| pt.direct_per_point).collect();
    Ok(BenchReport {
        m,
        seed,
        fast_exponent: fit_exponent(&ps, &fast),
        direct_exponent: fit_exponent(&ps, &direct),
        max_profile_deviation: max_dev,
        points,
    })
}
