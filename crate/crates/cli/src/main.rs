//! Command-line front end: signal synthesis, density evaluation, parameter
//! estimation, Fourier reconstruction, Monte Carlo validation and the
//! profile-cost benchmark.
//!
//! Every command is deterministic given its configuration and seed. Errors
//! are reported as a JSON object on stderr; exit code 2 marks a
//! configuration or contract problem, 3 a numerical failure.

// NaN-rejecting comparison guards, as in the library.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod io;


use clap::{Parser, Subcommand};
use num_complex::Complex64;
use std::io::Write as _;
use serde::Serialize;

use config::{
    load_json, DensityConfig, EstimateConfig, GridConfig, ModelConfig, PotentialKind,
    ReconstructConfig,
};
use hankel_pencil::density::{
    condensed_density_grid, condensed_density_grid_exact, DensityField, SmoothingParams,
};
use hankel_pencil::estimate::{
    estimate_model_refined, local_maxima, score_replicates, vandermonde_ls, EstimateResult,
};
use hankel_pencil::fourier::{reconstruct, rough_estimate, uniform_t_grid};
use hankel_pencil::mc;
use hankel_pencil::model::{self, derive_rng, HankelPencil, NoisySeries};

#[derive(Debug)]
pub enum ErrorKind {
    Config,
    Numerical,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl ToString) -> Self {
        CliError { kind: ErrorKind::Config, message: msg.to_string() }
    }

    pub fn numerical(msg: impl ToString) -> Self {
        CliError { kind: ErrorKind::Numerical, message: msg.to_string() }
    }
}

impl From<hankel_pencil::Error> for CliError {
    fn from(e: hankel_pencil::Error) -> Self {
        use hankel_pencil::Error::*;
        match e {
            Contract(_) | Domain(_) => CliError::config(e),
            Fit(_) | Estimation(_) | Numerical(_) => CliError::numerical(e),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hankel-pencil",
    version,
    about = "Condensed-density pipelines for noisy Hankel pencils"
)]
struct Cli {
    /// Master seed, overriding any seed found in config files.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism, or the
    /// HANKEL_PENCIL_THREADS environment variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out_dir: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a signal and a noisy record from a model config.
    Synth {
        /// Model JSON: {"components": [{"c": [re,im], "xi": [re,im]}, ...],
        /// "n": 74, "sigma": 0.5, "seed": 12345}
        #[arg(long)]
        config: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Evaluate the condensed density of a record over a lattice.
    Density {
        #[arg(long)]
        config: Option<String>,
        /// Record CSV (k,re,im).
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Lattice as x0,y0,delta,m.
        #[arg(long, value_parser = GridConfig::parse_flag, allow_hyphen_values = true)]
        grid: Option<GridConfig>,
        /// Replicated-potential variant: number of generated records
        /// (requires --model).
        #[arg(long)]
        mc: Option<usize>,
        /// Model JSON for the replicated variant.
        #[arg(long)]
        model: Option<String>,
        /// Also write a PGM heatmap of the normalized density.
        #[arg(long)]
        pgm: bool,
        #[arg(long, value_enum)]
        potential: Option<PotentialKind>,
        /// Potential accuracy estimate: prints the recommended mesh size
        /// C * epsilon^(1/4) (advisory; the actual grid is used as given).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Constant C of the recommended-mesh rule.
        #[arg(long, default_value_t = 1.0)]
        mesh_c: f64,
    },
    /// Estimate exponential-model parameters from a record.
    Estimate {
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_parser = GridConfig::parse_flag, allow_hyphen_values = true)]
        grid: Option<GridConfig>,
        #[arg(long)]
        max_candidates: Option<usize>,
        /// Manual model order: take the top peaks without selection.
        #[arg(long)]
        p_hat: Option<usize>,
        /// Replicated scoring: number of generated records (requires --model).
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        model: Option<String>,
        /// Sub-cell quadratic refinement of peak locations before selection.
        #[arg(long)]
        refine_peaks: bool,
    },
    /// Reconstruct a piecewise-constant function from noisy Fourier
    /// coefficients.
    Reconstruct {
        #[arg(long)]
        config: Option<String>,
        #[arg(long)]
        data: Option<String>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long, value_parser = GridConfig::parse_flag, allow_hyphen_values = true)]
        grid: Option<GridConfig>,
        #[arg(long)]
        n_breaks: Option<usize>,
        /// Candidate-peak pool for the fit-based breakpoint selection.
        #[arg(long)]
        pool: Option<usize>,
        #[arg(long)]
        t_points: Option<usize>,
    },
    /// Monte Carlo validation reports (chi-square law, Laguerre fit
    /// quality, smoothing monotonicity).
    Validate {
        #[arg(long, default_value = "all")]
        suite: String,
        /// Replicate count override.
        #[arg(long)]
        replicates: Option<usize>,
        /// Run the Laguerre study at the full 4e6 replicates.
        #[arg(long)]
        full: bool,
    },
    /// Time the fast and direct profile paths and fit cost exponents.
    Bench {
        #[arg(long, default_value = "16,32,64,128")]
        p_list: String,
        #[arg(long, default_value_t = 32)]
        m: usize,
    },
}

fn main() {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    if let Err(e) = run(cli) {
        let (code, kind) = match e.kind {
            ErrorKind::Config => (2, "config"),
            ErrorKind::Numerical => (3, "numerical"),
        };
        eprintln!("{}", serde_json::json!({ "error": kind, "message": e.message }));
        std::process::exit(code);
    }
}

fn configure_threads(flag: Option<usize>) {
    let from_env =
        std::env::var("HANKEL_PENCIL_THREADS").ok().and_then(|v| v.parse::<usize>().ok());
    if let Some(threads) = flag.or(from_env) {
        // ignore the error when a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let out_dir = io::create_out_dir(&cli.out_dir)?;
    match cli.command {
        Command::Synth { config, n, sigma } => {
            let mut model_cfg: ModelConfig = load_json(&config)?;
            if let Some(n) = n {
                model_cfg.n = n;
            }
            if let Some(sigma) = sigma {
                model_cfg.sigma = sigma;
            }
            if let Some(seed) = cli.seed {
                model_cfg.seed = seed;
            }
            model_cfg.validate()?;
            let s = model::synth_signal(&model_cfg.model, model_cfg.n);
            let mut rng = derive_rng(model_cfg.seed, 0);
            let series = model::add_noise(&s, model_cfg.sigma, &mut rng);
            io::write_series(&out_dir.join("signal.csv"), &s)?;
            io::write_series(&out_dir.join("data.csv"), &series.a)?;
            println!(
                "wrote signal.csv and data.csv ({} samples, sigma {})",
                model_cfg.n, model_cfg.sigma
            );
            Ok(())
        }
        Command::Density { config, data, sigma, beta, grid, mc, model, pgm, potential, epsilon, mesh_c } => {
            let mut cfg: DensityConfig =
                config.as_deref().map(load_json).transpose()?.unwrap_or_default();
            merge(&mut cfg.data, data);
            merge(&mut cfg.sigma, sigma);
            merge(&mut cfg.beta, beta);
            merge(&mut cfg.grid, grid);
            merge(&mut cfg.mc, mc);
            merge(&mut cfg.potential, potential);
            if pgm {
                cfg.pgm = Some(true);
            }
            if let Some(path) = model {
                cfg.model = Some(load_json(&path)?);
            }
            if let Some(eps) = epsilon {
                if !(eps > 0.0) || !(mesh_c > 0.0) {
                    return Err(CliError::config("--epsilon and --mesh-c must be positive"));
                }
                println!(
                    "recommended mesh size for potential accuracy {eps:e}: {}",
                    hankel_pencil::density::mesh_from_epsilon(eps, mesh_c)
                );
            }
            run_density(cfg, cli.seed, &out_dir)
        }
        Command::Estimate {
            config,
            data,
            sigma,
            beta,
            grid,
            max_candidates,
            p_hat,
            replicates,
            model,
            refine_peaks,
        } => {
            let mut cfg: EstimateConfig =
                config.as_deref().map(load_json).transpose()?.unwrap_or_default();
            merge(&mut cfg.data, data);
            merge(&mut cfg.sigma, sigma);
            merge(&mut cfg.beta, beta);
            merge(&mut cfg.grid, grid);
            merge(&mut cfg.max_candidates, max_candidates);
            merge(&mut cfg.p_hat, p_hat);
            merge(&mut cfg.replicates, replicates);
            if refine_peaks {
                cfg.refine_peaks = Some(true);
            }
            if let Some(path) = model {
                cfg.model = Some(load_json(&path)?);
            }
            run_estimate(cfg, cli.seed, &out_dir)
        }
        Command::Reconstruct { config, data, sigma, beta, grid, n_breaks, pool, t_points } => {
            let mut cfg: ReconstructConfig =
                config.as_deref().map(load_json).transpose()?.unwrap_or_default();
            merge(&mut cfg.data, data);
            merge(&mut cfg.sigma, sigma);
            merge(&mut cfg.beta, beta);
            merge(&mut cfg.grid, grid);
            merge(&mut cfg.n_breaks, n_breaks);
            merge(&mut cfg.pool, pool);
            merge(&mut cfg.t_points, t_points);
            run_reconstruct(cfg, &out_dir)
        }
        Command::Validate { suite, replicates, full } => {
            run_validate(&suite, replicates, full, cli.seed.unwrap_or(1), &out_dir)
        }
        Command::Bench { p_list, m } => {
            let ps: Vec<usize> = p_list
                .split(',')
                .map(|t| t.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::config(format!("--p-list: {e}")))?;
            if ps.len() < 2 || ps.iter().any(|&p| p < 2) {
                return Err(CliError::config("--p-list needs at least two orders >= 2"));
            }
            let report =
                hankel_pencil::bench::profile_cost_study(&ps, m, cli.seed.unwrap_or(99))?;
            io::write_with(&out_dir.join("bench.csv"), |w| report.write_csv(w))?;
            println!(
                "fast exponent {:.3}, direct exponent {:.3}, max path deviation {:.2e} (bench.csv)",
                report.fast_exponent, report.direct_exponent, report.max_profile_deviation
            );
            Ok(())
        }
    }
}

fn merge<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// Smoothing parameters from user sigma/beta; a zero sigma (noiseless
/// record) falls back to a vanishing smoothing scale so the potential
/// approaches the raw log determinant.
fn smoothing_for(sigma: f64, beta: f64) -> Result<SmoothingParams, CliError> {
    let effective = if sigma > 0.0 { sigma } else { 1e-7 };
    SmoothingParams::new(effective, beta).map_err(CliError::from)
}

fn density_field_from(
    cfg: &DensityConfig,
    potential: PotentialKind,
    seed_override: Option<u64>,
) -> Result<DensityField, CliError> {
    let grid = cfg.grid.unwrap_or_else(GridConfig::default_square).to_grid()?;
    let beta = cfg.beta.ok_or_else(|| CliError::config("missing beta (--beta or config)"))?;
    match cfg.mc {
        Some(reps) if reps > 0 => {
            let model_cfg = cfg
                .model
                .as_ref()
                .ok_or_else(|| CliError::config("--mc requires a model (--model or config)"))?;
            model_cfg.validate()?;
            let seed = seed_override.unwrap_or(model_cfg.seed);
            let signal = model::synth_signal(&model_cfg.model, model_cfg.n);
            let sigma = cfg.sigma.unwrap_or(model_cfg.sigma);
            let field = match potential {
                PotentialKind::Smoothed => {
                    let params = smoothing_for(sigma, beta)?;
                    mc::mc_condensed_density(&signal, sigma, reps, &grid, &params, seed)?
                }
                PotentialKind::Exact => {
                    let pencils: Vec<HankelPencil> = (0..reps)
                        .map(|r| {
                            let mut rng = derive_rng(seed, r as u64);
                            let series = model::add_noise(&signal, sigma, &mut rng);
                            model::build_pencil(&series)
                        })
                        .collect::<Result<_, _>>()?;
                    condensed_density_grid_exact(&pencils, &grid)?
                }
            };
            Ok(field)
        }
        _ => {
            let data = cfg
                .data
                .as_deref()
                .ok_or_else(|| CliError::config("missing record (--data or config)"))?;
            let a = io::read_series(data)?;
            let sigma =
                cfg.sigma.ok_or_else(|| CliError::config("missing sigma (--sigma or config)"))?;
            let series = NoisySeries { a, sigma };
            let pencil = model::build_pencil(&series)?;
            let field = match potential {
                PotentialKind::Smoothed => {
                    let params = smoothing_for(sigma, beta)?;
                    condensed_density_grid(&[pencil], &grid, &params)?
                }
                PotentialKind::Exact => condensed_density_grid_exact(&[pencil], &grid)?,
            };
            Ok(field)
        }
    }
}

fn run_density(
    cfg: DensityConfig,
    seed_override: Option<u64>,
    out_dir: &std::path::Path,
) -> Result<(), CliError> {
    let potential = cfg.potential.unwrap_or(PotentialKind::Smoothed);
    let field = density_field_from(&cfg, potential, seed_override)?;
    io::write_with(&out_dir.join("density.csv"), |w| field.write_csv(w))?;
    if cfg.pgm.unwrap_or(false) {
        io::write_with(&out_dir.join("density.pgm"), |w| field.write_pgm(w))?;
    }
    println!(
        "wrote density.csv ({}x{} lattice, total mass {:.9})",
        field.grid().m,
        field.grid().m,
        field.total_mass()
    );
    Ok(())
}

#[derive(Serialize)]
struct ReplicateSummary {
    replicates: usize,
    seed: u64,
    discarded: usize,
    used: usize,
}

fn run_estimate(
    cfg: EstimateConfig,
    seed_override: Option<u64>,
    out_dir: &std::path::Path,
) -> Result<(), CliError> {
    let grid = cfg.grid.unwrap_or_else(GridConfig::default_square).to_grid()?;
    let beta = cfg.beta.ok_or_else(|| CliError::config("missing beta (--beta or config)"))?;
    let refine = cfg.refine_peaks.unwrap_or(false);
    match cfg.replicates {
        Some(reps) if reps > 0 => {
            let model_cfg = cfg
                .model
                .as_ref()
                .ok_or_else(|| CliError::config("--replicates requires a model"))?;
            model_cfg.validate()?;
            let seed = seed_override.unwrap_or(model_cfg.seed);
            let sigma = cfg.sigma.unwrap_or(model_cfg.sigma);
            let signal = model::synth_signal(&model_cfg.model, model_cfg.n);
            let params = smoothing_for(sigma, beta)?;
            let max_candidates = cfg.max_candidates.unwrap_or(2 * model_cfg.n);
            let results: Vec<EstimateResult> = (0..reps)
                .map(|r| -> Result<EstimateResult, hankel_pencil::Error> {
                    let mut rng = derive_rng(seed, r as u64);
                    let series = model::add_noise(&signal, sigma, &mut rng);
                    let pencil = model::build_pencil(&series)?;
                    let field = condensed_density_grid(&[pencil], &grid, &params)?;
                    estimate_model_refined(&field, &series, max_candidates, refine)
                })
                .collect::<Result<_, _>>()?;
            let table = score_replicates(&results, &model_cfg.model);
            io::write_with(&out_dir.join("stats.csv"), |w| table.write_csv(w))?;
            io::write_json(
                &out_dir.join("replicates.json"),
                &serde_json::json!({
                    "summary": ReplicateSummary {
                        replicates: reps,
                        seed,
                        discarded: table.discarded,
                        used: table.n_used,
                    },
                    "estimates": results,
                }),
            )?;
            println!(
                "wrote stats.csv and replicates.json ({} replicates, {} discarded)",
                reps, table.discarded
            );
            Ok(())
        }
        _ => {
            let data = cfg
                .data
                .as_deref()
                .ok_or_else(|| CliError::config("missing record (--data or config)"))?;
            let a = io::read_series(data)?;
            let sigma =
                cfg.sigma.ok_or_else(|| CliError::config("missing sigma (--sigma or config)"))?;
            let series = NoisySeries { a, sigma };
            let n = series.n();
            let pencil = model::build_pencil(&series)?;
            let params = smoothing_for(sigma, beta)?;
            let field = condensed_density_grid(&[pencil], &grid, &params)?;
            let result = match cfg.p_hat {
                Some(q) => {
                    // manual order: top-q maxima, amplitudes by least squares
                    let peaks = local_maxima(&field);
                    if peaks.len() < q {
                        return Err(CliError::numerical(format!(
                            "only {} local maxima, cannot take {q}",
                            peaks.len()
                        )));
                    }
                    let nodes: Vec<Complex64> = peaks[..q].iter().map(|p| p.z).collect();
                    let (c_hat, residual) = vandermonde_ls(&nodes, &series)?;
                    EstimateResult {
                        p_hat: q,
                        xi_hat: nodes,
                        c_hat,
                        residual,
                        threshold_value: peaks[q - 1].value,
                        identifiable: false,
                    }
                }
                None => {
                    estimate_model_refined(&field, &series, cfg.max_candidates.unwrap_or(2 * n), refine)?
                }
            };
            io::write_json(&out_dir.join("estimate.json"), &result)?;
            println!(
                "wrote estimate.json (p_hat {}, residual {:.6e}, identifiable {})",
                result.p_hat, result.residual, result.identifiable
            );
            Ok(())
        }
    }
}

fn run_reconstruct(cfg: ReconstructConfig, out_dir: &std::path::Path) -> Result<(), CliError> {
    let data = cfg
        .data
        .as_deref()
        .ok_or_else(|| CliError::config("missing record (--data or config)"))?;
    let a = io::read_series(data)?;
    let sigma =
        cfg.sigma.ok_or_else(|| CliError::config("missing sigma (--sigma or config)"))?;
    let beta = cfg.beta.ok_or_else(|| CliError::config("missing beta (--beta or config)"))?;
    let n_breaks = cfg
        .n_breaks
        .ok_or_else(|| CliError::config("missing n_breaks (--n-breaks or config)"))?;
    let grid = cfg.grid.unwrap_or_else(GridConfig::default_square).to_grid()?;
    let t_points = cfg.t_points.unwrap_or(2048);
    let series = NoisySeries { a, sigma };
    let params = smoothing_for(sigma, beta)?;
    let function = reconstruct(&series, n_breaks, &grid, &params, cfg.pool, t_points)?;
    io::write_json(&out_dir.join("reconstruction.json"), &function)?;
    let t_grid = uniform_t_grid(t_points);
    let rough = rough_estimate(&series, &t_grid);
    let rec_vals = function.eval_on(&t_grid);
    io::write_with(&out_dir.join("report.csv"), |w| {
        writeln!(w, "t,F_rough,F_reconstructed")?;
        for i in 0..t_grid.len() {
            writeln!(w, "{},{},{}", t_grid[i], rough[i], rec_vals[i])?;
        }
        Ok(())
    })?;
    println!(
        "wrote reconstruction.json and report.csv (breakpoints: {:?})",
        function.breakpoints
    );
    Ok(())
}

#[derive(Serialize)]
struct LaguerreStudyReport {
    sigma: f64,
    #[serde(with = "hankel_pencil::model::serde_complex")]
    z: Complex64,
    n: usize,
    replicates: usize,
    seed: u64,
    per_k: Vec<LaguerreStudyRow>,
}

#[derive(Serialize)]
struct LaguerreStudyRow {
    k: usize,
    alpha: f64,
    beta: f64,
    l2_one_term: f64,
    l2_ten_term: f64,
    ten_term_improves: bool,
}

fn run_validate(
    suite: &str,
    replicates: Option<usize>,
    full: bool,
    seed: u64,
    out_dir: &std::path::Path,
) -> Result<(), CliError> {
    let run_chi2 = suite == "all" || suite == "chi2";
    let run_laguerre = suite == "all" || suite == "laguerre";
    let run_monotonicity = suite == "all" || suite == "monotonicity";
    if !(run_chi2 || run_laguerre || run_monotonicity) {
        return Err(CliError::config(format!(
            "unknown suite {suite:?} (expected all, chi2, laguerre or monotonicity)"
        )));
    }
    let model = hankel_pencil::model::ExponentialModel::benchmark_five();
    let z = Complex64::new(1.0f64.cos(), 0.8);

    if run_chi2 {
        let n_rep = replicates.unwrap_or(100_000);
        let reports: Vec<_> = [1usize, 4, 8]
            .iter()
            .map(|&k| mc::chi2_check(8, k, n_rep, seed + k as u64))
            .collect::<Result<_, _>>()?;
        let all_pass = reports.iter().all(|r| r.pass);
        io::write_json(&out_dir.join("chi2.json"), &reports)?;
        println!("chi2.json: pass = {all_pass}");
    }

    if run_laguerre {
        let n_rep = if full { 4_000_000 } else { replicates.unwrap_or(200_000) };
        let n = 74;
        let signal = model::synth_signal(&model, n);
        let studies = mc::empirical_rkk_multi(&signal, 0.5, n_rep, z, &[1, 18, 36], seed)?;
        let mut rows = Vec::new();
        for emp in &studies {
            let (expansion, d) = mc::fit_vs_histogram_l2(emp, &[0, 10])?;
            rows.push(LaguerreStudyRow {
                k: emp.k,
                alpha: expansion.alpha,
                beta: expansion.beta,
                l2_one_term: d[0],
                l2_ten_term: d[1],
                ten_term_improves: d[1] < d[0],
            });
        }
        let improves = rows.iter().all(|r| r.ten_term_improves);
        let report =
            LaguerreStudyReport { sigma: 0.5, z, n, replicates: n_rep, seed, per_k: rows };
        io::write_json(&out_dir.join("laguerre.json"), &report)?;
        io::write_with(&out_dir.join("laguerre.csv"), |w| {
            writeln!(w, "k,alpha,beta,l2_one_term,l2_ten_term")?;
            for r in &report.per_k {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    r.k, r.alpha, r.beta, r.l2_one_term, r.l2_ten_term
                )?;
            }
            Ok(())
        })?;
        println!("laguerre.json: ten-term improves everywhere = {improves}");
    }

    if run_monotonicity {
        let n_rep = replicates.unwrap_or(20_000);
        let signal = model::synth_signal(&model, 20);
        let report = mc::monotonicity_check(&signal, &[0.1, 0.2, 0.4], z, 5, n_rep, 200, seed)?;
        io::write_json(&out_dir.join("monotonicity.json"), &report)?;
        io::write_with(&out_dir.join("monotonicity.csv"), |w| {
            writeln!(w, "sigma,alpha_hat,beta_hat,beta_se")?;
            for p in &report.points {
                writeln!(w, "{},{},{},{}", p.sigma, p.alpha_hat, p.beta_hat, p.beta_se)?;
            }
            Ok(())
        })?;
        println!(
            "monotonicity.json: beta nondecreasing within error = {}",
            report.beta_nondecreasing_within_error
        );
    }
    Ok(())
}
