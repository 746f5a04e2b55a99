//! Propagation-of-chaos experiment: for each particle count `N`, couple the
//! interacting system to the frozen-flow limit system through shared noise
//! streams and chaotic (i.i.d.) initial data, measure the time-averaged
//! per-particle coupled Γ-distance, and fit its log-log slope against `N`.
//!
//! The coupled gap is driven by the empirical fluctuation of the mean-field
//! term — one slowly-mixing common-mode process per run — so a single run
//! carries very few effective samples no matter how large `N` is. The
//! experiment therefore averages over independent replicate runs (fresh
//! seeds, one shared limit flow) and reports replicate-level standard
//! errors.

use serde::{Deserialize, Serialize};

use mvdelay_core::engine::{solve_mckean_vlasov_picard, step_frozen, step_interacting};
use mvdelay_core::metrics::{segment_diff_norm, PathNorm};
use mvdelay_core::model::Scenario;
use mvdelay_core::noise::NoiseStream;
use mvdelay_core::stats;

use crate::output::{CsvValue, OutputCtx};

use super::RunStatus;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChaosConfig {
    /// Base scenario; `n_particles` is ignored in favor of `n_list`.
    pub scenario: Scenario,
    pub n_list: Vec<usize>,
    /// Reference size of the Picard-solved limit flow (much larger than
    /// every entry of `n_list`).
    pub flow_particles: usize,
    #[serde(default = "default_picard_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_picard_max_iter")]
    pub picard_max_iter: usize,
    /// Distances are averaged over `t ∈ [fraction·T, T]`.
    #[serde(default = "default_window_fraction")]
    pub average_window_fraction: f64,
    /// Independent replicate runs per `N` (averaged; the limit flow is
    /// shared).
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Optional acceptance band `[lo, hi]` for the fitted slope.
    #[serde(default)]
    pub slope_band: Option<[f64; 2]>,
    #[serde(default)]
    pub min_r_squared: Option<f64>,
}

fn default_picard_tol() -> f64 {
    1e-3
}
fn default_picard_max_iter() -> usize {
    30
}
fn default_window_fraction() -> f64 {
    0.5
}
fn default_replicates() -> usize {
    1
}

impl ChaosConfig {
    pub fn override_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
    }
}

fn replicate_seed(base: u64, replicate: u64) -> u64 {
    // splitmix64 of (base, replicate); replicate 0 keeps the base seed so
    // the flow's reference particles coincide with the first run
    if replicate == 0 {
        return base;
    }
    let mut z = base ^ replicate.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Serialize)]
struct PerN {
    n: usize,
    mean_gamma_distance: f64,
    se: f64,
    replicate_means: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct ChaosSummary {
    slope: f64,
    intercept: f64,
    r_squared: f64,
    per_n: Vec<PerN>,
    replicates: usize,
    flow_particles: usize,
    picard_iterations: usize,
    picard_final_distance: f64,
    window_start_time: f64,
    passed: bool,
}

pub fn run(cfg: &ChaosConfig, ctx: &OutputCtx) -> anyhow::Result<RunStatus> {
    anyhow::ensure!(cfg.n_list.len() >= 3, "n_list needs at least 3 sizes");
    anyhow::ensure!(cfg.replicates >= 1, "replicates must be at least 1");
    let base = &cfg.scenario;
    let steps = base.grid.horizon_steps;
    let horizon = base.grid.time_at(steps);
    let window_start = cfg.average_window_fraction * horizon;

    let mut ref_scenario = base.clone();
    ref_scenario.n_particles = cfg.flow_particles;
    let picard = solve_mckean_vlasov_picard(
        &ref_scenario,
        cfg.flow_particles,
        cfg.picard_tol,
        cfg.picard_max_iter,
    )?;
    let model = base.build_model()?;

    let mut per_n = Vec::new();
    let mut trace_rows: Vec<Vec<CsvValue>> = Vec::new();

    for &n in &cfg.n_list {
        let mut replicate_means = Vec::with_capacity(cfg.replicates);
        for rep in 0..cfg.replicates {
            let seed = replicate_seed(base.seed, rep as u64);
            let noise = NoiseStream::new(seed);
            // chaotic initials: i.i.d. draws, identical for both systems, so
            // the coupled distance starts at zero and grows to the
            // fluctuation level
            let initial = base.initial.sample_cloud(&base.grid, n, seed)?;
            let mut interacting = initial.clone();
            let mut limit = initial;
            let mut window_sums = vec![0.0; n];
            let mut window_count = 0usize;

            for k in 0..=steps {
                let dists: Vec<f64> = interacting
                    .segments()
                    .iter()
                    .zip(limit.segments())
                    .map(|(a, b)| segment_diff_norm(a, b, PathNorm::GammaR0))
                    .collect();
                if rep == 0 {
                    let (mean, se) = stats::mean_se(&dists);
                    trace_rows.push(vec![
                        CsvValue::Int(n as u64),
                        CsvValue::from(k),
                        interacting.time.into(),
                        mean.into(),
                        se.into(),
                    ]);
                }
                if interacting.time >= window_start {
                    for (acc, d) in window_sums.iter_mut().zip(&dists) {
                        *acc += d;
                    }
                    window_count += 1;
                }
                if k < steps {
                    interacting = step_interacting(&interacting, &model, &noise, k)?;
                    limit = step_frozen(&limit, &picard.flow, &model, &noise, k)?;
                }
            }

            let per_particle: Vec<f64> =
                window_sums.iter().map(|s| s / window_count as f64).collect();
            replicate_means.push(stats::mean(&per_particle));
        }
        let (mean, se) = stats::mean_se(&replicate_means);
        per_n.push(PerN { n, mean_gamma_distance: mean, se, replicate_means });
    }

    ctx.write_csv(
        "chaos_trace.csv",
        &["n", "step", "time", "gamma_mean", "gamma_se"],
        trace_rows,
    )?;
    ctx.write_csv(
        "chaos_by_n.csv",
        &["n", "gamma_distance_time_avg", "se"],
        per_n.iter().map(|p| {
            vec![CsvValue::Int(p.n as u64), p.mean_gamma_distance.into(), p.se.into()]
        }),
    )?;

    let log_points: Vec<(f64, f64)> = per_n
        .iter()
        .map(|p| ((p.n as f64).ln(), p.mean_gamma_distance.max(1e-300).ln()))
        .collect();
    let (slope, intercept, r_squared) = stats::ols(&log_points);

    let mut passed = true;
    if let Some([lo, hi]) = cfg.slope_band {
        passed &= slope >= lo && slope <= hi;
    }
    if let Some(min_r2) = cfg.min_r_squared {
        passed &= r_squared >= min_r2;
    }

    let summary = ChaosSummary {
        slope,
        intercept,
        r_squared,
        per_n,
        replicates: cfg.replicates,
        flow_particles: cfg.flow_particles,
        picard_iterations: picard.iterations,
        picard_final_distance: *picard.distance_trace.last().unwrap_or(&0.0),
        window_start_time: window_start,
        passed,
    };
    let value = serde_json::to_value(&summary)?;
    ctx.write_json("summary.json", &summary)?;
    Ok(RunStatus { passed, summary: value })
}
