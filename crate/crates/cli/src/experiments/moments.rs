//! Long-horizon uniform moment monitor: run the interacting system, record
//! the empirical second Γ-moment, and report the plateau statistics (the
//! moment bound promises no growth trend on the second half of the run).

use serde::{Deserialize, Serialize};

use mvdelay_core::engine::run_interacting;
use mvdelay_core::metrics::{path_norm, PathNorm};
use mvdelay_core::model::Scenario;
use mvdelay_core::stats;

use crate::output::{CsvValue, OutputCtx};

use super::RunStatus;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentsConfig {
    pub scenario: Scenario,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Gate: relative growth of the moment over the second half must stay
    /// below this (e.g. 0.2).
    #[serde(default)]
    pub max_relative_growth: Option<f64>,
    /// Gate: final moment must match this stationary value within 3
    /// cross-particle standard errors.
    #[serde(default)]
    pub stationary_target: Option<f64>,
}

fn default_record_every() -> usize {
    10
}

impl MomentsConfig {
    pub fn override_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
    }
}

#[derive(Debug, Clone, Serialize)]
struct StationaryCheck {
    target: f64,
    final_moment: f64,
    se: f64,
    within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
struct MomentsSummary {
    max_moment: f64,
    moment_at_half_horizon: f64,
    relative_growth_second_half: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    growth_gate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary: Option<StationaryCheck>,
    passed: bool,
}

pub fn run(cfg: &MomentsConfig, ctx: &OutputCtx) -> anyhow::Result<RunStatus> {
    let out = run_interacting(&cfg.scenario, cfg.record_every)?;

    ctx.write_csv(
        "moments_trace.csv",
        &["step", "time", "second_gamma_moment"],
        out.trace.iter().map(|r| {
            vec![CsvValue::from(r.step), r.time.into(), r.second_gamma_moment.into()]
        }),
    )?;

    let horizon = cfg.scenario.grid.time_at(cfg.scenario.grid.horizon_steps);
    let half = 0.5 * horizon;
    let at_half = out
        .trace
        .iter()
        .find(|r| r.time >= half)
        .map(|r| r.second_gamma_moment)
        .unwrap_or(f64::NAN);
    let max_moment =
        out.trace.iter().map(|r| r.second_gamma_moment).fold(f64::NEG_INFINITY, f64::max);
    let max_second_half = out
        .trace
        .iter()
        .filter(|r| r.time >= half)
        .map(|r| r.second_gamma_moment)
        .fold(f64::NEG_INFINITY, f64::max);
    let relative_growth = if at_half > 0.0 { max_second_half / at_half - 1.0 } else { 0.0 };

    let mut passed = true;
    if let Some(gate) = cfg.max_relative_growth {
        passed &= relative_growth < gate;
    }

    let stationary = cfg.stationary_target.map(|target| {
        let sq: Vec<f64> = out
            .final_cloud
            .segments()
            .iter()
            .map(|s| {
                let v = path_norm(s, PathNorm::GammaR0);
                v * v
            })
            .collect();
        let (final_moment, se) = stats::mean_se(&sq);
        let within = (final_moment - target).abs() < 3.0 * se;
        StationaryCheck { target, final_moment, se, within_3se: within }
    });
    if let Some(st) = &stationary {
        passed &= st.within_3se;
    }

    let summary = MomentsSummary {
        max_moment,
        moment_at_half_horizon: at_half,
        relative_growth_second_half: relative_growth,
        growth_gate: cfg.max_relative_growth,
        stationary,
        passed,
    };
    let value = serde_json::to_value(&summary)?;
    ctx.write_json("summary.json", &summary)?;
    Ok(RunStatus { passed, summary: value })
}
