//! Experiment orchestration: each submodule owns one subcommand's config
//! schema, runs the corresponding drivers from the core crate, emits CSV and
//! JSON results, and reports whether its acceptance-style checks passed.

pub mod chaos;
pub mod contract;
pub mod girsanov;
pub mod moments;
pub mod rates_cmd;
pub mod simulate;

use mvdelay_core::coupling::CouplingStepRecord;
use mvdelay_core::model::{InitialSpec, Scenario};

/// Outcome of one experiment run: the summary that was written to disk and
/// whether all of the run's own checks passed (drives the exit code).
#[derive(Debug, Clone)]
pub struct RunStatus {
    pub passed: bool,
    pub summary: serde_json::Value,
}

/// Second scenario of a coupled pair: same grid/model/size, its own initial
/// sampler, and optionally its own seed for the initial draws.
pub(crate) fn variant_scenario(
    base: &Scenario,
    initial: &InitialSpec,
    seed: Option<u64>,
) -> Scenario {
    let mut out = base.clone();
    out.initial = initial.clone();
    if let Some(s) = seed {
        out.seed = s;
    }
    out
}

/// Decay series for rate fitting: drop the burn-in window, then drop points
/// at or below the Monte Carlo noise floor (3 standard errors) — floored
/// points carry no decay information.
pub(crate) fn decay_series(
    records: &[CouplingStepRecord],
    value: impl Fn(&CouplingStepRecord) -> f64,
    se: impl Fn(&CouplingStepRecord) -> f64,
    burn_in_time: f64,
) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.time >= burn_in_time)
        .filter(|r| {
            let v = value(r);
            v > 0.0 && v > 3.0 * se(r)
        })
        .map(|r| (r.time, value(r)))
        .collect()
}
