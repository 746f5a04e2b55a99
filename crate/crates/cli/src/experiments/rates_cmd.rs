//! Rate-machinery subcommand: evaluate the contraction constants and
//! hypothesis checks for declared structural constants and print the report
//! as JSON. The exit code reflects whether every requested condition holds.

use serde::{Deserialize, Serialize};

use mvdelay_core::rates::{
    check_theorem23_condition, theorem33_rates, RateFunction, RateReport, Theorem23Check,
};
use mvdelay_core::model::StructuralConstants;

use crate::output::OutputCtx;

use super::RunStatus;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatesConfig {
    pub constants: StructuralConstants,
    pub beta: f64,
    pub r0: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Also report the small-distance penalty at this mixing threshold.
    #[serde(default)]
    pub epsilon_for_ell: Option<f64>,
    /// Conditions that gate the exit code. Defaults to kb_kd1, kb_kd, ctk0,
    /// plus dic when K3 > 0.
    #[serde(default)]
    pub require: Option<Vec<String>>,
}

fn default_tol() -> f64 {
    1e-10
}

impl RatesConfig {
    pub fn override_seed(&mut self, _seed: u64) {}
}

#[derive(Debug, Clone, Serialize)]
struct RatesSummary {
    #[serde(flatten)]
    report: RateReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    synchronous: Option<Theorem23Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ell_epsilon: Option<f64>,
    required: Vec<String>,
    passed: bool,
}

pub fn run(cfg: &RatesConfig, ctx: &OutputCtx) -> anyhow::Result<RunStatus> {
    let c = cfg.constants;
    let rf = RateFunction::paper(c.k1, c.k2, c.r_radius, c.k_sigma, cfg.beta)?;
    let mut report = theorem33_rates(&rf, c.k_b, cfg.r0, cfg.tol)?;

    let synchronous = (c.k3 > 0.0).then(|| {
        let check = check_theorem23_condition(c.k1, c.k2, c.k3, cfg.r0);
        report.conditions.dic = Some(check.holds);
        check
    });

    let ell_epsilon = match cfg.epsilon_for_ell {
        Some(eps) => Some(rf.ell(eps, cfg.tol)?),
        None => None,
    };

    let required: Vec<String> = cfg.require.clone().unwrap_or_else(|| {
        let mut base = vec!["kb_kd1".to_string(), "kb_kd".to_string(), "ctk0".to_string()];
        if c.k3 > 0.0 {
            base.push("dic".to_string());
        }
        base
    });

    let mut passed = true;
    for name in &required {
        let holds = match name.as_str() {
            "kb_kd1" => report.conditions.kb_kd1,
            "kb_kd" => report.conditions.kb_kd,
            "ctk0" | "CTK0" => report.conditions.ctk0,
            "dic" => report.conditions.dic.unwrap_or(false),
            other => anyhow::bail!("unknown condition {other:?} in require list"),
        };
        passed &= holds;
    }

    let summary = RatesSummary { report, synchronous, ell_epsilon, required, passed };
    let value = serde_json::to_value(&summary)?;
    ctx.write_json("rate_report.json", &summary)?;
    Ok(RunStatus { passed, summary: value })
}
