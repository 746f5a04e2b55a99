//! Paired-trajectory coupling drivers.
//!
//! Three constructions are provided, matching the three contraction
//! arguments the toolkit verifies empirically:
//!
//! * **synchronous** — both copies consume identical `ΔW¹` and `ΔW²`
//!   increments, so the additive noise cancels in the difference;
//! * **asymptotic reflection** — above a mixing threshold the second copy
//!   sees the first copy's `ΔW¹` reflected across the line joining the two
//!   states; near zero distance the shared independent channel `ΔW̃¹` takes
//!   over, which prevents the pair from separating again after meeting under
//!   path-dependent drifts;
//! * **Girsanov drift shift** — the second trajectory is produced from the
//!   first by an explicit drift shift whose exponential weight `R` tilts the
//!   conditional law; the weight's cost `E[R log R]` upper-bounds the
//!   relative entropy between the endpoint laws.
//!
//! All drivers read their measure arguments from frozen flows solved by the
//! engine, and record per-step coupled distances with cross-pair standard
//! errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, MeasureFlow};
use crate::metrics::{self, PathNorm};
use crate::model::{
    sample_initial_pair, CoefficientModel, Diffusion, ModelError, ModelMode, Pairing,
    ParticleCloud, Scenario, Segment,
};
use crate::noise::Channel;
use crate::stats;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricsError),
    #[error("mixing threshold epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("paired scenarios must share grid, model, dimension, and particle count")]
    ScenarioMismatch,
    #[error("driver requires mode {expected:?}")]
    WrongMode { expected: ModelMode },
    #[error("t0 = {t0} is not a positive whole number of steps of h = {h}")]
    T0NotOnGrid { t0: f64, h: f64 },
    #[error("flow too short: need snapshots through step {need}, have {have}")]
    FlowTooShort { need: usize, have: usize },
    #[error("replica {replica} became non-finite at step {step}")]
    ReplicaBlowUp { replica: usize, step: usize },
    #[error("girsanov weight overflowed for replica {replica} (log weight {log_weight})")]
    NonFiniteWeight { replica: usize, log_weight: f64 },
}

/// The mixing profile of the asymptotic reflection coupling: `pi_r` ramps
/// from 0 below `ε/2` to 1 above `ε` (linearly in between) and
/// `pi_r² + pi_s² = 1` pointwise.
#[derive(Debug, Clone, Copy)]
pub struct MixingProfile {
    pub epsilon: f64,
}

impl MixingProfile {
    pub fn pi_r(&self, x: f64) -> f64 {
        if x >= self.epsilon {
            1.0
        } else if x <= 0.5 * self.epsilon {
            0.0
        } else {
            2.0 * x / self.epsilon - 1.0
        }
    }

    pub fn pi_s(&self, x: f64) -> f64 {
        let r = self.pi_r(x);
        (1.0 - r * r).max(0.0).sqrt()
    }
}

/// Build the mixing profile for a given threshold.
pub fn pi_functions(epsilon: f64) -> Result<MixingProfile, CouplingError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(CouplingError::BadEpsilon(epsilon));
    }
    Ok(MixingProfile { epsilon })
}

/// Householder reflection of `increment` across the hyperplane orthogonal to
/// `z`: returns `(I − 2uuᵀ)·increment` with `u = z/|z|`, or the increment
/// unchanged when `z = 0`.
pub fn reflect(increment: &[f64], z: &[f64]) -> Vec<f64> {
    let mut out = increment.to_vec();
    reflect_into(increment, z, &mut out);
    out
}

#[inline]
fn reflect_into(increment: &[f64], z: &[f64], out: &mut [f64]) {
    let norm_sq: f64 = z.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        out.copy_from_slice(increment);
        return;
    }
    let dot: f64 = z.iter().zip(increment).map(|(a, b)| a * b).sum();
    let scale = 2.0 * dot / norm_sq;
    for ((o, w), zi) in out.iter_mut().zip(increment).zip(z) {
        *o = w - scale * zi;
    }
}

/// Per-step aggregate of the coupled pair distances: endpoint gap, Γ- and
/// sup-norm segment distances (first and second moments across pairs, with
/// standard errors of each mean).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingStepRecord {
    pub step: usize,
    pub time: f64,
    pub endpoint_mean: f64,
    pub gamma_mean: f64,
    pub gamma_se: f64,
    pub sup_mean: f64,
    pub sup_se: f64,
    pub gamma_sq_mean: f64,
    pub gamma_sq_se: f64,
    pub sup_sq_mean: f64,
    pub sup_sq_se: f64,
    /// Exact transport distance between the two endpoint marginals
    /// (monotone matching); only available in dimension one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub endpoint_w1_exact: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub records: Vec<CouplingStepRecord>,
}

impl CouplingTrace {
    /// `(time, value)` series for rate fitting.
    pub fn series<F: Fn(&CouplingStepRecord) -> f64>(&self, f: F) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.time, f(r))).collect()
    }
}

fn aggregate_record(
    step: usize,
    time: f64,
    endpoint: &[f64],
    gamma: &[f64],
    sup: &[f64],
    endpoint_w1_exact: Option<f64>,
) -> CouplingStepRecord {
    let (endpoint_mean, _) = stats::mean_se(endpoint);
    let (gamma_mean, gamma_se) = stats::mean_se(gamma);
    let (sup_mean, sup_se) = stats::mean_se(sup);
    let gamma_sq: Vec<f64> = gamma.iter().map(|v| v * v).collect();
    let sup_sq: Vec<f64> = sup.iter().map(|v| v * v).collect();
    let (gamma_sq_mean, gamma_sq_se) = stats::mean_se(&gamma_sq);
    let (sup_sq_mean, sup_sq_se) = stats::mean_se(&sup_sq);
    CouplingStepRecord {
        step,
        time,
        endpoint_mean,
        gamma_mean,
        gamma_se,
        sup_mean,
        sup_se,
        gamma_sq_mean,
        gamma_sq_se,
        sup_sq_mean,
        sup_sq_se,
        endpoint_w1_exact,
    }
}

fn record_pair_distances(x: &ParticleCloud, y: &ParticleCloud, step: usize) -> CouplingStepRecord {
    let n = x.len();
    let rows: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (a, b) = (x.segment(i), y.segment(i));
            let ep = a
                .endpoint()
                .iter()
                .zip(b.endpoint())
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            (
                ep,
                metrics::segment_diff_norm(a, b, PathNorm::GammaR0),
                metrics::segment_diff_norm(a, b, PathNorm::Sup),
            )
        })
        .collect();
    let endpoint: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let gamma: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let sup: Vec<f64> = rows.iter().map(|r| r.2).collect();
    // in 1D the monotone matching solves the endpoint transport exactly
    let w1_exact = (x.dim == 1).then(|| {
        let xs: Vec<f64> = x.segments().iter().map(|s| s.endpoint()[0]).collect();
        let ys: Vec<f64> = y.segments().iter().map(|s| s.endpoint()[0]).collect();
        metrics::sorted_1d_wasserstein(&xs, &ys, metrics::Order::P1).unwrap()
    });
    aggregate_record(step, x.time, &endpoint, &gamma, &sup, w1_exact)
}

/// Measure-summary diffusion factor for one flow snapshot (zero unless the
/// model's sigma is measure-dependent).
fn measure_sigma(model: &CoefficientModel, snapshot: &ParticleCloud) -> f64 {
    match &model.diffusion {
        Diffusion::MeasureScalar(f) => f(metrics::second_gamma_moment(snapshot).sqrt()),
        _ => 0.0,
    }
}

fn full_drift(model: &CoefficientModel, seg: &Segment, measure: &ParticleCloud, out: &mut [f64]) {
    model.drift.eval(seg.endpoint(), out);
    if let Some(kernel) = &model.kernel {
        kernel.mean_field(seg, measure.segments(), out);
    }
}

fn validate_pair(
    scenario_x: &Scenario,
    scenario_y: &Scenario,
    flow_x: &MeasureFlow,
    flow_y: &MeasureFlow,
) -> Result<(CoefficientModel, usize), CouplingError> {
    if scenario_x.grid != scenario_y.grid
        || scenario_x.model != scenario_y.model
        || scenario_x.n_particles != scenario_y.n_particles
        || scenario_x.dimension()? != scenario_y.dimension()?
    {
        return Err(CouplingError::ScenarioMismatch);
    }
    let steps = scenario_x.grid.horizon_steps;
    for flow in [flow_x, flow_y] {
        if flow.len() < steps + 1 {
            return Err(CouplingError::FlowTooShort { need: steps, have: flow.len() });
        }
    }
    Ok((scenario_x.build_model()?, steps))
}

enum PairNoise {
    Synchronous,
    Reflection(MixingProfile),
}

/// Shared driver for the synchronous and reflection couplings. `X` follows
/// the first scenario against `flow_x`, `Y` the second against `flow_y`;
/// dynamics noise always comes from the first scenario's seed so the pair
/// shares increments per slot. Distances are recorded at step 0, every
/// `record_every` steps, and at the final step.
fn run_pair(
    scenario_x: &Scenario,
    scenario_y: &Scenario,
    flow_x: &MeasureFlow,
    flow_y: &MeasureFlow,
    noise_kind: PairNoise,
    record_every: usize,
) -> Result<CouplingTrace, CouplingError> {
    let (model, steps) = validate_pair(scenario_x, scenario_y, flow_x, flow_y)?;
    if matches!(noise_kind, PairNoise::Reflection(_)) && model.mode != ModelMode::Theorem3 {
        return Err(CouplingError::WrongMode { expected: ModelMode::Theorem3 });
    }

    let grid = scenario_x.grid;
    let d = scenario_x.dimension()?;
    let h = grid.step_h;
    let sqrt_h = h.sqrt();
    let noise = scenario_x.noise();

    let every = record_every.max(1);
    let mut x_cloud = scenario_x.sample_initial()?;
    let mut y_cloud = scenario_y.sample_initial()?;
    let mut records = Vec::with_capacity(steps / every + 2);
    records.push(record_pair_distances(&x_cloud, &y_cloud, 0));

    for k in 0..steps {
        let snap_x = flow_x.snapshot(k)?;
        let snap_y = flow_y.snapshot(k)?;
        let sigma_x = measure_sigma(&model, snap_x);
        let sigma_y = measure_sigma(&model, snap_y);

        let stepped: Vec<Result<(Segment, Segment), CouplingError>> = x_cloud
            .segments()
            .par_iter()
            .zip(y_cloud.segments().par_iter())
            .zip(x_cloud.stream_ids().par_iter())
            .enumerate()
            .map(|(i, ((xs, ys), &id))| {
                let x = xs.endpoint();
                let y = ys.endpoint();
                let mut bx = vec![0.0; d];
                let mut by = vec![0.0; d];
                full_drift(&model, xs, snap_x, &mut bx);
                full_drift(&model, ys, snap_y, &mut by);

                let mut dw1 = vec![0.0; d];
                noise.fill_increments(id, Channel::W1, k as u64, sqrt_h, &mut dw1);
                let mut dw2 = vec![0.0; d];
                if !matches!(model.diffusion, Diffusion::Zero) {
                    noise.fill_increments(id, Channel::W2, k as u64, sqrt_h, &mut dw2);
                }
                let (sx, sy) = match &model.diffusion {
                    Diffusion::Zero => (0.0, 0.0),
                    Diffusion::MeasureScalar(_) => (sigma_x, sigma_y),
                    Diffusion::StateScalar(f) => (f(x), f(y)),
                };

                let mut x_new = vec![0.0; d];
                let mut y_new = vec![0.0; d];
                match &noise_kind {
                    PairNoise::Synchronous => {
                        for j in 0..d {
                            let shared = model.beta * dw1[j];
                            x_new[j] = x[j] + bx[j] * h + shared + sx * dw2[j];
                            y_new[j] = y[j] + by[j] * h + shared + sy * dw2[j];
                        }
                    }
                    PairNoise::Reflection(profile) => {
                        let z: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                        let dist = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let pr = profile.pi_r(dist);
                        let ps = profile.pi_s(dist);
                        let mut dw1_reflected = vec![0.0; d];
                        reflect_into(&dw1, &z, &mut dw1_reflected);
                        let mut dwt = vec![0.0; d];
                        noise.fill_increments(id, Channel::W1Tilde, k as u64, sqrt_h, &mut dwt);
                        for j in 0..d {
                            let shared_s = model.beta * ps * dwt[j];
                            x_new[j] = x[j]
                                + bx[j] * h
                                + model.beta * pr * dw1[j]
                                + shared_s
                                + sx * dw2[j];
                            y_new[j] = y[j]
                                + by[j] * h
                                + model.beta * pr * dw1_reflected[j]
                                + shared_s
                                + sy * dw2[j];
                        }
                    }
                }
                if !(x_new.iter().all(|v| v.is_finite()) && y_new.iter().all(|v| v.is_finite())) {
                    return Err(CouplingError::ReplicaBlowUp { replica: i, step: k });
                }
                let mut xs2 = xs.clone();
                let mut ys2 = ys.clone();
                xs2.shift_in_place(&x_new)
                    .map_err(|_| CouplingError::ReplicaBlowUp { replica: i, step: k })?;
                ys2.shift_in_place(&y_new)
                    .map_err(|_| CouplingError::ReplicaBlowUp { replica: i, step: k })?;
                Ok((xs2, ys2))
            })
            .collect();

        let pairs = stepped.into_iter().collect::<Result<Vec<_>, _>>()?;
        let (xs, ys): (Vec<Segment>, Vec<Segment>) = pairs.into_iter().unzip();
        x_cloud.replace_segments(xs);
        y_cloud.replace_segments(ys);
        x_cloud.time += h;
        y_cloud.time += h;
        if (k + 1) % every == 0 || k + 1 == steps {
            records.push(record_pair_distances(&x_cloud, &y_cloud, k + 1));
        }
    }
    Ok(CouplingTrace { records })
}

/// Evolve paired clouds with identical `ΔW¹`/`ΔW²` per slot, drifts and
/// diffusion summaries read against the respective frozen flows. The two
/// scenarios must agree on everything except their initial sampler/seed.
pub fn run_synchronous_pair(
    scenario_x: &Scenario,
    scenario_y: &Scenario,
    flow_x: &MeasureFlow,
    flow_y: &MeasureFlow,
    record_every: usize,
) -> Result<CouplingTrace, CouplingError> {
    run_pair(scenario_x, scenario_y, flow_x, flow_y, PairNoise::Synchronous, record_every)
}

/// Evolve the pair under the asymptotic reflection coupling with threshold
/// `epsilon`: the `ΔW¹` channel is reflected across the difference direction
/// and mixed in proportion `pi_r(|Z|)`, the shared independent channel
/// `ΔW̃¹` in proportion `pi_s(|Z|)`, and both copies share `ΔW²` scaled by
/// their own state sigma. Requires a theorem3-mode model.
///
/// The mixing zone must be resolvable by the step size (the per-step
/// relative noise `2β√h` should not dwarf `ε`), otherwise the discrete
/// chain steps over the zone and the coupling loses its small-distance
/// gluing mechanism.
pub fn run_reflection_pair(
    scenario_x: &Scenario,
    scenario_y: &Scenario,
    flow_x: &MeasureFlow,
    flow_y: &MeasureFlow,
    epsilon: f64,
    record_every: usize,
) -> Result<CouplingTrace, CouplingError> {
    let profile = pi_functions(epsilon)?;
    run_pair(scenario_x, scenario_y, flow_x, flow_y, PairNoise::Reflection(profile), record_every)
}

/// A bounded test function for the Girsanov identity check.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub f: std::sync::Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TestFunction({})", self.name)
    }
}

/// Default bounded test suite: a coordinate tanh, a Gaussian bump, and a
/// smoothed half-space indicator.
pub fn builtin_test_functions() -> Vec<TestFunction> {
    vec![
        TestFunction {
            name: "tanh_x1".into(),
            f: std::sync::Arc::new(|x: &[f64]| x[0].tanh()),
        },
        TestFunction {
            name: "exp_neg_sq".into(),
            f: std::sync::Arc::new(|x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>()).exp()),
        },
        TestFunction {
            name: "halfspace_smooth".into(),
            f: std::sync::Arc::new(|x: &[f64]| 1.0 / (1.0 + (-(x[0] - 0.5) / 0.25).exp())),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl From<(f64, f64)> for MeanSe {
    fn from(v: (f64, f64)) -> Self {
        MeanSe { mean: v.0, se: v.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirsanovTestCheck {
    /// Test function name.
    pub f: String,
    /// Weighted mean `Ê[R f(X(t0))]`.
    pub lhs: f64,
    pub lhs_se: f64,
    /// Plain mean `Ê[f(X̃(t0))]`.
    pub rhs: f64,
    pub rhs_se: f64,
}

/// Monte Carlo report of the Girsanov coupling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirsanovReport {
    /// `max_replica |Y(t0) − X(t0)|`; the construction telescopes to zero,
    /// so anything above rounding noise indicates a bookkeeping bug.
    pub endpoint_residual_max: f64,
    /// Mean Girsanov weight; the exponential martingale has unit mean.
    #[serde(rename = "E_R")]
    pub e_r: MeanSe,
    /// `Ê[R log R]` — the entropy-cost upper bound.
    pub entropy_bound: MeanSe,
    /// Tilted-side estimate `Ê[R · ½∫|φ|²ds]` of the same quantity.
    pub q_side_half_phi_sq: MeanSe,
    /// Per-replica difference of the two entropy estimates (mean zero for a
    /// correct weight).
    pub entropy_minus_q_side: MeanSe,
    pub tests: Vec<GirsanovTestCheck>,
    pub n_replicas: usize,
    pub t0: f64,
    pub pairing: Pairing,
}

struct ReplicaOutcome {
    weight: f64,
    log_weight: f64,
    half_int_phi_sq: f64,
    residual: f64,
    f_at_x: Vec<f64>,
    f_at_xt: Vec<f64>,
    endpoint_dist: Vec<f64>,
    gamma_dist: Vec<f64>,
    sup_dist: Vec<f64>,
}

/// Run the Girsanov coupling-by-drift-shift between the laws started from
/// the two scenarios' initial distributions, over `[0, t0]`.
///
/// Per replica the driver draws paired initial conditions, simulates `X`
/// against the first flow, derives `Y` from the algebraic drift-shift
/// identity (which forces `Y(t0) = X(t0)`), accumulates the shift `φ` and
/// the discrete exponential weight `R`, and independently simulates the
/// comparison process `X̃` against the second flow with the same noise. The
/// report carries the identity residual, `Ê[R]`, the weighted/plain means of
/// each test function, and the entropy-bound estimate with its tilted-side
/// cross-check. Requires a theorem2-mode model (measure-only sigma).
pub fn run_girsanov_pair(
    scenario_mu: &Scenario,
    scenario_nu: &Scenario,
    flow_mu: &MeasureFlow,
    flow_nu: &MeasureFlow,
    t0: f64,
    test_functions: &[TestFunction],
    n_replicas: usize,
    pairing: Pairing,
) -> Result<(CouplingTrace, GirsanovReport), CouplingError> {
    if scenario_mu.grid != scenario_nu.grid
        || scenario_mu.model != scenario_nu.model
        || scenario_mu.dimension()? != scenario_nu.dimension()?
    {
        return Err(CouplingError::ScenarioMismatch);
    }
    let model = scenario_mu.build_model()?;
    if model.mode != ModelMode::Theorem2 {
        return Err(CouplingError::WrongMode { expected: ModelMode::Theorem2 });
    }
    let grid = scenario_mu.grid;
    let h = grid.step_h;
    let steps_f = t0 / h;
    let k0 = steps_f.round() as usize;
    if k0 == 0 || (steps_f - k0 as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(CouplingError::T0NotOnGrid { t0, h });
    }
    for flow in [flow_mu, flow_nu] {
        if flow.len() < k0 + 1 {
            return Err(CouplingError::FlowTooShort { need: k0, have: flow.len() });
        }
    }

    let d = scenario_mu.dimension()?;
    let sqrt_h = h.sqrt();
    let noise = scenario_mu.noise();
    let beta = model.beta;

    // per-step measure-sigma factors of both flows
    let sig_mu: Vec<f64> =
        (0..k0).map(|k| measure_sigma(&model, flow_mu.snapshot(k).unwrap())).collect();
    let sig_nu: Vec<f64> =
        (0..k0).map(|k| measure_sigma(&model, flow_nu.snapshot(k).unwrap())).collect();

    let outcomes: Vec<Result<ReplicaOutcome, CouplingError>> = (0..n_replicas)
        .into_par_iter()
        .map(|r| {
            let rid = r as u64;
            let (x0, xt0) = sample_initial_pair(
                &grid,
                &scenario_mu.initial,
                scenario_mu.seed,
                &scenario_nu.initial,
                scenario_nu.seed,
                rid,
                pairing,
            )?;

            // W² path and the sigma integrals ξ^μ, ξ^ν are independent of X,
            // so the whole path (including the t0 values the shift needs) is
            // precomputed.
            let mut dw2 = vec![0.0; k0 * d];
            let mut xi_mu = vec![0.0; (k0 + 1) * d];
            let mut xi_nu = vec![0.0; (k0 + 1) * d];
            for k in 0..k0 {
                let dw = &mut dw2[k * d..(k + 1) * d];
                noise.fill_increments(rid, Channel::W2, k as u64, sqrt_h, dw);
                for j in 0..d {
                    xi_mu[(k + 1) * d + j] = xi_mu[k * d + j] + sig_mu[k] * dw[j];
                    xi_nu[(k + 1) * d + j] = xi_nu[k * d + j] + sig_nu[k] * dw[j];
                }
            }
            // ξ^μ(t0) − ξ^ν(t0) and X̃0(0) − X0(0)
            let xi_gap: Vec<f64> =
                (0..d).map(|j| xi_mu[k0 * d + j] - xi_nu[k0 * d + j]).collect();
            let delta0: Vec<f64> =
                (0..d).map(|j| xt0.endpoint()[j] - x0.endpoint()[j]).collect();
            // constant part of φ: −(1/(β t0)) [ξ^μ(t0) − ξ^ν(t0) + X0(0) − X̃0(0)]
            let phi_const: Vec<f64> =
                (0..d).map(|j| -(xi_gap[j] - delta0[j]) / (beta * t0)).collect();

            let mut x_seg = x0.clone();
            let mut xt_seg = xt0.clone();
            let mut y_seg = xt0.clone();

            let dist = |a: &Segment, b: &Segment| {
                let ep = a
                    .endpoint()
                    .iter()
                    .zip(b.endpoint())
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                (
                    ep,
                    metrics::segment_diff_norm(a, b, PathNorm::GammaR0),
                    metrics::segment_diff_norm(a, b, PathNorm::Sup),
                )
            };

            let mut endpoint_dist = Vec::with_capacity(k0 + 1);
            let mut gamma_dist = Vec::with_capacity(k0 + 1);
            let mut sup_dist = Vec::with_capacity(k0 + 1);
            let (e0, g0, s0) = dist(&x_seg, &y_seg);
            endpoint_dist.push(e0);
            gamma_dist.push(g0);
            sup_dist.push(s0);

            let mut log_weight = 0.0;
            let mut int_phi_sq = 0.0;
            let mut bx = vec![0.0; d];
            let mut by = vec![0.0; d];
            let mut bxt = vec![0.0; d];
            let mut dw1 = vec![0.0; d];
            let mut phi = vec![0.0; d];
            let mut x_new = vec![0.0; d];
            let mut xt_new = vec![0.0; d];
            let mut y_new = vec![0.0; d];

            for k in 0..k0 {
                let snap_mu = flow_mu.snapshot(k).unwrap();
                let snap_nu = flow_nu.snapshot(k).unwrap();
                bx.iter_mut().for_each(|v| *v = 0.0);
                by.iter_mut().for_each(|v| *v = 0.0);
                bxt.iter_mut().for_each(|v| *v = 0.0);
                full_drift(&model, &x_seg, snap_mu, &mut bx);
                full_drift(&model, &y_seg, snap_nu, &mut by);
                full_drift(&model, &xt_seg, snap_nu, &mut bxt);

                for j in 0..d {
                    phi[j] = (by[j] - bx[j]) / beta + phi_const[j];
                }
                noise.fill_increments(rid, Channel::W1, k as u64, sqrt_h, &mut dw1);
                let phi_sq: f64 = phi.iter().map(|v| v * v).sum();
                let cross: f64 = phi.iter().zip(&dw1).map(|(p, w)| p * w).sum();
                log_weight += cross - 0.5 * h * phi_sq;
                int_phi_sq += h * phi_sq;

                let frac_done = (k + 1) as f64 / k0 as f64;
                let frac_left = (k0 - k - 1) as f64 / k0 as f64;
                let wd = &dw2[k * d..(k + 1) * d];
                for j in 0..d {
                    x_new[j] = x_seg.endpoint()[j]
                        + bx[j] * h
                        + beta * dw1[j]
                        + sig_mu[k] * wd[j];
                    xt_new[j] = xt_seg.endpoint()[j]
                        + bxt[j] * h
                        + beta * dw1[j]
                        + sig_nu[k] * wd[j];
                    // drift-shift identity: Y(t) − X(t) interpolates the
                    // initial gap away while the t0-anchored sigma-integral
                    // correction accrues
                    y_new[j] = x_new[j]
                        + frac_left * delta0[j]
                        + frac_done * xi_gap[j]
                        + (xi_nu[(k + 1) * d + j] - xi_mu[(k + 1) * d + j]);
                }
                if !(x_new.iter().all(|v| v.is_finite())
                    && xt_new.iter().all(|v| v.is_finite())
                    && y_new.iter().all(|v| v.is_finite()))
                {
                    return Err(CouplingError::ReplicaBlowUp { replica: r, step: k });
                }
                x_seg
                    .shift_in_place(&x_new)
                    .map_err(|_| CouplingError::ReplicaBlowUp { replica: r, step: k })?;
                xt_seg
                    .shift_in_place(&xt_new)
                    .map_err(|_| CouplingError::ReplicaBlowUp { replica: r, step: k })?;
                y_seg
                    .shift_in_place(&y_new)
                    .map_err(|_| CouplingError::ReplicaBlowUp { replica: r, step: k })?;
                let (e, g, s) = dist(&x_seg, &y_seg);
                endpoint_dist.push(e);
                gamma_dist.push(g);
                sup_dist.push(s);
            }

            if !log_weight.is_finite() {
                return Err(CouplingError::NonFiniteWeight { replica: r, log_weight });
            }
            let weight = log_weight.exp();
            if !weight.is_finite() {
                return Err(CouplingError::NonFiniteWeight { replica: r, log_weight });
            }
            let residual = *endpoint_dist.last().unwrap();
            let f_at_x: Vec<f64> =
                test_functions.iter().map(|tf| (tf.f)(x_seg.endpoint())).collect();
            let f_at_xt: Vec<f64> =
                test_functions.iter().map(|tf| (tf.f)(xt_seg.endpoint())).collect();
            Ok(ReplicaOutcome {
                weight,
                log_weight,
                half_int_phi_sq: 0.5 * int_phi_sq,
                residual,
                f_at_x,
                f_at_xt,
                endpoint_dist,
                gamma_dist,
                sup_dist,
            })
        })
        .collect();

    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>, _>>()?;

    let weights: Vec<f64> = outcomes.iter().map(|o| o.weight).collect();
    let r_log_r: Vec<f64> = outcomes.iter().map(|o| o.weight * o.log_weight).collect();
    let q_side: Vec<f64> = outcomes.iter().map(|o| o.weight * o.half_int_phi_sq).collect();
    let ent_diff: Vec<f64> =
        outcomes.iter().map(|o| o.weight * (o.log_weight - o.half_int_phi_sq)).collect();
    let residual_max = outcomes.iter().map(|o| o.residual).fold(0.0, f64::max);

    let tests = test_functions
        .iter()
        .enumerate()
        .map(|(t, tf)| {
            let lhs: Vec<f64> = outcomes.iter().map(|o| o.weight * o.f_at_x[t]).collect();
            let rhs: Vec<f64> = outcomes.iter().map(|o| o.f_at_xt[t]).collect();
            let (lhs_mean, lhs_se) = stats::mean_se(&lhs);
            let (rhs_mean, rhs_se) = stats::mean_se(&rhs);
            GirsanovTestCheck {
                f: tf.name.clone(),
                lhs: lhs_mean,
                lhs_se,
                rhs: rhs_mean,
                rhs_se,
            }
        })
        .collect();

    let mut records = Vec::with_capacity(k0 + 1);
    for k in 0..=k0 {
        let endpoint: Vec<f64> = outcomes.iter().map(|o| o.endpoint_dist[k]).collect();
        let gamma: Vec<f64> = outcomes.iter().map(|o| o.gamma_dist[k]).collect();
        let sup: Vec<f64> = outcomes.iter().map(|o| o.sup_dist[k]).collect();
        records.push(aggregate_record(k, grid.time_at(k), &endpoint, &gamma, &sup, None));
    }

    let report = GirsanovReport {
        endpoint_residual_max: residual_max,
        e_r: stats::mean_se(&weights).into(),
        entropy_bound: stats::mean_se(&r_log_r).into(),
        q_side_half_phi_sq: stats::mean_se(&q_side).into(),
        entropy_minus_q_side: stats::mean_se(&ent_diff).into(),
        tests,
        n_replicas,
        t0,
        pairing,
    };
    Ok((CouplingTrace { records }, report))
}
