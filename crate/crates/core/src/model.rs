//! Core domain types: time grids, path segments, particle clouds,
//! coefficient models, and scenario descriptions.
//!
//! A [`Segment`] is one particle's path history over `[-r0, 0]` on a uniform
//! grid; the delay `r0` is always an exact integer multiple of the step, so
//! delayed reads never interpolate. A [`ParticleCloud`] is `N` segments plus
//! a clock and doubles as the uniform empirical measure on segment space.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::noise::{Channel, NoiseStream};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("segment data of length {len} is not a multiple of dimension {dim}")]
    BadSegmentShape { len: usize, dim: usize },
    #[error("segment has {got} points, expected {expected}")]
    SegmentLength { expected: usize, got: usize },
    #[error("non-finite segment entry")]
    NonFiniteEntry,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("particle cloud must contain at least one segment")]
    EmptyCloud,
    #[error("segments in a cloud must share one grid shape and dimension")]
    InconsistentCloud,
    #[error("additive noise level beta must be nonzero and finite")]
    BadBeta,
    #[error("structural constant {name} out of range: {value}")]
    BadConstant { name: &'static str, value: f64 },
    #[error("mode theorem3 requires K2 > Ksigma (got K2={k2}, Ksigma={k_sigma})")]
    NotDissipativeEnough { k2: f64, k_sigma: f64 },
    #[error("diffusion kind incompatible with mode {0:?}: measure-dependent sigma requires theorem2, state-dependent sigma requires theorem3")]
    SigmaModeMismatch(ModelMode),
    #[error("unknown model name {0:?}")]
    UnknownModel(String),
    #[error("unknown kernel name {0:?}")]
    UnknownKernel(String),
    #[error("unknown sigma name {0:?}")]
    UnknownSigma(String),
    #[error("unknown initial sampler {0:?}")]
    UnknownSampler(String),
    #[error("initial sampler {name:?} is missing parameter {param:?}")]
    MissingSamplerParam { name: String, param: &'static str },
    #[error("permutation must be a bijection on 0..{0}")]
    BadPermutation(usize),
    #[error("paired sampling requires both initial samplers to come from the same family, got {0:?} and {1:?}")]
    IncompatiblePairing(String, String),
}

/// Uniform time discretization. The delay window is `delay_steps` whole steps,
/// so `r0 = delay_steps * step_h` exactly; `delay_steps = 0` encodes the
/// no-delay convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    #[serde(rename = "h")]
    pub step_h: f64,
    pub delay_steps: usize,
    pub horizon_steps: usize,
}

impl TimeGrid {
    pub fn new(step_h: f64, delay_steps: usize, horizon_steps: usize) -> Result<Self, ModelError> {
        if !(step_h.is_finite() && step_h > 0.0) {
            return Err(ModelError::BadStep(step_h));
        }
        Ok(Self { step_h, delay_steps, horizon_steps })
    }

    /// Delay span `r0 = m * h`.
    pub fn delay_r0(&self) -> f64 {
        self.delay_steps as f64 * self.step_h
    }

    /// Number of points a segment carries (`m + 1`).
    pub fn segment_points(&self) -> usize {
        self.delay_steps + 1
    }

    pub fn time_at(&self, step: usize) -> f64 {
        step as f64 * self.step_h
    }
}

/// One particle's discretized path history over `[-r0, 0]`.
///
/// Point `j` (for `j = 0..=m`) holds the state at time `-r0 + j*h`; index `m`
/// is "now". All entries are finite by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    dim: usize,
    data: Vec<f64>,
}

impl Segment {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self, ModelError> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(ModelError::BadSegmentShape { len: data.len(), dim });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteEntry);
        }
        Ok(Self { dim, data })
    }

    /// Segment constantly equal to `x` (the canonical initial datum).
    pub fn constant(x: &[f64], grid: &TimeGrid) -> Result<Self, ModelError> {
        if x.is_empty() {
            return Err(ModelError::BadSegmentShape { len: 0, dim: 0 });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteEntry);
        }
        let points = grid.segment_points();
        let mut data = Vec::with_capacity(points * x.len());
        for _ in 0..points {
            data.extend_from_slice(x);
        }
        Ok(Self { dim: x.len(), data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of grid points, `m + 1`.
    pub fn points(&self) -> usize {
        self.data.len() / self.dim
    }

    /// Delay steps `m`.
    pub fn delay_steps(&self) -> usize {
        self.points() - 1
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    /// The current state `ξ(0)`.
    pub fn endpoint(&self) -> &[f64] {
        self.point(self.points() - 1)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Advance the history one step: drop the oldest point, append
    /// `new_point` as "now". The receiver is unchanged.
    pub fn shifted(&self, new_point: &[f64]) -> Result<Self, ModelError> {
        let mut out = self.clone();
        out.shift_in_place(new_point)?;
        Ok(out)
    }

    pub(crate) fn shift_in_place(&mut self, new_point: &[f64]) -> Result<(), ModelError> {
        if new_point.len() != self.dim {
            return Err(ModelError::DimensionMismatch { expected: self.dim, got: new_point.len() });
        }
        if !new_point.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteEntry);
        }
        let d = self.dim;
        self.data.copy_within(d.., 0);
        let tail = self.data.len() - d;
        self.data[tail..].copy_from_slice(new_point);
        Ok(())
    }
}

/// Advance a segment by one step; the input is unchanged.
pub fn segment_shift(seg: &Segment, new_point: &[f64]) -> Result<Segment, ModelError> {
    seg.shifted(new_point)
}

/// Segment constantly equal to `x` on the given grid.
pub fn constant_segment(x: &[f64], grid: &TimeGrid) -> Result<Segment, ModelError> {
    Segment::constant(x, grid)
}

/// `N` segments plus a clock; viewed as a measure it is the uniform
/// empirical measure `(1/N) Σ δ_{segment_i}`.
///
/// `stream_ids` records which noise stream drives each slot so that
/// relabeling particles together with their streams commutes with the
/// dynamics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleCloud {
    pub grid: TimeGrid,
    pub dim: usize,
    pub time: f64,
    segments: Vec<Segment>,
    stream_ids: Vec<u64>,
}

impl ParticleCloud {
    pub fn new(grid: TimeGrid, segments: Vec<Segment>) -> Result<Self, ModelError> {
        if segments.is_empty() {
            return Err(ModelError::EmptyCloud);
        }
        let dim = segments[0].dim();
        let points = grid.segment_points();
        if !segments.iter().all(|s| s.dim() == dim && s.points() == points) {
            return Err(ModelError::InconsistentCloud);
        }
        let stream_ids = (0..segments.len() as u64).collect();
        Ok(Self { grid, dim, time: 0.0, segments, stream_ids })
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, i: usize) -> &Segment {
        &self.segments[i]
    }

    pub fn stream_ids(&self) -> &[u64] {
        &self.stream_ids
    }

    pub(crate) fn replace_segments(&mut self, segments: Vec<Segment>) {
        debug_assert_eq!(segments.len(), self.segments.len());
        self.segments = segments;
    }

    /// Relabel particles: slot `i` of the result holds segment and stream id
    /// `perm[i]` of the input.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let n = self.len();
        let mut seen = vec![false; n];
        if perm.len() != n || !perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true)) {
            return Err(ModelError::BadPermutation(n));
        }
        let segments = perm.iter().map(|&p| self.segments[p].clone()).collect();
        let stream_ids = perm.iter().map(|&p| self.stream_ids[p]).collect();
        Ok(Self { grid: self.grid, dim: self.dim, time: self.time, segments, stream_ids })
    }
}

/// Drift `b0` applied to the current state.
#[derive(Clone)]
pub enum Drift {
    /// `b0(x) = -rate * x`.
    Linear { rate: f64 },
    /// `b0(x) = 2x - 4|x|^2 x`, the gradient of `|x|^2 - |x|^4`; expands near
    /// the origin and is dissipative at long range.
    DoubleWell,
    Custom(Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>),
}

impl std::fmt::Debug for Drift {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Drift::Linear { rate } => write!(f, "Linear {{ rate: {rate} }}"),
            Drift::DoubleWell => write!(f, "DoubleWell"),
            Drift::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Drift {
    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Linear { rate } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -rate * xi;
                }
            }
            Drift::DoubleWell => {
                let sq: f64 = x.iter().map(|v| v * v).sum();
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = 2.0 * xi - 4.0 * sq * xi;
                }
            }
            Drift::Custom(f) => f(x, out),
        }
    }
}

/// Pairwise interaction `b̃(ξ, η)`; the mean-field drift is its average over
/// the measure argument. Built-in kernels read segment endpoints.
#[derive(Clone)]
pub enum Kernel {
    /// `b̃(ξ, η) = coef * (η(0) - ξ(0))`.
    Linear { coef: f64 },
    /// `b̃(ξ, η) = coef * tanh(η(0) - ξ(0))` componentwise.
    BoundedTanh { coef: f64 },
    Custom(Arc<dyn Fn(&Segment, &Segment, &mut [f64]) + Send + Sync>),
}

impl std::fmt::Debug for Kernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Kernel::Linear { coef } => write!(f, "Linear {{ coef: {coef} }}"),
            Kernel::BoundedTanh { coef } => write!(f, "BoundedTanh {{ coef: {coef} }}"),
            Kernel::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Kernel {
    #[inline]
    pub fn eval(&self, xi: &Segment, eta: &Segment, out: &mut [f64]) {
        match self {
            Kernel::Linear { coef } => {
                for ((o, a), b) in out.iter_mut().zip(xi.endpoint()).zip(eta.endpoint()) {
                    *o = coef * (b - a);
                }
            }
            Kernel::BoundedTanh { coef } => {
                for ((o, a), b) in out.iter_mut().zip(xi.endpoint()).zip(eta.endpoint()) {
                    *o = coef * (b - a).tanh();
                }
            }
            Kernel::Custom(f) => f(xi, eta, out),
        }
    }

    /// Average of `b̃(ξ, ·)` over the segments of `measure`, added onto
    /// whatever `out` already holds (the per-term 1/N factor touches only
    /// the kernel contribution). The sum runs in index order so results do
    /// not depend on any parallel schedule upstream.
    pub fn mean_field(&self, xi: &Segment, measure: &[Segment], out: &mut [f64]) {
        let inv = 1.0 / measure.len() as f64;
        match self {
            Kernel::Linear { coef } => {
                let scaled = coef * inv;
                let x0 = xi.endpoint();
                for eta in measure {
                    for (o, (a, b)) in out.iter_mut().zip(x0.iter().zip(eta.endpoint())) {
                        *o += scaled * (b - a);
                    }
                }
            }
            Kernel::BoundedTanh { coef } => {
                let scaled = coef * inv;
                let x0 = xi.endpoint();
                for eta in measure {
                    for (o, (a, b)) in out.iter_mut().zip(x0.iter().zip(eta.endpoint())) {
                        *o += scaled * (b - a).tanh();
                    }
                }
            }
            Kernel::Custom(f) => {
                let mut buf = vec![0.0; out.len()];
                for eta in measure {
                    f(xi, eta, &mut buf);
                    for (o, b) in out.iter_mut().zip(&buf) {
                        *o += inv * b;
                    }
                }
            }
        }
    }
}

/// Diffusion coefficient in front of the `W²` channel, restricted to scalar
/// multiples of the identity. The measure-dependent variant sees the cloud
/// only through the scalar summary `sqrt(mean ‖ξ‖²_Γ)`.
#[derive(Clone)]
pub enum Diffusion {
    Zero,
    /// `σ(x) = s(x) · I`, state-only (theorem3 mode).
    StateScalar(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
    /// `σ(μ) = s(summary(μ)) · I`, measure-only (theorem2 mode).
    MeasureScalar(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diffusion::Zero => write!(f, "Zero"),
            Diffusion::StateScalar(_) => write!(f, "StateScalar(..)"),
            Diffusion::MeasureScalar(_) => write!(f, "MeasureScalar(..)"),
        }
    }
}

/// Which assumption set the scenario author is targeting: `theorem2` pairs a
/// general Lipschitz drift with measure-only sigma; `theorem3` pairs the
/// partially dissipative drift with state-only sigma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Theorem2,
    Theorem3,
}

/// Structural constants declared by the scenario author. They are hypotheses
/// consumed by the rate machinery, never estimated from the callables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralConstants {
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    #[serde(rename = "K3", default)]
    pub k3: f64,
    #[serde(rename = "Ksigma")]
    pub k_sigma: f64,
    #[serde(rename = "Kb")]
    pub k_b: f64,
    #[serde(rename = "R")]
    pub r_radius: f64,
}

/// User-supplied coefficients plus declared constants and mode.
#[derive(Debug, Clone)]
pub struct CoefficientModel {
    pub drift: Drift,
    pub kernel: Option<Kernel>,
    pub diffusion: Diffusion,
    pub beta: f64,
    pub constants: StructuralConstants,
    pub mode: ModelMode,
}

impl CoefficientModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.beta.is_finite() && self.beta != 0.0) {
            return Err(ModelError::BadBeta);
        }
        let c = &self.constants;
        if !(c.k1 >= 0.0) {
            return Err(ModelError::BadConstant { name: "K1", value: c.k1 });
        }
        if !(c.k2 > 0.0) {
            return Err(ModelError::BadConstant { name: "K2", value: c.k2 });
        }
        if !(c.k_sigma >= 0.0) {
            return Err(ModelError::BadConstant { name: "Ksigma", value: c.k_sigma });
        }
        if !(c.k_b >= 0.0) {
            return Err(ModelError::BadConstant { name: "Kb", value: c.k_b });
        }
        if !(c.r_radius > 0.0) {
            return Err(ModelError::BadConstant { name: "R", value: c.r_radius });
        }
        if self.mode == ModelMode::Theorem3 && !(c.k2 > c.k_sigma) {
            return Err(ModelError::NotDissipativeEnough { k2: c.k2, k_sigma: c.k_sigma });
        }
        match (&self.diffusion, self.mode) {
            (Diffusion::MeasureScalar(_), ModelMode::Theorem3) => {
                Err(ModelError::SigmaModeMismatch(self.mode))
            }
            (Diffusion::StateScalar(_), ModelMode::Theorem2) => {
                Err(ModelError::SigmaModeMismatch(self.mode))
            }
            _ => Ok(()),
        }
    }
}

/// Serializable description of a built-in model; `build` resolves it against
/// the registry of named coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default)]
    pub params: ModelParams,
    pub constants: StructuralConstants,
    pub beta: f64,
    pub mode: ModelMode,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Linear drift rate for the "ou" model; `b0(x) = -a x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Interaction kernel name: "linear_kernel" or "bounded_kernel".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_coef: Option<f64>,
    /// Diffusion name: "moment_sigma" (measure-only, theorem2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_coef: Option<f64>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<CoefficientModel, ModelError> {
        let drift = match self.name.as_str() {
            "ou" => Drift::Linear { rate: self.params.a.unwrap_or(1.0) },
            "double_well" => Drift::DoubleWell,
            other => return Err(ModelError::UnknownModel(other.to_string())),
        };
        let kernel = match self.params.kernel.as_deref() {
            None | Some("none") => None,
            Some("linear_kernel") => {
                Some(Kernel::Linear { coef: self.params.kernel_coef.unwrap_or(1.0) })
            }
            Some("bounded_kernel") => {
                Some(Kernel::BoundedTanh { coef: self.params.kernel_coef.unwrap_or(1.0) })
            }
            Some(other) => return Err(ModelError::UnknownKernel(other.to_string())),
        };
        let diffusion = match self.params.sigma.as_deref() {
            None | Some("none") => Diffusion::Zero,
            Some("moment_sigma") => {
                let coef = self.params.sigma_coef.unwrap_or(1.0);
                Diffusion::MeasureScalar(Arc::new(move |summary| coef * summary))
            }
            Some(other) => return Err(ModelError::UnknownSigma(other.to_string())),
        };
        let model = CoefficientModel {
            drift,
            kernel,
            diffusion,
            beta: self.beta,
            constants: self.constants,
            mode: self.mode,
        };
        model.validate()?;
        Ok(model)
    }
}

/// Scalar-or-vector parameter; scalars broadcast to dimension 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrVec {
    Scalar(f64),
    Vec(Vec<f64>),
}

impl ScalarOrVec {
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            ScalarOrVec::Scalar(v) => vec![*v],
            ScalarOrVec::Vec(v) => v.clone(),
        }
    }
}

/// Named initial distribution over segments.
///
/// Built-in samplers: `point` (mass at a constant segment), `gaussian`
/// (Gaussian endpoint extended constantly backward), and `brownian_history`
/// (Gaussian start at `-r0` followed by a Brownian path over the window).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialSpec {
    pub name: String,
    #[serde(default)]
    pub params: InitialParams,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ScalarOrVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<ScalarOrVec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bm_scale: Option<f64>,
}

impl InitialSpec {
    /// Spatial dimension implied by the sampler parameters.
    pub fn dimension(&self) -> Result<usize, ModelError> {
        let v = match self.name.as_str() {
            "point" => self.params.value.as_ref().ok_or(ModelError::MissingSamplerParam {
                name: self.name.clone(),
                param: "value",
            })?,
            "gaussian" | "brownian_history" => {
                self.params.mean.as_ref().ok_or(ModelError::MissingSamplerParam {
                    name: self.name.clone(),
                    param: "mean",
                })?
            }
            other => return Err(ModelError::UnknownSampler(other.to_string())),
        };
        Ok(v.to_vec().len())
    }

    /// Number of standard normal draws one segment consumes.
    pub fn raw_count(&self, grid: &TimeGrid) -> Result<usize, ModelError> {
        let d = self.dimension()?;
        Ok(match self.name.as_str() {
            "point" => 0,
            "gaussian" => d,
            "brownian_history" => d * (1 + grid.delay_steps),
            _ => unreachable!("dimension() rejects unknown samplers"),
        })
    }

    /// Deterministically map raw standard normals to a segment.
    pub fn segment_from_raws(&self, grid: &TimeGrid, raws: &[f64]) -> Result<Segment, ModelError> {
        let d = self.dimension()?;
        match self.name.as_str() {
            "point" => {
                let x = self.params.value.as_ref().unwrap().to_vec();
                Segment::constant(&x, grid)
            }
            "gaussian" => {
                let mean = self.params.mean.as_ref().unwrap().to_vec();
                let std = self.params.std.unwrap_or(1.0);
                let x: Vec<f64> =
                    mean.iter().zip(raws).map(|(m, g)| m + std * g).collect();
                Segment::constant(&x, grid)
            }
            "brownian_history" => {
                let mean = self.params.mean.as_ref().unwrap().to_vec();
                let std = self.params.std.unwrap_or(0.0);
                let scale = self.params.bm_scale.unwrap_or(1.0);
                let sqrt_h = grid.step_h.sqrt();
                let mut x: Vec<f64> =
                    mean.iter().zip(raws).map(|(m, g)| m + std * g).collect();
                let mut data = Vec::with_capacity(d * grid.segment_points());
                data.extend_from_slice(&x);
                for j in 1..grid.segment_points() {
                    for (xi, g) in x.iter_mut().zip(&raws[j * d..(j + 1) * d]) {
                        *xi += scale * sqrt_h * g;
                    }
                    data.extend_from_slice(&x);
                }
                Segment::new(data, d)
            }
            _ => unreachable!(),
        }
    }

    /// Sample the segment for one particle slot. Randomness comes from the
    /// per-particle `Init` channel, so the draw depends only on
    /// `(master seed, particle id)`.
    pub fn sample_segment(
        &self,
        grid: &TimeGrid,
        noise: &NoiseStream,
        particle_id: u64,
    ) -> Result<Segment, ModelError> {
        let mut raws = vec![0.0; self.raw_count(grid)?];
        noise.fill_standard_normal(particle_id, Channel::Init, 0, &mut raws);
        self.segment_from_raws(grid, &raws)
    }

    pub fn sample_cloud(
        &self,
        grid: &TimeGrid,
        n: usize,
        master_seed: u64,
    ) -> Result<ParticleCloud, ModelError> {
        let noise = NoiseStream::new(master_seed);
        let segments = (0..n)
            .map(|i| self.sample_segment(grid, &noise, i as u64))
            .collect::<Result<Vec<_>, _>>()?;
        ParticleCloud::new(*grid, segments)
    }
}

/// Pairing rule for drawing matched initial conditions from two samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pairing {
    /// Draw from each sampler with its own seed.
    Independent,
    /// Reuse one set of raw normals for both samplers; realizes the
    /// monotone optimal coupling for location-scale families (point masses,
    /// Gaussians, Brownian histories of matching shape).
    Optimal,
}

/// Draw a coupled pair of initial segments for one replica.
pub fn sample_initial_pair(
    grid: &TimeGrid,
    spec_a: &InitialSpec,
    seed_a: u64,
    spec_b: &InitialSpec,
    seed_b: u64,
    replica: u64,
    pairing: Pairing,
) -> Result<(Segment, Segment), ModelError> {
    match pairing {
        Pairing::Independent => {
            let a = spec_a.sample_segment(grid, &NoiseStream::new(seed_a), replica)?;
            let b = spec_b.sample_segment(grid, &NoiseStream::new(seed_b), replica)?;
            Ok((a, b))
        }
        Pairing::Optimal => {
            if spec_a.name != spec_b.name || spec_a.raw_count(grid)? != spec_b.raw_count(grid)? {
                return Err(ModelError::IncompatiblePairing(
                    spec_a.name.clone(),
                    spec_b.name.clone(),
                ));
            }
            let mut raws = vec![0.0; spec_a.raw_count(grid)?];
            NoiseStream::new(seed_a).fill_standard_normal(replica, Channel::Init, 0, &mut raws);
            let a = spec_a.segment_from_raws(grid, &raws)?;
            let b = spec_b.segment_from_raws(grid, &raws)?;
            Ok((a, b))
        }
    }
}

/// A fully reproducible experiment input: grid, model, particle count,
/// initial sampler, and the master seed that determines all randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub grid: TimeGrid,
    pub model: ModelSpec,
    pub n_particles: usize,
    pub initial: InitialSpec,
    pub seed: u64,
}

impl Scenario {
    pub fn dimension(&self) -> Result<usize, ModelError> {
        self.initial.dimension()
    }

    pub fn build_model(&self) -> Result<CoefficientModel, ModelError> {
        self.model.build()
    }

    pub fn sample_initial(&self) -> Result<ParticleCloud, ModelError> {
        self.initial.sample_cloud(&self.grid, self.n_particles, self.seed)
    }

    pub fn noise(&self) -> NoiseStream {
        NoiseStream::new(self.seed)
    }
}
