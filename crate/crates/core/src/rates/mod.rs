//! Explicit contraction-rate machinery for the partially dissipative regime.
//!
//! The central object is a rate function `γ` that may expand at short range
//! and contract at long range, together with its noise-adjusted version
//! `γ̃(v) = γ(v) + Kσ v`. From it we evaluate
//!
//! * `Ψ(s) = (1/2β²) ∫₀^s γ̃(v) dv`,
//! * `δ = ∫₀^∞ s e^{Ψ(s)} ds` (certified by an explicit Gaussian tail bound),
//! * the concave comparison function
//!   `f(r) = ∫₀^r e^{−Ψ(u)} ∫_u^∞ s e^{Ψ(s)} ds du`,
//! * the contraction constants `λ0 = 2β²/δ`, `c`, `λ`, and the small-distance
//!   penalty `ℓ(ε)` used by the asymptotic reflection coupling,
//!
//! plus the boolean hypothesis checks for the synchronous-coupling,
//! reflection-coupling, propagation-of-chaos, and uniform-moment regimes.

pub mod quad;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use quad::{QuadError, QuadOutcome};

#[derive(Debug, Error)]
pub enum RatesError {
    #[error("rate function requires beta != 0")]
    BadBeta,
    #[error("rate function constant {name} out of range: {value}")]
    BadConstant { name: &'static str, value: f64 },
    #[error("gamma is only defined for r >= 0, got {0}")]
    NegativeRadius(f64),
    #[error("integrand is not decaying by s = {cap:e}; gamma_tilde does not look eventually dissipative")]
    Divergent { cap: f64 },
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// The piecewise rate function of the partially dissipative assumption, or a
/// caller-supplied curve.
#[derive(Clone)]
pub enum RateKind {
    /// `γ(r) = K1 r` up to `R`, a quadratic interpolation on `[R, 2R]`, and
    /// `−K2 r` beyond `2R`; continuous at both joints.
    PaperPiecewise { k1: f64, k2: f64, radius: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for RateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RateKind::PaperPiecewise { k1, k2, radius } =>

                write!(f, "PaperPiecewise {{ k1: {k1}, k2: {k2}, radius: {radius} }}"),
            RateKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RateFunction {
    pub kind: RateKind,
    pub k_sigma: f64,
    pub beta: f64,
}

/// Guaranteed decay of `γ̃` past `s_star`: `γ̃(s) ≤ −q·s` for `s ≥ s_star`.
#[derive(Debug, Clone, Copy)]
struct TailRate {
    s_star: f64,
    q: f64,
}

/// Certified-truncation diagnostics for the improper integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadDiagnostics {
    /// Upper end of the truncated integration range.
    pub truncation_point: f64,
    /// Gaussian bound on the discarded tail mass.
    pub tail_bound: f64,
    /// Relative tolerance actually achieved (quadrature error plus tail,
    /// relative to the accumulated value).
    pub achieved_rel: f64,
}

impl RateFunction {
    pub fn paper(
        k1: f64,
        k2: f64,
        radius: f64,
        k_sigma: f64,
        beta: f64,
    ) -> Result<Self, RatesError> {
        if !(beta.is_finite() && beta != 0.0) {
            return Err(RatesError::BadBeta);
        }
        if !(k1 >= 0.0) {
            return Err(RatesError::BadConstant { name: "K1", value: k1 });
        }
        if !(radius > 0.0) {
            return Err(RatesError::BadConstant { name: "R", value: radius });
        }
        if !(k_sigma >= 0.0) {
            return Err(RatesError::BadConstant { name: "Ksigma", value: k_sigma });
        }
        if !(k2 > k_sigma) {
            // otherwise gamma_tilde never turns dissipative and delta diverges
            return Err(RatesError::BadConstant { name: "K2", value: k2 });
        }
        Ok(Self { kind: RateKind::PaperPiecewise { k1, k2, radius }, k_sigma, beta })
    }

    pub fn custom(
        gamma: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        k_sigma: f64,
        beta: f64,
    ) -> Result<Self, RatesError> {
        if !(beta.is_finite() && beta != 0.0) {
            return Err(RatesError::BadBeta);
        }
        if !(k_sigma >= 0.0) {
            return Err(RatesError::BadConstant { name: "Ksigma", value: k_sigma });
        }
        Ok(Self { kind: RateKind::Custom(gamma), k_sigma, beta })
    }

    /// Evaluate `γ(r)`.
    pub fn gamma(&self, r: f64) -> Result<f64, RatesError> {
        if !(r >= 0.0) {
            return Err(RatesError::NegativeRadius(r));
        }
        Ok(self.gamma_unchecked(r))
    }

    #[inline]
    fn gamma_unchecked(&self, r: f64) -> f64 {
        match &self.kind {
            RateKind::PaperPiecewise { k1, k2, radius } => {
                let big_r = *radius;
                if r <= big_r {
                    k1 * r
                } else if r <= 2.0 * big_r {
                    (-(k1 + k2) / big_r * (r - big_r) + k1) * r
                } else {
                    -k2 * r
                }
            }
            RateKind::Custom(f) => f(r),
        }
    }

    /// `γ̃(v) = γ(v) + Kσ v`.
    #[inline]
    pub fn gamma_tilde(&self, v: f64) -> f64 {
        self.gamma_unchecked(v) + self.k_sigma * v
    }

    fn two_beta_sq(&self) -> f64 {
        2.0 * self.beta * self.beta
    }

    /// Interior breakpoints of the piecewise definition, for quadrature.
    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            RateKind::PaperPiecewise { radius, .. } => vec![*radius, 2.0 * radius],
            RateKind::Custom(_) => vec![],
        }
    }

    /// `Ψ(s) = (1/2β²) ∫₀^s γ̃(v) dv`. Closed form for the piecewise kind
    /// (the integrand is piecewise polynomial), adaptive quadrature for
    /// custom curves.
    pub fn psi(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        match &self.kind {
            RateKind::PaperPiecewise { k1, k2, radius } => {
                let big_r = *radius;
                let ks = self.k_sigma;
                let a = (k1 + k2) / big_r;
                let int_to_r = |x: f64| 0.5 * (k1 + ks) * x * x;
                let integral = if s <= big_r {
                    int_to_r(s)
                } else {
                    let i_r = int_to_r(big_r);
                    let mid = |x: f64| {
                        -a * (x.powi(3) - big_r.powi(3)) / 3.0
                            + 0.5 * (2.0 * k1 + k2 + ks) * (x * x - big_r * big_r)
                    };
                    if s <= 2.0 * big_r {
                        i_r + mid(s)
                    } else {
                        i_r + mid(2.0 * big_r)
                            - 0.5 * (k2 - ks) * (s * s - 4.0 * big_r * big_r)
                    }
                };
                integral / self.two_beta_sq()
            }
            RateKind::Custom(_) => {
                if s == 0.0 {
                    return 0.0;
                }
                let out = quad::integrate(|v| self.gamma_tilde(v), 0.0, s, 1e-12, 1e-300)
                    .expect("gamma_tilde must be finite on [0, s]");
                out.value / self.two_beta_sq()
            }
        }
    }

    fn divergence_cap(&self) -> f64 {
        match &self.kind {
            RateKind::PaperPiecewise { radius, .. } => 1e4 * (2.0 * radius).max(1.0),
            RateKind::Custom(_) => 1e4,
        }
    }

    /// Find `(s_star, q)` with `γ̃(s) ≤ −q s` for `s ≥ s_star`. Exact for the
    /// piecewise kind; probed by doubling and dense sampling for custom
    /// curves.
    fn tail_rate(&self) -> Result<TailRate, RatesError> {
        match &self.kind {
            RateKind::PaperPiecewise { k2, radius, .. } => {
                Ok(TailRate { s_star: 2.0 * radius, q: k2 - self.k_sigma })
            }
            RateKind::Custom(_) => {
                let cap = self.divergence_cap();
                let mut s = 1.0;
                while s <= cap {
                    let g = self.gamma_tilde(s);
                    if g < 0.0 {
                        let q = 0.5 * (-g / s);
                        let ok = (0..=64).all(|i| {
                            let x = s + (3.0 * s) * i as f64 / 64.0;
                            self.gamma_tilde(x) <= -q * x
                        });
                        if ok && q > 0.0 {
                            return Ok(TailRate { s_star: s, q });
                        }
                    }
                    s *= 2.0;
                }
                Err(RatesError::Divergent { cap })
            }
        }
    }

    /// `δ = ∫₀^∞ s e^{Ψ(s)} ds` with a certified Gaussian tail bound: the
    /// range grows until the bound on the discarded tail drops below
    /// `tol × (accumulated integral)`.
    pub fn delta(&self, tol: f64) -> Result<(f64, QuadDiagnostics), RatesError> {
        let tail = self.tail_rate()?;
        let cap = self.divergence_cap();
        let rel = (tol * 0.1).clamp(1e-14, 1e-6);
        let breaks = self.breakpoints();
        let integrand = |s: f64| s * self.psi(s).exp();

        let mut upper = tail.s_star.max(1.0);
        let mut acc = quad::integrate_segmented(&integrand, 0.0, upper, &breaks, rel, 1e-300)?;
        loop {
            let tail_bound = self.psi(upper).exp() * self.two_beta_sq() / tail.q;
            if tail_bound <= tol * acc.value || tail_bound < 1e-300 {
                let achieved = (acc.abs_error + tail_bound) / acc.value;
                return Ok((
                    acc.value,
                    QuadDiagnostics { truncation_point: upper, tail_bound, achieved_rel: achieved },
                ));
            }
            let next = upper * 2.0;
            if next > cap {
                return Err(RatesError::Divergent { cap });
            }
            let piece = quad::integrate_segmented(&integrand, upper, next, &breaks, rel, 1e-300)?;
            acc.value += piece.value;
            acc.abs_error += piece.abs_error;
            upper = next;
        }
    }

    /// `e^{−Ψ(u)} ∫_u^∞ s e^{Ψ(s)} ds`, evaluated without cancellation by
    /// normalizing the integrand at `u`. This is exactly `f'(u)`.
    fn g_tilde(&self, u: f64, rel: f64, tail: TailRate) -> Result<f64, RatesError> {
        let base = self.psi(u);
        let breaks = self.breakpoints();
        let integrand = |s: f64| s * (self.psi(s) - base).exp();
        let cap = self.divergence_cap().max(2.0 * u);

        let mut upper = tail.s_star.max(u) + (tail.s_star.max(u) - u).max(1.0);
        let mut acc = quad::integrate_segmented(&integrand, u, upper, &breaks, rel, 1e-300)?;
        loop {
            let tail_bound = (self.psi(upper) - base).exp() * self.two_beta_sq() / tail.q;
            if tail_bound <= rel * acc.value || tail_bound < 1e-300 {
                return Ok(acc.value);
            }
            let next = u + (upper - u) * 2.0;
            if next > cap {
                return Err(RatesError::Divergent { cap });
            }
            let piece = quad::integrate_segmented(&integrand, upper, next, &breaks, rel, 1e-300)?;
            acc.value += piece.value;
            upper = next;
        }
    }

    /// The comparison function
    /// `f(r) = ∫₀^r e^{−Ψ(u)} ∫_u^∞ s e^{Ψ(s)} ds du`.
    /// `f(0) = 0`, `f'(0) = δ`, `f` is increasing and concave, and it solves
    /// `f'(r) γ̃(r) + 2β² f''(r) = −2β² r`.
    pub fn f_value(&self, r: f64, tol: f64) -> Result<f64, RatesError> {
        if !(r >= 0.0) {
            return Err(RatesError::NegativeRadius(r));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let tail = self.tail_rate()?;
        let outer_rel = tol.clamp(1e-14, 1e-6);
        let inner_rel = (tol * 0.1).clamp(1e-14, 1e-7);
        let breaks = self.breakpoints();
        let out = quad::integrate_segmented(
            |u| {
                self.g_tilde(u, inner_rel, tail)
                    .expect("inner integral diverged; tail_rate should have caught this")
            },
            0.0,
            r,
            &breaks,
            outer_rel,
            1e-300,
        )?;
        Ok(out.value)
    }

    /// Largest value of `γ⁺` on `[0, ε]`.
    fn sup_gamma_plus(&self, eps: f64) -> f64 {
        match &self.kind {
            RateKind::PaperPiecewise { k1, k2, radius } => {
                let big_r = *radius;
                if eps <= big_r {
                    // γ is increasing on the first branch
                    return (k1 * eps).max(0.0);
                }
                let mut best = (k1 * big_r).max(0.0);
                // middle branch is a downward quadratic −a v² + (2K1+K2) v
                let a = (k1 + k2) / big_r;
                let vertex = 0.5 * (2.0 * k1 + k2) / a;
                let hi = eps.min(2.0 * big_r);
                for v in [vertex.clamp(big_r, hi), hi] {
                    best = best.max(self.gamma_unchecked(v));
                }
                best
            }
            RateKind::Custom(_) => {
                let samples = 2048;
                (0..=samples)
                    .map(|i| self.gamma_unchecked(eps * i as f64 / samples as f64).max(0.0))
                    .fold(0.0, f64::max)
            }
        }
    }

    /// Small-distance penalty of the asymptotic reflection coupling:
    /// `ℓ(ε) = 2β²ε + δ·(sup_{[0,ε]} γ⁺ + Kσ ε)`.
    pub fn ell(&self, eps: f64, tol: f64) -> Result<f64, RatesError> {
        if !(eps >= 0.0) {
            return Err(RatesError::NegativeRadius(eps));
        }
        if eps == 0.0 {
            return Ok(0.0);
        }
        let (delta, _) = self.delta(tol)?;
        Ok(self.two_beta_sq() * eps + delta * (self.sup_gamma_plus(eps) + self.k_sigma * eps))
    }
}

/// Condition flags of the four hypothesis checks. `dic` is only populated
/// when the synchronous-coupling constants (including `K3`) are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConditions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dic: Option<bool>,
    pub kb_kd1: bool,
    pub kb_kd: bool,
    #[serde(rename = "CTK0")]
    pub ctk0: bool,
}

/// Computed rate quantities plus the condition flags. Quantities are always
/// reported, even when a hypothesis fails; failures only clear the flags
/// (and clamp `lambda` to zero, since no contraction is claimed there).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub delta: f64,
    pub lambda0: f64,
    pub c: f64,
    pub lambda: f64,
    /// Whether the reflection-coupling contraction hypothesis holds
    /// (`lambda > 0` exactly when it does).
    pub contractive: bool,
    /// Strict upper bound required of `Kb` by the contraction condition.
    pub kb_threshold_contraction: f64,
    /// Strict upper bound required of `Kb` by the uniform-moment condition.
    pub kb_threshold_moment: f64,
    pub conditions: RateConditions,
    pub quadrature: QuadDiagnostics,
}

/// Evaluate the reflection-coupling rate constants and hypothesis checks for
/// a declared `Kb` and delay span `r0`.
///
/// With `λ0 = 2β²/δ`:
/// * contraction threshold: `Kb < 2β⁴ / (e^{λ0 r0} (K2−Kσ) δ²)`,
/// * `c = ((K2−Kσ)/β²) e^{λ0 r0} δ`,
/// * `λ = c · (threshold − Kb)`,
/// * moment threshold: `Kb < 2(K2−Kσ) e^{−2(K2−Kσ) r0} / 6`,
/// * the propagation-of-chaos condition takes the minimum of the two.
pub fn theorem33_rates(
    rf: &RateFunction,
    k_b: f64,
    r0: f64,
    tol: f64,
) -> Result<RateReport, RatesError> {
    if !(k_b >= 0.0) {
        return Err(RatesError::BadConstant { name: "Kb", value: k_b });
    }
    if !(r0 >= 0.0) {
        return Err(RatesError::BadConstant { name: "r0", value: r0 });
    }
    let (delta, quadrature) = rf.delta(tol)?;
    let beta_sq = rf.beta * rf.beta;
    let k2_minus = match &rf.kind {
        RateKind::PaperPiecewise { k2, .. } => k2 - rf.k_sigma,
        RateKind::Custom(_) => {
            // long-range decay rate read off the tail certificate, doubled
            // back to the nominal slope
            2.0 * rf.tail_rate()?.q
        }
    };
    let lambda0 = 2.0 * beta_sq / delta;
    let growth = (lambda0 * r0).exp();
    let kb_threshold_contraction = 2.0 * beta_sq * beta_sq / (growth * k2_minus * delta * delta);
    let c = k2_minus / beta_sq * growth * delta;
    let lambda_raw = c * (kb_threshold_contraction - k_b);
    let kb_kd1 = k_b < kb_threshold_contraction;
    let kb_threshold_moment = 2.0 * k2_minus * (-2.0 * k2_minus * r0).exp() / 6.0;
    let ctk0 = k_b < kb_threshold_moment;
    Ok(RateReport {
        delta,
        lambda0,
        c,
        lambda: lambda_raw.max(0.0),
        contractive: kb_kd1,
        kb_threshold_contraction,
        kb_threshold_moment,
        conditions: RateConditions {
            dic: None,
            kb_kd1,
            kb_kd: k_b < kb_threshold_contraction.min(kb_threshold_moment),
            ctk0,
        },
        quadrature,
    })
}

/// Synchronous-coupling (uniformly dissipative) hypothesis check:
/// `20 K1 + 2 K2 < K3 e^{−K3 r0}`, with the explicit envelope constants on
/// the squared sup-distance that the coupling argument produces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem23Check {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// Envelope prefactor `2 e^{K3 r0}` for the squared sup-distance.
    pub envelope_prefactor: f64,
    /// Envelope exponent `e^{K3 r0} (2K2 + 20K1 − K3 e^{−K3 r0})`; negative
    /// exactly when the condition holds.
    pub envelope_rate: f64,
}

pub fn check_theorem23_condition(k1: f64, k2: f64, k3: f64, r0: f64) -> Theorem23Check {
    let lhs = 20.0 * k1 + 2.0 * k2;
    let rhs = k3 * (-k3 * r0).exp();
    let growth = (k3 * r0).exp();
    Theorem23Check {
        holds: lhs < rhs,
        lhs,
        rhs,
        envelope_prefactor: 2.0 * growth,
        envelope_rate: growth * (lhs - rhs),
    }
}
