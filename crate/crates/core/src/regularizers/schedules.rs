use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::Regularizer;
use crate::error::{Error, Result};
use crate::hilbert::{Point, QuadMetric};

/// Largest dimension accepted by the full-matrix AdaGrad schedule.
pub const FULL_MATRIX_MAX_DIM: usize = 256;

/// Mutable accumulators behind the adaptive schedules.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduleState {
    /// Per-coordinate `Σ_s g_{s,j}²`.
    pub accum_sq: Vec<f64>,
    /// `Σ_s g_s g_sᵀ` (full-matrix AdaGrad only).
    pub accum_outer: Option<DMatrix<f64>>,
    /// `Q_{0:t}^{1/2}` of the last full-matrix round.
    pub sqrt_prev: Option<DMatrix<f64>>,
    /// `Σ_s ‖g_s - g̃_s‖²_*`.
    pub accum_hint_err: f64,
    pub eta_prev: f64,
    pub round: usize,
}

impl ScheduleState {
    pub fn new(d: usize) -> Self {
        ScheduleState { accum_sq: vec![0.0; d], ..Default::default() }
    }

    /// `(1/η) diag √(γ + Σ g²)`, recomputed from the accumulators.
    pub fn cumulative_diag(&self, eta: f64, gamma0: f64) -> QuadMetric {
        QuadMetric::Diagonal(self.accum_sq.iter().map(|a| (gamma0 + a).sqrt() / eta).collect())
    }

    /// `Q_{0:t}^{1/2}` of the full-matrix schedule, if any round has run.
    pub fn full_sqrt(&self) -> Option<&DMatrix<f64>> {
        self.sqrt_prev.as_ref()
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!("learning rate {eta} must be positive")));
    }
    Ok(())
}

fn check_gamma(gamma0: f64) -> Result<()> {
    if !(gamma0.is_finite() && gamma0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma0} must be non-negative")));
    }
    Ok(())
}

/// Diagonal AdaGrad: returns the increment
/// `(√(γ + Σ_{s≤t} g²) - √(γ + Σ_{s<t} g²)) / η` per coordinate.
pub fn adagrad_diag_step(state: &ScheduleState, g: &Point, eta: f64, gamma0: f64) -> Result<(QuadMetric, ScheduleState)> {
    check_eta(eta)?;
    check_gamma(gamma0)?;
    g.check_dim(state.accum_sq.len())?;
    let mut next = state.clone();
    let inc = (0..g.dim())
        .map(|j| {
            let old = state.accum_sq[j];
            let new = old + g[j] * g[j];
            next.accum_sq[j] = new;
            ((gamma0 + new).sqrt() - (gamma0 + old).sqrt()) / eta
        })
        .collect();
    next.round += 1;
    Ok((QuadMetric::Diagonal(inc), next))
}

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite accumulator".into()));
    }
    let eig = SymmetricEigen::new(m.clone());
    let v = &eig.eigenvectors;
    let s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let r = v * DMatrix::from_diagonal(&s) * v.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Full-matrix AdaGrad: increment `(Q_{0:t}^{1/2} - Q_{0:t-1}^{1/2}) / η` with
/// `Q_{0:t} = γI + Σ_{s≤t} g_s g_sᵀ`.
pub fn adagrad_full_step(state: &ScheduleState, g: &Point, eta: f64, gamma0: f64) -> Result<(QuadMetric, ScheduleState)> {
    check_eta(eta)?;
    check_gamma(gamma0)?;
    let d = g.dim();
    if d > FULL_MATRIX_MAX_DIM {
        return Err(Error::Unsupported(format!("full-matrix AdaGrad limited to d <= {FULL_MATRIX_MAX_DIM}, got {d}")));
    }
    let mut next = state.clone();
    let outer = state.accum_outer.clone().unwrap_or_else(|| DMatrix::zeros(d, d));
    if outer.nrows() != d {
        return Err(Error::DimensionMismatch { expected: outer.nrows(), got: d });
    }
    let prev = match &state.sqrt_prev {
        Some(s) => s.clone(),
        None => DMatrix::identity(d, d) * gamma0.sqrt(),
    };
    let gv = g.to_dvector();
    let outer = outer + &gv * gv.transpose();
    let cur = psd_sqrt(&(DMatrix::identity(d, d) * gamma0 + &outer))?;
    let inc = QuadMetric::full((&cur - &prev) / eta).map_err(|e| Error::Eigen(e.to_string()))?;
    for j in 0..d {
        next.accum_sq[j] += g[j] * g[j];
    }
    next.accum_outer = Some(outer);
    next.sqrt_prev = Some(cur);
    next.round += 1;
    Ok((inc, next))
}

/// `p_t(x) = ½ ‖x - x_t‖²_inc`; minimized over all of ℝ^d at `x_t`.
pub fn ftrl_prox_increment(x_t: &Point, metric_increment: &QuadMetric) -> Regularizer {
    if metric_increment.is_zero() {
        return Regularizer::zero();
    }
    Regularizer::proximal(x_t.clone(), metric_increment.clone())
}

/// `q_t = q̃_t + ⟨g̃_{t+1} - g̃_t, ·⟩`.
pub fn optimistic_shift(q_tilde: &Regularizer, hint_prev: &Point, hint_next: &Point) -> Regularizer {
    let shift = hint_next.sub(hint_prev);
    if shift.is_zero() {
        return q_tilde.clone();
    }
    Regularizer::sum([q_tilde.clone(), Regularizer::linear(shift)])
}

/// `η_t = η √(Σ_{s≤t} ‖g_s - g̃_s‖²)`.
pub fn scale_free_eta(state: &ScheduleState, g: &Point, hint: &Point, eta0: f64) -> Result<(f64, ScheduleState)> {
    check_eta(eta0)?;
    let mut next = state.clone();
    next.accum_hint_err += g.sub(hint).norm_sq();
    let eta_t = eta0 * next.accum_hint_err.sqrt();
    next.eta_prev = eta_t;
    next.round += 1;
    Ok((eta_t, next))
}

/// `η_t = 4RL² + (2/R) √(Σ_{s≤t} ‖g_s - g̃_s‖²)`; `η_0 = 0`.
pub fn final_attack_eta(state: &ScheduleState, g: &Point, hint: &Point, r: f64, l: f64) -> Result<(f64, ScheduleState)> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("diameter R = {r} must be finite and positive")));
    }
    if !(l.is_finite() && l >= 0.0) {
        return Err(Error::InvalidParameter(format!("smoothness L = {l} must be non-negative")));
    }
    let mut next = state.clone();
    next.accum_hint_err += g.sub(hint).norm_sq();
    let eta_t = 4.0 * r * l * l + (2.0 / r) * next.accum_hint_err.sqrt();
    next.eta_prev = eta_t;
    next.round += 1;
    Ok((eta_t, next))
}

/// When the composite term `ψ_t` becomes available to the learner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompositeSetting {
    /// `ψ_t` is known before predicting `x_t`: `q_t = ψ_{t+1} + q̃_t`.
    KnownBefore,
    /// `ψ_t` is revealed with `g_t`: `q_0 = q̃_0`, `q_t = ψ_t + q̃_t`.
    RevealedAfter,
}

/// `q̃ + ψ`, where the caller supplies the `ψ` index dictated by the setting
/// (`ψ_{t+1}` for known-before, with `ψ_{T+1} := 0`; `ψ_t` for revealed-after).
pub fn composite_wrap(q_tilde: &Regularizer, psi: &Regularizer) -> Regularizer {
    q_tilde.plus(psi)
}

/// `q_t` for round `t ∈ 0..=T` under the given setting.
pub fn composite_q(
    setting: CompositeSetting,
    t: usize,
    horizon: usize,
    q_tilde: &Regularizer,
    psi: impl Fn(usize) -> Regularizer,
) -> Regularizer {
    match setting {
        CompositeSetting::KnownBefore if t < horizon => composite_wrap(q_tilde, &psi(t + 1)),
        CompositeSetting::KnownBefore => q_tilde.clone(),
        CompositeSetting::RevealedAfter if t == 0 => q_tilde.clone(),
        CompositeSetting::RevealedAfter => composite_wrap(q_tilde, &psi(t)),
    }
}

/// Checks `ψ_1(x_1) = 0` and `ψ_t ≥ ψ_{t+1} ≥ 0` on the probe points.
pub fn validate_psi_sequence(psis: &[Regularizer], x1: &Point, probes: &[Point]) -> bool {
    let Some(first) = psis.first() else { return true };
    if first.value(x1).value().abs() > 1e-12 {
        return false;
    }
    const TOL: f64 = 1e-12;
    probes.iter().chain(std::iter::once(x1)).all(|x| {
        let vals: Vec<f64> = psis.iter().map(|p| p.value(x).value()).collect();
        vals.iter().all(|&v| v >= -TOL) && vals.windows(2).all(|w| w[1] <= w[0] + TOL * (1.0 + w[0].abs()))
    })
}
