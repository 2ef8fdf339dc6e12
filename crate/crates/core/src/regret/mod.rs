//! Regret accounting: per-round ledgers, the exact regret decomposition,
//! forward regret and bound calculators.
//!
//! A [`Ledger`] is built once from a learner [`Trace`], the losses `f_t` and a
//! comparator `x*`. Every calculator is a pure function of the ledger.

mod bounds;
mod comparator;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{ExtReal, Point, QuadMetric};
use crate::learners::{Algorithm, StepRecord, Trace};
use crate::losses::Loss;
use crate::regularizers::Regularizer;

pub use bounds::*;
pub use comparator::*;

/// One round of the ledger, all terms evaluated against the ledger's `x*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub x_t: Point,
    pub x_next: Point,
    pub g: Point,
    /// `g̃_t`
    pub hint: Point,
    /// `f_t(x_t)`
    pub loss: f64,
    /// `f_t(x*)`
    pub loss_star: f64,
    /// `ψ_t(x_t)` (0 without a composite term)
    pub psi: f64,
    /// `ψ_t(x*)`
    pub psi_star: f64,
    /// `⟨g_t, x_{t+1} - x*⟩`
    pub lin_fwd: f64,
    /// `⟨g_t, x_t - x_{t+1}⟩`
    pub drift: f64,
    /// `B_{f_t}(x*, x_t)`
    pub breg_loss: f64,
    /// `δ_t = -f_t'(x_t; x* - x_t) + ⟨g_t, x* - x_t⟩`
    pub delta: f64,
    /// `σ_t = g_t - ∇f_t(x_t)`
    pub sigma: Point,
    /// `B_{r_{1:t}}(x_{t+1}, x_t)`
    pub breg_reg: f64,
    /// `q_t(x*)`, `q_t(x_{t+1})`
    pub q_star: f64,
    pub q_next: f64,
    /// `q_t` without its composite part (`q̃_t` plus the hint shift).
    pub qc_star: f64,
    pub qc_next: f64,
    /// `q̃_t(x*)`, `q̃_t(x_{t+1})`
    pub qt_star: f64,
    pub qt_next: f64,
    /// `p_t(x*)`, `p_t(x_t)`, `B_{p_t}(x*, x_t)`
    pub p_star: f64,
    pub p_at: f64,
    pub p_breg: f64,
    /// Metric of the `(t)`-norm: `r_{1:t}` (plus `ψ_t` for implicit updates) is
    /// 1-strongly convex w.r.t. `‖·‖²_M`.
    #[serde(skip, default = "QuadMetric::zero")]
    pub metric: QuadMetric,
    /// `½‖g_t‖²_{(t),*}`
    pub dual_g: f64,
    /// `½‖g_t - g̃_t‖²_{(t),*}`
    pub dual_hint_err: f64,
    pub eta: Option<f64>,
}

/// Terms of round 0 (`q_0` against `x_1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialTerms {
    pub q_star: f64,
    pub q_next: f64,
    pub qc_star: f64,
    pub qc_next: f64,
    pub qt_star: f64,
    pub qt_next: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    pub algorithm: Algorithm,
    pub x_star: Point,
    pub x1: Point,
    /// Whether composite terms `ψ_t` are part of the regret.
    pub composite: bool,
    /// Implicit updates: `f_t` is the linearization `⟨∇ℓ_t(x_t), ·⟩`, `ψ_t = B_{ℓ_t}(·, x_t)`.
    pub implicit: bool,
    pub initial: InitialTerms,
    pub rounds: Vec<RoundRecord>,
    pub solver_calls: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LedgerOptions {
    /// The trace comes from an implicit / non-linearized learner.
    pub implicit: bool,
}

fn finite(v: ExtReal, what: &str) -> Result<f64> {
    v.expect_finite(what)
}

fn eval(r: &Regularizer, x: &Point, what: &str) -> Result<f64> {
    finite(r.value(x), what)
}

/// `½ gᵀ M⁺ g`; `+∞` when `g` has a component in the null space of `M`.
pub fn half_dual_sq(m: &QuadMetric, g: &Point) -> f64 {
    let d = g.dim();
    match m {
        QuadMetric::Full(a) => {
            let eig = nalgebra::SymmetricEigen::new(a.clone());
            let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
            let gv = g.to_dvector();
            let mut acc = 0.0;
            for (i, &l) in eig.eigenvalues.iter().enumerate() {
                let c = eig.eigenvectors.column(i).dot(&gv);
                if l > 1e-12 * scale {
                    acc += c * c / l;
                } else if c.abs() > 1e-12 * g.norm().max(1.0) {
                    return f64::INFINITY;
                }
            }
            0.5 * acc
        }
        _ => {
            let w = m.diagonal_weights(d).expect("diagonal metric");
            let mut acc = 0.0;
            for j in 0..d {
                if g[j] == 0.0 {
                    continue;
                }
                if w[j] <= 0.0 {
                    return f64::INFINITY;
                }
                acc += g[j] * g[j] / w[j];
            }
            0.5 * acc
        }
    }
}

fn shifted(q_tilde: &Regularizer, hint: &Point, hint_next: &Point) -> Regularizer {
    crate::regularizers::optimistic_shift(q_tilde, hint, hint_next)
}

/// The `(t)`-norm metric of a round: quadratic part of `r_{1:t}` plus the
/// curvature of its smooth terms, and `ψ_t`'s curvature for implicit updates.
fn round_metric(rec: &StepRecord, implicit: bool, d: usize) -> Result<QuadMetric> {
    let mut m = rec.metric.sum(&QuadMetric::ScaledIdentity(rec.extra_curvature.max(0.0)))?;
    if implicit {
        if let Some(psi) = &rec.psi {
            let c = psi.collapse(d)?;
            let curv: f64 = c.functions().iter().map(|f| f.strong_convexity()).sum();
            m = m.sum(c.hessian())?.sum(&QuadMetric::ScaledIdentity(curv.max(0.0)))?;
        }
    }
    Ok(m)
}

impl Ledger {
    /// Build the ledger of a run. `losses[t-1]` is `f_t` (for stochastic runs the
    /// fixed `f`); for implicit traces it is the original loss `ℓ_t`, and the
    /// ledger uses the linearization `f_t = ⟨∇ℓ_t(x_t), ·⟩` with `ψ_t = B_{ℓ_t}(·, x_t)`.
    pub fn build(trace: &Trace, losses: &[Loss], x_star: &Point, opts: LedgerOptions) -> Result<Ledger> {
        let d = trace.x1.dim();
        x_star.check_dim(d)?;
        if let Some(i) = x_star.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, value: x_star[i] });
        }
        if losses.len() < trace.records.len() {
            return Err(Error::InvalidConfig(format!(
                "ledger needs {} losses, got {}",
                trace.records.len(),
                losses.len()
            )));
        }
        let hint1 = trace.records.first().map_or_else(|| Point::zeros(d), |r| r.hint.clone());
        let qc0 = shifted(&trace.q0_tilde, &Point::zeros(d), &hint1);
        // q_0 minus q̃_0 and the hint is ψ_1 under the known-before setting
        let initial = InitialTerms {
            q_star: eval(&trace.q0, x_star, "q_0(x*)")?,
            q_next: eval(&trace.q0, &trace.x1, "q_0(x_1)")?,
            qc_star: eval(&qc0, x_star, "q_0(x*)")?,
            qc_next: eval(&qc0, &trace.x1, "q_0(x_1)")?,
            qt_star: eval(&trace.q0_tilde, x_star, "q̃_0(x*)")?,
            qt_next: eval(&trace.q0_tilde, &trace.x1, "q̃_0(x_1)")?,
        };
        let composite = trace.records.iter().any(|r| r.psi.is_some());
        let mut rounds = Vec::with_capacity(trace.records.len());
        for (rec, ell) in trace.records.iter().zip(losses) {
            rounds.push(Self::round(rec, ell, x_star, opts.implicit, d)?);
        }
        Ok(Ledger {
            algorithm: trace.algorithm,
            x_star: x_star.clone(),
            x1: trace.x1.clone(),
            composite,
            implicit: opts.implicit,
            initial,
            rounds,
            solver_calls: trace.solver_calls,
        })
    }

    fn round(rec: &StepRecord, ell: &Loss, x_star: &Point, implicit: bool, d: usize) -> Result<RoundRecord> {
        let x_t = &rec.x_t;
        let f = if implicit { Loss::linear(rec.g.clone()) } else { ell.clone() };
        let z = x_star.sub(x_t);
        let fd = f
            .dir_derivative(x_t, &z)?
            .as_finite()
            .ok_or_else(|| Error::InfiniteDerivative(format!("f_{}'(x_t; x* - x_t)", rec.t)))?;
        let loss = f.value(x_t);
        let loss_star = f.value(x_star);
        let (psi, psi_star) = match &rec.psi {
            Some(p) => (eval(p, x_t, "ψ_t(x_t)")?, eval(p, x_star, "ψ_t(x*)")?),
            None => (0.0, 0.0),
        };
        let qc = shifted(&rec.q_tilde, &rec.hint, &rec.hint_next);
        let metric = round_metric(rec, implicit, d)?;
        let out = RoundRecord {
            t: rec.t,
            x_t: x_t.clone(),
            x_next: rec.x_next.clone(),
            g: rec.g.clone(),
            hint: rec.hint.clone(),
            loss,
            loss_star,
            psi,
            psi_star,
            lin_fwd: rec.g.dot(&rec.x_next.sub(x_star)),
            drift: rec.g.dot(&x_t.sub(&rec.x_next)),
            breg_loss: loss_star - loss - fd,
            delta: -fd + rec.g.dot(&z),
            sigma: rec.g.sub(&f.gradient(x_t)),
            breg_reg: rec.breg_r,
            q_star: eval(&rec.q, x_star, "q_t(x*)")?,
            q_next: eval(&rec.q, &rec.x_next, "q_t(x_{t+1})")?,
            qc_star: eval(&qc, x_star, "q_t(x*)")?,
            qc_next: eval(&qc, &rec.x_next, "q_t(x_{t+1})")?,
            qt_star: eval(&rec.q_tilde, x_star, "q̃_t(x*)")?,
            qt_next: eval(&rec.q_tilde, &rec.x_next, "q̃_t(x_{t+1})")?,
            p_star: finite(rec.p_value(x_star)?, "p_t(x*)")?,
            p_at: finite(rec.p_value(x_t)?, "p_t(x_t)")?,
            p_breg: finite(rec.p_bregman(x_star, x_t)?, "B_{p_t}(x*, x_t)")?,
            dual_g: half_dual_sq(&metric, &rec.g),
            dual_hint_err: half_dual_sq(&metric, &rec.g.sub(&rec.hint)),
            metric,
            eta: rec.eta,
        };
        Ok(out)
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn dim(&self) -> usize {
        self.x1.dim()
    }

    /// `x_1, …, x_{T+1}`
    pub fn iterates(&self) -> Vec<Point> {
        let mut v = vec![self.x1.clone()];
        v.extend(self.rounds.iter().map(|r| r.x_next.clone()));
        v
    }

    /// Sum of a per-round column.
    pub fn sum(&self, f: impl Fn(&RoundRecord) -> f64) -> f64 {
        self.rounds.iter().map(f).sum()
    }

    /// Running sums of a per-round column.
    pub fn cumsum(&self, f: impl Fn(&RoundRecord) -> f64) -> Vec<f64> {
        let mut acc = 0.0;
        self.rounds
            .iter()
            .map(|r| {
                acc += f(r);
                acc
            })
            .collect()
    }

    /// Running regret `Σ_{s≤t} f_s(x_s) - f_s(x*)`, optionally with `ψ_s`.
    pub fn cumulative_regret(&self, composite: bool) -> Vec<f64> {
        self.cumsum(|r| r.loss - r.loss_star + if composite { r.psi - r.psi_star } else { 0.0 })
    }

    /// Linearized regret `R⁺_T + Σ⟨g_t, x_t - x_{t+1}⟩ + Σδ_t = -Σ f_t'(x_t; x* - x_t)`.
    pub fn linearized_regret(&self) -> f64 {
        self.sum(|r| r.lin_fwd + r.drift + r.delta)
    }

    /// Sum of `½‖g_t - g̃_t‖²` in the Euclidean norm (zero for perfect hints).
    pub fn hint_error_sum(&self) -> f64 {
        self.sum(|r| r.g.sub(&r.hint).norm_sq())
    }

    /// Recompute every round from the stored points and compare to the cache.
    pub fn verify_consistency(&self, trace: &Trace, losses: &[Loss]) -> Result<()> {
        let again = Ledger::build(trace, losses, &self.x_star, LedgerOptions { implicit: self.implicit })?;
        if again != *self {
            return Err(Error::ReplayMismatch("ledger terms differ from recomputation".into()));
        }
        Ok(())
    }

    /// CSV export with the fixed column layout: `t`, `x_j`, `g_j`, the
    /// decomposition terms, cumulative regret, cumulative bound and slack.
    pub fn write_csv<W: Write>(&self, w: &mut W, bound: Option<&BoundReport>) -> Result<()> {
        let io = |e: std::io::Error| Error::Io(e.to_string());
        let d = self.dim();
        let mut header = vec!["t".to_string()];
        header.extend((0..d).map(|j| format!("x{j}")));
        header.extend((0..d).map(|j| format!("g{j}")));
        header.extend(CSV_TERMS.iter().map(|s| s.to_string()));
        header.extend(["cum_regret", "cum_bound", "slack"].map(String::from));
        writeln!(w, "{}", header.join(",")).map_err(io)?;
        let regret = self.cumulative_regret(self.composite);
        for (i, r) in self.rounds.iter().enumerate() {
            let mut row = vec![r.t.to_string()];
            row.extend(r.x_t.iter().map(|v| fmt_f64(*v)));
            row.extend(r.g.iter().map(|v| fmt_f64(*v)));
            for v in [
                r.loss, r.loss_star, r.psi, r.psi_star, r.lin_fwd, r.drift, r.breg_loss, r.delta, r.breg_reg, r.q_star,
                r.q_next, r.p_star, r.p_at, r.p_breg, r.dual_g,
            ] {
                row.push(fmt_f64(v));
            }
            let cb = bound.and_then(|b| b.cumulative.get(i).copied());
            row.push(fmt_f64(regret[i]));
            row.push(cb.map_or(String::new(), fmt_f64));
            row.push(cb.map_or(String::new(), |b| fmt_f64(b - regret[i])));
            writeln!(w, "{}", row.join(",")).map_err(io)?;
        }
        Ok(())
    }
}

/// Decomposition columns of the CSV export, in order.
pub const CSV_TERMS: [&str; 15] = [
    "loss",
    "loss_star",
    "psi",
    "psi_star",
    "lin_fwd",
    "drift",
    "breg_loss",
    "delta",
    "breg_reg",
    "q_star",
    "q_next",
    "p_star",
    "p_at",
    "p_breg",
    "dual_g",
];

/// Shortest representation that round-trips exactly.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:?}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// `R_T(x*) = Σ f_t(x_t) - f_t(x*)`, plus `Σ ψ_t(x_t) - ψ_t(x*)` when `composite`.
pub fn empirical_regret(ledger: &Ledger, composite: bool) -> f64 {
    ledger.sum(|r| r.loss - r.loss_star + if composite { r.psi - r.psi_star } else { 0.0 })
}

/// `R⁺_T(x*) = Σ ⟨g_t, x_{t+1} - x*⟩`.
pub fn forward_regret(ledger: &Ledger) -> f64 {
    ledger.sum(|r| r.lin_fwd)
}

/// `|R_T - (R⁺_T + Σ⟨g_t, x_t - x_{t+1}⟩ - Σ B_{f_t}(x*, x_t) + Σ δ_t)|`.
pub fn decomposition_residual(ledger: &Ledger) -> f64 {
    let lhs = empirical_regret(ledger, false);
    let rhs = forward_regret(ledger) + ledger.sum(|r| r.drift) - ledger.sum(|r| r.breg_loss) + ledger.sum(|r| r.delta);
    (lhs - rhs).abs()
}

/// `Σ_t a_t / √(a_{1:t}) ≤ 2 √(a_{1:T})` for non-negative `a` with `a_1 > 0`.
pub fn sum_sqrt_check(a: &[f64]) -> Result<(f64, f64)> {
    match a.first() {
        Some(&a1) if a1 > 0.0 => {}
        _ => return Err(Error::InvalidParameter("sum-sqrt lemma needs a_1 > 0".into())),
    }
    if let Some(v) = a.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidParameter(format!("sum-sqrt lemma needs finite non-negative terms, got {v}")));
    }
    let mut acc = 0.0;
    let mut lhs = 0.0;
    for &v in a {
        acc += v;
        lhs += v / acc.sqrt();
    }
    Ok((lhs, 2.0 * acc.sqrt()))
}

#[cfg(test)]
mod tests;
