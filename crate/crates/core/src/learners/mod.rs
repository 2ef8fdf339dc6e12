//! Ada-FTRL and Ada-MD state machines.
//!
//! [`Learner`] implements the raw updates: the caller supplies `p_t`/`q_t`
//! (FTRL) or `q_t`/`r_t` (MD) every round. [`OnlineLearner`] wraps it with the
//! named presets, adaptive schedules, optimistic hints and composite terms.

mod presets;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{DirDiff, ExtReal, Point, QuadMetric};
use crate::losses::Loss;
use crate::regularizers::{optimistic_shift, Collapsed, Regularizer};
use crate::solvers::{argmin, FeasibleSet, Objective, SolveMethod, Solution, SolverOptions};

pub use presets::*;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    #[default]
    Ftrl,
    Md,
}

/// Everything a round produced, kept for the regret ledger.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub t: usize,
    pub x_t: Point,
    pub x_next: Point,
    pub g: Point,
    /// Hint `g̃_t` that was folded into `x_t`.
    pub hint: Point,
    /// Hint `g̃_{t+1}` folded into `x_{t+1}`.
    pub hint_next: Point,
    /// `p_t` as supplied (FTRL); MD derives it as `r_t - q_{t-1}`.
    pub p: Option<Regularizer>,
    pub q: Regularizer,
    pub r: Regularizer,
    pub q_prev: Regularizer,
    /// `q̃_t`: `q_t` without the optimistic shift and composite term.
    pub q_tilde: Regularizer,
    /// Composite term charged to this round's regret.
    pub psi: Option<Regularizer>,
    /// `B_{r_{1:t}}(x_{t+1}, x_t)`.
    pub breg_r: f64,
    /// Hessian of the quadratic part of `r_{1:t}`.
    pub metric: QuadMetric,
    /// Strong-convexity modulus of the smooth non-quadratic part of `r_{1:t}`.
    pub extra_curvature: f64,
    pub eta: Option<f64>,
    pub method: SolveMethod,
    pub iterations: usize,
    pub certified_distance: f64,
}

impl StepRecord {
    /// `p_t(x)`, using `(+∞) - (+∞) = +∞` for the MD difference form.
    pub fn p_value(&self, x: &Point) -> Result<ExtReal> {
        match &self.p {
            Some(p) => Ok(p.value(x)),
            None => Regularizer::difference_value(&self.r, &self.q_prev, x),
        }
    }

    /// `B_{p_t}(y, x)`, as `B_{r_t} - B_{q_{t-1}}` in the MD form.
    pub fn p_bregman(&self, y: &Point, x: &Point) -> Result<ExtReal> {
        match &self.p {
            Some(p) => p.bregman_closed(y, x),
            None => self.r.bregman_closed(y, x)?.sub_conv(self.q_prev.bregman_closed(y, x)?),
        }
    }
}

/// Trace of a run: `x_1`, `q_0` and every round.
#[derive(Clone, Debug)]
pub struct Trace {
    pub algorithm: Algorithm,
    pub x1: Point,
    pub q0: Regularizer,
    /// `q̃_0`, the part of `q_0` without hints and composite terms.
    pub q0_tilde: Regularizer,
    pub records: Vec<StepRecord>,
    pub solver_calls: usize,
}

impl Trace {
    /// `x_1, …, x_{T+1}`.
    pub fn iterates(&self) -> Vec<Point> {
        let mut v = vec![self.x1.clone()];
        v.extend(self.records.iter().map(|r| r.x_next.clone()));
        v
    }
}

const PROX_TOL: f64 = 1e-9;
const PROX_PROBES: usize = 50;

fn centered_at(p: &Regularizer, x: &Point) -> bool {
    match p {
        Regularizer::Quadratic { center, metric, scale } => {
            *scale == 0.0 || metric.is_zero() || (*scale > 0.0 && center.sub(x).norm_inf() <= 1e-12)
        }
        Regularizer::Linear { v, .. } => v.is_zero(),
        Regularizer::L1 { alpha } => *alpha == 0.0 || (*alpha > 0.0 && x.is_zero()),
        Regularizer::Indicatrix(s) => s.contains(x),
        Regularizer::Sum(v) => v.iter().all(|t| centered_at(t, x)),
        Regularizer::Function(_) => false,
    }
}

/// `p_t(x_t) = min_𝓧 p_t`: structurally when every term is centered at
/// `x_t`, otherwise against 50 seeded random feasible probes.
pub fn check_proximal(p: &Regularizer, x_t: &Point, set: &FeasibleSet, round: usize) -> Result<()> {
    if centered_at(p, x_t) {
        return Ok(());
    }
    let at = p.value(x_t);
    if !at.is_finite() {
        return Err(Error::ProximalViolation { at_center: f64::INFINITY, probe: f64::NAN });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(round as u64);
    let scale = x_t.norm().max(1.0);
    for _ in 0..PROX_PROBES {
        let y = set.sample(&mut rng, scale);
        let v = p.value(&y);
        if v.is_finite() && at.value() > v.value() + PROX_TOL {
            return Err(Error::ProximalViolation { at_center: at.value(), probe: v.value() });
        }
    }
    Ok(())
}

/// Raw Ada-FTRL / Ada-MD state.
///
/// FTRL keeps `g_{1:t}` and the collapsed `p_{1:t} + q_{0:t}`; MD keeps the
/// collapsed `r_{1:t}` and uses `x_t` as the divergence anchor.
#[derive(Clone, Debug)]
pub struct Learner {
    algorithm: Algorithm,
    set: FeasibleSet,
    opts: SolverOptions,
    x: Point,
    x1: Point,
    t: usize,
    g_sum: Point,
    cum: Collapsed,
    q0: Regularizer,
    q_prev: Regularizer,
    hint: Point,
    solver_calls: usize,
}

impl Learner {
    /// `x_1 ∈ argmin_𝓧 q_0` (ties resolved towards the set center).
    pub fn init(algorithm: Algorithm, set: FeasibleSet, q0: Regularizer, opts: SolverOptions) -> Result<Self> {
        set.validate()?;
        let d = set.dim();
        let obj = Objective::from_regularizer(Point::zeros(d), &q0, set.clone())?;
        let x1 = argmin(&obj, &opts)?.x;
        let cum = match algorithm {
            Algorithm::Ftrl => q0.collapse(d)?,
            Algorithm::Md => Collapsed::new(d),
        };
        Ok(Learner {
            algorithm,
            set,
            opts,
            x: x1.clone(),
            x1,
            t: 0,
            g_sum: Point::zeros(d),
            cum,
            q_prev: q0.clone(),
            q0,
            hint: Point::zeros(d),
            solver_calls: 0,
        })
    }

    /// As [`Learner::init`] with `q_0 = q̃_0 + ⟨g̃_1, ·⟩`.
    pub fn init_optimistic(
        algorithm: Algorithm,
        set: FeasibleSet,
        q0_tilde: &Regularizer,
        hint1: Point,
        opts: SolverOptions,
    ) -> Result<Self> {
        hint1.check_dim(set.dim())?;
        let q0 = optimistic_shift(q0_tilde, &Point::zeros(set.dim()), &hint1);
        let mut l = Learner::init(algorithm, set, q0, opts)?;
        l.hint = hint1;
        Ok(l)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }
    pub fn x(&self) -> &Point {
        &self.x
    }
    pub fn x1(&self) -> &Point {
        &self.x1
    }
    pub fn round(&self) -> usize {
        self.t
    }
    pub fn dim(&self) -> usize {
        self.x.dim()
    }
    pub fn set(&self) -> &FeasibleSet {
        &self.set
    }
    pub fn q0(&self) -> &Regularizer {
        &self.q0
    }
    pub fn g_sum(&self) -> &Point {
        &self.g_sum
    }
    /// Current hint `g̃_{t+1}` (the one folded into the current play).
    pub fn hint(&self) -> &Point {
        &self.hint
    }
    pub fn solver_calls(&self) -> usize {
        self.solver_calls
    }
    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    fn solve(&mut self, obj: Objective) -> Result<Solution> {
        self.solver_calls += 1;
        argmin(&obj, &self.opts)
    }

    fn check_g(&self, g: &Point) -> Result<()> {
        g.check_dim(self.dim())?;
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, value: g[i] });
        }
        Ok(())
    }

    /// `x_{t+1} = argmin ⟨g_{1:t}, x⟩ + p_{1:t}(x) + q_{0:t}(x)`.
    pub fn ftrl_step(&mut self, g: &Point, p: &Regularizer, q: &Regularizer) -> Result<StepRecord> {
        if self.algorithm != Algorithm::Ftrl {
            return Err(Error::Unsupported("ftrl_step on a mirror-descent learner".into()));
        }
        self.check_g(g)?;
        check_proximal(p, &self.x, &self.set, self.t + 1)?;
        let g_sum = self.g_sum.add(g);
        let r_cum = self.cum.plus(p)?;
        let obj = Objective::new(g_sum.clone(), r_cum.plus(q)?, self.set.clone()).with_tie_break(self.x1.clone());
        let sol = self.solve(obj)?;
        let breg_r = r_cum.bregman(&sol.x, &self.x)?.expect_finite("B_{r_{1:t}}(x_{t+1}, x_t)")?;
        let r_t = Regularizer::sum([p.clone(), self.q_prev.clone()]);
        let rec = self.record(g, Some(p.clone()), q, r_t, &r_cum, breg_r, sol);
        self.g_sum = g_sum;
        self.cum = r_cum.plus(q)?;
        self.advance(&rec, q);
        Ok(rec)
    }

    /// `x_{t+1} = argmin ⟨g_t, x⟩ + q_t(x) + B_{r_{1:t}}(x, x_t)`.
    pub fn md_step(&mut self, g: &Point, q: &Regularizer, r: &Regularizer) -> Result<StepRecord> {
        if self.algorithm != Algorithm::Md {
            return Err(Error::Unsupported("md_step on an FTRL learner".into()));
        }
        self.check_g(g)?;
        let r_cum = self.cum.plus(r)?;
        let prox = r_cum.bregman_at(&self.x)?;
        let obj = Objective::new(g.clone(), prox.plus(q)?, self.set.clone()).with_tie_break(self.x.clone());
        let sol = self.solve(obj)?;
        let breg_r = r_cum.bregman(&sol.x, &self.x)?.expect_finite("B_{r_{1:t}}(x_{t+1}, x_t)")?;
        let rec = self.record(g, None, q, r.clone(), &r_cum, breg_r, sol);
        self.cum = r_cum;
        self.advance(&rec, q);
        Ok(rec)
    }

    /// FTRL with `q_t = q̃_t + ⟨g̃_{t+1} - g̃_t, ·⟩`.
    pub fn ao_ftrl_step(&mut self, g: &Point, hint_next: &Point, p: &Regularizer, q_tilde: &Regularizer) -> Result<StepRecord> {
        hint_next.check_dim(self.dim())?;
        let q = optimistic_shift(q_tilde, &self.hint, hint_next);
        let mut rec = self.ftrl_step(g, p, &q)?;
        rec.q_tilde = q_tilde.clone();
        rec.hint_next = hint_next.clone();
        self.hint = hint_next.clone();
        Ok(rec)
    }

    /// Optimistic MD with a single solve: `argmin ⟨g_t + g̃_{t+1} - g̃_t, x⟩ + q̃_t(x) + B_{r_{1:t}}(x, x_t)`.
    pub fn ao_md_step(&mut self, g: &Point, hint_next: &Point, q_tilde: &Regularizer, r: &Regularizer) -> Result<StepRecord> {
        hint_next.check_dim(self.dim())?;
        let q = optimistic_shift(q_tilde, &self.hint, hint_next);
        let mut rec = self.md_step(g, &q, r)?;
        rec.q_tilde = q_tilde.clone();
        rec.hint_next = hint_next.clone();
        self.hint = hint_next.clone();
        Ok(rec)
    }

    /// Composite step: `ψ` enters `q_t` unlinearized. `pr` is `p_t` for FTRL
    /// and `r_t` for MD; `psi` is the term the setting places in `q_t`.
    pub fn composite_step(&mut self, g: &Point, q_tilde: &Regularizer, psi: &Regularizer, pr: &Regularizer) -> Result<StepRecord> {
        let q = q_tilde.plus(psi);
        let mut rec = match self.algorithm {
            Algorithm::Ftrl => self.ftrl_step(g, pr, &q)?,
            Algorithm::Md => self.md_step(g, &q, pr)?,
        };
        rec.q_tilde = q_tilde.clone();
        rec.psi = Some(psi.clone());
        Ok(rec)
    }

    /// `x_{t+1} = argmin ℓ_t(x) + q̃_t(x) + B_{r_{1:t}}(x, x_t)`, as MD with
    /// `g_t = ∇ℓ_t(x_t)` and `ψ_t = B_{ℓ_t}(·, x_t)` in `q_t`.
    pub fn implicit_md_step(&mut self, loss: &Loss, q_tilde: &Regularizer, r: &Regularizer) -> Result<StepRecord> {
        let g = loss.gradient(&self.x);
        let psi = loss.bregman_regularizer(&self.x)?;
        self.composite_step(&g, q_tilde, &psi, r)
    }

    /// `x_{t+1} = argmin ℓ_{1:t}(x) + q̃_{0:t}(x) + p_{1:t}(x)`, as FTRL with
    /// `g_t = ∇ℓ_t(x_t)` and `ψ_t = B_{ℓ_t}(·, x_t)` in `q_t`.
    pub fn nonlinearized_ftrl_step(&mut self, loss: &Loss, q_tilde: &Regularizer, p: &Regularizer) -> Result<StepRecord> {
        let g = loss.gradient(&self.x);
        let psi = loss.bregman_regularizer(&self.x)?;
        self.composite_step(&g, q_tilde, &psi, p)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &self,
        g: &Point,
        p: Option<Regularizer>,
        q: &Regularizer,
        r: Regularizer,
        r_cum: &Collapsed,
        breg_r: f64,
        sol: Solution,
    ) -> StepRecord {
        StepRecord {
            t: self.t + 1,
            x_t: self.x.clone(),
            x_next: sol.x,
            g: g.clone(),
            hint: self.hint.clone(),
            hint_next: self.hint.clone(),
            p,
            q: q.clone(),
            r,
            q_prev: self.q_prev.clone(),
            q_tilde: q.clone(),
            psi: None,
            breg_r,
            metric: r_cum.hessian().clone(),
            extra_curvature: r_cum.functions().iter().map(|f| f.strong_convexity()).sum(),
            eta: None,
            method: sol.method,
            iterations: sol.iterations,
            certified_distance: sol.certified_distance,
        }
    }

    fn advance(&mut self, rec: &StepRecord, q: &Regularizer) {
        self.t += 1;
        self.x = rec.x_next.clone();
        self.q_prev = q.clone();
    }
}

impl DirDiff for StepRecord {
    /// `p_t` as a function, for divergence checks.
    fn value(&self, x: &Point) -> ExtReal {
        self.p_value(x).unwrap_or(ExtReal::INFINITY)
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        match &self.p {
            Some(p) => DirDiff::dir_derivative(p, x, z),
            None => DirDiff::dir_derivative(&self.r, x, z)?.sub_conv(DirDiff::dir_derivative(&self.q_prev, x, z)?),
        }
    }
}
