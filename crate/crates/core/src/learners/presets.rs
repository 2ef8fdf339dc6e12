use serde::{Deserialize, Serialize};

use super::{Algorithm, Learner, StepRecord, Trace};
use crate::error::{Error, Result};
use crate::hilbert::{Point, QuadMetric};
use crate::losses::{Feedback, Loss};
use crate::regularizers::{
    adagrad_diag_step, adagrad_full_step, final_attack_eta, ftrl_prox_increment, optimistic_shift, scale_free_eta,
    CompositeSetting, Regularizer, ScheduleState,
};
use crate::solvers::{FeasibleSet, SolverOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    /// Fixed weight.
    #[default]
    Constant,
    /// Weight `w / √t` (cumulative `w √t` for dual averaging).
    InvSqrt,
}

/// Named algorithm instances. Step sizes follow the usual convention
/// `q_0 = (1/2η)‖·‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// FTRL with `q_0 = (1/2η)‖·‖²`, `p_t = q_t = 0`.
    Ogd { eta: f64 },
    /// MD with `q_0 = 0`, `r_1 = (1/2η)‖·‖²`, `r_t = 0` afterwards (projected OGD).
    MdOgd { eta: f64 },
    /// Dual averaging: `q_t = (α_t/2)‖·‖²` with `α_{0:t} = 1/η` (constant) or `√(t+1)/η`.
    Da {
        eta: f64,
        #[serde(default)]
        decay: Decay,
    },
    /// `q_t = (1/2η) xᵀ(Q_{0:t}^{1/2} - Q_{0:t-1}^{1/2})x`, `Q_0 = γI`.
    AdagradDa {
        eta: f64,
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        full: bool,
    },
    /// `p_t = (1/2η)‖x - x_t‖²_{(t)}` with AdaGrad increments, `Q_0 = 0`.
    FtrlProx {
        eta: f64,
        #[serde(default)]
        full: bool,
    },
    /// FTRL-Prox with previous-gradient hints; the metric adapts to `g_t - g̃_t`.
    AoFtrlProx {
        eta: f64,
        #[serde(default)]
        full: bool,
    },
    /// Single-projection optimistic MD with `r_1 = (1/2η)‖·‖²`.
    AoMd { eta: f64 },
    /// Implicit-update MD: `argmin ℓ_t(x) + B_{r_{1:t}}(x, x_t)` with `r_1 = (1/2η)‖·‖²`
    /// (`r = 0` when `eta` is absent).
    ImplicitMd {
        #[serde(default)]
        eta: Option<f64>,
    },
    /// `argmin ℓ_{1:t}(x) + (1/2η)‖x‖²` (no regularizer when `eta` is absent).
    NonlinFtrl {
        #[serde(default)]
        eta: Option<f64>,
    },
    /// Optimistic FTRL-Prox with `η_t = 4RL² + (2/R)√(Σ‖g_s - g̃_s‖²)` and
    /// `p_t = ((η_t - η_{t-1})/2)‖x - x_t‖²`.
    FinalAttack {
        smoothness: f64,
        #[serde(default)]
        diameter: Option<f64>,
    },
    /// As `final-attack` with `η_t = η √(Σ‖g_s - g̃_s‖²)`; iterates are invariant to loss scaling.
    ScaleFree { eta: f64 },
    /// `p_t = (μ/2)‖x - x_t‖²` (FTRL) or `r_t = (μ/2)‖·‖²` (MD), plus an
    /// optional `q_0 = (γ₀/2)‖·‖²` (carried in `r_1` for MD).
    StronglyConvex {
        mu: f64,
        #[serde(default)]
        algorithm: Algorithm,
        #[serde(default)]
        gamma0: f64,
    },
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Ogd { .. } => "ogd",
            Preset::MdOgd { .. } => "md-ogd",
            Preset::Da { .. } => "da",
            Preset::AdagradDa { .. } => "adagrad-da",
            Preset::FtrlProx { .. } => "ftrl-prox",
            Preset::AoFtrlProx { .. } => "ao-ftrl-prox",
            Preset::AoMd { .. } => "ao-md",
            Preset::ImplicitMd { .. } => "implicit-md",
            Preset::NonlinFtrl { .. } => "nonlin-ftrl",
            Preset::FinalAttack { .. } => "final-attack",
            Preset::ScaleFree { .. } => "scale-free",
            Preset::StronglyConvex { .. } => "strongly-convex",
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Preset::MdOgd { .. } | Preset::AoMd { .. } | Preset::ImplicitMd { .. } => Algorithm::Md,
            Preset::StronglyConvex { algorithm, .. } => *algorithm,
            _ => Algorithm::Ftrl,
        }
    }

    /// True when the learner consumes the loss itself rather than only `g_t`.
    pub fn is_implicit(&self) -> bool {
        matches!(self, Preset::ImplicitMd { .. } | Preset::NonlinFtrl { .. })
    }

    fn default_hints(&self) -> HintPolicy {
        match self {
            Preset::AoFtrlProx { .. } | Preset::AoMd { .. } | Preset::FinalAttack { .. } | Preset::ScaleFree { .. } => {
                HintPolicy::PreviousGradient
            }
            _ => HintPolicy::None,
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        match self {
            Preset::Ogd { eta }
            | Preset::MdOgd { eta }
            | Preset::Da { eta, .. }
            | Preset::FtrlProx { eta, .. }
            | Preset::AoFtrlProx { eta, .. }
            | Preset::AoMd { eta }
            | Preset::ScaleFree { eta } => pos("eta", *eta),
            Preset::AdagradDa { eta, gamma, .. } => {
                pos("eta", *eta)?;
                if !(gamma.is_finite() && *gamma >= 0.0) {
                    return Err(Error::InvalidParameter(format!("gamma = {gamma} must be non-negative")));
                }
                Ok(())
            }
            Preset::ImplicitMd { eta } | Preset::NonlinFtrl { eta } => eta.map_or(Ok(()), |e| pos("eta", e)),
            Preset::FinalAttack { smoothness, diameter } => {
                if !(smoothness.is_finite() && *smoothness >= 0.0) {
                    return Err(Error::InvalidParameter(format!("smoothness = {smoothness} must be non-negative")));
                }
                diameter.map_or(Ok(()), |r| pos("diameter", r))
            }
            Preset::StronglyConvex { mu, gamma0, .. } => {
                pos("mu", *mu)?;
                if !(gamma0.is_finite() && *gamma0 >= 0.0) {
                    return Err(Error::InvalidParameter(format!("gamma0 = {gamma0} must be non-negative")));
                }
                Ok(())
            }
        }
    }
}

/// Source of the optimistic hints `g̃_t`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum HintPolicy {
    /// `g̃_t = 0`.
    #[default]
    None,
    /// `g̃_{t+1} = g_t`, `g̃_1 = 0`.
    PreviousGradient,
    /// `g̃_t = hints[t-1]` (zero past the end).
    Custom { hints: Vec<Point> },
    /// `g̃_t = g_t`; resolved to `Custom` by the runner for oblivious linear streams.
    Perfect,
}

impl HintPolicy {
    fn hint(&self, t: usize, d: usize, g_prev: Option<&Point>) -> Result<Point> {
        match self {
            HintPolicy::None => Ok(Point::zeros(d)),
            HintPolicy::PreviousGradient => Ok(g_prev.cloned().unwrap_or_else(|| Point::zeros(d))),
            HintPolicy::Custom { hints } => {
                let h = hints.get(t - 1).cloned().unwrap_or_else(|| Point::zeros(d));
                h.check_dim(d)?;
                Ok(h)
            }
            HintPolicy::Perfect => Err(Error::InvalidConfig("perfect hints must be resolved against the loss stream".into())),
        }
    }

    pub fn is_active(&self) -> bool {
        !matches!(self, HintPolicy::None)
    }
}

/// Composite term `ψ_t = α_t ‖·‖₁`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub alpha: f64,
    #[serde(default)]
    pub decay: Decay,
    pub setting: CompositeSetting,
}

impl CompositeSpec {
    /// `ψ_t`, with `ψ_t = 0` for `t` past the horizon.
    pub fn psi(&self, t: usize, horizon: Option<usize>) -> Regularizer {
        if t == 0 || horizon.is_some_and(|h| t > h) {
            return Regularizer::zero();
        }
        let alpha = match self.decay {
            Decay::Constant => self.alpha,
            Decay::InvSqrt => self.alpha / (t as f64).sqrt(),
        };
        Regularizer::L1 { alpha }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    #[serde(flatten)]
    pub preset: Preset,
    /// Overrides the preset's default hint policy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hints: Option<HintPolicy>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composite: Option<CompositeSpec>,
    /// Force `q̃_T = 0` in the last round (needs a known horizon).
    #[serde(default)]
    pub zero_final_q: bool,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl LearnerConfig {
    pub fn new(preset: Preset) -> Self {
        LearnerConfig { preset, hints: None, composite: None, zero_final_q: false, solver: SolverOptions::default() }
    }

    pub fn with_hints(mut self, hints: HintPolicy) -> Self {
        self.hints = Some(hints);
        self
    }

    pub fn with_composite(mut self, c: CompositeSpec) -> Self {
        self.composite = Some(c);
        self
    }

    pub fn hint_policy(&self) -> HintPolicy {
        self.hints.clone().unwrap_or_else(|| self.preset.default_hints())
    }

    pub fn validate(&self) -> Result<()> {
        self.preset.validate()?;
        if let Some(c) = &self.composite {
            if !(c.alpha.is_finite() && c.alpha >= 0.0) {
                return Err(Error::InvalidParameter(format!("composite alpha = {} must be non-negative", c.alpha)));
            }
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0 && self.solver.max_iter > 0) {
            return Err(Error::InvalidConfig("solver tol must be positive and max_iter non-zero".into()));
        }
        Ok(())
    }
}

/// A configured learner: presets, schedules, hints and composite terms on top of [`Learner`].
#[derive(Clone, Debug)]
pub struct OnlineLearner {
    config: LearnerConfig,
    hints: HintPolicy,
    core: Learner,
    schedule: ScheduleState,
    eta_prev: f64,
    horizon: Option<usize>,
    diameter: f64,
    q0_tilde: Regularizer,
    records: Vec<StepRecord>,
    keep_records: bool,
}

fn quad(center: Point, weight: f64) -> Regularizer {
    if weight == 0.0 {
        return Regularizer::zero();
    }
    Regularizer::Quadratic { center, metric: QuadMetric::identity(), scale: weight }
}

impl OnlineLearner {
    pub fn new(config: &LearnerConfig, set: &FeasibleSet, horizon: Option<usize>) -> Result<Self> {
        config.validate()?;
        set.validate()?;
        let d = set.dim();
        let hints = config.hint_policy();
        if let Some(c) = &config.composite {
            if c.setting == CompositeSetting::KnownBefore && horizon.is_none() {
                return Err(Error::InvalidConfig("known-before composite terms need the horizon".into()));
            }
        }
        if config.zero_final_q && horizon.is_none() {
            return Err(Error::InvalidConfig("zero_final_q needs the horizon".into()));
        }
        let diameter = match &config.preset {
            Preset::FinalAttack { diameter: Some(r), .. } => *r,
            Preset::FinalAttack { .. } => {
                let r = set.diameter();
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::InvalidConfig("final-attack needs a bounded feasible set".into()));
                }
                r
            }
            _ => set.diameter(),
        };
        let q0_tilde = match &config.preset {
            Preset::Ogd { eta } | Preset::Da { eta, .. } => Regularizer::half_sq_norm(d, 1.0 / eta),
            Preset::AdagradDa { eta, gamma, .. } if *gamma > 0.0 => Regularizer::half_sq_norm(d, gamma.sqrt() / eta),
            Preset::NonlinFtrl { eta: Some(eta) } => Regularizer::half_sq_norm(d, 1.0 / eta),
            Preset::StronglyConvex { gamma0, .. } if *gamma0 > 0.0 => Regularizer::half_sq_norm(d, *gamma0),
            _ => Regularizer::zero(),
        };
        let mut q0 = q0_tilde.clone();
        if let Some(c) = &config.composite {
            if c.setting == CompositeSetting::KnownBefore {
                q0 = q0.plus(&c.psi(1, horizon));
            }
        }
        let hint1 = hints.hint(1, d, None)?;
        let core = Learner::init_optimistic(config.preset.algorithm(), set.clone(), &q0, hint1, config.solver)?;
        Ok(OnlineLearner {
            config: config.clone(),
            hints,
            core,
            schedule: ScheduleState::new(d),
            eta_prev: 0.0,
            horizon,
            diameter,
            q0_tilde,
            records: Vec::new(),
            keep_records: true,
        })
    }

    /// Drop per-round records (for long runs that only need iterates).
    pub fn without_records(mut self) -> Self {
        self.keep_records = false;
        self
    }

    pub fn x(&self) -> &Point {
        self.core.x()
    }

    pub fn round(&self) -> usize {
        self.core.round()
    }

    pub fn core(&self) -> &Learner {
        &self.core
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn is_implicit(&self) -> bool {
        self.config.preset.is_implicit()
    }

    pub fn trace(&self) -> Trace {
        Trace {
            algorithm: self.core.algorithm(),
            x1: self.core.x1().clone(),
            q0: self.core.q0().clone(),
            q0_tilde: self.q0_tilde.clone(),
            records: self.records.clone(),
            solver_calls: self.core.solver_calls(),
        }
    }

    pub fn into_trace(self) -> Trace {
        Trace {
            algorithm: self.core.algorithm(),
            x1: self.core.x1().clone(),
            q0: self.core.q0().clone(),
            q0_tilde: self.q0_tilde,
            records: self.records,
            solver_calls: self.core.solver_calls(),
        }
    }

    /// Consume one round of feedback at the current play `x_t`.
    pub fn observe(&mut self, fb: &Feedback) -> Result<StepRecord> {
        let rec = self.step(&fb.g, Some(&fb.loss))?;
        if self.keep_records {
            self.records.push(rec.clone());
        }
        Ok(rec)
    }

    /// Gradient-only round (not available for implicit presets).
    pub fn observe_gradient(&mut self, g: &Point) -> Result<StepRecord> {
        let rec = self.step(g, None)?;
        if self.keep_records {
            self.records.push(rec.clone());
        }
        Ok(rec)
    }

    fn step(&mut self, g_obs: &Point, loss: Option<&Loss>) -> Result<StepRecord> {
        let t = self.core.round() + 1;
        let d = self.core.dim();
        let x_t = self.core.x().clone();
        let implicit = self.is_implicit();
        let (g, loss_psi) = if implicit {
            let loss = loss.ok_or_else(|| Error::InvalidConfig("implicit presets need the loss, not only g_t".into()))?;
            (loss.gradient(&x_t), Some(loss.bregman_regularizer(&x_t)?))
        } else {
            (g_obs.clone(), None)
        };
        g.check_dim(d)?;
        let hint_t = self.core.hint().clone();
        let hint_next = self.hints.hint(t + 1, d, Some(&g))?;
        let err = g.sub(&hint_t);

        let mut eta = None;
        let mut p = Regularizer::zero();
        let mut r = Regularizer::zero();
        let mut q_tilde = Regularizer::zero();
        match &self.config.preset {
            Preset::Ogd { .. } => {}
            Preset::MdOgd { eta } | Preset::AoMd { eta } | Preset::ImplicitMd { eta: Some(eta) } => {
                if t == 1 {
                    r = Regularizer::half_sq_norm(d, 1.0 / eta);
                }
            }
            Preset::ImplicitMd { eta: None } | Preset::NonlinFtrl { .. } => {}
            Preset::Da { eta, decay } => {
                if *decay == Decay::InvSqrt {
                    let w = ((t + 1) as f64).sqrt() - (t as f64).sqrt();
                    q_tilde = Regularizer::half_sq_norm(d, w / eta);
                }
            }
            Preset::AdagradDa { eta, gamma, full } => {
                let (inc, s) = if *full {
                    adagrad_full_step(&self.schedule, &err, *eta, *gamma)?
                } else {
                    adagrad_diag_step(&self.schedule, &err, *eta, *gamma)?
                };
                self.schedule = s;
                if !inc.is_zero() {
                    q_tilde = Regularizer::Quadratic { center: Point::zeros(d), metric: inc, scale: 1.0 };
                }
            }
            Preset::FtrlProx { eta, full } | Preset::AoFtrlProx { eta, full } => {
                let (inc, s) = if *full {
                    adagrad_full_step(&self.schedule, &err, *eta, 0.0)?
                } else {
                    adagrad_diag_step(&self.schedule, &err, *eta, 0.0)?
                };
                self.schedule = s;
                p = ftrl_prox_increment(&x_t, &inc);
            }
            Preset::FinalAttack { smoothness, .. } => {
                let (e, s) = final_attack_eta(&self.schedule, &g, &hint_t, self.diameter, *smoothness)?;
                self.schedule = s;
                p = quad(x_t.clone(), e - self.eta_prev);
                self.eta_prev = e;
                eta = Some(e);
            }
            Preset::ScaleFree { eta: eta0 } => {
                let (e, s) = scale_free_eta(&self.schedule, &g, &hint_t, *eta0)?;
                self.schedule = s;
                p = quad(x_t.clone(), e - self.eta_prev);
                self.eta_prev = e;
                eta = Some(e);
            }
            Preset::StronglyConvex { mu, algorithm, .. } => match algorithm {
                Algorithm::Ftrl => p = quad(x_t.clone(), *mu),
                Algorithm::Md => {
                    r = quad(x_t.clone(), *mu);
                    if t == 1 {
                        r = r.plus(&self.q0_tilde);
                    }
                }
            },
        }
        if self.config.zero_final_q && Some(t) == self.horizon {
            q_tilde = Regularizer::zero();
        }

        // composite term placed in q_t, and the one charged to this round
        let (psi_in_q, psi_charged) = match &self.config.composite {
            Some(c) => match c.setting {
                CompositeSetting::KnownBefore => (c.psi(t + 1, self.horizon), Some(c.psi(t, self.horizon))),
                CompositeSetting::RevealedAfter => (c.psi(t, self.horizon), Some(c.psi(t, self.horizon))),
            },
            None => (Regularizer::zero(), None),
        };
        let (psi_in_q, psi_charged) = match loss_psi {
            Some(lp) => (psi_in_q.plus(&lp), Some(psi_charged.map_or(lp.clone(), |c| c.plus(&lp)))),
            None => (psi_in_q, psi_charged),
        };

        let q = optimistic_shift(&q_tilde.plus(&psi_in_q), &hint_t, &hint_next);
        let mut rec = match self.core.algorithm() {
            Algorithm::Ftrl => self.core.ftrl_step(&g, &p, &q)?,
            Algorithm::Md => self.core.md_step(&g, &q, &r)?,
        };
        self.core.hint = hint_next.clone();
        rec.hint = hint_t;
        rec.hint_next = hint_next;
        rec.q_tilde = q_tilde;
        rec.psi = psi_charged;
        rec.eta = eta.or_else(|| rec.metric.isotropic_weight());
        Ok(rec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossSequence, SequenceSpec};

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    fn run(config: &LearnerConfig, set: &FeasibleSet, spec: &SequenceSpec, t: usize, scale: f64) -> Vec<Point> {
        let mut l = OnlineLearner::new(config, set, Some(t)).unwrap();
        let mut s = LossSequence::new(spec.clone(), 11).unwrap().with_scale(scale).unwrap();
        let mut xs = vec![l.x().clone()];
        for _ in 0..t {
            let fb = s.feedback(l.x()).unwrap();
            xs.push(l.observe(&fb).unwrap().x_next);
        }
        xs
    }

    #[test]
    fn ogd_ftrl_md_and_closed_form_coincide() {
        let eta = 0.3;
        let set = FeasibleSet::unconstrained(3);
        let spec = SequenceSpec::RandomSigns { dim: 3, magnitude: 1.5 };
        let a = run(&LearnerConfig::new(Preset::Ogd { eta }), &set, &spec, 50, 1.0);
        let b = run(&LearnerConfig::new(Preset::MdOgd { eta }), &set, &spec, 50, 1.0);
        let gs = LossSequence::losses(&spec, 11, 50).unwrap();
        let mut x = Point::zeros(3);
        for (i, f) in gs.iter().enumerate() {
            x = x.axpy(-eta, &f.gradient(&x));
            assert!(a[i + 1].sub(&x).norm() <= 1e-9);
            assert!(b[i + 1].sub(&x).norm() <= 1e-9);
        }
    }

    #[test]
    fn adagrad_da_metric_matches_recomputation() {
        let set = FeasibleSet::cube(2, -1.0, 1.0);
        let cfg = LearnerConfig::new(Preset::AdagradDa { eta: 0.5, gamma: 1.0, full: false });
        let mut l = OnlineLearner::new(&cfg, &set, None).unwrap();
        let gs = [p(&[3.0, 4.0]), p(&[0.0, 3.0]), p(&[1.0, -1.0])];
        let mut acc = [0.0, 0.0];
        for g in &gs {
            let rec = l.observe_gradient(g).unwrap();
            for j in 0..2 {
                acc[j] += g[j] * g[j];
            }
            // r_{1:t} = q_{0:t-1}: built from gradients before g_t
            let _ = rec;
        }
        let q = l.trace().q0.collapse(2).unwrap();
        let mut total = q;
        for rec in &l.trace().records {
            total.add(&rec.q).unwrap();
        }
        let w = total.hessian().diagonal_weights(2).unwrap();
        for j in 0..2 {
            assert!((w[j] - (1.0 + acc[j]).sqrt() / 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn ftrl_prox_p_terms_are_proximal() {
        let set = FeasibleSet::ball(3, 2.0);
        let cfg = LearnerConfig::new(Preset::FtrlProx { eta: 0.7, full: false });
        let spec = SequenceSpec::RandomSigns { dim: 3, magnitude: 1.0 };
        let mut l = OnlineLearner::new(&cfg, &set, None).unwrap();
        let mut s = LossSequence::new(spec, 2).unwrap();
        for _ in 0..20 {
            let fb = s.feedback(l.x()).unwrap();
            let rec = l.observe(&fb).unwrap();
            let pt = rec.p.clone().unwrap();
            assert!(pt.value(&rec.x_t).value().abs() < 1e-12);
        }
    }

    #[test]
    fn scale_free_iterates_are_scale_invariant() {
        let set = FeasibleSet::ball(2, 1.0);
        let spec = SequenceSpec::RandomSigns { dim: 2, magnitude: 1.0 };
        for cfg in [LearnerConfig::new(Preset::ScaleFree { eta: 1.0 }), LearnerConfig::new(Preset::FinalAttack { smoothness: 0.0, diameter: None })] {
            let a = run(&cfg, &set, &spec, 200, 1.0);
            let b = run(&cfg, &set, &spec, 200, 100.0);
            for (x, y) in a.iter().zip(&b) {
                assert!(x.sub(y).norm() <= 1e-6 * x.norm().max(1e-12), "{x:?} vs {y:?}");
            }
        }
    }

    #[test]
    fn final_attack_on_constant_stream() {
        // unit ball, R = 2, L = 0: the first round pays ‖g‖, then the iterate sits at the LMO vertex
        let set = FeasibleSet::ball(2, 1.0);
        let g = p(&[0.6, 0.8]);
        let cfg = LearnerConfig::new(Preset::FinalAttack { smoothness: 0.0, diameter: None });
        let xs = run(&cfg, &set, &SequenceSpec::Constant { g: g.clone() }, 30, 1.0);
        assert_eq!(xs[0], Point::zeros(2));
        for x in &xs[1..] {
            assert!(x.add(&g).norm() < 1e-9, "{x:?}");
        }
    }

    #[test]
    fn composite_settings() {
        let set = FeasibleSet::unconstrained(2);
        let base = LearnerConfig::new(Preset::Ogd { eta: 1.0 });
        let spec = SequenceSpec::Constant { g: p(&[0.5, -3.0]) };
        for setting in [CompositeSetting::KnownBefore, CompositeSetting::RevealedAfter] {
            let cfg = base.clone().with_composite(CompositeSpec { alpha: 1.0, decay: Decay::Constant, setting });
            let mut l = OnlineLearner::new(&cfg, &set, Some(3)).unwrap();
            let mut s = LossSequence::new(spec.clone(), 0).unwrap();
            for t in 1..=3 {
                let fb = s.feedback(l.x()).unwrap();
                let rec = l.observe(&fb).unwrap();
                // coordinate 0 stays at an exact zero: |g_{1:t}| ≤ weight of the L1 sum
                assert_eq!(rec.x_next[0], 0.0);
                let expected_q_l1 = match setting {
                    CompositeSetting::KnownBefore if t == 3 => 0.0,
                    _ => 1.0,
                };
                assert_eq!(rec.q.l1_weight(), expected_q_l1);
            }
        }
    }

    #[test]
    fn implicit_presets_need_losses() {
        let set = FeasibleSet::unconstrained(1);
        let mut l = OnlineLearner::new(&LearnerConfig::new(Preset::ImplicitMd { eta: Some(1.0) }), &set, None).unwrap();
        assert!(l.observe_gradient(&p(&[1.0])).is_err());
        let fb = Feedback { loss: Loss::half_sq_dist(p(&[2.0])), g: p(&[-2.0]), grad: p(&[-2.0]) };
        let rec = l.observe(&fb).unwrap();
        assert!((rec.x_next[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = LearnerConfig::new(Preset::AdagradDa { eta: 0.1, gamma: 1e-3, full: true })
            .with_hints(HintPolicy::PreviousGradient)
            .with_composite(CompositeSpec { alpha: 0.1, decay: Decay::InvSqrt, setting: CompositeSetting::RevealedAfter });
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<LearnerConfig>(&s).unwrap(), cfg);
        let c: LearnerConfig = serde_json::from_str(r#"{"preset":"ogd","eta":0.5}"#).unwrap();
        assert_eq!(c.preset, Preset::Ogd { eta: 0.5 });
        assert_eq!(c.solver, SolverOptions::default());
    }
}
