use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Loss, LossKind};
use crate::error::{Error, Result};
use crate::hilbert::Point;
use crate::solvers::FeasibleSet;

/// Zero-mean gradient noise. `Uniform` draws each coordinate from
/// `[-σ√3, σ√3]` so both models have per-coordinate variance `σ²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Noise {
    Gaussian { sigma: f64 },
    Uniform { sigma: f64 },
}

impl Noise {
    pub fn sigma(&self) -> f64 {
        match self {
            Noise::Gaussian { sigma } | Noise::Uniform { sigma } => *sigma,
        }
    }

    pub fn sample(&self, d: usize, rng: &mut impl Rng) -> Point {
        let s = self.sigma();
        if s == 0.0 {
            return Point::zeros(d);
        }
        match self {
            Noise::Gaussian { .. } => {
                let n = Normal::new(0.0, s).expect("validated sigma");
                Point::raw((0..d).map(|_| n.sample(rng)).collect())
            }
            Noise::Uniform { .. } => {
                let h = s * 3f64.sqrt();
                Point::raw((0..d).map(|_| rng.gen_range(-h..=h)).collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    /// First round (1-based) at which `g` is played.
    pub from: usize,
    pub g: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SequenceSpec {
    /// The same loss every round.
    Fixed { loss: Loss },
    /// `f_t = losses[(t - 1) mod n]`.
    Cycle { losses: Vec<Loss> },
    /// `½ ‖x - a_t‖²_W` with `a_{t,j} = base_j + amplitude · sin(2π t / period + j)`.
    Drifting {
        base: Point,
        amplitude: f64,
        period: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// `⟨g, x⟩` every round.
    Constant { g: Point },
    /// `⟨g, x⟩, ⟨-g, x⟩, …`
    Alternating { g: Point },
    /// Piecewise-constant linear stream.
    Piecewise { pieces: Vec<Piece> },
    /// `g_t ∈ {±magnitude}^dim` with i.i.d. fair signs.
    RandomSigns { dim: usize, magnitude: f64 },
    /// `f_t = f` with stochastic gradients `∇f(x_t) + ξ_t`.
    Stochastic { loss: Loss, noise: Noise },
}

impl SequenceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match self {
            SequenceSpec::Fixed { loss } => loss.validate(),
            SequenceSpec::Cycle { losses } => {
                if losses.is_empty() {
                    return bad("cycle needs at least one loss");
                }
                let d = losses[0].dim();
                for l in losses {
                    l.validate()?;
                    if l.dim() != d {
                        return Err(Error::DimensionMismatch { expected: d, got: l.dim() });
                    }
                }
                Ok(())
            }
            SequenceSpec::Drifting { base, amplitude, period, weights } => {
                if !(amplitude.is_finite() && period.is_finite() && *period > 0.0) {
                    return bad("drifting sequence needs finite amplitude and positive period");
                }
                Loss::new(LossKind::Quadratic { center: base.clone(), weights: weights.clone() }).validate()
            }
            SequenceSpec::Constant { g } | SequenceSpec::Alternating { g } => {
                if g.dim() == 0 {
                    bad("empty gradient")
                } else {
                    Ok(())
                }
            }
            SequenceSpec::Piecewise { pieces } => {
                if pieces.is_empty() || pieces[0].from != 1 {
                    return bad("piecewise stream must start at round 1");
                }
                for w in pieces.windows(2) {
                    if w[1].from <= w[0].from {
                        return bad("piecewise rounds must increase");
                    }
                    if w[1].g.dim() != w[0].g.dim() {
                        return Err(Error::DimensionMismatch { expected: w[0].g.dim(), got: w[1].g.dim() });
                    }
                }
                Ok(())
            }
            SequenceSpec::RandomSigns { dim, magnitude } => {
                if *dim == 0 || !(magnitude.is_finite() && *magnitude >= 0.0) {
                    bad("random-signs needs dim > 0 and a finite magnitude")
                } else {
                    Ok(())
                }
            }
            SequenceSpec::Stochastic { loss, noise } => {
                let s = noise.sigma();
                if !(s.is_finite() && s >= 0.0) {
                    return bad("noise sigma must be finite and non-negative");
                }
                loss.validate()
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SequenceSpec::Fixed { loss } | SequenceSpec::Stochastic { loss, .. } => loss.dim(),
            SequenceSpec::Cycle { losses } => losses.first().map_or(0, Loss::dim),
            SequenceSpec::Drifting { base, .. } => base.dim(),
            SequenceSpec::Constant { g } | SequenceSpec::Alternating { g } => g.dim(),
            SequenceSpec::Piecewise { pieces } => pieces.first().map_or(0, |p| p.g.dim()),
            SequenceSpec::RandomSigns { dim, .. } => *dim,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, SequenceSpec::Stochastic { .. })
    }

    pub fn is_linear(&self) -> bool {
        match self {
            SequenceSpec::Constant { .. }
            | SequenceSpec::Alternating { .. }
            | SequenceSpec::Piecewise { .. }
            | SequenceSpec::RandomSigns { .. } => true,
            SequenceSpec::Fixed { loss } => matches!(loss.kind, LossKind::Linear { .. }),
            SequenceSpec::Cycle { losses } => losses.iter().all(|l| matches!(l.kind, LossKind::Linear { .. })),
            _ => false,
        }
    }
}

/// Per-round feedback: the loss played, the gradient the learner sees, and
/// the true (local sub-)gradient at `x_t`.
#[derive(Clone, Debug)]
pub struct Feedback {
    pub loss: Loss,
    pub g: Point,
    pub grad: Point,
}

impl Feedback {
    /// `σ_t = g_t - ∇f_t(x_t)`.
    pub fn sigma(&self) -> Point {
        self.g.sub(&self.grad)
    }
}

const NOISE_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

/// Deterministic, seeded generator of losses and gradient feedback.
#[derive(Clone, Debug)]
pub struct LossSequence {
    spec: SequenceSpec,
    scale: f64,
    loss_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    t: usize,
}

impl LossSequence {
    pub fn new(spec: SequenceSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(LossSequence {
            spec,
            scale: 1.0,
            loss_rng: ChaCha8Rng::seed_from_u64(seed),
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM),
            t: 0,
        })
    }

    /// Multiply every loss (and its feedback) by `c > 0`.
    pub fn with_scale(mut self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidParameter(format!("loss scale {c} must be positive")));
        }
        self.scale = c;
        Ok(self)
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Rounds generated so far.
    pub fn round(&self) -> usize {
        self.t
    }

    /// The loss of the next round; advances the round counter.
    pub fn next_loss(&mut self) -> Loss {
        self.t += 1;
        let t = self.t;
        let base = match &self.spec {
            SequenceSpec::Fixed { loss } | SequenceSpec::Stochastic { loss, .. } => loss.clone(),
            SequenceSpec::Cycle { losses } => losses[(t - 1) % losses.len()].clone(),
            SequenceSpec::Drifting { base, amplitude, period, weights } => {
                Loss::new(LossKind::Quadratic { center: drift_center(base, *amplitude, *period, t), weights: weights.clone() })
            }
            SequenceSpec::Constant { g } => Loss::linear(g.clone()),
            SequenceSpec::Alternating { g } => Loss::linear(if t % 2 == 1 { g.clone() } else { g.scale(-1.0) }),
            SequenceSpec::Piecewise { pieces } => {
                let piece = pieces.iter().rev().find(|p| p.from <= t).expect("validated first piece");
                Loss::linear(piece.g.clone())
            }
            SequenceSpec::RandomSigns { dim, magnitude } => {
                let rng = &mut self.loss_rng;
                Loss::linear(Point::raw((0..*dim).map(|_| if rng.gen::<bool>() { *magnitude } else { -*magnitude }).collect()))
            }
        };
        base.scaled(self.scale)
    }

    /// Next round's feedback at the learner's play `x_t`.
    pub fn feedback(&mut self, x_t: &Point) -> Result<Feedback> {
        x_t.check_dim(self.dim())?;
        let loss = self.next_loss();
        let grad = loss.gradient(x_t);
        let g = match &self.spec {
            SequenceSpec::Stochastic { noise, .. } => {
                grad.add(&noise.sample(x_t.dim(), &mut self.noise_rng).scale(self.scale))
            }
            _ => grad.clone(),
        };
        Ok(Feedback { loss, g, grad })
    }

    /// The first `horizon` losses of a fresh sequence with this seed.
    pub fn losses(spec: &SequenceSpec, seed: u64, horizon: usize) -> Result<Vec<Loss>> {
        let mut s = LossSequence::new(spec.clone(), seed)?;
        Ok((0..horizon).map(|_| s.next_loss()).collect())
    }
}

fn drift_center(base: &Point, amplitude: f64, period: f64, t: usize) -> Point {
    let phase = 2.0 * std::f64::consts::PI * t as f64 / period;
    Point::raw(base.iter().enumerate().map(|(j, b)| b + amplitude * (phase + j as f64).sin()).collect())
}

/// `∇f(x_t) + ξ` with `ξ` drawn from `noise`.
pub fn stochastic_gradient(f: &Loss, noise: &Noise, x_t: &Point, rng: &mut impl Rng) -> Point {
    f.gradient(x_t).add(&noise.sample(x_t.dim(), rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationEstimate {
    pub value: f64,
    /// True when every round's supremum was computed exactly.
    pub exact: bool,
    /// Probe points used for the non-exact rounds (0 when exact).
    pub probes: usize,
    /// `sup_x ‖∇f_t(x) - ∇f_{t-1}(x)‖²` for each round.
    pub per_round: Vec<f64>,
}

/// Rounds whose gradient difference is constant in `x`.
fn constant_difference(prev: Option<&Loss>, cur: &Loss) -> Option<Point> {
    let x0 = Point::zeros(cur.dim());
    match (prev.map(|p| &p.kind), &cur.kind) {
        (None | Some(LossKind::Linear { .. }), LossKind::Linear { .. }) => {
            Some(cur.gradient(&x0).sub(&prev.map_or(Point::zeros(cur.dim()), |p| p.gradient(&x0))))
        }
        (Some(LossKind::Quadratic { weights: w0, .. }), LossKind::Quadratic { weights: w1, .. })
            if w0 == w1 && prev.is_some_and(|p| p.scale == cur.scale) =>
        {
            Some(cur.gradient(&x0).sub(&prev.unwrap().gradient(&x0)))
        }
        _ => None,
    }
}

/// Exact `sup_{x ∈ X} ‖W (x - a)‖²` for a diagonal-weighted quadratic.
fn quadratic_sup(center: &Point, weights: Option<&Vec<f64>>, scale: f64, set: &FeasibleSet) -> Option<f64> {
    let w = |j: usize| scale * weights.map_or(1.0, |w| w[j]);
    match set {
        FeasibleSet::Box { lo, hi } => Some(
            (0..center.dim())
                .map(|j| w(j).powi(2) * (lo[j] - center[j]).powi(2).max((hi[j] - center[j]).powi(2)))
                .sum(),
        ),
        FeasibleSet::Ball { center: c, radius } => {
            let iso = (0..center.dim()).all(|j| w(j) == w(0));
            iso.then(|| w(0).powi(2) * (center.sub(c).norm() + radius).powi(2))
        }
        FeasibleSet::Simplex { dim, scale: s } => Some(
            (0..*dim)
                .map(|v| (0..*dim).map(|j| w(j).powi(2) * ((if j == v { *s } else { 0.0 }) - center[j]).powi(2)).sum::<f64>())
                .fold(0.0, f64::max),
        ),
        FeasibleSet::Unconstrained { .. } => None,
    }
}

/// `D = Σ_t sup_{x∈X} ‖∇f_t(x) - ∇f_{t-1}(x)‖²` (Euclidean), `f_0 = 0`.
///
/// Exact for linear streams and for same-metric quadratic drifts; otherwise the
/// supremum is the max over `probes` sampled points of the set plus its
/// center, a documented under-estimate.
pub fn variation_estimate(losses: &[Loss], set: &FeasibleSet, probes: usize, seed: u64) -> Result<VariationEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe_pts: Option<Vec<Point>> = None;
    let mut per_round = Vec::with_capacity(losses.len());
    let mut exact = true;
    for (i, cur) in losses.iter().enumerate() {
        let prev = if i == 0 { None } else { Some(&losses[i - 1]) };
        if let Some(diff) = constant_difference(prev, cur) {
            per_round.push(diff.norm_sq());
            continue;
        }
        if prev.is_none() {
            if let LossKind::Quadratic { center, weights } = &cur.kind {
                if let Some(v) = quadratic_sup(center, weights.as_ref(), cur.scale, set) {
                    per_round.push(v);
                    continue;
                }
            }
        }
        exact = false;
        let pts = probe_pts.get_or_insert_with(|| {
            let mut v: Vec<Point> = (0..probes).map(|_| set.sample(&mut rng, 1.0)).collect();
            v.push(set.center());
            v
        });
        let sup = pts
            .iter()
            .map(|x| {
                let g0 = prev.map_or(Point::zeros(x.dim()), |p| p.gradient(x));
                cur.gradient(x).sub(&g0).norm_sq()
            })
            .fold(0.0, f64::max);
        per_round.push(sup);
    }
    Ok(VariationEstimate {
        value: per_round.iter().sum(),
        exact,
        probes: if exact { 0 } else { probes + 1 },
        per_round,
    })
}
