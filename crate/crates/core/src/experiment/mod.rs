//! JSON-configured experiments: seeded runs, grid sweeps, CSV replay and the
//! property-verification suites behind the `adaftrl` binary.
//!
//! A config names a learner preset, a loss sequence, a feasible set, the
//! horizon `T`, the seeds, how `x*` is chosen and which bounds to evaluate.
//! Every `(config, seed)` cell is independent and deterministic.

mod runner;
mod verify;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Point;
use crate::learners::{HintPolicy, LearnerConfig, Preset};
use crate::losses::{Loss, LossKind, Noise, SequenceSpec};
use crate::regret::RateCase;
use crate::solvers::FeasibleSet;

pub use runner::*;
pub use verify::*;

/// How the comparator `x*` is chosen.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ComparatorPolicy {
    /// Best fixed feasible point for the realized losses (plus composite terms).
    #[default]
    OfflineBest,
    Explicit { point: Point },
}

/// Bound calculators selectable from a config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundCase {
    /// Forward-regret bound of the run's algorithm.
    Forward,
    OoFtrl,
    OoMd,
    OoMdStrong,
    SoFtrl,
    SoMd,
    SoMdStrong,
    SmoothSoFtrl,
    SmoothSoMd,
    SmoothSoMdStrong,
    /// Optimistic bound with the hint-error dual norms.
    Ao,
    VariationalSmooth,
    FinalAttack,
}

impl BoundCase {
    pub fn rate_case(self) -> Option<RateCase> {
        Some(match self {
            BoundCase::OoFtrl => RateCase::OoFtrl,
            BoundCase::OoMd => RateCase::OoMd,
            BoundCase::OoMdStrong => RateCase::OoMdStrong,
            BoundCase::SoFtrl => RateCase::SoFtrl,
            BoundCase::SoMd => RateCase::SoMd,
            BoundCase::SoMdStrong => RateCase::SoMdStrong,
            BoundCase::SmoothSoFtrl => RateCase::SmoothSoFtrl,
            BoundCase::SmoothSoMd => RateCase::SmoothSoMd,
            BoundCase::SmoothSoMdStrong => RateCase::SmoothSoMdStrong,
            _ => return None,
        })
    }

    pub fn from_rate_case(case: RateCase) -> Self {
        match case {
            RateCase::OoFtrl => BoundCase::OoFtrl,
            RateCase::OoMd => BoundCase::OoMd,
            RateCase::OoMdStrong => BoundCase::OoMdStrong,
            RateCase::SoFtrl => BoundCase::SoFtrl,
            RateCase::SoMd => BoundCase::SoMd,
            RateCase::SoMdStrong => BoundCase::SoMdStrong,
            RateCase::SmoothSoFtrl => BoundCase::SmoothSoFtrl,
            RateCase::SmoothSoMd => BoundCase::SmoothSoMd,
            RateCase::SmoothSoMdStrong => BoundCase::SmoothSoMdStrong,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundCase::Forward => "forward",
            BoundCase::Ao => "ao",
            BoundCase::VariationalSmooth => "variational-smooth",
            BoundCase::FinalAttack => "final-attack",
            other => other.rate_case().expect("rate case").name(),
        }
    }

    /// Whether the bound holds on every realized sequence; the stochastic rows
    /// only bound the expected regret.
    pub fn pathwise(self) -> bool {
        !matches!(
            self,
            BoundCase::SoFtrl
                | BoundCase::SoMd
                | BoundCase::SoMdStrong
                | BoundCase::SmoothSoFtrl
                | BoundCase::SmoothSoMd
                | BoundCase::SmoothSoMdStrong
        )
    }

    /// Whether the calculator needs the per-round variation of the stream.
    pub fn needs_variation(self) -> bool {
        matches!(self, BoundCase::VariationalSmooth | BoundCase::FinalAttack)
    }
}

fn default_probes() -> usize {
    1000
}

fn default_tol() -> f64 {
    1e-9
}

fn default_bound_tol() -> f64 {
    1e-6
}

fn one() -> f64 {
    1.0
}

/// Constants and tolerances for the bound calculators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    /// `L`; defaults to the largest smoothness constant of the realized losses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothness: Option<f64>,
    /// `inf_𝓧 f`; the best observed value is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
    /// Certified τ-star-convexity constant; every bound is divided by it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Probe points for non-exact variation suprema.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Absolute tolerance of certificate checks.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// A bound holds when `mean + 2·SE ≤ bound + bound_tol · max(1, |bound|)`.
    #[serde(default = "default_bound_tol")]
    pub bound_tol: f64,
}

impl Default for BoundSettings {
    fn default() -> Self {
        BoundSettings {
            smoothness: None,
            f_star: None,
            tau: None,
            probes: default_probes(),
            tol: default_tol(),
            bound_tol: default_bound_tol(),
        }
    }
}

/// Sweep axes. Empty axes keep the base config's value; `T` is the innermost
/// axis so consecutive rows of a group differ only in the horizon.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    #[serde(default, rename = "T", skip_serializing_if = "Vec::is_empty")]
    pub horizon: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dim: Vec<usize>,
    /// Gradient-noise level of a stochastic sequence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<f64>,
    /// Amplitude of a drifting sequence.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<f64>,
    /// Divide the preset's step size by `√T` in every cell.
    #[serde(default)]
    pub eta_over_sqrt_t: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub learner: LearnerConfig,
    pub sequence: SequenceSpec,
    pub set: FeasibleSet,
    #[serde(rename = "T")]
    pub horizon: usize,
    /// Mandatory for random sequences; deterministic sequences default to `[0]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub comparator: ComparatorPolicy,
    /// Defaults to `["forward"]`. The first case fills the CSV bound column.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundCase>,
    #[serde(default)]
    pub inputs: BoundSettings,
    /// Multiplies every loss (and its gradients).
    #[serde(default = "one")]
    pub loss_scale: f64,
    /// Output directory; the CLI's `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidConfig(msg.into()))
}

impl ExperimentConfig {
    /// A config with one seed, the forward bound and default settings.
    pub fn new(name: &str, learner: LearnerConfig, sequence: SequenceSpec, set: FeasibleSet, horizon: usize) -> Self {
        ExperimentConfig {
            name: name.into(),
            learner,
            sequence,
            set,
            horizon,
            seeds: Vec::new(),
            comparator: ComparatorPolicy::OfflineBest,
            bounds: Vec::new(),
            inputs: BoundSettings::default(),
            loss_scale: 1.0,
            out: None,
            grid: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Sequences whose losses or feedback are drawn from a seeded RNG.
    pub fn needs_seed(&self) -> bool {
        matches!(self.sequence, SequenceSpec::Stochastic { .. } | SequenceSpec::RandomSigns { .. })
    }

    pub fn seed_list(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![0]
        } else {
            self.seeds.clone()
        }
    }

    pub fn bound_cases(&self) -> Vec<BoundCase> {
        if self.bounds.is_empty() {
            vec![BoundCase::Forward]
        } else {
            self.bounds.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return invalid(format!("name {:?} must be non-empty and use only [A-Za-z0-9._-]", self.name));
        }
        if self.name.starts_with('.') {
            return invalid("name must not start with '.'");
        }
        if self.horizon == 0 {
            return invalid("T must be positive");
        }
        self.learner.validate()?;
        self.sequence.validate()?;
        self.set.validate()?;
        let d = self.set.dim();
        if self.sequence.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.sequence.dim() });
        }
        if self.needs_seed() && self.seeds.is_empty() {
            return invalid("seeds are mandatory for random loss sequences");
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return invalid("seeds must be distinct");
        }
        if !(self.loss_scale.is_finite() && self.loss_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("loss_scale = {} must be positive", self.loss_scale)));
        }
        if let ComparatorPolicy::Explicit { point } = &self.comparator {
            point.check_dim(d)?;
            if !point.is_finite() {
                return invalid("explicit comparator must be finite");
            }
            if !self.set.contains(point) {
                return invalid("explicit comparator lies outside the feasible set");
            }
        }
        if let HintPolicy::Custom { hints } = self.learner.hint_policy() {
            for h in &hints {
                h.check_dim(d)?;
            }
        }
        if matches!(self.learner.hint_policy(), HintPolicy::Perfect) && !self.has_oblivious_gradients() {
            return invalid("perfect hints need a deterministic linear loss stream");
        }
        let alg = self.learner.preset.algorithm();
        for case in self.bound_cases() {
            if let Some(t2) = case.rate_case() {
                if t2.algorithm() != alg {
                    return invalid(format!("bound {} does not apply to {}", case.name(), self.learner.preset.name()));
                }
            }
            if case == BoundCase::FinalAttack && !self.set.is_bounded() {
                return invalid("the final-attack bound needs a bounded feasible set");
            }
        }
        let s = &self.inputs;
        if s.probes == 0 || !(s.tol.is_finite() && s.tol >= 0.0) || !(s.bound_tol.is_finite() && s.bound_tol >= 0.0) {
            return invalid("inputs need probes > 0 and non-negative tolerances");
        }
        if let Some(tau) = s.tau {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::InvalidParameter(format!("tau = {tau} must lie in (0, 1]")));
            }
        }
        if let Some(l) = s.smoothness {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::InvalidParameter(format!("smoothness = {l} must be non-negative")));
            }
        }
        if let Some(g) = &self.grid {
            self.validate_grid(g)?;
        }
        Ok(())
    }

    /// Gradients that do not depend on the plays, so `g_t` is known in advance.
    pub fn has_oblivious_gradients(&self) -> bool {
        self.sequence.is_linear() && !self.sequence.is_stochastic()
    }

    fn validate_grid(&self, g: &Grid) -> Result<()> {
        if g.horizon.contains(&0) || g.dim.contains(&0) {
            return invalid("grid T and dim values must be positive");
        }
        if g.sigma.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || g.drift.iter().any(|a| !a.is_finite()) {
            return invalid("grid sigma must be non-negative and drift finite");
        }
        if !g.sigma.is_empty() && !self.sequence.is_stochastic() {
            return invalid("a sigma axis needs a stochastic sequence");
        }
        if !g.drift.is_empty() && !matches!(self.sequence, SequenceSpec::Drifting { .. }) {
            return invalid("a drift axis needs a drifting sequence");
        }
        if !g.dim.is_empty() && matches!(self.learner.hint_policy(), HintPolicy::Custom { .. }) {
            return invalid("a dim axis cannot resize custom hints");
        }
        if g.eta_over_sqrt_t && step_size(&self.learner.preset).is_none() {
            return invalid(format!("preset {} has no step size to rescale", self.learner.preset.name()));
        }
        Ok(())
    }

    /// Expand the grid into per-cell configs (a single cell without a grid).
    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        let Some(g) = &self.grid else {
            return Ok(vec![SweepCell {
                horizon: self.horizon,
                dim: self.set.dim(),
                sigma: None,
                drift: None,
                config: self.clone(),
            }]);
        };
        let axis = |v: &Vec<f64>| if v.is_empty() { vec![None] } else { v.iter().map(|x| Some(*x)).collect() };
        let dims: Vec<Option<usize>> = if g.dim.is_empty() { vec![None] } else { g.dim.iter().map(|d| Some(*d)).collect() };
        let horizons = if g.horizon.is_empty() { vec![self.horizon] } else { g.horizon.clone() };
        let mut out = Vec::new();
        for d in &dims {
            for sigma in axis(&g.sigma) {
                for drift in axis(&g.drift) {
                    for &t in &horizons {
                        let mut c = self.clone();
                        c.grid = None;
                        c.horizon = t;
                        if let Some(d) = d {
                            c.resize(*d);
                        }
                        if let (Some(s), SequenceSpec::Stochastic { noise, .. }) = (sigma, &mut c.sequence) {
                            *noise = match noise {
                                Noise::Gaussian { .. } => Noise::Gaussian { sigma: s },
                                Noise::Uniform { .. } => Noise::Uniform { sigma: s },
                            };
                        }
                        if let (Some(a), SequenceSpec::Drifting { amplitude, .. }) = (drift, &mut c.sequence) {
                            *amplitude = a;
                        }
                        if g.eta_over_sqrt_t {
                            if let Some(eta) = step_size_mut(&mut c.learner.preset) {
                                *eta /= (t as f64).sqrt();
                            }
                        }
                        c.validate()?;
                        out.push(SweepCell { horizon: t, dim: c.set.dim(), sigma, drift, config: c });
                    }
                }
            }
        }
        Ok(out)
    }

    fn resize(&mut self, d: usize) {
        self.sequence = resize_sequence(&self.sequence, d);
        self.set = resize_set(&self.set, d);
        if let ComparatorPolicy::Explicit { point } = &mut self.comparator {
            *point = resize_point(point, d);
        }
    }
}

/// One cell of a sweep.
#[derive(Clone, Debug)]
pub struct SweepCell {
    pub horizon: usize,
    pub dim: usize,
    pub sigma: Option<f64>,
    pub drift: Option<f64>,
    pub config: ExperimentConfig,
}

fn step_size(p: &Preset) -> Option<f64> {
    let mut p = p.clone();
    step_size_mut(&mut p).map(|e| *e)
}

fn step_size_mut(p: &mut Preset) -> Option<&mut f64> {
    match p {
        Preset::Ogd { eta }
        | Preset::MdOgd { eta }
        | Preset::Da { eta, .. }
        | Preset::AdagradDa { eta, .. }
        | Preset::FtrlProx { eta, .. }
        | Preset::AoFtrlProx { eta, .. }
        | Preset::AoMd { eta }
        | Preset::ScaleFree { eta } => Some(eta),
        Preset::ImplicitMd { eta } | Preset::NonlinFtrl { eta } => eta.as_mut(),
        _ => None,
    }
}

/// Resize by repeating the coordinates cyclically.
fn resize_point(p: &Point, d: usize) -> Point {
    let n = p.dim().max(1);
    Point::raw((0..d).map(|j| if p.dim() == 0 { 0.0 } else { p[j % n] }).collect())
}

fn resize_vec(v: &[f64], d: usize) -> Vec<f64> {
    (0..d).map(|j| v[j % v.len()]).collect()
}

fn resize_loss(l: &Loss, d: usize) -> Loss {
    let kind = match &l.kind {
        LossKind::Linear { g } => LossKind::Linear { g: resize_point(g, d) },
        LossKind::Quadratic { center, weights } => LossKind::Quadratic {
            center: resize_point(center, d),
            weights: weights.as_ref().map(|w| resize_vec(w, d)),
        },
        LossKind::AbsSum { center } => LossKind::AbsSum { center: resize_point(center, d) },
        LossKind::StarPiecewise { .. } => LossKind::StarPiecewise { dim: d },
        LossKind::SqrtAbs { .. } => LossKind::SqrtAbs { dim: d },
        LossKind::ProductPower { powers } => LossKind::ProductPower { powers: resize_vec(powers, d) },
        LossKind::SineQuadratic { .. } => LossKind::SineQuadratic { dim: d },
    };
    Loss { kind, scale: l.scale }
}

fn resize_sequence(s: &SequenceSpec, d: usize) -> SequenceSpec {
    match s {
        SequenceSpec::Fixed { loss } => SequenceSpec::Fixed { loss: resize_loss(loss, d) },
        SequenceSpec::Cycle { losses } => SequenceSpec::Cycle { losses: losses.iter().map(|l| resize_loss(l, d)).collect() },
        SequenceSpec::Drifting { base, amplitude, period, weights } => SequenceSpec::Drifting {
            base: resize_point(base, d),
            amplitude: *amplitude,
            period: *period,
            weights: weights.as_ref().map(|w| resize_vec(w, d)),
        },
        SequenceSpec::Constant { g } => SequenceSpec::Constant { g: resize_point(g, d) },
        SequenceSpec::Alternating { g } => SequenceSpec::Alternating { g: resize_point(g, d) },
        SequenceSpec::Piecewise { pieces } => SequenceSpec::Piecewise {
            pieces: pieces
                .iter()
                .map(|p| crate::losses::Piece { from: p.from, g: resize_point(&p.g, d) })
                .collect(),
        },
        SequenceSpec::RandomSigns { magnitude, .. } => SequenceSpec::RandomSigns { dim: d, magnitude: *magnitude },
        SequenceSpec::Stochastic { loss, noise } => SequenceSpec::Stochastic { loss: resize_loss(loss, d), noise: noise.clone() },
    }
}

fn resize_set(s: &FeasibleSet, d: usize) -> FeasibleSet {
    match s {
        FeasibleSet::Unconstrained { .. } => FeasibleSet::Unconstrained { dim: d },
        FeasibleSet::Box { lo, hi } => FeasibleSet::Box { lo: resize_point(lo, d), hi: resize_point(hi, d) },
        FeasibleSet::Ball { center, radius } => FeasibleSet::Ball { center: resize_point(center, d), radius: *radius },
        FeasibleSet::Simplex { scale, .. } => FeasibleSet::Simplex { dim: d, scale: *scale },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            "t",
            LearnerConfig::new(Preset::Ogd { eta: 0.1 }),
            SequenceSpec::RandomSigns { dim: 2, magnitude: 1.0 },
            FeasibleSet::ball(2, 1.0),
            10,
        );
        c.seeds = vec![1];
        c
    }

    #[test]
    fn json_round_trip() {
        let c = base();
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parses_documented_schema() {
        let text = r#"{
            "name": "ogd-linear",
            "learner": {"preset": "ogd", "eta": 0.1},
            "sequence": {"kind": "random-signs", "dim": 3, "magnitude": 0.5},
            "set": {"kind": "ball", "center": [0, 0, 0], "radius": 1},
            "T": 100,
            "seeds": [1, 2],
            "comparator": {"kind": "offline-best"},
            "bounds": ["oo-ftrl", "forward"],
            "inputs": {"tol": 1e-9}
        }"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.bound_cases(), vec![BoundCase::OoFtrl, BoundCase::Forward]);
        assert_eq!(c.horizon, 100);
    }

    #[test]
    fn validation_errors() {
        let mut c = base();
        c.learner = LearnerConfig::new(Preset::Ogd { eta: 0.0 });
        assert!(matches!(c.validate(), Err(Error::InvalidParameter(_))));

        let mut c = base();
        c.seeds.clear();
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));

        let mut c = base();
        c.bounds = vec![BoundCase::OoMd];
        assert!(c.validate().is_err());

        let mut c = base();
        c.comparator = ComparatorPolicy::Explicit { point: Point::from_slice(&[2.0, 0.0]).unwrap() };
        assert!(c.validate().is_err());

        let mut c = base();
        c.learner = c.learner.clone().with_hints(HintPolicy::Perfect);
        assert!(c.validate().is_ok());
        c.sequence = SequenceSpec::Stochastic {
            loss: Loss::half_sq_dist(Point::zeros(2)),
            noise: Noise::Gaussian { sigma: 0.1 },
        };
        assert!(c.validate().is_err());

        assert!(ExperimentConfig::from_json(r#"{"name": "x", "bogus": 1}"#).is_err());
    }

    #[test]
    fn grid_expands_with_t_innermost() {
        let mut c = base();
        c.grid = Some(Grid { horizon: vec![10, 20], dim: vec![1, 3], eta_over_sqrt_t: true, ..Default::default() });
        let cells = c.cells().unwrap();
        let shape: Vec<(usize, usize)> = cells.iter().map(|c| (c.dim, c.horizon)).collect();
        assert_eq!(shape, vec![(1, 10), (1, 20), (3, 10), (3, 20)]);
        assert_eq!(cells[1].config.learner.preset, Preset::Ogd { eta: 0.1 / 20f64.sqrt() });
        assert_eq!(cells[3].config.set, FeasibleSet::ball(3, 1.0));
    }

    #[test]
    fn grid_axes_must_match_the_sequence() {
        let mut c = base();
        c.grid = Some(Grid { sigma: vec![0.1], ..Default::default() });
        assert!(c.validate().is_err());
    }
}
