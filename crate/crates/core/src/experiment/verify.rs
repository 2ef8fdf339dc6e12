//! Randomized property suites behind `adaftrl verify <suite>`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::runner::{mean_se, par_map, run, run_cell, RunOptions};
use super::{BoundCase, ComparatorPolicy, ExperimentConfig};
use crate::error::{Error, Result};
use crate::hilbert::{bregman, DirDiff, ExtReal, Point, QuadMetric};
use crate::learners::{Algorithm, CompositeSpec, Decay, HintPolicy, LearnerConfig, Preset};
use crate::losses::{check_pl, estimate_tau, verify_smoothness, verify_star_convex, verify_strong_convexity, verify_tau_star_strong};
use crate::losses::{Loss, LossKind, Noise, Piece, SequenceSpec};
use crate::regret::{bound_ao, bound_rate, sum_sqrt_check, BoundInputs, Ledger, RateCase};
use crate::regularizers::{CompositeSetting, Regularizer};
use crate::solvers::{argmin_l1_composite, argmin_numeric, project_simplex, FeasibleSet, Objective, SolverOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Bregman,
    Solvers,
    Decomposition,
    Bounds,
    Nonconvex,
    Lemmas,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Bregman, Suite::Solvers, Suite::Decomposition, Suite::Bounds, Suite::Nonconvex, Suite::Lemmas];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Bregman => "bregman",
            Suite::Solvers => "solvers",
            Suite::Decomposition => "decomposition",
            Suite::Bounds => "bounds",
            Suite::Nonconvex => "nonconvex",
            Suite::Lemmas => "lemmas",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown suite {s:?} (expected one of bregman, solvers, decomposition, bounds, nonconvex, lemmas)")))
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Instances per property of the bregman and lemmas suites.
    pub instances: usize,
    /// Instances per solver oracle.
    pub solver_instances: usize,
    /// Randomized learner runs of the decomposition suite.
    pub runs: usize,
    /// Rate-bound experiments: dimension, horizon and seeds for the stochastic rows.
    pub bound_dim: usize,
    pub bound_horizon: usize,
    pub bound_seeds: usize,
    pub tol: f64,
    pub seed: u64,
    pub jobs: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            instances: 10_000,
            solver_instances: 500,
            runs: 200,
            bound_dim: 10,
            bound_horizon: 2000,
            bound_seeds: 30,
            tol: 1e-9,
            seed: 0,
            jobs: None,
        }
    }
}

/// Outcome of one randomized property. `worst_slack` is the smallest
/// `allowance - violation` seen; negative means the property failed there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    pub instances: usize,
    pub passed_instances: usize,
    pub worst_slack: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub properties: Vec<PropertyResult>,
    pub passed: bool,
}

impl SuiteReport {
    fn new(suite: Suite, properties: Vec<PropertyResult>) -> Self {
        let passed = properties.iter().all(|p| p.passed);
        SuiteReport { suite, properties, passed }
    }
}

pub fn verify(suite: Suite, opts: &VerifyOptions) -> Result<SuiteReport> {
    let props = match suite {
        Suite::Bregman => bregman_suite(opts)?,
        Suite::Solvers => solvers_suite(opts)?,
        Suite::Decomposition => decomposition_suite(opts)?,
        Suite::Bounds => bounds_suite(opts)?,
        Suite::Nonconvex => nonconvex_suite(opts)?,
        Suite::Lemmas => lemmas_suite(opts)?,
    };
    Ok(SuiteReport::new(suite, props))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The RNG of instance `i` of stream `stream`; independent of thread count.
pub fn instance_rng(seed: u64, stream: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ splitmix(stream)) ^ i as u64))
}

fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Run `check` on `n` seeded instances; each returns its slack (≥ 0 passes).
fn property(
    name: &str,
    n: usize,
    opts: &VerifyOptions,
    check: impl Fn(&mut ChaCha8Rng, usize) -> Result<f64> + Sync + Send,
) -> Result<PropertyResult> {
    let id = stream_id(name);
    let idx: Vec<usize> = (0..n).collect();
    let out = par_map(opts.jobs, &idx, |&i| check(&mut instance_rng(opts.seed, id, i), i))?;
    let mut worst = f64::INFINITY;
    let mut passed = 0;
    let mut first_failure = None;
    for (i, r) in out.into_iter().enumerate() {
        match r {
            Ok(s) if s >= 0.0 => {
                passed += 1;
                worst = worst.min(s);
            }
            Ok(s) => {
                worst = worst.min(s);
                first_failure.get_or_insert_with(|| format!("instance {i}: slack {s:.3e}"));
            }
            Err(e) => {
                worst = f64::NEG_INFINITY;
                first_failure.get_or_insert_with(|| format!("instance {i}: {e}"));
            }
        }
    }
    Ok(PropertyResult {
        name: name.into(),
        instances: n,
        passed_instances: passed,
        worst_slack: worst,
        first_failure,
        passed: passed == n,
    })
}

fn bool_slack(ok: bool) -> f64 {
    if ok {
        0.0
    } else {
        -1.0
    }
}

// ---------------------------------------------------------------- generators

pub fn rand_point(rng: &mut impl Rng, d: usize, scale: f64) -> Point {
    Point::new((0..d).map(|_| rng.gen_range(-scale..scale)).collect()).expect("finite")
}

fn rand_weights(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(0.1..3.0)).collect()
}

pub fn rand_metric(rng: &mut impl Rng, d: usize) -> QuadMetric {
    match rng.gen_range(0..3) {
        0 => QuadMetric::scaled_identity(rng.gen_range(0.1..3.0)).expect("positive"),
        1 => QuadMetric::diagonal(rand_weights(rng, d)).expect("positive"),
        _ => {
            let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
            QuadMetric::full(&a * a.transpose() + DMatrix::identity(d, d) * 0.1).expect("positive definite")
        }
    }
}

/// A random loss; non-convex kinds only when `convex_only` is false.
pub fn rand_loss(rng: &mut impl Rng, d: usize, convex_only: bool) -> Loss {
    let kinds = if convex_only { 3 } else { 7 };
    let kind = match rng.gen_range(0..kinds) {
        0 => LossKind::Linear { g: rand_point(rng, d, 2.0) },
        1 => LossKind::Quadratic { center: rand_point(rng, d, 1.0), weights: Some(rand_weights(rng, d)) },
        2 => LossKind::AbsSum { center: rand_point(rng, d, 1.0) },
        3 => LossKind::StarPiecewise { dim: d },
        4 => LossKind::SqrtAbs { dim: d },
        5 => LossKind::ProductPower { powers: (0..d).map(|_| rng.gen_range(0.5..2.0)).collect() },
        _ => LossKind::SineQuadratic { dim: d },
    };
    Loss::new(kind).scaled(rng.gen_range(0.1..3.0))
}

fn rand_quadratic(rng: &mut impl Rng, d: usize) -> Regularizer {
    Regularizer::Quadratic { center: rand_point(rng, d, 1.0), metric: rand_metric(rng, d), scale: rng.gen_range(0.1..3.0) }
}

/// A random convex regularizer built from quadratics, linear terms and `‖·‖₁`.
pub fn rand_regularizer(rng: &mut impl Rng, d: usize) -> Regularizer {
    let leaf = |rng: &mut ChaCha8Rng| match rng.gen_range(0..3) {
        0 => rand_quadratic(rng, d),
        1 => Regularizer::Linear { v: rand_point(rng, d, 2.0), w: rng.gen_range(-1.0..1.0) },
        _ => Regularizer::L1 { alpha: rng.gen_range(0.0..2.0) },
    };
    let mut sub = ChaCha8Rng::seed_from_u64(rng.gen());
    let n = rng.gen_range(1..=3);
    Regularizer::sum((0..n).map(|_| leaf(&mut sub)))
}

/// `f + ⟨v, ·⟩ + w`
struct Affine<F> {
    f: F,
    v: Point,
    w: f64,
}

impl<F: DirDiff> DirDiff for Affine<F> {
    fn value(&self, x: &Point) -> ExtReal {
        self.f.value(x).add_finite(self.v.dot(x) + self.w)
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        Ok(self.f.dir_derivative(x, z)?.add_finite(self.v.dot(z)))
    }
}

fn fin(v: ExtReal, what: &str) -> Result<f64> {
    v.expect_finite(what)
}

/// `1 + |f(y)| + |f(x)| + |f'(x; y - x)|`, the magnitude a divergence is computed from.
fn scale_of<F: DirDiff>(f: &F, y: &Point, x: &Point) -> Result<f64> {
    Ok(1.0 + fin(f.value(y), "f(y)")?.abs() + fin(f.value(x), "f(x)")?.abs() + fin(f.dir_derivative(x, &y.sub(x))?, "f'")?.abs())
}

// ---------------------------------------------------------------- bregman

fn bregman_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let n = opts.instances;
    let tol = opts.tol;
    let dim = |rng: &mut ChaCha8Rng| rng.gen_range(1..=5);
    Ok(vec![
        property("convex-loss-nonnegativity", n, opts, |rng, _| {
            let d = dim(rng);
            let f = rand_loss(rng, d, true);
            let (y, x) = (rand_point(rng, d, 2.0), rand_point(rng, d, 2.0));
            Ok(fin(bregman(&f, &y, &x)?, "B_f")? + tol * scale_of(&f, &y, &x)?)
        })?,
        property("convex-regularizer-nonnegativity", n, opts, |rng, _| {
            let d = dim(rng);
            let r = rand_regularizer(rng, d);
            let (y, x) = (rand_point(rng, d, 2.0), rand_point(rng, d, 2.0));
            Ok(fin(bregman(&r, &y, &x)?, "B_r")? + tol * scale_of(&r, &y, &x)?)
        })?,
        property("affine-invariance", n, opts, |rng, _| {
            let d = dim(rng);
            let (y, x) = (rand_point(rng, d, 2.0), rand_point(rng, d, 2.0));
            let (v, w) = (rand_point(rng, d, 3.0), rng.gen_range(-3.0..3.0));
            let (plain, shifted, scale) = if rng.gen_bool(0.5) {
                let f = rand_loss(rng, d, false);
                let g = Affine { f: f.clone(), v, w };
                (bregman(&f, &y, &x)?, bregman(&g, &y, &x)?, scale_of(&g, &y, &x)?.max(scale_of(&f, &y, &x)?))
            } else {
                let f = rand_regularizer(rng, d);
                let g = f.plus(&Regularizer::Linear { v, w });
                (bregman(&f, &y, &x)?, bregman(&g, &y, &x)?, scale_of(&g, &y, &x)?.max(scale_of(&f, &y, &x)?))
            };
            Ok(tol * scale - (fin(plain, "B_f")? - fin(shifted, "B_{f+a}")?).abs())
        })?,
        property("divergence-additivity", n, opts, |rng, _| {
            let d = dim(rng);
            let (q, p) = (rand_regularizer(rng, d), rand_regularizer(rng, d));
            let (y, x) = (rand_point(rng, d, 2.0), rand_point(rng, d, 2.0));
            let sum = q.plus(&p);
            let lhs = fin(bregman(&sum, &y, &x)?, "B_{q+p}")?;
            let rhs = fin(bregman(&q, &y, &x)?, "B_q")? + fin(bregman(&p, &y, &x)?, "B_p")?;
            Ok(tol * (scale_of(&q, &y, &x)? + scale_of(&p, &y, &x)?) - (lhs - rhs).abs())
        })?,
        property("quadratic-closed-form", n, opts, |rng, _| {
            let d = dim(rng);
            let (metric, scale) = (rand_metric(rng, d), rng.gen_range(0.1..3.0));
            let r = Regularizer::Quadratic { center: rand_point(rng, d, 1.0), metric: metric.clone(), scale };
            let (y, x) = (rand_point(rng, d, 2.0), rand_point(rng, d, 2.0));
            let oracle = 0.5 * scale * metric.norm_sq(&y.sub(&x))?;
            let generic = fin(bregman(&r, &y, &x)?, "B_r")?;
            let closed = fin(r.bregman_closed(&y, &x)?, "closed B_r")?;
            Ok(tol * scale_of(&r, &y, &x)? - (generic - oracle).abs().max((closed - oracle).abs()))
        })?,
        property("smoothness-certificate", n, opts, |rng, _| {
            let d = dim(rng);
            let c = rng.gen_range(0.1..3.0);
            let f = match rng.gen_range(0..3) {
                0 => Loss::linear(rand_point(rng, d, 2.0)),
                1 => Loss::new(LossKind::Quadratic { center: rand_point(rng, d, 1.0), weights: Some(rand_weights(rng, d)) }),
                _ => Loss::new(LossKind::SineQuadratic { dim: d }),
            }
            .scaled(c);
            let (y, x) = (rand_point(rng, d, 3.0), rand_point(rng, d, 3.0));
            let l = f.smoothness().ok_or_else(|| Error::MissingCertificate("smoothness".into()))?;
            let slack = 0.5 * l * y.sub(&x).norm_sq() + tol * scale_of(&f, &y, &x)? - f.bregman(&y, &x)?.abs();
            let certified = verify_smoothness(&f, &[(y, x)]);
            Ok(if certified == (slack >= 0.0) { slack } else { -1.0 })
        })?,
        property("strong-convexity-certificate", n, opts, |rng, _| {
            let d = dim(rng);
            let f = Loss::new(LossKind::Quadratic { center: rand_point(rng, d, 1.0), weights: Some(rand_weights(rng, d)) })
                .scaled(rng.gen_range(0.1..3.0));
            let mu = f.strong_convexity().expect("quadratic").min_eigenvalue();
            let r = Regularizer::half_sq_norm(d, mu);
            let (y, x) = (rand_point(rng, d, 3.0), rand_point(rng, d, 3.0));
            let slack = f.bregman(&y, &x)? - 0.5 * mu * y.sub(&x).norm_sq() + tol * scale_of(&f, &y, &x)?;
            Ok(slack.min(bool_slack(verify_strong_convexity(&f, &r, &[(y, x)]))))
        })?,
    ])
}

// ---------------------------------------------------------------- solvers

const SOLVER_TOL: f64 = 1e-6;

fn rand_box(rng: &mut impl Rng, d: usize) -> (Point, Point) {
    let lo: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..0.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.gen_range(0.1..3.0)).collect();
    (Point::new(lo).expect("finite"), Point::new(hi).expect("finite"))
}

fn max_abs_diff(a: &Point, b: &Point) -> f64 {
    a.sub(b).norm_inf()
}

fn solvers_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let n = opts.solver_instances;
    let so = SolverOptions::default();
    let dim = |rng: &mut ChaCha8Rng| rng.gen_range(1..=6);
    Ok(vec![
        property("diagonal-box-clip", n, opts, |rng, _| {
            let d = dim(rng);
            let (w, center, c) = (rand_weights(rng, d), rand_point(rng, d, 2.0), rand_point(rng, d, 3.0));
            let (lo, hi) = rand_box(rng, d);
            let reg = Regularizer::proximal(center.clone(), QuadMetric::diagonal(w.clone())?);
            let obj = Objective::from_regularizer(c.clone(), &reg, FeasibleSet::Box { lo: lo.clone(), hi: hi.clone() })?;
            let x = argmin_numeric(&obj, &so)?.x;
            let oracle = Point::new((0..d).map(|j| (center[j] - c[j] / w[j]).clamp(lo[j], hi[j])).collect())?;
            Ok(SOLVER_TOL - max_abs_diff(&x, &oracle))
        })?,
        property("isotropic-ball-radial", n, opts, |rng, _| {
            let d = dim(rng);
            let gamma = rng.gen_range(0.1..3.0);
            let (center, c, c0) = (rand_point(rng, d, 2.0), rand_point(rng, d, 3.0), rand_point(rng, d, 1.0));
            let radius = rng.gen_range(0.1..2.0);
            let reg = Regularizer::proximal(center.clone(), QuadMetric::scaled_identity(gamma)?);
            let obj = Objective::from_regularizer(c.clone(), &reg, FeasibleSet::Ball { center: c0.clone(), radius })?;
            let x = argmin_numeric(&obj, &so)?.x;
            let y = center.axpy(-1.0 / gamma, &c);
            let off = y.sub(&c0);
            let oracle = c0.axpy((radius / off.norm()).min(1.0), &off);
            Ok(SOLVER_TOL - max_abs_diff(&x, &oracle))
        })?,
        property("l1-soft-threshold", n, opts, |rng, _| {
            let d = dim(rng);
            let (w, c) = (rand_weights(rng, d), rand_point(rng, d, 3.0));
            let alpha = rng.gen_range(0.0..2.0);
            let set = if rng.gen_bool(0.5) {
                FeasibleSet::unconstrained(d)
            } else {
                let (lo, hi) = rand_box(rng, d);
                FeasibleSet::Box { lo, hi }
            };
            let metric = QuadMetric::diagonal(w.clone())?;
            let reg = Regularizer::sum([Regularizer::proximal(Point::zeros(d), metric.clone()), Regularizer::L1 { alpha }]);
            let x = argmin_numeric(&Objective::from_regularizer(c.clone(), &reg, set.clone())?, &so)?.x;
            let shrunk: Vec<f64> = (0..d).map(|j| -c[j].signum() * (c[j].abs() - alpha).max(0.0) / w[j]).collect();
            let oracle = set.project(&Point::new(shrunk)?)?;
            let fast = argmin_l1_composite(&c, &metric, alpha, &set)?;
            Ok(SOLVER_TOL - max_abs_diff(&x, &oracle).max(max_abs_diff(&fast, &oracle)))
        })?,
        property("simplex-projection-grid", n, opts, |rng, _| {
            // grid of spacing h on the 3-simplex; the grid point nearest to y lies within
            // sqrt(2 ‖y - p‖ h √d + d h²) of the projection p
            const D: usize = 3;
            const STEPS: usize = 100;
            let h = 1.0 / STEPS as f64;
            let y = rand_point(rng, D, 1.5);
            let p = project_simplex(&y, 1.0);
            let on_simplex = p.iter().all(|v| *v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
            let mut best = (f64::INFINITY, Point::zeros(D));
            for i in 0..=STEPS {
                for j in 0..=STEPS - i {
                    let z = Point::new(vec![i as f64 * h, j as f64 * h, (STEPS - i - j) as f64 * h])?;
                    let dist = y.sub(&z).norm();
                    if dist < best.0 {
                        best = (dist, z);
                    }
                }
            }
            let dp = y.sub(&p).norm();
            let radius = (2.0 * dp * h * (D as f64).sqrt() + D as f64 * h * h).sqrt();
            let slack = (radius - best.1.sub(&p).norm()).min(best.0 - dp + 1e-12);
            Ok(if on_simplex { slack } else { -1.0 })
        })?,
    ])
}

// ---------------------------------------------------------------- decomposition

/// Number of distinct learner / loss / set combinations cycled through by [`variant_config`].
pub const VARIANTS: usize = 20;

/// Randomized run `i`: variant `i mod VARIANTS` with parameters drawn from `rng`.
/// Covers FTRL, MD, optimistic, composite and implicit learners on convex,
/// star-convex and non-convex losses.
pub fn variant_config(i: usize, rng: &mut impl Rng) -> ExperimentConfig {
    let d = rng.gen_range(1..=4);
    let horizon = rng.gen_range(20..=60);
    let r = rng.gen_range(0.5..2.0);
    let eta = rng.gen_range(0.05..1.0);
    let gamma0 = if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(0.1..2.0) };
    let ball = FeasibleSet::ball(d, r);
    let cube = FeasibleSet::cube(d, -r, r);
    let signs = SequenceSpec::RandomSigns { dim: d, magnitude: rng.gen_range(0.2..2.0) };
    let drift = SequenceSpec::Drifting {
        base: rand_point(rng, d, 1.0),
        amplitude: rng.gen_range(0.0..1.5),
        period: rng.gen_range(3.0..40.0),
        weights: rng.gen_bool(0.5).then(|| rand_weights(rng, d)),
    };
    let sigma = rng.gen_range(0.05..1.0);
    let noisy = |loss: Loss| SequenceSpec::Stochastic { loss, noise: Noise::Gaussian { sigma } };
    let quad = Loss::half_sq_dist(rand_point(rng, d, 1.0));
    let composite = CompositeSpec {
        alpha: rng.gen_range(0.0..0.5),
        decay: if rng.gen_bool(0.5) { Decay::Constant } else { Decay::InvSqrt },
        setting: if rng.gen_bool(0.5) { CompositeSetting::KnownBefore } else { CompositeSetting::RevealedAfter },
    };
    let l = LearnerConfig::new;
    let (name, learner, sequence, set) = match i % VARIANTS {
        0 => ("ogd", l(Preset::Ogd { eta }), signs, ball),
        1 => ("md-ogd", l(Preset::MdOgd { eta }), drift, cube),
        2 => ("da", l(Preset::Da { eta, decay: Decay::InvSqrt }), noisy(quad), FeasibleSet::unconstrained(d)),
        3 => ("adagrad-da", l(Preset::AdagradDa { eta, gamma: 0.1, full: false }), signs, cube),
        4 => ("adagrad-da-full", l(Preset::AdagradDa { eta, gamma: 0.1, full: true }), drift, ball),
        5 => ("ftrl-prox", l(Preset::FtrlProx { eta, full: false }), signs, cube),
        6 => ("ao-ftrl-prox", l(Preset::AoFtrlProx { eta, full: false }), drift, cube),
        7 => ("ao-md", l(Preset::AoMd { eta }), signs, ball),
        8 => ("implicit-md", l(Preset::ImplicitMd { eta: Some(eta) }), drift, FeasibleSet::unconstrained(d)),
        9 => ("nonlin-ftrl", l(Preset::NonlinFtrl { eta: Some(eta) }), drift, ball),
        10 => ("final-attack", l(Preset::FinalAttack { smoothness: 1.0, diameter: None }), drift, ball),
        11 => ("scale-free", l(Preset::ScaleFree { eta }), signs, cube),
        12 => ("strongly-convex-ftrl", l(Preset::StronglyConvex { mu: eta, algorithm: Algorithm::Ftrl, gamma0 }), drift, ball),
        13 => ("strongly-convex-md", l(Preset::StronglyConvex { mu: eta, algorithm: Algorithm::Md, gamma0 }), noisy(quad), cube),
        14 => ("composite-ftrl-prox", l(Preset::FtrlProx { eta, full: false }).with_composite(composite), signs, cube),
        15 => ("composite-md", l(Preset::MdOgd { eta }).with_composite(composite), drift, FeasibleSet::unconstrained(d)),
        16 => ("star-piecewise-sgd", l(Preset::Ogd { eta }), noisy(Loss::new(LossKind::StarPiecewise { dim: d })), cube),
        17 => ("sqrt-abs-sgd", l(Preset::Ogd { eta }), noisy(Loss::new(LossKind::SqrtAbs { dim: d })), cube),
        18 => ("abs-sum-cycle-md", l(Preset::MdOgd { eta }), cycle_abs(rng, d), ball),
        _ => (
            "perfect-hints-ao-ftrl-prox",
            l(Preset::AoFtrlProx { eta, full: false }).with_hints(HintPolicy::Perfect),
            piecewise(rng, d, horizon),
            cube,
        ),
    };
    let mut cfg = ExperimentConfig::new(&format!("variant-{i}-{name}"), learner, sequence, set, horizon);
    cfg.seeds = vec![rng.gen_range(0..1_000_000)];
    // √|x| has an infinite derivative at 0 (where the runs start) towards any other point
    let point = if i % VARIANTS == 17 { Point::zeros(d) } else { cfg.set.sample(rng, 1.0) };
    cfg.comparator = ComparatorPolicy::Explicit { point };
    cfg.bounds = vec![BoundCase::Forward];
    cfg
}

fn cycle_abs(rng: &mut impl Rng, d: usize) -> SequenceSpec {
    let n = rng.gen_range(1..=4);
    SequenceSpec::Cycle { losses: (0..n).map(|_| Loss::new(LossKind::AbsSum { center: rand_point(rng, d, 1.0) })).collect() }
}

fn piecewise(rng: &mut impl Rng, d: usize, horizon: usize) -> SequenceSpec {
    let mut from: Vec<usize> = (0..rng.gen_range(1..=4)).map(|_| rng.gen_range(1..=horizon)).collect();
    from[0] = 1;
    from.sort_unstable();
    from.dedup();
    SequenceSpec::Piecewise { pieces: from.into_iter().map(|from| Piece { from, g: rand_point(rng, d, 1.0) }).collect() }
}

/// One randomized decomposition run: the variant name, the ledger and the forward-bound slack.
pub fn variant_run(i: usize, seed: u64) -> Result<(String, Ledger, f64)> {
    let cfg = variant_config(i, &mut instance_rng(seed, stream_id("variant"), i));
    let out = run_cell(&cfg, cfg.seeds[0])?;
    let slack = out.report.bounds[0].slack;
    Ok((cfg.name, out.ledger, slack))
}

fn decomposition_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let idx: Vec<usize> = (0..opts.runs).collect();
    let runs = par_map(opts.jobs, &idx, |&i| variant_run(i, opts.seed))?;
    let summarize = |name: &str, f: &dyn Fn(&(String, Ledger, f64)) -> f64| -> PropertyResult {
        let mut worst = f64::INFINITY;
        let mut passed = 0;
        let mut first_failure = None;
        for (i, r) in runs.iter().enumerate() {
            match r {
                Ok(run) => {
                    let s = f(run);
                    worst = worst.min(s);
                    if s >= 0.0 {
                        passed += 1;
                    } else {
                        first_failure.get_or_insert_with(|| format!("run {i} ({}): slack {s:.3e}", run.0));
                    }
                }
                Err(e) => {
                    worst = f64::NEG_INFINITY;
                    first_failure.get_or_insert_with(|| format!("run {i}: {e}"));
                }
            }
        }
        PropertyResult {
            name: name.into(),
            instances: runs.len(),
            passed_instances: passed,
            worst_slack: worst,
            first_failure,
            passed: passed == runs.len(),
        }
    };
    Ok(vec![
        summarize("decomposition-residual", &|(_, led, _)| {
            let r = crate::regret::empirical_regret(led, false);
            1e-8 * (1.0 + r.abs()) - crate::regret::decomposition_residual(led)
        }),
        summarize("forward-bound-slack", &|(_, _, slack)| slack + 1e-8),
    ])
}

// ---------------------------------------------------------------- bounds

/// The experiment matched to one standard rate bound: a `d`-dimensional
/// problem on the unit ball, tuned for horizon `horizon`. Stochastic rows use
/// `seeds` seeds, adversarial ones a single seed.
pub fn rate_config(case: RateCase, d: usize, horizon: usize, seeds: usize) -> ExperimentConfig {
    let t = horizon as f64;
    let sigma = 0.3;
    let center = Point::new((0..d).map(|j| 0.5 * ((j as f64 + 1.0).sin())).collect::<Vec<_>>()).expect("finite");
    let center = center.scale(0.5 / center.norm().max(1e-12));
    let stochastic = SequenceSpec::Stochastic { loss: Loss::half_sq_dist(center.clone()), noise: Noise::Gaussian { sigma } };
    // gradient norm ≤ ‖x - c‖ + noise ≤ 1.5 + σ√d
    let g2 = (1.5f64).powi(2) + sigma * sigma * d as f64;
    let eta_so = 1.0 / (g2 * t).sqrt();
    let eta_smooth = 1.0 / (1.0 + sigma * (d as f64 * t).sqrt());
    // μ below the loss modulus (1) leaves room for seed noise; the smooth row
    // adds q_0 so that r_{1:t} - L·I stays positive definite from t = 1
    let strong = |algorithm| Preset::StronglyConvex { mu: 0.5, algorithm, gamma0: 0.0 };
    let (preset, sequence) = match case {
        RateCase::OoFtrl => (Preset::Ogd { eta: 1.0 / t.sqrt() }, signs(d)),
        RateCase::OoMd => (Preset::MdOgd { eta: 1.0 / t.sqrt() }, signs(d)),
        RateCase::OoMdStrong => (
            strong(Algorithm::Md),
            SequenceSpec::Drifting { base: center.clone(), amplitude: 0.3, period: 50.0, weights: None },
        ),
        RateCase::SoFtrl => (Preset::Ogd { eta: eta_so }, stochastic),
        RateCase::SoMd => (Preset::MdOgd { eta: eta_so }, stochastic),
        RateCase::SoMdStrong => (strong(Algorithm::Md), stochastic),
        RateCase::SmoothSoFtrl => (Preset::Ogd { eta: eta_smooth }, stochastic),
        RateCase::SmoothSoMd => (Preset::MdOgd { eta: eta_smooth }, stochastic),
        RateCase::SmoothSoMdStrong => (Preset::StronglyConvex { mu: 0.5, algorithm: Algorithm::Md, gamma0: 2.0 }, stochastic),
    };
    let mut cfg = ExperimentConfig::new(
        &format!("rate-{}", case.name()),
        LearnerConfig::new(preset),
        sequence,
        FeasibleSet::ball(d, 1.0),
        horizon,
    );
    cfg.seeds = if cfg.needs_seed() { (1..=if case.is_stochastic() { seeds } else { 1 } as u64).collect() } else { vec![] };
    cfg.bounds = vec![BoundCase::from_rate_case(case)];
    cfg
}

fn signs(d: usize) -> SequenceSpec {
    SequenceSpec::RandomSigns { dim: d, magnitude: 1.0 / (d as f64).sqrt() }
}

fn bounds_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let mut out = Vec::new();
    for case in RateCase::ALL {
        let cfg = rate_config(case, opts.bound_dim, opts.bound_horizon, opts.bound_seeds);
        let res = run(&cfg, &RunOptions { jobs: opts.jobs, tol: None });
        let (slack, failure) = match res {
            Ok(o) => {
                let b = &o.report.bounds[0];
                let failure = o.report.failures().into_iter().next().map(|e| e.to_string());
                let slack = if failure.is_some() && b.margin >= 0.0 { -1.0 } else { b.margin };
                (slack, failure)
            }
            Err(e) => (f64::NEG_INFINITY, Some(e.to_string())),
        };
        out.push(PropertyResult {
            name: format!("rate-{}", case.name()),
            instances: 1,
            passed_instances: usize::from(slack >= 0.0 && failure.is_none()),
            worst_slack: slack,
            passed: slack >= 0.0 && failure.is_none(),
            first_failure: failure,
        });
    }
    out.push(property("ao-zero-hints-drop-final", 50, opts, |rng, _| {
        let d = rng.gen_range(1..=4);
        let eta = rng.gen_range(0.05..1.0);
        let preset = match rng.gen_range(0..4) {
            0 => Preset::Ogd { eta },
            1 => Preset::Da { eta, decay: Decay::InvSqrt },
            2 => Preset::AdagradDa { eta, gamma: 0.1, full: false },
            _ => Preset::FtrlProx { eta, full: false },
        };
        let mut cfg = ExperimentConfig::new(
            "ao-zero",
            LearnerConfig::new(preset).with_hints(HintPolicy::None),
            SequenceSpec::RandomSigns { dim: d, magnitude: 1.0 },
            FeasibleSet::cube(d, -1.0, 1.0),
            rng.gen_range(10..=60),
        );
        cfg.seeds = vec![rng.gen()];
        cfg.comparator = ComparatorPolicy::Explicit { point: cfg.set.sample(rng, 1.0) };
        let led = run_cell(&cfg, cfg.seeds[0])?.ledger;
        let inputs = BoundInputs::new();
        let ao = bound_ao(&led, &inputs);
        let t2 = bound_rate(&led, &inputs, RateCase::OoFtrl)?;
        let drop = t2.value_drop_final.expect("drop-final variant");
        let q_final = t2.value - drop;
        // dropping a non-negative final term can only lower the bound
        let monotone = q_final < 0.0 || drop <= t2.value;
        let scale = 1.0 + ao.value.abs();
        Ok((1e-12 * scale - (ao.value - drop).abs()).min(bool_slack(monotone)))
    })?);
    Ok(out)
}

// ---------------------------------------------------------------- nonconvex

fn probes(rng: &mut impl Rng, d: usize, n: usize, scale: f64) -> Vec<Point> {
    (0..n).map(|_| rand_point(rng, d, scale)).collect()
}

/// SGD on `loss` over `[-2, 2]^d` with the stochastic FTRL bound, optionally τ-scaled.
pub fn nonconvex_config(name: &str, loss: Loss, tau: Option<f64>, horizon: usize, seeds: usize) -> ExperimentConfig {
    let d = loss.dim();
    let sigma = 0.5;
    let g = loss.lipschitz().unwrap_or(1.0).max(1.0) + sigma * (d as f64).sqrt();
    let r = 2.0 * (d as f64).sqrt();
    let mut cfg = ExperimentConfig::new(
        name,
        LearnerConfig::new(Preset::Ogd { eta: r / (g * (horizon as f64).sqrt()) }),
        SequenceSpec::Stochastic { loss, noise: Noise::Gaussian { sigma } },
        FeasibleSet::cube(d, -2.0, 2.0),
        horizon,
    );
    cfg.seeds = (1..=seeds as u64).collect();
    cfg.comparator = ComparatorPolicy::Explicit { point: Point::zeros(d) };
    cfg.bounds = vec![BoundCase::SoFtrl];
    cfg.inputs.tau = tau;
    cfg
}

/// `∏ |x_i|^{3/4}` over `d ≥ 2` coordinates: non-convex, star-convex at 0 with
/// `B_f(0, x) = (3d/4 - 1) f(x) > 0`, so SGD regret stays strictly below its bound.
pub fn star_convex_test_loss(d: usize) -> Loss {
    Loss::new(LossKind::ProductPower { powers: vec![0.75; d.max(2)] })
}

fn run_margin(cfg: &ExperimentConfig, opts: &VerifyOptions) -> Result<f64> {
    let o = run(cfg, &RunOptions { jobs: opts.jobs, tol: None })?;
    if let Some(e) = o.report.failures().into_iter().next() {
        return Err(e);
    }
    Ok(o.report.bounds[0].margin)
}

fn nonconvex_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let n = (opts.instances / 10).max(1);
    let tol = opts.tol;
    // star-convex (τ = 1) kinds; √|x| is only ½-star-convex
    let star_loss = |rng: &mut ChaCha8Rng, d: usize, with_sqrt: bool| match rng.gen_range(0..if with_sqrt { 3 } else { 2 }) {
        0 => Loss::new(LossKind::StarPiecewise { dim: d }),
        1 => Loss::new(LossKind::ProductPower { powers: (0..d).map(|_| rng.gen_range(1.0..2.0)).collect() }),
        _ => Loss::new(LossKind::SqrtAbs { dim: d }),
    };
    let mut out = vec![
        property("star-convexity-certificates", n, opts, |rng, _| {
            let d = rng.gen_range(1..=3);
            let f = star_loss(rng, d, false).scaled(rng.gen_range(0.1..3.0));
            let c = f.star_center().expect("star center");
            Ok(bool_slack(verify_star_convex(&f, &c, &probes(rng, d, 20, 3.0))))
        })?,
        property("tau-certificates", n, opts, |rng, _| {
            let d = rng.gen_range(1..=3);
            let f = star_loss(rng, d, true).scaled(rng.gen_range(0.1..3.0));
            let claimed = f.tau().ok_or_else(|| Error::MissingCertificate("τ".into()))?;
            let est = estimate_tau(&f, &f.star_center().expect("star center"), &probes(rng, d, 20, 3.0));
            Ok(est - claimed + tol)
        })?,
        property("pl-with-certified-tau", n, opts, |rng, _| {
            // ½‖·‖²-star-strongly-convex test functions: quadratics with weights ≥ 1
            let d = rng.gen_range(1..=3);
            let w: Vec<f64> = (0..d).map(|_| rng.gen_range(1.0..3.0)).collect();
            let f = Loss::new(LossKind::Quadratic { center: rand_point(rng, d, 1.0), weights: Some(w) });
            let c = f.star_center().expect("minimizer");
            let pts = probes(rng, d, 20, 3.0);
            let tau = verify_tau_star_strong(&f, &Regularizer::half_sq_norm(d, 1.0), &c, &pts);
            Ok(bool_slack(tau > 0.0 && check_pl(&f, tau, &pts)))
        })?,
    ];
    let horizon = opts.bound_horizon.min(1000);
    let seeds = opts.bound_seeds;
    let d = opts.bound_dim.min(4);
    for (name, cfg) in [
        ("star-convex-sgd-bound", nonconvex_config("product-power", star_convex_test_loss(d), None, horizon, seeds)),
        ("sqrt-abs-tau-scaled-bound", nonconvex_config("sqrt-abs", Loss::new(LossKind::SqrtAbs { dim: 1 }), Some(0.5), horizon, seeds)),
    ] {
        let (slack, failure) = match run_margin(&cfg, opts) {
            Ok(m) => (m, None),
            Err(e) => (f64::NEG_INFINITY, Some(e.to_string())),
        };
        out.push(PropertyResult {
            name: name.into(),
            instances: cfg.seed_list().len(),
            passed_instances: if slack >= 0.0 { cfg.seed_list().len() } else { 0 },
            worst_slack: slack,
            passed: slack >= 0.0,
            first_failure: failure,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------- lemmas

fn rand_sequence(rng: &mut impl Rng) -> Vec<f64> {
    let n = rng.gen_range(1..=50);
    let mut a: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..10.0f64).powi(2) })
        .collect();
    a[0] = rng.gen_range(1e-3..10.0);
    a
}

fn lemmas_suite(opts: &VerifyOptions) -> Result<Vec<PropertyResult>> {
    let n = opts.instances;
    let tol = opts.tol;
    Ok(vec![
        property("sum-sqrt", n, opts, |rng, _| {
            let (lhs, rhs) = sum_sqrt_check(&rand_sequence(rng))?;
            Ok(rhs - lhs + tol * rhs)
        })?,
        property("sum-sqrt-homogeneity", n, opts, |rng, _| {
            let a = rand_sequence(rng);
            let c = rng.gen_range(0.01..100.0f64);
            let (l1, r1) = sum_sqrt_check(&a)?;
            let (l2, r2) = sum_sqrt_check(&a.iter().map(|v| c * v).collect::<Vec<_>>())?;
            let s = c.sqrt();
            Ok(tol * s * r1 - (l2 - s * l1).abs().max((r2 - s * r1).abs()))
        })?,
        property("sum-sqrt-examples", 1, opts, |_, _| {
            let (lhs, rhs) = sum_sqrt_check(&[1.0; 4])?;
            let expect = 1.0 + 0.5f64.sqrt() + (1.0f64 / 3.0).sqrt() + 0.5;
            let (l1, r1) = sum_sqrt_check(&[1.0])?;
            Ok(tol - (lhs - expect).abs().max((rhs - 4.0).abs()).max((l1 - 1.0).abs()).max((r1 - 2.0).abs()))
        })?,
    ])
}

/// Seed-mean of `f` over a report's cells, with its standard error.
pub fn cell_mean_se(report: &super::RunReport, f: impl Fn(&super::CellReport) -> f64) -> (f64, f64) {
    mean_se(&report.cells.iter().map(f).collect::<Vec<_>>())
}
