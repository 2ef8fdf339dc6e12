//! Loss families, gradient oracles and curvature certificates.
//!
//! Every [`Loss`] exposes its value, a (local) sub-gradient, the closed-form
//! one-sided directional derivative, and curvature metadata. Metadata claims
//! are checked by the probe-based `verify_*` / `estimate_*` routines below
//! before bound calculators consume them.

mod sequence;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{bregman, DirDiff, ExtReal, Point, QuadMetric};
use crate::regularizers::{Regularizer, SmoothTerm};

pub use sequence::*;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    /// `⟨g, x⟩`
    Linear { g: Point },
    /// `½ ‖x - center‖²_W` with diagonal weights `W` (identity when absent).
    Quadratic {
        center: Point,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// `‖x - center‖₁`
    AbsSum { center: Point },
    /// `Σ_i φ(x_i)` with `φ(u) = |u|` for `|u| ≤ 1` and `2|u|` otherwise.
    StarPiecewise { dim: usize },
    /// `Σ_i √|x_i|`
    SqrtAbs { dim: usize },
    /// `∏_i |x_i|^{p_i}`
    ProductPower { powers: Vec<f64> },
    /// `Σ_i x_i² + 3 sin²(x_i)`
    SineQuadratic { dim: usize },
}

/// `scale · f` for a base function `f` from [`LossKind`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Loss {
    #[serde(flatten)]
    pub kind: LossKind,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

fn sgn(u: f64) -> f64 {
    if u > 0.0 {
        1.0
    } else if u < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Loss {
    pub fn new(kind: LossKind) -> Self {
        Loss { kind, scale: 1.0 }
    }

    pub fn linear(g: Point) -> Self {
        Loss::new(LossKind::Linear { g })
    }

    pub fn half_sq_dist(center: Point) -> Self {
        Loss::new(LossKind::Quadratic { center, weights: None })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Loss { kind: self.kind.clone(), scale: self.scale * c }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!("loss scale {} must be positive", self.scale)));
        }
        match &self.kind {
            LossKind::Quadratic { center, weights: Some(w) } => {
                if w.len() != center.dim() {
                    return Err(Error::DimensionMismatch { expected: center.dim(), got: w.len() });
                }
                QuadMetric::diagonal(w.clone()).map(|_| ())
            }
            LossKind::ProductPower { powers } if powers.iter().any(|p| !(p.is_finite() && *p > 0.0)) => {
                Err(Error::InvalidParameter("product powers must be positive".into()))
            }
            LossKind::StarPiecewise { dim } | LossKind::SqrtAbs { dim } | LossKind::SineQuadratic { dim } if *dim == 0 => {
                Err(Error::InvalidParameter("loss dimension 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            LossKind::Linear { g } => g.dim(),
            LossKind::Quadratic { center, .. } | LossKind::AbsSum { center } => center.dim(),
            LossKind::StarPiecewise { dim } | LossKind::SqrtAbs { dim } | LossKind::SineQuadratic { dim } => *dim,
            LossKind::ProductPower { powers } => powers.len(),
        }
    }

    fn metric(&self) -> QuadMetric {
        match &self.kind {
            LossKind::Quadratic { weights: Some(w), .. } => QuadMetric::Diagonal(w.clone()),
            _ => QuadMetric::identity(),
        }
    }

    fn base_value(&self, x: &Point) -> f64 {
        match &self.kind {
            LossKind::Linear { g } => g.dot(x),
            LossKind::Quadratic { center, .. } => 0.5 * self.metric().norm_sq(&x.sub(center)).expect("loss dimension"),
            LossKind::AbsSum { center } => x.sub(center).norm_l1(),
            LossKind::StarPiecewise { .. } => x.iter().map(|&u| if u.abs() <= 1.0 { u.abs() } else { 2.0 * u.abs() }).sum(),
            LossKind::SqrtAbs { .. } => x.iter().map(|u| u.abs().sqrt()).sum(),
            LossKind::ProductPower { powers } => x.iter().zip(powers).map(|(u, p)| u.abs().powf(*p)).product(),
            LossKind::SineQuadratic { .. } => x.iter().map(|&u| u * u + 3.0 * u.sin().powi(2)).sum(),
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        self.scale * self.base_value(x)
    }

    fn base_gradient(&self, x: &Point) -> Point {
        match &self.kind {
            LossKind::Linear { g } => g.clone(),
            LossKind::Quadratic { center, .. } => self.metric().apply(&x.sub(center)).expect("loss dimension"),
            LossKind::AbsSum { center } => x.sub(center).map(sgn),
            LossKind::StarPiecewise { .. } => x.map(|u| if u.abs() <= 1.0 { sgn(u) } else { 2.0 * sgn(u) }),
            LossKind::SqrtAbs { .. } => x.map(|u| if u == 0.0 { 0.0 } else { sgn(u) / (2.0 * u.abs().sqrt()) }),
            LossKind::ProductPower { powers } => {
                if x.iter().any(|&u| u == 0.0) {
                    // f ≥ 0 = f(x): zero is a local sub-gradient
                    return Point::zeros(x.dim());
                }
                let f = self.base_value(x);
                Point::raw(x.iter().zip(powers).map(|(u, p)| f * p / u).collect())
            }
            LossKind::SineQuadratic { .. } => x.map(|u| 2.0 * u + 3.0 * (2.0 * u).sin()),
        }
    }

    /// Gradient, or a local sub-gradient at kinks.
    pub fn gradient(&self, x: &Point) -> Point {
        self.base_gradient(x).scale(self.scale)
    }

    fn base_dir_derivative(&self, x: &Point, z: &Point) -> ExtReal {
        let fin = ExtReal::finite;
        match &self.kind {
            LossKind::Linear { .. } | LossKind::Quadratic { .. } | LossKind::SineQuadratic { .. } => {
                fin(self.base_gradient(x).dot(z))
            }
            LossKind::AbsSum { center } => fin(
                (0..x.dim())
                    .map(|j| {
                        let u = x[j] - center[j];
                        if u == 0.0 { z[j].abs() } else { sgn(u) * z[j] }
                    })
                    .sum(),
            ),
            LossKind::StarPiecewise { .. } => {
                let mut acc = 0.0;
                for j in 0..x.dim() {
                    let (u, w) = (x[j], z[j]);
                    let a = u.abs();
                    acc += if u == 0.0 {
                        w.abs()
                    } else if a < 1.0 {
                        sgn(u) * w
                    } else if a > 1.0 {
                        2.0 * sgn(u) * w
                    } else if sgn(u) * w > 0.0 {
                        // outward at |u| = 1 the function jumps from 1 to 2
                        return ExtReal::INFINITY;
                    } else {
                        sgn(u) * w
                    };
                }
                fin(acc)
            }
            LossKind::SqrtAbs { .. } => {
                let mut acc = 0.0;
                for j in 0..x.dim() {
                    let (u, w) = (x[j], z[j]);
                    if u == 0.0 {
                        if w != 0.0 {
                            return ExtReal::INFINITY;
                        }
                    } else {
                        acc += sgn(u) * w / (2.0 * u.abs().sqrt());
                    }
                }
                fin(acc)
            }
            LossKind::ProductPower { powers } => {
                let zero: Vec<usize> = (0..x.dim()).filter(|&j| x[j] == 0.0).collect();
                if zero.is_empty() {
                    return fin(self.base_gradient(x).dot(z));
                }
                if zero.iter().any(|&j| z[j] == 0.0) {
                    return ExtReal::ZERO;
                }
                // f(x + αz) ≈ C α^{P_Z} with C > 0
                let pz: f64 = zero.iter().map(|&j| powers[j]).sum();
                let c: f64 = (0..x.dim())
                    .map(|j| if x[j] == 0.0 { z[j].abs().powf(powers[j]) } else { x[j].abs().powf(powers[j]) })
                    .product();
                if pz > 1.0 {
                    ExtReal::ZERO
                } else if pz == 1.0 {
                    fin(c)
                } else {
                    ExtReal::INFINITY
                }
            }
        }
    }

    pub fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        z.check_dim(self.dim())?;
        x.check_dim(self.dim())?;
        let d = self.base_dir_derivative(x, z);
        Ok(if d.is_finite() { ExtReal::finite(self.scale * d.value()) } else { d })
    }

    pub fn bregman(&self, y: &Point, x: &Point) -> Result<f64> {
        bregman(self, y, x)?.expect_finite("loss divergence")
    }

    /// Smoothness constant `L` (Euclidean), when the loss is differentiable.
    pub fn smoothness(&self) -> Option<f64> {
        let base = match &self.kind {
            LossKind::Linear { .. } => Some(0.0),
            LossKind::Quadratic { .. } => Some(self.metric().max_eigenvalue()),
            LossKind::SineQuadratic { .. } => Some(8.0),
            _ => None,
        };
        base.map(|l| l * self.scale)
    }

    /// Metric `M` such that `B_f(y, x) ≥ ½ ‖y - x‖²_M`.
    pub fn strong_convexity(&self) -> Option<QuadMetric> {
        match &self.kind {
            LossKind::Quadratic { .. } => Some(self.metric().scaled(self.scale)),
            _ => None,
        }
    }

    /// Claimed global minimizer at which the loss is star-convex.
    pub fn star_center(&self) -> Option<Point> {
        match &self.kind {
            LossKind::Linear { .. } => None,
            LossKind::Quadratic { center, .. } | LossKind::AbsSum { center } => Some(center.clone()),
            _ => Some(Point::zeros(self.dim())),
        }
    }

    /// Claimed τ-star-convexity constant.
    pub fn tau(&self) -> Option<f64> {
        match &self.kind {
            LossKind::SqrtAbs { .. } => Some(0.5),
            LossKind::SineQuadratic { .. } | LossKind::Linear { .. } => None,
            LossKind::ProductPower { powers } if powers.iter().sum::<f64>() < 1.0 => None,
            _ => Some(1.0),
        }
    }

    /// Euclidean Lipschitz bound `G`, when global.
    pub fn lipschitz(&self) -> Option<f64> {
        let d = self.dim() as f64;
        let base = match &self.kind {
            LossKind::Linear { g } => Some(g.norm()),
            LossKind::AbsSum { .. } => Some(d.sqrt()),
            LossKind::StarPiecewise { .. } => Some(2.0 * d.sqrt()),
            _ => None,
        };
        base.map(|g| g * self.scale)
    }

    pub fn is_convex(&self) -> bool {
        matches!(self.kind, LossKind::Linear { .. } | LossKind::Quadratic { .. } | LossKind::AbsSum { .. })
    }

    pub fn is_smooth(&self) -> bool {
        self.smoothness().is_some()
    }

    /// The loss as a regularizer term (quadratic and linear losses collapse exactly).
    pub fn as_regularizer(&self) -> Result<Regularizer> {
        match &self.kind {
            LossKind::Linear { g } => Ok(Regularizer::linear(g.scale(self.scale))),
            LossKind::Quadratic { center, .. } => {
                Ok(Regularizer::Quadratic { center: center.clone(), metric: self.metric(), scale: self.scale })
            }
            LossKind::SineQuadratic { .. } => Ok(Regularizer::Function(Arc::new(LossTerm(self.clone())))),
            _ => Err(Error::Unsupported(format!("non-smooth loss {:?} cannot enter an inner solve", self.kind))),
        }
    }

    /// `ψ = B_ℓ(·, x_t)`, the non-linear remainder of the loss around `x_t`.
    pub fn bregman_regularizer(&self, x_t: &Point) -> Result<Regularizer> {
        match &self.kind {
            LossKind::Linear { .. } => Ok(Regularizer::zero()),
            LossKind::Quadratic { .. } => {
                Ok(Regularizer::Quadratic { center: x_t.clone(), metric: self.metric(), scale: self.scale })
            }
            LossKind::SineQuadratic { .. } => {
                Ok(Regularizer::Function(Arc::new(LossBregmanTerm { loss: self.clone(), anchor: x_t.clone() })))
            }
            _ => Err(Error::Unsupported(format!("non-smooth loss {:?} cannot enter an inner solve", self.kind))),
        }
    }
}

impl DirDiff for Loss {
    fn value(&self, x: &Point) -> ExtReal {
        ExtReal::finite(Loss::value(self, x))
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        Loss::dir_derivative(self, x, z)
    }
}

/// A smooth loss carried unlinearized inside a regularizer.
#[derive(Debug)]
pub struct LossTerm(pub Loss);

impl SmoothTerm for LossTerm {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &Point) -> f64 {
        self.0.value(x)
    }
    fn gradient(&self, x: &Point) -> Point {
        self.0.gradient(x)
    }
    fn smoothness(&self) -> f64 {
        self.0.smoothness().unwrap_or(f64::INFINITY)
    }
    fn strong_convexity(&self) -> f64 {
        self.0.strong_convexity().map(|m| m.min_eigenvalue()).unwrap_or(0.0)
    }
    fn is_convex(&self) -> bool {
        self.0.is_convex()
    }
}

/// `B_ℓ(x, anchor) = ℓ(x) - ℓ(anchor) - ⟨∇ℓ(anchor), x - anchor⟩`.
#[derive(Debug)]
pub struct LossBregmanTerm {
    pub loss: Loss,
    pub anchor: Point,
}

impl SmoothTerm for LossBregmanTerm {
    fn dim(&self) -> usize {
        self.loss.dim()
    }
    fn value(&self, x: &Point) -> f64 {
        let g = self.loss.gradient(&self.anchor);
        self.loss.value(x) - self.loss.value(&self.anchor) - g.dot(&x.sub(&self.anchor))
    }
    fn gradient(&self, x: &Point) -> Point {
        self.loss.gradient(x).sub(&self.loss.gradient(&self.anchor))
    }
    fn smoothness(&self) -> f64 {
        self.loss.smoothness().unwrap_or(f64::INFINITY)
    }
    fn strong_convexity(&self) -> f64 {
        self.loss.strong_convexity().map(|m| m.min_eigenvalue()).unwrap_or(0.0)
    }
    fn is_convex(&self) -> bool {
        self.loss.is_convex()
    }
}

const CERT_TOL: f64 = 1e-9;

/// Star-convexity at `x*` on the probes: `x*` minimizes `f` over the probes
/// and `B_f(x*, x) ≥ -1e-9` everywhere.
pub fn verify_star_convex(f: &Loss, x_star: &Point, probes: &[Point]) -> bool {
    let f_star = f.value(x_star);
    probes.iter().all(|x| {
        f.value(x) >= f_star - CERT_TOL
            && matches!(bregman(f, x_star, x), Ok(b) if b.is_finite() && b.value() >= -CERT_TOL)
    })
}

fn tau_ratio(f: &Loss, r: Option<&Regularizer>, x_star: &Point, x: &Point) -> Option<f64> {
    let gap = f.value(x) - f.value(x_star);
    if gap <= 0.0 || x == x_star {
        return None;
    }
    let d = match f.dir_derivative(x, &x_star.sub(x)) {
        Ok(d) if d.is_finite() => d.value(),
        _ => return Some(f64::NEG_INFINITY),
    };
    let br = match r {
        Some(r) => match r.bregman_closed(x_star, x) {
            Ok(b) if b.is_finite() => b.value(),
            _ => return Some(f64::NEG_INFINITY),
        },
        None => 0.0,
    };
    Some((-d - br) / gap)
}

fn certify_tau(f: &Loss, r: Option<&Regularizer>, x_star: &Point, probes: &[Point]) -> f64 {
    let tau = probes
        .iter()
        .filter_map(|x| tau_ratio(f, r, x_star, x))
        .fold(f64::INFINITY, f64::min);
    if tau.is_finite() && tau > 0.0 {
        tau
    } else {
        0.0
    }
}

/// Largest `τ` with `τ (f(x) - f(x*)) ≤ -f'(x; x* - x)` on the probes; 0 if none.
pub fn estimate_tau(f: &Loss, x_star: &Point, probes: &[Point]) -> f64 {
    certify_tau(f, None, x_star, probes)
}

/// As [`estimate_tau`] with the `B_r(x*, x)` correction of star-strong convexity.
pub fn verify_tau_star_strong(f: &Loss, r: &Regularizer, x_star: &Point, probes: &[Point]) -> f64 {
    certify_tau(f, Some(r), x_star, probes)
}

/// `μ (f(x) - f*) ≤ ½ ‖∇f(x)‖²` on the probes, with `f*` the value at the
/// claimed minimizer (or the probe minimum when none is claimed).
pub fn check_pl(f: &Loss, mu: f64, probes: &[Point]) -> bool {
    let f_star = match f.star_center() {
        Some(c) => f.value(&c),
        None => probes.iter().map(|x| f.value(x)).fold(f64::INFINITY, f64::min),
    };
    probes
        .iter()
        .all(|x| mu * (f.value(x) - f_star) <= 0.5 * f.gradient(x).norm_sq() + CERT_TOL)
}

/// Smoothness certificate: `|B_f(x, y)| ≤ (L/2)‖x - y‖²` on probe pairs.
pub fn verify_smoothness(f: &Loss, pairs: &[(Point, Point)]) -> bool {
    let Some(l) = f.smoothness() else { return false };
    pairs.iter().all(|(x, y)| match f.bregman(x, y) {
        Ok(b) => b.abs() <= 0.5 * l * x.sub(y).norm_sq() + CERT_TOL,
        Err(_) => false,
    })
}

/// Strong-convexity certificate w.r.t. a regularizer: `B_f(x, y) ≥ B_r(x, y)`.
pub fn verify_strong_convexity(f: &Loss, r: &Regularizer, pairs: &[(Point, Point)]) -> bool {
    pairs.iter().all(|(x, y)| match (f.bregman(x, y), r.bregman_closed(x, y)) {
        (Ok(bf), Ok(br)) => br.is_finite() && bf >= br.value() - CERT_TOL,
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::numeric_dir_derivative;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    fn grid_1d() -> Vec<Point> {
        (-40..=40).filter(|&i| i != 0).map(|i| p(&[i as f64 * 0.05])).collect()
    }

    fn random_probes(d: usize, n: usize, scale: f64, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| Point::raw((0..d).map(|_| rng.gen_range(-scale..scale)).collect())).collect()
    }

    #[test]
    fn star_convexity_examples() {
        let star = Loss::new(LossKind::StarPiecewise { dim: 1 });
        let mut probes = grid_1d();
        probes.push(p(&[1.0]));
        probes.push(p(&[-1.0]));
        assert!(verify_star_convex(&star, &p(&[0.0]), &probes));
        let sqrt = Loss::new(LossKind::SqrtAbs { dim: 1 });
        assert!(!verify_star_convex(&sqrt, &p(&[0.0]), &grid_1d()));
        let prod = Loss::new(LossKind::ProductPower { powers: vec![0.5, 0.7] });
        let mut probes = random_probes(2, 500, 2.0, 1);
        probes.push(p(&[0.0, 1.0]));
        assert!(verify_star_convex(&prod, &Point::zeros(2), &probes));
    }

    #[test]
    fn tau_examples() {
        let q = Loss::half_sq_dist(p(&[0.0]));
        assert!((estimate_tau(&q, &p(&[0.0]), &grid_1d()) - 2.0).abs() < 1e-12);
        let star = Loss::new(LossKind::StarPiecewise { dim: 1 });
        assert!(estimate_tau(&star, &p(&[0.0]), &grid_1d()) >= 1.0 - 1e-12);
        let sqrt = Loss::new(LossKind::SqrtAbs { dim: 1 });
        assert!((estimate_tau(&sqrt, &p(&[0.0]), &grid_1d()) - 0.5).abs() < 1e-12);
        let r = Regularizer::half_sq_norm(1, 1.0);
        assert!((verify_tau_star_strong(&q, &r, &p(&[0.0]), &grid_1d()) - 1.0).abs() < 1e-12);
        assert_eq!(
            verify_tau_star_strong(&q, &Regularizer::zero(), &p(&[0.0]), &grid_1d()),
            estimate_tau(&q, &p(&[0.0]), &grid_1d())
        );
    }

    #[test]
    fn pl_examples() {
        let q = Loss::half_sq_dist(p(&[0.0]));
        assert!(check_pl(&q, 1.0, &grid_1d()));
        assert!(!check_pl(&q, 1.5, &grid_1d()));
        let sine = Loss::new(LossKind::SineQuadratic { dim: 2 });
        let probes = random_probes(2, 2000, 6.0, 9);
        let tau = verify_tau_star_strong(&sine, &Regularizer::half_sq_norm(2, 1.0), &Point::zeros(2), &probes);
        assert!(tau > 0.0);
        assert!(check_pl(&sine, tau, &probes));
    }

    #[test]
    fn closed_derivatives_match_numeric() {
        let losses = [
            Loss::linear(p(&[1.0, -2.0])),
            Loss::new(LossKind::Quadratic { center: p(&[0.5, 1.0]), weights: Some(vec![2.0, 3.0]) }),
            Loss::new(LossKind::AbsSum { center: p(&[0.1, 0.2]) }),
            Loss::new(LossKind::StarPiecewise { dim: 2 }),
            Loss::new(LossKind::SqrtAbs { dim: 2 }),
            Loss::new(LossKind::ProductPower { powers: vec![0.6, 0.9] }),
            Loss::new(LossKind::SineQuadratic { dim: 2 }).scaled(3.0),
        ];
        let x = p(&[0.37, -0.61]);
        let z = p(&[0.8, 0.3]);
        for f in &losses {
            let num = numeric_dir_derivative(|x: &Point| f.value(x), &x, &z).unwrap();
            let exact = f.dir_derivative(&x, &z).unwrap().value();
            assert!((num.value - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{f:?}: {} vs {exact}", num.value);
        }
    }

    #[test]
    fn kink_derivatives() {
        let star = Loss::new(LossKind::StarPiecewise { dim: 1 });
        assert!(star.dir_derivative(&p(&[1.0]), &p(&[1.0])).unwrap().is_infinite());
        assert_eq!(star.dir_derivative(&p(&[1.0]), &p(&[-1.0])).unwrap().value(), -1.0);
        assert_eq!(star.gradient(&p(&[1.0])), p(&[1.0]));
        let sqrt = Loss::new(LossKind::SqrtAbs { dim: 1 });
        assert!(sqrt.dir_derivative(&p(&[0.0]), &p(&[1.0])).unwrap().is_infinite());
        let prod = Loss::new(LossKind::ProductPower { powers: vec![1.0, 2.0] });
        assert_eq!(prod.dir_derivative(&p(&[0.0, 2.0]), &p(&[1.0, 0.0])).unwrap().value(), 4.0);
        let prod = Loss::new(LossKind::ProductPower { powers: vec![0.5, 2.0] });
        assert!(prod.dir_derivative(&p(&[0.0, 2.0]), &p(&[1.0, 0.0])).unwrap().is_infinite());
        let prod = Loss::new(LossKind::ProductPower { powers: vec![1.5, 2.0] });
        assert_eq!(prod.dir_derivative(&p(&[0.0, 2.0]), &p(&[1.0, 0.0])).unwrap().value(), 0.0);
    }

    #[test]
    fn smoothness_and_strong_convexity_certificates() {
        let pairs: Vec<(Point, Point)> = random_probes(2, 400, 3.0, 4).chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect();
        let q = Loss::new(LossKind::Quadratic { center: p(&[0.5, 1.0]), weights: Some(vec![2.0, 3.0]) });
        assert!(verify_smoothness(&q, &pairs));
        assert!(verify_smoothness(&Loss::new(LossKind::SineQuadratic { dim: 2 }), &pairs));
        let r = Regularizer::half_sq_norm(2, 2.0);
        assert!(verify_strong_convexity(&q, &r, &pairs));
        assert!(!verify_strong_convexity(&q, &Regularizer::half_sq_norm(2, 2.5), &pairs));
    }

    #[test]
    fn bregman_regularizer_matches_loss_divergence() {
        let x_t = p(&[0.3, -0.4]);
        let y = p(&[1.2, 0.9]);
        for f in [Loss::half_sq_dist(p(&[1.0, 2.0])).scaled(2.0), Loss::new(LossKind::SineQuadratic { dim: 2 })] {
            let psi = f.bregman_regularizer(&x_t).unwrap();
            assert!((psi.value(&y).value() - f.bregman(&y, &x_t).unwrap()).abs() < 1e-12);
            assert!(psi.value(&x_t).value().abs() < 1e-12);
        }
    }

    #[test]
    fn serde_round_trip() {
        let f = Loss::new(LossKind::ProductPower { powers: vec![0.5, 0.5] }).scaled(2.0);
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(serde_json::from_str::<Loss>(&s).unwrap(), f);
        let g: Loss = serde_json::from_str(r#"{"kind":"linear","g":[1.0,2.0]}"#).unwrap();
        assert_eq!(g.scale, 1.0);
    }
}
