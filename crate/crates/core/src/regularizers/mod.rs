//! Regularizer algebra and adaptive schedules.
//!
//! A [`Regularizer`] is an immutable term such as `p_t`, `q_t` or `ψ_t`. Sums
//! of many terms (the cumulative `r_{1:t}` or `p_{1:t} + q_{0:t}`) are kept in
//! the canonical [`Collapsed`] form `½xᵀAx + ⟨b, x⟩ + c + α‖x‖₁ + ι_𝓧 + Σ φ_i`,
//! which the solvers consume directly and whose Bregman divergence is
//! evaluated without cancellation.

mod schedules;

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{DirDiff, ExtReal, Point, QuadMetric};
use crate::solvers::FeasibleSet;

pub use schedules::*;

/// A smooth (possibly non-quadratic) term carried inside a regularizer, such as
/// a loss passed unlinearized or the loss divergence `B_ℓ(·, x_t)`.
pub trait SmoothTerm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Point;
    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        Ok(ExtReal::finite(self.gradient(x).dot(z)))
    }
    /// Upper bound on the gradient Lipschitz constant (Euclidean).
    fn smoothness(&self) -> f64;
    /// Euclidean strong-convexity modulus; 0 when merely convex.
    fn strong_convexity(&self) -> f64 {
        0.0
    }
    fn is_convex(&self) -> bool;
}

#[derive(Clone)]
pub enum Regularizer {
    /// `(scale / 2) ‖x - center‖²_metric`
    Quadratic { center: Point, metric: QuadMetric, scale: f64 },
    /// `⟨v, x⟩ + w`
    Linear { v: Point, w: f64 },
    /// `α ‖x‖₁`
    L1 { alpha: f64 },
    Indicatrix(FeasibleSet),
    Sum(Vec<Regularizer>),
    Function(Arc<dyn SmoothTerm>),
}

impl fmt::Debug for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regularizer::Quadratic { center, metric, scale } => {
                write!(f, "Quadratic(scale={scale}, metric={metric:?}, center={center:?})")
            }
            Regularizer::Linear { v, w } => write!(f, "Linear({v:?}, {w})"),
            Regularizer::L1 { alpha } => write!(f, "L1({alpha})"),
            Regularizer::Indicatrix(s) => write!(f, "Indicatrix({s:?})"),
            Regularizer::Sum(v) => f.debug_list().entries(v).finish(),
            Regularizer::Function(t) => write!(f, "Function({t:?})"),
        }
    }
}

impl Default for Regularizer {
    fn default() -> Self {
        Regularizer::zero()
    }
}

impl Regularizer {
    pub fn zero() -> Self {
        Regularizer::Sum(Vec::new())
    }

    /// `(weight / 2) ‖x‖²₂` in dimension `d`.
    pub fn half_sq_norm(d: usize, weight: f64) -> Self {
        Regularizer::Quadratic { center: Point::zeros(d), metric: QuadMetric::ScaledIdentity(weight), scale: 1.0 }
    }

    /// `½ ‖x - center‖²_metric`
    pub fn proximal(center: Point, metric: QuadMetric) -> Self {
        Regularizer::Quadratic { center, metric, scale: 1.0 }
    }

    pub fn linear(v: Point) -> Self {
        Regularizer::Linear { v, w: 0.0 }
    }

    /// Flattening sum; zero terms are dropped.
    pub fn sum(terms: impl IntoIterator<Item = Regularizer>) -> Self {
        let mut out = Vec::new();
        for t in terms {
            match t {
                Regularizer::Sum(inner) => {
                    if let Regularizer::Sum(flat) = Regularizer::sum(inner) {
                        out.extend(flat);
                    }
                }
                other if other.is_zero() => {}
                other => out.push(other),
            }
        }
        if out.len() == 1 {
            return out.pop().expect("one element");
        }
        Regularizer::Sum(out)
    }

    pub fn plus(&self, other: &Regularizer) -> Regularizer {
        Regularizer::sum([self.clone(), other.clone()])
    }

    /// Structural zero test (no numeric evaluation).
    pub fn is_zero(&self) -> bool {
        match self {
            Regularizer::Quadratic { metric, scale, .. } => *scale == 0.0 || metric.is_zero(),
            Regularizer::Linear { v, w } => v.is_zero() && *w == 0.0,
            Regularizer::L1 { alpha } => *alpha == 0.0,
            Regularizer::Indicatrix(s) => s.is_unconstrained(),
            Regularizer::Sum(v) => v.iter().all(Regularizer::is_zero),
            Regularizer::Function(_) => false,
        }
    }

    /// False when a term carries negative curvature or a non-convex function;
    /// bound calculators treat such regularizers as uncertified.
    pub fn is_certified(&self) -> bool {
        match self {
            Regularizer::Quadratic { scale, .. } => *scale >= 0.0,
            Regularizer::L1 { alpha } => *alpha >= 0.0,
            Regularizer::Sum(v) => v.iter().all(Regularizer::is_certified),
            Regularizer::Function(t) => t.is_convex(),
            _ => true,
        }
    }

    pub fn terms(&self) -> Vec<&Regularizer> {
        match self {
            Regularizer::Sum(v) => v.iter().flat_map(|t| t.terms()).collect(),
            other => vec![other],
        }
    }

    /// Total L1 weight across the (flattened) sum.
    pub fn l1_weight(&self) -> f64 {
        self.terms()
            .iter()
            .map(|t| if let Regularizer::L1 { alpha } = t { *alpha } else { 0.0 })
            .sum()
    }

    pub fn value(&self, x: &Point) -> ExtReal {
        match self {
            Regularizer::Quadratic { center, metric, scale } => {
                let q = metric.norm_sq(&x.sub(center)).expect("regularizer dimension");
                ExtReal::finite(0.5 * scale * q)
            }
            Regularizer::Linear { v, w } => ExtReal::finite(v.dot(x) + w),
            Regularizer::L1 { alpha } => ExtReal::finite(alpha * x.norm_l1()),
            Regularizer::Indicatrix(s) => {
                if s.contains(x) {
                    ExtReal::ZERO
                } else {
                    ExtReal::INFINITY
                }
            }
            Regularizer::Sum(v) => v.iter().fold(ExtReal::ZERO, |acc, t| acc.add(t.value(x))),
            Regularizer::Function(t) => ExtReal::finite(t.value(x)),
        }
    }

    /// `r(x) - q(x)` under the `(+∞) - (+∞) = +∞` convention used to define
    /// `p_t := r_t - q_{t-1}`.
    pub fn difference_value(r: &Regularizer, q: &Regularizer, x: &Point) -> Result<ExtReal> {
        r.value(x).sub_conv(q.value(x))
    }

    /// Closed-form divergence `B_r(y, x)`, evaluated term by term.
    pub fn bregman_closed(&self, y: &Point, x: &Point) -> Result<ExtReal> {
        match self {
            Regularizer::Quadratic { metric, scale, .. } => {
                Ok(ExtReal::finite(0.5 * scale * metric.norm_sq(&y.sub(x))?))
            }
            Regularizer::Linear { .. } => Ok(ExtReal::ZERO),
            Regularizer::L1 { alpha } => Ok(ExtReal::finite(alpha * l1_bregman(y, x))),
            Regularizer::Indicatrix(s) => indicatrix_bregman(s, y, x),
            Regularizer::Sum(v) => {
                let mut acc = ExtReal::ZERO;
                for t in v {
                    acc = acc.add(t.bregman_closed(y, x)?);
                }
                Ok(acc)
            }
            Regularizer::Function(_) => crate::hilbert::bregman(self, y, x),
        }
    }

    pub fn collapse(&self, d: usize) -> Result<Collapsed> {
        let mut c = Collapsed::new(d);
        c.add(self)?;
        Ok(c)
    }
}

/// `‖y‖₁ - ‖x‖₁ - ‖·‖₁'(x; y - x)`, computed per coordinate without cancellation.
fn l1_bregman(y: &Point, x: &Point) -> f64 {
    (0..x.dim())
        .map(|j| if x[j] == 0.0 { 0.0 } else { y[j].abs() - x[j].signum() * y[j] })
        .sum()
}

fn l1_dir_derivative(x: &Point, z: &Point) -> f64 {
    (0..x.dim())
        .map(|j| if x[j] == 0.0 { z[j].abs() } else { x[j].signum() * z[j] })
        .sum()
}

fn indicatrix_dir_derivative(s: &FeasibleSet, x: &Point, z: &Point) -> Result<ExtReal> {
    if !s.contains(x) {
        return Err(Error::OutOfDomain("indicatrix derivative at an infeasible point".into()));
    }
    Ok(if s.is_feasible_direction(x, z) { ExtReal::ZERO } else { ExtReal::INFINITY })
}

fn indicatrix_bregman(s: &FeasibleSet, y: &Point, x: &Point) -> Result<ExtReal> {
    if !s.contains(x) {
        return Err(Error::OutOfDomain("indicatrix divergence anchored at an infeasible point".into()));
    }
    if !s.contains(y) {
        return Ok(ExtReal::INFINITY);
    }
    if !s.is_feasible_direction(x, &y.sub(x)) {
        return Err(Error::InfiniteDerivative("infeasible direction between feasible points".into()));
    }
    Ok(ExtReal::ZERO)
}

impl DirDiff for Regularizer {
    fn value(&self, x: &Point) -> ExtReal {
        Regularizer::value(self, x)
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        match self {
            Regularizer::Quadratic { center, metric, scale } => {
                Ok(ExtReal::finite(scale * metric.apply(&x.sub(center))?.dot(z)))
            }
            Regularizer::Linear { v, .. } => Ok(ExtReal::finite(v.dot(z))),
            Regularizer::L1 { alpha } => Ok(ExtReal::finite(alpha * l1_dir_derivative(x, z))),
            Regularizer::Indicatrix(s) => indicatrix_dir_derivative(s, x, z),
            Regularizer::Sum(v) => {
                let mut acc = ExtReal::ZERO;
                for t in v {
                    acc = acc.add(DirDiff::dir_derivative(t, x, z)?);
                }
                Ok(acc)
            }
            Regularizer::Function(t) => t.dir_derivative(x, z),
        }
    }
}

/// Canonical form of a (possibly long) regularizer sum:
/// `½xᵀAx + ⟨b, x⟩ + c + α‖x‖₁ + Σ ι_{S_k} + Σ φ_i`.
#[derive(Clone, Debug)]
pub struct Collapsed {
    pub(crate) dim: usize,
    pub(crate) hess: QuadMetric,
    pub(crate) lin: Point,
    pub(crate) constant: f64,
    pub(crate) l1: f64,
    pub(crate) sets: Vec<FeasibleSet>,
    pub(crate) functions: Vec<Arc<dyn SmoothTerm>>,
}

impl Collapsed {
    pub fn new(dim: usize) -> Self {
        Collapsed {
            dim,
            hess: QuadMetric::zero(),
            lin: Point::zeros(dim),
            constant: 0.0,
            l1: 0.0,
            sets: Vec::new(),
            functions: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Hessian `A` of the quadratic part.
    pub fn hessian(&self) -> &QuadMetric {
        &self.hess
    }

    pub fn l1_weight(&self) -> f64 {
        self.l1
    }

    pub fn functions(&self) -> &[Arc<dyn SmoothTerm>] {
        &self.functions
    }

    pub fn sets(&self) -> &[FeasibleSet] {
        &self.sets
    }

    pub fn has_functions(&self) -> bool {
        !self.functions.is_empty()
    }

    pub fn add(&mut self, r: &Regularizer) -> Result<()> {
        match r {
            Regularizer::Quadratic { center, metric, scale } => {
                center.check_dim(self.dim)?;
                if *scale == 0.0 || metric.is_zero() {
                    return Ok(());
                }
                let m = metric.scaled(*scale);
                let mc = m.apply(center)?;
                self.hess = self.hess.sum(&m)?;
                self.lin = self.lin.axpy(-1.0, &mc);
                self.constant += 0.5 * mc.dot(center);
            }
            Regularizer::Linear { v, w } => {
                v.check_dim(self.dim)?;
                self.lin = self.lin.add(v);
                self.constant += w;
            }
            Regularizer::L1 { alpha } => self.l1 += alpha,
            Regularizer::Indicatrix(s) => {
                if s.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: s.dim() });
                }
                if !s.is_unconstrained() && !self.sets.contains(s) {
                    self.sets.push(s.clone());
                }
            }
            Regularizer::Sum(v) => {
                for t in v {
                    self.add(t)?;
                }
            }
            Regularizer::Function(t) => {
                if t.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: t.dim() });
                }
                self.functions.push(t.clone());
            }
        }
        Ok(())
    }

    pub fn add_collapsed(&mut self, other: &Collapsed) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        self.hess = self.hess.sum(&other.hess)?;
        self.lin = self.lin.add(&other.lin);
        self.constant += other.constant;
        self.l1 += other.l1;
        for s in &other.sets {
            if !self.sets.contains(s) {
                self.sets.push(s.clone());
            }
        }
        self.functions.extend(other.functions.iter().cloned());
        Ok(())
    }

    pub fn plus(&self, r: &Regularizer) -> Result<Collapsed> {
        let mut c = self.clone();
        c.add(r)?;
        Ok(c)
    }

    /// Value of the differentiable part `½xᵀAx + ⟨b,x⟩ + c + Σφ_i`.
    pub fn smooth_value(&self, x: &Point) -> f64 {
        let q = self.hess.norm_sq(x).expect("collapsed dimension");
        0.5 * q + self.lin.dot(x) + self.constant + self.functions.iter().map(|f| f.value(x)).sum::<f64>()
    }

    pub fn smooth_gradient(&self, x: &Point) -> Point {
        let mut g = self.hess.apply(x).expect("collapsed dimension").add(&self.lin);
        for f in &self.functions {
            g.add_assign(&f.gradient(x));
        }
        g
    }

    pub fn value(&self, x: &Point) -> ExtReal {
        if !self.sets.iter().all(|s| s.contains(x)) {
            return ExtReal::INFINITY;
        }
        ExtReal::finite(self.smooth_value(x) + self.l1 * x.norm_l1())
    }

    /// Guaranteed strong-convexity modulus (Euclidean).
    pub fn curvature(&self) -> f64 {
        self.hess.min_eigenvalue() + self.functions.iter().map(|f| f.strong_convexity()).sum::<f64>()
    }

    pub fn smoothness(&self) -> f64 {
        self.hess.max_eigenvalue().max(0.0) + self.functions.iter().map(|f| f.smoothness()).sum::<f64>()
    }

    pub fn is_certified(&self) -> bool {
        self.hess.min_eigenvalue() >= -crate::hilbert::PSD_CLAMP
            && self.l1 >= 0.0
            && self.functions.iter().all(|f| f.is_convex())
    }

    /// `B(·, x)` as a collapsed function of its first argument, used as the
    /// mirror-descent proximity term. The L1 part becomes `α‖y‖₁ - α⟨sign(x), y⟩`.
    pub fn bregman_at(&self, x: &Point) -> Result<Collapsed> {
        x.check_dim(self.dim)?;
        // at a zero coordinate the L1 divergence vanishes identically, which a uniform
        // L1 weight cannot express
        if self.l1 != 0.0 && x.iter().any(|&v| v == 0.0) {
            return Err(Error::Unsupported("L1 divergence anchored at a point with zero coordinates".into()));
        }
        let ax = self.hess.apply(x)?;
        let sign = x.map(|v| v.signum());
        Ok(Collapsed {
            dim: self.dim,
            hess: self.hess.clone(),
            lin: ax.scale(-1.0).axpy(-self.l1, &sign),
            constant: 0.5 * ax.dot(x),
            l1: self.l1,
            sets: self.sets.clone(),
            functions: self
                .functions
                .iter()
                .map(|f| Arc::new(BregmanTerm { inner: f.clone(), anchor: x.clone() }) as Arc<dyn SmoothTerm>)
                .collect(),
        })
    }

    /// Closed-form `B(y, x)`; the quadratic part is `½(y-x)ᵀA(y-x)`.
    pub fn bregman(&self, y: &Point, x: &Point) -> Result<ExtReal> {
        y.check_dim(self.dim)?;
        x.check_dim(self.dim)?;
        let mut acc = ExtReal::finite(0.5 * self.hess.norm_sq(&y.sub(x))?);
        if self.l1 != 0.0 {
            acc = acc.add_finite(self.l1 * l1_bregman(y, x));
        }
        for s in &self.sets {
            acc = acc.add(indicatrix_bregman(s, y, x)?);
        }
        for f in &self.functions {
            let d = f.dir_derivative(x, &y.sub(x))?;
            let d = d
                .as_finite()
                .ok_or_else(|| Error::InfiniteDerivative("smooth term with infinite derivative".into()))?;
            acc = acc.add_finite(f.value(y) - f.value(x) - d);
        }
        Ok(acc)
    }
}

/// `φ(y) - φ(anchor) - ⟨∇φ(anchor), y - anchor⟩` for a smooth term `φ`.
#[derive(Debug)]
pub struct BregmanTerm {
    pub inner: Arc<dyn SmoothTerm>,
    pub anchor: Point,
}

impl SmoothTerm for BregmanTerm {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, y: &Point) -> f64 {
        let g = self.inner.gradient(&self.anchor);
        self.inner.value(y) - self.inner.value(&self.anchor) - g.dot(&y.sub(&self.anchor))
    }
    fn gradient(&self, y: &Point) -> Point {
        self.inner.gradient(y).sub(&self.inner.gradient(&self.anchor))
    }
    fn smoothness(&self) -> f64 {
        self.inner.smoothness()
    }
    fn strong_convexity(&self) -> f64 {
        self.inner.strong_convexity()
    }
    fn is_convex(&self) -> bool {
        self.inner.is_convex()
    }
}

impl DirDiff for Collapsed {
    fn value(&self, x: &Point) -> ExtReal {
        Collapsed::value(self, x)
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        let mut acc = ExtReal::finite(self.hess.apply(x)?.add(&self.lin).dot(z) + self.l1 * l1_dir_derivative(x, z));
        for s in &self.sets {
            acc = acc.add(indicatrix_dir_derivative(s, x, z)?);
        }
        for f in &self.functions {
            acc = acc.add(f.dir_derivative(x, z)?);
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{bregman, numeric_dir_derivative};

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    fn sample_reg() -> Regularizer {
        Regularizer::sum([
            Regularizer::Quadratic {
                center: p(&[1.0, -1.0]),
                metric: QuadMetric::diagonal(vec![2.0, 0.5]).unwrap(),
                scale: 1.5,
            },
            Regularizer::Linear { v: p(&[0.3, -0.2]), w: 4.0 },
            Regularizer::L1 { alpha: 0.7 },
            Regularizer::half_sq_norm(2, 0.25),
        ])
    }

    #[test]
    fn bregman_at_matches_closed_divergence() {
        let x = p(&[0.5, -0.2]);
        let c = sample_reg().collapse(2).unwrap();
        assert!(c.bregman_at(&p(&[0.5, 0.0])).is_err());
        let b = c.bregman_at(&x).unwrap();
        for y in [p(&[1.0, 2.0]), p(&[-0.3, -0.7]), x.clone()] {
            let want = c.bregman(&y, &x).unwrap().value();
            assert!((b.value(&y).value() - want).abs() < 1e-12, "{y:?}");
        }
    }

    #[test]
    fn sum_flattens() {
        let a = Regularizer::sum([Regularizer::L1 { alpha: 1.0 }, Regularizer::sum([Regularizer::L1 { alpha: 2.0 }])]);
        assert_eq!(a.terms().len(), 2);
        assert_eq!(a.l1_weight(), 3.0);
        assert!(Regularizer::sum([Regularizer::zero(), Regularizer::zero()]).is_zero());
    }

    #[test]
    fn collapsed_matches_term_sum() {
        let r = sample_reg();
        let c = r.collapse(2).unwrap();
        for x in [p(&[0.0, 0.0]), p(&[1.5, -2.0]), p(&[-0.3, 0.7])] {
            let a = r.value(&x).value();
            let b = c.value(&x).value();
            assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
            let z = p(&[0.4, -1.1]);
            let da = DirDiff::dir_derivative(&r, &x, &z).unwrap().value();
            let db = DirDiff::dir_derivative(&c, &x, &z).unwrap().value();
            assert!((da - db).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_bregman_matches_definition() {
        let r = sample_reg();
        let c = r.collapse(2).unwrap();
        let y = p(&[-1.0, 2.0]);
        let x = p(&[0.5, 0.0]);
        let def = bregman(&r, &y, &x).unwrap().value();
        assert!((r.bregman_closed(&y, &x).unwrap().value() - def).abs() < 1e-12);
        assert!((c.bregman(&y, &x).unwrap().value() - def).abs() < 1e-12);
    }

    #[test]
    fn closed_derivatives_match_numeric() {
        let r = sample_reg();
        let x = p(&[0.5, -0.25]);
        let z = p(&[1.0, 2.0]);
        let num = numeric_dir_derivative(|x: &Point| r.value(x).value(), &x, &z).unwrap();
        let exact = DirDiff::dir_derivative(&r, &x, &z).unwrap().value();
        assert!((num.value - exact).abs() <= 1e-4 * exact.abs().max(1.0));
    }

    #[test]
    fn indicatrix_terms() {
        let s = FeasibleSet::cube(2, 0.0, 1.0);
        let r = Regularizer::Indicatrix(s);
        assert!(r.value(&p(&[2.0, 0.0])).is_infinite());
        assert_eq!(r.value(&p(&[0.5, 0.0])).value(), 0.0);
        assert!(DirDiff::dir_derivative(&r, &p(&[1.0, 0.5]), &p(&[1.0, 0.0])).unwrap().is_infinite());
        assert!(r.bregman_closed(&p(&[2.0, 0.0]), &p(&[0.5, 0.5])).unwrap().is_infinite());
        assert_eq!(r.bregman_closed(&p(&[0.0, 0.0]), &p(&[0.5, 0.5])).unwrap().value(), 0.0);
    }

    #[test]
    fn difference_convention() {
        let s = FeasibleSet::cube(1, 0.0, 1.0);
        let r = Regularizer::Indicatrix(s.clone());
        let q = Regularizer::Indicatrix(s);
        let v = Regularizer::difference_value(&r, &q, &p(&[3.0])).unwrap();
        assert!(v.is_infinite());
        let v = Regularizer::difference_value(&r, &q, &p(&[0.5])).unwrap();
        assert_eq!(v.value(), 0.0);
    }

    #[test]
    fn certification_flags_negative_scale() {
        let neg = Regularizer::Quadratic { center: Point::zeros(1), metric: QuadMetric::identity(), scale: -1.0 };
        assert!(!neg.is_certified());
        assert!(sample_reg().is_certified());
    }
}
