//! Finite-dimensional Hilbert-space primitives.
//!
//! Points live in ℝ^d with the standard inner product. Functions are
//! extended-real valued (`+∞` outside their effective domain) and expose
//! closed-form one-sided directional derivatives, from which the generalized
//! Bregman divergence `B_f(y, x) = f(y) - f(x) - f'(x; y - x)` is built. No
//! differentiability or convexity is assumed by the divergence itself.

use std::fmt;
use std::ops::Index;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalues of a full metric above this negative threshold are clamped to 0.
pub const PSD_CLAMP: f64 = 1e-10;

/// A dense point of ℝ^d with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Point{:?}", self.0)
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Point(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Point::new(coords.to_vec())
    }

    /// Builds a point from coordinates produced by arithmetic on finite points.
    pub(crate) fn raw(coords: Vec<f64>) -> Self {
        debug_assert!(coords.iter().all(|v| v.is_finite()), "non-finite coordinates {coords:?}");
        Point(coords)
    }

    pub fn zeros(d: usize) -> Self {
        Point(vec![0.0; d])
    }

    pub fn filled(d: usize, v: f64) -> Self {
        Point::raw(vec![v; d])
    }

    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Point(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.dim() });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Point {
        Point::raw(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Point, f: impl Fn(f64, f64) -> f64) -> Point {
        debug_assert_eq!(self.dim(), other.dim());
        Point::raw(self.0.iter().zip(&other.0).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn add(&self, other: &Point) -> Point {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Point) -> Point {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Point {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn axpy(&self, c: f64, other: &Point) -> Point {
        self.zip_map(other, |a, b| a + c * b)
    }

    pub fn add_assign(&mut self, other: &Point) {
        debug_assert_eq!(self.dim(), other.dim());
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    pub(crate) fn from_dvector(v: &DVector<f64>) -> Point {
        Point::raw(v.iter().copied().collect())
    }
}

/// Standard inner product; errors on dimension mismatch.
pub fn dot(x: &Point, y: &Point) -> Result<f64> {
    y.check_dim(x.dim())?;
    Ok(x.dot(y))
}

/// Element of ℝ ∪ {+∞}.
///
/// `-∞` never appears in a stored value; operations that would produce it
/// return [`Error::UndefinedArithmetic`].
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ExtReal(f64);

impl fmt::Debug for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_finite() {
            write!(f, "{}", self.0)
        } else {
            write!(f, "+inf")
        }
    }
}

impl ExtReal {
    pub const INFINITY: ExtReal = ExtReal(f64::INFINITY);
    pub const ZERO: ExtReal = ExtReal(0.0);

    /// Panics on NaN or `-∞`; use [`ExtReal::try_new`] for untrusted input.
    pub fn finite(v: f64) -> Self {
        assert!(v.is_finite(), "ExtReal::finite called with {v}");
        ExtReal(v)
    }

    pub fn try_new(v: f64) -> Result<Self> {
        if v.is_nan() || v == f64::NEG_INFINITY {
            return Err(Error::UndefinedArithmetic(format!("{v} is not in ℝ ∪ {{+∞}}")));
        }
        Ok(ExtReal(v))
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_infinite(self) -> bool {
        !self.0.is_finite()
    }

    /// Raw value; `f64::INFINITY` for `+∞`.
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn as_finite(self) -> Option<f64> {
        self.is_finite().then_some(self.0)
    }

    pub fn expect_finite(self, what: &str) -> Result<f64> {
        self.as_finite().ok_or_else(|| Error::OutOfDomain(format!("{what} is +inf")))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: ExtReal) -> ExtReal {
        ExtReal(self.0 + other.0)
    }

    pub fn add_finite(self, v: f64) -> ExtReal {
        ExtReal(self.0 + v)
    }

    /// `self - other` under the convention `(+∞) - (+∞) = +∞`.
    ///
    /// A finite value minus `+∞` has no representation and is rejected.
    pub fn sub_conv(self, other: ExtReal) -> Result<ExtReal> {
        match (self.is_finite(), other.is_finite()) {
            (true, true) => Ok(ExtReal(self.0 - other.0)),
            (false, _) => Ok(ExtReal::INFINITY),
            (true, false) => Err(Error::UndefinedArithmetic(format!("{} - (+inf)", self.0))),
        }
    }
}

/// A quadratic metric `‖x‖²_A = xᵀ A x`.
#[derive(Clone, PartialEq)]
pub enum QuadMetric {
    ScaledIdentity(f64),
    Diagonal(Vec<f64>),
    Full(DMatrix<f64>),
}

impl fmt::Debug for QuadMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuadMetric::ScaledIdentity(g) => write!(f, "ScaledIdentity({g})"),
            QuadMetric::Diagonal(w) => write!(f, "Diagonal({w:?})"),
            QuadMetric::Full(m) => write!(f, "Full({}x{})", m.nrows(), m.ncols()),
        }
    }
}

impl QuadMetric {
    pub fn identity() -> Self {
        QuadMetric::ScaledIdentity(1.0)
    }

    pub fn zero() -> Self {
        QuadMetric::ScaledIdentity(0.0)
    }

    pub fn scaled_identity(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::NotPsd(format!("scaled identity with gamma = {gamma}")));
        }
        Ok(QuadMetric::ScaledIdentity(gamma))
    }

    pub fn diagonal(weights: Vec<f64>) -> Result<Self> {
        if let Some((j, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::NotPsd(format!("diagonal weight {w} at coordinate {j}")));
        }
        Ok(QuadMetric::Diagonal(weights))
    }

    /// Symmetric PSD matrix; eigenvalues in `[-PSD_CLAMP, 0)` are clamped to 0.
    pub fn full(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotPsd(format!("non-square {}x{} matrix", m.nrows(), m.ncols())));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPsd("non-finite matrix entry".into()));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::NotPsd(format!("matrix not symmetric (max asymmetry {asym:.3e})")));
        }
        let sym = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        if min < -PSD_CLAMP {
            return Err(Error::NotPsd(format!("eigenvalue {min:.3e} < -{PSD_CLAMP:e}")));
        }
        if min < 0.0 {
            let clamped = eig.eigenvalues.map(|l| l.max(0.0));
            let v = &eig.eigenvectors;
            return Ok(QuadMetric::Full(v * DMatrix::from_diagonal(&clamped) * v.transpose()));
        }
        Ok(QuadMetric::Full(sym))
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            QuadMetric::ScaledIdentity(_) => None,
            QuadMetric::Diagonal(w) => Some(w.len()),
            QuadMetric::Full(m) => Some(m.nrows()),
        }
    }

    fn check(&self, x: &Point) -> Result<()> {
        match self.dim() {
            Some(d) => x.check_dim(d),
            None => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            QuadMetric::ScaledIdentity(g) => *g == 0.0,
            QuadMetric::Diagonal(w) => w.iter().all(|&v| v == 0.0),
            QuadMetric::Full(m) => m.iter().all(|&v| v == 0.0),
        }
    }

    pub fn is_isotropic(&self) -> bool {
        match self {
            QuadMetric::ScaledIdentity(_) => true,
            QuadMetric::Diagonal(w) => w.windows(2).all(|p| p[0] == p[1]),
            QuadMetric::Full(_) => false,
        }
    }

    /// Isotropic weight when the metric is `γ I`.
    pub fn isotropic_weight(&self) -> Option<f64> {
        match self {
            QuadMetric::ScaledIdentity(g) => Some(*g),
            QuadMetric::Diagonal(w) if self.is_isotropic() => Some(w.first().copied().unwrap_or(0.0)),
            _ => None,
        }
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self, QuadMetric::Full(_))
    }

    /// Per-coordinate weights for diagonal (or isotropic) metrics.
    pub fn diagonal_weights(&self, d: usize) -> Option<Vec<f64>> {
        match self {
            QuadMetric::ScaledIdentity(g) => Some(vec![*g; d]),
            QuadMetric::Diagonal(w) => Some(w.clone()),
            QuadMetric::Full(_) => None,
        }
    }

    pub fn apply(&self, x: &Point) -> Result<Point> {
        self.check(x)?;
        Ok(match self {
            QuadMetric::ScaledIdentity(g) => x.scale(*g),
            QuadMetric::Diagonal(w) => Point::raw(w.iter().zip(x.iter()).map(|(a, b)| a * b).collect()),
            QuadMetric::Full(m) => Point::from_dvector(&(m * x.to_dvector())),
        })
    }

    /// `xᵀ M x`
    pub fn norm_sq(&self, x: &Point) -> Result<f64> {
        self.check(x)?;
        Ok(match self {
            QuadMetric::ScaledIdentity(g) => g * x.norm_sq(),
            QuadMetric::Diagonal(w) => w.iter().zip(x.iter()).map(|(w, v)| w * v * v).sum(),
            QuadMetric::Full(m) => {
                let v = x.to_dvector();
                v.dot(&(m * &v))
            }
        })
    }

    /// `gᵀ M⁻¹ g`; requires strict positive definiteness.
    pub fn dual_norm_sq(&self, g: &Point) -> Result<f64> {
        self.check(g)?;
        match self {
            QuadMetric::ScaledIdentity(gamma) => {
                if *gamma <= 0.0 {
                    return Err(Error::SingularMetric(format!("scaled identity with gamma = {gamma}")));
                }
                Ok(g.norm_sq() / gamma)
            }
            QuadMetric::Diagonal(w) => {
                if let Some((j, wj)) = w.iter().enumerate().find(|(_, w)| **w <= 0.0) {
                    return Err(Error::SingularMetric(format!("zero weight {wj} at coordinate {j}")));
                }
                Ok(w.iter().zip(g.iter()).map(|(w, v)| v * v / w).sum())
            }
            QuadMetric::Full(_) => {
                let y = self.solve(g)?;
                Ok(g.dot(&y))
            }
        }
    }

    /// `M⁻¹ b`; requires strict positive definiteness.
    pub fn solve(&self, b: &Point) -> Result<Point> {
        self.check(b)?;
        match self {
            QuadMetric::ScaledIdentity(gamma) => {
                if *gamma <= 0.0 {
                    return Err(Error::SingularMetric(format!("scaled identity with gamma = {gamma}")));
                }
                Ok(b.scale(1.0 / gamma))
            }
            QuadMetric::Diagonal(w) => {
                if let Some((j, wj)) = w.iter().enumerate().find(|(_, w)| **w <= 0.0) {
                    return Err(Error::SingularMetric(format!("zero weight {wj} at coordinate {j}")));
                }
                Ok(Point::raw(w.iter().zip(b.iter()).map(|(w, v)| v / w).collect()))
            }
            QuadMetric::Full(m) => match m.clone().cholesky() {
                Some(ch) => Ok(Point::from_dvector(&ch.solve(&b.to_dvector()))),
                None => {
                    let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
                    Err(Error::SingularMetric(format!("smallest eigenvalue {min:.3e} is not positive")))
                }
            },
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        match self {
            QuadMetric::ScaledIdentity(g) => *g,
            QuadMetric::Diagonal(w) => w.iter().copied().fold(f64::INFINITY, f64::min),
            QuadMetric::Full(m) => SymmetricEigen::new(m.clone()).eigenvalues.min(),
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        match self {
            QuadMetric::ScaledIdentity(g) => *g,
            QuadMetric::Diagonal(w) => w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            QuadMetric::Full(m) => SymmetricEigen::new(m.clone()).eigenvalues.max(),
        }
    }

    /// `c M`. Negative `c` is allowed; the result is then no longer PSD and
    /// is only meaningful inside a signed sum of quadratics.
    pub fn scaled(&self, c: f64) -> QuadMetric {
        match self {
            QuadMetric::ScaledIdentity(g) => QuadMetric::ScaledIdentity(g * c),
            QuadMetric::Diagonal(w) => QuadMetric::Diagonal(w.iter().map(|v| v * c).collect()),
            QuadMetric::Full(m) => QuadMetric::Full(m * c),
        }
    }

    pub fn to_dense(&self, d: usize) -> DMatrix<f64> {
        match self {
            QuadMetric::ScaledIdentity(g) => DMatrix::identity(d, d) * *g,
            QuadMetric::Diagonal(w) => DMatrix::from_diagonal(&DVector::from_column_slice(w)),
            QuadMetric::Full(m) => m.clone(),
        }
    }

    pub fn sum(&self, other: &QuadMetric) -> Result<QuadMetric> {
        use QuadMetric::*;
        if let (Some(a), Some(b)) = (self.dim(), other.dim()) {
            if a != b {
                return Err(Error::DimensionMismatch { expected: a, got: b });
            }
        }
        Ok(match (self, other) {
            (ScaledIdentity(a), ScaledIdentity(b)) => ScaledIdentity(a + b),
            (ScaledIdentity(a), Diagonal(w)) | (Diagonal(w), ScaledIdentity(a)) => {
                Diagonal(w.iter().map(|v| v + a).collect())
            }
            (Diagonal(u), Diagonal(w)) => Diagonal(u.iter().zip(w).map(|(a, b)| a + b).collect()),
            (Full(m), other) | (other, Full(m)) => Full(m + other.to_dense(m.nrows())),
        })
    }
}

/// `xᵀ M x`
pub fn quad_norm_sq(m: &QuadMetric, x: &Point) -> Result<f64> {
    m.norm_sq(x)
}

/// `gᵀ M⁻¹ g`
pub fn dual_norm_sq(m: &QuadMetric, g: &Point) -> Result<f64> {
    m.dual_norm_sq(g)
}

/// An extended-real valued function with closed-form one-sided directional
/// derivatives.
pub trait DirDiff {
    fn value(&self, x: &Point) -> ExtReal;

    /// `f'(x; z) = lim_{α↓0} (f(x + αz) - f(x)) / α`, possibly `+∞`.
    ///
    /// Errors when `f(x)` is not finite or the limit is `-∞`.
    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal>;
}

impl<T: DirDiff + ?Sized> DirDiff for &T {
    fn value(&self, x: &Point) -> ExtReal {
        (**self).value(x)
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        (**self).dir_derivative(x, z)
    }
}

pub fn dir_derivative<F: DirDiff + ?Sized>(f: &F, x: &Point, z: &Point) -> Result<ExtReal> {
    f.dir_derivative(x, z)
}

/// Generalized Bregman divergence `B_f(y, x)`; `+∞` when `f(y)` is infinite.
pub fn bregman<F: DirDiff + ?Sized>(f: &F, y: &Point, x: &Point) -> Result<ExtReal> {
    let fx = f.value(x);
    if !fx.is_finite() {
        return Err(Error::OutOfDomain("bregman divergence anchored outside dom(f)".into()));
    }
    let fy = f.value(y);
    if !fy.is_finite() {
        return Ok(ExtReal::INFINITY);
    }
    let deriv = f.dir_derivative(x, &y.sub(x))?;
    match deriv.as_finite() {
        Some(d) => Ok(ExtReal::finite(fy.value() - fx.value() - d)),
        None => Err(Error::InfiniteDerivative("f'(x; y - x) = +inf makes B_f(y, x) = -inf".into())),
    }
}

/// `δ_t = -f'(x_t; x* - x_t) + ⟨g_t, x* - x_t⟩`
pub fn delta_term<F: DirDiff + ?Sized>(f: &F, x_t: &Point, x_star: &Point, g_t: &Point) -> Result<f64> {
    let dir = x_star.sub(x_t);
    let deriv = f
        .dir_derivative(x_t, &dir)?
        .as_finite()
        .ok_or_else(|| Error::InfiniteDerivative("f'(x_t; x* - x_t) = +inf".into()))?;
    Ok(-deriv + g_t.dot(&dir))
}

/// Result of the numeric one-sided limit.
#[derive(Debug, Clone, Copy)]
pub struct NumericDerivative {
    pub value: f64,
    /// Disagreement between the two Richardson estimates.
    pub error_estimate: f64,
}

const NUMERIC_STEPS: [f64; 3] = [1e-4, 1e-5, 1e-6];

/// One-sided difference quotients at α ∈ {1e-4, 1e-5, 1e-6}, combined by
/// Richardson extrapolation. Validation-only; production code uses closed forms.
pub fn numeric_dir_derivative(value: impl Fn(&Point) -> f64, x: &Point, z: &Point) -> Result<NumericDerivative> {
    let fx = value(x);
    if !fx.is_finite() {
        return Err(Error::OutOfDomain("numeric derivative at a point outside dom(f)".into()));
    }
    let q: Vec<f64> = NUMERIC_STEPS
        .iter()
        .map(|&a| (value(&x.axpy(a, z)) - fx) / a)
        .collect();
    if q.iter().all(|v| *v == f64::INFINITY) {
        return Ok(NumericDerivative { value: f64::INFINITY, error_estimate: 0.0 });
    }
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergent(format!("difference quotients {q:?}")));
    }
    let r1 = (10.0 * q[1] - q[0]) / 9.0;
    let r2 = (10.0 * q[2] - q[1]) / 9.0;
    let err = (r1 - r2).abs();
    if err > 1e-4 * r2.abs().max(1.0) {
        return Err(Error::NonConvergent(format!("Richardson estimates {r1} and {r2} disagree")));
    }
    Ok(NumericDerivative { value: r2, error_estimate: err })
}

/// Wraps a value-only closure; directional derivatives come from
/// [`numeric_dir_derivative`]. Intended for validating closed forms.
pub struct ValueOnly<F>(pub F);

impl<F: Fn(&Point) -> f64> DirDiff for ValueOnly<F> {
    fn value(&self, x: &Point) -> ExtReal {
        let v = (self.0)(x);
        if v.is_finite() {
            ExtReal::finite(v)
        } else {
            ExtReal::INFINITY
        }
    }

    fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
        let d = numeric_dir_derivative(&self.0, x, z)?;
        ExtReal::try_new(d.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    struct HalfSq;
    impl DirDiff for HalfSq {
        fn value(&self, x: &Point) -> ExtReal {
            ExtReal::finite(0.5 * x.norm_sq())
        }
        fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
            Ok(ExtReal::finite(x.dot(z)))
        }
    }

    struct Abs;
    impl DirDiff for Abs {
        fn value(&self, x: &Point) -> ExtReal {
            ExtReal::finite(x[0].abs())
        }
        fn dir_derivative(&self, x: &Point, z: &Point) -> Result<ExtReal> {
            let d = if x[0] == 0.0 { z[0].abs() } else { x[0].signum() * z[0] };
            Ok(ExtReal::finite(d))
        }
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&p(&[1.0, 2.0]), &p(&[3.0, 4.0])).unwrap(), 11.0);
        assert_eq!(dot(&p(&[5.0, -7.0]), &Point::zeros(2)).unwrap(), 0.0);
        assert_eq!(dot(&p(&[1.0, 0.0]), &p(&[0.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(
            dot(&p(&[1.0]), &p(&[1.0, 2.0])),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn point_rejects_non_finite() {
        assert!(matches!(Point::new(vec![1.0, f64::NAN]), Err(Error::NonFinite { index: 1, .. })));
        assert!(Point::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn quad_norm_examples() {
        let diag = QuadMetric::diagonal(vec![3.0, 5.0]).unwrap();
        assert_eq!(quad_norm_sq(&diag, &p(&[1.0, 1.0])).unwrap(), 8.0);
        assert_eq!(quad_norm_sq(&diag, &Point::zeros(2)).unwrap(), 0.0);
        let iso = QuadMetric::scaled_identity(2.0).unwrap();
        assert_eq!(quad_norm_sq(&iso, &p(&[1.0, 2.0])).unwrap(), 10.0);
        assert!(quad_norm_sq(&diag, &p(&[1.0])).is_err());
    }

    #[test]
    fn dual_norm_examples() {
        let diag = QuadMetric::diagonal(vec![4.0, 1.0]).unwrap();
        assert_eq!(dual_norm_sq(&diag, &p(&[2.0, 3.0])).unwrap(), 10.0);
        assert_eq!(dual_norm_sq(&diag, &Point::zeros(2)).unwrap(), 0.0);
        let iso = QuadMetric::scaled_identity(2.0).unwrap();
        assert_eq!(dual_norm_sq(&iso, &p(&[2.0, 0.0])).unwrap(), 2.0);
    }

    #[test]
    fn dual_norm_singular_names_coordinate() {
        let diag = QuadMetric::diagonal(vec![1.0, 0.0]).unwrap();
        match dual_norm_sq(&diag, &p(&[1.0, 1.0])) {
            Err(Error::SingularMetric(msg)) => assert!(msg.contains("coordinate 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
        let full = QuadMetric::full(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
        match dual_norm_sq(&full, &p(&[1.0, 0.0])) {
            Err(Error::SingularMetric(msg)) => assert!(msg.contains("eigenvalue"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_metric_clamps_tiny_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -5e-11]);
        let q = QuadMetric::full(m).unwrap();
        assert!(q.min_eigenvalue() >= 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-6]);
        assert!(matches!(QuadMetric::full(bad), Err(Error::NotPsd(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(QuadMetric::full(asym).is_err());
    }

    #[test]
    fn full_and_diagonal_agree() {
        let diag = QuadMetric::diagonal(vec![2.0, 3.0, 0.5]).unwrap();
        let full = QuadMetric::full(diag.to_dense(3)).unwrap();
        let x = p(&[1.0, -2.0, 4.0]);
        assert!((diag.norm_sq(&x).unwrap() - full.norm_sq(&x).unwrap()).abs() < 1e-12);
        assert!((diag.dual_norm_sq(&x).unwrap() - full.dual_norm_sq(&x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dir_derivative_examples() {
        let d = dir_derivative(&HalfSq, &p(&[1.0, 1.0]), &p(&[1.0, 0.0])).unwrap();
        assert_eq!(d.value(), 1.0);
        let d = dir_derivative(&Abs, &p(&[0.0]), &p(&[-1.0])).unwrap();
        assert_eq!(d.value(), 1.0);
    }

    #[test]
    fn bregman_examples() {
        let b = bregman(&HalfSq, &p(&[3.0, 4.0]), &Point::zeros(2)).unwrap();
        assert_eq!(b.value(), 12.5);
        let b = bregman(&Abs, &p(&[-2.0]), &p(&[1.0])).unwrap();
        assert_eq!(b.value(), 4.0);
    }

    #[test]
    fn delta_examples() {
        let d = delta_term(&Abs, &p(&[0.0]), &p(&[1.0]), &p(&[0.5])).unwrap();
        assert_eq!(d, -0.5);
        let d = delta_term(&HalfSq, &p(&[1.0, 2.0]), &p(&[0.0, 0.0]), &p(&[1.0, 2.0])).unwrap();
        assert_eq!(d, 0.0);
        // noise orthogonal to x* - x_t leaves δ at zero
        let d = delta_term(&HalfSq, &p(&[1.0, 0.0]), &p(&[0.0, 0.0]), &p(&[1.0, 3.0])).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn numeric_derivative_matches_closed_form() {
        let f = |x: &Point| 0.5 * x.norm_sq() + x[0].sin();
        let x = p(&[0.3, -1.2]);
        let z = p(&[1.0, 2.0]);
        let num = numeric_dir_derivative(f, &x, &z).unwrap();
        let exact = x.dot(&z) + x[0].cos() * z[0];
        assert!((num.value - exact).abs() <= 1e-4 * exact.abs().max(1.0));
    }

    #[test]
    fn numeric_derivative_of_sqrt_at_zero_diverges() {
        let f = |x: &Point| x[0].abs().sqrt();
        assert!(matches!(numeric_dir_derivative(f, &p(&[0.0]), &p(&[1.0])), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn ext_real_convention() {
        let inf = ExtReal::INFINITY;
        assert!(inf.sub_conv(inf).unwrap().is_infinite());
        assert!(ExtReal::finite(1.0).sub_conv(inf).is_err());
        assert_eq!(ExtReal::finite(3.0).sub_conv(ExtReal::finite(1.0)).unwrap().value(), 2.0);
        assert!(ExtReal::try_new(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn bregman_of_value_only_matches() {
        let f = ValueOnly(|x: &Point| 0.5 * x.norm_sq());
        let b = bregman(&f, &p(&[3.0, 4.0]), &p(&[1.0, 1.0])).unwrap().value();
        assert!((b - 0.5 * 13.0).abs() < 1e-6);
    }
}
