//! Argmin engines for the FTRL and mirror-descent update objectives.
//!
//! Every objective has the form `⟨c, x⟩ + R(x) + ½‖x - x_t‖²_A` over a feasible
//! set, with `R` in [`Collapsed`] form. Separable and isotropic cases are solved
//! in closed form; the rest go through an accelerated proximal-gradient method
//! whose output carries a strong-convexity distance certificate.

mod sets;

use serde::{Deserialize, Serialize};

pub use sets::{project_simplex, FeasibleSet, FEAS_TOL};

use crate::error::{Error, Result};
use crate::hilbert::{Point, QuadMetric};
use crate::regularizers::{Collapsed, Regularizer};

/// `B_r(x, x_t) = ½ (x - x_t)ᵀ A (x - x_t)` for a quadratic-family `r` with Hessian `A`.
#[derive(Clone, Debug)]
pub struct Anchor {
    pub metric: QuadMetric,
    pub center: Point,
}

#[derive(Clone, Debug)]
pub struct Objective {
    pub linear: Point,
    pub regularizer: Collapsed,
    pub anchor: Option<Anchor>,
    pub set: FeasibleSet,
    /// Point used to resolve flat directions; defaults to the anchor or the set center.
    pub tie_break: Option<Point>,
}

impl Objective {
    pub fn new(linear: Point, regularizer: Collapsed, set: FeasibleSet) -> Self {
        Objective { linear, regularizer, anchor: None, set, tie_break: None }
    }

    pub fn from_regularizer(linear: Point, reg: &Regularizer, set: FeasibleSet) -> Result<Self> {
        let d = linear.dim();
        Ok(Objective::new(linear, reg.collapse(d)?, set))
    }

    pub fn with_anchor(mut self, metric: QuadMetric, center: Point) -> Self {
        self.anchor = Some(Anchor { metric, center });
        self
    }

    pub fn with_tie_break(mut self, x: Point) -> Self {
        self.tie_break = Some(x);
        self
    }

    pub fn dim(&self) -> usize {
        self.linear.dim()
    }

    /// Total objective value (`+∞` outside the set).
    pub fn value(&self, x: &Point) -> f64 {
        if !self.set.contains(x) {
            return f64::INFINITY;
        }
        let mut v = self.linear.dot(x) + self.regularizer.value(x).value();
        if let Some(a) = &self.anchor {
            v += 0.5 * a.metric.norm_sq(&x.sub(&a.center)).expect("anchor dimension");
        }
        v
    }

    fn effective(&self) -> Result<Effective> {
        let d = self.dim();
        self.set.validate()?;
        if self.set.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: self.set.dim() });
        }
        let mut total = self.regularizer.clone();
        if let Some(a) = &self.anchor {
            total.add(&Regularizer::proximal(a.center.clone(), a.metric.clone()))?;
        }
        let mut set = self.set.clone();
        for s in total.sets.drain(..) {
            if set.is_unconstrained() {
                set = s;
            } else if s != set {
                return Err(Error::Unsupported("intersection of distinct feasible sets".into()));
            }
        }
        let c = total.lin.add(&self.linear);
        total.lin = Point::zeros(d);
        let tie = self
            .tie_break
            .clone()
            .or_else(|| self.anchor.as_ref().map(|a| a.center.clone()))
            .unwrap_or_else(|| set.center());
        Ok(Effective { c, reg: total, set, tie })
    }
}

/// `½xᵀAx + ⟨c, x⟩ + α‖x‖₁ + Σφ_i(x) + ι_S(x)` with all linear parts folded into `c`.
struct Effective {
    c: Point,
    reg: Collapsed,
    set: FeasibleSet,
    tie: Point,
}

impl Effective {
    fn smooth_value(&self, x: &Point) -> f64 {
        self.reg.smooth_value(x) + self.c.dot(x)
    }

    fn smooth_gradient(&self, x: &Point) -> Point {
        self.reg.smooth_gradient(x).add(&self.c)
    }

    fn value(&self, x: &Point) -> f64 {
        self.smooth_value(x) + self.reg.l1 * x.norm_l1()
    }

    /// `prox_{s(α‖·‖₁ + ι_S)}(v)`, exact for every supported set.
    fn prox(&self, v: &Point, s: f64) -> Result<Point> {
        let lam = s * self.reg.l1;
        match &self.set {
            FeasibleSet::Unconstrained { .. } => Ok(soft_threshold(v, lam)),
            FeasibleSet::Box { .. } => self.set.project(&soft_threshold(v, lam)),
            FeasibleSet::Ball { center, .. } => {
                if lam != 0.0 && !center.is_zero() {
                    return Err(Error::Unsupported("L1 penalty on a ball not centered at the origin".into()));
                }
                self.set.project(&soft_threshold(v, lam))
            }
            // ‖x‖₁ is constant on the simplex
            FeasibleSet::Simplex { .. } => self.set.project(v),
        }
    }
}

pub fn soft_threshold(v: &Point, lam: f64) -> Point {
    if lam == 0.0 {
        return v.clone();
    }
    v.map(|x| x.signum() * (x.abs() - lam).max(0.0))
}

/// Inner-solver controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Exact,
    LinearOracle,
    Numeric,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Point,
    pub method: SolveMethod,
    pub iterations: usize,
    /// Certified `‖x - x*‖` bound (0 for exact paths).
    pub certified_distance: f64,
}

impl Solution {
    fn exact(x: Point) -> Self {
        Solution { x, method: SolveMethod::Exact, iterations: 0, certified_distance: 0.0 }
    }
}

/// Euclidean projection onto `set`.
pub fn project(set: &FeasibleSet, y: &Point) -> Result<Point> {
    set.project(y)
}

/// Minimizes the objective, using a closed form whenever one is exact:
/// no smooth terms and either an isotropic Hessian (any set), a diagonal
/// Hessian on a box or all of ℝ^d, or a full Hessian without constraints or L1.
/// Everything else goes to [`argmin_numeric`].
pub fn argmin_quadratic(obj: &Objective, opts: &SolverOptions) -> Result<Solution> {
    let eff = obj.effective()?;
    if eff.reg.has_functions() {
        return numeric(&eff, opts);
    }
    let d = obj.dim();
    let alpha = eff.reg.l1;
    if let Some(gamma) = eff.reg.hess.isotropic_weight() {
        if gamma > 0.0 {
            let v = eff.c.scale(-1.0 / gamma);
            return eff.prox(&v, 1.0 / gamma).map(Solution::exact);
        }
        if gamma == 0.0 {
            return zero_curvature(&eff);
        }
        return Err(Error::IllPosed(format!("negative curvature {gamma}")));
    }
    if let Some(w) = eff.reg.hess.diagonal_weights(d) {
        if matches!(eff.set, FeasibleSet::Unconstrained { .. } | FeasibleSet::Box { .. }) {
            return separable(&eff, &w).map(Solution::exact);
        }
        return numeric(&eff, opts);
    }
    if eff.set.is_unconstrained() && alpha == 0.0 {
        let x = eff.reg.hess.solve(&eff.c.scale(-1.0)).map_err(|e| Error::IllPosed(e.to_string()))?;
        return Ok(Solution::exact(x));
    }
    numeric(&eff, opts)
}

/// Entry point used by the learners.
pub fn argmin(obj: &Objective, opts: &SolverOptions) -> Result<Solution> {
    argmin_quadratic(obj, opts)
}

/// `argmin ⟨g, x⟩ + ½ Σ σ_j x_j² + α‖x‖₁` over a box or ℝ^d:
/// `x_j = clip(-sign(g_j) max(0, |g_j| - α) / σ_j)`.
pub fn argmin_l1_composite(g: &Point, diag_metric: &QuadMetric, alpha: f64, set: &FeasibleSet) -> Result<Point> {
    let d = g.dim();
    let w = diag_metric
        .diagonal_weights(d)
        .ok_or_else(|| Error::Unsupported("soft-threshold path requires a diagonal metric".into()))?;
    if let Some(j) = w.iter().position(|&s| s <= 0.0) {
        return Err(Error::SingularMetric(format!("zero weight at coordinate {j}")));
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("L1 weight {alpha} must be non-negative")));
    }
    let x = Point::raw((0..d).map(|j| -g[j].signum() * (g[j].abs() - alpha).max(0.0) / w[j]).collect());
    match set {
        FeasibleSet::Unconstrained { .. } | FeasibleSet::Box { .. } => set.project(&x),
        _ => Err(Error::Unsupported("soft-threshold path requires a box or no constraint".into())),
    }
}

/// Accelerated proximal gradient with backtracking and adaptive restart.
///
/// Stops once the subgradient certificate `v ∈ ∂F(x⁺)` satisfies
/// `‖v‖ / σ ≤ tol`, which bounds `‖x⁺ - x*‖` for a σ-strongly convex `F`.
pub fn argmin_numeric(obj: &Objective, opts: &SolverOptions) -> Result<Solution> {
    numeric(&obj.effective()?, opts)
}

fn numeric(eff: &Effective, opts: &SolverOptions) -> Result<Solution> {
    let sigma = eff.reg.curvature();
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::IllPosed(format!("objective is not strongly convex (modulus {sigma:.3e})")));
    }
    let lips = eff.reg.smoothness();
    let mut step = if lips.is_finite() && lips > 0.0 { 1.0 / lips } else { 1.0 };
    let mut x = eff.prox(&eff.set.project(&eff.tie)?, 0.0)?;
    let mut y = x.clone();
    let mut fx = eff.value(&x);
    let mut momentum: f64 = 1.0;
    let mut last = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let gy = eff.smooth_gradient(&y);
        let phi_y = eff.smooth_value(&y);
        let x_new = loop {
            let cand = eff.prox(&y.axpy(-step, &gy), step)?;
            let diff = cand.sub(&y);
            let model = phi_y + gy.dot(&diff) + diff.norm_sq() / (2.0 * step);
            if eff.smooth_value(&cand) <= model + 1e-13 * (1.0 + phi_y.abs()) || step < 1e-300 {
                break cand;
            }
            step *= 0.5;
        };
        let v = y.sub(&x_new).scale(1.0 / step).sub(&gy).add(&eff.smooth_gradient(&x_new));
        let cert = v.norm() / sigma;
        last = cert;
        if cert <= opts.tol {
            return Ok(Solution { x: x_new, method: SolveMethod::Numeric, iterations: it, certified_distance: cert });
        }
        let f_new = eff.value(&x_new);
        if f_new > fx {
            momentum = 1.0;
            y = x_new.clone();
        } else {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            y = x_new.axpy((momentum - 1.0) / next, &x_new.sub(&x));
            momentum = next;
        }
        x = x_new;
        fx = f_new;
    }
    Err(Error::SolverFailure { iterations: opts.max_iter, certified: last, tol: opts.tol })
}

/// Per-coordinate solve for a diagonal Hessian over a box or ℝ^d.
fn separable(eff: &Effective, w: &[f64]) -> Result<Point> {
    let d = w.len();
    let alpha = eff.reg.l1;
    let (lo, hi): (Vec<f64>, Vec<f64>) = match &eff.set {
        FeasibleSet::Box { lo, hi } => (lo.as_slice().to_vec(), hi.as_slice().to_vec()),
        _ => (vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d]),
    };
    let mut x = vec![0.0; d];
    for j in 0..d {
        let c = eff.c[j];
        x[j] = if w[j] > 0.0 {
            (-c.signum() * (c.abs() - alpha).max(0.0) / w[j]).clamp(lo[j], hi[j])
        } else if w[j] == 0.0 {
            linear_1d(c, alpha, lo[j], hi[j], eff.tie[j])?
        } else {
            return Err(Error::IllPosed(format!("negative curvature at coordinate {j}")));
        };
    }
    Ok(Point::raw(x))
}

/// `argmin_{u ∈ [lo, hi]} c u + α|u|`, ties resolved toward `tie`.
fn linear_1d(c: f64, alpha: f64, lo: f64, hi: f64, tie: f64) -> Result<f64> {
    let right = c + alpha;
    let left = c - alpha;
    if right < 0.0 && hi == f64::INFINITY || left > 0.0 && lo == f64::NEG_INFINITY {
        return Err(Error::IllPosed("flat coordinate with a non-zero linear term on an unbounded set".into()));
    }
    let h = |u: f64| c * u + alpha * u.abs();
    let mut best = tie.clamp(lo, hi);
    for cand in [0.0f64.clamp(lo, hi), lo, hi] {
        if cand.is_finite() && h(cand) < h(best) {
            best = cand;
        }
    }
    Ok(best)
}

/// Zero curvature with an isotropic (zero) Hessian: a linear program solved by
/// the set's linear oracle; a vanishing linear part returns the tie-break point.
fn zero_curvature(eff: &Effective) -> Result<Solution> {
    let d = eff.c.dim();
    let x = if eff.reg.l1 == 0.0 {
        eff.set.linear_minimizer(&eff.c, &eff.tie)?
    } else {
        match &eff.set {
            FeasibleSet::Unconstrained { .. } | FeasibleSet::Box { .. } => separable(eff, &vec![0.0; d])?,
            FeasibleSet::Simplex { .. } => eff.set.linear_minimizer(&eff.c, &eff.tie)?,
            FeasibleSet::Ball { .. } => {
                return Err(Error::IllPosed("zero curvature with an L1 term on a ball".into()));
            }
        }
    };
    Ok(Solution { x, method: SolveMethod::LinearOracle, iterations: 0, certified_distance: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regularizers::SmoothTerm;
    use std::sync::Arc;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn quadratic_examples() {
        let obj = Objective::from_regularizer(p(&[2.0, 2.0]), &Regularizer::half_sq_norm(2, 1.0), FeasibleSet::unconstrained(2))
            .unwrap();
        assert_eq!(argmin_quadratic(&obj, &opts()).unwrap().x, p(&[-2.0, -2.0]));

        let obj = Objective::new(p(&[2.0, 2.0]), Collapsed::new(2), FeasibleSet::unconstrained(2))
            .with_anchor(QuadMetric::identity(), p(&[1.0, 1.0]));
        assert_eq!(argmin_quadratic(&obj, &opts()).unwrap().x, p(&[-1.0, -1.0]));

        let obj = Objective::new(p(&[1.0, 0.0]), Collapsed::new(2), FeasibleSet::simplex(2, 1.0))
            .with_anchor(QuadMetric::identity(), p(&[0.5, 0.5]));
        assert_eq!(argmin_quadratic(&obj, &opts()).unwrap().x, p(&[0.0, 1.0]));
    }

    #[test]
    fn zero_curvature_rules() {
        let obj = Objective::new(p(&[1.0, 0.0]), Collapsed::new(2), FeasibleSet::unconstrained(2));
        assert!(matches!(argmin_quadratic(&obj, &opts()), Err(Error::IllPosed(_))));
        let obj = Objective::new(Point::zeros(2), Collapsed::new(2), FeasibleSet::ball(2, 1.0));
        assert_eq!(argmin_quadratic(&obj, &opts()).unwrap().x, Point::zeros(2));
        let obj = Objective::new(p(&[0.0, -3.0]), Collapsed::new(2), FeasibleSet::ball(2, 1.0));
        assert_eq!(argmin_quadratic(&obj, &opts()).unwrap().x, p(&[0.0, 1.0]));
    }

    #[test]
    fn indicatrix_inside_regularizer() {
        let reg = Regularizer::sum([
            Regularizer::Indicatrix(FeasibleSet::cube(2, 0.0, 1.0)),
            Regularizer::proximal(p(&[2.0, -1.0]), QuadMetric::identity()),
        ]);
        let obj = Objective::from_regularizer(Point::zeros(2), &reg, FeasibleSet::unconstrained(2)).unwrap();
        assert_eq!(argmin(&obj, &opts()).unwrap().x, p(&[1.0, 0.0]));
    }

    #[test]
    fn l1_composite_examples() {
        let m = QuadMetric::diagonal(vec![2.0, 2.0]).unwrap();
        let u = FeasibleSet::unconstrained(2);
        assert_eq!(argmin_l1_composite(&p(&[3.0, -1.0]), &m, 2.0, &u).unwrap(), p(&[-0.5, 0.0]));
        assert_eq!(argmin_l1_composite(&p(&[3.0, -1.0]), &m, 0.0, &u).unwrap(), p(&[-1.5, 0.5]));
        assert_eq!(argmin_l1_composite(&p(&[0.5, -1.0]), &m, 1.0, &u).unwrap(), Point::zeros(2));
        let full = QuadMetric::full(m.to_dense(2)).unwrap();
        assert!(argmin_l1_composite(&p(&[1.0, 1.0]), &full, 1.0, &u).is_err());
    }

    #[test]
    fn numeric_agrees_with_closed_form() {
        let reg = Regularizer::sum([
            Regularizer::Quadratic { center: p(&[0.5, -1.0, 2.0]), metric: QuadMetric::diagonal(vec![1.0, 3.0, 0.5]).unwrap(), scale: 1.0 },
            Regularizer::L1 { alpha: 0.4 },
        ]);
        for set in [FeasibleSet::unconstrained(3), FeasibleSet::cube(3, -0.5, 0.5)] {
            let obj = Objective::from_regularizer(p(&[0.3, -0.2, 0.1]), &reg, set).unwrap();
            let exact = argmin_quadratic(&obj, &opts()).unwrap();
            let num = argmin_numeric(&obj, &opts()).unwrap();
            assert_eq!(exact.method, SolveMethod::Exact);
            assert!(exact.x.sub(&num.x).norm() < 1e-9, "{:?} vs {:?}", exact.x, num.x);
        }
    }

    #[test]
    fn anisotropic_ball_goes_numeric() {
        let reg = Regularizer::Quadratic { center: p(&[3.0, 0.0]), metric: QuadMetric::diagonal(vec![1.0, 10.0]).unwrap(), scale: 1.0 };
        let obj = Objective::from_regularizer(p(&[0.0, -5.0]), &reg, FeasibleSet::ball(2, 1.0)).unwrap();
        let sol = argmin(&obj, &opts()).unwrap();
        assert_eq!(sol.method, SolveMethod::Numeric);
        assert!(sol.x.norm() <= 1.0 + 1e-9);
    }

    #[derive(Debug)]
    struct ShiftedHalfSq(f64);
    impl SmoothTerm for ShiftedHalfSq {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &Point) -> f64 {
            0.5 * (x[0] - self.0).powi(2)
        }
        fn gradient(&self, x: &Point) -> Point {
            p(&[x[0] - self.0])
        }
        fn smoothness(&self) -> f64 {
            1.0
        }
        fn strong_convexity(&self) -> f64 {
            1.0
        }
        fn is_convex(&self) -> bool {
            true
        }
    }

    #[test]
    fn implicit_step_example() {
        let reg = Regularizer::Function(Arc::new(ShiftedHalfSq(2.0)));
        let obj = Objective::from_regularizer(Point::zeros(1), &reg, FeasibleSet::unconstrained(1))
            .unwrap()
            .with_anchor(QuadMetric::identity(), Point::zeros(1));
        let sol = argmin(&obj, &opts()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn failure_is_reported() {
        let reg = Regularizer::Function(Arc::new(ShiftedHalfSq(2.0)));
        let obj = Objective::from_regularizer(Point::zeros(1), &reg, FeasibleSet::unconstrained(1)).unwrap();
        let r = argmin_numeric(&obj, &SolverOptions { tol: -1.0, max_iter: 5 });
        assert!(matches!(r, Err(Error::SolverFailure { iterations: 5, .. })));
    }
}
