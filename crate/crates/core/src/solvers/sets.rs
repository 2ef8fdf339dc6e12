use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Point;

/// Relative tolerance used for membership and tangent-cone tests.
pub const FEAS_TOL: f64 = 1e-9;

/// Closed convex feasible set 𝓧 ⊂ ℝ^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FeasibleSet {
    Unconstrained { dim: usize },
    Box { lo: Point, hi: Point },
    Ball { center: Point, radius: f64 },
    /// `{x ≥ 0 : Σ x_i = scale}`
    Simplex { dim: usize, scale: f64 },
}

impl FeasibleSet {
    pub fn unconstrained(dim: usize) -> Self {
        FeasibleSet::Unconstrained { dim }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        FeasibleSet::Box { lo: Point::filled(dim, lo), hi: Point::filled(dim, hi) }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        FeasibleSet::Ball { center: Point::zeros(dim), radius }
    }

    pub fn simplex(dim: usize, scale: f64) -> Self {
        FeasibleSet::Simplex { dim, scale }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FeasibleSet::Unconstrained { dim } | FeasibleSet::Simplex { dim, .. } if *dim == 0 => {
                Err(Error::InvalidParameter("feasible set of dimension 0".into()))
            }
            FeasibleSet::Box { lo, hi } => {
                hi.check_dim(lo.dim())?;
                if let Some(j) = (0..lo.dim()).find(|&j| lo[j] > hi[j]) {
                    return Err(Error::InvalidParameter(format!("box has lo > hi at coordinate {j}")));
                }
                Ok(())
            }
            FeasibleSet::Ball { radius, .. } if !(radius.is_finite() && *radius > 0.0) => {
                Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")))
            }
            FeasibleSet::Simplex { scale, .. } if !(scale.is_finite() && *scale > 0.0) => {
                Err(Error::InvalidParameter(format!("simplex scale {scale} must be positive")))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Unconstrained { dim } | FeasibleSet::Simplex { dim, .. } => *dim,
            FeasibleSet::Box { lo, .. } => lo.dim(),
            FeasibleSet::Ball { center, .. } => center.dim(),
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, FeasibleSet::Unconstrained { .. })
    }

    pub fn is_bounded(&self) -> bool {
        !self.is_unconstrained()
    }

    /// Euclidean diameter `sup ‖x - y‖`; `+∞` when unbounded.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Unconstrained { .. } => f64::INFINITY,
            FeasibleSet::Box { lo, hi } => hi.sub(lo).norm(),
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
            FeasibleSet::Simplex { dim, scale } => {
                if *dim >= 2 {
                    scale * std::f64::consts::SQRT_2
                } else {
                    0.0
                }
            }
        }
    }

    /// Deterministic reference point used to initialize solvers and break ties.
    pub fn center(&self) -> Point {
        match self {
            FeasibleSet::Unconstrained { dim } => Point::zeros(*dim),
            FeasibleSet::Box { lo, hi } => lo.add(hi).scale(0.5),
            FeasibleSet::Ball { center, .. } => center.clone(),
            FeasibleSet::Simplex { dim, scale } => Point::filled(*dim, scale / *dim as f64),
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        if x.dim() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Unconstrained { .. } => true,
            FeasibleSet::Box { lo, hi } => (0..x.dim()).all(|j| {
                x[j] >= lo[j] - FEAS_TOL * (1.0 + lo[j].abs()) && x[j] <= hi[j] + FEAS_TOL * (1.0 + hi[j].abs())
            }),
            FeasibleSet::Ball { center, radius } => x.sub(center).norm() <= radius * (1.0 + FEAS_TOL),
            FeasibleSet::Simplex { scale, .. } => {
                let tol = FEAS_TOL * (1.0 + scale);
                x.iter().all(|&v| v >= -tol) && (x.iter().sum::<f64>() - scale).abs() <= tol * x.dim() as f64
            }
        }
    }

    /// Whether `x + αz` stays feasible for all small `α > 0` (tangent-cone test).
    pub fn is_feasible_direction(&self, x: &Point, z: &Point) -> bool {
        let ztol = FEAS_TOL * (1.0 + z.norm_inf());
        match self {
            FeasibleSet::Unconstrained { .. } => true,
            FeasibleSet::Box { lo, hi } => (0..x.dim()).all(|j| {
                let at_hi = x[j] >= hi[j] - FEAS_TOL * (1.0 + hi[j].abs());
                let at_lo = x[j] <= lo[j] + FEAS_TOL * (1.0 + lo[j].abs());
                !(at_hi && z[j] > ztol) && !(at_lo && z[j] < -ztol)
            }),
            FeasibleSet::Ball { center, radius } => {
                let u = x.sub(center);
                if u.norm() < radius * (1.0 - FEAS_TOL) {
                    return true;
                }
                u.dot(z) <= FEAS_TOL * radius * (1.0 + z.norm())
            }
            FeasibleSet::Simplex { scale, .. } => {
                let tol = FEAS_TOL * (1.0 + scale);
                z.iter().sum::<f64>().abs() <= ztol * x.dim() as f64
                    && (0..x.dim()).all(|j| x[j] > tol || z[j] >= -ztol)
            }
        }
    }

    /// Euclidean projection.
    pub fn project(&self, y: &Point) -> Result<Point> {
        y.check_dim(self.dim())?;
        Ok(match self {
            FeasibleSet::Unconstrained { .. } => y.clone(),
            FeasibleSet::Box { lo, hi } => {
                Point::raw((0..y.dim()).map(|j| y[j].clamp(lo[j], hi[j])).collect())
            }
            FeasibleSet::Ball { center, radius } => {
                let u = y.sub(center);
                let n = u.norm();
                if n <= *radius {
                    y.clone()
                } else {
                    center.axpy(radius / n, &u)
                }
            }
            FeasibleSet::Simplex { scale, .. } => project_simplex(y, *scale),
        })
    }

    /// Linear minimization oracle `argmin_{x∈𝓧} ⟨c, x⟩`; ties resolve toward `tie`.
    pub fn linear_minimizer(&self, c: &Point, tie: &Point) -> Result<Point> {
        c.check_dim(self.dim())?;
        match self {
            FeasibleSet::Unconstrained { .. } => {
                if c.is_zero() {
                    Ok(tie.clone())
                } else {
                    Err(Error::IllPosed("linear objective is unbounded below on an unconstrained set".into()))
                }
            }
            FeasibleSet::Box { lo, hi } => Ok(Point::raw(
                (0..c.dim())
                    .map(|j| match c[j].partial_cmp(&0.0) {
                        Some(std::cmp::Ordering::Greater) => lo[j],
                        Some(std::cmp::Ordering::Less) => hi[j],
                        _ => tie[j].clamp(lo[j], hi[j]),
                    })
                    .collect(),
            )),
            FeasibleSet::Ball { center, radius } => {
                let n = c.norm();
                if n == 0.0 {
                    self.project(tie)
                } else {
                    Ok(center.axpy(-radius / n, c))
                }
            }
            FeasibleSet::Simplex { dim, scale } => {
                let min = c.iter().copied().fold(f64::INFINITY, f64::min);
                let ties: Vec<usize> = (0..*dim).filter(|&j| c[j] == min).collect();
                let mut x = vec![0.0; *dim];
                for &j in &ties {
                    x[j] = scale / ties.len() as f64;
                }
                Ok(Point::raw(x))
            }
        }
    }

    /// Uniform-ish random feasible point (exact uniform for Box; radial for Ball;
    /// Dirichlet(1) for Simplex). Unconstrained draws from `[-scale, scale]^d`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Point {
        let d = self.dim();
        match self {
            FeasibleSet::Unconstrained { .. } => Point::raw((0..d).map(|_| rng.gen_range(-scale..=scale)).collect()),
            FeasibleSet::Box { lo, hi } => Point::raw(
                (0..d)
                    .map(|j| if lo[j] == hi[j] { lo[j] } else { rng.gen_range(lo[j]..=hi[j]) })
                    .collect(),
            ),
            FeasibleSet::Ball { center, radius } => {
                let dir: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let dir = Point::raw(dir);
                let n = dir.norm().max(1e-300);
                let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
                center.axpy(r / n, &dir)
            }
            FeasibleSet::Simplex { scale, .. } => {
                let e: Vec<f64> = (0..d).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                Point::raw(e.iter().map(|v| scale * v / s).collect())
            }
        }
    }
}

/// Sort-based Euclidean projection onto `{x ≥ 0 : Σx = s}`.
pub fn project_simplex(y: &Point, s: f64) -> Point {
    let mut u: Vec<f64> = y.as_slice().to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite coordinates"));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - s) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.map(|v| (v - theta).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(v: &[f64]) -> Point {
        Point::from_slice(v).unwrap()
    }

    #[test]
    fn projection_examples() {
        let b = FeasibleSet::cube(2, 0.0, 1.0);
        assert_eq!(b.project(&p(&[2.0, -0.5])).unwrap(), p(&[1.0, 0.0]));
        let s = FeasibleSet::simplex(2, 1.0);
        assert_eq!(s.project(&p(&[0.5, 0.5])).unwrap(), p(&[0.5, 0.5]));
        assert_eq!(s.project(&p(&[-0.5, 0.5])).unwrap(), p(&[0.0, 1.0]));
        let ball = FeasibleSet::ball(2, 1.0);
        let q = ball.project(&p(&[3.0, 4.0])).unwrap();
        assert!((q[0] - 0.6).abs() < 1e-15 && (q[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn projection_is_idempotent_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets = [FeasibleSet::cube(3, -1.0, 2.0), FeasibleSet::ball(3, 1.5), FeasibleSet::simplex(3, 2.0)];
        for set in &sets {
            for _ in 0..200 {
                let y = FeasibleSet::unconstrained(3).sample(&mut rng, 5.0);
                let x = set.project(&y).unwrap();
                assert!(set.contains(&x), "{set:?} {x:?}");
                let xx = set.project(&x).unwrap();
                assert!(x.sub(&xx).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn diameters() {
        assert_eq!(FeasibleSet::ball(4, 1.0).diameter(), 2.0);
        assert_eq!(FeasibleSet::cube(4, 0.0, 1.0).diameter(), 2.0);
        assert!(FeasibleSet::unconstrained(2).diameter().is_infinite());
        assert!((FeasibleSet::simplex(3, 1.0).diameter() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn lmo_examples() {
        let ball = FeasibleSet::ball(2, 2.0);
        assert_eq!(ball.linear_minimizer(&p(&[1.0, 0.0]), &Point::zeros(2)).unwrap(), p(&[-2.0, 0.0]));
        let b = FeasibleSet::cube(2, -1.0, 1.0);
        assert_eq!(b.linear_minimizer(&p(&[1.0, 0.0]), &p(&[0.0, 0.3])).unwrap(), p(&[-1.0, 0.3]));
        let s = FeasibleSet::simplex(3, 1.0);
        assert_eq!(s.linear_minimizer(&p(&[1.0, -1.0, 0.0]), &s.center()).unwrap(), p(&[0.0, 1.0, 0.0]));
        assert!(FeasibleSet::unconstrained(2).linear_minimizer(&p(&[1.0, 0.0]), &Point::zeros(2)).is_err());
    }

    #[test]
    fn tangent_cone() {
        let b = FeasibleSet::cube(2, 0.0, 1.0);
        assert!(!b.is_feasible_direction(&p(&[1.0, 0.5]), &p(&[1.0, 0.0])));
        assert!(b.is_feasible_direction(&p(&[1.0, 0.5]), &p(&[-1.0, 1.0])));
        let ball = FeasibleSet::ball(2, 1.0);
        assert!(!ball.is_feasible_direction(&p(&[1.0, 0.0]), &p(&[1.0, 0.0])));
        assert!(ball.is_feasible_direction(&p(&[1.0, 0.0]), &p(&[-1.0, 0.3])));
        let s = FeasibleSet::simplex(2, 1.0);
        assert!(!s.is_feasible_direction(&p(&[0.0, 1.0]), &p(&[-1.0, 1.0])));
        assert!(s.is_feasible_direction(&p(&[0.0, 1.0]), &p(&[1.0, -1.0])));
    }

    #[test]
    fn validation() {
        assert!(FeasibleSet::Box { lo: p(&[1.0]), hi: p(&[0.0]) }.validate().is_err());
        assert!(FeasibleSet::ball(2, 0.0).validate().is_err());
        assert!(FeasibleSet::simplex(2, -1.0).validate().is_err());
        assert!(FeasibleSet::unconstrained(0).validate().is_err());
    }
}
