use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::Point;
use crate::losses::Loss;
use crate::regularizers::Regularizer;
use crate::solvers::{argmin, FeasibleSet, Objective, SolverOptions};

/// How the offline comparator was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparatorQuality {
    /// Common global minimizer of every loss (and of the composite term).
    SharedMinimizer,
    /// Solved by the argmin engine on the collapsed loss sum.
    Solved,
    /// Projected-subgradient estimate (non-smooth losses without a shared minimizer).
    Subgradient,
    /// Pinned by the caller.
    Explicit,
}

const SUBGRADIENT_ITERS: usize = 4000;

/// Group identical losses so that long stationary streams collapse to one term.
fn grouped(losses: &[Loss]) -> Vec<(Loss, f64)> {
    let mut out: Vec<(Loss, f64)> = Vec::new();
    for f in losses {
        match out.iter_mut().rev().take(16).find(|(g, _)| g == f) {
            Some(e) => e.1 += 1.0,
            None => out.push((f.clone(), 1.0)),
        }
    }
    out
}

/// Best fixed point in hindsight: `argmin_𝓧 Σ_t f_t(x) + α_sum ‖x‖₁`.
pub fn offline_best(losses: &[Loss], l1_sum: f64, set: &FeasibleSet, opts: &SolverOptions) -> Result<(Point, ComparatorQuality)> {
    let d = set.dim();
    if losses.is_empty() {
        return Ok((set.project(&Point::zeros(d))?, ComparatorQuality::SharedMinimizer));
    }
    let groups = grouped(losses);
    if let Some(c) = groups[0].0.star_center() {
        let shared = groups.iter().all(|(f, _)| f.star_center().as_ref() == Some(&c));
        if shared && set.contains(&c) && (l1_sum == 0.0 || c.is_zero()) {
            return Ok((c, ComparatorQuality::SharedMinimizer));
        }
    }
    let terms: Result<Vec<Regularizer>> = groups.iter().map(|(f, n)| f.scaled(*n).as_regularizer()).collect();
    if let Ok(mut terms) = terms {
        if l1_sum > 0.0 {
            terms.push(Regularizer::L1 { alpha: l1_sum });
        }
        let reg = Regularizer::sum(terms);
        let obj = Objective::from_regularizer(Point::zeros(d), &reg, set.clone())?.with_tie_break(set.center());
        let tight = SolverOptions { tol: opts.tol.min(1e-10), max_iter: opts.max_iter.max(20_000) };
        match argmin(&obj, &tight) {
            Ok(sol) => return Ok((sol.x, ComparatorQuality::Solved)),
            Err(Error::IllPosed(_) | Error::SolverFailure { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    subgradient(&groups, l1_sum, set).map(|x| (x, ComparatorQuality::Subgradient))
}

fn subgradient(groups: &[(Loss, f64)], l1_sum: f64, set: &FeasibleSet) -> Result<Point> {
    if !set.is_bounded() {
        return Err(Error::IllPosed("subgradient comparator needs a bounded feasible set; pin x* explicitly".into()));
    }
    let value = |x: &Point| groups.iter().map(|(f, n)| n * f.value(x)).sum::<f64>() + l1_sum * x.norm_l1();
    let radius = set.diameter();
    let mut x = set.center();
    let mut best = (value(&x), x.clone());
    for k in 1..=SUBGRADIENT_ITERS {
        let mut g = Point::zeros(x.dim());
        for (f, n) in groups {
            g = g.axpy(*n, &f.gradient(&x));
        }
        g = g.axpy(l1_sum, &x.map(|v| if v == 0.0 { 0.0 } else { v.signum() }));
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        x = set.project(&x.axpy(-radius / (gn * (k as f64).sqrt()), &g))?;
        let v = value(&x);
        if v < best.0 {
            best = (v, x.clone());
        }
    }
    Ok(best.1)
}
