use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BoundCase, ComparatorPolicy, ExperimentConfig};
use crate::error::{Error, Result};
use crate::hilbert::Point;
use crate::learners::{HintPolicy, OnlineLearner, Preset, Trace};
use crate::losses::{variation_estimate, Feedback, Loss, LossSequence};
use crate::regret::{
    bound_ao, bound_final_attack, bound_forward, bound_rate, bound_variational_smooth, decomposition_residual,
    empirical_regret, fmt_f64, forward_regret, offline_best, scale_tau, BoundInputs, BoundReport, Certificate,
    ComparatorQuality, EstimateQuality, Ledger, LedgerOptions,
};

/// Execution controls shared by `run`, `sweep` and `verify`.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads (all cores when absent).
    pub jobs: Option<usize>,
    /// Overrides the config's certificate tolerance.
    pub tol: Option<f64>,
}

/// Results of one `(config, seed)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub dim: usize,
    /// `R_T(x*)`, including composite terms when the learner has them.
    pub regret: f64,
    pub forward_regret: f64,
    pub linearized_regret: f64,
    pub decomposition_residual: f64,
    /// `Σ ‖g_t - g̃_t‖²`
    pub hint_error_sum: f64,
    pub comparator: Point,
    pub comparator_quality: ComparatorQuality,
    pub solver_calls: usize,
    /// Exactly-zero coordinates of `x_{T+1}`.
    pub zeros_final: usize,
    /// Mean number of exactly-zero coordinates of `x_{t+1}` over the run.
    pub zeros_mean: f64,
    pub bounds: Vec<BoundReport>,
}

/// A cell's report plus its ledger and CSV export.
#[derive(Clone, Debug)]
pub struct CellOutput {
    pub report: CellReport,
    pub ledger: Ledger,
    pub csv: String,
}

/// Seed-aggregated view of one bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub name: String,
    pub bound_mean: f64,
    pub empirical_mean: f64,
    /// Standard error of the empirical mean (0 for a single seed).
    pub empirical_se: f64,
    /// Pathwise bounds are checked cell by cell; the others in expectation.
    pub pathwise: bool,
    /// Smallest per-cell slack for pathwise bounds, else
    /// `bound_mean - (empirical_mean + 2·SE)`.
    pub margin: f64,
    pub holds: bool,
    /// Cells whose own bound value is exceeded.
    pub violating_cells: usize,
    /// Cells in which some certificate failed.
    pub flagged_cells: usize,
    pub quality: EstimateQuality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub preset: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub dim: usize,
    pub seeds: Vec<u64>,
    pub regret_mean: f64,
    pub regret_se: f64,
    pub bounds: Vec<BoundSummary>,
    pub cells: Vec<CellReport>,
}

impl RunReport {
    /// Every failed certificate and every bound that does not hold.
    pub fn failures(&self) -> Vec<Error> {
        let mut out = Vec::new();
        for c in &self.cells {
            for b in &c.bounds {
                for cert in b.certificates.iter().filter(|c| !c.passed) {
                    out.push(Error::CertificateFailed(format!(
                        "seed {}: {} certificate {} ({})",
                        c.seed, b.name, cert.name, cert.detail
                    )));
                }
            }
        }
        for b in self.bounds.iter().filter(|b| !b.holds) {
            out.push(Error::BoundViolated(if b.pathwise {
                format!("{}: exceeded in {} of {} cells (worst slack {})", b.name, b.violating_cells, self.cells.len(), b.margin)
            } else {
                format!(
                    "{}: empirical {} + 2·SE {} exceeds bound {}",
                    b.name, b.empirical_mean, b.empirical_se, b.bound_mean
                )
            }));
        }
        out
    }

    /// `Ok` when nothing failed, otherwise the first failure.
    pub fn check(&self) -> Result<()> {
        match self.failures().into_iter().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// A finished run: the report and one CSV ledger per seed.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub ledgers: Vec<(u64, String)>,
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Map `f` over `items` on a pool of `jobs` threads, preserving order.
pub fn par_map<T: Sync, U: Send>(jobs: Option<usize>, items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Result<Vec<U>> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    let pool = b.build().map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

/// The learner config with perfect hints resolved against the loss stream.
fn resolved_learner(cfg: &ExperimentConfig, seed: u64) -> Result<crate::learners::LearnerConfig> {
    let mut lc = cfg.learner.clone();
    if matches!(lc.hint_policy(), HintPolicy::Perfect) {
        if !cfg.has_oblivious_gradients() {
            return Err(Error::InvalidConfig("perfect hints need a deterministic linear loss stream".into()));
        }
        let mut seq = LossSequence::new(cfg.sequence.clone(), seed)?.with_scale(cfg.loss_scale)?;
        let x0 = Point::zeros(cfg.set.dim());
        let hints = (0..cfg.horizon).map(|_| seq.next_loss().gradient(&x0)).collect();
        lc.hints = Some(HintPolicy::Custom { hints });
    }
    Ok(lc)
}

/// Play the learner against the sequence. With `recorded`, the feedback
/// gradients come from the given `(x_t, g_t)` rows and every play is checked
/// against the recorded one.
fn simulate(cfg: &ExperimentConfig, seed: u64, recorded: Option<&[(Point, Point)]>) -> Result<(Trace, Vec<Loss>)> {
    let lc = resolved_learner(cfg, seed)?;
    let mut learner = OnlineLearner::new(&lc, &cfg.set, Some(cfg.horizon))?;
    let mut seq = LossSequence::new(cfg.sequence.clone(), seed)?.with_scale(cfg.loss_scale)?;
    let mut losses = Vec::with_capacity(cfg.horizon);
    for t in 0..cfg.horizon {
        let fb = match recorded {
            None => seq.feedback(learner.x())?,
            Some(rows) => {
                let (x, g) = &rows[t];
                if learner.x() != x {
                    return Err(Error::ReplayMismatch(format!(
                        "round {}: recomputed x_t {:?} differs from the recorded {:?}",
                        t + 1,
                        learner.x(),
                        x
                    )));
                }
                let loss = seq.next_loss();
                let grad = loss.gradient(x);
                Feedback { loss, g: g.clone(), grad }
            }
        };
        losses.push(fb.loss.clone());
        learner.observe(&fb)?;
    }
    Ok((learner.into_trace(), losses))
}

fn losses_smoothness(losses: &[Loss]) -> Option<f64> {
    losses.iter().try_fold(0.0f64, |acc, f| f.smoothness().map(|l| acc.max(l)))
}

fn bound_inputs(cfg: &ExperimentConfig, losses: &[Loss], seed: u64, tol: f64) -> Result<BoundInputs> {
    let mut inp = BoundInputs::new();
    inp.tol = tol;
    inp.stochastic = cfg.sequence.is_stochastic();
    inp.f_star = cfg.inputs.f_star;
    inp.tau = cfg.inputs.tau;
    inp.smoothness = cfg.inputs.smoothness.or_else(|| losses_smoothness(losses));
    let r = cfg.set.diameter();
    inp.diameter = match &cfg.learner.preset {
        Preset::FinalAttack { diameter: Some(d), .. } => Some(*d),
        _ if r.is_finite() => Some(r),
        _ => None,
    };
    if cfg.bound_cases().iter().any(|c| c.needs_variation()) {
        inp.variation = Some(variation_estimate(losses, &cfg.set, cfg.inputs.probes, seed)?);
    }
    Ok(inp)
}

fn compute_bound(cfg: &ExperimentConfig, case: BoundCase, ledger: &Ledger, inputs: &BoundInputs) -> Result<BoundReport> {
    match case {
        BoundCase::Forward => Ok(bound_forward(ledger)),
        BoundCase::Ao => Ok(bound_ao(ledger, inputs)),
        BoundCase::VariationalSmooth => bound_variational_smooth(ledger, inputs),
        BoundCase::FinalAttack => {
            // the schedule was tuned with the preset's L, which the bound must use
            let mut inp = inputs.clone();
            if let Preset::FinalAttack { smoothness, .. } = &cfg.learner.preset {
                inp.smoothness = Some(inputs.smoothness.map_or(*smoothness, |l| l.max(*smoothness)));
            }
            bound_final_attack(ledger, &inp)
        }
        other => bound_rate(ledger, inputs, other.rate_case().expect("rate case")),
    }
}

/// Replace a bound on the linearized regret by its τ-star-convex version,
/// certified on the visited points: `τ (f(x_t) - f(x*)) ≤ -f'(x_t; x* - x_t)`.
fn tau_scaled(report: &BoundReport, ledger: &Ledger, tau: f64, tol: f64) -> Result<BoundReport> {
    let mut out = scale_tau(report, tau)?;
    out.certificates.retain(|c| c.name != "nonnegative-loss-divergence");
    let worst = ledger
        .rounds
        .iter()
        .map(|r| {
            let neg_deriv = r.breg_loss - r.loss_star + r.loss;
            neg_deriv - tau * (r.loss - r.loss_star)
        })
        .fold(f64::INFINITY, f64::min);
    let worst = if ledger.rounds.is_empty() { 0.0 } else { worst };
    out.certificates.push(Certificate {
        name: "tau-star-convexity".into(),
        passed: worst >= -tol,
        detail: format!("min -f'(x_t; x* - x_t) - τ(f(x_t) - f(x*)) = {worst:.3e}"),
    });
    out.flagged = out.certificates.iter().any(|c| !c.passed);
    Ok(out)
}

fn evaluate(cfg: &ExperimentConfig, seed: u64, trace: &Trace, losses: &[Loss], tol: f64) -> Result<CellOutput> {
    let implicit = cfg.learner.preset.is_implicit();
    let l1_sum: f64 = trace.records.iter().filter_map(|r| r.psi.as_ref()).map(|p| p.l1_weight()).sum();
    let (x_star, quality) = match &cfg.comparator {
        ComparatorPolicy::Explicit { point } => (point.clone(), ComparatorQuality::Explicit),
        ComparatorPolicy::OfflineBest => offline_best(losses, l1_sum, &cfg.set, &cfg.learner.solver)?,
    };
    let ledger = Ledger::build(trace, losses, &x_star, LedgerOptions { implicit })?;
    let inputs = bound_inputs(cfg, losses, seed, tol)?;
    let mut bounds = Vec::new();
    for case in cfg.bound_cases() {
        let mut rep = compute_bound(cfg, case, &ledger, &inputs)?;
        if let Some(tau) = cfg.inputs.tau {
            rep = tau_scaled(&rep, &ledger, tau, tol)?;
        }
        bounds.push(rep);
    }
    let mut csv = Vec::new();
    ledger.write_csv(&mut csv, bounds.first())?;
    let csv = String::from_utf8(csv).expect("csv is utf-8");

    let zeros = |x: &Point| x.iter().filter(|v| **v == 0.0).count();
    let iterates = ledger.iterates();
    let zeros_mean = if ledger.horizon() == 0 {
        0.0
    } else {
        iterates[1..].iter().map(zeros).sum::<usize>() as f64 / ledger.horizon() as f64
    };
    let report = CellReport {
        seed,
        horizon: cfg.horizon,
        dim: cfg.set.dim(),
        regret: empirical_regret(&ledger, ledger.composite),
        forward_regret: forward_regret(&ledger),
        linearized_regret: ledger.linearized_regret(),
        decomposition_residual: decomposition_residual(&ledger),
        hint_error_sum: ledger.hint_error_sum(),
        comparator: x_star,
        comparator_quality: quality,
        solver_calls: ledger.solver_calls,
        zeros_final: zeros(iterates.last().expect("x_1")),
        zeros_mean,
        bounds: bounds
            .into_iter()
            .map(|mut b| {
                b.cumulative.clear();
                b
            })
            .collect(),
    };
    Ok(CellOutput { report, ledger, csv })
}

/// Run one `(config, seed)` cell.
pub fn run_cell(cfg: &ExperimentConfig, seed: u64) -> Result<CellOutput> {
    run_cell_with(cfg, seed, cfg.inputs.tol)
}

fn run_cell_with(cfg: &ExperimentConfig, seed: u64, tol: f64) -> Result<CellOutput> {
    let (trace, losses) = simulate(cfg, seed, None)?;
    evaluate(cfg, seed, &trace, &losses, tol)
}

fn summarize(cfg: &ExperimentConfig, cells: Vec<CellReport>) -> RunReport {
    let regrets: Vec<f64> = cells.iter().map(|c| c.regret).collect();
    let (regret_mean, regret_se) = mean_se(&regrets);
    let bound_tol = cfg.inputs.bound_tol;
    let cases = cfg.bound_cases();
    let n_bounds = cells.first().map_or(0, |c| c.bounds.len());
    let bounds = (0..n_bounds)
        .map(|k| {
            let reps: Vec<&BoundReport> = cells.iter().map(|c| &c.bounds[k]).collect();
            let (bound_mean, _) = mean_se(&reps.iter().map(|b| b.value).collect::<Vec<_>>());
            let (empirical_mean, empirical_se) = mean_se(&reps.iter().map(|b| b.empirical).collect::<Vec<_>>());
            let pathwise = cases.get(k).is_some_and(|c| c.pathwise());
            let cell_ok = |b: &&&BoundReport| b.slack >= -bound_tol * b.value.abs().max(1.0);
            let violating_cells = reps.iter().filter(|b| !cell_ok(b)).count();
            let (margin, holds) = if pathwise {
                let m = reps.iter().map(|b| b.slack).fold(f64::INFINITY, f64::min);
                (m, violating_cells == 0)
            } else {
                let m = bound_mean - (empirical_mean + 2.0 * empirical_se);
                (m, m >= -bound_tol * bound_mean.abs().max(1.0))
            };
            BoundSummary {
                name: reps[0].name.clone(),
                bound_mean,
                empirical_mean,
                empirical_se,
                pathwise,
                margin,
                holds,
                violating_cells,
                flagged_cells: reps.iter().filter(|b| b.flagged).count(),
                quality: reps.iter().map(|b| b.quality).max().unwrap_or(EstimateQuality::Exact),
            }
        })
        .collect();
    RunReport {
        name: cfg.name.clone(),
        preset: cfg.learner.preset.name().into(),
        horizon: cfg.horizon,
        dim: cfg.set.dim(),
        seeds: cells.iter().map(|c| c.seed).collect(),
        regret_mean,
        regret_se,
        bounds,
        cells,
    }
}

/// Run every seed of a config (in parallel) and aggregate.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutcome> {
    cfg.validate()?;
    let tol = opts.tol.unwrap_or(cfg.inputs.tol);
    let seeds = cfg.seed_list();
    let outs = par_map(opts.jobs, &seeds, |&s| run_cell_with(cfg, s, tol))?;
    let outs: Vec<CellOutput> = outs.into_iter().collect::<Result<_>>()?;
    let ledgers = outs.iter().map(|o| (o.report.seed, o.csv.clone())).collect();
    let report = summarize(cfg, outs.into_iter().map(|o| o.report).collect());
    Ok(RunOutcome { report, ledgers })
}

/// Write `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn to_json_pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

/// `DIR/<name>/seed-<s>.csv` for every seed and `DIR/<name>/report.json`.
pub fn write_run(outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let base = dir.join(&outcome.report.name);
    let mut written = Vec::new();
    for (seed, csv) in &outcome.ledgers {
        let p = base.join(format!("seed-{seed}.csv"));
        write_atomic(&p, csv.as_bytes())?;
        written.push(p);
    }
    let p = base.join("report.json");
    write_atomic(&p, to_json_pretty(&outcome.report).as_bytes())?;
    written.push(p);
    Ok(written)
}

/// One row of a sweep summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub dim: usize,
    pub sigma: Option<f64>,
    pub drift: Option<f64>,
    pub seeds: usize,
    pub regret_mean: f64,
    pub regret_se: f64,
    /// First configured bound.
    pub bound: Option<String>,
    pub bound_mean: Option<f64>,
    pub holds: Option<bool>,
    /// `regret_mean` over the previous row with the same `dim`, `sigma` and `drift`.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub name: String,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunReport>,
}

impl SweepReport {
    pub fn failures(&self) -> Vec<Error> {
        self.runs.iter().flat_map(|r| r.failures()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cell,T,dim,sigma,drift,seeds,regret_mean,regret_se,bound,bound_mean,holds,ratio\n");
        let opt = |v: Option<f64>| v.map_or(String::new(), fmt_f64);
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.cell,
                r.horizon,
                r.dim,
                opt(r.sigma),
                opt(r.drift),
                r.seeds,
                fmt_f64(r.regret_mean),
                fmt_f64(r.regret_se),
                r.bound.clone().unwrap_or_default(),
                opt(r.bound_mean),
                r.holds.map_or(String::new(), |h| h.to_string()),
                opt(r.ratio),
            )
            .expect("write to string");
        }
        s
    }
}

/// Run every grid cell over every seed; cells × seeds share one worker pool.
pub fn sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepReport> {
    cfg.validate()?;
    let tol = opts.tol.unwrap_or(cfg.inputs.tol);
    let cells = cfg.cells()?;
    let jobs: Vec<(usize, u64)> = cells
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.config.seed_list().into_iter().map(move |s| (i, s)))
        .collect();
    let outs = par_map(opts.jobs, &jobs, |&(i, s)| run_cell_with(&cells[i].config, s, tol).map(|o| o.report))?;
    let mut per_cell: Vec<Vec<CellReport>> = vec![Vec::new(); cells.len()];
    for ((i, _), out) in jobs.iter().zip(outs) {
        per_cell[*i].push(out?);
    }
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut last: BTreeMap<(usize, Option<u64>, Option<u64>), f64> = BTreeMap::new();
    for (i, (cell, reports)) in cells.iter().zip(per_cell).enumerate() {
        let run = summarize(&cell.config, reports);
        let key = (cell.dim, cell.sigma.map(f64::to_bits), cell.drift.map(f64::to_bits));
        let ratio = last.get(&key).map(|prev| run.regret_mean / prev);
        last.insert(key, run.regret_mean);
        let first = run.bounds.first();
        rows.push(SweepRow {
            cell: i,
            horizon: cell.horizon,
            dim: cell.dim,
            sigma: cell.sigma,
            drift: cell.drift,
            seeds: run.seeds.len(),
            regret_mean: run.regret_mean,
            regret_se: run.regret_se,
            bound: first.map(|b| b.name.clone()),
            bound_mean: first.map(|b| b.bound_mean),
            holds: first.map(|b| b.holds),
            ratio,
        });
        runs.push(run);
    }
    Ok(SweepReport { name: cfg.name.clone(), rows, runs })
}

/// `DIR/<name>/sweep.csv` and `DIR/<name>/sweep.json`.
pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let base = dir.join(&report.name);
    let csv = base.join("sweep.csv");
    write_atomic(&csv, report.to_csv().as_bytes())?;
    let json = base.join("sweep.json");
    write_atomic(&json, to_json_pretty(report).as_bytes())?;
    Ok(vec![csv, json])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub seed: u64,
    pub rows: usize,
}

fn parse_f64(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse().map_err(|_| Error::ReplayMismatch(format!("not a number: {s:?}"))),
    }
}

/// The `(x_t, g_t)` columns of a ledger CSV.
pub fn read_ledger_points(csv: &str) -> Result<Vec<(Point, Point)>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| Error::ReplayMismatch("empty ledger".into()))?.split(',').collect();
    let d = header.iter().filter(|h| h.starts_with('x') && h[1..].parse::<usize>().is_ok()).count();
    let expect: Vec<String> = std::iter::once("t".to_string())
        .chain((0..d).map(|j| format!("x{j}")))
        .chain((0..d).map(|j| format!("g{j}")))
        .collect();
    if d == 0 || header.len() < 1 + 2 * d || header[..1 + 2 * d] != expect.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        return Err(Error::ReplayMismatch("ledger header does not start with t, x_j, g_j".into()));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != header.len() {
            return Err(Error::ReplayMismatch(format!("row {} has {} columns, expected {}", k + 1, cols.len(), header.len())));
        }
        let nums = |r: std::ops::Range<usize>| -> Result<Point> {
            Point::new(cols[r].iter().map(|s| parse_f64(s)).collect::<Result<Vec<_>>>()?)
        };
        rows.push((nums(1..1 + d)?, nums(1 + d..1 + 2 * d)?));
    }
    Ok(rows)
}

/// Recompute a ledger CSV from its `(x_t, g_t)` columns alone (plus the
/// config that produced it) and require a byte-identical result.
pub fn replay(cfg: &ExperimentConfig, seed: u64, csv: &str) -> Result<ReplayReport> {
    cfg.validate()?;
    let rows = read_ledger_points(csv)?;
    if rows.len() != cfg.horizon {
        return Err(Error::ReplayMismatch(format!("ledger has {} rows, config T = {}", rows.len(), cfg.horizon)));
    }
    let (trace, losses) = simulate(cfg, seed, Some(&rows))?;
    let again = evaluate(cfg, seed, &trace, &losses, cfg.inputs.tol)?.csv;
    for (k, (a, b)) in csv.lines().zip(again.lines()).enumerate() {
        if a != b {
            return Err(Error::ReplayMismatch(format!("line {} differs:\n  recorded   {a}\n  recomputed {b}", k + 1)));
        }
    }
    if csv.lines().count() != again.lines().count() {
        return Err(Error::ReplayMismatch("line counts differ".into()));
    }
    Ok(ReplayReport { seed, rows: rows.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::LearnerConfig;
    use crate::losses::{LossKind, Noise, SequenceSpec};
    use crate::solvers::FeasibleSet;

    fn ogd_linear() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            "ogd-linear",
            LearnerConfig::new(Preset::Ogd { eta: 0.1 }),
            SequenceSpec::RandomSigns { dim: 3, magnitude: 0.5 },
            FeasibleSet::ball(3, 1.0),
            100,
        );
        c.seeds = vec![1];
        c.bounds = vec![BoundCase::OoFtrl, BoundCase::Forward];
        c
    }

    #[test]
    fn run_writes_a_row_per_round_and_the_bound_holds() {
        let out = run(&ogd_linear(), &RunOptions::default()).unwrap();
        let csv = &out.ledgers[0].1;
        assert_eq!(csv.lines().count(), 101);
        let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
        let n = last.len();
        let (regret, bound): (f64, f64) = (last[n - 3].parse().unwrap(), last[n - 2].parse().unwrap());
        assert!(regret <= bound);
        assert!(out.report.check().is_ok(), "{:?}", out.report.failures());
    }

    #[test]
    fn runs_are_deterministic_and_replayable() {
        let cfg = ogd_linear();
        let a = run(&cfg, &RunOptions { jobs: Some(2), tol: None }).unwrap();
        let b = run(&cfg, &RunOptions { jobs: Some(1), tol: None }).unwrap();
        assert_eq!(a.ledgers, b.ledgers);
        assert_eq!(to_json_pretty(&a.report), to_json_pretty(&b.report));
        assert_eq!(replay(&cfg, 1, &a.ledgers[0].1).unwrap().rows, 100);

        // a tampered gradient breaks the replay
        let tampered = a.ledgers[0].1.replacen(",0.5,", ",0.25,", 1);
        assert!(matches!(replay(&cfg, 1, &tampered), Err(Error::ReplayMismatch(_))));
    }

    #[test]
    fn stochastic_runs_aggregate_over_seeds() {
        let mut cfg = ExperimentConfig::new(
            "sgd",
            LearnerConfig::new(Preset::Ogd { eta: 0.5 }),
            SequenceSpec::Stochastic {
                loss: Loss::half_sq_dist(Point::from_slice(&[0.2, -0.1]).unwrap()),
                noise: Noise::Gaussian { sigma: 0.3 },
            },
            FeasibleSet::ball(2, 1.0),
            200,
        );
        cfg.seeds = (0..8).collect();
        cfg.bounds = vec![BoundCase::SoFtrl];
        let out = run(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(out.report.cells.len(), 8);
        assert!(out.report.regret_se > 0.0);
        assert!(out.report.bounds[0].holds, "{:?}", out.report.bounds[0]);
        let seeds: Vec<u64> = out.report.cells.iter().map(|c| c.seed).collect();
        assert_eq!(seeds, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn perfect_hints_are_resolved() {
        let mut cfg = ogd_linear();
        cfg.learner = LearnerConfig::new(Preset::AoFtrlProx { eta: 1.0, full: false }).with_hints(HintPolicy::Perfect);
        cfg.bounds = vec![BoundCase::Ao];
        let out = run(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(out.report.cells[0].hint_error_sum, 0.0);
    }

    #[test]
    fn sweep_reports_ratios_per_group() {
        let mut cfg = ogd_linear();
        cfg.bounds = vec![BoundCase::OoFtrl];
        cfg.grid = Some(super::super::Grid { horizon: vec![50, 100], dim: vec![2, 3], ..Default::default() });
        let rep = sweep(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 4);
        assert!(rep.rows[0].ratio.is_none() && rep.rows[1].ratio.is_some() && rep.rows[2].ratio.is_none());
        assert_eq!(rep.to_csv().lines().count(), 5);
    }

    #[test]
    fn tau_scaling_replaces_the_divergence_certificate() {
        let mut cfg = ExperimentConfig::new(
            "sqrt",
            LearnerConfig::new(Preset::Ogd { eta: 0.05 }),
            SequenceSpec::Fixed { loss: Loss::new(LossKind::SqrtAbs { dim: 1 }) },
            FeasibleSet::cube(1, -1.0, 1.0),
            50,
        );
        cfg.comparator = ComparatorPolicy::Explicit { point: Point::zeros(1) };
        cfg.bounds = vec![BoundCase::OoFtrl];
        cfg.learner = LearnerConfig::new(Preset::Ogd { eta: 0.05 });
        // start away from the kink
        cfg.sequence = SequenceSpec::Fixed { loss: Loss::new(LossKind::SqrtAbs { dim: 1 }) };
        let plain = run(&cfg, &RunOptions::default()).unwrap();
        cfg.inputs.tau = Some(0.5);
        let scaled = run(&cfg, &RunOptions::default()).unwrap();
        let b = &scaled.report.cells[0].bounds[0];
        assert_eq!(b.name, "oo-ftrl/tau");
        assert!(b.certificates.iter().any(|c| c.name == "tau-star-convexity"));
        assert!((b.value - 2.0 * plain.report.cells[0].bounds[0].value).abs() < 1e-12);
    }

    #[test]
    fn mean_se_basics() {
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
