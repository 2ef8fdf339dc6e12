use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{empirical_regret, forward_regret, half_dual_sq, Ledger, RoundRecord};
use crate::error::{Error, Result};
use crate::hilbert::QuadMetric;
use crate::learners::Algorithm;
use crate::losses::VariationEstimate;
use crate::regularizers::Regularizer;

/// How much of a bound rests on estimated quantities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateQuality {
    Exact,
    /// A supremum was replaced by a maximum over probe points (an under-estimate).
    ProbeEstimated,
    /// `f* = inf f` was replaced by the best observed value.
    Approximate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub value: f64,
    /// The same bound with the final `q_T(x*) - q_T(x_{T+1})` term dropped.
    pub value_drop_final: Option<f64>,
    /// The regret quantity the bound controls.
    pub empirical: f64,
    /// `value - empirical`
    pub slack: f64,
    pub terms: BTreeMap<String, f64>,
    pub quality: EstimateQuality,
    pub certificates: Vec<Certificate>,
    /// True when any certificate failed.
    pub flagged: bool,
    /// Bound value for every prefix horizon `1..=T`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub cumulative: Vec<f64>,
}

impl BoundReport {
    pub fn new(name: impl Into<String>, value: f64, empirical: f64) -> Self {
        BoundReport {
            name: name.into(),
            value,
            value_drop_final: None,
            empirical,
            slack: value - empirical,
            terms: BTreeMap::new(),
            quality: EstimateQuality::Exact,
            certificates: Vec::new(),
            flagged: false,
            cumulative: Vec::new(),
        }
    }

    fn term(mut self, name: &str, v: f64) -> Self {
        self.terms.insert(name.into(), v);
        self
    }

    fn certify(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.flagged |= !passed;
        self.certificates.push(Certificate { name: name.into(), passed, detail: detail.into() });
    }

    /// Whether the bound holds for this run within `tol` (relative to the bound).
    pub fn holds(&self, tol: f64) -> bool {
        self.empirical <= self.value + tol * self.value.abs().max(1.0)
    }
}

/// Constants a calculator may need beyond the ledger.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// `L`: the losses are `L`-smooth w.r.t. the Euclidean norm.
    #[serde(default)]
    pub smoothness: Option<f64>,
    /// `R`: Euclidean diameter of the feasible set.
    #[serde(default)]
    pub diameter: Option<f64>,
    /// Certified τ-star-convexity constant.
    #[serde(default)]
    pub tau: Option<f64>,
    /// `D` variation estimate of the loss stream.
    #[serde(default)]
    pub variation: Option<VariationEstimate>,
    /// `inf_𝓧 f`; the best observed value is used when absent.
    #[serde(default)]
    pub f_star: Option<f64>,
    /// Gradients are unbiased estimates of local sub-gradients.
    #[serde(default)]
    pub stochastic: bool,
    /// Tolerance for certificate checks.
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_tol() -> f64 {
    1e-9
}

impl BoundInputs {
    pub fn new() -> Self {
        BoundInputs { tol: default_tol(), ..Default::default() }
    }
}

/// Standard regret-rate bounds (oblivious, stochastic, smooth stochastic).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateCase {
    OoFtrl,
    OoMd,
    OoMdStrong,
    SoFtrl,
    SoMd,
    SoMdStrong,
    SmoothSoFtrl,
    SmoothSoMd,
    SmoothSoMdStrong,
}

impl RateCase {
    pub const ALL: [RateCase; 9] = [
        RateCase::OoFtrl,
        RateCase::OoMd,
        RateCase::OoMdStrong,
        RateCase::SoFtrl,
        RateCase::SoMd,
        RateCase::SoMdStrong,
        RateCase::SmoothSoFtrl,
        RateCase::SmoothSoMd,
        RateCase::SmoothSoMdStrong,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RateCase::OoFtrl => "oo-ftrl",
            RateCase::OoMd => "oo-md",
            RateCase::OoMdStrong => "oo-md-strong",
            RateCase::SoFtrl => "so-ftrl",
            RateCase::SoMd => "so-md",
            RateCase::SoMdStrong => "so-md-strong",
            RateCase::SmoothSoFtrl => "smooth-so-ftrl",
            RateCase::SmoothSoMd => "smooth-so-md",
            RateCase::SmoothSoMdStrong => "smooth-so-md-strong",
        }
    }

    pub fn algorithm(self) -> Algorithm {
        match self {
            RateCase::OoFtrl | RateCase::SoFtrl | RateCase::SmoothSoFtrl => Algorithm::Ftrl,
            _ => Algorithm::Md,
        }
    }

    pub fn is_stochastic(self) -> bool {
        !matches!(self, RateCase::OoFtrl | RateCase::OoMd | RateCase::OoMdStrong)
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, RateCase::SmoothSoFtrl | RateCase::SmoothSoMd | RateCase::SmoothSoMdStrong)
    }

    pub fn is_strong(self) -> bool {
        matches!(self, RateCase::OoMdStrong | RateCase::SoMdStrong | RateCase::SmoothSoMdStrong)
    }
}

/// Prefix sums of a round-0 term plus per-round terms: element `t-1` is
/// `init + Σ_{s≤t} f(s)`.
fn prefix(ledger: &Ledger, init: f64, f: impl Fn(&RoundRecord) -> f64) -> Vec<f64> {
    ledger.cumsum(f).into_iter().map(|v| init + v).collect()
}

fn last(v: &[f64], empty: f64) -> f64 {
    v.last().copied().unwrap_or(empty)
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn certify_nonneg_divergence(rep: &mut BoundReport, ledger: &Ledger, tol: f64) {
    let worst = ledger.rounds.iter().map(|r| r.breg_loss).fold(f64::INFINITY, f64::min);
    let worst = if ledger.rounds.is_empty() { 0.0 } else { worst };
    rep.certify(
        "nonnegative-loss-divergence",
        worst >= -tol * (1.0 + ledger.rounds.iter().map(|r| r.loss.abs()).fold(0.0, f64::max)),
        format!("min B_f(x*, x_t) = {worst:.3e}"),
    );
}

fn certify_subgradients(rep: &mut BoundReport, ledger: &Ledger, inputs: &BoundInputs, stochastic: bool) {
    let worst = ledger.rounds.iter().map(|r| r.delta).fold(f64::NEG_INFINITY, f64::max);
    let worst = if ledger.rounds.is_empty() { 0.0 } else { worst };
    let scale = 1.0 + ledger.rounds.iter().map(|r| r.g.norm() * r.x_t.sub(&ledger.x_star).norm()).fold(0.0, f64::max);
    let pointwise = worst <= inputs.tol * scale;
    if stochastic {
        rep.certify(
            "unbiased-gradients",
            inputs.stochastic || pointwise,
            if inputs.stochastic { "zero-mean gradient noise".to_string() } else { format!("max δ_t = {worst:.3e}") },
        );
    } else {
        rep.certify("local-subgradients", pointwise, format!("max δ_t = {worst:.3e}"));
    }
}

fn certify_finite(rep: &mut BoundReport, name: &str, v: f64) {
    rep.certify(name, v.is_finite(), format!("{name} = {v:.6e}"));
}

fn minus_identity(m: &QuadMetric, l: f64, d: usize) -> Result<(QuadMetric, f64)> {
    let shifted = m.sum(&QuadMetric::ScaledIdentity(-l))?;
    let min = match &shifted {
        QuadMetric::Full(a) => nalgebra::SymmetricEigen::new(a.clone()).eigenvalues.min(),
        other => other.diagonal_weights(d).unwrap().into_iter().fold(f64::INFINITY, f64::min),
    };
    Ok((shifted, min))
}

/// Forward-regret bound of the ledger's algorithm: for FTRL
/// `Σ_{t=0}^T (q_t(x*) - q_t(x_{t+1})) + Σ (p_t(x*) - p_t(x_t)) - Σ B_{r_{1:t}}(x_{t+1}, x_t)`;
/// MD replaces the `p` terms by `Σ B_{p_t}(x*, x_t)`.
pub fn bound_forward(ledger: &Ledger) -> BoundReport {
    let i = &ledger.initial;
    let q = prefix(ledger, i.q_star - i.q_next, |r| r.q_star - r.q_next);
    let breg = ledger.cumsum(|r| r.breg_reg);
    let (p, pname) = match ledger.algorithm {
        Algorithm::Ftrl => (ledger.cumsum(|r| r.p_star - r.p_at), "p_terms"),
        Algorithm::Md => (ledger.cumsum(|r| r.p_breg), "p_bregman"),
    };
    let cumulative: Vec<f64> = q.iter().zip(&p).zip(&breg).map(|((a, b), c)| a + b - c).collect();
    let qv = last(&q, i.q_star - i.q_next);
    let value = qv + last(&p, 0.0) - last(&breg, 0.0);
    let name = match ledger.algorithm {
        Algorithm::Ftrl => "forward-ftrl",
        Algorithm::Md => "forward-md",
    };
    let mut rep = BoundReport::new(name, value, forward_regret(ledger))
        .term("q_terms", qv)
        .term(pname, last(&p, 0.0))
        .term("neg_breg_reg", -last(&breg, 0.0));
    rep.cumulative = cumulative;
    rep
}

pub fn bound_forward_ftrl(ledger: &Ledger) -> Result<BoundReport> {
    if ledger.algorithm != Algorithm::Ftrl {
        return Err(Error::Unsupported("FTRL forward bound on a mirror-descent ledger".into()));
    }
    Ok(bound_forward(ledger))
}

pub fn bound_forward_md(ledger: &Ledger) -> Result<BoundReport> {
    if ledger.algorithm != Algorithm::Md {
        return Err(Error::Unsupported("MD forward bound on an FTRL ledger".into()));
    }
    Ok(bound_forward(ledger))
}

/// Standard rate bounds, assembled from ledger columns.
///
/// `q` terms use `q_t` without its composite part, so composite runs are
/// bounded in composite regret. Smooth cases measure the `(t)`-norm of
/// `r_{1:t} - (L/2)‖·‖²` and add `(L/2)‖x*‖²` (FTRL) or `(L/2)‖x* - x_1‖²` (MD)
/// and `D = f(x_1) - inf f`.
pub fn bound_rate(ledger: &Ledger, inputs: &BoundInputs, case: RateCase) -> Result<BoundReport> {
    if ledger.algorithm != case.algorithm() {
        return Err(Error::Unsupported(format!("case {} does not match the ledger's algorithm", case.name())));
    }
    let d = ledger.dim();
    let i = &ledger.initial;
    let q0 = i.qc_star - i.qc_next;
    let q = prefix(ledger, q0, |r| r.qc_star - r.qc_next);
    let q_final = ledger.rounds.last().map_or(0.0, |r| r.qc_star - r.qc_next);
    let mut cumulative = q.clone();
    let mut terms = BTreeMap::new();
    terms.insert("q_terms".to_string(), last(&q, q0));

    match case.algorithm() {
        Algorithm::Ftrl => {
            let p = ledger.cumsum(|r| r.p_star - r.p_at);
            terms.insert("p_terms".into(), last(&p, 0.0));
            cumulative = add(&cumulative, &p);
        }
        Algorithm::Md if !case.is_strong() => {
            let p = ledger.cumsum(|r| r.p_breg);
            terms.insert("p_bregman".into(), last(&p, 0.0));
            cumulative = add(&cumulative, &p);
        }
        Algorithm::Md => {}
    }

    let mut quality = EstimateQuality::Exact;
    let mut metric_ok = (true, f64::INFINITY);
    if case.is_smooth() {
        let l = inputs
            .smoothness
            .ok_or_else(|| Error::MissingCertificate(format!("{} needs the smoothness constant L", case.name())))?;
        let mut duals = Vec::with_capacity(ledger.horizon());
        for r in &ledger.rounds {
            let (m, min) = minus_identity(&r.metric, l, d)?;
            metric_ok = (metric_ok.0 && min >= -inputs.tol, metric_ok.1.min(min));
            duals.push(if min < -inputs.tol { f64::INFINITY } else { half_dual_sq(&m, &r.sigma) });
        }
        let mut acc = 0.0;
        let sig: Vec<f64> = duals
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        terms.insert("sigma_dual".into(), last(&sig, 0.0));
        cumulative = add(&cumulative, &sig);
        let anchor = match case.algorithm() {
            Algorithm::Ftrl => ledger.x_star.norm_sq(),
            Algorithm::Md => ledger.x_star.sub(&ledger.x1).norm_sq(),
        };
        let comp = 0.5 * l * anchor;
        let f1 = ledger.rounds.first().map_or(0.0, |r| r.loss);
        let f_star = match inputs.f_star {
            Some(v) => v,
            None => {
                quality = EstimateQuality::Approximate;
                ledger.rounds.iter().map(|r| r.loss.min(r.loss_star)).fold(f1, f64::min)
            }
        };
        let d_init = f1 - f_star;
        terms.insert("comparator_norm".into(), comp);
        terms.insert("initial_gap".into(), d_init);
        cumulative.iter_mut().for_each(|v| *v += comp + d_init);
    } else {
        let g = ledger.cumsum(|r| r.dual_g);
        terms.insert("g_dual".into(), last(&g, 0.0));
        cumulative = add(&cumulative, &g);
    }

    let value = last(&cumulative, q0);
    let empirical = empirical_regret(ledger, ledger.composite);
    let mut rep = BoundReport::new(case.name(), value, empirical);
    rep.terms = terms;
    rep.quality = quality;
    rep.value_drop_final = Some(value - q_final);
    rep.cumulative = cumulative;

    certify_subgradients(&mut rep, ledger, inputs, case.is_stochastic());
    if case.is_strong() {
        let worst = ledger.rounds.iter().map(|r| r.breg_loss - r.p_breg).fold(f64::INFINITY, f64::min);
        let worst = if ledger.rounds.is_empty() { 0.0 } else { worst };
        rep.certify("loss-strong-convexity", worst >= -inputs.tol, format!("min B_f - B_p = {worst:.3e}"));
        // non-negative divergences follow from the strong-convexity certificate
    } else {
        certify_nonneg_divergence(&mut rep, ledger, inputs.tol);
    }
    if case.is_smooth() {
        rep.certify(
            "smooth-regularizer-strong-convexity",
            metric_ok.0,
            format!("min eigenvalue of M_t - L·I = {:.3e}", metric_ok.1),
        );
    } else {
        let g = rep.terms["g_dual"];
        certify_finite(&mut rep, "regularizer-strong-convexity", g);
    }
    Ok(rep)
}

/// Optimistic bound: `Σ_{t=0}^{T-1} (q̃_t(x*) - q̃_t(x_{t+1})) + Σ (p_t(x*) - p_t(x_t)) + Σ ½‖g_t - g̃_t‖²_{(t),*}`
/// (MD: `Σ B_{p_t}(x*, x_t)` in place of the `p` terms).
pub fn bound_ao(ledger: &Ledger, inputs: &BoundInputs) -> BoundReport {
    let i = &ledger.initial;
    let q0 = i.qt_star - i.qt_next;
    // prefix t uses q̃_0 … q̃_{t-1}
    let mut acc = q0;
    let q: Vec<f64> = ledger
        .rounds
        .iter()
        .map(|r| {
            let v = acc;
            acc += r.qt_star - r.qt_next;
            v
        })
        .collect();
    let (p, pname) = match ledger.algorithm {
        Algorithm::Ftrl => (ledger.cumsum(|r| r.p_star - r.p_at), "p_terms"),
        Algorithm::Md => (ledger.cumsum(|r| r.p_breg), "p_bregman"),
    };
    let h = ledger.cumsum(|r| r.dual_hint_err);
    let cumulative = add(&add(&q, &p), &h);
    let value = last(&cumulative, 0.0);
    let name = match ledger.algorithm {
        Algorithm::Ftrl => "ao-ftrl",
        Algorithm::Md => "ao-md",
    };
    let mut rep = BoundReport::new(name, value, empirical_regret(ledger, ledger.composite))
        .term("q_tilde_terms", last(&q, q0))
        .term(pname, last(&p, 0.0))
        .term("hint_error_dual", last(&h, 0.0));
    rep.cumulative = cumulative;
    certify_nonneg_divergence(&mut rep, ledger, inputs.tol);
    certify_finite(&mut rep, "regularizer-strong-convexity", last(&h, 0.0));
    rep
}

pub fn bound_ao_ftrl(ledger: &Ledger, inputs: &BoundInputs) -> Result<BoundReport> {
    if ledger.algorithm != Algorithm::Ftrl {
        return Err(Error::Unsupported("AO-FTRL bound on a mirror-descent ledger".into()));
    }
    Ok(bound_ao(ledger, inputs))
}

fn previous_gradient_hints(ledger: &Ledger) -> bool {
    ledger.rounds.iter().enumerate().all(|(k, r)| match k {
        0 => r.hint.is_zero(),
        _ => r.hint == ledger.rounds[k - 1].g,
    })
}

fn round_eta(r: &RoundRecord) -> Option<f64> {
    r.eta.or_else(|| r.metric.isotropic_weight())
}

/// Smooth variational bound for AO-FTRL with previous-gradient hints:
/// `q̃_{0:T}(x*) + p_{1:T}(x*) + 2 Σ (1/η_t) sup_x ‖∇f_t(x) - ∇f_{t-1}(x)‖²`.
///
/// Requires `η_t η_{t+1} ≥ 8L²`; the unobserved `η_{T+1}` is taken as `η_T`
/// (the schedules in this crate are non-decreasing).
pub fn bound_variational_smooth(ledger: &Ledger, inputs: &BoundInputs) -> Result<BoundReport> {
    let l = inputs.smoothness.ok_or_else(|| Error::MissingCertificate("smoothness constant L".into()))?;
    let var = inputs.variation.as_ref().ok_or_else(|| Error::MissingCertificate("per-round variation".into()))?;
    if var.per_round.len() < ledger.horizon() {
        return Err(Error::MissingCertificate(format!(
            "variation covers {} rounds, ledger has {}",
            var.per_round.len(),
            ledger.horizon()
        )));
    }
    let etas: Vec<f64> = ledger
        .rounds
        .iter()
        .map(|r| round_eta(r).ok_or_else(|| Error::Unsupported(format!("round {} has a non-isotropic (t)-norm", r.t))))
        .collect::<Result<_>>()?;
    for (k, e) in etas.iter().enumerate() {
        let next = etas.get(k + 1).copied().unwrap_or(*e);
        if e * next < 8.0 * l * l - inputs.tol {
            return Err(Error::ScheduleCondition(format!(
                "η_{} η_{} = {:.3e} < 8L² = {:.3e}",
                k + 1,
                k + 2,
                e * next,
                8.0 * l * l
            )));
        }
    }
    let i = &ledger.initial;
    let q = prefix(ledger, i.qt_star, |r| r.qt_star);
    let p = ledger.cumsum(|r| r.p_star);
    let mut acc = 0.0;
    let v: Vec<f64> = etas
        .iter()
        .zip(&var.per_round)
        .map(|(e, vt)| {
            acc += 2.0 * vt / e;
            acc
        })
        .collect();
    let cumulative = add(&add(&q, &p), &v);
    let value = last(&cumulative, i.qt_star);
    let mut rep = BoundReport::new("variational-smooth", value, empirical_regret(ledger, ledger.composite))
        .term("q_tilde_star", last(&q, i.qt_star))
        .term("p_star", last(&p, 0.0))
        .term("variation", last(&v, 0.0));
    rep.cumulative = cumulative;
    rep.quality = if var.exact { EstimateQuality::Exact } else { EstimateQuality::ProbeEstimated };
    rep.certify("previous-gradient-hints", previous_gradient_hints(ledger), "g̃_t = g_{t-1}, g̃_1 = 0");
    let nonneg = i.qt_star >= 0.0 && ledger.rounds.iter().all(|r| r.qt_star >= 0.0 && r.p_star >= 0.0);
    rep.certify("nonnegative-regularizers", nonneg, "q̃_t(x*), p_t(x*) ≥ 0");
    Ok(rep)
}

/// `2R³L² + R + 2R√(2D)` for composite optimistic FTRL-Prox on a bounded set.
pub fn bound_final_attack(ledger: &Ledger, inputs: &BoundInputs) -> Result<BoundReport> {
    let r = inputs.diameter.ok_or_else(|| Error::MissingCertificate("diameter R".into()))?;
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidConfig("final-attack bound needs a bounded feasible set".into()));
    }
    let l = inputs.smoothness.ok_or_else(|| Error::MissingCertificate("smoothness constant L".into()))?;
    let var = inputs.variation.as_ref().ok_or_else(|| Error::MissingCertificate("variation D".into()))?;
    let value = final_attack_value(r, l, var.value);
    let mut acc = 0.0;
    let cumulative = var
        .per_round
        .iter()
        .take(ledger.horizon())
        .map(|v| {
            acc += v;
            final_attack_value(r, l, acc)
        })
        .collect();
    let mut rep = BoundReport::new("final-attack", value, empirical_regret(ledger, ledger.composite))
        .term("smoothness_term", 2.0 * r.powi(3) * l * l)
        .term("diameter_term", r)
        .term("variation_term", 2.0 * r * (2.0 * var.value).sqrt());
    rep.cumulative = cumulative;
    rep.quality = if var.exact { EstimateQuality::Exact } else { EstimateQuality::ProbeEstimated };
    rep.certify("previous-gradient-hints", previous_gradient_hints(ledger), "g̃_t = g_{t-1}, g̃_1 = 0");
    Ok(rep)
}

pub fn final_attack_value(r: f64, l: f64, d: f64) -> f64 {
    2.0 * r.powi(3) * l * l + r + 2.0 * r * (2.0 * d).sqrt()
}

/// Bound under τ-star-convexity: the linearized bound divided by `τ`.
pub fn scale_tau(report: &BoundReport, tau: f64) -> Result<BoundReport> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!("τ = {tau} must lie in (0, 1]")));
    }
    let mut out = report.clone();
    out.name = format!("{}/tau", report.name);
    out.value = report.value / tau;
    out.value_drop_final = report.value_drop_final.map(|v| v / tau);
    out.cumulative = report.cumulative.iter().map(|v| v / tau).collect();
    out.terms.values_mut().for_each(|v| *v /= tau);
    out.terms.insert("tau".into(), tau);
    out.slack = out.value - out.empirical;
    Ok(out)
}

/// τ-star-strong variant: `(value - Σ B_r(x*, x_t)) / τ`.
pub fn scale_tau_strong(report: &BoundReport, tau: f64, ledger: &Ledger, r: &Regularizer) -> Result<BoundReport> {
    let mut acc = 0.0;
    let mut breg = Vec::with_capacity(ledger.horizon());
    for rec in &ledger.rounds {
        acc += r.bregman_closed(&ledger.x_star, &rec.x_t)?.expect_finite("B_r(x*, x_t)")?;
        breg.push(acc);
    }
    let mut base = report.clone();
    base.value -= acc;
    base.value_drop_final = base.value_drop_final.map(|v| v - acc);
    base.cumulative = base.cumulative.iter().zip(&breg).map(|(v, b)| v - b).collect();
    base.terms.insert("neg_breg_r".into(), -acc);
    scale_tau(&base, tau)
}
