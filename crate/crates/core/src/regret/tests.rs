use super::*;
use crate::learners::{LearnerConfig, OnlineLearner, Preset};
use crate::losses::{variation_estimate, LossKind, LossSequence, SequenceSpec};
use crate::solvers::{FeasibleSet, SolveMethod};

fn p(v: &[f64]) -> Point {
    Point::from_slice(v).unwrap()
}

/// A trace with the given plays and gradients and no regularization.
fn toy_trace(xs: &[Point], gs: &[Point]) -> Trace {
    let d = xs[0].dim();
    let records = gs
        .iter()
        .enumerate()
        .map(|(k, g)| StepRecord {
            t: k + 1,
            x_t: xs[k].clone(),
            x_next: xs[k + 1].clone(),
            g: g.clone(),
            hint: Point::zeros(d),
            hint_next: Point::zeros(d),
            p: Some(Regularizer::zero()),
            q: Regularizer::zero(),
            r: Regularizer::zero(),
            q_prev: Regularizer::zero(),
            q_tilde: Regularizer::zero(),
            psi: None,
            breg_r: 0.0,
            metric: QuadMetric::identity(),
            extra_curvature: 0.0,
            eta: None,
            method: SolveMethod::Exact,
            iterations: 0,
            certified_distance: 0.0,
        })
        .collect();
    Trace {
        algorithm: Algorithm::Ftrl,
        x1: xs[0].clone(),
        q0: Regularizer::zero(),
        q0_tilde: Regularizer::zero(),
        records,
        solver_calls: gs.len(),
    }
}

fn run(cfg: &LearnerConfig, set: &FeasibleSet, spec: &SequenceSpec, t: usize, seed: u64) -> (Trace, Vec<Loss>) {
    let mut l = OnlineLearner::new(cfg, set, Some(t)).unwrap();
    let mut s = LossSequence::new(spec.clone(), seed).unwrap();
    let mut losses = Vec::new();
    for _ in 0..t {
        let fb = s.feedback(l.x()).unwrap();
        losses.push(fb.loss.clone());
        l.observe(&fb).unwrap();
    }
    (l.into_trace(), losses)
}

#[test]
fn empirical_regret_hand_sum() {
    let g = p(&[1.0, 0.0]);
    let tr = toy_trace(&[p(&[1.0, 0.0]), p(&[0.0, 0.0]), p(&[0.0, 0.0])], &[g.clone(), g.clone()]);
    let losses = vec![Loss::linear(g.clone()); 2];
    let led = Ledger::build(&tr, &losses, &p(&[-1.0, 0.0]), LedgerOptions::default()).unwrap();
    assert_eq!(empirical_regret(&led, false), 3.0);

    // constant play at x*
    let x = p(&[0.5, 0.5]);
    let tr = toy_trace(&[x.clone(), x.clone(), x.clone()], &[g.clone(), g.clone()]);
    let led = Ledger::build(&tr, &losses, &x, LedgerOptions::default()).unwrap();
    assert_eq!(empirical_regret(&led, false), 0.0);
    assert_eq!(forward_regret(&led), 0.0);
}

#[test]
fn forward_regret_dot_product() {
    let tr = toy_trace(&[p(&[0.0, 0.0]), p(&[0.0, 1.0])], &[p(&[1.0, 0.0])]);
    let led = Ledger::build(&tr, &[Loss::linear(p(&[1.0, 0.0]))], &p(&[1.0, 1.0]), LedgerOptions::default()).unwrap();
    assert_eq!(forward_regret(&led), -1.0);
}

#[test]
fn linear_losses_have_zero_divergence_terms() {
    let set = FeasibleSet::ball(3, 1.0);
    let spec = SequenceSpec::RandomSigns { dim: 3, magnitude: 1.0 };
    let (tr, losses) = run(&LearnerConfig::new(Preset::Ogd { eta: 0.1 }), &set, &spec, 50, 3);
    let led = Ledger::build(&tr, &losses, &p(&[0.0, 0.6, 0.0]), LedgerOptions::default()).unwrap();
    assert!(led.rounds.iter().all(|r| r.breg_loss.abs() < 1e-15 && r.delta.abs() < 1e-15));
    assert!(decomposition_residual(&led) <= 1e-10);
}

#[test]
fn decomposition_holds_for_star_convex_losses() {
    let set = FeasibleSet::cube(2, -2.0, 2.0);
    let spec = SequenceSpec::Stochastic {
        loss: Loss::new(LossKind::StarPiecewise { dim: 2 }),
        noise: crate::losses::Noise::Gaussian { sigma: 0.3 },
    };
    let (tr, losses) = run(&LearnerConfig::new(Preset::Ogd { eta: 0.05 }), &set, &spec, 200, 5);
    let led = Ledger::build(&tr, &losses, &Point::zeros(2), LedgerOptions::default()).unwrap();
    let r = empirical_regret(&led, false);
    assert!(decomposition_residual(&led) <= 1e-8 * (1.0 + r.abs()));
}

#[test]
fn forward_bounds_hold_for_ftrl_and_md() {
    let set = FeasibleSet::ball(2, 1.5);
    let spec = SequenceSpec::Drifting { base: p(&[0.3, -0.2]), amplitude: 1.0, period: 17.0, weights: None };
    for cfg in [
        LearnerConfig::new(Preset::Ogd { eta: 0.2 }),
        LearnerConfig::new(Preset::MdOgd { eta: 0.2 }),
        LearnerConfig::new(Preset::FtrlProx { eta: 0.5, full: false }),
        LearnerConfig::new(Preset::StronglyConvex { mu: 1.0, algorithm: Algorithm::Md, gamma0: 0.0 }),
    ] {
        let (tr, losses) = run(&cfg, &set, &spec, 100, 1);
        let led = Ledger::build(&tr, &losses, &p(&[0.2, 0.1]), LedgerOptions::default()).unwrap();
        let rep = bound_forward(&led);
        assert!(rep.slack >= -1e-8, "{}: {rep:?}", cfg.preset.name());
        assert_eq!(rep.cumulative.len(), 100);
    }
}

#[test]
fn trivial_zero_gradient_run() {
    let x = p(&[0.0]);
    let tr = toy_trace(&[x.clone(), x.clone()], &[p(&[0.0])]);
    let led = Ledger::build(&tr, &[Loss::linear(p(&[0.0]))], &p(&[0.3]), LedgerOptions::default()).unwrap();
    let rep = bound_forward(&led);
    assert_eq!((rep.value, rep.empirical), (0.0, 0.0));
}

#[test]
fn ogd_rate_bound_closed_form() {
    // ‖g_t‖ = 1, ‖x*‖ = 1, η = 1/√T: bound = ½√T + ½√T
    let t = 100;
    let eta = 1.0 / (t as f64).sqrt();
    let set = FeasibleSet::unconstrained(2);
    let spec = SequenceSpec::RandomSigns { dim: 2, magnitude: std::f64::consts::FRAC_1_SQRT_2 };
    let (tr, losses) = run(&LearnerConfig::new(Preset::Ogd { eta }), &set, &spec, t, 9);
    let led = Ledger::build(&tr, &losses, &p(&[0.6, 0.8]), LedgerOptions::default()).unwrap();
    let rep = bound_rate(&led, &BoundInputs::new(), RateCase::OoFtrl).unwrap();
    assert!((rep.value - 10.0).abs() < 1e-9, "{rep:?}");
    assert!(rep.holds(1e-6) && !rep.flagged);
}

#[test]
fn zero_losses_reduce_to_regularizer_terms() {
    let set = FeasibleSet::ball(2, 1.0);
    let spec = SequenceSpec::Constant { g: Point::zeros(2) };
    let (tr, losses) = run(&LearnerConfig::new(Preset::Ogd { eta: 0.5 }), &set, &spec, 10, 0);
    let x_star = p(&[0.6, 0.0]);
    let led = Ledger::build(&tr, &losses, &x_star, LedgerOptions::default()).unwrap();
    let rep = bound_rate(&led, &BoundInputs::new(), RateCase::OoFtrl).unwrap();
    assert_eq!(rep.empirical, 0.0);
    assert!((rep.value - x_star.norm_sq()).abs() < 1e-15);
}

#[test]
fn ao_bound_with_zero_hints_matches_rate_bound_without_final_term() {
    let set = FeasibleSet::ball(3, 1.0);
    let spec = SequenceSpec::Drifting { base: p(&[0.0, 0.5, 1.0]), amplitude: 0.5, period: 10.0, weights: None };
    let cfg = LearnerConfig::new(Preset::AdagradDa { eta: 0.7, gamma: 1.0, full: false });
    let (tr, losses) = run(&cfg, &set, &spec, 60, 2);
    let led = Ledger::build(&tr, &losses, &p(&[0.1, -0.2, 0.3]), LedgerOptions::default()).unwrap();
    let ao = bound_ao_ftrl(&led, &BoundInputs::new()).unwrap();
    let t2 = bound_rate(&led, &BoundInputs::new(), RateCase::OoFtrl).unwrap();
    assert!((ao.value - t2.value_drop_final.unwrap()).abs() <= 1e-12 * ao.value.abs().max(1.0));
    assert!(ao.holds(1e-9));
}

#[test]
fn perfect_hints_zero_the_hint_error() {
    use crate::learners::HintPolicy;
    let set = FeasibleSet::ball(2, 1.0);
    let spec = SequenceSpec::RandomSigns { dim: 2, magnitude: 1.0 };
    let gs: Vec<Point> = LossSequence::losses(&spec, 4, 30).unwrap().iter().map(|f| f.gradient(&Point::zeros(2))).collect();
    let cfg = LearnerConfig::new(Preset::AoFtrlProx { eta: 1.0, full: false }).with_hints(HintPolicy::Custom { hints: gs });
    let (tr, losses) = run(&cfg, &set, &spec, 30, 4);
    let led = Ledger::build(&tr, &losses, &p(&[0.0, 0.5]), LedgerOptions::default()).unwrap();
    assert_eq!(led.hint_error_sum(), 0.0);
    let rep = bound_ao(&led, &BoundInputs::new());
    assert_eq!(rep.terms["hint_error_dual"], 0.0);
    assert!(rep.holds(1e-9));
}

#[test]
fn previous_gradient_hint_error_equals_variation_for_linear_streams() {
    let set = FeasibleSet::ball(2, 1.0);
    let spec_lin = SequenceSpec::Cycle { losses: vec![Loss::linear(p(&[1.0, 0.0])), Loss::linear(p(&[0.9, 0.1]))] };
    let cfg = LearnerConfig::new(Preset::FinalAttack { smoothness: 0.0, diameter: None });
    let (tr, losses) = run(&cfg, &set, &spec_lin, 40, 0);
    let led = Ledger::build(&tr, &losses, &p(&[-1.0, 0.0]), LedgerOptions::default()).unwrap();
    let var = variation_estimate(&losses, &set, 0, 0).unwrap();
    assert!(var.exact);
    assert!((led.hint_error_sum() - var.value).abs() < 1e-12);
}

#[test]
fn final_attack_closed_forms() {
    assert_eq!(final_attack_value(2.0, 0.5, 8.0), 6.0 + 4.0 * 4.0);
    assert_eq!(final_attack_value(2.0, 0.0, 8.0), 2.0 + 4.0 * 4.0);
    assert_eq!(final_attack_value(2.0, 0.5, 0.0), 6.0);
}

#[test]
fn final_attack_bound_on_linear_stream() {
    let set = FeasibleSet::ball(2, 1.0);
    let spec = SequenceSpec::Piecewise {
        pieces: vec![
            crate::losses::Piece { from: 1, g: p(&[1.0, 0.0]) },
            crate::losses::Piece { from: 50, g: p(&[0.0, -1.0]) },
        ],
    };
    let cfg = LearnerConfig::new(Preset::FinalAttack { smoothness: 0.0, diameter: None });
    let (tr, losses) = run(&cfg, &set, &spec, 100, 0);
    let x_star = offline_best(&losses, 0.0, &set, &Default::default()).unwrap().0;
    let led = Ledger::build(&tr, &losses, &x_star, LedgerOptions::default()).unwrap();
    let mut inputs = BoundInputs::new();
    inputs.diameter = Some(2.0);
    inputs.smoothness = Some(0.0);
    inputs.variation = Some(variation_estimate(&losses, &set, 0, 0).unwrap());
    let rep = bound_final_attack(&led, &inputs).unwrap();
    assert_eq!(rep.quality, EstimateQuality::Exact);
    assert!(rep.holds(0.0) && !rep.flagged, "{rep:?}");
    let vs = bound_variational_smooth(&led, &inputs).unwrap();
    assert!(vs.holds(0.0), "{vs:?}");
}

#[test]
fn variational_condition_violation_is_an_error() {
    let set = FeasibleSet::ball(2, 1.0);
    let spec = SequenceSpec::Constant { g: p(&[1.0, 0.0]) };
    let cfg = LearnerConfig::new(Preset::Ogd { eta: 0.1 }).with_hints(crate::learners::HintPolicy::PreviousGradient);
    let (tr, losses) = run(&cfg, &set, &spec, 5, 0);
    let led = Ledger::build(&tr, &losses, &p(&[-1.0, 0.0]), LedgerOptions::default()).unwrap();
    let mut inputs = BoundInputs::new();
    inputs.smoothness = Some(100.0);
    inputs.variation = Some(variation_estimate(&losses, &set, 0, 0).unwrap());
    assert!(matches!(bound_variational_smooth(&led, &inputs), Err(Error::ScheduleCondition(_))));
}

#[test]
fn tau_scaling() {
    let mut rep = BoundReport::new("x", 3.0, 1.0);
    rep.cumulative = vec![1.0, 3.0];
    assert_eq!(scale_tau(&rep, 1.0).unwrap().value, 3.0);
    let half = scale_tau(&rep, 0.5).unwrap();
    assert_eq!((half.value, half.cumulative.clone(), half.slack), (6.0, vec![2.0, 6.0], 5.0));
    assert!(scale_tau(&rep, 0.0).is_err());
    assert!(scale_tau(&rep, 1.5).is_err());
}

#[test]
fn sum_sqrt_examples() {
    let (l, r) = sum_sqrt_check(&[1.0, 1.0, 1.0, 1.0]).unwrap();
    assert!((l - 2.784_457_050_376_173).abs() < 1e-12);
    assert_eq!(r, 4.0);
    assert_eq!(sum_sqrt_check(&[1.0]).unwrap(), (1.0, 2.0));
    let (l1, r1) = sum_sqrt_check(&[2.0, 0.5, 3.0]).unwrap();
    let (l2, r2) = sum_sqrt_check(&[8.0, 2.0, 12.0]).unwrap();
    assert!((l2 - 2.0 * l1).abs() < 1e-12 && (r2 - 2.0 * r1).abs() < 1e-12);
    assert!(sum_sqrt_check(&[0.0, 1.0]).is_err());
}

#[test]
fn composite_and_implicit_ledgers() {
    use crate::learners::{CompositeSpec, Decay};
    use crate::regularizers::CompositeSetting;
    let set = FeasibleSet::cube(2, -2.0, 2.0);
    let spec = SequenceSpec::Drifting { base: p(&[0.5, 0.0]), amplitude: 0.3, period: 20.0, weights: None };
    for setting in [CompositeSetting::KnownBefore, CompositeSetting::RevealedAfter] {
        let cfg = LearnerConfig::new(Preset::FtrlProx { eta: 1.0, full: false })
            .with_composite(CompositeSpec { alpha: 0.1, decay: Decay::Constant, setting });
        let (tr, losses) = run(&cfg, &set, &spec, 80, 0);
        let x_star = offline_best(&losses, 0.1 * 80.0, &set, &Default::default()).unwrap().0;
        let led = Ledger::build(&tr, &losses, &x_star, LedgerOptions::default()).unwrap();
        assert!(led.composite);
        assert!(decomposition_residual(&led) < 1e-9);
        let rep = bound_rate(&led, &BoundInputs::new(), RateCase::OoFtrl).unwrap();
        assert!(rep.holds(1e-6), "{setting:?}: {rep:?}");
    }
    // implicit MD on quadratics: regret in ℓ_t within the bound
    let cfg = LearnerConfig::new(Preset::ImplicitMd { eta: Some(0.5) });
    let (tr, losses) = run(&cfg, &set, &spec, 80, 0);
    let x_star = offline_best(&losses, 0.0, &set, &Default::default()).unwrap().0;
    let led = Ledger::build(&tr, &losses, &x_star, LedgerOptions { implicit: true }).unwrap();
    let direct: f64 = losses.iter().zip(&led.rounds).map(|(f, r)| f.value(&r.x_t) - f.value(&x_star)).sum();
    assert!((empirical_regret(&led, true) - direct).abs() < 1e-9);
    let rep = bound_rate(&led, &BoundInputs::new(), RateCase::OoMd).unwrap();
    assert!(rep.holds(1e-6), "{rep:?}");
}

#[test]
fn csv_layout() {
    let set = FeasibleSet::ball(2, 1.0);
    let spec = SequenceSpec::RandomSigns { dim: 2, magnitude: 1.0 };
    let (tr, losses) = run(&LearnerConfig::new(Preset::Ogd { eta: 0.1 }), &set, &spec, 7, 1);
    let led = Ledger::build(&tr, &losses, &p(&[0.0, 0.0]), LedgerOptions::default()).unwrap();
    let rep = bound_rate(&led, &BoundInputs::new(), RateCase::OoFtrl).unwrap();
    let mut buf = Vec::new();
    led.write_csv(&mut buf, Some(&rep)).unwrap();
    let s = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines.len(), 8);
    assert!(lines[0].starts_with("t,x0,x1,g0,g1,loss,"));
    assert!(lines[0].ends_with("cum_regret,cum_bound,slack"));
    assert!(lines.iter().all(|l| l.split(',').count() == 1 + 4 + CSV_TERMS.len() + 3));
    led.verify_consistency(&tr, &losses).unwrap();
}

#[test]
fn dual_norm_pseudo_inverse() {
    let m = QuadMetric::Diagonal(vec![2.0, 0.0]);
    assert_eq!(half_dual_sq(&m, &p(&[2.0, 0.0])), 1.0);
    assert_eq!(half_dual_sq(&m, &p(&[2.0, 1.0])), f64::INFINITY);
    let full = QuadMetric::full(nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])).unwrap();
    assert!((half_dual_sq(&full, &p(&[1.0, 1.0])) - 0.5).abs() < 1e-12);
    assert_eq!(half_dual_sq(&full, &p(&[1.0, -1.0])), f64::INFINITY);
}
