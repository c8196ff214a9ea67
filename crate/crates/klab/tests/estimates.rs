//! Estimate-level properties: positivity and moment inequalities of the
//! built operator, convergence under refinement, the p-doubling rule, and
//! the two-order composition of the pointwise bounds.

use klab::catalogue::OperatorSpecDef;
use klab::constants::{self, ConstantInputs};
use klab::datum::DatumSpec;
use klab::grid::GridFunction;
use klab::oracles::OuSpec1D;
use klab::solver::{self, ExhaustionParams, SchemeParams};
use klab::verifier::{self, EstimateVariant, VerifyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ou_def() -> OperatorSpecDef {
    OperatorSpecDef::linear_drift_1d(1.0, 1.0)
}

fn params(h: f64, dt: f64) -> SchemeParams {
    SchemeParams {
        h,
        dt,
        ..SchemeParams::default()
    }
}

#[test]
fn nonnegative_data_stay_nonnegative() {
    let spec = ou_def().build().unwrap();
    let run = solver::evolution_operator(
        &spec,
        &|x: &[f64]| (-x[0] * x[0]).exp(),
        0.0,
        &[0.5, 1.0],
        &params(0.02, 1e-3),
        &ExhaustionParams::default(),
    )
    .unwrap();
    for snap in &run.snapshots {
        assert!(
            snap.min_core() >= -1e-12 * snap.sup_norm().max(1.0),
            "negative undershoot {}",
            snap.min_core()
        );
    }
}

#[test]
fn squared_image_is_dominated_by_the_image_of_the_square() {
    // |G f|^2 <= G(f^2) pointwise, for random smooth data.
    let spec = ou_def().build().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..3 {
        let (a, b, w) = (
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.5..2.0),
        );
        let f = move |x: &[f64]| a * (w * x[0]).sin() + b * (0.3 * x[0]).cos();
        let f_sq = move |x: &[f64]| f(x) * f(x);
        let ex = ExhaustionParams::default();
        let p = params(0.02, 1e-3);
        let run_f = solver::evolution_operator(&spec, &f, 0.0, &[1.0], &p, &ex).unwrap();
        let run_sq = solver::evolution_operator(&spec, &f_sq, 0.0, &[1.0], &p, &ex).unwrap();
        let shared = run_f.last().half_width.min(run_sq.last().half_width);
        let u = run_f.last().restrict(shared).unwrap();
        let v = run_sq.last().restrict(shared).unwrap();
        let mut worst = f64::INFINITY;
        for (g, h) in u.values.iter().zip(&v.values) {
            worst = worst.min(h - g * g);
        }
        assert!(worst >= -1e-6, "moment inequality violated by {worst:e}");
    }
}

#[test]
fn refinement_at_least_halves_the_error_twice() {
    // Halving h and dt reduces the closed-form error by >= 3 (second order).
    let spec = ou_def().build().unwrap();
    let ou = OuSpec1D::constant(1.0, 1.0);
    let mut errors = Vec::new();
    for (h, dt) in [(0.08, 4e-3), (0.04, 2e-3)] {
        let n = (2.0 * 8.0 / h) as usize + 1;
        let f = GridFunction::from_fn(1, 8.0, n, &|x| x[0].tanh()).unwrap();
        let run = solver::solve_dirichlet(&spec, &f, 0.0, &[0.5], &params(h, dt)).unwrap();
        let snap = run.last();
        let mut worst = 0.0f64;
        for i in 0..snap.n {
            let x = snap.coord(i);
            if x.abs() <= 3.0 {
                let exact = ou.evolve(&|y| y.tanh(), 0.0, 0.5, x).unwrap();
                worst = worst.max((snap.values[i] - exact).abs());
            }
        }
        errors.push(worst);
    }
    let factor = errors[0] / errors[1];
    assert!(
        factor >= 3.0,
        "refinement factor {factor} (errors {errors:?})"
    );
}

#[test]
fn doubling_p_doubles_the_same_order_exponent() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let inputs = ConstantInputs {
            k: rng.gen_range(1..=3),
            m: rng.gen_range(-1.0..4.0),
            big_c: rng.gen_range(0.0..1.0),
            k_form: rng.gen_range(0.0..0.5),
            nu_samples: vec![1.0, rng.gen_range(1.0..2.0)],
            ..ConstantInputs::default()
        };
        let at2 = constants::sigma_kp(&inputs).unwrap().value;
        let mut at4 = inputs.clone();
        at4.p = 4.0;
        assert_eq!(constants::sigma_kp(&at4).unwrap().value, 2.0 * at2);
    }
}

#[test]
fn same_order_reports_agree_across_p_on_solver_output() {
    // The p = 4 right side uses sigma_{1,4} = 2 sigma_{1,2}; on the same
    // data both reports pass together.
    let spec = ou_def().build().unwrap();
    let config = VerifyConfig::new((0.0, 2.0));
    let datum = DatumSpec::Tanh.build();
    let rep2 = verifier::verify_pointwise(
        &spec,
        &datum,
        0.0,
        1.0,
        1,
        2.0,
        EstimateVariant::Smoothing { k: 1, h: 1 },
        &config,
    )
    .unwrap();
    let rep4 = verifier::verify_pointwise(
        &spec,
        &datum,
        0.0,
        1.0,
        1,
        4.0,
        EstimateVariant::Smoothing { k: 1, h: 1 },
        &config,
    )
    .unwrap();
    assert!(rep2.pass && rep4.pass);
    assert_eq!(
        rep4.constants["sigma_1p"],
        2.0 * rep2.constants["sigma_1p"]
    );
}

/// Closed-form two-order composition check: with the exact evolution the
/// third-derivative bound composed from two half-lag single-step bounds
/// holds whenever both half-lag bounds hold.
#[test]
fn two_order_composition_is_implied_by_the_half_steps() {
    let ou = OuSpec1D::constant(1.0, 1.0);
    let datum = DatumSpec::Tanh.build();
    let (s, t) = (0.0, 1.0);
    let mid = 0.5 * (s + t);
    let p = 2.0;
    // Window-free inputs for the unit linear-drift operator.
    let inputs = |k: u8| ConstantInputs {
        k,
        r0: -1.0,
        m: -1.0 + 1e-6,
        m2: -1.0,
        m3: -1.0,
        ..ConstantInputs::default()
    };
    let sigma = |k: u8| constants::sigma_kp(&inputs(k)).unwrap().value;
    let (s1, s2, s3) = (sigma(1), sigma(2), sigma(3));
    let defaults = ConstantInputs::default();
    let (alpha, k1, k2) = (defaults.alpha, defaults.k1_weight, defaults.k2_weight);

    // Exact derivative transport: D^k of the image is the damping factor to
    // the k-th power times the image of the k-th derivative.
    let m_full = ou.damping(s, t);
    let bundle_h =
        |h: usize| move |y: f64, d: &klab::datum::Datum| -> f64 {
            (0..=h).map(|j| d.deriv(j, y).powi(2)).sum::<f64>().powf(p / 2.0)
        };

    let xs = [-1.5, -0.6, 0.0, 0.4, 1.1];
    // Half-step margins (exact evolution on each half interval).
    let gamma_23 = constants::gamma_step(mid - s, s3, s2, p, alpha, k1, k2).unwrap();
    let gamma_12 = constants::gamma_step(mid - s, s2, s1, p, alpha, k1, k2).unwrap();
    let composite =
        constants::gamma_p13_composite(t - s, s1, s2, s3, p, alpha, k1, k2).unwrap();

    let mut halves_pass = true;
    let mut composite_pass = true;
    for &x in &xs {
        // First half: order 1 -> 2 on [s, mid] with datum f.
        let m_half = ou.damping(s, mid);
        let lhs_12 = (m_half * m_half * ou.evolve(&|y| datum.deriv(2, y), s, mid, x).unwrap())
            .abs()
            .powf(p);
        let rhs_12 = gamma_12
            * ou
                .evolve(&|y| bundle_h(1)(y, &datum), s, mid, x)
                .unwrap();
        halves_pass &= lhs_12 <= rhs_12 + 1e-9;

        // Second half: order 2 -> 3 on [mid, t] with datum G(mid, s) f.
        let g_mid = |y: f64| ou.evolve(&|z| datum.eval(z), s, mid, y).unwrap();
        let m_h = ou.damping(mid, t);
        let lhs_23 = (m_h.powi(3)
            * m_half.powi(3)
            * ou.evolve(&|y| datum.deriv(3, y), s, t, x).unwrap())
        .abs()
        .powf(p);
        // Bundle of G(mid,s)f up to order 2, transported exactly.
        let bundle_mid = |y: f64| -> f64 {
            let d0 = g_mid(y);
            let d1 = m_half * ou.evolve(&|z| datum.deriv(1, z), s, mid, y).unwrap();
            let d2 =
                m_half * m_half * ou.evolve(&|z| datum.deriv(2, z), s, mid, y).unwrap();
            (d0 * d0 + d1 * d1 + d2 * d2).powf(p / 2.0)
        };
        let rhs_23 = gamma_23 * ou.evolve(&bundle_mid, mid, t, x).unwrap();
        halves_pass &= lhs_23 <= rhs_23 + 1e-9;

        // Composite: order 1 -> 3 over the full lag.
        let lhs_13 = (m_full.powi(3) * ou.evolve(&|y| datum.deriv(3, y), s, t, x).unwrap())
            .abs()
            .powf(p);
        let rhs_13 = composite * ou.evolve(&|y| bundle_h(1)(y, &datum), s, t, x).unwrap();
        composite_pass &= lhs_13 <= rhs_13 + 1e-9;
    }
    assert!(halves_pass, "half-step estimates failed");
    assert!(
        composite_pass,
        "composition failed although both halves hold"
    );
}

#[test]
fn gradient_contraction_on_solver_output() {
    let spec = ou_def().build().unwrap();
    let config = VerifyConfig::new((0.0, 2.0));
    let datum = DatumSpec::Tanh.build();
    let rep = verifier::verify_pointwise(
        &spec,
        &datum,
        0.0,
        1.0,
        1,
        2.0,
        EstimateVariant::GradientContraction,
        &config,
    )
    .unwrap();
    assert!(rep.pass, "margin {}", rep.worst_margin);
    assert_eq!(rep.constants["r0"], -1.0);
}

#[test]
fn margins_are_stable_under_refinement() {
    let spec = ou_def().build().unwrap();
    let datum = DatumSpec::Tanh.build();
    let mut margins = Vec::new();
    let mut estimates = Vec::new();
    for (h, dt) in [(0.04, 2e-3), (0.02, 1e-3)] {
        let mut config = VerifyConfig::new((0.0, 2.0));
        config.params = params(h, dt);
        let rep = verifier::verify_pointwise(
            &spec,
            &datum,
            0.0,
            1.0,
            1,
            2.0,
            EstimateVariant::Chain { k: 1 },
            &config,
        )
        .unwrap();
        margins.push(rep.worst_margin);
        estimates.push(rep.constants["refinement_error"]);
    }
    let est = estimates[0].max(estimates[1]);
    assert!(
        (margins[0] - margins[1]).abs() <= 10.0 * est.max(1e-12),
        "margins {margins:?} vs estimate {est:e}"
    );
}

#[test]
fn unverified_preconditions_are_flagged_but_computed() {
    // A nonvanishing potential breaks the gradient-chain profile; the
    // report still carries both sides.
    let def = OperatorSpecDef {
        c: klab::catalogue::PotentialSpec::Constant { value: -1.0 },
        ..ou_def()
    };
    let spec = def.build().unwrap();
    let mut config = VerifyConfig::new((0.0, 2.0));
    config.exhaustion = ExhaustionParams {
        r_start: 4.0,
        r_step: 1.0,
        max_levels: 2,
        tol_exhaust: 1e-3,
    };
    config.params = params(0.02, 1e-3);
    let datum = DatumSpec::Gaussian { sigma: 0.5 }.build();
    let rep = verifier::verify_pointwise(
        &spec,
        &datum,
        0.0,
        0.5,
        1,
        2.0,
        EstimateVariant::Chain { k: 1 },
        &config,
    )
    .unwrap();
    assert!(
        rep.notes.iter().any(|n| n.contains("preconditions unverified")),
        "notes: {:?}",
        rep.notes
    );
    assert!(rep.lhs.as_field().is_some() && rep.rhs.as_field().is_some());
}

#[test]
fn rate_fit_is_flat_when_orders_match() {
    // h = m: the derivative norm stays bounded as the lag shrinks.
    let spec = OperatorSpecDef::heat_1d(1.0).build().unwrap();
    let datum = DatumSpec::Gaussian { sigma: 1.0 }.build();
    let config = VerifyConfig::new((0.0, 1.0));
    let rep = verifier::verify_smoothing_rate(
        &spec,
        &datum,
        0.0,
        1,
        1,
        &[0.005, 0.01, 0.02, 0.04],
        6.0,
        &config,
    )
    .unwrap();
    assert_eq!(rep.predicted, 0.0);
    assert!(rep.slope.abs() <= 0.1, "slope {}", rep.slope);
}

#[test]
fn right_hand_side_run_respects_the_growth_bound() {
    let spec = ou_def().build().unwrap();
    let config = VerifyConfig::new((0.0, 2.0));
    let datum = DatumSpec::Tanh.build();
    for variant in [
        EstimateVariant::Chain { k: 1 },
        EstimateVariant::Smoothing { k: 1, h: 1 },
        EstimateVariant::Smoothing { k: 2, h: 1 },
    ] {
        let k = match variant {
            EstimateVariant::Chain { k } | EstimateVariant::Smoothing { k, .. } => k,
            _ => 1,
        };
        let rep =
            verifier::verify_pointwise(&spec, &datum, 0.0, 1.0, k, 2.0, variant, &config).unwrap();
        assert!(
            rep.constants["rhs_sup_bound_slack"] >= 0.0,
            "{}: rhs run violated its sup bound",
            rep.id
        );
    }
}

/// A diffusion with genuine spatial variation, built through the closure
/// API: q(x) = 1 + 1 / (2 (1 + x^2)), so nu ranges over [1, 1.5] and the
/// derivative-bound constant C is strictly positive.
fn varying_diffusion_spec() -> klab::operator::OperatorSpec {
    use klab::coeff::{Arity, CoefficientField};
    use std::sync::Arc;

    let mut q = CoefficientField::new(
        Arity::Matrix,
        1,
        vec![Arc::new(|_t: f64, x: &[f64]| {
            1.0 + 0.5 / (1.0 + x[0] * x[0])
        })],
        0.5,
    )
    .unwrap();
    q.register_derivative(
        0,
        vec![1],
        Arc::new(|_t, x: &[f64]| {
            let w = 1.0 + x[0] * x[0];
            -x[0] / (w * w)
        }),
    );
    q.register_derivative(
        0,
        vec![2],
        Arc::new(|_t, x: &[f64]| {
            let w = 1.0 + x[0] * x[0];
            (3.0 * x[0] * x[0] - 1.0) / (w * w * w)
        }),
    );
    q.register_derivative(
        0,
        vec![3],
        Arc::new(|_t, x: &[f64]| {
            let w = 1.0 + x[0] * x[0];
            (12.0 * x[0] - 12.0 * x[0].powi(3)) / (w * w * w * w)
        }),
    );
    let base = ou_def().build().unwrap();
    klab::operator::OperatorSpec::new(1, (0.0, 2.0), q, base.b.clone(), base.c.clone()).unwrap()
}

#[test]
fn varying_diffusion_registration_passes_the_guard() {
    use rand::SeedableRng;
    let spec = varying_diffusion_spec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    spec.q
        .check_derivatives((0.0, 1.0), 5.0, &mut rng, 100, 1e-5, 1e-6)
        .unwrap();
}

#[test]
fn varying_diffusion_infers_positive_derivative_bounds() {
    use klab::operator::{check_hypotheses, HypothesisProfile, SamplingWindow};
    let spec = varying_diffusion_spec();
    let window = SamplingWindow::new(10.0, (0.0, 1.0)).with_samples(4, 129);
    let report = check_hypotheses(
        &spec,
        HypothesisProfile::WeightedDerivativeBounds { k: 1 },
        &window,
    )
    .unwrap();
    assert!(report.satisfied(), "{report:#?}");
    // |q'| peaks at 3 sqrt(3) / 16 around |x| = 1/sqrt(3); nu <= 1.5.
    assert!(report.inferred["C"] > 0.2 && report.inferred["C"] < 0.4);
    assert!((report.inferred["nu0"] - 1.0).abs() < 0.01);
}

#[test]
fn same_order_estimate_holds_under_varying_diffusion() {
    let spec = varying_diffusion_spec();
    let config = VerifyConfig::new((0.0, 2.0));
    let datum = DatumSpec::Tanh.build();
    let rep = verifier::verify_pointwise(
        &spec,
        &datum,
        0.0,
        1.0,
        1,
        2.0,
        EstimateVariant::Smoothing { k: 1, h: 1 },
        &config,
    )
    .unwrap();
    assert!(rep.pass, "margin {}", rep.worst_margin);
    // The sampled nu range feeds the growth exponent.
    assert!(rep.constants["sigma_1p"] >= 0.0);
}
