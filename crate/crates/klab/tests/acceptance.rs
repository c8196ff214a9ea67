//! Acceptance battery: every criterion is pinned here at its stated
//! tolerance and prints one PASS line. Run with
//! `cargo test -p klab --test acceptance -- --nocapture`.

use klab::catalogue::{
    DiffusionSpec, DriftSpec, LyapunovSpec, OperatorSpecDef, PotentialSpec, TimeModulation,
};
use klab::constants::{self, ConstantInputs};
use klab::datum::DatumSpec;
use klab::feller::{self, FellerProblem, Integrability, Uniqueness};
use klab::grid::GridFunction;
use klab::inequalities;
use klab::measures::{self, BurnInParams, MeasureGrid, MeasureMethod};
use klab::oracles::OuSpec1D;
use klab::quad::trapezoid;
use klab::solver::{self, ExhaustionParams, SchemeParams};
use klab::verifier::{self, EstimateVariant, VerifyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;
use std::time::Instant;

fn ou_def() -> OperatorSpecDef {
    OperatorSpecDef::linear_drift_1d(1.0, 1.0)
}

fn pass(criterion: usize, name: &str, detail: String) {
    println!("ACCEPTANCE {criterion:02} {name}: PASS ({detail})");
}

#[test]
fn acceptance_01_closed_form_agreement() {
    let started = Instant::now();
    let spec = ou_def().build().unwrap();
    let ou = OuSpec1D::constant(1.0, 1.0);
    let datum = DatumSpec::Tanh.build();
    let field = datum.as_field();
    let params = SchemeParams {
        h: 0.02,
        dt: 1e-3,
        ..SchemeParams::default()
    };
    let run = solver::evolution_operator(
        &spec,
        field.as_ref(),
        0.0,
        &[1.0],
        &params,
        &ExhaustionParams::default(),
    )
    .unwrap();
    let snap = run.last();
    let mut worst = 0.0f64;
    for i in 0..snap.n {
        let x = snap.coord(i);
        if x.abs() <= 3.0 {
            let exact = ou.evolve(&|y| y.tanh(), 0.0, 1.0, x).unwrap();
            worst = worst.max((snap.values[i] - exact).abs());
        }
    }
    let elapsed = started.elapsed();
    assert!(worst <= 1e-3, "sup error {worst} on |x| <= 3");
    assert!(elapsed.as_secs_f64() <= 10.0, "runtime {elapsed:?}");
    pass(
        1,
        "closed-form agreement",
        format!("sup error {worst:.2e}, runtime {:.2}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn acceptance_02_monotone_exhaustion() {
    let spec = ou_def().build().unwrap();
    let params = SchemeParams {
        h: 0.02,
        dt: 1e-3,
        ..SchemeParams::default()
    };
    let run = solver::evolution_operator(
        &spec,
        &|x: &[f64]| (-x[0] * x[0]).exp(),
        0.0,
        &[1.0],
        &params,
        &ExhaustionParams {
            r_start: 3.0,
            r_step: 1.5,
            max_levels: 6,
            tol_exhaust: 1e-4,
        },
    )
    .unwrap();
    let outcome = run.exhaustion.unwrap();
    let violation = outcome.monotonicity_violation.unwrap_or(0.0);
    assert!(
        violation <= 1e-10,
        "monotone increase violated by {violation:e}"
    );
    assert!(
        outcome.gaps.windows(2).all(|w| w[1] <= w[0]),
        "level gaps not decreasing: {:?}",
        outcome.gaps
    );
    assert!(
        *outcome.gaps.last().unwrap() <= 1e-4,
        "final gap {:?}",
        outcome.gaps.last()
    );
    pass(
        2,
        "monotone exhaustion",
        format!(
            "monotonicity slack {violation:.1e}, gaps {:?}",
            outcome
                .gaps
                .iter()
                .map(|g| format!("{g:.1e}"))
                .collect::<Vec<_>>()
        ),
    );
}

/// Ten-operator catalogue for the sup-norm growth bound.
fn catalogue() -> Vec<(&'static str, OperatorSpecDef)> {
    let base = ou_def();
    vec![
        ("heat", OperatorSpecDef::heat_1d(1.0)),
        ("linear drift", base.clone()),
        (
            "modulated drift",
            OperatorSpecDef {
                b: DriftSpec::Linear {
                    rate: 1.0,
                    modulation: Some(TimeModulation {
                        amp: 0.5,
                        omega: 1.0,
                    }),
                },
                ..base.clone()
            },
        ),
        (
            "cubic drift",
            OperatorSpecDef {
                b: DriftSpec::Cubic,
                ..base.clone()
            },
        ),
        (
            "power drift",
            OperatorSpecDef {
                b: DriftSpec::PowerLaw { epsilon: 1.0 },
                ..base.clone()
            },
        ),
        (
            "negative constant potential",
            OperatorSpecDef {
                c: PotentialSpec::Constant { value: -1.0 },
                ..base.clone()
            },
        ),
        (
            "quadratic well potential",
            OperatorSpecDef {
                c: PotentialSpec::NegativeSquare,
                ..base.clone()
            },
        ),
        (
            "modulated diffusion",
            OperatorSpecDef {
                q: DiffusionSpec::Isotropic {
                    value: 1.0,
                    modulation: Some(TimeModulation {
                        amp: 0.5,
                        omega: 2.0,
                    }),
                },
                ..base.clone()
            },
        ),
        (
            "planar heat",
            OperatorSpecDef {
                d: 2,
                time_interval: (0.0, 10.0),
                q: DiffusionSpec::Isotropic {
                    value: 1.0,
                    modulation: None,
                },
                b: DriftSpec::Zero,
                c: PotentialSpec::Zero,
                lyapunov: None,
                params: Default::default(),
            },
        ),
        (
            "planar linear drift",
            OperatorSpecDef {
                d: 2,
                time_interval: (0.0, 10.0),
                q: DiffusionSpec::Isotropic {
                    value: 1.0,
                    modulation: None,
                },
                b: DriftSpec::Linear {
                    rate: 1.0,
                    modulation: None,
                },
                c: PotentialSpec::Zero,
                lyapunov: Some(LyapunovSpec::QuadraticPlusOne),
                params: Default::default(),
            },
        ),
    ]
}

#[test]
fn acceptance_03_sup_norm_growth_bound() {
    let mut worst = f64::INFINITY;
    for (name, def) in catalogue() {
        let spec = def.build().unwrap();
        let (r, n, dt) = if def.d == 1 {
            (4.0, 201, 1e-3)
        } else {
            (4.0, 81, 2e-3)
        };
        let f = GridFunction::from_fn(def.d, r, n, &|x| {
            (-x.iter().map(|v| v * v).sum::<f64>()).exp() + 0.2
        })
        .unwrap();
        let params = SchemeParams {
            h: 2.0 * r / (n - 1) as f64,
            dt,
            ..SchemeParams::default()
        };
        let run = solver::solve_dirichlet(&spec, &f, 0.0, &[0.25, 0.5], &params).unwrap();
        assert!(
            run.sup_bound_slack >= 0.0,
            "{name}: sup bound violated by {:e}",
            -run.sup_bound_slack
        );
        worst = worst.min(run.sup_bound_slack);
    }
    pass(
        3,
        "sup-norm growth bound",
        format!("10 operators, worst slack {worst:.2e}"),
    );
}

#[test]
fn acceptance_04_mass_conservation() {
    // Linear drift confines mass; a fixed comfortable box suffices.
    let spec = ou_def().build().unwrap();
    let params = SchemeParams {
        h: 0.02,
        dt: 1e-3,
        ..SchemeParams::default()
    };
    let run = solver::evolution_operator(
        &spec,
        &|_: &[f64]| 1.0,
        0.0,
        &[1.0],
        &params,
        &ExhaustionParams {
            r_start: 8.0,
            r_step: 2.0,
            max_levels: 4,
            tol_exhaust: 1e-7,
        },
    )
    .unwrap();
    let mut ou_err = 0.0f64;
    run.last().for_each_core(|_, v| ou_err = ou_err.max((v - 1.0).abs()));
    assert!(ou_err <= 1e-6, "linear-drift mass error {ou_err:e}");

    // Pure diffusion spreads: the exhaustion has to push the boundary far out.
    let spec = OperatorSpecDef::heat_1d(1.0).build().unwrap();
    let params = SchemeParams {
        h: 0.04,
        dt: 1e-3,
        ..SchemeParams::default()
    };
    let run = solver::evolution_operator(
        &spec,
        &|_: &[f64]| 1.0,
        0.0,
        &[1.0],
        &params,
        &ExhaustionParams {
            r_start: 30.0,
            r_step: 4.0,
            max_levels: 6,
            tol_exhaust: 5e-7,
        },
    )
    .unwrap();
    assert!(run.exhaustion.as_ref().unwrap().converged);
    let mut heat_err = 0.0f64;
    run.last()
        .for_each_core(|_, v| heat_err = heat_err.max((v - 1.0).abs()));
    assert!(heat_err <= 1e-6, "heat mass error {heat_err:e}");
    pass(
        4,
        "mass conservation",
        format!("linear drift {ou_err:.2e}, heat {heat_err:.2e}"),
    );
}

#[test]
fn acceptance_05_two_parameter_composition() {
    let spec = ou_def().build().unwrap();
    let params = SchemeParams {
        h: 0.02,
        dt: 1e-3,
        ..SchemeParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(501);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let s = rng.gen_range(0.0..0.5);
        let r = s + rng.gen_range(0.2..0.6);
        let t = r + rng.gen_range(0.2..0.6);
        let report = solver::check_evolution_law(
            &spec,
            &|x: &[f64]| x[0].cos(),
            s,
            r,
            t,
            &params,
            &ExhaustionParams::default(),
            5e-3,
        )
        .unwrap();
        assert!(report.pass, "triple ({s:.2},{r:.2},{t:.2}) failed");
        worst = worst.max(report.constants["sup_difference"]);
    }
    pass(
        5,
        "two-parameter composition",
        format!("5 random triples, worst sup difference {worst:.2e}"),
    );
}

#[test]
fn acceptance_06_pointwise_gradient_estimate() {
    let spec = ou_def().build().unwrap();
    let config = VerifyConfig::new((0.0, 2.0));

    let datum = DatumSpec::Tanh.build();
    let report = verifier::verify_pointwise(
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
    // Pinned at the bare 1e-6 * scale, without the discretisation slack.
    let scale = report.rhs.as_field().unwrap().sup_norm_core();
    assert!(
        report.worst_margin >= -1e-6 * scale,
        "margin {} below -1e-6 * {scale}",
        report.worst_margin
    );
    assert!(report.pass);

    // Sharpness witness: the affine datum turns the estimate into an equality.
    let datum = DatumSpec::Affine { a: 0.0, b: 1.0 }.build();
    let report_sharp = verifier::verify_pointwise(
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
    let lhs = report_sharp.lhs.as_field().unwrap();
    let rhs = report_sharp.rhs.as_field().unwrap();
    let mut gap = 0.0f64;
    lhs.for_each_core(|idx, v| gap = gap.max((rhs.values[idx] - v).abs()));
    assert!(gap <= 1e-4, "sharpness gap {gap:e}");
    pass(
        6,
        "pointwise gradient estimate",
        format!(
            "margin {:.2e} (tol {:.1e}), sharpness gap {gap:.2e}",
            report.worst_margin, report.tol
        ),
    );
}

#[test]
fn acceptance_07_smoothing_rates() {
    let times = [0.02, 0.033, 0.055, 0.09, 0.15];
    let datum = DatumSpec::MollifiedStep { delta: 0.04 }.build();
    let config = VerifyConfig::new((0.0, 1.0));
    let mut details = Vec::new();
    for (name, def) in [("heat", OperatorSpecDef::heat_1d(1.0)), ("linear drift", ou_def())] {
        let spec = def.build().unwrap();
        for (m, predicted, tol) in [(1u8, -0.5, 0.1), (2u8, -1.0, 0.15)] {
            let report = verifier::verify_smoothing_rate(
                &spec, &datum, 0.0, 0, m, &times, 8.0, &config,
            )
            .unwrap();
            assert!(
                (report.slope - predicted).abs() <= tol,
                "{name} (0,{m}): slope {} vs {predicted} +- {tol}",
                report.slope
            );
            details.push(format!("{name}(0,{m}) {:.3}", report.slope));
        }
    }
    pass(7, "smoothing rates", details.join(", "));
}

#[test]
fn acceptance_08_tail_classification() {
    let outward = FellerProblem::new(Arc::new(|_| 1.0), Arc::new(|x: f64| x * x * x));
    let verdict = feller::classify(&outward, &feller::default_cutoffs()).unwrap();
    assert_eq!(
        verdict.conclusion,
        Uniqueness::InfinitelyManyBoundedSolutions
    );

    let inward = FellerProblem::new(Arc::new(|_| 1.0), Arc::new(|x: f64| -x * x * x));
    let verdict = feller::classify(&inward, &feller::default_cutoffs()).unwrap();
    assert_eq!(verdict.conclusion, Uniqueness::UniqueBoundedSolution);

    let power = FellerProblem::new(Arc::new(|_| 1.0), Arc::new(|x: f64| -x * x.abs()));
    let verdict = feller::classify(&power, &feller::default_cutoffs()).unwrap();
    assert_eq!(verdict.q_plus.verdict, Integrability::Integrable);
    assert_eq!(verdict.q_minus.verdict, Integrability::Integrable);
    assert_eq!(verdict.r_plus.verdict, Integrability::NonIntegrable);
    assert_eq!(verdict.r_minus.verdict, Integrability::NonIntegrable);

    let limit = feller::asymptotic_probe(&power, 1.5, &feller::default_probe_cutoffs()).unwrap();
    assert!(limit.abs() <= 1e-3, "weighted tail limit {limit}");
    pass(
        8,
        "tail classification",
        format!("categorical matches exact, weighted limit {limit:.1e}"),
    );
}

#[test]
fn acceptance_09_measure_invariance() {
    // Analytic family: randomized test battery at 1e-5.
    let def = ou_def();
    let family = measures::compute_measures(
        &def,
        &[0.0, 1.0],
        MeasureGrid::default(),
        &MeasureMethod::Analytic,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let datum = DatumSpec::PolyGauss {
            coeffs: [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-0.5..0.5),
            ],
            lambda: rng.gen_range(0.05..0.4),
        }
        .build();
        let rep =
            measures::check_invariance(&def, &family, &datum, 0.0, 1.0, Some(1e-5)).unwrap();
        assert!(rep.pass, "invariance failed: margin {}", rep.worst_margin);
        let gap = (rep.lhs.as_scalar().unwrap() - rep.rhs.as_scalar().unwrap()).abs();
        worst = worst.max(gap);
    }
    assert!(worst <= 1e-5);

    // Numeric family for the cubic drift against the quartic closed form.
    let cubic = OperatorSpecDef {
        b: DriftSpec::Cubic,
        ..ou_def()
    };
    let grid = MeasureGrid {
        half_width: 5.0,
        n: 501,
    };
    let family = measures::compute_measures(
        &cubic,
        &[0.0],
        grid,
        &MeasureMethod::BurnIn(BurnInParams::default()),
    )
    .unwrap();
    let rho = &family.densities[0];
    let h = rho.spacing();
    let mut closed: Vec<f64> = (0..rho.n)
        .map(|i| (-rho.coord(i).powi(4) / 4.0).exp())
        .collect();
    let mass = trapezoid(&closed, h);
    for v in &mut closed {
        *v /= mass;
    }
    let l1: f64 = trapezoid(
        &rho.values
            .iter()
            .zip(&closed)
            .map(|(a, b)| (a - b).abs())
            .collect::<Vec<_>>(),
        h,
    );
    assert!(l1 <= 1e-3, "quartic density L1 error {l1}");
    pass(
        9,
        "measure invariance",
        format!("20 data worst gap {worst:.2e}, quartic L1 {l1:.2e}"),
    );
}

#[test]
fn acceptance_10_entropy_and_poincare() {
    let def = ou_def();
    let family = measures::compute_measures(
        &def,
        &[0.0],
        MeasureGrid::default(),
        &MeasureMethod::Analytic,
    )
    .unwrap();
    // C_2 = 2 at lambda0 = 1, r0 = -1.
    assert_eq!(
        constants::log_sobolev_constant(2.0, 1.0, -1.0).unwrap().value,
        2.0
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    for _ in 0..20 {
        let datum = DatumSpec::PolyGauss {
            coeffs: [
                rng.gen_range(1.5..2.5), // bounded away from zero
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.1..0.1),
            ],
            lambda: rng.gen_range(0.02..0.2),
        }
        .build();
        let rep =
            inequalities::check_log_sobolev(&family, 1.0, -1.0, &datum, 0.0, 2.0, None).unwrap();
        assert!(rep.pass, "entropy inequality failed on the family");
    }
    let extremal = DatumSpec::Exp { theta: 0.5 }.build();
    let rep =
        inequalities::check_log_sobolev(&family, 1.0, -1.0, &extremal, 0.0, 2.0, Some(1e-6))
            .unwrap();
    assert!(rep.pass);
    let slack = rep.worst_margin.abs();
    assert!(slack <= 1e-6, "extremal slack {slack:e}");

    let linear = DatumSpec::Affine { a: 0.0, b: 1.0 }.build();
    let rep = inequalities::check_poincare(&family, 1.0, -1.0, &linear, 0.0, Some(1e-6)).unwrap();
    assert!(rep.pass);
    let gap = (rep.lhs.as_scalar().unwrap() - rep.rhs.as_scalar().unwrap()).abs();
    assert!(gap <= 1e-6, "linear-extremal gap {gap:e}");
    pass(
        10,
        "entropy and Poincare",
        format!("20-function family, extremal slack {slack:.1e}, linear gap {gap:.1e}"),
    );
}

#[test]
fn acceptance_11_summability_threshold() {
    let threshold = constants::hypercontractivity_threshold(2.0, 4.0, 1.0, 1.0, -1.0)
        .unwrap()
        .value;
    assert!((threshold - 0.54931).abs() <= 1e-5, "threshold {threshold}");

    let def = ou_def();
    let family = measures::compute_measures(
        &def,
        &[0.0],
        MeasureGrid::default(),
        &MeasureMethod::Analytic,
    )
    .unwrap();
    let test_family = [
        DatumSpec::Affine { a: 1.0, b: 0.5 },
        DatumSpec::Exp { theta: 0.5 },
        DatumSpec::Exp { theta: 0.25 },
        DatumSpec::Exp { theta: -0.4 },
        DatumSpec::PolyGauss {
            coeffs: [1.0, 0.3, 0.2, 0.0],
            lambda: 0.1,
        },
        DatumSpec::Tanh,
    ];
    let mut worst_ratio = 0.0f64;
    for spec in test_family {
        let datum = spec.build();
        let rep = inequalities::check_hypercontractivity(
            &def, &family, &datum, 0.0, 2.0, 4.0, 1.0, 1.0, -1.0, 1e-6,
        )
        .unwrap();
        assert!(rep.pass, "{spec:?} exceeded the contraction bound");
        worst_ratio = worst_ratio.max(rep.checks[0].ratio);
    }
    assert!(worst_ratio <= 1.0 + 1e-6);
    pass(
        11,
        "summability threshold",
        format!("threshold {threshold:.5}, worst ratio at threshold {worst_ratio:.9}"),
    );
}

#[test]
fn acceptance_12_decay_rates() {
    let def = ou_def();
    let times = [1.0, 1.8, 3.2, 5.6, 10.0];
    let family = measures::compute_measures(
        &def,
        &[0.0, 1.0, 1.8, 3.2, 5.6, 10.0],
        MeasureGrid {
            half_width: 8.0,
            n: 801,
        },
        &MeasureMethod::Analytic,
    )
    .unwrap();
    let datum = DatumSpec::Affine { a: 0.0, b: 1.0 }.build();
    let params = SchemeParams {
        h: 0.02,
        dt: 1e-3,
        ..SchemeParams::default()
    };
    let exhaustion = ExhaustionParams {
        r_start: 12.0,
        r_step: 2.0,
        max_levels: 3,
        tol_exhaust: 1e-4,
    };
    let mut rates = Vec::new();
    for p in [2.0, 4.0] {
        let est = inequalities::estimate_decay(
            &def, &family, &datum, 0.0, p, &times, &params, &exhaustion,
        )
        .unwrap();
        assert!(
            (est.rate + 1.0).abs() <= 0.05,
            "p = {p}: rate {} not within -1 +- 0.05",
            est.rate
        );
        rates.push(est.rate);
    }
    assert!(
        (rates[0] - rates[1]).abs() <= 0.05,
        "rates differ across p: {rates:?}"
    );
    pass(
        12,
        "decay rates",
        format!("rate(p=2) {:.4}, rate(p=4) {:.4}", rates[0], rates[1]),
    );
}

#[test]
fn acceptance_13_constant_regressions() {
    // Hand-derived reference evaluations, frozen bit-for-bit. Each `expected`
    // expression is the documented arithmetic of the formula; the assertions
    // compare exact bits.
    let mut checked = 0usize;
    let mut check = |name: &str, got: f64, expected: f64| {
        assert_eq!(
            got.to_bits(),
            expected.to_bits(),
            "{name}: {got:?} vs {expected:?}"
        );
        checked += 1;
    };

    let mut inputs = ConstantInputs {
        m: -0.5,
        ..ConstantInputs::default()
    };
    // d=1, p=2, k=1, C=0, M=-0.5, L=1, nu = 1:
    // sup = (1-2)*1 + (-0.5) = -1.5, sigma = [2(-1.5) + 2(0.25)]^+ = 0.
    check("sigma_12_zero", constants::sigma_kp(&inputs).unwrap().value, 0.0);
    inputs.p = 4.0;
    check("sigma_14_zero", constants::sigma_kp(&inputs).unwrap().value, 0.0);
    inputs.p = 2.0;
    inputs.m = -100.0;
    check(
        "sigma_negative_bracket",
        constants::sigma_kp(&inputs).unwrap().value,
        0.0,
    );
    // Positive case, k = 1: bracket = 2((1-2) + (0 + 3)) + 0 + 2/4 = 4.5.
    inputs.m = 3.0;
    check(
        "sigma_12_positive",
        constants::sigma_kp(&inputs).unwrap().value,
        2.0 * (-1.0 + 3.0) + 2.0 * 0.25,
    );
    // p > 2 rule: sigma_{1,4} = 4 sigma_{1,2} / 2.
    let at2 = constants::sigma_kp(&inputs).unwrap().value;
    inputs.p = 4.0;
    check(
        "sigma_p_gt_2_rule",
        constants::sigma_kp(&inputs).unwrap().value,
        4.0 * at2 / 2.0,
    );

    // phi_{p,1} = r0 when C vanishes.
    let mut inputs = ConstantInputs {
        r0: -1.0,
        ..ConstantInputs::default()
    };
    for p in [1.5, 2.0, 4.0] {
        inputs.p = p;
        check(
            "phi_p1_is_r0",
            constants::phi_pk(&inputs).unwrap().value,
            -1.0,
        );
    }
    // k = 2 with vanished C-terms: max(m2 nu0^gamma, (1-p) nu0 + 2 m2 nu0^gamma).
    let inputs = ConstantInputs {
        k: 2,
        m2: -0.25,
        ..ConstantInputs::default()
    };
    check(
        "phi_22_two_branch",
        constants::phi_pk(&inputs).unwrap().value,
        (-0.25f64).max(-1.0 + 2.0 * (-0.25)),
    );

    // Order-lowering prefactor with vanishing exponents:
    // Gamma(r) = (4 (1 + r)) / r + 1 at p = 2, alpha = 4, k1 = k2 = 1.
    let gamma = constants::gamma_p23_with(1.0, 0.0, 0.0, 2.0, 4.0, 1.0, 1.0)
        .unwrap()
        .value;
    check("gamma_unit_lag", gamma, (4.0 * (1.0 + 1.0)) / 1.0 + 1.0);

    // Threshold arithmetic.
    check(
        "threshold_half_log3",
        constants::hypercontractivity_threshold(2.0, 4.0, 1.0, 1.0, -1.0)
            .unwrap()
            .value,
        1.0 * 3.0f64.ln() / 2.0,
    );
    check(
        "threshold_scaled",
        constants::hypercontractivity_threshold(2.0, 1.0 + std::f64::consts::E, 2.0, 1.0, -2.0)
            .unwrap()
            .value,
        2.0 * std::f64::consts::E.ln() / (2.0 * 1.0 * 2.0),
    );

    // Entropy constants and the Poincare factor.
    check(
        "entropy_p2",
        constants::log_sobolev_constant(2.0, 1.0, -1.0).unwrap().value,
        2.0,
    );
    check(
        "entropy_p4",
        constants::log_sobolev_constant(4.0, 1.0, -1.0).unwrap().value,
        8.0,
    );
    check(
        "entropy_scaling",
        constants::log_sobolev_constant(2.0, 3.5, -1.0).unwrap().value,
        3.5 * 2.0,
    );

    assert!(checked >= 10, "only {checked} regression values checked");
    pass(
        13,
        "constant regressions",
        format!("{checked} hand-derived values reproduced bit-for-bit"),
    );
}
