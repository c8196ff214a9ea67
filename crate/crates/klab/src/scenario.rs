//! Scenario-driven orchestration: a JSON file names an operator and a list
//! of jobs; the runner executes independent jobs on a bounded worker pool,
//! isolates crashes, and emits one JSON report per job plus a summary.

use crate::catalogue::{DriftSpec, OperatorSpecDef};
use crate::constants::{self, ConstantInputs};
use crate::datum::DatumSpec;
use crate::error::{KlabError, Result};
use crate::feller::{self, FellerProblem};
use crate::grid;
use crate::inequalities;
use crate::measures::{self, MeasureGrid, MeasureMethod};
use crate::operator::{self, HypothesisProfile, SamplingWindow};
use crate::report::EstimateReport;
use crate::solver::{self, ExhaustionParams, SchemeParams};
use crate::verifier::{self, EstimateVariant, VerifyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Global tolerance overrides; jobs fall back to the library defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_solver: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_exhaust: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_law: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_invariance: Option<f64>,
}

fn default_seed() -> u64 {
    0
}

/// A scenario: one operator, a job list, output controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub spec: OperatorSpecDef,
    pub jobs: Vec<Job>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SchemeOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_levels: Option<usize>,
}

impl SchemeOverrides {
    fn scheme(&self, tol: &Tolerances) -> SchemeParams {
        let mut p = SchemeParams::default();
        if let Some(v) = self.theta {
            p.theta = v;
        }
        if let Some(v) = self.dt {
            p.dt = v;
        }
        if let Some(v) = self.h {
            p.h = v;
        }
        if let Some(v) = tol.tol_solver {
            p.tol_solver = v;
        }
        p
    }

    fn exhaustion(&self, tol: &Tolerances) -> ExhaustionParams {
        let mut e = ExhaustionParams::default();
        if let Some(v) = self.r_start {
            e.r_start = v;
        }
        if let Some(v) = self.r_step {
            e.r_step = v;
        }
        if let Some(v) = self.max_levels {
            e.max_levels = v;
        }
        if let Some(v) = tol.tol_exhaust {
            e.tol_exhaust = v;
        }
        e
    }
}

/// One unit of work. Jobs with pass semantics contribute to the exit code.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Job {
    /// Build `G(t,s)f` by exhaustion; optionally export snapshots.
    Solve {
        f: DatumSpec,
        s: f64,
        times: Vec<f64>,
        #[serde(default)]
        scheme: SchemeOverrides,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        export: Option<String>,
    },
    EvolutionLaw {
        f: DatumSpec,
        s: f64,
        r: f64,
        t: f64,
        #[serde(default)]
        scheme: SchemeOverrides,
    },
    VerifyPointwise {
        f: DatumSpec,
        s: f64,
        t: f64,
        k: u8,
        p: f64,
        /// Estimate token: `aa`, `aaaa` or `poi-es`.
        estimate: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h: Option<u8>,
        #[serde(default)]
        scheme: SchemeOverrides,
        /// `csv` writes one row per core node: x, lhs, rhs, margin.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        export: Option<String>,
    },
    SmoothingRate {
        f: DatumSpec,
        s: f64,
        h_order: u8,
        m_order: u8,
        times: Vec<f64>,
        box_half_width: f64,
        /// Acceptable |slope - predicted|; with it the job gains pass
        /// semantics.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rate_tol: Option<f64>,
        #[serde(default)]
        scheme: SchemeOverrides,
    },
    /// Evaluate the constant calculators; emits a ConstantReport bundle.
    Constants { p: f64, k: u8 },
    FellerClassify {
        q: f64,
        b: DriftSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoffs: Option<Vec<f64>>,
    },
    FellerProbe {
        q: f64,
        b: DriftSpec,
        weight: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cutoffs: Option<Vec<f64>>,
    },
    Measures {
        times: Vec<f64>,
        method: MeasureMethod,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        export: Option<String>,
    },
    Invariance {
        f: DatumSpec,
        s: f64,
        t: f64,
        method: MeasureMethod,
    },
    /// Randomised invariance battery (polynomial-times-Gaussian data).
    InvarianceFamily { count: usize, s: f64, t: f64 },
    Tightness {
        times: Vec<f64>,
        radii: Vec<f64>,
        method: MeasureMethod,
    },
    LogSobolev {
        f: DatumSpec,
        s: f64,
        p: f64,
        lambda0: f64,
        r0: f64,
    },
    Poincare {
        f: DatumSpec,
        s: f64,
        lambda0: f64,
        r0: f64,
    },
    Hyper {
        f: DatumSpec,
        s: f64,
        p: f64,
        q: f64,
        lambda0: f64,
        nu0: f64,
        r0: f64,
    },
    Super {
        lambdas: Vec<f64>,
        times: Vec<f64>,
        method: MeasureMethod,
    },
    DriftClass {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    Decay {
        f: DatumSpec,
        s: f64,
        p: f64,
        times: Vec<f64>,
        #[serde(default)]
        scheme: SchemeOverrides,
        /// `csv` writes one row per sample: lag, norm, gradient_norm.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        export: Option<String>,
    },
    Hypotheses {
        profile: HypothesisProfile,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
    LpPreservation {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

impl Job {
    pub fn op_name(&self) -> &'static str {
        match self {
            Job::Solve { .. } => "solve",
            Job::EvolutionLaw { .. } => "evolution_law",
            Job::VerifyPointwise { .. } => "verify_pointwise",
            Job::SmoothingRate { .. } => "smoothing_rate",
            Job::Constants { .. } => "constants",
            Job::FellerClassify { .. } => "feller_classify",
            Job::FellerProbe { .. } => "feller_probe",
            Job::Measures { .. } => "measures",
            Job::Invariance { .. } => "invariance",
            Job::InvarianceFamily { .. } => "invariance_family",
            Job::Tightness { .. } => "tightness",
            Job::LogSobolev { .. } => "log_sobolev",
            Job::Poincare { .. } => "poincare",
            Job::Hyper { .. } => "hyper",
            Job::Super { .. } => "super",
            Job::DriftClass { .. } => "drift_class",
            Job::Decay { .. } => "decay",
            Job::Hypotheses { .. } => "hypotheses",
            Job::LpPreservation { .. } => "lp_preservation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum JobStatus {
    Passed,
    Failed,
    /// Report-only job without pass semantics.
    Info,
    Skipped { reason: String },
    Crashed { message: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobReport {
    pub index: usize,
    pub op: String,
    #[serde(flatten)]
    pub status: JobStatus,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub info: usize,
    pub skipped: usize,
    pub crashed: usize,
    pub reports: Vec<JobReport>,
}

impl RunSummary {
    /// Exit code contract: 0 when no pass-semantics job failed and nothing
    /// crashed; skipped jobs do not fail the run.
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 || self.crashed > 0 {
            1
        } else {
            0
        }
    }
}

fn measure_grid_default() -> MeasureGrid {
    MeasureGrid::default()
}

fn run_single(scenario: &Scenario, index: usize, job: &Job) -> Result<(JobStatus, serde_json::Value)> {
    let tol = &scenario.tolerances;
    let def = &scenario.spec;
    let window = |radius: Option<f64>| {
        SamplingWindow::new(radius.unwrap_or(10.0), def.time_interval).with_samples(16, 64)
    };
    let estimate_status = |rep: &EstimateReport| {
        if rep.pass {
            JobStatus::Passed
        } else {
            JobStatus::Failed
        }
    };
    match job {
        Job::Solve {
            f,
            s,
            times,
            scheme,
            export,
        } => {
            let spec = def.build()?;
            let datum = f.build();
            let field = datum.as_field();
            let run = solver::evolution_operator(
                &spec,
                field.as_ref(),
                *s,
                times,
                &scheme.scheme(tol),
                &scheme.exhaustion(tol),
            )?;
            if let (Some(kind), Some(dir)) = (export, &scenario.output_dir) {
                std::fs::create_dir_all(dir)?;
                match kind.as_str() {
                    "csv" => {
                        let mut file =
                            std::fs::File::create(dir.join(format!("solve_{index:02}.csv")))?;
                        grid::write_snapshots_csv(&mut file, &run.t_grid, &run.snapshots)?;
                    }
                    "binary" => {
                        let mut file =
                            std::fs::File::create(dir.join(format!("solve_{index:02}.bin")))?;
                        grid::write_snapshots_binary(&mut file, &run.t_grid, &run.snapshots)?;
                    }
                    other => {
                        return Err(KlabError::Parse(format!("unknown export format `{other}`")))
                    }
                }
            }
            // Strip bulky snapshot payloads from the JSON report.
            let summary = serde_json::json!({
                "t_grid": run.t_grid,
                "domain_level": run.domain_level,
                "sup_bound_slack": run.sup_bound_slack,
                "warnings": run.warnings,
                "exhaustion": run.exhaustion,
            });
            Ok((JobStatus::Info, summary))
        }
        Job::EvolutionLaw { f, s, r, t, scheme } => {
            let spec = def.build()?;
            let datum = f.build();
            let field = datum.as_field();
            let rep = solver::check_evolution_law(
                &spec,
                field.as_ref(),
                *s,
                *r,
                *t,
                &scheme.scheme(tol),
                &scheme.exhaustion(tol),
                tol.tol_law.unwrap_or(5e-3),
            )?;
            let status = estimate_status(&rep);
            Ok((status, serde_json::json!({
                "sup_difference": rep.constants.get("sup_difference"),
                "tol": rep.tol,
            })))
        }
        Job::VerifyPointwise {
            f,
            s,
            t,
            k,
            p,
            estimate,
            h,
            scheme,
            export,
        } => {
            if *p <= 1.0 {
                return Ok((
                    JobStatus::Skipped {
                        reason: "p <= 1 unsupported for this estimate family".into(),
                    },
                    serde_json::Value::Null,
                ));
            }
            let spec = def.build()?;
            let datum = f.build();
            let variant = EstimateVariant::parse(estimate, *k, *h)?;
            let mut config = VerifyConfig::new(def.time_interval);
            config.params = scheme.scheme(tol);
            config.exhaustion = scheme.exhaustion(tol);
            if let Some(ts) = tol.tol_estimate {
                config.tol_scale = ts;
            }
            config.p0 = def.params.p0;
            let rep = verifier::verify_pointwise(&spec, &datum, *s, *t, *k, *p, variant, &config)?;
            if let (Some(kind), Some(dir)) = (export, &scenario.output_dir) {
                if kind == "csv" {
                    std::fs::create_dir_all(dir)?;
                    let lhs = rep.lhs.as_field().unwrap();
                    let rhs = rep.rhs.as_field().unwrap();
                    let mut out = String::from("x,lhs,rhs,margin\n");
                    lhs.for_each_core(|idx, l| {
                        let x = lhs.coords_of(idx)[0];
                        let r = rhs.values[idx];
                        out.push_str(&format!("{x},{l},{r},{}\n", r - l));
                    });
                    std::fs::write(dir.join(format!("verify_{index:02}.csv")), out)?;
                }
            }
            let status = estimate_status(&rep);
            Ok((status, serde_json::json!({
                "id": rep.id,
                "worst_margin": rep.worst_margin,
                "tol": rep.tol,
                "constants": rep.constants,
                "notes": rep.notes,
            })))
        }
        Job::SmoothingRate {
            f,
            s,
            h_order,
            m_order,
            times,
            box_half_width,
            rate_tol,
            scheme,
        } => {
            let spec = def.build()?;
            let datum = f.build();
            let mut config = VerifyConfig::new(def.time_interval);
            config.params = scheme.scheme(tol);
            let rep = verifier::verify_smoothing_rate(
                &spec,
                &datum,
                *s,
                *h_order,
                *m_order,
                times,
                *box_half_width,
                &config,
            )?;
            let status = match rate_tol {
                Some(tolerance) if rep.deviation <= *tolerance => JobStatus::Passed,
                Some(_) => JobStatus::Failed,
                None => JobStatus::Info,
            };
            Ok((status, serde_json::to_value(&rep)?))
        }
        Job::Constants { p, k } => {
            let spec = def.build()?;
            let w = window(None);
            let inputs = ConstantInputs::from_spec_window(&spec, &w, *p, *k)?;
            let mut bundle = serde_json::Map::new();
            bundle.insert("inputs".into(), serde_json::json!({
                "d": inputs.d, "p": inputs.p, "k": inputs.k, "gamma": inputs.gamma,
                "nu0": inputs.nu0, "c0": inputs.c0, "C": inputs.big_c, "K": inputs.k_form,
                "M": inputs.m, "L": inputs.l, "r0": inputs.r0, "lambda0": inputs.lambda0,
            }));
            bundle.insert(
                "sigma_kp".into(),
                serde_json::to_value(constants::sigma_kp(&inputs)?)?,
            );
            bundle.insert(
                "phi_pk".into(),
                serde_json::to_value(constants::phi_pk(&inputs)?)?,
            );
            bundle.insert(
                "gamma_p23".into(),
                serde_json::to_value(constants::gamma_p23(1.0, &inputs)?)?,
            );
            if inputs.r0 < 0.0 {
                bundle.insert(
                    "log_sobolev_constant".into(),
                    serde_json::to_value(constants::log_sobolev_constant(
                        inputs.p.max(2.0),
                        inputs.lambda0,
                        inputs.r0,
                    )?)?,
                );
                bundle.insert(
                    "hypercontractivity_threshold".into(),
                    serde_json::to_value(constants::hypercontractivity_threshold(
                        2.0,
                        4.0,
                        inputs.lambda0,
                        inputs.nu0,
                        inputs.r0,
                    )?)?,
                );
            }
            Ok((JobStatus::Info, serde_json::Value::Object(bundle)))
        }
        Job::FellerClassify { q, b, cutoffs } => {
            let problem = feller_problem(*q, b)?;
            let cuts = cutoffs.clone().unwrap_or_else(feller::default_cutoffs);
            let verdict = feller::classify(&problem, &cuts)?;
            Ok((JobStatus::Info, serde_json::to_value(&verdict)?))
        }
        Job::FellerProbe {
            q,
            b,
            weight,
            cutoffs,
        } => {
            let problem = feller_problem(*q, b)?;
            let cuts = cutoffs
                .clone()
                .unwrap_or_else(feller::default_probe_cutoffs);
            let limit = feller::asymptotic_probe(&problem, *weight, &cuts)?;
            Ok((JobStatus::Info, serde_json::json!({
                "weight": weight,
                "limit": if limit.is_finite() { serde_json::json!(limit) } else { serde_json::json!("infinite") },
            })))
        }
        Job::Measures {
            times,
            method,
            export,
        } => {
            let family = measures::compute_measures(def, times, measure_grid_default(), method)?;
            if let (Some(kind), Some(dir)) = (export, &scenario.output_dir) {
                if kind == "csv" {
                    std::fs::create_dir_all(dir)?;
                    let mut file =
                        std::fs::File::create(dir.join(format!("measures_{index:02}.csv")))?;
                    grid::write_snapshots_csv(&mut file, &family.time_grid, &family.densities)?;
                }
            }
            Ok((JobStatus::Info, serde_json::json!({
                "times": family.time_grid,
                "provenance": family.provenance,
                "burn_in": family.burn_in,
            })))
        }
        Job::Invariance { f, s, t, method } => {
            let family =
                measures::compute_measures(def, &[*s, *t], measure_grid_default(), method)?;
            let datum = f.build();
            let rep =
                measures::check_invariance(def, &family, &datum, *s, *t, tol.tol_invariance)?;
            let status = estimate_status(&rep);
            Ok((status, serde_json::to_value(&rep)?))
        }
        Job::InvarianceFamily { count, s, t } => {
            let family = measures::compute_measures(
                def,
                &[*s, *t],
                measure_grid_default(),
                &MeasureMethod::Analytic,
            )?;
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            let mut worst = 0.0f64;
            let mut pass = true;
            for _ in 0..*count {
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
                    measures::check_invariance(def, &family, &datum, *s, *t, tol.tol_invariance)?;
                worst = worst.max((rep.tol - rep.worst_margin).max(0.0));
                pass &= rep.pass;
            }
            Ok((
                if pass { JobStatus::Passed } else { JobStatus::Failed },
                serde_json::json!({ "count": count, "worst_error": worst }),
            ))
        }
        Job::Tightness {
            times,
            radii,
            method,
        } => {
            let family = measures::compute_measures(def, times, measure_grid_default(), method)?;
            let rep = measures::check_tightness(&family, radii)?;
            Ok((JobStatus::Info, serde_json::to_value(&rep)?))
        }
        Job::LogSobolev {
            f,
            s,
            p,
            lambda0,
            r0,
        } => {
            let family = measures::compute_measures(
                def,
                &[*s],
                measure_grid_default(),
                &MeasureMethod::Analytic,
            )?;
            let datum = f.build();
            let rep =
                inequalities::check_log_sobolev(&family, *lambda0, *r0, &datum, *s, *p, None)?;
            let status = estimate_status(&rep);
            Ok((status, serde_json::to_value(&rep)?))
        }
        Job::Poincare { f, s, lambda0, r0 } => {
            let family = measures::compute_measures(
                def,
                &[*s],
                measure_grid_default(),
                &MeasureMethod::Analytic,
            )?;
            let datum = f.build();
            let rep = inequalities::check_poincare(&family, *lambda0, *r0, &datum, *s, None)?;
            let status = estimate_status(&rep);
            Ok((status, serde_json::to_value(&rep)?))
        }
        Job::Hyper {
            f,
            s,
            p,
            q,
            lambda0,
            nu0,
            r0,
        } => {
            let family = measures::compute_measures(
                def,
                &[*s],
                measure_grid_default(),
                &MeasureMethod::Analytic,
            )?;
            let datum = f.build();
            let rep = inequalities::check_hypercontractivity(
                def, &family, &datum, *s, *p, *q, *lambda0, *nu0, *r0, 1e-6,
            )?;
            let status = if rep.pass {
                JobStatus::Passed
            } else {
                JobStatus::Failed
            };
            Ok((status, serde_json::to_value(&rep)?))
        }
        Job::Super {
            lambdas,
            times,
            method,
        } => {
            let family = measures::compute_measures(def, times, measure_grid_default(), method)?;
            let rep = inequalities::supercontractivity_probe(&family, lambdas)?;
            Ok((JobStatus::Info, serde_json::to_value(&rep)?))
        }
        Job::DriftClass { radius } => {
            let spec = def.build()?;
            let w = SamplingWindow::new(radius.unwrap_or(20.0), def.time_interval)
                .with_samples(8, 32);
            let verdict = inequalities::classify_drift_growth(&spec, &w)?;
            Ok((JobStatus::Info, serde_json::to_value(&verdict)?))
        }
        Job::Decay {
            f,
            s,
            p,
            times,
            scheme,
            export,
        } => {
            let mut measure_times = vec![*s];
            measure_times.extend_from_slice(times);
            // Narrower than the default so the solver core covers it.
            let grid = MeasureGrid {
                half_width: 8.0,
                n: 801,
            };
            let family =
                measures::compute_measures(def, &measure_times, grid, &MeasureMethod::Analytic)?;
            let datum = f.build();
            let rep = inequalities::estimate_decay(
                def,
                &family,
                &datum,
                *s,
                *p,
                times,
                &scheme.scheme(tol),
                &SchemeOverrides {
                    r_start: Some(12.0),
                    ..scheme.clone()
                }
                .exhaustion(tol),
            )?;
            if let (Some(kind), Some(dir)) = (export, &scenario.output_dir) {
                if kind == "csv" {
                    std::fs::create_dir_all(dir)?;
                    let mut out = String::from("lag,norm,gradient_norm\n");
                    for ((t, n), g) in rep
                        .sample_times
                        .iter()
                        .zip(&rep.norms)
                        .zip(&rep.gradient_norms)
                    {
                        out.push_str(&format!("{},{n},{g}\n", t - s));
                    }
                    std::fs::write(dir.join(format!("decay_{index:02}.csv")), out)?;
                }
            }
            Ok((JobStatus::Info, serde_json::to_value(&rep)?))
        }
        Job::Hypotheses { profile, radius } => {
            let spec = def.build()?;
            let rep = operator::check_hypotheses(&spec, *profile, &window(*radius))?;
            let status = if rep.satisfied() {
                JobStatus::Passed
            } else {
                JobStatus::Failed
            };
            Ok((status, serde_json::to_value(&rep)?))
        }
        Job::LpPreservation { radius } => {
            let spec = def.build()?;
            let rep = operator::check_lp_preservation(&spec, &window(*radius))?;
            Ok((JobStatus::Info, serde_json::to_value(&rep)?))
        }
    }
}

fn feller_problem(q: f64, b: &DriftSpec) -> Result<FellerProblem> {
    if q <= 0.0 {
        return Err(KlabError::Domain("diffusion must be positive".into()));
    }
    let field = b.build(1)?;
    let b_fn = Arc::new(move |x: f64| field.eval(0, 0.0, &[x]));
    Ok(FellerProblem::new(Arc::new(move |_| q), b_fn))
}

/// Worker-pool size: `KLAB_WORKERS` override, else the logical core count.
pub fn worker_count() -> usize {
    std::env::var("KLAB_WORKERS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

/// Runs every job (independent jobs concurrently), writes per-job reports
/// and a summary when an output directory is set, and returns the summary.
pub fn run(scenario: &Scenario) -> Result<RunSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| KlabError::Invalid(format!("worker pool: {e}")))?;

    let reports: Vec<JobReport> = pool.install(|| {
        use rayon::prelude::*;
        scenario
            .jobs
            .par_iter()
            .enumerate()
            .map(|(index, job)| {
                let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                    run_single(scenario, index, job)
                }));
                let (status, detail) = match outcome {
                    Ok(Ok((status, detail))) => (status, detail),
                    Ok(Err(KlabError::Domain(reason))) => (
                        JobStatus::Skipped {
                            reason: format!("precondition: {reason}"),
                        },
                        serde_json::Value::Null,
                    ),
                    Ok(Err(err)) => (
                        JobStatus::Crashed {
                            message: err.to_string(),
                        },
                        serde_json::Value::Null,
                    ),
                    Err(panic) => {
                        let message = panic
                            .downcast_ref::<String>()
                            .cloned()
                            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                            .unwrap_or_else(|| "panic".into());
                        (JobStatus::Crashed { message }, serde_json::Value::Null)
                    }
                };
                JobReport {
                    index,
                    op: job.op_name().into(),
                    status,
                    detail,
                }
            })
            .collect()
    });

    let mut summary = RunSummary {
        total: reports.len(),
        passed: 0,
        failed: 0,
        info: 0,
        skipped: 0,
        crashed: 0,
        reports,
    };
    for r in &summary.reports {
        match r.status {
            JobStatus::Passed => summary.passed += 1,
            JobStatus::Failed => summary.failed += 1,
            JobStatus::Info => summary.info += 1,
            JobStatus::Skipped { .. } => summary.skipped += 1,
            JobStatus::Crashed { .. } => summary.crashed += 1,
        }
    }

    if let Some(dir) = &scenario.output_dir {
        std::fs::create_dir_all(dir)?;
        for r in &summary.reports {
            let path = dir.join(format!("report_{:02}_{}.json", r.index, r.op));
            std::fs::write(&path, serde_json::to_string_pretty(r)?)?;
        }
        std::fs::write(
            dir.join("summary.json"),
            serde_json::to_string_pretty(&summary)?,
        )?;
    }
    Ok(summary)
}

/// Parses and runs a scenario file. Parse failures map to exit code 2.
pub fn run_file(path: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KlabError::Parse(format!("{}: {e}", path.display())))?;
    let scenario: Scenario =
        serde_json::from_str(&text).map_err(|e| KlabError::Parse(format!("{}: {e}", path.display())))?;
    run(&scenario)
}
