//! Command-line front end: each subcommand builds a one-job scenario and
//! prints its JSON report; `run` executes a full scenario file.

use clap::{Args, Parser, Subcommand};
use klab::catalogue::{DriftSpec, OperatorSpecDef};
use klab::datum::DatumSpec;
use klab::error::KlabError;
use klab::measures::{BurnInParams, MeasureMethod};
use klab::operator::HypothesisProfile;
use klab::scenario::{Job, RunSummary, Scenario, SchemeOverrides, Tolerances};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "klab",
    about = "Numerical laboratory for evolution operators of second-order equations \
             with unbounded coefficients",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SpecArg {
    /// Operator: a JSON file path, inline JSON, or a shorthand
    /// (`ou[:rate[,q]]`, `heat[:q]`, `cubic`, `power:epsilon`).
    #[arg(long, default_value = "ou")]
    spec: String,
}

impl SpecArg {
    fn build(&self) -> Result<OperatorSpecDef, KlabError> {
        parse_spec(&self.spec)
    }
}

#[derive(Args, Clone)]
struct SchemeArgs {
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 0.02)]
    h: f64,
    /// First exhaustion half-width.
    #[arg(long = "R0", default_value_t = 6.0)]
    r0: f64,
    /// Exhaustion level cap.
    #[arg(long, default_value_t = 8)]
    levels: usize,
}

impl SchemeArgs {
    fn overrides(&self) -> SchemeOverrides {
        SchemeOverrides {
            theta: Some(self.theta),
            dt: Some(self.dt),
            h: Some(self.h),
            r_start: Some(self.r0),
            r_step: None,
            max_levels: Some(self.levels),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build G(t,s)f by domain exhaustion and export snapshots.
    Solve {
        #[command(flatten)]
        spec: SpecArg,
        /// Initial datum (`tanh`, `gaussian:1.0`, `exp:0.5`, ...).
        #[arg(long, default_value = "tanh")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        /// Snapshot times (repeatable).
        #[arg(long = "t", required = true, num_args = 1..)]
        times: Vec<f64>,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Output directory for snapshot exports.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Export the documented little-endian binary instead of CSV.
        #[arg(long)]
        binary: bool,
    },
    /// Verify a pointwise estimate or a smoothing rate.
    Verify {
        #[command(flatten)]
        spec: SpecArg,
        /// Estimate id: `aa`, `aaaa`, `poi-es` or `stimasem`.
        #[arg(long)]
        estimate: String,
        #[arg(long, default_value_t = 1)]
        k: u8,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Datum order h (aaaa) or datum smoothness order (stimasem).
        #[arg(long)]
        h: Option<u8>,
        /// Derivative order m for stimasem.
        #[arg(long)]
        m: Option<u8>,
        #[arg(long, default_value = "tanh")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Sample times for stimasem (repeatable).
        #[arg(long = "tau", num_args = 0..)]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        theta: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Grid spacing.
        #[arg(long = "grid-h", default_value_t = 0.02)]
        grid_h: f64,
        #[arg(long = "R0", default_value_t = 6.0)]
        r0: f64,
        #[arg(long, default_value_t = 8)]
        levels: usize,
        /// Output directory: also writes a CSV of (x, lhs, rhs, margin).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the explicit constant formulas for the operator.
    Constants {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1)]
        k: u8,
    },
    /// Classify a 1-D operator by tail integrability.
    Feller {
        /// Constant diffusion coefficient.
        #[arg(long, default_value_t = 1.0)]
        q: f64,
        /// Drift shorthand: `cubic`, `cubic_out`, `power:eps`, `linear:rate`,
        /// `zero`, `log_growth`.
        #[arg(long)]
        b: String,
        /// Cutoffs (repeatable); defaults to {2,3,4,5,6,8}.
        #[arg(long, num_args = 0..)]
        cutoffs: Vec<f64>,
        /// Also extrapolate the limit of x^weight Q(x) at +infinity.
        #[arg(long)]
        probe_weight: Option<f64>,
    },
    /// Build a family of measures and export densities as CSV.
    Measures {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long = "t", required = true, num_args = 1..)]
        times: Vec<f64>,
        /// `analytic` or `burnin`.
        #[arg(long, default_value = "analytic")]
        method: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the invariance pairing of the measure family.
    Invariance {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value = "gaussian:1.0")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value = "analytic")]
        method: String,
    },
    /// Entropy (log-Sobolev) inequality check.
    Lsi {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value = "exp:0.5")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda0: f64,
        #[arg(long, default_value_t = -1.0)]
        r0: f64,
    },
    /// Poincare inequality check.
    Poincare {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value = "x")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda0: f64,
        #[arg(long, default_value_t = -1.0)]
        r0: f64,
    },
    /// Summability-improvement check at the explicit threshold.
    Hyper {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value = "exp:0.5")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 4.0)]
        q: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda0: f64,
        #[arg(long, default_value_t = 1.0)]
        nu0: f64,
        #[arg(long, default_value_t = -1.0)]
        r0: f64,
    },
    /// Gaussian-moment probe for supercontractivity evidence.
    Super {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, required = true, num_args = 1..)]
        lambdas: Vec<f64>,
        #[arg(long = "t", num_args = 0..)]
        times: Vec<f64>,
        #[arg(long, default_value = "analytic")]
        method: String,
    },
    /// Decay-rate estimation against the moving measures.
    Decay {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, default_value = "x")]
        f: String,
        #[arg(long, default_value_t = 0.0)]
        s: f64,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long = "t", num_args = 0..)]
        times: Vec<f64>,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Output directory: also writes a CSV of (lag, norm, gradient_norm).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario file (JSON).
    Run {
        scenario: PathBuf,
        /// Override the scenario's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sampled hypothesis-profile check.
    Hypotheses {
        #[command(flatten)]
        spec: SpecArg,
        /// Profile: `basic`, `derivative_bounds:k`, `weighted:k`,
        /// `gradient:k`, `p1:k`, `tight_measure`.
        #[arg(long, default_value = "basic")]
        profile: String,
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
    },
}

fn parse_spec(text: &str) -> Result<OperatorSpecDef, KlabError> {
    if text.trim_start().starts_with('{') {
        return OperatorSpecDef::from_json(text);
    }
    let path = std::path::Path::new(text);
    if path.exists() {
        return OperatorSpecDef::from_json(&std::fs::read_to_string(path)?);
    }
    let (kind, args) = match text.split_once(':') {
        Some((k, a)) => (k, a),
        None => (text, ""),
    };
    let nums: Vec<f64> = if args.is_empty() {
        vec![]
    } else {
        args.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| KlabError::Parse(format!("bad spec parameter {s}: {e}")))
            })
            .collect::<Result<_, _>>()?
    };
    let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
    match kind {
        "ou" => Ok(OperatorSpecDef::linear_drift_1d(arg(0, 1.0), arg(1, 1.0))),
        "heat" => Ok(OperatorSpecDef::heat_1d(arg(0, 1.0))),
        "cubic" => Ok(OperatorSpecDef {
            b: DriftSpec::Cubic,
            ..OperatorSpecDef::linear_drift_1d(1.0, arg(0, 1.0))
        }),
        "power" => Ok(OperatorSpecDef {
            b: DriftSpec::PowerLaw {
                epsilon: arg(0, 1.0),
            },
            ..OperatorSpecDef::linear_drift_1d(1.0, 1.0)
        }),
        other => Err(KlabError::Parse(format!(
            "unknown operator shorthand `{other}`"
        ))),
    }
}

fn parse_drift(text: &str) -> Result<DriftSpec, KlabError> {
    let (kind, args) = match text.split_once(':') {
        Some((k, a)) => (k, a),
        None => (text, ""),
    };
    let num = || -> Result<f64, KlabError> {
        args.parse::<f64>()
            .map_err(|e| KlabError::Parse(format!("bad drift parameter {args}: {e}")))
    };
    match kind {
        "zero" => Ok(DriftSpec::Zero),
        "linear" => Ok(DriftSpec::Linear {
            rate: if args.is_empty() { 1.0 } else { num()? },
            modulation: None,
        }),
        "cubic" => Ok(DriftSpec::Cubic),
        "cubic_out" | "cubic_outward" => Ok(DriftSpec::CubicOutward),
        "power" => Ok(DriftSpec::PowerLaw { epsilon: num()? }),
        "log_growth" => Ok(DriftSpec::LogGrowth),
        other => Err(KlabError::Parse(format!("unknown drift `{other}`"))),
    }
}

fn parse_method(text: &str) -> Result<MeasureMethod, KlabError> {
    match text {
        "analytic" => Ok(MeasureMethod::Analytic),
        "burnin" | "burn_in" => Ok(MeasureMethod::BurnIn(BurnInParams::default())),
        other => Err(KlabError::Parse(format!(
            "unknown measure method `{other}`"
        ))),
    }
}

fn parse_profile(text: &str) -> Result<HypothesisProfile, KlabError> {
    let (kind, args) = match text.split_once(':') {
        Some((k, a)) => (k, a),
        None => (text, ""),
    };
    let k = || -> Result<u8, KlabError> {
        args.parse::<u8>().map_err(|_| {
            KlabError::Parse(format!("profile `{kind}` needs an order, e.g. `{kind}:1`"))
        })
    };
    match kind {
        "basic" => Ok(HypothesisProfile::Basic),
        "derivative_bounds" => Ok(HypothesisProfile::DerivativeBounds { k: k()? }),
        "weighted" | "weighted_derivative_bounds" => {
            Ok(HypothesisProfile::WeightedDerivativeBounds { k: k()? })
        }
        "gradient" | "gradient_chain" => Ok(HypothesisProfile::GradientChain { k: k()? }),
        "p1" | "unit_exponent" => Ok(HypothesisProfile::UnitExponent { k: k()? }),
        "tight_measure" => Ok(HypothesisProfile::TightMeasure),
        other => Err(KlabError::Parse(format!("unknown profile `{other}`"))),
    }
}

fn one_job(spec: OperatorSpecDef, job: Job, out: Option<PathBuf>) -> Result<RunSummary, KlabError> {
    let scenario = Scenario {
        spec,
        jobs: vec![job],
        output_dir: out,
        tolerances: Tolerances::default(),
        seed: 0,
    };
    klab::scenario::run(&scenario)
}

fn print_summary(summary: &RunSummary) -> ExitCode {
    for r in &summary.reports {
        println!("{}", serde_json::to_string_pretty(r).unwrap());
    }
    ExitCode::from(summary.exit_code() as u8)
}

fn dispatch(cli: Cli) -> Result<ExitCode, KlabError> {
    match cli.command {
        Command::Solve {
            spec,
            f,
            s,
            times,
            scheme,
            out,
            binary,
        } => {
            let export = out
                .as_ref()
                .map(|_| if binary { "binary" } else { "csv" }.to_string());
            let job = Job::Solve {
                f: DatumSpec::parse(&f)?,
                s,
                times,
                scheme: scheme.overrides(),
                export,
            };
            Ok(print_summary(&one_job(spec.build()?, job, out)?))
        }
        Command::Verify {
            spec,
            estimate,
            k,
            p,
            h,
            m,
            f,
            s,
            t,
            taus,
            theta,
            dt,
            grid_h,
            r0,
            levels,
            out,
        } => {
            let scheme = SchemeOverrides {
                theta: Some(theta),
                dt: Some(dt),
                h: Some(grid_h),
                r_start: Some(r0),
                r_step: None,
                max_levels: Some(levels),
            };
            let job = if estimate == "stimasem" {
                let times = if taus.is_empty() {
                    vec![0.02, 0.033, 0.055, 0.09, 0.15]
                } else {
                    taus
                };
                Job::SmoothingRate {
                    f: DatumSpec::parse(&f)?,
                    s,
                    h_order: h.unwrap_or(0),
                    m_order: m.unwrap_or(1),
                    times,
                    box_half_width: 8.0,
                    rate_tol: None,
                    scheme,
                }
            } else {
                Job::VerifyPointwise {
                    f: DatumSpec::parse(&f)?,
                    s,
                    t,
                    k,
                    p,
                    estimate,
                    h,
                    scheme,
                    export: out.as_ref().map(|_| "csv".to_string()),
                }
            };
            Ok(print_summary(&one_job(spec.build()?, job, out)?))
        }
        Command::Constants { spec, p, k } => {
            let job = Job::Constants { p, k };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
        Command::Feller {
            q,
            b,
            cutoffs,
            probe_weight,
        } => {
            let drift = parse_drift(&b)?;
            let mut jobs = vec![Job::FellerClassify {
                q,
                b: drift.clone(),
                cutoffs: if cutoffs.is_empty() {
                    None
                } else {
                    Some(cutoffs.clone())
                },
            }];
            if let Some(weight) = probe_weight {
                jobs.push(Job::FellerProbe {
                    q,
                    b: drift,
                    weight,
                    cutoffs: None,
                });
            }
            let scenario = Scenario {
                spec: OperatorSpecDef::heat_1d(q),
                jobs,
                output_dir: None,
                tolerances: Tolerances::default(),
                seed: 0,
            };
            Ok(print_summary(&klab::scenario::run(&scenario)?))
        }
        Command::Measures {
            spec,
            times,
            method,
            out,
        } => {
            let job = Job::Measures {
                times,
                method: parse_method(&method)?,
                export: out.as_ref().map(|_| "csv".to_string()),
            };
            Ok(print_summary(&one_job(spec.build()?, job, out)?))
        }
        Command::Invariance {
            spec,
            f,
            s,
            t,
            method,
        } => {
            let job = Job::Invariance {
                f: DatumSpec::parse(&f)?,
                s,
                t,
                method: parse_method(&method)?,
            };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
        Command::Lsi {
            spec,
            f,
            s,
            p,
            lambda0,
            r0,
        } => {
            let job = Job::LogSobolev {
                f: DatumSpec::parse(&f)?,
                s,
                p,
                lambda0,
                r0,
            };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
        Command::Poincare {
            spec,
            f,
            s,
            lambda0,
            r0,
        } => {
            let job = Job::Poincare {
                f: DatumSpec::parse(&f)?,
                s,
                lambda0,
                r0,
            };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
        Command::Hyper {
            spec,
            f,
            s,
            p,
            q,
            lambda0,
            nu0,
            r0,
        } => {
            let job = Job::Hyper {
                f: DatumSpec::parse(&f)?,
                s,
                p,
                q,
                lambda0,
                nu0,
                r0,
            };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
        Command::Super {
            spec,
            lambdas,
            times,
            method,
        } => {
            let job = Job::Super {
                lambdas,
                times: if times.is_empty() { vec![0.0] } else { times },
                method: parse_method(&method)?,
            };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
        Command::Decay {
            spec,
            f,
            s,
            p,
            times,
            scheme,
            out,
        } => {
            let job = Job::Decay {
                f: DatumSpec::parse(&f)?,
                s,
                p,
                times: if times.is_empty() {
                    vec![1.0, 1.8, 3.2, 5.6, 10.0]
                } else {
                    times
                },
                scheme: scheme.overrides(),
                export: out.as_ref().map(|_| "csv".to_string()),
            };
            Ok(print_summary(&one_job(spec.build()?, job, out)?))
        }
        Command::Run { scenario, out } => {
            let text = std::fs::read_to_string(&scenario)
                .map_err(|e| KlabError::Parse(format!("{}: {e}", scenario.display())))?;
            let mut parsed: Scenario = serde_json::from_str(&text)
                .map_err(|e| KlabError::Parse(format!("{}: {e}", scenario.display())))?;
            if out.is_some() {
                parsed.output_dir = out;
            }
            let summary = klab::scenario::run(&parsed)?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(ExitCode::from(summary.exit_code() as u8))
        }
        Command::Hypotheses {
            spec,
            profile,
            radius,
        } => {
            let job = Job::Hypotheses {
                profile: parse_profile(&profile)?,
                radius: Some(radius),
            };
            Ok(print_summary(&one_job(spec.build()?, job, None)?))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(KlabError::Parse(msg)) => {
            eprintln!("parse error: {msg}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}
