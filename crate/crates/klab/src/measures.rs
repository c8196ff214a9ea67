//! Families of probability measures attached to the evolution operator:
//! the analytic Gaussian family for linear-drift operators, and a numeric
//! construction that runs the forward density equation from two seeds until
//! they forget their initial condition.

use crate::catalogue::OperatorSpecDef;
use crate::datum::Datum;
use crate::error::{KlabError, Result};
use crate::grid::GridFunction;
use crate::linalg::solve_tridiagonal;
use crate::operator::OperatorSpec;
use crate::oracles::OuSpec1D;
use crate::quad::trapezoid;
use crate::report::{EstimateReport, ResolutionMeta};
use crate::solver::{self, ExhaustionParams, SchemeParams};
use serde::{Deserialize, Serialize};

/// How a measure family was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    AnalyticGaussian,
    DensityBurnIn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BurnInMeta {
    /// Start time the seeds were released at.
    pub s0: f64,
    /// L1 distance of the two seeds at the first requested time.
    pub forgetting_gap: f64,
    /// Worst increase of the seed gap along the burn-in (should be ~0).
    pub worst_gap_increase: f64,
    pub retries: usize,
}

/// Time-indexed probability densities on a fixed grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureFamily {
    pub time_grid: Vec<f64>,
    pub densities: Vec<GridFunction>,
    pub provenance: Provenance,
    pub burn_in: Option<BurnInMeta>,
}

impl MeasureFamily {
    pub fn density_at(&self, t: f64) -> Option<&GridFunction> {
        self.time_grid
            .iter()
            .position(|&v| (v - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .map(|i| &self.densities[i])
    }

    /// Integral of `f` against the density at `t` (trapezoid on the grid,
    /// density extended by zero outside the box).
    pub fn integrate(&self, t: f64, f: &dyn Fn(f64) -> f64) -> Result<f64> {
        let rho = self
            .density_at(t)
            .ok_or_else(|| KlabError::Domain(format!("time {t} not on the measure grid")))?;
        let vals: Vec<f64> = (0..rho.n).map(|i| f(rho.coord(i)) * rho.values[i]).collect();
        Ok(trapezoid(&vals, rho.spacing()))
    }

    /// Average and `L^p` norm of `f` at time `s`.
    pub fn average_and_norm(&self, f: &dyn Fn(f64) -> f64, s: f64, p: f64) -> Result<(f64, f64)> {
        let mean = self.integrate(s, f)?;
        let norm = self.integrate(s, &|x| f(x).abs().powf(p))?.powf(1.0 / p);
        Ok((mean, norm))
    }
}

/// Spatial grid the densities live on.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeasureGrid {
    pub half_width: f64,
    pub n: usize,
}

impl Default for MeasureGrid {
    fn default() -> Self {
        MeasureGrid {
            half_width: 12.0,
            n: 1201,
        }
    }
}

/// Burn-in controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BurnInParams {
    /// Lookback before the first requested time.
    pub lookback: f64,
    pub tol_forget: f64,
    pub dt: f64,
}

impl Default for BurnInParams {
    fn default() -> Self {
        BurnInParams {
            lookback: 10.0,
            tol_forget: 1e-6,
            dt: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum MeasureMethod {
    Analytic,
    BurnIn(BurnInParams),
}

fn normalise(values: &mut [f64], h: f64) {
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let mass = trapezoid(values, h);
    if mass > 0.0 {
        for v in values.iter_mut() {
            *v /= mass;
        }
    }
}

/// Gaussian family from the closed form.
pub fn analytic_measures(
    ou: &OuSpec1D,
    t_grid: &[f64],
    grid: MeasureGrid,
) -> Result<MeasureFamily> {
    let mut densities = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let gauss = ou.tight_measure(t)?;
        let mut field = GridFunction::from_fn(1, grid.half_width, grid.n, &|x| gauss.pdf(x[0]))?;
        let h = field.spacing();
        normalise(&mut field.values, h);
        densities.push(field);
    }
    Ok(MeasureFamily {
        time_grid: t_grid.to_vec(),
        densities,
        provenance: Provenance::AnalyticGaussian,
        burn_in: None,
    })
}

/// One theta step of the forward density equation
/// `rho_t = D_xx(q rho) - D_x(b rho)` with mass renormalisation.
struct DensityStepper<'a> {
    spec: &'a OperatorSpec,
    n: usize,
    h: f64,
    half_width: f64,
}

impl<'a> DensityStepper<'a> {
    fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    fn rows(&self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for k in 0..m {
            let xm = [self.coord(k)];
            let xc = [self.coord(k + 1)];
            let xp = [self.coord(k + 2)];
            let (qm, qc, qp) = (
                self.spec.q.eval(0, t, &xm),
                self.spec.q.eval(0, t, &xc),
                self.spec.q.eval(0, t, &xp),
            );
            let (bm, bp) = (self.spec.b.eval(0, t, &xm), self.spec.b.eval(0, t, &xp));
            lower[k] = qm / (self.h * self.h) + bm / (2.0 * self.h);
            diag[k] = -2.0 * qc / (self.h * self.h);
            upper[k] = qp / (self.h * self.h) - bp / (2.0 * self.h);
        }
        (lower, diag, upper)
    }

    fn step(&self, rho: &mut [f64], t: f64, dt: f64, theta: f64) {
        let m = rho.len();
        let (lo_old, di_old, up_old) = self.rows(t);
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let mut acc = rho[k] + (1.0 - theta) * dt * di_old[k] * rho[k];
            if k > 0 {
                acc += (1.0 - theta) * dt * lo_old[k] * rho[k - 1];
            }
            if k + 1 < m {
                acc += (1.0 - theta) * dt * up_old[k] * rho[k + 1];
            }
            rhs[k] = acc;
        }
        let (lo_new, di_new, up_new) = self.rows(t + dt);
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for k in 0..m {
            lower[k] = -theta * dt * lo_new[k];
            diag[k] = 1.0 - theta * dt * di_new[k];
            upper[k] = -theta * dt * up_new[k];
        }
        solve_tridiagonal(&lower, &diag, &upper, &mut rhs);
        rho.copy_from_slice(&rhs);
    }
}

fn l1_distance(a: &[f64], b: &[f64], h: f64) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    trapezoid(&diffs, h)
}

/// Numeric family: run the density equation forward from two distinct seeds
/// released `lookback` before the first requested time; accept once their L1
/// distance at that time drops below `tol_forget`, else extend the lookback
/// and retry (up to 3 times).
pub fn burnin_measures(
    spec: &OperatorSpec,
    t_grid: &[f64],
    grid: MeasureGrid,
    params: &BurnInParams,
) -> Result<MeasureFamily> {
    if spec.dim != 1 {
        return Err(KlabError::UnsupportedDimension(spec.dim));
    }
    if t_grid.is_empty() {
        return Err(KlabError::Domain("empty time grid".into()));
    }
    let mut sorted = t_grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t_min = sorted[0];
    let h = 2.0 * grid.half_width / (grid.n - 1) as f64;
    let stepper = DensityStepper {
        spec,
        n: grid.n,
        h,
        half_width: grid.half_width,
    };
    let seed = |sigma: f64| -> Vec<f64> {
        let mut v: Vec<f64> = (1..grid.n - 1)
            .map(|i| {
                let x = -grid.half_width + i as f64 * h;
                (-(x * x) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        normalise(&mut v, h);
        v
    };

    let mut lookback = params.lookback;
    for retry in 0..=3usize {
        let s0 = t_min - lookback;
        let mut rho_a = seed(1.0);
        let mut rho_b = seed(2.0);
        let steps = (lookback / params.dt).ceil() as usize;
        let dt = lookback / steps as f64;
        let mut gap_prev = l1_distance(&rho_a, &rho_b, h);
        let mut worst_increase = 0.0f64;
        for k in 0..steps {
            let t = s0 + k as f64 * dt;
            stepper.step(&mut rho_a, t, dt, 0.5);
            stepper.step(&mut rho_b, t, dt, 0.5);
            normalise(&mut rho_a, h);
            normalise(&mut rho_b, h);
            let gap = l1_distance(&rho_a, &rho_b, h);
            worst_increase = worst_increase.max(gap - gap_prev);
            gap_prev = gap;
        }
        let forgetting_gap = gap_prev;
        if forgetting_gap > params.tol_forget {
            lookback *= 2.0;
            if retry == 3 {
                return Err(KlabError::MeasureNotResolved(format!(
                    "seed gap {forgetting_gap:.3e} above {:.3e} after lookback {lookback}; extend burn-in",
                    params.tol_forget
                )));
            }
            continue;
        }
        // Accepted: march the first seed across the requested grid.
        let mut densities = Vec::with_capacity(sorted.len());
        let mut t_cur = t_min;
        let mut push_density = |rho: &[f64]| -> Result<()> {
            let mut values = vec![0.0; grid.n];
            values[1..grid.n - 1].copy_from_slice(rho);
            let mut field = GridFunction::new(1, grid.half_width, grid.n, values)?;
            normalise(&mut field.values, h);
            densities.push(field);
            Ok(())
        };
        push_density(&rho_a)?;
        for &t_next in &sorted[1..] {
            let steps = ((t_next - t_cur) / params.dt).ceil().max(1.0) as usize;
            let dt = (t_next - t_cur) / steps as f64;
            for k in 0..steps {
                stepper.step(&mut rho_a, t_cur + k as f64 * dt, dt, 0.5);
                normalise(&mut rho_a, h);
            }
            t_cur = t_next;
            push_density(&rho_a)?;
        }
        return Ok(MeasureFamily {
            time_grid: sorted,
            densities,
            provenance: Provenance::DensityBurnIn,
            burn_in: Some(BurnInMeta {
                s0: t_min - lookback,
                forgetting_gap,
                worst_gap_increase: worst_increase,
                retries: retry,
            }),
        });
    }
    unreachable!()
}

/// Catalogue-level entry point: analytic for linear-drift definitions,
/// burn-in otherwise. The potential must vanish.
pub fn compute_measures(
    def: &OperatorSpecDef,
    t_grid: &[f64],
    grid: MeasureGrid,
    method: &MeasureMethod,
) -> Result<MeasureFamily> {
    match method {
        MeasureMethod::Analytic => {
            let ou = OuSpec1D::from_def(def)?;
            analytic_measures(&ou, t_grid, grid)
        }
        MeasureMethod::BurnIn(params) => {
            let spec = def.build()?;
            if !matches!(def.c, crate::catalogue::PotentialSpec::Zero) {
                return Err(KlabError::Invalid(
                    "measure families are built for vanishing potentials".into(),
                ));
            }
            burnin_measures(&spec, t_grid, grid, params)
        }
    }
}

/// Checks the defining pairing of the family: the image of `f` integrated
/// against the later measure matches `f` integrated against the earlier one.
///
/// The analytic path evaluates the image with the closed form; the burn-in
/// path runs the solver on a box covering the measure grid.
pub fn check_invariance(
    def: &OperatorSpecDef,
    measures: &MeasureFamily,
    f: &Datum,
    s: f64,
    t: f64,
    tol: Option<f64>,
) -> Result<EstimateReport> {
    if t <= s {
        return Err(KlabError::Domain("need s < t".into()));
    }
    let rho_t = measures
        .density_at(t)
        .ok_or_else(|| KlabError::Domain(format!("time {t} not on the measure grid")))?;
    let rhs = measures.integrate(s, &|x| f.eval(x))?;

    let (lhs, tol, mut notes) = match measures.provenance {
        Provenance::AnalyticGaussian => {
            let ou = OuSpec1D::from_def(def)?;
            let vals: Vec<f64> = (0..rho_t.n)
                .map(|i| {
                    let x = rho_t.coord(i);
                    ou.evolve(&|y| f.eval(y), s, t, x).map(|g| g * rho_t.values[i])
                })
                .collect::<Result<_>>()?;
            (
                trapezoid(&vals, rho_t.spacing()),
                tol.unwrap_or(1e-5),
                Vec::new(),
            )
        }
        Provenance::DensityBurnIn => {
            let spec = def.build()?;
            let params = SchemeParams {
                h: rho_t.spacing(),
                ..SchemeParams::default()
            };
            let exhaustion = ExhaustionParams {
                r_start: rho_t.half_width * 1.5,
                r_step: rho_t.half_width * 0.5,
                max_levels: 4,
                tol_exhaust: 1e-6,
            };
            let field = f.as_field();
            let run =
                solver::evolution_operator(&spec, field.as_ref(), s, &[t], &params, &exhaustion)?;
            let u = run.last();
            if u.half_width < rho_t.half_width - 1e-9 {
                return Err(KlabError::Invalid(
                    "solver core region does not cover the measure grid".into(),
                ));
            }
            let u_on_measures = u.restrict(rho_t.half_width)?;
            let vals: Vec<f64> = u_on_measures
                .values
                .iter()
                .zip(&rho_t.values)
                .map(|(g, r)| g * r)
                .collect();
            (
                trapezoid(&vals, rho_t.spacing()),
                tol.unwrap_or(1e-3),
                run.warnings.clone(),
            )
        }
    };

    // Tail-domination guard: the integrand must have died out at the box edge.
    let edge = f.eval(rho_t.half_width).abs() * rho_t.values[rho_t.n - 1]
        + f.eval(-rho_t.half_width).abs() * rho_t.values[0];
    if edge > 1e-10 * (1.0 + lhs.abs()) {
        notes.push("tail truncation dominates: f grows into the box edge".into());
    }

    let mut report = EstimateReport::from_scalars("invariance", lhs, rhs, tol);
    // Two-sided comparison.
    report.worst_margin = tol - (lhs - rhs).abs();
    report.pass = (lhs - rhs).abs() <= tol;
    report.resolution = ResolutionMeta {
        h: rho_t.spacing(),
        dt: 0.0,
        theta: 0.5,
        box_half_width: rho_t.half_width,
        core_margin: 0,
    };
    report.notes = notes;
    Ok(report)
}

/// Tail-mass report: sup over the time grid of the mass outside each radius.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessReport {
    pub radii: Vec<f64>,
    pub sup_tail_mass: Vec<f64>,
}

pub fn check_tightness(measures: &MeasureFamily, radii: &[f64]) -> Result<TightnessReport> {
    let mut sup_tail = vec![0.0f64; radii.len()];
    for rho in &measures.densities {
        let h = rho.spacing();
        let total = trapezoid(&rho.values, h);
        for (k, &r) in radii.iter().enumerate() {
            if r > rho.half_width {
                return Err(KlabError::Domain(format!(
                    "radius {r} outside the measure box"
                )));
            }
            // Tail mass = total - interior mass over [-r, r], with r snapped
            // to the nearest node.
            let cells = (r / h).round() as usize;
            let centre = (rho.n - 1) / 2;
            let interior = trapezoid(&rho.values[centre - cells..=centre + cells], h);
            sup_tail[k] = sup_tail[k].max((total - interior).max(0.0));
        }
    }
    Ok(TightnessReport {
        radii: radii.to_vec(),
        sup_tail_mass: sup_tail,
    })
}
