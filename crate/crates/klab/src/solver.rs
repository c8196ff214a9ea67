//! Time stepping for the Cauchy problem `u_t = A u` and construction of the
//! whole-space evolution operator by domain exhaustion: homogeneous
//! Dirichlet problems on growing boxes whose solutions converge locally
//! uniformly (monotonically from below for nonnegative data and
//! nonpositive potential).

use crate::error::{KlabError, Result};
use crate::grid::GridFunction;
use crate::linalg::solve_tridiagonal;
use crate::operator::OperatorSpec;
use crate::report::{EstimateReport, ResolutionMeta};
use serde::{Deserialize, Serialize};

/// Parameters of the theta-scheme stepper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Implicitness weight; 0.5 is trapezoidal, 1.0 fully implicit.
    pub theta: f64,
    pub dt: f64,
    /// Target grid spacing (node alignment across exhaustion levels).
    pub h: f64,
    /// Relative slack allowed on the sup-norm bound (per run check).
    pub tol_solver: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            theta: 0.5,
            dt: 1e-3,
            h: 0.02,
            tol_solver: 1e-6,
        }
    }
}

/// Exhaustion controls for [`evolution_operator`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustionParams {
    pub r_start: f64,
    pub r_step: f64,
    pub max_levels: usize,
    pub tol_exhaust: f64,
}

impl Default for ExhaustionParams {
    fn default() -> Self {
        ExhaustionParams {
            r_start: 6.0,
            r_step: 2.0,
            max_levels: 8,
            tol_exhaust: 1e-4,
        }
    }
}

/// Outcome of an exhaustion pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExhaustionOutcome {
    pub converged: bool,
    pub levels_used: usize,
    /// Sup gaps between consecutive levels on the shared core region.
    pub gaps: Vec<f64>,
    /// Worst violation of the monotone-increase property on shared nodes
    /// (only tracked for nonnegative data with nonpositive potential).
    pub monotonicity_violation: Option<f64>,
}

/// Time-indexed family of fields `(t, x) -> u(t, x)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub s: f64,
    pub t_grid: Vec<f64>,
    pub snapshots: Vec<GridFunction>,
    /// Exhaustion level index the snapshots come from (0 for a direct solve).
    pub domain_level: usize,
    pub theta: f64,
    pub dt: f64,
    pub h: f64,
    /// Sup of the potential over the run (enters the sup-norm bound).
    pub c_sup: f64,
    /// Worst relative slack of `sup|u(t)| <= e^{c_sup (t-s)} sup|f|`.
    pub sup_bound_slack: f64,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub exhaustion: Option<ExhaustionOutcome>,
}

impl EvolutionResult {
    /// Snapshot at the final time.
    pub fn last(&self) -> &GridFunction {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    /// Snapshot at a requested time (must be one of the recorded times).
    pub fn at_time(&self, t: f64) -> Option<&GridFunction> {
        self.t_grid
            .iter()
            .position(|&v| (v - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .map(|i| &self.snapshots[i])
    }
}

fn core_margin_cells(n: usize) -> usize {
    // 20% of the half-width, in cells.
    ((n - 1) as f64 / 2.0 * 0.2).ceil() as usize
}

struct Stepper1D<'a> {
    spec: &'a OperatorSpec,
    n: usize,
    h: f64,
    half_width: f64,
    c_sup: f64,
    peclet_max: f64,
}

impl<'a> Stepper1D<'a> {
    fn new(spec: &'a OperatorSpec, n: usize, half_width: f64) -> Self {
        Stepper1D {
            spec,
            n,
            h: 2.0 * half_width / (n - 1) as f64,
            half_width,
            c_sup: f64::NEG_INFINITY,
            peclet_max: 0.0,
        }
    }

    fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Rows of `A(t)` on the interior nodes (Dirichlet rows excluded).
    fn rows(&mut self, t: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        for k in 0..m {
            let x = [self.coord(k + 1)];
            let q = self.spec.q.eval(0, t, &x);
            let b = self.spec.b.eval(0, t, &x);
            let c = self.spec.c_value(t, &x);
            self.c_sup = self.c_sup.max(c);
            self.peclet_max = self.peclet_max.max(b.abs() * self.h / (2.0 * q));
            lower[k] = q / (self.h * self.h) - b / (2.0 * self.h);
            diag[k] = -2.0 * q / (self.h * self.h) + c;
            upper[k] = q / (self.h * self.h) + b / (2.0 * self.h);
        }
        (lower, diag, upper)
    }

    /// One theta step from `t` to `t + dt` on interior values `u` (len n-2).
    fn step(&mut self, u: &mut [f64], t: f64, dt: f64, theta: f64) {
        let m = u.len();
        let (lo_old, di_old, up_old) = self.rows(t);
        // Explicit part: (I + (1-theta) dt A(t)) u
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            let mut acc = u[k] + (1.0 - theta) * dt * di_old[k] * u[k];
            if k > 0 {
                acc += (1.0 - theta) * dt * lo_old[k] * u[k - 1];
            }
            if k + 1 < m {
                acc += (1.0 - theta) * dt * up_old[k] * u[k + 1];
            }
            rhs[k] = acc;
        }
        // Implicit part: (I - theta dt A(t + dt)) u_new = rhs
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
        u.copy_from_slice(&rhs);
    }
}

/// 2-D directional operators: x-sweep, y-sweep (each carrying half of the
/// potential) and the explicit mixed term from off-diagonal diffusion.
struct Stepper2D<'a> {
    spec: &'a OperatorSpec,
    n: usize,
    h: f64,
    half_width: f64,
    c_sup: f64,
    peclet_max: f64,
}

impl<'a> Stepper2D<'a> {
    fn new(spec: &'a OperatorSpec, n: usize, half_width: f64) -> Self {
        Stepper2D {
            spec,
            n,
            h: 2.0 * half_width / (n - 1) as f64,
            half_width,
            c_sup: f64::NEG_INFINITY,
            peclet_max: 0.0,
        }
    }

    fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Applies the directional operator along `axis` at time `t`.
    fn apply_directional(&mut self, u: &[f64], t: f64, axis: usize, out: &mut [f64]) {
        let n = self.n;
        let h = self.h;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let x = [self.coord(i), self.coord(j)];
                let q = self.spec.q_matrix(t, &x);
                let b = self.spec.b_vector(t, &x);
                let c = self.spec.c_value(t, &x);
                self.c_sup = self.c_sup.max(c);
                let idx = i * n + j;
                let (qd, bd, um, up) = if axis == 0 {
                    (q[0], b[0], u[(i - 1) * n + j], u[(i + 1) * n + j])
                } else {
                    (q[3], b[1], u[i * n + j - 1], u[i * n + j + 1])
                };
                self.peclet_max = self.peclet_max.max(bd.abs() * h / (2.0 * qd));
                out[idx] = qd * (up - 2.0 * u[idx] + um) / (h * h)
                    + bd * (up - um) / (2.0 * h)
                    + 0.5 * c * u[idx];
            }
        }
    }

    /// The mixed term `2 q12 D_xy u` with a central cross stencil.
    fn apply_mixed(&self, u: &[f64], t: f64, out: &mut [f64]) {
        let n = self.n;
        let h = self.h;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let x = [self.coord(i), self.coord(j)];
                let q12 = self.spec.q.eval(1, t, &x);
                let cross = (u[(i + 1) * n + j + 1] - u[(i + 1) * n + j - 1]
                    - u[(i - 1) * n + j + 1]
                    + u[(i - 1) * n + j - 1])
                    / (4.0 * h * h);
                out[i * n + j] = 2.0 * q12 * cross;
            }
        }
    }

    /// Implicit directional solve `(I - theta dt A_axis(t)) w = rhs`.
    #[allow(clippy::needless_range_loop)]
    fn solve_directional(&self, rhs: &mut [f64], t: f64, axis: usize, dt: f64, theta: f64) {
        let n = self.n;
        let h = self.h;
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut line = vec![0.0; m];
        for outer in 1..n - 1 {
            for inner in 0..m {
                let (i, j) = if axis == 0 {
                    (inner + 1, outer)
                } else {
                    (outer, inner + 1)
                };
                let x = [self.coord(i), self.coord(j)];
                let q = self.spec.q_matrix(t, &x);
                let b = self.spec.b_vector(t, &x);
                let c = self.spec.c_value(t, &x);
                let (qd, bd) = if axis == 0 { (q[0], b[0]) } else { (q[3], b[1]) };
                let a_lo = qd / (h * h) - bd / (2.0 * h);
                let a_di = -2.0 * qd / (h * h) + 0.5 * c;
                let a_up = qd / (h * h) + bd / (2.0 * h);
                lower[inner] = -theta * dt * a_lo;
                diag[inner] = 1.0 - theta * dt * a_di;
                upper[inner] = -theta * dt * a_up;
                line[inner] = rhs[if axis == 0 {
                    (inner + 1) * n + outer
                } else {
                    outer * n + inner + 1
                }];
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut line);
            for inner in 0..m {
                let idx = if axis == 0 {
                    (inner + 1) * n + outer
                } else {
                    outer * n + inner + 1
                };
                rhs[idx] = line[inner];
            }
        }
    }

    /// One Douglas splitting step (predictor + two implicit corrections).
    fn step(&mut self, u: &mut [f64], t: f64, dt: f64, theta: f64) {
        let len = u.len();
        let mut ax_old = vec![0.0; len];
        let mut ay_old = vec![0.0; len];
        let mut mixed = vec![0.0; len];
        self.apply_directional(u, t, 0, &mut ax_old);
        self.apply_directional(u, t, 1, &mut ay_old);
        self.apply_mixed(u, t, &mut mixed);

        let mut y = vec![0.0; len];
        for k in 0..len {
            y[k] = u[k] + dt * (ax_old[k] + ay_old[k] + mixed[k]);
        }
        // x-sweep: (I - theta dt A_x(t+dt)) Y1 = Y0 - theta dt A_x(t) u
        for k in 0..len {
            y[k] -= theta * dt * ax_old[k];
        }
        self.solve_directional(&mut y, t + dt, 0, dt, theta);
        // y-sweep.
        for k in 0..len {
            y[k] -= theta * dt * ay_old[k];
        }
        self.solve_directional(&mut y, t + dt, 1, dt, theta);
        // Dirichlet ring.
        let n = self.n;
        for i in 0..n {
            y[i * n] = 0.0;
            y[i * n + n - 1] = 0.0;
            y[i] = 0.0;
            y[(n - 1) * n + i] = 0.0;
        }
        u.copy_from_slice(&y);
    }
}

/// Advances the Cauchy-Dirichlet problem (`u = 0` on the box boundary) from
/// `s`, recording snapshots at each requested time. `snapshot_times` must be
/// increasing and start strictly after `s`; the result also includes the
/// initial snapshot at `s`.
pub fn solve_dirichlet(
    spec: &OperatorSpec,
    f: &GridFunction,
    s: f64,
    snapshot_times: &[f64],
    params: &SchemeParams,
) -> Result<EvolutionResult> {
    if f.n < 5 {
        return Err(KlabError::GridTooCoarse {
            required: 5,
            actual: f.n,
        });
    }
    if snapshot_times.is_empty() || snapshot_times[0] <= s {
        return Err(KlabError::Domain(
            "snapshot times must be increasing and start after s".into(),
        ));
    }
    if spec.dim != f.dim {
        return Err(KlabError::Invalid(
            "operator and datum dimensions disagree".into(),
        ));
    }

    let n = f.n;
    let sup_f = f.sup_norm();
    let mut t_grid = vec![s];
    let mut snapshots = Vec::with_capacity(snapshot_times.len() + 1);
    let mut initial = f.clone();
    initial.core_margin = initial.core_margin.max(core_margin_cells(n));
    snapshots.push(initial);

    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    if params.theta < 1.0 {
        notes.push(format!(
            "discrete maximum principle guaranteed only for theta = 1 (theta = {})",
            params.theta
        ));
    }

    let mut sup_slack = f64::INFINITY;
    let (c_sup, peclet) = match spec.dim {
        1 => {
            let mut stepper = Stepper1D::new(spec, n, f.half_width);
            let mut interior: Vec<f64> = f.values[1..n - 1].to_vec();
            let mut t_cur = s;
            for &t_next in snapshot_times {
                if t_next <= t_cur {
                    return Err(KlabError::Domain("snapshot times must increase".into()));
                }
                let steps = ((t_next - t_cur) / params.dt).ceil().max(1.0) as usize;
                let dt = (t_next - t_cur) / steps as f64;
                for k in 0..steps {
                    stepper.step(&mut interior, t_cur + k as f64 * dt, dt, params.theta);
                }
                t_cur = t_next;
                if interior.iter().any(|v| !v.is_finite()) {
                    return Err(KlabError::Blowup { t: t_cur });
                }
                let mut values = vec![0.0; n];
                values[1..n - 1].copy_from_slice(&interior);
                let mut snap = GridFunction::new(1, f.half_width, n, values)?;
                snap.core_margin = core_margin_cells(n);
                let bound =
                    (stepper.c_sup.max(0.0) * (t_cur - s)).exp() * sup_f * (1.0 + params.tol_solver)
                        + params.tol_solver;
                sup_slack = sup_slack.min(bound - snap.sup_norm());
                t_grid.push(t_cur);
                snapshots.push(snap);
            }
            (stepper.c_sup, stepper.peclet_max)
        }
        2 => {
            let mut stepper = Stepper2D::new(spec, n, f.half_width);
            let mut field = f.values.clone();
            // Dirichlet ring on the datum.
            for i in 0..n {
                field[i * n] = 0.0;
                field[i * n + n - 1] = 0.0;
                field[i] = 0.0;
                field[(n - 1) * n + i] = 0.0;
            }
            let mut t_cur = s;
            for &t_next in snapshot_times {
                let steps = ((t_next - t_cur) / params.dt).ceil().max(1.0) as usize;
                let dt = (t_next - t_cur) / steps as f64;
                for k in 0..steps {
                    stepper.step(&mut field, t_cur + k as f64 * dt, dt, params.theta);
                }
                t_cur = t_next;
                if field.iter().any(|v| !v.is_finite()) {
                    return Err(KlabError::Blowup { t: t_cur });
                }
                let mut snap = GridFunction::new(2, f.half_width, n, field.clone())?;
                snap.core_margin = core_margin_cells(n);
                let bound =
                    (stepper.c_sup.max(0.0) * (t_cur - s)).exp() * sup_f * (1.0 + params.tol_solver)
                        + params.tol_solver;
                sup_slack = sup_slack.min(bound - snap.sup_norm());
                t_grid.push(t_cur);
                snapshots.push(snap);
            }
            (stepper.c_sup, stepper.peclet_max)
        }
        d => return Err(KlabError::UnsupportedDimension(d)),
    };

    if peclet > 1.0 && params.theta < 1.0 {
        warnings.push(format!(
            "cell Peclet number {peclet:.2} exceeds 1: the theta = {} scheme may oscillate \
             (refine h or increase theta)",
            params.theta
        ));
    }
    if sup_slack < 0.0 {
        warnings.push(format!(
            "sup-norm bound violated by {:.3e} (relative tolerance {})",
            -sup_slack, params.tol_solver
        ));
    }

    Ok(EvolutionResult {
        s,
        t_grid,
        snapshots,
        domain_level: 0,
        theta: params.theta,
        dt: params.dt,
        h: 2.0 * f.half_width / (n - 1) as f64,
        c_sup,
        sup_bound_slack: sup_slack,
        warnings,
        notes,
        exhaustion: None,
    })
}

/// Samples a whole-space datum on the level box with nodes aligned to
/// multiples of `h` (so levels share nodes exactly).
fn sample_level(
    dim: usize,
    radius: f64,
    h: f64,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<GridFunction> {
    let half_cells = (radius / h).round().max(2.0) as usize;
    let r = half_cells as f64 * h;
    let n = 2 * half_cells + 1;
    GridFunction::from_fn(dim, r, n, f)
}

/// Builds `G(t, s) f` by domain exhaustion. Solves on boxes of half-width
/// `r_start, r_start + r_step, ...` until two consecutive levels agree to
/// `tol_exhaust` in sup norm on the core region of the smaller box, then
/// returns the final level restricted to its core region.
pub fn evolution_operator(
    spec: &OperatorSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    snapshot_times: &[f64],
    params: &SchemeParams,
    exhaustion: &ExhaustionParams,
) -> Result<EvolutionResult> {
    if exhaustion.max_levels == 0 {
        return Err(KlabError::Domain("need at least one level".into()));
    }
    let mut previous: Option<EvolutionResult> = None;
    let mut gaps = Vec::new();
    let mut monotonicity: Option<f64> = None;
    let mut converged = false;
    let mut level_used = 0;

    for level in 0..exhaustion.max_levels {
        let radius = exhaustion.r_start + level as f64 * exhaustion.r_step;
        let datum = sample_level(spec.dim, radius, params.h, f)?;
        let result = solve_dirichlet(spec, &datum, s, snapshot_times, params)?;
        level_used = level;

        if let Some(prev) = &previous {
            let small = prev.last();
            let large = result.last();
            // Compare on the core region of the smaller box.
            let restricted = large.restrict(small.half_width)?;
            let mut gap = 0.0f64;
            let mut core = small.clone();
            core.core_margin = core_margin_cells(small.n);
            core.for_each_core(|idx, v| {
                gap = gap.max((restricted.values[idx] - v).abs());
            });
            gaps.push(gap);

            // Monotone increase on all shared nodes for f >= 0, c <= 0.
            let datum_nonneg = datum.values.iter().all(|&v| v >= 0.0);
            if datum_nonneg && result.c_sup <= 0.0 {
                for (t_idx, snap) in prev.snapshots.iter().enumerate() {
                    let big = result.snapshots[t_idx].restrict(snap.half_width)?;
                    let mut worst = 0.0f64;
                    for (a, b) in snap.values.iter().zip(&big.values) {
                        worst = worst.max(a - b);
                    }
                    monotonicity =
                        Some(monotonicity.map_or(worst, |m: f64| m.max(worst)));
                }
            }

            if gap <= exhaustion.tol_exhaust {
                converged = true;
                previous = Some(result);
                break;
            }
        }
        previous = Some(result);
    }

    let mut result = previous.expect("at least one level was solved");
    let mut warnings = std::mem::take(&mut result.warnings);
    if !converged {
        warnings.push(format!(
            "exhaustion not converged after {} levels (last gap {:?})",
            level_used + 1,
            gaps.last()
        ));
    }
    if let Some(v) = monotonicity {
        if v > 1e-10 {
            warnings.push(format!(
                "monotone exhaustion violated by {v:.3e} on shared nodes"
            ));
        }
    }

    // Restrict every snapshot to the core region of the final box.
    let last = result.last();
    let margin = core_margin_cells(last.n);
    let core_half_width = last.half_width - margin as f64 * result.h;
    let snapshots: Vec<GridFunction> = result
        .snapshots
        .iter()
        .map(|snap| snap.restrict(core_half_width))
        .collect::<Result<_>>()?;

    Ok(EvolutionResult {
        snapshots,
        warnings,
        exhaustion: Some(ExhaustionOutcome {
            converged,
            levels_used: level_used + 1,
            gaps,
            monotonicity_violation: monotonicity,
        }),
        domain_level: level_used,
        ..result
    })
}

/// Checks the two-parameter composition law `G(t,s) = G(t,r) G(r,s)` by
/// comparing a direct run against a run restarted from the intermediate
/// snapshot, on a shared box.
#[allow(clippy::too_many_arguments)]
pub fn check_evolution_law(
    spec: &OperatorSpec,
    f: &dyn Fn(&[f64]) -> f64,
    s: f64,
    r: f64,
    t: f64,
    params: &SchemeParams,
    exhaustion: &ExhaustionParams,
    tol_law: f64,
) -> Result<EstimateReport> {
    if !(s <= r && r < t) {
        return Err(KlabError::Domain("need s <= r < t".into()));
    }
    if r == s {
        // G(s,s) is the identity: the composition is the direct run itself.
        let run = evolution_operator(spec, f, s, &[t], params, exhaustion)?;
        let field = run.last().clone();
        let resolution = ResolutionMeta {
            h: params.h,
            dt: params.dt,
            theta: params.theta,
            box_half_width: field.half_width,
            core_margin: field.core_margin,
        };
        let mut report = EstimateReport::from_fields(
            "evolution_law",
            field.clone(),
            field,
            tol_law,
            resolution,
        );
        report.worst_margin = tol_law;
        report.pass = true;
        report.constants.insert("sup_difference".into(), 0.0);
        report.notes.push("identity composition (r = s)".into());
        return Ok(report);
    }
    // Pick the box via exhaustion on the direct run.
    let direct = evolution_operator(spec, f, s, &[r, t], params, exhaustion)?;
    let radius = exhaustion.r_start + direct.domain_level as f64 * exhaustion.r_step;
    let datum = sample_level(spec.dim, radius, params.h, f)?;

    // Direct leg on the fixed box, stepping straight from s to t (its step
    // grid is genuinely different from the composed legs').
    let one_leg = solve_dirichlet(spec, &datum, s, &[t], params)?;
    // Composed: stop at r, restart from the intermediate snapshot.
    let first_leg = solve_dirichlet(spec, &datum, s, &[r], params)?;
    let mid = first_leg.last().clone();
    let second_leg = solve_dirichlet(spec, &mid, r, &[t], params)?;

    let lhs = one_leg.last().clone();
    let rhs = second_leg.last().clone();
    let mut diff = 0.0f64;
    lhs.for_each_core(|idx, v| diff = diff.max((rhs.values[idx] - v).abs()));

    let resolution = ResolutionMeta {
        h: params.h,
        dt: params.dt,
        theta: params.theta,
        box_half_width: datum.half_width,
        core_margin: core_margin_cells(datum.n),
    };
    let mut report = EstimateReport::from_fields("evolution_law", lhs, rhs, tol_law, resolution);
    report.worst_margin = tol_law - diff;
    report.pass = diff <= tol_law;
    report
        .constants
        .insert("sup_difference".into(), diff);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalogue::{OperatorSpecDef, PotentialSpec};
    use crate::datum::DatumSpec;
    use crate::oracles::OuSpec1D;

    fn heat_spec() -> OperatorSpec {
        OperatorSpecDef::heat_1d(1.0).build().unwrap()
    }

    fn ou_spec() -> OperatorSpec {
        OperatorSpecDef::linear_drift_1d(1.0, 1.0).build().unwrap()
    }

    #[test]
    fn dirichlet_eigenfunction_decays_at_the_separated_rate() {
        // Heat equation on [-R, R] with f = first Dirichlet eigenfunction:
        // u(t, x) = exp(-pi^2 (t-s) / (2R)^2 * ... ) -- with q = 1 the decay
        // exponent is (pi / (2R))^2.
        let spec = heat_spec();
        let r = 1.0;
        let n = 401; // h = R/200
        let datum = DatumSpec::BoxEigenfunction { half_width: r }.build();
        let f = GridFunction::from_fn(1, r, n, &|x| datum.eval(x[0])).unwrap();
        let params = SchemeParams {
            h: 2.0 * r / (n - 1) as f64,
            ..SchemeParams::default()
        };
        let t_end = 0.5;
        let res = solve_dirichlet(&spec, &f, 0.0, &[t_end], &params).unwrap();
        let rate = (std::f64::consts::PI / (2.0 * r)).powi(2);
        let mut worst = 0.0f64;
        let snap = res.last();
        for i in 0..snap.n {
            let exact = (-rate * t_end).exp() * datum.eval(snap.coord(i));
            let rel = (snap.values[i] - exact).abs() / (-rate * t_end).exp();
            worst = worst.max(rel);
        }
        assert!(worst <= 1e-3, "relative eigenfunction error {worst}");
    }

    #[test]
    fn zero_datum_stays_zero() {
        let spec = heat_spec();
        let f = GridFunction::from_fn(1, 4.0, 101, &|_| 0.0).unwrap();
        let res = solve_dirichlet(&spec, &f, 0.0, &[0.5, 1.0], &SchemeParams::default()).unwrap();
        for snap in &res.snapshots {
            assert!(snap.sup_norm() == 0.0);
        }
    }

    #[test]
    fn constant_potential_rescales_the_solution() {
        // With c = kappa the solution is the kappa = 0 one times e^{kappa t}.
        let mut def = OperatorSpecDef::heat_1d(1.0);
        def.c = PotentialSpec::Constant { value: 0.7 };
        let spec_k = def.build().unwrap();
        let spec_0 = heat_spec();
        let r = 1.0;
        let n = 201;
        let datum = DatumSpec::BoxEigenfunction { half_width: r }.build();
        let f = GridFunction::from_fn(1, r, n, &|x| datum.eval(x[0])).unwrap();
        let params = SchemeParams {
            h: 2.0 * r / (n - 1) as f64,
            dt: 5e-4,
            ..SchemeParams::default()
        };
        let t_end = 0.3;
        let with_c = solve_dirichlet(&spec_k, &f, 0.0, &[t_end], &params).unwrap();
        let without = solve_dirichlet(&spec_0, &f, 0.0, &[t_end], &params).unwrap();
        let factor = (0.7f64 * t_end).exp();
        let mut worst = 0.0f64;
        for (a, b) in with_c.last().values.iter().zip(&without.last().values) {
            worst = worst.max((a - factor * b).abs());
        }
        assert!(worst <= 1e-6, "multiplicative factor error {worst}");
    }

    #[test]
    fn blowup_is_reported_with_a_time() {
        let mut def = OperatorSpecDef::heat_1d(1.0);
        def.c = PotentialSpec::Constant { value: 5e3 };
        let spec = def.build().unwrap();
        let f = GridFunction::from_fn(1, 2.0, 101, &|x| (-x[0] * x[0]).exp()).unwrap();
        let err = solve_dirichlet(&spec, &f, 0.0, &[2.0], &SchemeParams::default());
        assert!(matches!(err, Err(KlabError::Blowup { .. })));
    }

    #[test]
    fn peclet_warning_fires_on_coarse_grids() {
        let spec = OperatorSpecDef::linear_drift_1d(60.0, 1.0).build().unwrap();
        let f = GridFunction::from_fn(1, 4.0, 41, &|x| (-x[0] * x[0]).exp()).unwrap();
        let params = SchemeParams {
            h: 0.2,
            ..SchemeParams::default()
        };
        let res = solve_dirichlet(&spec, &f, 0.0, &[0.05], &params).unwrap();
        assert!(res.warnings.iter().any(|w| w.contains("Peclet")));
    }

    #[test]
    fn exhaustion_matches_the_closed_form() {
        let spec = ou_spec();
        let ou = OuSpec1D::constant(1.0, 1.0);
        let datum = DatumSpec::Tanh.build();
        let field = datum.as_field();
        let params = SchemeParams {
            h: 0.02,
            dt: 1e-3,
            ..SchemeParams::default()
        };
        let res = evolution_operator(
            &spec,
            field.as_ref(),
            0.0,
            &[1.0],
            &params,
            &ExhaustionParams::default(),
        )
        .unwrap();
        assert!(res.exhaustion.as_ref().unwrap().converged);
        let snap = res.last();
        let mut worst = 0.0f64;
        for i in 0..snap.n {
            let x = snap.coord(i);
            if x.abs() <= 3.0 {
                let exact = ou.evolve(&|y| y.tanh(), 0.0, 1.0, x).unwrap();
                worst = worst.max((snap.values[i] - exact).abs());
            }
        }
        assert!(worst <= 1e-3, "sup error vs closed form {worst}");
    }

    #[test]
    fn exhaustion_without_convergence_is_tagged() {
        let spec = heat_spec();
        let res = evolution_operator(
            &spec,
            &|x: &[f64]| (-x[0] * x[0]).exp(),
            0.0,
            &[0.5],
            &SchemeParams {
                h: 0.05,
                ..SchemeParams::default()
            },
            &ExhaustionParams {
                r_start: 3.0,
                r_step: 1.0,
                max_levels: 2,
                tol_exhaust: 1e-13,
            },
        )
        .unwrap();
        let out = res.exhaustion.unwrap();
        assert!(!out.converged);
        assert!(res.warnings.iter().any(|w| w.contains("not converged")));
    }

    #[test]
    fn identity_composition_is_definitional() {
        let spec = ou_spec();
        let report = check_evolution_law(
            &spec,
            &|x: &[f64]| x[0].cos(),
            0.0,
            0.0,
            0.5,
            &SchemeParams {
                h: 0.05,
                ..SchemeParams::default()
            },
            &ExhaustionParams::default(),
            5e-3,
        )
        .unwrap();
        assert!(report.pass);
        assert_eq!(report.constants["sup_difference"], 0.0);
        assert!(report.notes.iter().any(|n| n.contains("identity")));
    }

    #[test]
    fn composition_law_holds_on_linear_drift() {
        let spec = ou_spec();
        let report = check_evolution_law(
            &spec,
            &|x: &[f64]| x[0].cos(),
            0.0,
            0.5,
            1.0,
            &SchemeParams {
                h: 0.02,
                dt: 1e-3,
                ..SchemeParams::default()
            },
            &ExhaustionParams::default(),
            5e-3,
        )
        .unwrap();
        assert!(report.pass, "law margin {}", report.worst_margin);
    }
}
