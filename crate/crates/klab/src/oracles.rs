//! Closed-form reference evolutions used as ground truth by the test
//! batteries and the estimate verifier: the one-dimensional linear-drift
//! (Ornstein-Uhlenbeck type) family, which covers the heat case at zero
//! drift rate.

use crate::catalogue::{DriftSpec, OperatorSpecDef, PotentialSpec};
use crate::error::{KlabError, Result};
use crate::quad::{adaptive_simpson, gauss_mean};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// 1-D operator `q(t) u'' - a(t) x u'` with closed-form evolution: the image
/// of a datum is a Gaussian average around the exponentially damped point.
#[derive(Clone)]
pub struct OuSpec1D {
    q: TimeFn,
    a: TimeFn,
    quad_tol: f64,
}

impl std::fmt::Debug for OuSpec1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "OuSpec1D")
    }
}

/// Centred Gaussian measure on the line.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GaussianDensity {
    pub variance: f64,
}

impl GaussianDensity {
    pub fn pdf(&self, x: f64) -> f64 {
        (-(x * x) / (2.0 * self.variance)).exp()
            / (2.0 * std::f64::consts::PI * self.variance).sqrt()
    }

    /// Mean of `f` against this density (64-point Gauss-Hermite).
    pub fn mean(&self, f: &dyn Fn(f64) -> f64) -> f64 {
        gauss_mean(f, self.variance)
    }
}

impl OuSpec1D {
    pub fn new(q: TimeFn, a: TimeFn) -> Self {
        OuSpec1D {
            q,
            a,
            quad_tol: 1e-12,
        }
    }

    pub fn constant(q: f64, a: f64) -> Self {
        OuSpec1D::new(Arc::new(move |_| q), Arc::new(move |_| a))
    }

    /// Builds the oracle from a catalogue definition when the operator is of
    /// linear-drift type with isotropic diffusion and no potential.
    pub fn from_def(def: &OperatorSpecDef) -> Result<Self> {
        if def.d != 1 || def.c != PotentialSpec::Zero {
            return Err(KlabError::Invalid(
                "closed form needs d = 1 and a vanishing potential".into(),
            ));
        }
        let q = match def.q.isotropic_profile() {
            Some(f) => f,
            None => {
                return Err(KlabError::Invalid(
                    "closed form needs isotropic diffusion".into(),
                ))
            }
        };
        match def.b {
            DriftSpec::Linear { rate, modulation } => {
                let a = move |t: f64| {
                    rate + modulation.map(|m| m.amp * (m.omega * t).sin()).unwrap_or(0.0)
                };
                Ok(OuSpec1D::new(Arc::new(q), Arc::new(a)))
            }
            DriftSpec::Zero => Ok(OuSpec1D::new(Arc::new(q), Arc::new(|_| 0.0))),
            _ => Err(KlabError::Invalid(
                "closed form needs a linear (or zero) drift".into(),
            )),
        }
    }

    /// Reference heat oracle: `q u''` with zero drift.
    pub fn heat(q: f64) -> Self {
        OuSpec1D::constant(q, 0.0)
    }

    /// Damping factor `m(t,s) = exp(-int_s^t a)`.
    pub fn damping(&self, s: f64, t: f64) -> f64 {
        let a = self.a.clone();
        (-adaptive_simpson(&move |r| a(r), s, t, self.quad_tol)).exp()
    }

    /// Fluctuation variance `v(t,s) = 2 int_s^t q(r) m(t,r)^2 dr`.
    pub fn fluctuation(&self, s: f64, t: f64) -> f64 {
        let q = self.q.clone();
        let a = self.a.clone();
        let tol = self.quad_tol;
        let integrand = move |r: f64| {
            let ar = a.clone();
            let m_tr = (-adaptive_simpson(&move |u| ar(u), r, t, tol)).exp();
            2.0 * q(r) * m_tr * m_tr
        };
        adaptive_simpson(&integrand, s, t, self.quad_tol)
    }

    /// `(G(t,s)f)(x)`: Gaussian average of `f` around `m(t,s) x`.
    pub fn evolve(&self, f: &dyn Fn(f64) -> f64, s: f64, t: f64, x: f64) -> Result<f64> {
        if t < s {
            return Err(KlabError::Domain("need t >= s".into()));
        }
        if t == s {
            return Ok(f(x));
        }
        let m = self.damping(s, t);
        let v = self.fluctuation(s, t);
        if v <= 0.0 {
            return Err(KlabError::Invalid(
                "nonpositive fluctuation variance (invalid diffusion profile)".into(),
            ));
        }
        Ok(gauss_mean(&|y| f(m * x + y), v))
    }

    /// Both sides of the pointwise gradient estimate at a point:
    /// `lhs = |d/dx G(t,s)f|`, `rhs = e^{r0 (t-s)} G(t,s)|f'|` with
    /// `r0 = sup(-a)` over `[s, t]`. Equality holds when the drift rate is
    /// constant and `f'` has one sign.
    pub fn gradient_identity(
        &self,
        f_prime: &dyn Fn(f64) -> f64,
        s: f64,
        t: f64,
        x: f64,
    ) -> Result<(f64, f64)> {
        let m = self.damping(s, t);
        let g_fprime = self.evolve(f_prime, s, t, x)?;
        let lhs = (m * g_fprime).abs();
        let r0 = self.drift_rate_upper(s, t);
        let g_abs = self.evolve(&|y| f_prime(y).abs(), s, t, x)?;
        let rhs = (r0 * (t - s)).exp() * g_abs;
        Ok((lhs, rhs))
    }

    /// `sup_{[s,t]} (-a)`, the dissipativity exponent of the drift.
    pub fn drift_rate_upper(&self, s: f64, t: f64) -> f64 {
        let n = 512;
        (0..=n)
            .map(|i| -(self.a)(s + (t - s) * i as f64 / n as f64))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The tight-family Gaussian at time `t`:
    /// variance `V(t) = 2 int_{-inf}^t q(r) exp(-2 int_r^t a) dr`, the
    /// improper integral truncated once the integrand drops below 1e-14.
    pub fn tight_measure(&self, t: f64) -> Result<GaussianDensity> {
        // Dissipativity guard: the backward damping must win.
        let horizon = 200.0;
        let n = 400;
        let a_min = (0..=n)
            .map(|i| (self.a)(t - horizon * i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min);
        if a_min <= 0.0 {
            return Err(KlabError::NotDissipative(
                "drift rate must stay positive on the lookback horizon".into(),
            ));
        }
        let q = self.q.clone();
        let a = self.a.clone();
        let tol = self.quad_tol;
        let mut variance = 0.0;
        let mut upper = t;
        for _ in 0..100_000 {
            let lower = upper - 1.0;
            let a2 = a.clone();
            let q2 = q.clone();
            let chunk = adaptive_simpson(
                &move |r| {
                    let a3 = a2.clone();
                    let decay = (-2.0 * adaptive_simpson(&move |u| a3(u), r, t, tol)).exp();
                    2.0 * q2(r) * decay
                },
                lower,
                upper,
                tol,
            );
            variance += chunk;
            if chunk.abs() < 1e-14 {
                break;
            }
            upper = lower;
        }
        Ok(GaussianDensity { variance })
    }
}
