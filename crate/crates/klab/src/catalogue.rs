//! Declarative operator construction: coefficients are chosen from a small
//! catalogue with numeric parameters, so scenario files stay data-only.
//! Arbitrary closures remain available through [`crate::coeff`] directly.

use crate::coeff::{constant_scalar, multi_indices, Arity, CoefficientField, TimeSpaceFn};
use crate::error::{KlabError, Result};
use crate::operator::{DeclaredParams, OperatorSpec};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Time modulation `base + amp * sin(omega t)` shared by several entries.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct TimeModulation {
    pub amp: f64,
    pub omega: f64,
}

/// Diffusion catalogue.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionSpec {
    /// `q(t) = value (+ modulation)` times the identity.
    Isotropic {
        value: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<TimeModulation>,
    },
    /// Full constant matrix, row-major d x d.
    ConstantMatrix { values: Vec<f64> },
}

/// Drift catalogue.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    Zero,
    /// `b(t, x) = -(rate (+ modulation)) * x` componentwise.
    Linear {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulation: Option<TimeModulation>,
    },
    /// 1-D: `b(x) = -x |x|^epsilon`.
    PowerLaw { epsilon: f64 },
    /// 1-D: `b(x) = -x^3`.
    Cubic,
    /// 1-D: `b(x) = +x^3` (the non-dissipative mirror of `Cubic`).
    CubicOutward,
    /// 1-D: `b(x) = -x log(e + x^2)`.
    LogGrowth,
}

/// Potential catalogue.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `c(x) = -|x|^2`.
    NegativeSquare,
    /// `c(t) = base + amp sin(omega t)`.
    TrigTime {
        base: f64,
        amp: f64,
        omega: f64,
    },
}

/// Lyapunov catalogue.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LyapunovSpec {
    /// `phi(x) = 1 + |x|^2`.
    QuadraticPlusOne,
}

/// Declarative operator description (scenario file form).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorSpecDef {
    pub d: usize,
    pub time_interval: (f64, f64),
    pub q: DiffusionSpec,
    pub b: DriftSpec,
    pub c: PotentialSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSpec>,
    #[serde(default)]
    pub params: DeclaredParams,
}

fn modulated(base: f64, m: Option<TimeModulation>) -> impl Fn(f64) -> f64 + Copy {
    move |t: f64| base + m.map(|m| m.amp * (m.omega * t).sin()).unwrap_or(0.0)
}

impl DiffusionSpec {
    pub fn build(&self, d: usize) -> Result<CoefficientField> {
        match self {
            DiffusionSpec::Isotropic { value, modulation } => {
                let q_t = modulated(*value, *modulation);
                let mut comps: Vec<TimeSpaceFn> = Vec::new();
                for i in 0..d {
                    for j in 0..d {
                        let diag = i == j;
                        comps.push(Arc::new(move |t: f64, _x: &[f64]| {
                            if diag {
                                q_t(t)
                            } else {
                                0.0
                            }
                        }));
                    }
                }
                let mut f = CoefficientField::new(Arity::Matrix, d, comps, 0.5)?;
                register_zero_derivatives(&mut f, d, d * d);
                Ok(f)
            }
            DiffusionSpec::ConstantMatrix { values } => {
                if values.len() != d * d {
                    return Err(KlabError::Parse(format!(
                        "diffusion matrix needs {} entries, got {}",
                        d * d,
                        values.len()
                    )));
                }
                let comps: Vec<TimeSpaceFn> = values
                    .iter()
                    .map(|&v| {
                        let f: TimeSpaceFn = Arc::new(move |_t: f64, _x: &[f64]| v);
                        f
                    })
                    .collect();
                let mut f = CoefficientField::new(Arity::Matrix, d, comps, 0.5)?;
                register_zero_derivatives(&mut f, d, d * d);
                Ok(f)
            }
        }
    }

    /// Time profile of the isotropic diffusion, when this entry is isotropic.
    pub fn isotropic_profile(&self) -> Option<impl Fn(f64) -> f64 + Copy> {
        match self {
            DiffusionSpec::Isotropic { value, modulation } => Some(modulated(*value, *modulation)),
            _ => None,
        }
    }
}

fn register_zero_derivatives(f: &mut CoefficientField, d: usize, comps: usize) {
    for comp in 0..comps {
        for order in 1..=3u8 {
            for beta in multi_indices(d, order) {
                f.register_derivative(comp, beta, Arc::new(|_, _| 0.0));
            }
        }
    }
}

impl DriftSpec {
    pub fn build(&self, d: usize) -> Result<CoefficientField> {
        match self {
            DriftSpec::Zero => {
                let comps: Vec<TimeSpaceFn> = (0..d)
                    .map(|_| {
                        let f: TimeSpaceFn = Arc::new(|_t: f64, _x: &[f64]| 0.0);
                        f
                    })
                    .collect();
                let mut f = CoefficientField::new(Arity::Vector, d, comps, 0.5)?;
                register_zero_derivatives(&mut f, d, d);
                Ok(f)
            }
            DriftSpec::Linear { rate, modulation } => {
                let a_t = modulated(*rate, *modulation);
                let mut comps: Vec<TimeSpaceFn> = Vec::new();
                for i in 0..d {
                    comps.push(Arc::new(move |t: f64, x: &[f64]| -a_t(t) * x[i]));
                }
                let mut f = CoefficientField::new(Arity::Vector, d, comps, 0.5)?;
                for i in 0..d {
                    for order in 1..=3u8 {
                        for beta in multi_indices(d, order) {
                            let on_axis =
                                order == 1 && beta.iter().position(|&b| b == 1) == Some(i);
                            f.register_derivative(
                                i,
                                beta,
                                Arc::new(move |t: f64, _x: &[f64]| {
                                    if on_axis {
                                        -a_t(t)
                                    } else {
                                        0.0
                                    }
                                }),
                            );
                        }
                    }
                }
                Ok(f)
            }
            DriftSpec::PowerLaw { epsilon } => {
                let e = *epsilon;
                if d != 1 {
                    return Err(KlabError::Parse("power-law drift is one-dimensional".into()));
                }
                let mut f = CoefficientField::new(
                    Arity::Vector,
                    1,
                    vec![Arc::new(move |_t: f64, x: &[f64]| {
                        -x[0] * x[0].abs().powf(e)
                    })],
                    0.5,
                )?;
                f.register_derivative(
                    0,
                    vec![1],
                    Arc::new(move |_t, x: &[f64]| -(1.0 + e) * x[0].abs().powf(e)),
                );
                f.register_derivative(
                    0,
                    vec![2],
                    Arc::new(move |_t, x: &[f64]| {
                        if x[0] == 0.0 {
                            0.0
                        } else {
                            -(1.0 + e) * e * x[0].abs().powf(e - 1.0) * x[0].signum()
                        }
                    }),
                );
                f.register_derivative(
                    0,
                    vec![3],
                    Arc::new(move |_t, x: &[f64]| {
                        if x[0] == 0.0 {
                            0.0
                        } else {
                            -(1.0 + e) * e * (e - 1.0) * x[0].abs().powf(e - 2.0)
                        }
                    }),
                );
                Ok(f)
            }
            DriftSpec::Cubic | DriftSpec::CubicOutward => {
                if d != 1 {
                    return Err(KlabError::Parse("cubic drift is one-dimensional".into()));
                }
                let sign = if matches!(self, DriftSpec::Cubic) {
                    -1.0
                } else {
                    1.0
                };
                let mut f = CoefficientField::new(
                    Arity::Vector,
                    1,
                    vec![Arc::new(move |_t: f64, x: &[f64]| sign * x[0].powi(3))],
                    0.5,
                )?;
                f.register_derivative(
                    0,
                    vec![1],
                    Arc::new(move |_t, x: &[f64]| sign * 3.0 * x[0] * x[0]),
                );
                f.register_derivative(
                    0,
                    vec![2],
                    Arc::new(move |_t, x: &[f64]| sign * 6.0 * x[0]),
                );
                f.register_derivative(0, vec![3], Arc::new(move |_t, _x| sign * 6.0));
                Ok(f)
            }
            DriftSpec::LogGrowth => {
                if d != 1 {
                    return Err(KlabError::Parse("log-growth drift is one-dimensional".into()));
                }
                let e = std::f64::consts::E;
                let mut f = CoefficientField::new(
                    Arity::Vector,
                    1,
                    vec![Arc::new(move |_t: f64, x: &[f64]| {
                        -x[0] * (e + x[0] * x[0]).ln()
                    })],
                    0.5,
                )?;
                f.register_derivative(
                    0,
                    vec![1],
                    Arc::new(move |_t, x: &[f64]| {
                        let w = e + x[0] * x[0];
                        -w.ln() - 2.0 * x[0] * x[0] / w
                    }),
                );
                f.register_derivative(
                    0,
                    vec![2],
                    Arc::new(move |_t, x: &[f64]| {
                        let x0 = x[0];
                        let w = e + x0 * x0;
                        -2.0 * x0 / w - (4.0 * x0 * w - 4.0 * x0 * x0 * x0) / (w * w)
                    }),
                );
                f.register_derivative(
                    0,
                    vec![3],
                    Arc::new(move |_t, x: &[f64]| {
                        let x0 = x[0];
                        let w = e + x0 * x0;
                        -2.0 / w + 4.0 * x0 * x0 / (w * w)
                            - 4.0 * e / (w * w)
                            + 16.0 * e * x0 * x0 / (w * w * w)
                    }),
                );
                Ok(f)
            }
        }
    }
}

impl PotentialSpec {
    pub fn build(&self, d: usize) -> Result<CoefficientField> {
        match self {
            PotentialSpec::Zero => Ok(constant_scalar(d, 0.0)),
            PotentialSpec::Constant { value } => Ok(constant_scalar(d, *value)),
            PotentialSpec::NegativeSquare => {
                let mut f = CoefficientField::scalar(
                    d,
                    Arc::new(|_t, x: &[f64]| -x.iter().map(|v| v * v).sum::<f64>()),
                );
                for order in 1..=3u8 {
                    for beta in multi_indices(d, order) {
                        let b = beta.clone();
                        f.register_derivative(
                            0,
                            beta,
                            Arc::new(move |_t, x: &[f64]| match multi_order_split(&b) {
                                (1, axis) => -2.0 * x[axis],
                                (2, axis) if b[axis] == 2 => -2.0,
                                _ => 0.0,
                            }),
                        );
                    }
                }
                Ok(f)
            }
            PotentialSpec::TrigTime { base, amp, omega } => {
                let (base, amp, omega) = (*base, *amp, *omega);
                let mut f = CoefficientField::scalar(
                    d,
                    Arc::new(move |t: f64, _x: &[f64]| base + amp * (omega * t).sin()),
                );
                for order in 1..=3u8 {
                    for beta in multi_indices(d, order) {
                        f.register_derivative(0, beta, Arc::new(|_, _| 0.0));
                    }
                }
                Ok(f)
            }
        }
    }
}

fn multi_order_split(beta: &[u8]) -> (u8, usize) {
    let order: u8 = beta.iter().sum();
    let axis = beta.iter().position(|&b| b > 0).unwrap_or(0);
    (order, axis)
}

impl LyapunovSpec {
    pub fn build(&self, d: usize) -> Result<CoefficientField> {
        match self {
            LyapunovSpec::QuadraticPlusOne => {
                let mut f = CoefficientField::scalar(
                    d,
                    Arc::new(|_t, x: &[f64]| 1.0 + x.iter().map(|v| v * v).sum::<f64>()),
                );
                for order in 1..=3u8 {
                    for beta in multi_indices(d, order) {
                        let b = beta.clone();
                        f.register_derivative(
                            0,
                            beta,
                            Arc::new(move |_t, x: &[f64]| match multi_order_split(&b) {
                                (1, axis) => 2.0 * x[axis],
                                (2, axis) if b[axis] == 2 => 2.0,
                                _ => 0.0,
                            }),
                        );
                    }
                }
                Ok(f)
            }
        }
    }
}

impl OperatorSpecDef {
    pub fn build(&self) -> Result<OperatorSpec> {
        let q = self.q.build(self.d)?;
        let b = self.b.build(self.d)?;
        let c = self.c.build(self.d)?;
        let mut spec =
            OperatorSpec::new(self.d, self.time_interval, q, b, c)?.with_params(self.params.clone());
        if let Some(phi) = &self.lyapunov {
            spec = spec.with_lyapunov(phi.build(self.d)?);
        }
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The 1-D linear-drift spec `q = const, b = -rate x, c = 0` used across
    /// the test batteries.
    pub fn linear_drift_1d(rate: f64, q: f64) -> Self {
        OperatorSpecDef {
            d: 1,
            time_interval: (0.0, 100.0),
            q: DiffusionSpec::Isotropic {
                value: q,
                modulation: None,
            },
            b: DriftSpec::Linear {
                rate,
                modulation: None,
            },
            c: PotentialSpec::Zero,
            lyapunov: Some(LyapunovSpec::QuadraticPlusOne),
            params: DeclaredParams::default(),
        }
    }

    /// The 1-D heat spec `q = const, b = 0, c = 0`.
    pub fn heat_1d(q: f64) -> Self {
        OperatorSpecDef {
            d: 1,
            time_interval: (0.0, 100.0),
            q: DiffusionSpec::Isotropic {
                value: q,
                modulation: None,
            },
            b: DriftSpec::Zero,
            c: PotentialSpec::Zero,
            lyapunov: None,
            params: DeclaredParams::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn catalogue_registrations_pass_the_derivative_guard() {
        let defs = [
            OperatorSpecDef::linear_drift_1d(1.0, 1.0),
            OperatorSpecDef::heat_1d(1.0),
            OperatorSpecDef {
                d: 1,
                time_interval: (0.0, 10.0),
                q: DiffusionSpec::Isotropic {
                    value: 1.0,
                    modulation: Some(TimeModulation {
                        amp: 0.5,
                        omega: 1.0,
                    }),
                },
                b: DriftSpec::Cubic,
                c: PotentialSpec::NegativeSquare,
                lyapunov: Some(LyapunovSpec::QuadraticPlusOne),
                params: DeclaredParams::default(),
            },
            OperatorSpecDef {
                d: 1,
                time_interval: (0.0, 10.0),
                q: DiffusionSpec::Isotropic {
                    value: 1.0,
                    modulation: None,
                },
                b: DriftSpec::LogGrowth,
                c: PotentialSpec::Zero,
                lyapunov: None,
                params: DeclaredParams::default(),
            },
        ];
        for def in defs {
            let spec = def.build().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for field in [&spec.q, &spec.b, &spec.c] {
                field
                    .check_derivatives((0.0, 5.0), 4.0, &mut rng, 100, 1e-5, 1e-6)
                    .unwrap();
            }
            if let Some(phi) = &spec.lyapunov {
                phi.check_derivatives((0.0, 5.0), 4.0, &mut rng, 100, 1e-5, 1e-6)
                    .unwrap();
            }
        }
    }

    #[test]
    fn power_law_drift_matches_hand_values() {
        // b(x) = -x|x|, b'(x) = -2|x|, b''(x) = -2 sgn x.
        let b = DriftSpec::PowerLaw { epsilon: 1.0 }.build(1).unwrap();
        assert_eq!(b.eval(0, 0.0, &[2.0]), -4.0);
        assert_eq!(b.eval_derivative(0, &[1], 0.0, &[2.0]).unwrap(), -4.0);
        assert_eq!(b.eval_derivative(0, &[1], 0.0, &[-3.0]).unwrap(), -6.0);
        assert_eq!(b.eval_derivative(0, &[2], 0.0, &[-3.0]).unwrap(), 2.0);
    }

    #[test]
    fn json_round_trip() {
        let def = OperatorSpecDef::linear_drift_1d(1.0, 1.0);
        let text = serde_json::to_string(&def).unwrap();
        let back = OperatorSpecDef::from_json(&text).unwrap();
        assert_eq!(back.d, 1);
        back.build().unwrap();
    }
}
