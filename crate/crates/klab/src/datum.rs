//! Initial data for the Cauchy problem: one-dimensional profiles with
//! analytically registered derivatives up to third order, plus a small
//! catalogue addressable from scenario files and the CLI.

use crate::error::{KlabError, Result};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Shared evaluator on points of R^d.
pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A 1-D initial datum with its first three derivatives.
#[derive(Clone)]
pub struct Datum {
    pub name: String,
    f: Profile,
    d1: Profile,
    d2: Profile,
    d3: Profile,
}

impl std::fmt::Debug for Datum {
    fn fmt(&self, fmt: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(fmt, "Datum({})", self.name)
    }
}

impl Datum {
    pub fn new(name: &str, f: Profile, d1: Profile, d2: Profile, d3: Profile) -> Self {
        Datum {
            name: name.to_string(),
            f,
            d1,
            d2,
            d3,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// k-th derivative, k = 0..=3.
    pub fn deriv(&self, k: usize, x: f64) -> f64 {
        match k {
            0 => (self.f)(x),
            1 => (self.d1)(x),
            2 => (self.d2)(x),
            3 => (self.d3)(x),
            _ => panic!("datum derivatives registered up to order 3"),
        }
    }

    /// View of the profile as a field on R^d (first coordinate only).
    pub fn as_field(&self) -> FieldFn {
        let f = self.f.clone();
        Arc::new(move |x: &[f64]| f(x[0]))
    }

    /// The composite datum `(sum_{j in range} |D^j f|^2)^{p/2}` used as the
    /// right-hand side of pointwise derivative estimates.
    pub fn derivative_bundle(&self, orders: std::ops::RangeInclusive<usize>, p: f64) -> Profile {
        let datum = self.clone();
        let orders: Vec<usize> = orders.collect();
        Arc::new(move |x: f64| {
            let s: f64 = orders.iter().map(|&j| datum.deriv(j, x).powi(2)).sum();
            s.powf(p / 2.0)
        })
    }
}

/// Catalogue form of a datum, parseable from scenario JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatumSpec {
    Tanh,
    /// exp(-x^2 / (2 sigma^2))
    Gaussian {
        sigma: f64,
    },
    Sin {
        freq: f64,
    },
    Cos {
        freq: f64,
    },
    /// a + b x
    Affine {
        a: f64,
        b: f64,
    },
    Const {
        value: f64,
    },
    /// exp(theta x)
    Exp {
        theta: f64,
    },
    /// tanh(x / delta): a step profile mollified at length `delta`.
    MollifiedStep {
        delta: f64,
    },
    /// (c0 + c1 x + c2 x^2 + c3 x^3) exp(-lambda x^2)
    PolyGauss {
        coeffs: [f64; 4],
        lambda: f64,
    },
    /// Dirichlet eigenfunction sin(pi (x + r) / (2 r)) on [-r, r].
    BoxEigenfunction {
        half_width: f64,
    },
}

impl DatumSpec {
    pub fn build(&self) -> Datum {
        match *self {
            DatumSpec::Tanh => Datum::new(
                "tanh",
                Arc::new(|x| x.tanh()),
                Arc::new(|x: f64| {
                    let s = x.cosh();
                    1.0 / (s * s)
                }),
                Arc::new(|x: f64| {
                    let t = x.tanh();
                    -2.0 * t * (1.0 - t * t)
                }),
                Arc::new(|x: f64| {
                    let t = x.tanh();
                    let s2 = 1.0 - t * t;
                    -2.0 * s2 * (s2 - 2.0 * t * t)
                }),
            ),
            DatumSpec::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                Datum::new(
                    "gaussian",
                    Arc::new(move |x| (-x * x / (2.0 * s2)).exp()),
                    Arc::new(move |x| -(x / s2) * (-x * x / (2.0 * s2)).exp()),
                    Arc::new(move |x| (x * x / s2 - 1.0) / s2 * (-x * x / (2.0 * s2)).exp()),
                    Arc::new(move |x| {
                        (3.0 * x / s2 - x * x * x / (s2 * s2)) / s2
                            * (-x * x / (2.0 * s2)).exp()
                    }),
                )
            }
            DatumSpec::Sin { freq } => Datum::new(
                "sin",
                Arc::new(move |x| (freq * x).sin()),
                Arc::new(move |x| freq * (freq * x).cos()),
                Arc::new(move |x| -freq * freq * (freq * x).sin()),
                Arc::new(move |x| -freq * freq * freq * (freq * x).cos()),
            ),
            DatumSpec::Cos { freq } => Datum::new(
                "cos",
                Arc::new(move |x| (freq * x).cos()),
                Arc::new(move |x| -freq * (freq * x).sin()),
                Arc::new(move |x| -freq * freq * (freq * x).cos()),
                Arc::new(move |x| freq * freq * freq * (freq * x).sin()),
            ),
            DatumSpec::Affine { a, b } => Datum::new(
                "affine",
                Arc::new(move |x| a + b * x),
                Arc::new(move |_| b),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
            ),
            DatumSpec::Const { value } => Datum::new(
                "const",
                Arc::new(move |_| value),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
            ),
            DatumSpec::Exp { theta } => Datum::new(
                "exp",
                Arc::new(move |x| (theta * x).exp()),
                Arc::new(move |x| theta * (theta * x).exp()),
                Arc::new(move |x| theta * theta * (theta * x).exp()),
                Arc::new(move |x| theta * theta * theta * (theta * x).exp()),
            ),
            DatumSpec::MollifiedStep { delta } => {
                let base = DatumSpec::Tanh.build();
                let (f, d1, d2, d3) = (base.f, base.d1, base.d2, base.d3);
                Datum::new(
                    "mollified_step",
                    Arc::new(move |x| f(x / delta)),
                    Arc::new(move |x| d1(x / delta) / delta),
                    Arc::new(move |x| d2(x / delta) / delta.powi(2)),
                    Arc::new(move |x| d3(x / delta) / delta.powi(3)),
                )
            }
            DatumSpec::PolyGauss { coeffs, lambda } => {
                let poly = move |x: f64| {
                    coeffs[0] + coeffs[1] * x + coeffs[2] * x * x + coeffs[3] * x * x * x
                };
                let dpoly =
                    move |x: f64| coeffs[1] + 2.0 * coeffs[2] * x + 3.0 * coeffs[3] * x * x;
                let d2poly = move |x: f64| 2.0 * coeffs[2] + 6.0 * coeffs[3] * x;
                let d3poly = move |_x: f64| 6.0 * coeffs[3];
                let g = move |x: f64| (-lambda * x * x).exp();
                // (p g)' = (p' - 2 lambda x p) g, iterated by product rule.
                Datum::new(
                    "poly_gauss",
                    Arc::new(move |x| poly(x) * g(x)),
                    Arc::new(move |x| (dpoly(x) - 2.0 * lambda * x * poly(x)) * g(x)),
                    Arc::new(move |x| {
                        let q1 = dpoly(x) - 2.0 * lambda * x * poly(x);
                        let dq1 = d2poly(x) - 2.0 * lambda * (poly(x) + x * dpoly(x));
                        (dq1 - 2.0 * lambda * x * q1) * g(x)
                    }),
                    Arc::new(move |x| {
                        let p = poly(x);
                        let p1 = dpoly(x);
                        let p2 = d2poly(x);
                        let p3 = d3poly(x);
                        let l = lambda;
                        let q1 = p1 - 2.0 * l * x * p;
                        let q2 = p2 - 2.0 * l * (p + x * p1) - 2.0 * l * x * q1;
                        let dq2 = p3
                            - 2.0 * l * (2.0 * p1 + x * p2)
                            - 2.0 * l * (q1 + x * (p2 - 2.0 * l * (p + x * p1)));
                        (dq2 - 2.0 * l * x * q2) * g(x)
                    }),
                )
            }
            DatumSpec::BoxEigenfunction { half_width } => {
                let k = std::f64::consts::PI / (2.0 * half_width);
                Datum::new(
                    "box_eigenfunction",
                    Arc::new(move |x| (k * (x + half_width)).sin()),
                    Arc::new(move |x| k * (k * (x + half_width)).cos()),
                    Arc::new(move |x| -k * k * (k * (x + half_width)).sin()),
                    Arc::new(move |x| -k * k * k * (k * (x + half_width)).cos()),
                )
            }
        }
    }

    /// Parses shorthand like `tanh`, `gaussian:1.0`, `exp:0.5`, `sin:2`,
    /// `affine:1,0.5`, `step:0.04`, `const:1`.
    pub fn parse(text: &str) -> Result<Self> {
        let (kind, args) = match text.split_once(':') {
            Some((k, a)) => (k, a),
            None => (text, ""),
        };
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| KlabError::Parse(format!("bad datum parameter {s}: {e}")))
                })
                .collect::<Result<_>>()?
        };
        let arg = |i: usize, default: f64| nums.get(i).copied().unwrap_or(default);
        Ok(match kind {
            "tanh" => DatumSpec::Tanh,
            "gaussian" => DatumSpec::Gaussian {
                sigma: arg(0, 1.0),
            },
            "sin" => DatumSpec::Sin { freq: arg(0, 1.0) },
            "cos" => DatumSpec::Cos { freq: arg(0, 1.0) },
            "affine" => DatumSpec::Affine {
                a: arg(0, 0.0),
                b: arg(1, 1.0),
            },
            "x" => DatumSpec::Affine { a: 0.0, b: 1.0 },
            "const" => DatumSpec::Const { value: arg(0, 1.0) },
            "one" => DatumSpec::Const { value: 1.0 },
            "exp" => DatumSpec::Exp { theta: arg(0, 0.5) },
            "step" | "mollified_step" => DatumSpec::MollifiedStep { delta: arg(0, 0.04) },
            "eigenfunction" => DatumSpec::BoxEigenfunction {
                half_width: arg(0, 1.0),
            },
            other => {
                return Err(KlabError::Parse(format!("unknown datum kind `{other}`")));
            }
        })
    }
}


/// Planar datum built as a product of two line profiles; all mixed partials
/// up to third order come from the registered 1-D derivatives.
#[derive(Clone, Debug)]
pub struct PlanarDatum {
    pub x: Datum,
    pub y: Datum,
}

impl PlanarDatum {
    pub fn new(x: Datum, y: Datum) -> Self {
        PlanarDatum { x, y }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.x.eval(x) * self.y.eval(y)
    }

    /// Mixed partial `D_x^a D_y^b`.
    pub fn partial(&self, a: usize, b: usize, x: f64, y: f64) -> f64 {
        self.x.deriv(a, x) * self.y.deriv(b, y)
    }

    /// `|D^k f|^2`: squared norm of the order-k derivative tensor, with
    /// multinomial multiplicities.
    pub fn derivative_square(&self, k: usize, x: f64, y: f64) -> f64 {
        if k == 0 {
            let v = self.eval(x, y);
            return v * v;
        }
        let mut acc = 0.0;
        let mut mult = 1.0;
        for a in 0..=k {
            if a > 0 {
                mult = mult * (k - a + 1) as f64 / a as f64;
            }
            let v = self.partial(k - a, a, x, y);
            acc += mult * v * v;
        }
        acc
    }

    pub fn as_field(&self) -> FieldFn {
        let d = self.clone();
        Arc::new(move |p: &[f64]| d.eval(p[0], p[1]))
    }

    /// `(sum_{j in orders} |D^j f|^2)^{p/2}` as a field.
    pub fn bundle_field(&self, orders: std::ops::RangeInclusive<usize>, p: f64) -> FieldFn {
        let d = self.clone();
        let orders: Vec<usize> = orders.collect();
        Arc::new(move |pt: &[f64]| {
            let s: f64 = orders
                .iter()
                .map(|&j| d.derivative_square(j, pt[0], pt[1]))
                .sum();
            s.powf(p / 2.0)
        })
    }
}
