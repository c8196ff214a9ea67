//! Coefficient fields: time-space evaluators with registered spatial
//! derivatives and a finite-difference guard against registration mistakes.

use crate::error::{KlabError, Result};
use rand::Rng;
use std::collections::HashMap;
use std::sync::Arc;

/// Evaluator signature shared by all coefficients: `(t, x) -> value`.
pub type TimeSpaceFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Shape of a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Scalar,
    /// d components.
    Vector,
    /// d x d components, row-major.
    Matrix,
}

/// Spatial multi-index: one order per axis, total order `<= 3`.
pub type MultiIndex = Vec<u8>;

pub fn multi_index_order(beta: &[u8]) -> u8 {
    beta.iter().sum()
}

/// A coefficient of the operator together with its registered spatial
/// derivatives. Derivatives are registered, not differenced: the solver and
/// the hypothesis checkers read them directly, and [`CoefficientField::check_derivatives`]
/// cross-checks each one against a central finite difference.
#[derive(Clone)]
pub struct CoefficientField {
    pub arity: Arity,
    pub dim: usize,
    components: Vec<TimeSpaceFn>,
    derivatives: HashMap<(usize, MultiIndex), TimeSpaceFn>,
    /// Assumed Hoelder exponent in (0,1) of the least-smooth component.
    pub alpha: f64,
}

impl std::fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField")
            .field("arity", &self.arity)
            .field("dim", &self.dim)
            .field("registered_derivatives", &self.derivatives.len())
            .field("alpha", &self.alpha)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(arity: Arity, dim: usize, components: Vec<TimeSpaceFn>, alpha: f64) -> Result<Self> {
        let expected = match arity {
            Arity::Scalar => 1,
            Arity::Vector => dim,
            Arity::Matrix => dim * dim,
        };
        if components.len() != expected {
            return Err(KlabError::Invalid(format!(
                "expected {expected} components, got {}",
                components.len()
            )));
        }
        if !(0.0 < alpha && alpha < 1.0) {
            return Err(KlabError::Invalid(
                "smoothness tag alpha must lie in (0,1)".into(),
            ));
        }
        Ok(CoefficientField {
            arity,
            dim,
            components,
            derivatives: HashMap::new(),
            alpha,
        })
    }

    pub fn scalar(dim: usize, f: TimeSpaceFn) -> Self {
        CoefficientField::new(Arity::Scalar, dim, vec![f], 0.5).unwrap()
    }

    /// Registers the spatial derivative `D^beta` of component `comp`.
    pub fn register_derivative(&mut self, comp: usize, beta: MultiIndex, eval: TimeSpaceFn) {
        assert_eq!(beta.len(), self.dim, "multi-index length must equal d");
        assert!(multi_index_order(&beta) >= 1 && multi_index_order(&beta) <= 3);
        self.derivatives.insert((comp, beta), eval);
    }

    pub fn eval(&self, comp: usize, t: f64, x: &[f64]) -> f64 {
        (self.components[comp])(t, x)
    }

    pub fn derivative(&self, comp: usize, beta: &[u8]) -> Option<&TimeSpaceFn> {
        self.derivatives.get(&(comp, beta.to_vec()))
    }

    pub fn eval_derivative(&self, comp: usize, beta: &[u8], t: f64, x: &[f64]) -> Result<f64> {
        match self.derivative(comp, beta) {
            Some(f) => Ok(f(t, x)),
            None => Err(KlabError::MissingDerivative {
                symbol: format!("component {comp}, D^{beta:?}"),
            }),
        }
    }

    pub fn has_derivatives_of_order(&self, order: u8) -> bool {
        for comp in 0..self.components.len() {
            for beta in multi_indices(self.dim, order) {
                if !self.derivatives.contains_key(&(comp, beta)) {
                    return false;
                }
            }
        }
        true
    }

    /// Cross-checks every registered first-order derivative against a central
    /// finite difference of the evaluator, and every higher-order derivative
    /// against a central difference of the next-lower registered derivative.
    ///
    /// Checks `samples` random points in `[t0,t1] x [-radius, radius]^d` with
    /// step `h`; relative mismatch above `tol` fails.
    pub fn check_derivatives(
        &self,
        time_interval: (f64, f64),
        radius: f64,
        rng: &mut impl Rng,
        samples: usize,
        h: f64,
        tol: f64,
    ) -> Result<()> {
        for ((comp, beta), deriv) in &self.derivatives {
            let order = multi_index_order(beta);
            let axis = beta
                .iter()
                .position(|&b| b > 0)
                .expect("registered derivative with empty multi-index");
            let mut lower = beta.clone();
            lower[axis] -= 1;
            // Differentiate the registered lower-order derivative (or the
            // evaluator itself for order 1) along `axis`.
            let base: TimeSpaceFn = if order == 1 {
                self.components[*comp].clone()
            } else {
                match self.derivatives.get(&(*comp, lower.clone())) {
                    Some(f) => f.clone(),
                    None => continue, // cannot cross-check without the parent
                }
            };
            for _ in 0..samples {
                let t = rng.gen_range(time_interval.0..=time_interval.1);
                let x: Vec<f64> = (0..self.dim)
                    .map(|_| rng.gen_range(-radius..=radius))
                    .collect();
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[axis] += h;
                xm[axis] -= h;
                let fd = (base(t, &xp) - base(t, &xm)) / (2.0 * h);
                let reg = deriv(t, &x);
                let scale = reg.abs().max(fd.abs()).max(1.0);
                if (fd - reg).abs() > tol * scale {
                    return Err(KlabError::Invalid(format!(
                        "registered derivative (component {comp}, D^{beta:?}) disagrees with \
                         finite difference at t={t}, x={x:?}: registered {reg}, difference {fd}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// All spatial multi-indices of exact order `order` in dimension `dim`.
pub fn multi_indices(dim: usize, order: u8) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    match dim {
        1 => out.push(vec![order]),
        2 => {
            for a in 0..=order {
                out.push(vec![order - a, a]);
            }
        }
        _ => {}
    }
    out
}

/// Builds a constant scalar coefficient.
pub fn constant_scalar(dim: usize, value: f64) -> CoefficientField {
    let mut f = CoefficientField::scalar(dim, Arc::new(move |_, _| value));
    for order in 1..=3u8 {
        for beta in multi_indices(dim, order) {
            f.register_derivative(0, beta, Arc::new(|_, _| 0.0));
        }
    }
    f
}
