//! Verdict records shared by the verifier, the measure checks and the
//! inequality lab.

use crate::grid::GridFunction;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A compared quantity: a scalar, or a field on the core region.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Quantity {
    Scalar { value: f64 },
    Field { field: GridFunction },
}

impl Quantity {
    pub fn scalar(v: f64) -> Self {
        Quantity::Scalar { value: v }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Quantity::Scalar { value } => Some(*value),
            _ => None,
        }
    }

    pub fn as_field(&self) -> Option<&GridFunction> {
        match self {
            Quantity::Field { field } => Some(field),
            _ => None,
        }
    }
}

/// Discretisation metadata attached to every report that came out of a
/// solver run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ResolutionMeta {
    pub h: f64,
    pub dt: f64,
    pub theta: f64,
    pub box_half_width: f64,
    pub core_margin: usize,
}

/// Verdict record for one inequality check.
///
/// `worst_margin` is the minimum of `rhs - lhs` over the compared nodes (or
/// the scalar difference); the check passes when it stays above `-tol`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub id: String,
    pub lhs: Quantity,
    pub rhs: Quantity,
    pub worst_margin: f64,
    pub pass: bool,
    pub tol: f64,
    /// Constants entering the right-hand side, with their provenance keys.
    pub constants: BTreeMap<String, f64>,
    pub resolution: ResolutionMeta,
    pub notes: Vec<String>,
}

impl EstimateReport {
    pub fn from_fields(
        id: &str,
        lhs: GridFunction,
        rhs: GridFunction,
        tol: f64,
        resolution: ResolutionMeta,
    ) -> Self {
        let mut worst = f64::INFINITY;
        let margins: Vec<f64> = lhs
            .values
            .iter()
            .zip(&rhs.values)
            .map(|(l, r)| r - l)
            .collect();
        let probe = GridFunction {
            values: margins,
            ..lhs.clone()
        };
        probe.for_each_core(|_, m| worst = worst.min(m));
        EstimateReport {
            id: id.into(),
            lhs: Quantity::Field { field: lhs },
            rhs: Quantity::Field { field: rhs },
            worst_margin: worst,
            pass: worst >= -tol,
            tol,
            constants: BTreeMap::new(),
            resolution,
            notes: Vec::new(),
        }
    }

    pub fn from_scalars(id: &str, lhs: f64, rhs: f64, tol: f64) -> Self {
        let worst = rhs - lhs;
        EstimateReport {
            id: id.into(),
            lhs: Quantity::scalar(lhs),
            rhs: Quantity::scalar(rhs),
            worst_margin: worst,
            pass: worst >= -tol,
            tol,
            constants: BTreeMap::new(),
            resolution: ResolutionMeta::default(),
            notes: Vec::new(),
        }
    }

    pub fn with_constant(mut self, key: &str, value: f64) -> Self {
        self.constants.insert(key.into(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Result of a smoothing-rate regression: fitted slope of
/// `log ||D^m u(s + tau)||_inf` against `log tau` versus the predicted
/// `-(m - h) / 2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub h_order: u8,
    pub m_order: u8,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub slope: f64,
    pub predicted: f64,
    pub deviation: f64,
    pub fit_residual: f64,
    pub resolution: ResolutionMeta,
    pub notes: Vec<String>,
}

/// Result of a decay-rate regression against the moving family of measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub p: f64,
    /// Fitted slope of `log ||G(t,s)f - mean_s f||_{L^p(mu_t)}` in `t - s`.
    pub rate: f64,
    /// Fitted slope for `log ||grad G(t,s)f||_{L^p(mu_t)}`.
    pub gradient_rate: f64,
    pub fit_residual: f64,
    pub gradient_fit_residual: f64,
    pub sample_times: Vec<f64>,
    pub norms: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    pub notes: Vec<String>,
}
