//! Explicit constant calculators: growth exponents for the pointwise
//! derivative estimates, the smoothing prefactor for order-lowering
//! estimates, the entropy (log-Sobolev) constant and the summability
//! threshold. All calculators are pure functions of their inputs.

use crate::error::{KlabError, Result};
use crate::operator::{self, HypothesisProfile, OperatorSpec, SamplingWindow};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Inputs for the constant formulas. `nu_samples` stands in for the range of
/// the smallest diffusion eigenvalue over the (window-approximated) domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantInputs {
    pub d: usize,
    pub p: f64,
    pub k: u8,
    pub gamma: f64,
    pub nu0: f64,
    pub c0: f64,
    /// C in `|D^beta q| <= C nu^gamma`.
    pub big_c: f64,
    /// K in the second-derivative form bound.
    pub k_form: f64,
    /// M in the combined dissipation bound.
    pub m: f64,
    /// L in the combined dissipation bound.
    pub l: f64,
    pub r0: f64,
    pub lambda0: f64,
    /// M_2 / M_3 for the gradient-chain exponents.
    pub m2: f64,
    pub m3: f64,
    /// Sampled values of nu; suprema are taken over this list.
    pub nu_samples: Vec<f64>,
    /// Proof parameters of the order-lowering prefactor, with the
    /// documented defaults alpha = 4, k1 = 1, k2 = 1. Any fixed admissible
    /// choice yields a valid prefactor shape.
    pub alpha: f64,
    pub k1_weight: f64,
    pub k2_weight: f64,
}

impl Default for ConstantInputs {
    fn default() -> Self {
        ConstantInputs {
            d: 1,
            p: 2.0,
            k: 1,
            gamma: 0.5,
            nu0: 1.0,
            c0: 0.0,
            big_c: 0.0,
            k_form: 0.0,
            m: 0.0,
            l: 1.0,
            r0: 0.0,
            lambda0: 1.0,
            m2: 0.0,
            m3: 0.0,
            nu_samples: vec![1.0],
            alpha: 4.0,
            k1_weight: 1.0,
            k2_weight: 1.0,
        }
    }
}

impl ConstantInputs {
    /// Builds inputs by sampling an operator on a window: nu over the
    /// lattice, declared parameters where present, window suprema otherwise.
    pub fn from_spec_window(
        spec: &OperatorSpec,
        window: &SamplingWindow,
        p: f64,
        k: u8,
    ) -> Result<Self> {
        let gamma = spec.params.gamma.unwrap_or(0.5);
        let mut nu_samples = Vec::new();
        let mut nu0 = f64::INFINITY;
        let mut c0 = f64::NEG_INFINITY;
        let mut r0 = f64::NEG_INFINITY;
        let mut big_c = 0.0f64;
        let mut r_bound = 0.0f64;
        let mut rho = 0.0f64;
        let mut k_form = f64::NEG_INFINITY;
        let mut lambda0 = f64::NEG_INFINITY;
        for (t, x) in window.iter_points(spec.dim) {
            let nu = spec.nu(t, &x);
            nu_samples.push(nu);
            nu0 = nu0.min(nu);
            c0 = c0.max(spec.c_value(t, &x));
            r0 = r0.max(operator::jacobian_upper(spec, t, &x)?);
            lambda0 = lambda0.max(crate::linalg::max_eigenvalue(
                &spec.q_matrix(t, &x),
                spec.dim,
            ));
            for order in [1u8, 3].into_iter().filter(|&o| o <= k) {
                big_c = big_c.max(operator::max_q_derivative(spec, order, t, &x)? / nu.powf(gamma));
            }
            for order in 2..=k {
                r_bound = r_bound.max(operator::max_b_derivative(spec, order, t, &x)?);
            }
            for order in 0..=k {
                rho = rho.max(operator::max_c_derivative(spec, order, t, &x)?);
            }
            if k >= 2 {
                k_form =
                    k_form.max(operator::second_form_upper(spec, t, &x)? / nu.powf(gamma));
            }
        }
        if spec.potential_vanishes(window) {
            rho = rho.max(spec.params.epsilon_rho());
        }
        let l = spec.params.l.unwrap_or(1.0);
        let nu0 = spec.params.nu0.unwrap_or(nu0);
        let r0 = spec.params.r0.unwrap_or(r0);
        let big_c = spec.params.diffusion_deriv_bound.unwrap_or(big_c);
        let m_needed = nu_samples
            .iter()
            .map(|nu| {
                (r0 + operator::dissipation_weight(k, spec.dim) * r_bound + l * rho * rho)
                    / nu.powf(gamma)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let mk_needed = |kk: u8| {
            nu_samples
                .iter()
                .map(|nu| {
                    (r0 + operator::dissipation_weight(kk, spec.dim) * r_bound) / nu.powf(gamma)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        Ok(ConstantInputs {
            d: spec.dim,
            p,
            k,
            gamma,
            nu0,
            c0: spec.params.c0.unwrap_or(c0),
            big_c,
            k_form: spec.params.k_form.unwrap_or(if k >= 2 { k_form } else { 0.0 }),
            m: spec.params.m.unwrap_or(m_needed),
            l,
            r0,
            lambda0: spec.params.lambda0.unwrap_or(lambda0),
            m2: spec.params.m2.unwrap_or_else(|| mk_needed(2)),
            m3: spec.params.m3.unwrap_or_else(|| mk_needed(3)),
            nu_samples,
            ..ConstantInputs::default()
        })
    }

    fn sup_over_nu(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        if self.nu_samples.is_empty() {
            return Err(KlabError::Domain(
                "missing sup term: no nu samples supplied".into(),
            ));
        }
        Ok(self
            .nu_samples
            .iter()
            .map(|&nu| f(nu))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

/// Value of one constant formula together with the intermediates it was
/// assembled from; `recombine` replays the final combination step exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantReport {
    pub formula: String,
    pub value: f64,
    pub intermediates: BTreeMap<String, f64>,
}

impl ConstantReport {
    fn new(formula: &str, value: f64, intermediates: BTreeMap<String, f64>) -> Self {
        ConstantReport {
            formula: formula.into(),
            value,
            intermediates,
        }
    }

    /// Recomputes the final value from the recorded intermediates. The result
    /// is bit-identical to `value` for every formula this crate emits.
    pub fn recombine(&self) -> Option<f64> {
        let get = |k: &str| self.intermediates.get(k).copied();
        match self.formula.as_str() {
            "sigma_kp" => {
                if let Some(sigma_k2) = get("sigma_k2") {
                    Some(get("p")? * sigma_k2 / 2.0)
                } else {
                    let bracket = get("p")? * get("sup_term")?
                        + get("c0")? * (get("p")? - 1.0)
                        + get("p")? * get("c_dk")?;
                    Some(bracket.max(0.0))
                }
            }
            "phi_pk" => {
                if let Some(v) = get("sup_term") {
                    Some(v)
                } else {
                    let mut m = f64::NEG_INFINITY;
                    for key in ["c1_at_opt", "c2_at_opt", "c3_at_opt"] {
                        if let Some(v) = get(key) {
                            m = m.max(v);
                        }
                    }
                    Some(m)
                }
            }
            "gamma_p23" => Some(get("prefactor")? * get("brace")?),
            "hypercontractivity_threshold" => {
                Some(get("lambda0")? * get("log_ratio")? / (2.0 * get("nu0")? * get("abs_r0")?))
            }
            "log_sobolev_constant" => {
                Some(get("p")? * get("p")? * get("lambda0")? / (2.0 * get("abs_r0")?))
            }
            _ => None,
        }
    }
}

/// Coefficient `c_{d,k}` of the same-order growth exponent.
pub fn c_dk(d: usize, k: u8, l: f64) -> f64 {
    let d = d as f64;
    match k {
        1 => d / (4.0 * l),
        2 => 3.0 * d * d / (4.0 * l),
        3 => 7.0 * d * d * (5.0f64.max(3.0 * d * d)) / (12.0 * l),
        _ => panic!("order k must be 1, 2 or 3"),
    }
}

/// Coefficient `c_k(p)` of the same-order growth exponent for p in (1, 2].
pub fn c_k_of_p(inputs: &ConstantInputs) -> f64 {
    let d = inputs.d as f64;
    let p = inputs.p;
    let (c, k_form, m) = (inputs.big_c, inputs.k_form, inputs.m);
    let nu0_up = inputs.nu0.powf(inputs.gamma - 1.0);
    let nu0_down = inputs.nu0.powf(1.0 - inputs.gamma);
    match inputs.k {
        1 => c * c * d.powi(3) * nu0_up / (4.0 * (p - 1.0)) + m,
        2 => {
            let first = c * c * d.powi(3) * nu0_up / (2.0 * (p - 1.0)) + m;
            let second = (p - 1.0) / 2.0 * nu0_down
                + c * c * d.powi(3) * nu0_up / (p - 1.0)
                + k_form
                + 2.0 * m;
            first.max(second)
        }
        3 => {
            let k1 = 3.0 * c * c * d.powi(3) * nu0_up / (4.0 * (p - 1.0)) + m;
            let k2 = (p - 1.0) / 3.0 * nu0_down
                + 3.0 * c * c * d.powi(3) * (d + 2.0) * nu0_up / (4.0 * (p - 1.0))
                + k_form
                + 2.0 * m;
            let k3 = (d + 2.0) * (p - 1.0) / 3.0 * nu0_down
                + 3.0 * c * c * d.powi(3) * nu0_up / (4.0 * (p - 1.0))
                + 3.0 * k_form
                + 3.0 * m;
            k1.max(k2).max(k3)
        }
        _ => panic!("order k must be 1, 2 or 3"),
    }
}

/// Growth exponent of the same-order pointwise estimate
/// `|D^k G(t,s)f|^p <= e^{sigma_kp (t-s)} G(t,s)(sum_j |D^j f|^2)^{p/2}`.
///
/// For p in (1, 2] this is the positive part of
/// `p sup[(1-p) nu + c_k(p) nu^gamma] + c0 (p-1) + p c_{d,k}`;
/// for p > 2 it is `p sigma_{k,2} / 2`.
pub fn sigma_kp(inputs: &ConstantInputs) -> Result<ConstantReport> {
    if !(1..=3).contains(&inputs.k) {
        return Err(KlabError::Domain("order k must be 1, 2 or 3".into()));
    }
    if inputs.p <= 1.0 {
        return Err(KlabError::Domain(
            "p <= 1 unsupported here (use the p = 1 pathway)".into(),
        ));
    }
    let mut inter = BTreeMap::new();
    inter.insert("p".into(), inputs.p);
    if inputs.p > 2.0 {
        let mut at2 = inputs.clone();
        at2.p = 2.0;
        let base = sigma_kp(&at2)?;
        inter.insert("sigma_k2".into(), base.value);
        let value = inputs.p * base.value / 2.0;
        return Ok(ConstantReport::new("sigma_kp", value, inter));
    }
    let ck = c_k_of_p(inputs);
    let cdk = c_dk(inputs.d, inputs.k, inputs.l);
    let gamma = inputs.gamma;
    let p = inputs.p;
    let sup_term = inputs.sup_over_nu(|nu| (1.0 - p) * nu + ck * nu.powf(gamma))?;
    inter.insert("c_k_p".into(), ck);
    inter.insert("c_dk".into(), cdk);
    inter.insert("sup_term".into(), sup_term);
    inter.insert("c0".into(), inputs.c0);
    let bracket = p * sup_term + inputs.c0 * (p - 1.0) + p * cdk;
    inter.insert("bracket".into(), bracket);
    Ok(ConstantReport::new("sigma_kp", bracket.max(0.0), inter))
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Growth exponent of the gradient-chain estimate
/// `|D^k G(t,s)f|^p <= Gamma(t-s) G(t,s)(sum_{j=1..k} |D^j f|^2)^{p/2}`.
///
/// k = 1 is a plain supremum; k = 2, 3 minimise the maximum of the
/// competing coefficient functions over the free splitting parameter.
pub fn phi_pk(inputs: &ConstantInputs) -> Result<ConstantReport> {
    let d = inputs.d as f64;
    let p = inputs.p;
    if p <= 1.0 {
        return Err(KlabError::Domain("p must exceed 1".into()));
    }
    let gamma = inputs.gamma;
    let nu0_up = inputs.nu0.powf(gamma - 1.0);
    let c = inputs.big_c;
    let mut inter = BTreeMap::new();
    match inputs.k {
        1 => {
            let coeff = c * c * d.powi(3) * nu0_up / (4.0 * (p - 1.0));
            let sup = inputs.sup_over_nu(|nu| inputs.r0 + coeff * nu.powf(gamma))?;
            inter.insert("sup_term".into(), sup);
            inter.insert("coeff".into(), coeff);
            Ok(ConstantReport::new("phi_pk", sup, inter))
        }
        2 | 3 => {
            let mk = if inputs.k == 2 { inputs.m2 } else { inputs.m3 };
            let k_form = inputs.k_form;
            let nu0_gamma = inputs.nu0.powf(gamma);
            let c1 = move |e0: f64| (c * d * d / (4.0 * e0) + mk) * nu0_gamma;
            let inputs_c = inputs.clone();
            let c2 = move |e0: f64| -> f64 {
                let coeff = if inputs_c.k == 2 {
                    c * e0 * d + c * c * d.powi(3) * nu0_up / (p - 1.0) + k_form + 2.0 * mk
                } else {
                    c * e0 * d
                        + 3.0 * c * c * d.powi(3) * (2.0 + d) * nu0_up / (4.0 * (p - 1.0))
                        + k_form
                        + 2.0 * mk
                };
                inputs_c
                    .sup_over_nu(|nu| (1.0 - p) * nu + coeff * nu.powf(gamma))
                    .unwrap_or(f64::NEG_INFINITY)
            };
            let inputs_c3 = inputs.clone();
            let c3 = move |_e0: f64| -> f64 {
                if inputs_c3.k == 2 {
                    return f64::NEG_INFINITY;
                }
                let coeff = (2.0 + d) * (p - 1.0) / 3.0 * nu0_up
                    + 9.0 * c * c * d.powi(3) / (4.0 * (p - 1.0) * nu0_up)
                    + 3.0 * k_form
                    + 3.0 * mk;
                inputs_c3
                    .sup_over_nu(|nu| (1.0 - p) * nu + coeff * nu.powf(gamma))
                    .unwrap_or(f64::NEG_INFINITY)
            };

            if c == 0.0 {
                // Splitting parameter drops out entirely.
                let v1 = mk * nu0_gamma;
                let v2 = c2(0.0);
                let v3 = c3(0.0);
                inter.insert("c1_at_opt".into(), v1);
                inter.insert("c2_at_opt".into(), v2);
                if inputs.k == 3 {
                    inter.insert("c3_at_opt".into(), v3);
                }
                return Ok(ConstantReport::new("phi_pk", v1.max(v2).max(v3), inter));
            }

            let lower = if mk < 0.0 {
                -c * d * d / (4.0 * mk)
            } else if mk > 0.0 {
                0.0
            } else {
                return Err(KlabError::EmptyInterval(format!(
                    "splitting constraint epsilon0 > -C d^2 / (4 m_{}) is undefined for m_{} = 0",
                    inputs.k, inputs.k
                )));
            };
            let objective = |e0: f64| c1(e0).max(c2(e0)).max(c3(e0));
            // Expand the bracket until the objective starts growing again.
            let mut hi = lower + 1.0 + lower.abs();
            let mut best = objective(hi);
            for _ in 0..60 {
                let next = lower + 2.0 * (hi - lower);
                let v = objective(next);
                if v > best {
                    hi = next;
                    break;
                }
                best = v;
                hi = next;
            }
            let lo = lower + 1e-9 * (1.0 + lower.abs());
            let opt = golden_min(&objective, lo, hi, 1e-10);
            let v1 = c1(opt);
            let v2 = c2(opt);
            inter.insert("epsilon0".into(), opt);
            inter.insert("c1_at_opt".into(), v1);
            inter.insert("c2_at_opt".into(), v2);
            let mut value = v1.max(v2);
            if inputs.k == 3 {
                let v3 = c3(opt);
                inter.insert("c3_at_opt".into(), v3);
                value = value.max(v3);
            }
            Ok(ConstantReport::new("phi_pk", value, inter))
        }
        _ => Err(KlabError::Domain("order k must be 1, 2 or 3".into())),
    }
}

/// `(e^{sigma r} - 1) / sigma`, continuously extended across sigma = 0.
fn exp_ratio(sigma: f64, r: f64) -> f64 {
    if sigma.abs() < 1e-12 {
        r
    } else {
        ((sigma * r).exp() - 1.0) / sigma
    }
}

/// One order-lowering prefactor step built from the growth exponents of the
/// target order (`sigma_hi`) and the order below (`sigma_lo`).
#[allow(clippy::too_many_arguments)]
pub fn gamma_step(
    r: f64,
    sigma_hi: f64,
    sigma_lo: f64,
    p: f64,
    alpha: f64,
    k1: f64,
    k2: f64,
) -> Result<f64> {
    if r <= 0.0 {
        return Err(KlabError::Domain("r must be positive".into()));
    }
    let prefactor = if sigma_hi.abs() < 1e-12 {
        1.0 / r
    } else {
        sigma_hi / (1.0 - (-sigma_hi * r).exp())
    };
    let e = exp_ratio(sigma_lo, r);
    let brace = (alpha / k1 * (1.0 + k2 * e)).powf(p / 2.0) * e.powf(1.0 - p / 2.0) + r;
    Ok(prefactor * brace)
}

/// Prefactor of the order-lowering estimate from second to third derivatives:
/// `|D^3 G(t,s)f|^p <= Gamma_{p,2,3}(t-s) G(t,s)(sum_{j=0..2} |D^j f|^2)^{p/2}`.
pub fn gamma_p23(r: f64, inputs: &ConstantInputs) -> Result<ConstantReport> {
    let mut i2 = inputs.clone();
    i2.k = 2;
    let mut i3 = inputs.clone();
    i3.k = 3;
    let sigma2 = sigma_kp(&i2)?.value;
    let sigma3 = sigma_kp(&i3)?.value;
    gamma_p23_with(r, sigma2, sigma3, inputs.p, inputs.alpha, inputs.k1_weight, inputs.k2_weight)
}

/// Same as [`gamma_p23`] with the growth exponents supplied directly.
#[allow(clippy::too_many_arguments)]
pub fn gamma_p23_with(
    r: f64,
    sigma2: f64,
    sigma3: f64,
    p: f64,
    alpha: f64,
    k1: f64,
    k2: f64,
) -> Result<ConstantReport> {
    if r <= 0.0 {
        return Err(KlabError::Domain("r must be positive".into()));
    }
    let prefactor = if sigma3.abs() < 1e-12 {
        1.0 / r
    } else {
        sigma3 / (1.0 - (-sigma3 * r).exp())
    };
    let e = exp_ratio(sigma2, r);
    let brace = (alpha / k1 * (1.0 + k2 * e)).powf(p / 2.0) * e.powf(1.0 - p / 2.0) + r;
    let mut inter = BTreeMap::new();
    inter.insert("sigma2".into(), sigma2);
    inter.insert("sigma3".into(), sigma3);
    inter.insert("prefactor".into(), prefactor);
    inter.insert("brace".into(), brace);
    Ok(ConstantReport::new("gamma_p23", prefactor * brace, inter))
}

/// Composite prefactor for lowering two orders, obtained by chaining two
/// half-interval single-step prefactors:
/// `Gamma_{p,1,3}(r) = Gamma_{p,2,3}(r/2) Gamma_{p,1,2}(r/2)`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_p13_composite(
    r: f64,
    sigma1: f64,
    sigma2: f64,
    sigma3: f64,
    p: f64,
    alpha: f64,
    k1: f64,
    k2: f64,
) -> Result<f64> {
    let a = gamma_step(r / 2.0, sigma3, sigma2, p, alpha, k1, k2)?;
    let b = gamma_step(r / 2.0, sigma2, sigma1, p, alpha, k1, k2)?;
    Ok(a * b)
}

/// Time after which the evolution operator contracts `L^p` into `L^q`:
/// `Lambda_0 log((q-1)/(p-1)) / (2 nu_0 |r_0|)`.
pub fn hypercontractivity_threshold(
    p: f64,
    q: f64,
    lambda0: f64,
    nu0: f64,
    r0: f64,
) -> Result<ConstantReport> {
    if !(1.0 < p && p < q) {
        return Err(KlabError::Domain("need 1 < p < q".into()));
    }
    if r0 >= 0.0 {
        return Err(KlabError::Domain(
            "gradient estimate of negative type required (r0 < 0)".into(),
        ));
    }
    if !(lambda0 >= nu0 && nu0 > 0.0) {
        return Err(KlabError::Domain("need lambda0 >= nu0 > 0".into()));
    }
    let log_ratio = ((q - 1.0) / (p - 1.0)).ln();
    let abs_r0 = r0.abs();
    let value = lambda0 * log_ratio / (2.0 * nu0 * abs_r0);
    let mut inter = BTreeMap::new();
    inter.insert("lambda0".into(), lambda0);
    inter.insert("log_ratio".into(), log_ratio);
    inter.insert("nu0".into(), nu0);
    inter.insert("abs_r0".into(), abs_r0);
    Ok(ConstantReport::new(
        "hypercontractivity_threshold",
        value,
        inter,
    ))
}

/// Entropy constant `C_p = p^2 Lambda_0 / (2 |r_0|)` of the logarithmic
/// Sobolev inequality; `C_2 / 2` is the matching Poincare factor.
pub fn log_sobolev_constant(p: f64, lambda0: f64, r0: f64) -> Result<ConstantReport> {
    if p <= 1.0 {
        return Err(KlabError::Domain("p must exceed 1".into()));
    }
    if r0 >= 0.0 {
        return Err(KlabError::Domain(
            "gradient estimate of negative type required (r0 < 0)".into(),
        ));
    }
    if lambda0 <= 0.0 {
        return Err(KlabError::Domain("lambda0 must be positive".into()));
    }
    let abs_r0 = r0.abs();
    let value = p * p * lambda0 / (2.0 * abs_r0);
    let mut inter = BTreeMap::new();
    inter.insert("p".into(), p);
    inter.insert("lambda0".into(), lambda0);
    inter.insert("abs_r0".into(), abs_r0);
    Ok(ConstantReport::new("log_sobolev_constant", value, inter))
}

/// Growth exponent Gamma^(1) of the gradient-chain estimate, as used by the
/// verifier: `Gamma^(1)_{p,k}(r) = exp(p phi_{p,k} r)`. The `p` factor comes
/// from the differential inequality the exponent is extracted from.
pub fn chain_prefactor(p: f64, phi: f64, r: f64) -> f64 {
    (p * phi * r).exp()
}

/// Hypothesis profile whose validity backs a given estimate variant.
pub fn profile_for_estimate(variant: &str, k: u8) -> Option<HypothesisProfile> {
    match variant {
        "aa" => Some(HypothesisProfile::GradientChain { k }),
        "aaaa" => Some(HypothesisProfile::WeightedDerivativeBounds { k }),
        "p1" => Some(HypothesisProfile::UnitExponent { k }),
        _ => None,
    }
}
