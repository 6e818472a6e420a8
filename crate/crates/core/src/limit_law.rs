//! Limiting radial laws of scaled spectra: the smooth Type I family
//! F(x) = exp(-sum_k (c_k/k)(1-x)^k) on (0,1], and the two degenerate limits
//! (point mass at 1, point mass at 0). Provides F, its generalized inverse
//! F*, the densities f and f*, the planar density f*(r)/(2 pi r), preset laws
//! with known closed forms, and a heuristic classifier that decides which of
//! the three limits a dimension family approaches.
//!
//! A note on roles: F* is the cumulative distribution function of the scaled
//! radius, and F restricted to [0,1] is its quantile function (the two are
//! generalized inverses of each other). Goodness-of-fit code therefore feeds
//! `f_star_eval` to KS tests and `f_eval` to quantile-matching distances.

use crate::chain_spec::{ChainError, DimensionFamily, GammaRule};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Absolute truncation target for adaptively summed coefficient series.
const SERIES_TOL: f64 = 1e-14;
/// Hard cap on adaptive series terms; unreachable for the declared sources
/// (their residual coefficients decay geometrically) but keeps evaluation
/// total for adversarial callables.
const SERIES_CAP: usize = 50_000_000;
/// Bisection interval width for the generalized inverse.
const BISECT_TOL: f64 = 1e-12;
/// Bisection iteration cap; 2^-200 is far below BISECT_TOL, so hitting the
/// cap means the law evaluator returned non-finite values.
const BISECT_MAX_ITER: usize = 200;
/// Coefficient prefix length checked when validating callable sources.
const CALLABLE_CHECK_PREFIX: usize = 64;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LawError {
    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),
    #[error("{op} is undefined for a degenerate law (point-mass distribution)")]
    TypeError { op: &'static str },
    #[error("{op}: argument {x} outside {domain}")]
    DomainError {
        op: &'static str,
        x: f64,
        domain: String,
    },
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("closed-form coefficient sources have no exact wire representation")]
    Unserializable,
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// Declared continuation of a coefficient sequence past its explicit head.
///
/// The declaration is what makes the convergence of sum c_k/k decidable
/// analytically; it is never inferred from finitely many values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TailRule {
    /// c_k = 0 beyond the head.
    Zero,
    /// c_k = c beyond the head; sum c_k/k diverges when c > 0, so F(0+) = 0.
    Constant { c: f64 },
    /// c_k = c * rho^k beyond the head, 0 < rho < 1.
    Geometric { c: f64, rho: f64 },
}

/// Coefficients c_1, c_2, ... of a Type I law: either an explicit head with
/// a declared tail rule, or a closed-form callable k -> c_k together with its
/// declared limit L = lim_k c_k (which exists: the sequence is non-increasing
/// and bounded below). For callables the series splits as
/// L * (-ln x) + sum (c_k - L)(1-x)^k / k, so the divergence of sum c_k/k is
/// again decided analytically (it diverges iff L > 0).
#[derive(Clone)]
pub enum CoefficientSource {
    Explicit {
        head: Vec<f64>,
        tail: TailRule,
    },
    Callable {
        eval: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
        tail_limit: f64,
    },
}

impl fmt::Debug for CoefficientSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientSource::Explicit { head, tail } => f
                .debug_struct("Explicit")
                .field("head", head)
                .field("tail", tail)
                .finish(),
            CoefficientSource::Callable { tail_limit, .. } => f
                .debug_struct("Callable")
                .field("tail_limit", tail_limit)
                .finish_non_exhaustive(),
        }
    }
}

impl CoefficientSource {
    /// c_k for k >= 1.
    pub fn coefficient(&self, k: usize) -> f64 {
        assert!(k >= 1, "coefficients are indexed from 1");
        match self {
            CoefficientSource::Explicit { head, tail } => {
                if k <= head.len() {
                    head[k - 1]
                } else {
                    match *tail {
                        TailRule::Zero => 0.0,
                        TailRule::Constant { c } => c,
                        TailRule::Geometric { c, rho } => c * rho.powi(k as i32),
                    }
                }
            }
            CoefficientSource::Callable { eval, .. } => eval(k),
        }
    }

    fn validate(&self) -> Result<(), LawError> {
        let err = |msg: String| Err(LawError::InvalidCoefficients(msg));
        match self {
            CoefficientSource::Explicit { head, tail } => {
                match *tail {
                    TailRule::Zero => {}
                    TailRule::Constant { c } => {
                        if !(c >= 0.0) || !c.is_finite() {
                            return err(format!("constant tail value {c} must be finite and >= 0"));
                        }
                    }
                    TailRule::Geometric { c, rho } => {
                        if !(c >= 0.0) || !c.is_finite() {
                            return err(format!("geometric tail scale {c} must be finite and >= 0"));
                        }
                        if !(rho > 0.0 && rho < 1.0) {
                            return err(format!(
                                "geometric tail ratio {rho} must lie in (0, 1); \
                                 a ratio of 1 is the constant tail"
                            ));
                        }
                    }
                }
                for (i, &c) in head.iter().enumerate() {
                    if !c.is_finite() || c < 0.0 {
                        return err(format!("c_{} = {c} must be finite and >= 0", i + 1));
                    }
                }
                let c1 = self.coefficient(1);
                if !(c1 > 0.0) || !c1.is_finite() {
                    return err(format!("c_1 = {c1} must lie in (0, inf)"));
                }
                // Non-increasing from k = 2 on, and bounded by c_1 throughout.
                // The tail only needs checking at its first index: both tail
                // shapes are non-increasing on their own.
                let check_len = head.len() + 2;
                let mut prev = f64::INFINITY;
                for k in 2..=check_len {
                    let c = self.coefficient(k);
                    if c > c1 {
                        return err(format!("c_{k} = {c} exceeds c_1 = {c1}"));
                    }
                    if c > prev {
                        return err(format!("c_{k} = {c} exceeds c_{} = {prev}", k - 1));
                    }
                    prev = c;
                }
                Ok(())
            }
            CoefficientSource::Callable { eval, tail_limit } => {
                let limit = *tail_limit;
                if !(limit >= 0.0) || !limit.is_finite() {
                    return err(format!("tail limit {limit} must be finite and >= 0"));
                }
                let c1 = eval(1);
                if !(c1 > 0.0) || !c1.is_finite() {
                    return err(format!("c_1 = {c1} must lie in (0, inf)"));
                }
                let mut prev = f64::INFINITY;
                for k in 2..=CALLABLE_CHECK_PREFIX {
                    let c = eval(k);
                    if !c.is_finite() || c < 0.0 || c > c1 {
                        return err(format!("c_{k} = {c} outside [0, c_1 = {c1}]"));
                    }
                    if c > prev {
                        return err(format!("c_{k} = {c} exceeds c_{}", k - 1));
                    }
                    if c < limit {
                        return err(format!("c_{k} = {c} drops below the declared limit {limit}"));
                    }
                    prev = c;
                }
                Ok(())
            }
        }
    }

    /// sum_k (c_k/k) (1-x)^k for x in (0, 1]. Exact tail closed forms for
    /// explicit sources; adaptive truncation (absolute error < SERIES_TOL)
    /// for callables.
    fn exponent(&self, x: f64) -> f64 {
        debug_assert!(x > 0.0 && x <= 1.0);
        let t = 1.0 - x;
        match self {
            CoefficientSource::Explicit { head, tail } => {
                let mut sum = 0.0;
                let mut t_pow = 1.0;
                for (i, &c) in head.iter().enumerate() {
                    t_pow *= t;
                    sum += c * t_pow / (i + 1) as f64;
                }
                let kk = head.len();
                sum + match *tail {
                    TailRule::Zero => 0.0,
                    TailRule::Constant { c } => {
                        if c == 0.0 {
                            0.0
                        } else {
                            // sum_{k>K} t^k/k = -ln(1-t) - S_K(t).
                            c * (-x.ln() - log_series_partial(t, kk))
                        }
                    }
                    TailRule::Geometric { c, rho } => {
                        if c == 0.0 {
                            0.0
                        } else {
                            let u = rho * t;
                            c * (-(-u).ln_1p() - log_series_partial(u, kk))
                        }
                    }
                }
            }
            CoefficientSource::Callable { eval, tail_limit } => {
                let limit = *tail_limit;
                let mut sum = if limit > 0.0 { limit * -x.ln() } else { 0.0 };
                if t == 0.0 {
                    return sum;
                }
                let mut t_pow = 1.0;
                for k in 1..=SERIES_CAP {
                    t_pow *= t;
                    let residual = eval(k) - limit;
                    sum += residual * t_pow / k as f64;
                    // Residual coefficients are non-increasing, so the
                    // dropped tail is below residual * t^{k+1}/((k+1)(1-t)).
                    let bound = residual * t_pow * t / ((k + 1) as f64 * x);
                    if bound < SERIES_TOL {
                        break;
                    }
                }
                sum
            }
        }
    }

    /// sum_k c_k (1-x)^{k-1}, the derivative of the exponent with the sign
    /// flipped; may legitimately be +inf (constant tails at x = 0).
    fn derivative_series(&self, x: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&x));
        let t = 1.0 - x;
        match self {
            CoefficientSource::Explicit { head, tail } => {
                let mut sum = 0.0;
                let mut t_pow = 1.0;
                for &c in head {
                    sum += c * t_pow;
                    t_pow *= t;
                }
                let kk = head.len();
                sum + match *tail {
                    TailRule::Zero => 0.0,
                    TailRule::Constant { c } => {
                        // sum_{k>K} c t^{k-1} = c t^K / x; +inf at x = 0.
                        if c == 0.0 {
                            0.0
                        } else {
                            c * t.powi(kk as i32) / x
                        }
                    }
                    TailRule::Geometric { c, rho } => {
                        if c == 0.0 {
                            0.0
                        } else if t == 0.0 {
                            if kk == 0 {
                                c * rho
                            } else {
                                0.0
                            }
                        } else {
                            let u = rho * t;
                            (c / t) * u.powi(kk as i32 + 1) / (1.0 - u)
                        }
                    }
                }
            }
            CoefficientSource::Callable { eval, tail_limit } => {
                let limit = *tail_limit;
                let mut sum = if limit > 0.0 {
                    if x == 0.0 {
                        return f64::INFINITY;
                    }
                    limit / x
                } else {
                    0.0
                };
                let mut t_pow = 1.0;
                for k in 1..=SERIES_CAP {
                    let residual = eval(k) - limit;
                    let term = residual * t_pow;
                    sum += term;
                    t_pow *= t;
                    let bound = if x > 0.0 {
                        residual * t_pow / x
                    } else {
                        // x = 0 is reachable only for convergent residuals;
                        // fall back to a term test once terms are decaying.
                        if k >= 8 && term < 1e-16 * (1.0 + sum) {
                            -1.0
                        } else {
                            f64::INFINITY
                        }
                    };
                    if bound < SERIES_TOL {
                        break;
                    }
                }
                sum
            }
        }
    }

    /// exp(-sum c_k/k), with divergence decided from the declared tail.
    fn f_zero(&self) -> f64 {
        match self {
            CoefficientSource::Explicit { head, tail } => {
                let mut sum: f64 = head
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| c / (i + 1) as f64)
                    .sum();
                let kk = head.len();
                match *tail {
                    TailRule::Zero => {}
                    TailRule::Constant { c } => {
                        if c > 0.0 {
                            return 0.0;
                        }
                    }
                    TailRule::Geometric { c, rho } => {
                        sum += c * (-(-rho).ln_1p() - log_series_partial(rho, kk));
                    }
                }
                (-sum).exp()
            }
            CoefficientSource::Callable { eval, tail_limit } => {
                if *tail_limit > 0.0 {
                    return 0.0;
                }
                // Declared limit 0: callers guarantee sum c_k/k converges.
                let mut sum = 0.0;
                for k in 1..=1_000_000usize {
                    let term = eval(k) / k as f64;
                    sum += term;
                    if term < 1e-17 {
                        break;
                    }
                }
                (-sum).exp()
            }
        }
    }
}

/// S_K(u) = sum_{k=1..K} u^k/k, the partial sum subtracted from -ln(1-u)
/// when a tail starts after an explicit head.
fn log_series_partial(u: f64, kk: usize) -> f64 {
    let mut sum = 0.0;
    let mut u_pow = 1.0;
    for k in 1..=kk {
        u_pow *= u;
        sum += u_pow / k as f64;
    }
    sum
}

/// Discriminates the three possible limits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LawType {
    TypeI,
    TypeII,
    TypeIII,
}

#[derive(Clone, Debug)]
enum LawKind {
    /// Smooth law on [0, 1] with F(0+) = f_zero.
    TypeI {
        coeffs: CoefficientSource,
        f_zero: f64,
    },
    /// Radial distribution degenerate at 1 (all mass on the unit circle).
    TypeII,
    /// Radial distribution degenerate at 0.
    TypeIII,
}

/// One of the three limiting radial laws. Type I laws are built through
/// [`build_type1`] (or a [`Preset`]), which validates the coefficients and
/// fixes F(0+).
#[derive(Clone, Debug)]
pub struct LimitLaw {
    kind: LawKind,
}

/// Validates the coefficient source and assembles the smooth law.
pub fn build_type1(coeffs: CoefficientSource) -> Result<LimitLaw, LawError> {
    coeffs.validate()?;
    let f_zero = coeffs.f_zero();
    Ok(LimitLaw {
        kind: LawKind::TypeI { coeffs, f_zero },
    })
}

impl LimitLaw {
    /// The law whose radial distribution is the point mass at 1.
    pub fn type2() -> Self {
        LimitLaw { kind: LawKind::TypeII }
    }

    /// The law whose radial distribution is the point mass at 0.
    pub fn type3() -> Self {
        LimitLaw { kind: LawKind::TypeIII }
    }

    pub fn type_tag(&self) -> LawType {
        match self.kind {
            LawKind::TypeI { .. } => LawType::TypeI,
            LawKind::TypeII => LawType::TypeII,
            LawKind::TypeIII => LawType::TypeIII,
        }
    }

    /// F(0+); the inner radius of the support of the planar law. None for
    /// degenerate laws.
    pub fn f_zero(&self) -> Option<f64> {
        match &self.kind {
            LawKind::TypeI { f_zero, .. } => Some(*f_zero),
            _ => None,
        }
    }

    pub fn coefficients(&self) -> Option<&CoefficientSource> {
        match &self.kind {
            LawKind::TypeI { coeffs, .. } => Some(coeffs),
            _ => None,
        }
    }

    fn type1(&self, op: &'static str) -> Result<(&CoefficientSource, f64), LawError> {
        match &self.kind {
            LawKind::TypeI { coeffs, f_zero } => Ok((coeffs, *f_zero)),
            _ => Err(LawError::TypeError { op }),
        }
    }

    fn f_value(coeffs: &CoefficientSource, f_zero: f64, x: f64) -> f64 {
        if x < 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else if x == 0.0 {
            f_zero
        } else {
            (-coeffs.exponent(x)).exp()
        }
    }

    /// F(x) = exp(-sum (c_k/k)(1-x)^k), extended by 0 below 0 and 1 above 1;
    /// F(0) is the jump value F(0+).
    pub fn f_eval(&self, x: f64) -> Result<f64, LawError> {
        let (coeffs, f_zero) = self.type1("f_eval")?;
        Ok(Self::f_value(coeffs, f_zero, x))
    }

    /// Generalized inverse F*(y) = inf{x : F(x) > y}; the cumulative
    /// distribution function of the scaled radius.
    ///
    /// Type I: 0 for y <= F(0+), bisection for y in (F(0+), 1), 1 for y >= 1.
    /// Type II: the step at 1. Type III: the step at 0.
    pub fn f_star_eval(&self, y: f64) -> f64 {
        match &self.kind {
            LawKind::TypeII => {
                if y < 1.0 {
                    0.0
                } else {
                    1.0
                }
            }
            LawKind::TypeIII => {
                if y < 0.0 {
                    0.0
                } else {
                    1.0
                }
            }
            LawKind::TypeI { coeffs, f_zero } => {
                if y <= *f_zero {
                    return 0.0;
                }
                if y >= 1.0 {
                    return 1.0;
                }
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..BISECT_MAX_ITER {
                    if hi - lo < BISECT_TOL {
                        break;
                    }
                    let mid = 0.5 * (lo + hi);
                    if Self::f_value(coeffs, *f_zero, mid) > y {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                assert!(
                    hi - lo < BISECT_TOL,
                    "bisection failed to converge; the law evaluator returned non-finite values"
                );
                0.5 * (lo + hi)
            }
        }
    }

    /// Density f(x) = F(x) * sum_k c_k (1-x)^{k-1} for x in (0, 1]. The right
    /// endpoint is included: f(1) = c_1 is the boundary value.
    pub fn f_density(&self, x: f64) -> Result<f64, LawError> {
        let (coeffs, f_zero) = self.type1("f_density")?;
        if !(x > 0.0 && x <= 1.0) {
            return Err(LawError::DomainError {
                op: "f_density",
                x,
                domain: "(0, 1]".to_string(),
            });
        }
        Ok(Self::f_value(coeffs, f_zero, x) * coeffs.derivative_series(x))
    }

    /// Density of the radial distribution, f*(y) = 1 / f(F*(y)) on
    /// (F(0+), 1).
    pub fn f_star_density(&self, y: f64) -> Result<f64, LawError> {
        let (_, f_zero) = self.type1("f_star_density")?;
        if !(y > f_zero && y < 1.0) {
            return Err(LawError::DomainError {
                op: "f_star_density",
                x: y,
                domain: format!("({f_zero}, 1)"),
            });
        }
        Ok(1.0 / self.f_density(self.f_star_eval(y))?)
    }

    /// Planar limit density f*(r)/(2 pi r) on the annulus F(0+) <= r <= 1,
    /// zero outside. Boundary radii take their one-sided limit values; a
    /// radius of exactly 0 returns 0 by convention. Degenerate laws have no
    /// absolutely continuous planar part, so they return 0 everywhere.
    pub fn planar_density(&self, r: f64) -> f64 {
        let (coeffs, f_zero) = match &self.kind {
            LawKind::TypeI { coeffs, f_zero } => (coeffs, *f_zero),
            _ => return 0.0,
        };
        if r <= 0.0 || r < f_zero || r > 1.0 {
            return 0.0;
        }
        let x = self.f_star_eval(r);
        let density = Self::f_value(coeffs, f_zero, x) * coeffs.derivative_series(x);
        if !density.is_finite() || density <= 0.0 {
            return 0.0;
        }
        1.0 / (2.0 * std::f64::consts::PI * r * density)
    }
}

/// Wire format: {"type":"I","coeffs":{"head":[...],"tail":{...}}} or
/// {"type":"II"} / {"type":"III"}.
#[allow(clippy::upper_case_acronyms)]
#[derive(Serialize, Deserialize)]
#[serde(tag = "type")]
enum LawWire {
    #[serde(rename = "I")]
    I { coeffs: CoeffWire },
    #[serde(rename = "II")]
    II,
    #[serde(rename = "III")]
    III,
}

#[derive(Serialize, Deserialize)]
struct CoeffWire {
    head: Vec<f64>,
    tail: TailRule,
}

impl LimitLaw {
    /// Serializes to the wire schema. Callable coefficient sources carry no
    /// exact finite representation and refuse to serialize; presets should be
    /// recorded by name and parameters instead.
    pub fn to_json(&self) -> Result<serde_json::Value, LawError> {
        let wire = match &self.kind {
            LawKind::TypeII => LawWire::II,
            LawKind::TypeIII => LawWire::III,
            LawKind::TypeI { coeffs, .. } => match coeffs {
                CoefficientSource::Explicit { head, tail } => LawWire::I {
                    coeffs: CoeffWire {
                        head: head.clone(),
                        tail: *tail,
                    },
                },
                CoefficientSource::Callable { .. } => return Err(LawError::Unserializable),
            },
        };
        Ok(serde_json::to_value(wire).expect("wire schema serializes"))
    }

    /// Parses the wire schema, re-validating coefficients and recomputing
    /// F(0+).
    pub fn from_json(value: &serde_json::Value) -> Result<Self, LawError> {
        let wire: LawWire = serde_json::from_value(value.clone())
            .map_err(|e| LawError::InvalidCoefficients(e.to_string()))?;
        match wire {
            LawWire::II => Ok(LimitLaw::type2()),
            LawWire::III => Ok(LimitLaw::type3()),
            LawWire::I { coeffs } => build_type1(CoefficientSource::Explicit {
                head: coeffs.head,
                tail: coeffs.tail,
            }),
        }
    }
}

/// Classifier verdict; `Inconclusive` is a valid outcome, not an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    TypeI,
    TypeII,
    TypeIII,
    Inconclusive,
}

/// Thresholds of the heuristic classifier. Recorded in every report so runs
/// are interpretable later; the defaults are calibration choices, not derived
/// quantities.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Verdict TypeII requires the ratio sequence to fall below this.
    pub type2_threshold: f64,
    /// Verdict TypeIII requires the ratio sequence to exceed this.
    pub type3_threshold: f64,
    /// Verdict TypeI requires the last two ratios to agree to this relative
    /// tolerance.
    pub stabilize_rtol: f64,
    /// Number of coefficient estimates reported for TypeI verdicts.
    pub coeff_count: usize,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            type2_threshold: 1e-3,
            type3_threshold: 1e3,
            stabilize_rtol: 0.05,
            coeff_count: 8,
        }
    }
}

/// Evidence gathered by [`classify`]: the ratio lambda_1(n)/gamma_n over the
/// probe sizes decides the verdict, theta trends and coefficient estimates
/// describe a TypeI limit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeDiagnostics {
    pub family: String,
    pub gamma_rule: GammaRule,
    pub probe_sizes: Vec<usize>,
    pub c1_estimates: Vec<f64>,
    /// theta_trends[i] is the sequence of theta_{i+1}(n) over the probes.
    pub theta_trends: Vec<Vec<f64>>,
    /// c_k estimates at the largest probe (TypeI verdicts only, else empty).
    pub c_estimates: Vec<f64>,
    pub verdict: Verdict,
    /// Always true: finite probes cannot certify a limit.
    pub heuristic: bool,
    pub options: ClassifyOptions,
}

/// Decides which limit a dimension family approaches by probing
/// r_n = lambda_1(n)/gamma_n at increasing sizes. Heuristic by construction;
/// the verdict is evidence, not proof.
///
/// `probe_sizes` must be strictly increasing with at least 4 entries.
pub fn classify(
    family: &DimensionFamily,
    gamma_rule: &GammaRule,
    probe_sizes: &[usize],
    options: &ClassifyOptions,
) -> Result<TypeDiagnostics, LawError> {
    assert!(
        probe_sizes.len() >= 4 && probe_sizes.windows(2).all(|w| w[0] < w[1]),
        "probe sizes must be strictly increasing with at least 4 entries"
    );
    let specs = probe_sizes
        .iter()
        .map(|&n| family.generate(n, gamma_rule))
        .collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = specs
        .iter()
        .map(|s| s.lambda_k(1) / s.gamma())
        .collect();
    let theta_trends: Vec<Vec<f64>> = (1..=options.coeff_count)
        .map(|k| specs.iter().map(|s| s.theta_k(k)).collect())
        .collect();

    let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
    let increasing = ratios.windows(2).all(|w| w[1] > w[0]);
    let last = ratios[ratios.len() - 1];
    let prev = ratios[ratios.len() - 2];

    let verdict = if decreasing && last < options.type2_threshold {
        Verdict::TypeII
    } else if increasing && last > options.type3_threshold {
        Verdict::TypeIII
    } else if last.is_finite()
        && last > 0.0
        && (last - prev).abs() <= options.stabilize_rtol * last.abs()
    {
        Verdict::TypeI
    } else {
        Verdict::Inconclusive
    };

    let c_estimates = if verdict == Verdict::TypeI {
        let largest = specs.last().expect("at least 4 probes");
        (1..=options.coeff_count)
            .map(|k| last * largest.theta_k(k))
            .collect()
    } else {
        Vec::new()
    };

    Ok(TypeDiagnostics {
        family: family.description().to_string(),
        gamma_rule: *gamma_rule,
        probe_sizes: probe_sizes.to_vec(),
        c1_estimates: ratios,
        theta_trends,
        c_estimates,
        verdict,
        heuristic: true,
        options: *options,
    })
}

/// Named laws with known closed forms, used as oracles and CLI presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Preset {
    /// c_k = 1: F(x) = x, the uniform radial law on [0, 1].
    Example1,
    /// c_k = alpha^{-k}/2, alpha >= 1: F(x) = sqrt(1 - (1-x)/alpha), the
    /// uniform planar law on the ring sqrt(1 - 1/alpha) <= r <= 1.
    Example2 { alpha: f64 },
    /// c_1 = 1, c_k = 0 for k >= 2: F(x) = exp(x - 1).
    Example3a,
    /// F(x) = sqrt(x) exp(gamma (x-1)/2), gamma >= 0, equivalently
    /// c_1 = (1 + gamma)/2 and c_k = 1/2 for k >= 2.
    Example3b { gamma: f64 },
    /// F(x) = sqrt(x) * prod_j sqrt(1 - alpha_j (1-x)) with alpha_j in [0,1],
    /// equivalently c_k = (1 + sum_j alpha_j^k)/2.
    FixedM { alphas: Vec<f64> },
}

impl Preset {
    /// Parses a preset name plus string parameters (as collected from a
    /// command line): example2 takes `alpha`, example3b takes `gamma`,
    /// fixed_m takes comma-separated `alphas`.
    pub fn parse(name: &str, params: &BTreeMap<String, String>) -> Result<Self, LawError> {
        let get_f64 = |key: &str| -> Result<f64, LawError> {
            let raw = params
                .get(key)
                .ok_or_else(|| LawError::BadParameter(format!("missing parameter '{key}'")))?;
            raw.parse::<f64>()
                .map_err(|_| LawError::BadParameter(format!("{key} = '{raw}' is not a number")))
        };
        match name {
            "example1" => Ok(Preset::Example1),
            "example2" => Ok(Preset::Example2 { alpha: get_f64("alpha")? }),
            "example3a" => Ok(Preset::Example3a),
            "example3b" => Ok(Preset::Example3b { gamma: get_f64("gamma")? }),
            "fixed_m" => {
                let raw = params.get("alphas").map(String::as_str).unwrap_or("");
                let alphas = if raw.trim().is_empty() {
                    Vec::new()
                } else {
                    raw.split(',')
                        .map(|s| {
                            s.trim().parse::<f64>().map_err(|_| {
                                LawError::BadParameter(format!("alphas entry '{s}' is not a number"))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?
                };
                Ok(Preset::FixedM { alphas })
            }
            other => Err(LawError::UnknownPreset(other.to_string())),
        }
    }

    /// Builds the law, validating parameters.
    pub fn build(&self) -> Result<LimitLaw, LawError> {
        match self {
            Preset::Example1 => build_type1(CoefficientSource::Explicit {
                head: vec![],
                tail: TailRule::Constant { c: 1.0 },
            }),
            Preset::Example2 { alpha } => {
                let alpha = *alpha;
                if !(alpha >= 1.0) || !alpha.is_finite() {
                    return Err(LawError::BadParameter(format!(
                        "example2 requires alpha >= 1, got {alpha}"
                    )));
                }
                let tail = if alpha == 1.0 {
                    TailRule::Constant { c: 0.5 }
                } else {
                    TailRule::Geometric { c: 0.5, rho: 1.0 / alpha }
                };
                build_type1(CoefficientSource::Explicit { head: vec![], tail })
            }
            Preset::Example3a => build_type1(CoefficientSource::Explicit {
                head: vec![1.0],
                tail: TailRule::Zero,
            }),
            Preset::Example3b { gamma } => {
                let gamma = *gamma;
                if !(gamma >= 0.0) || !gamma.is_finite() {
                    return Err(LawError::BadParameter(format!(
                        "example3b requires gamma >= 0, got {gamma}"
                    )));
                }
                build_type1(CoefficientSource::Explicit {
                    head: vec![(1.0 + gamma) / 2.0],
                    tail: TailRule::Constant { c: 0.5 },
                })
            }
            Preset::FixedM { alphas } => {
                if let Some(&bad) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                    return Err(LawError::BadParameter(format!(
                        "fixed_m requires every alpha_j in [0, 1], got {bad}"
                    )));
                }
                let alphas = alphas.clone();
                let ones = alphas.iter().filter(|&&a| a == 1.0).count();
                let tail_limit = (1.0 + ones as f64) / 2.0;
                let eval = move |k: usize| {
                    let s: f64 = alphas.iter().map(|&a| a.powi(k as i32)).sum();
                    (1.0 + s) / 2.0
                };
                build_type1(CoefficientSource::Callable {
                    eval: Arc::new(eval),
                    tail_limit,
                })
            }
        }
    }
}

/// String-keyed preset lookup, the CLI entry point.
pub fn preset(name: &str, params: &BTreeMap<String, String>) -> Result<LimitLaw, LawError> {
    Preset::parse(name, params)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs
            .iter()
            .map(|&(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    fn example2(alpha: f64) -> LimitLaw {
        Preset::Example2 { alpha }.build().unwrap()
    }

    /// Closed form for example2: F(x) = sqrt(1 - (1-x)/alpha).
    fn example2_closed_f(alpha: f64, x: f64) -> f64 {
        (1.0 - (1.0 - x) / alpha).sqrt()
    }

    #[test]
    fn example1_is_uniform() {
        let law = Preset::Example1.build().unwrap();
        assert_eq!(law.f_zero(), Some(0.0));
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert!((law.f_eval(x).unwrap() - x).abs() < 1e-12, "F({x})");
        }
        assert!((law.f_eval(0.3).unwrap() - 0.3).abs() < 1e-12);
        for &x in &[0.05, 0.3, 0.77, 1.0] {
            assert!((law.f_density(x).unwrap() - 1.0).abs() < 1e-11);
        }
        for &y in &[0.1, 0.5, 0.9] {
            assert!((law.f_star_eval(y) - y).abs() < 1e-11);
            assert!((law.f_star_density(y).unwrap() - 1.0).abs() < 1e-9);
        }
        // f* = 1 so the planar density is 1/(2 pi r).
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 0.5);
        assert!((law.planar_density(0.5) - expect).abs() < 1e-9);
    }

    #[test]
    fn example2_matches_closed_forms() {
        let law = example2(2.0);
        assert!((law.f_eval(0.5).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((law.f_eval(0.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((law.f_zero().unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        // Quantile-side closed forms: F*(y) = (y^2 - b^2)/(1 - b^2) with
        // b^2 = 1/2, and f*(y) = 2y/(1 - b^2).
        assert!((law.f_star_eval(0.9) - 0.62).abs() < 1e-9);
        assert!((law.f_star_density(0.8).unwrap() - 3.2).abs() < 1e-9);
        // dF/dx at 1 equals c_1 = 1/4 for alpha = 2.
        assert!((law.f_density(1.0).unwrap() - 0.25).abs() < 1e-12);
        // Inside the hole the planar density vanishes.
        assert_eq!(law.planar_density(0.5), 0.0);
        let r = 0.9;
        let expect = (2.0 * r / 0.5) / (2.0 * std::f64::consts::PI * r);
        assert!((law.planar_density(r) - expect).abs() < 1e-9);
    }

    #[test]
    fn example2_series_routes_agree_with_closed_form() {
        for &alpha in &[1.5, 2.0, 4.0] {
            let pure_tail = example2(alpha);
            // Same law with sixty explicit head terms and the tail picking up
            // from k = 61, to exercise the head-summation path.
            let head: Vec<f64> = (1..=60).map(|k| 0.5 * alpha.powi(-k)).collect();
            let split = build_type1(CoefficientSource::Explicit {
                head,
                tail: TailRule::Geometric { c: 0.5, rho: 1.0 / alpha },
            })
            .unwrap();
            // And once more through the adaptive callable path.
            let adaptive = build_type1(CoefficientSource::Callable {
                eval: Arc::new(move |k| 0.5 * alpha.powi(-(k as i32))),
                tail_limit: 0.0,
            })
            .unwrap();
            for i in 0..=100 {
                let x = i as f64 / 100.0;
                let want = example2_closed_f(alpha, x);
                for law in [&pure_tail, &split, &adaptive] {
                    let got = law.f_eval(x).unwrap();
                    assert!(
                        (got - want).abs() < 1e-10,
                        "alpha={alpha} x={x}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn example2_alpha_one_degenerates_to_sqrt() {
        let law = example2(1.0);
        assert_eq!(law.f_zero(), Some(0.0));
        for i in 1..=10 {
            let x = i as f64 / 10.0;
            assert!((law.f_eval(x).unwrap() - x.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn example3a_matches_closed_forms() {
        let law = Preset::Example3a.build().unwrap();
        let e = std::f64::consts::E;
        assert!((law.f_zero().unwrap() - 1.0 / e).abs() < 1e-15);
        for &x in &[0.0, 0.2, 0.5, 1.0] {
            assert!((law.f_eval(x).unwrap() - (x - 1.0).exp()).abs() < 1e-13);
        }
        assert!((law.f_star_eval(0.5) - (1.0 + 0.5f64.ln())).abs() < 1e-9);
        assert!((law.f_density(0.5).unwrap() - (-0.5f64).exp()).abs() < 1e-13);
        // f(F*(0.9)) = 0.9, so f*(0.9) = 1/0.9.
        assert!((law.f_star_density(0.9).unwrap() - 1.0 / 0.9).abs() < 1e-9);
        // Planar density 1/(2 pi r^2) on [1/e, 1].
        let expect = 1.0 / (2.0 * std::f64::consts::PI * 0.25);
        assert!((law.planar_density(0.5) - expect).abs() < 1e-9);
        assert_eq!(law.planar_density(0.2), 0.0);
    }

    #[test]
    fn example3b_matches_closed_form() {
        let law = Preset::Example3b { gamma: 0.0 }.build().unwrap();
        assert!((law.f_eval(0.25).unwrap() - 0.5).abs() < 1e-12);
        for &gamma in &[0.0, 0.5, 2.0] {
            let law = Preset::Example3b { gamma }.build().unwrap();
            for i in 1..=20 {
                let x = i as f64 / 20.0;
                let want = x.sqrt() * (gamma * (x - 1.0) / 2.0).exp();
                assert!((law.f_eval(x).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fixed_m_matches_closed_form() {
        let law = Preset::FixedM { alphas: vec![0.0, 0.0] }.build().unwrap();
        for i in 1..=10 {
            let x = i as f64 / 10.0;
            assert!((law.f_eval(x).unwrap() - x.sqrt()).abs() < 1e-12);
        }
        let alphas = vec![0.5, 0.25];
        let law = Preset::FixedM { alphas: alphas.clone() }.build().unwrap();
        for i in 1..=50 {
            let x = i as f64 / 50.0;
            let want = x.sqrt()
                * alphas
                    .iter()
                    .map(|&a| (1.0 - a * (1.0 - x)).sqrt())
                    .product::<f64>();
            let got = law.f_eval(x).unwrap();
            assert!((got - want).abs() < 1e-10, "x={x}: {got} vs {want}");
        }
        assert_eq!(law.f_zero(), Some(0.0));
    }

    #[test]
    fn degenerate_inverses_are_steps() {
        let two = LimitLaw::type2();
        assert_eq!(two.f_star_eval(0.99), 0.0);
        assert_eq!(two.f_star_eval(1.0), 1.0);
        let three = LimitLaw::type3();
        assert_eq!(three.f_star_eval(-0.1), 0.0);
        assert_eq!(three.f_star_eval(0.0), 1.0);
        assert!(matches!(
            two.f_eval(0.5),
            Err(LawError::TypeError { op: "f_eval" })
        ));
        assert!(matches!(three.f_density(0.5), Err(LawError::TypeError { .. })));
        assert_eq!(two.planar_density(0.7), 0.0);
    }

    #[test]
    fn f_star_boundary_conventions() {
        let law = example2(2.0);
        let beta = 0.5f64.sqrt();
        assert_eq!(law.f_star_eval(beta), 0.0);
        assert_eq!(law.f_star_eval(beta - 0.1), 0.0);
        assert_eq!(law.f_star_eval(-3.0), 0.0);
        assert_eq!(law.f_star_eval(1.0), 1.0);
        assert_eq!(law.f_star_eval(7.0), 1.0);
    }

    #[test]
    fn density_domains_are_enforced() {
        let law = example2(2.0);
        assert!(matches!(
            law.f_density(0.0),
            Err(LawError::DomainError { .. })
        ));
        assert!(matches!(
            law.f_density(1.5),
            Err(LawError::DomainError { .. })
        ));
        let beta = 0.5f64.sqrt();
        assert!(matches!(
            law.f_star_density(beta),
            Err(LawError::DomainError { .. })
        ));
        assert!(matches!(
            law.f_star_density(1.0),
            Err(LawError::DomainError { .. })
        ));
        assert!(law.f_star_density(beta + 1e-6).is_ok());
    }

    #[test]
    fn invalid_coefficients_are_rejected() {
        // c_2 > c_1.
        assert!(build_type1(CoefficientSource::Explicit {
            head: vec![1.0, 1.5],
            tail: TailRule::Zero,
        })
        .is_err());
        // Increasing inside the tail of the head.
        assert!(build_type1(CoefficientSource::Explicit {
            head: vec![1.0, 0.5, 0.6],
            tail: TailRule::Zero,
        })
        .is_err());
        // Negative coefficient.
        assert!(build_type1(CoefficientSource::Explicit {
            head: vec![1.0, -0.1],
            tail: TailRule::Zero,
        })
        .is_err());
        // Tail restarting above the last head value.
        assert!(build_type1(CoefficientSource::Explicit {
            head: vec![1.0, 0.2],
            tail: TailRule::Constant { c: 0.5 },
        })
        .is_err());
        // Geometric ratio outside (0, 1).
        assert!(build_type1(CoefficientSource::Explicit {
            head: vec![],
            tail: TailRule::Geometric { c: 0.5, rho: 1.0 },
        })
        .is_err());
        // c_1 = 0.
        assert!(build_type1(CoefficientSource::Explicit {
            head: vec![],
            tail: TailRule::Zero,
        })
        .is_err());
        // Callable rising after k = 1.
        assert!(build_type1(CoefficientSource::Callable {
            eval: Arc::new(|k| if k < 3 { 0.5 } else { 0.9 }),
            tail_limit: 0.0,
        })
        .is_err());
    }

    #[test]
    fn preset_parsing() {
        assert_eq!(
            Preset::parse("example2", &params(&[("alpha", "2")])).unwrap(),
            Preset::Example2 { alpha: 2.0 }
        );
        assert!(matches!(
            Preset::parse("nope", &params(&[])),
            Err(LawError::UnknownPreset(_))
        ));
        assert!(matches!(
            Preset::parse("example2", &params(&[])),
            Err(LawError::BadParameter(_))
        ));
        assert!(matches!(
            Preset::Example2 { alpha: 0.5 }.build(),
            Err(LawError::BadParameter(_))
        ));
        assert!(matches!(
            Preset::Example3b { gamma: -1.0 }.build(),
            Err(LawError::BadParameter(_))
        ));
        assert!(matches!(
            Preset::FixedM { alphas: vec![0.5, 1.2] }.build(),
            Err(LawError::BadParameter(_))
        ));
        assert_eq!(
            Preset::parse("fixed_m", &params(&[("alphas", "0.5, 0.25")])).unwrap(),
            Preset::FixedM { alphas: vec![0.5, 0.25] }
        );
        let law = preset("example2", &params(&[("alpha", "2")])).unwrap();
        assert!((law.f_eval(0.5).unwrap() - 0.75f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn wire_round_trip() {
        let law = example2(2.0);
        let json = law.to_json().unwrap();
        assert_eq!(json["type"], "I");
        assert_eq!(json["coeffs"]["tail"]["kind"], "geometric");
        let back = LimitLaw::from_json(&json).unwrap();
        assert_eq!(back.f_zero(), law.f_zero());
        for i in 0..10 {
            let x = i as f64 / 10.0;
            assert_eq!(back.f_eval(x).unwrap(), law.f_eval(x).unwrap());
        }

        let two = LimitLaw::type2().to_json().unwrap();
        assert_eq!(two["type"], "II");
        assert_eq!(
            LimitLaw::from_json(&two).unwrap().type_tag(),
            LawType::TypeII
        );

        // Callable sources refuse to serialize.
        let fixed = Preset::FixedM { alphas: vec![0.5] }.build().unwrap();
        assert!(matches!(fixed.to_json(), Err(LawError::Unserializable)));

        // Invalid wire content fails validation on load.
        let bad = serde_json::json!({
            "type": "I",
            "coeffs": {"head": [1.0, 2.0], "tail": {"kind": "zero"}}
        });
        assert!(LimitLaw::from_json(&bad).is_err());
    }

    #[test]
    fn classifier_reproduces_known_families() {
        let probes = [250, 500, 1000, 2000];
        let square = DimensionFamily::square();
        let opts = ClassifyOptions::default();

        let d = classify(
            &square,
            &GammaRule::PerFactor { factor: 1.0 },
            &probes,
            &opts,
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::TypeI);
        assert!(d.heuristic);
        for &c in &d.c_estimates {
            assert!((c - 1.0).abs() < 1e-12);
        }

        let d = classify(&square, &GammaRule::MSquared, &probes, &opts).unwrap();
        assert_eq!(d.verdict, Verdict::TypeII);
        assert!(d.c_estimates.is_empty());

        let d = classify(&square, &GammaRule::Const { c: 1.0 }, &probes, &opts).unwrap();
        assert_eq!(d.verdict, Verdict::TypeIII);

        // Wide family with doubling inner dimension: c_k approaches 2^{-k}/2.
        let wide = DimensionFamily::wide(2.0);
        let d = classify(
            &wide,
            &GammaRule::PerFactor { factor: 2.0 },
            &probes,
            &opts,
        )
        .unwrap();
        assert_eq!(d.verdict, Verdict::TypeI);
        for k in 1..=4usize {
            let want = 0.5 * 2.0f64.powi(-(k as i32));
            let got = d.c_estimates[k - 1];
            assert!(
                (got - want).abs() <= 0.1 * want,
                "c_{k}: {got} vs {want}"
            );
        }
    }

    #[test]
    #[should_panic(expected = "strictly increasing")]
    fn classifier_rejects_bad_probes() {
        let _ = classify(
            &DimensionFamily::square(),
            &GammaRule::MSquared,
            &[100, 100, 200, 300],
            &ClassifyOptions::default(),
        );
    }
}
