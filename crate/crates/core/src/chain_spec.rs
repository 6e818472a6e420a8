//! Rectangular chain specifications and their deterministic dimension
//! statistics.
//!
//! A chain is a list of factor dimensions n_1..n_{m+1} with n_1 = n_{m+1} = n
//! and n = min over all dims, together with a positive scaling exponent
//! gamma. Everything downstream (the h_n scaling, the limit-law classifier,
//! the Gamma-product oracle) is a function of the offsets l_j = n_j - n and
//! gamma, so this module is the single source of truth for them.

use serde::{Deserialize, Deserializer, Serialize};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Errors from chain validation and evaluation.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum ChainError {
    #[error("dims has length {got}, expected m+1 = {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("dims must start and end with n = {n}, got {first} and {last}")]
    EndpointMismatch { n: usize, first: usize, last: usize },
    #[error("dims[{index}] = {dim} is smaller than n = {n}")]
    MinViolation { index: usize, dim: usize, n: usize },
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("n and m must be positive")]
    ZeroSize,
    #[error("{op}: argument {x} outside {domain}")]
    DomainError {
        op: &'static str,
        x: f64,
        domain: &'static str,
    },
}

/// A validated chain of m rectangular factors with square size n.
///
/// `dims` holds n_1..n_{m+1}; factor j is n_j x n_{j+1}, so the product is
/// n x n. Construct through [`ChainSpec::new`] (or deserialize), which
/// enforces the invariants; the fields stay private to keep them true.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainSpec {
    n: usize,
    m: usize,
    dims: Vec<usize>,
    gamma: f64,
}

/// Flat or run-length dims as they appear on the wire:
/// `[2, 4, 2]` or `[[2, 1], [4, 1], [2, 1]]`.
#[derive(Deserialize)]
#[serde(untagged)]
enum DimsRepr {
    Flat(Vec<usize>),
    RunLength(Vec<(usize, usize)>),
}

impl DimsRepr {
    fn expand(self) -> Vec<usize> {
        match self {
            DimsRepr::Flat(v) => v,
            DimsRepr::RunLength(runs) => runs
                .into_iter()
                .flat_map(|(value, count)| std::iter::repeat_n(value, count))
                .collect(),
        }
    }
}

impl<'de> Deserialize<'de> for ChainSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            m: usize,
            dims: DimsRepr,
            gamma: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        ChainSpec::new(raw.n, raw.m, raw.dims.expand(), raw.gamma)
            .map_err(serde::de::Error::custom)
    }
}

impl ChainSpec {
    /// Validates and builds a chain.
    pub fn new(n: usize, m: usize, dims: Vec<usize>, gamma: f64) -> Result<Self, ChainError> {
        let spec = Self { n, m, dims, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// Square chain: all m factors are n x n.
    pub fn square(n: usize, m: usize, gamma: f64) -> Result<Self, ChainError> {
        Self::new(n, m, vec![n; m + 1], gamma)
    }

    /// Chain with all inner dimensions equal to `inner`: dims =
    /// (n, inner, ..., inner, n).
    pub fn with_inner(n: usize, m: usize, inner: usize, gamma: f64) -> Result<Self, ChainError> {
        let mut dims = vec![inner; m + 1];
        dims[0] = n;
        dims[m] = n;
        Self::new(n, m, dims, gamma)
    }

    /// Checks every invariant; [`ChainSpec::new`] already ran this.
    pub fn validate(&self) -> Result<(), ChainError> {
        if self.n == 0 || self.m == 0 {
            return Err(ChainError::ZeroSize);
        }
        if self.dims.len() != self.m + 1 {
            return Err(ChainError::DimensionMismatch {
                got: self.dims.len(),
                want: self.m + 1,
            });
        }
        let (first, last) = (self.dims[0], self.dims[self.m]);
        if first != self.n || last != self.n {
            return Err(ChainError::EndpointMismatch {
                n: self.n,
                first,
                last,
            });
        }
        if let Some((index, &dim)) = self
            .dims
            .iter()
            .enumerate()
            .find(|&(_, &dim)| dim < self.n)
        {
            return Err(ChainError::MinViolation {
                index,
                dim,
                n: self.n,
            });
        }
        if !(self.gamma > 0.0) {
            return Err(ChainError::NonPositiveGamma(self.gamma));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Offsets l_j = n_j - n for j = 1..m (the row dimensions of the factors).
    pub fn offsets(&self) -> impl Iterator<Item = usize> + '_ {
        self.dims[..self.m].iter().map(move |&d| d - self.n)
    }

    /// lambda_k = sum_{j=1..m} (n/n_j)^k. At least 1 (the first ratio is 1)
    /// and non-increasing in k since every ratio lies in (0, 1].
    pub fn lambda_k(&self, k: usize) -> f64 {
        assert!(k >= 1, "lambda_k requires k >= 1");
        self.dims[..self.m]
            .iter()
            .map(|&nj| {
                let ratio = self.n as f64 / nj as f64;
                if k <= i32::MAX as usize {
                    ratio.powi(k as i32)
                } else {
                    ratio.powf(k as f64)
                }
            })
            .sum()
    }

    /// theta_k = lambda_k / lambda_1, in (0, 1] with theta_1 = 1. Computed on
    /// demand for any k; nothing is precomputed or cached.
    pub fn theta_k(&self, k: usize) -> f64 {
        self.lambda_k(k) / self.lambda_k(1)
    }

    /// Log of the product of the per-factor ratios, sum_j ln((n x + l_j)/(n + l_j)).
    ///
    /// This is gamma * ln F_n(x) = lambda_1 * ln G_n(x); both evaluators share
    /// it so their consistency is exact rather than approximate.
    fn log_factor_sum(&self, x: f64) -> f64 {
        let n = self.n as f64;
        self.offsets()
            .map(|l| {
                let l = l as f64;
                ((n * x + l) / (n + l)).ln()
            })
            .sum()
    }

    /// F_n(x) = (prod_j (n x + l_j)/(n + l_j))^(1/gamma), clamped to 0 below 0
    /// and 1 above 1. Evaluated as a sum of logs so products over thousands of
    /// factors in (0, 1] cannot underflow.
    pub fn f_n_eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        (self.log_factor_sum(x) / self.gamma).exp()
    }

    /// ln G_n(x) = (gamma/lambda_1) ln F_n(x), for x in (0, 1].
    ///
    /// Satisfies the sandwich -(1-x) >= g_n(x) >= ln x.
    pub fn g_n_eval(&self, x: f64) -> Result<f64, ChainError> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(ChainError::DomainError {
                op: "g_n_eval",
                x,
                domain: "(0, 1]",
            });
        }
        Ok(self.log_factor_sum(x) / self.lambda_k(1))
    }

    /// ln a_n = (sum_{r=1..m} ln n_r)/gamma, the log of the scaling constant.
    pub fn log_a_n(&self) -> f64 {
        self.dims[..self.m]
            .iter()
            .map(|&nr| (nr as f64).ln())
            .sum::<f64>()
            / self.gamma
    }
}

/// Rule mapping a chain (n, m) to its scaling exponent gamma_n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum GammaRule {
    /// gamma = factor * m (factor 1 and 2 cover the common cases).
    PerFactor { factor: f64 },
    /// gamma = m^2.
    MSquared,
    /// gamma = c, independent of n.
    Const { c: f64 },
}

impl GammaRule {
    pub fn eval(&self, m: usize) -> f64 {
        let m = m as f64;
        match *self {
            GammaRule::PerFactor { factor } => factor * m,
            GammaRule::MSquared => m * m,
            GammaRule::Const { c } => c,
        }
    }

    /// Parses "m", "2m"/"2*m", "m2"/"m^2", or a bare positive number.
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim().to_ascii_lowercase().replace(' ', "");
        if t == "m" {
            return Some(GammaRule::PerFactor { factor: 1.0 });
        }
        if t == "m2" || t == "m^2" || t == "m*m" {
            return Some(GammaRule::MSquared);
        }
        if let Some(stripped) = t.strip_suffix('m').map(|s| s.trim_end_matches('*')) {
            if let Ok(factor) = stripped.parse::<f64>() {
                if factor > 0.0 {
                    return Some(GammaRule::PerFactor { factor });
                }
            }
        }
        match t.parse::<f64>() {
            Ok(c) if c > 0.0 => Some(GammaRule::Const { c }),
            _ => None,
        }
    }
}

impl fmt::Display for GammaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GammaRule::PerFactor { factor } => {
                if factor == 1.0 {
                    write!(f, "m")
                } else {
                    write!(f, "{factor}m")
                }
            }
            GammaRule::MSquared => write!(f, "m^2"),
            GammaRule::Const { c } => write!(f, "{c}"),
        }
    }
}

type Generator = dyn Fn(usize) -> Result<ChainSpec, ChainError> + Send + Sync;

/// Parametrized family n -> ChainSpec, used by the asymptotic classifier.
///
/// Generated specs carry a placeholder gamma of 1; the classifier substitutes
/// its own [`GammaRule`], so the family fixes dimensions only.
#[derive(Clone)]
pub struct DimensionFamily {
    description: String,
    generator: Arc<Generator>,
}

impl fmt::Debug for DimensionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DimensionFamily")
            .field("description", &self.description)
            .finish_non_exhaustive()
    }
}

impl DimensionFamily {
    pub fn new(
        description: impl Into<String>,
        generator: impl Fn(usize) -> Result<ChainSpec, ChainError> + Send + Sync + 'static,
    ) -> Self {
        Self {
            description: description.into(),
            generator: Arc::new(generator),
        }
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Chain at probe size n, with the given gamma rule applied.
    pub fn generate(&self, n: usize, gamma_rule: &GammaRule) -> Result<ChainSpec, ChainError> {
        let base = (self.generator)(n)?;
        ChainSpec::new(
            base.n,
            base.m,
            base.dims,
            gamma_rule.eval(base.m),
        )
    }

    /// All factors square (n x n) with m = n factors.
    pub fn square() -> Self {
        Self::new("square, m = n", |n| ChainSpec::square(n, n.max(1), 1.0))
    }

    /// Inner dimensions ceil(alpha * n) with m = n factors; alpha >= 1.
    pub fn wide(alpha: f64) -> Self {
        Self::new(format!("wide, inner = ceil({alpha}n), m = n"), move |n| {
            let inner = (alpha * n as f64).ceil() as usize;
            ChainSpec::with_inner(n, n.max(1), inner.max(n), 1.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize, m: usize, dims: &[usize], gamma: f64) -> Result<ChainSpec, ChainError> {
        ChainSpec::new(n, m, dims.to_vec(), gamma)
    }

    #[test]
    fn validate_accepts_and_rejects() {
        assert!(chain(2, 2, &[2, 4, 2], 2.0).is_ok());
        assert_eq!(
            chain(2, 2, &[2, 1, 2], 2.0).unwrap_err(),
            ChainError::MinViolation {
                index: 1,
                dim: 1,
                n: 2
            }
        );
        assert_eq!(
            chain(3, 1, &[3, 4], 1.0).unwrap_err(),
            ChainError::EndpointMismatch {
                n: 3,
                first: 3,
                last: 4
            }
        );
        assert_eq!(
            chain(2, 2, &[2, 4, 4, 2], 2.0).unwrap_err(),
            ChainError::DimensionMismatch { got: 4, want: 3 }
        );
        assert_eq!(
            chain(2, 1, &[2, 2], 0.0).unwrap_err(),
            ChainError::NonPositiveGamma(0.0)
        );
        assert_eq!(chain(0, 1, &[0, 0], 1.0).unwrap_err(), ChainError::ZeroSize);
    }

    /// dims = (100, 200 x 49, 100): m = 50 factors, 49 of them 200 wide.
    fn tall_chain() -> ChainSpec {
        let mut dims = vec![200; 51];
        dims[0] = 100;
        dims[50] = 100;
        ChainSpec::new(100, 50, dims, 100.0).unwrap()
    }

    #[test]
    fn lambda_matches_hand_sums() {
        let spec = tall_chain();
        // 1 + 49 * (1/2) and 1 + 49 * (1/4), summed by hand.
        assert_eq!(spec.lambda_k(1), 25.5);
        assert_eq!(spec.lambda_k(2), 13.25);
        let square = ChainSpec::square(7, 13, 1.0).unwrap();
        for k in 1..6 {
            assert_eq!(square.lambda_k(k), 13.0);
        }
    }

    #[test]
    fn lambda_is_non_increasing_and_at_least_one() {
        let spec = tall_chain();
        let mut prev = f64::INFINITY;
        for k in 1..=80 {
            let l = spec.lambda_k(k);
            assert!(l >= 1.0);
            assert!(l <= prev);
            prev = l;
        }
    }

    #[test]
    fn theta_matches_ratio() {
        let spec = tall_chain();
        assert!((spec.theta_k(2) - 13.25 / 25.5).abs() < 1e-15);
        assert_eq!(spec.theta_k(1), 1.0);
        let square = ChainSpec::square(5, 9, 2.0).unwrap();
        assert_eq!(square.theta_k(5), 1.0);
    }

    #[test]
    fn f_n_matches_hand_product() {
        let spec = chain(2, 2, &[2, 4, 2], 2.0).unwrap();
        // Factors at x = 0.5: (2*0.5+0)/2 = 0.5 and (2*0.5+2)/4 = 0.75;
        // product 0.375, then the 1/gamma = 1/2 power.
        assert!((spec.f_n_eval(0.5) - 0.375f64.sqrt()).abs() < 1e-15);
        assert_eq!(spec.f_n_eval(1.0), 1.0);
        assert_eq!(spec.f_n_eval(0.0), 0.0);
        assert_eq!(spec.f_n_eval(-0.5), 0.0);
        assert_eq!(spec.f_n_eval(1.5), 1.0);
    }

    #[test]
    fn f_n_is_strictly_increasing() {
        let spec = tall_chain();
        let mut prev = 0.0;
        for i in 1..=100 {
            let x = i as f64 / 100.0;
            let v = spec.f_n_eval(x);
            assert!(v > prev, "F_n not increasing at x = {x}");
            prev = v;
        }
        assert_eq!(prev, 1.0);
    }

    #[test]
    fn g_n_matches_hand_value_and_sandwich() {
        let spec = chain(2, 2, &[2, 4, 2], 2.0).unwrap();
        // lambda_1 = 1.5; g(0.5) = (2/1.5) ln F_n(0.5) = ln(0.375)/1.5.
        let g = spec.g_n_eval(0.5).unwrap();
        assert!((g - 0.375f64.ln() / 1.5).abs() < 1e-15);
        assert!(g <= -(1.0 - 0.5) && g >= 0.5f64.ln());

        // Square chains collapse to G_n(x) = x exactly.
        let square = ChainSpec::square(6, 4, 2.5).unwrap();
        for &x in &[0.1, (-1.0f64).exp(), 0.8, 1.0] {
            assert!((square.g_n_eval(x).unwrap() - x.ln()).abs() < 1e-12);
        }
        assert_eq!(square.g_n_eval(1.0).unwrap(), 0.0);
    }

    #[test]
    fn g_n_rejects_outside_domain() {
        let spec = chain(2, 2, &[2, 4, 2], 2.0).unwrap();
        assert!(matches!(
            spec.g_n_eval(0.0),
            Err(ChainError::DomainError { .. })
        ));
        assert!(matches!(
            spec.g_n_eval(-1.0),
            Err(ChainError::DomainError { .. })
        ));
        assert!(matches!(
            spec.g_n_eval(1.2),
            Err(ChainError::DomainError { .. })
        ));
    }

    #[test]
    fn fg_consistency() {
        // exp(lambda_1/gamma * g_n(x)) must reproduce F_n(x) to 1e-12 relative.
        let specs = [
            chain(2, 2, &[2, 4, 2], 2.0).unwrap(),
            tall_chain(),
            ChainSpec::square(30, 7, 3.5).unwrap(),
        ];
        for spec in &specs {
            let ratio = spec.lambda_k(1) / spec.gamma();
            for i in 1..=50 {
                let x = i as f64 / 50.0;
                let lhs = (ratio * spec.g_n_eval(x).unwrap()).exp();
                let rhs = spec.f_n_eval(x);
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
            }
        }
    }

    #[test]
    fn log_a_n_matches_hand_values() {
        let spec = chain(2, 2, &[2, 4, 2], 2.0).unwrap();
        assert!((spec.log_a_n() - 1.5 * std::f64::consts::LN_2).abs() < 1e-15);
        let ones = ChainSpec::square(1, 3, 3.0).unwrap();
        assert_eq!(ones.log_a_n(), 0.0);
        let square = ChainSpec::square(17, 5, 5.0).unwrap();
        assert!((square.log_a_n() - (17f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn serde_round_trip_and_run_length() {
        let spec = chain(2, 2, &[2, 4, 2], 2.0).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        let back: ChainSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);

        let rle: ChainSpec = serde_json::from_str(
            r#"{"n":100,"m":50,"dims":[[100,1],[200,49],[100,1]],"gamma":100.0}"#,
        )
        .unwrap();
        assert_eq!(rle.dims().len(), 51);
        assert_eq!(rle.lambda_k(1), 25.5);

        // Invalid chains must not deserialize.
        let bad = serde_json::from_str::<ChainSpec>(r#"{"n":2,"m":2,"dims":[2,1,2],"gamma":2.0}"#);
        assert!(bad.is_err());
    }

    #[test]
    fn gamma_rule_parsing_and_eval() {
        assert_eq!(
            GammaRule::parse("m"),
            Some(GammaRule::PerFactor { factor: 1.0 })
        );
        assert_eq!(
            GammaRule::parse("2m"),
            Some(GammaRule::PerFactor { factor: 2.0 })
        );
        assert_eq!(GammaRule::parse("m^2"), Some(GammaRule::MSquared));
        assert_eq!(GammaRule::parse("1"), Some(GammaRule::Const { c: 1.0 }));
        assert_eq!(GammaRule::parse("0"), None);
        assert_eq!(GammaRule::parse("bogus"), None);
        assert_eq!(GammaRule::PerFactor { factor: 2.0 }.eval(50), 100.0);
        assert_eq!(GammaRule::MSquared.eval(20), 400.0);
    }

    #[test]
    fn families_generate_valid_chains() {
        let square = DimensionFamily::square();
        let spec = square
            .generate(250, &GammaRule::PerFactor { factor: 1.0 })
            .unwrap();
        assert_eq!(spec.n(), 250);
        assert_eq!(spec.m(), 250);
        assert_eq!(spec.gamma(), 250.0);

        let wide = DimensionFamily::wide(2.0);
        let spec = wide
            .generate(100, &GammaRule::PerFactor { factor: 2.0 })
            .unwrap();
        assert_eq!(spec.dims()[1], 200);
        assert_eq!(spec.dims()[0], 100);
        assert_eq!(spec.gamma(), 200.0);
        spec.validate().unwrap();
    }
}
