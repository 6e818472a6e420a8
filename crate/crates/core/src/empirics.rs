//! Empirical measures of scaled spectra and the statistics used to compare
//! them to limit laws and to each other.
//!
//! Radii are built from log moduli in log domain (the raw moduli span
//! thousands of orders of magnitude for long chains) and only exponentiated
//! at the end, where they land in O(1) range. The KS statistics are exact
//! sups over jump points, not grid approximations: left limits of the
//! reference distribution are taken one representable float below each jump,
//! which is exact for step references and one ulp off for continuous ones.

use crate::chain_spec::ChainSpec;
use crate::rng::TrialRng;
use crate::sampler::{sample_oracle_index, SamplerError};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EmpiricsError {
    #[error("empty sample")]
    EmptySample,
    #[error("{op}: argument {x} outside {domain}")]
    DomainError {
        op: &'static str,
        x: f64,
        domain: &'static str,
    },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Where a radial sample came from; the two sources are supposed to agree in
/// distribution, which is what the two-sample tests check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Eigen,
    Oracle,
}

/// Scaled radii (already through the h-transform), tagged with their source.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSample {
    radii: Vec<f64>,
    source: SampleSource,
}

impl RadialSample {
    /// Wraps radii, checking they are finite and nonnegative.
    pub fn new(radii: Vec<f64>, source: SampleSource) -> Self {
        assert!(
            radii.iter().all(|r| r.is_finite() && *r >= 0.0),
            "radii must be finite and nonnegative"
        );
        RadialSample { radii, source }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn source(&self) -> SampleSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.radii.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// Points of a planar empirical measure in polar form.
#[derive(Clone, Debug, PartialEq)]
pub struct PlanarSample {
    points: Vec<(f64, f64)>,
}

impl PlanarSample {
    /// Wraps (radius, angle) pairs, checking radius >= 0 and
    /// angle in [0, 2 pi).
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        assert!(
            points
                .iter()
                .all(|&(r, a)| r.is_finite() && r >= 0.0 && (0.0..tau).contains(&a)),
            "planar points need finite radius >= 0 and angle in [0, 2 pi)"
        );
        PlanarSample { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Goodness-of-fit statistics for one run, with enough provenance to
/// reproduce it. Plain data; the caller fills it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub ks_radial: f64,
    pub wasserstein_radial: f64,
    pub angle_ks: f64,
    pub ring_coverage: f64,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

/// Applies the scaling map: radius_j = exp(2 log_moduli[j] / gamma -
/// log_a_n). Everything stays in log domain until the final exp; a log
/// modulus of negative infinity (zero eigenvalue) maps to radius 0.
///
/// Eigen samples feed their log moduli directly. Oracle samples feed
/// log_t / 2, since the squared moduli match the oracle weights T_j in
/// distribution.
pub fn h_transform(log_moduli: &[f64], spec: &ChainSpec, source: SampleSource) -> RadialSample {
    let gamma = spec.gamma();
    let log_a = spec.log_a_n();
    let radii = log_moduli
        .iter()
        .map(|&lm| (2.0 * lm / gamma - log_a).exp())
        .collect();
    RadialSample::new(radii, source)
}

/// Fraction of radii <= x; the right-continuous empirical distribution
/// function, ties counted with multiplicity.
pub fn ecdf(sample: &RadialSample, x: f64) -> Result<f64, EmpiricsError> {
    if sample.is_empty() {
        return Err(EmpiricsError::EmptySample);
    }
    let count = sample.radii.iter().filter(|&&r| r <= x).count();
    Ok(count as f64 / sample.len() as f64)
}

/// Exact sup over jump points of both one-sided gaps at each sorted value:
/// the reference's left limit is taken one representable float below the
/// jump.
fn ks_against<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    let mut sup = 0.0f64;
    let mut i = 0usize;
    while i < sorted.len() {
        let v = sorted[i];
        let below = i;
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
        let hi = (i as f64 / n - cdf(v)).abs();
        let lo = (below as f64 / n - cdf(v.next_down())).abs();
        sup = sup.max(hi).max(lo);
    }
    sup
}

/// One-sample Kolmogorov-Smirnov statistic sup |ECDF - cdf| against a
/// nondecreasing reference distribution function.
pub fn ks_one_sample<F: Fn(f64) -> f64>(
    sample: &RadialSample,
    cdf: F,
) -> Result<f64, EmpiricsError> {
    if sample.is_empty() {
        return Err(EmpiricsError::EmptySample);
    }
    Ok(ks_against(&sample.sorted(), cdf))
}

/// Two-sample Kolmogorov-Smirnov statistic: exact sup over the merged
/// support of |ECDF_a - ECDF_b|.
pub fn ks_two_sample(a: &RadialSample, b: &RadialSample) -> Result<f64, EmpiricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(EmpiricsError::EmptySample);
    }
    let sa = a.sorted();
    let sb = b.sorted();
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < sa.len() || j < sb.len() {
        let v = match (sa.get(i), sb.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < sa.len() && sa[i] == v {
            i += 1;
        }
        while j < sb.len() && sb[j] == v {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// Exact 1-Wasserstein distance between two empirical measures. Equal sizes
/// use the order-statistics coupling (mean of |a_(j) - b_(j)|); unequal
/// sizes integrate |ECDF_a - ECDF_b| over the merged support, which is the
/// same quantity when the sizes do match.
pub fn wasserstein1(a: &RadialSample, b: &RadialSample) -> Result<f64, EmpiricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(EmpiricsError::EmptySample);
    }
    let sa = a.sorted();
    let sb = b.sorted();
    if sa.len() == sb.len() {
        let n = sa.len() as f64;
        Ok(sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n)
    } else {
        Ok(w1_cdf_integral(&sa, &sb))
    }
}

/// integral over the merged support of |ECDF_a - ECDF_b| dx.
fn w1_cdf_integral(sa: &[f64], sb: &[f64]) -> f64 {
    let mut grid: Vec<f64> = sa.iter().chain(sb.iter()).copied().collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let (na, nb) = (sa.len() as f64, sb.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut total = 0.0;
    for w in grid.windows(2) {
        while i < sa.len() && sa[i] <= w[0] {
            i += 1;
        }
        while j < sb.len() && sb[j] <= w[0] {
            j += 1;
        }
        total += (i as f64 / na - j as f64 / nb).abs() * (w[1] - w[0]);
    }
    total
}

/// 1-Wasserstein distance to a distribution given by its quantile function:
/// mean of |a_(j) - q((j - 0.5)/n)|. For the limiting radial laws the
/// quantile function of the radius is exactly `f_eval`.
pub fn wasserstein1_quantiles<Q: Fn(f64) -> f64>(
    sample: &RadialSample,
    quantile: Q,
) -> Result<f64, EmpiricsError> {
    if sample.is_empty() {
        return Err(EmpiricsError::EmptySample);
    }
    let sorted = sample.sorted();
    let n = sorted.len() as f64;
    let sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(i, &r)| (r - quantile((i as f64 + 0.5) / n)).abs())
        .sum();
    Ok(sum / n)
}

/// One-sample KS statistic of angles/(2 pi) against Unif[0, 1]; the limiting
/// angle distribution is uniform for every chain.
pub fn angle_uniformity(sample: &PlanarSample) -> Result<f64, EmpiricsError> {
    if sample.is_empty() {
        return Err(EmpiricsError::EmptySample);
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut u: Vec<f64> = sample.points.iter().map(|&(_, a)| a / tau).collect();
    u.sort_by(f64::total_cmp);
    Ok(ks_against(&u, |x| x.clamp(0.0, 1.0)))
}

/// Fraction of points whose radius falls in [inner - slack, outer + slack].
/// An empty sample covers nothing and returns 0.
pub fn ring_coverage(sample: &PlanarSample, inner: f64, outer: f64, slack: f64) -> f64 {
    assert!(
        0.0 <= inner && inner <= outer,
        "ring needs 0 <= inner <= outer"
    );
    if sample.is_empty() {
        return 0.0;
    }
    let lo = inner - slack;
    let hi = outer + slack;
    let inside = sample
        .points
        .iter()
        .filter(|&&(r, _)| r >= lo && r <= hi)
        .count();
    inside as f64 / sample.len() as f64
}

/// Monte Carlo summary of the log-weight limit statistic at one probe size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub x: f64,
    /// The oracle index [nx] actually sampled (clamped to 1..=n).
    pub index: usize,
    pub replicates: usize,
    pub mean: f64,
    /// Sample standard deviation (the n-1 normalization).
    pub std: f64,
}

/// Samples D = (ln T_[nx] - sum_r ln(l_r + n)) / lambda_1 - g_n(x) across
/// replicates and summarizes it. D converges to zero in probability as n
/// grows; both |mean| and std should shrink across probe sizes (that
/// comparison is the caller's job, one call covers one size).
///
/// Replicate t draws from `TrialRng::new(seed, t)`, so the replicate loop is
/// deterministic and parallel.
pub fn tnlimit_diagnostic(
    spec: &ChainSpec,
    x: f64,
    replicates: usize,
    seed: u64,
) -> Result<DiagnosticSummary, EmpiricsError> {
    if !(x > 0.0 && x <= 1.0) {
        return Err(EmpiricsError::DomainError {
            op: "tnlimit_diagnostic",
            x,
            domain: "(0, 1]",
        });
    }
    assert!(replicates >= 100, "too few replicates for a useful summary");
    let n = spec.n();
    let index = ((n as f64 * x).floor() as usize).clamp(1, n);
    let lambda1 = spec.lambda_k(1);
    let log_shift: f64 = spec.offsets().map(|l| ((l + n) as f64).ln()).sum();
    let g = spec
        .g_n_eval(x)
        .expect("x validated to lie in (0, 1] above");

    let values = (0..replicates)
        .into_par_iter()
        .map(|t| {
            let rng = TrialRng::new(seed, t as u64);
            let log_t = sample_oracle_index(spec, &rng, index)?;
            Ok((log_t - log_shift) / lambda1 - g)
        })
        .collect::<Result<Vec<f64>, SamplerError>>()?;

    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    Ok(DiagnosticSummary {
        x,
        index,
        replicates,
        mean,
        std: var.sqrt(),
    })
}
