//! The subcommand bodies. Trials fan out over a rayon pool sized by
//! `--jobs`; each trial owns its seeded stream, results are merged in trial
//! order, and all files are written single-threaded, so artifacts do not
//! depend on the worker count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use rectprod_core::chain_spec::{ChainSpec, DimensionFamily, GammaRule};
use rectprod_core::eigen::eigenvalues;
use rectprod_core::empirics::{
    angle_uniformity, h_transform, ks_one_sample, ks_two_sample, ring_coverage,
    tnlimit_diagnostic, wasserstein1, wasserstein1_quantiles, GofReport, PlanarSample,
    RadialSample, SampleSource,
};
use rectprod_core::limit_law::{classify, ClassifyOptions, LawType, LimitLaw};
use rectprod_core::rng::TrialRng;
use rectprod_core::sampler::{expected_log_t, product_chain, sample_oracle};
use serde_json::{json, Value};

use crate::config::{self, ClassifyArgs, CommonArgs, Resolved};
use crate::csvio::{self, DigammaRow, LimitRow, RadiusRow, ScatterRow, TnlimitRow};

/// Coverage slack when checking that eigenvalues land on the limiting ring.
const RING_SLACK: f64 = 0.05;

/// `tnlimit.csv` needs at least this many replicates for a meaningful
/// standard deviation; smaller runs skip the table.
const TNLIMIT_MIN_TRIALS: usize = 100;

/// One simulated trial: scaled radii paired with eigenvalue angles.
struct TrialSpectrum {
    radial: RadialSample,
    angles: Vec<f64>,
}

pub fn simulate(args: &CommonArgs) -> Result<()> {
    let resolved = config::resolve("simulate", args)?;
    let spec = require_chain(&resolved)?;
    let trials = run_eigen_trials(&spec, &resolved)?;

    let mut scatter = Vec::new();
    let mut radii = Vec::new();
    for (t, trial) in trials.iter().enumerate() {
        for (i, (&radius, &angle)) in trial
            .radial
            .radii()
            .iter()
            .zip(&trial.angles)
            .enumerate()
        {
            scatter.push(ScatterRow { trial: t, radius, angle });
            radii.push(RadiusRow {
                trial: t,
                index: i + 1,
                radius,
                source: "eigen".to_string(),
            });
        }
    }

    let gof = pooled_gof(&spec, &resolved, &trials)?;
    let dir = prepare_run_dir(&resolved)?;
    csvio::write_scatter(&dir.join("scatter.csv"), &scatter)?;
    csvio::write_radii(&dir.join("radii.csv"), &radii)?;
    let report = json!({
        "command": "simulate",
        "seed": resolved.seed,
        "trials": resolved.trials,
        "chain": &spec,
        "law": resolved.law.as_ref().map(|(_, provenance)| provenance.clone()),
        "gof": gof,
        "eigenvalues_per_trial": spec.n(),
    });
    finish(&resolved, &dir, &report)
}

pub fn oracle(args: &CommonArgs) -> Result<()> {
    let resolved = config::resolve("oracle", args)?;
    let spec = require_chain(&resolved)?;
    let n = spec.n();

    // log_t[t][j - 1] = ln T_j for trial t; radii follow by the h-transform
    // of ln T_j / 2.
    let log_t: Vec<Vec<f64>> = in_pool(resolved.jobs, || {
        (0..resolved.trials)
            .into_par_iter()
            .map(|t| {
                let rng = TrialRng::new(resolved.seed, t as u64);
                Ok(sample_oracle(&spec, &rng)?.log_t)
            })
            .collect::<Result<_>>()
    })?;

    let mut radii = Vec::new();
    let mut pooled = Vec::new();
    for (t, row) in log_t.iter().enumerate() {
        let log_moduli: Vec<f64> = row.iter().map(|v| v / 2.0).collect();
        let sample = h_transform(&log_moduli, &spec, SampleSource::Oracle);
        for (j, &radius) in sample.radii().iter().enumerate() {
            radii.push(RadiusRow {
                trial: t,
                index: j + 1,
                radius,
                source: "oracle".to_string(),
            });
            pooled.push(radius);
        }
    }

    let digamma: Vec<DigammaRow> = (1..=n)
        .map(|j| {
            let values: Vec<f64> = log_t.iter().map(|row| row[j - 1]).collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let expected = expected_log_t(&spec, j);
            DigammaRow {
                index: j,
                mean_log_t: mean,
                expected_log_t: expected,
                residual: mean - expected,
                std_error: standard_error(&values, mean),
            }
        })
        .collect();

    let tnlimit: Vec<TnlimitRow> = if resolved.trials >= TNLIMIT_MIN_TRIALS {
        resolved
            .x_grid
            .iter()
            .map(|&x| {
                let summary = tnlimit_diagnostic(&spec, x, resolved.trials, resolved.seed)?;
                Ok(TnlimitRow {
                    x: summary.x,
                    index: summary.index,
                    replicates: summary.replicates,
                    mean: summary.mean,
                    std: summary.std,
                })
            })
            .collect::<Result<_>>()?
    } else {
        eprintln!(
            "note: {} trials < {TNLIMIT_MIN_TRIALS}, skipping tnlimit.csv rows",
            resolved.trials
        );
        Vec::new()
    };

    let gof = match &resolved.law {
        Some((law, _)) => {
            let sample = RadialSample::new(pooled, SampleSource::Oracle);
            Some(radial_gof(law, &sample)?)
        }
        None => None,
    };

    let dir = prepare_run_dir(&resolved)?;
    csvio::write_radii(&dir.join("radii.csv"), &radii)?;
    csvio::write_digamma(&dir.join("digamma.csv"), &digamma)?;
    csvio::write_tnlimit(&dir.join("tnlimit.csv"), &tnlimit)?;
    let report = json!({
        "command": "oracle",
        "seed": resolved.seed,
        "trials": resolved.trials,
        "chain": &spec,
        "law": resolved.law.as_ref().map(|(_, provenance)| provenance.clone()),
        "gof": gof,
        "max_digamma_residual": digamma
            .iter()
            .map(|row| row.residual.abs())
            .fold(0.0f64, f64::max),
    });
    finish(&resolved, &dir, &report)
}

pub fn limit(args: &CommonArgs) -> Result<()> {
    let resolved = config::resolve("limit", args)?;
    let Some((law, provenance)) = resolved.law.clone() else {
        bail!("limit needs --preset NAME (with --param k=v) or a law in the config");
    };

    let rows: Vec<LimitRow> = (0..=resolved.grid)
        .map(|i| {
            let x = i as f64 / resolved.grid as f64;
            LimitRow {
                x,
                f: or_nan(law.f_eval(x)),
                f_star: law.f_star_eval(x),
                density: or_nan(law.f_density(x)),
                density_star: or_nan(law.f_star_density(x)),
                planar: law.planar_density(x),
            }
        })
        .collect();

    let dir = prepare_run_dir(&resolved)?;
    csvio::write_limit(&dir.join("limit.csv"), &rows)?;
    let report = json!({
        "command": "limit",
        "law": provenance,
        "type": law.type_tag(),
        "f_zero": law.f_zero(),
        "grid": resolved.grid,
    });
    finish(&resolved, &dir, &report)
}

pub fn classify_family(args: &ClassifyArgs) -> Result<()> {
    let mut resolved = config::resolve("classify", &args.common)?;
    if let Some(name) = &args.family {
        resolved.family = Some(name.clone());
    }
    if let Some(probes) = &args.probes {
        resolved.probes = probes.clone();
    }

    let name = resolved
        .family
        .clone()
        .ok_or_else(|| anyhow!("classify needs --family (square or wide)"))?;
    let family = build_family(&name, &resolved.params)?;
    let rule_text = resolved
        .params
        .get("gamma")
        .ok_or_else(|| anyhow!("classify needs --param gamma=.. (m, 2m, m^2, or a value)"))?;
    let rule = GammaRule::parse(rule_text)
        .ok_or_else(|| anyhow!("gamma '{rule_text}' is not a rule or a value"))?;

    if resolved.probes.len() < 4 || resolved.probes.windows(2).any(|w| w[0] >= w[1]) {
        bail!(
            "--probes needs at least 4 strictly increasing sizes, got {:?}",
            resolved.probes
        );
    }
    let diagnostics = classify(&family, &rule, &resolved.probes, &ClassifyOptions::default())?;
    let report = serde_json::to_value(&diagnostics)?;
    println!("{}", serde_json::to_string_pretty(&report)?);

    let dir = prepare_run_dir(&resolved)?;
    finish(&resolved, &dir, &report)
}

pub fn gof(args: &CommonArgs) -> Result<()> {
    let resolved = config::resolve("gof", args)?;
    let spec = require_chain(&resolved)?;
    let trials = run_eigen_trials(&spec, &resolved)?;

    let oracle_log_t: Vec<Vec<f64>> = in_pool(resolved.jobs, || {
        (0..resolved.trials)
            .into_par_iter()
            .map(|t| {
                let rng = TrialRng::new(resolved.seed, t as u64);
                Ok(sample_oracle(&spec, &rng)?.log_t)
            })
            .collect::<Result<_>>()
    })?;

    let mut scatter = Vec::new();
    let mut radii = Vec::new();
    let mut eigen_pool = Vec::new();
    for (t, trial) in trials.iter().enumerate() {
        for (i, (&radius, &angle)) in trial
            .radial
            .radii()
            .iter()
            .zip(&trial.angles)
            .enumerate()
        {
            scatter.push(ScatterRow { trial: t, radius, angle });
            radii.push(RadiusRow {
                trial: t,
                index: i + 1,
                radius,
                source: "eigen".to_string(),
            });
            eigen_pool.push(radius);
        }
    }
    let mut oracle_pool = Vec::new();
    for (t, row) in oracle_log_t.iter().enumerate() {
        let log_moduli: Vec<f64> = row.iter().map(|v| v / 2.0).collect();
        let sample = h_transform(&log_moduli, &spec, SampleSource::Oracle);
        for (j, &radius) in sample.radii().iter().enumerate() {
            radii.push(RadiusRow {
                trial: t,
                index: j + 1,
                radius,
                source: "oracle".to_string(),
            });
            oracle_pool.push(radius);
        }
    }

    let eigen_radial = RadialSample::new(eigen_pool, SampleSource::Eigen);
    let oracle_radial = RadialSample::new(oracle_pool, SampleSource::Oracle);
    let two_sample = json!({
        "ks": ks_two_sample(&eigen_radial, &oracle_radial)?,
        "wasserstein": wasserstein1(&eigen_radial, &oracle_radial)?,
    });
    let eigen_gof = pooled_gof(&spec, &resolved, &trials)?;
    let oracle_gof = match &resolved.law {
        Some((law, _)) => Some(radial_gof(law, &oracle_radial)?),
        None => None,
    };

    let dir = prepare_run_dir(&resolved)?;
    csvio::write_scatter(&dir.join("scatter.csv"), &scatter)?;
    csvio::write_radii(&dir.join("radii.csv"), &radii)?;
    let report = json!({
        "command": "gof",
        "seed": resolved.seed,
        "trials": resolved.trials,
        "chain": &spec,
        "law": resolved.law.as_ref().map(|(_, provenance)| provenance.clone()),
        "two_sample": two_sample,
        "eigen": eigen_gof,
        "oracle": oracle_gof,
    });
    finish(&resolved, &dir, &report)
}

fn require_chain(resolved: &Resolved) -> Result<ChainSpec> {
    resolved.chain.clone().ok_or_else(|| {
        anyhow!(
            "{} needs a chain; set it in --config or via --param n=..,m=..[,inner=..],gamma=..",
            resolved.command
        )
    })
}

fn run_eigen_trials(spec: &ChainSpec, resolved: &Resolved) -> Result<Vec<TrialSpectrum>> {
    in_pool(resolved.jobs, || {
        (0..resolved.trials)
            .into_par_iter()
            .map(|t| {
                let rng = TrialRng::new(resolved.seed, t as u64);
                let product = product_chain(spec, &rng)?;
                let spectrum = eigenvalues(&product)?;
                let radial = h_transform(&spectrum.log_moduli, spec, SampleSource::Eigen);
                Ok(TrialSpectrum { radial, angles: spectrum.angles })
            })
            .collect::<Result<_>>()
    })
}

/// Runs `body` on a pool with the requested thread count; 0 keeps the
/// global default.
fn in_pool<T: Send>(jobs: usize, body: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if jobs == 0 {
        return body();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    pool.install(body)
}

/// Pooled goodness of fit of the eigen trials against the configured law,
/// if one was configured.
fn pooled_gof(
    spec: &ChainSpec,
    resolved: &Resolved,
    trials: &[TrialSpectrum],
) -> Result<Option<GofReport>> {
    let Some((law, _)) = &resolved.law else {
        return Ok(None);
    };
    let mut points = Vec::new();
    for trial in trials {
        points.extend(
            trial
                .radial
                .radii()
                .iter()
                .copied()
                .zip(trial.angles.iter().copied()),
        );
    }
    let radial = RadialSample::new(points.iter().map(|&(r, _)| r).collect(), SampleSource::Eigen);
    let planar = PlanarSample::new(points);

    let (inner, outer) = ring_bounds(law);
    let report = GofReport {
        ks_radial: ks_one_sample(&radial, |r| law.f_star_eval(r))?,
        wasserstein_radial: wasserstein1_quantiles(&radial, radial_quantile(law))?,
        angle_ks: angle_uniformity(&planar)?,
        ring_coverage: ring_coverage(&planar, inner, outer, RING_SLACK),
        n: spec.n(),
        m: spec.m(),
        seed: resolved.seed,
    };
    Ok(Some(report))
}

/// Radial-only fit statistics, for samples that carry no angles.
fn radial_gof(law: &LimitLaw, sample: &RadialSample) -> Result<Value> {
    Ok(json!({
        "ks_radial": ks_one_sample(sample, |r| law.f_star_eval(r))?,
        "wasserstein_radial": wasserstein1_quantiles(sample, radial_quantile(law))?,
    }))
}

/// Quantile function of the scaled radius: the inverse of F* is F for the
/// absolutely continuous laws, and the degenerate laws sit at 1 and 0.
fn radial_quantile(law: &LimitLaw) -> impl Fn(f64) -> f64 + '_ {
    move |u| match law.type_tag() {
        LawType::TypeI => law.f_eval(u).expect("type I laws have F"),
        LawType::TypeII => 1.0,
        LawType::TypeIII => 0.0,
    }
}

fn ring_bounds(law: &LimitLaw) -> (f64, f64) {
    match law.type_tag() {
        LawType::TypeI => (law.f_zero().expect("type I laws have F(0+)"), 1.0),
        LawType::TypeII => (1.0, 1.0),
        LawType::TypeIII => (0.0, 0.0),
    }
}

fn build_family(name: &str, params: &BTreeMap<String, String>) -> Result<DimensionFamily> {
    match name {
        "square" => Ok(DimensionFamily::square()),
        "wide" => {
            let raw = params
                .get("alpha")
                .ok_or_else(|| anyhow!("the wide family needs --param alpha=.. (>= 1)"))?;
            let alpha = raw
                .parse::<f64>()
                .ok()
                .filter(|&a| a >= 1.0)
                .ok_or_else(|| anyhow!("alpha = '{raw}' is not a number >= 1"))?;
            Ok(DimensionFamily::wide(alpha))
        }
        other => bail!("unknown family '{other}'; available: square, wide"),
    }
}

fn standard_error(values: &[f64], mean: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (variance / n as f64).sqrt()
}

fn or_nan(value: Result<f64, rectprod_core::limit_law::LawError>) -> f64 {
    value.unwrap_or(f64::NAN)
}

fn prepare_run_dir(resolved: &Resolved) -> Result<PathBuf> {
    let dir = resolved.run_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// Writes the resolved-config snapshot and the report, then prints the run
/// directory so scripts can pick the artifacts up. `classify` keeps stdout
/// as pure diagnostics JSON, so its directory note goes to stderr.
fn finish(resolved: &Resolved, dir: &Path, report: &Value) -> Result<()> {
    write_json(&dir.join("config.json"), &resolved.snapshot())?;
    write_json(&dir.join("report.json"), report)?;
    if resolved.command == "classify" {
        eprintln!("{}", dir.display());
    } else {
        println!("{}", dir.display());
    }
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
