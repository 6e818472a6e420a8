//! Run configuration: one JSON document, overridden field by field from the
//! command line, with the resolved result snapshotted next to the artifacts.
//!
//! Precedence, lowest to highest: built-in defaults, the `--config` file,
//! command-line flags. `RECTPROD_OUT` beats `--out`. The snapshot written as
//! `config.json` records the scientific inputs (chain, law, seed, trials,
//! grids, probes) and deliberately omits execution details (`--out`,
//! `--jobs`), so runs that differ only in placement or parallelism produce
//! byte-identical artifacts.

use std::collections::BTreeMap;
use std::env;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use rectprod_core::chain_spec::{ChainSpec, GammaRule};
use rectprod_core::limit_law::{LimitLaw, Preset};
use serde::Deserialize;
use serde_json::{json, Value};

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its fields
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Base seed for all random streams
    #[arg(long)]
    pub seed: Option<u64>,

    /// Number of trials (simulate, oracle, gof)
    #[arg(long)]
    pub trials: Option<usize>,

    /// Worker threads; 0 uses the machine default
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Output root; artifacts land in <out>/<run-id>/
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Limit-law preset: example1, example2, example3a, example3b, fixed_m
    #[arg(long, value_name = "NAME")]
    pub preset: Option<String>,

    /// Extra key=value parameter; repeatable (alpha=2, gamma=2m, grid=200,
    /// n=100, m=3, inner=200, probes=250,500,1000)
    #[arg(long = "param", value_name = "K=V")]
    pub params: Vec<String>,
}

/// Flags specific to `classify`.
#[derive(Clone, Debug, clap::Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,

    /// Dimension family to probe: square or wide (wide wants --param alpha=..)
    #[arg(long, value_name = "NAME")]
    pub family: Option<String>,

    /// Probe sizes, comma separated and strictly increasing
    #[arg(long, value_delimiter = ',', value_name = "N,N,..")]
    pub probes: Option<Vec<usize>>,
}

/// The config file as written by the user; every field optional so flags
/// and defaults can fill the gaps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    chain: Option<Value>,
    seed: Option<u64>,
    trials: Option<usize>,
    jobs: Option<usize>,
    out: Option<PathBuf>,
    law: Option<LawInput>,
    preset: Option<String>,
    params: Option<BTreeMap<String, String>>,
    family: Option<String>,
    probes: Option<Vec<usize>>,
    grid: Option<usize>,
    x_grid: Option<Vec<f64>>,
}

/// A law in the config file: either a preset reference or explicit
/// coefficients in the wire format emitted by `limit` reports.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LawInput {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    params: Option<BTreeMap<String, String>>,
    #[serde(default)]
    coefficients: Option<Value>,
}

/// Everything a command needs, after merging defaults, file, and flags.
#[derive(Debug)]
pub struct Resolved {
    pub command: &'static str,
    pub out: PathBuf,
    pub seed: u64,
    pub trials: usize,
    pub jobs: usize,
    pub chain: Option<ChainSpec>,
    /// The law plus its provenance (preset or raw coefficients) for reports.
    pub law: Option<(LimitLaw, Value)>,
    pub family: Option<String>,
    pub params: BTreeMap<String, String>,
    pub probes: Vec<usize>,
    pub grid: usize,
    pub x_grid: Vec<f64>,
}

impl Resolved {
    /// Directory all artifacts of this run go to: `<out>/<command>-s<seed>`.
    pub fn run_dir(&self) -> PathBuf {
        self.out.join(format!("{}-s{}", self.command, self.seed))
    }

    /// The resolved-config snapshot written as `config.json`.
    pub fn snapshot(&self) -> Value {
        json!({
            "command": self.command,
            "seed": self.seed,
            "trials": self.trials,
            "chain": self.chain,
            "law": self.law.as_ref().map(|(_, provenance)| provenance.clone()),
            "family": self.family,
            "params": self.params,
            "probes": self.probes,
            "grid": self.grid,
            "x_grid": self.x_grid,
        })
    }
}

pub fn resolve(command: &'static str, args: &CommonArgs) -> Result<Resolved> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };

    let seed = args.seed.or(file.seed).unwrap_or(0);
    let trials = args.trials.or(file.trials).unwrap_or(1);
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let jobs = args.jobs.or(file.jobs).unwrap_or(0);
    let out = env::var_os("RECTPROD_OUT")
        .map(PathBuf::from)
        .or_else(|| args.out.clone())
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from("out"));

    let mut params = file.params.unwrap_or_default();
    for raw in &args.params {
        let (key, value) = raw
            .split_once('=')
            .ok_or_else(|| anyhow!("--param wants key=value, got '{raw}'"))?;
        params.insert(key.trim().to_string(), value.trim().to_string());
    }

    let chain = resolve_chain(&params, file.chain.as_ref())?;
    let preset_name = args.preset.clone().or(file.preset);
    let law = resolve_law(preset_name.as_deref(), &params, file.law.as_ref())?;

    let grid = match params.get("grid") {
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|&g| g >= 2)
            .ok_or_else(|| anyhow!("grid = '{raw}' is not an integer >= 2"))?,
        None => file.grid.unwrap_or(100),
    };
    let probes = match params.get("probes") {
        Some(raw) => parse_usize_list(raw).context("parsing probes")?,
        None => file.probes.unwrap_or_else(|| vec![250, 500, 1000, 2000]),
    };
    let x_grid = match params.get("x_grid") {
        Some(raw) => parse_f64_list(raw).context("parsing x_grid")?,
        None => file.x_grid.unwrap_or_else(|| vec![0.25, 0.5, 0.75, 1.0]),
    };

    Ok(Resolved {
        command,
        out,
        seed,
        trials,
        jobs,
        chain,
        law,
        family: file.family,
        params,
        probes,
        grid,
        x_grid,
    })
}

/// Chain resolution: `--param n=..,m=..[,inner=..],gamma=..` beats the
/// config `chain`, which is either a full spec (has `dims`) or the shape
/// shorthand `{n, m, inner?, gamma}`.
fn resolve_chain(
    params: &BTreeMap<String, String>,
    file_chain: Option<&Value>,
) -> Result<Option<ChainSpec>> {
    if params.contains_key("n") || params.contains_key("m") {
        let n = required_usize(params, "n")?;
        let m = required_usize(params, "m")?;
        let gamma_raw = params
            .get("gamma")
            .ok_or_else(|| anyhow!("a chain from --param also needs gamma=.."))?;
        let gamma = parse_gamma(gamma_raw, m)?;
        let spec = match params.get("inner") {
            Some(raw) => {
                let inner = raw
                    .parse::<usize>()
                    .map_err(|_| anyhow!("inner = '{raw}' is not an integer"))?;
                ChainSpec::with_inner(n, m, inner, gamma)?
            }
            None => ChainSpec::square(n, m, gamma)?,
        };
        return Ok(Some(spec));
    }

    let Some(value) = file_chain else {
        return Ok(None);
    };
    if value.get("dims").is_some() {
        let spec: ChainSpec =
            serde_json::from_value(value.clone()).context("invalid chain spec")?;
        return Ok(Some(spec));
    }

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Shape {
        n: usize,
        m: usize,
        #[serde(default)]
        inner: Option<usize>,
        gamma: Value,
    }
    let shape: Shape = serde_json::from_value(value.clone())
        .context("chain must be a full spec (with dims) or {n, m, inner?, gamma}")?;
    let gamma = match &shape.gamma {
        Value::Number(number) => number
            .as_f64()
            .ok_or_else(|| anyhow!("gamma is out of range"))?,
        Value::String(text) => parse_gamma(text, shape.m)?,
        other => bail!("gamma must be a number or a rule string, got {other}"),
    };
    let spec = match shape.inner {
        Some(inner) => ChainSpec::with_inner(shape.n, shape.m, inner, gamma)?,
        None => ChainSpec::square(shape.n, shape.m, gamma)?,
    };
    Ok(Some(spec))
}

/// Law resolution: `--preset` beats the config `law`; the config `law` is a
/// preset reference or explicit wire coefficients, not both.
fn resolve_law(
    preset_name: Option<&str>,
    params: &BTreeMap<String, String>,
    file_law: Option<&LawInput>,
) -> Result<Option<(LimitLaw, Value)>> {
    if let Some(name) = preset_name {
        let preset = Preset::parse(name, params)?;
        let law = preset.build()?;
        let provenance = json!({ "preset": preset });
        return Ok(Some((law, provenance)));
    }
    let Some(input) = file_law else {
        return Ok(None);
    };
    match (&input.preset, &input.coefficients) {
        (Some(_), Some(_)) => bail!("law has both a preset and coefficients; pick one"),
        (Some(name), None) => {
            let empty = BTreeMap::new();
            let preset = Preset::parse(name, input.params.as_ref().unwrap_or(&empty))?;
            let law = preset.build()?;
            Ok(Some((law, json!({ "preset": preset }))))
        }
        (None, Some(wire)) => {
            let law = LimitLaw::from_json(wire)?;
            Ok(Some((law, json!({ "coefficients": wire }))))
        }
        (None, None) => bail!("law needs a preset name or coefficients"),
    }
}

/// Parses gamma either as a plain value ("6.5") or as a rule in the factor
/// count ("m", "2m", "m^2"), evaluated at this chain's m.
fn parse_gamma(text: &str, m: usize) -> Result<f64> {
    GammaRule::parse(text)
        .map(|rule| rule.eval(m))
        .ok_or_else(|| anyhow!("gamma '{text}' is not a number or a rule like m, 2m, m^2"))
}

fn required_usize(params: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    let raw = params
        .get(key)
        .ok_or_else(|| anyhow!("a chain from --param needs {key}=.."))?;
    raw.parse::<usize>()
        .map_err(|_| anyhow!("{key} = '{raw}' is not an integer"))
}

fn parse_usize_list(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<usize>()
                .map_err(|_| anyhow!("'{piece}' is not an integer"))
        })
        .collect()
}

fn parse_f64_list(raw: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|piece| {
            piece
                .trim()
                .parse::<f64>()
                .map_err(|_| anyhow!("'{piece}' is not a number"))
        })
        .collect()
}
