//! Fixed-schema CSV artifacts.
//!
//! All files are UTF-8 with a header row, comma separators, '.' decimal
//! separator, and LF line endings. Floats are written with the shortest
//! representation that parses back to the same bits, so load followed by
//! write reproduces a written file byte for byte. Non-finite values are
//! spelled `NaN`, `inf`, and `-inf`, which `f64::from_str` accepts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// One eigenvalue in the scaled plane: `scatter.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterRow {
    pub trial: usize,
    pub radius: f64,
    pub angle: f64,
}

/// One scaled radius with its provenance: `radii.csv`. `index` is the
/// 1-based rank within the trial (eigen rows) or the oracle index j.
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusRow {
    pub trial: usize,
    pub index: usize,
    pub radius: f64,
    pub source: String,
}

/// One grid point of the limit tables: `limit.csv`. The same grid value is
/// fed to every function, so `f` is F(x), `f_star` is F*(x), and so on;
/// entries outside a function's domain are `NaN`.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitRow {
    pub x: f64,
    pub f: f64,
    pub f_star: f64,
    pub density: f64,
    pub density_star: f64,
    pub planar: f64,
}

/// Per-index mean of the log Gamma products against its digamma value:
/// `digamma.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct DigammaRow {
    pub index: usize,
    pub mean_log_t: f64,
    pub expected_log_t: f64,
    pub residual: f64,
    pub std_error: f64,
}

/// One centered log-statistic summary: `tnlimit.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct TnlimitRow {
    pub x: f64,
    pub index: usize,
    pub replicates: usize,
    pub mean: f64,
    pub std: f64,
}

pub const SCATTER_HEADER: &str = "trial,radius,angle";
pub const RADII_HEADER: &str = "trial,index,radius,source";
pub const LIMIT_HEADER: &str = "x,F,Fstar,f,fstar,planar";
pub const DIGAMMA_HEADER: &str = "index,mean_log_t,expected_log_t,residual,std_error";
pub const TNLIMIT_HEADER: &str = "x,index,replicates,mean,std";

pub fn write_scatter(path: &Path, rows: &[ScatterRow]) -> Result<()> {
    write_csv(path, SCATTER_HEADER, rows.iter(), |text, row| {
        let _ = write!(text, "{},{},{}", row.trial, row.radius, row.angle);
    })
}

pub fn load_scatter(path: &Path) -> Result<Vec<ScatterRow>> {
    parse_csv(path, SCATTER_HEADER, |fields| {
        Ok(ScatterRow {
            trial: fields[0].parse()?,
            radius: fields[1].parse()?,
            angle: fields[2].parse()?,
        })
    })
}

pub fn write_radii(path: &Path, rows: &[RadiusRow]) -> Result<()> {
    write_csv(path, RADII_HEADER, rows.iter(), |text, row| {
        let _ = write!(
            text,
            "{},{},{},{}",
            row.trial, row.index, row.radius, row.source
        );
    })
}

pub fn load_radii(path: &Path) -> Result<Vec<RadiusRow>> {
    parse_csv(path, RADII_HEADER, |fields| {
        Ok(RadiusRow {
            trial: fields[0].parse()?,
            index: fields[1].parse()?,
            radius: fields[2].parse()?,
            source: fields[3].to_string(),
        })
    })
}

pub fn write_limit(path: &Path, rows: &[LimitRow]) -> Result<()> {
    write_csv(path, LIMIT_HEADER, rows.iter(), |text, row| {
        let _ = write!(
            text,
            "{},{},{},{},{},{}",
            row.x, row.f, row.f_star, row.density, row.density_star, row.planar
        );
    })
}

pub fn load_limit(path: &Path) -> Result<Vec<LimitRow>> {
    parse_csv(path, LIMIT_HEADER, |fields| {
        Ok(LimitRow {
            x: fields[0].parse()?,
            f: fields[1].parse()?,
            f_star: fields[2].parse()?,
            density: fields[3].parse()?,
            density_star: fields[4].parse()?,
            planar: fields[5].parse()?,
        })
    })
}

pub fn write_digamma(path: &Path, rows: &[DigammaRow]) -> Result<()> {
    write_csv(path, DIGAMMA_HEADER, rows.iter(), |text, row| {
        let _ = write!(
            text,
            "{},{},{},{},{}",
            row.index, row.mean_log_t, row.expected_log_t, row.residual, row.std_error
        );
    })
}

pub fn load_digamma(path: &Path) -> Result<Vec<DigammaRow>> {
    parse_csv(path, DIGAMMA_HEADER, |fields| {
        Ok(DigammaRow {
            index: fields[0].parse()?,
            mean_log_t: fields[1].parse()?,
            expected_log_t: fields[2].parse()?,
            residual: fields[3].parse()?,
            std_error: fields[4].parse()?,
        })
    })
}

pub fn write_tnlimit(path: &Path, rows: &[TnlimitRow]) -> Result<()> {
    write_csv(path, TNLIMIT_HEADER, rows.iter(), |text, row| {
        let _ = write!(
            text,
            "{},{},{},{},{}",
            row.x, row.index, row.replicates, row.mean, row.std
        );
    })
}

pub fn load_tnlimit(path: &Path) -> Result<Vec<TnlimitRow>> {
    parse_csv(path, TNLIMIT_HEADER, |fields| {
        Ok(TnlimitRow {
            x: fields[0].parse()?,
            index: fields[1].parse()?,
            replicates: fields[2].parse()?,
            mean: fields[3].parse()?,
            std: fields[4].parse()?,
        })
    })
}

fn write_csv<'r, R: 'r>(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = &'r R>,
    mut format_row: impl FnMut(&mut String, &R),
) -> Result<()> {
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for row in rows {
        format_row(&mut text, row);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_csv<R>(
    path: &Path,
    header: &str,
    parse_row: impl Fn(&[&str]) -> Result<R>,
) -> Result<Vec<R>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == header => {}
        Some(first) => bail!(
            "{}: expected header '{header}', found '{first}'",
            path.display()
        ),
        None => bail!("{}: empty file", path.display()),
    }
    let want = header.split(',').count();
    let mut rows = Vec::new();
    for (number, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != want {
            bail!(
                "{} line {}: expected {want} fields, found {}",
                path.display(),
                number + 2,
                fields.len()
            );
        }
        let row = parse_row(&fields)
            .with_context(|| format!("{} line {}", path.display(), number + 2))?;
        rows.push(row);
    }
    Ok(rows)
}
