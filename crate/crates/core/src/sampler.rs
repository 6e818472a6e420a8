//! Sampling of Ginibre factor chains and of the eigensolver-free oracle.
//!
//! The product of a chain of independent complex Ginibre factors is
//! accumulated left to right with a Frobenius renormalization after every
//! multiplication; the discarded magnitudes are returned as an additive log
//! scale so spectra can be reconstructed exactly. The oracle samples the
//! distribution of squared singular-value-like weights directly from Gamma
//! variables, never touching an eigensolver, which makes it an independent
//! cross-check of the spectral pipeline.

use crate::chain_spec::ChainSpec;
use crate::rng::{StreamDomain, TrialRng};
use crate::special::digamma;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use std::ops::{Index, IndexMut};
use thiserror::Error;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// Dense row-major complex matrix; the minimal operations the pipeline
/// needs, nothing more.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        ComplexMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for z in &mut self.data {
            *z *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Row-parallel i-k-j product; the inner loop runs along contiguous rows
    /// of both operands.
    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "inner dimensions differ: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut data = vec![Complex64::new(0.0, 0.0); self.rows * rhs.cols];
        data.par_chunks_mut(rhs.cols)
            .enumerate()
            .for_each(|(i, out_row)| {
                for k in 0..self.cols {
                    let a = self.data[i * self.cols + k];
                    let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                    for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                        *o += a * b;
                    }
                }
            });
        ComplexMatrix {
            rows: self.rows,
            cols: rhs.cols,
            data,
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// An n x n product matrix stored as (matrix, log_scale): the true product is
/// exp(log_scale) * matrix. Keeping the scale in log space lets chains with
/// dozens of factors stay representable.
#[derive(Clone, Debug)]
pub struct ScaledProduct {
    pub matrix: ComplexMatrix,
    pub log_scale: f64,
}

/// Samples a rows x cols matrix with independent entries (g + i g') / sqrt 2,
/// g, g' standard normal, so E|entry|^2 = 1.
pub fn sample_ginibre<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let data = (0..rows * cols)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * inv_sqrt2, im * inv_sqrt2)
        })
        .collect();
    ComplexMatrix {
        rows,
        cols,
        data,
    }
}

/// Draws the full factor chain of `spec` and multiplies it up left to right.
/// Factor j (0-based) is sampled from the trial's `Factor` stream with index
/// j, so each factor is reproducible in isolation. The running product is
/// divided by its Frobenius norm after every multiplication (m times in
/// total) with the logs accumulated in `log_scale`; an exactly zero norm
/// skips both the division and the log.
pub fn product_chain(spec: &ChainSpec, rng: &TrialRng) -> Result<ScaledProduct, SamplerError> {
    let dims = spec.dims();
    let mut product = {
        let mut stream = rng.stream(StreamDomain::Factor, 0);
        sample_ginibre(dims[0], dims[1], &mut stream)
    };
    let mut log_scale = 0.0;
    renormalize(&mut product, &mut log_scale)?;
    for j in 1..spec.m() {
        let factor = {
            let mut stream = rng.stream(StreamDomain::Factor, j as u64);
            sample_ginibre(dims[j], dims[j + 1], &mut stream)
        };
        product = product.mul(&factor);
        renormalize(&mut product, &mut log_scale)?;
    }
    Ok(ScaledProduct {
        matrix: product,
        log_scale,
    })
}

fn renormalize(matrix: &mut ComplexMatrix, log_scale: &mut f64) -> Result<(), SamplerError> {
    let norm = matrix.frobenius_norm();
    if !norm.is_finite() {
        return Err(SamplerError::NumericalBreakdown(format!(
            "product norm became {norm} while accumulating the chain"
        )));
    }
    if norm > 0.0 {
        matrix.scale(1.0 / norm);
        *log_scale += norm.ln();
    }
    Ok(())
}

/// One draw of the oracle weights: log_t[j-1] = ln T_j for j = 1..=n, where
/// T_j is a product of independent Gamma(l_r + j, 1) variables over the
/// chain's offsets l_r. No matrices and no eigensolver are involved.
#[derive(Clone, Debug)]
pub struct OracleSample {
    pub log_t: Vec<f64>,
}

/// Samples the oracle for every index j = 1..=n. Index j draws from the
/// trial's `Oracle` stream with index j, so the per-index samples are
/// independent and the parallel loop is deterministic.
pub fn sample_oracle(spec: &ChainSpec, rng: &TrialRng) -> Result<OracleSample, SamplerError> {
    let log_t = (1..=spec.n())
        .into_par_iter()
        .map(|j| sample_oracle_index(spec, rng, j))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(OracleSample { log_t })
}

/// One oracle log-weight ln T_j for a single index j in 1..=n; exactly what
/// [`sample_oracle`] produces at that index.
pub fn sample_oracle_index(
    spec: &ChainSpec,
    rng: &TrialRng,
    j: usize,
) -> Result<f64, SamplerError> {
    debug_assert!(j >= 1 && j <= spec.n());
    let mut stream = rng.stream(StreamDomain::Oracle, j as u64);
    let mut sum = 0.0;
    for l in spec.offsets() {
        let shape = (l + j) as f64;
        let gamma = Gamma::new(shape, 1.0).expect("shape >= 1");
        let draw = gamma.sample(&mut stream);
        if draw < 1e-300 {
            return Err(SamplerError::NumericalBreakdown(format!(
                "gamma draw underflowed at index {j} (shape {shape})"
            )));
        }
        sum += draw.ln();
    }
    Ok(sum)
}

/// E[ln T_j] = sum_r digamma(l_r + j), the exact mean of the oracle's
/// log-weight at index j.
pub fn expected_log_t(spec: &ChainSpec, j: usize) -> f64 {
    assert!(j >= 1 && j <= spec.n(), "index {j} outside 1..={}", spec.n());
    spec.offsets().map(|l| digamma((l + j) as f64)).sum()
}
