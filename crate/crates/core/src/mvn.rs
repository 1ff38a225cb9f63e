//! Zero-mean multivariate normal sampling for possibly singular covariances,
//! and Monte Carlo quantiles of the largest absolute component.
//!
//! Draws come from a symmetric eigen-decomposition `Σ = U Λ Uᵀ` with negative
//! eigenvalues clipped to zero, so `Z = U Λ^{1/2} ξ`. Draws are produced in
//! blocks of [`BLOCK_SIZE`]; block `b` uses `SeedStream::new(seed).derive(b)`,
//! which keeps the output identical for any number of threads.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

pub const BLOCK_SIZE: usize = 4096;
pub const DEFAULT_MC_SAMPLES: usize = 200_000;
/// Fewer draws than this make the tail quantile too noisy to be useful.
pub const MIN_MC_SAMPLES: usize = 1000;

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const EIGEN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct MaxAbsQuantileRequest {
    pub covariance: DMatrix<f64>,
    pub alpha: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

/// A square root `F` of a covariance, `F Fᵀ = Σ`.
#[derive(Debug, Clone)]
pub struct NormalFactor {
    factor: DMatrix<f64>,
}

impl NormalFactor {
    pub fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 || covariance.ncols() != d {
            return Err(Error::Input(format!(
                "covariance must be a non-empty square matrix, got {}×{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if covariance.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("covariance has non-finite entries".into()));
        }
        let scale = covariance.amax();
        let asymmetry = (covariance - covariance.transpose()).amax();
        if asymmetry > SYMMETRY_TOLERANCE * scale {
            return Err(Error::Input(format!(
                "covariance is not symmetric (largest difference {asymmetry:.3e})"
            )));
        }
        let sym = (covariance + covariance.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let largest = eig.eigenvalues.max().max(0.0);
        let smallest = eig.eigenvalues.min();
        if smallest < -EIGEN_TOLERANCE * largest.max(f64::MIN_POSITIVE) {
            return Err(Error::Input(format!(
                "covariance is not positive semi-definite (eigenvalue {smallest:.3e})"
            )));
        }
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        let mut factor = eig.eigenvectors;
        for (mut col, root) in factor.column_iter_mut().zip(roots.iter()) {
            col *= *root;
        }
        Ok(NormalFactor { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    /// `len` draws as rows, from one random stream.
    fn block(&self, len: usize, stream: SeedStream) -> DMatrix<f64> {
        let d = self.dim();
        let mut rng = stream.rng();
        let xi = DMatrix::from_fn(len, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        xi * self.factor.transpose()
    }

    fn blocks(n: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
        let count = n.div_ceil(BLOCK_SIZE);
        (0..count).into_par_iter().map(move |b| (b, BLOCK_SIZE.min(n - b * BLOCK_SIZE)))
    }
}

/// `n` independent draws from N(0, covariance), one per row.
pub fn sample_mvn(covariance: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let factor = NormalFactor::new(covariance)?;
    let root = SeedStream::new(seed);
    let blocks: Vec<DMatrix<f64>> = NormalFactor::blocks(n)
        .map(|(b, len)| factor.block(len, root.derive(b as u64)))
        .collect();
    let mut out = DMatrix::zeros(n, factor.dim());
    let mut row = 0;
    for block in blocks {
        out.rows_mut(row, block.nrows()).copy_from(&block);
        row += block.nrows();
    }
    Ok(out)
}

/// Sorted Monte Carlo draws of `max_b |Z_b|`; answers quantile queries at
/// any level from the same draws.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxAbsDistribution {
    sorted: Vec<f64>,
}

impl MaxAbsDistribution {
    pub fn sample(covariance: &DMatrix<f64>, mc_samples: usize, seed: u64) -> Result<Self> {
        if mc_samples < MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "mc_samples = {mc_samples} is below the minimum of {MIN_MC_SAMPLES}"
            )));
        }
        let factor = NormalFactor::new(covariance)?;
        let root = SeedStream::new(seed);
        let blocks: Vec<Vec<f64>> = NormalFactor::blocks(mc_samples)
            .map(|(b, len)| {
                let z = factor.block(len, root.derive(b as u64));
                let mut maxima = vec![0.0f64; len];
                for col in z.column_iter() {
                    for (m, v) in maxima.iter_mut().zip(col.iter()) {
                        *m = m.max(v.abs());
                    }
                }
                maxima
            })
            .collect();
        let mut sorted: Vec<f64> = blocks.into_iter().flatten().collect();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(MaxAbsDistribution { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// The ⌈(1−α)·n⌉-th order statistic.
    pub fn quantile(&self, alpha: f64) -> f64 {
        let n = self.sorted.len();
        let rank = ((1.0 - alpha) * n as f64 - 1e-9).ceil().clamp(1.0, n as f64) as usize;
        self.sorted[rank - 1]
    }
}

/// c with Pr(max_b |Z_b| ≤ c) ≈ 1 − α for Z ~ N(0, covariance).
pub fn max_abs_quantile(request: &MaxAbsQuantileRequest) -> Result<f64> {
    check_alpha(request.alpha)?;
    let dist = MaxAbsDistribution::sample(&request.covariance, request.mc_samples, request.seed)?;
    Ok(dist.quantile(request.alpha))
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha = {alpha} must lie in (0, 1)")))
    }
}
