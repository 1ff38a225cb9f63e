#![allow(dead_code)]

use evaluator_outliers::{EvaluationDataset, ParticipantRecord};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Well-scaled random data: `m` evaluators with `n` participants each,
/// `q` participant covariates, `arity` outcomes per participant with
/// within-participant correlation `rho`.
pub fn random_dataset(seed: u64, m: usize, n: usize, q: usize, arity: usize, rho: f64) -> EvaluationDataset {
    let mut r = rng(seed);
    let effects: Vec<f64> = (0..m).map(|_| 3.0 * normal(&mut r)).collect();
    let gamma: Vec<f64> = (0..q).map(|_| normal(&mut r)).collect();
    let mut records = Vec::new();
    for (j, b) in effects.iter().enumerate() {
        for i in 0..n {
            let x: Vec<f64> = (0..q).map(|_| normal(&mut r)).collect();
            let mean = b + x.iter().zip(&gamma).map(|(a, g)| a * g).sum::<f64>();
            let shared = normal(&mut r);
            let y = (0..arity)
                .map(|_| {
                    // heteroskedastic across participants so HC0 differs from the model form
                    let scale = 1.0 + 0.5 * x.first().copied().unwrap_or(0.0).abs();
                    mean + scale * (rho.sqrt() * shared + (1.0 - rho).sqrt() * normal(&mut r))
                })
                .collect();
            records.push(ParticipantRecord::new(format!("p{j}-{i}"), format!("e{j}"), y, x));
        }
    }
    let names = (1..=q).map(|c| format!("x{c}")).collect();
    EvaluationDataset::from_participants(records, names, vec![]).unwrap()
}

/// Least squares through the SVD of the dense design.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    x.clone().svd(true, true).solve(y, 1e-14).unwrap()
}

/// (XᵀX)⁻¹ through the triangular factor of a QR decomposition.
pub fn xtx_inverse(x: &DMatrix<f64>) -> DMatrix<f64> {
    let r = x.clone().qr().r();
    let r_inv = r.try_inverse().unwrap();
    &r_inv * r_inv.transpose()
}

/// White's heteroskedasticity-robust covariance without small-sample scaling.
pub fn hc0(x: &DMatrix<f64>, residuals: &DVector<f64>) -> DMatrix<f64> {
    let bread = xtx_inverse(x);
    let mut meat = DMatrix::zeros(x.ncols(), x.ncols());
    for i in 0..x.nrows() {
        let row = x.row(i).transpose();
        meat += &row * row.transpose() * residuals[i].powi(2);
    }
    &bread * meat * &bread
}

/// Random symmetric positive definite matrix.
pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    let ridge: f64 = rng.random_range(0.05..1.0);
    &a * a.transpose() / d as f64 + DMatrix::identity(d, d) * ridge
}

/// Positions sorted ascending by value, lower position first among equals.
pub fn sorted_positions(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));
    idx
}

pub fn trunc_mean_oracle(values: &[f64], g: usize) -> f64 {
    let idx = sorted_positions(values);
    let kept = &idx[g..values.len() - g];
    kept.iter().map(|&i| values[i]).sum::<f64>() / kept.len() as f64
}

/// Contrast written out from the piecewise definition.
pub fn contrast_oracle(values: &[f64], g: usize, m: usize) -> DVector<f64> {
    let d = values.len();
    let idx = sorted_positions(values);
    let mut trimmed = vec![false; d];
    for &i in idx[..g].iter().chain(&idx[d - g..]) {
        trimmed[i] = true;
    }
    let n_kept = (d - 2 * g) as f64;
    DVector::from_fn(d, |h, _| match (trimmed[h], h == m) {
        (true, true) => 1.0,
        (true, false) => 0.0,
        (false, true) => 1.0 - 1.0 / n_kept,
        (false, false) => -1.0 / n_kept,
    })
}

/// Exhaustive scan of (Lᵀβ)² / (LᵀΩL) over every candidate.
pub fn mesd_oracle(beta: &[f64], omega: &DMatrix<f64>, g: usize) -> (f64, usize) {
    let b = DVector::from_row_slice(beta);
    let mut best = (-1.0, 0);
    for m in 0..beta.len() {
        let l = contrast_oracle(beta, g, m);
        let ratio = l.dot(&b).powi(2) / (l.transpose() * omega * &l)[(0, 0)];
        if ratio > best.0 {
            best = (ratio, m);
        }
    }
    best
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}
