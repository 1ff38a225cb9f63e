//! Gaussian GEE with identity link.
//!
//! The mean is linear, so each iteration is a generalized least squares solve
//! with the working correlation rebuilt from moment estimates of the
//! correlation parameters and the dispersion. Covariates are centered and
//! scaled internally; the evaluator indicators span the constant, so this is
//! an exact reparametrization `θ = J θ_work` and every reported quantity is
//! mapped back through `J`.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::DesignMatrix;
use crate::error::{Error, Result};

/// Margin kept between estimated correlation parameters and the boundary of
/// their valid range.
pub const CORRELATION_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    #[default]
    Independent,
    Exchangeable,
    Unstructured,
}

impl FromStr for CorrelationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "independent" | "independence" => Ok(CorrelationKind::Independent),
            "exchangeable" => Ok(CorrelationKind::Exchangeable),
            "unstructured" => Ok(CorrelationKind::Unstructured),
            other => Err(Error::Config(format!("unknown working correlation `{other}`"))),
        }
    }
}

impl fmt::Display for CorrelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrelationKind::Independent => "independent",
            CorrelationKind::Exchangeable => "exchangeable",
            CorrelationKind::Unstructured => "unstructured",
        })
    }
}

/// Which covariance estimate of the evaluator effects feeds the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceChoice {
    #[default]
    Model,
    Sandwich,
}

impl FromStr for VarianceChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "model" | "model-based" | "model_based" => Ok(VarianceChoice::Model),
            "sandwich" | "robust" => Ok(VarianceChoice::Sandwich),
            other => Err(Error::Config(format!("unknown variance estimator `{other}`"))),
        }
    }
}

impl fmt::Display for VarianceChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceChoice::Model => "model",
            VarianceChoice::Sandwich => "sandwich",
        })
    }
}

/// Working correlation with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WorkingCorrelation {
    Independent,
    Exchangeable { nu: f64 },
    /// Full correlation over unit positions, unit diagonal.
    Unstructured { nu: Vec<Vec<f64>> },
}

impl WorkingCorrelation {
    pub fn kind(&self) -> CorrelationKind {
        match self {
            WorkingCorrelation::Independent => CorrelationKind::Independent,
            WorkingCorrelation::Exchangeable { .. } => CorrelationKind::Exchangeable,
            WorkingCorrelation::Unstructured { .. } => CorrelationKind::Unstructured,
        }
    }

    /// Correlation matrix for a cluster observed at `positions`.
    pub fn matrix(&self, positions: &[usize]) -> DMatrix<f64> {
        let r = positions.len();
        DMatrix::from_fn(r, r, |a, b| {
            if a == b {
                1.0
            } else {
                match self {
                    WorkingCorrelation::Independent => 0.0,
                    WorkingCorrelation::Exchangeable { nu } => *nu,
                    WorkingCorrelation::Unstructured { nu } => nu[positions[a]][positions[b]],
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeeOptions {
    /// Relative infinity-norm change in θ below which iteration stops.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Return the last iterate flagged `converged = false` instead of an error.
    pub allow_nonconvergence: bool,
}

impl Default for GeeOptions {
    fn default() -> Self {
        GeeOptions {
            tolerance: 1e-8,
            max_iterations: 100,
            allow_nonconvergence: false,
        }
    }
}

/// Bread and meat of the covariance estimators, in working coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInternals {
    /// Maps working coordinates to θ.
    pub transform: DMatrix<f64>,
    /// Σ_i X̃_iᵀ R_i⁻¹ X̃_i
    pub bread: DMatrix<f64>,
    pub bread_inverse: DMatrix<f64>,
    /// Σ_i X̃_iᵀ R_i⁻¹ e_i e_iᵀ R_i⁻¹ X̃_i
    pub meat: DMatrix<f64>,
    pub phi: f64,
    pub beta_range: Range<usize>,
}

impl FitInternals {
    pub fn model_covariance(&self) -> DMatrix<f64> {
        let inner = &self.bread_inverse * self.phi;
        symmetric(&self.transform * inner * self.transform.transpose())
    }

    pub fn sandwich_covariance(&self) -> DMatrix<f64> {
        let inner = &self.bread_inverse * &self.meat * &self.bread_inverse;
        symmetric(&self.transform * inner * self.transform.transpose())
    }

    fn beta_block(&self, full: &DMatrix<f64>) -> DMatrix<f64> {
        let r = &self.beta_range;
        full.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }
}

/// β-block of φ (Σ Dᵀ V⁻¹ D)⁻¹ with V the unit-variance working correlation.
pub fn model_based_variance(internals: &FitInternals) -> DMatrix<f64> {
    internals.beta_block(&internals.model_covariance())
}

/// β-block of A⁻¹ B A⁻¹.
pub fn sandwich_variance(internals: &FitInternals) -> DMatrix<f64> {
    internals.beta_block(&internals.sandwich_covariance())
}

fn symmetric(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

#[derive(Debug, Clone)]
pub struct GeeFit {
    pub column_names: Vec<String>,
    pub evaluator_labels: Vec<String>,
    /// All coefficients in design column order (β, γ, η).
    pub theta_hat: DVector<f64>,
    pub beta_hat: DVector<f64>,
    pub omega_model: DMatrix<f64>,
    pub omega_sandwich: DMatrix<f64>,
    /// Full covariance of θ̂, model-based.
    pub theta_cov_model: DMatrix<f64>,
    pub theta_cov_sandwich: DMatrix<f64>,
    /// Estimated correlation parameters ν̂.
    pub correlation: WorkingCorrelation,
    pub phi_hat: f64,
    pub iterations: usize,
    pub converged: bool,
    pub last_relative_change: f64,
    pub internals: FitInternals,
}

impl GeeFit {
    pub fn omega(&self, choice: VarianceChoice) -> &DMatrix<f64> {
        match choice {
            VarianceChoice::Model => &self.omega_model,
            VarianceChoice::Sandwich => &self.omega_sandwich,
        }
    }

    pub fn standard_errors(&self, choice: VarianceChoice) -> DVector<f64> {
        let cov = match choice {
            VarianceChoice::Model => &self.theta_cov_model,
            VarianceChoice::Sandwich => &self.theta_cov_sandwich,
        };
        cov.diagonal().map(|v| v.max(0.0).sqrt())
    }
}

/// Solves the estimating equation for `design` under the given working
/// correlation, starting from the ordinary least squares fit.
pub fn fit_gee(design: &DesignMatrix, kind: CorrelationKind, options: &GeeOptions) -> Result<GeeFit> {
    if options.max_iterations == 0 || options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::Config("GEE needs a positive tolerance and at least one iteration".into()));
    }
    if kind != CorrelationKind::Independent && design.max_cluster_size() < 2 {
        return Err(Error::DegenerateStructure(format!(
            "every cluster has a single element, so a {kind} working correlation is not estimable; use independent"
        )));
    }
    let work = WorkingDesign::new(design);
    if design.nrows() <= work.p {
        return Err(Error::Numerical(format!(
            "{} observations leave no residual degrees of freedom for {} coefficients",
            design.nrows(),
            work.p
        )));
    }

    let mut correlation = WorkingCorrelation::Independent;
    let mut theta_work = work.solve(&correlation)?;
    let mut theta = &work.transform * &theta_work;
    let mut iterations = 1;
    let mut converged = true;
    let mut last_change = 0.0;

    if kind != CorrelationKind::Independent {
        converged = false;
        while iterations < options.max_iterations {
            let residuals = work.residuals(&theta_work);
            let phi = work.dispersion(&residuals);
            correlation = estimate_correlation(
                residuals.as_slice(),
                design.clusters(),
                design.unit_positions(),
                design.n_unit_positions(),
                kind,
                phi,
                work.p,
            )?;
            let next_work = work.solve(&correlation)?;
            let next = &work.transform * &next_work;
            last_change = relative_change(&theta, &next);
            theta_work = next_work;
            theta = next;
            iterations += 1;
            if last_change < options.tolerance {
                converged = true;
                break;
            }
        }
        if !converged && !options.allow_nonconvergence {
            return Err(Error::NotConverged {
                iterations,
                last_change,
            });
        }
    }

    let residuals = work.residuals(&theta_work);
    let phi = work.dispersion(&residuals);
    if kind != CorrelationKind::Independent {
        correlation = estimate_correlation(
            residuals.as_slice(),
            design.clusters(),
            design.unit_positions(),
            design.n_unit_positions(),
            kind,
            phi,
            work.p,
        )?;
    }
    let whiteners = work.whiteners(&correlation)?;
    let (bread, _) = work.normal_equations(&whiteners);
    let factor = EquilibratedCholesky::new(&bread)?;
    let bread_inverse = factor.inverse();
    let meat = work.meat(&whiteners, &residuals);
    let internals = FitInternals {
        transform: work.transform.clone(),
        bread,
        bread_inverse,
        meat,
        phi,
        beta_range: design.beta_range(),
    };
    let theta_cov_model = internals.model_covariance();
    let theta_cov_sandwich = internals.sandwich_covariance();
    let beta = design.beta_range();
    Ok(GeeFit {
        column_names: design.column_names(),
        evaluator_labels: design.evaluator_labels().to_vec(),
        beta_hat: theta.rows(beta.start, beta.len()).into_owned(),
        omega_model: internals.beta_block(&theta_cov_model),
        omega_sandwich: internals.beta_block(&theta_cov_sandwich),
        theta_hat: theta,
        theta_cov_model,
        theta_cov_sandwich,
        correlation,
        phi_hat: phi,
        iterations,
        converged,
        last_relative_change: last_change,
        internals,
    })
}

fn relative_change(old: &DVector<f64>, new: &DVector<f64>) -> f64 {
    let delta = (new - old).amax();
    if delta == 0.0 {
        0.0
    } else {
        delta / new.amax().max(f64::MIN_POSITIVE)
    }
}

/// Moment estimate of the working correlation parameters from raw residuals.
///
/// Exchangeable: ν̂ = [Σ_i Σ_{a<b} e_ia e_ib / φ] / [Σ_i r_i(r_i−1)/2 − p].
/// Unstructured: the same ratio for each pair of unit positions, over the
/// clusters observing both. Estimates are clamped inside the valid range with
/// a [`CORRELATION_MARGIN`]. With φ = 0 (an exact fit) the residuals carry no
/// correlation information and ν̂ = 0.
pub fn estimate_correlation(
    residuals: &[f64],
    clusters: &[Range<usize>],
    unit_positions: &[usize],
    n_positions: usize,
    kind: CorrelationKind,
    phi: f64,
    p_dim: usize,
) -> Result<WorkingCorrelation> {
    let max_size = clusters.iter().map(|c| c.len()).max().unwrap_or(0);
    match kind {
        CorrelationKind::Independent => Ok(WorkingCorrelation::Independent),
        CorrelationKind::Exchangeable => {
            if max_size < 2 {
                return Err(Error::DegenerateStructure(
                    "every cluster has a single element; use the independent working correlation".into(),
                ));
            }
            let mut cross = 0.0;
            let mut pairs = 0usize;
            for c in clusters {
                let e = &residuals[c.clone()];
                for a in 0..e.len() {
                    for b in a + 1..e.len() {
                        cross += e[a] * e[b];
                    }
                }
                pairs += c.len() * (c.len() - 1) / 2;
            }
            if pairs <= p_dim {
                return Err(Error::DegenerateStructure(format!(
                    "{pairs} within-cluster pairs cannot support {p_dim} coefficients"
                )));
            }
            let nu = if phi > 0.0 { cross / phi / (pairs - p_dim) as f64 } else { 0.0 };
            let lower = -1.0 / (max_size as f64 - 1.0) + CORRELATION_MARGIN;
            let upper = 1.0 - CORRELATION_MARGIN;
            Ok(WorkingCorrelation::Exchangeable {
                nu: nu.clamp(lower, upper),
            })
        }
        CorrelationKind::Unstructured => {
            if max_size < 2 {
                return Err(Error::DegenerateStructure(
                    "every cluster has a single element; use the independent working correlation".into(),
                ));
            }
            let p = n_positions;
            let mut cross = DMatrix::<f64>::zeros(p, p);
            let mut counts = DMatrix::<usize>::zeros(p, p);
            for c in clusters {
                for a in c.clone() {
                    for b in a + 1..c.end {
                        let (u, v) = (unit_positions[a], unit_positions[b]);
                        cross[(u, v)] += residuals[a] * residuals[b];
                        counts[(u, v)] += 1;
                    }
                }
            }
            let mut nu = DMatrix::<f64>::identity(p, p);
            for u in 0..p {
                for v in u + 1..p {
                    let n_uv = counts[(u, v)] + counts[(v, u)];
                    if n_uv == 0 {
                        continue;
                    }
                    if n_uv <= p_dim {
                        return Err(Error::DegenerateStructure(format!(
                            "unit positions {u} and {v} are observed together in only {n_uv} clusters"
                        )));
                    }
                    let value = if phi > 0.0 {
                        (cross[(u, v)] + cross[(v, u)]) / phi / (n_uv - p_dim) as f64
                    } else {
                        0.0
                    };
                    let value = value.clamp(-1.0 + CORRELATION_MARGIN, 1.0 - CORRELATION_MARGIN);
                    nu[(u, v)] = value;
                    nu[(v, u)] = value;
                }
            }
            let nu = nearest_correlation(nu);
            Ok(WorkingCorrelation::Unstructured {
                nu: nu.row_iter().map(|r| r.iter().copied().collect()).collect(),
            })
        }
    }
}

/// Lifts eigenvalues below the margin and restores the unit diagonal.
fn nearest_correlation(nu: DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(nu.clone());
    if eig.eigenvalues.min() >= CORRELATION_MARGIN {
        return nu;
    }
    let lifted = eig.eigenvalues.map(|l| l.max(CORRELATION_MARGIN));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&lifted) * eig.eigenvectors.transpose();
    let d = rebuilt.diagonal().map(|v| 1.0 / v.sqrt());
    let n = rebuilt.nrows();
    DMatrix::from_fn(n, n, |a, b| if a == b { 1.0 } else { rebuilt[(a, b)] * d[a] * d[b] })
}

/// Cholesky factor of `D A D` with `D = diag(A)^{-1/2}`.
struct EquilibratedCholesky {
    scale: DVector<f64>,
    factor: Cholesky<f64, nalgebra::Dyn>,
}

impl EquilibratedCholesky {
    fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let diag = a.diagonal();
        if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
            return Err(Error::Numerical("information matrix has a non-positive diagonal".into()));
        }
        let scale = diag.map(|d| 1.0 / d.sqrt());
        let scaled = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * scale[i] * scale[j]);
        let factor = Cholesky::new(scaled)
            .ok_or_else(|| Error::Numerical("information matrix is not positive definite".into()))?;
        Ok(EquilibratedCholesky { scale, factor })
    }

    fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let scaled = b.component_mul(&self.scale);
        self.factor.solve(&scaled).component_mul(&self.scale)
    }

    fn inverse(&self) -> DMatrix<f64> {
        let n = self.scale.len();
        let inner = self.factor.solve(&DMatrix::identity(n, n));
        symmetric(DMatrix::from_fn(n, n, |i, j| inner[(i, j)] * self.scale[i] * self.scale[j]))
    }
}

/// Inverse Cholesky factor of each cluster's working correlation, keyed by
/// the cluster's unit positions. `None` means the identity.
type Whiteners = Option<HashMap<Vec<usize>, DMatrix<f64>>>;

/// The design in working coordinates: indicators plus centered, scaled
/// covariates stored row-major.
struct WorkingDesign<'a> {
    design: &'a DesignMatrix,
    m: usize,
    c: usize,
    p: usize,
    rows: Vec<f64>,
    transform: DMatrix<f64>,
}

impl<'a> WorkingDesign<'a> {
    fn new(design: &'a DesignMatrix) -> Self {
        let m = design.n_evaluators();
        let x = design.covariates();
        let (n, c) = (x.nrows(), x.ncols());
        let mut means = vec![0.0; c];
        let mut scales = vec![1.0; c];
        for k in 0..c {
            let col = x.column(k);
            let mean = col.mean();
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            means[k] = mean;
            if sd > 0.0 {
                scales[k] = sd;
            }
        }
        let mut rows = vec![0.0; n * c];
        for i in 0..n {
            for k in 0..c {
                rows[i * c + k] = (x[(i, k)] - means[k]) / scales[k];
            }
        }
        let p = m + c;
        let mut transform = DMatrix::identity(p, p);
        for k in 0..c {
            transform[(m + k, m + k)] = 1.0 / scales[k];
            for j in 0..m {
                transform[(j, m + k)] = -means[k] / scales[k];
            }
        }
        WorkingDesign {
            design,
            m,
            c,
            p,
            rows,
            transform,
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.c..(i + 1) * self.c]
    }

    fn whiteners(&self, correlation: &WorkingCorrelation) -> Result<Whiteners> {
        if correlation.kind() == CorrelationKind::Independent {
            return Ok(None);
        }
        let positions = self.design.unit_positions();
        let mut map: HashMap<Vec<usize>, DMatrix<f64>> = HashMap::new();
        for (cluster, id) in self.design.clusters().iter().zip(self.design.cluster_ids()) {
            let key = &positions[cluster.clone()];
            if key.len() < 2 || map.contains_key(key) {
                continue;
            }
            let chol = Cholesky::new(correlation.matrix(key)).ok_or_else(|| {
                Error::Numerical(format!("working correlation of cluster `{id}` is singular"))
            })?;
            let l = chol.l();
            let inverse = l
                .solve_lower_triangular(&DMatrix::identity(key.len(), key.len()))
                .ok_or_else(|| Error::Numerical(format!("working correlation of cluster `{id}` is singular")))?;
            map.insert(key.to_vec(), inverse);
        }
        Ok(Some(map))
    }

    /// Calls `visit(j, indicator, covariates, response)` for every whitened
    /// row of every cluster, where `j` is the cluster's evaluator column.
    fn for_each_whitened_row(
        &self,
        whiteners: &Whiteners,
        values: &[f64],
        mut visit: impl FnMut(usize, &mut ClusterRows),
    ) {
        let positions = self.design.unit_positions();
        let evaluator = self.design.row_evaluator();
        let mut buffer = ClusterRows::new(self.c);
        for cluster in self.design.clusters() {
            let r = cluster.len();
            buffer.reset(r);
            let w = whiteners
                .as_ref()
                .and_then(|map| if r > 1 { map.get(&positions[cluster.clone()]) } else { None });
            match w {
                None => {
                    for (a, i) in cluster.clone().enumerate() {
                        buffer.indicator[a] = 1.0;
                        buffer.covariates[a * self.c..(a + 1) * self.c].copy_from_slice(self.row(i));
                        buffer.value[a] = values[i];
                    }
                }
                Some(w) => {
                    for a in 0..r {
                        let mut ind = 0.0;
                        let mut val = 0.0;
                        let out = &mut buffer.covariates[a * self.c..(a + 1) * self.c];
                        for b in 0..=a {
                            let wab = w[(a, b)];
                            let i = cluster.start + b;
                            ind += wab;
                            val += wab * values[i];
                            for (o, x) in out.iter_mut().zip(self.row(i)) {
                                *o += wab * x;
                            }
                        }
                        buffer.indicator[a] = ind;
                        buffer.value[a] = val;
                    }
                }
            }
            visit(evaluator[cluster.start], &mut buffer);
        }
    }

    /// A = Σ X̃ᵀX̃ and b = Σ X̃ᵀỹ.
    fn normal_equations(&self, whiteners: &Whiteners) -> (DMatrix<f64>, DVector<f64>) {
        let (m, c, p) = (self.m, self.c, self.p);
        let mut a = DMatrix::zeros(p, p);
        let mut b = DVector::zeros(p);
        let y = self.design.response().as_slice();
        self.for_each_whitened_row(whiteners, y, |j, rows| {
            for k in 0..rows.len {
                let ind = rows.indicator[k];
                let x = &rows.covariates[k * c..(k + 1) * c];
                let v = rows.value[k];
                a[(j, j)] += ind * ind;
                b[j] += ind * v;
                for s in 0..c {
                    a[(j, m + s)] += ind * x[s];
                    b[m + s] += x[s] * v;
                    for t in s..c {
                        a[(m + s, m + t)] += x[s] * x[t];
                    }
                }
            }
        });
        a.fill_lower_triangle_with_upper_triangle();
        (a, b)
    }

    /// B = Σ_i s_i s_iᵀ with s_i = X̃_iᵀ ẽ_i.
    fn meat(&self, whiteners: &Whiteners, residuals: &DVector<f64>) -> DMatrix<f64> {
        let (m, c, p) = (self.m, self.c, self.p);
        let mut meat = DMatrix::zeros(p, p);
        let mut score = vec![0.0; c];
        self.for_each_whitened_row(whiteners, residuals.as_slice(), |j, rows| {
            let mut s_ind = 0.0;
            score.iter_mut().for_each(|s| *s = 0.0);
            for k in 0..rows.len {
                let e = rows.value[k];
                s_ind += rows.indicator[k] * e;
                for (s, x) in score.iter_mut().zip(&rows.covariates[k * c..(k + 1) * c]) {
                    *s += x * e;
                }
            }
            meat[(j, j)] += s_ind * s_ind;
            for s in 0..c {
                meat[(j, m + s)] += s_ind * score[s];
                for t in s..c {
                    meat[(m + s, m + t)] += score[s] * score[t];
                }
            }
        });
        meat.fill_lower_triangle_with_upper_triangle();
        meat
    }

    fn solve(&self, correlation: &WorkingCorrelation) -> Result<DVector<f64>> {
        let whiteners = self.whiteners(correlation)?;
        let (a, b) = self.normal_equations(&whiteners);
        let factor = EquilibratedCholesky::new(&a)?;
        Ok(factor.solve(&b))
    }

    fn residuals(&self, theta_work: &DVector<f64>) -> DVector<f64> {
        let y = self.design.response();
        let evaluator = self.design.row_evaluator();
        let gamma = &theta_work.as_slice()[self.m..];
        DVector::from_fn(y.len(), |i, _| {
            let fitted = theta_work[evaluator[i]] + self.row(i).iter().zip(gamma).map(|(x, g)| x * g).sum::<f64>();
            y[i] - fitted
        })
    }

    fn dispersion(&self, residuals: &DVector<f64>) -> f64 {
        residuals.norm_squared() / (residuals.len() - self.p) as f64
    }
}

struct ClusterRows {
    len: usize,
    indicator: Vec<f64>,
    covariates: Vec<f64>,
    value: Vec<f64>,
    c: usize,
}

impl ClusterRows {
    fn new(c: usize) -> Self {
        ClusterRows {
            len: 0,
            indicator: Vec::new(),
            covariates: Vec::new(),
            value: Vec::new(),
            c,
        }
    }

    fn reset(&mut self, r: usize) {
        self.len = r;
        self.indicator.clear();
        self.indicator.resize(r, 0.0);
        self.value.clear();
        self.value.resize(r, 0.0);
        self.covariates.clear();
        self.covariates.resize(r * self.c, 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_design, EvaluationDataset, ParticipantRecord};

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {{
            let (a, b): (f64, f64) = ($a, $b);
            assert!((a - b).abs() <= $tol, "{} vs {} (tol {})", a, b, $tol);
        }};
    }

    fn single_evaluator(values: &[f64]) -> DesignMatrix {
        let ds = EvaluationDataset::from_participants(
            values
                .iter()
                .enumerate()
                .map(|(i, &y)| ParticipantRecord::new(format!("p{i}"), "e", vec![y], vec![]))
                .collect(),
            vec![],
            vec![],
        )
        .unwrap();
        build_design(&ds).unwrap()
    }

    #[test]
    fn sample_mean_and_variance() {
        let fit = fit_gee(&single_evaluator(&[1.0, 2.0, 3.0]), CorrelationKind::Independent, &GeeOptions::default())
            .unwrap();
        assert_close!(fit.beta_hat[0], 2.0, 1e-12);
        assert_close!(fit.phi_hat, 1.0, 1e-12);
        assert_close!(fit.omega_model[(0, 0)], 1.0 / 3.0, 1e-12);
        assert!(fit.converged);
    }

    #[test]
    fn zero_residuals_give_zero_sandwich() {
        let fit =
            fit_gee(&single_evaluator(&[4.0, 4.0, 4.0]), CorrelationKind::Independent, &GeeOptions::default()).unwrap();
        assert_close!(fit.omega_sandwich[(0, 0)], 0.0, 1e-24);
        assert_close!(fit.phi_hat, 0.0, 1e-24);
    }

    #[test]
    fn correlated_structures_need_multi_element_clusters() {
        let err = fit_gee(&single_evaluator(&[1.0, 2.0, 3.0]), CorrelationKind::Exchangeable, &GeeOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateStructure(_)));
    }

    #[test]
    fn exchangeable_clamps_at_both_bounds() {
        let clusters: Vec<Range<usize>> = (0..50).map(|i| 2 * i..2 * i + 2).collect();
        let positions: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let same: Vec<f64> = (0..100).map(|i| ((i / 2) as f64 * 0.37).sin()).collect();
        let phi = same.iter().map(|e| e * e).sum::<f64>() / (100 - 1) as f64;
        let nu = estimate_correlation(&same, &clusters, &positions, 2, CorrelationKind::Exchangeable, phi, 1).unwrap();
        assert_eq!(nu, WorkingCorrelation::Exchangeable { nu: 1.0 - CORRELATION_MARGIN });

        let opposite: Vec<f64> = same.iter().enumerate().map(|(i, e)| if i % 2 == 0 { *e } else { -e }).collect();
        let nu =
            estimate_correlation(&opposite, &clusters, &positions, 2, CorrelationKind::Exchangeable, phi, 1).unwrap();
        assert_eq!(nu, WorkingCorrelation::Exchangeable { nu: -1.0 + CORRELATION_MARGIN });

        let nu =
            estimate_correlation(&opposite, &clusters, &positions, 2, CorrelationKind::Unstructured, phi, 1).unwrap();
        match nu {
            WorkingCorrelation::Unstructured { nu } => {
                assert!(nu[0][1] < -0.99 && nu[0][1] == nu[1][0]);
                assert_eq!(nu[0][0], 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singleton_clusters_are_degenerate() {
        let clusters: Vec<Range<usize>> = (0..5).map(|i| i..i + 1).collect();
        let err = estimate_correlation(&[0.1; 5], &clusters, &[0; 5], 1, CorrelationKind::Exchangeable, 1.0, 1);
        assert!(matches!(err, Err(Error::DegenerateStructure(_))));
    }

    #[test]
    fn nearest_correlation_repairs_indefinite_input() {
        let nu = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let fixed = nearest_correlation(nu);
        assert!(SymmetricEigen::new(fixed.clone()).eigenvalues.min() > 0.0);
        for i in 0..3 {
            assert_close!(fixed[(i, i)], 1.0, 1e-12);
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("Exchangeable".parse::<CorrelationKind>().unwrap(), CorrelationKind::Exchangeable);
        assert_eq!("model-based".parse::<VarianceChoice>().unwrap(), VarianceChoice::Model);
        assert!("ar1".parse::<CorrelationKind>().is_err());
    }
}
