use std::collections::BTreeSet;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::EvaluationDataset;
use crate::error::{Error, Result};

/// Columns below this fraction of their own norm after projecting out the
/// preceding columns are treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Regression design with one row per outcome element.
///
/// Columns are the M evaluator indicators, then the participant covariates,
/// then the unit covariates. There is no intercept column: the indicators
/// span it. The indicator block is stored as the column index of each row's
/// single nonzero entry; [`DesignMatrix::to_dense`] materializes the full
/// matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    evaluator_labels: Vec<String>,
    covariate_names: Vec<String>,
    n_participant_covariates: usize,
    row_evaluator: Vec<usize>,
    covariates: DMatrix<f64>,
    response: DVector<f64>,
    clusters: Vec<Range<usize>>,
    cluster_ids: Vec<String>,
    unit_positions: Vec<usize>,
    n_unit_positions: usize,
}

/// Assembles the design for `dataset` and checks that it has full column rank.
pub fn build_design(dataset: &EvaluationDataset) -> Result<DesignMatrix> {
    let n = dataset.n_observations();
    let q = dataset.covariate_names().len();
    let u = dataset.unit_covariate_names().len();
    let position = dataset.evaluator_positions();

    let units: BTreeSet<u32> = dataset
        .participants()
        .iter()
        .flat_map(|p| p.unit_index.iter().copied())
        .collect();
    let units: Vec<u32> = units.into_iter().collect();

    let mut row_evaluator = Vec::with_capacity(n);
    let mut covariates = DMatrix::zeros(n, q + u);
    let mut response = DVector::zeros(n);
    let mut clusters = Vec::with_capacity(dataset.n_participants());
    let mut cluster_ids = Vec::with_capacity(dataset.n_participants());
    let mut unit_positions = Vec::with_capacity(n);
    let mut row = 0;
    for p in dataset.participants() {
        let start = row;
        let j = position[p.evaluator.as_str()];
        for (k, &y) in p.outcomes.iter().enumerate() {
            row_evaluator.push(j);
            response[row] = y;
            for (c, &x) in p.participant_covariates.iter().enumerate() {
                covariates[(row, c)] = x;
            }
            if let Some(unit_row) = p.unit_covariates.get(k) {
                for (c, &x) in unit_row.iter().enumerate() {
                    covariates[(row, q + c)] = x;
                }
            }
            unit_positions.push(units.binary_search(&p.unit_index[k]).expect("known unit index"));
            row += 1;
        }
        clusters.push(start..row);
        cluster_ids.push(p.id.clone());
    }

    let mut covariate_names = dataset.covariate_names().to_vec();
    covariate_names.extend_from_slice(dataset.unit_covariate_names());
    let design = DesignMatrix {
        evaluator_labels: dataset.evaluator_ids().to_vec(),
        covariate_names,
        n_participant_covariates: q,
        row_evaluator,
        covariates,
        response,
        clusters,
        cluster_ids,
        unit_positions,
        n_unit_positions: units.len(),
    };
    design.check_rank()?;
    Ok(design)
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.row_evaluator.len()
    }

    pub fn ncols(&self) -> usize {
        self.n_evaluators() + self.covariates.ncols()
    }

    /// M
    pub fn n_evaluators(&self) -> usize {
        self.evaluator_labels.len()
    }

    pub fn beta_range(&self) -> Range<usize> {
        0..self.n_evaluators()
    }

    pub fn gamma_range(&self) -> Range<usize> {
        let m = self.n_evaluators();
        m..m + self.n_participant_covariates
    }

    pub fn eta_range(&self) -> Range<usize> {
        self.gamma_range().end..self.ncols()
    }

    pub fn evaluator_labels(&self) -> &[String] {
        &self.evaluator_labels
    }

    pub fn column_names(&self) -> Vec<String> {
        self.evaluator_labels
            .iter()
            .map(|l| format!("evaluator[{l}]"))
            .chain(self.covariate_names.iter().cloned())
            .collect()
    }

    /// Indicator column of each row.
    pub fn row_evaluator(&self) -> &[usize] {
        &self.row_evaluator
    }

    /// The non-indicator columns, rows × (q + unit covariates).
    pub fn covariates(&self) -> &DMatrix<f64> {
        &self.covariates
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.response
    }

    /// Row span of each participant.
    pub fn clusters(&self) -> &[Range<usize>] {
        &self.clusters
    }

    pub fn cluster_ids(&self) -> &[String] {
        &self.cluster_ids
    }

    /// Position of each row's unit index among all distinct unit indices.
    pub fn unit_positions(&self) -> &[usize] {
        &self.unit_positions
    }

    pub fn n_unit_positions(&self) -> usize {
        self.n_unit_positions
    }

    pub fn max_cluster_size(&self) -> usize {
        self.clusters.iter().map(|c| c.len()).max().unwrap_or(0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.n_evaluators();
        let mut x = DMatrix::zeros(self.nrows(), self.ncols());
        for (i, &j) in self.row_evaluator.iter().enumerate() {
            x[(i, j)] = 1.0;
        }
        x.columns_mut(m, self.covariates.ncols()).copy_from(&self.covariates);
        x
    }

    /// The indicator columns are mutually orthogonal and each is nonzero, so
    /// the design has full rank exactly when the covariates, after removing
    /// their within-evaluator means, are linearly independent. Columns are
    /// orthogonalized in order (twice, for stability) and the first one whose
    /// remaining norm falls below `RANK_TOLERANCE` of its original norm is
    /// reported.
    fn check_rank(&self) -> Result<()> {
        let m = self.n_evaluators();
        let n = self.nrows();
        let names = self.column_names();
        if n < self.ncols() {
            return Err(Error::Identifiability {
                column: names[n.min(self.ncols() - 1)].clone(),
            });
        }
        let mut counts = vec![0.0; m];
        for &j in &self.row_evaluator {
            counts[j] += 1.0;
        }
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for c in 0..self.covariates.ncols() {
            let column = self.covariates.column(c);
            let norm = column.norm();
            let mut sums = vec![0.0; m];
            for (i, &j) in self.row_evaluator.iter().enumerate() {
                sums[j] += column[i];
            }
            let mut v = DVector::from_fn(n, |i, _| {
                let j = self.row_evaluator[i];
                column[i] - sums[j] / counts[j]
            });
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dot(&v);
                    v.axpy(-proj, b, 1.0);
                }
            }
            let remaining = v.norm();
            if norm == 0.0 || remaining <= RANK_TOLERANCE * norm {
                return Err(Error::Identifiability { column: names[m + c].clone() });
            }
            basis.push(v / remaining);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ParticipantRecord;

    fn dataset(records: Vec<ParticipantRecord>, covs: &[&str]) -> EvaluationDataset {
        EvaluationDataset::from_participants(records, covs.iter().map(|s| s.to_string()).collect(), vec![])
            .unwrap()
    }

    #[test]
    fn single_evaluator_is_a_column_of_ones() {
        let ds = dataset(
            (0..3)
                .map(|i| ParticipantRecord::new(format!("p{i}"), "e", vec![i as f64], vec![]))
                .collect(),
            &[],
        );
        let x = build_design(&ds).unwrap().to_dense();
        assert_eq!(x, DMatrix::from_element(3, 1, 1.0));
    }

    #[test]
    fn constant_covariate_is_not_identifiable() {
        let ds = dataset(
            (0..6)
                .map(|i| {
                    ParticipantRecord::new(format!("p{i}"), if i % 2 == 0 { "a" } else { "b" }, vec![i as f64], vec![1.0])
                })
                .collect(),
            &["one"],
        );
        let err = build_design(&ds).unwrap_err();
        assert!(matches!(err, Error::Identifiability { column } if column == "one"));
    }

    #[test]
    fn duplicated_covariate_names_the_later_column() {
        let ds = dataset(
            (0..8)
                .map(|i| {
                    let x = (i * i) as f64;
                    ParticipantRecord::new(format!("p{i}"), if i < 4 { "a" } else { "b" }, vec![1.0], vec![x, 2.0 * x + 1.0])
                })
                .collect(),
            &["x", "x2"],
        );
        let err = build_design(&ds).unwrap_err();
        assert!(matches!(err, Error::Identifiability { column } if column == "x2"));
    }

    #[test]
    fn layout_and_clusters() {
        let mut a = ParticipantRecord::new("p1", "a", vec![1.0, 2.0], vec![5.0]);
        a.unit_covariates = vec![vec![0.0], vec![1.0]];
        let mut b = ParticipantRecord::new("p2", "b", vec![3.0], vec![6.0]);
        b.unit_index = vec![2];
        b.unit_covariates = vec![vec![1.0]];
        let mut c = ParticipantRecord::new("p3", "a", vec![4.0, 7.0], vec![9.0]);
        c.unit_covariates = vec![vec![0.0], vec![1.0]];
        let mut d = ParticipantRecord::new("p4", "b", vec![4.0, 2.0], vec![1.0]);
        d.unit_covariates = vec![vec![0.0], vec![1.0]];
        let ds = EvaluationDataset::from_participants(vec![a, b, c, d], vec!["age".into()], vec!["right".into()])
            .unwrap();
        let design = build_design(&ds).unwrap();
        assert_eq!(design.nrows(), 7);
        assert_eq!(design.ncols(), 4);
        assert_eq!(design.beta_range(), 0..2);
        assert_eq!(design.gamma_range(), 2..3);
        assert_eq!(design.eta_range(), 3..4);
        assert_eq!(design.clusters(), &[0..2, 2..3, 3..5, 5..7]);
        assert_eq!(design.unit_positions(), &[0, 1, 1, 0, 1, 0, 1]);
        let x = design.to_dense();
        for i in 0..x.nrows() {
            assert_eq!(x.row(i).columns(0, 2).sum(), 1.0);
        }
        assert_eq!(x.row(2).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0, 6.0, 1.0]);
    }
}
