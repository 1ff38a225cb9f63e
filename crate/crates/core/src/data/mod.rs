//! Evaluation datasets: participants, the evaluator who measured them, and
//! their outcome elements with covariates.

mod design;
mod load;
mod schema;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use design::{build_design, DesignMatrix};
pub use load::{load_dataset, load_dataset_from_path, write_long};
pub use schema::{CategoricalColumn, Layout, SchemaConfig};

/// One study participant and all of their outcome elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub evaluator: String,
    /// Outcome elements, ordered by `unit_index`.
    pub outcomes: Vec<f64>,
    /// Within-participant element index (e.g. 1 = left ear, 2 = right ear),
    /// strictly increasing.
    pub unit_index: Vec<u32>,
    pub participant_covariates: Vec<f64>,
    /// Either empty or one row per outcome element.
    pub unit_covariates: Vec<Vec<f64>>,
}

impl ParticipantRecord {
    /// Record with `r` outcomes indexed `1..=r` and no unit-level covariates.
    pub fn new(id: impl Into<String>, evaluator: impl Into<String>, outcomes: Vec<f64>, covariates: Vec<f64>) -> Self {
        let unit_index = (1..=outcomes.len() as u32).collect();
        ParticipantRecord {
            id: id.into(),
            evaluator: evaluator.into(),
            outcomes,
            unit_index,
            participant_covariates: covariates,
            unit_covariates: Vec::new(),
        }
    }

    pub fn n_units(&self) -> usize {
        self.outcomes.len()
    }
}

/// A validated set of participant records.
///
/// Evaluator order is the order of `evaluator_ids`; every downstream report
/// refers to evaluators by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDataset {
    participants: Vec<ParticipantRecord>,
    evaluator_ids: Vec<String>,
    covariate_names: Vec<String>,
    unit_covariate_names: Vec<String>,
}

impl EvaluationDataset {
    pub fn new(
        participants: Vec<ParticipantRecord>,
        evaluator_ids: Vec<String>,
        covariate_names: Vec<String>,
        unit_covariate_names: Vec<String>,
    ) -> Result<Self> {
        let dataset = EvaluationDataset {
            participants,
            evaluator_ids,
            covariate_names,
            unit_covariate_names,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Builds a dataset whose evaluator order is the first-appearance order
    /// among `participants`.
    pub fn from_participants(
        participants: Vec<ParticipantRecord>,
        covariate_names: Vec<String>,
        unit_covariate_names: Vec<String>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut evaluator_ids = Vec::new();
        for p in &participants {
            if seen.insert(p.evaluator.as_str()) {
                evaluator_ids.push(p.evaluator.clone());
            }
        }
        Self::new(participants, evaluator_ids, covariate_names, unit_covariate_names)
    }

    pub fn participants(&self) -> &[ParticipantRecord] {
        &self.participants
    }

    pub fn evaluator_ids(&self) -> &[String] {
        &self.evaluator_ids
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn unit_covariate_names(&self) -> &[String] {
        &self.unit_covariate_names
    }

    /// N
    pub fn n_participants(&self) -> usize {
        self.participants.len()
    }

    /// M
    pub fn n_evaluators(&self) -> usize {
        self.evaluator_ids.len()
    }

    /// Total outcome elements, the sum of r_i.
    pub fn n_observations(&self) -> usize {
        self.participants.iter().map(|p| p.n_units()).sum()
    }

    /// N_j for each evaluator, in evaluator order.
    pub fn evaluator_counts(&self) -> Vec<usize> {
        let position = self.evaluator_positions();
        let mut counts = vec![0; self.evaluator_ids.len()];
        for p in &self.participants {
            counts[position[p.evaluator.as_str()]] += 1;
        }
        counts
    }

    pub(crate) fn evaluator_positions(&self) -> HashMap<&str, usize> {
        self.evaluator_ids
            .iter()
            .enumerate()
            .map(|(j, id)| (id.as_str(), j))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        let mut labels = HashSet::new();
        for id in &self.evaluator_ids {
            if id.is_empty() {
                return Err(Error::Integrity("empty evaluator label".into()));
            }
            if !labels.insert(id.as_str()) {
                return Err(Error::Integrity(format!("evaluator `{id}` listed twice")));
            }
        }
        if self.participants.is_empty() {
            return Err(Error::Integrity("dataset has no participants".into()));
        }

        let q = self.covariate_names.len();
        let u = self.unit_covariate_names.len();
        let mut ids = HashSet::new();
        let mut counts = vec![0usize; self.evaluator_ids.len()];
        let position = self.evaluator_positions();
        for p in &self.participants {
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Integrity(format!("participant `{}` appears twice", p.id)));
            }
            let Some(&j) = position.get(p.evaluator.as_str()) else {
                return Err(Error::Integrity(format!(
                    "participant `{}` references unknown evaluator `{}`",
                    p.id, p.evaluator
                )));
            };
            counts[j] += 1;
            if p.outcomes.is_empty() {
                return Err(Error::Integrity(format!("participant `{}` has no outcomes", p.id)));
            }
            if p.unit_index.len() != p.outcomes.len() {
                return Err(Error::Integrity(format!(
                    "participant `{}` has {} outcomes but {} unit indices",
                    p.id,
                    p.outcomes.len(),
                    p.unit_index.len()
                )));
            }
            if p.unit_index.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Integrity(format!(
                    "participant `{}` has repeated or unordered unit indices",
                    p.id
                )));
            }
            if p.outcomes.iter().any(|y| !y.is_finite()) {
                return Err(Error::Integrity(format!("participant `{}` has a non-finite outcome", p.id)));
            }
            if p.participant_covariates.len() != q {
                return Err(Error::Integrity(format!(
                    "participant `{}` has {} covariates, expected {q}",
                    p.id,
                    p.participant_covariates.len()
                )));
            }
            if p.participant_covariates.iter().any(|x| !x.is_finite()) {
                return Err(Error::Integrity(format!("participant `{}` has a non-finite covariate", p.id)));
            }
            if u == 0 {
                if !p.unit_covariates.is_empty() {
                    return Err(Error::Integrity(format!(
                        "participant `{}` carries unit covariates but none are declared",
                        p.id
                    )));
                }
            } else {
                if p.unit_covariates.len() != p.outcomes.len() {
                    return Err(Error::Integrity(format!(
                        "participant `{}` has {} unit-covariate rows for {} outcomes",
                        p.id,
                        p.unit_covariates.len(),
                        p.outcomes.len()
                    )));
                }
                for row in &p.unit_covariates {
                    if row.len() != u || row.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Integrity(format!(
                            "participant `{}` has a malformed unit-covariate row",
                            p.id
                        )));
                    }
                }
            }
        }
        if let Some(j) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Integrity(format!(
                "evaluator `{}` has no participants",
                self.evaluator_ids[j]
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, ev: &str, y: &[f64]) -> ParticipantRecord {
        ParticipantRecord::new(id, ev, y.to_vec(), vec![])
    }

    #[test]
    fn counts_sum_to_participants() {
        let ds = EvaluationDataset::from_participants(
            vec![record("a", "x", &[1.0]), record("b", "y", &[2.0, 3.0]), record("c", "x", &[4.0])],
            vec![],
            vec![],
        )
        .unwrap();
        assert_eq!(ds.evaluator_ids(), ["x", "y"]);
        assert_eq!(ds.evaluator_counts(), vec![2, 1]);
        assert_eq!(ds.evaluator_counts().iter().sum::<usize>(), ds.n_participants());
        assert_eq!(ds.n_observations(), 4);
    }

    #[test]
    fn rejects_evaluator_without_participants() {
        let err = EvaluationDataset::new(
            vec![record("a", "x", &[1.0])],
            vec!["x".into(), "y".into()],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Integrity(m) if m.contains("`y`")));
    }

    #[test]
    fn rejects_unknown_evaluator_and_bad_values() {
        let err = EvaluationDataset::new(vec![record("a", "z", &[1.0])], vec!["x".into()], vec![], vec![]);
        assert!(matches!(err, Err(Error::Integrity(_))));
        let err = EvaluationDataset::from_participants(vec![record("a", "x", &[f64::NAN])], vec![], vec![]);
        assert!(matches!(err, Err(Error::Integrity(_))));
        let err = EvaluationDataset::from_participants(vec![record("a", "x", &[])], vec![], vec![]);
        assert!(matches!(err, Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_covariate_length_mismatch() {
        let p = ParticipantRecord::new("a", "x", vec![1.0], vec![1.0, 2.0]);
        let err = EvaluationDataset::from_participants(vec![p], vec!["age".into()], vec![]);
        assert!(matches!(err, Err(Error::Integrity(_))));
    }
}
