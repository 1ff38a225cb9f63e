use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::SimulationScenario;
use crate::data::{EvaluationDataset, ParticipantRecord};
use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Covariate columns of generated datasets.
pub const COVARIATES: [&str; 4] = ["age", "age_sq", "very_good", "little_trouble"];

struct Participant {
    covariates: Vec<f64>,
    mean: f64,
}

fn draw_participant(s: &SimulationScenario, beta: f64, rng: &mut ChaCha8Rng) -> Participant {
    let z: f64 = rng.sample(StandardNormal);
    let age = s.age_mean + s.age_sd * z;
    let u: f64 = rng.random();
    let very_good = u < s.prevalence_very_good;
    let little_trouble = !very_good && u < s.prevalence_very_good + s.prevalence_little_trouble;
    let covariates = vec![age, age * age, f64::from(very_good as u8), f64::from(little_trouble as u8)];
    let mean = beta + covariates.iter().zip(&s.eta).map(|(x, e)| x * e).sum::<f64>();
    Participant { covariates, mean }
}

fn generate(s: &SimulationScenario, seed: u64, arity: usize) -> Result<EvaluationDataset> {
    s.validate_data()?;
    if s.outcome_arity != arity {
        return Err(Error::Config(format!(
            "scenario has outcome_arity {}, generator needs {arity}",
            s.outcome_arity
        )));
    }
    let mut rng = SeedStream::new(seed).rng();
    let labels = s.evaluator_labels();
    let cross = (1.0 - s.rho * s.rho).sqrt();
    let mut records = Vec::with_capacity(s.n_evaluators * s.participants_per_evaluator);
    for (j, beta) in s.effects().into_iter().enumerate() {
        for k in 0..s.participants_per_evaluator {
            let p = draw_participant(s, beta, &mut rng);
            let z1: f64 = rng.sample(StandardNormal);
            let outcomes = if arity == 1 {
                vec![p.mean + s.sigma * z1]
            } else {
                let z2: f64 = rng.sample(StandardNormal);
                vec![p.mean + s.sigma * z1, p.mean + s.sigma * (s.rho * z1 + cross * z2)]
            };
            let id = format!("p{}", j * s.participants_per_evaluator + k + 1);
            records.push(ParticipantRecord::new(id, labels[j].clone(), outcomes, p.covariates));
        }
    }
    EvaluationDataset::new(records, labels, COVARIATES.iter().map(|c| c.to_string()).collect(), vec![])
}

/// One outcome per participant with independent N(0, σ²) errors.
pub fn generate_single(scenario: &SimulationScenario, seed: u64) -> Result<EvaluationDataset> {
    generate(scenario, seed, 1)
}

/// Two outcomes per participant sharing covariates and evaluator, errors
/// bivariate normal with variance σ² and correlation ρ.
pub fn generate_multiple(scenario: &SimulationScenario, seed: u64) -> Result<EvaluationDataset> {
    generate(scenario, seed, 2)
}

/// Dispatches on `scenario.outcome_arity`.
pub fn generate_dataset(scenario: &SimulationScenario, seed: u64) -> Result<EvaluationDataset> {
    generate(scenario, seed, scenario.outcome_arity)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_single_evaluator() {
        let s = SimulationScenario {
            n_evaluators: 1,
            participants_per_evaluator: 20,
            sigma: 0.0,
            eta: [0.0; 4],
            ..Default::default()
        };
        let ds = generate_single(&s, 7).unwrap();
        assert!(ds.participants().iter().all(|p| p.outcomes == vec![66.95]));
        assert_eq!(ds.n_participants(), 20);
    }

    #[test]
    fn same_seed_same_data() {
        let s = SimulationScenario::bivariate_null(6.0, 0.5);
        assert_eq!(generate_multiple(&s, 3).unwrap(), generate_multiple(&s, 3).unwrap());
        assert!(generate_single(&s, 3).is_err());
    }

    #[test]
    fn shape_of_generated_data() {
        let ds = generate_dataset(&SimulationScenario::single_outliers(2.0), 11).unwrap();
        assert_eq!(ds.n_participants(), 6000);
        assert_eq!(ds.n_evaluators(), 50);
        assert_eq!(ds.participants()[119].evaluator, "1");
        assert_eq!(ds.participants()[120].evaluator, "2");
        let p = &ds.participants()[0];
        assert_eq!(p.participant_covariates[1], p.participant_covariates[0].powi(2));
    }
}
