//! Simulated experiment: every condition × participant plays one full session
//! with a fresh agent.
//!
//! Each participant's game and agent seeds are derived from the master seed,
//! the condition and the participant index, so participants can run in any
//! order (or in parallel) and still produce the same log.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{CostScheme, GameConfig, GameError, SessionState};
use crate::ibl::{AgentParams, IblAgent, IblError};
use crate::record::{round_records, write_csv, DecisionRecord};

pub use crate::ibl::Observation;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Agent(#[from] IblError),
    #[error("writing {path}: {source}")]
    Output { path: PathBuf, source: csv::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub conditions: Vec<CostScheme>,
    pub participants_per_condition: usize,
    /// Template for every session; `scheme` and `seed` are set per participant.
    pub game: GameConfig,
    pub agent: AgentParams<f64>,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            conditions: CostScheme::ALL.to_vec(),
            participants_per_condition: 40,
            game: GameConfig::default(),
            agent: AgentParams::default(),
            master_seed: 0,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.conditions.is_empty() {
            return Err(HarnessError::Config("no conditions selected".into()));
        }
        if self.participants_per_condition == 0 {
            return Err(HarnessError::Config("at least one participant is required".into()));
        }
        if self.game.probe_budget.is_none() {
            return Err(HarnessError::Agent(IblError::UnboundedBudget));
        }
        self.game.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    /// Number of records a run produces.
    pub fn expected_records(&self) -> usize {
        self.conditions.len()
            * self.participants_per_condition
            * self.game.num_rounds
            * (self.game.probe_budget.unwrap_or(0) + 1)
    }
}

/// Game and agent seeds for one participant.
pub fn participant_seeds(master_seed: u64, condition: CostScheme, participant: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((condition.ordinal() as u64) << 32) | participant as u64);
    (rng.next_u64(), rng.next_u64())
}

/// Plays one participant's session, reporting everything the agent sees to
/// `observe`.
pub fn run_participant(
    config: &ExperimentConfig,
    condition: CostScheme,
    participant: usize,
    observe: &mut dyn FnMut(Observation),
) -> Result<Vec<DecisionRecord>, HarnessError> {
    let (game_seed, agent_seed) = participant_seeds(config.master_seed, condition, participant);
    let game = GameConfig {
        scheme: condition,
        seed: game_seed,
        ..config.game.clone()
    };
    let mut session = SessionState::new(game)?;
    let mut agent = IblAgent::new(config.agent.clone(), config.game.num_servers, agent_seed)?;

    let id = participant.to_string();
    let mut cumulative = 0;
    let mut records = Vec::with_capacity(config.game.num_rounds * (config.game.probe_budget.unwrap_or(0) + 1));
    while !session.is_finished() {
        let (log, outcome) = agent.play_round(&mut session, observe)?;
        let probes: Vec<_> = log
            .probes
            .iter()
            .map(|p| match p.decision {
                crate::ibl::Decision::Probe(a) => (a, p.signal),
                crate::ibl::Decision::Attack(_) => unreachable!("probe slots hold probe decisions"),
            })
            .collect();
        records.extend(round_records(
            condition,
            &id,
            &probes,
            log.attack.signal,
            &outcome,
            &mut cumulative,
        ));
    }
    debug_assert_eq!(cumulative, session.cumulative_score());
    Ok(records)
}

/// Runs every condition × participant and returns records in
/// (condition, participant, trial, stage, slot) order. Writes the CSV when
/// `config.output` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<DecisionRecord>, HarnessError> {
    config.validate()?;
    let jobs: Vec<(CostScheme, usize)> = config
        .conditions
        .iter()
        .flat_map(|&c| (0..config.participants_per_condition).map(move |p| (c, p)))
        .collect();
    let per_participant = jobs
        .par_iter()
        .map(|&(c, p)| run_participant(config, c, p, &mut |_| {}))
        .collect::<Result<Vec<_>, _>>()?;
    let records: Vec<DecisionRecord> = per_participant.into_iter().flatten().collect();
    if let Some(path) = &config.output {
        write_records(path, &records)?;
    }
    Ok(records)
}

pub fn write_records(path: &Path, records: &[DecisionRecord]) -> Result<(), HarnessError> {
    let output = |source| HarnessError::Output {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(|e| output(e.into()))?;
    write_csv(records, BufWriter::new(file)).map_err(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ibl::Stage;

    fn small(participants: usize, budget: usize) -> ExperimentConfig {
        ExperimentConfig {
            participants_per_condition: participants,
            game: GameConfig {
                probe_budget: Some(budget),
                ..GameConfig::default()
            },
            master_seed: 42,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_budget_gives_attack_records_only() {
        let config = small(1, 0);
        let records = run_experiment(&config).unwrap();
        assert_eq!(records.len(), 90);
        for c in CostScheme::ALL {
            let n = records
                .iter()
                .filter(|r| r.condition == c && r.stage == Stage::Attack)
                .count();
            assert_eq!(n, 30);
        }
    }

    #[test]
    fn counts_match_formula() {
        let config = small(3, 2);
        assert_eq!(run_experiment(&config).unwrap().len(), config.expected_records());
    }

    #[test]
    fn seeds_differ_per_participant_and_condition() {
        let a = participant_seeds(1, CostScheme::NoCost, 0);
        assert_eq!(a, participant_seeds(1, CostScheme::NoCost, 0));
        assert_ne!(a, participant_seeds(1, CostScheme::NoCost, 1));
        assert_ne!(a, participant_seeds(1, CostScheme::ConstantCost, 0));
        assert_ne!(a, participant_seeds(2, CostScheme::NoCost, 0));
    }

    #[test]
    fn master_seed_changes_decisions_not_shape() {
        let a = run_experiment(&small(2, 5)).unwrap();
        let b = run_experiment(&ExperimentConfig {
            master_seed: 43,
            ..small(2, 5)
        })
        .unwrap();
        assert_eq!(a.len(), b.len());
        assert_ne!(a, b);
        let key = |r: &DecisionRecord| (r.condition, r.participant.clone(), r.trial, r.stage, r.slot);
        assert!(a.iter().zip(&b).all(|(x, y)| key(x) == key(y)));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(run_experiment(&small(0, 5)).is_err());
        let mut config = small(1, 5);
        config.game.probe_budget = None;
        assert!(run_experiment(&config).is_err());
        config.game.probe_budget = Some(5);
        config.conditions.clear();
        assert!(run_experiment(&config).is_err());
    }
}
