//! One human session: the game, its decision log, and the event log it is
//! persisted as.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use dg_core::record::{round_records, write_csv};
use dg_core::{
    AttackAction, CostScheme, DecisionRecord, GameConfig, Points, ProbeAction, RoundOutcome,
    ServerId, ServerKind, SessionState, Signal,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use uuid::Uuid;

use crate::error::ApiError;

/// A line of the on-disk session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
pub enum Event {
    Created {
        session_id: Uuid,
        condition: CostScheme,
        probe_budget: Option<usize>,
        seed: u64,
    },
    Probe {
        server: Option<ServerId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
    },
    Attack {
        server: Option<ServerId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        idempotency_key: Option<String>,
    },
}

/// Round-end feedback as sent to the player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeView {
    /// 1-based.
    pub round: usize,
    pub was_deception: bool,
    /// Attacked server, `null` for a withdrawal.
    pub attack: Option<ServerId>,
    pub attack_payoff: Points,
    pub probe_costs: Vec<Points>,
    pub total: Points,
    pub revealed_kinds: BTreeMap<ServerId, ServerKind>,
    pub cumulative: Points,
}

impl OutcomeView {
    fn new(outcome: &RoundOutcome, cumulative: Points) -> Self {
        Self {
            round: outcome.round_index + 1,
            was_deception: outcome.was_deception,
            attack: outcome.attack.server(),
            attack_payoff: outcome.attack_payoff,
            probe_costs: outcome.probe_costs.clone(),
            total: outcome.total,
            revealed_kinds: outcome.revealed_kinds.clone(),
            cumulative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub slot: usize,
    pub server: Option<ServerId>,
    pub signal: Option<Signal>,
}

/// Everything the player may see between actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub condition: CostScheme,
    /// 1-based round being played (the last round once finished).
    pub round: usize,
    pub num_rounds: usize,
    pub num_servers: usize,
    pub probe_budget: Option<usize>,
    pub probes: Vec<ProbeEntry>,
    pub finished: bool,
    /// Feedback for the previous round, already resolved.
    pub last_outcome: Option<OutcomeView>,
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: Uuid,
    condition: CostScheme,
    game: SessionState,
    probes: Vec<(ProbeAction, Option<Signal>)>,
    records: Vec<DecisionRecord>,
    cumulative: Points,
    last_outcome: Option<OutcomeView>,
    replies: HashMap<String, Value>,
}

impl Session {
    pub fn new(
        id: Uuid,
        condition: CostScheme,
        probe_budget: Option<usize>,
        seed: u64,
    ) -> Result<Self, ApiError> {
        let config = GameConfig {
            probe_budget,
            ..GameConfig::new(condition, seed)
        };
        Ok(Self {
            id,
            condition,
            game: SessionState::new(config)?,
            probes: Vec::new(),
            records: Vec::new(),
            cumulative: 0,
            last_outcome: None,
            replies: HashMap::new(),
        })
    }

    pub fn is_finished(&self) -> bool {
        self.game.is_finished()
    }

    pub fn state(&self) -> StateView {
        let config = self.game.config();
        StateView {
            condition: self.condition,
            round: self.game.round_index() + 1,
            num_rounds: config.num_rounds,
            num_servers: config.num_servers,
            probe_budget: config.probe_budget,
            probes: if self.is_finished() {
                Vec::new()
            } else {
                self.probes
                    .iter()
                    .enumerate()
                    .map(|(slot, (action, signal))| ProbeEntry {
                        slot,
                        server: action.server(),
                        signal: *signal,
                    })
                    .collect()
            },
            finished: self.is_finished(),
            last_outcome: self.last_outcome.clone(),
        }
    }

    pub fn reply_for(&self, key: &str) -> Option<&Value> {
        self.replies.get(key)
    }

    pub fn probe(&mut self, server: Option<ServerId>, key: Option<&str>) -> Result<Value, ApiError> {
        let action = server.map_or(ProbeAction::NoProbe, ProbeAction::Probe);
        let signal = self.game.probe(action)?;
        self.probes.push((action, signal));
        let reply = json!({ "signal": signal, "state": self.state() });
        self.remember(key, &reply);
        Ok(reply)
    }

    pub fn attack(&mut self, server: Option<ServerId>, key: Option<&str>) -> Result<Value, ApiError> {
        let action = server.map_or(AttackAction::Withdraw, AttackAction::Attack);
        let attack_signal = server.and_then(|s| self.game.round().signal_seen(s));
        let outcome = self.game.attack(action)?;
        let participant = self.id.to_string();
        self.records.extend(round_records(
            self.condition,
            &participant,
            &self.probes,
            attack_signal,
            &outcome,
            &mut self.cumulative,
        ));
        self.probes.clear();
        let view = OutcomeView::new(&outcome, self.cumulative);
        self.last_outcome = Some(view.clone());
        let mut reply = json!({ "outcome": view, "state": self.state() });
        if self.is_finished() {
            reply["summary"] = json!({
                "rounds": self.game.outcomes().len(),
                "cumulative_score": self.game.cumulative_score(),
            });
        }
        self.remember(key, &reply);
        Ok(reply)
    }

    fn remember(&mut self, key: Option<&str>, reply: &Value) {
        if let Some(key) = key {
            self.replies.insert(key.to_string(), reply.clone());
        }
    }

    /// The session's decision log in the harness CSV format.
    pub fn export_csv(&self) -> Result<Vec<u8>, ApiError> {
        if !self.is_finished() {
            return Err(ApiError::SessionOpen);
        }
        let mut out = Vec::new();
        write_csv(&self.records, &mut out).map_err(|e| ApiError::Storage(e.to_string()))?;
        Ok(out)
    }

    /// Applies a logged action; `Created` events only start sessions.
    pub fn apply(&mut self, event: &Event) -> Result<Value, ApiError> {
        match event {
            Event::Probe { server, idempotency_key } => self.probe(*server, idempotency_key.as_deref()),
            Event::Attack { server, idempotency_key } => self.attack(*server, idempotency_key.as_deref()),
            Event::Created { .. } => Err(ApiError::Storage("duplicate session header".into())),
        }
    }
}

pub fn log_path(dir: &Path, id: Uuid) -> PathBuf {
    dir.join(format!("{id}.jsonl"))
}

pub fn append_event(path: &Path, event: &Event) -> Result<(), ApiError> {
    let storage = |e: std::io::Error| ApiError::Storage(format!("{}: {e}", path.display()));
    let mut line = serde_json::to_string(event).map_err(|e| ApiError::Storage(e.to_string()))?;
    line.push('\n');
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(storage)?;
    file.write_all(line.as_bytes()).map_err(storage)?;
    file.sync_data().map_err(storage)
}

/// Rebuilds a session by replaying its log.
pub fn replay(path: &Path) -> Result<Session, ApiError> {
    let storage = |msg: String| ApiError::Storage(format!("{}: {msg}", path.display()));
    let file = File::open(path).map_err(|e| storage(e.to_string()))?;
    let mut events = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| storage(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        events.push(serde_json::from_str::<Event>(&line).map_err(|e| storage(e.to_string()))?);
    }
    let mut events = events.into_iter();
    let mut session = match events.next() {
        Some(Event::Created {
            session_id,
            condition,
            probe_budget,
            seed,
        }) => Session::new(session_id, condition, probe_budget, seed)?,
        _ => return Err(storage("log does not start with a created event".into())),
    };
    for event in events {
        session.apply(&event).map_err(|e| storage(format!("replaying {event:?}: {e}")))?;
    }
    Ok(session)
}
