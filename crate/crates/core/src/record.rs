//! Per-decision log rows shared by model runs and human sessions.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::game::{
    AttackAction, CostScheme, Points, ProbeAction, RoundOutcome, ServerKind, Signal,
};
use crate::ibl::{Decision, Stage};

pub const CSV_HEADER: &str =
    "condition,participant,trial,deception,stage,slot,decision,target_kind,signal,utility,cumulative";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionRecord {
    pub condition: CostScheme,
    pub participant: String,
    pub trial: usize,
    pub deception: bool,
    pub stage: Stage,
    /// Position within the stage: probe order, always 0 for the attack.
    pub slot: usize,
    pub decision: Decision,
    pub target_kind: Option<ServerKind>,
    pub signal: Option<Signal>,
    pub utility: Points,
    /// Running score after this decision.
    pub cumulative: Points,
}

// Flat row as it appears in the CSV.
#[derive(Debug, Serialize, Deserialize)]
struct Row {
    condition: CostScheme,
    participant: String,
    trial: usize,
    deception: bool,
    stage: Stage,
    slot: usize,
    decision: String,
    target_kind: Option<ServerKind>,
    signal: Option<Signal>,
    utility: Points,
    cumulative: Points,
}

impl From<&DecisionRecord> for Row {
    fn from(r: &DecisionRecord) -> Self {
        Row {
            condition: r.condition,
            participant: r.participant.clone(),
            trial: r.trial,
            deception: r.deception,
            stage: r.stage,
            slot: r.slot,
            decision: r.decision.to_string(),
            target_kind: r.target_kind,
            signal: r.signal,
            utility: r.utility,
            cumulative: r.cumulative,
        }
    }
}

impl TryFrom<Row> for DecisionRecord {
    type Error = csv::Error;

    fn try_from(row: Row) -> Result<Self, Self::Error> {
        let decision = row
            .decision
            .parse()
            .map_err(|e: String| csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, e)))?;
        Ok(DecisionRecord {
            condition: row.condition,
            participant: row.participant,
            trial: row.trial,
            deception: row.deception,
            stage: row.stage,
            slot: row.slot,
            decision,
            target_kind: row.target_kind,
            signal: row.signal,
            utility: row.utility,
            cumulative: row.cumulative,
        })
    }
}

/// Writes records as UTF-8 CSV with LF line endings.
pub fn write_csv<W: Write>(records: &[DecisionRecord], out: W) -> Result<(), csv::Error> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    if records.is_empty() {
        writer.write_record(CSV_HEADER.split(','))?;
    }
    for r in records {
        writer.serialize(Row::from(r))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<DecisionRecord>, csv::Error> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.iter().collect::<Vec<_>>().join(",");
    if header != CSV_HEADER {
        return Err(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header `{header}`"),
        )));
    }
    reader
        .deserialize::<Row>()
        .map(|row| row.and_then(DecisionRecord::try_from))
        .collect()
}

/// Builds the records of one resolved round.
///
/// `probes` are the probe-stage actions with the responses the player saw and
/// `attack_signal` is the signal seen for the attacked server, if any.
/// `cumulative` is the running score and is advanced in place.
pub fn round_records(
    condition: CostScheme,
    participant: &str,
    probes: &[(ProbeAction, Option<Signal>)],
    attack_signal: Option<Signal>,
    outcome: &RoundOutcome,
    cumulative: &mut Points,
) -> Vec<DecisionRecord> {
    let kind_of = |server: Option<usize>| server.and_then(|s| outcome.revealed_kinds.get(&s).copied());
    let mut records = Vec::with_capacity(probes.len() + 1);
    for (slot, (&(action, signal), &cost)) in probes.iter().zip(&outcome.probe_costs).enumerate() {
        *cumulative += cost;
        records.push(DecisionRecord {
            condition,
            participant: participant.to_string(),
            trial: outcome.round_index,
            deception: outcome.was_deception,
            stage: Stage::Probe,
            slot,
            decision: Decision::Probe(action),
            target_kind: kind_of(action.server()),
            signal,
            utility: cost,
            cumulative: *cumulative,
        });
    }
    *cumulative += outcome.attack_payoff;
    let attack: AttackAction = outcome.attack;
    records.push(DecisionRecord {
        condition,
        participant: participant.to_string(),
        trial: outcome.round_index,
        deception: outcome.was_deception,
        stage: Stage::Attack,
        slot: 0,
        decision: Decision::Attack(attack),
        target_kind: kind_of(attack.server()),
        signal: attack_signal,
        utility: outcome.attack_payoff,
        cumulative: *cumulative,
    });
    records
}
