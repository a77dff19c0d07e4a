//! Rule engine for one deception-game session.
//!
//! A round runs in two stages. During the probe stage the attacker queries
//! servers and gets back a [`Signal`], which is inverted in deception rounds.
//! The attack stage is one decision: attack a server or withdraw. Only then is
//! the round scored and every probed or attacked server's true kind revealed
//! in a [`RoundOutcome`]. Nothing observable before that point carries a kind
//! or a cost.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Game points. Scoring is integral throughout.
pub type Points = i64;

/// Index of a server within a round, `0..num_servers`.
pub type ServerId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("invalid game configuration: {0}")]
    Config(String),
    #[error("server {server} does not exist (session has {num_servers} servers)")]
    UnknownServer { server: ServerId, num_servers: usize },
    #[error("probe budget of {budget} exhausted for this round")]
    BudgetExhausted { budget: usize },
    #[error("round {round} is already closed")]
    RoundClosed { round: usize },
    #[error("session is finished")]
    SessionFinished,
    #[error("unknown cost condition `{0}` (expected no-cost, constant or increasing)")]
    UnknownScheme(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ServerKind {
    Regular,
    Honeypot,
}

impl ServerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ServerKind::Regular => "regular",
            ServerKind::Honeypot => "honeypot",
        }
    }
}

impl fmt::Display for ServerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ServerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "regular" => Ok(ServerKind::Regular),
            "honeypot" => Ok(ServerKind::Honeypot),
            other => Err(format!("unknown server kind `{other}`")),
        }
    }
}

/// What a probe tells the attacker about a server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signal {
    LooksRegular,
    LooksHoneypot,
}

impl Signal {
    pub fn as_str(self) -> &'static str {
        match self {
            Signal::LooksRegular => "looks-regular",
            Signal::LooksHoneypot => "looks-honeypot",
        }
    }
}

impl fmt::Display for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Signal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "looks-regular" => Ok(Signal::LooksRegular),
            "looks-honeypot" => Ok(Signal::LooksHoneypot),
            other => Err(format!("unknown signal `{other}`")),
        }
    }
}

/// Probing-cost regime of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CostScheme {
    #[serde(rename = "no-cost")]
    NoCost,
    #[serde(rename = "constant")]
    ConstantCost,
    #[serde(rename = "increasing")]
    IncreasingCost,
}

impl CostScheme {
    /// All conditions in increasing order of probing cost.
    pub const ALL: [CostScheme; 3] = [
        CostScheme::NoCost,
        CostScheme::ConstantCost,
        CostScheme::IncreasingCost,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CostScheme::NoCost => "no-cost",
            CostScheme::ConstantCost => "constant",
            CostScheme::IncreasingCost => "increasing",
        }
    }

    /// Position in [`CostScheme::ALL`].
    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CostScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CostScheme {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no-cost" => Ok(CostScheme::NoCost),
            "constant" => Ok(CostScheme::ConstantCost),
            "increasing" => Ok(CostScheme::IncreasingCost),
            other => Err(GameError::UnknownScheme(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbeAction {
    Probe(ServerId),
    NoProbe,
}

impl ProbeAction {
    pub fn server(self) -> Option<ServerId> {
        match self {
            ProbeAction::Probe(s) => Some(s),
            ProbeAction::NoProbe => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackAction {
    Attack(ServerId),
    Withdraw,
}

impl AttackAction {
    pub fn server(self) -> Option<ServerId> {
        match self {
            AttackAction::Attack(s) => Some(s),
            AttackAction::Withdraw => None,
        }
    }
}

/// Point values for probes and attacks.
///
/// The defaults are the published tables. `probe_honeypot` is the unit cost:
/// under the increasing scheme the `h`-th honeypot probe of a round costs
/// `h * probe_honeypot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Payoffs {
    pub attack_regular: Points,
    pub attack_honeypot: Points,
    pub probe_regular: Points,
    pub probe_honeypot: Points,
}

impl Default for Payoffs {
    fn default() -> Self {
        Self {
            attack_regular: 10,
            attack_honeypot: -10,
            probe_regular: 5,
            probe_honeypot: -5,
        }
    }
}

impl Payoffs {
    /// Cost of one probe. `h` is the 1-based index of this probe among the
    /// round's honeypot probes and only matters for honeypots.
    pub fn probe_cost(&self, scheme: CostScheme, probed: Option<ServerKind>, h: u32) -> Points {
        match (scheme, probed) {
            (CostScheme::NoCost, _) | (_, None) => 0,
            (_, Some(ServerKind::Regular)) => self.probe_regular,
            (CostScheme::ConstantCost, Some(ServerKind::Honeypot)) => self.probe_honeypot,
            (CostScheme::IncreasingCost, Some(ServerKind::Honeypot)) => {
                self.probe_honeypot * Points::from(h)
            }
        }
    }

    /// Payoff of the attack-stage decision; `None` is a withdrawal.
    pub fn attack_payoff(&self, target: Option<ServerKind>) -> Points {
        match target {
            Some(ServerKind::Regular) => self.attack_regular,
            Some(ServerKind::Honeypot) => self.attack_honeypot,
            None => 0,
        }
    }
}

/// Probe cost under the default tables.
pub fn probe_cost(scheme: CostScheme, probed: Option<ServerKind>, h: u32) -> Points {
    Payoffs::default().probe_cost(scheme, probed, h)
}

/// Attack payoff under the default tables.
pub fn attack_payoff(target: Option<ServerKind>) -> Points {
    Payoffs::default().attack_payoff(target)
}

/// Signal shown for a probed server. Deception rounds invert it.
pub fn signal_for(kind: ServerKind, is_deception: bool) -> Signal {
    match (kind, is_deception) {
        (ServerKind::Regular, false) | (ServerKind::Honeypot, true) => Signal::LooksRegular,
        (ServerKind::Honeypot, false) | (ServerKind::Regular, true) => Signal::LooksHoneypot,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameConfig {
    pub num_servers: usize,
    pub num_honeypots: usize,
    pub num_rounds: usize,
    pub num_deception_rounds: usize,
    /// Probe-stage decisions allowed per round; `None` means unlimited.
    pub probe_budget: Option<usize>,
    pub scheme: CostScheme,
    pub seed: u64,
    pub payoffs: Payoffs,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            num_servers: 4,
            num_honeypots: 2,
            num_rounds: 30,
            num_deception_rounds: 15,
            probe_budget: Some(5),
            scheme: CostScheme::NoCost,
            seed: 0,
            payoffs: Payoffs::default(),
        }
    }
}

impl GameConfig {
    pub fn new(scheme: CostScheme, seed: u64) -> Self {
        Self {
            scheme,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.num_servers == 0 {
            return Err(GameError::Config("at least one server is required".into()));
        }
        if self.num_honeypots > self.num_servers {
            return Err(GameError::Config(format!(
                "{} honeypots do not fit in {} servers",
                self.num_honeypots, self.num_servers
            )));
        }
        if self.num_rounds == 0 {
            return Err(GameError::Config("at least one round is required".into()));
        }
        if self.num_deception_rounds > self.num_rounds {
            return Err(GameError::Config(format!(
                "{} deception rounds do not fit in {} rounds",
                self.num_deception_rounds, self.num_rounds
            )));
        }
        Ok(())
    }
}

/// Hidden layout of one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub round_index: usize,
    pub is_deception: bool,
    pub server_kinds: Vec<ServerKind>,
}

impl RoundPlan {
    pub fn honeypot_count(&self) -> usize {
        self.server_kinds
            .iter()
            .filter(|k| **k == ServerKind::Honeypot)
            .count()
    }
}

/// Draws the deception schedule and per-round server layouts from `config.seed`.
pub fn plan_rounds(config: &GameConfig) -> Result<Vec<RoundPlan>, GameError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut deceptive = vec![false; config.num_rounds];
    for i in index::sample(&mut rng, config.num_rounds, config.num_deception_rounds) {
        deceptive[i] = true;
    }

    let plans = deceptive
        .into_iter()
        .enumerate()
        .map(|(round_index, is_deception)| {
            let mut server_kinds = vec![ServerKind::Regular; config.num_servers];
            server_kinds[..config.num_honeypots].fill(ServerKind::Honeypot);
            server_kinds.shuffle(&mut rng);
            RoundPlan {
                round_index,
                is_deception,
                server_kinds,
            }
        })
        .collect();
    Ok(plans)
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LedgerEntry {
    action: ProbeAction,
    kind: Option<ServerKind>,
    signal: Option<Signal>,
}

/// Everything that happened in a round's probe stage, including the hidden
/// kinds. Private to the round until it is scored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ProbeLedger {
    entries: Vec<LedgerEntry>,
    honeypot_probes: u32,
    regular_probes: u32,
}

impl ProbeLedger {
    fn push(&mut self, entry: LedgerEntry) {
        match entry.kind {
            Some(ServerKind::Honeypot) => self.honeypot_probes += 1,
            Some(ServerKind::Regular) => self.regular_probes += 1,
            None => {}
        }
        self.entries.push(entry);
    }

    fn costs(&self, scheme: CostScheme, payoffs: &Payoffs) -> Vec<Points> {
        let mut h = 0;
        self.entries
            .iter()
            .map(|e| {
                if e.kind == Some(ServerKind::Honeypot) {
                    h += 1;
                }
                payoffs.probe_cost(scheme, e.kind, h)
            })
            .collect()
    }
}

/// Delayed feedback for one round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundOutcome {
    pub round_index: usize,
    pub was_deception: bool,
    pub attack: AttackAction,
    pub attack_payoff: Points,
    /// One entry per probe-stage decision, in order; no-probes cost 0.
    pub probe_costs: Vec<Points>,
    pub total: Points,
    /// True kinds of every server that was probed or attacked this round.
    pub revealed_kinds: BTreeMap<ServerId, ServerKind>,
}

/// One probe-stage decision as the attacker saw it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeView {
    pub slot: usize,
    pub server: Option<ServerId>,
    pub signal: Option<Signal>,
}

/// The observable surface of a round: signals only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundView {
    pub round_index: usize,
    pub num_servers: usize,
    pub probe_budget: Option<usize>,
    pub probes: Vec<ProbeView>,
    pub closed: bool,
}

#[derive(Debug, Clone)]
pub struct RoundState {
    plan: RoundPlan,
    scheme: CostScheme,
    payoffs: Payoffs,
    budget: Option<usize>,
    ledger: ProbeLedger,
    outcome: Option<RoundOutcome>,
}

impl RoundState {
    pub fn new(plan: RoundPlan, config: &GameConfig) -> Self {
        Self {
            plan,
            scheme: config.scheme,
            payoffs: config.payoffs,
            budget: config.probe_budget,
            ledger: ProbeLedger::default(),
            outcome: None,
        }
    }

    pub fn round_index(&self) -> usize {
        self.plan.round_index
    }

    pub fn num_servers(&self) -> usize {
        self.plan.server_kinds.len()
    }

    pub fn probes_used(&self) -> usize {
        self.ledger.entries.len()
    }

    pub fn is_closed(&self) -> bool {
        self.outcome.is_some()
    }

    pub fn outcome(&self) -> Option<&RoundOutcome> {
        self.outcome.as_ref()
    }

    fn check_server(&self, server: ServerId) -> Result<(), GameError> {
        if server < self.num_servers() {
            Ok(())
        } else {
            Err(GameError::UnknownServer {
                server,
                num_servers: self.num_servers(),
            })
        }
    }

    /// Runs one probe-stage decision. Returns the signal for `Probe`, `None`
    /// for `NoProbe`. Either way one slot of the budget is used.
    pub fn probe(&mut self, action: ProbeAction) -> Result<Option<Signal>, GameError> {
        if self.is_closed() {
            return Err(GameError::RoundClosed {
                round: self.round_index(),
            });
        }
        if let Some(budget) = self.budget {
            if self.probes_used() >= budget {
                return Err(GameError::BudgetExhausted { budget });
            }
        }
        let entry = match action {
            ProbeAction::Probe(server) => {
                self.check_server(server)?;
                let kind = self.plan.server_kinds[server];
                LedgerEntry {
                    action,
                    kind: Some(kind),
                    signal: Some(signal_for(kind, self.plan.is_deception)),
                }
            }
            ProbeAction::NoProbe => LedgerEntry {
                action,
                kind: None,
                signal: None,
            },
        };
        let signal = entry.signal;
        self.ledger.push(entry);
        Ok(signal)
    }

    /// Signal received for `server` earlier in this round, if it was probed.
    pub fn signal_seen(&self, server: ServerId) -> Option<Signal> {
        self.ledger
            .entries
            .iter()
            .find(|e| e.action == ProbeAction::Probe(server))
            .and_then(|e| e.signal)
    }

    /// Closes the round and scores it.
    pub fn attack(&mut self, action: AttackAction) -> Result<RoundOutcome, GameError> {
        if self.is_closed() {
            return Err(GameError::RoundClosed {
                round: self.round_index(),
            });
        }
        if let AttackAction::Attack(server) = action {
            self.check_server(server)?;
        }

        let target = action.server().map(|s| self.plan.server_kinds[s]);
        let attack_payoff = self.payoffs.attack_payoff(target);
        let probe_costs = self.ledger.costs(self.scheme, &self.payoffs);
        let total = attack_payoff + probe_costs.iter().sum::<Points>();

        let revealed_kinds = self
            .ledger
            .entries
            .iter()
            .filter_map(|e| e.action.server())
            .chain(action.server())
            .map(|s| (s, self.plan.server_kinds[s]))
            .collect();

        let outcome = RoundOutcome {
            round_index: self.round_index(),
            was_deception: self.plan.is_deception,
            attack: action,
            attack_payoff,
            probe_costs,
            total,
            revealed_kinds,
        };
        self.outcome = Some(outcome.clone());
        Ok(outcome)
    }

    pub fn view(&self) -> RoundView {
        RoundView {
            round_index: self.round_index(),
            num_servers: self.num_servers(),
            probe_budget: self.budget,
            probes: self
                .ledger
                .entries
                .iter()
                .enumerate()
                .map(|(slot, e)| ProbeView {
                    slot,
                    server: e.action.server(),
                    signal: e.signal,
                })
                .collect(),
            closed: self.is_closed(),
        }
    }
}

/// A full game: `num_rounds` rounds played in order.
#[derive(Debug, Clone)]
pub struct SessionState {
    config: GameConfig,
    plans: Vec<RoundPlan>,
    round: RoundState,
    outcomes: Vec<RoundOutcome>,
    cumulative: Points,
}

impl SessionState {
    pub fn new(config: GameConfig) -> Result<Self, GameError> {
        let plans = plan_rounds(&config)?;
        let round = RoundState::new(plans[0].clone(), &config);
        Ok(Self {
            config,
            plans,
            round,
            outcomes: Vec::new(),
            cumulative: 0,
        })
    }

    pub fn config(&self) -> &GameConfig {
        &self.config
    }

    pub fn is_finished(&self) -> bool {
        self.outcomes.len() == self.plans.len()
    }

    /// Index of the round being played, or of the last round once finished.
    pub fn round_index(&self) -> usize {
        self.round.round_index()
    }

    pub fn round(&self) -> &RoundState {
        &self.round
    }

    pub fn view(&self) -> RoundView {
        self.round.view()
    }

    pub fn outcomes(&self) -> &[RoundOutcome] {
        &self.outcomes
    }

    pub fn cumulative_score(&self) -> Points {
        self.cumulative
    }

    pub fn probe(&mut self, action: ProbeAction) -> Result<Option<Signal>, GameError> {
        if self.is_finished() {
            return Err(GameError::SessionFinished);
        }
        self.round.probe(action)
    }

    /// Resolves the current round and moves on to the next one.
    pub fn attack(&mut self, action: AttackAction) -> Result<RoundOutcome, GameError> {
        if self.is_finished() {
            return Err(GameError::SessionFinished);
        }
        let outcome = self.round.attack(action)?;
        self.cumulative += outcome.total;
        self.outcomes.push(outcome.clone());
        if let Some(next) = self.plans.get(self.outcomes.len()) {
            self.round = RoundState::new(next.clone(), &self.config);
        }
        Ok(outcome)
    }
}

/// Starts a session from a validated config.
pub fn new_session(config: GameConfig) -> Result<SessionState, GameError> {
    SessionState::new(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truthful_round(kinds: Vec<ServerKind>, scheme: CostScheme) -> RoundState {
        let config = GameConfig {
            scheme,
            num_servers: kinds.len(),
            ..GameConfig::default()
        };
        RoundState::new(
            RoundPlan {
                round_index: 0,
                is_deception: false,
                server_kinds: kinds,
            },
            &config,
        )
    }

    use ServerKind::{Honeypot as H, Regular as R};

    #[test]
    fn signals_are_truthful_or_inverted() {
        assert_eq!(signal_for(H, false), Signal::LooksHoneypot);
        assert_eq!(signal_for(H, true), Signal::LooksRegular);
        assert_eq!(signal_for(R, true), Signal::LooksHoneypot);
        assert_eq!(signal_for(R, false), Signal::LooksRegular);
        for k in [R, H] {
            assert_ne!(signal_for(k, true), signal_for(k, false));
        }
    }

    #[test]
    fn probe_costs_follow_tables() {
        assert_eq!(probe_cost(CostScheme::NoCost, Some(H), 7), 0);
        assert_eq!(probe_cost(CostScheme::ConstantCost, Some(H), 3), -5);
        assert_eq!(probe_cost(CostScheme::IncreasingCost, Some(H), 3), -15);
        assert_eq!(probe_cost(CostScheme::IncreasingCost, Some(R), 0), 5);
        assert_eq!(probe_cost(CostScheme::IncreasingCost, None, 2), 0);
    }

    #[test]
    fn thirty_rounds_fifteen_deceptive() {
        let plans = plan_rounds(&GameConfig::new(CostScheme::NoCost, 11)).unwrap();
        assert_eq!(plans.len(), 30);
        assert_eq!(plans.iter().filter(|p| p.is_deception).count(), 15);
        assert!(plans.iter().all(|p| p.honeypot_count() == 2));
    }

    #[test]
    fn zero_deception_rounds_are_all_truthful() {
        let config = GameConfig {
            num_deception_rounds: 0,
            ..GameConfig::default()
        };
        assert!(plan_rounds(&config).unwrap().iter().all(|p| !p.is_deception));
    }

    #[test]
    fn same_seed_same_plans() {
        let a = plan_rounds(&GameConfig::new(CostScheme::ConstantCost, 99)).unwrap();
        let b = plan_rounds(&GameConfig::new(CostScheme::ConstantCost, 99)).unwrap();
        let c = plan_rounds(&GameConfig::new(CostScheme::ConstantCost, 100)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn inconsistent_configs_are_rejected() {
        let too_many_honeypots = GameConfig {
            num_honeypots: 5,
            ..GameConfig::default()
        };
        let too_much_deception = GameConfig {
            num_deception_rounds: 31,
            ..GameConfig::default()
        };
        assert!(matches!(
            SessionState::new(too_many_honeypots),
            Err(GameError::Config(_))
        ));
        assert!(matches!(
            SessionState::new(too_much_deception),
            Err(GameError::Config(_))
        ));
    }

    #[test]
    fn honeypot_probe_counts_h() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::IncreasingCost);
        assert_eq!(round.probe(ProbeAction::Probe(0)).unwrap(), Some(Signal::LooksHoneypot));
        assert_eq!(round.ledger.honeypot_probes, 1);
        assert_eq!(round.probe(ProbeAction::NoProbe).unwrap(), None);
        assert_eq!(round.ledger.honeypot_probes, 1);
        assert_eq!(round.probe(ProbeAction::Probe(1)).unwrap(), Some(Signal::LooksRegular));
        assert_eq!(round.ledger.regular_probes, 1);
    }

    #[test]
    fn sixth_probe_exceeds_budget() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::NoCost);
        for _ in 0..5 {
            round.probe(ProbeAction::Probe(1)).unwrap();
        }
        assert_eq!(
            round.probe(ProbeAction::Probe(1)),
            Err(GameError::BudgetExhausted { budget: 5 })
        );
    }

    #[test]
    fn unknown_server_is_rejected() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::NoCost);
        assert!(matches!(
            round.probe(ProbeAction::Probe(4)),
            Err(GameError::UnknownServer { server: 4, .. })
        ));
        assert!(matches!(
            round.attack(AttackAction::Attack(9)),
            Err(GameError::UnknownServer { .. })
        ));
        assert!(!round.is_closed());
    }

    #[test]
    fn increasing_round_replay() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::IncreasingCost);
        round.probe(ProbeAction::Probe(0)).unwrap();
        round.probe(ProbeAction::Probe(2)).unwrap();
        round.probe(ProbeAction::Probe(1)).unwrap();
        let out = round.attack(AttackAction::Attack(0)).unwrap();
        assert_eq!(out.probe_costs, vec![-5, -10, 5]);
        assert_eq!(out.attack_payoff, -10);
        assert_eq!(out.total, -20);
        assert_eq!(out.revealed_kinds.len(), 3);
    }

    #[test]
    fn attack_and_withdraw_payoffs() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::NoCost);
        assert_eq!(round.attack(AttackAction::Attack(1)).unwrap().total, 10);
        for scheme in CostScheme::ALL {
            let mut round = truthful_round(vec![H, R, H, R], scheme);
            let out = round.attack(AttackAction::Withdraw).unwrap();
            assert_eq!(out.total, 0);
            assert!(out.revealed_kinds.is_empty());
        }
    }

    #[test]
    fn double_attack_and_late_probe_are_stage_errors() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::NoCost);
        round.attack(AttackAction::Withdraw).unwrap();
        assert_eq!(
            round.attack(AttackAction::Withdraw),
            Err(GameError::RoundClosed { round: 0 })
        );
        assert_eq!(
            round.probe(ProbeAction::NoProbe),
            Err(GameError::RoundClosed { round: 0 })
        );
    }

    #[test]
    fn view_carries_signals_only() {
        let mut round = truthful_round(vec![H, R, H, R], CostScheme::IncreasingCost);
        round.probe(ProbeAction::Probe(0)).unwrap();
        round.probe(ProbeAction::NoProbe).unwrap();
        let json = serde_json::to_string(&round.view()).unwrap();
        assert!(json.contains("looks-honeypot"));
        for leak in ["kind", "cost", "\"honeypot\"", "\"regular\"", "deception", "total"] {
            assert!(!json.contains(leak), "view leaked {leak}: {json}");
        }
    }

    #[test]
    fn session_walks_all_rounds() {
        let mut session = SessionState::new(GameConfig::new(CostScheme::ConstantCost, 3)).unwrap();
        let mut sum = 0;
        for r in 0..30 {
            assert_eq!(session.round_index(), r);
            session.probe(ProbeAction::Probe(r % 4)).unwrap();
            sum += session.attack(AttackAction::Attack(0)).unwrap().total;
        }
        assert!(session.is_finished());
        assert_eq!(session.cumulative_score(), sum);
        assert_eq!(
            session.attack(AttackAction::Withdraw),
            Err(GameError::SessionFinished)
        );
    }

    #[test]
    fn scheme_names_round_trip() {
        for scheme in CostScheme::ALL {
            assert_eq!(scheme.as_str().parse::<CostScheme>().unwrap(), scheme);
            let json = serde_json::to_string(&scheme).unwrap();
            assert_eq!(json, format!("\"{}\"", scheme.as_str()));
        }
        assert!(matches!(
            "cheap".parse::<CostScheme>(),
            Err(GameError::UnknownScheme(_))
        ));
    }
}
