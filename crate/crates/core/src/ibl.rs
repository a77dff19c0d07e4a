//! Instance-based learning attacker.
//!
//! Memory holds instances keyed by `(context, decision, utility)`, each with
//! the list of times it was experienced. Choosing an option blends the
//! utilities of that option's instances, weighting each by a softmax over
//! noisy activations:
//!
//! ```text
//! A_i = ln( Σ_j (now - t_j)^(-d) ) + ε,   ε ~ logistic(0, σ)
//! p_i = exp(A_i / τ) / Σ_k exp(A_k / τ),  τ = σ·√2
//! V   = Σ_i p_i · u_i
//! ```
//!
//! The option with the highest `V` is taken. Utilities are only written at
//! the end of a round, once the game has revealed the outcome.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{
    AttackAction, GameError, Points, ProbeAction, RoundOutcome, RoundState, ServerId,
    SessionState, Signal,
};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IblError {
    #[error("invalid agent parameters: {0}")]
    InvalidParams(String),
    #[error("occurrence at t={occurrence} is not before now={now}")]
    Clock { occurrence: u64, now: u64 },
    #[error("no instances in memory for {0}")]
    NoInstances(String),
    #[error("round log does not match outcome: {0}")]
    Consistency(String),
    #[error("model runs need a finite probe budget")]
    UnboundedBudget,
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Probe,
    Attack,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Probe => "probe",
            Stage::Attack => "attack",
        }
    }
}

/// Situation a decision is made in. Probe-stage decisions share one context;
/// attack-stage options are keyed by the signal seen for that target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context {
    pub stage: Stage,
    pub observed_signal: Option<Signal>,
}

impl Context {
    pub const fn probe() -> Self {
        Self {
            stage: Stage::Probe,
            observed_signal: None,
        }
    }

    pub const fn attack(observed_signal: Option<Signal>) -> Self {
        Self {
            stage: Stage::Attack,
            observed_signal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Decision {
    Probe(ProbeAction),
    Attack(AttackAction),
}

impl Decision {
    pub fn server(self) -> Option<ServerId> {
        match self {
            Decision::Probe(a) => a.server(),
            Decision::Attack(a) => a.server(),
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Probe(ProbeAction::Probe(s)) => write!(f, "probe:{s}"),
            Decision::Probe(ProbeAction::NoProbe) => f.write_str("no-probe"),
            Decision::Attack(AttackAction::Attack(s)) => write!(f, "attack:{s}"),
            Decision::Attack(AttackAction::Withdraw) => f.write_str("withdraw"),
        }
    }
}

impl FromStr for Decision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let server = |rest: &str| {
            rest.parse::<ServerId>()
                .map_err(|_| format!("bad server id in decision `{s}`"))
        };
        match s {
            "no-probe" => Ok(Decision::Probe(ProbeAction::NoProbe)),
            "withdraw" => Ok(Decision::Attack(AttackAction::Withdraw)),
            _ => {
                if let Some(rest) = s.strip_prefix("probe:") {
                    Ok(Decision::Probe(ProbeAction::Probe(server(rest)?)))
                } else if let Some(rest) = s.strip_prefix("attack:") {
                    Ok(Decision::Attack(AttackAction::Attack(server(rest)?)))
                } else {
                    Err(format!("unknown decision `{s}`"))
                }
            }
        }
    }
}

/// Snapshot of one remembered instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub context: Context,
    pub decision: Decision,
    pub utility: Points,
    pub occurrences: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "")]
pub struct AgentParams<F: Scalar> {
    /// Power-law decay `d` of memory traces.
    pub decay: F,
    /// Scale `σ` of the logistic activation noise.
    pub noise: F,
    /// Softmax temperature; `σ·√2` when unset.
    pub temperature: Option<F>,
    /// Utility of the synthetic instance every option starts with.
    pub prepopulation: Points,
}

impl<F: Scalar> Default for AgentParams<F> {
    fn default() -> Self {
        Self {
            decay: F::of(0.5),
            noise: F::of(0.25),
            temperature: None,
            prepopulation: 15,
        }
    }
}

impl<F: Scalar> AgentParams<F> {
    pub fn new(decay: F, noise: F, prepopulation: Points) -> Self {
        Self {
            decay,
            noise,
            temperature: None,
            prepopulation,
        }
    }

    /// Parameters picked by the calibration sweep (`examples/calibrate.rs`).
    /// The softmax temperature is set on its own rather than derived from the
    /// noise so that splitting one option's outcomes across many distinct
    /// utilities does not change its blended value.
    pub fn calibrated() -> Self {
        Self {
            decay: F::of(2.0),
            noise: F::of(0.25),
            temperature: Some(F::of(1.0)),
            prepopulation: 5,
        }
    }

    /// Noise-free parameters. The softmax still needs a positive temperature.
    pub fn deterministic(decay: F, temperature: F, prepopulation: Points) -> Self {
        Self {
            decay,
            noise: F::zero(),
            temperature: Some(temperature),
            prepopulation,
        }
    }

    pub fn temperature(&self) -> F {
        self.temperature
            .unwrap_or_else(|| self.noise * F::of(std::f64::consts::SQRT_2))
    }

    pub fn validate(&self) -> Result<(), IblError> {
        if self.decay.is_nan() || self.decay < F::zero() {
            return Err(IblError::InvalidParams(format!("decay {} < 0", self.decay)));
        }
        if self.noise.is_nan() || self.noise < F::zero() {
            return Err(IblError::InvalidParams(format!("noise {} < 0", self.noise)));
        }
        let tau = self.temperature();
        if !tau.is_finite() || tau <= F::zero() {
            return Err(IblError::InvalidParams(format!(
                "temperature {tau} must be positive (set it explicitly when noise is 0)"
            )));
        }
        Ok(())
    }
}

type Slot = BTreeMap<Points, Vec<u64>>;

/// Instance memory plus the decision clock.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MemoryStore {
    slots: BTreeMap<(Context, Decision), Slot>,
    clock: u64,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of distinct instances.
    pub fn len(&self) -> usize {
        self.slots.values().map(BTreeMap::len).sum()
    }

    /// Timestamp of the latest recorded decision.
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn instances(&self) -> impl Iterator<Item = Instance> + '_ {
        self.slots.iter().flat_map(|(&(context, decision), slot)| {
            slot.iter().map(move |(&utility, occ)| Instance {
                context,
                decision,
                utility,
                occurrences: occ.clone(),
            })
        })
    }

    /// Instances of one option as `utility -> occurrence times`.
    pub fn option(&self, context: Context, decision: Decision) -> Option<&BTreeMap<Points, Vec<u64>>> {
        self.slots.get(&(context, decision))
    }

    /// Records that `decision` in `context` yielded `utility` at time `at`.
    /// An existing instance with the same key gains an occurrence.
    pub fn reinforce(
        &mut self,
        context: Context,
        decision: Decision,
        utility: Points,
        at: u64,
    ) -> Result<(), IblError> {
        let occ = self
            .slots
            .entry((context, decision))
            .or_default()
            .entry(utility)
            .or_default();
        if let Some(&last) = occ.last() {
            if last >= at {
                return Err(IblError::Clock {
                    occurrence: last,
                    now: at,
                });
            }
        }
        occ.push(at);
        self.clock = self.clock.max(at);
        Ok(())
    }

    /// Seeds every option with one instance of the pre-population utility at t=0.
    pub fn prepopulate<F: Scalar>(
        &mut self,
        params: &AgentParams<F>,
        options: &[(Context, Decision)],
    ) -> Result<(), IblError> {
        if !self.is_empty() {
            return Err(IblError::Consistency(
                "pre-population requires an empty memory".into(),
            ));
        }
        for &(context, decision) in options {
            self.slots
                .entry((context, decision))
                .or_default()
                .entry(params.prepopulation)
                .or_insert_with(|| vec![0]);
        }
        Ok(())
    }

    /// Stable hash of the full memory state.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.hash(&mut hasher);
        hasher.finish()
    }

    /// Writes a closed round's outcomes into memory. Each probe decision gets
    /// its realized probe cost and the attack decision gets the attack payoff,
    /// stamped with the times the decisions were made.
    pub fn apply_delayed_feedback(
        &mut self,
        log: &RoundLog,
        outcome: &RoundOutcome,
    ) -> Result<(), IblError> {
        if log.round_index != outcome.round_index {
            return Err(IblError::Consistency(format!(
                "log is for round {} but outcome is for round {}",
                log.round_index, outcome.round_index
            )));
        }
        if log.probes.len() != outcome.probe_costs.len() {
            return Err(IblError::Consistency(format!(
                "{} probe decisions but {} probe costs",
                log.probes.len(),
                outcome.probe_costs.len()
            )));
        }
        if log.attack.decision != Decision::Attack(outcome.attack) {
            return Err(IblError::Consistency(format!(
                "logged attack {:?} differs from resolved {:?}",
                log.attack.decision, outcome.attack
            )));
        }
        for (entry, &cost) in log.probes.iter().zip(&outcome.probe_costs) {
            self.reinforce(entry.context, entry.decision, cost, entry.timestamp)?;
        }
        self.reinforce(
            log.attack.context,
            log.attack.decision,
            outcome.attack_payoff,
            log.attack.timestamp,
        )
    }
}

/// `ln Σ_j (now - t_j)^(-d)` without noise.
pub fn base_activation<F: Scalar>(occurrences: &[u64], now: u64, decay: F) -> Result<F, IblError> {
    let mut sum = F::zero();
    for &t in occurrences {
        if t >= now {
            return Err(IblError::Clock { occurrence: t, now });
        }
        sum = sum + F::of((now - t) as f64).powf(-decay);
    }
    Ok(sum.ln())
}

/// Zero-mean logistic noise with scale `scale`.
pub fn logistic_noise<F: Scalar, R: Rng + ?Sized>(scale: F, rng: &mut R) -> F {
    if scale == F::zero() {
        return F::zero();
    }
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    scale * F::of((u / (1.0 - u)).ln())
}

pub fn activation<F: Scalar, R: Rng + ?Sized>(
    occurrences: &[u64],
    now: u64,
    params: &AgentParams<F>,
    rng: &mut R,
) -> Result<F, IblError> {
    Ok(base_activation(occurrences, now, params.decay)? + logistic_noise(params.noise, rng))
}

/// Softmax of `activations / temperature`.
pub fn retrieval_probabilities<F: Scalar>(activations: &[F], temperature: F) -> Vec<F> {
    let max = activations
        .iter()
        .copied()
        .fold(F::neg_infinity(), F::max);
    let weights: Vec<F> = activations
        .iter()
        .map(|&a| ((a - max) / temperature).exp())
        .collect();
    let total = weights.iter().copied().fold(F::zero(), |acc, w| acc + w);
    weights.into_iter().map(|w| w / total).collect()
}

/// Blended value of one option at time `now`.
pub fn blended_value<F: Scalar, R: Rng + ?Sized>(
    memory: &MemoryStore,
    context: Context,
    decision: Decision,
    now: u64,
    params: &AgentParams<F>,
    rng: &mut R,
) -> Result<F, IblError> {
    let slot = memory
        .option(context, decision)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| IblError::NoInstances(format!("{decision:?} in {context:?}")))?;
    let mut utilities = Vec::with_capacity(slot.len());
    let mut activations = Vec::with_capacity(slot.len());
    for (&utility, occ) in slot {
        utilities.push(utility);
        activations.push(activation(occ, now, params, rng)?);
    }
    let probs = retrieval_probabilities(&activations, params.temperature());
    Ok(utilities
        .iter()
        .zip(probs)
        .fold(F::zero(), |acc, (&u, p)| acc + p * F::of(u as f64)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice<F> {
    pub index: usize,
    pub context: Context,
    pub decision: Decision,
    pub value: F,
}

/// Picks the option with the highest blended value; exact ties are broken
/// uniformly at random.
pub fn blended_choice<F: Scalar, R: Rng + ?Sized>(
    memory: &MemoryStore,
    options: &[(Context, Decision)],
    now: u64,
    params: &AgentParams<F>,
    rng: &mut R,
) -> Result<Choice<F>, IblError> {
    if options.is_empty() {
        return Err(IblError::NoInstances("an empty option list".into()));
    }
    let mut values = Vec::with_capacity(options.len());
    for &(context, decision) in options {
        values.push(blended_value(memory, context, decision, now, params, rng)?);
    }
    let best = values.iter().copied().fold(F::neg_infinity(), F::max);
    let tied: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    let index = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    let (context, decision) = options[index];
    Ok(Choice {
        index,
        context,
        decision,
        value: values[index],
    })
}

/// A decision as it was made during the round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoggedDecision {
    pub context: Context,
    pub decision: Decision,
    pub timestamp: u64,
    /// Probe response for probe decisions, the target's observed signal for
    /// the attack decision.
    pub signal: Option<Signal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round_index: usize,
    pub probes: Vec<LoggedDecision>,
    pub attack: LoggedDecision,
}

impl RoundLog {
    pub fn attack_action(&self) -> AttackAction {
        match self.attack.decision {
            Decision::Attack(a) => a,
            Decision::Probe(_) => unreachable!("attack slot always holds an attack decision"),
        }
    }
}

/// What the agent is shown while playing, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observation {
    ProbeResponse {
        round: usize,
        slot: usize,
        response: Option<Signal>,
    },
    AttackContexts {
        round: usize,
        contexts: Vec<Context>,
    },
    Outcome(RoundOutcome),
}

pub fn probe_options(num_servers: usize) -> Vec<(Context, Decision)> {
    (0..num_servers)
        .map(ProbeAction::Probe)
        .chain([ProbeAction::NoProbe])
        .map(|a| (Context::probe(), Decision::Probe(a)))
        .collect()
}

/// Every attack-stage (context, decision) pair the agent can ever face.
pub fn all_attack_options(num_servers: usize) -> Vec<(Context, Decision)> {
    let signals = [None, Some(Signal::LooksRegular), Some(Signal::LooksHoneypot)];
    (0..num_servers)
        .flat_map(|s| {
            signals
                .iter()
                .map(move |&sig| (Context::attack(sig), Decision::Attack(AttackAction::Attack(s))))
        })
        .chain([(Context::attack(None), Decision::Attack(AttackAction::Withdraw))])
        .collect()
}

/// Attack-stage options for the round as it currently stands.
pub fn attack_options(round: &RoundState) -> Vec<(Context, Decision)> {
    (0..round.num_servers())
        .map(|s| {
            (
                Context::attack(round.signal_seen(s)),
                Decision::Attack(AttackAction::Attack(s)),
            )
        })
        .chain([(Context::attack(None), Decision::Attack(AttackAction::Withdraw))])
        .collect()
}

/// One simulated attacker: parameters, memory and a private RNG stream.
#[derive(Debug, Clone)]
pub struct IblAgent<F: Scalar> {
    params: AgentParams<F>,
    memory: MemoryStore,
    rng: ChaCha8Rng,
}

impl<F: Scalar> IblAgent<F> {
    /// Builds a pre-populated agent for a game with `num_servers` servers.
    pub fn new(params: AgentParams<F>, num_servers: usize, seed: u64) -> Result<Self, IblError> {
        params.validate()?;
        let mut memory = MemoryStore::new();
        let mut options = probe_options(num_servers);
        options.extend(all_attack_options(num_servers));
        memory.prepopulate(&params, &options)?;
        Ok(Self {
            params,
            memory,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn params(&self) -> &AgentParams<F> {
        &self.params
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    /// Makes the round's probe-stage and attack-stage choices and submits the
    /// probes. The attack is chosen but not submitted, and memory is left
    /// untouched.
    pub fn run_round(&mut self, session: &mut SessionState) -> Result<RoundLog, IblError> {
        self.run_round_observed(session, &mut |_| {})
    }

    pub fn run_round_observed(
        &mut self,
        session: &mut SessionState,
        observe: &mut dyn FnMut(Observation),
    ) -> Result<RoundLog, IblError> {
        if session.is_finished() {
            return Err(GameError::SessionFinished.into());
        }
        let budget = session
            .config()
            .probe_budget
            .ok_or(IblError::UnboundedBudget)?;
        let round = session.round_index();
        let mut now = self.memory.clock;

        let options = probe_options(session.round().num_servers());
        let mut probes = Vec::with_capacity(budget);
        for slot in 0..budget {
            now += 1;
            let choice = blended_choice(&self.memory, &options, now, &self.params, &mut self.rng)?;
            let Decision::Probe(action) = choice.decision else {
                unreachable!("probe options only hold probe decisions")
            };
            let response = session.probe(action)?;
            observe(Observation::ProbeResponse {
                round,
                slot,
                response,
            });
            probes.push(LoggedDecision {
                context: choice.context,
                decision: choice.decision,
                timestamp: now,
                signal: response,
            });
        }

        now += 1;
        let options = attack_options(session.round());
        observe(Observation::AttackContexts {
            round,
            contexts: options.iter().map(|(c, _)| *c).collect(),
        });
        let choice = blended_choice(&self.memory, &options, now, &self.params, &mut self.rng)?;
        Ok(RoundLog {
            round_index: round,
            probes,
            attack: LoggedDecision {
                context: choice.context,
                decision: choice.decision,
                timestamp: now,
                signal: choice.context.observed_signal,
            },
        })
    }

    pub fn apply_delayed_feedback(
        &mut self,
        log: &RoundLog,
        outcome: &RoundOutcome,
    ) -> Result<(), IblError> {
        self.memory.apply_delayed_feedback(log, outcome)
    }

    /// Plays one full round: choices, attack resolution, then learning.
    pub fn play_round(
        &mut self,
        session: &mut SessionState,
        observe: &mut dyn FnMut(Observation),
    ) -> Result<(RoundLog, RoundOutcome), IblError> {
        let log = self.run_round_observed(session, observe)?;
        let outcome = session.attack(log.attack_action())?;
        observe(Observation::Outcome(outcome.clone()));
        self.apply_delayed_feedback(&log, &outcome)?;
        Ok((log, outcome))
    }
}
