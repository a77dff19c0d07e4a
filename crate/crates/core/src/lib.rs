//! Probing-cost deception game with an instance-based learning attacker.
//!
//! The crate is split into four layers:
//!
//! - [`game`]: the rule engine. A session is a fixed schedule of rounds; each
//!   round has a probe stage (signals only, possibly lies) followed by a single
//!   attack-or-withdraw decision, after which all costs and server kinds are
//!   revealed at once.
//! - [`ibl`]: an instance-based learning agent that plays the game by blending
//!   remembered utilities weighted by memory activation.
//! - [`harness`]: seeded, parallel simulation of many participants across the
//!   three probing-cost conditions, producing per-decision CSV logs.
//! - [`analysis`]: proportions of probe/attack targets per condition, human
//!   data import and pattern comparison.
//!
//! The learning math is generic over the float type (see [`Scalar`]); the
//! aliases below fix it to `f64`, which is what the harness uses.

pub mod analysis;
pub mod game;
pub mod harness;
pub mod ibl;
pub mod params;
pub mod record;
pub mod scalar;

pub use analysis::{
    aggregate, compare, emit_report, AnalysisError, ComparisonReport, ConditionStats,
    HumanDataTable, Triple,
};
pub use game::{
    attack_payoff, plan_rounds, probe_cost, signal_for, AttackAction, CostScheme, GameConfig, GameError, Payoffs, Points,
    ProbeAction, RoundOutcome, RoundPlan, RoundState, RoundView, ServerId, ServerKind,
    SessionState, Signal,
};
pub use harness::{run_experiment, run_participant, ExperimentConfig, HarnessError, Observation};
pub use ibl::{Context, Decision, IblError, Instance, MemoryStore, RoundLog, Stage};
pub use params::ParamsFile;
pub use record::{DecisionRecord, CSV_HEADER};
pub use scalar::Scalar;

/// Agent parameters in double precision.
pub type AgentParams = ibl::AgentParams<f64>;
/// Agent parameters in single precision.
pub type AgentParams32 = ibl::AgentParams<f32>;
/// The attacker model used by the harness.
pub type IblAgent = ibl::IblAgent<f64>;
/// Single-precision attacker, mostly useful for checking the math is type-agnostic.
pub type IblAgent32 = ibl::IblAgent<f32>;
/// Per-condition proportions in double precision.
pub type AggregateStats = analysis::AggregateStats<f64>;
