//! Deterministic closed-loop simulator and evaluation suite for a dexterous
//! heads-up Texas Hold'em tabletop agent.
//!
//! The crate is organised bottom-up: [`tabletop`] holds the ground truth,
//! [`poker`] and [`rules`] decide legality and showdowns, [`translator`] turns
//! agent primitives into robot atoms, [`router`] gates every captured state,
//! [`policy_sim`] and [`perceiver`] add execution and perception noise, and
//! [`session`] runs whole hands. [`perception_eval`] and [`bench`] hold the
//! offline scoring code.

pub mod agents;
pub mod bench;
pub mod codec;
pub mod metrics;
pub mod perceiver;
pub mod perception_eval;
pub mod poker;
pub mod policy_sim;
pub mod primitives;
pub mod router;
pub mod rules;
pub mod session;
pub mod tabletop;
pub mod translator;
pub mod wire;

pub use primitives::{AgentPrimitive, RobotPrimitive};
pub use tabletop::{Card, ChipCount, Denomination, LoopStage, OutcomeLevel, TableState};
