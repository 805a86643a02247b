//! Strategic bandit arms that share information over a gossip network.
//!
//! Arms replicate the player's per-arm weights, average them with their neighbors
//! through a doubly-stochastic combination matrix, and use the estimate to split the
//! market evenly while paying the player only `theta * (1 - p_hat)` per pull. The
//! crate simulates that protocol against EXP3-family players and audits the outcome.

pub mod arms;
pub mod cli;
pub mod consensus;
pub mod engine;
pub mod ledger;
pub mod metrics;
pub mod player;
pub mod topology;

pub use arms::{ArmParams, ArmState, Strategy};
pub use consensus::{ConsensusState, DisagreementTrace};
pub use engine::{simulate, RoundRecord, SimConfig, SimError, SimResult, TopologySpec};
pub use metrics::{audit, AuditReport, AuditSettings};
pub use player::{Algorithm, PlayerConfig, PlayerSettings};
pub use topology::{CombinationMatrix, Graph, MixingReport};
