//! Cooperative Nash-bargaining resource allocation for multi-user
//! spectrum sharing on frequency-selective channels.
//!
//! Users split frequency bins by time sharing (joint TDM/FDM). Under
//! spectral masks alone the bargaining problem is convex and is solved
//! exactly for two users ([`smc`]) or by dual decomposition for any number
//! of users ([`dual`]). Adding per-user total-power limits makes it
//! non-convex; [`tpc`] classifies the two-user game as bandwidth- or
//! power-dominant and solves each class with its own scheme. [`oracle`]
//! holds brute-force references used for verification.

pub mod bargaining;
pub mod channel;
pub mod dual;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod report;
pub mod scenario;
pub mod smc;
pub mod tol;
pub mod tpc;
pub mod waterfill;

pub use bargaining::{
    log_nf, nb_on_segment, pareto_frontier, realize_schedule, Allocation, Frontier, Schedule,
    UtilityPoint,
};
pub use channel::{ChannelSet, Disagreement, GameInstance, SpectralMask};
pub use dual::{iterate_dual, run_dual, DualConfig, DualRun, Multipliers};
pub use error::{NbError, Result};
pub use report::{Method, SolveReport};
pub use scenario::{generate_scenario, MaskSpec, ScenarioSpec};
pub use smc::{solve_two_user_smc, tdmfdm_frontier};
pub use tpc::{classify, solve_tpc, Classification, SystemKind};
