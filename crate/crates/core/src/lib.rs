//! Reputation-aware delegation primitives.
//!
//! Beta reputation with timeliness discounting, actor-critic testimony
//! filtering, broker-side and trustee-side task admission, comparison
//! policies, evaluation metrics and trust-aware spectrum sensing.

pub mod act;
pub mod baselines;
pub mod crn;
pub mod draft;
pub mod error;
pub mod metrics;
pub mod reputation;
pub mod sword;

pub use error::{CoreError, Result};

pub type AgentId = u32;
pub type ContextId = u16;
pub type Step = u64;
