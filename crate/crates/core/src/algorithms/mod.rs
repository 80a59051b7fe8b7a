//! Contextual exponential-weights agents with graph feedback.

pub mod agent;
pub mod policy;
pub mod schedule;

pub use agent::{Agent, Algorithm, AlphaMode, Observation, UpdateSummary};
pub use policy::{policy_ix, policy_u, softmax, PolicyVector};
pub use schedule::{
    q_bound_u_directed, q_value_ix, schedule_ix, schedule_u_directed, schedule_u_undirected, IxRates,
    ProblemConstants, UParams,
};
