//! Exploration, replay and target-network plumbing shared by both agents.

pub mod explore;
pub mod per;

pub use explore::{random_distinct, topk_epsilon_greedy, topk_indices, Decay, EpsilonSchedule};
pub use per::{beta_schedule, PrioritizedBuffer, SampledBatch, SumTree, PRIORITY_EPSILON};
