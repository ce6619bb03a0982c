//! Shared settings for the acceptance targets.

use gits_core::policy::AgentConfig;
use gits_core::Execution;

pub const MICRO_EPISODES: usize = 300;

/// Small network and batch for the two-concept world.
pub fn micro_agent_config() -> AgentConfig {
    AgentConfig {
        hidden: 16,
        batch_size: 16,
        learning_rate: 1e-3,
        execution: Execution::Serial,
        ..AgentConfig::default()
    }
}

pub const DESK_EPISODES: usize = 5_000;
pub const DESK_SEEDS: [u64; 3] = [1, 2, 3];
pub const DESK_EMBED_DIM: usize = 32;

/// Single-core budget for the default synthetic world: a smaller network and
/// batch, updates every other step, a slower target and a longer exploration
/// phase.
pub fn desk_agent_config() -> AgentConfig {
    AgentConfig {
        hidden: 64,
        batch_size: 32,
        train_every: 2,
        learning_rate: 1e-4,
        target_update: Some(500),
        epsilon_end: 0.1,
        epsilon_decay_fraction: 0.5,
        execution: Execution::Serial,
        ..AgentConfig::default()
    }
}
