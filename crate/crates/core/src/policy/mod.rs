//! The tutoring agent.
//!
//! A graph convolutional encoder turns the session subgraph into node
//! representations; the state is the mean of the student and target
//! vectors. Candidate actions are pruned by prerequisite-guided selection
//! and scored by a dueling Q-network trained with prioritized replay.

mod agent;
mod encoder;
mod qnet;
mod replay;
mod selection;

pub use agent::{
    greedy_index, run_training, td_target, write_training_log, Ablation, ActMode, Agent,
    AgentConfig, EpisodeRecord, Learner, QModel, TrainingOutcome, Transition,
};
pub use encoder::{EncoderTrace, GcnEncoder, GcnLayer, GraphInput};
pub use qnet::{dueling_combine, DuelingQNet, QTrace};
pub use replay::{ReplayBuffer, ReplayConfig, SampledBatch};
pub use selection::{
    candidate_pool, concept_prob, concept_score, concept_scores, exercise_score, select_candidates,
    CandidateSet, SelectionMode,
};

use rand_chacha::ChaCha8Rng;

use crate::graphdata::{ActionId, SubgraphScope};
use crate::simulator::Episode;
use crate::Result;

/// Anything that can pick the next tutoring action.
pub trait TutorPolicy: Sync {
    fn name(&self) -> String;
    fn act(&self, episode: &Episode<'_>, rng: &mut ChaCha8Rng) -> Result<ActionId>;

    /// Subgraph scope the policy expects its episodes to be built with.
    fn scope(&self) -> SubgraphScope {
        SubgraphScope::Extended
    }
}
