//! Comparison policies: nearest-embedding (KNN), rule-based greedy, and the
//! flat deep Q-network.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::embed::EmbeddingTable;
use crate::graphdata::{
    ActionId, CognitiveGraph, ConceptId, ExerciseId, Feedback, InteractionHistory, NodeId,
    StudentId,
};
use crate::policy::{
    candidate_pool, run_training, Ablation, AgentConfig, CandidateSet, TrainingOutcome, TutorPolicy,
};
use crate::simulator::{Episode, World};
use crate::Result;

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The candidate closest in cosine to the student's embedding, skipping
/// exercises already answered correctly. Ties go to the lower action.
/// Falls back to the target concept when every exercise is skipped.
pub fn knn_act(
    embeddings: &EmbeddingTable,
    graph: &CognitiveGraph,
    student: StudentId,
    candidates: &CandidateSet,
    history: &InteractionHistory,
) -> ActionId {
    let done: HashSet<ExerciseId> = history.comprehended().collect();
    let h_u = embeddings.node(&graph.catalog, NodeId::Student(student));
    let mut best: Option<(f64, ActionId)> = None;
    for &a in candidates.actions() {
        if a.exercise().is_some_and(|e| done.contains(&e)) {
            continue;
        }
        let s = cosine(h_u, embeddings.node(&graph.catalog, a.node()));
        best = match best {
            Some((bs, ba)) if bs > s || (bs == s && ba < a) => Some((bs, ba)),
            _ => Some((s, a)),
        };
    }
    best.map_or(ActionId::Concept(candidates.target()), |(_, a)| a)
}

/// Assess right after a comprehended exercise, otherwise tutor a random
/// not-yet-comprehended exercise of the target.
pub fn greedy_act(
    rng: &mut ChaCha8Rng,
    graph: &CognitiveGraph,
    target: ConceptId,
    history: &InteractionHistory,
) -> ActionId {
    if let Some((ActionId::Exercise(_), Feedback::Correct)) = history.last() {
        return ActionId::Concept(target);
    }
    let done: HashSet<ExerciseId> = history.comprehended().collect();
    let open: Vec<ExerciseId> = graph
        .o
        .exercises_of(target)
        .iter()
        .copied()
        .filter(|e| !done.contains(e))
        .collect();
    if open.is_empty() {
        return ActionId::Concept(target);
    }
    ActionId::Exercise(open[rng.gen_range(0..open.len())])
}

/// KNN over the pretrained embeddings. Candidates are every exercise of
/// the target and its predecessors, plus the target itself.
#[derive(Debug, Clone)]
pub struct Knn {
    pub embeddings: Arc<EmbeddingTable>,
}

impl TutorPolicy for Knn {
    fn name(&self) -> String {
        "knn".into()
    }

    fn act(&self, episode: &Episode<'_>, _rng: &mut ChaCha8Rng) -> Result<ActionId> {
        let graph = episode.graph;
        let pool = candidate_pool(&graph.o, episode.target(), &episode.predecessors);
        let cands = CandidateSet::new(pool, episode.target());
        Ok(knn_act(
            &self.embeddings,
            graph,
            episode.student(),
            &cands,
            episode.state.history(),
        ))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

impl TutorPolicy for Greedy {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn act(&self, episode: &Episode<'_>, rng: &mut ChaCha8Rng) -> Result<ActionId> {
        Ok(greedy_act(
            rng,
            episode.graph,
            episode.target(),
            episode.state.history(),
        ))
    }
}

/// Trains the flat Q-network: raw embeddings as state and the unpruned
/// exercise pool as actions, otherwise the same learning loop.
pub fn train_vanilla_dqn(
    world: &World,
    samples: &[(StudentId, ConceptId)],
    embeddings: Arc<EmbeddingTable>,
    config: AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<TrainingOutcome> {
    let config = AgentConfig {
        ablation: Ablation::vanilla_dqn(),
        ..config
    };
    run_training(world, samples, embeddings, config, episodes, seed)
}
