//! The cognitive graph and per-session subgraphs.

mod dag;
mod graph;
mod ids;
mod subgraph;

pub use dag::PrereqDag;
pub use graph::{CognitiveGraph, ConceptExerciseMap, EntityCatalog, InteractionMatrix};
pub use ids::{ActionId, ConceptId, ExerciseId, Feedback, NodeId, StudentId};
pub use subgraph::{
    build_subgraph, normalized_adjacency, InteractionHistory, NormalizedAdjacency, SessionState,
    SubgraphLayout, SubgraphScope,
};
