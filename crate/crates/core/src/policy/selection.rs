use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::graphdata::{ActionId, ConceptExerciseMap, ConceptId, ExerciseId};

/// How the candidate exercises of a turn are chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    /// Rank prerequisite concepts by weighted entropy, then their
    /// exercises by exercise score.
    #[default]
    Prerequisite,
    /// Top exercises of the pool by exercise score alone.
    ExerciseOnly,
    /// The whole pool, no pruning.
    Full,
}

/// Actions available on one turn: exercises in priority order, then the
/// target concept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    actions: Vec<ActionId>,
}

impl CandidateSet {
    pub fn new(exercises: Vec<ExerciseId>, target: ConceptId) -> Self {
        let mut actions: Vec<ActionId> = exercises.into_iter().map(ActionId::Exercise).collect();
        actions.push(ActionId::Concept(target));
        CandidateSet { actions }
    }

    pub fn actions(&self) -> &[ActionId] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn target(&self) -> ConceptId {
        match self.actions.last() {
            Some(ActionId::Concept(c)) => *c,
            _ => unreachable!("a candidate set always ends with its target"),
        }
    }

    pub fn exercises(&self) -> impl Iterator<Item = ExerciseId> + '_ {
        self.actions.iter().filter_map(|a| a.exercise())
    }

    pub fn position(&self, action: ActionId) -> Option<usize> {
        self.actions.iter().position(|&a| a == action)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `sigmoid(h_u . h_e + sum_{E+} h_e . h_e' - sum_{E-} h_e . h_e')`.
pub fn exercise_score(h_u: &[f64], h_e: &[f64], plus: &[&[f64]], minus: &[&[f64]]) -> f64 {
    let mut z = dot(h_u, h_e);
    z += plus.iter().map(|h| dot(h_e, h)).sum::<f64>();
    z -= minus.iter().map(|h| dot(h_e, h)).sum::<f64>();
    crate::tensornet::sigmoid_scalar(z)
}

/// Share of concept `c`'s exercise weight that also lies on the target.
pub fn concept_prob(
    o: &ConceptExerciseMap,
    target: ConceptId,
    c: ConceptId,
    w: &HashMap<ExerciseId, f64>,
) -> f64 {
    let weight = |e: &ExerciseId| w.get(e).copied().unwrap_or(0.0);
    let total: f64 = o.exercises_of(c).iter().map(weight).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let on_target: f64 = o
        .exercises_of(c)
        .iter()
        .filter(|e| o.covers(**e, target))
        .map(weight)
        .sum();
    (on_target / total).clamp(0.0, 1.0)
}

/// Weighted entropy `-p ln p`, zero at `p = 0` and `p = 1`.
pub fn concept_score(prob: f64) -> f64 {
    if prob <= 0.0 || prob >= 1.0 {
        0.0
    } else {
        -prob * prob.ln()
    }
}

/// `(concept, w_c)` for every predecessor, in the given order.
pub fn concept_scores(
    o: &ConceptExerciseMap,
    target: ConceptId,
    predecessors: &[ConceptId],
    w: &HashMap<ExerciseId, f64>,
) -> Vec<(ConceptId, f64)> {
    predecessors
        .iter()
        .map(|&c| (c, concept_score(concept_prob(o, target, c, w))))
        .collect()
}

/// Exercises of the predecessors and of the target, ascending.
pub fn candidate_pool(
    o: &ConceptExerciseMap,
    target: ConceptId,
    predecessors: &[ConceptId],
) -> Vec<ExerciseId> {
    let mut pool: Vec<ExerciseId> = o.exercises_of(target).to_vec();
    for &c in predecessors {
        pool.extend_from_slice(o.exercises_of(c));
    }
    pool.sort_unstable();
    pool.dedup();
    pool
}

fn by_score_desc<K: Ord + Copy + std::hash::Hash>(
    scores: &HashMap<K, f64>,
) -> impl Fn(&K, &K) -> std::cmp::Ordering + '_ {
    move |a, b| {
        // `+ 0.0` folds -0.0 into 0.0 so signed zeros tie.
        let (sa, sb) = (
            scores.get(a).map_or(0.0, |v| v + 0.0),
            scores.get(b).map_or(0.0, |v| v + 0.0),
        );
        sb.total_cmp(&sa).then(a.cmp(b))
    }
}

/// Builds the turn's candidate set.
///
/// In prerequisite mode, predecessors are visited by descending concept
/// score and each one's exercises by descending exercise score, skipping
/// exercises already taken, until `n` are collected. The target's own
/// exercises form a final group when room remains. Ties go to the lower id.
pub fn select_candidates(
    o: &ConceptExerciseMap,
    target: ConceptId,
    predecessors: &[ConceptId],
    w: &HashMap<ExerciseId, f64>,
    n: usize,
    mode: SelectionMode,
) -> CandidateSet {
    let exercises = match mode {
        SelectionMode::Full => candidate_pool(o, target, predecessors),
        SelectionMode::ExerciseOnly => {
            let mut pool = candidate_pool(o, target, predecessors);
            pool.sort_by(by_score_desc(w));
            pool.truncate(n);
            pool
        }
        SelectionMode::Prerequisite => {
            let wc: HashMap<ConceptId, f64> = concept_scores(o, target, predecessors, w)
                .into_iter()
                .collect();
            let mut concepts = predecessors.to_vec();
            concepts.sort_by(by_score_desc(&wc));
            concepts.push(target);
            let mut taken = HashSet::new();
            let mut out = Vec::with_capacity(n);
            'outer: for c in concepts {
                let mut group = o.exercises_of(c).to_vec();
                group.sort_by(by_score_desc(w));
                for e in group {
                    if out.len() == n {
                        break 'outer;
                    }
                    if taken.insert(e) {
                        out.push(e);
                    }
                }
            }
            out
        }
    };
    CandidateSet::new(exercises, target)
}
