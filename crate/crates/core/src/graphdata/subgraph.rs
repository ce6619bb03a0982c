use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{ActionId, CognitiveGraph, ConceptId, ExerciseId, Feedback, NodeId, StudentId};
use crate::tensornet::Matrix;
use crate::{Error, Result};

/// Which exercises enter a session subgraph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubgraphScope {
    /// Target exercises plus the exercises of every prerequisite ancestor.
    #[default]
    Extended,
    /// Target exercises only.
    Literal,
}

/// Ordered `(action, feedback)` pairs of one session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionHistory {
    pub steps: Vec<(ActionId, Feedback)>,
}

impl InteractionHistory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn last(&self) -> Option<(ActionId, Feedback)> {
        self.steps.last().copied()
    }

    /// Exercises that received `Correct` at least once.
    pub fn comprehended(&self) -> impl Iterator<Item = ExerciseId> + '_ {
        self.steps.iter().filter_map(|&(a, f)| match (a, f) {
            (ActionId::Exercise(e), Feedback::Correct) => Some(e),
            _ => None,
        })
    }
}

/// The static part of a session subgraph: node set and the coverage and
/// prerequisite edges, shared by every state of one (student, target) pair.
///
/// Local node layout: `0` is the student, then the subgraph exercises in
/// ascending id, then every concept in ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphLayout {
    pub scope: SubgraphScope,
    pub student: StudentId,
    pub target: ConceptId,
    nodes: Vec<NodeId>,
    exercise_slot: HashMap<ExerciseId, usize>,
    concept_base: usize,
    static_edges: Vec<(usize, usize)>,
    initial_row: Vec<i8>,
}

impl SubgraphLayout {
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_exercises(&self) -> usize {
        self.concept_base - 1
    }

    pub fn local_index(&self, node: NodeId) -> Option<usize> {
        match node {
            NodeId::Student(s) => (s == self.student).then_some(0),
            NodeId::Exercise(e) => self.exercise_slot.get(&e).copied(),
            NodeId::Concept(c) => {
                let i = self.concept_base + c.0;
                (i < self.nodes.len()).then_some(i)
            }
        }
    }

    pub fn target_index(&self) -> usize {
        self.concept_base + self.target.0
    }

    /// Directed coverage (exercise -> concept) and prerequisite edges.
    pub fn static_edges(&self) -> &[(usize, usize)] {
        &self.static_edges
    }

    pub fn exercises(&self) -> impl Iterator<Item = ExerciseId> + '_ {
        self.nodes[1..self.concept_base].iter().map(|n| match n {
            NodeId::Exercise(e) => *e,
            _ => unreachable!("exercise slots hold exercises"),
        })
    }
}

/// RL state: the subgraph with its answer row updated by the session
/// history.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionState {
    layout: Arc<SubgraphLayout>,
    /// Student-to-exercise entries, one per exercise slot.
    row: Vec<i8>,
    history: InteractionHistory,
}

/// Assembles the session subgraph for `(student, target)`.
pub fn build_subgraph(
    graph: &CognitiveGraph,
    student: StudentId,
    target: ConceptId,
    scope: SubgraphScope,
) -> Result<SessionState> {
    graph.catalog.check_student(student)?;
    graph.catalog.check_concept(target)?;
    if graph.o.exercises_of(target).is_empty() {
        return Err(Error::UnusableGoal(target.0));
    }

    let mut exercises: Vec<ExerciseId> = graph.o.exercises_of(target).to_vec();
    if scope == SubgraphScope::Extended {
        for c in graph.p.predecessors(target) {
            exercises.extend_from_slice(graph.o.exercises_of(c));
        }
    }
    exercises.sort_unstable();
    exercises.dedup();

    let concept_base = 1 + exercises.len();
    let mut nodes = Vec::with_capacity(concept_base + graph.catalog.concepts);
    nodes.push(NodeId::Student(student));
    nodes.extend(exercises.iter().map(|&e| NodeId::Exercise(e)));
    nodes.extend(graph.catalog.concepts().map(NodeId::Concept));

    let exercise_slot: HashMap<ExerciseId, usize> = exercises
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i + 1))
        .collect();

    let mut static_edges = Vec::new();
    for (i, &e) in exercises.iter().enumerate() {
        for &c in graph.o.concepts_of(e) {
            static_edges.push((i + 1, concept_base + c.0));
        }
    }
    for (a, b) in graph.p.edges() {
        static_edges.push((concept_base + a.0, concept_base + b.0));
    }

    let initial_row = exercises
        .iter()
        .map(|&e| graph.q.get(student, e))
        .collect::<Vec<_>>();
    let layout = SubgraphLayout {
        scope,
        student,
        target,
        nodes,
        exercise_slot,
        concept_base,
        static_edges,
        initial_row: initial_row.clone(),
    };
    Ok(SessionState {
        layout: Arc::new(layout),
        row: initial_row,
        history: InteractionHistory::default(),
    })
}

impl SessionState {
    pub fn layout(&self) -> &Arc<SubgraphLayout> {
        &self.layout
    }

    pub fn student(&self) -> StudentId {
        self.layout.student
    }

    pub fn target(&self) -> ConceptId {
        self.layout.target
    }

    pub fn history(&self) -> &InteractionHistory {
        &self.history
    }

    pub fn num_nodes(&self) -> usize {
        self.layout.num_nodes()
    }

    pub fn contains(&self, node: NodeId) -> bool {
        self.layout.local_index(node).is_some()
    }

    /// Entry `A[i][j]` of the directed Eq.-2-style adjacency over local
    /// indices.
    pub fn adjacency(&self, i: usize, j: usize) -> f64 {
        let n = self.layout.num_nodes();
        if i >= n || j >= n {
            return 0.0;
        }
        if i == 0 && j >= 1 && j < self.layout.concept_base {
            return self.row[j - 1] as f64;
        }
        if self.layout.static_edges.contains(&(i, j)) {
            1.0
        } else {
            0.0
        }
    }

    /// Student-exercise entry for an exercise in the subgraph.
    pub fn answer(&self, e: ExerciseId) -> Option<i8> {
        self.layout.exercise_slot.get(&e).map(|&i| self.row[i - 1])
    }

    /// Every nonzero directed edge `(i, j, value)`.
    pub fn signed_edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let student = self
            .row
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0)
            .map(|(k, &v)| (0, k + 1, v as f64));
        student.chain(self.layout.static_edges.iter().map(|&(i, j)| (i, j, 1.0)))
    }

    /// Records `(action, feedback)`; an exercise action also overwrites the
    /// student's answer entry. Concept actions leave the adjacency alone.
    pub fn apply_feedback(&self, action: ActionId, feedback: Feedback) -> Result<SessionState> {
        let mut next = self.clone();
        next.record(action, feedback, true)?;
        Ok(next)
    }

    /// Like [`SessionState::apply_feedback`] but in place; with `strict` off
    /// an exercise outside the node set only extends the history, which is
    /// what literal-scope sessions need.
    pub fn record(&mut self, action: ActionId, feedback: Feedback, strict: bool) -> Result<()> {
        match action {
            ActionId::Exercise(e) => match self.layout.exercise_slot.get(&e) {
                Some(&slot) => self.row[slot - 1] = feedback.value(),
                None if strict => return Err(Error::ActionNotInSubgraph(action.to_string())),
                None => {}
            },
            ActionId::Concept(c) => {
                if !self.contains(NodeId::Concept(c)) {
                    return Err(Error::ActionNotInSubgraph(action.to_string()));
                }
            }
        }
        self.history.steps.push((action, feedback));
        Ok(())
    }

    /// Resets the answer row and history to the initial subgraph.
    pub fn reset(&self) -> SessionState {
        SessionState {
            layout: self.layout.clone(),
            row: self.layout.initial_row.clone(),
            history: InteractionHistory::default(),
        }
    }
}

/// Symmetric sparse `D^{-1/2} S D^{-1/2}` over a signed edge set.
///
/// `S` is the symmetrized signed adjacency and `D` the row sums of `|S|`;
/// rows with zero degree are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    rows: Vec<Vec<(usize, f64)>>,
}

impl NormalizedAdjacency {
    /// Builds from undirected signed edges; each `(i, j, w)` contributes to
    /// both `(i, j)` and `(j, i)`.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut acc: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, w) in edges {
            if w == 0.0 {
                continue;
            }
            acc[i].push((j, w));
            if i != j {
                acc[j].push((i, w));
            }
        }
        for row in &mut acc {
            row.sort_by_key(|&(j, _)| j);
            // Merge duplicates.
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(j, w) in row.iter() {
                match merged.last_mut() {
                    Some((lj, lw)) if *lj == j => *lw += w,
                    _ => merged.push((j, w)),
                }
            }
            merged.retain(|&(_, w)| w != 0.0);
            *row = merged;
        }
        let inv_sqrt: Vec<f64> = acc
            .iter()
            .map(|row| {
                let d: f64 = row.iter().map(|(_, w)| w.abs()).sum();
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let rows = acc
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                row.into_iter()
                    .map(|(j, w)| (j, w * inv_sqrt[i] * inv_sqrt[j]))
                    .collect()
            })
            .collect();
        NormalizedAdjacency { rows }
    }

    pub fn num_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0.0, |k| self.rows[i][k].1)
    }

    pub fn to_dense(&self) -> Matrix {
        let n = self.rows.len();
        let mut m = Matrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, w) in row {
                m.set(i, j, w);
            }
        }
        m
    }

    /// `(Λ H)` restricted to `rows` (all rows when `None`).
    pub fn aggregate(&self, h: &Matrix, rows: Option<&[usize]>) -> Matrix {
        let d = h.cols();
        let all: Vec<usize>;
        let idx = match rows {
            Some(r) => r,
            None => {
                all = (0..self.rows.len()).collect();
                &all
            }
        };
        let mut out = Matrix::zeros(idx.len(), d);
        for (k, &i) in idx.iter().enumerate() {
            let o = out.row_mut(k);
            for &(j, w) in &self.rows[i] {
                for (x, y) in o.iter_mut().zip(h.row(j)) {
                    *x += w * y;
                }
            }
        }
        out
    }

    /// `out += Λ^T G` where row `k` of `g` belongs to node `rows[k]`.
    pub fn scatter_transpose(&self, g: &Matrix, rows: Option<&[usize]>, out: &mut Matrix) {
        for k in 0..g.rows() {
            let i = rows.map_or(k, |r| r[k]);
            let gi = g.row(k);
            for &(j, w) in &self.rows[i] {
                for (x, y) in out.row_mut(j).iter_mut().zip(gi) {
                    *x += w * y;
                }
            }
        }
    }

    /// Relabels nodes: new node `perm[i]` is old node `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut rows = vec![Vec::new(); self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            let mut r: Vec<(usize, f64)> = row.iter().map(|&(j, w)| (perm[j], w)).collect();
            r.sort_by_key(|&(j, _)| j);
            rows[perm[i]] = r;
        }
        NormalizedAdjacency { rows }
    }
}

/// Normalized adjacency of the session subgraph.
pub fn normalized_adjacency(state: &SessionState) -> NormalizedAdjacency {
    NormalizedAdjacency::from_edges(state.num_nodes(), state.signed_edges())
}
