use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ConceptId, ExerciseId, Feedback, NodeId, PrereqDag, StudentId};
use crate::{Error, Result};

/// Sizes of the three dense id spaces.
///
/// Global node indices lay students first, then exercises, then concepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCatalog {
    pub students: usize,
    pub exercises: usize,
    pub concepts: usize,
}

impl EntityCatalog {
    pub fn new(students: usize, exercises: usize, concepts: usize) -> Result<Self> {
        if students == 0 || exercises == 0 || concepts == 0 {
            return Err(Error::Config(format!(
                "catalog needs at least one of each entity, got {students}/{exercises}/{concepts}"
            )));
        }
        Ok(EntityCatalog {
            students,
            exercises,
            concepts,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.students + self.exercises + self.concepts
    }

    pub fn node_index(&self, node: NodeId) -> usize {
        match node {
            NodeId::Student(s) => s.0,
            NodeId::Exercise(e) => self.students + e.0,
            NodeId::Concept(c) => self.students + self.exercises + c.0,
        }
    }

    pub fn node_at(&self, index: usize) -> NodeId {
        if index < self.students {
            NodeId::Student(StudentId(index))
        } else if index < self.students + self.exercises {
            NodeId::Exercise(ExerciseId(index - self.students))
        } else {
            NodeId::Concept(ConceptId(index - self.students - self.exercises))
        }
    }

    pub fn check_student(&self, s: StudentId) -> Result<()> {
        check(s.0, self.students, "student")
    }

    pub fn check_exercise(&self, e: ExerciseId) -> Result<()> {
        check(e.0, self.exercises, "exercise")
    }

    pub fn check_concept(&self, c: ConceptId) -> Result<()> {
        check(c.0, self.concepts, "concept")
    }

    pub fn students(&self) -> impl Iterator<Item = StudentId> {
        (0..self.students).map(StudentId)
    }

    pub fn exercises(&self) -> impl Iterator<Item = ExerciseId> {
        (0..self.exercises).map(ExerciseId)
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> {
        (0..self.concepts).map(ConceptId)
    }
}

fn check(id: usize, bound: usize, kind: &'static str) -> Result<()> {
    if id < bound {
        Ok(())
    } else {
        Err(Error::UnknownId { kind, id })
    }
}

/// Sparse student-exercise answer matrix; absent entries are 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionMatrix {
    rows: Vec<BTreeMap<ExerciseId, Feedback>>,
}

impl InteractionMatrix {
    pub fn get(&self, s: StudentId, e: ExerciseId) -> i8 {
        self.rows[s.0].get(&e).map_or(0, |f| f.value())
    }

    pub fn row(&self, s: StudentId) -> &BTreeMap<ExerciseId, Feedback> {
        &self.rows[s.0]
    }

    pub fn len(&self) -> usize {
        self.rows.iter().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries, ordered by student then exercise.
    pub fn entries(&self) -> impl Iterator<Item = (StudentId, ExerciseId, Feedback)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().map(move |(&e, &f)| (StudentId(s), e, f)))
    }
}

/// Exercise-to-concept coverage with its transpose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptExerciseMap {
    by_exercise: Vec<Vec<ConceptId>>,
    by_concept: Vec<Vec<ExerciseId>>,
}

impl ConceptExerciseMap {
    pub fn concepts_of(&self, e: ExerciseId) -> &[ConceptId] {
        &self.by_exercise[e.0]
    }

    /// `E_c`, sorted by id.
    pub fn exercises_of(&self, c: ConceptId) -> &[ExerciseId] {
        &self.by_concept[c.0]
    }

    pub fn covers(&self, e: ExerciseId, c: ConceptId) -> bool {
        self.by_exercise[e.0].binary_search(&c).is_ok()
    }

    pub fn len(&self) -> usize {
        self.by_exercise.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> impl Iterator<Item = (ExerciseId, ConceptId)> + '_ {
        self.by_exercise
            .iter()
            .enumerate()
            .flat_map(|(e, cs)| cs.iter().map(move |&c| (ExerciseId(e), c)))
    }
}

/// Students, exercises and concepts joined by the answer (Q), coverage (O)
/// and prerequisite (P) relations. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CognitiveGraph {
    pub catalog: EntityCatalog,
    pub q: InteractionMatrix,
    pub o: ConceptExerciseMap,
    pub p: PrereqDag,
}

impl CognitiveGraph {
    /// Validates every id and invariant. Repeated interactions keep the last
    /// value.
    pub fn new(
        catalog: EntityCatalog,
        interactions: impl IntoIterator<Item = (StudentId, ExerciseId, Feedback)>,
        covers: impl IntoIterator<Item = (ExerciseId, ConceptId)>,
        prereqs: impl IntoIterator<Item = (ConceptId, ConceptId)>,
    ) -> Result<Self> {
        let mut rows = vec![BTreeMap::new(); catalog.students];
        for (s, e, f) in interactions {
            catalog.check_student(s)?;
            catalog.check_exercise(e)?;
            rows[s.0].insert(e, f);
        }

        let mut by_exercise = vec![Vec::new(); catalog.exercises];
        let mut by_concept = vec![Vec::new(); catalog.concepts];
        for (e, c) in covers {
            catalog.check_exercise(e)?;
            catalog.check_concept(c)?;
            by_exercise[e.0].push(c);
            by_concept[c.0].push(e);
        }
        for v in &mut by_exercise {
            v.sort_unstable();
            v.dedup();
        }
        for v in &mut by_concept {
            v.sort_unstable();
            v.dedup();
        }
        if let Some(e) = by_exercise.iter().position(Vec::is_empty) {
            return Err(Error::UncoveredExercise(e));
        }

        let p = PrereqDag::new(catalog.concepts, prereqs)?;
        Ok(CognitiveGraph {
            catalog,
            q: InteractionMatrix { rows },
            o: ConceptExerciseMap {
                by_exercise,
                by_concept,
            },
            p,
        })
    }

    /// Predecessor closure of `target` (see [`PrereqDag::predecessors`]).
    pub fn predecessors(&self, target: ConceptId) -> Result<Vec<ConceptId>> {
        self.catalog.check_concept(target)?;
        Ok(self.p.predecessors(target))
    }
}
