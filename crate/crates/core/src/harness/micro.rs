use super::dataset::Sample;
use crate::graphdata::{CognitiveGraph, ConceptId, EntityCatalog, ExerciseId, Feedback, StudentId};
use crate::simulator::{CdModel, SimConfig, Tier, World};
use crate::tensornet::Matrix;
use crate::Result;

/// Two-concept world with a known optimum.
///
/// `c0 -> c1`; `e0` covers both concepts, `e1` covers `c1` only. The single
/// student finds `e0` appropriate and `e1` too hard. One successful
/// tutoring of `e0` lifts mastery of `c1` past the pass bar, so the best
/// plan is "tutor e0, then assess c1", succeeding at turn 2; assessing
/// first fails and `e1` never helps.
pub fn rigged_world(max_turns: usize) -> Result<(World, Sample)> {
    let graph = CognitiveGraph::new(
        EntityCatalog::new(1, 2, 2)?,
        [(StudentId(0), ExerciseId(1), Feedback::Wrong)],
        [
            (ExerciseId(0), ConceptId(0)),
            (ExerciseId(0), ConceptId(1)),
            (ExerciseId(1), ConceptId(1)),
        ],
        [(ConceptId(0), ConceptId(1))],
    )?;
    let mut model = CdModel::init(&graph, 1, 0);
    model.proficiency.value = Matrix::from_rows(&[&[0.0, 0.0]]);
    model.difficulty.value = Matrix::from_rows(&[&[0.0, -0.006], &[0.0, 0.02]]);
    model.discrimination.value = Matrix::from_rows(&[&[1.0], &[1.0]]);
    model.hidden.w.value = Matrix::from_rows(&[&[0.0], &[100.0]]);
    model.hidden.b.value = Matrix::from_rows(&[&[0.0]]);
    model.output.w.value = Matrix::from_rows(&[&[4.0]]);
    model.output.b.value = Matrix::from_rows(&[&[0.0]]);
    let sim = SimConfig {
        max_turns,
        ..SimConfig::default()
    };
    let d = model.mastery(StudentId(0), ConceptId(1))?;
    let sample = Sample {
        student: StudentId(0),
        concept: ConceptId(1),
        tier: Tier::of_mastery(d),
    };
    Ok((World::new(graph, model, sim)?, sample))
}
