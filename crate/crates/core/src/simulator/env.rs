use super::cd::CdModel;
use super::session::{dynamic_update, respond, Branch, SimConfig, StepOutcome, StudentSession};
use crate::graphdata::{
    build_subgraph, ActionId, CognitiveGraph, ConceptId, ExerciseId, Feedback, SessionState,
    StudentId, SubgraphScope,
};
use crate::Result;

/// Graph, fitted student model and response settings.
#[derive(Debug, Clone)]
pub struct World {
    pub graph: CognitiveGraph,
    pub model: CdModel,
    pub sim: SimConfig,
}

impl World {
    pub fn new(graph: CognitiveGraph, model: CdModel, sim: SimConfig) -> Result<Self> {
        sim.validate()?;
        Ok(World { graph, model, sim })
    }

    pub fn with_sim(&self, sim: SimConfig) -> Result<World> {
        sim.validate()?;
        Ok(World {
            graph: self.graph.clone(),
            model: self.model.clone(),
            sim,
        })
    }

    pub fn episode(
        &self,
        student: StudentId,
        target: ConceptId,
        scope: SubgraphScope,
    ) -> Result<Episode<'_>> {
        Episode::new(&self.graph, &self.model, &self.sim, student, target, scope)
    }
}

/// One tutoring session: the RL state, the simulated student and the
/// outcomes of tutored exercises so far.
#[derive(Debug, Clone)]
pub struct Episode<'w> {
    pub graph: &'w CognitiveGraph,
    pub model: &'w CdModel,
    pub sim: &'w SimConfig,
    pub state: SessionState,
    pub session: StudentSession,
    /// Every tutored exercise with the branch it triggered, in order.
    pub tutored: Vec<(ExerciseId, Branch)>,
    pub predecessors: Vec<ConceptId>,
}

impl<'w> Episode<'w> {
    pub fn new(
        graph: &'w CognitiveGraph,
        model: &'w CdModel,
        sim: &'w SimConfig,
        student: StudentId,
        target: ConceptId,
        scope: SubgraphScope,
    ) -> Result<Self> {
        let state = build_subgraph(graph, student, target, scope)?;
        Ok(Episode {
            graph,
            model,
            sim,
            state,
            session: StudentSession::new(model, student, target)?,
            tutored: Vec::new(),
            predecessors: graph.predecessors(target)?,
        })
    }

    /// Starts from an explicit proficiency row instead of the model's.
    pub fn with_proficiency(mut self, row: &[f64]) -> Self {
        self.session.proficiency.copy_from_slice(row);
        self
    }

    pub fn student(&self) -> StudentId {
        self.session.student
    }

    pub fn target(&self) -> ConceptId {
        self.session.target
    }

    pub fn is_active(&self) -> bool {
        self.session.is_active()
    }

    /// Latest branch per tutored exercise, split into appropriate and
    /// inappropriate ones.
    pub fn tutored_sets(&self) -> (Vec<ExerciseId>, Vec<ExerciseId>) {
        let mut latest: Vec<(ExerciseId, Branch)> = Vec::new();
        for &(e, b) in &self.tutored {
            match latest.iter_mut().find(|(x, _)| *x == e) {
                Some(slot) => slot.1 = b,
                None => latest.push((e, b)),
            }
        }
        let plus = latest
            .iter()
            .filter(|(_, b)| *b == Branch::ExerciseFit)
            .map(|x| x.0)
            .collect();
        let minus = latest
            .iter()
            .filter(|(_, b)| *b != Branch::ExerciseFit)
            .map(|x| x.0)
            .collect();
        (plus, minus)
    }

    /// Respond, move the state, then let the student learn.
    pub fn step(&mut self, action: ActionId) -> Result<StepOutcome> {
        let out = respond(&mut self.session, self.model, action, self.sim)?;
        match action {
            ActionId::Exercise(e) => {
                let f = out
                    .exercise_feedback()
                    .expect("exercise branches carry feedback");
                self.state.record(action, f, false)?;
                self.tutored.push((e, out.branch));
                dynamic_update(&mut self.session, self.model, e, f, self.sim)?;
            }
            ActionId::Concept(_) => {
                let f = Feedback::from_correct(out.branch == Branch::ConceptPass);
                self.state.record(action, f, true)?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphdata::EntityCatalog;
    use crate::simulator::TerminationReason;

    fn world() -> World {
        let graph = CognitiveGraph::new(
            EntityCatalog::new(1, 3, 2).unwrap(),
            [(StudentId(0), ExerciseId(0), Feedback::Correct)],
            [
                (ExerciseId(0), ConceptId(0)),
                (ExerciseId(1), ConceptId(0)),
                (ExerciseId(1), ConceptId(1)),
                (ExerciseId(2), ConceptId(1)),
            ],
            [(ConceptId(0), ConceptId(1))],
        )
        .unwrap();
        let model = CdModel::init(&graph, 4, 0);
        World::new(graph, model, SimConfig::default()).unwrap()
    }

    #[test]
    fn steps_update_state_and_history() {
        let w = world();
        let mut ep = w
            .episode(StudentId(0), ConceptId(1), SubgraphScope::Extended)
            .unwrap();
        assert_eq!(ep.predecessors, vec![ConceptId(0)]);
        let out = ep.step(ActionId::Exercise(ExerciseId(1))).unwrap();
        assert_eq!(ep.state.answer(ExerciseId(1)), Some(out.feedback));
        assert_eq!(ep.tutored, vec![(ExerciseId(1), out.branch)]);
        let before = ep.state.signed_edges().count();
        let out = ep.step(ActionId::Concept(ConceptId(1))).unwrap();
        assert_eq!(out.feedback, 0);
        assert_eq!(ep.state.signed_edges().count(), before);
        assert_eq!(ep.state.history().len(), 2);
    }

    #[test]
    fn always_assessing_quits_at_patience() {
        let w = world();
        let mut ep = w
            .episode(StudentId(0), ConceptId(1), SubgraphScope::Extended)
            .unwrap();
        let mut last = None;
        while ep.is_active() {
            last = Some(ep.step(ActionId::Concept(ConceptId(1))).unwrap());
        }
        assert_eq!(last.unwrap().terminal, TerminationReason::QuitPatience);
        assert_eq!(ep.session.turn, 4);
    }

    #[test]
    fn tutored_sets_keep_latest_branch() {
        let w = world();
        let mut ep = w
            .episode(StudentId(0), ConceptId(1), SubgraphScope::Extended)
            .unwrap();
        ep.tutored = vec![
            (ExerciseId(0), Branch::ExerciseFit),
            (ExerciseId(2), Branch::ExerciseTooHard),
            (ExerciseId(0), Branch::ExerciseTooHard),
            (ExerciseId(1), Branch::ExerciseFit),
        ];
        let (plus, minus) = ep.tutored_sets();
        assert_eq!(plus, vec![ExerciseId(1)]);
        assert_eq!(minus, vec![ExerciseId(0), ExerciseId(2)]);
    }
}
