use serde::{Deserialize, Serialize};

use super::cd::CdModel;
use crate::graphdata::{ActionId, ConceptId, ExerciseId, Feedback, StudentId};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    /// Assessment passed.
    pub concept_pass: f64,
    /// Assessment failed.
    pub concept_fail: f64,
    /// Exercise of appropriate difficulty.
    pub exercise_fit: f64,
    /// Exercise too easy or too hard.
    pub exercise_miss: f64,
    /// Added on the step where the student quits.
    pub quit: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Rewards {
            concept_pass: 1.0,
            concept_fail: -0.2,
            exercise_fit: 0.01,
            exercise_miss: -0.1,
            quit: -0.3,
        }
    }
}

/// Direction of the in-episode proficiency step after a solved exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateRule {
    /// Ascend `log p`: the student gets better at what they just solved.
    #[default]
    Ascent,
    /// Descend `log p`, the update rule taken literally.
    LiteralDescent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub delta: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub rewards: Rewards,
    pub beta: f64,
    pub max_turns: usize,
    pub alpha: f64,
    pub update_rule: UpdateRule,
    /// Keep a student's learned proficiency across episodes instead of
    /// restarting every episode from the fitted model.
    pub persist_updates: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            delta: 0.9,
            lambda_lo: 0.5,
            lambda_hi: 1.0,
            rewards: Rewards::default(),
            beta: 4.0,
            max_turns: 20,
            alpha: 0.02,
            update_rule: UpdateRule::Ascent,
            persist_updates: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if !(0.0 <= self.lambda_lo && self.lambda_lo < self.lambda_hi && self.lambda_hi <= 1.0) {
            return Err(Error::Config(format!(
                "need 0 <= lambda_lo < lambda_hi <= 1, got [{}, {}]",
                self.lambda_lo, self.lambda_hi
            )));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Config(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if self.max_turns == 0 {
            return Err(Error::Config("max_turns must be at least 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Active,
    Mastered,
    QuitPatience,
    QuitMaxTurn,
}

impl TerminationReason {
    pub fn is_terminal(self) -> bool {
        self != TerminationReason::Active
    }
}

/// Which row of the response table fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    ConceptPass,
    ConceptFail,
    ExerciseFit,
    ExerciseTooEasy,
    ExerciseTooHard,
}

impl Branch {
    /// Assessment outcome for mastery `d`.
    pub fn for_concept(d: f64, cfg: &SimConfig) -> Branch {
        if d >= cfg.delta {
            Branch::ConceptPass
        } else {
            Branch::ConceptFail
        }
    }

    /// Tutoring outcome for success probability `p`.
    pub fn for_exercise(p: f64, cfg: &SimConfig) -> Branch {
        if p <= cfg.lambda_lo {
            Branch::ExerciseTooHard
        } else if p >= cfg.lambda_hi {
            Branch::ExerciseTooEasy
        } else {
            Branch::ExerciseFit
        }
    }

    pub fn reward(self, r: &Rewards) -> f64 {
        match self {
            Branch::ConceptPass => r.concept_pass,
            Branch::ConceptFail => r.concept_fail,
            Branch::ExerciseFit => r.exercise_fit,
            Branch::ExerciseTooEasy | Branch::ExerciseTooHard => r.exercise_miss,
        }
    }

    /// -1, 0 or +1; assessments carry no exercise feedback.
    pub fn feedback(self) -> i8 {
        match self {
            Branch::ConceptPass | Branch::ConceptFail => 0,
            Branch::ExerciseFit | Branch::ExerciseTooEasy => 1,
            Branch::ExerciseTooHard => -1,
        }
    }

    /// Patience cost given the probability that selected the branch.
    pub fn patience_loss(self, prob: f64) -> f64 {
        match self {
            Branch::ConceptPass => 0.0,
            Branch::ConceptFail => 1.0,
            _ => 1.0 - prob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub feedback: i8,
    pub patience_loss: f64,
    pub branch: Branch,
    pub terminal: TerminationReason,
    /// `p` for exercises, `d` for assessments.
    pub probability: f64,
}

impl StepOutcome {
    /// Exercise feedback as a graph edge sign, `None` for assessments.
    pub fn exercise_feedback(&self) -> Option<Feedback> {
        match self.feedback {
            1 => Some(Feedback::Correct),
            -1 => Some(Feedback::Wrong),
            _ => None,
        }
    }
}

/// One student's side of an episode: a private copy of their proficiency
/// logits plus patience and turn counters.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentSession {
    pub student: StudentId,
    pub target: ConceptId,
    pub proficiency: Vec<f64>,
    pub cumulative_loss: f64,
    pub turn: usize,
    pub status: TerminationReason,
}

impl StudentSession {
    pub fn new(model: &CdModel, student: StudentId, target: ConceptId) -> Result<Self> {
        if target.0 >= model.num_concepts() {
            return Err(Error::UnknownId {
                kind: "concept",
                id: target.0,
            });
        }
        Ok(StudentSession {
            student,
            target,
            proficiency: model.proficiency_row(student)?.to_vec(),
            cumulative_loss: 0.0,
            turn: 0,
            status: TerminationReason::Active,
        })
    }

    pub fn is_active(&self) -> bool {
        !self.status.is_terminal()
    }

    pub fn mastery(&self, model: &CdModel, c: ConceptId) -> Result<f64> {
        model.mastery_with(&self.proficiency, c)
    }

    pub fn predict(&self, model: &CdModel, e: ExerciseId) -> Result<f64> {
        model.predict_with(&self.proficiency, e)
    }
}

/// Simulates the student's response to one tutoring action.
pub fn respond(
    session: &mut StudentSession,
    model: &CdModel,
    action: ActionId,
    cfg: &SimConfig,
) -> Result<StepOutcome> {
    if !session.is_active() {
        return Err(Error::SessionTerminated);
    }
    let (branch, prob) = match action {
        ActionId::Concept(c) if c == session.target => {
            let d = session.mastery(model, c)?;
            (Branch::for_concept(d, cfg), d)
        }
        ActionId::Concept(c) => {
            return Err(Error::InvalidAction(format!(
                "only the target {} can be assessed, got {c}",
                session.target
            )))
        }
        ActionId::Exercise(e) => {
            let p = session.predict(model, e)?;
            (Branch::for_exercise(p, cfg), p)
        }
    };
    let mut reward = branch.reward(&cfg.rewards);
    let patience_loss = branch.patience_loss(prob);
    session.cumulative_loss += patience_loss;
    let terminal = if branch == Branch::ConceptPass {
        TerminationReason::Mastered
    } else if session.cumulative_loss >= cfg.beta {
        TerminationReason::QuitPatience
    } else if session.turn + 1 >= cfg.max_turns {
        TerminationReason::QuitMaxTurn
    } else {
        TerminationReason::Active
    };
    if matches!(
        terminal,
        TerminationReason::QuitPatience | TerminationReason::QuitMaxTurn
    ) {
        reward += cfg.rewards.quit;
    }
    session.turn += 1;
    session.status = terminal;
    Ok(StepOutcome {
        reward,
        feedback: branch.feedback(),
        patience_loss,
        branch,
        terminal,
        probability: prob,
    })
}

/// One gradient step on the session's proficiency after tutoring `exercise`.
///
/// Only a correct answer moves the student; exercise-side parameters are
/// never touched.
pub fn dynamic_update(
    session: &mut StudentSession,
    model: &CdModel,
    exercise: ExerciseId,
    feedback: Feedback,
    cfg: &SimConfig,
) -> Result<()> {
    if !feedback.is_correct() {
        return Ok(());
    }
    let (_, grad) = model.log_prob_grad(&session.proficiency, exercise)?;
    let step = match cfg.update_rule {
        UpdateRule::Ascent => cfg.alpha,
        UpdateRule::LiteralDescent => -cfg.alpha,
    };
    for (v, g) in session.proficiency.iter_mut().zip(grad) {
        *v += step * g;
    }
    Ok(())
}
