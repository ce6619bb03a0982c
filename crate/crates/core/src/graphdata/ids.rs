use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

macro_rules! dense_id {
    ($name:ident, $prefix:literal) => {
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

dense_id!(StudentId, "u");
dense_id!(ExerciseId, "e");
dense_id!(ConceptId, "c");

/// Any node of the cognitive graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum NodeId {
    Student(StudentId),
    Exercise(ExerciseId),
    Concept(ConceptId),
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Student(s) => s.fmt(f),
            NodeId::Exercise(e) => e.fmt(f),
            NodeId::Concept(c) => c.fmt(f),
        }
    }
}

/// A tutoring action: tutor an exercise or assess a concept.
///
/// Ordering puts every exercise before every concept, then by id; this is
/// the "lowest id" used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum ActionId {
    Exercise(ExerciseId),
    Concept(ConceptId),
}

impl ActionId {
    pub fn node(self) -> NodeId {
        match self {
            ActionId::Exercise(e) => NodeId::Exercise(e),
            ActionId::Concept(c) => NodeId::Concept(c),
        }
    }

    pub fn exercise(self) -> Option<ExerciseId> {
        match self {
            ActionId::Exercise(e) => Some(e),
            ActionId::Concept(_) => None,
        }
    }
}

impl fmt::Display for ActionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.node().fmt(f)
    }
}

/// Student feedback on a tutored exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Feedback {
    Correct,
    Wrong,
}

impl Feedback {
    pub fn value(self) -> i8 {
        match self {
            Feedback::Correct => 1,
            Feedback::Wrong => -1,
        }
    }

    pub fn from_correct(correct: bool) -> Self {
        if correct {
            Feedback::Correct
        } else {
            Feedback::Wrong
        }
    }

    pub fn is_correct(self) -> bool {
        self == Feedback::Correct
    }

    pub fn from_value(v: i64) -> Result<Self> {
        match v {
            1 => Ok(Feedback::Correct),
            -1 => Ok(Feedback::Wrong),
            other => Err(Error::InvalidFeedback(other)),
        }
    }
}

impl TryFrom<i8> for Feedback {
    type Error = Error;

    fn try_from(v: i8) -> Result<Self> {
        Feedback::from_value(v as i64)
    }
}

impl From<Feedback> for i8 {
    fn from(f: Feedback) -> i8 {
        f.value()
    }
}
