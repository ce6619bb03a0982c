use serde::{Deserialize, Serialize};

use super::cd::CdModel;
use crate::graphdata::{ConceptId, StudentId};
use crate::Result;

/// Difficulty tier of a (student, target) pair, by initial mastery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Hard,
    Medium,
    Easy,
    Excluded,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Medium, Tier::Hard];

    /// Open intervals (0.5, 0.6), (0.6, 0.7), (0.7, 0.8).
    pub fn of_mastery(d: f64) -> Tier {
        if 0.5 < d && d < 0.6 {
            Tier::Hard
        } else if 0.6 < d && d < 0.7 {
            Tier::Medium
        } else if 0.7 < d && d < 0.8 {
            Tier::Easy
        } else {
            Tier::Excluded
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Hard => "hard",
            Tier::Medium => "medium",
            Tier::Easy => "easy",
            Tier::Excluded => "excluded",
        }
    }
}

pub fn assign_tiers(model: &CdModel, samples: &[(StudentId, ConceptId)]) -> Result<Vec<Tier>> {
    samples
        .iter()
        .map(|&(u, c)| model.mastery(u, c).map(Tier::of_mastery))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intervals() {
        assert_eq!(Tier::of_mastery(0.65), Tier::Medium);
        assert_eq!(Tier::of_mastery(0.55), Tier::Hard);
        assert_eq!(Tier::of_mastery(0.75), Tier::Easy);
        assert_eq!(Tier::of_mastery(0.9), Tier::Excluded);
        assert_eq!(Tier::of_mastery(0.4), Tier::Excluded);
        for edge in [0.5, 0.6, 0.7, 0.8] {
            assert_eq!(Tier::of_mastery(edge), Tier::Excluded);
        }
    }
}
