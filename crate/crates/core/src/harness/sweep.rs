use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use super::run::{evaluate, MetricsReport};
use crate::policy::TutorPolicy;
use crate::simulator::{SimConfig, Tier, World};
use crate::{Error, Execution, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Patience threshold 1..=5.
    Patience,
    /// Student learning rate 0.01..=0.05.
    LearnRate,
    /// One row per difficulty tier.
    Tier,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Patience => "patience",
            SweepKind::LearnRate => "learnrate",
            SweepKind::Tier => "tier",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "patience" => Ok(SweepKind::Patience),
            "learnrate" => Ok(SweepKind::LearnRate),
            "tier" => Ok(SweepKind::Tier),
            _ => Err(Error::Config(format!("unknown sweep kind {s:?}"))),
        }
    }
}

pub const PATIENCE_GRID: [f64; 5] = [1.0, 2.0, 3.0, 4.0, 5.0];
pub const LEARNRATE_GRID: [f64; 5] = [0.01, 0.02, 0.03, 0.04, 0.05];

/// One grid point for one policy. `kind` and `value` are empty for plain
/// evaluations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kind: String,
    pub value: String,
    pub report: MetricsReport,
}

impl SweepRow {
    pub fn plain(report: MetricsReport) -> Self {
        SweepRow {
            kind: String::new(),
            value: String::new(),
            report,
        }
    }
}

/// One evaluation per grid point per policy, grid-major.
pub fn sweep(
    kind: SweepKind,
    policies: &[&dyn TutorPolicy],
    world: &World,
    samples: &[Sample],
    seeds: &[u64],
    execution: Execution,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    let mut push = |value: String, w: &World, s: &[Sample]| -> Result<()> {
        for p in policies {
            rows.push(SweepRow {
                kind: kind.name().into(),
                value: value.clone(),
                report: evaluate(*p, w, s, seeds, execution)?,
            });
        }
        Ok(())
    };
    match kind {
        SweepKind::Patience => {
            for beta in PATIENCE_GRID {
                let w = world.with_sim(SimConfig { beta, ..world.sim })?;
                push(beta.to_string(), &w, samples)?;
            }
        }
        SweepKind::LearnRate => {
            for alpha in LEARNRATE_GRID {
                let w = world.with_sim(SimConfig { alpha, ..world.sim })?;
                push(alpha.to_string(), &w, samples)?;
            }
        }
        SweepKind::Tier => {
            for (tier, part) in partition_by_tier(samples) {
                if !part.is_empty() {
                    push(tier.name().into(), world, &part)?;
                }
            }
        }
    }
    Ok(rows)
}

/// Samples grouped easy, medium, hard; excluded samples are dropped.
pub fn partition_by_tier(samples: &[Sample]) -> Vec<(Tier, Vec<Sample>)> {
    Tier::ALL
        .iter()
        .map(|&t| (t, samples.iter().copied().filter(|s| s.tier == t).collect()))
        .collect()
}
