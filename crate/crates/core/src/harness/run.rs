use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::Sample;
use crate::graphdata::ActionId;
use crate::policy::TutorPolicy;
use crate::simulator::{Branch, TerminationReason, Tier, World};
use crate::{Error, Execution, Result};

/// One turn of an evaluation episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRecord {
    pub turn: usize,
    pub action: ActionId,
    pub branch: Branch,
    pub reward: f64,
    pub feedback: i8,
    pub patience_loss: f64,
    pub cumulative_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub sample: Sample,
    pub seed: u64,
    pub turns: Vec<TurnRecord>,
    pub outcome: TerminationReason,
    pub turns_used: usize,
}

impl EpisodeLog {
    pub fn mastered(&self) -> bool {
        self.outcome == TerminationReason::Mastered
    }

    pub fn total_reward(&self) -> f64 {
        self.turns.iter().map(|t| t.reward).sum()
    }

    pub fn impatience(&self) -> f64 {
        self.turns.last().map_or(0.0, |t| t.cumulative_loss)
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-episode seed from the run seed and the sample's identity, so the
/// result does not depend on sample order or worker scheduling.
pub fn episode_seed(run_seed: u64, sample: &Sample) -> u64 {
    mix(mix(mix(run_seed) ^ sample.student.0 as u64) ^ sample.concept.0 as u64)
}

/// Runs one session until it terminates.
pub fn run_episode(
    policy: &dyn TutorPolicy,
    world: &World,
    sample: Sample,
    seed: u64,
) -> Result<EpisodeLog> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ep = world.episode(sample.student, sample.concept, policy.scope())?;
    let mut turns = Vec::new();
    loop {
        let action = policy.act(&ep, &mut rng)?;
        let out = ep.step(action)?;
        turns.push(TurnRecord {
            turn: ep.session.turn,
            action,
            branch: out.branch,
            reward: out.reward,
            feedback: out.feedback,
            patience_loss: out.patience_loss,
            cumulative_loss: ep.session.cumulative_loss,
        });
        if out.terminal.is_terminal() {
            return Ok(EpisodeLog {
                sample,
                seed,
                turns,
                outcome: out.terminal,
                turns_used: ep.session.turn,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub episodes: usize,
    pub success_rate: f64,
    pub average_turn: f64,
    pub impatience: f64,
}

impl Summary {
    fn of(logs: &[&EpisodeLog], max_turns: usize) -> Summary {
        let n = logs.len();
        if n == 0 {
            return Summary {
                episodes: 0,
                success_rate: 0.0,
                average_turn: 0.0,
                impatience: 0.0,
            };
        }
        let k = n as f64;
        Summary {
            episodes: n,
            success_rate: logs.iter().filter(|l| l.mastered()).count() as f64 / k,
            average_turn: logs
                .iter()
                .map(|l| l.turns_used.min(max_turns) as f64)
                .sum::<f64>()
                / k,
            impatience: logs.iter().map(|l| l.impatience()).sum::<f64>() / k,
        }
    }
}

/// Success rate, average turn and impatience, with the per-turn success
/// curve and a breakdown by tier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub policy: String,
    #[serde(flatten)]
    pub summary: Summary,
    /// Entry `t - 1` is the share of episodes mastered by turn `t`.
    pub per_turn_success: Vec<f64>,
    pub tiers: BTreeMap<Tier, Summary>,
}

impl MetricsReport {
    /// Aggregates logs after sorting them by sample and seed.
    pub fn from_logs(
        policy: impl Into<String>,
        mut logs: Vec<EpisodeLog>,
        max_turns: usize,
    ) -> Self {
        logs.sort_by(|a, b| a.sample.cmp(&b.sample).then(a.seed.cmp(&b.seed)));
        let all: Vec<&EpisodeLog> = logs.iter().collect();
        let n = logs.len().max(1) as f64;
        let per_turn_success = (1..=max_turns)
            .map(|t| {
                logs.iter()
                    .filter(|l| l.mastered() && l.turns_used <= t)
                    .count() as f64
                    / n
            })
            .collect();
        let mut tiers = BTreeMap::new();
        for tier in Tier::ALL {
            let part: Vec<&EpisodeLog> = logs.iter().filter(|l| l.sample.tier == tier).collect();
            if !part.is_empty() {
                tiers.insert(tier, Summary::of(&part, max_turns));
            }
        }
        MetricsReport {
            policy: policy.into(),
            summary: Summary::of(&all, max_turns),
            per_turn_success,
            tiers,
        }
    }

    pub fn success_rate(&self) -> f64 {
        self.summary.success_rate
    }

    pub fn average_turn(&self) -> f64 {
        self.summary.average_turn
    }

    pub fn impatience(&self) -> f64 {
        self.summary.impatience
    }
}

/// All episodes of `samples` under every run seed.
pub fn run_all(
    policy: &dyn TutorPolicy,
    world: &World,
    samples: &[Sample],
    seeds: &[u64],
    execution: Execution,
) -> Result<Vec<EpisodeLog>> {
    let jobs: Vec<(Sample, u64)> = seeds
        .iter()
        .flat_map(|&s| samples.iter().map(move |x| (*x, episode_seed(s, x))))
        .collect();
    execution
        .map(&jobs, |_, &(sample, seed)| {
            run_episode(policy, world, sample, seed)
        })
        .into_iter()
        .collect()
}

pub fn evaluate(
    policy: &dyn TutorPolicy,
    world: &World,
    samples: &[Sample],
    seeds: &[u64],
    execution: Execution,
) -> Result<MetricsReport> {
    if samples.is_empty() || seeds.is_empty() {
        return Err(Error::Config("evaluation needs samples and seeds".into()));
    }
    let logs = run_all(policy, world, samples, seeds, execution)?;
    Ok(MetricsReport::from_logs(
        policy.name(),
        logs,
        world.sim.max_turns,
    ))
}
