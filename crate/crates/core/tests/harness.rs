use std::sync::OnceLock;

use gits_core::baselines::Greedy;
use gits_core::graphdata::ActionId;
use gits_core::harness::*;
use gits_core::policy::TutorPolicy;
use gits_core::simulator::{
    Branch, CdModel, CdTrainConfig, Episode, SimConfig, TerminationReason, World,
};
use gits_core::{Execution, Result};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Fixture {
    world: World,
    samples: Vec<Sample>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let graph = synth_dataset(&DatasetSpec {
            students: 40,
            concepts: 8,
            exercises: 40,
            records_max: 40,
            seed: 11,
            ..DatasetSpec::default()
        })
        .unwrap();
        let fit = CdModel::fit(
            &graph,
            &CdTrainConfig {
                epochs: 30,
                hidden: 16,
                seed: 11,
                ..CdTrainConfig::default()
            },
        )
        .unwrap();
        let world = World::new(graph.clone(), fit.model, SimConfig::default()).unwrap();
        let bundle = DatasetBundle::split(graph, &world.model, 0.3, 11).unwrap();
        let mut samples = bundle.train;
        samples.extend(bundle.test);
        samples.sort();
        assert!(samples.len() >= 20, "fixture too small: {}", samples.len());
        Fixture { world, samples }
    })
}

struct AlwaysAssess;

impl TutorPolicy for AlwaysAssess {
    fn name(&self) -> String {
        "assess".into()
    }

    fn act(&self, ep: &Episode<'_>, _rng: &mut ChaCha8Rng) -> Result<ActionId> {
        Ok(ActionId::Concept(ep.target()))
    }
}

/// Plays a fixed action list, then keeps assessing.
struct Scripted(Vec<ActionId>);

impl TutorPolicy for Scripted {
    fn name(&self) -> String {
        "scripted".into()
    }

    fn act(&self, ep: &Episode<'_>, _rng: &mut ChaCha8Rng) -> Result<ActionId> {
        Ok(self
            .0
            .get(ep.session.turn)
            .copied()
            .unwrap_or(ActionId::Concept(ep.target())))
    }
}

#[test]
fn always_assess_quits_at_turn_four() {
    let f = fixture();
    // Pass bar 0.9 and unit loss per failed assessment against beta 4.
    let below: Vec<Sample> = f
        .samples
        .iter()
        .copied()
        .filter(|s| f.world.model.mastery(s.student, s.concept).unwrap() < f.world.sim.delta)
        .take(10)
        .collect();
    assert!(!below.is_empty());
    for s in below {
        let log = run_episode(&AlwaysAssess, &f.world, s, 0).unwrap();
        assert_eq!(log.outcome, TerminationReason::QuitPatience);
        assert_eq!(log.turns_used, 4);
        assert_eq!(log.impatience(), 4.0);
        assert!(log.turns.iter().all(|t| t.branch == Branch::ConceptFail));
    }
}

#[test]
fn assessing_a_mastered_target_succeeds_at_turn_one() {
    let f = fixture();
    let s = f.samples[0];
    let d = f.world.model.mastery(s.student, s.concept).unwrap();
    let world = f
        .world
        .with_sim(SimConfig {
            delta: d,
            ..f.world.sim
        })
        .unwrap();
    let log = run_episode(&AlwaysAssess, &world, s, 0).unwrap();
    assert_eq!(
        (log.outcome, log.turns_used),
        (TerminationReason::Mastered, 1)
    );
    assert_eq!(log.impatience(), 0.0);
}

#[test]
fn scripted_optimum_on_rigged_world() {
    let (world, sample) = rigged_world(5).unwrap();
    use gits_core::graphdata::{ConceptId, ExerciseId};
    let best = Scripted(vec![
        ActionId::Exercise(ExerciseId(0)),
        ActionId::Concept(ConceptId(1)),
    ]);
    let log = run_episode(&best, &world, sample, 0).unwrap();
    assert_eq!(
        (log.outcome, log.turns_used),
        (TerminationReason::Mastered, 2)
    );
    let r = evaluate(&best, &world, &[sample], &[1, 2], Execution::Serial).unwrap();
    assert_eq!((r.success_rate(), r.average_turn()), (1.0, 2.0));
}

#[test]
fn empty_evaluation_is_an_error() {
    let f = fixture();
    assert!(evaluate(&Greedy, &f.world, &[], &[1], Execution::Serial).is_err());
    assert!(evaluate(&Greedy, &f.world, &f.samples, &[], Execution::Serial).is_err());
}

#[test]
fn serial_and_parallel_reports_match() {
    let f = fixture();
    let a = evaluate(&Greedy, &f.world, &f.samples, &[1, 2], Execution::Serial).unwrap();
    let b = evaluate(&Greedy, &f.world, &f.samples, &[1, 2], Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn patience_sweep_row_matches_standalone_evaluation() {
    let f = fixture();
    let samples = &f.samples[..20];
    let rows = sweep(
        SweepKind::Patience,
        &[&Greedy],
        &f.world,
        samples,
        &[3],
        Execution::Serial,
    )
    .unwrap();
    assert_eq!(rows.len(), PATIENCE_GRID.len());
    let five = rows.iter().find(|r| r.value == "5").unwrap();
    let world = f
        .world
        .with_sim(SimConfig {
            beta: 5.0,
            ..f.world.sim
        })
        .unwrap();
    let alone = evaluate(&Greedy, &world, samples, &[3], Execution::Serial).unwrap();
    assert_eq!(five.report, alone);
    // Episodes under a larger budget extend those under a smaller one.
    for w in rows.windows(2) {
        assert!(w[1].report.success_rate() >= w[0].report.success_rate());
    }
}

#[test]
fn tier_sweep_partitions_samples() {
    let f = fixture();
    let rows = sweep(
        SweepKind::Tier,
        &[&Greedy],
        &f.world,
        &f.samples,
        &[1],
        Execution::Serial,
    )
    .unwrap();
    let total: usize = rows.iter().map(|r| r.report.summary.episodes).sum();
    assert_eq!(total, f.samples.len());
    for r in &rows {
        assert_eq!(r.report.tiers.len(), 1);
        assert_eq!(r.report.tiers.keys().next().unwrap().name(), r.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn reports_ignore_sample_order(seed in any::<u64>(), run in 0u64..1000) {
        let f = fixture();
        let mut shuffled = f.samples.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = evaluate(&Greedy, &f.world, &f.samples, &[run], Execution::Serial).unwrap();
        let b = evaluate(&Greedy, &f.world, &shuffled, &[run], Execution::Serial).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn report_and_log_invariants(run in 0u64..1000, beta in 1.0f64..6.0) {
        let f = fixture();
        let world = f.world.with_sim(SimConfig { beta, ..f.world.sim }).unwrap();
        let logs = run_all(&Greedy, &world, &f.samples, &[run], Execution::Serial).unwrap();
        for log in &logs {
            prop_assert_eq!(log.turns.len(), log.turns_used);
            prop_assert!(log.turns_used >= 1 && log.turns_used <= world.sim.max_turns);
            prop_assert!(log.impatience() < beta + 1.0);
            let mut acc = 0.0;
            for (i, t) in log.turns.iter().enumerate() {
                prop_assert_eq!(t.turn, i + 1);
                acc += t.patience_loss;
                prop_assert!((t.cumulative_loss - acc).abs() < 1e-9);
            }
            match log.outcome {
                TerminationReason::QuitPatience => prop_assert!(log.impatience() >= beta),
                TerminationReason::QuitMaxTurn => prop_assert_eq!(log.turns_used, world.sim.max_turns),
                _ => {}
            }
        }
        let r = MetricsReport::from_logs("greedy", logs, world.sim.max_turns);
        prop_assert!(r.per_turn_success.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((r.per_turn_success.last().unwrap() - r.success_rate()).abs() < 1e-12);
        prop_assert!(r.impatience() < beta + 1.0);
        let by_tier: usize = r.tiers.values().map(|s| s.episodes).sum();
        prop_assert_eq!(by_tier, r.summary.episodes);
    }
}
