//! Acceptance criteria. Every test prints exactly one `PASS`/`FAIL` line
//! to stderr (uncaptured) before asserting.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::{Arc, OnceLock};

use gits_core::baselines::{Greedy, Knn};
use gits_core::embed::{make_triples, margin_ranking_grad, pretrain, TranseConfig};
use gits_core::graphdata::{
    ActionId, CognitiveGraph, ConceptExerciseMap, ConceptId, EntityCatalog, ExerciseId, Feedback,
    NormalizedAdjacency, StudentId,
};
use gits_core::harness::{
    evaluate, rigged_world, sweep, synth_dataset, DatasetBundle, DatasetSpec, MetricsReport,
    SweepKind,
};
use gits_core::policy::{
    dueling_combine, run_training, select_candidates, td_target, Ablation, AgentConfig,
    DuelingQNet, GcnEncoder, GraphInput, ReplayBuffer, ReplayConfig, SelectionMode, TutorPolicy,
};
use gits_core::simulator::{
    dynamic_update, respond, Branch, CdModel, CdTrainConfig, SimConfig, StudentSession,
    TerminationReason, World,
};
use gits_core::tensornet::{grad_check, Matrix, Parameterized};
use gits_core::Execution;
use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

mod common;

fn verdict(id: u32, name: &str, ok: bool, detail: &str) {
    let line = format!(
        "criterion {id:>2} {} {name}: {detail}\n",
        if ok { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {id} failed: {detail}");
}

#[test]
fn c01_branch_table() {
    let cfg = SimConfig::default();
    let ok_cfg = cfg.delta == 0.9 && cfg.lambda_lo == 0.5 && cfg.lambda_hi == 1.0;
    let r = cfg.rewards;
    let ok_rewards = (
        r.concept_pass,
        r.concept_fail,
        r.exercise_fit,
        r.exercise_miss,
        r.quit,
    ) == (1.0, -0.2, 0.01, -0.1, -0.3);

    // Expected (reward, feedback, loss) written out from the table.
    let concept = |d: f64| {
        if d >= 0.9 {
            (1.0, 0, 0.0)
        } else {
            (-0.2, 0, 1.0)
        }
    };
    let exercise = |p: f64| {
        if p > 0.5 && p < 1.0 {
            (0.01, 1, 1.0 - p)
        } else if p >= 1.0 {
            (-0.1, 1, 1.0 - p)
        } else {
            (-0.1, -1, 1.0 - p)
        }
    };
    let mut fired = std::collections::BTreeSet::new();
    let mut mismatches = 0;
    for i in 0..=1000 {
        let x = i as f64 / 1000.0;
        let b = Branch::for_concept(x, &cfg);
        let got = (b.reward(&r), b.feedback(), b.patience_loss(x));
        let want = concept(x);
        if got.0 != want.0 || got.1 != want.1 || (got.2 - want.2).abs() > 1e-12 {
            mismatches += 1;
        }
        fired.insert(format!("{b:?}"));
        let b = Branch::for_exercise(x, &cfg);
        let got = (b.reward(&r), b.feedback(), b.patience_loss(x));
        let want = exercise(x);
        if got.0 != want.0 || got.1 != want.1 || (got.2 - want.2).abs() > 1e-12 {
            mismatches += 1;
        }
        fired.insert(format!("{b:?}"));
    }

    // The same branches through the environment on the rigged world.
    let (world, sample) = rigged_world(20).unwrap();
    let mut s = StudentSession::new(&world.model, sample.student, sample.concept).unwrap();
    let fail = respond(&mut s, &world.model, ActionId::Concept(ConceptId(1)), &cfg).unwrap();
    let hard = respond(
        &mut s,
        &world.model,
        ActionId::Exercise(ExerciseId(1)),
        &cfg,
    )
    .unwrap();
    let mut s = StudentSession::new(&world.model, sample.student, sample.concept).unwrap();
    let fit = respond(
        &mut s,
        &world.model,
        ActionId::Exercise(ExerciseId(0)),
        &cfg,
    )
    .unwrap();
    dynamic_update(&mut s, &world.model, ExerciseId(0), Feedback::Correct, &cfg).unwrap();
    let pass = respond(&mut s, &world.model, ActionId::Concept(ConceptId(1)), &cfg).unwrap();
    let env_ok = (fail.branch, fail.reward, fail.patience_loss) == (Branch::ConceptFail, -0.2, 1.0)
        && (hard.branch, hard.reward, hard.feedback) == (Branch::ExerciseTooHard, -0.1, -1)
        && (hard.patience_loss - (1.0 - hard.probability)).abs() <= 1e-12
        && (fit.branch, fit.reward, fit.feedback) == (Branch::ExerciseFit, 0.01, 1)
        && (fit.patience_loss - (1.0 - fit.probability)).abs() <= 1e-12
        && (pass.branch, pass.reward, pass.patience_loss, pass.terminal)
            == (Branch::ConceptPass, 1.0, 0.0, TerminationReason::Mastered);

    let ok = ok_cfg && ok_rewards && mismatches == 0 && fired.len() == 5 && env_ok;
    verdict(
        1,
        "branch table",
        ok,
        &format!(
            "{} branches fired, {mismatches} grid mismatches, environment path ok={env_ok}",
            fired.len()
        ),
    );
}

#[test]
fn c02_patience_accounting() {
    let (world, sample) = rigged_world(20).unwrap();
    let cfg = SimConfig {
        beta: 4.0,
        ..SimConfig::default()
    };
    let mut s = StudentSession::new(&world.model, sample.student, sample.concept).unwrap();
    let mut outs = Vec::new();
    for _ in 0..4 {
        outs.push(
            respond(
                &mut s,
                &world.model,
                ActionId::Concept(sample.concept),
                &cfg,
            )
            .unwrap(),
        );
    }
    let last = outs[3];
    let example_ok = outs[..3]
        .iter()
        .all(|o| o.terminal == TerminationReason::Active && o.reward == -0.2)
        && last.terminal == TerminationReason::QuitPatience
        && last.reward == -0.2 + -0.3
        && s.turn == 4
        && !s.is_active();

    let actions = [
        ActionId::Exercise(ExerciseId(0)),
        ActionId::Exercise(ExerciseId(1)),
        ActionId::Concept(sample.concept),
    ];
    let mut runner = TestRunner::new(PropConfig::with_cases(500));
    let strategy = (proptest::collection::vec(0usize..3, 1..40), 0.2f64..6.0);
    let sweep = runner.run(&strategy, |(plan, beta)| {
        let cfg = SimConfig {
            beta,
            max_turns: 1000,
            ..SimConfig::default()
        };
        let mut s = StudentSession::new(&world.model, sample.student, sample.concept).unwrap();
        let mut total = 0.0;
        for &k in &plan {
            if !s.is_active() {
                break;
            }
            let a = actions[k];
            let o = respond(&mut s, &world.model, a, &cfg).unwrap();
            if let Some(f) = o.exercise_feedback() {
                if let ActionId::Exercise(e) = a {
                    dynamic_update(&mut s, &world.model, e, f, &cfg).unwrap();
                }
            }
            total += o.patience_loss;
            let quit = o.terminal == TerminationReason::QuitPatience;
            let expect = o.terminal != TerminationReason::Mastered && total >= beta;
            if quit != expect || (s.cumulative_loss - total).abs() > 1e-12 {
                return Err(TestCaseError::fail(format!(
                    "quit={quit} total={total} beta={beta}"
                )));
            }
        }
        Ok(())
    });
    let ok = example_ok && sweep.is_ok();
    verdict(
        2,
        "patience accounting",
        ok,
        &format!(
            "four failed assessments quit at turn 4: {example_ok}; 500-case sweep: {}",
            sweep.map_or_else(|e| e.to_string(), |_| "ok".into())
        ),
    );
}

/// Central differences of the margin loss with respect to all five inputs.
fn transe_grad_error(seed: u64, probes: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 8;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < probes {
        let mut v: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let margin = 1.0;
        let loss =
            |v: &[Vec<f64>]| margin_ranking_grad((&v[0], &v[1], &v[2]), (&v[3], &v[4]), margin).0;
        let (l0, grads) = margin_ranking_grad((&v[0], &v[1], &v[2]), (&v[3], &v[4]), margin);
        if l0 < 1e-3 {
            continue; // hinge inactive or at its kink
        }
        let (slot, k) = (rng.gen_range(0..5), rng.gen_range(0..dim));
        let h = 1e-6;
        v[slot][k] += h;
        let up = loss(&v);
        v[slot][k] -= 2.0 * h;
        let dn = loss(&v);
        let num = (up - dn) / (2.0 * h);
        let ana = grads[slot][k];
        let scale = ana.abs() + num.abs();
        if scale > 1e-7 {
            worst = worst.max((ana - num).abs() / scale);
        }
        checked += 1;
    }
    worst
}

#[test]
fn c03_gradient_checks() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let probes = 40;

    let n = 10;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.3) {
                edges.push((i, j, if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
            }
        }
    }
    let input = GraphInput {
        features: Matrix::random_uniform(n, 5, -1.0, 1.0, &mut rng),
        adjacency: NormalizedAdjacency::from_edges(n, edges),
        student: 0,
        target: n - 1,
    };
    let mut gcn = GcnEncoder::new(5, 2, &mut rng);
    let rows = [0usize, 4, 9];
    let probe = Matrix::random_uniform(3, 5, -1.0, 1.0, &mut rng);
    let gcn_err = grad_check(
        &mut gcn,
        |m: &mut GcnEncoder| {
            let t = m.forward(&input, Some(&rows));
            let loss = t
                .output
                .as_slice()
                .iter()
                .zip(probe.as_slice())
                .map(|(a, b)| a * b)
                .sum();
            let mut g = m.grad_buffer();
            m.backward_into(&input, &t, &probe, &mut g);
            m.accumulate_grads(&g);
            loss
        },
        1e-6,
        probes,
        4,
    );

    let mut qnet = DuelingQNet::new(4, 9, &mut rng);
    let state: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let actions = Matrix::random_uniform(5, 4, -1.0, 1.0, &mut rng);
    let dq: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let q_err = grad_check(
        &mut qnet,
        |m: &mut DuelingQNet| {
            let t = m.forward(&state, &actions);
            let loss = t.q.iter().zip(&dq).map(|(a, b)| a * b).sum();
            let mut g = m.grad_buffer();
            m.backward_into(&t, &dq, &mut g);
            m.accumulate_grads(&g);
            loss
        },
        1e-6,
        probes,
        5,
    );

    let graph = synth_dataset(&DatasetSpec {
        students: 20,
        concepts: 5,
        exercises: 20,
        records_max: 20,
        seed: 3,
        ..DatasetSpec::default()
    })
    .unwrap();
    let mut cd = CdModel::init(&graph, 6, 3);
    let recs: Vec<_> = graph
        .q
        .entries()
        .take(60)
        .map(|(u, e, f)| (u, e, if f.is_correct() { 1.0 } else { 0.0 }))
        .collect();
    let cd_err = grad_check(
        &mut cd,
        |m: &mut CdModel| m.bce_loss_and_grad(&recs),
        1e-6,
        probes,
        6,
    );

    let transe_err = transe_grad_error(7, probes);

    let errs = [
        ("gcn", gcn_err),
        ("dueling", q_err),
        ("cd", cd_err),
        ("transe", transe_err),
    ];
    let ok = errs.iter().all(|(_, e)| *e < 1e-4);
    verdict(
        3,
        "gradient checks",
        ok,
        &format!(
            "max relative error over {probes} probes each: {}",
            errs.iter()
                .map(|(n, e)| format!("{n} {e:.2e}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

/// Brute-force candidate selection: every (concept, exercise) pair gets a
/// sort key from ranks computed by counting, the keyed list is sorted
/// once, duplicates keep their first position and the head is returned.
fn brute_select(
    o: &ConceptExerciseMap,
    target: ConceptId,
    preds: &[ConceptId],
    w: &HashMap<ExerciseId, f64>,
    n: usize,
) -> Vec<ActionId> {
    let we = |e: ExerciseId| w.get(&e).copied().unwrap_or(0.0);
    let score = |c: ConceptId| {
        let all: f64 = o.exercises_of(c).iter().map(|&e| we(e)).sum();
        if all <= 0.0 {
            return 0.0;
        }
        let on: f64 = o
            .exercises_of(c)
            .iter()
            .filter(|&&e| o.covers(e, target))
            .map(|&e| we(e))
            .sum();
        let p = (on / all).clamp(0.0, 1.0);
        if p == 0.0 {
            0.0
        } else {
            -p * p.ln()
        }
    };
    let scores: Vec<f64> = preds.iter().map(|&c| score(c)).collect();
    let rank = |i: usize| {
        (0..preds.len())
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && preds[j] < preds[i]))
            .count()
    };
    let mut keyed = Vec::new();
    for (i, &c) in preds.iter().enumerate() {
        for &e in o.exercises_of(c) {
            keyed.push((rank(i), -we(e), e));
        }
    }
    for &e in o.exercises_of(target) {
        keyed.push((preds.len(), -we(e), e));
    }
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut out: Vec<ExerciseId> = Vec::new();
    for (_, _, e) in keyed {
        if !out.contains(&e) {
            out.push(e);
        }
    }
    out.truncate(n);
    let mut actions: Vec<ActionId> = out.into_iter().map(ActionId::Exercise).collect();
    actions.push(ActionId::Concept(target));
    actions
}

#[test]
fn c04_selection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agree = 0;
    let instances = 200;
    for _ in 0..instances {
        let concepts = rng.gen_range(2..=10);
        let exercises = rng.gen_range(1..=50);
        let mut covers = Vec::new();
        for e in 0..exercises {
            let k = rng.gen_range(1..=3.min(concepts));
            let mut cs: Vec<usize> = (0..concepts).collect();
            cs.shuffle(&mut rng);
            covers.extend(cs[..k].iter().map(|&c| (ExerciseId(e), ConceptId(c))));
        }
        let g = CognitiveGraph::new(
            EntityCatalog::new(1, exercises, concepts).unwrap(),
            [],
            covers,
            [],
        )
        .unwrap();
        let target = ConceptId(rng.gen_range(0..concepts));
        let mut preds: Vec<ConceptId> = (0..concepts)
            .map(ConceptId)
            .filter(|&c| c != target && rng.gen_bool(0.6))
            .collect();
        preds.shuffle(&mut rng);
        // Coarse weights so ties are common.
        let w: HashMap<ExerciseId, f64> = (0..exercises)
            .map(|e| (ExerciseId(e), rng.gen_range(0..5) as f64 / 4.0))
            .collect();
        let n = rng.gen_range(1..=30);
        let got = select_candidates(&g.o, target, &preds, &w, n, SelectionMode::Prerequisite);
        if got.actions() == brute_select(&g.o, target, &preds, &w, n).as_slice() {
            agree += 1;
        }
    }
    verdict(
        4,
        "selection oracle",
        agree == instances,
        &format!("{agree}/{instances} instances identical"),
    );
}

#[test]
fn c05_simulator_monotone_and_learning() {
    let graph = synth_dataset(&DatasetSpec {
        students: 40,
        concepts: 8,
        exercises: 40,
        records_max: 40,
        seed: 5,
        ..DatasetSpec::default()
    })
    .unwrap();
    let fit = CdModel::fit(
        &graph,
        &CdTrainConfig {
            epochs: 20,
            hidden: 16,
            seed: 5,
            ..CdTrainConfig::default()
        },
    )
    .unwrap();
    let model = fit.model;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (students, exercises) = (model.num_students(), model.num_exercises());

    let mut violations = 0;
    for _ in 0..1000 {
        let u = StudentId(rng.gen_range(0..students));
        let e = ExerciseId(rng.gen_range(0..exercises));
        let mut row = model.proficiency_row(u).unwrap().to_vec();
        for v in row.iter_mut() {
            *v += rng.gen_range(-1.0..1.0);
        }
        let covered = model.covered_concepts(e);
        let k = covered[rng.gen_range(0..covered.len())];
        let before = model.predict_with(&row, e).unwrap();
        row[k] += rng.gen_range(0.0..1.0);
        if model.predict_with(&row, e).unwrap() < before {
            violations += 1;
        }
    }

    let cfg = SimConfig {
        alpha: 0.02,
        ..SimConfig::default()
    };
    let mut learning_bad = 0;
    for _ in 0..100 {
        let u = StudentId(rng.gen_range(0..students));
        let e = ExerciseId(rng.gen_range(0..exercises));
        let target = ConceptId(model.covered_concepts(e)[0]);
        let mut s = StudentSession::new(&model, u, target).unwrap();
        let p0 = s.predict(&model, e).unwrap();
        let d0: Vec<f64> = model
            .covered_concepts(e)
            .iter()
            .map(|&c| s.mastery(&model, ConceptId(c)).unwrap())
            .collect();
        dynamic_update(&mut s, &model, e, Feedback::Correct, &cfg).unwrap();
        let p1 = s.predict(&model, e).unwrap();
        let d1: Vec<f64> = model
            .covered_concepts(e)
            .iter()
            .map(|&c| s.mastery(&model, ConceptId(c)).unwrap())
            .collect();
        if !(p1 > p0) || d1.iter().zip(&d0).any(|(a, b)| a < b) {
            learning_bad += 1;
        }
    }
    let ok = violations == 0 && learning_bad == 0;
    verdict(
        5,
        "simulator monotonicity and learning",
        ok,
        &format!(
            "{violations}/1000 monotonicity violations, {learning_bad}/100 non-improving updates"
        ),
    );
}

#[test]
fn c06_structural_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);

    let mut dueling_err: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(1..20);
        let v = rng.gen_range(-5.0..5.0);
        let adv: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let shift = rng.gen_range(-100.0..100.0);
        let shifted: Vec<f64> = adv.iter().map(|a| a + shift).collect();
        let (q1, q2) = (dueling_combine(v, &adv), dueling_combine(v, &shifted));
        let mean = q1.iter().sum::<f64>() / k as f64;
        dueling_err = dueling_err.max((mean - v).abs());
        for (a, b) in q1.iter().zip(&q2) {
            dueling_err = dueling_err.max((a - b).abs());
        }
    }

    let n = 9;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(0.4) {
                edges.push((i, j, if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
            }
        }
    }
    let input = GraphInput {
        features: Matrix::random_uniform(n, 4, -1.0, 1.0, &mut rng),
        adjacency: NormalizedAdjacency::from_edges(n, edges),
        student: 0,
        target: n - 1,
    };
    let enc = GcnEncoder::new(4, 2, &mut rng);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut features = Matrix::zeros(n, 4);
    for i in 0..n {
        features
            .row_mut(perm[i])
            .copy_from_slice(input.features.row(i));
    }
    let permuted = GraphInput {
        features,
        adjacency: input.adjacency.permuted(&perm),
        student: perm[0],
        target: perm[n - 1],
    };
    let a = enc.forward(&input, None).output;
    let b = enc.forward(&permuted, None).output;
    let mut gcn_err: f64 = 0.0;
    for i in 0..n {
        for (x, y) in a.row(i).iter().zip(b.row(perm[i])) {
            gcn_err = gcn_err.max((x - y).abs());
        }
    }

    let gamma = 0.999;
    let td_ok = td_target(1.0, None, gamma) == 1.0
        && td_target(-0.2, Some(&[0.5, 2.0, -1.0]), gamma) == -0.2 + gamma * 2.0
        && td_target(0.01, Some(&[-3.0]), 0.5) == 0.01 + 0.5 * -3.0;

    let cfg = ReplayConfig {
        capacity: 16,
        ..ReplayConfig::default()
    };
    let mut buf = ReplayBuffer::new(cfg).unwrap();
    let priorities = [0.1, 0.5, 1.0, 2.0, 0.05, 3.0, 0.7, 1.5];
    for (i, &p) in priorities.iter().enumerate() {
        let slot = buf.push(i);
        buf.set_priority(slot, p);
    }
    let weights: Vec<f64> = priorities
        .iter()
        .map(|p: &f64| p.powf(cfg.priority_exponent))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut counts = [0usize; 8];
    let draws = 10_000;
    for _ in 0..draws {
        counts[buf.sample_one(&mut rng)] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(&weights)
        .map(|(&c, w)| {
            let expect = draws as f64 * w / total;
            (c as f64 - expect).powi(2) / expect
        })
        .sum();
    let p_value = 1.0
        - ChiSquared::new((counts.len() - 1) as f64)
            .unwrap()
            .cdf(stat);

    let ok = dueling_err <= 1e-9 && gcn_err <= 1e-9 && td_ok && p_value > 0.01;
    verdict(
        6,
        "structural identities",
        ok,
        &format!("dueling {dueling_err:.1e}, gcn equivariance {gcn_err:.1e}, td exact {td_ok}, replay chi-square p={p_value:.3}"),
    );
}

#[test]
fn c07_rigged_world_optimality() {
    let (world, sample) = rigged_world(3).unwrap();
    let store = make_triples(&world.graph);
    let table = Arc::new(
        pretrain(
            &store,
            &TranseConfig {
                dim: 8,
                epochs: 200,
                seed: 1,
                ..TranseConfig::default()
            },
        )
        .unwrap()
        .table,
    );
    let eval_seeds: Vec<u64> = (0..100).collect();
    let mut results = BTreeMap::new();
    for (name, ablation) in [
        ("pai", Ablation::default()),
        ("dqn", Ablation::vanilla_dqn()),
    ] {
        let mut srs = Vec::new();
        for seed in 0..3 {
            let cfg = AgentConfig {
                ablation,
                ..common::micro_agent_config()
            };
            let out = run_training(
                &world,
                &[(sample.student, sample.concept)],
                table.clone(),
                cfg,
                common::MICRO_EPISODES,
                seed,
            )
            .unwrap();
            let r = evaluate(
                &out.agent,
                &world,
                &[sample],
                &eval_seeds,
                Execution::Serial,
            )
            .unwrap();
            srs.push(r.success_rate());
        }
        results.insert(name, srs);
    }
    let ok = results.values().flatten().all(|&sr| sr == 1.0);
    verdict(
        7,
        "rigged micro-world optimality",
        ok,
        &format!("greedy success rate per training seed {results:?}"),
    );
}

/// Reports from one replicate of the default synthetic world.
struct Replicate {
    greedy: MetricsReport,
    knn: MetricsReport,
    pai: MetricsReport,
    dqn: MetricsReport,
    no_pretrain: MetricsReport,
    no_selection: MetricsReport,
    patience: Vec<f64>,
    learn_rate: Vec<f64>,
}

fn replicate(seed: u64) -> Replicate {
    let graph = synth_dataset(&DatasetSpec {
        seed,
        ..DatasetSpec::default()
    })
    .unwrap();
    let fit = CdModel::fit(
        &graph,
        &CdTrainConfig {
            seed,
            ..CdTrainConfig::default()
        },
    )
    .unwrap();
    let world = World::new(graph.clone(), fit.model, SimConfig::default()).unwrap();
    let bundle = DatasetBundle::split(graph, &world.model, 0.2, seed).unwrap();
    let store = make_triples(&world.graph);
    let table = Arc::new(
        pretrain(
            &store,
            &TranseConfig {
                dim: common::DESK_EMBED_DIM,
                seed,
                ..TranseConfig::default()
            },
        )
        .unwrap()
        .table,
    );
    let train = bundle.train_pairs();
    let test = &bundle.test;
    let eval_seeds = [seed];
    let eval =
        |p: &dyn TutorPolicy| evaluate(p, &world, test, &eval_seeds, Execution::Serial).unwrap();
    let trained = |ablation: Ablation| {
        let cfg = AgentConfig {
            ablation,
            ..common::desk_agent_config()
        };
        run_training(
            &world,
            &train,
            table.clone(),
            cfg,
            common::DESK_EPISODES,
            seed,
        )
        .unwrap()
        .agent
    };

    let greedy = eval(&Greedy);
    let knn = eval(&Knn {
        embeddings: table.clone(),
    });
    let pai_agent = trained(Ablation::default());
    let pai = eval(&pai_agent);
    let success = |kind| -> Vec<f64> {
        sweep(
            kind,
            &[&pai_agent],
            &world,
            test,
            &eval_seeds,
            Execution::Serial,
        )
        .unwrap()
        .iter()
        .map(|r| r.report.success_rate())
        .collect()
    };
    let patience = success(SweepKind::Patience);
    let learn_rate = success(SweepKind::LearnRate);
    let dqn = eval(&trained(Ablation::vanilla_dqn()));
    let no_pretrain = eval(&trained(Ablation {
        no_pretrain: true,
        ..Ablation::default()
    }));
    let no_selection = eval(&trained(Ablation {
        no_selection: true,
        ..Ablation::default()
    }));
    let r = Replicate {
        greedy,
        knn,
        pai,
        dqn,
        no_pretrain,
        no_selection,
        patience,
        learn_rate,
    };
    let _ = writeln!(
        std::io::stderr(),
        "replicate seed {seed}: SR greedy {:.3} knn {:.3} pai {:.3} dqn {:.3} no-pretrain {:.3} no-selection {:.3}",
        r.greedy.success_rate(),
        r.knn.success_rate(),
        r.pai.success_rate(),
        r.dqn.success_rate(),
        r.no_pretrain.success_rate(),
        r.no_selection.success_rate()
    );
    r
}

/// Replicates are shared by the ordering, trend and ablation criteria.
fn study() -> &'static [Replicate] {
    static S: OnceLock<Vec<Replicate>> = OnceLock::new();
    S.get_or_init(|| common::DESK_SEEDS.iter().map(|&s| replicate(s)).collect())
}

fn seed_mean(f: impl Fn(&Replicate) -> f64) -> f64 {
    let s = study();
    s.iter().map(f).sum::<f64>() / s.len() as f64
}

fn curve_mean(f: impl Fn(&Replicate) -> &Vec<f64>) -> Vec<f64> {
    let s = study();
    let n = f(&s[0]).len();
    (0..n)
        .map(|i| s.iter().map(|r| f(r)[i]).sum::<f64>() / s.len() as f64)
        .collect()
}

/// Non-decreasing up to one adjacent drop of at most one percentage point.
fn nearly_monotone(curve: &[f64]) -> bool {
    let drops: Vec<f64> = curve
        .windows(2)
        .map(|w| w[0] - w[1])
        .filter(|&d| d > 0.0)
        .collect();
    drops.is_empty() || (drops.len() == 1 && drops[0] <= 0.01)
}

#[test]
fn c08_policy_ordering() {
    let sr = |f: fn(&Replicate) -> &MetricsReport| seed_mean(|r| f(r).success_rate());
    let pl = |f: fn(&Replicate) -> &MetricsReport| seed_mean(|r| f(r).impatience());
    let (pai, dqn, greedy, knn) = (
        sr(|r| &r.pai),
        sr(|r| &r.dqn),
        sr(|r| &r.greedy),
        sr(|r| &r.knn),
    );
    let bar = SimConfig::default().beta - 0.5;
    let (pl_pai, pl_dqn, pl_greedy, pl_knn) = (
        pl(|r| &r.pai),
        pl(|r| &r.dqn),
        pl(|r| &r.greedy),
        pl(|r| &r.knn),
    );
    let ok = pai >= greedy
        && pai >= knn
        && pai >= dqn
        && pl_greedy >= bar
        && pl_knn >= bar
        && pl_pai < bar
        && pl_dqn < bar;
    verdict(
        8,
        "policy ordering",
        ok,
        &format!(
            "SR pai {pai:.3} dqn {dqn:.3} greedy {greedy:.3} knn {knn:.3}; \
             impatience pai {pl_pai:.2} dqn {pl_dqn:.2} greedy {pl_greedy:.2} knn {pl_knn:.2} (bar {bar})"
        ),
    );
}

#[test]
fn c09_patience_and_learning_rate_trends() {
    let patience = curve_mean(|r| &r.patience);
    let learn_rate = curve_mean(|r| &r.learn_rate);
    let ok = nearly_monotone(&patience) && nearly_monotone(&learn_rate);
    verdict(
        9,
        "patience and learning-rate trends",
        ok,
        &format!("pai SR over beta 1..5 {patience:.3?}, over alpha 0.01..0.05 {learn_rate:.3?}"),
    );
}

#[test]
fn c10_ablation_direction() {
    let pai = seed_mean(|r| r.pai.success_rate());
    let no_pretrain = seed_mean(|r| r.no_pretrain.success_rate());
    let no_selection = seed_mean(|r| r.no_selection.success_rate());
    let ok = no_pretrain < pai && no_selection < pai;
    verdict(
        10,
        "ablation direction",
        ok,
        &format!("SR pai {pai:.3} no-pretrain {no_pretrain:.3} no-selection {no_selection:.3}"),
    );
}
