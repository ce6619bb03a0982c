use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use gits_core::baselines::{Greedy, Knn};
use gits_core::embed::{make_triples, pretrain, EmbeddingTable, TranseConfig};
use gits_core::graphdata::CognitiveGraph;
use gits_core::harness::{
    evaluate, load_dataset, save_dataset, sweep, synth_dataset, write_report, DatasetBundle,
    DatasetSpec, ReportConfig, Sample, SweepKind, SweepRow,
};
use gits_core::policy::{
    run_training, write_training_log, Ablation, Agent, AgentConfig, TutorPolicy,
};
use gits_core::simulator::{CdModel, CdTrainConfig, SimConfig, Tier, World};
use gits_core::tensornet::Checkpoint;
use gits_core::Execution;

#[derive(Parser)]
#[command(name = "gits", version, about = "Goal-oriented tutoring laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    GenData(GenData),
    /// Pretrain TransE embeddings on a dataset.
    Pretrain(Pretrain),
    /// Fit the cognitive-diagnosis student simulator.
    TrainSim(TrainSim),
    /// Train a tutoring policy against the simulator.
    TrainPolicy(TrainPolicy),
    /// Evaluate policies on the held-out samples.
    Eval(Eval),
    /// Evaluate policies over a patience, learning-rate or tier grid.
    Sweep(Sweep),
}

#[derive(Args)]
struct GenData {
    #[arg(long, default_value_t = 200)]
    students: usize,
    #[arg(long, default_value_t = 30)]
    concepts: usize,
    #[arg(long, default_value_t = 150)]
    exercises: usize,
    #[arg(long)]
    edge_density: Option<f64>,
    #[arg(long)]
    secondary_prob: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Pretrain {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSim {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Where the world and the samples come from.
#[derive(Args)]
struct WorldArgs {
    #[arg(long)]
    data: PathBuf,
    /// Simulator checkpoint from `train-sim`.
    #[arg(long)]
    sim: PathBuf,
    /// Held-out share of tiered samples.
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    max_turns: Option<usize>,
}

#[derive(Args)]
struct TrainPolicy {
    #[command(flatten)]
    world: WorldArgs,
    /// `pai` or `dqn`.
    #[arg(long, default_value = "pai")]
    policy: String,
    /// Embedding checkpoint from `pretrain`.
    #[arg(long)]
    embed: PathBuf,
    #[arg(long, default_value_t = 5000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma list of no-gcn, no-pretrain, no-selection, no-prereq.
    #[arg(long, default_value = "")]
    ablate: String,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    train_every: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Optimizer steps between target-network syncs.
    #[arg(long)]
    target_update: Option<usize>,
    #[arg(long)]
    epsilon_end: Option<f64>,
    /// Fraction of the episodes over which epsilon decays.
    #[arg(long)]
    epsilon_decay: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Per-episode training log (JSON lines).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct PolicyArgs {
    /// pai, knn, greedy or dqn; repeatable.
    #[arg(long = "policy", required = true)]
    policies: Vec<String>,
    /// Agent checkpoints, consumed in order by pai/dqn policies.
    #[arg(long = "ckpt")]
    ckpts: Vec<PathBuf>,
    /// Embedding checkpoint for knn.
    #[arg(long)]
    embed: Option<PathBuf>,
    /// Evaluation run seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Restrict to one tier: easy, medium or hard.
    #[arg(long)]
    tier: Option<String>,
    /// Relative success curves are computed against this policy.
    #[arg(long)]
    reference: Option<String>,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    serial: bool,
}

#[derive(Args)]
struct Eval {
    #[command(flatten)]
    world: WorldArgs,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    world: WorldArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// patience, learnrate or tier.
    #[arg(long)]
    kind: String,
}

fn load_world(args: &WorldArgs) -> anyhow::Result<(World, DatasetBundle)> {
    let graph = load_dataset(&args.data)?;
    let model = CdModel::from_checkpoint(&graph, &Checkpoint::load(&args.sim)?)?;
    let mut sim = SimConfig::default();
    if let Some(b) = args.beta {
        sim.beta = b;
    }
    if let Some(a) = args.alpha {
        sim.alpha = a;
    }
    if let Some(t) = args.max_turns {
        sim.max_turns = t;
    }
    let bundle = DatasetBundle::split(graph.clone(), &model, args.test_fraction, args.split_seed)?;
    Ok((World::new(graph, model, sim)?, bundle))
}

fn load_embeddings(path: &Path, graph: &CognitiveGraph) -> anyhow::Result<EmbeddingTable> {
    let table = EmbeddingTable::from_checkpoint(&Checkpoint::load(path)?)?;
    if table.num_entities() != graph.catalog.num_nodes() {
        bail!(
            "embedding table has {} entities, dataset has {} nodes",
            table.num_entities(),
            graph.catalog.num_nodes()
        );
    }
    Ok(table)
}

fn gen_data(a: GenData) -> anyhow::Result<serde_json::Value> {
    let mut spec = DatasetSpec {
        students: a.students,
        concepts: a.concepts,
        exercises: a.exercises,
        seed: a.seed,
        ..DatasetSpec::default()
    };
    if let Some(d) = a.edge_density {
        spec.edge_density = d;
    }
    if let Some(p) = a.secondary_prob {
        spec.secondary_prob = p;
    }
    let graph = synth_dataset(&spec)?;
    save_dataset(&graph, &a.out)?;
    let spec_path = a.out.join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string_pretty(&spec)?)
        .with_context(|| spec_path.display().to_string())?;
    Ok(json!({
        "out": a.out,
        "students": graph.catalog.students,
        "exercises": graph.catalog.exercises,
        "concepts": graph.catalog.concepts,
        "interactions": graph.q.len(),
        "prerequisites": graph.p.num_edges(),
    }))
}

fn pretrain_cmd(a: Pretrain) -> anyhow::Result<serde_json::Value> {
    let graph = load_dataset(&a.data)?;
    let cfg = TranseConfig {
        dim: a.dim,
        epochs: a.epochs,
        seed: a.seed,
        ..TranseConfig::default()
    };
    let rep = pretrain(&make_triples(&graph), &cfg)?;
    rep.table.to_checkpoint().save(&a.out)?;
    Ok(json!({ "out": a.out, "final_loss": rep.epoch_losses.last() }))
}

fn train_sim(a: TrainSim) -> anyhow::Result<serde_json::Value> {
    let graph = load_dataset(&a.data)?;
    let cfg = CdTrainConfig {
        epochs: a.epochs,
        hidden: a.hidden,
        seed: a.seed,
        ..CdTrainConfig::default()
    };
    let fit = CdModel::fit(&graph, &cfg)?;
    fit.model.to_checkpoint().save(&a.out)?;
    Ok(json!({
        "out": a.out,
        "best_epoch": fit.best_epoch,
        "train_loss": fit.loss_curve.get(fit.best_epoch),
        "validation_loss": fit.validation_curve.get(fit.best_epoch),
    }))
}

fn train_policy(a: TrainPolicy) -> anyhow::Result<serde_json::Value> {
    let (world, bundle) = load_world(&a.world)?;
    let table = Arc::new(load_embeddings(&a.embed, &world.graph)?);
    let mut ablation = Ablation::parse(&a.ablate)?;
    match a.policy.as_str() {
        "pai" => {}
        "dqn" => ablation = Ablation::vanilla_dqn(),
        other => bail!("train-policy supports pai and dqn, not {other:?}"),
    }
    let mut config = AgentConfig {
        ablation,
        ..AgentConfig::default()
    };
    if let Some(b) = a.batch_size {
        config.batch_size = b;
    }
    if let Some(t) = a.train_every {
        config.train_every = t;
    }
    if let Some(h) = a.hidden {
        config.hidden = h;
    }
    if let Some(lr) = a.learning_rate {
        config.learning_rate = lr;
    }
    if let Some(t) = a.target_update {
        config.target_update = Some(t);
    }
    if let Some(e) = a.epsilon_end {
        config.epsilon_end = e;
    }
    if let Some(f) = a.epsilon_decay {
        config.epsilon_decay_fraction = f;
    }
    let out = run_training(
        &world,
        &bundle.train_pairs(),
        table,
        config,
        a.episodes,
        a.seed,
    )?;
    out.agent.save(&a.out)?;
    if let Some(log) = &a.log {
        write_training_log(log, &out.log)?;
    }
    Ok(json!({ "out": a.out, "policy": out.agent.name(), "episodes": out.log.len() }))
}

fn build_policies(
    args: &PolicyArgs,
    graph: &CognitiveGraph,
) -> anyhow::Result<Vec<Box<dyn TutorPolicy>>> {
    let mut ckpts = args.ckpts.iter();
    let mut out: Vec<Box<dyn TutorPolicy>> = Vec::new();
    for name in &args.policies {
        match name.as_str() {
            "pai" | "dqn" => {
                let path = ckpts
                    .next()
                    .ok_or_else(|| anyhow!("policy {name} needs a --ckpt"))?;
                let agent = Agent::load(path)?;
                agent.check_graph(graph)?;
                out.push(Box::new(agent));
            }
            "knn" => {
                let path = args
                    .embed
                    .as_ref()
                    .ok_or_else(|| anyhow!("knn needs --embed"))?;
                out.push(Box::new(Knn {
                    embeddings: Arc::new(load_embeddings(path, graph)?),
                }));
            }
            "greedy" => out.push(Box::new(Greedy)),
            other => bail!("unknown policy {other:?}; expected pai, knn, greedy or dqn"),
        }
    }
    Ok(out)
}

fn test_samples(bundle: &DatasetBundle, tier: Option<&str>) -> anyhow::Result<Vec<Sample>> {
    let samples: Vec<Sample> = match tier {
        None => bundle.test.clone(),
        Some(t) => {
            let tier = Tier::ALL
                .into_iter()
                .find(|x| x.name() == t)
                .ok_or_else(|| anyhow!("unknown tier {t:?}"))?;
            bundle
                .test
                .iter()
                .copied()
                .filter(|s| s.tier == tier)
                .collect()
        }
    };
    if samples.is_empty() {
        bail!("no test samples");
    }
    Ok(samples)
}

fn report_config(
    world: &World,
    args: &PolicyArgs,
    policies: &[Box<dyn TutorPolicy>],
    extra: serde_json::Value,
) -> ReportConfig {
    let agent = args
        .ckpts
        .first()
        .and_then(|p| Agent::load(p).ok())
        .map(|a| a.config);
    ReportConfig {
        sim: world.sim,
        agent,
        seeds: args.seeds.clone(),
        reference: args
            .reference
            .clone()
            .or_else(|| policies.iter().map(|p| p.name()).find(|n| n == "dqn")),
        extra,
    }
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn eval_cmd(a: Eval) -> anyhow::Result<serde_json::Value> {
    let (world, bundle) = load_world(&a.world)?;
    let policies = build_policies(&a.policy, &world.graph)?;
    let samples = test_samples(&bundle, a.policy.tier.as_deref())?;
    let mut rows = Vec::new();
    for p in &policies {
        let r = evaluate(
            p.as_ref(),
            &world,
            &samples,
            &a.policy.seeds,
            execution(a.policy.serial),
        )?;
        rows.push(SweepRow::plain(r));
    }
    let extra = json!({ "data": a.world.data, "sim": a.world.sim, "tier": a.policy.tier });
    write_report(
        &a.policy.report,
        &rows,
        &report_config(&world, &a.policy, &policies, extra),
    )?;
    Ok(summary(&rows))
}

fn sweep_cmd(a: Sweep) -> anyhow::Result<serde_json::Value> {
    let kind: SweepKind = a.kind.parse()?;
    let (world, bundle) = load_world(&a.world)?;
    let policies = build_policies(&a.policy, &world.graph)?;
    let samples = test_samples(&bundle, a.policy.tier.as_deref())?;
    let refs: Vec<&dyn TutorPolicy> = policies.iter().map(|p| p.as_ref()).collect();
    let rows = sweep(
        kind,
        &refs,
        &world,
        &samples,
        &a.policy.seeds,
        execution(a.policy.serial),
    )?;
    let extra = json!({ "data": a.world.data, "sim": a.world.sim, "kind": kind });
    write_report(
        &a.policy.report,
        &rows,
        &report_config(&world, &a.policy, &policies, extra),
    )?;
    Ok(summary(&rows))
}

fn summary(rows: &[SweepRow]) -> serde_json::Value {
    json!(rows
        .iter()
        .map(|r| json!({
            "kind": r.kind,
            "value": r.value,
            "policy": r.report.policy,
            "success_rate": r.report.success_rate(),
            "average_turn": r.report.average_turn(),
            "impatience": r.report.impatience(),
        }))
        .collect::<Vec<_>>())
}

fn error_json(kind: &str, message: String) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_json("usage", e.to_string()));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::GenData(a) => gen_data(a),
        Command::Pretrain(a) => pretrain_cmd(a),
        Command::TrainSim(a) => train_sim(a),
        Command::TrainPolicy(a) => train_policy(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
    };
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e
                .downcast_ref::<gits_core::Error>()
                .map_or("error", |x| x.kind());
            eprintln!("{}", error_json(kind, format!("{e:#}")));
            ExitCode::FAILURE
        }
    }
}
