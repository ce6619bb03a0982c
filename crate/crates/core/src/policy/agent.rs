use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderTrace, GcnEncoder, GraphInput};
use super::qnet::{DuelingQNet, QTrace};
use super::replay::{ReplayBuffer, ReplayConfig};
use super::selection::{exercise_score, select_candidates, CandidateSet, SelectionMode};
use super::TutorPolicy;
use crate::embed::EmbeddingTable;
use crate::graphdata::{
    normalized_adjacency, ActionId, CognitiveGraph, ConceptId, ExerciseId, NodeId,
    NormalizedAdjacency, SessionState, StudentId, SubgraphScope,
};
use crate::simulator::{Episode, TerminationReason, World};
use crate::tensornet::{Checkpoint, Matrix, Optimizer, OptimizerKind, Param, Parameterized};
use crate::{Error, Execution, Result};

/// Components switched off for ablation runs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    /// Use the input embeddings directly instead of graph convolutions.
    pub no_gcn: bool,
    /// Replace pretrained embeddings with a random table.
    pub no_pretrain: bool,
    /// Offer every pool exercise instead of a pruned candidate set.
    pub no_selection: bool,
    /// Rank by exercise score only, ignoring concept scores.
    pub no_prereq: bool,
}

impl Ablation {
    pub const FLAGS: [&'static str; 4] = ["no-gcn", "no-pretrain", "no-selection", "no-prereq"];

    /// Flat Q-learning over raw embeddings and the unpruned pool.
    pub fn vanilla_dqn() -> Self {
        Ablation {
            no_gcn: true,
            no_selection: true,
            ..Ablation::default()
        }
    }

    /// Parses a comma-separated list such as `no-gcn,no-selection`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut a = Ablation::default();
        for flag in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match flag {
                "no-gcn" => a.no_gcn = true,
                "no-pretrain" => a.no_pretrain = true,
                "no-selection" => a.no_selection = true,
                "no-prereq" => a.no_prereq = true,
                other => {
                    return Err(Error::Config(format!(
                        "unknown ablation {other:?}, expected one of {}",
                        Ablation::FLAGS.join(", ")
                    )))
                }
            }
        }
        Ok(a)
    }

    pub fn label(&self) -> String {
        let on = [
            self.no_gcn,
            self.no_pretrain,
            self.no_selection,
            self.no_prereq,
        ];
        let names: Vec<&str> = Ablation::FLAGS
            .iter()
            .zip(on)
            .filter(|(_, b)| *b)
            .map(|(n, _)| *n)
            .collect();
        names.join(",")
    }

    pub fn selection_mode(&self) -> SelectionMode {
        if self.no_selection {
            SelectionMode::Full
        } else if self.no_prereq {
            SelectionMode::ExerciseOnly
        } else {
            SelectionMode::Prerequisite
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub gcn_layers: usize,
    pub hidden: usize,
    pub num_candidates: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of the episodes over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub optimizer: OptimizerKind,
    pub replay: ReplayConfig,
    /// Optimizer steps between target-network syncs; `None` bootstraps
    /// from the online network.
    pub target_update: Option<usize>,
    /// Environment steps between optimizer steps.
    pub train_every: usize,
    pub scope: SubgraphScope,
    pub ablation: Ablation,
    pub execution: Execution,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            gcn_layers: 2,
            hidden: 100,
            num_candidates: 30,
            gamma: 0.999,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.2,
            batch_size: 128,
            learning_rate: 1e-4,
            l2: 1e-6,
            optimizer: OptimizerKind::Adam,
            replay: ReplayConfig::default(),
            target_update: Some(100),
            train_every: 1,
            scope: SubgraphScope::Extended,
            ablation: Ablation::default(),
            execution: Execution::Parallel,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        for (name, e) in [
            ("epsilon_start", self.epsilon_start),
            ("epsilon_end", self.epsilon_end),
        ] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("{name} must lie in [0, 1], got {e}"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon_decay_fraction) {
            return bad("epsilon_decay_fraction must lie in [0, 1]".into());
        }
        if !self.ablation.no_gcn && self.gcn_layers == 0 {
            return bad("at least one graph layer is needed".into());
        }
        if self.hidden == 0
            || self.num_candidates == 0
            || self.batch_size == 0
            || self.train_every == 0
        {
            return bad(
                "hidden, num_candidates, batch_size and train_every must be positive".into(),
            );
        }
        if self.target_update == Some(0) {
            return bad("target_update must be positive when set".into());
        }
        if !(self.learning_rate > 0.0) || self.l2 < 0.0 {
            return bad("learning_rate must be positive and l2 non-negative".into());
        }
        Ok(())
    }

    /// Linear decay from `epsilon_start` to `epsilon_end` over the first
    /// `epsilon_decay_fraction` of `episodes`.
    pub fn epsilon(&self, episode: usize, episodes: usize) -> f64 {
        let span = self.epsilon_decay_fraction * episodes as f64;
        if span <= 0.0 || episode as f64 >= span {
            return self.epsilon_end;
        }
        let t = episode as f64 / span;
        self.epsilon_start + t * (self.epsilon_end - self.epsilon_start)
    }
}

/// `y = r` at a terminal transition, else `r + gamma * max Q(s', .)`.
pub fn td_target(reward: f64, next_q: Option<&[f64]>, gamma: f64) -> f64 {
    match next_q {
        Some(q) if !q.is_empty() => {
            reward + gamma * q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        }
        _ => reward,
    }
}

/// Highest-Q action; exact ties go to the lowest action id.
pub fn greedy_index(actions: &[ActionId], q: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..actions.len() {
        if q[i] > q[best] || (q[i] == q[best] && actions[i] < actions[best]) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActMode {
    Greedy,
    Epsilon(f64),
}

/// Encoder plus dueling head: the trainable part of the agent.
#[derive(Debug, Clone, PartialEq)]
pub struct QModel {
    pub encoder: GcnEncoder,
    pub qnet: DuelingQNet,
}

impl Parameterized for QModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.encoder.params();
        p.extend(self.qnet.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.encoder.params_mut();
        p.extend(self.qnet.params_mut());
        p
    }

    fn param_names(&self) -> Vec<String> {
        let mut n = self.encoder.param_names();
        n.extend(
            self.qnet
                .param_names()
                .into_iter()
                .map(|s| format!("q.{s}")),
        );
        n
    }
}

/// Node representations for a subset of local rows.
struct Encoded {
    input: GraphInput,
    trace: Option<EncoderTrace>,
    /// Sorted local rows present in `reprs`.
    rows: Vec<usize>,
    reprs: Matrix,
}

impl Encoded {
    fn position(&self, local: usize) -> Option<usize> {
        self.rows.binary_search(&local).ok()
    }
}

/// Everything a Q evaluation needs for its backward pass.
struct QEval {
    enc: Encoded,
    action_rows: Vec<Option<usize>>,
    trace: QTrace,
}

/// One replay entry. `next` is `None` at terminal transitions.
#[derive(Debug, Clone)]
pub struct Transition {
    pub state: SessionState,
    pub candidates: CandidateSet,
    pub action: usize,
    pub reward: f64,
    pub next: Option<(SessionState, CandidateSet)>,
}

/// The tutoring agent: frozen node embeddings, graph encoder and dueling
/// Q-network.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub model: QModel,
    embeddings: Arc<EmbeddingTable>,
}

impl Agent {
    /// Seeded initialization. With `no_pretrain` the given table only
    /// fixes the shape and a random table of the same size is used.
    pub fn new(config: AgentConfig, embeddings: Arc<EmbeddingTable>, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = embeddings.dim();
        let embeddings = if config.ablation.no_pretrain {
            Arc::new(EmbeddingTable::random(
                embeddings.num_entities(),
                dim,
                embeddings.typed_relations,
                rng.gen(),
            ))
        } else {
            embeddings
        };
        let layers = if config.ablation.no_gcn {
            0
        } else {
            config.gcn_layers
        };
        let model = QModel {
            encoder: GcnEncoder::new(dim, layers, &mut rng),
            qnet: DuelingQNet::new(dim, config.hidden, &mut rng),
        };
        Ok(Agent {
            config,
            model,
            embeddings,
        })
    }

    pub fn embeddings(&self) -> &Arc<EmbeddingTable> {
        &self.embeddings
    }

    pub fn check_graph(&self, graph: &CognitiveGraph) -> Result<()> {
        if self.embeddings.num_entities() != graph.catalog.num_nodes() {
            return Err(Error::Config(format!(
                "embedding table has {} entities, graph has {} nodes",
                self.embeddings.num_entities(),
                graph.catalog.num_nodes()
            )));
        }
        Ok(())
    }

    fn raw(&self, graph: &CognitiveGraph, node: NodeId) -> &[f64] {
        self.embeddings.node(&graph.catalog, node)
    }

    /// Node features and adjacency of a state. Without the graph encoder
    /// the student vector is shifted by the signed mean of the exercises
    /// answered this session, so the state still reflects progress.
    fn graph_input(&self, graph: &CognitiveGraph, state: &SessionState) -> GraphInput {
        let layout = state.layout();
        let n = layout.num_nodes();
        let d = self.embeddings.dim();
        let mut features = Matrix::zeros(n, d);
        for (i, &node) in layout.nodes().iter().enumerate() {
            features.row_mut(i).copy_from_slice(self.raw(graph, node));
        }
        let adjacency = if self.config.ablation.no_gcn {
            let steps: Vec<(ExerciseId, f64)> = state
                .history()
                .steps
                .iter()
                .filter_map(|&(a, f)| a.exercise().map(|e| (e, f.value() as f64)))
                .collect();
            if !steps.is_empty() {
                let scale = 1.0 / steps.len() as f64;
                for (e, f) in steps {
                    let v = self.raw(graph, NodeId::Exercise(e)).to_vec();
                    for (x, y) in features.row_mut(0).iter_mut().zip(v) {
                        *x += scale * f * y;
                    }
                }
            }
            NormalizedAdjacency::from_edges(n, [])
        } else {
            normalized_adjacency(state)
        };
        GraphInput {
            features,
            adjacency,
            student: 0,
            target: layout.target_index(),
        }
    }

    fn encode(&self, model: &QModel, input: GraphInput, rows: Option<Vec<usize>>) -> Encoded {
        let rows = rows.unwrap_or_else(|| (0..input.num_nodes()).collect());
        if model.encoder.num_layers() == 0 {
            let reprs = input.features.select_rows(&rows);
            return Encoded {
                input,
                trace: None,
                rows,
                reprs,
            };
        }
        let trace = model.encoder.forward(&input, Some(&rows));
        let reprs = trace.output.clone();
        Encoded {
            input,
            trace: Some(trace),
            rows,
            reprs,
        }
    }

    fn node_repr<'a>(
        &'a self,
        graph: &'a CognitiveGraph,
        state: &SessionState,
        enc: &'a Encoded,
        node: NodeId,
    ) -> &'a [f64] {
        match state
            .layout()
            .local_index(node)
            .and_then(|l| enc.position(l))
        {
            Some(p) => enc.reprs.row(p),
            None => self.raw(graph, node),
        }
    }

    fn state_vector(enc: &Encoded) -> Vec<f64> {
        let hu = enc
            .reprs
            .row(enc.position(enc.input.student).expect("student row"));
        let hc = enc
            .reprs
            .row(enc.position(enc.input.target).expect("target row"));
        hu.iter().zip(hc).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    fn q_eval(
        &self,
        model: &QModel,
        graph: &CognitiveGraph,
        enc: Encoded,
        state: &SessionState,
        cands: &CandidateSet,
    ) -> QEval {
        let layout = state.layout();
        let d = self.embeddings.dim();
        let mut actions = Matrix::zeros(cands.len(), d);
        let mut action_rows = Vec::with_capacity(cands.len());
        for (k, &a) in cands.actions().iter().enumerate() {
            let pos = layout.local_index(a.node()).and_then(|l| enc.position(l));
            let v = match pos {
                Some(p) => enc.reprs.row(p),
                None => self.raw(graph, a.node()),
            };
            actions.row_mut(k).copy_from_slice(v);
            action_rows.push(pos);
        }
        let s = Self::state_vector(&enc);
        let trace = model.qnet.forward(&s, &actions);
        QEval {
            enc,
            action_rows,
            trace,
        }
    }

    fn needed_rows(state: &SessionState, cands: &CandidateSet) -> Vec<usize> {
        let layout = state.layout();
        let mut rows = vec![0, layout.target_index()];
        rows.extend(
            cands
                .actions()
                .iter()
                .filter_map(|a| layout.local_index(a.node())),
        );
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    fn q_restricted(
        &self,
        model: &QModel,
        graph: &CognitiveGraph,
        state: &SessionState,
        cands: &CandidateSet,
    ) -> QEval {
        let input = self.graph_input(graph, state);
        let enc = self.encode(model, input, Some(Self::needed_rows(state, cands)));
        self.q_eval(model, graph, enc, state, cands)
    }

    fn backward(&self, model: &QModel, ev: &QEval, dq: &[f64], grads: &mut [Matrix]) {
        let split = model.encoder.params().len();
        let (enc_grads, q_grads) = grads.split_at_mut(split);
        let (ds, da) = model.qnet.backward_into(&ev.trace, dq, q_grads);
        let Some(trace) = &ev.enc.trace else { return };
        let mut d_out = Matrix::zeros(ev.enc.rows.len(), ds.len());
        for local in [ev.enc.input.student, ev.enc.input.target] {
            let p = ev.enc.position(local).expect("pooled rows are encoded");
            for (o, g) in d_out.row_mut(p).iter_mut().zip(&ds) {
                *o += 0.5 * g;
            }
        }
        for (k, pos) in ev.action_rows.iter().enumerate() {
            if let Some(p) = *pos {
                for (o, g) in d_out.row_mut(p).iter_mut().zip(da.row(k)) {
                    *o += g;
                }
            }
        }
        model
            .encoder
            .backward_into(&ev.enc.input, trace, &d_out, enc_grads);
    }

    /// Candidate set of the episode's current turn and its Q values.
    pub fn evaluate(&self, ep: &Episode<'_>) -> (CandidateSet, Vec<f64>) {
        let cands = self.candidates(ep);
        let q = self.q_values(ep.graph, &ep.state, &cands);
        (cands, q)
    }

    /// Candidate actions for the current turn.
    pub fn candidates(&self, ep: &Episode<'_>) -> CandidateSet {
        let graph = ep.graph;
        let target = ep.target();
        let mode = self.config.ablation.selection_mode();
        if mode == SelectionMode::Full {
            let w = HashMap::new();
            return select_candidates(
                &graph.o,
                target,
                &ep.predecessors,
                &w,
                self.config.num_candidates,
                mode,
            );
        }
        let input = self.graph_input(graph, &ep.state);
        let enc = self.encode(&self.model, input, None);
        let repr = |node| self.node_repr(graph, &ep.state, &enc, node);
        let (plus, minus) = ep.tutored_sets();
        let plus: Vec<&[f64]> = plus.iter().map(|&e| repr(NodeId::Exercise(e))).collect();
        let minus: Vec<&[f64]> = minus.iter().map(|&e| repr(NodeId::Exercise(e))).collect();
        let h_u = repr(NodeId::Student(ep.student()));
        let pool = super::selection::candidate_pool(&graph.o, target, &ep.predecessors);
        let w: HashMap<ExerciseId, f64> = pool
            .into_iter()
            .map(|e| {
                (
                    e,
                    exercise_score(h_u, repr(NodeId::Exercise(e)), &plus, &minus),
                )
            })
            .collect();
        select_candidates(
            &graph.o,
            target,
            &ep.predecessors,
            &w,
            self.config.num_candidates,
            mode,
        )
    }

    pub fn q_values(
        &self,
        graph: &CognitiveGraph,
        state: &SessionState,
        cands: &CandidateSet,
    ) -> Vec<f64> {
        self.q_restricted(&self.model, graph, state, cands).trace.q
    }

    pub fn act(&self, ep: &Episode<'_>, mode: ActMode, rng: &mut ChaCha8Rng) -> ActionId {
        let (cands, q) = self.evaluate(ep);
        pick(&cands, &q, mode, rng)
    }

    /// Squared TD loss of one transition, weighted; accumulates grads
    /// scaled by `scale` and returns `(weighted loss, td error)`.
    fn transition_grad(
        &self,
        target: &QModel,
        graph: &CognitiveGraph,
        t: &Transition,
        weight: f64,
        scale: f64,
        grads: &mut [Matrix],
    ) -> (f64, f64) {
        let next_q = t
            .next
            .as_ref()
            .map(|(s, c)| self.q_restricted(target, graph, s, c).trace.q);
        let y = td_target(t.reward, next_q.as_deref(), self.config.gamma);
        let ev = self.q_restricted(&self.model, graph, &t.state, &t.candidates);
        let td = y - ev.trace.q[t.action];
        let mut dq = vec![0.0; t.candidates.len()];
        dq[t.action] = -2.0 * weight * td * scale;
        self.backward(&self.model, &ev, &dq, grads);
        (weight * td * td, td)
    }

    /// Accumulated grads and per-item `(loss, td)` for a batch, computed
    /// in fixed-size chunks so serial and parallel runs agree bit for bit.
    pub fn batch_gradients(
        &self,
        target: &QModel,
        graph: &CognitiveGraph,
        batch: &[(&Transition, f64)],
        execution: Execution,
    ) -> (Vec<Matrix>, Vec<(f64, f64)>) {
        const CHUNK: usize = 8;
        let scale = 1.0 / batch.len().max(1) as f64;
        let chunks: Vec<&[(&Transition, f64)]> = batch.chunks(CHUNK).collect();
        let parts = execution.map(&chunks, |_, chunk| {
            let mut grads = self.model.grad_buffer();
            let stats: Vec<(f64, f64)> = chunk
                .iter()
                .map(|(t, w)| self.transition_grad(target, graph, t, *w, scale, &mut grads))
                .collect();
            (grads, stats)
        });
        let mut total = self.model.grad_buffer();
        let mut stats = Vec::with_capacity(batch.len());
        for (g, s) in parts {
            for (a, b) in total.iter_mut().zip(&g) {
                a.add_assign(b);
            }
            stats.extend(s);
        }
        (total, stats)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut tensors = self.model.to_checkpoint().prefixed("model.");
        tensors.extend(self.embeddings.to_checkpoint().prefixed("embed."));
        Checkpoint::new(tensors).with_meta(serde_json::json!({
            "kind": "agent",
            "config": self.config,
            "typed_relations": self.embeddings.typed_relations,
        }))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.meta["kind"] != "agent" {
            return Err(Error::Checkpoint("not an agent checkpoint".into()));
        }
        let config: AgentConfig = serde_json::from_value(ckpt.meta["config"].clone())?;
        let mut embed = ckpt.sub("embed.");
        embed.meta = serde_json::json!({ "typed_relations": ckpt.meta["typed_relations"] });
        let embeddings = Arc::new(EmbeddingTable::from_checkpoint(&embed)?);
        // Build the right shapes, then overwrite every tensor, keeping the
        // stored (possibly random) embedding table.
        let shape_cfg = AgentConfig {
            ablation: Ablation {
                no_pretrain: false,
                ..config.ablation
            },
            ..config
        };
        let mut agent = Agent::new(shape_cfg, embeddings, 0)?;
        agent.config = config;
        agent.model.load_checkpoint(&ckpt.sub("model."))?;
        Ok(agent)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Agent::from_checkpoint(&Checkpoint::load(path)?)
    }
}

fn pick(cands: &CandidateSet, q: &[f64], mode: ActMode, rng: &mut ChaCha8Rng) -> ActionId {
    let explore = match mode {
        ActMode::Greedy => false,
        ActMode::Epsilon(e) => rng.gen::<f64>() < e,
    };
    if explore {
        cands.actions()[rng.gen_range(0..cands.len())]
    } else {
        cands.actions()[greedy_index(cands.actions(), q)]
    }
}

impl TutorPolicy for Agent {
    fn name(&self) -> String {
        if self.config.ablation == Ablation::vanilla_dqn() {
            "dqn".into()
        } else if self.config.ablation == Ablation::default() {
            "pai".into()
        } else {
            format!("pai[{}]", self.config.ablation.label())
        }
    }

    fn act(&self, episode: &Episode<'_>, _rng: &mut ChaCha8Rng) -> Result<ActionId> {
        let (cands, q) = self.evaluate(episode);
        Ok(cands.actions()[greedy_index(cands.actions(), &q)])
    }

    fn scope(&self) -> SubgraphScope {
        self.config.scope
    }
}

/// Gradient updates over a replay buffer with an optional target copy.
pub struct Learner {
    pub agent: Agent,
    target: Option<QModel>,
    optimizer: Optimizer,
    pub buffer: ReplayBuffer<Transition>,
    updates: usize,
}

impl Learner {
    pub fn new(agent: Agent) -> Result<Self> {
        let cfg = agent.config;
        Ok(Learner {
            target: cfg.target_update.map(|_| agent.model.clone()),
            optimizer: Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.l2),
            buffer: ReplayBuffer::new(cfg.replay)?,
            agent,
            updates: 0,
        })
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    /// One optimizer step on an explicit weighted batch; returns the mean
    /// weighted squared TD error and the TD errors.
    pub fn update_on(
        &mut self,
        graph: &CognitiveGraph,
        batch: &[(&Transition, f64)],
    ) -> (f64, Vec<f64>) {
        let target = self.target.as_ref().unwrap_or(&self.agent.model);
        let (grads, stats) =
            self.agent
                .batch_gradients(target, graph, batch, self.agent.config.execution);
        self.agent.model.accumulate_grads(&grads);
        self.optimizer.step(&mut self.agent.model.params_mut());
        self.updates += 1;
        if let (Some(period), Some(t)) = (self.agent.config.target_update, self.target.as_mut()) {
            if self.updates % period == 0 {
                *t = self.agent.model.clone();
            }
        }
        let loss = stats.iter().map(|s| s.0).sum::<f64>() / stats.len().max(1) as f64;
        (loss, stats.into_iter().map(|s| s.1).collect())
    }

    /// Prioritized minibatch step.
    pub fn train_step(&mut self, graph: &CognitiveGraph, rng: &mut ChaCha8Rng) -> Result<f64> {
        let sample = self.buffer.sample(self.agent.config.batch_size, rng)?;
        let items: Vec<Transition> = sample
            .indices
            .iter()
            .map(|&i| self.buffer.get(i).clone())
            .collect();
        let batch: Vec<(&Transition, f64)> =
            items.iter().zip(sample.weights.iter().copied()).collect();
        let (loss, tds) = self.update_on(graph, &batch);
        self.buffer.update_priorities(&sample.indices, &tds);
        Ok(loss)
    }
}

/// Per-episode line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub student: StudentId,
    pub target: ConceptId,
    pub outcome: TerminationReason,
    pub turns: usize,
    pub total_reward: f64,
    pub impatience: f64,
    pub epsilon: f64,
    pub updates: usize,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub agent: Agent,
    pub log: Vec<EpisodeRecord>,
}

/// Writes the log as JSON lines.
pub fn write_training_log(path: impl AsRef<Path>, log: &[EpisodeRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut f =
        std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for r in log {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

/// Deep Q-learning over sampled (student, target) pairs.
pub fn run_training(
    world: &World,
    samples: &[(StudentId, ConceptId)],
    embeddings: Arc<EmbeddingTable>,
    config: AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<TrainingOutcome> {
    let agent = Agent::new(config, embeddings, seed)?;
    agent.check_graph(&world.graph)?;
    if episodes > 0 && samples.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    let mut learner = Learner::new(agent)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut persisted = world.sim.persist_updates.then(|| world.model.clone());
    let mut log = Vec::with_capacity(episodes);
    let mut env_steps = 0usize;

    for episode in 0..episodes {
        let epsilon = config.epsilon(episode, episodes);
        let (u, c) = samples[rng.gen_range(0..samples.len())];
        let model = persisted.as_ref().unwrap_or(&world.model);
        let mut ep = Episode::new(&world.graph, model, &world.sim, u, c, config.scope)?;
        let mut cands = learner.agent.candidates(&ep);
        let mut total_reward = 0.0;
        let mut losses = Vec::new();
        let outcome = loop {
            let q = learner.agent.q_values(&world.graph, &ep.state, &cands);
            let action = pick(&cands, &q, ActMode::Epsilon(epsilon), &mut rng);
            let index = cands.position(action).expect("picked from the set");
            let state = ep.state.clone();
            let out = ep.step(action)?;
            total_reward += out.reward;
            let terminal = out.terminal.is_terminal();
            let next_cands = (!terminal).then(|| learner.agent.candidates(&ep));
            learner.buffer.push(Transition {
                state,
                candidates: cands,
                action: index,
                reward: out.reward,
                next: next_cands.clone().map(|c| (ep.state.clone(), c)),
            });
            env_steps += 1;
            if learner.buffer.len() >= config.batch_size && env_steps % config.train_every == 0 {
                losses.push(learner.train_step(&world.graph, &mut rng)?);
            }
            match next_cands {
                Some(c) => cands = c,
                None => break out.terminal,
            }
        };
        let record = EpisodeRecord {
            episode,
            student: u,
            target: c,
            outcome,
            turns: ep.session.turn,
            total_reward,
            impatience: ep.session.cumulative_loss,
            epsilon,
            updates: learner.updates(),
            mean_loss: (!losses.is_empty())
                .then(|| losses.iter().sum::<f64>() / losses.len() as f64),
        };
        let row = ep.session.proficiency.clone();
        drop(ep);
        if let Some(m) = persisted.as_mut() {
            m.set_proficiency_row(u, &row)?;
        }
        log.push(record);
    }
    Ok(TrainingOutcome {
        agent: learner.agent,
        log,
    })
}
