//! TransE pretraining of cognitive-graph node embeddings.
//!
//! Triples come straight from the three relations of the graph: one per
//! answer (split by sign), one per coverage pair and one per prerequisite
//! edge. Entities are indexed by [`EntityCatalog::node_index`].

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphdata::{CognitiveGraph, EntityCatalog, Feedback, NodeId};
use crate::tensornet::{Checkpoint, Matrix, NamedTensor};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AnsweredCorrect,
    AnsweredWrong,
    Covers,
    PrereqOf,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::AnsweredCorrect,
        Relation::AnsweredWrong,
        Relation::Covers,
        Relation::PrereqOf,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Triple {
    pub head: usize,
    pub relation: Relation,
    pub tail: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleStore {
    pub num_entities: usize,
    pub triples: Vec<Triple>,
}

impl TripleStore {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// One triple per nonzero answer, coverage pair and prerequisite edge.
pub fn make_triples(graph: &CognitiveGraph) -> TripleStore {
    let cat = &graph.catalog;
    let mut triples = Vec::with_capacity(graph.q.len() + graph.o.len() + graph.p.num_edges());
    for (s, e, f) in graph.q.entries() {
        triples.push(Triple {
            head: cat.node_index(NodeId::Student(s)),
            relation: match f {
                Feedback::Correct => Relation::AnsweredCorrect,
                Feedback::Wrong => Relation::AnsweredWrong,
            },
            tail: cat.node_index(NodeId::Exercise(e)),
        });
    }
    for (e, c) in graph.o.entries() {
        triples.push(Triple {
            head: cat.node_index(NodeId::Exercise(e)),
            relation: Relation::Covers,
            tail: cat.node_index(NodeId::Concept(c)),
        });
    }
    for (a, b) in graph.p.edges() {
        triples.push(Triple {
            head: cat.node_index(NodeId::Concept(a)),
            relation: Relation::PrereqOf,
            tail: cat.node_index(NodeId::Concept(b)),
        });
    }
    TripleStore {
        num_entities: cat.num_nodes(),
        triples,
    }
}

/// `||h + r - t||_2`; lower means more plausible.
pub fn transe_score(h: &[f64], r: &[f64], t: &[f64]) -> f64 {
    h.iter()
        .zip(r)
        .zip(t)
        .map(|((a, b), c)| {
            let d = a + b - c;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Gradient of `||h + r - t||` with respect to `x = h + r - t`.
fn score_direction(h: &[f64], r: &[f64], t: &[f64]) -> (f64, Vec<f64>) {
    let x: Vec<f64> = h
        .iter()
        .zip(r)
        .zip(t)
        .map(|((a, b), c)| a + b - c)
        .collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let dir = if norm > 0.0 {
        x.iter().map(|v| v / norm).collect()
    } else {
        vec![0.0; x.len()]
    };
    (norm, dir)
}

/// Margin ranking loss `max(0, margin + d(h,r,t) - d(h',r,t'))` and its
/// gradients with respect to `[h, r, t, h', t']`.
pub fn margin_ranking_grad(
    pos: (&[f64], &[f64], &[f64]),
    neg: (&[f64], &[f64]),
    margin: f64,
) -> (f64, [Vec<f64>; 5]) {
    let (h, r, t) = pos;
    let (hn, tn) = neg;
    let (dp, gp) = score_direction(h, r, t);
    let (dn, gn) = score_direction(hn, r, tn);
    let loss = margin + dp - dn;
    let dim = h.len();
    if loss <= 0.0 {
        return (0.0, std::array::from_fn(|_| vec![0.0; dim]));
    }
    let neg_gp: Vec<f64> = gp.iter().map(|v| -v).collect();
    let neg_gn: Vec<f64> = gn.iter().map(|v| -v).collect();
    let gr: Vec<f64> = gp.iter().zip(&gn).map(|(a, b)| a - b).collect();
    (loss, [gp, gr, neg_gp, neg_gn, gn])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranseConfig {
    pub dim: usize,
    pub margin: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// One relation vector per relation kind; off collapses all into one.
    pub typed_relations: bool,
    pub seed: u64,
}

impl Default for TranseConfig {
    fn default() -> Self {
        TranseConfig {
            dim: 64,
            margin: 1.0,
            epochs: 500,
            learning_rate: 0.01,
            typed_relations: true,
            seed: 0,
        }
    }
}

/// Entity and relation vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub entities: Matrix,
    pub relations: Matrix,
    pub typed_relations: bool,
}

impl EmbeddingTable {
    /// Seeded TransE initialization: uniform in `±6/sqrt(dim)`, entities
    /// L2-normalized, relations normalized once.
    pub fn random(num_entities: usize, dim: usize, typed_relations: bool, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 6.0 / (dim as f64).sqrt();
        let mut entities = Matrix::random_uniform(num_entities, dim, -bound, bound, &mut rng);
        let n_rel = if typed_relations {
            Relation::ALL.len()
        } else {
            1
        };
        let mut relations = Matrix::random_uniform(n_rel, dim, -bound, bound, &mut rng);
        normalize_rows(&mut entities);
        normalize_rows(&mut relations);
        EmbeddingTable {
            entities,
            relations,
            typed_relations,
        }
    }

    pub fn dim(&self) -> usize {
        self.entities.cols()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.rows()
    }

    pub fn entity(&self, index: usize) -> &[f64] {
        self.entities.row(index)
    }

    pub fn node(&self, catalog: &EntityCatalog, node: NodeId) -> &[f64] {
        self.entities.row(catalog.node_index(node))
    }

    fn relation_row(&self, r: Relation) -> usize {
        if self.typed_relations {
            r.index()
        } else {
            0
        }
    }

    pub fn relation(&self, r: Relation) -> &[f64] {
        self.relations.row(self.relation_row(r))
    }

    pub fn score(&self, t: &Triple) -> f64 {
        transe_score(
            self.entity(t.head),
            self.relation(t.relation),
            self.entity(t.tail),
        )
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(vec![
            NamedTensor::new("entities", self.entities.clone()),
            NamedTensor::new("relations", self.relations.clone()),
        ])
        .with_meta(serde_json::json!({ "kind": "transe", "typed_relations": self.typed_relations }))
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let get = |name: &str| {
            ckpt.get(name)
                .map(|t| t.value.clone())
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))
        };
        let entities = get("entities")?;
        let relations = get("relations")?;
        if entities.cols() != relations.cols() {
            return Err(Error::Checkpoint("entity and relation dims differ".into()));
        }
        Ok(EmbeddingTable {
            entities,
            relations,
            typed_relations: ckpt.meta["typed_relations"].as_bool().unwrap_or(true),
        })
    }

    /// Mean rank of each true tail among all entities for `(h, r, ?)`,
    /// skipping other known true tails. 1 is best.
    pub fn filtered_mean_rank(&self, store: &TripleStore) -> f64 {
        let mut known: HashMap<(usize, Relation), HashSet<usize>> = HashMap::new();
        for t in &store.triples {
            known
                .entry((t.head, t.relation))
                .or_default()
                .insert(t.tail);
        }
        let mut total = 0.0;
        for t in &store.triples {
            let h = self.entity(t.head);
            let r = self.relation(t.relation);
            let true_score = transe_score(h, r, self.entity(t.tail));
            let others = &known[&(t.head, t.relation)];
            let better = (0..self.num_entities())
                .filter(|&e| e != t.tail && !others.contains(&e))
                .filter(|&e| transe_score(h, r, self.entity(e)) < true_score)
                .count();
            total += (better + 1) as f64;
        }
        total / store.len().max(1) as f64
    }
}

fn normalize_rows(m: &mut Matrix) {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            row.iter_mut().for_each(|v| *v /= n);
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub table: EmbeddingTable,
    /// Mean hinge loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains TransE with one uniformly corrupted negative per positive
/// (head or tail with probability one half), online SGD, and entity
/// renormalization after every epoch.
pub fn pretrain(store: &TripleStore, cfg: &TranseConfig) -> Result<PretrainReport> {
    if store.is_empty() {
        return Err(Error::EmptyTripleStore);
    }
    if cfg.dim == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::Config(
            "transe needs dim > 0 and learning_rate > 0".into(),
        ));
    }
    let mut table =
        EmbeddingTable::random(store.num_entities, cfg.dim, cfg.typed_relations, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_616e_7345);
    let mut order: Vec<usize> = (0..store.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let lr = cfg.learning_rate;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let t = store.triples[i];
            let (mut nh, mut nt) = (t.head, t.tail);
            if rng.gen_bool(0.5) {
                nh = rng.gen_range(0..store.num_entities);
            } else {
                nt = rng.gen_range(0..store.num_entities);
            }
            let rr = table.relation_row(t.relation);
            let (loss, grads) = margin_ranking_grad(
                (
                    table.entity(t.head),
                    table.relations.row(rr),
                    table.entity(t.tail),
                ),
                (table.entity(nh), table.entity(nt)),
                cfg.margin,
            );
            if loss <= 0.0 {
                continue;
            }
            total += loss;
            let [gh, gr, gt, gnh, gnt] = grads;
            apply(table.entities.row_mut(t.head), &gh, lr);
            apply(table.relations.row_mut(rr), &gr, lr);
            apply(table.entities.row_mut(t.tail), &gt, lr);
            apply(table.entities.row_mut(nh), &gnh, lr);
            apply(table.entities.row_mut(nt), &gnt, lr);
        }
        normalize_rows(&mut table.entities);
        epoch_losses.push(total / store.len() as f64);
    }
    Ok(PretrainReport {
        table,
        epoch_losses,
    })
}

fn apply(row: &mut [f64], grad: &[f64], lr: f64) {
    for (v, g) in row.iter_mut().zip(grad) {
        *v -= lr * g;
    }
}
