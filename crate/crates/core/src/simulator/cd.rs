use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphdata::{CognitiveGraph, ConceptId, ExerciseId, StudentId};
use crate::tensornet::{
    sigmoid_scalar, Adam, AdamConfig, Checkpoint, Linear, Matrix, Param, Parameterized,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdTrainConfig {
    pub epochs: usize,
    pub hidden: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    /// Share of records held out for early stopping; 0 trains on all of
    /// them for the full epoch budget.
    pub validation_fraction: f64,
    /// Epochs without a held-out improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for CdTrainConfig {
    fn default() -> Self {
        CdTrainConfig {
            epochs: 100,
            hidden: 100,
            learning_rate: 0.002,
            batch_size: 256,
            l2: 0.0,
            validation_fraction: 0.1,
            patience: 3,
            seed: 0,
        }
    }
}

/// Simplified neural cognitive diagnosis.
///
/// `p(u, e) = sigmoid(w2 . tanh(W1^T x + b1) + b2)` with
/// `x_k = mask(e, k) * (sigmoid(prof[u][k]) - sigmoid(diff[e][k])) * disc[e]`.
/// `W1`, `w2` and `disc` are kept non-negative, so `p` never decreases when
/// a covered proficiency goes up.
#[derive(Debug, Clone, PartialEq)]
pub struct CdModel {
    pub proficiency: Param,
    pub difficulty: Param,
    pub discrimination: Param,
    pub hidden: Linear,
    pub output: Linear,
    covers: Vec<Vec<usize>>,
    by_concept: Vec<Vec<usize>>,
}

/// Intermediate values of one prediction.
struct Trace {
    concepts: Vec<usize>,
    sig_prof: Vec<f64>,
    sig_diff: Vec<f64>,
    x: Vec<f64>,
    act: Vec<f64>,
    p: f64,
}

#[derive(Debug, Clone)]
pub struct CdFit {
    pub model: CdModel,
    /// Mean cross-entropy over the training records: before training,
    /// then after every epoch.
    pub loss_curve: Vec<f64>,
    /// Same for the held-out records (empty without a validation split).
    pub validation_curve: Vec<f64>,
    /// Epoch whose parameters were kept (0 = initial).
    pub best_epoch: usize,
}

impl CdModel {
    /// Seeded initialization for the graph's id spaces.
    pub fn init(graph: &CognitiveGraph, hidden: usize, seed: u64) -> Self {
        let cat = graph.catalog;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let proficiency = Param::new(Matrix::random_uniform(
            cat.students,
            cat.concepts,
            -0.1,
            0.1,
            &mut rng,
        ));
        let difficulty = Param::new(Matrix::random_uniform(
            cat.exercises,
            cat.concepts,
            -0.1,
            0.1,
            &mut rng,
        ));
        let discrimination =
            Param::new(Matrix::random_uniform(cat.exercises, 1, 0.5, 1.5, &mut rng));
        let mut hidden_layer = Linear::new(cat.concepts, hidden, &mut rng);
        let mut output = Linear::new(hidden, 1, &mut rng);
        for w in [&mut hidden_layer.w.value, &mut output.w.value] {
            w.as_mut_slice().iter_mut().for_each(|v| *v = v.abs());
        }
        let covers = cat
            .exercises()
            .map(|e| graph.o.concepts_of(e).iter().map(|c| c.0).collect())
            .collect();
        let by_concept = cat
            .concepts()
            .map(|c| graph.o.exercises_of(c).iter().map(|e| e.0).collect())
            .collect();
        CdModel {
            proficiency,
            difficulty,
            discrimination,
            hidden: hidden_layer,
            output,
            covers,
            by_concept,
        }
    }

    pub fn num_students(&self) -> usize {
        self.proficiency.value.rows()
    }

    pub fn num_exercises(&self) -> usize {
        self.difficulty.value.rows()
    }

    pub fn num_concepts(&self) -> usize {
        self.proficiency.value.cols()
    }

    pub fn covered_concepts(&self, e: ExerciseId) -> &[usize] {
        &self.covers[e.0]
    }

    pub fn proficiency_row(&self, u: StudentId) -> Result<&[f64]> {
        self.check_student(u)?;
        Ok(self.proficiency.value.row(u.0))
    }

    /// Overwrites a student's proficiency logits (used when session
    /// updates are persisted).
    pub fn set_proficiency_row(&mut self, u: StudentId, row: &[f64]) -> Result<()> {
        self.check_student(u)?;
        self.proficiency.value.row_mut(u.0).copy_from_slice(row);
        Ok(())
    }

    fn check_student(&self, u: StudentId) -> Result<()> {
        if u.0 < self.num_students() {
            Ok(())
        } else {
            Err(Error::UnknownId {
                kind: "student",
                id: u.0,
            })
        }
    }

    fn check_exercise(&self, e: ExerciseId) -> Result<()> {
        if e.0 < self.num_exercises() {
            Ok(())
        } else {
            Err(Error::UnknownId {
                kind: "exercise",
                id: e.0,
            })
        }
    }

    fn trace(&self, row: &[f64], e: usize) -> Trace {
        let concepts = self.covers[e].clone();
        let disc = self.discrimination.value.get(e, 0);
        let sig_prof: Vec<f64> = concepts.iter().map(|&k| sigmoid_scalar(row[k])).collect();
        let sig_diff: Vec<f64> = concepts
            .iter()
            .map(|&k| sigmoid_scalar(self.difficulty.value.get(e, k)))
            .collect();
        let x: Vec<f64> = sig_prof
            .iter()
            .zip(&sig_diff)
            .map(|(a, b)| (a - b) * disc)
            .collect();

        let w1 = &self.hidden.w.value;
        let mut z = self.hidden.b.value.row(0).to_vec();
        for (&k, &xk) in concepts.iter().zip(&x) {
            for (zh, w) in z.iter_mut().zip(w1.row(k)) {
                *zh += xk * w;
            }
        }
        let act: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
        let w2 = &self.output.w.value;
        let logit = self.output.b.value.get(0, 0)
            + act
                .iter()
                .enumerate()
                .map(|(h, a)| a * w2.get(h, 0))
                .sum::<f64>();
        Trace {
            concepts,
            sig_prof,
            sig_diff,
            x,
            act,
            p: sigmoid_scalar(logit),
        }
    }

    /// Gradients of the logit w.r.t. the hidden pre-activations and the
    /// covered inputs `x_k`, scaled by `dlogit`.
    fn input_grads(&self, trace: &Trace, dlogit: f64) -> (Vec<f64>, Vec<f64>) {
        let w2 = &self.output.w.value;
        let dz: Vec<f64> = trace
            .act
            .iter()
            .enumerate()
            .map(|(h, a)| dlogit * w2.get(h, 0) * (1.0 - a * a))
            .collect();
        let dx = trace
            .concepts
            .iter()
            .map(|&k| {
                self.hidden
                    .w
                    .value
                    .row(k)
                    .iter()
                    .zip(&dz)
                    .map(|(w, d)| w * d)
                    .sum()
            })
            .collect();
        (dz, dx)
    }

    /// Proficiency-logit gradient aligned with `trace.concepts`.
    fn proficiency_grads(&self, trace: &Trace, e: usize, dx: &[f64]) -> Vec<f64> {
        let disc = self.discrimination.value.get(e, 0);
        dx.iter()
            .zip(&trace.sig_prof)
            .map(|(d, sp)| d * disc * sp * (1.0 - sp))
            .collect()
    }

    /// Accumulates every parameter grad for one prediction.
    fn accumulate(&mut self, trace: &Trace, u: usize, e: usize, dlogit: f64) {
        let (dz, dx) = self.input_grads(trace, dlogit);
        let dprof = self.proficiency_grads(trace, e, &dx);
        let disc = self.discrimination.value.get(e, 0);
        let mut ddisc = 0.0;
        for (i, &k) in trace.concepts.iter().enumerate() {
            let (sp, sd) = (trace.sig_prof[i], trace.sig_diff[i]);
            ddisc += dx[i] * (sp - sd);
            let g = self.difficulty.grad.get(e, k) - dx[i] * disc * sd * (1.0 - sd);
            self.difficulty.grad.set(e, k, g);
            for (gw, d) in self.hidden.w.grad.row_mut(k).iter_mut().zip(&dz) {
                *gw += trace.x[i] * d;
            }
            let g = self.proficiency.grad.get(u, k) + dprof[i];
            self.proficiency.grad.set(u, k, g);
        }
        let g = self.discrimination.grad.get(e, 0) + ddisc;
        self.discrimination.grad.set(e, 0, g);
        for (gb, d) in self.hidden.b.grad.row_mut(0).iter_mut().zip(&dz) {
            *gb += d;
        }
        for (h, a) in trace.act.iter().enumerate() {
            let g = self.output.w.grad.get(h, 0) + dlogit * a;
            self.output.w.grad.set(h, 0, g);
        }
        let g = self.output.b.grad.get(0, 0) + dlogit;
        self.output.b.grad.set(0, 0, g);
    }

    /// `p(u, e)` in (0, 1).
    pub fn predict(&self, u: StudentId, e: ExerciseId) -> Result<f64> {
        self.check_student(u)?;
        self.check_exercise(e)?;
        Ok(self.trace(self.proficiency.value.row(u.0), e.0).p)
    }

    /// Prediction for an arbitrary proficiency row (a session clone).
    pub fn predict_with(&self, row: &[f64], e: ExerciseId) -> Result<f64> {
        self.check_exercise(e)?;
        Ok(self.trace(row, e.0).p)
    }

    /// Mean prediction over the exercises of `c`.
    pub fn mastery_with(&self, row: &[f64], c: ConceptId) -> Result<f64> {
        let exercises = self.by_concept.get(c.0).ok_or(Error::UnknownId {
            kind: "concept",
            id: c.0,
        })?;
        if exercises.is_empty() {
            return Err(Error::NoExercises(c.0));
        }
        Ok(exercises.iter().map(|&e| self.trace(row, e).p).sum::<f64>() / exercises.len() as f64)
    }

    pub fn mastery(&self, u: StudentId, c: ConceptId) -> Result<f64> {
        self.check_student(u)?;
        self.mastery_with(self.proficiency.value.row(u.0), c)
    }

    /// Gradient of `log p(row, e)` with respect to the proficiency row.
    pub fn log_prob_grad(&self, row: &[f64], e: ExerciseId) -> Result<(f64, Vec<f64>)> {
        self.check_exercise(e)?;
        let trace = self.trace(row, e.0);
        // d log p / d logit = 1 - p
        let (_, dx) = self.input_grads(&trace, 1.0 - trace.p);
        let mut full = vec![0.0; row.len()];
        for (&k, v) in trace
            .concepts
            .iter()
            .zip(self.proficiency_grads(&trace, e.0, &dx))
        {
            full[k] = v;
        }
        Ok((trace.p, full))
    }

    /// Mean binary cross-entropy over `(student, exercise, label)` records,
    /// accumulating parameter grads.
    pub fn bce_loss_and_grad(&mut self, records: &[(StudentId, ExerciseId, f64)]) -> f64 {
        let n = records.len().max(1) as f64;
        let mut loss = 0.0;
        for &(u, e, y) in records {
            let trace = self.trace(self.proficiency.value.row(u.0), e.0);
            let p = trace.p.clamp(1e-12, 1.0 - 1e-12);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            self.accumulate(&trace, u.0, e.0, (trace.p - y) / n);
        }
        loss / n
    }

    pub fn bce_loss(&self, records: &[(StudentId, ExerciseId, f64)]) -> f64 {
        let n = records.len().max(1) as f64;
        records
            .iter()
            .map(|&(u, e, y)| {
                let p = self
                    .trace(self.proficiency.value.row(u.0), e.0)
                    .p
                    .clamp(1e-12, 1.0 - 1e-12);
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / n
    }

    /// Clamps the interaction weights and discriminations to be
    /// non-negative.
    pub fn clamp_monotone(&mut self) {
        for w in [
            &mut self.hidden.w.value,
            &mut self.output.w.value,
            &mut self.discrimination.value,
        ] {
            w.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
        }
    }

    /// Binary cross-entropy training on the observed answers, keeping the
    /// parameters with the lowest held-out loss.
    pub fn fit(graph: &CognitiveGraph, cfg: &CdTrainConfig) -> Result<CdFit> {
        if graph.q.is_empty() {
            return Err(Error::EmptyInteractions);
        }
        if !(0.0..1.0).contains(&cfg.validation_fraction) {
            return Err(Error::Config(
                "validation_fraction must lie in [0, 1)".into(),
            ));
        }
        let mut model = CdModel::init(graph, cfg.hidden, cfg.seed);
        let mut records: Vec<(StudentId, ExerciseId, f64)> = graph
            .q
            .entries()
            .map(|(u, e, f)| (u, e, if f.is_correct() { 1.0 } else { 0.0 }))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6364_6669_74);
        let n_val = (records.len() as f64 * cfg.validation_fraction).round() as usize;
        let held_out = if n_val > 0 {
            records.shuffle(&mut rng);
            records.split_off(records.len() - n_val)
        } else {
            Vec::new()
        };
        let mut adam = Adam::new(AdamConfig::new(cfg.learning_rate, cfg.l2));
        let mut order: Vec<usize> = (0..records.len()).collect();
        let mut loss_curve = vec![model.bce_loss(&records)];
        let mut validation_curve = Vec::new();
        let mut best = None;
        if !held_out.is_empty() {
            validation_curve.push(model.bce_loss(&held_out));
            best = Some((validation_curve[0], 0, model.clone()));
        }
        let bs = cfg.batch_size.max(1);
        let mut batch = Vec::with_capacity(bs);
        for epoch in 1..=cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(bs) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| records[i]));
                model.zero_grad();
                model.bce_loss_and_grad(&batch);
                adam.step(&mut model.params_mut());
                model.clamp_monotone();
            }
            loss_curve.push(model.bce_loss(&records));
            if let Some((best_loss, best_epoch, best_model)) = best.as_mut() {
                let v = model.bce_loss(&held_out);
                validation_curve.push(v);
                if v < *best_loss {
                    *best_loss = v;
                    *best_epoch = epoch;
                    *best_model = model.clone();
                } else if epoch - *best_epoch >= cfg.patience {
                    break;
                }
            }
        }
        let (model, best_epoch) = match best {
            Some((_, epoch, m)) => (m, epoch),
            None => (model, loss_curve.len() - 1),
        };
        Ok(CdFit {
            model,
            loss_curve,
            validation_curve,
            best_epoch,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Parameterized::to_checkpoint(self);
        let covers: Vec<Vec<usize>> = self.covers.clone();
        ckpt.meta = serde_json::json!({ "kind": "cd", "covers": covers });
        ckpt
    }

    /// Restores a model; the coverage mask comes from `graph`.
    pub fn from_checkpoint(graph: &CognitiveGraph, ckpt: &Checkpoint) -> Result<Self> {
        let hidden = ckpt
            .get("hidden.w")
            .ok_or_else(|| Error::Checkpoint("missing tensor hidden.w".into()))?
            .value
            .cols();
        let mut model = CdModel::init(graph, hidden, 0);
        model.load_checkpoint(ckpt)?;
        Ok(model)
    }
}

impl Parameterized for CdModel {
    fn params(&self) -> Vec<&Param> {
        vec![
            &self.proficiency,
            &self.difficulty,
            &self.discrimination,
            &self.hidden.w,
            &self.hidden.b,
            &self.output.w,
            &self.output.b,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.proficiency,
            &mut self.difficulty,
            &mut self.discrimination,
            &mut self.hidden.w,
            &mut self.hidden.b,
            &mut self.output.w,
            &mut self.output.b,
        ]
    }

    fn param_names(&self) -> Vec<String> {
        [
            "proficiency",
            "difficulty",
            "discrimination",
            "hidden.w",
            "hidden.b",
            "output.w",
            "output.b",
        ]
        .map(String::from)
        .to_vec()
    }
}
