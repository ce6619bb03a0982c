use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::graphdata::{CognitiveGraph, ConceptId, EntityCatalog, ExerciseId, Feedback, StudentId};
use crate::simulator::{CdModel, Tier};
use crate::tensornet::sigmoid_scalar;
use crate::{Error, Result};

/// Students with fewer answer records are dropped.
pub const MIN_RECORDS: usize = 15;

pub const INTERACTIONS_FILE: &str = "interactions.jsonl";
pub const EXERCISE_CONCEPT_FILE: &str = "exercise_concept.csv";
pub const PREREQUISITE_FILE: &str = "prerequisites.csv";

/// Generator settings for a synthetic world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetSpec {
    pub students: usize,
    pub concepts: usize,
    pub exercises: usize,
    /// Probability of an edge between two concepts at most `edge_window`
    /// apart in the hidden topological order.
    pub edge_density: f64,
    pub edge_window: usize,
    /// Chance that an exercise also covers one direct prerequisite of its
    /// main concept.
    pub secondary_prob: f64,
    /// Per-student record counts are uniform in this range.
    pub records_min: usize,
    pub records_max: usize,
    /// Item discrimination is uniform in this range.
    pub discrimination_lo: f64,
    pub discrimination_hi: f64,
    /// Weight of the mean prerequisite ability in a concept's ability.
    pub prerequisite_weight: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            students: 200,
            concepts: 30,
            exercises: 150,
            edge_density: 0.3,
            edge_window: 6,
            secondary_prob: 0.7,
            records_min: 10,
            records_max: 80,
            discrimination_lo: 1.0,
            discrimination_hi: 3.0,
            prerequisite_weight: 0.5,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InfeasibleSpec(m.into()));
        if self.students == 0 || self.concepts == 0 || self.exercises == 0 {
            return bad("counts must be at least 1");
        }
        if self.exercises < self.concepts {
            return bad("every concept needs at least one exercise");
        }
        if self.records_min > self.records_max {
            return bad("records_min exceeds records_max");
        }
        if self.records_max.min(self.exercises) < MIN_RECORDS {
            return bad("no student could reach the minimum record count");
        }
        if !(0.0..=1.0).contains(&self.edge_density) || !(0.0..=1.0).contains(&self.secondary_prob)
        {
            return bad("probabilities must lie in [0, 1]");
        }
        if !(self.discrimination_lo > 0.0 && self.discrimination_lo <= self.discrimination_hi) {
            return bad("discrimination range must be positive and ordered");
        }
        Ok(())
    }
}

/// Random prerequisite DAG, exercise coverage and answer logs drawn from a
/// planted item-response model.
pub fn synth_dataset(spec: &DatasetSpec) -> Result<CognitiveGraph> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let nc = spec.concepts;

    // Hidden topological order; edges only point forward in it.
    let mut order: Vec<usize> = (0..nc).collect();
    order.shuffle(&mut rng);
    let mut edges = Vec::new();
    let mut preds = vec![Vec::new(); nc];
    for j in 0..nc {
        for i in j.saturating_sub(spec.edge_window)..j {
            if rng.gen_bool(spec.edge_density) {
                edges.push((ConceptId(order[i]), ConceptId(order[j])));
                preds[order[j]].push(order[i]);
            }
        }
    }

    let mut main: Vec<usize> = (0..nc).collect();
    main.extend((nc..spec.exercises).map(|_| rng.gen_range(0..nc)));
    main.shuffle(&mut rng);
    let mut covers = Vec::new();
    let mut covered: Vec<Vec<usize>> = Vec::with_capacity(spec.exercises);
    for (e, &c) in main.iter().enumerate() {
        let mut cs = vec![c];
        if !preds[c].is_empty() && rng.gen_bool(spec.secondary_prob) {
            cs.push(*preds[c].choose(&mut rng).expect("non-empty"));
        }
        for &k in &cs {
            covers.push((ExerciseId(e), ConceptId(k)));
        }
        covered.push(cs);
    }
    let difficulty: Vec<f64> = (0..spec.exercises)
        .map(|_| normal.sample(&mut rng))
        .collect();
    let discrimination: Vec<f64> = (0..spec.exercises)
        .map(|_| rng.gen_range(spec.discrimination_lo..=spec.discrimination_hi))
        .collect();

    let mut interactions = Vec::new();
    let mut next_student = 0;
    for _ in 0..spec.students {
        let general = normal.sample(&mut rng);
        let mut ability = vec![0.0; nc];
        for &c in &order {
            let inherited = if preds[c].is_empty() {
                0.0
            } else {
                preds[c].iter().map(|&p| ability[p]).sum::<f64>() / preds[c].len() as f64
            };
            ability[c] =
                general + 0.7 * normal.sample(&mut rng) + spec.prerequisite_weight * inherited;
        }
        let count = rng
            .gen_range(spec.records_min..=spec.records_max)
            .min(spec.exercises);
        let picked = rand::seq::index::sample(&mut rng, spec.exercises, count);
        let mut records = Vec::with_capacity(count);
        for e in picked.iter() {
            let theta =
                covered[e].iter().map(|&k| ability[k]).sum::<f64>() / covered[e].len() as f64;
            let p = sigmoid_scalar(discrimination[e] * (theta - difficulty[e]));
            records.push((ExerciseId(e), Feedback::from_correct(rng.gen_bool(p))));
        }
        if records.len() < MIN_RECORDS {
            continue;
        }
        let s = StudentId(next_student);
        next_student += 1;
        interactions.extend(records.into_iter().map(|(e, f)| (s, e, f)));
    }
    if next_student == 0 {
        return Err(Error::InfeasibleSpec("every student was pruned".into()));
    }
    let catalog = EntityCatalog::new(next_student, spec.exercises, nc)?;
    CognitiveGraph::new(catalog, interactions, covers, edges)
}

/// A (student, target concept) pair with its difficulty tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sample {
    pub student: StudentId,
    pub concept: ConceptId,
    pub tier: Tier,
}

impl Sample {
    pub fn pair(&self) -> (StudentId, ConceptId) {
        (self.student, self.concept)
    }
}

/// Graph plus disjoint train and test samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub graph: CognitiveGraph,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Every (student, concept) pair whose initial mastery falls in a tier.
pub fn tiered_samples(graph: &CognitiveGraph, model: &CdModel) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for u in graph.catalog.students() {
        for c in graph.catalog.concepts() {
            if graph.o.exercises_of(c).is_empty() {
                continue;
            }
            let tier = Tier::of_mastery(model.mastery(u, c)?);
            if tier != Tier::Excluded {
                out.push(Sample {
                    student: u,
                    concept: c,
                    tier,
                });
            }
        }
    }
    Ok(out)
}

impl DatasetBundle {
    /// Tiers every pair with `model`, shuffles, and holds out
    /// `test_fraction` of them.
    pub fn split(
        graph: CognitiveGraph,
        model: &CdModel,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&test_fraction) {
            return Err(Error::Config("test_fraction must lie in [0, 1]".into()));
        }
        let mut all = tiered_samples(&graph, model)?;
        all.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (all.len() as f64 * test_fraction).round() as usize;
        let train = all.split_off(n_test);
        Ok(DatasetBundle {
            graph,
            train,
            test: all,
        })
    }

    pub fn train_pairs(&self) -> Vec<(StudentId, ConceptId)> {
        self.train.iter().map(Sample::pair).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct InteractionLine {
    student: usize,
    exercise: usize,
    correct: bool,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Writes the three dataset files into `dir`, creating it if needed.
pub fn save_dataset(graph: &CognitiveGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(INTERACTIONS_FILE);
    let mut f = create(&path)?;
    for (s, e, fb) in graph.q.entries() {
        let line = InteractionLine {
            student: s.0,
            exercise: e.0,
            correct: fb.is_correct(),
        };
        serde_json::to_writer(&mut f, &line)?;
        f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    f.flush().map_err(|e| Error::io(&path, e))?;

    let write_pairs = |name: &str, header: [&str; 2], rows: Vec<(usize, usize)>| -> Result<()> {
        let path = dir.join(name);
        let mut w = csv::Writer::from_writer(create(&path)?);
        let err = |e: csv::Error| Error::io(&path, e.into());
        w.write_record(header).map_err(err)?;
        for (a, b) in rows {
            w.write_record([a.to_string(), b.to_string()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    };
    write_pairs(
        EXERCISE_CONCEPT_FILE,
        ["exercise_id", "concept_id"],
        graph.o.entries().map(|(e, c)| (e.0, c.0)).collect(),
    )?;
    write_pairs(
        PREREQUISITE_FILE,
        ["prereq_id", "concept_id"],
        graph.p.edges().map(|(a, b)| (a.0, b.0)).collect(),
    )
}

/// `(line, a, b)` rows of a two-column integer CSV with a header.
fn read_pairs(path: &Path) -> Result<Vec<(usize, usize, usize)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if rec.len() != 2 {
            return Err(parse_err(format!("expected 2 fields, found {}", rec.len())));
        }
        let num = |i: usize| {
            rec[i]
                .parse::<usize>()
                .map_err(|e| parse_err(format!("field {}: {e}", i + 1)))
        };
        out.push((line, num(0)?, num(1)?));
    }
    Ok(out)
}

/// Reads and validates the three dataset files in `dir`.
///
/// Exercise and concept counts come from the coverage file; ids used
/// elsewhere must exist there.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<CognitiveGraph> {
    let dir = dir.as_ref();
    let map_path = dir.join(EXERCISE_CONCEPT_FILE);
    let covers = read_pairs(&map_path)?;
    let exercises = covers.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let concepts = covers.iter().map(|r| r.2 + 1).max().unwrap_or(0);
    let mut seen: BTreeSet<usize> = covers.iter().map(|r| r.1).collect();
    if let Some(missing) = (0..exercises).find(|e| !seen.contains(e)) {
        return Err(Error::UncoveredExercise(missing));
    }
    seen.clear();

    let pre_path = dir.join(PREREQUISITE_FILE);
    let prereqs = read_pairs(&pre_path)?;
    for &(line, a, b) in &prereqs {
        for id in [a, b] {
            if id >= concepts {
                return Err(dangling(&pre_path, line, "concept", id));
            }
        }
    }

    let q_path = dir.join(INTERACTIONS_FILE);
    let file = File::open(&q_path).map_err(|e| Error::io(&q_path, e))?;
    let mut interactions = Vec::new();
    let mut students = 0;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let text = line.map_err(|e| Error::io(&q_path, e))?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: InteractionLine = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: q_path.clone(),
            line: line_no,
            message: e.to_string(),
        })?;
        if rec.exercise >= exercises {
            return Err(dangling(&q_path, line_no, "exercise", rec.exercise));
        }
        students = students.max(rec.student + 1);
        interactions.push((
            StudentId(rec.student),
            ExerciseId(rec.exercise),
            Feedback::from_correct(rec.correct),
        ));
    }

    let catalog = EntityCatalog::new(students, exercises, concepts)?;
    CognitiveGraph::new(
        catalog,
        interactions,
        covers
            .into_iter()
            .map(|(_, e, c)| (ExerciseId(e), ConceptId(c))),
        prereqs
            .into_iter()
            .map(|(_, a, b)| (ConceptId(a), ConceptId(b))),
    )
}

fn dangling(path: &Path, line: usize, kind: &'static str, id: usize) -> Error {
    Error::DanglingId {
        path: PathBuf::from(path),
        line,
        kind,
        id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec(seed: u64) -> DatasetSpec {
        DatasetSpec {
            students: 40,
            concepts: 8,
            exercises: 30,
            records_min: 5,
            records_max: 30,
            seed,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = synth_dataset(&small_spec(7)).unwrap();
        let b = synth_dataset(&small_spec(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, synth_dataset(&small_spec(8)).unwrap());
    }

    #[test]
    fn default_world_invariants() {
        let spec = DatasetSpec {
            seed: 7,
            ..DatasetSpec::default()
        };
        let g = synth_dataset(&spec).unwrap();
        assert_eq!(g.p.topological_order().len(), spec.concepts);
        assert!(
            g.catalog.students < spec.students,
            "some students should be pruned"
        );
        for u in g.catalog.students() {
            assert!(g.q.row(u).len() >= MIN_RECORDS);
        }
        for c in g.catalog.concepts() {
            assert!(!g.o.exercises_of(c).is_empty());
        }
        for e in g.catalog.exercises() {
            assert!(!g.o.concepts_of(e).is_empty());
        }
    }

    #[test]
    fn infeasible_specs_rejected() {
        let too_few = DatasetSpec {
            exercises: 10,
            concepts: 20,
            ..DatasetSpec::default()
        };
        assert!(matches!(
            synth_dataset(&too_few),
            Err(Error::InfeasibleSpec(_))
        ));
        let zero = DatasetSpec {
            students: 0,
            ..DatasetSpec::default()
        };
        assert!(matches!(
            synth_dataset(&zero),
            Err(Error::InfeasibleSpec(_))
        ));
    }

    #[test]
    fn save_load_round_trip() {
        let g = synth_dataset(&small_spec(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&g, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), g);
    }

    fn write(dir: &Path, q: &str, map: &str, pre: &str) {
        std::fs::write(dir.join(INTERACTIONS_FILE), q).unwrap();
        std::fs::write(dir.join(EXERCISE_CONCEPT_FILE), map).unwrap();
        std::fs::write(dir.join(PREREQUISITE_FILE), pre).unwrap();
    }

    const MAP: &str = "exercise_id,concept_id\n0,0\n1,1\n";
    const Q: &str = "{\"student\":0,\"exercise\":0,\"correct\":true}\n";

    #[test]
    fn cycle_is_reported_with_witness() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), Q, MAP, "prereq_id,concept_id\n0,1\n1,0\n");
        match load_dataset(dir.path()) {
            Err(Error::PrerequisiteCycle(c)) => {
                assert!(c.contains(&0) && c.contains(&1), "{c:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_exercise_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let q = format!("{Q}{{\"student\":1,\"exercise\":9,\"correct\":false}}\n");
        write(dir.path(), &q, MAP, "prereq_id,concept_id\n");
        match load_dataset(dir.path()) {
            Err(Error::DanglingId { line, kind, id, .. }) => {
                assert_eq!((line, kind, id), (2, "exercise", 9))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            Q,
            "exercise_id,concept_id\n0,0\n1,x\n",
            "prereq_id,concept_id\n",
        );
        match load_dataset(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        write(
            dir.path(),
            &format!("{Q}not json\n"),
            MAP,
            "prereq_id,concept_id\n",
        );
        match load_dataset(dir.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn split_is_disjoint_and_tiered() {
        let g = synth_dataset(&small_spec(5)).unwrap();
        let model = CdModel::init(&g, 8, 1);
        let b = DatasetBundle::split(g, &model, 0.25, 2).unwrap();
        let train: BTreeSet<_> = b.train.iter().map(Sample::pair).collect();
        assert!(b.test.iter().all(|s| !train.contains(&s.pair())));
        assert!(b
            .train
            .iter()
            .chain(&b.test)
            .all(|s| s.tier != Tier::Excluded));
    }
}
