//! Structured multi-hop solving and the batch experiment runner.
//!
//! The solver walks the question path hop by hop, taking an edit from
//! memory when one is retrieved and asking the oracle otherwise. The
//! baseline is the same solver over the plain edit memory; the augmented
//! run first extends the memory with derived edits.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{BenchmarkInstance, Scenario};
use crate::encoder::RelationEncoder;
use crate::error::Error;
use crate::kg::{EntityId, KnowledgeBase, Relation};
use crate::memory::{Edit, EditMemory};
use crate::rules::RuleSet;
use crate::tracking::{augment, AugmentConfig, AugmentStats, CountingOracle, KbOracle, KnowledgeOracle, Source};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HopStep {
    pub relation: Relation,
    pub entity: Option<EntityId>,
    pub source: Option<Source>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prediction {
    pub id: String,
    pub answer: Option<EntityId>,
    pub hop_trace: Vec<HopStep>,
}

/// Answers `instance.question_path` from `instance.start`.
pub fn solve(instance: &BenchmarkInstance, mem: &EditMemory, oracle: &dyn KnowledgeOracle, theta: f64) -> Prediction {
    let mut cur = Some(instance.start.clone());
    let mut hop_trace = Vec::with_capacity(instance.question_path.len());
    for rel in &instance.question_path {
        let Some(subject) = cur.take() else {
            break;
        };
        let step = match mem.retrieve_forward(&subject, rel, theta) {
            Some(hit) => (Some(hit.edit.new_object.clone()), Some(Source::EditMemory)),
            None => match oracle.query_object(&subject, rel) {
                Some(o) => (Some(o), Some(Source::Oracle)),
                None => (None, None),
            },
        };
        hop_trace.push(HopStep {
            relation: rel.clone(),
            entity: step.0.clone(),
            source: step.1,
        });
        cur = step.0;
    }
    Prediction {
        id: instance.id.clone(),
        answer: cur,
        hop_trace,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub id: String,
    pub answer: EntityId,
    pub aliases: Vec<String>,
}

impl From<&BenchmarkInstance> for GoldAnswer {
    fn from(i: &BenchmarkInstance) -> Self {
        GoldAnswer {
            id: i.id.clone(),
            answer: i.gold_answer.clone(),
            aliases: i.gold_aliases.iter().cloned().collect(),
        }
    }
}

impl GoldAnswer {
    pub fn accepts(&self, answer: &EntityId) -> bool {
        *answer == self.answer || self.aliases.iter().any(|a| a == answer.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no prediction for {0}")]
    MissingPrediction(String),
    #[error("prediction for unknown id {0}")]
    UnknownId(String),
}

/// Fraction of gold ids answered correctly. Several predictions sharing an
/// id are variants of one question; the id counts as correct when any of
/// them is.
pub fn multi_hop_accuracy(preds: &[Prediction], golds: &[GoldAnswer]) -> Result<f64, MetricError> {
    let gold_by_id: HashMap<&str, &GoldAnswer> = golds.iter().map(|g| (g.id.as_str(), g)).collect();
    let mut correct: BTreeMap<&str, bool> = BTreeMap::new();
    for p in preds {
        let gold = gold_by_id
            .get(p.id.as_str())
            .ok_or_else(|| MetricError::UnknownId(p.id.clone()))?;
        let hit = p.answer.as_ref().is_some_and(|a| gold.accepts(a));
        *correct.entry(gold.id.as_str()).or_default() |= hit;
    }
    if let Some(g) = gold_by_id.keys().find(|id| !correct.contains_key(*id)) {
        return Err(MetricError::MissingPrediction(g.to_string()));
    }
    if correct.is_empty() {
        return Ok(0.0);
    }
    Ok(correct.values().filter(|c| **c).count() as f64 / correct.len() as f64)
}

/// How many instances share one edit memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Fixed(usize),
    All,
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Fixed(k) => write!(f, "{k}"),
            BatchSize::All => f.write_str("all"),
        }
    }
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(BatchSize::All);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(BatchSize::Fixed(k)),
            _ => Err(Error::Invalid(format!(
                "batch size must be a positive integer or \"all\", got {s:?}"
            ))),
        }
    }
}

/// Splits instance indexes into batches of at most `k`. Instances are
/// grouped by hop count, shuffled within each group, and dealt round-robin
/// so every batch gets a similar hop mix.
pub fn stratified_batches(instances: &[BenchmarkInstance], batch: BatchSize, seed: u64) -> Vec<Vec<usize>> {
    let n = instances.len();
    if n == 0 {
        return Vec::new();
    }
    let n_batches = match batch {
        BatchSize::All => 1,
        BatchSize::Fixed(k) => n.div_ceil(k),
    };
    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        strata.entry(inst.hops).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order = Vec::with_capacity(n);
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        order.extend_from_slice(members);
    }
    let mut batches = vec![Vec::new(); n_batches];
    for (pos, idx) in order.into_iter().enumerate() {
        batches[pos % n_batches].push(idx);
    }
    batches
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub batch: BatchSize,
    pub delta: f64,
    pub theta: f64,
    pub augmented: bool,
    pub fixpoint: bool,
    pub seed: u64,
    pub record_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            batch: BatchSize::Fixed(1),
            delta: 0.8,
            theta: 0.7,
            augmented: true,
            fixpoint: false,
            seed: 0,
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Setting {
    pub batch: String,
    pub delta: f64,
    pub theta: f64,
    pub augmented: bool,
    pub fixpoint: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Accuracy {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

impl Accuracy {
    fn add(&mut self, ok: bool) {
        self.total += 1;
        self.correct += usize::from(ok);
        self.accuracy = self.correct as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub setting: Setting,
    pub overall_accuracy: f64,
    pub per_scenario: BTreeMap<Scenario, Accuracy>,
    pub per_hop: BTreeMap<usize, Accuracy>,
    pub memory_growth_ratio: f64,
    pub original_edits: usize,
    pub memory_edits: usize,
    pub augment: AugmentStats,
    pub oracle_calls: usize,
    /// Only filled when timing was requested, so reports stay reproducible.
    pub wall_time_secs: Option<f64>,
}

fn merge_stats(total: &mut AugmentStats, s: &AugmentStats) {
    total.original_edits += s.original_edits;
    total.derived_edits += s.derived_edits;
    total.total_edits += s.total_edits;
    total.activations += s.activations;
    total.oracle_misses += s.oracle_misses;
    total.ambiguous_inverses += s.ambiguous_inverses;
    total.empty += s.empty;
    total.duplicates += s.duplicates;
    total.conflicts += s.conflicts;
    total.iterations = total.iterations.max(s.iterations);
}

/// Runs one setting over `dataset` and returns the report together with
/// the predictions, ordered as the dataset.
pub fn run_experiment(
    dataset: &[BenchmarkInstance],
    kb: &KnowledgeBase,
    rules: &RuleSet,
    encoder: Arc<dyn RelationEncoder>,
    cfg: &ExperimentConfig,
) -> (ExperimentReport, Vec<Prediction>) {
    let started = Instant::now();
    let oracle = CountingOracle::new(KbOracle::new(kb, rules));
    let aliases = kb.alias_table();
    let batches = stratified_batches(dataset, cfg.batch, cfg.seed);
    let aug_cfg = AugmentConfig {
        delta: cfg.delta,
        theta: cfg.theta,
        fixpoint: cfg.fixpoint,
        ..Default::default()
    };

    type BatchResult = (Vec<(usize, Prediction)>, AugmentStats, usize);
    let results: Vec<BatchResult> = batches
        .par_iter()
        .map(|batch| {
            let edits: Vec<Edit> = batch.iter().flat_map(|&i| dataset[i].edits.iter().cloned()).collect();
            let (memory, stats) = if cfg.augmented {
                let aug = augment(&edits, rules, &oracle, encoder.clone(), aliases.clone(), &aug_cfg);
                (aug.memory, aug.stats)
            } else {
                let mem = EditMemory::with_edits(encoder.clone(), aliases.clone(), edits.iter().cloned());
                let stats = AugmentStats {
                    original_edits: edits.len(),
                    total_edits: edits.len(),
                    ..Default::default()
                };
                (mem, stats)
            };
            let preds = batch
                .par_iter()
                .map(|&i| (i, solve(&dataset[i], &memory, &oracle, cfg.theta)))
                .collect();
            (preds, stats, memory.len())
        })
        .collect();

    let mut preds: Vec<Option<Prediction>> = vec![None; dataset.len()];
    let mut stats = AugmentStats::default();
    let mut memory_edits = 0;
    for (batch_preds, s, size) in results {
        for (i, p) in batch_preds {
            preds[i] = Some(p);
        }
        merge_stats(&mut stats, &s);
        memory_edits += size;
    }
    let preds: Vec<Prediction> = preds.into_iter().map(|p| p.expect("every instance is in a batch")).collect();

    let mut overall = Accuracy::default();
    let mut per_scenario: BTreeMap<Scenario, Accuracy> = BTreeMap::new();
    let mut per_hop: BTreeMap<usize, Accuracy> = BTreeMap::new();
    for (inst, pred) in dataset.iter().zip(&preds) {
        let ok = pred.answer.as_ref().is_some_and(|a| GoldAnswer::from(inst).accepts(a));
        overall.add(ok);
        per_scenario.entry(inst.scenario).or_default().add(ok);
        per_hop.entry(inst.hops).or_default().add(ok);
    }
    stats.growth_ratio = if stats.original_edits == 0 {
        1.0
    } else {
        memory_edits as f64 / stats.original_edits as f64
    };
    let report = ExperimentReport {
        setting: Setting {
            batch: cfg.batch.to_string(),
            delta: cfg.delta,
            theta: cfg.theta,
            augmented: cfg.augmented,
            fixpoint: cfg.fixpoint,
            seed: cfg.seed,
        },
        overall_accuracy: overall.accuracy,
        per_scenario,
        per_hop,
        memory_growth_ratio: stats.growth_ratio,
        original_edits: stats.original_edits,
        memory_edits,
        augment: stats,
        oracle_calls: oracle.total(),
        wall_time_secs: cfg.record_time.then(|| started.elapsed().as_secs_f64()),
    };
    (report, preds)
}

/// Flat CSV rendering of reports, one row each.
pub fn reports_to_csv(reports: &[ExperimentReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["batch", "delta", "theta", "augmented", "fixpoint", "seed", "overall_accuracy"]
        .map(String::from)
        .to_vec();
    header.extend(Scenario::ALL.iter().map(|s| format!("{}_accuracy", s.name())));
    header.extend(["memory_growth_ratio", "oracle_calls", "ambiguous_inverses", "oracle_misses"].map(String::from));
    w.write_record(&header).expect("in-memory csv");
    for r in reports {
        let mut row = vec![
            r.setting.batch.clone(),
            r.setting.delta.to_string(),
            r.setting.theta.to_string(),
            r.setting.augmented.to_string(),
            r.setting.fixpoint.to_string(),
            r.setting.seed.to_string(),
            r.overall_accuracy.to_string(),
        ];
        row.extend(
            Scenario::ALL
                .iter()
                .map(|s| r.per_scenario.get(s).map_or_else(String::new, |a| a.accuracy.to_string())),
        );
        row.extend([
            r.memory_growth_ratio.to_string(),
            r.oracle_calls.to_string(),
            r.augment.ambiguous_inverses.to_string(),
            r.augment.oracle_misses.to_string(),
        ]);
        w.write_record(&row).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub delta: f64,
    pub accuracy: f64,
    pub baseline_accuracy: f64,
    pub growth_ratio: f64,
}

/// One augmented run per `delta`, plus a single un-augmented baseline.
pub fn sweep_delta(
    dataset: &[BenchmarkInstance],
    kb: &KnowledgeBase,
    rules: &RuleSet,
    encoder: Arc<dyn RelationEncoder>,
    deltas: &[f64],
    cfg: &ExperimentConfig,
) -> Vec<SweepRow> {
    let base_cfg = ExperimentConfig {
        augmented: false,
        ..*cfg
    };
    let (baseline, _) = run_experiment(dataset, kb, rules, encoder.clone(), &base_cfg);
    deltas
        .iter()
        .map(|&delta| {
            let run_cfg = ExperimentConfig {
                augmented: true,
                delta,
                ..*cfg
            };
            let (report, _) = run_experiment(dataset, kb, rules, encoder.clone(), &run_cfg);
            SweepRow {
                delta,
                accuracy: report.overall_accuracy,
                baseline_accuracy: baseline.overall_accuracy,
                growth_ratio: report.memory_growth_ratio,
            }
        })
        .collect()
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}
