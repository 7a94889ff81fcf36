//! Correlated-knowledge inference.
//!
//! An activated rule is instantiated at the edited position `k` by binding
//! `z_{k-1}` to the edit's subject and `z_k` to its new object. The rest of
//! the chain is resolved outward: forward to `z_n`, backward to `z_0`. Each
//! step asks the edit memory first and falls back to the knowledge oracle.
//! The resulting head fact becomes a null-placeholder edit.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::activation::{activated_rules, Activation};
use crate::encoder::RelationEncoder;
use crate::kg::{AliasTable, EntityId, Fact, KnowledgeBase, Relation};
use crate::memory::{Edit, EditMemory};
use crate::rules::{Rule, RuleSet};

/// World knowledge consulted when the edit memory has nothing to say.
pub trait KnowledgeOracle: Send + Sync {
    fn query_object(&self, subject: &EntityId, relation: &Relation) -> Option<EntityId>;

    fn query_subjects(&self, relation: &Relation, object: &EntityId) -> BTreeSet<EntityId>;
}

impl<T: KnowledgeOracle + ?Sized> KnowledgeOracle for &T {
    fn query_object(&self, subject: &EntityId, relation: &Relation) -> Option<EntityId> {
        (**self).query_object(subject, relation)
    }

    fn query_subjects(&self, relation: &Relation, object: &EntityId) -> BTreeSet<EntityId> {
        (**self).query_subjects(relation, object)
    }
}

impl<T: KnowledgeOracle + ?Sized> KnowledgeOracle for Arc<T> {
    fn query_object(&self, subject: &EntityId, relation: &Relation) -> Option<EntityId> {
        (**self).query_object(subject, relation)
    }

    fn query_subjects(&self, relation: &Relation, object: &EntityId) -> BTreeSet<EntityId> {
        (**self).query_subjects(relation, object)
    }
}

/// Answers from the stored facts plus one level of rule closure. When
/// several objects qualify the lexicographically smallest is returned.
#[derive(Debug, Clone, Copy)]
pub struct KbOracle<'a> {
    kb: &'a KnowledgeBase,
    rules: &'a RuleSet,
}

impl<'a> KbOracle<'a> {
    pub fn new(kb: &'a KnowledgeBase, rules: &'a RuleSet) -> Self {
        KbOracle { kb, rules }
    }
}

impl KnowledgeOracle for KbOracle<'_> {
    fn query_object(&self, subject: &EntityId, relation: &Relation) -> Option<EntityId> {
        self.kb.derive_by_rules(self.rules, subject, relation).into_iter().next()
    }

    fn query_subjects(&self, relation: &Relation, object: &EntityId) -> BTreeSet<EntityId> {
        self.kb.derive_subjects_by_rules(self.rules, relation, object)
    }
}

/// Wraps an oracle and counts the calls made through it.
#[derive(Debug, Default)]
pub struct CountingOracle<O> {
    inner: O,
    objects: AtomicUsize,
    subjects: AtomicUsize,
}

impl<O> CountingOracle<O> {
    pub fn new(inner: O) -> Self {
        CountingOracle {
            inner,
            objects: AtomicUsize::new(0),
            subjects: AtomicUsize::new(0),
        }
    }

    pub fn object_queries(&self) -> usize {
        self.objects.load(Ordering::Relaxed)
    }

    pub fn subject_queries(&self) -> usize {
        self.subjects.load(Ordering::Relaxed)
    }

    pub fn total(&self) -> usize {
        self.object_queries() + self.subject_queries()
    }
}

impl<O: KnowledgeOracle> KnowledgeOracle for CountingOracle<O> {
    fn query_object(&self, subject: &EntityId, relation: &Relation) -> Option<EntityId> {
        self.objects.fetch_add(1, Ordering::Relaxed);
        self.inner.query_object(subject, relation)
    }

    fn query_subjects(&self, relation: &Relation, object: &EntityId) -> BTreeSet<EntityId> {
        self.subjects.fetch_add(1, Ordering::Relaxed);
        self.inner.query_subjects(relation, object)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Trigger,
    EditMemory,
    Oracle,
}

/// The entity bound to chain variable `z_position`, and how it was found.
/// `via` is the body relation of the hop that produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceStep {
    pub position: usize,
    pub entity: EntityId,
    pub via: Option<Relation>,
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedFact {
    pub fact: Fact,
    pub rule: Rule,
    pub trigger: Edit,
    pub position: usize,
    /// One step per chain variable `z_0..z_n`, in position order.
    pub trace: Vec<TraceStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrackingError {
    #[error("no answer for {relation}({subject}, ?)")]
    OracleMiss { relation: Relation, subject: EntityId },

    #[error("no subject for {relation}(?, {object})")]
    InverseMiss { relation: Relation, object: EntityId },

    #[error("{candidates} subjects for {relation}(?, {object})")]
    AmbiguousInverse {
        relation: Relation,
        object: EntityId,
        candidates: usize,
    },

    #[error("position {position} outside a body of length {len}")]
    Empty { position: usize, len: usize },
}

impl TrackingError {
    pub fn kind(&self) -> &'static str {
        match self {
            TrackingError::OracleMiss { .. } | TrackingError::InverseMiss { .. } => "oracle-miss",
            TrackingError::AmbiguousInverse { .. } => "ambiguous-inverse",
            TrackingError::Empty { .. } => "empty",
        }
    }
}

fn check_position(rule: &Rule, k: usize) -> Result<(), TrackingError> {
    if k == 0 || k > rule.body.len() {
        return Err(TrackingError::Empty {
            position: k,
            len: rule.body.len(),
        });
    }
    Ok(())
}

fn forward_steps(
    rule: &Rule,
    k: usize,
    start: &EntityId,
    mem: &EditMemory,
    oracle: &dyn KnowledgeOracle,
    theta: f64,
) -> Result<Vec<TraceStep>, TrackingError> {
    check_position(rule, k)?;
    let mut cur = start.clone();
    let mut steps = Vec::new();
    for m in k..rule.body.len() {
        let rel = &rule.body[m];
        let (next, source) = match mem.retrieve_forward(&cur, rel, theta) {
            Some(hit) => (hit.edit.new_object.clone(), Source::EditMemory),
            None => match oracle.query_object(&cur, rel) {
                Some(o) => (o, Source::Oracle),
                None => {
                    return Err(TrackingError::OracleMiss {
                        relation: rel.clone(),
                        subject: cur,
                    })
                }
            },
        };
        steps.push(TraceStep {
            position: m + 1,
            entity: next.clone(),
            via: Some(rel.clone()),
            source,
        });
        cur = next;
    }
    Ok(steps)
}

fn backward_steps(
    rule: &Rule,
    k: usize,
    end: &EntityId,
    mem: &EditMemory,
    oracle: &dyn KnowledgeOracle,
    theta: f64,
) -> Result<Vec<TraceStep>, TrackingError> {
    check_position(rule, k)?;
    let mut cur = end.clone();
    let mut steps = Vec::new();
    for j in (1..k).rev() {
        let rel = &rule.body[j - 1];
        let (prev, source) = match mem.retrieve_backward(&cur, rel, theta) {
            Some(hit) => (hit.edit.subject.clone(), Source::EditMemory),
            None => {
                let subjects = oracle.query_subjects(rel, &cur);
                match subjects.len() {
                    1 => (subjects.into_iter().next().expect("one subject"), Source::Oracle),
                    0 => {
                        return Err(TrackingError::InverseMiss {
                            relation: rel.clone(),
                            object: cur,
                        })
                    }
                    n => {
                        return Err(TrackingError::AmbiguousInverse {
                            relation: rel.clone(),
                            object: cur,
                            candidates: n,
                        })
                    }
                }
            }
        };
        steps.push(TraceStep {
            position: j - 1,
            entity: prev.clone(),
            via: Some(rel.clone()),
            source,
        });
        cur = prev;
    }
    steps.reverse();
    Ok(steps)
}

/// Resolves `z_n` starting from `start` bound to `z_k`.
pub fn forward_track(
    rule: &Rule,
    k: usize,
    start: &EntityId,
    mem: &EditMemory,
    oracle: &dyn KnowledgeOracle,
    theta: f64,
) -> Result<EntityId, TrackingError> {
    let steps = forward_steps(rule, k, start, mem, oracle, theta)?;
    Ok(steps.last().map_or_else(|| start.clone(), |s| s.entity.clone()))
}

/// Resolves `z_0` starting from `end` bound to `z_{k-1}`. Inverse lookups
/// must be unique.
pub fn back_track(
    rule: &Rule,
    k: usize,
    end: &EntityId,
    mem: &EditMemory,
    oracle: &dyn KnowledgeOracle,
    theta: f64,
) -> Result<EntityId, TrackingError> {
    let steps = backward_steps(rule, k, end, mem, oracle, theta)?;
    Ok(steps.first().map_or_else(|| end.clone(), |s| s.entity.clone()))
}

/// Instantiates `activation` with `edit` and resolves both chain ends.
pub fn infer_correlated(
    edit: &Edit,
    activation: &Activation,
    mem: &EditMemory,
    oracle: &dyn KnowledgeOracle,
    theta: f64,
) -> Result<DerivedFact, TrackingError> {
    let rule = &activation.rule;
    let k = activation.position;
    let mut trace = backward_steps(rule, k, &edit.subject, mem, oracle, theta)?;
    trace.push(TraceStep {
        position: k - 1,
        entity: edit.subject.clone(),
        via: None,
        source: Source::Trigger,
    });
    trace.push(TraceStep {
        position: k,
        entity: edit.new_object.clone(),
        via: Some(rule.body[k - 1].clone()),
        source: Source::Trigger,
    });
    trace.extend(forward_steps(rule, k, &edit.new_object, mem, oracle, theta)?);
    let fact = Fact {
        relation: rule.head.clone(),
        subject: trace[0].entity.clone(),
        object: trace[trace.len() - 1].entity.clone(),
    };
    Ok(DerivedFact {
        fact,
        rule: rule.clone(),
        trigger: edit.clone(),
        position: k,
        trace,
    })
}

/// Null-placeholder edit carrying a derived fact.
pub fn to_edit(df: &DerivedFact) -> Edit {
    Edit {
        relation: df.fact.relation.clone(),
        subject: df.fact.subject.clone(),
        old_object: None,
        new_object: df.fact.object.clone(),
    }
}

/// Re-checks every hop of a derivation: each consecutive pair must be linked
/// by the trigger edit, by a retrievable memory edit, or by the oracle.
pub fn verify_trace(df: &DerivedFact, mem: &EditMemory, oracle: &dyn KnowledgeOracle, theta: f64) -> bool {
    let n = df.rule.body.len();
    if df.trace.len() != n + 1 || df.trace.iter().enumerate().any(|(i, s)| s.position != i) {
        return false;
    }
    if df.fact.subject != df.trace[0].entity || df.fact.object != df.trace[n].entity || df.fact.relation != df.rule.head {
        return false;
    }
    (1..=n).all(|i| {
        let (a, b) = (&df.trace[i - 1].entity, &df.trace[i].entity);
        let rel = &df.rule.body[i - 1];
        if i == df.position {
            return *a == df.trigger.subject && *b == df.trigger.new_object;
        }
        let forward = i > df.position;
        let step = if forward { &df.trace[i] } else { &df.trace[i - 1] };
        match step.source {
            Source::Trigger => false,
            Source::EditMemory if forward => mem.retrieve_forward(a, rel, theta).is_some_and(|h| h.edit.new_object == *b),
            Source::EditMemory => mem.retrieve_backward(b, rel, theta).is_some_and(|h| h.edit.subject == *a),
            Source::Oracle if forward => oracle.query_object(a, rel).as_ref() == Some(b),
            Source::Oracle => oracle.query_subjects(rel, b) == BTreeSet::from([a.clone()]),
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub delta: f64,
    pub theta: f64,
    pub fixpoint: bool,
    pub max_iterations: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            delta: 0.8,
            theta: 0.7,
            fixpoint: false,
            max_iterations: 10,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AugmentStats {
    pub original_edits: usize,
    pub derived_edits: usize,
    pub total_edits: usize,
    pub growth_ratio: f64,
    pub activations: usize,
    pub oracle_misses: usize,
    pub ambiguous_inverses: usize,
    pub empty: usize,
    /// Derivations dropped because an equal edit already existed.
    pub duplicates: usize,
    /// Derived edits that disagree with an original edit on the same
    /// relation and subject.
    pub conflicts: usize,
    pub iterations: usize,
}

impl AugmentStats {
    fn record(&mut self, err: &TrackingError) {
        match err {
            TrackingError::OracleMiss { .. } | TrackingError::InverseMiss { .. } => self.oracle_misses += 1,
            TrackingError::AmbiguousInverse { .. } => self.ambiguous_inverses += 1,
            TrackingError::Empty { .. } => self.empty += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub memory: EditMemory,
    pub derived: Vec<DerivedFact>,
    pub stats: AugmentStats,
}

/// Builds the augmented memory: the original edits, in order, followed by
/// the null-placeholder edits derived from them.
///
/// All original edits are stored before any derivation runs, so tracking for
/// one edit can see every other edit of the batch. Derived edits join the
/// memory after the pass that produced them; with `fixpoint` they trigger
/// further passes until nothing new appears or `max_iterations` is reached.
pub fn augment(
    edits: &[Edit],
    rules: &RuleSet,
    oracle: &dyn KnowledgeOracle,
    encoder: Arc<dyn RelationEncoder>,
    aliases: Arc<AliasTable>,
    cfg: &AugmentConfig,
) -> Augmented {
    let mut memory = EditMemory::with_edits(encoder.clone(), aliases, edits.iter().cloned());
    let mut stats = AugmentStats {
        original_edits: edits.len(),
        ..Default::default()
    };
    let mut seen: HashSet<(Relation, EntityId, EntityId)> = edits.iter().map(Edit::key).collect();
    let mut original_objects: HashMap<(Relation, EntityId), BTreeSet<EntityId>> = HashMap::new();
    for e in edits {
        original_objects
            .entry((e.relation.clone(), e.subject.clone()))
            .or_default()
            .insert(e.new_object.clone());
    }

    let mut derived = Vec::new();
    let mut frontier: Vec<Edit> = edits.to_vec();
    while !frontier.is_empty() && stats.iterations < cfg.max_iterations.max(1) {
        stats.iterations += 1;
        let snapshot = &memory;
        let results: Vec<(usize, Vec<Result<DerivedFact, TrackingError>>)> = frontier
            .par_iter()
            .map(|e| {
                let acts = activated_rules(e, rules, cfg.delta, encoder.as_ref());
                let n = acts.len();
                (
                    n,
                    acts.iter()
                        .map(|a| infer_correlated(e, a, snapshot, oracle, cfg.theta))
                        .collect(),
                )
            })
            .collect();

        let mut next = Vec::new();
        for (n_acts, outcomes) in results {
            stats.activations += n_acts;
            for outcome in outcomes {
                let df = match outcome {
                    Ok(df) => df,
                    Err(err) => {
                        stats.record(&err);
                        continue;
                    }
                };
                let edit = to_edit(&df);
                if !seen.insert(edit.key()) {
                    stats.duplicates += 1;
                    continue;
                }
                if original_objects
                    .get(&(edit.relation.clone(), edit.subject.clone()))
                    .is_some_and(|objs| !objs.contains(&edit.new_object))
                {
                    stats.conflicts += 1;
                }
                next.push(edit);
                derived.push(df);
            }
        }
        for e in &next {
            memory.insert(e.clone());
        }
        frontier = if cfg.fixpoint { next } else { Vec::new() };
    }

    stats.derived_edits = derived.len();
    stats.total_edits = memory.len();
    stats.growth_ratio = if edits.is_empty() {
        1.0
    } else {
        memory.len() as f64 / edits.len() as f64
    };
    Augmented { memory, derived, stats }
}
