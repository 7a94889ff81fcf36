//! Length-2 compositional rule mining.
//!
//! For every ordered body pair `(r1, r2)` and head `r3` the miner counts
//!
//! * body groundings: triples `(a, b, c)` with `r1(a,b) ∧ r2(b,c)`;
//! * support: the body groundings for which `r3(a,c)` also holds,
//!
//! and scores the rule by `support / body` (standard confidence). Groundings
//! are enumerated by a hash join on the shared middle entity `b`.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeBase, Relation};
use crate::rules::{Rule, RuleSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinerConfig {
    pub min_support_count: usize,
    pub min_confidence: f64,
}

impl Default for MinerConfig {
    fn default() -> Self {
        MinerConfig {
            min_support_count: 2,
            min_confidence: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfidenceError {
    #[error("only length-2 bodies are scored, got {0}")]
    UnsupportedLength(usize),
    #[error("rule body has no groundings in the knowledge base")]
    NoBodyGroundings,
}

/// Raw join counts keyed by `(r1, r2)` and `(r1, r2, r3)`.
#[derive(Debug, Default, Clone)]
pub struct JoinCounts {
    pub body: HashMap<(Relation, Relation), usize>,
    pub support: HashMap<(Relation, Relation, Relation), usize>,
}

impl JoinCounts {
    fn merge(mut self, other: JoinCounts) -> JoinCounts {
        for (k, v) in other.body {
            *self.body.entry(k).or_default() += v;
        }
        for (k, v) in other.support {
            *self.support.entry(k).or_default() += v;
        }
        self
    }
}

struct Adjacency<'a> {
    incoming: HashMap<&'a EntityId, Vec<(&'a Relation, &'a EntityId)>>,
    outgoing: HashMap<&'a EntityId, Vec<(&'a Relation, &'a EntityId)>>,
    between: HashMap<(&'a EntityId, &'a EntityId), Vec<&'a Relation>>,
}

impl<'a> Adjacency<'a> {
    fn build(kb: &'a KnowledgeBase) -> Self {
        let mut incoming: HashMap<_, Vec<_>> = HashMap::new();
        let mut outgoing: HashMap<_, Vec<_>> = HashMap::new();
        let mut between: HashMap<_, Vec<_>> = HashMap::new();
        for f in kb.facts() {
            incoming.entry(&f.object).or_default().push((&f.relation, &f.subject));
            outgoing.entry(&f.subject).or_default().push((&f.relation, &f.object));
            between.entry((&f.subject, &f.object)).or_default().push(&f.relation);
        }
        Adjacency {
            incoming,
            outgoing,
            between,
        }
    }
}

/// Counts body groundings and head-supported groundings for every
/// relation pair, joining on the middle entity.
pub fn join_counts(kb: &KnowledgeBase) -> JoinCounts {
    let adj = Adjacency::build(kb);
    let middles: Vec<&EntityId> = adj
        .incoming
        .keys()
        .filter(|b| adj.outgoing.contains_key(*b))
        .copied()
        .collect();
    middles
        .par_iter()
        .fold(JoinCounts::default, |mut acc, b| {
            let ins = &adj.incoming[b];
            let outs = &adj.outgoing[b];
            for (r1, a) in ins {
                for (r2, c) in outs {
                    *acc.body.entry(((*r1).clone(), (*r2).clone())).or_default() += 1;
                    if let Some(heads) = adj.between.get(&(*a, *c)) {
                        for r3 in heads {
                            *acc.support.entry(((*r1).clone(), (*r2).clone(), (*r3).clone())).or_default() += 1;
                        }
                    }
                }
            }
            acc
        })
        .reduce(JoinCounts::default, JoinCounts::merge)
}

/// Mines `r1 ∧ r2 → r3` rules meeting both thresholds, sorted by descending
/// confidence, then head name, then body names.
pub fn mine_rules(kb: &KnowledgeBase, cfg: &MinerConfig) -> RuleSet {
    let counts = join_counts(kb);
    rules_from_counts(&counts, cfg)
}

pub fn rules_from_counts(counts: &JoinCounts, cfg: &MinerConfig) -> RuleSet {
    let mut rules: Vec<Rule> = counts
        .support
        .iter()
        .filter_map(|((r1, r2, r3), &support)| {
            let body = counts.body[&(r1.clone(), r2.clone())];
            let confidence = support as f64 / body as f64;
            (support >= cfg.min_support_count.max(1) && confidence >= cfg.min_confidence).then(|| Rule {
                head: r3.clone(),
                body: vec![r1.clone(), r2.clone()],
                support: confidence,
            })
        })
        .collect();
    rules.sort_by(rule_order);
    RuleSet::new(rules).expect("(head, body) keys are unique")
}

fn rule_order(a: &Rule, b: &Rule) -> Ordering {
    b.support
        .total_cmp(&a.support)
        .then_with(|| a.head.cmp(&b.head))
        .then_with(|| a.body.cmp(&b.body))
}

/// Recomputes the confidence of a length-2 rule against `kb`.
pub fn rule_confidence(kb: &KnowledgeBase, rule: &Rule) -> Result<f64, ConfidenceError> {
    let [r1, r2] = rule.body.as_slice() else {
        return Err(ConfidenceError::UnsupportedLength(rule.body.len()));
    };
    let (mut body, mut support) = (0usize, 0usize);
    for (a, b) in kb.pairs(r1) {
        if let Some(cs) = kb.objects_ref(b, r2) {
            for c in cs {
                body += 1;
                if kb.objects_ref(a, &rule.head).is_some_and(|heads| heads.contains(c)) {
                    support += 1;
                }
            }
        }
    }
    if body == 0 {
        return Err(ConfidenceError::NoBodyGroundings);
    }
    Ok(support as f64 / body as f64)
}
