//! Rule activation: which rules does an edit touch, and at which body atom.
//!
//! An edit on relation `r` matches the body atom most similar to `r`; the
//! rule fires when that similarity times the rule's support is strictly
//! above `delta`.

use serde::Serialize;

use crate::encoder::{cosine, EmbeddingVector, RelationEncoder};
use crate::kg::Relation;
use crate::memory::Edit;
use crate::rules::{Rule, RuleSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Activation {
    pub rule: Rule,
    /// Index of the rule within its set.
    pub rule_index: usize,
    /// 1-based body position.
    pub position: usize,
    pub similarity: f64,
    pub scaled: f64,
}

fn argmax(edit_vec: &EmbeddingVector, rule: &Rule, encoder: &dyn RelationEncoder) -> (usize, f64) {
    assert!(!rule.body.is_empty(), "rule body must be non-empty");
    let mut best = (1, f64::NEG_INFINITY);
    for (i, rel) in rule.body.iter().enumerate() {
        let s = cosine(&encoder.encode(rel), edit_vec).expect("encoder emits a fixed dimension");
        if s > best.1 {
            best = (i + 1, s);
        }
    }
    best
}

/// Body position (1-based) most similar to `edit_relation`; ties go to the
/// earliest atom.
pub fn best_match(edit_relation: &Relation, rule: &Rule, encoder: &dyn RelationEncoder) -> (usize, f64) {
    argmax(&encoder.encode(edit_relation), rule, encoder)
}

pub fn is_activated(edit: &Edit, rule: &Rule, delta: f64, encoder: &dyn RelationEncoder) -> Option<Activation> {
    activate(&encoder.encode(&edit.relation), rule, 0, delta, encoder)
}

fn activate(
    edit_vec: &EmbeddingVector,
    rule: &Rule,
    rule_index: usize,
    delta: f64,
    encoder: &dyn RelationEncoder,
) -> Option<Activation> {
    let (position, similarity) = argmax(edit_vec, rule, encoder);
    let scaled = similarity * rule.support;
    (scaled > delta).then(|| Activation {
        rule: rule.clone(),
        rule_index,
        position,
        similarity,
        scaled,
    })
}

/// All activations of `edit` over `rules`, in rule-set order.
pub fn activated_rules(edit: &Edit, rules: &RuleSet, delta: f64, encoder: &dyn RelationEncoder) -> Vec<Activation> {
    let v = encoder.encode(&edit.relation);
    rules
        .iter()
        .enumerate()
        .filter_map(|(i, r)| activate(&v, r, i, delta, encoder))
        .collect()
}
