//! Counterfactual multi-hop benchmark generation.
//!
//! An instance starts from a typed relation path that contains the body of
//! a rule, walks it in the knowledge base, overwrites some body facts with
//! counterfactual edits, and finally collapses the rule body into its head.
//! The question asks along the collapsed (coarse) path; the gold answer is
//! obtained by replaying the fine path over the knowledge base with the
//! edits applied. Which body atoms carry edits sets the scenario.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::kg::{EntityId, Fact, KnowledgeBase, Relation};
use crate::memory::Edit;
use crate::rules::{Rule, RuleSet};
use crate::templates::TemplateTable;
use crate::tracking::{KbOracle, KnowledgeOracle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    NoEdit,
    LeftEdit,
    RightEdit,
    BothEdit,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::NoEdit, Scenario::LeftEdit, Scenario::RightEdit, Scenario::BothEdit];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::NoEdit => "no-edit",
            Scenario::LeftEdit => "left-edit",
            Scenario::RightEdit => "right-edit",
            Scenario::BothEdit => "both-edit",
        }
    }

    /// Edited positions within a length-2 rule body (0-based).
    pub fn body_positions(self) -> &'static [usize] {
        match self {
            Scenario::NoEdit => &[],
            Scenario::LeftEdit => &[0],
            Scenario::RightEdit => &[1],
            Scenario::BothEdit => &[0, 1],
        }
    }

    pub fn from_body_positions(positions: &BTreeSet<usize>) -> Option<Scenario> {
        Scenario::ALL
            .into_iter()
            .find(|s| s.body_positions().iter().copied().collect::<BTreeSet<_>>() == *positions)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == norm || sc.name().trim_end_matches("-edit") == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PathTemplate {
    pub relations: Vec<Relation>,
    /// Object category after each hop, when known.
    pub type_constraints: Option<Vec<String>>,
}

/// Every relation sequence of length `1..=max_hops` whose consecutive
/// relations have compatible types.
pub fn enumerate_path_templates(templates: &TemplateTable, max_hops: usize) -> Vec<PathTemplate> {
    let all: Vec<_> = templates.iter().collect();
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = (0..all.len()).map(|i| vec![i]).collect();
    for depth in 1..=max_hops {
        for seq in &layer {
            out.push(PathTemplate {
                relations: seq.iter().map(|&i| all[i].relation.clone()).collect(),
                type_constraints: Some(seq.iter().map(|&i| all[i].range.clone()).collect()),
            });
        }
        if depth == max_hops {
            break;
        }
        let mut next = Vec::new();
        for seq in &layer {
            let last = all[*seq.last().expect("non-empty")];
            for (j, t) in all.iter().enumerate() {
                if last.chains_into(t) {
                    let mut s = seq.clone();
                    s.push(j);
                    next.push(s);
                }
            }
        }
        layer = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Reject {
    #[error("no {relation} fact for {subject}")]
    DeadEnd { relation: Relation, subject: EntityId },
    #[error("{relation} has no alternative object for {subject}")]
    NoCounterfactual { relation: Relation, subject: EntityId },
    #[error("{relation} is multi-valued at {subject}")]
    MultiValued { relation: Relation, subject: EntityId },
    #[error("path revisits {0}")]
    Revisit(EntityId),
    #[error("no rule composes the path")]
    NoComposition,
    #[error("edits touch body positions {0:?}, not the requested scenario")]
    WrongScenario(BTreeSet<usize>),
    #[error("edit {0} is not on the path")]
    StrayEdit(String),
    #[error("several subjects reach {object} through {relation}")]
    AmbiguousInverse { relation: Relation, object: EntityId },
    #[error("the edits do not change the answer")]
    UnchangedAnswer,
    #[error("question path is not answerable before editing")]
    Unanswerable,
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> Option<&'a T> {
    (!items.is_empty()).then(|| &items[rng.gen_range(0..items.len())])
}

/// Walks `relations` from `start`; multi-valued hops are resolved by `rng`.
pub fn generate_knowledge_path(
    kb: &KnowledgeBase,
    relations: &[Relation],
    start: &EntityId,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Fact>, Reject> {
    let mut cur = start.clone();
    let mut out = Vec::with_capacity(relations.len());
    for rel in relations {
        let objects: Vec<EntityId> = kb.lookup_objects(&cur, rel).into_iter().collect();
        let next = pick(rng, &objects).cloned().ok_or_else(|| Reject::DeadEnd {
            relation: rel.clone(),
            subject: cur.clone(),
        })?;
        out.push(Fact {
            relation: rel.clone(),
            subject: cur,
            object: next.clone(),
        });
        cur = next;
    }
    Ok(out)
}

/// Replaces the object at each of `positions` with another member of the
/// relation's range and re-walks the rest of the path from there. Returns
/// the edits and the edited path.
pub fn inject_counterfactual(
    kb: &KnowledgeBase,
    path: &[Fact],
    positions: &BTreeSet<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Edit>, Vec<Fact>), Reject> {
    let mut edits = Vec::new();
    let mut out: Vec<Fact> = Vec::with_capacity(path.len());
    for (i, fact) in path.iter().enumerate() {
        let subject = out.last().map_or_else(|| fact.subject.clone(), |f| f.object.clone());
        let truth = if subject == fact.subject {
            fact.object.clone()
        } else {
            let objects: Vec<EntityId> = kb.lookup_objects(&subject, &fact.relation).into_iter().collect();
            pick(rng, &objects).cloned().ok_or_else(|| Reject::DeadEnd {
                relation: fact.relation.clone(),
                subject: subject.clone(),
            })?
        };
        let object = if positions.contains(&i) {
            let range: Vec<EntityId> = kb
                .range_of(&fact.relation)
                .into_iter()
                .filter(|o| *o != truth && *o != subject)
                .collect();
            let new = pick(rng, &range).cloned().ok_or_else(|| Reject::NoCounterfactual {
                relation: fact.relation.clone(),
                subject: subject.clone(),
            })?;
            edits.push(Edit {
                relation: fact.relation.clone(),
                subject: subject.clone(),
                old_object: Some(truth),
                new_object: new.clone(),
            });
            new
        } else {
            truth
        };
        out.push(Fact {
            relation: fact.relation.clone(),
            subject,
            object,
        });
    }
    Ok((edits, out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composition {
    pub coarse: Vec<Relation>,
    pub rule: Rule,
    pub offset: usize,
}

/// Collapses the earliest rule body found in `fine` (ties go to rule-set
/// order) into the rule head.
pub fn compose_with_rule(fine: &[Relation], rules: &RuleSet) -> Option<Composition> {
    for offset in 0..fine.len() {
        for rule in rules {
            let n = rule.body.len();
            if offset + n <= fine.len() && fine[offset..offset + n] == rule.body[..] {
                let mut coarse = fine[..offset].to_vec();
                coarse.push(rule.head.clone());
                coarse.extend_from_slice(&fine[offset + n..]);
                return Some(Composition {
                    coarse,
                    rule: rule.clone(),
                    offset,
                });
            }
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkInstance {
    pub id: String,
    pub scenario: Scenario,
    pub start: EntityId,
    pub question_path: Vec<Relation>,
    pub fine_path: Vec<Relation>,
    /// Entities visited by the fine path after editing, `start` first.
    pub fine_entities: Vec<EntityId>,
    pub rule: Rule,
    /// Index of the first body relation within `fine_path`.
    pub rule_offset: usize,
    pub edits: Vec<Edit>,
    pub gold_answer: EntityId,
    pub gold_aliases: BTreeSet<String>,
    /// Answer to the question path in the unedited knowledge base.
    pub stale_answer: Option<EntityId>,
    pub hops: usize,
    pub rendered_question: String,
}

/// Follows `relations` from `start` over the knowledge base with `edits`
/// applied. Unedited hops must have exactly one answer (rule closure
/// included). Also reports which path indexes were answered by an edit.
pub fn replay_with_edits(
    kb: &KnowledgeBase,
    rules: &RuleSet,
    start: &EntityId,
    relations: &[Relation],
    edits: &[Edit],
) -> Result<(Vec<EntityId>, BTreeSet<usize>), Reject> {
    let mut chain = vec![start.clone()];
    let mut edited = BTreeSet::new();
    for (i, rel) in relations.iter().enumerate() {
        let cur = chain.last().expect("non-empty").clone();
        let next = match edits.iter().find(|e| e.relation == *rel && e.subject == cur) {
            Some(e) => {
                edited.insert(i);
                e.new_object.clone()
            }
            None => {
                let objects = kb.derive_by_rules(rules, &cur, rel);
                match objects.len() {
                    1 => objects.into_iter().next().expect("one"),
                    0 => {
                        return Err(Reject::DeadEnd {
                            relation: rel.clone(),
                            subject: cur,
                        })
                    }
                    _ => {
                        return Err(Reject::MultiValued {
                            relation: rel.clone(),
                            subject: cur,
                        })
                    }
                }
            }
        };
        chain.push(next);
    }
    Ok((chain, edited))
}

/// Validates a candidate and fills in gold and stale answers. `id` is left
/// empty.
#[allow(clippy::too_many_arguments)]
pub fn build_instance(
    kb: &KnowledgeBase,
    rules: &RuleSet,
    templates: &TemplateTable,
    scenario: Scenario,
    start: &EntityId,
    fine_path: &[Relation],
    edits: Vec<Edit>,
    allow_ambiguous: bool,
) -> Result<BenchmarkInstance, Reject> {
    let comp = compose_with_rule(fine_path, rules).ok_or(Reject::NoComposition)?;
    let (chain, edited) = replay_with_edits(kb, rules, start, fine_path, &edits)?;
    if edited.len() != edits.len() {
        let used: HashSet<usize> = edited.iter().copied().collect();
        let stray = edits
            .iter()
            .find(|e| !chain.iter().enumerate().any(|(i, s)| used.contains(&i) && *s == e.subject))
            .unwrap_or(&edits[0]);
        return Err(Reject::StrayEdit(stray.to_string()));
    }
    let body: BTreeSet<usize> = edited.iter().map(|i| i.wrapping_sub(comp.offset)).collect();
    if body.iter().any(|&p| p >= comp.rule.body.len()) || Scenario::from_body_positions(&body) != Some(scenario) {
        return Err(Reject::WrongScenario(body));
    }
    let mut seen = HashSet::new();
    for e in &chain {
        if !seen.insert(e) {
            return Err(Reject::Revisit(e.clone()));
        }
    }

    // The unedited path must be well defined too, both for the baseline
    // answer and for back tracking through the first body atom.
    let (original, _) = replay_with_edits(kb, rules, start, fine_path, &[])?;
    let mut seen = HashSet::new();
    for e in &original {
        if !seen.insert(e) {
            return Err(Reject::Revisit(e.clone()));
        }
    }
    let oracle = KbOracle::new(kb, rules);
    let head_subject = &original[comp.offset];
    if kb.derive_by_rules(rules, head_subject, &comp.rule.head).len() != 1 {
        return Err(Reject::MultiValued {
            relation: comp.rule.head.clone(),
            subject: head_subject.clone(),
        });
    }
    let stale = comp
        .coarse
        .iter()
        .try_fold(start.clone(), |cur, rel| oracle.query_object(&cur, rel));

    let gold = chain.last().expect("non-empty").clone();
    let aliases = kb.alias_expand(&gold);
    match (&stale, scenario) {
        (Some(s), Scenario::NoEdit) if *s == gold => {}
        (_, Scenario::NoEdit) => return Err(Reject::Unanswerable),
        (Some(s), _) if aliases.contains(s.as_str()) => return Err(Reject::UnchangedAnswer),
        _ => {}
    }
    if scenario == Scenario::RightEdit && !allow_ambiguous {
        let first = &comp.rule.body[0];
        let middle = &original[comp.offset + 1];
        if kb.derive_subjects_by_rules(rules, first, middle).len() != 1 {
            return Err(Reject::AmbiguousInverse {
                relation: first.clone(),
                object: middle.clone(),
            });
        }
    }

    let mut gold_aliases = aliases;
    gold_aliases.remove(gold.as_str());
    Ok(BenchmarkInstance {
        id: String::new(),
        scenario,
        start: start.clone(),
        rendered_question: templates.render_question(start.as_str(), &comp.coarse),
        hops: comp.coarse.len(),
        question_path: comp.coarse,
        fine_path: fine_path.to_vec(),
        fine_entities: chain,
        rule: comp.rule,
        rule_offset: comp.offset,
        edits,
        gold_answer: gold,
        gold_aliases,
        stale_answer: stale,
    })
}

/// Body positions of `instance.rule` that its edits touch, recomputed from
/// the fine path.
pub fn edited_body_positions(kb: &KnowledgeBase, rules: &RuleSet, instance: &BenchmarkInstance) -> Option<BTreeSet<usize>> {
    let (_, edited) = replay_with_edits(kb, rules, &instance.start, &instance.fine_path, &instance.edits).ok()?;
    Some(edited.into_iter().map(|i| i - instance.rule_offset).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioCounts(pub BTreeMap<Scenario, usize>);

impl ScenarioCounts {
    pub fn uniform(n: usize) -> Self {
        ScenarioCounts(Scenario::ALL.into_iter().map(|s| (s, n)).collect())
    }

    pub fn get(&self, s: Scenario) -> usize {
        self.0.get(&s).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.0.values().sum()
    }
}

impl FromStr for ScenarioCounts {
    type Err = Error;

    /// Either four comma-separated numbers in scenario order or
    /// `name=count` pairs, e.g. `left=10,both=5`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect();
        let bad = |p: &str| Error::Invalid(format!("bad count {p:?}"));
        let mut map = BTreeMap::new();
        if parts.iter().all(|p| !p.contains('=')) {
            if parts.len() != 4 {
                return Err(Error::Invalid(format!("expected 4 counts, got {}", parts.len())));
            }
            for (sc, p) in Scenario::ALL.into_iter().zip(&parts) {
                map.insert(sc, p.parse().map_err(|_| bad(p))?);
            }
        } else {
            for p in parts {
                let (k, v) = p.split_once('=').ok_or_else(|| bad(p))?;
                map.insert(k.parse()?, v.trim().parse().map_err(|_| bad(p))?);
            }
        }
        Ok(ScenarioCounts(map))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub counts: ScenarioCounts,
    pub seed: u64,
    /// Longest question path; hop counts cycle through `2..=max_hops`.
    pub max_hops: usize,
    pub allow_ambiguous: bool,
    /// Attempts per instance before giving up on it.
    pub retry_budget: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            counts: ScenarioCounts::uniform(50),
            seed: 0,
            max_hops: 4,
            allow_ambiguous: false,
            retry_budget: 20_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub instances: Vec<BenchmarkInstance>,
    pub warnings: Vec<String>,
}

fn mix(seed: u64, slot: u64, attempt: u64) -> u64 {
    let mut z = seed ^ slot.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ attempt.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Sampler<'a> {
    kb: &'a KnowledgeBase,
    rules: &'a RuleSet,
    templates: &'a TemplateTable,
    pairs: Vec<&'a Rule>,
    known: Vec<Relation>,
}

impl<'a> Sampler<'a> {
    fn new(kb: &'a KnowledgeBase, rules: &'a RuleSet, templates: &'a TemplateTable) -> Self {
        let known: Vec<Relation> = kb.relations().cloned().collect();
        let pairs = rules.iter().filter(|r| r.body.len() == 2).collect();
        Sampler {
            kb,
            rules,
            templates,
            pairs,
            known,
        }
    }

    fn follows(&self, prev: &Relation, next: &Relation) -> bool {
        match (self.templates.get(prev), self.templates.get(next)) {
            (Some(a), Some(b)) => a.chains_into(b),
            _ => true,
        }
    }

    fn attempt(
        &self,
        scenario: Scenario,
        hops: usize,
        rng: &mut ChaCha8Rng,
        allow_ambiguous: bool,
    ) -> Result<BenchmarkInstance, Reject> {
        let rule = *pick(rng, &self.pairs).ok_or(Reject::NoComposition)?;
        let offset = rng.gen_range(0..hops);
        let mut fine: Vec<Relation> = rule.body.clone();
        for _ in 0..offset {
            let first = fine[0].clone();
            let options: Vec<&Relation> = self.known.iter().filter(|r| self.follows(r, &first)).collect();
            fine.insert(0, (*pick(rng, &options).ok_or(Reject::NoComposition)?).clone());
        }
        for _ in offset + 1..hops {
            let last = fine.last().expect("non-empty").clone();
            let options: Vec<&Relation> = self.known.iter().filter(|r| self.follows(&last, r)).collect();
            fine.push((*pick(rng, &options).ok_or(Reject::NoComposition)?).clone());
        }
        match compose_with_rule(&fine, self.rules) {
            Some(c) if c.offset == offset && c.rule.same_shape(rule) => {}
            _ => return Err(Reject::NoComposition),
        }
        let starts: Vec<EntityId> = self.kb.domain_of(&fine[0]).into_iter().collect();
        let start = pick(rng, &starts).cloned().ok_or(Reject::NoComposition)?;
        let path = generate_knowledge_path(self.kb, &fine, &start, rng)?;
        let positions = scenario.body_positions().iter().map(|p| p + offset).collect();
        let (edits, _) = inject_counterfactual(self.kb, &path, &positions, rng)?;
        build_instance(
            self.kb,
            self.rules,
            self.templates,
            scenario,
            &start,
            &fine,
            edits,
            allow_ambiguous,
        )
    }
}

fn dedup_key(i: &BenchmarkInstance) -> (EntityId, Vec<Relation>, Vec<Edit>) {
    (i.start.clone(), i.fine_path.clone(), i.edits.clone())
}

/// Generates instances per scenario. Output is a pure function of the
/// inputs; attempts run in parallel but the lowest-numbered success wins.
pub fn generate_dataset(kb: &KnowledgeBase, rules: &RuleSet, templates: &TemplateTable, cfg: &GeneratorConfig) -> Dataset {
    const CHUNK: usize = 64;
    let sampler = Sampler::new(kb, rules, templates);
    let max_hops = cfg.max_hops.max(2);
    let mut out = Dataset::default();
    let mut seen = HashSet::new();
    let mut slot = 0u64;
    for scenario in Scenario::ALL {
        for j in 0..cfg.counts.get(scenario) {
            let hops = 2 + j % (max_hops - 1);
            slot += 1;
            let mut found = None;
            let mut tried = 0;
            while found.is_none() && tried < cfg.retry_budget {
                let n = CHUNK.min(cfg.retry_budget - tried);
                let batch: Vec<Option<BenchmarkInstance>> = (tried..tried + n)
                    .into_par_iter()
                    .map(|a| {
                        let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, slot, a as u64));
                        sampler.attempt(scenario, hops, &mut rng, cfg.allow_ambiguous).ok()
                    })
                    .collect();
                found = batch.into_iter().flatten().find(|i| !seen.contains(&dedup_key(i)));
                tried += n;
            }
            match found {
                Some(mut inst) => {
                    seen.insert(dedup_key(&inst));
                    inst.id = format!("q{:05}", out.instances.len());
                    out.instances.push(inst);
                }
                None => out.warnings.push(format!(
                    "{scenario} {hops}-hop instance not found in {} attempts",
                    cfg.retry_budget
                )),
            }
        }
    }
    out.instances.sort_by(|a, b| a.id.cmp(&b.id));
    out
}

/// Instance counts by scenario and hop count.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub counts: BTreeMap<Scenario, BTreeMap<usize, usize>>,
}

impl DatasetStats {
    pub fn of(instances: &[BenchmarkInstance]) -> Self {
        let mut counts: BTreeMap<Scenario, BTreeMap<usize, usize>> = BTreeMap::new();
        for i in instances {
            *counts.entry(i.scenario).or_default().entry(i.hops).or_default() += 1;
        }
        DatasetStats { counts }
    }

    pub fn hop_columns(&self) -> Vec<usize> {
        let hops: BTreeSet<usize> = self.counts.values().flat_map(|m| m.keys().copied()).collect();
        hops.into_iter().collect()
    }

    /// Tab-separated table: one row per scenario plus a total row.
    pub fn to_table(&self) -> String {
        let cols = self.hop_columns();
        let mut s = String::from("scenario");
        for h in &cols {
            s.push_str(&format!("\t{h}-hop"));
        }
        s.push_str("\ttotal\n");
        let mut totals = vec![0usize; cols.len()];
        for sc in Scenario::ALL {
            let row = self.counts.get(&sc);
            s.push_str(sc.name());
            let mut sum = 0;
            for (i, h) in cols.iter().enumerate() {
                let n = row.and_then(|r| r.get(h)).copied().unwrap_or(0);
                totals[i] += n;
                sum += n;
                s.push_str(&format!("\t{n}"));
            }
            s.push_str(&format!("\t{sum}\n"));
        }
        s.push_str("total");
        for t in &totals {
            s.push_str(&format!("\t{t}"));
        }
        s.push_str(&format!("\t{}\n", totals.iter().sum::<usize>()));
        s
    }
}

pub fn write_dataset<W: Write>(mut w: W, instances: &[BenchmarkInstance]) -> std::io::Result<()> {
    for i in instances {
        serde_json::to_writer(&mut w, i)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<BenchmarkInstance>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::malformed(origin, idx + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkInstance>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), path)
}

pub fn save_dataset(instances: &[BenchmarkInstance], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&mut w, instances).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
