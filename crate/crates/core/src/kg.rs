//! Immutable knowledge graph: entities, relations, facts, aliases and the
//! `(subject, relation)` / `(relation, object)` indexes.
//!
//! The graph is built once (from a triples file or an iterator of facts) and
//! never mutated afterwards. Knowledge edits live in [`crate::memory`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rules::RuleSet;

/// Canonical entity name. Trimmed, case preserved, never empty.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId(Arc<str>);

impl EntityId {
    pub fn new(name: &str) -> Result<Self> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(Error::Invalid("entity name is empty".into()));
        }
        Ok(EntityId(Arc::from(trimmed)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for EntityId {
    /// Panics on an empty name; use [`EntityId::new`] for untrusted input.
    fn from(name: &str) -> Self {
        EntityId::new(name).expect("entity name must be non-empty")
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        EntityId::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// Relation name, normalized to lowercase with internal whitespace runs
/// replaced by a single underscore.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Relation(Arc<str>);

impl Relation {
    pub fn new(name: &str) -> Result<Self> {
        let normalized = name.split_whitespace().collect::<Vec<_>>().join("_").to_lowercase();
        if normalized.is_empty() {
            return Err(Error::Invalid("relation name is empty".into()));
        }
        Ok(Relation(Arc::from(normalized)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Relation {
    /// Panics on an empty name; use [`Relation::new`] for untrusted input.
    fn from(name: &str) -> Self {
        Relation::new(name).expect("relation name must be non-empty")
    }
}

impl Serialize for Relation {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Relation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Relation::new(&raw).map_err(serde::de::Error::custom)
    }
}

/// A single relational fact `relation(subject, object)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub relation: Relation,
    pub subject: EntityId,
    pub object: EntityId,
}

impl Fact {
    pub fn new(relation: impl Into<Relation>, subject: impl Into<EntityId>, object: impl Into<EntityId>) -> Self {
        Fact {
            relation: relation.into(),
            subject: subject.into(),
            object: object.into(),
        }
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.relation, self.subject, self.object)
    }
}

/// Canonical entity → alias strings. Every canonical id implicitly maps to
/// itself and alias sets never overlap.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AliasTable {
    aliases: BTreeMap<EntityId, BTreeSet<String>>,
    owner: HashMap<String, EntityId>,
}

impl AliasTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `alias` for `canonical`. Fails when the alias string is
    /// already owned by a different canonical entity.
    pub fn insert(&mut self, canonical: &EntityId, alias: &str) -> Result<()> {
        let alias = alias.trim();
        if alias.is_empty() {
            return Ok(());
        }
        for name in [canonical.as_str(), alias] {
            match self.owner.get(name) {
                Some(existing) if existing != canonical => {
                    return Err(Error::AliasConflict {
                        alias: name.to_string(),
                        first: existing.to_string(),
                        second: canonical.to_string(),
                    });
                }
                Some(_) => {}
                None => {
                    self.owner.insert(name.to_string(), canonical.clone());
                }
            }
        }
        let set = self.aliases.entry(canonical.clone()).or_default();
        set.insert(canonical.as_str().to_string());
        set.insert(alias.to_string());
        Ok(())
    }

    /// Parses the tab-separated alias format `canonical<TAB>alias1<TAB>...`.
    pub fn from_reader<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut table = AliasTable::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let canonical = fields.next().unwrap_or_default();
            let canonical = EntityId::new(canonical).map_err(|_| Error::malformed(origin, line_no, "empty canonical entity"))?;
            // A canonical listed alone still owns its own name.
            table.insert(&canonical, canonical.as_str())?;
            for alias in fields {
                table.insert(&canonical, alias)?;
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), path)
    }

    /// Canonical entity owning `name`, if the name is known to the table.
    pub fn canonical_of(&self, name: &str) -> Option<&EntityId> {
        self.owner.get(name)
    }

    /// `{canonical} ∪ aliases`. An alias string expands to its owner's full
    /// set; an unknown name expands to itself.
    pub fn expand(&self, name: &str) -> BTreeSet<String> {
        match self.owner.get(name).and_then(|c| self.aliases.get(c)) {
            Some(set) => set.clone(),
            None => BTreeSet::from([name.to_string()]),
        }
    }

    pub fn len(&self) -> usize {
        self.aliases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.aliases.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EntityId, &BTreeSet<String>)> {
        self.aliases.iter()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (canonical, set) in &self.aliases {
            write!(w, "{canonical}")?;
            for alias in set.iter().filter(|a| a.as_str() != canonical.as_str()) {
                write!(w, "\t{alias}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// The base knowledge `K_base`: a deduplicated fact set with lookup indexes.
#[derive(Clone, Debug, Default)]
pub struct KnowledgeBase {
    facts: BTreeSet<Fact>,
    aliases: Arc<AliasTable>,
    index_sr: HashMap<(EntityId, Relation), BTreeSet<EntityId>>,
    index_ro: HashMap<(Relation, EntityId), BTreeSet<EntityId>>,
    by_relation: BTreeMap<Relation, Vec<(EntityId, EntityId)>>,
}

impl KnowledgeBase {
    pub fn from_facts<I: IntoIterator<Item = Fact>>(facts: I, aliases: AliasTable) -> Self {
        let facts: BTreeSet<Fact> = facts.into_iter().collect();
        let mut index_sr: HashMap<_, BTreeSet<_>> = HashMap::new();
        let mut index_ro: HashMap<_, BTreeSet<_>> = HashMap::new();
        let mut by_relation: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for f in &facts {
            index_sr
                .entry((f.subject.clone(), f.relation.clone()))
                .or_default()
                .insert(f.object.clone());
            index_ro
                .entry((f.relation.clone(), f.object.clone()))
                .or_default()
                .insert(f.subject.clone());
            by_relation
                .entry(f.relation.clone())
                .or_default()
                .push((f.subject.clone(), f.object.clone()));
        }
        KnowledgeBase {
            facts,
            aliases: Arc::new(aliases),
            index_sr,
            index_ro,
            by_relation,
        }
    }

    /// Parses the tab-separated triples format; `#` starts a comment line.
    pub fn from_reader<R: BufRead>(reader: R, origin: &Path, aliases: AliasTable) -> Result<Self> {
        let mut facts = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::malformed(
                    origin,
                    line_no,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let subject = EntityId::new(fields[0]).map_err(|_| Error::malformed(origin, line_no, "empty subject"))?;
            let relation = Relation::new(fields[1]).map_err(|_| Error::malformed(origin, line_no, "empty relation"))?;
            let object = EntityId::new(fields[2]).map_err(|_| Error::malformed(origin, line_no, "empty object"))?;
            facts.push(Fact {
                relation,
                subject,
                object,
            });
        }
        Ok(Self::from_facts(facts, aliases))
    }

    pub fn facts(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn aliases(&self) -> &AliasTable {
        &self.aliases
    }

    pub fn alias_table(&self) -> Arc<AliasTable> {
        Arc::clone(&self.aliases)
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.by_relation.keys()
    }

    /// All `(subject, object)` pairs of a relation, in fact order.
    pub fn pairs(&self, relation: &Relation) -> &[(EntityId, EntityId)] {
        self.by_relation.get(relation).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Distinct objects of a relation (its observed range).
    pub fn range_of(&self, relation: &Relation) -> BTreeSet<EntityId> {
        self.pairs(relation).iter().map(|(_, o)| o.clone()).collect()
    }

    /// Distinct subjects of a relation (its observed domain).
    pub fn domain_of(&self, relation: &Relation) -> BTreeSet<EntityId> {
        self.pairs(relation).iter().map(|(s, _)| s.clone()).collect()
    }

    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.facts
            .iter()
            .flat_map(|f| [f.subject.clone(), f.object.clone()])
            .collect()
    }

    pub fn lookup_objects(&self, subject: &EntityId, relation: &Relation) -> BTreeSet<EntityId> {
        self.objects_ref(subject, relation).cloned().unwrap_or_default()
    }

    pub fn lookup_subjects(&self, relation: &Relation, object: &EntityId) -> BTreeSet<EntityId> {
        self.subjects_ref(relation, object).cloned().unwrap_or_default()
    }

    pub(crate) fn objects_ref(&self, subject: &EntityId, relation: &Relation) -> Option<&BTreeSet<EntityId>> {
        self.index_sr.get(&(subject.clone(), relation.clone()))
    }

    pub(crate) fn subjects_ref(&self, relation: &Relation, object: &EntityId) -> Option<&BTreeSet<EntityId>> {
        self.index_ro.get(&(relation.clone(), object.clone()))
    }

    pub fn alias_expand(&self, entity: &EntityId) -> BTreeSet<String> {
        self.aliases.expand(entity.as_str())
    }

    /// Objects reachable from `subject` through `head`: the direct facts plus,
    /// for every rule concluding `head`, the ends of body chains from
    /// `subject` satisfied by base facts.
    pub fn derive_by_rules(&self, rules: &RuleSet, subject: &EntityId, head: &Relation) -> BTreeSet<EntityId> {
        let mut out = self.lookup_objects(subject, head);
        for rule in rules.iter().filter(|r| &r.head == head) {
            let mut frontier = BTreeSet::from([subject.clone()]);
            for rel in &rule.body {
                frontier = frontier
                    .iter()
                    .filter_map(|e| self.objects_ref(e, rel))
                    .flatten()
                    .cloned()
                    .collect();
                if frontier.is_empty() {
                    break;
                }
            }
            out.extend(frontier);
        }
        out
    }

    /// Inverse of [`derive_by_rules`](Self::derive_by_rules): subjects `s`
    /// with `head(s, object)` either stated or derivable by one rule.
    pub fn derive_subjects_by_rules(&self, rules: &RuleSet, head: &Relation, object: &EntityId) -> BTreeSet<EntityId> {
        let mut out = self.lookup_subjects(head, object);
        for rule in rules.iter().filter(|r| &r.head == head) {
            let mut frontier = BTreeSet::from([object.clone()]);
            for rel in rule.body.iter().rev() {
                frontier = frontier
                    .iter()
                    .filter_map(|e| self.subjects_ref(rel, e))
                    .flatten()
                    .cloned()
                    .collect();
                if frontier.is_empty() {
                    break;
                }
            }
            out.extend(frontier);
        }
        out
    }

    /// Forward-chains `rules` over the stored facts until no rule adds a new
    /// fact (or `max_rounds` passes have run). Aliases are kept.
    pub fn materialize(&self, rules: &RuleSet, max_rounds: usize) -> KnowledgeBase {
        let mut kb = self.clone();
        for _ in 0..max_rounds {
            let mut new = Vec::new();
            for rule in rules {
                let Some((first, rest)) = rule.body.split_first() else {
                    continue;
                };
                for (s, o) in kb.pairs(first) {
                    let mut frontier = BTreeSet::from([o.clone()]);
                    for rel in rest {
                        frontier = frontier
                            .iter()
                            .filter_map(|e| kb.objects_ref(e, rel))
                            .flatten()
                            .cloned()
                            .collect();
                    }
                    for end in frontier {
                        let f = Fact {
                            relation: rule.head.clone(),
                            subject: s.clone(),
                            object: end,
                        };
                        if !kb.facts.contains(&f) {
                            new.push(f);
                        }
                    }
                }
            }
            if new.is_empty() {
                break;
            }
            let aliases = (*kb.aliases).clone();
            kb = KnowledgeBase::from_facts(kb.facts.iter().cloned().chain(new), aliases);
        }
        kb
    }

    /// Writes the fact set as sorted tab-separated triples.
    pub fn write_triples<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for f in &self.facts {
            writeln!(w, "{}\t{}\t{}", f.subject, f.relation, f.object)?;
        }
        Ok(())
    }
}

/// Loads a knowledge base from a triples file and an optional alias file.
pub fn load_knowledge_base(triples_path: &Path, aliases_path: Option<&Path>) -> Result<KnowledgeBase> {
    let aliases = match aliases_path {
        Some(p) => AliasTable::load(p)?,
        None => AliasTable::new(),
    };
    let file = std::fs::File::open(triples_path).map_err(|e| Error::io(triples_path, e))?;
    KnowledgeBase::from_reader(BufReader::new(file), triples_path, aliases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::Rule;

    fn kb_from(text: &str) -> KnowledgeBase {
        KnowledgeBase::from_reader(text.as_bytes(), Path::new("<test>"), AliasTable::new()).unwrap()
    }

    fn fig1() -> KnowledgeBase {
        kb_from("Tom\tcompany_is\tTwitter\nTwitter\towner_is\tElon Musk\n")
    }

    fn set(items: &[&str]) -> BTreeSet<EntityId> {
        items.iter().map(|s| EntityId::from(*s)).collect()
    }

    #[test]
    fn loads_fig1_triples() {
        let kb = fig1();
        assert_eq!(kb.len(), 2);
        assert_eq!(kb.lookup_objects(&"Tom".into(), &"company_is".into()), set(&["Twitter"]));
        assert_eq!(kb.lookup_objects(&"Twitter".into(), &"owner_is".into()), set(&["Elon Musk"]));
        assert!(kb.lookup_objects(&"Tom".into(), &"unknown_rel".into()).is_empty());
        assert_eq!(kb.lookup_subjects(&"owner_is".into(), &"Elon Musk".into()), set(&["Twitter"]));
        assert!(kb.lookup_subjects(&"owner_is".into(), &"Nobody".into()).is_empty());
    }

    #[test]
    fn empty_and_duplicate_inputs() {
        assert_eq!(kb_from("").len(), 0);
        assert_eq!(kb_from("# only a comment\n\n").len(), 0);
        assert_eq!(kb_from("a\tr\tb\na\tr\tb\n").len(), 1);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err =
            KnowledgeBase::from_reader("a\tr\tb\nbroken line\n".as_bytes(), Path::new("kb.tsv"), AliasTable::new()).unwrap_err();
        match err {
            Error::Malformed { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = KnowledgeBase::from_reader("a\t \tb\n".as_bytes(), Path::new("kb.tsv"), AliasTable::new()).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 1, .. }));
    }

    #[test]
    fn normalization() {
        assert_eq!(Relation::from("Head Of  State").as_str(), "head_of_state");
        assert_eq!(Relation::from("the_First_Lady_is").as_str(), "the_first_lady_is");
        let once = Relation::from("Mother-In-Law is");
        assert_eq!(Relation::new(once.as_str()).unwrap(), once);
        assert_eq!(EntityId::from("  Elon Musk ").as_str(), "Elon Musk");
        assert!(Relation::new("   ").is_err());
        assert!(EntityId::new("").is_err());
    }

    #[test]
    fn shared_nationality_inverse() {
        let kb = kb_from(
            "Ann\tholds_nationality_in\tAmerica\nBob\tholds_nationality_in\tAmerica\nCid\tholds_nationality_in\tFrance\n",
        );
        assert_eq!(
            kb.lookup_subjects(&"holds_nationality_in".into(), &"America".into()),
            set(&["Ann", "Bob"])
        );
    }

    #[test]
    fn alias_expansion() {
        let table = AliasTable::from_reader(
            "United States\tUSA\nGermany\tDeutschland\tDE\tBRD\n".as_bytes(),
            Path::new("<aliases>"),
        )
        .unwrap();
        let kb = KnowledgeBase::from_facts(Vec::new(), table);
        let us = kb.alias_expand(&"United States".into());
        assert_eq!(us, BTreeSet::from(["United States".to_string(), "USA".to_string()]));
        assert_eq!(kb.alias_expand(&"Zzz".into()), BTreeSet::from(["Zzz".to_string()]));
        assert_eq!(kb.alias_expand(&"Germany".into()).len(), 4);
        // An alias expands to its owner's set.
        assert_eq!(kb.alias_expand(&"USA".into()), us);
    }

    #[test]
    fn alias_conflict_is_an_error() {
        let err = AliasTable::from_reader("A\tshared\nB\tshared\n".as_bytes(), Path::new("<aliases>")).unwrap_err();
        assert!(matches!(err, Error::AliasConflict { .. }));
        let err = AliasTable::from_reader("A\tB\nB\tC\n".as_bytes(), Path::new("<aliases>")).unwrap_err();
        assert!(matches!(err, Error::AliasConflict { .. }));
    }

    #[test]
    fn derive_by_rules_grounding() {
        let mut kb_text = String::from("Tom\tfather_is\tJohn\nJohn\twife_is\tAmy\n");
        let rules = RuleSet::new(vec![Rule::new("mother_is", &["father_is", "wife_is"], 1.0).unwrap()]).unwrap();
        let kb = kb_from(&kb_text);
        assert_eq!(kb.derive_by_rules(&rules, &"Tom".into(), &"mother_is".into()), set(&["Amy"]));
        assert!(kb.derive_by_rules(&rules, &"Tom".into(), &"uncle_is".into()).is_empty());
        assert_eq!(
            kb.derive_subjects_by_rules(&rules, &"mother_is".into(), &"Amy".into()),
            set(&["Tom"])
        );

        kb_text.push_str("John\twife_is\tBeth\n");
        let kb = kb_from(&kb_text);
        assert_eq!(
            kb.derive_by_rules(&rules, &"Tom".into(), &"mother_is".into()),
            set(&["Amy", "Beth"])
        );
    }

    #[test]
    fn materialize_reaches_closure() {
        let kb = kb_from("A\tparent_is\tB\nB\tparent_is\tC\nC\tparent_is\tD\n");
        let rules = RuleSet::new(vec![
            Rule::new("ancestor_is", &["parent_is", "parent_is"], 1.0).unwrap(),
            Rule::new("ancestor_is", &["ancestor_is", "parent_is"], 1.0).unwrap(),
        ])
        .unwrap();
        let closed = kb.materialize(&rules, 10);
        assert_eq!(closed.lookup_objects(&"A".into(), &"ancestor_is".into()), set(&["C", "D"]));
        assert_eq!(closed.materialize(&rules, 10).len(), closed.len());
        assert_eq!(kb.materialize(&rules, 0).len(), kb.len());
    }

    #[test]
    fn write_then_load_round_trips() {
        let kb = kb_from("b\tr\tc\na\tr\tb\n# c\nx\ts\ty\n");
        let mut buf = Vec::new();
        kb.write_triples(&mut buf).unwrap();
        let again = KnowledgeBase::from_reader(buf.as_slice(), Path::new("<rt>"), AliasTable::new()).unwrap();
        assert_eq!(again.facts(), kb.facts());
    }
}
