//! Edit memory with two-step retrieval: filter by entity (and aliases), then
//! rerank the survivors by relation similarity.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::encoder::{cosine, EmbeddingVector, RelationEncoder};
use crate::error::{Error, Result};
use crate::kg::{AliasTable, EntityId, Fact, Relation};

/// A requested update `relation(subject, old_object → new_object)`. A missing
/// `old_object` is the null placeholder used for derived edits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edit {
    pub relation: Relation,
    pub subject: EntityId,
    pub old_object: Option<EntityId>,
    pub new_object: EntityId,
}

impl Edit {
    pub fn new(
        relation: impl Into<Relation>,
        subject: impl Into<EntityId>,
        old_object: Option<&str>,
        new_object: impl Into<EntityId>,
    ) -> Self {
        Edit {
            relation: relation.into(),
            subject: subject.into(),
            old_object: old_object.map(EntityId::from),
            new_object: new_object.into(),
        }
    }

    /// The fact as it holds after the edit.
    pub fn new_fact(&self) -> Fact {
        Fact {
            relation: self.relation.clone(),
            subject: self.subject.clone(),
            object: self.new_object.clone(),
        }
    }

    pub(crate) fn key(&self) -> (Relation, EntityId, EntityId) {
        (self.relation.clone(), self.subject.clone(), self.new_object.clone())
    }
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let old = self.old_object.as_ref().map_or("null", |o| o.as_str());
        write!(f, "{}({}, {} -> {})", self.relation, self.subject, old, self.new_object)
    }
}

/// Reads one JSON edit per line; blank lines are skipped.
pub fn read_edits<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<Edit>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let edit: Edit = serde_json::from_str(&line).map_err(|e| Error::malformed(origin, idx + 1, e.to_string()))?;
        out.push(edit);
    }
    Ok(out)
}

pub fn write_edits<'a, W: Write, I: IntoIterator<Item = &'a Edit>>(mut w: W, edits: I) -> std::io::Result<()> {
    for e in edits {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn load_edits(path: &Path) -> Result<Vec<Edit>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_edits(BufReader::new(file), path)
}

pub fn save_edits(edits: &[Edit], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_edits(&mut w, edits).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// A retrieved edit with its relation similarity `η` to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalHit<'a> {
    pub edit: &'a Edit,
    pub index: usize,
    pub similarity: f64,
}

/// Ordered edit store. Mutation needs `&mut`, retrieval only `&`, so a
/// memory shared behind `&` or `Arc` is effectively frozen.
#[derive(Clone)]
pub struct EditMemory {
    edits: Vec<Edit>,
    vectors: Vec<EmbeddingVector>,
    by_subject: HashMap<String, Vec<usize>>,
    by_new_object: HashMap<String, Vec<usize>>,
    encoder: Arc<dyn RelationEncoder>,
    aliases: Arc<AliasTable>,
}

impl fmt::Debug for EditMemory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EditMemory")
            .field("edits", &self.edits)
            .finish_non_exhaustive()
    }
}

impl EditMemory {
    pub fn new(encoder: Arc<dyn RelationEncoder>, aliases: Arc<AliasTable>) -> Self {
        EditMemory {
            edits: Vec::new(),
            vectors: Vec::new(),
            by_subject: HashMap::new(),
            by_new_object: HashMap::new(),
            encoder,
            aliases,
        }
    }

    pub fn with_edits<I: IntoIterator<Item = Edit>>(
        encoder: Arc<dyn RelationEncoder>,
        aliases: Arc<AliasTable>,
        edits: I,
    ) -> Self {
        let mut mem = Self::new(encoder, aliases);
        for e in edits {
            mem.insert(e);
        }
        mem
    }

    /// Appends `edit`, indexing it under every alias of its subject and of
    /// its new object. Duplicates are kept.
    pub fn insert(&mut self, edit: Edit) {
        let idx = self.edits.len();
        for name in self.aliases.expand(edit.subject.as_str()) {
            self.by_subject.entry(name).or_default().push(idx);
        }
        for name in self.aliases.expand(edit.new_object.as_str()) {
            self.by_new_object.entry(name).or_default().push(idx);
        }
        self.vectors.push(self.encoder.encode(&edit.relation));
        self.edits.push(edit);
    }

    pub fn edits(&self) -> &[Edit] {
        &self.edits
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn encoder(&self) -> &Arc<dyn RelationEncoder> {
        &self.encoder
    }

    pub fn aliases(&self) -> &Arc<AliasTable> {
        &self.aliases
    }

    /// Edits whose subject shares an alias with `entity`, in insertion order.
    pub fn by_subject(&self, entity: &EntityId) -> Vec<usize> {
        candidates(&self.by_subject, &self.aliases, entity)
    }

    pub fn by_new_object(&self, entity: &EntityId) -> Vec<usize> {
        candidates(&self.by_new_object, &self.aliases, entity)
    }

    /// Best edit about `subject` for `relation`, returned only when its
    /// similarity strictly exceeds `theta`.
    pub fn retrieve_forward(&self, subject: &EntityId, relation: &Relation, theta: f64) -> Option<RetrievalHit<'_>> {
        self.rerank(self.by_subject(subject), relation, theta)
    }

    /// Best edit whose new object is `object`; the useful value is the hit's
    /// subject.
    pub fn retrieve_backward(&self, object: &EntityId, relation: &Relation, theta: f64) -> Option<RetrievalHit<'_>> {
        self.rerank(self.by_new_object(object), relation, theta)
    }

    fn rerank(&self, pool: Vec<usize>, relation: &Relation, theta: f64) -> Option<RetrievalHit<'_>> {
        if pool.is_empty() {
            return None;
        }
        let query = self.encoder.encode(relation);
        let mut best: Option<(usize, f64)> = None;
        for idx in pool {
            let eta = cosine(&self.vectors[idx], &query).expect("memory vectors share the encoder dimension");
            if best.is_none_or(|(_, b)| eta > b) {
                best = Some((idx, eta));
            }
        }
        let (index, similarity) = best?;
        (similarity > theta).then(|| RetrievalHit {
            edit: &self.edits[index],
            index,
            similarity,
        })
    }
}

fn candidates(index: &HashMap<String, Vec<usize>>, aliases: &AliasTable, entity: &EntityId) -> Vec<usize> {
    let names = aliases.expand(entity.as_str());
    if names.len() == 1 {
        return index.get(entity.as_str()).cloned().unwrap_or_default();
    }
    let set: BTreeSet<usize> = names.iter().filter_map(|n| index.get(n)).flatten().copied().collect();
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::HashedNgramEncoder;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn aliases() -> Arc<AliasTable> {
        let mut t = AliasTable::new();
        t.insert(&"America".into(), "USA").unwrap();
        t.insert(&"America".into(), "United States").unwrap();
        Arc::new(t)
    }

    fn memory(edits: Vec<Edit>) -> EditMemory {
        EditMemory::with_edits(Arc::new(HashedNgramEncoder::default()), aliases(), edits)
    }

    #[test]
    fn insert_and_forward_lookup() {
        let mem = memory(vec![Edit::new("company_is", "Tom", Some("Amazon"), "Twitter")]);
        assert_eq!(mem.len(), 1);
        assert_eq!(mem.by_subject(&"Tom".into()), vec![0]);
        let hit = mem.retrieve_forward(&"Tom".into(), &"company_is".into(), 0.7).unwrap();
        assert_eq!(hit.edit.new_object, "Twitter".into());
        assert!((hit.similarity - 1.0).abs() < 1e-12);
        assert!(mem.retrieve_forward(&"Alice".into(), &"company_is".into(), 0.7).is_none());
    }

    #[test]
    fn unrelated_relation_is_rejected() {
        // Reference encoder: cosine(company_is, owner_is) is about 0.20.
        let mem = memory(vec![Edit::new("company_is", "Tom", Some("Amazon"), "Twitter")]);
        let enc = HashedNgramEncoder::default();
        let eta = enc.similarity(&"company_is".into(), &"owner_is".into());
        assert!((eta - GOLDEN_COMPANY_VS_OWNER).abs() < 1e-12, "{eta}");
        assert!(mem.retrieve_forward(&"Tom".into(), &"owner_is".into(), 0.7).is_none());
    }

    const GOLDEN_COMPANY_VS_OWNER: f64 = 0.20025046972870353;

    #[test]
    fn alias_lookup_both_directions() {
        let mem = memory(vec![
            Edit::new("head_of_state", "USA", Some("Joe Biden"), "Albert Einstein"),
            Edit::new("capital_is", "Mali", None, "United States"),
        ]);
        assert!(mem
            .retrieve_forward(&"America".into(), &"head_of_state".into(), 0.7)
            .is_some());
        assert!(mem
            .retrieve_forward(&"United States".into(), &"head_of_state".into(), 0.7)
            .is_some());
        let back = mem
            .retrieve_backward(&"Albert Einstein".into(), &"head_of_state".into(), 0.7)
            .unwrap();
        assert_eq!(back.edit.subject, "USA".into());
        let via_alias = mem.retrieve_backward(&"America".into(), &"capital_is".into(), 0.7).unwrap();
        assert_eq!(via_alias.index, 1);
        assert!(mem.retrieve_backward(&"Nobody".into(), &"capital_is".into(), 0.7).is_none());
    }

    #[test]
    fn insertion_order_and_ties() {
        let mem = memory(vec![
            Edit::new("company_is", "Tom", None, "A"),
            Edit::new("company_is", "Tom", None, "B"),
        ]);
        assert_eq!(mem.edits()[0].new_object, "A".into());
        let hit = mem.retrieve_forward(&"Tom".into(), &"company_is".into(), 0.7).unwrap();
        assert_eq!(hit.index, 0);
    }

    #[test]
    fn threshold_is_strict() {
        let mem = memory(vec![Edit::new("company_is", "Tom", None, "A")]);
        assert!(mem.retrieve_forward(&"Tom".into(), &"company_is".into(), 1.0).is_none());
    }

    #[test]
    fn jsonl_round_trip_with_null() {
        let edits = vec![
            Edit::new("company_is", "Tom", Some("Amazon"), "Twitter"),
            Edit::new("boss_is", "Tom", None, "Elon Musk"),
        ];
        let mut buf = Vec::new();
        write_edits(&mut buf, &edits).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"old_object\":null"));
        assert_eq!(read_edits(buf.as_slice(), Path::new("mem")).unwrap(), edits);
        let bad = read_edits("{\"relation\":1}\n".as_bytes(), Path::new("bad.jsonl"));
        assert!(matches!(bad, Err(Error::Malformed { line: 1, .. })));
    }

    /// Linear scan over the whole memory, no indexes.
    pub(crate) fn brute_force(
        mem: &EditMemory,
        entity: &EntityId,
        relation: &Relation,
        theta: f64,
        backward: bool,
    ) -> Option<(usize, f64)> {
        let query_names = mem.aliases().expand(entity.as_str());
        let enc = mem.encoder();
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in mem.edits().iter().enumerate() {
            let key = if backward { &e.new_object } else { &e.subject };
            if mem.aliases().expand(key.as_str()).is_disjoint(&query_names) {
                continue;
            }
            let eta = enc.similarity(&e.relation, relation);
            if best.is_none_or(|(_, b)| eta > b) {
                best = Some((i, eta));
            }
        }
        best.filter(|(_, eta)| *eta > theta)
    }

    pub(crate) fn random_memory(rng: &mut ChaCha8Rng, max_edits: usize) -> EditMemory {
        const RELS: [&str; 8] = [
            "father_is",
            "mother_is",
            "grandmother_is",
            "company_is",
            "owner_is",
            "boss_is",
            "live_in_the_place",
            "born_in_the_place",
        ];
        let mut t = AliasTable::new();
        for i in 0..5 {
            t.insert(&format!("e{i}").as_str().into(), &format!("alias{i}")).unwrap();
        }
        let n = rng.gen_range(0..=max_edits);
        let name = |rng: &mut ChaCha8Rng| {
            let i = rng.gen_range(0..30);
            if i < 5 && rng.gen_bool(0.3) {
                format!("alias{i}")
            } else {
                format!("e{i}")
            }
        };
        let edits: Vec<Edit> = (0..n)
            .map(|_| {
                let r = RELS[rng.gen_range(0..RELS.len())];
                Edit::new(r, name(rng).as_str(), None, name(rng).as_str())
            })
            .collect();
        EditMemory::with_edits(Arc::new(HashedNgramEncoder::default()), Arc::new(t), edits)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn filter_rerank_matches_linear_scan(seed in any::<u64>(), theta in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mem = random_memory(&mut rng, 120);
            for q in ["e0", "alias1", "e7", "e29", "nobody"] {
                for rel in ["father_is", "grandfather_is", "boss_is"] {
                    let (q, rel) = (EntityId::from(q), Relation::from(rel));
                    let fwd = mem.retrieve_forward(&q, &rel, theta).map(|h| (h.index, h.similarity));
                    prop_assert_eq!(fwd, brute_force(&mem, &q, &rel, theta, false));
                    let bwd = mem.retrieve_backward(&q, &rel, theta).map(|h| (h.index, h.similarity));
                    prop_assert_eq!(bwd, brute_force(&mem, &q, &rel, theta, true));
                }
            }
        }

        #[test]
        fn raising_theta_never_creates_hits(seed in any::<u64>(), lo in 0.0f64..1.0, bump in 0.0f64..0.5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mem = random_memory(&mut rng, 60);
            for q in ["e0", "e3", "alias2"] {
                let q = EntityId::from(q);
                let rel = Relation::from("mother_is");
                if mem.retrieve_forward(&q, &rel, lo).is_none() {
                    prop_assert!(mem.retrieve_forward(&q, &rel, lo + bump).is_none());
                }
                if let Some(hit) = mem.retrieve_forward(&q, &rel, lo) {
                    let names = mem.aliases().expand(hit.edit.subject.as_str());
                    prop_assert!(!names.is_disjoint(&mem.aliases().expand(q.as_str())));
                }
            }
        }
    }
}
