//! Relation templates: entity-type constraints plus the question, cloze and
//! noun-phrase strings used to render benchmark questions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::Relation;

const BUILTIN: &str = include_str!("../data/templates.tsv");

/// One relation template. `domain` lists the entity categories a subject may
/// belong to; `range` is the category of the object.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationTemplate {
    pub relation: Relation,
    pub domain: BTreeSet<String>,
    pub range: String,
    pub question: String,
    pub cloze: String,
    pub phrase: String,
}

impl RelationTemplate {
    /// Whether `next` may follow this relation in a path.
    pub fn chains_into(&self, next: &RelationTemplate) -> bool {
        next.domain.contains(&self.range)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TemplateTable {
    entries: BTreeMap<Relation, RelationTemplate>,
}

impl TemplateTable {
    /// The bundled table covering the benchmark's relation vocabulary.
    pub fn builtin() -> Self {
        Self::from_reader(BUILTIN.as_bytes(), Path::new("<builtin templates>")).expect("bundled templates parse")
    }

    pub fn from_templates<I: IntoIterator<Item = RelationTemplate>>(items: I) -> Self {
        TemplateTable {
            entries: items.into_iter().map(|t| (t.relation.clone(), t)).collect(),
        }
    }

    /// Tab-separated `relation domain range [question [cloze [phrase]]]`;
    /// domains may list alternatives separated by `|`.
    pub fn from_reader<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 3 {
                return Err(Error::malformed(origin, line_no, "expected relation, domain and range"));
            }
            let relation = Relation::new(f[0]).map_err(|_| Error::malformed(origin, line_no, "empty relation"))?;
            let domain: BTreeSet<String> = f[1]
                .split('|')
                .map(|d| d.trim().to_string())
                .filter(|d| !d.is_empty())
                .collect();
            let range = f[2].trim().to_string();
            if domain.is_empty() || range.is_empty() {
                return Err(Error::malformed(origin, line_no, "empty domain or range"));
            }
            let text = |i: usize, default: String| f.get(i).map(|s| s.trim().to_string()).unwrap_or(default);
            let question = text(3, format!("What is the {} of [S]?", relation.as_str().replace('_', " ")));
            let cloze = text(4, format!("The {} of [S] is", relation.as_str().replace('_', " ")));
            let phrase = text(5, format!("the {} of [S]", relation.as_str().replace('_', " ")));
            entries.insert(
                relation.clone(),
                RelationTemplate {
                    relation,
                    domain,
                    range,
                    question,
                    cloze,
                    phrase,
                },
            );
        }
        Ok(TemplateTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), path)
    }

    pub fn get(&self, relation: &Relation) -> Option<&RelationTemplate> {
        self.entries.get(relation)
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RelationTemplate> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Renders a question for `start` followed by `path`. Inner hops become
    /// nested noun phrases; the last hop uses its question template.
    pub fn render_question(&self, start: &str, path: &[Relation]) -> String {
        let Some((last, inner)) = path.split_last() else {
            return String::new();
        };
        let mut subject = start.to_string();
        for rel in inner {
            subject = match self.get(rel) {
                Some(t) => t.phrase.replace("[S]", &subject),
                None => format!("the {} of {subject}", rel.as_str().replace('_', " ")),
            };
        }
        match self.get(last) {
            Some(t) => t.question.replace("[S]", &subject),
            None => format!("What is the {} of {subject}?", last.as_str().replace('_', " ")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_covers_vocabulary() {
        let t = TemplateTable::builtin();
        assert_eq!(t.len(), 38);
        assert!(t.get(&"the_first_lady_is".into()).is_some());
        let company = t.get(&"located_in_the_country".into()).unwrap();
        assert!(company.domain.contains("university"));
    }

    #[test]
    fn renders_nested_questions() {
        let t = TemplateTable::builtin();
        let q = t.render_question("America", &["the_First_Lady_is".into(), "father_is".into()]);
        assert_eq!(q, "Who is the First Lady of America's father?");
        let q = t.render_question("Tom", &["mother_is".into()]);
        assert_eq!(q, "Who is Tom's mother?");
    }

    #[test]
    fn type_chaining() {
        let t = TemplateTable::builtin();
        let edu = t.get(&"educated_at_the_university".into()).unwrap();
        let loc = t.get(&"located_in_the_country".into()).unwrap();
        let father = t.get(&"father_is".into()).unwrap();
        assert!(edu.chains_into(loc));
        assert!(!edu.chains_into(father));
    }
}
