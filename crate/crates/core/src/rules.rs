//! Chain-shaped Horn rules and their text format.
//!
//! ```text
//! father_is(z0,z1) & wife_is(z1,z2) -> mother_is(z0,z2) @0.95
//! ```
//!
//! Body atoms must chain their variables (`z_{i-1}, z_i`) and the head spans
//! the chain ends. The `@support` suffix is optional and defaults to `1`.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::kg::Relation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("variable chain broken at byte {offset}: {message}")]
    Chain { offset: usize, message: String },

    #[error("support {0} is outside [0, 1]")]
    Support(f64),

    #[error("rule body is empty")]
    EmptyBody,

    #[error("duplicate rule {0}")]
    Duplicate(String),

    #[error("line {line}: {source}")]
    AtLine {
        line: usize,
        #[source]
        source: Box<RuleError>,
    },
}

/// `body[0](z0,z1) ∧ … ∧ body[n-1](z_{n-1},z_n) → head(z0,z_n)` with a
/// confidence-style support score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub head: Relation,
    pub body: Vec<Relation>,
    pub support: f64,
}

impl Rule {
    pub fn new(head: impl Into<Relation>, body: &[&str], support: f64) -> Result<Self, RuleError> {
        let body = body.iter().map(|r| Relation::from(*r)).collect();
        Rule::from_parts(head.into(), body, support)
    }

    pub fn from_parts(head: Relation, body: Vec<Relation>, support: f64) -> Result<Self, RuleError> {
        if body.is_empty() {
            return Err(RuleError::EmptyBody);
        }
        if !(0.0..=1.0).contains(&support) {
            return Err(RuleError::Support(support));
        }
        Ok(Rule { head, body, support })
    }

    pub fn len(&self) -> usize {
        self.body.len()
    }

    pub fn is_empty(&self) -> bool {
        self.body.is_empty()
    }

    /// `(head, body)` identity, ignoring support.
    pub fn same_shape(&self, other: &Rule) -> bool {
        self.head == other.head && self.body == other.body
    }

    pub fn parse(text: &str) -> Result<Self, RuleError> {
        parse_rule(text)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, rel) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{rel}(z{},z{})", i, i + 1)?;
        }
        write!(f, " -> {}(z0,z{}) @{}", self.head, self.body.len(), self.support)
    }
}

/// Renders the canonical text form; `parse_rule(&render_rule(r)) == r`.
pub fn render_rule(rule: &Rule) -> String {
    rule.to_string()
}

/// Ordered rule collection with unique `(head, body)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self, RuleError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert((r.head.clone(), r.body.clone())) {
                return Err(RuleError::Duplicate(r.to_string()));
            }
        }
        Ok(RuleSet { rules })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rule> {
        self.rules.iter()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn get(&self, idx: usize) -> Option<&Rule> {
        self.rules.get(idx)
    }

    pub fn as_slice(&self) -> &[Rule] {
        &self.rules
    }

    /// The support scores, in rule order.
    pub fn supports(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.support).collect()
    }

    pub fn find(&self, head: &Relation, body: &[Relation]) -> Option<&Rule> {
        self.rules.iter().find(|r| &r.head == head && r.body == body)
    }

    pub fn from_reader<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut rules = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let rule = parse_rule(trimmed).map_err(|e| RuleError::AtLine {
                line: line_no,
                source: Box::new(e),
            })?;
            if !seen.insert((rule.head.clone(), rule.body.clone())) {
                return Err(RuleError::AtLine {
                    line: line_no,
                    source: Box::new(RuleError::Duplicate(rule.to_string())),
                }
                .into());
            }
            rules.push(rule);
        }
        Ok(RuleSet { rules })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.rules {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a RuleSet {
    type Item = &'a Rule;
    type IntoIter = std::slice::Iter<'a, Rule>;

    fn into_iter(self) -> Self::IntoIter {
        self.rules.iter()
    }
}

pub fn load_rules(path: &Path) -> Result<RuleSet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    RuleSet::from_reader(BufReader::new(file), path)
}

pub fn save_rules(rules: &RuleSet, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    rules.write_to(&mut file).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    LParen,
    RParen,
    Comma,
    And,
    Arrow,
    At,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c == '.'
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    /// Next token and its starting byte offset; `None` at end of input.
    fn next(&mut self) -> Result<Option<(usize, Tok<'a>)>, RuleError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok(None);
        };
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '&' | '∧' | '^' => Some(Tok::And),
            '→' => Some(Tok::Arrow),
            '@' => Some(Tok::At),
            _ => None,
        };
        if let Some(tok) = simple {
            self.pos += c.len_utf8();
            return Ok(Some((start, tok)));
        }
        if rest.starts_with("->") {
            self.pos += 2;
            return Ok(Some((start, Tok::Arrow)));
        }
        if is_ident_char(c) {
            let mut end = 0;
            for (i, ch) in rest.char_indices() {
                if !is_ident_char(ch) || (ch == '-' && rest[i..].starts_with("->")) {
                    break;
                }
                end = i + ch.len_utf8();
            }
            self.pos += end;
            return Ok(Some((start, Tok::Ident(&rest[..end]))));
        }
        Err(RuleError::Syntax {
            offset: start,
            message: format!("unexpected character {c:?}"),
        })
    }
}

struct Atom<'a> {
    offset: usize,
    relation: &'a str,
    left: &'a str,
    right: &'a str,
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<Option<(usize, Tok<'a>)>>,
}

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<Option<&(usize, Tok<'a>)>, RuleError> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next()?);
        }
        Ok(self.peeked.as_ref().and_then(|t| t.as_ref()))
    }

    fn bump(&mut self) -> Result<Option<(usize, Tok<'a>)>, RuleError> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lexer.next(),
        }
    }

    fn end_offset(&self) -> usize {
        self.lexer.src.len()
    }

    fn expect(&mut self, want: Tok<'static>, what: &str) -> Result<usize, RuleError> {
        match self.bump()? {
            Some((off, tok)) if tok == want => Ok(off),
            Some((off, tok)) => Err(RuleError::Syntax {
                offset: off,
                message: format!("expected {what}, found {tok:?}"),
            }),
            None => Err(RuleError::Syntax {
                offset: self.end_offset(),
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn ident(&mut self, what: &str) -> Result<(usize, &'a str), RuleError> {
        match self.bump()? {
            Some((off, Tok::Ident(name))) => Ok((off, name)),
            Some((off, tok)) => Err(RuleError::Syntax {
                offset: off,
                message: format!("expected {what}, found {tok:?}"),
            }),
            None => Err(RuleError::Syntax {
                offset: self.end_offset(),
                message: format!("expected {what}, found end of input"),
            }),
        }
    }

    fn atom(&mut self) -> Result<Atom<'a>, RuleError> {
        let (offset, relation) = self.ident("relation name")?;
        self.expect(Tok::LParen, "'('")?;
        let (_, left) = self.ident("variable")?;
        self.expect(Tok::Comma, "','")?;
        let (_, right) = self.ident("variable")?;
        self.expect(Tok::RParen, "')'")?;
        Ok(Atom {
            offset,
            relation,
            left,
            right,
        })
    }
}

/// Parses one rule. Never panics; every failure carries a byte offset.
pub fn parse_rule(text: &str) -> Result<Rule, RuleError> {
    let mut p = Parser {
        lexer: Lexer::new(text),
        peeked: None,
    };
    let mut body = vec![p.atom()?];
    while let Some((_, Tok::And)) = p.peek()? {
        p.bump()?;
        body.push(p.atom()?);
    }
    p.expect(Tok::Arrow, "'&' or '->'")?;
    let head = p.atom()?;

    let support = match p.bump()? {
        None => 1.0,
        Some((_, Tok::At)) => {
            let (off, raw) = p.ident("support value")?;
            let value: f64 = raw.parse().map_err(|_| RuleError::Syntax {
                offset: off,
                message: format!("invalid support value {raw:?}"),
            })?;
            if !(0.0..=1.0).contains(&value) {
                return Err(RuleError::Support(value));
            }
            if let Some((off, tok)) = p.bump()? {
                return Err(RuleError::Syntax {
                    offset: off,
                    message: format!("unexpected trailing {tok:?}"),
                });
            }
            value
        }
        Some((off, tok)) => {
            return Err(RuleError::Syntax {
                offset: off,
                message: format!("expected '@' or end of input, found {tok:?}"),
            })
        }
    };

    check_chain(&body, &head)?;

    let rel = |a: &Atom<'_>| {
        Relation::new(a.relation).map_err(|_| RuleError::Syntax {
            offset: a.offset,
            message: "empty relation name".into(),
        })
    };
    let body_rels = body.iter().map(rel).collect::<Result<Vec<_>, _>>()?;
    Rule::from_parts(rel(&head)?, body_rels, support)
}

fn check_chain(body: &[Atom<'_>], head: &Atom<'_>) -> Result<(), RuleError> {
    let mut vars: Vec<&str> = vec![body[0].left];
    for (i, atom) in body.iter().enumerate() {
        let expected_left = vars[i];
        if atom.left != expected_left {
            return Err(RuleError::Chain {
                offset: atom.offset,
                message: format!("atom {} must start with {expected_left}, found {}", i + 1, atom.left),
            });
        }
        if vars.contains(&atom.right) {
            return Err(RuleError::Chain {
                offset: atom.offset,
                message: format!("variable {} reused", atom.right),
            });
        }
        vars.push(atom.right);
    }
    let (first, last) = (vars[0], vars[vars.len() - 1]);
    if head.left != first || head.right != last {
        return Err(RuleError::Chain {
            offset: head.offset,
            message: format!("head must be ({first},{last}), found ({},{})", head.left, head.right),
        });
    }
    Ok(())
}
