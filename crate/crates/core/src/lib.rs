//! Rule-based knowledge editing over a small in-memory knowledge graph.
//!
//! The pieces, in pipeline order: a triple store with alias tables
//! ([`kg`]), length-2 chain rules and their miner ([`rules`], [`miner`]),
//! a relation-name encoder ([`encoder`]), rule activation against edits
//! ([`activation`]), the edit memory ([`memory`]), forward/back tracking
//! that turns edits into derived edits ([`tracking`]), a counterfactual
//! multi-hop benchmark generator ([`benchmark`]) and the evaluation
//! harness ([`eval`]).

pub mod activation;
pub mod benchmark;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod kg;
pub mod memory;
pub mod miner;
pub mod rules;
pub mod templates;
pub mod tracking;

pub use benchmark::{BenchmarkInstance, GeneratorConfig, Scenario};
pub use encoder::{EmbeddingVector, HashedNgramEncoder, RelationEncoder};
pub use error::{Error, Result};
pub use eval::{ExperimentConfig, ExperimentReport, Prediction};
pub use kg::{AliasTable, EntityId, Fact, KnowledgeBase, Relation};
pub use memory::{Edit, EditMemory};
pub use rules::{Rule, RuleSet};
pub use templates::TemplateTable;
pub use tracking::{AugmentConfig, AugmentStats, KbOracle, KnowledgeOracle};
