//! Translates flexible natural-language queries ("List orders details where
//! unitprice should be greater than 200") into SQL over a declared schema,
//! evaluates them against CSV-backed tables, and remembers which
//! translations users accepted or rejected.
//!
//! The pipeline is `parser` -> `resolver` -> `sqlgen` / `executor`, driven by
//! the training structures in `lexicon` and the metadata in `catalog`.
//! `knowledge` holds the feedback journal.

pub mod catalog;
pub mod executor;
pub mod knowledge;
pub mod lexicon;
pub mod matching;
pub mod parser;
pub mod resolver;
pub mod sqlgen;

pub use catalog::{load_catalog, SchemaCatalog};
pub use executor::{execute, ResultSet};
pub use knowledge::{normalize_query, KnowledgeStore, Verdict};
pub use lexicon::{load_lexicon, save_lexicon, Lexicon, Operator};
pub use parser::{parse, QueryIR};
pub use resolver::{ResolvedQuery, Resolver, ResolverConfig};
pub use sqlgen::{build_sql, SqlText};
