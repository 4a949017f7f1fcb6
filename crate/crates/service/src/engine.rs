//! Wires parser, resolver, SQL generation, execution and the knowledge store
//! into the translate / execute / feedback loop shared by the HTTP API and
//! the CLI.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use flexq_core::catalog::{CatalogError, SchemaCatalog};
use flexq_core::executor::{self, ExecError, ResultSet};
use flexq_core::knowledge::{normalize_query, EntryStatus, KnowledgeEntry, KnowledgeError, KnowledgeStore, Verdict};
use flexq_core::lexicon::{save_lexicon, Lexicon, LexiconError};
use flexq_core::parser::{parse, ParseError, QueryIR};
use flexq_core::resolver::{Candidate, ResolveError, Resolver, ResolverConfig, TraceStep};
use flexq_core::sqlgen::build_sql;
use serde::Serialize;
use thiserror::Error;

pub const KB_HIT_STAGE: &str = "knowledge-base hit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Pipeline,
    KnowledgeBase,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Pipeline => "pipeline",
            Source::KnowledgeBase => "knowledge-base",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TranslateResponse {
    pub query_id: String,
    pub sql: String,
    pub source: Source,
    pub trace: Vec<TraceStep>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackSummary {
    pub query_id: String,
    pub status: EntryStatus,
    pub accepts: u32,
    pub rejects: u32,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::Parse(e) => e.code(),
            PipelineError::Resolve(e) => e.code(),
            PipelineError::Knowledge(e) => e.code(),
            PipelineError::Exec(e) => e.code(),
            PipelineError::Lexicon(LexiconError::Ambiguous { .. }) => "ambiguous-conjunction",
            PipelineError::Lexicon(_) => "lexicon",
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            PipelineError::Parse(e) => e.stage(),
            PipelineError::Resolve(e) => e.stage(),
            PipelineError::Knowledge(KnowledgeError::EmptyAfterNormalization) => "tokenize",
            PipelineError::Knowledge(_) => "knowledge",
            PipelineError::Exec(_) => "execute",
            PipelineError::Lexicon(_) => "lexicon",
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        match self {
            PipelineError::Resolve(e) => e.candidates(),
            _ => &[],
        }
    }

    /// Suggested words for `add-conjunction` when the conjunction was not
    /// recognized.
    pub fn conjunction_suggestions(&self) -> Option<&[String]> {
        match self {
            PipelineError::Parse(ParseError::UnknownConjunction { candidates }) => Some(candidates),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

/// Paths and knobs the engine is built from.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub catalog: PathBuf,
    pub data_dir: PathBuf,
    pub lexicon: PathBuf,
    /// `None` keeps the knowledge store in memory.
    pub knowledge: Option<PathBuf>,
    pub resolver: ResolverConfig,
}

pub struct Engine {
    catalog: Arc<SchemaCatalog>,
    lexicon: RwLock<Arc<Lexicon>>,
    lexicon_path: Option<PathBuf>,
    resolver: ResolverConfig,
    knowledge: Mutex<KnowledgeStore>,
}

fn describe_ir(ir: &QueryIR) -> String {
    let conds: Vec<String> = ir
        .conditions
        .iter()
        .map(|c| format!("{} {} {}", c.field_phrase.join(" "), c.operator, c.literal))
        .collect();
    format!(
        "display=[{}] conjunction={} conditions=[{}]",
        ir.display_tokens.join(", "),
        ir.conjunction.as_deref().unwrap_or("-"),
        conds.join("; ")
    )
}

impl Engine {
    pub fn load(config: &EngineConfig) -> Result<Self, SetupError> {
        let catalog = flexq_core::load_catalog(&config.catalog, &config.data_dir)?;
        let lexicon = flexq_core::load_lexicon(&config.lexicon)?;
        let knowledge = match &config.knowledge {
            Some(p) => KnowledgeStore::open(p)?,
            None => KnowledgeStore::in_memory(),
        };
        Ok(Engine::new(catalog, lexicon, knowledge, config.resolver).with_lexicon_path(&config.lexicon))
    }

    pub fn new(
        catalog: SchemaCatalog,
        lexicon: Lexicon,
        knowledge: KnowledgeStore,
        resolver: ResolverConfig,
    ) -> Self {
        Engine {
            catalog: Arc::new(catalog),
            lexicon: RwLock::new(Arc::new(lexicon)),
            lexicon_path: None,
            resolver,
            knowledge: Mutex::new(knowledge),
        }
    }

    /// Where `add_conjunction` persists the lexicon.
    pub fn with_lexicon_path(mut self, path: impl AsRef<Path>) -> Self {
        self.lexicon_path = Some(path.as_ref().to_path_buf());
        self
    }

    pub fn catalog(&self) -> &SchemaCatalog {
        &self.catalog
    }

    pub fn lexicon(&self) -> Arc<Lexicon> {
        self.lexicon.read().expect("lexicon lock").clone()
    }

    fn kb(&self) -> std::sync::MutexGuard<'_, KnowledgeStore> {
        self.knowledge.lock().expect("knowledge lock")
    }

    pub fn translate(&self, raw: &str) -> Result<TranslateResponse, PipelineError> {
        let key = normalize_query(raw)?;
        let mut kb = self.kb();
        if let Some(hit) = kb.lookup(&key) {
            return Ok(TranslateResponse {
                query_id: hit.id.clone(),
                sql: hit.sql.text.clone(),
                source: Source::KnowledgeBase,
                trace: vec![TraceStep::new(
                    KB_HIT_STAGE,
                    key.clone(),
                    format!(
                        "knowledge-base hit: entry {} accepted {} time(s); resolver not invoked",
                        hit.id, hit.accepts
                    ),
                )],
                warnings: Vec::new(),
            });
        }

        let lexicon = self.lexicon();
        let ir = parse(raw, &lexicon)?;
        let blocked: Vec<String> = kb.blocked_sql(&key).into_iter().map(String::from).collect();
        let resolver = Resolver::new(&self.catalog, &lexicon, self.resolver);
        let resolution =
            resolver.resolve_avoiding(&ir, |rq| blocked.iter().any(|b| *b == build_sql(rq).text))?;

        let mut rq = resolution.query;
        let mut trace = vec![TraceStep::new("parse", raw.trim(), describe_ir(&ir))];
        trace.append(&mut rq.trace);
        rq.trace = trace;

        let mut warnings = Vec::new();
        if resolution.exhausted {
            warnings.push(
                "every alternative translation was previously rejected; returning the best-ranked one"
                    .to_string(),
            );
        }
        let sql = build_sql(&rq);
        let query_id = kb.record(&key, &sql, &rq)?;
        Ok(TranslateResponse {
            query_id,
            sql: sql.text,
            source: Source::Pipeline,
            trace: rq.trace,
            warnings,
        })
    }

    pub fn execute(&self, query_id: &str) -> Result<ResultSet, PipelineError> {
        let rq = {
            let kb = self.kb();
            kb.get(query_id)
                .ok_or_else(|| KnowledgeError::UnknownEntry(query_id.to_string()))?
                .resolved
                .clone()
        };
        Ok(executor::execute(&rq, &self.catalog)?)
    }

    pub fn feedback(
        &self,
        query_id: &str,
        verdict: &str,
        note: Option<&str>,
    ) -> Result<FeedbackSummary, PipelineError> {
        let verdict: Verdict = verdict.parse()?;
        let mut kb = self.kb();
        let e = kb.feedback(query_id, verdict, note)?;
        Ok(FeedbackSummary {
            query_id: e.id.clone(),
            status: e.status,
            accepts: e.accepts,
            rejects: e.rejects,
        })
    }

    /// Entries recorded under the normalized form of `key`.
    pub fn entries_for(&self, key: &str) -> Vec<KnowledgeEntry> {
        let Ok(key) = normalize_query(key) else {
            return Vec::new();
        };
        self.kb().entries_for(&key).into_iter().cloned().collect()
    }

    pub fn add_conjunction(&self, word: &str) -> Result<Arc<Lexicon>, PipelineError> {
        let mut guard = self.lexicon.write().expect("lexicon lock");
        let next = Arc::new(guard.add_conjunction(word)?);
        if let Some(path) = &self.lexicon_path {
            save_lexicon(&next, path)?;
        }
        *guard = next.clone();
        Ok(next)
    }

    pub fn schema_summary(&self) -> serde_json::Value {
        let tables: Vec<serde_json::Value> = self
            .catalog
            .tables()
            .map(|t| {
                serde_json::json!({
                    "name": t.name,
                    "primaryKey": t.primary_key,
                    "rowCount": self.catalog.row_count(&t.name).unwrap_or(0),
                    "fields": t.fields,
                })
            })
            .collect();
        serde_json::json!({ "tables": tables })
    }
}
