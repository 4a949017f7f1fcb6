//! Binds parsed query words to catalog tables and fields.
//!
//! Tables and fields go through the same cascade: exact name match, then the
//! lexicon's synonym sets, then edit distance within a threshold. Related
//! tables are those carrying the base table's primary-key field; a related
//! table survives refinement only if its key values are a subset of the
//! base table's key values.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{SchemaCatalog, TableDef};
use crate::lexicon::{Lexicon, Operator};
use crate::matching::{ranked_candidates, DistanceMetric};
use crate::parser::{Condition, Literal, QueryIR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Exact,
    Semantic,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub surface: String,
    pub bound: String,
    pub method: MatchMethod,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinTable {
    pub table: String,
    /// The join table's own spelling of the shared key field.
    pub field: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCondition {
    pub table: String,
    pub field: Binding,
    pub operator: Operator,
    pub literal: Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: String,
    pub input: String,
    pub outcome: String,
}

impl TraceStep {
    pub fn new(stage: &str, input: impl Into<String>, outcome: impl Into<String>) -> Self {
        TraceStep {
            stage: stage.to_string(),
            input: input.into(),
            outcome: outcome.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedQuery {
    pub base_table: Binding,
    /// The base table's primary-key field, source casing.
    pub base_key: String,
    pub join_tables: Vec<JoinTable>,
    pub conditions: Vec<ResolvedCondition>,
    pub trace: Vec<TraceStep>,
}

/// A near miss reported in resolution errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<String>,
    pub name: String,
    pub distance: usize,
}

impl std::fmt::Display for Candidate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.table {
            Some(t) => write!(f, "{t}.{} ({})", self.name, self.distance),
            None => write!(f, "{} ({})", self.name, self.distance),
        }
    }
}

fn list(cands: &[Candidate]) -> String {
    cands.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ResolveError {
    #[error("unresolvable-table: no table matches [{}]; nearest: {}", surfaces.join(", "), list(nearest))]
    UnresolvableTable {
        surfaces: Vec<String>,
        nearest: Vec<Candidate>,
    },
    #[error("unresolvable-field: no field matches '{phrase}'; nearest: {}", list(nearest))]
    UnresolvableField {
        phrase: String,
        nearest: Vec<Candidate>,
    },
    #[error("ambiguous-field: '{phrase}' matches equally well: {}", list(candidates))]
    AmbiguousField {
        phrase: String,
        candidates: Vec<Candidate>,
    },
    #[error("unknown-table: '{0}' is not in the catalog")]
    UnknownTable(String),
}

impl ResolveError {
    pub fn code(&self) -> &'static str {
        match self {
            ResolveError::UnresolvableTable { .. } => "unresolvable-table",
            ResolveError::UnresolvableField { .. } => "unresolvable-field",
            ResolveError::AmbiguousField { .. } => "ambiguous-field",
            ResolveError::UnknownTable(_) => "unknown-table",
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            ResolveError::UnresolvableTable { .. } | ResolveError::UnknownTable(_) => "resolve_table",
            ResolveError::UnresolvableField { .. } | ResolveError::AmbiguousField { .. } => {
                "resolve_field"
            }
        }
    }

    pub fn candidates(&self) -> &[Candidate] {
        match self {
            ResolveError::UnresolvableTable { nearest, .. }
            | ResolveError::UnresolvableField { nearest, .. } => nearest,
            ResolveError::AmbiguousField { candidates, .. } => candidates,
            ResolveError::UnknownTable(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolverConfig {
    pub max_distance: usize,
    pub metric: DistanceMetric,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig {
            max_distance: 2,
            metric: DistanceMetric::Levenshtein,
        }
    }
}

/// Tables other than `base` that declare `base`'s primary-key field.
pub fn related_tables<'c>(base: &str, cat: &'c SchemaCatalog) -> Result<Vec<&'c str>, ResolveError> {
    let def = cat
        .table(base)
        .ok_or_else(|| ResolveError::UnknownTable(base.to_string()))?;
    Ok(cat
        .tables_with_field(&def.primary_key)
        .into_iter()
        .filter(|t| !t.eq_ignore_ascii_case(&def.name))
        .collect())
}

/// Keeps the candidates whose distinct key values all occur among the base
/// table's distinct key values. Preserves candidate order.
pub fn refine_by_values<'a>(
    candidates: &[&'a str],
    base: &str,
    cat: &SchemaCatalog,
) -> Result<Vec<&'a str>, ResolveError> {
    let def = cat
        .table(base)
        .ok_or_else(|| ResolveError::UnknownTable(base.to_string()))?;
    let base_values = cat
        .distinct_values(&def.name, &def.primary_key)
        .expect("key column exists");
    Ok(candidates
        .iter()
        .copied()
        .filter(|cand| match cat.distinct_values(cand, &def.primary_key) {
            Ok(values) => values.is_subset(&base_values),
            Err(_) => false,
        })
        .collect())
}

/// Outcome of resolution that may have skipped blocklisted candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolution {
    pub query: ResolvedQuery,
    /// Number of candidate combinations rejected by the blocklist predicate.
    pub skipped: usize,
    /// True when every candidate was blocked and the best one was kept anyway.
    pub exhausted: bool,
}

const MAX_ALTERNATIVES: usize = 256;

/// Steps a mixed-radix counter; false once it wraps around.
fn advance<T>(idx: &mut [usize], lists: &[Vec<T>]) -> bool {
    for pos in (0..idx.len()).rev() {
        idx[pos] += 1;
        if idx[pos] < lists[pos].len() {
            return true;
        }
        idx[pos] = 0;
    }
    false
}

pub struct Resolver<'a> {
    catalog: &'a SchemaCatalog,
    lexicon: &'a Lexicon,
    config: ResolverConfig,
}

/// Words to try for a multi-word phrase: the words run together, then each word.
fn surfaces(words: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len() + 1);
    if words.len() > 1 {
        out.push(words.concat());
    }
    out.extend(words.iter().cloned());
    out
}

impl<'a> Resolver<'a> {
    pub fn new(catalog: &'a SchemaCatalog, lexicon: &'a Lexicon, config: ResolverConfig) -> Self {
        Resolver {
            catalog,
            lexicon,
            config,
        }
    }

    pub fn config(&self) -> ResolverConfig {
        self.config
    }

    fn fuzzy_note(&self, surface: &str, bound: &str, distance: usize) -> String {
        let metric = self.config.metric;
        let mut note = format!("{} distance {distance}", metric.name());
        if let Some(singular) = bound.strip_suffix(['s', 'S']) {
            let to_singular = metric.distance(surface, singular);
            if to_singular + 1 == distance {
                note.push_str(&format!(
                    " = {to_singular} to singular '{singular}' + 1 for the plural"
                ));
            }
        }
        note
    }

    /// Every table binding for the display words, best first, one per table.
    pub fn table_candidates(&self, display_tokens: &[String]) -> Vec<Binding> {
        let surfaces = surfaces(display_tokens);
        let mut out: Vec<Binding> = Vec::new();
        let mut push = |b: Binding| {
            if !out.iter().any(|o| o.bound == b.bound) {
                out.push(b);
            }
        };
        for s in &surfaces {
            if let Some(t) = self.catalog.table(s) {
                push(Binding {
                    surface: s.clone(),
                    bound: t.name.clone(),
                    method: MatchMethod::Exact,
                    distance: 0,
                });
            }
        }
        for s in &surfaces {
            let lower = s.to_lowercase();
            for t in self.catalog.tables() {
                if self
                    .lexicon
                    .synonyms_for_table(&t.name)
                    .is_some_and(|syn| syn.contains(&lower))
                {
                    push(Binding {
                        surface: s.clone(),
                        bound: t.name.clone(),
                        method: MatchMethod::Semantic,
                        distance: 0,
                    });
                }
            }
        }
        let mut fuzzy: Vec<(usize, String, usize, String)> = Vec::new();
        for (order, s) in surfaces.iter().enumerate() {
            if let Ok(ranked) = ranked_candidates(s, self.catalog.table_names(), self.config.metric) {
                for m in ranked.into_iter().filter(|m| m.distance <= self.config.max_distance) {
                    fuzzy.push((m.distance, m.candidate, order, s.clone()));
                }
            }
        }
        fuzzy.sort();
        for (distance, bound, _, surface) in fuzzy {
            push(Binding {
                surface,
                bound,
                method: MatchMethod::Fuzzy,
                distance,
            });
        }
        out
    }

    fn nearest_tables(&self, surfaces: &[String]) -> Vec<Candidate> {
        let mut all: Vec<Candidate> = Vec::new();
        for s in surfaces {
            if let Ok(ranked) = ranked_candidates(s, self.catalog.table_names(), self.config.metric) {
                for m in ranked {
                    match all.iter_mut().find(|c| c.name == m.candidate) {
                        Some(c) => c.distance = c.distance.min(m.distance),
                        None => all.push(Candidate {
                            table: None,
                            name: m.candidate,
                            distance: m.distance,
                        }),
                    }
                }
            }
        }
        all.sort_by(|a, b| (a.distance, &a.name).cmp(&(b.distance, &b.name)));
        all.truncate(3);
        all
    }

    pub fn resolve_table(&self, display_tokens: &[String]) -> Result<Binding, ResolveError> {
        self.table_candidates(display_tokens)
            .into_iter()
            .next()
            .ok_or_else(|| ResolveError::UnresolvableTable {
                surfaces: display_tokens.to_vec(),
                nearest: self.nearest_tables(&surfaces(display_tokens)),
            })
    }

    fn search_tables(&self, base: &str, refined: &[&str]) -> Result<Vec<&'a TableDef>, ResolveError> {
        let mut out = Vec::with_capacity(refined.len() + 1);
        for name in std::iter::once(base).chain(refined.iter().copied()) {
            out.push(
                self.catalog
                    .table(name)
                    .ok_or_else(|| ResolveError::UnknownTable(name.to_string()))?,
            );
        }
        Ok(out)
    }

    /// Every (table, field) binding for a condition, best first. Fails when
    /// nothing matches or when the best fuzzy distance is shared by different
    /// fields in different tables.
    pub fn field_candidates(
        &self,
        cond: &Condition,
        base: &str,
        refined: &[&str],
    ) -> Result<Vec<(String, Binding)>, ResolveError> {
        let tables = self.search_tables(base, refined)?;
        let surfaces = surfaces(&cond.field_phrase);
        let mut out: Vec<(String, Binding)> = Vec::new();
        fn push(out: &mut Vec<(String, Binding)>, table: &str, b: Binding) {
            if !out
                .iter()
                .any(|(t, o)| t.eq_ignore_ascii_case(table) && o.bound == b.bound)
            {
                out.push((table.to_string(), b));
            }
        }

        // exact: base first, then refined tables in order
        for t in &tables {
            for s in &surfaces {
                if let Some(f) = t.field(s) {
                    push(
                        &mut out,
                        &t.name,
                        Binding {
                            surface: s.clone(),
                            bound: f.name.clone(),
                            method: MatchMethod::Exact,
                            distance: 0,
                        },
                    );
                }
            }
        }
        // semantic
        for t in &tables {
            for s in &surfaces {
                let lower = s.to_lowercase();
                for f in &t.fields {
                    if self
                        .lexicon
                        .synonyms_for_field(&t.name, &f.name)
                        .is_some_and(|syn| syn.contains(&lower))
                    {
                        push(
                        &mut out,
                            &t.name,
                            Binding {
                                surface: s.clone(),
                                bound: f.name.clone(),
                                method: MatchMethod::Semantic,
                                distance: 0,
                            },
                        );
                    }
                }
            }
        }
        let have_certain = !out.is_empty();

        // fuzzy over the union of fields
        let mut fuzzy: Vec<(usize, usize, String, usize, String)> = Vec::new();
        for (ti, t) in tables.iter().enumerate() {
            for (si, s) in surfaces.iter().enumerate() {
                for f in &t.fields {
                    let d = self.config.metric.distance(s, &f.name);
                    if d <= self.config.max_distance {
                        fuzzy.push((d, ti, f.name.clone(), si, s.clone()));
                    }
                }
            }
        }
        fuzzy.sort_by_key(|f| (f.0, f.1, f.2.to_lowercase(), f.3));

        if !have_certain {
            if let Some(best) = fuzzy.first().map(|f| f.0) {
                let tied: Vec<&(usize, usize, String, usize, String)> =
                    fuzzy.iter().filter(|f| f.0 == best).collect();
                let names: BTreeSet<String> = tied.iter().map(|f| f.2.to_lowercase()).collect();
                let tables_hit: BTreeSet<usize> = tied.iter().map(|f| f.1).collect();
                if tables_hit.len() > 1 && names.len() > 1 {
                    let mut candidates: Vec<Candidate> = Vec::new();
                    for f in tied {
                        let c = Candidate {
                            table: Some(tables[f.1].name.clone()),
                            name: f.2.clone(),
                            distance: f.0,
                        };
                        if !candidates.contains(&c) {
                            candidates.push(c);
                        }
                    }
                    return Err(ResolveError::AmbiguousField {
                        phrase: cond.field_phrase.join(" "),
                        candidates,
                    });
                }
            }
        }
        for (distance, ti, field, _, surface) in fuzzy {
            push(
                        &mut out,
                &tables[ti].name,
                Binding {
                    surface,
                    bound: field,
                    method: MatchMethod::Fuzzy,
                    distance,
                },
            );
        }

        if out.is_empty() {
            let mut nearest: Vec<Candidate> = Vec::new();
            for t in &tables {
                for f in &t.fields {
                    let d = surfaces
                        .iter()
                        .map(|s| self.config.metric.distance(s, &f.name))
                        .min()
                        .unwrap_or(usize::MAX);
                    nearest.push(Candidate {
                        table: Some(t.name.clone()),
                        name: f.name.clone(),
                        distance: d,
                    });
                }
            }
            nearest.sort_by(|a, b| (a.distance, &a.name).cmp(&(b.distance, &b.name)));
            nearest.truncate(3);
            return Err(ResolveError::UnresolvableField {
                phrase: cond.field_phrase.join(" "),
                nearest,
            });
        }
        Ok(out)
    }

    pub fn resolve_field(
        &self,
        cond: &Condition,
        base: &str,
        refined: &[&str],
    ) -> Result<(String, Binding), ResolveError> {
        Ok(self
            .field_candidates(cond, base, refined)?
            .into_iter()
            .next()
            .expect("non-empty on success"))
    }

    fn describe(&self, b: &Binding) -> String {
        match b.method {
            MatchMethod::Exact => format!("'{}' -> {} (exact)", b.surface, b.bound),
            MatchMethod::Semantic => format!("'{}' -> {} (semantic synonym)", b.surface, b.bound),
            MatchMethod::Fuzzy => format!(
                "'{}' -> {} (fuzzy, {})",
                b.surface,
                b.bound,
                self.fuzzy_note(&b.surface, &b.bound, b.distance)
            ),
        }
    }

    /// Everything between table binding and field binding that does not
    /// depend on which field candidate is picked.
    fn table_context(&self, base: &Binding) -> Result<(String, Vec<&'a str>, Vec<TraceStep>), ResolveError> {
        let def = self
            .catalog
            .table(&base.bound)
            .ok_or_else(|| ResolveError::UnknownTable(base.bound.clone()))?;
        let mut trace = vec![TraceStep::new("resolve_table", base.surface.clone(), self.describe(base))];
        let related = related_tables(&def.name, self.catalog)?;
        trace.push(TraceStep::new(
            "related_tables",
            format!("{}.{}", def.name, def.primary_key),
            if related.is_empty() {
                "no other table carries the key".to_string()
            } else {
                related.join(", ")
            },
        ));
        let refined = refine_by_values(&related, &def.name, self.catalog)?;
        if !related.is_empty() {
            let dropped: Vec<&str> = related
                .iter()
                .copied()
                .filter(|r| !refined.contains(r))
                .collect();
            let mut outcome = format!("kept [{}]", refined.join(", "));
            if !dropped.is_empty() {
                outcome.push_str(&format!(
                    "; eliminated [{}] (key values not a subset of {})",
                    dropped.join(", "),
                    def.name
                ));
            }
            trace.push(TraceStep::new("refine_by_values", related.join(", "), outcome));
        }
        Ok((def.primary_key.clone(), refined, trace))
    }

    fn assemble(
        &self,
        base: &Binding,
        base_key: &str,
        refined: &[&str],
        mut trace: Vec<TraceStep>,
        conds: &[Condition],
        picks: &[(String, Binding)],
    ) -> ResolvedQuery {
        let mut conditions = Vec::with_capacity(conds.len());
        for (cond, (table, binding)) in conds.iter().zip(picks) {
            trace.push(TraceStep::new(
                "resolve_field",
                cond.field_phrase.join(" "),
                format!("{table}.{}", self.describe(binding)),
            ));
            conditions.push(ResolvedCondition {
                table: table.clone(),
                field: binding.clone(),
                operator: cond.operator,
                literal: cond.literal.clone(),
            });
        }
        let join_tables: Vec<JoinTable> = refined
            .iter()
            .filter(|t| conditions.iter().any(|c| c.table.eq_ignore_ascii_case(t)))
            .map(|t| {
                let def = self.catalog.table(t).expect("refined tables exist");
                JoinTable {
                    table: def.name.clone(),
                    field: def.field(base_key).expect("shares key").name.clone(),
                }
            })
            .collect();
        if !refined.is_empty() {
            trace.push(TraceStep::new(
                "join",
                refined.join(", "),
                if join_tables.is_empty() {
                    "no related table is referenced; querying the base table alone".to_string()
                } else {
                    join_tables
                        .iter()
                        .map(|j| format!("{} on {}", j.table, j.field))
                        .collect::<Vec<_>>()
                        .join(", ")
                },
            ));
        }
        ResolvedQuery {
            base_table: base.clone(),
            base_key: base_key.to_string(),
            join_tables,
            conditions,
            trace,
        }
    }

    pub fn resolve(&self, ir: &QueryIR) -> Result<ResolvedQuery, ResolveError> {
        let base = self.resolve_table(&ir.display_tokens)?;
        let (key, refined, trace) = self.table_context(&base)?;
        let picks = ir
            .conditions
            .iter()
            .map(|c| self.resolve_field(c, &base.bound, &refined))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(self.assemble(&base, &key, &refined, trace, &ir.conditions, &picks))
    }

    /// Resolves `ir`, walking down the ranked table and field candidates
    /// until `is_blocked` accepts a result. When every combination is
    /// blocked, the unblocked-best resolution is returned with `exhausted`.
    pub fn resolve_avoiding(
        &self,
        ir: &QueryIR,
        is_blocked: impl Fn(&ResolvedQuery) -> bool,
    ) -> Result<Resolution, ResolveError> {
        let primary = self.resolve(ir)?;
        if !is_blocked(&primary) {
            return Ok(Resolution {
                query: primary,
                skipped: 0,
                exhausted: false,
            });
        }
        let mut skipped_notes = Vec::new();
        let mut tried = 0usize;
        for base in self.table_candidates(&ir.display_tokens) {
            let Ok((key, refined, ctx_trace)) = self.table_context(&base) else {
                continue;
            };
            let per_cond: Result<Vec<Vec<(String, Binding)>>, _> = ir
                .conditions
                .iter()
                .map(|c| self.field_candidates(c, &base.bound, &refined))
                .collect();
            let Ok(per_cond) = per_cond else { continue };

            // odometer over the per-condition candidate lists
            let mut idx = vec![0usize; per_cond.len()];
            loop {
                tried += 1;
                if tried > MAX_ALTERNATIVES {
                    break;
                }
                let picks: Vec<(String, Binding)> = idx
                    .iter()
                    .zip(&per_cond)
                    .map(|(&i, cands)| cands[i].clone())
                    .collect();
                let rq = self.assemble(&base, &key, &refined, ctx_trace.clone(), &ir.conditions, &picks);
                if !is_blocked(&rq) {
                    let mut trace = skipped_notes;
                    trace.extend(rq.trace);
                    return Ok(Resolution {
                        skipped: trace.iter().filter(|s| s.stage == "blocklist").count(),
                        query: ResolvedQuery { trace, ..rq },
                        exhausted: false,
                    });
                }
                skipped_notes.push(TraceStep::new(
                    "blocklist",
                    format!(
                        "{}{}",
                        base.bound,
                        picks
                            .iter()
                            .map(|(t, b)| format!(", {t}.{}", b.bound))
                            .collect::<String>()
                    ),
                    "skipped: this translation was previously rejected",
                ));
                if !advance(&mut idx, &per_cond) {
                    break;
                }
            }
            if tried > MAX_ALTERNATIVES {
                break;
            }
        }
        let skipped = skipped_notes.len();
        let mut trace = skipped_notes;
        trace.push(TraceStep::new(
            "blocklist",
            ir.display_tokens.join(" "),
            "every candidate was previously rejected; keeping the best-ranked translation",
        ));
        trace.extend(primary.trace);
        Ok(Resolution {
            query: ResolvedQuery { trace, ..primary },
            skipped,
            exhausted: true,
        })
    }
}
