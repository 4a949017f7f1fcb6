//! Training structures consulted by the parser and resolver: the expression
//! map, conjunctions, stop words, and table/field synonym sets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison operator produced by expression mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "EQ")]
    Eq,
    #[serde(rename = "NEQ")]
    Neq,
    #[serde(rename = "GT")]
    Gt,
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "GTE")]
    Gte,
    #[serde(rename = "LTE")]
    Lte,
}

impl Operator {
    pub const ALL: [Operator; 6] = [
        Operator::Eq,
        Operator::Neq,
        Operator::Gt,
        Operator::Lt,
        Operator::Gte,
        Operator::Lte,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Operator::Eq => "EQ",
            Operator::Neq => "NEQ",
            Operator::Gt => "GT",
            Operator::Lt => "LT",
            Operator::Gte => "GTE",
            Operator::Lte => "LTE",
        }
    }

    /// SQL rendering of the operator.
    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Eq => "=",
            Operator::Neq => "!=",
            Operator::Gt => ">",
            Operator::Lt => "<",
            Operator::Gte => ">=",
            Operator::Lte => "<=",
        }
    }

    /// Parses a symbolic operator as typed by a user. `<>` is accepted as `!=`.
    pub fn from_symbol(s: &str) -> Option<Operator> {
        Some(match s {
            "=" | "==" => Operator::Eq,
            "!=" | "<>" => Operator::Neq,
            ">" => Operator::Gt,
            "<" => Operator::Lt,
            ">=" => Operator::Gte,
            "<=" => Operator::Lte,
            _ => return None,
        })
    }

    /// True for the ordering operators, which require numeric operands.
    pub fn is_ordering(self) -> bool {
        matches!(self, Operator::Gt | Operator::Lt | Operator::Gte | Operator::Lte)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpressionRule {
    /// Lowercase words, matched contiguously (modulo stop words).
    pub phrase: Vec<String>,
    pub operator: Operator,
}

impl ExpressionRule {
    pub fn first_word(&self) -> &str {
        &self.phrase[0]
    }

    pub fn phrase_text(&self) -> String {
        self.phrase.join(" ")
    }
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon file not found: {0}")]
    FileMissing(String),
    #[error("malformed lexicon file {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("invalid lexicon entry {entry}: {reason}")]
    InvariantViolation { entry: String, reason: String },
    #[error("'{word}' is the first word of expression phrase '{phrase}' and cannot also be a {role}")]
    Ambiguous {
        word: String,
        phrase: String,
        role: &'static str,
    },
    #[error("lexicon i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The predefined training structures. Immutable once built; mutators return
/// a new value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    expression_rules: Vec<ExpressionRule>,
    conjunctions: BTreeSet<String>,
    stop_words: BTreeSet<String>,
    table_synonyms: BTreeMap<String, BTreeSet<String>>,
    field_synonyms: BTreeMap<(String, String), BTreeSet<String>>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct LexiconFile {
    #[serde(default)]
    expression_rules: Vec<RuleFile>,
    #[serde(default)]
    conjunctions: Vec<String>,
    #[serde(default)]
    stop_words: Vec<String>,
    #[serde(default)]
    table_synonyms: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    field_synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    phrase: String,
    operator: Operator,
}

fn is_plain_word(w: &str) -> bool {
    !w.is_empty() && w.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

fn normalize_word(raw: &str, entry: impl Fn() -> String) -> Result<String, LexiconError> {
    let w = raw.trim().to_lowercase();
    if !is_plain_word(&w) {
        return Err(LexiconError::InvariantViolation {
            entry: entry(),
            reason: format!("'{raw}' is not a single word without punctuation"),
        });
    }
    Ok(w)
}

impl Lexicon {
    /// Builds a lexicon from its parts, normalizing case and validating every
    /// invariant.
    pub fn new(
        rules: Vec<(String, Operator)>,
        conjunctions: impl IntoIterator<Item = String>,
        stop_words: impl IntoIterator<Item = String>,
        table_synonyms: BTreeMap<String, Vec<String>>,
        field_synonyms: BTreeMap<(String, String), Vec<String>>,
    ) -> Result<Self, LexiconError> {
        let mut expression_rules: Vec<ExpressionRule> = Vec::with_capacity(rules.len());
        for (phrase, operator) in rules {
            let entry = || format!("expression rule '{phrase}'");
            let words = phrase
                .split_whitespace()
                .map(|w| normalize_word(w, entry))
                .collect::<Result<Vec<_>, _>>()?;
            if words.is_empty() {
                return Err(LexiconError::InvariantViolation {
                    entry: entry(),
                    reason: "phrase is empty".into(),
                });
            }
            if expression_rules.iter().any(|r| r.phrase == words) {
                return Err(LexiconError::InvariantViolation {
                    entry: entry(),
                    reason: "duplicate phrase".into(),
                });
            }
            expression_rules.push(ExpressionRule {
                phrase: words,
                operator,
            });
        }

        let mut lex = Lexicon {
            expression_rules,
            ..Default::default()
        };
        for w in conjunctions {
            let w = normalize_word(&w, || format!("conjunction '{w}'"))?;
            lex.check_unambiguous(&w, "conjunction")?;
            lex.conjunctions.insert(w);
        }
        for w in stop_words {
            let w = normalize_word(&w, || format!("stop word '{w}'"))?;
            lex.check_unambiguous(&w, "stop word")?;
            lex.stop_words.insert(w);
        }
        for (table, syns) in table_synonyms {
            let canonical = table.trim().to_lowercase();
            let set = Self::synonym_set(&canonical, syns, || format!("table synonyms for '{table}'"))?;
            lex.table_synonyms.entry(canonical).or_default().extend(set);
        }
        for ((table, field), syns) in field_synonyms {
            let key = (table.trim().to_lowercase(), field.trim().to_lowercase());
            let set = Self::synonym_set(&key.1, syns, || {
                format!("field synonyms for '{table}.{field}'")
            })?;
            lex.field_synonyms.entry(key).or_default().extend(set);
        }
        Ok(lex)
    }

    fn synonym_set(
        canonical: &str,
        syns: Vec<String>,
        entry: impl Fn() -> String,
    ) -> Result<BTreeSet<String>, LexiconError> {
        let mut out = BTreeSet::new();
        for s in syns {
            let w = normalize_word(&s, &entry)?;
            if w == canonical {
                return Err(LexiconError::InvariantViolation {
                    entry: entry(),
                    reason: format!("synonym set contains the canonical name '{w}'"),
                });
            }
            out.insert(w);
        }
        Ok(out)
    }

    fn check_unambiguous(&self, word: &str, role: &'static str) -> Result<(), LexiconError> {
        match self.expression_rules.iter().find(|r| r.first_word() == word) {
            Some(rule) => Err(LexiconError::Ambiguous {
                word: word.to_string(),
                phrase: rule.phrase_text(),
                role,
            }),
            None => Ok(()),
        }
    }

    pub fn expression_rules(&self) -> &[ExpressionRule] {
        &self.expression_rules
    }

    pub fn conjunctions(&self) -> &BTreeSet<String> {
        &self.conjunctions
    }

    pub fn stop_words(&self) -> &BTreeSet<String> {
        &self.stop_words
    }

    pub fn table_synonyms(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.table_synonyms
    }

    pub fn field_synonyms(&self) -> &BTreeMap<(String, String), BTreeSet<String>> {
        &self.field_synonyms
    }

    pub fn is_conjunction(&self, word: &str) -> bool {
        self.conjunctions.contains(&word.to_lowercase())
    }

    pub fn is_stop_word(&self, word: &str) -> bool {
        self.stop_words.contains(&word.to_lowercase())
    }

    /// Synonyms declared for a table (canonical name, any case).
    pub fn synonyms_for_table(&self, table: &str) -> Option<&BTreeSet<String>> {
        self.table_synonyms.get(&table.to_lowercase())
    }

    pub fn synonyms_for_field(&self, table: &str, field: &str) -> Option<&BTreeSet<String>> {
        self.field_synonyms
            .get(&(table.to_lowercase(), field.to_lowercase()))
    }

    /// Rules ordered longest phrase first; ties keep declaration order.
    pub fn rules_longest_first(&self) -> Vec<&ExpressionRule> {
        let mut rules: Vec<&ExpressionRule> = self.expression_rules.iter().collect();
        rules.sort_by_key(|r| std::cmp::Reverse(r.phrase.len()));
        rules
    }

    /// Returns a lexicon that also contains `word` as a conjunction.
    pub fn add_conjunction(&self, word: &str) -> Result<Lexicon, LexiconError> {
        let w = normalize_word(word, || format!("conjunction '{word}'"))?;
        self.check_unambiguous(&w, "conjunction")?;
        let mut next = self.clone();
        next.conjunctions.insert(w);
        Ok(next)
    }

    pub fn from_json_str(text: &str, origin: &str) -> Result<Lexicon, LexiconError> {
        let file: LexiconFile =
            serde_json::from_str(text).map_err(|e| LexiconError::Malformed {
                path: origin.to_string(),
                reason: e.to_string(),
            })?;
        let mut field_synonyms = BTreeMap::new();
        for (key, syns) in file.field_synonyms {
            let Some((table, field)) = key.split_once('.') else {
                return Err(LexiconError::InvariantViolation {
                    entry: format!("field synonyms key '{key}'"),
                    reason: "expected \"table.field\"".into(),
                });
            };
            field_synonyms.insert((table.to_string(), field.to_string()), syns);
        }
        Lexicon::new(
            file.expression_rules
                .into_iter()
                .map(|r| (r.phrase, r.operator))
                .collect(),
            file.conjunctions,
            file.stop_words,
            file.table_synonyms,
            field_synonyms,
        )
    }

    pub fn to_json_string(&self) -> String {
        let file = LexiconFile {
            expression_rules: self
                .expression_rules
                .iter()
                .map(|r| RuleFile {
                    phrase: r.phrase_text(),
                    operator: r.operator,
                })
                .collect(),
            conjunctions: self.conjunctions.iter().cloned().collect(),
            stop_words: self.stop_words.iter().cloned().collect(),
            table_synonyms: self
                .table_synonyms
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
            field_synonyms: self
                .field_synonyms
                .iter()
                .map(|((t, f), v)| (format!("{t}.{f}"), v.iter().cloned().collect()))
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("lexicon serializes");
        out.push('\n');
        out
    }
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(LexiconError::FileMissing(shown))
        }
        Err(source) => return Err(LexiconError::Io { path: shown, source }),
    };
    Lexicon::from_json_str(&text, &shown)
}

pub fn save_lexicon(lex: &Lexicon, path: impl AsRef<Path>) -> Result<(), LexiconError> {
    let path = path.as_ref();
    std::fs::write(path, lex.to_json_string()).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}
