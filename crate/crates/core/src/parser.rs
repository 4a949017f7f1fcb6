//! Front half of the pipeline: tokenization, conjunction detection, the
//! display/criteria partition, expression mapping and stop-word removal.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, Operator};

/// A condition literal. Numbers keep the text the user typed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Literal {
    Number(String),
    Text(String),
}

impl Literal {
    /// Unquoted tokens matching `[+-]?digits[.digits]` are numbers.
    pub fn classify(token: &str) -> Literal {
        if is_numeric_literal(token) {
            Literal::Number(token.to_string())
        } else {
            Literal::Text(token.to_string())
        }
    }

    pub fn text(&self) -> &str {
        match self {
            Literal::Number(s) | Literal::Text(s) => s,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.text())
    }
}

fn is_numeric_literal(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    /// The user's field words, stop words removed, original casing.
    pub field_phrase: Vec<String>,
    pub operator: Operator,
    pub literal: Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryIR {
    pub raw: String,
    pub tokens: Vec<String>,
    /// Tokens before the conjunction, as typed.
    pub display_raw: Vec<String>,
    /// Display tokens with stop words removed.
    pub display_tokens: Vec<String>,
    pub conjunction: Option<String>,
    /// Tokens after the conjunction, as typed.
    pub criteria_raw: Vec<String>,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty-query: the query has no words")]
    EmptyQuery,
    #[error("empty-display: nothing names what to retrieve{}", hint(.0))]
    EmptyDisplay(Option<String>),
    #[error("no-operator-found: no comparison phrase in '{segment}'")]
    NoOperator { segment: String },
    #[error("missing-literal: nothing follows the comparison in '{segment}'")]
    MissingLiteral { segment: String },
    #[error("missing-field: no field named before the comparison in '{segment}'")]
    MissingField { segment: String },
    #[error("unterminated-quote: closing quote missing in '{0}'")]
    UnterminatedQuote(String),
    #[error("unknown-conjunction: the query contains a comparison but no known conjunction; candidates: {}", candidates.join(", "))]
    UnknownConjunction { candidates: Vec<String> },
}

fn hint(s: &Option<String>) -> String {
    s.as_ref().map(|h| format!(" ({h})")).unwrap_or_default()
}

impl ParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ParseError::EmptyQuery => "empty-query",
            ParseError::EmptyDisplay(_) => "empty-display",
            ParseError::NoOperator { .. } => "no-operator-found",
            ParseError::MissingLiteral { .. } => "missing-literal",
            ParseError::MissingField { .. } => "missing-field",
            ParseError::UnterminatedQuote(_) => "unterminated-quote",
            ParseError::UnknownConjunction { .. } => "unknown-conjunction",
        }
    }

    /// Pipeline stage that raised the error.
    pub fn stage(&self) -> &'static str {
        match self {
            ParseError::EmptyQuery | ParseError::UnterminatedQuote(_) => "tokenize",
            ParseError::UnknownConjunction { .. } => "detect_conjunction",
            ParseError::EmptyDisplay(_) => "partition",
            ParseError::NoOperator { .. }
            | ParseError::MissingLiteral { .. }
            | ParseError::MissingField { .. } => "map_expressions",
        }
    }
}

const TRAILING_PUNCT: &[char] = &['.', ',', ';', '?', '!'];

/// Splits on whitespace and strips trailing sentence punctuation. A span in
/// single or double quotes becomes one token, quotes included.
pub fn tokenize(raw: &str) -> Result<Vec<String>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = raw.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut tok = String::new();
        while let Some(&c) = chars.peek() {
            if c.is_whitespace() {
                break;
            }
            chars.next();
            tok.push(c);
            if (c == '\'' || c == '"') && tok.len() == c.len_utf8() || is_quote_after_op(&tok, c) {
                // consume through the matching close quote
                let mut closed = false;
                for q in chars.by_ref() {
                    tok.push(q);
                    if q == c {
                        closed = true;
                        break;
                    }
                }
                if !closed {
                    return Err(ParseError::UnterminatedQuote(raw.trim().to_string()));
                }
            }
        }
        let trimmed = tok.trim_end_matches(TRAILING_PUNCT);
        if !trimmed.is_empty() {
            tokens.push(trimmed.to_string());
        }
    }
    if tokens.is_empty() {
        return Err(ParseError::EmptyQuery);
    }
    Ok(tokens)
}

// `city='New York'`: a quote opening right after a symbolic operator.
fn is_quote_after_op(tok: &str, c: char) -> bool {
    (c == '\'' || c == '"')
        && tok.len() > 1
        && tok[..tok.len() - 1].ends_with(['=', '>', '<'])
}

pub fn detect_conjunction(tokens: &[String], lex: &Lexicon) -> Option<(usize, String)> {
    tokens
        .iter()
        .enumerate()
        .find(|(_, t)| lex.is_conjunction(t))
        .map(|(i, t)| (i, t.to_lowercase()))
}

/// Splits around the conjunction at `conj_index`, which belongs to neither side.
pub fn partition(
    tokens: &[String],
    conj_index: usize,
) -> Result<(Vec<String>, Vec<String>), ParseError> {
    assert!(conj_index < tokens.len(), "conjunction index out of range");
    if conj_index == 0 {
        return Err(ParseError::EmptyDisplay(Some(format!(
            "the query starts with the conjunction '{}'",
            tokens[0]
        ))));
    }
    Ok((
        tokens[..conj_index].to_vec(),
        tokens[conj_index + 1..].to_vec(),
    ))
}

pub fn remove_stopwords(tokens: &[String], lex: &Lexicon) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !lex.is_stop_word(t))
        .cloned()
        .collect()
}

fn split_symbolic(token: &str) -> Option<(&str, Operator, &str)> {
    let pos = token.find(['=', '>', '<', '!'])?;
    // a quoted token never carries an operator
    if token.starts_with(['\'', '"']) {
        return None;
    }
    let rest = &token[pos..];
    let op_len = if rest.len() >= 2 && Operator::from_symbol(&rest[..2]).is_some() {
        2
    } else {
        1
    };
    let op = Operator::from_symbol(&rest[..op_len])?;
    Some((&token[..pos], op, &rest[op_len..]))
}

fn unquote(token: &str) -> Option<&str> {
    for q in ['\'', '"'] {
        if token.len() >= 2 && token.starts_with(q) && token.ends_with(q) {
            return Some(&token[1..token.len() - 1]);
        }
    }
    None
}

fn literal_from(token: &str) -> Literal {
    match unquote(token) {
        Some(inner) => Literal::Text(inner.to_string()),
        None => Literal::classify(token),
    }
}

/// Where an operator phrase was found in a criteria segment.
struct OperatorMatch {
    start: usize,
    /// index one past the last token of the phrase
    end: usize,
    operator: Operator,
    /// text glued after a symbolic operator, if any
    glued_literal: Option<String>,
    /// text glued before a symbolic operator, if any
    glued_field: Option<String>,
}

/// Matches `phrase` at `start`, skipping stop words between phrase words.
fn match_phrase_at(tokens: &[String], start: usize, phrase: &[String], lex: &Lexicon) -> Option<usize> {
    let lower = |i: usize| tokens[i].to_lowercase();
    if start >= tokens.len() || lower(start) != phrase[0] {
        return None;
    }
    let mut i = start + 1;
    for word in &phrase[1..] {
        while i < tokens.len() && lower(i) != *word && lex.is_stop_word(&tokens[i]) {
            i += 1;
        }
        if i >= tokens.len() || lower(i) != *word {
            return None;
        }
        i += 1;
    }
    Some(i)
}

fn find_operator(tokens: &[String], lex: &Lexicon) -> Option<OperatorMatch> {
    let rules = lex.rules_longest_first();
    for start in 0..tokens.len() {
        if let Some((left, operator, right)) = split_symbolic(&tokens[start]) {
            let nonempty = |s: &str| (!s.is_empty()).then(|| s.to_string());
            return Some(OperatorMatch {
                start,
                end: start + 1,
                operator,
                glued_literal: nonempty(right),
                glued_field: nonempty(left),
            });
        }
        for rule in &rules {
            if let Some(end) = match_phrase_at(tokens, start, &rule.phrase, lex) {
                return Some(OperatorMatch {
                    start,
                    end,
                    operator: rule.operator,
                    glued_literal: None,
                    glued_field: None,
                });
            }
        }
    }
    None
}

fn map_segment(segment: &[String], lex: &Lexicon) -> Result<Condition, ParseError> {
    let shown = || segment.join(" ");
    let m = find_operator(segment, lex).ok_or_else(|| ParseError::NoOperator { segment: shown() })?;

    let mut field_phrase = remove_stopwords(&segment[..m.start], lex);
    if let Some(f) = m.glued_field {
        field_phrase.push(f);
    }
    if field_phrase.is_empty() {
        return Err(ParseError::MissingField { segment: shown() });
    }
    let literal_token = match m.glued_literal {
        Some(l) => l,
        None => segment
            .get(m.end)
            .cloned()
            .ok_or_else(|| ParseError::MissingLiteral { segment: shown() })?,
    };
    let literal = literal_from(&literal_token);
    if literal.text().is_empty() {
        return Err(ParseError::MissingLiteral { segment: shown() });
    }
    Ok(Condition {
        field_phrase,
        operator: m.operator,
        literal,
    })
}

/// Maps a criteria part to conditions, one per "and"-separated segment.
pub fn map_expressions(criteria: &[String], lex: &Lexicon) -> Result<Vec<Condition>, ParseError> {
    if criteria.is_empty() {
        return Err(ParseError::NoOperator {
            segment: String::new(),
        });
    }
    criteria
        .split(|t| t.eq_ignore_ascii_case("and"))
        .map(|segment| map_segment(segment, lex))
        .collect()
}

/// Tokens that look like a misplaced conjunction: everything between the
/// first content word and the start of a comparison.
fn conjunction_candidates(tokens: &[String], lex: &Lexicon) -> Option<Vec<String>> {
    let m = find_operator(tokens, lex)?;
    let content: Vec<&String> = tokens[..m.start]
        .iter()
        .filter(|t| !lex.is_stop_word(t))
        .collect();
    // the last content word names the field, the first names the table
    let between = if content.len() > 2 {
        &content[1..content.len() - 1]
    } else {
        &[][..]
    };
    Some(between.iter().map(|t| t.to_lowercase()).collect())
}

pub fn parse(raw: &str, lex: &Lexicon) -> Result<QueryIR, ParseError> {
    let tokens = tokenize(raw)?;
    let (display_raw, conjunction, criteria_raw) = match detect_conjunction(&tokens, lex) {
        Some((idx, word)) => {
            let (d, c) = partition(&tokens, idx)?;
            (d, Some(word), c)
        }
        None => {
            if let Some(candidates) = conjunction_candidates(&tokens, lex) {
                return Err(ParseError::UnknownConjunction { candidates });
            }
            (tokens.clone(), None, Vec::new())
        }
    };
    let conditions = if conjunction.is_some() {
        map_expressions(&criteria_raw, lex)?
    } else {
        Vec::new()
    };
    let display_tokens = remove_stopwords(&display_raw, lex);
    if display_tokens.is_empty() {
        return Err(ParseError::EmptyDisplay(Some(
            "only stop words precede the criteria".into(),
        )));
    }
    Ok(QueryIR {
        raw: raw.to_string(),
        tokens,
        display_raw,
        display_tokens,
        conjunction,
        criteria_raw,
        conditions,
    })
}
