//! Edit distances and ranked fuzzy candidate selection.
//!
//! Both distances fold case before comparing and operate on Unicode scalar
//! values. The Damerau variant is the restricted one (optimal string
//! alignment): a transposed pair is never edited again.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMetric {
    #[default]
    Levenshtein,
    Damerau,
}

impl DistanceMetric {
    pub fn distance(self, a: &str, b: &str) -> usize {
        match self {
            DistanceMetric::Levenshtein => levenshtein(a, b),
            DistanceMetric::Damerau => damerau_levenshtein(a, b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DistanceMetric::Levenshtein => "levenshtein",
            DistanceMetric::Damerau => "damerau-levenshtein",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub candidate: String,
    pub distance: usize,
    pub rank: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("no candidates to match against")]
    EmptyCandidateSet,
}

fn folded(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a = folded(a);
    let b = folded(b);
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Optimal-string-alignment distance: Levenshtein plus adjacent transposition.
pub fn damerau_levenshtein(a: &str, b: &str) -> usize {
    let a = folded(a);
    let b = folded(b);
    let (n, m) = (a.len(), b.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let cost = usize::from(a[i - 1] != b[j - 1]);
            let mut best = (d[i - 1][j] + 1)
                .min(d[i][j - 1] + 1)
                .min(d[i - 1][j - 1] + cost);
            if i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1] {
                best = best.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = best;
        }
    }
    d[n][m]
}

/// Every candidate within `max_distance` of `needle`, sorted by distance then
/// name, with dense 1-based ranks. Duplicate candidates are collapsed.
pub fn best_match<'a, I>(
    needle: &str,
    candidates: I,
    max_distance: usize,
    metric: DistanceMetric,
) -> Result<Vec<MatchResult>, MatchError>
where
    I: IntoIterator<Item = &'a str>,
{
    let all = ranked_candidates(needle, candidates, metric)?;
    Ok(all
        .into_iter()
        .filter(|m| m.distance <= max_distance)
        .collect())
}

/// Like [`best_match`] without a threshold; used for "nearest candidates"
/// hints in error messages.
pub fn ranked_candidates<'a, I>(
    needle: &str,
    candidates: I,
    metric: DistanceMetric,
) -> Result<Vec<MatchResult>, MatchError>
where
    I: IntoIterator<Item = &'a str>,
{
    let unique: BTreeSet<&str> = candidates.into_iter().collect();
    if unique.is_empty() {
        return Err(MatchError::EmptyCandidateSet);
    }
    let mut scored: Vec<(usize, &str)> = unique
        .into_iter()
        .map(|c| (metric.distance(needle, c), c))
        .collect();
    scored.sort();
    Ok(scored
        .into_iter()
        .enumerate()
        .map(|(i, (distance, c))| MatchResult {
            candidate: c.to_string(),
            distance,
            rank: i + 1,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn levenshtein_examples() {
        assert_eq!(levenshtein("orders", "orders"), 0);
        assert_eq!(levenshtein("supplier", "suppliers"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("UnitPrice", "unitprice"), 0);
        assert_eq!(levenshtein("suplier", "suppliers"), 2);
    }

    #[test]
    fn damerau_examples() {
        assert_eq!(damerau_levenshtein("ab", "ba"), 1);
        assert_eq!(damerau_levenshtein("abc", "abc"), 0);
        // restricted variant: the full variant would give 2
        assert_eq!(damerau_levenshtein("ca", "abc"), 3);
        assert_eq!(levenshtein("ab", "ba"), 2);
    }

    #[test]
    fn best_match_examples() {
        let tables = ["orders", "orderdetails", "suppliers"];
        let m = best_match("supplier", tables, 2, DistanceMetric::Levenshtein).unwrap();
        assert_eq!(
            m,
            vec![MatchResult {
                candidate: "suppliers".into(),
                distance: 1,
                rank: 1
            }]
        );
        assert!(best_match("zzz", ["orders"], 2, DistanceMetric::Levenshtein)
            .unwrap()
            .is_empty());
        let m = best_match("order", ["orders", "orderdetails"], 3, DistanceMetric::Levenshtein)
            .unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].candidate.as_str(), m[0].distance), ("orders", 1));
        assert_eq!(levenshtein("order", "orderdetails"), 7);
    }

    #[test]
    fn best_match_empty_candidates() {
        assert_eq!(
            best_match("x", std::iter::empty(), 2, DistanceMetric::Levenshtein),
            Err(MatchError::EmptyCandidateSet)
        );
    }

    #[test]
    fn ties_are_lexicographic() {
        let m = best_match("cat", ["cut", "bat", "cot"], 1, DistanceMetric::Levenshtein).unwrap();
        let names: Vec<_> = m.iter().map(|r| r.candidate.as_str()).collect();
        assert_eq!(names, ["bat", "cot", "cut"]);
        assert_eq!(m.iter().map(|r| r.rank).collect::<Vec<_>>(), [1, 2, 3]);
    }

    proptest! {
        #[test]
        fn levenshtein_is_symmetric_and_bounded(a in "[a-dA-D]{0,8}", b in "[a-d]{0,8}") {
            let d = levenshtein(&a, &b);
            prop_assert_eq!(d, levenshtein(&b, &a));
            let (la, lb) = (a.chars().count(), b.chars().count());
            prop_assert!(la.abs_diff(lb) <= d);
            prop_assert!(d <= la.max(lb));
            prop_assert_eq!(d == 0, a.to_lowercase() == b.to_lowercase());
        }

        #[test]
        fn triangle_inequality(a in "[abc]{0,6}", b in "[abc]{0,6}", c in "[abc]{0,6}") {
            prop_assert!(levenshtein(&a, &c) <= levenshtein(&a, &b) + levenshtein(&b, &c));
        }

        #[test]
        fn damerau_never_exceeds_levenshtein(a in "[abc]{0,7}", b in "[abc]{0,7}") {
            prop_assert!(damerau_levenshtein(&a, &b) <= levenshtein(&a, &b));
            prop_assert_eq!(damerau_levenshtein(&a, &b), damerau_levenshtein(&b, &a));
        }

        #[test]
        fn best_match_sorted_and_thresholded(
            needle in "[a-e]{1,6}",
            cands in proptest::collection::vec("[a-e]{1,6}", 1..8),
            max in 0usize..4,
        ) {
            let out = best_match(&needle, cands.iter().map(String::as_str), max, DistanceMetric::Levenshtein).unwrap();
            prop_assert!(out.iter().all(|m| m.distance <= max));
            prop_assert!(out.windows(2).all(|w| (w[0].distance, &w[0].candidate) < (w[1].distance, &w[1].candidate)));
            prop_assert!(out.iter().enumerate().all(|(i, m)| m.rank == i + 1));
        }
    }
}
