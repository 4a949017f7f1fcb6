//! Renders a [`ResolvedQuery`] as a single SELECT statement with one alias
//! per table and implicit (comma) joins on the shared key.

use serde::{Deserialize, Serialize};

use crate::parser::Literal;
use crate::resolver::ResolvedQuery;

pub const DIALECT_NOTE: &str = "implicit-join";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SqlText {
    pub text: String,
    pub dialect_note: String,
}

impl std::fmt::Display for SqlText {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.text)
    }
}

/// A, B, ..., Z, AA, AB, ...
pub fn alias(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        n -= 1;
        out.push(b'A' + (n % 26) as u8);
        n /= 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn render_literal(lit: &Literal) -> String {
    match lit {
        Literal::Number(n) => n.clone(),
        Literal::Text(t) => format!("'{}'", t.replace('\'', "''")),
    }
}

pub fn build_sql(rq: &ResolvedQuery) -> SqlText {
    let tables: Vec<&str> = std::iter::once(rq.base_table.bound.as_str())
        .chain(rq.join_tables.iter().map(|j| j.table.as_str()))
        .collect();
    let alias_of = |table: &str| {
        let i = tables
            .iter()
            .position(|t| t.eq_ignore_ascii_case(table))
            .expect("condition tables are base or joined");
        alias(i)
    };

    let from = tables
        .iter()
        .enumerate()
        .map(|(i, t)| format!("{t} AS {}", alias(i)))
        .collect::<Vec<_>>()
        .join(", ");
    let mut predicates: Vec<String> = rq
        .join_tables
        .iter()
        .enumerate()
        .map(|(i, j)| format!("A.{} = {}.{}", rq.base_key, alias(i + 1), j.field))
        .collect();
    predicates.extend(rq.conditions.iter().map(|c| {
        format!(
            "{}.{} {} {}",
            alias_of(&c.table),
            c.field.bound,
            c.operator.symbol(),
            render_literal(&c.literal)
        )
    }));

    let mut text = format!("SELECT * FROM {from}");
    if !predicates.is_empty() {
        text.push_str(" WHERE ");
        text.push_str(&predicates.join(" AND "));
    }
    SqlText {
        text,
        dialect_note: DIALECT_NOTE.to_string(),
    }
}

/// Comparison form used to check generated SQL against hand-written SQL:
/// lowercase, whitespace collapsed, no spaces around operators or commas.
pub fn canonicalize_sql(sql: &str) -> String {
    let lower = sql.to_lowercase();
    let collapsed = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = String::with_capacity(collapsed.len());
    let chars: Vec<char> = collapsed.chars().collect();
    let is_op = |c: char| matches!(c, '=' | '<' | '>' | '!' | ',' | '.');
    for (i, &c) in chars.iter().enumerate() {
        if c == ' ' {
            let prev = i.checked_sub(1).map(|p| chars[p]);
            let next = chars.get(i + 1).copied();
            if prev.is_some_and(is_op) || next.is_some_and(is_op) {
                continue;
            }
        }
        out.push(c);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Operator;
    use crate::resolver::{Binding, JoinTable, MatchMethod, ResolvedCondition};

    fn binding(name: &str) -> Binding {
        Binding {
            surface: name.to_lowercase(),
            bound: name.into(),
            method: MatchMethod::Exact,
            distance: 0,
        }
    }

    fn query_a() -> ResolvedQuery {
        ResolvedQuery {
            base_table: binding("orders"),
            base_key: "OrderID".into(),
            join_tables: vec![JoinTable {
                table: "orderdetails".into(),
                field: "OrderID".into(),
            }],
            conditions: vec![ResolvedCondition {
                table: "orderdetails".into(),
                field: binding("UnitPrice"),
                operator: Operator::Gt,
                literal: Literal::Number("200".into()),
            }],
            trace: vec![],
        }
    }

    fn query_b(literal: &str) -> ResolvedQuery {
        ResolvedQuery {
            base_table: binding("suppliers"),
            base_key: "sno".into(),
            join_tables: vec![],
            conditions: vec![ResolvedCondition {
                table: "suppliers".into(),
                field: binding("city"),
                operator: Operator::Eq,
                literal: Literal::Text(literal.into()),
            }],
            trace: vec![],
        }
    }

    #[test]
    fn golden_a() {
        let sql = build_sql(&query_a());
        assert_eq!(
            sql.text,
            "SELECT * FROM orders AS A, orderdetails AS B WHERE A.OrderID = B.OrderID AND B.UnitPrice > 200"
        );
        assert_eq!(
            canonicalize_sql(&sql.text),
            canonicalize_sql(
                "Select *\nfrom orders AS A, orderdetails AS B\nwhere A.OrderID=B.OrderID and\nB.UnitPrice > 200"
            )
        );
    }

    #[test]
    fn golden_b() {
        let sql = build_sql(&query_b("London"));
        assert_eq!(sql.text, "SELECT * FROM suppliers AS A WHERE A.city = 'London'");
        assert_eq!(
            canonicalize_sql(&sql.text),
            canonicalize_sql("Select * from suppliers AS A where A. city='London'")
        );
    }

    #[test]
    fn no_conditions_no_where() {
        let mut rq = query_b("x");
        rq.conditions.clear();
        assert_eq!(build_sql(&rq).text, "SELECT * FROM suppliers AS A");
    }

    #[test]
    fn quotes_are_doubled() {
        let sql = build_sql(&query_b("O'Brien"));
        assert!(sql.text.ends_with("A.city = 'O''Brien'"));
        assert!(!sql.text.contains('\n') && !sql.text.ends_with(';'));
    }

    #[test]
    fn aliases() {
        assert_eq!(alias(0), "A");
        assert_eq!(alias(25), "Z");
        assert_eq!(alias(26), "AA");
        assert_eq!(alias(27), "AB");
    }

    #[test]
    fn every_operator_renders() {
        for (op, sym) in [
            (Operator::Eq, "="),
            (Operator::Neq, "!="),
            (Operator::Gt, ">"),
            (Operator::Lt, "<"),
            (Operator::Gte, ">="),
            (Operator::Lte, "<="),
        ] {
            let mut rq = query_a();
            rq.conditions[0].operator = op;
            assert!(build_sql(&rq).text.ends_with(&format!("B.UnitPrice {sym} 200")));
        }
    }
}
