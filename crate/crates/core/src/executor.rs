//! In-memory evaluation of a [`ResolvedQuery`] over the catalog's CSV rows.

use std::cmp::Ordering;

use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Cell, DataType, SchemaCatalog, TableData};
use crate::lexicon::Operator;
use crate::parser::Literal;
use crate::resolver::ResolvedQuery;

#[derive(Debug, Clone, PartialEq)]
pub enum CellValue {
    /// Canonical decimal text.
    Number(String),
    Text(String),
    Null,
}

impl CellValue {
    pub fn from_cell(cell: &Cell, dtype: DataType) -> CellValue {
        match cell {
            None => CellValue::Null,
            Some(v) if dtype.is_numeric() => CellValue::Number(v.clone()),
            Some(v) => CellValue::Text(v.clone()),
        }
    }

    pub fn from_literal(lit: &Literal) -> CellValue {
        match lit {
            Literal::Number(n) => CellValue::Number(n.clone()),
            Literal::Text(t) => CellValue::Text(t.clone()),
        }
    }

    /// Numeric reading of the cell; text cells qualify when they parse.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            CellValue::Number(s) | CellValue::Text(s) => s.trim().parse::<f64>().ok().filter(|f| f.is_finite()),
            CellValue::Null => None,
        }
    }

    pub fn display(&self) -> &str {
        match self {
            CellValue::Number(s) | CellValue::Text(s) => s,
            CellValue::Null => "",
        }
    }
}

impl Serialize for CellValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CellValue::Number(n) => match serde_json::from_str::<serde_json::Number>(n) {
                Ok(num) => num.serialize(s),
                Err(_) => s.serialize_str(n),
            },
            CellValue::Text(t) => s.serialize_str(t),
            CellValue::Null => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultColumn {
    pub table: String,
    pub field: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub columns: Vec<ResultColumn>,
    pub rows: Vec<Vec<CellValue>>,
}

impl ResultSet {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, table: &str, field: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.table.eq_ignore_ascii_case(table) && c.field.eq_ignore_ascii_case(field))
    }

    /// Plain-text grid for terminals.
    pub fn to_grid(&self) -> String {
        let headers: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("{}.{}", c.table, c.field))
            .collect();
        let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.display().chars().count());
            }
        }
        let line = |cells: Vec<&str>| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        let mut out = String::new();
        out.push_str(&line(headers.iter().map(String::as_str).collect()));
        out.push('\n');
        out.push_str(
            &widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("-+-"),
        );
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row.iter().map(CellValue::display).collect()));
            out.push('\n');
        }
        out.push_str(&format!("({} rows)\n", self.rows.len()));
        out
    }
}

impl Serialize for ResultSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ResultSet", 3)?;
        st.serialize_field("columns", &self.columns)?;
        st.serialize_field("rows", &self.rows)?;
        st.serialize_field("rowCount", &self.rows.len())?;
        st.end()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExecError {
    #[error("type-mismatch: {op} needs numbers but got '{left}' and '{right}'")]
    TypeMismatch {
        op: Operator,
        left: String,
        right: String,
    },
    #[error("unknown-table: '{0}'")]
    UnknownTable(String),
    #[error("unknown-field: '{table}.{field}'")]
    UnknownField { table: String, field: String },
}

impl ExecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::TypeMismatch { .. } => "type-mismatch",
            ExecError::UnknownTable(_) => "unknown-table",
            ExecError::UnknownField { .. } => "unknown-field",
        }
    }
}

/// Numbers compare numerically when both sides parse; otherwise only
/// (case-insensitive) equality is defined. Null never matches.
pub fn compare(a: &CellValue, op: Operator, b: &CellValue) -> Result<bool, ExecError> {
    if matches!(a, CellValue::Null) || matches!(b, CellValue::Null) {
        return Ok(false);
    }
    if let (Some(x), Some(y)) = (a.as_number(), b.as_number()) {
        let ord = x.partial_cmp(&y).unwrap_or(Ordering::Equal);
        return Ok(match op {
            Operator::Eq => ord == Ordering::Equal,
            Operator::Neq => ord != Ordering::Equal,
            Operator::Gt => ord == Ordering::Greater,
            Operator::Lt => ord == Ordering::Less,
            Operator::Gte => ord != Ordering::Less,
            Operator::Lte => ord != Ordering::Greater,
        });
    }
    let equal = || a.display().to_lowercase() == b.display().to_lowercase();
    match op {
        Operator::Eq => Ok(equal()),
        Operator::Neq => Ok(!equal()),
        _ => Err(ExecError::TypeMismatch {
            op,
            left: a.display().to_string(),
            right: b.display().to_string(),
        }),
    }
}

struct BoundPredicate {
    /// position of the table among base + joins
    table: usize,
    column: usize,
    op: Operator,
    value: CellValue,
}

fn value_at(table: &TableData, row: usize, column: usize) -> CellValue {
    CellValue::from_cell(&table.rows[row][column], table.def.fields[column].dtype)
}

/// Runs `rq`: base rows in CSV order, each extended by every matching row
/// of each join table (in that table's order), then filtered.
pub fn execute(rq: &ResolvedQuery, cat: &SchemaCatalog) -> Result<ResultSet, ExecError> {
    let lookup = |name: &str| {
        cat.table_data(name)
            .ok_or_else(|| ExecError::UnknownTable(name.to_string()))
    };
    let column = |t: &TableData, field: &str| {
        t.def.field_index(field).ok_or_else(|| ExecError::UnknownField {
            table: t.def.name.clone(),
            field: field.to_string(),
        })
    };

    let base = lookup(&rq.base_table.bound)?;
    let base_key = column(base, &rq.base_key)?;
    let mut tables: Vec<&TableData> = vec![base];
    let mut join_keys = Vec::new();
    for j in &rq.join_tables {
        let t = lookup(&j.table)?;
        join_keys.push(column(t, &j.field)?);
        tables.push(t);
    }
    let predicates = rq
        .conditions
        .iter()
        .map(|c| {
            let table = tables
                .iter()
                .position(|t| t.def.name.eq_ignore_ascii_case(&c.table))
                .ok_or_else(|| ExecError::UnknownTable(c.table.clone()))?;
            Ok(BoundPredicate {
                table,
                column: column(tables[table], &c.field.bound)?,
                op: c.operator,
                value: CellValue::from_literal(&c.literal),
            })
        })
        .collect::<Result<Vec<_>, ExecError>>()?;

    let columns = tables
        .iter()
        .flat_map(|t| {
            t.def.fields.iter().map(|f| ResultColumn {
                table: t.def.name.clone(),
                field: f.name.clone(),
            })
        })
        .collect();

    let mut rows = Vec::new();
    for base_row in 0..base.rows.len() {
        let key = value_at(base, base_row, base_key);
        // matching row indexes per join table
        let mut matches: Vec<Vec<usize>> = Vec::with_capacity(join_keys.len());
        for (t, &k) in tables[1..].iter().zip(&join_keys) {
            let mut m = Vec::new();
            for r in 0..t.rows.len() {
                if compare(&key, Operator::Eq, &value_at(t, r, k))? {
                    m.push(r);
                }
            }
            matches.push(m);
        }
        if matches.iter().any(Vec::is_empty) {
            continue;
        }
        let mut idx = vec![0usize; matches.len()];
        loop {
            let row_of = |ti: usize| if ti == 0 { base_row } else { matches[ti - 1][idx[ti - 1]] };
            let mut keep = true;
            for p in &predicates {
                let v = value_at(tables[p.table], row_of(p.table), p.column);
                if !compare(&v, p.op, &p.value)? {
                    keep = false;
                    break;
                }
            }
            if keep {
                let mut out = Vec::new();
                for (ti, t) in tables.iter().enumerate() {
                    let r = row_of(ti);
                    out.extend((0..t.def.fields.len()).map(|c| value_at(t, r, c)));
                }
                rows.push(out);
            }
            // next combination of join rows
            let mut pos = idx.len();
            let mut done = true;
            while pos > 0 {
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < matches[pos].len() {
                    done = false;
                    break;
                }
                idx[pos] = 0;
            }
            if done {
                break;
            }
        }
    }
    Ok(ResultSet { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> CellValue {
        CellValue::Number(s.into())
    }
    fn t(s: &str) -> CellValue {
        CellValue::Text(s.into())
    }

    #[test]
    fn compare_examples() {
        assert_eq!(compare(&n("211"), Operator::Gt, &n("200")), Ok(true));
        assert_eq!(compare(&t("LONDON"), Operator::Eq, &t("London")), Ok(true));
        assert!(matches!(
            compare(&t("abc"), Operator::Gt, &n("5")),
            Err(ExecError::TypeMismatch { .. })
        ));
    }

    #[test]
    fn compare_numeric_forms() {
        assert_eq!(compare(&n("200"), Operator::Eq, &n("200.00")), Ok(true));
        assert_eq!(compare(&n("200"), Operator::Gt, &n("200")), Ok(false));
        assert_eq!(compare(&n("200"), Operator::Gte, &n("200")), Ok(true));
        assert_eq!(compare(&t("82520"), Operator::Lt, &n("90000")), Ok(true));
        assert_eq!(compare(&n("10"), Operator::Neq, &t("abc")), Ok(true));
        assert_eq!(compare(&t("Paris"), Operator::Neq, &t("paris")), Ok(false));
    }

    #[test]
    fn null_never_matches() {
        for op in Operator::ALL {
            assert_eq!(compare(&CellValue::Null, op, &n("1")), Ok(false));
            assert_eq!(compare(&t("x"), op, &CellValue::Null), Ok(false));
        }
    }

    #[test]
    fn cells_serialize_as_json_scalars() {
        let row = vec![n("10329"), n("191.67"), t("SPLIR"), CellValue::Null];
        assert_eq!(
            serde_json::to_string(&row).unwrap(),
            r#"[10329,191.67,"SPLIR",null]"#
        );
    }
}
