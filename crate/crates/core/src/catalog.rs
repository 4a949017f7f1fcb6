//! The metadata set: declared tables, fields and primary keys, together with
//! the CSV rows backing each table and value indexes over key columns.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataType {
    Integer,
    Decimal,
    Text,
    DateText,
}

impl DataType {
    pub fn is_numeric(self) -> bool {
        matches!(self, DataType::Integer | DataType::Decimal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldDef {
    pub name: String,
    pub dtype: DataType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TableDef {
    pub name: String,
    pub primary_key: String,
    pub data_file: String,
    pub fields: Vec<FieldDef>,
}

impl TableDef {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name.eq_ignore_ascii_case(name))
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name.eq_ignore_ascii_case(name))
    }

    /// The primary-key field as declared (source casing).
    pub fn key_field(&self) -> &FieldDef {
        self.field(&self.primary_key)
            .expect("primary key validated at construction")
    }
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    tables: Vec<TableDef>,
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("file not found: {0}")]
    MissingFile(String),
    #[error("malformed catalog {path}: {reason}")]
    Malformed { path: String, reason: String },
    #[error("header of {file} does not match table '{table}': missing [{}], extra [{}]", missing.join(", "), extra.join(", "))]
    HeaderMismatch {
        table: String,
        file: String,
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("duplicate table '{0}'")]
    DuplicateTable(String),
    #[error("invalid table '{table}': {reason}")]
    InvalidTable { table: String, reason: String },
    #[error("table '{table}', field '{field}', row {row}: '{value}' is not a valid {dtype:?} value")]
    BadValue {
        table: String,
        field: String,
        row: usize,
        value: String,
        dtype: DataType,
    },
    #[error("unknown table '{0}'")]
    UnknownTable(String),
    #[error("unknown field '{field}' in table '{table}'")]
    UnknownField { table: String, field: String },
    #[error("csv error in {file}: {reason}")]
    Csv { file: String, reason: String },
}

/// One cell in canonical text form; `None` is an empty CSV cell.
pub type Cell = Option<String>;

#[derive(Debug, Clone, PartialEq)]
pub struct TableData {
    pub def: TableDef,
    /// Rows in CSV order, cells in declared field order.
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemaCatalog {
    tables: Vec<TableData>,
    /// (lowercase table, lowercase field) -> canonical values, in row order.
    value_index: HashMap<(String, String), Vec<String>>,
}

/// Canonical text of a numeric cell: no leading zeros, no trailing fraction
/// zeros, no "-0". Returns `None` when `raw` is not a plain decimal number.
pub fn canonical_number(raw: &str) -> Option<String> {
    let s = raw.trim();
    let (neg, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().all(|b| b.is_ascii_digit()) || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if body.ends_with('.') || (body.contains('.') && frac.is_empty()) {
        return None;
    }
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let mut out = String::new();
    if neg && !(int == "0" && frac.is_empty()) {
        out.push('-');
    }
    out.push_str(int);
    if !frac.is_empty() {
        out.push('.');
        out.push_str(frac);
    }
    Some(out)
}

fn canonical_cell(
    raw: &str,
    table: &TableDef,
    field: &FieldDef,
    row: usize,
) -> Result<Cell, CatalogError> {
    if raw.is_empty() {
        return Ok(None);
    }
    match field.dtype {
        DataType::Integer | DataType::Decimal => {
            let canon = canonical_number(raw).ok_or_else(|| CatalogError::BadValue {
                table: table.name.clone(),
                field: field.name.clone(),
                row,
                value: raw.to_string(),
                dtype: field.dtype,
            })?;
            if field.dtype == DataType::Integer && canon.contains('.') {
                return Err(CatalogError::BadValue {
                    table: table.name.clone(),
                    field: field.name.clone(),
                    row,
                    value: raw.to_string(),
                    dtype: field.dtype,
                });
            }
            Ok(Some(canon))
        }
        DataType::Text | DataType::DateText => Ok(Some(raw.to_string())),
    }
}

fn validate_def(def: &TableDef) -> Result<(), CatalogError> {
    let invalid = |reason: String| CatalogError::InvalidTable {
        table: def.name.clone(),
        reason,
    };
    if def.name.trim().is_empty() {
        return Err(invalid("empty table name".into()));
    }
    let mut seen = BTreeSet::new();
    for f in &def.fields {
        if f.name.trim().is_empty() {
            return Err(invalid("empty field name".into()));
        }
        if !seen.insert(f.name.to_lowercase()) {
            return Err(invalid(format!("duplicate field '{}'", f.name)));
        }
    }
    if def.field(&def.primary_key).is_none() {
        return Err(invalid(format!(
            "primary key '{}' is not a declared field",
            def.primary_key
        )));
    }
    Ok(())
}

impl SchemaCatalog {
    /// Builds a catalog from table definitions and raw rows (cells in declared
    /// field order, as they would appear in CSV).
    pub fn from_parts(parts: Vec<(TableDef, Vec<Vec<String>>)>) -> Result<Self, CatalogError> {
        let mut tables: Vec<TableData> = Vec::with_capacity(parts.len());
        for (def, raw_rows) in parts {
            validate_def(&def)?;
            if tables.iter().any(|t| t.def.name.eq_ignore_ascii_case(&def.name)) {
                return Err(CatalogError::DuplicateTable(def.name));
            }
            let mut rows = Vec::with_capacity(raw_rows.len());
            for (r, raw) in raw_rows.into_iter().enumerate() {
                if raw.len() != def.fields.len() {
                    return Err(CatalogError::InvalidTable {
                        table: def.name.clone(),
                        reason: format!(
                            "row {} has {} cells, expected {}",
                            r + 1,
                            raw.len(),
                            def.fields.len()
                        ),
                    });
                }
                let row = raw
                    .iter()
                    .zip(&def.fields)
                    .map(|(cell, f)| canonical_cell(cell, &def, f, r + 1))
                    .collect::<Result<Vec<_>, _>>()?;
                rows.push(row);
            }
            tables.push(TableData { def, rows });
        }

        let mut value_index = HashMap::new();
        for t in &tables {
            let idx = t.def.field_index(&t.def.primary_key).expect("validated");
            let values = t
                .rows
                .iter()
                .map(|r| r[idx].clone().unwrap_or_default())
                .collect();
            value_index.insert(
                (t.def.name.to_lowercase(), t.def.primary_key.to_lowercase()),
                values,
            );
        }
        Ok(SchemaCatalog {
            tables,
            value_index,
        })
    }

    pub fn tables(&self) -> impl Iterator<Item = &TableDef> {
        self.tables.iter().map(|t| &t.def)
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.table_data(name).map(|t| &t.def)
    }

    pub fn table_data(&self, name: &str) -> Option<&TableData> {
        self.tables
            .iter()
            .find(|t| t.def.name.eq_ignore_ascii_case(name))
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|t| t.def.name.as_str())
    }

    pub fn row_count(&self, table: &str) -> Option<usize> {
        self.table_data(table).map(|t| t.rows.len())
    }

    /// Tables declaring `field_name` (case-insensitive), in catalog order.
    pub fn tables_with_field(&self, field_name: &str) -> Vec<&str> {
        self.tables
            .iter()
            .filter(|t| t.def.field(field_name).is_some())
            .map(|t| t.def.name.as_str())
            .collect()
    }

    /// Canonical values of a column in row order (a multiset); empty cells
    /// appear as "". Key columns come from the index, others are computed.
    pub fn value_set(&self, table: &str, field: &str) -> Result<Vec<String>, CatalogError> {
        let data = self
            .table_data(table)
            .ok_or_else(|| CatalogError::UnknownTable(table.to_string()))?;
        let idx = data
            .def
            .field_index(field)
            .ok_or_else(|| CatalogError::UnknownField {
                table: data.def.name.clone(),
                field: field.to_string(),
            })?;
        if let Some(v) = self
            .value_index
            .get(&(table.to_lowercase(), field.to_lowercase()))
        {
            return Ok(v.clone());
        }
        Ok(data
            .rows
            .iter()
            .map(|r| r[idx].clone().unwrap_or_default())
            .collect())
    }

    /// Distinct values of a column.
    pub fn distinct_values(&self, table: &str, field: &str) -> Result<BTreeSet<String>, CatalogError> {
        Ok(self.value_set(table, field)?.into_iter().collect())
    }

    pub fn is_indexed(&self, table: &str, field: &str) -> bool {
        self.value_index
            .contains_key(&(table.to_lowercase(), field.to_lowercase()))
    }
}

fn read_csv(path: &Path, def: &TableDef) -> Result<Vec<Vec<String>>, CatalogError> {
    let shown = path.display().to_string();
    if !path.is_file() {
        return Err(CatalogError::MissingFile(shown));
    }
    let csv_err = |e: csv::Error| CatalogError::Csv {
        file: shown.clone(),
        reason: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let missing: Vec<String> = def
        .fields
        .iter()
        .filter(|f| !header.iter().any(|h| h.eq_ignore_ascii_case(&f.name)))
        .map(|f| f.name.clone())
        .collect();
    let extra: Vec<String> = header
        .iter()
        .filter(|h| def.field(h).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CatalogError::HeaderMismatch {
            table: def.name.clone(),
            file: shown,
            missing,
            extra,
        });
    }
    // column position of each declared field
    let order: Vec<usize> = def
        .fields
        .iter()
        .map(|f| {
            header
                .iter()
                .position(|h| h.eq_ignore_ascii_case(&f.name))
                .expect("checked above")
        })
        .collect();

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        rows.push(
            order
                .iter()
                .map(|&i| record.get(i).unwrap_or("").to_string())
                .collect(),
        );
    }
    Ok(rows)
}

pub fn load_catalog(
    catalog_path: impl AsRef<Path>,
    data_dir: impl AsRef<Path>,
) -> Result<SchemaCatalog, CatalogError> {
    let catalog_path = catalog_path.as_ref();
    let shown = catalog_path.display().to_string();
    let text = std::fs::read_to_string(catalog_path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            CatalogError::MissingFile(shown.clone())
        } else {
            CatalogError::Malformed {
                path: shown.clone(),
                reason: e.to_string(),
            }
        }
    })?;
    let file: CatalogFile = serde_json::from_str(&text).map_err(|e| CatalogError::Malformed {
        path: shown,
        reason: e.to_string(),
    })?;
    let data_dir: PathBuf = data_dir.as_ref().to_path_buf();
    let mut parts = Vec::with_capacity(file.tables.len());
    for def in file.tables {
        validate_def(&def)?;
        let rows = read_csv(&data_dir.join(&def.data_file), &def)?;
        parts.push((def, rows));
    }
    SchemaCatalog::from_parts(parts)
}
