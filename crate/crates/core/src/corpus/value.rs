//! Scalar cell values, column types and canonical join keys.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Literals that load as null in every column type.
pub const NULL_LITERALS: [&str; 4] = ["", "NULL", "null", "NA"];

/// Inferred type of a column. Every non-null value of the column has this kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Integer,
    Float,
    Boolean,
    Text,
}

impl ColumnType {
    pub fn as_str(self) -> &'static str {
        match self {
            ColumnType::Integer => "integer",
            ColumnType::Float => "float",
            ColumnType::Boolean => "boolean",
            ColumnType::Text => "text",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Integer | ColumnType::Float)
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single cell. Text is reference counted so that gathering rows during joins
/// never copies string payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(Arc<str>),
    Bool(bool),
}

impl Value {
    pub fn text(s: impl AsRef<str>) -> Self {
        Value::Text(Arc::from(s.as_ref()))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    /// Canonical join key, or `None` for null (nulls never join).
    pub fn join_key(&self) -> Option<JoinKey> {
        match self {
            Value::Null => None,
            Value::Int(i) => Some(JoinKey::Int(*i)),
            Value::Float(x) => Some(JoinKey::from_f64(*x)),
            Value::Text(s) => {
                let t = s.trim();
                Some(JoinKey::Text(if t.len() == s.len() { s.clone() } else { Arc::from(t) }))
            }
            Value::Bool(b) => Some(JoinKey::Bool(*b)),
        }
    }

    /// Rendering used for CSV output. Floats use the shortest round-trip form
    /// that still reads back as a float.
    pub fn to_csv_field(&self) -> String {
        match self {
            Value::Null => String::new(),
            Value::Int(i) => i.to_string(),
            Value::Float(x) => format!("{x:?}"),
            Value::Text(s) => s.to_string(),
            Value::Bool(b) => b.to_string(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            other => f.write_str(&other.to_csv_field()),
        }
    }
}

/// Hashable, canonicalized key used by every join and semi-join.
///
/// Numeric keys compare numerically (an integral float equals the integer),
/// text keys compare byte-exact after trimming surrounding whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum JoinKey {
    Int(i64),
    Float(u64),
    Bool(bool),
    Text(Arc<str>),
}

impl JoinKey {
    fn from_f64(x: f64) -> Self {
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            return JoinKey::Int(x as i64);
        }
        // -0.0 never reaches here (integral), so bit patterns are canonical.
        JoinKey::Float(x.to_bits())
    }
}

/// Whole-column type inference over raw CSV fields.
///
/// Precedence is integer, then float, then boolean, then text; a type is chosen
/// only if every non-null field parses as it. A column with no non-null field
/// is typed integer.
pub fn infer_type<'a, I>(fields: I) -> ColumnType
where
    I: IntoIterator<Item = &'a str> + Clone,
{
    let non_null = || fields.clone().into_iter().filter(|f| !is_null_literal(f));
    if non_null().all(|f| parse_int(f).is_some()) {
        ColumnType::Integer
    } else if non_null().all(|f| parse_float(f).is_some()) {
        ColumnType::Float
    } else if non_null().all(|f| parse_bool(f).is_some()) {
        ColumnType::Boolean
    } else {
        ColumnType::Text
    }
}

pub fn is_null_literal(field: &str) -> bool {
    NULL_LITERALS.contains(&field)
}

/// Parses a raw field under an already inferred column type.
pub fn parse_field(field: &str, ty: ColumnType) -> Value {
    if is_null_literal(field) {
        return Value::Null;
    }
    let parsed = match ty {
        ColumnType::Integer => parse_int(field).map(Value::Int),
        ColumnType::Float => parse_float(field).map(Value::Float),
        ColumnType::Boolean => parse_bool(field).map(Value::Bool),
        ColumnType::Text => None,
    };
    parsed.unwrap_or_else(|| Value::text(field))
}

fn parse_int(field: &str) -> Option<i64> {
    field.trim().parse().ok()
}

fn parse_float(field: &str) -> Option<f64> {
    field.trim().parse::<f64>().ok().filter(|x| x.is_finite())
}

fn parse_bool(field: &str) -> Option<bool> {
    match field.trim().to_ascii_lowercase().as_str() {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}
