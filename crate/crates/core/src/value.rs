//! Typed variable values.
//!
//! Primitive values map directly onto bundle entries. `Object` values are
//! finite trees of named fields with primitive leaves (nested objects are
//! allowed, nested nulls are not). A top-level `Null` is the absent object.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number};

use crate::scalar::Scalar;

/// Fields of an object node, in insertion order.
pub type Fields<F> = IndexMap<String, Value<F>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Bool,
    Float,
    Text,
    Object,
}

impl ValueType {
    pub const ALL: [ValueType; 5] = [
        ValueType::Int,
        ValueType::Bool,
        ValueType::Float,
        ValueType::Text,
        ValueType::Object,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ValueType::Int => "int",
            ValueType::Bool => "bool",
            ValueType::Float => "float",
            ValueType::Text => "text",
            ValueType::Object => "object",
        }
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub enum Value<F> {
    /// Absent object.
    Null,
    Int(i64),
    Bool(bool),
    Float(F),
    Text(String),
    Object(Fields<F>),
}

impl<F: Scalar> Value<F> {
    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    /// Builds an object node from `(name, value)` pairs, keeping their order.
    pub fn object<K: Into<String>>(fields: impl IntoIterator<Item = (K, Value<F>)>) -> Self {
        Value::Object(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// The type this value inhabits. `Null` is the absent `Object`.
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Null | Value::Object(_) => ValueType::Object,
            Value::Int(_) => ValueType::Int,
            Value::Bool(_) => ValueType::Bool,
            Value::Float(_) => ValueType::Float,
            Value::Text(_) => ValueType::Text,
        }
    }

    /// Checks that the value inhabits `ty` and is structurally well formed:
    /// floats are finite and objects carry no nested nulls.
    pub fn check(&self, ty: ValueType) -> Result<(), String> {
        if self.value_type() != ty {
            return Err(format!("expected {ty}, found {}", self.value_type()));
        }
        self.check_node(true)
    }

    fn check_node(&self, top_level: bool) -> Result<(), String> {
        match self {
            Value::Null if !top_level => Err("nested null inside object".to_string()),
            Value::Float(x) if !x.is_finite() => Err(format!("non-finite float {x}")),
            Value::Object(fields) => fields
                .iter()
                .try_for_each(|(name, v)| v.check_node(false).map_err(|e| format!("{name}: {e}"))),
            _ => Ok(()),
        }
    }

    /// Plain JSON form used in scenario files and as the basis of the
    /// canonical object encoding. Object keys come out sorted.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Null => serde_json::Value::Null,
            Value::Int(i) => serde_json::Value::from(*i),
            Value::Bool(b) => serde_json::Value::Bool(*b),
            Value::Float(x) => Number::from_f64(x.widen())
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Text(s) => serde_json::Value::String(s.clone()),
            Value::Object(fields) => {
                let mut keys: Vec<&String> = fields.keys().collect();
                keys.sort();
                let mut map = Map::new();
                for k in keys {
                    map.insert(k.clone(), fields[k].to_json());
                }
                serde_json::Value::Object(map)
            }
        }
    }

    /// Reads a plain JSON value as a value of type `ty`.
    ///
    /// `Float` accepts any JSON number; `Int` only integral ones. Inside
    /// objects, integral numbers become `Int` leaves and the rest `Float`.
    pub fn from_json(json: &serde_json::Value, ty: ValueType) -> Result<Self, String> {
        use serde_json::Value as J;
        let value = match (ty, json) {
            (ValueType::Int, J::Number(n)) => Value::Int(
                n.as_i64()
                    .ok_or_else(|| format!("{n} is not a 64-bit integer"))?,
            ),
            (ValueType::Bool, J::Bool(b)) => Value::Bool(*b),
            (ValueType::Float, J::Number(n)) => Value::Float(F::from_wide(
                n.as_f64().ok_or_else(|| format!("{n} is not a float"))?,
            )),
            (ValueType::Text, J::String(s)) => Value::Text(s.clone()),
            (ValueType::Object, J::Null) => Value::Null,
            (ValueType::Object, J::Object(_)) => Self::tree_from_json(json)?,
            (ty, other) => return Err(format!("expected {ty}, found {}", json_kind(other))),
        };
        value.check(ty)?;
        Ok(value)
    }

    fn tree_from_json(json: &serde_json::Value) -> Result<Self, String> {
        use serde_json::Value as J;
        Ok(match json {
            J::Bool(b) => Value::Bool(*b),
            J::String(s) => Value::Text(s.clone()),
            J::Number(n) => match n.as_i64() {
                Some(i) => Value::Int(i),
                None if n.is_f64() => Value::Float(F::from_wide(n.as_f64().unwrap_or_default())),
                None => return Err(format!("{n} does not fit a 64-bit integer")),
            },
            J::Object(map) => {
                let mut fields = Fields::with_capacity(map.len());
                for (k, v) in map {
                    let child = Self::tree_from_json(v).map_err(|e| format!("{k}: {e}"))?;
                    fields.insert(k.clone(), child);
                }
                Value::Object(fields)
            }
            J::Null => return Err("nested null inside object".to_string()),
            J::Array(_) => return Err("arrays are not supported inside objects".to_string()),
        })
    }
}

fn json_kind(json: &serde_json::Value) -> &'static str {
    match json {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "bool",
        serde_json::Value::Number(_) => "number",
        serde_json::Value::String(_) => "string",
        serde_json::Value::Array(_) => "array",
        serde_json::Value::Object(_) => "object",
    }
}
