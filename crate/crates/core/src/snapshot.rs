//! Bundle encoding, snapshots, and structural comparison.
//!
//! Primitive values are stored natively in a bundle; object trees are stored
//! as canonical JSON text (sorted keys, no insignificant whitespace), so equal
//! trees always encode to identical bytes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::appmodel::ComponentState;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::value::{Value, ValueType};

/// Names of variables whose value after recreation differs from the snapshot.
pub type LostVarSet = BTreeSet<String>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "tag", content = "value", rename_all = "lowercase")]
pub enum EncodedValue<F> {
    Int(i64),
    Bool(bool),
    Float(F),
    Text(String),
    /// Canonical JSON text of the tree, or `null` for the absent object.
    Object(String),
}

impl<F: Scalar> EncodedValue<F> {
    pub fn tag(&self) -> ValueType {
        match self {
            EncodedValue::Int(_) => ValueType::Int,
            EncodedValue::Bool(_) => ValueType::Bool,
            EncodedValue::Float(_) => ValueType::Float,
            EncodedValue::Text(_) => ValueType::Text,
            EncodedValue::Object(_) => ValueType::Object,
        }
    }
}

/// Canonical JSON text of a value.
pub fn canonical_json<F: Scalar>(value: &Value<F>) -> String {
    value.to_json().to_string()
}

pub fn encode<F: Scalar>(value: &Value<F>) -> EncodedValue<F> {
    match value {
        Value::Int(i) => EncodedValue::Int(*i),
        Value::Bool(b) => EncodedValue::Bool(*b),
        Value::Float(x) => EncodedValue::Float(*x),
        Value::Text(s) => EncodedValue::Text(s.clone()),
        Value::Null | Value::Object(_) => EncodedValue::Object(canonical_json(value)),
    }
}

/// Decodes an entry into a value of type `ty`.
pub fn decode<F: Scalar>(encoded: &EncodedValue<F>, ty: ValueType) -> Result<Value<F>, String> {
    if encoded.tag() != ty {
        return Err(format!("bundle holds {}, variable is {ty}", encoded.tag()));
    }
    let value = match encoded {
        EncodedValue::Int(i) => Value::Int(*i),
        EncodedValue::Bool(b) => Value::Bool(*b),
        EncodedValue::Float(x) => Value::Float(*x),
        EncodedValue::Text(s) => Value::Text(s.clone()),
        EncodedValue::Object(text) => {
            let json: serde_json::Value =
                serde_json::from_str(text).map_err(|e| format!("bad object payload: {e}"))?;
            return Value::from_json(&json, ValueType::Object);
        }
    };
    value.check(ty)?;
    Ok(value)
}

/// Flat name → encoded value map, the unit of save/restore.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle<F>(BTreeMap<String, EncodedValue<F>>);

impl<F: Scalar> Bundle<F> {
    pub fn new() -> Self {
        Bundle(BTreeMap::new())
    }

    pub fn put(&mut self, name: impl Into<String>, value: &Value<F>) {
        self.0.insert(name.into(), encode(value));
    }

    pub fn get(&self, name: &str) -> Option<&EncodedValue<F>> {
        self.0.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &EncodedValue<F>)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Full,
    Selective,
}

/// A bundle captured from one component at one event.
///
/// For a selective snapshot the selected names are exactly the entry keys.
/// Fields are declared in key order so the serialized form is canonical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot<F> {
    pub component: String,
    pub entries: Bundle<F>,
    pub event: u64,
    pub scope: Scope,
}

impl<F: Scalar> Snapshot<F> {
    /// Compact canonical JSON, the on-disk form.
    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("snapshot values are finite")
    }

    /// Serialized size in bytes.
    pub fn serialized_len(&self) -> usize {
        self.to_bytes().len()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::parse(None, &e))
    }

    pub fn file_name(&self) -> String {
        format!("snapshot-{}-{}.json", self.component, self.event)
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_bytes()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_slice(&bytes).map_err(|e| Error::parse(Some(path), &e))
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.entries.keys().map(str::to_owned).collect()
    }
}

/// Full snapshot: one entry per tracked variable.
pub fn take_snapshot<F: Scalar>(c: &ComponentState<F>, event: u64) -> Snapshot<F> {
    let mut entries = Bundle::new();
    for var in c.variables() {
        entries.put(var.name(), var.value());
    }
    Snapshot {
        component: c.name().to_owned(),
        entries,
        event,
        scope: Scope::Full,
    }
}

/// Snapshot restricted to `names`.
pub fn take_selective<F: Scalar>(
    c: &ComponentState<F>,
    names: &BTreeSet<String>,
    event: u64,
) -> Result<Snapshot<F>> {
    let mut entries = Bundle::new();
    for name in names {
        let value = c.get(name).ok_or_else(|| Error::UnknownVariable {
            component: c.name().to_owned(),
            name: name.clone(),
        })?;
        entries.put(name.clone(), value);
    }
    Ok(Snapshot {
        component: c.name().to_owned(),
        entries,
        event,
        scope: Scope::Selective,
    })
}

/// Variables of `c` whose current value no longer matches the snapshot.
pub fn diff<F: Scalar>(s: &Snapshot<F>, c: &ComponentState<F>) -> Result<LostVarSet> {
    if s.component != c.name() {
        return Err(Error::ComponentMismatch {
            component: c.name().to_owned(),
            reason: format!("snapshot was taken from `{}`", s.component),
        });
    }
    let mut lost = LostVarSet::new();
    for (name, encoded) in s.entries.iter() {
        let var = c.variable(name).ok_or_else(|| Error::ComponentMismatch {
            component: c.name().to_owned(),
            reason: format!("snapshot entry `{name}` is not a variable"),
        })?;
        let saved = decode(encoded, var.spec().ty).map_err(|reason| Error::Decode {
            name: name.to_owned(),
            reason,
        })?;
        let same = deep_equal(&saved, var.value()).map_err(|e| Error::TypeMismatch {
            name: name.to_owned(),
            reason: e.to_string(),
        })?;
        if !same {
            lost.insert(name.to_owned());
        }
    }
    Ok(lost)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot compare {left} with {right}")]
pub struct TypeMismatch {
    pub left: ValueType,
    pub right: ValueType,
}

/// Structural equality: floats bitwise, objects field by field regardless of
/// field order, `Null` equal only to `Null`.
pub fn deep_equal<F: Scalar>(a: &Value<F>, b: &Value<F>) -> Result<bool, TypeMismatch> {
    if a.value_type() != b.value_type() {
        return Err(TypeMismatch {
            left: a.value_type(),
            right: b.value_type(),
        });
    }
    Ok(nodes_equal(a, b))
}

fn nodes_equal<F: Scalar>(a: &Value<F>, b: &Value<F>) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Int(x), Value::Int(y)) => x == y,
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Float(x), Value::Float(y)) => x.to_bits_u64() == y.to_bits_u64(),
        (Value::Text(x), Value::Text(y)) => x == y,
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter()
                    .all(|(k, xv)| y.get(k).is_some_and(|yv| nodes_equal(xv, yv)))
        }
        _ => false,
    }
}
