//! Abstract states: which tracked variables hold a non-default value.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::appmodel::ComponentState;
use crate::scalar::Scalar;
use crate::value::{Value, ValueType};

/// Default value of a type: 0, false, 0.0, "" or the absent object.
pub fn default_value<F: Scalar>(ty: ValueType) -> Value<F> {
    match ty {
        ValueType::Int => Value::Int(0),
        ValueType::Bool => Value::Bool(false),
        ValueType::Float => Value::Float(F::zero()),
        ValueType::Text => Value::Text(String::new()),
        ValueType::Object => Value::Null,
    }
}

/// Floats are default only if bitwise equal to `0.0`; any present object,
/// even an empty one, is non-default.
pub fn is_default<F: Scalar>(value: &Value<F>) -> bool {
    match value {
        Value::Null => true,
        Value::Int(i) => *i == 0,
        Value::Bool(b) => !*b,
        Value::Float(x) => x.to_bits_u64() == F::zero().to_bits_u64(),
        Value::Text(s) => s.is_empty(),
        Value::Object(_) => false,
    }
}

/// Key of the healer's memory: component name plus a `0`/`1` mask over the
/// tracked variables, `1` meaning non-default.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractState {
    pub activity: String,
    pub bitmask: String,
}

impl AbstractState {
    pub fn new(activity: impl Into<String>, bitmask: impl Into<String>) -> Self {
        AbstractState {
            activity: activity.into(),
            bitmask: bitmask.into(),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        !self.activity.is_empty() && self.bitmask.bytes().all(|b| b == b'0' || b == b'1')
    }
}

impl fmt::Display for AbstractState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.activity, self.bitmask)
    }
}

pub fn abstract_state<F: Scalar>(c: &ComponentState<F>) -> AbstractState {
    let bitmask = c
        .variables()
        .map(|v| if is_default(v.value()) { '0' } else { '1' })
        .collect();
    AbstractState {
        activity: c.name().to_owned(),
        bitmask,
    }
}

pub fn abstract_equal(a: &AbstractState, b: &AbstractState) -> bool {
    a.activity == b.activity && a.bitmask == b.bitmask
}
