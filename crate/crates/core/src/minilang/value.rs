use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A runtime value. `Bottom` marks a variable that has not been assigned yet.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Array(Vec<i64>),
    Bottom,
}

impl Value {
    pub fn is_bottom(&self) -> bool {
        matches!(self, Value::Bottom)
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Array(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
            Value::Bottom => write!(f, "⊥"),
        }
    }
}

// JSON form: ints as numbers, bools as booleans, arrays as number arrays, ⊥ as null.
impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(v) => s.serialize_i64(*v),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Array(xs) => xs.serialize(s),
            Value::Bottom => s.serialize_none(),
        }
    }
}

impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = serde_json::Value::deserialize(d)?;
        match raw {
            serde_json::Value::Null => Ok(Value::Bottom),
            serde_json::Value::Bool(b) => Ok(Value::Bool(b)),
            serde_json::Value::Number(n) => n
                .as_i64()
                .map(Value::Int)
                .ok_or_else(|| D::Error::custom("non-integer number")),
            serde_json::Value::Array(items) => items
                .into_iter()
                .map(|x| x.as_i64().ok_or_else(|| D::Error::custom("array element is not an integer")))
                .collect::<Result<Vec<_>, _>>()
                .map(Value::Array),
            other => Err(D::Error::custom(format!("unexpected value {other}"))),
        }
    }
}

/// Values of every declared variable, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProgramState(pub Vec<Value>);

impl ProgramState {
    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[Value] {
        &self.0
    }
}
