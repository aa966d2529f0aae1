//! JSON emission with fixed key order and 17-significant-digit floats.

use std::str::FromStr;

use serde_json::{Map, Number, Value};

/// A float as a JSON number with 17 significant digits; non-finite values
/// become `null`.
pub fn float(v: f64) -> Value {
    if !v.is_finite() {
        return Value::Null;
    }
    Number::from_str(&format!("{v:.16e}"))
        .map(Value::Number)
        .expect("formatted float is a valid JSON number")
}

pub fn floats(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| float(v)).collect())
}

/// Object builder that keeps insertion order.
#[derive(Default)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(mut self, key: &str, v: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), v.into());
        self
    }

    pub fn num(self, key: &str, v: f64) -> Self {
        self.put(key, float(v))
    }
}

impl From<Obj> for Value {
    fn from(o: Obj) -> Value {
        Value::Object(o.0)
    }
}

pub fn to_string(v: impl Into<Value>) -> String {
    let mut s = serde_json::to_string_pretty(&v.into()).expect("JSON values always serialize");
    s.push('\n');
    s
}
