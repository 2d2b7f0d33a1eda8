//! Deterministic JSON run reports.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Number, Value};

pub const SCHEMA_VERSION: u32 = 1;

/// Accumulates one command's output. Keys are emitted in sorted order and
/// floats at 17 significant digits, so equal runs give equal bytes.
#[derive(Debug, Default)]
pub struct RunReport {
    pub command: String,
    pub input_path: String,
    pub input_sha256: String,
    pub sections: BTreeMap<String, Value>,
    pub verdicts: BTreeMap<String, bool>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
    pub wall_time: Option<f64>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn put<T: Serialize>(&mut self, key: &str, value: T) {
        let v = serde_json::to_value(value).expect("report values serialise");
        self.sections.insert(key.to_string(), v);
    }

    pub fn verdict(&mut self, name: impl Into<String>, pass: bool) {
        self.verdicts.insert(name.into(), pass);
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|p| *p)
    }

    /// 0 when every verdict passes, 2 when one fails, 1 on error.
    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() {
            1
        } else if self.all_pass() {
            0
        } else {
            2
        }
    }

    pub fn to_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
        root.insert("command".into(), Value::from(self.command.clone()));
        let mut input = Map::new();
        input.insert("path".into(), Value::from(self.input_path.clone()));
        input.insert("sha256".into(), Value::from(self.input_sha256.clone()));
        root.insert("input".into(), Value::Object(input));
        for (k, v) in &self.sections {
            root.insert(k.clone(), v.clone());
        }
        root.insert(
            "verdicts".into(),
            Value::Object(self.verdicts.iter().map(|(k, v)| (k.clone(), Value::Bool(*v))).collect()),
        );
        root.insert("pass".into(), Value::Bool(self.error.is_none() && self.all_pass()));
        root.insert(
            "outputs".into(),
            Value::Array(self.outputs.iter().cloned().map(Value::from).collect()),
        );
        if let Some(e) = &self.error {
            root.insert("error".into(), Value::from(e.clone()));
        }
        if let Some(w) = self.wall_time {
            root.insert("wall_time_seconds".into(), Value::from(w));
        }
        canonical(Value::Object(root))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_value()).expect("json");
        s.push('\n');
        s
    }
}

/// Rewrites every non-integer number with 17 significant digits.
pub fn canonical(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            let x = n.as_f64().expect("finite float");
            Value::Number(format!("{x:.16e}").parse::<Number>().expect("formatted float parses"))
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonical).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits_and_keys_are_sorted() {
        let mut r = RunReport::new("solve");
        r.put("zeta", 0.1);
        r.put("alpha", vec![1.0, 2.5]);
        r.put("count", 3usize);
        r.verdict("b", true);
        r.verdict("a", false);
        let s = r.to_json();
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("2.5000000000000000e+0"), "{s}");
        assert!(s.contains("\"count\": 3"));
        assert!(s.find("\"alpha\"").unwrap() < s.find("\"zeta\"").unwrap());
        assert!(s.find("\"a\": false").unwrap() < s.find("\"b\": true").unwrap());
        assert_eq!(r.exit_code(), 2);
        r.error = Some("boom".into());
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn non_finite_floats_become_null() {
        let mut r = RunReport::new("x");
        r.put("inf", f64::INFINITY);
        assert!(r.to_json().contains("\"inf\": null"));
    }
}
