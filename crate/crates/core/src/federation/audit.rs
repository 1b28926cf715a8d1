//! Schema check of party-to-coordinator traffic.
//!
//! Every message must match the exact shape of one of the party message
//! types: no extra fields, no nested id arrays, and no node id anywhere
//! except the registration id list.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Position of the message in the transcript.
    pub message: usize,
    /// JSON path of the offending value.
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub messages: usize,
    pub violations: Vec<Violation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

enum Shape {
    Int,
    Num,
    Str,
    /// Node id list; the only place ids may appear.
    Ids,
    Arr(Box<Shape>),
    Tuple(Vec<Shape>),
    /// String-keyed map of values.
    Map(Box<Shape>),
    Opt(Box<Shape>),
    Obj(Vec<(&'static str, Shape)>),
    /// Object with a discriminating string field.
    Tagged(&'static str, Vec<(&'static str, Vec<(&'static str, Shape)>)>),
}

fn arr(s: Shape) -> Shape {
    Shape::Arr(Box::new(s))
}

fn row_vector() -> Shape {
    Shape::Obj(vec![("row", Shape::Int), ("values", arr(Shape::Num))])
}

fn envelope() -> Shape {
    use Shape::*;
    let stats = Tagged(
        "kind",
        vec![
            ("numeric", vec![("min", Num), ("max", Num)]),
            ("categorical", vec![("values", arr(Str))]),
            ("text", vec![("doc_freq", Map(Box::new(Int)))]),
            ("empty", vec![("of", Str)]),
        ],
    );
    let body = Tagged(
        "type",
        vec![
            (
                "register",
                vec![
                    ("node_ids", Ids),
                    ("schema", arr(Obj(vec![("name", Str), ("kind", Str)]))),
                    ("stats", Obj(vec![("entries", arr(Tuple(vec![Str, stats])))])),
                    ("metric_ranges", arr(Obj(vec![("metric", Str), ("min", Num), ("max", Num)]))),
                    ("edge_count", Int),
                ],
            ),
            ("feature_upload", vec![("rows", arr(row_vector()))]),
            (
                "client_update",
                vec![
                    ("phase", Str),
                    ("samples", Int),
                    ("loss", Num),
                    ("input", arr(row_vector())),
                    ("output", arr(row_vector())),
                    ("failure", Opt(Box::new(Str))),
                ],
            ),
            ("attribute_upload", vec![("session", Int), ("masked", arr(Int))]),
            ("goodbye", vec![("reason", Str)]),
        ],
    );
    Obj(vec![("run_id", Str), ("round", Int), ("client_id", Str), ("body", body)])
}

struct Checker<'a> {
    ids: &'a BTreeSet<String>,
    message: usize,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn fail(&mut self, path: &str, reason: impl Into<String>) {
        self.out.push(Violation { message: self.message, path: path.to_string(), reason: reason.into() });
    }

    fn string(&mut self, path: &str, s: &str) {
        if self.ids.contains(s) {
            self.fail(path, format!("node id `{s}` outside the registration list"));
        }
    }

    fn fields(
        &mut self,
        path: &str,
        map: &serde_json::Map<String, Value>,
        fields: &[(&'static str, Shape)],
        skip: Option<&str>,
    ) {
        for key in map.keys() {
            if Some(key.as_str()) != skip && !fields.iter().any(|(f, _)| f == key) {
                self.fail(&format!("{path}.{key}"), "unexpected field");
            }
        }
        for (name, shape) in fields {
            let p = format!("{path}.{name}");
            match map.get(*name) {
                Some(v) => self.check(&p, v, shape),
                None if matches!(shape, Shape::Opt(_)) => {}
                None => self.fail(&p, "missing field"),
            }
        }
    }

    fn check(&mut self, path: &str, v: &Value, shape: &Shape) {
        match (shape, v) {
            (Shape::Int, Value::Number(n)) if n.is_u64() || n.is_i64() => {}
            (Shape::Num, Value::Number(_)) => {}
            (Shape::Str, Value::String(s)) => self.string(path, s),
            (Shape::Ids, Value::Array(items)) => {
                if items.iter().any(|i| !i.is_string()) {
                    self.fail(path, "id list holds a non-string");
                }
            }
            (Shape::Arr(inner), Value::Array(items)) => {
                for (i, item) in items.iter().enumerate() {
                    self.check(&format!("{path}[{i}]"), item, inner);
                }
            }
            (Shape::Tuple(parts), Value::Array(items)) if parts.len() == items.len() => {
                for (i, (item, s)) in items.iter().zip(parts).enumerate() {
                    self.check(&format!("{path}[{i}]"), item, s);
                }
            }
            (Shape::Map(inner), Value::Object(map)) => {
                for (k, item) in map {
                    let p = format!("{path}.{k}");
                    self.string(&p, k);
                    self.check(&p, item, inner);
                }
            }
            (Shape::Opt(_), Value::Null) => {}
            (Shape::Opt(inner), _) => self.check(path, v, inner),
            (Shape::Obj(fields), Value::Object(map)) => self.fields(path, map, fields, None),
            (Shape::Tagged(tag, variants), Value::Object(map)) => {
                let Some(Value::String(t)) = map.get(*tag) else {
                    return self.fail(path, format!("missing `{tag}`"));
                };
                match variants.iter().find(|(name, _)| name == t) {
                    Some((_, fields)) => self.fields(path, map, fields, Some(tag)),
                    None => self.fail(path, format!("`{t}` is not a party message")),
                }
            }
            _ => self.fail(path, "value does not match the message schema"),
        }
    }
}

/// Check a transcript of serialized party messages.
pub fn audit_transcript(messages: &[String]) -> AuditReport {
    let parsed: Vec<Option<Value>> = messages.iter().map(|m| serde_json::from_str(m).ok()).collect();
    let mut ids = BTreeSet::new();
    for v in parsed.iter().flatten() {
        if v.pointer("/body/type").and_then(Value::as_str) == Some("register") {
            if let Some(list) = v.pointer("/body/node_ids").and_then(Value::as_array) {
                ids.extend(list.iter().filter_map(|s| s.as_str().map(String::from)));
            }
        }
    }
    let shape = envelope();
    let mut violations = Vec::new();
    for (i, v) in parsed.iter().enumerate() {
        let mut c = Checker { ids: &ids, message: i, out: Vec::new() };
        match v {
            Some(v) => c.check("$", v, &shape),
            None => c.fail("$", "not JSON"),
        }
        violations.extend(c.out);
    }
    AuditReport { messages: messages.len(), violations }
}
