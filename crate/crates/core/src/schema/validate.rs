//! Instance validation against a [`SchemaNode`].
//!
//! This is the correctness oracle for the decoding path, so it works on its
//! own JSON reader and never touches the regex or automaton code.

use std::fmt;

use super::json::{self, JsonValue};
use super::{SchemaKind, SchemaNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    MissingRequired,
    WrongType,
    TooLong,
    UnknownKey,
    KeyOrderViolation,
    MalformedJson,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub json_path: String,
    pub kind: ViolationKind,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?} ({})", self.json_path, self.kind, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, json_path: &str, kind: ViolationKind, detail: impl Into<String>) {
        self.violations.push(Violation {
            json_path: json_path.to_string(),
            kind,
            detail: detail.into(),
        });
    }
}

/// Which surface forms the validator accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Whitespace {
    /// Exactly the form the decoder generates: one space after each `:` and
    /// `,`, nothing else, keys written with their canonical escaping.
    #[default]
    Canonical,
    /// Any JSON whitespace and key escaping.
    Any,
}

#[derive(Debug, Clone, Copy)]
pub struct Validator<'a> {
    schema: &'a SchemaNode,
    whitespace: Whitespace,
}

impl<'a> Validator<'a> {
    pub fn new(schema: &'a SchemaNode) -> Self {
        Self {
            schema,
            whitespace: Whitespace::Canonical,
        }
    }

    pub fn whitespace(mut self, whitespace: Whitespace) -> Self {
        self.whitespace = whitespace;
        self
    }

    pub fn validate(&self, candidate: &str) -> ValidationReport {
        self.check(candidate).0
    }

    /// Validates and also returns the parsed document when it is well-formed.
    pub fn check(&self, candidate: &str) -> (ValidationReport, Option<JsonValue>) {
        let mut report = ValidationReport::default();
        let value = match json::parse(candidate) {
            Ok(v) => v,
            Err(e) => {
                report.push("$", ViolationKind::MalformedJson, e.to_string());
                return (report, None);
            }
        };
        if self.whitespace == Whitespace::Canonical {
            if value.to_canonical() != candidate {
                report.push("$", ViolationKind::MalformedJson, "non-canonical whitespace");
            }
            check_key_escapes(&value, "$", &mut report);
        }
        check_node(self.schema, &value, "$", &mut report);
        (report, Some(value))
    }
}

/// Validates `candidate` against `schema` in the canonical surface form.
pub fn validate_instance(schema: &SchemaNode, candidate: &str) -> ValidationReport {
    Validator::new(schema).validate(candidate)
}

fn check_key_escapes(value: &JsonValue, path: &str, report: &mut ValidationReport) {
    match value {
        JsonValue::Object(members) => {
            for (key, v) in members {
                let child = format!("{path}.{}", key.decoded);
                if key.raw != json::escape_canonical(&key.decoded) {
                    report.push(&child, ViolationKind::MalformedJson, "non-canonical key escaping");
                }
                check_key_escapes(v, &child, report);
            }
        }
        JsonValue::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                check_key_escapes(v, &format!("{path}[{i}]"), report);
            }
        }
        _ => {}
    }
}

fn is_integer_literal(raw: &str) -> bool {
    let digits = raw.strip_prefix('-').unwrap_or(raw);
    !digits.is_empty()
        && digits.bytes().all(|b| b.is_ascii_digit())
        && (digits == "0" || !digits.starts_with('0'))
}

fn check_node(schema: &SchemaNode, value: &JsonValue, path: &str, report: &mut ValidationReport) {
    match (&schema.kind, value) {
        (SchemaKind::String { max_length }, JsonValue::String(s)) => {
            if let Some(max) = max_length {
                if s.units > *max {
                    report.push(
                        path,
                        ViolationKind::TooLong,
                        format!("{} characters exceed maxLength {max}", s.units),
                    );
                }
            }
        }
        (SchemaKind::Integer, JsonValue::Number(raw)) if is_integer_literal(raw) => {}
        (SchemaKind::Object(object), JsonValue::Object(members)) => {
            let mut seen: Vec<&str> = Vec::with_capacity(members.len());
            let mut last_index: Option<usize> = None;
            let mut order_reported = false;
            for (key, child) in members {
                let name = key.decoded.as_str();
                let child_path = format!("{path}.{name}");
                let Some(index) = object.properties().iter().position(|p| p.key == name) else {
                    report.push(&child_path, ViolationKind::UnknownKey, "key not declared by schema");
                    continue;
                };
                if seen.contains(&name) {
                    report.push(&child_path, ViolationKind::KeyOrderViolation, "duplicate key");
                    continue;
                }
                seen.push(name);
                if last_index.is_some_and(|last| index < last) && !order_reported {
                    report.push(
                        &child_path,
                        ViolationKind::KeyOrderViolation,
                        "key appears before a property declared earlier",
                    );
                    order_reported = true;
                }
                last_index = Some(last_index.map_or(index, |last| last.max(index)));
                check_node(&object.properties()[index].schema, child, &child_path, report);
            }
            for required in object.required() {
                if !seen.contains(&required.as_str()) {
                    report.push(
                        &format!("{path}.{required}"),
                        ViolationKind::MissingRequired,
                        "required key absent",
                    );
                }
            }
        }
        (kind, value) => {
            let expected = match kind {
                SchemaKind::Object(_) => "object",
                SchemaKind::String { .. } => "string",
                SchemaKind::Integer => "integer",
            };
            report.push(
                path,
                ViolationKind::WrongType,
                format!("expected {expected}, found {}", value.type_name()),
            );
        }
    }
}
