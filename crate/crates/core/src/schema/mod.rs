//! The supported JSON-Schema subset, the tool-call envelope around it, and
//! the output templates used by the evaluation harness.
//!
//! The subset is `object`, `string` and `integer` with the keywords
//! `properties`, `required`, `maxLength` and `description`. Anything else is
//! rejected at load time. Property order is significant: generated objects
//! emit keys in declaration order.

pub mod json;
mod templates;
mod validate;

use serde::ser::{Serialize, SerializeMap, Serializer};
use thiserror::Error;

use self::json::JsonValue;

pub use self::templates::{
    apply_index_prefix, build_chart_schema, build_doc_schema, strip_index_prefix,
    ANSWER_KEY, CHART_ANSWER_DESCRIPTION, DOC_ANSWER_DESCRIPTION, DOC_TOOL_DESCRIPTION,
    DOC_TOOL_NAME, MAX_INDEXED_PROPERTIES, REASONING_KEY,
};
pub use self::validate::{
    validate_instance, ValidationReport, Validator, Violation, ViolationKind, Whitespace,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("unsupported keyword `{keyword}` at {path}")]
    UnsupportedKeyword { path: String, keyword: String },
    #[error("unknown type `{ty}` at {path}")]
    UnknownType { path: String, ty: String },
    #[error("invalid schema at {path}: {reason}")]
    Invalid { path: String, reason: String },
    #[error("invalid key `{0}`: only ASCII letters, digits and underscore are allowed")]
    InvalidKey(String),
    #[error("{0} top-level properties exceed the single-digit index prefix limit")]
    TooManyProperties(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemaKind {
    Object(ObjectSchema),
    String { max_length: Option<usize> },
    Integer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaNode {
    pub kind: SchemaKind,
    /// Prompt-side documentation. Never affects the generated language.
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Property {
    pub key: String,
    pub schema: SchemaNode,
}

/// Object properties in declaration order plus the required subset.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObjectSchema {
    properties: Vec<Property>,
    required: Vec<String>,
}

impl ObjectSchema {
    pub fn new(properties: Vec<Property>, required: Vec<String>) -> Result<Self, SchemaError> {
        for (i, p) in properties.iter().enumerate() {
            if properties[..i].iter().any(|q| q.key == p.key) {
                return Err(SchemaError::Invalid {
                    path: format!("properties.{}", p.key),
                    reason: "duplicate property key".into(),
                });
            }
        }
        for (i, r) in required.iter().enumerate() {
            if !properties.iter().any(|p| &p.key == r) {
                return Err(SchemaError::Invalid {
                    path: "required".into(),
                    reason: format!("`{r}` is not a declared property"),
                });
            }
            if required[..i].contains(r) {
                return Err(SchemaError::Invalid {
                    path: "required".into(),
                    reason: format!("`{r}` listed twice"),
                });
            }
        }
        Ok(Self {
            properties,
            required,
        })
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }

    pub fn required(&self) -> &[String] {
        &self.required
    }

    pub fn is_required(&self, key: &str) -> bool {
        self.required.iter().any(|r| r == key)
    }

    pub fn get(&self, key: &str) -> Option<&SchemaNode> {
        self.properties.iter().find(|p| p.key == key).map(|p| &p.schema)
    }
}

impl SchemaNode {
    pub fn string(max_length: Option<usize>) -> Self {
        Self {
            kind: SchemaKind::String { max_length },
            description: None,
        }
    }

    pub fn integer() -> Self {
        Self {
            kind: SchemaKind::Integer,
            description: None,
        }
    }

    pub fn object(object: ObjectSchema) -> Self {
        Self {
            kind: SchemaKind::Object(object),
            description: None,
        }
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = Some(description.into());
        self
    }

    pub fn as_object(&self) -> Option<&ObjectSchema> {
        match &self.kind {
            SchemaKind::Object(o) => Some(o),
            _ => None,
        }
    }
}

/// The tool-call envelope: `name`, `description`, and an object `parameters`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolSpec {
    name: String,
    description: String,
    parameters: SchemaNode,
}

impl ToolSpec {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        parameters: SchemaNode,
    ) -> Result<Self, SchemaError> {
        let name = name.into();
        if name.is_empty() {
            return Err(SchemaError::Invalid {
                path: "name".into(),
                reason: "tool name must be non-empty".into(),
            });
        }
        if parameters.as_object().is_none() {
            return Err(SchemaError::Invalid {
                path: "parameters".into(),
                reason: "parameters must be an object schema".into(),
            });
        }
        Ok(Self {
            name,
            description: description.into(),
            parameters,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn parameters(&self) -> &SchemaNode {
        &self.parameters
    }

    pub fn object(&self) -> &ObjectSchema {
        self.parameters.as_object().expect("ToolSpec parameters are always an object")
    }

    /// Pretty-printed JSON in the on-disk envelope shape.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialization is infallible")
    }
}

/// Parses a tool envelope, preserving property order.
pub fn parse_schema(text: &str) -> Result<ToolSpec, SchemaError> {
    let doc = json::parse(text).map_err(|e| SchemaError::MalformedJson(e.to_string()))?;
    let JsonValue::Object(members) = doc else {
        return Err(SchemaError::Invalid {
            path: "$".into(),
            reason: "tool spec must be a JSON object".into(),
        });
    };
    let mut name = None;
    let mut description = None;
    let mut parameters = None;
    for (key, value) in members {
        let slot = match key.decoded.as_str() {
            "name" => &mut name,
            "description" => &mut description,
            "parameters" => &mut parameters,
            other => {
                return Err(SchemaError::UnsupportedKeyword {
                    path: "$".into(),
                    keyword: other.to_string(),
                })
            }
        };
        if slot.replace(value).is_some() {
            return Err(SchemaError::Invalid {
                path: "$".into(),
                reason: format!("duplicate field `{}`", key.decoded),
            });
        }
    }
    let name = expect_string(name, "$.name")?;
    let description = match description {
        Some(v) => expect_string(Some(v), "$.description")?,
        None => String::new(),
    };
    let parameters = parameters.ok_or_else(|| SchemaError::Invalid {
        path: "$.parameters".into(),
        reason: "missing".into(),
    })?;
    let parameters = parse_node(&parameters, "$.parameters")?;
    ToolSpec::new(name, description, parameters)
}

/// Parses a bare schema node (no envelope).
pub fn parse_schema_node(text: &str) -> Result<SchemaNode, SchemaError> {
    let doc = json::parse(text).map_err(|e| SchemaError::MalformedJson(e.to_string()))?;
    parse_node(&doc, "$")
}

fn expect_string(value: Option<JsonValue>, path: &str) -> Result<String, SchemaError> {
    match value {
        Some(JsonValue::String(s)) => Ok(s.decoded),
        Some(other) => Err(SchemaError::Invalid {
            path: path.into(),
            reason: format!("expected string, found {}", other.type_name()),
        }),
        None => Err(SchemaError::Invalid {
            path: path.into(),
            reason: "missing".into(),
        }),
    }
}

fn parse_node(value: &JsonValue, path: &str) -> Result<SchemaNode, SchemaError> {
    let JsonValue::Object(members) = value else {
        return Err(SchemaError::Invalid {
            path: path.into(),
            reason: format!("schema must be an object, found {}", value.type_name()),
        });
    };
    let mut fields: Vec<(&str, &JsonValue)> = Vec::with_capacity(members.len());
    for (key, v) in members {
        let k = key.decoded.as_str();
        if !matches!(k, "type" | "properties" | "required" | "maxLength" | "description") {
            return Err(SchemaError::UnsupportedKeyword {
                path: path.into(),
                keyword: k.to_string(),
            });
        }
        if fields.iter().any(|(seen, _)| *seen == k) {
            return Err(SchemaError::Invalid {
                path: path.into(),
                reason: format!("duplicate keyword `{k}`"),
            });
        }
        fields.push((k, v));
    }
    let field = |name: &str| fields.iter().find(|(k, _)| *k == name).map(|(_, v)| *v);
    let misplaced = |keyword: &str| SchemaError::UnsupportedKeyword {
        path: path.into(),
        keyword: keyword.to_string(),
    };

    let ty = match field("type") {
        Some(JsonValue::String(s)) => s.decoded.clone(),
        Some(other) => {
            return Err(SchemaError::UnknownType {
                path: path.into(),
                ty: other.to_canonical(),
            })
        }
        None => {
            return Err(SchemaError::Invalid {
                path: path.into(),
                reason: "missing `type`".into(),
            })
        }
    };
    let description = match field("description") {
        Some(JsonValue::String(s)) => Some(s.decoded.clone()),
        Some(_) => {
            return Err(SchemaError::Invalid {
                path: format!("{path}.description"),
                reason: "description must be a string".into(),
            })
        }
        None => None,
    };

    let kind = match ty.as_str() {
        "object" => {
            if field("maxLength").is_some() {
                return Err(misplaced("maxLength"));
            }
            let mut properties = Vec::new();
            match field("properties") {
                Some(JsonValue::Object(props)) => {
                    for (key, child) in props {
                        let child_path = format!("{path}.properties.{}", key.decoded);
                        properties.push(Property {
                            key: key.decoded.clone(),
                            schema: parse_node(child, &child_path)?,
                        });
                    }
                }
                Some(_) => {
                    return Err(SchemaError::Invalid {
                        path: format!("{path}.properties"),
                        reason: "properties must be an object".into(),
                    })
                }
                None => {}
            }
            let mut required = Vec::new();
            match field("required") {
                Some(JsonValue::Array(items)) => {
                    for item in items {
                        match item {
                            JsonValue::String(s) => required.push(s.decoded.clone()),
                            _ => {
                                return Err(SchemaError::Invalid {
                                    path: format!("{path}.required"),
                                    reason: "required entries must be strings".into(),
                                })
                            }
                        }
                    }
                }
                Some(_) => {
                    return Err(SchemaError::Invalid {
                        path: format!("{path}.required"),
                        reason: "required must be an array".into(),
                    })
                }
                None => {}
            }
            let object = ObjectSchema::new(properties, required).map_err(|e| match e {
                SchemaError::Invalid { path: p, reason } => SchemaError::Invalid {
                    path: format!("{path}.{p}"),
                    reason,
                },
                other => other,
            })?;
            SchemaKind::Object(object)
        }
        "string" | "integer" => {
            for keyword in ["properties", "required"] {
                if field(keyword).is_some() {
                    return Err(misplaced(keyword));
                }
            }
            if ty == "integer" {
                if field("maxLength").is_some() {
                    return Err(misplaced("maxLength"));
                }
                SchemaKind::Integer
            } else {
                let max_length = match field("maxLength") {
                    None => None,
                    Some(JsonValue::Number(raw)) => Some(raw.parse::<usize>().map_err(|_| {
                        SchemaError::Invalid {
                            path: format!("{path}.maxLength"),
                            reason: format!("`{raw}` is not a non-negative integer"),
                        }
                    })?),
                    Some(_) => {
                        return Err(SchemaError::Invalid {
                            path: format!("{path}.maxLength"),
                            reason: "maxLength must be a number".into(),
                        })
                    }
                };
                SchemaKind::String { max_length }
            }
        }
        other => {
            return Err(SchemaError::UnknownType {
                path: path.into(),
                ty: other.to_string(),
            })
        }
    };
    Ok(SchemaNode { kind, description })
}

impl Serialize for SchemaNode {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(None)?;
        match &self.kind {
            SchemaKind::Object(object) => {
                map.serialize_entry("type", "object")?;
                if let Some(d) = &self.description {
                    map.serialize_entry("description", d)?;
                }
                map.serialize_entry("properties", &PropertiesSer(&object.properties))?;
                map.serialize_entry("required", &object.required)?;
            }
            SchemaKind::String { max_length } => {
                map.serialize_entry("type", "string")?;
                if let Some(d) = &self.description {
                    map.serialize_entry("description", d)?;
                }
                if let Some(n) = max_length {
                    map.serialize_entry("maxLength", n)?;
                }
            }
            SchemaKind::Integer => {
                map.serialize_entry("type", "integer")?;
                if let Some(d) = &self.description {
                    map.serialize_entry("description", d)?;
                }
            }
        }
        map.end()
    }
}

struct PropertiesSer<'a>(&'a [Property]);

impl Serialize for PropertiesSer<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for p in self.0 {
            map.serialize_entry(&p.key, &p.schema)?;
        }
        map.end()
    }
}

impl Serialize for ToolSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(3))?;
        map.serialize_entry("name", &self.name)?;
        map.serialize_entry("description", &self.description)?;
        map.serialize_entry("parameters", &self.parameters)?;
        map.end()
    }
}
