//! Output templates for the chart/infographic and document datasets, and the
//! index-prefix transform that keeps key order stable under backends which
//! sort object keys alphabetically.

use super::{ObjectSchema, Property, SchemaError, SchemaNode, ToolSpec};

pub const REASONING_KEY: &str = "1_reasoning";
pub const ANSWER_KEY: &str = "2_answer";
pub const CHART_ANSWER_DESCRIPTION: &str = "Concise answer to the user question.";
pub const DOC_TOOL_NAME: &str = "doc_extraction_tool";
pub const DOC_TOOL_DESCRIPTION: &str = "Extract information from a document";
pub const DOC_ANSWER_DESCRIPTION: &str = "The answer, exactly as it appears in the document.";

/// Prefixes are single digits so that alphabetical order equals position.
pub const MAX_INDEXED_PROPERTIES: usize = 9;

/// Reasoning-then-answer template for chart and infographic questions.
pub fn build_chart_schema(tool_name: &str, tool_description: &str) -> Result<ToolSpec, SchemaError> {
    let object = ObjectSchema::new(
        vec![
            Property {
                key: REASONING_KEY.into(),
                schema: SchemaNode::string(None),
            },
            Property {
                key: ANSWER_KEY.into(),
                schema: SchemaNode::string(None).with_description(CHART_ANSWER_DESCRIPTION),
            },
        ],
        vec![REASONING_KEY.into(), ANSWER_KEY.into()],
    )?;
    ToolSpec::new(tool_name, tool_description, SchemaNode::object(object))
}

/// Entity-keyed extraction template: the answer property is named after the
/// requested entity. `page` answers are integers; everything else is a
/// length-capped string.
pub fn build_doc_schema(key: &str, max_length: usize) -> Result<ToolSpec, SchemaError> {
    if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(SchemaError::InvalidKey(key.to_string()));
    }
    let answer_key = format!("2_{key}");
    let answer = if key == "page" {
        SchemaNode::integer()
    } else {
        SchemaNode::string(Some(max_length))
    }
    .with_description(DOC_ANSWER_DESCRIPTION);
    let object = ObjectSchema::new(
        vec![
            Property {
                key: REASONING_KEY.into(),
                schema: SchemaNode::string(None),
            },
            Property {
                key: answer_key.clone(),
                schema: answer,
            },
        ],
        vec![REASONING_KEY.into(), answer_key],
    )?;
    ToolSpec::new(DOC_TOOL_NAME, DOC_TOOL_DESCRIPTION, SchemaNode::object(object))
}

/// Renames top-level key `k` at 1-based position `i` to `{i}_{k}` unless it
/// already carries that prefix. `required` is renamed to match.
pub fn apply_index_prefix(spec: &ToolSpec) -> Result<ToolSpec, SchemaError> {
    let object = spec.object();
    let count = object.properties().len();
    if count > MAX_INDEXED_PROPERTIES {
        return Err(SchemaError::TooManyProperties(count));
    }
    let renamed: Vec<(String, String)> = object
        .properties()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let prefix = format!("{}_", i + 1);
            let key = if p.key.starts_with(&prefix) {
                p.key.clone()
            } else {
                format!("{prefix}{}", p.key)
            };
            (p.key.clone(), key)
        })
        .collect();
    let rename = |old: &str| {
        renamed
            .iter()
            .find(|(from, _)| from == old)
            .map(|(_, to)| to.clone())
            .expect("required keys are declared properties")
    };
    let properties = object
        .properties()
        .iter()
        .map(|p| Property {
            key: rename(&p.key),
            schema: p.schema.clone(),
        })
        .collect();
    let required = object.required().iter().map(|r| rename(r)).collect();
    let mut parameters = SchemaNode::object(ObjectSchema::new(properties, required)?);
    parameters.description = spec.parameters().description.clone();
    ToolSpec::new(spec.name(), spec.description(), parameters)
}

/// Removes a leading `[1-9]_`, if any.
pub fn strip_index_prefix(key: &str) -> &str {
    let bytes = key.as_bytes();
    if bytes.len() >= 2 && (b'1'..=b'9').contains(&bytes[0]) && bytes[1] == b'_' {
        &key[2..]
    } else {
        key
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::SchemaKind;
    use proptest::prelude::*;

    fn keys(spec: &ToolSpec) -> Vec<String> {
        spec.object().properties().iter().map(|p| p.key.clone()).collect()
    }

    #[test]
    fn chart_schema_shape() {
        let spec = build_chart_schema("infographic_explair_tool", "Infographic Explainer Tool").unwrap();
        assert_eq!(keys(&spec), ["1_reasoning", "2_answer"]);
        assert_eq!(spec.object().required(), ["1_reasoning", "2_answer"]);
        for p in spec.object().properties() {
            assert_eq!(p.schema.kind, SchemaKind::String { max_length: None });
        }
        assert_eq!(
            spec.object().get("2_answer").unwrap().description.as_deref(),
            Some("Concise answer to the user question.")
        );
        assert!(build_chart_schema("t", "").is_ok());
        assert!(build_chart_schema("", "x").is_err());
    }

    #[test]
    fn doc_schema_shape() {
        let page = build_doc_schema("page", 5).unwrap();
        assert_eq!(page.name(), "doc_extraction_tool");
        assert_eq!(keys(&page), ["1_reasoning", "2_page"]);
        assert_eq!(page.object().get("2_page").unwrap().kind, SchemaKind::Integer);

        let amount = build_doc_schema("total_amount", 20).unwrap();
        let answer = amount.object().get("2_total_amount").unwrap();
        assert_eq!(answer.kind, SchemaKind::String { max_length: Some(20) });
        assert_eq!(
            answer.description.as_deref(),
            Some("The answer, exactly as it appears in the document.")
        );
        assert_eq!(amount.object().required(), ["1_reasoning", "2_total_amount"]);

        assert_eq!(
            build_doc_schema("billing name", 10),
            Err(SchemaError::InvalidKey("billing name".into()))
        );
        assert!(build_doc_schema("", 10).is_err());
    }

    fn plain_spec(names: &[&str]) -> ToolSpec {
        let props = names
            .iter()
            .map(|k| Property {
                key: k.to_string(),
                schema: SchemaNode::string(None),
            })
            .collect();
        let req = names.iter().map(|k| k.to_string()).collect();
        ToolSpec::new("t", "", SchemaNode::object(ObjectSchema::new(props, req).unwrap())).unwrap()
    }

    #[test]
    fn index_prefix_examples() {
        let out = apply_index_prefix(&plain_spec(&["reasoning", "answer"])).unwrap();
        assert_eq!(keys(&out), ["1_reasoning", "2_answer"]);
        assert_eq!(out.object().required(), ["1_reasoning", "2_answer"]);

        let already = plain_spec(&["1_reasoning", "2_answer"]);
        assert_eq!(apply_index_prefix(&already).unwrap(), already);

        let ten: Vec<String> = (0..10).map(|i| format!("k{i}")).collect();
        let refs: Vec<&str> = ten.iter().map(String::as_str).collect();
        assert_eq!(
            apply_index_prefix(&plain_spec(&refs)),
            Err(SchemaError::TooManyProperties(10))
        );
    }

    #[test]
    fn strip_examples() {
        assert_eq!(strip_index_prefix("2_answer"), "answer");
        assert_eq!(strip_index_prefix("reasoning"), "reasoning");
        assert_eq!(strip_index_prefix("2_total_amount"), "total_amount");
        assert_eq!(strip_index_prefix("0_x"), "0_x");
        assert_eq!(strip_index_prefix("1"), "1");
    }

    proptest! {
        #[test]
        fn prefix_idempotent_and_sorted(names in proptest::collection::btree_set("[a-z0-9_]{1,6}", 0..=9)) {
            let names: Vec<&str> = names.iter().map(String::as_str).collect();
            let once = apply_index_prefix(&plain_spec(&names)).unwrap();
            let twice = apply_index_prefix(&once).unwrap();
            prop_assert_eq!(&once, &twice);
            let declared = keys(&once);
            let mut sorted = declared.clone();
            sorted.sort();
            prop_assert_eq!(sorted, declared);
        }
    }
}
