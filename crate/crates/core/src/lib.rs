//! Schema-constrained decoding.
//!
//! A tool schema (a small JSON-Schema subset) is compiled to a regular
//! expression, then to a minimal character DFA, then lifted to a
//! [`TokenIndex`](automaton::TokenIndex) over a decoding vocabulary. At each
//! generation step the decoder masks every token the index does not allow
//! to negative infinity before selecting, so the finished text always
//! parses against the schema, whatever the logits provider prefers.
//!
//! ```
//! use structgen::automaton::{Dfa, TokenIndex, Vocabulary};
//! use structgen::decoder::{decode, DecodeConfig, Prompt};
//! use structgen::backends::MockProvider;
//! use structgen::regex::schema_to_regex;
//! use structgen::schema::{build_chart_schema, validate_instance};
//!
//! let spec = build_chart_schema("chart_tool", "Chart QA").unwrap();
//! let dfa = Dfa::from_regex(&schema_to_regex(spec.parameters())).unwrap();
//! let vocab = Vocabulary::default_ascii();
//! let index = TokenIndex::build(dfa, &vocab);
//! let provider = MockProvider::<f32>::new(7, vocab.len());
//! let config = DecodeConfig::greedy(7, 4096);
//! if let Ok(out) = decode(&provider, &Prompt::text("What is shown?"), &index, &config) {
//!     assert!(validate_instance(spec.parameters(), &out.text).valid());
//! }
//! ```

pub mod automaton;
pub mod backends;
pub mod decoder;
pub mod harness;
pub mod regex;
pub mod schema;

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive};

/// Scalar type of logits. Implemented for `f32` and `f64`.
pub trait Score: Float + FromPrimitive + Debug + Send + Sync + 'static {}

impl<T> Score for T where T: Float + FromPrimitive + Debug + Send + Sync + 'static {}

/// Exact accuracy fraction.
pub type Accuracy = num_rational::Ratio<u64>;

pub type Logits = Vec<f32>;
pub type Logits64 = Vec<f64>;

pub type MockProvider32 = backends::MockProvider<f32>;
pub type MockProvider64 = backends::MockProvider<f64>;
pub type AdversarialProvider32 = backends::AdversarialProvider<f32>;
pub type AdversarialProvider64 = backends::AdversarialProvider<f64>;
pub type ConstantProvider32 = backends::ConstantProvider<f32>;
pub type ConstantProvider64 = backends::ConstantProvider<f64>;
pub type ScriptedProvider32 = backends::ScriptedProvider<f32>;
