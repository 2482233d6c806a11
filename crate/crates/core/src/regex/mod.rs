//! Structural regular expressions and the schema-to-regex compiler.
//!
//! The compiled language is the set of canonical serializations of the
//! schema: keys in declaration order, exactly one space after each `:` and
//! `,`, and no other whitespace.

mod parse;
mod render;

use thiserror::Error;

use crate::schema::{SchemaKind, SchemaNode};

pub use self::parse::parse_regex;
pub use self::render::render_regex;

pub const MAX_SCALAR: u32 = 0x10FFFF;
const SURROGATES: (u32, u32) = (0xD800, 0xDFFF);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegexError {
    #[error("regex syntax error at {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

/// A set of Unicode scalar ranges, optionally complemented.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CharClass {
    ranges: Vec<(char, char)>,
    negated: bool,
}

impl CharClass {
    /// Builds a class from inclusive ranges. Ranges with `lo > hi` are
    /// rejected; overlapping ranges are merged.
    pub fn new(ranges: impl IntoIterator<Item = (char, char)>, negated: bool) -> Option<Self> {
        let mut ranges: Vec<(char, char)> = ranges.into_iter().collect();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return None;
        }
        ranges.sort_unstable();
        let mut merged: Vec<(char, char)> = Vec::with_capacity(ranges.len());
        for (lo, hi) in ranges {
            match merged.last_mut() {
                Some((_, last_hi)) if (lo as u32) <= (*last_hi as u32).saturating_add(1) => {
                    if hi > *last_hi {
                        *last_hi = hi;
                    }
                }
                _ => merged.push((lo, hi)),
            }
        }
        Some(Self {
            ranges: merged,
            negated,
        })
    }

    pub fn single(c: char) -> Self {
        Self {
            ranges: vec![(c, c)],
            negated: false,
        }
    }

    pub fn range(lo: char, hi: char) -> Self {
        Self::new([(lo, hi)], false).expect("lo <= hi")
    }

    /// Every scalar value.
    pub fn any() -> Self {
        Self {
            ranges: Vec::new(),
            negated: true,
        }
    }

    pub fn ranges(&self) -> &[(char, char)] {
        &self.ranges
    }

    pub fn negated(&self) -> bool {
        self.negated
    }

    /// The matched set as sorted, disjoint, inclusive code point ranges.
    /// Surrogate code points are never included.
    pub fn to_intervals(&self) -> Vec<(u32, u32)> {
        let positive: Vec<(u32, u32)> = self
            .ranges
            .iter()
            .map(|&(lo, hi)| (lo as u32, hi as u32))
            .collect();
        if !self.negated {
            return positive;
        }
        let mut result: Vec<(u32, u32)> = Vec::new();
        let mut cursor = 0u32;
        let mut excluded = positive;
        excluded.push(SURROGATES);
        excluded.sort_unstable();
        for (lo, hi) in excluded {
            if lo > cursor {
                result.push((cursor, lo - 1));
            }
            cursor = cursor.max(hi + 1);
        }
        if cursor <= MAX_SCALAR {
            result.push((cursor, MAX_SCALAR));
        }
        result
    }

    pub fn contains(&self, c: char) -> bool {
        let inside = self.ranges.iter().any(|&(lo, hi)| lo <= c && c <= hi);
        inside != self.negated
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RegexAst {
    Literal(char),
    CharClass(CharClass),
    /// Sequence. The empty concatenation matches only the empty string.
    Concat(Vec<RegexAst>),
    /// Alternation. The empty alternation matches nothing.
    Alt(Vec<RegexAst>),
    Repeat {
        child: Box<RegexAst>,
        min: u32,
        max: Option<u32>,
    },
}

impl RegexAst {
    pub fn literal_str(s: &str) -> Self {
        let mut parts: Vec<RegexAst> = s.chars().map(RegexAst::Literal).collect();
        if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            RegexAst::Concat(parts)
        }
    }

    pub fn empty() -> Self {
        RegexAst::Concat(Vec::new())
    }

    pub fn nothing() -> Self {
        RegexAst::Alt(Vec::new())
    }

    /// # Panics
    /// If `max < min`.
    pub fn repeat(child: RegexAst, min: u32, max: Option<u32>) -> Self {
        assert!(max.is_none_or(|m| m >= min), "repeat max {max:?} below min {min}");
        RegexAst::Repeat {
            child: Box::new(child),
            min,
            max,
        }
    }

    pub fn optional(child: RegexAst) -> Self {
        Self::repeat(child, 0, Some(1))
    }

    pub fn star(child: RegexAst) -> Self {
        Self::repeat(child, 0, None)
    }

    pub fn class(class: CharClass) -> Self {
        RegexAst::CharClass(class)
    }
}

/// `-?(0|[1-9][0-9]*)`.
pub fn integer_pattern() -> RegexAst {
    RegexAst::Concat(vec![
        RegexAst::optional(RegexAst::Literal('-')),
        RegexAst::Alt(vec![
            RegexAst::Literal('0'),
            RegexAst::Concat(vec![
                RegexAst::class(CharClass::range('1', '9')),
                RegexAst::star(RegexAst::class(CharClass::range('0', '9'))),
            ]),
        ]),
    ])
}

/// One content unit of a JSON string: an unescaped character or one escape
/// sequence.
pub fn string_unit_pattern() -> RegexAst {
    let plain = CharClass::new([('"', '"'), ('\\', '\\'), ('\u{0}', '\u{1F}')], true)
        .expect("valid ranges");
    let simple = CharClass::new(
        ['"', '\\', '/', 'b', 'f', 'n', 'r', 't'].map(|c| (c, c)),
        false,
    )
    .expect("valid ranges");
    let hex = CharClass::new([('0', '9'), ('a', 'f'), ('A', 'F')], false).expect("valid ranges");
    RegexAst::Alt(vec![
        RegexAst::class(plain),
        RegexAst::Concat(vec![
            RegexAst::Literal('\\'),
            RegexAst::Alt(vec![
                RegexAst::class(simple),
                RegexAst::Concat(vec![
                    RegexAst::Literal('u'),
                    RegexAst::repeat(RegexAst::class(hex), 4, Some(4)),
                ]),
            ]),
        ]),
    ])
}

/// A quoted JSON string of at most `max_length` content units.
pub fn string_pattern(max_length: Option<usize>) -> RegexAst {
    let max = max_length.map(|m| u32::try_from(m).expect("maxLength fits in u32"));
    RegexAst::Concat(vec![
        RegexAst::Literal('"'),
        RegexAst::repeat(string_unit_pattern(), 0, max),
        RegexAst::Literal('"'),
    ])
}

/// `{"k1": v1, "k2": v2}` with keys in the given order. Properties not in
/// `required` may be left out together with their separator.
pub fn object_pattern(properties: &[(String, RegexAst)], required: &[String]) -> RegexAst {
    let members: Vec<(RegexAst, bool)> = properties
        .iter()
        .map(|(key, value)| {
            let quoted = serde_json::to_string(key).expect("string serialization");
            let member = RegexAst::Concat(vec![
                RegexAst::literal_str(&quoted),
                RegexAst::literal_str(": "),
                value.clone(),
            ]);
            (member, required.contains(key))
        })
        .collect();

    // `rest[i]`: members i.. each preceded by ", " (optional ones may be absent).
    // `first[i]`: members i.. where the first present one has no separator.
    let n = members.len();
    let mut rest = RegexAst::empty();
    let mut first = RegexAst::empty();
    for i in (0..n).rev() {
        let (member, is_required) = &members[i];
        let head_first = concat2(member.clone(), rest.clone());
        let with_sep = concat2(
            RegexAst::Concat(vec![RegexAst::literal_str(", "), member.clone()]),
            rest.clone(),
        );
        if *is_required {
            first = head_first;
            rest = with_sep;
        } else {
            first = RegexAst::Alt(vec![head_first, first]);
            rest = RegexAst::Alt(vec![with_sep, rest]);
        }
    }
    RegexAst::Concat(vec![RegexAst::Literal('{'), first, RegexAst::Literal('}')])
}

fn concat2(a: RegexAst, b: RegexAst) -> RegexAst {
    match b {
        RegexAst::Concat(ref parts) if parts.is_empty() => a,
        b => RegexAst::Concat(vec![a, b]),
    }
}

/// Compiles a schema into the regex of its canonical serializations.
pub fn schema_to_regex(schema: &SchemaNode) -> RegexAst {
    match &schema.kind {
        SchemaKind::Integer => integer_pattern(),
        SchemaKind::String { max_length } => string_pattern(*max_length),
        SchemaKind::Object(object) => {
            let properties: Vec<(String, RegexAst)> = object
                .properties()
                .iter()
                .map(|p| (p.key.clone(), schema_to_regex(&p.schema)))
                .collect();
            object_pattern(&properties, object.required())
        }
    }
}
