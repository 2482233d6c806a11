//! Minimal order- and duplicate-preserving JSON reader.
//!
//! Used by the schema loader and the instance validator. Unlike `serde_json`
//! it keeps duplicate object keys, keeps the raw text of strings and numbers,
//! and accepts lone `\uXXXX` surrogate escapes, which the generated grammar
//! also accepts.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum JsonValue {
    Null,
    Bool(bool),
    /// Raw number text as written.
    Number(String),
    String(JsonString),
    Array(Vec<JsonValue>),
    Object(Vec<(JsonString, JsonValue)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsonString {
    /// Text between the quotes, escapes left as written.
    pub raw: String,
    /// Decoded text. Unpaired surrogates decode to U+FFFD.
    pub decoded: String,
    /// Length in content units: every escape sequence counts as one.
    pub units: usize,
}

impl JsonValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            JsonValue::Null => "null",
            JsonValue::Bool(_) => "boolean",
            JsonValue::Number(_) => "number",
            JsonValue::String(_) => "string",
            JsonValue::Array(_) => "array",
            JsonValue::Object(_) => "object",
        }
    }

    /// Re-renders the value with one space after every `:` and `,` and no
    /// other whitespace, reusing raw string and number text.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        self.write_canonical(&mut out);
        out
    }

    fn write_canonical(&self, out: &mut String) {
        match self {
            JsonValue::Null => out.push_str("null"),
            JsonValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            JsonValue::Number(raw) => out.push_str(raw),
            JsonValue::String(s) => {
                out.push('"');
                out.push_str(&s.raw);
                out.push('"');
            }
            JsonValue::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_canonical(out);
                }
                out.push(']');
            }
            JsonValue::Object(members) => {
                out.push('{');
                for (i, (key, value)) in members.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push('"');
                    out.push_str(&key.raw);
                    out.push_str("\": ");
                    value.write_canonical(out);
                }
                out.push('}');
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JsonSyntaxError {
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for JsonSyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at byte {}", self.message, self.offset)
    }
}

impl std::error::Error for JsonSyntaxError {}

const MAX_DEPTH: usize = 128;

pub fn parse(text: &str) -> Result<JsonValue, JsonSyntaxError> {
    let mut reader = Reader { src: text, pos: 0 };
    reader.skip_ws();
    let value = reader.value(0)?;
    reader.skip_ws();
    if reader.pos != text.len() {
        return Err(reader.error("trailing characters"));
    }
    Ok(value)
}

/// Escapes `s` the way the canonical serializer writes object keys.
pub fn escape_canonical(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0C}' => out.push_str("\\f"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn error(&self, message: &str) -> JsonSyntaxError {
        JsonSyntaxError {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn expect(&mut self, want: char) -> Result<(), JsonSyntaxError> {
        match self.peek() {
            Some(c) if c == want => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(&format!("expected '{want}'"))),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(' ' | '\t' | '\n' | '\r') = self.peek() {
            self.pos += 1;
        }
    }

    fn value(&mut self, depth: usize) -> Result<JsonValue, JsonSyntaxError> {
        if depth > MAX_DEPTH {
            return Err(self.error("nesting too deep"));
        }
        match self.peek() {
            Some('{') => self.object(depth),
            Some('[') => self.array(depth),
            Some('"') => self.string().map(JsonValue::String),
            Some('-' | '0'..='9') => self.number(),
            Some('t') => self.keyword("true", JsonValue::Bool(true)),
            Some('f') => self.keyword("false", JsonValue::Bool(false)),
            Some('n') => self.keyword("null", JsonValue::Null),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn keyword(&mut self, word: &str, value: JsonValue) -> Result<JsonValue, JsonSyntaxError> {
        if self.src[self.pos..].starts_with(word) {
            self.pos += word.len();
            Ok(value)
        } else {
            Err(self.error("invalid literal"))
        }
    }

    fn object(&mut self, depth: usize) -> Result<JsonValue, JsonSyntaxError> {
        self.expect('{')?;
        let mut members = Vec::new();
        self.skip_ws();
        if self.peek() == Some('}') {
            self.pos += 1;
            return Ok(JsonValue::Object(members));
        }
        loop {
            self.skip_ws();
            if self.peek() != Some('"') {
                return Err(self.error("expected object key"));
            }
            let key = self.string()?;
            self.skip_ws();
            self.expect(':')?;
            self.skip_ws();
            let value = self.value(depth + 1)?;
            members.push((key, value));
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some('}') => return Ok(JsonValue::Object(members)),
                _ => return Err(self.error("expected ',' or '}'")),
            }
        }
    }

    fn array(&mut self, depth: usize) -> Result<JsonValue, JsonSyntaxError> {
        self.expect('[')?;
        let mut items = Vec::new();
        self.skip_ws();
        if self.peek() == Some(']') {
            self.pos += 1;
            return Ok(JsonValue::Array(items));
        }
        loop {
            self.skip_ws();
            items.push(self.value(depth + 1)?);
            self.skip_ws();
            match self.bump() {
                Some(',') => continue,
                Some(']') => return Ok(JsonValue::Array(items)),
                _ => return Err(self.error("expected ',' or ']'")),
            }
        }
    }

    fn hex4(&mut self) -> Result<u32, JsonSyntaxError> {
        let digits = self
            .src
            .get(self.pos..self.pos + 4)
            .filter(|d| d.chars().all(|c| c.is_ascii_hexdigit()))
            .ok_or_else(|| self.error("expected four hex digits"))?;
        self.pos += 4;
        Ok(u32::from_str_radix(digits, 16).expect("checked hex digits"))
    }

    fn string(&mut self) -> Result<JsonString, JsonSyntaxError> {
        self.expect('"')?;
        let start = self.pos;
        let mut decoded = String::new();
        let mut units = 0usize;
        let mut pending_high: Option<u32> = None;
        loop {
            let c = self.bump().ok_or_else(|| self.error("unterminated string"))?;
            let unit: Option<u32> = match c {
                '"' => {
                    if pending_high.take().is_some() {
                        decoded.push(char::REPLACEMENT_CHARACTER);
                    }
                    let raw = self.src[start..self.pos - 1].to_string();
                    return Ok(JsonString {
                        raw,
                        decoded,
                        units,
                    });
                }
                '\\' => {
                    let e = self.bump().ok_or_else(|| self.error("unterminated escape"))?;
                    let simple = match e {
                        '"' => Some('"'),
                        '\\' => Some('\\'),
                        '/' => Some('/'),
                        'b' => Some('\u{08}'),
                        'f' => Some('\u{0C}'),
                        'n' => Some('\n'),
                        'r' => Some('\r'),
                        't' => Some('\t'),
                        'u' => None,
                        _ => return Err(self.error("invalid escape")),
                    };
                    match simple {
                        Some(ch) => Some(ch as u32),
                        None => {
                            let code = self.hex4()?;
                            units += 1;
                            if (0xDC00..0xE000).contains(&code) {
                                if let Some(high) = pending_high.take() {
                                    let combined = 0x10000 + ((high - 0xD800) << 10) + (code - 0xDC00);
                                    decoded.push(char::from_u32(combined).expect("valid pair"));
                                } else {
                                    decoded.push(char::REPLACEMENT_CHARACTER);
                                }
                                continue;
                            }
                            if pending_high.take().is_some() {
                                decoded.push(char::REPLACEMENT_CHARACTER);
                            }
                            if (0xD800..0xDC00).contains(&code) {
                                pending_high = Some(code);
                                continue;
                            }
                            decoded.push(char::from_u32(code).expect("non-surrogate scalar"));
                            continue;
                        }
                    }
                }
                c if (c as u32) < 0x20 => return Err(self.error("raw control character in string")),
                c => Some(c as u32),
            };
            if pending_high.take().is_some() {
                decoded.push(char::REPLACEMENT_CHARACTER);
            }
            if let Some(code) = unit {
                decoded.push(char::from_u32(code).expect("scalar"));
                units += 1;
            }
        }
    }

    fn number(&mut self) -> Result<JsonValue, JsonSyntaxError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.pos += 1;
        }
        match self.peek() {
            Some('0') => self.pos += 1,
            Some('1'..='9') => self.digits(),
            _ => return Err(self.error("expected digit")),
        }
        if self.peek() == Some('.') {
            self.pos += 1;
            if !matches!(self.peek(), Some('0'..='9')) {
                return Err(self.error("expected fraction digit"));
            }
            self.digits();
        }
        if let Some('e' | 'E') = self.peek() {
            self.pos += 1;
            if let Some('+' | '-') = self.peek() {
                self.pos += 1;
            }
            if !matches!(self.peek(), Some('0'..='9')) {
                return Err(self.error("expected exponent digit"));
            }
            self.digits();
        }
        Ok(JsonValue::Number(self.src[start..self.pos].to_string()))
    }

    fn digits(&mut self) {
        while let Some('0'..='9') = self.peek() {
            self.pos += 1;
        }
    }
}
