//! Parser for the regex syntax produced by [`render_regex`](super::render_regex),
//! plus the common shorthands (`.`, `\d`, `\w`, `\s`, `(?:...)`).

use super::{CharClass, RegexAst, RegexError};

pub fn parse_regex(pattern: &str) -> Result<RegexAst, RegexError> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut parser = Parser { chars, pos: 0 };
    let ast = parser.alternation()?;
    if parser.pos < parser.chars.len() {
        return Err(parser.error("unbalanced ')'"));
    }
    Ok(ast)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn error(&self, message: &str) -> RegexError {
        RegexError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn next(&mut self) -> Result<char, RegexError> {
        let c = self.peek().ok_or_else(|| self.error("unexpected end of pattern"))?;
        self.pos += 1;
        Ok(c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn alternation(&mut self) -> Result<RegexAst, RegexError> {
        let mut branches = vec![self.concatenation()?];
        while self.eat('|') {
            branches.push(self.concatenation()?);
        }
        Ok(if branches.len() == 1 {
            branches.pop().unwrap()
        } else {
            RegexAst::Alt(branches)
        })
    }

    fn concatenation(&mut self) -> Result<RegexAst, RegexError> {
        let mut parts = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' {
                break;
            }
            let atom = self.atom()?;
            parts.push(self.quantified(atom)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            RegexAst::Concat(parts)
        })
    }

    fn quantified(&mut self, mut atom: RegexAst) -> Result<RegexAst, RegexError> {
        loop {
            let (min, max) = match self.peek() {
                Some('?') => (0, Some(1)),
                Some('*') => (0, None),
                Some('+') => (1, None),
                Some('{') => {
                    self.pos += 1;
                    let (min, max) = self.counted()?;
                    atom = RegexAst::repeat(atom, min, max);
                    continue;
                }
                _ => return Ok(atom),
            };
            self.pos += 1;
            if matches!(self.peek(), Some('?' | '+')) {
                return Err(self.error("lazy and possessive quantifiers are not supported"));
            }
            atom = RegexAst::repeat(atom, min, max);
        }
    }

    fn number(&mut self) -> Result<u32, RegexError> {
        let start = self.pos;
        while matches!(self.peek(), Some('0'..='9')) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected repetition count"));
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        text.parse().map_err(|_| self.error("repetition count too large"))
    }

    fn counted(&mut self) -> Result<(u32, Option<u32>), RegexError> {
        let min = self.number()?;
        let max = if self.eat(',') {
            if self.peek() == Some('}') {
                None
            } else {
                Some(self.number()?)
            }
        } else {
            Some(min)
        };
        if !self.eat('}') {
            return Err(self.error("expected '}'"));
        }
        if max.is_some_and(|m| m < min) {
            return Err(self.error("repetition max below min"));
        }
        Ok((min, max))
    }

    fn atom(&mut self) -> Result<RegexAst, RegexError> {
        let c = self.next()?;
        match c {
            '(' => {
                if self.eat('?') && !self.eat(':') {
                    return Err(self.error("only non-capturing groups `(?:` are supported"));
                }
                let inner = self.alternation()?;
                if !self.eat(')') {
                    return Err(self.error("expected ')'"));
                }
                Ok(inner)
            }
            '[' => self.class().map(RegexAst::CharClass),
            '.' => Ok(RegexAst::CharClass(
                CharClass::new([('\n', '\n')], true).expect("valid range"),
            )),
            '\\' => match self.escape()? {
                Escaped::Char(c) => Ok(RegexAst::Literal(c)),
                Escaped::Class(class) => Ok(RegexAst::CharClass(class)),
            },
            '*' | '+' | '?' | '{' => Err(self.error("quantifier without operand")),
            '^' | '$' => Err(self.error("anchors are not supported; patterns match whole strings")),
            c => Ok(RegexAst::Literal(c)),
        }
    }

    fn hex(&mut self, digits: usize) -> Result<char, RegexError> {
        let mut code = 0u32;
        for _ in 0..digits {
            let d = self.next()?;
            code = code * 16 + d.to_digit(16).ok_or_else(|| self.error("expected hex digit"))?;
        }
        char::from_u32(code).ok_or_else(|| self.error("escape is not a Unicode scalar value"))
    }

    fn braced_hex(&mut self) -> Result<char, RegexError> {
        let mut code = 0u32;
        let mut count = 0;
        loop {
            let d = self.next()?;
            if d == '}' {
                break;
            }
            code = code
                .checked_mul(16)
                .and_then(|v| v.checked_add(d.to_digit(16)?))
                .ok_or_else(|| self.error("invalid hex escape"))?;
            count += 1;
        }
        if count == 0 {
            return Err(self.error("empty hex escape"));
        }
        char::from_u32(code).ok_or_else(|| self.error("escape is not a Unicode scalar value"))
    }

    fn escape(&mut self) -> Result<Escaped, RegexError> {
        let c = self.next()?;
        let ch = match c {
            'n' => '\n',
            't' => '\t',
            'r' => '\r',
            'f' => '\u{0C}',
            'v' => '\u{0B}',
            '0' => '\0',
            'x' | 'u' if self.peek() == Some('{') => {
                self.pos += 1;
                self.braced_hex()?
            }
            'x' => self.hex(2)?,
            'u' => self.hex(4)?,
            'U' => self.hex(8)?,
            'd' => return Ok(Escaped::Class(CharClass::range('0', '9'))),
            'w' => {
                return Ok(Escaped::Class(
                    CharClass::new([('0', '9'), ('A', 'Z'), ('a', 'z'), ('_', '_')], false)
                        .expect("valid ranges"),
                ))
            }
            's' => {
                return Ok(Escaped::Class(
                    CharClass::new([('\t', '\r'), (' ', ' ')], false).expect("valid ranges"),
                ))
            }
            c if c.is_ascii_alphanumeric() => return Err(self.error("unknown escape")),
            c => c,
        };
        Ok(Escaped::Char(ch))
    }

    fn class_member(&mut self) -> Result<char, RegexError> {
        match self.next()? {
            '\\' => match self.escape()? {
                Escaped::Char(c) => Ok(c),
                Escaped::Class(_) => Err(self.error("class shorthands inside [...] are not supported")),
            },
            c => Ok(c),
        }
    }

    fn class(&mut self) -> Result<CharClass, RegexError> {
        let negated = self.eat('^');
        let mut ranges = Vec::new();
        let mut first = true;
        loop {
            match self.peek() {
                None => return Err(self.error("unterminated character class")),
                Some(']') if !first => {
                    self.pos += 1;
                    break;
                }
                _ => {}
            }
            first = false;
            let lo = self.class_member()?;
            let hi = if self.peek() == Some('-') && self.chars.get(self.pos + 1) != Some(&']') {
                self.pos += 1;
                self.class_member()?
            } else {
                lo
            };
            if hi < lo {
                return Err(self.error("character range is out of order"));
            }
            ranges.push((lo, hi));
        }
        Ok(CharClass::new(ranges, negated).expect("ranges checked"))
    }
}

enum Escaped {
    Char(char),
    Class(CharClass),
}
