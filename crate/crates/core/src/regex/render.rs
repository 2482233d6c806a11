use std::fmt::Write;

use super::{CharClass, RegexAst};

// Binding strength, loosest first.
const ALT: u8 = 0;
const CONCAT: u8 = 1;
const ATOM: u8 = 2;

/// Renders `ast` in conventional regex syntax. Non-printable characters use
/// `\xHH`, `\uHHHH` or `\UHHHHHHHH`, which both PCRE-style and Python engines
/// read the same way.
pub fn render_regex(ast: &RegexAst) -> String {
    let mut out = String::new();
    write_node(ast, ALT, &mut out);
    out
}

fn write_node(ast: &RegexAst, context: u8, out: &mut String) {
    match ast {
        RegexAst::Literal(c) => write_literal(*c, out),
        RegexAst::CharClass(class) => write_class(class, out),
        RegexAst::Alt(branches) => match branches.as_slice() {
            [] => out.push_str(r"[^\x00-\U0010FFFF]"),
            [only] => write_node(only, context, out),
            _ => {
                let wrap = context > ALT;
                if wrap {
                    out.push('(');
                }
                for (i, b) in branches.iter().enumerate() {
                    if i > 0 {
                        out.push('|');
                    }
                    write_node(b, CONCAT, out);
                }
                if wrap {
                    out.push(')');
                }
            }
        },
        RegexAst::Concat(parts) => match parts.as_slice() {
            [] => {
                if context == ATOM {
                    out.push_str("()");
                }
            }
            [only] => write_node(only, context, out),
            _ => {
                let wrap = context == ATOM;
                if wrap {
                    out.push('(');
                }
                for p in parts {
                    write_node(p, CONCAT, out);
                }
                if wrap {
                    out.push(')');
                }
            }
        },
        RegexAst::Repeat { child, min, max } => {
            let needs_group = matches!(**child, RegexAst::Repeat { .. });
            if needs_group {
                out.push('(');
                write_node(child, ALT, out);
                out.push(')');
            } else {
                write_node(child, ATOM, out);
            }
            match (min, max) {
                (0, Some(1)) => out.push('?'),
                (0, None) => out.push('*'),
                (1, None) => out.push('+'),
                (n, None) => write!(out, "{{{n},}}").unwrap(),
                (n, Some(m)) if n == m => write!(out, "{{{n}}}").unwrap(),
                (n, Some(m)) => write!(out, "{{{n},{m}}}").unwrap(),
            }
        }
    }
}

fn write_escaped_code(c: char, out: &mut String) {
    let code = c as u32;
    match c {
        '\n' => out.push_str(r"\n"),
        '\t' => out.push_str(r"\t"),
        '\r' => out.push_str(r"\r"),
        _ if code <= 0xFF => write!(out, "\\x{code:02X}").unwrap(),
        _ if code <= 0xFFFF => write!(out, "\\u{code:04X}").unwrap(),
        _ => write!(out, "\\U{code:08X}").unwrap(),
    }
}

fn needs_code_escape(c: char) -> bool {
    c.is_control() || matches!(c, '\u{2028}' | '\u{2029}' | '\u{FEFF}')
}

fn write_literal(c: char, out: &mut String) {
    if needs_code_escape(c) {
        write_escaped_code(c, out);
    } else if r"\.+*?()|[]{}^$".contains(c) {
        out.push('\\');
        out.push(c);
    } else {
        out.push(c);
    }
}

fn write_class_char(c: char, out: &mut String) {
    if needs_code_escape(c) {
        write_escaped_code(c, out);
    } else if r"\]-[^".contains(c) {
        out.push('\\');
        out.push(c);
    } else {
        out.push(c);
    }
}

fn write_class(class: &CharClass, out: &mut String) {
    if class.negated() && class.ranges().is_empty() {
        out.push_str(r"[\x00-\U0010FFFF]");
        return;
    }
    out.push('[');
    if class.negated() {
        out.push('^');
    }
    for &(lo, hi) in class.ranges() {
        write_class_char(lo, out);
        if hi != lo {
            if hi as u32 > lo as u32 + 1 {
                out.push('-');
            }
            write_class_char(hi, out);
        }
    }
    out.push(']');
}
