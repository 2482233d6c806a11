//! Independent oracles and random generators shared by the integration tests.
#![allow(dead_code)]

pub mod rig;
pub mod stub;

use rand::seq::SliceRandom;
use rand::Rng;

use structgen::automaton::{Dfa, StateId, Token, Vocabulary};
use structgen::regex::{CharClass, RegexAst};
use structgen::schema::{ObjectSchema, Property, SchemaKind, SchemaNode, ToolSpec};

// ---------------------------------------------------------------------------
// Regex matcher
// ---------------------------------------------------------------------------

/// Set of end positions reachable by matching `ast` from each position in
/// `from`, as a bitmask over `0..=chars.len()`.
fn ends(ast: &RegexAst, chars: &[char], from: u128) -> u128 {
    match ast {
        RegexAst::Literal(c) => step_char(chars, from, |x| x == *c),
        RegexAst::CharClass(class) => step_char(chars, from, |x| class.contains(x)),
        RegexAst::Concat(parts) => parts.iter().fold(from, |cur, p| ends(p, chars, cur)),
        RegexAst::Alt(parts) => parts.iter().fold(0, |acc, p| acc | ends(p, chars, from)),
        RegexAst::Repeat { child, min, max } => {
            let mut cur = from;
            for _ in 0..*min {
                cur = ends(child, chars, cur);
            }
            let mut acc = cur;
            let mut done = 0u32;
            loop {
                if max.is_some_and(|m| done >= m - min) {
                    break;
                }
                let next = ends(child, chars, cur);
                done += 1;
                if next & !acc == 0 && max.is_none() {
                    break;
                }
                if next == 0 {
                    break;
                }
                acc |= next;
                cur = next;
            }
            acc
        }
    }
}

fn step_char(chars: &[char], from: u128, pred: impl Fn(char) -> bool) -> u128 {
    let mut out = 0;
    for (i, &c) in chars.iter().enumerate() {
        if from & (1 << i) != 0 && pred(c) {
            out |= 1 << (i + 1);
        }
    }
    out
}

/// Whole-string match by direct interpretation of the AST. Strings up to
/// 127 characters.
pub fn naive_match(ast: &RegexAst, text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    assert!(chars.len() < 128, "naive matcher handles at most 127 characters");
    ends(ast, &chars, 1) & (1 << chars.len()) != 0
}

/// Every string over `alphabet` of length at most `max_len`, shortest first.
pub fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for s in &layer {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

pub const ALPHABET: [char; 4] = ['a', 'b', 'c', 'd'];

fn random_class<R: Rng>(rng: &mut R) -> CharClass {
    let mut ranges = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let lo = *ALPHABET.choose(rng).unwrap();
        let hi = (lo as u8 + rng.gen_range(0..2)) as char;
        ranges.push((lo, hi));
    }
    CharClass::new(ranges, rng.gen_bool(0.25)).expect("lo <= hi")
}

/// A random AST over `a`-`d`, including empty alternations and bounded and
/// unbounded repeats.
pub fn random_regex<R: Rng>(rng: &mut R, depth: u32) -> RegexAst {
    let leaf = depth == 0 || rng.gen_bool(0.3);
    if leaf {
        return match rng.gen_range(0..10) {
            0 => RegexAst::empty(),
            1 => RegexAst::nothing(),
            2..=4 => RegexAst::class(random_class(rng)),
            _ => RegexAst::Literal(*ALPHABET.choose(rng).unwrap()),
        };
    }
    match rng.gen_range(0..3) {
        0 => {
            let n = rng.gen_range(2..=3);
            RegexAst::Concat((0..n).map(|_| random_regex(rng, depth - 1)).collect())
        }
        1 => {
            let n = rng.gen_range(2..=3);
            RegexAst::Alt((0..n).map(|_| random_regex(rng, depth - 1)).collect())
        }
        _ => {
            let min = rng.gen_range(0..=2);
            let max = if rng.gen_bool(0.4) {
                None
            } else {
                Some(min + rng.gen_range(0..=2))
            };
            RegexAst::repeat(random_regex(rng, depth - 1), min, max)
        }
    }
}

// ---------------------------------------------------------------------------
// Automaton oracles
// ---------------------------------------------------------------------------

/// Liveness by fixpoint over the raw transition lists.
pub fn live_states(dfa: &Dfa) -> Vec<bool> {
    let n = dfa.len();
    let mut live: Vec<bool> = (0..n as StateId).map(|s| dfa.is_accepting(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !live[s] && dfa.transitions(s as StateId).iter().any(|t| live[t.to as usize]) {
                live[s] = true;
                changed = true;
            }
        }
        if !changed {
            return live;
        }
    }
}

/// One character step by linear scan, restricted to live targets.
pub fn char_step(dfa: &Dfa, live: &[bool], state: StateId, c: char) -> Option<StateId> {
    let code = c as u32;
    dfa.transitions(state)
        .iter()
        .find(|t| t.lo <= code && code <= t.hi)
        .map(|t| t.to)
        .filter(|&to| live[to as usize])
}

pub fn walk(dfa: &Dfa, live: &[bool], state: StateId, text: &str) -> Option<StateId> {
    text.chars().try_fold(state, |s, c| char_step(dfa, live, s, c))
}

/// The longest forced string from `state`: follow single-character
/// transitions out of non-accepting states.
pub fn unique_transition_walk(dfa: &Dfa, state: StateId) -> String {
    let live = live_states(dfa);
    let mut out = String::new();
    let mut s = state;
    let mut seen = vec![false; dfa.len()];
    loop {
        if dfa.is_accepting(s) || seen[s as usize] {
            return out;
        }
        seen[s as usize] = true;
        let live_out: Vec<_> = dfa
            .transitions(s)
            .iter()
            .filter(|t| live[t.to as usize])
            .collect();
        match live_out.as_slice() {
            [t] if t.lo == t.hi => {
                out.push(char::from_u32(t.lo).unwrap());
                s = t.to;
            }
            _ => return out,
        }
    }
}

/// Length in characters of the shortest accepted string, by BFS.
pub fn shortest_sentence_len(dfa: &Dfa) -> Option<usize> {
    let mut dist = vec![usize::MAX; dfa.len()];
    let mut queue = std::collections::VecDeque::new();
    dist[dfa.start() as usize] = 0;
    queue.push_back(dfa.start());
    while let Some(s) = queue.pop_front() {
        if dfa.is_accepting(s) {
            return Some(dist[s as usize]);
        }
        for t in dfa.transitions(s) {
            if dist[t.to as usize] == usize::MAX {
                dist[t.to as usize] = dist[s as usize] + 1;
                queue.push_back(t.to);
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Schemas and instances
// ---------------------------------------------------------------------------

const KEY_POOL: &[&str] = &["name", "total", "date", "q\"k", "a b", "caf\u{e9}", "x", "page", "id"];

fn random_node<R: Rng>(rng: &mut R, depth: u32) -> SchemaNode {
    let roll = rng.gen_range(0..10);
    let node = if depth > 0 && roll < 2 {
        SchemaNode::object(random_object(rng, depth - 1))
    } else if roll < 5 {
        SchemaNode::integer()
    } else {
        let cap = match rng.gen_range(0..4) {
            0 => None,
            1 => Some(0),
            _ => Some(rng.gen_range(1..6)),
        };
        SchemaNode::string(cap)
    };
    if rng.gen_bool(0.2) {
        node.with_description("A field.")
    } else {
        node
    }
}

pub fn random_object<R: Rng>(rng: &mut R, depth: u32) -> ObjectSchema {
    let n = rng.gen_range(1..=3);
    let mut keys: Vec<&str> = KEY_POOL.to_vec();
    keys.shuffle(rng);
    let properties: Vec<Property> = keys[..n]
        .iter()
        .map(|k| Property {
            key: k.to_string(),
            schema: random_node(rng, depth),
        })
        .collect();
    let required = properties
        .iter()
        .filter(|_| rng.gen_bool(0.6))
        .map(|p| p.key.clone())
        .collect();
    ObjectSchema::new(properties, required).expect("distinct keys")
}

pub fn random_schema<R: Rng>(rng: &mut R) -> ToolSpec {
    ToolSpec::new("tool", "Random tool", SchemaNode::object(random_object(rng, 2))).unwrap()
}

/// A string body (between quotes) of exactly `units` content units, mixing
/// plain characters and escapes.
pub fn random_string_body<R: Rng>(rng: &mut R, units: usize) -> String {
    let mut out = String::new();
    for _ in 0..units {
        match rng.gen_range(0..12) {
            0 => out.push_str("\\\""),
            1 => out.push_str("\\n"),
            2 => out.push_str("\\u0041"),
            3 => out.push_str("\\\\"),
            4 => out.push('\u{e9}'),
            _ => out.push(*b"abcxyz 019".choose(rng).unwrap() as char),
        }
    }
    out
}

fn json_key(key: &str) -> String {
    serde_json::to_string(key).unwrap()
}

/// A canonical instance that satisfies the schema.
pub fn random_instance<R: Rng>(rng: &mut R, node: &SchemaNode) -> String {
    match &node.kind {
        SchemaKind::Integer => {
            let v: i64 = rng.gen_range(-1000..1000);
            v.to_string()
        }
        SchemaKind::String { max_length } => {
            let cap = max_length.unwrap_or(8);
            let units = rng.gen_range(0..=cap);
            format!("\"{}\"", random_string_body(rng, units))
        }
        SchemaKind::Object(object) => {
            let mut members: Vec<String> = Vec::new();
            for p in object.properties() {
                if object.is_required(&p.key) || rng.gen_bool(0.5) {
                    members.push(format!("{}: {}", json_key(&p.key), random_instance(rng, &p.schema)));
                }
            }
            format!("{{{}}}", members.join(", "))
        }
    }
}

/// Small random edits of a candidate text.
pub fn mutate<R: Rng>(rng: &mut R, text: &str) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let pool = ['"', '\\', ' ', ',', ':', '{', '}', 'a', '0', '-', '\n', 'u'];
    match rng.gen_range(0..4) {
        0 if !chars.is_empty() => {
            let i = rng.gen_range(0..chars.len());
            chars.remove(i);
        }
        1 => {
            let i = rng.gen_range(0..=chars.len());
            chars.insert(i, *pool.choose(rng).unwrap());
        }
        2 if !chars.is_empty() => {
            let i = rng.gen_range(0..chars.len());
            chars[i] = *pool.choose(rng).unwrap();
        }
        _ if chars.len() >= 2 => {
            let i = rng.gen_range(0..chars.len() - 1);
            chars.swap(i, i + 1);
        }
        _ => chars.push('x'),
    }
    chars.into_iter().collect()
}

/// Longest string value in `text` measured in content units (an escape
/// sequence counts once), scanning the raw text directly.
pub fn max_string_units(text: &str) -> usize {
    let mut best = 0;
    let mut chars = text.chars().peekable();
    let mut in_string = false;
    let mut units = 0;
    let mut after_colon = false;
    let mut is_value = false;
    while let Some(c) = chars.next() {
        if in_string {
            match c {
                '"' => {
                    in_string = false;
                    if is_value {
                        best = best.max(units);
                    }
                }
                '\\' => {
                    units += 1;
                    if chars.next() == Some('u') {
                        for _ in 0..4 {
                            chars.next();
                        }
                    }
                }
                _ => units += 1,
            }
        } else {
            match c {
                '"' => {
                    in_string = true;
                    units = 0;
                    is_value = after_colon;
                }
                ':' => after_colon = true,
                ',' | '{' => after_colon = false,
                _ => {}
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Vocabularies
// ---------------------------------------------------------------------------

/// Up to `n` distinct random tokens drawn from `pieces`, joined one to three
/// at a time, plus a special eos. May omit characters a schema needs.
pub fn random_vocab<R: Rng>(rng: &mut R, pieces: &[&str], n: usize) -> Vocabulary {
    let mut texts: Vec<String> = Vec::new();
    while texts.len() < n {
        let k = rng.gen_range(1..=3);
        let t: String = (0..k).map(|_| *pieces.choose(rng).unwrap()).collect();
        if !texts.contains(&t) {
            texts.push(t);
        }
    }
    let mut tokens: Vec<Token> = texts
        .into_iter()
        .enumerate()
        .map(|(i, text)| Token {
            id: i as u32,
            text,
            special: false,
        })
        .collect();
    let eos = tokens.len() as u32;
    tokens.push(Token {
        id: eos,
        text: "<eos>".into(),
        special: true,
    });
    // Shuffle ids so that eos is not always last.
    let mut order: Vec<u32> = (0..tokens.len() as u32).collect();
    order.shuffle(rng);
    let eos_id = order[eos as usize];
    for (t, &id) in tokens.iter_mut().zip(&order) {
        t.id = id;
    }
    Vocabulary::new(tokens, eos_id).unwrap()
}

/// Every printable ASCII character, a few escapes and fragments, and two
/// non-ASCII letters: enough to express every schema from
/// [`random_schema`].
pub fn soundness_vocab() -> Vocabulary {
    let mut texts: Vec<String> = (0x20u8..0x7F).map(|b| (b as char).to_string()).collect();
    for frag in [
        "\u{e9}", "caf\u{e9}", "\\n", "\\\"", "\\u00", "\": ", ", \"", "\"}", "{\"", "\", \"", "00",
        "12", "the", " answer", "name", "total", "1_reasoning", "2_answer", "\": \"",
    ] {
        texts.push(frag.to_string());
    }
    Vocabulary::from_texts(&texts)
}

/// Recomputes every allowed set and destination by walking each token's
/// characters through the DFA, and compares with the index.
pub fn check_index_brute_force(
    index: &structgen::automaton::TokenIndex,
    vocab: &Vocabulary,
) -> Result<(), String> {
    let dfa = index.dfa();
    let live = live_states(dfa);
    for q in 0..dfa.len() as StateId {
        if !live[q as usize] {
            if index.allowed_mask(q).is_ok() {
                return Err(format!("dead state {q} has a row"));
            }
            continue;
        }
        let mask = index.allowed_mask(q).map_err(|e| e.to_string())?;
        for token in vocab.tokens() {
            let expected_next = if token.special || token.text.is_empty() {
                None
            } else {
                walk(dfa, &live, q, &token.text)
            };
            let expected_allowed = if token.id == vocab.eos_id() {
                dfa.is_accepting(q)
            } else {
                expected_next.is_some()
            };
            if mask.contains(token.id) != expected_allowed {
                return Err(format!(
                    "state {q} token {} {:?}: allowed {} expected {expected_allowed}",
                    token.id,
                    token.text,
                    mask.contains(token.id)
                ));
            }
            if token.id != vocab.eos_id() && index.next(q, token.id) != expected_next {
                return Err(format!(
                    "state {q} token {} {:?}: next {:?} expected {expected_next:?}",
                    token.id,
                    token.text,
                    index.next(q, token.id)
                ));
            }
        }
    }
    Ok(())
}
