//! Thompson construction over character ranges.

use crate::regex::RegexAst;

use super::StateId;

#[derive(Debug, Clone, Default)]
pub struct NfaState {
    pub epsilon: Vec<StateId>,
    /// `(lo, hi, target)` over inclusive code point ranges.
    pub ranges: Vec<(u32, u32, StateId)>,
}

#[derive(Debug, Clone)]
pub struct Nfa {
    states: Vec<NfaState>,
    start: StateId,
    accepts: Vec<StateId>,
}

impl Nfa {
    pub fn states(&self) -> &[NfaState] {
        &self.states
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn accepts(&self) -> &[StateId] {
        &self.accepts
    }

    pub fn is_accepting(&self, state: StateId) -> bool {
        self.accepts.contains(&state)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// All states reachable from `seeds` through epsilon edges, sorted.
    pub fn closure(&self, seeds: impl IntoIterator<Item = StateId>) -> Vec<StateId> {
        let mut seen = vec![false; self.states.len()];
        let mut stack: Vec<StateId> = Vec::new();
        for s in seeds {
            if !seen[s as usize] {
                seen[s as usize] = true;
                stack.push(s);
            }
        }
        let mut out = Vec::new();
        while let Some(s) = stack.pop() {
            out.push(s);
            for &t in &self.states[s as usize].epsilon {
                if !seen[t as usize] {
                    seen[t as usize] = true;
                    stack.push(t);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Direct simulation; used to cross-check determinization.
    pub fn accepts_str(&self, text: &str) -> bool {
        let mut current = self.closure([self.start]);
        for c in text.chars() {
            let code = c as u32;
            let moved: Vec<StateId> = current
                .iter()
                .flat_map(|&s| self.states[s as usize].ranges.iter())
                .filter(|&&(lo, hi, _)| lo <= code && code <= hi)
                .map(|&(_, _, t)| t)
                .collect();
            if moved.is_empty() {
                return false;
            }
            current = self.closure(moved);
        }
        current.iter().any(|&s| self.is_accepting(s))
    }
}

struct Builder {
    states: Vec<NfaState>,
}

impl Builder {
    fn add(&mut self) -> StateId {
        self.states.push(NfaState::default());
        (self.states.len() - 1) as StateId
    }

    fn eps(&mut self, from: StateId, to: StateId) {
        self.states[from as usize].epsilon.push(to);
    }

    /// Returns the fragment's entry and exit states.
    fn build(&mut self, ast: &RegexAst) -> (StateId, StateId) {
        match ast {
            RegexAst::Literal(c) => {
                let (s, e) = (self.add(), self.add());
                let code = *c as u32;
                self.states[s as usize].ranges.push((code, code, e));
                (s, e)
            }
            RegexAst::CharClass(class) => {
                let (s, e) = (self.add(), self.add());
                for (lo, hi) in class.to_intervals() {
                    self.states[s as usize].ranges.push((lo, hi, e));
                }
                (s, e)
            }
            RegexAst::Concat(parts) => {
                let s = self.add();
                let mut cur = s;
                for part in parts {
                    let (ps, pe) = self.build(part);
                    self.eps(cur, ps);
                    cur = pe;
                }
                (s, cur)
            }
            RegexAst::Alt(branches) => {
                let (s, e) = (self.add(), self.add());
                for branch in branches {
                    let (bs, be) = self.build(branch);
                    self.eps(s, bs);
                    self.eps(be, e);
                }
                (s, e)
            }
            RegexAst::Repeat { child, min, max } => {
                let s = self.add();
                let mut cur = s;
                for _ in 0..*min {
                    let (cs, ce) = self.build(child);
                    self.eps(cur, cs);
                    cur = ce;
                }
                match max {
                    None => {
                        let hub = self.add();
                        self.eps(cur, hub);
                        let (cs, ce) = self.build(child);
                        self.eps(hub, cs);
                        self.eps(ce, hub);
                        (s, hub)
                    }
                    Some(max) => {
                        let e = self.add();
                        for _ in *min..*max {
                            self.eps(cur, e);
                            let (cs, ce) = self.build(child);
                            self.eps(cur, cs);
                            cur = ce;
                        }
                        self.eps(cur, e);
                        (s, e)
                    }
                }
            }
        }
    }
}

pub fn compile_nfa(ast: &RegexAst) -> Nfa {
    let mut builder = Builder { states: Vec::new() };
    let (start, end) = builder.build(ast);
    Nfa {
        states: builder.states,
        start,
        accepts: vec![end],
    }
}
