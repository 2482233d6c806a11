//! Deterministic automata over character ranges with an implicit dead state.

use std::collections::{HashMap, VecDeque};

use crate::regex::RegexAst;

use super::nfa::{compile_nfa, Nfa};
use super::{AutomatonError, StateId};

pub const DEFAULT_STATE_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Transition {
    pub lo: u32,
    pub hi: u32,
    pub to: StateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DfaState {
    /// Sorted, non-overlapping.
    pub transitions: Vec<Transition>,
    pub accepting: bool,
}

/// A DFA whose missing transitions lead to an implicit dead state.
///
/// `live[s]` holds iff an accepting state is reachable from `s`. Lookups via
/// [`Dfa::next`] only ever return live states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    states: Vec<DfaState>,
    start: StateId,
    live: Vec<bool>,
}

impl Dfa {
    /// Wraps explicit states, computing liveness. Transitions into dead
    /// states are kept as given.
    ///
    /// # Panics
    /// If a transition or the start state is out of range, or transitions
    /// of one state overlap.
    pub fn from_parts(states: Vec<DfaState>, start: StateId) -> Self {
        let n = states.len();
        assert!((start as usize) < n, "start state out of range");
        for s in &states {
            for pair in s.transitions.windows(2) {
                assert!(pair[0].hi < pair[1].lo, "overlapping or unsorted transitions");
            }
            for t in &s.transitions {
                assert!(t.lo <= t.hi && (t.to as usize) < n, "bad transition {t:?}");
            }
        }
        let live = co_accessible(&states);
        Self { states, start, live }
    }

    /// Regex to minimal DFA in one call.
    pub fn from_regex(ast: &RegexAst) -> Result<Self, AutomatonError> {
        Ok(minimize(&determinize(&compile_nfa(ast))?))
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[DfaState] {
        &self.states
    }

    pub fn is_accepting(&self, state: StateId) -> bool {
        self.states[state as usize].accepting
    }

    pub fn is_live(&self, state: StateId) -> bool {
        self.live[state as usize]
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&l| l).count()
    }

    pub fn transitions(&self, state: StateId) -> &[Transition] {
        &self.states[state as usize].transitions
    }

    pub fn transition_count(&self) -> usize {
        self.states.iter().map(|s| s.transitions.len()).sum()
    }

    /// Successor on `c`, or `None` when the move leads to a dead state.
    #[inline]
    pub fn next(&self, state: StateId, c: char) -> Option<StateId> {
        let code = c as u32;
        let ts = &self.states[state as usize].transitions;
        let i = ts.partition_point(|t| t.hi < code);
        let t = ts.get(i)?;
        (t.lo <= code && self.live[t.to as usize]).then_some(t.to)
    }

    /// Walks `text` from `state`, staying inside live states.
    pub fn walk(&self, state: StateId, text: &str) -> Option<StateId> {
        if !self.is_live(state) {
            return None;
        }
        text.chars().try_fold(state, |s, c| self.next(s, c))
    }

    pub fn accepts(&self, text: &str) -> bool {
        self.walk(self.start, text).is_some_and(|s| self.is_accepting(s))
    }

    /// Language equality via a product walk over both automata.
    pub fn equivalent(&self, other: &Dfa) -> bool {
        let lookup = |dfa: &Dfa, s: Option<StateId>, code: u32| -> Option<StateId> {
            let ts = dfa.transitions(s?);
            let i = ts.partition_point(|t| t.hi < code);
            ts.get(i)
                .filter(|t| t.lo <= code && dfa.live[t.to as usize])
                .map(|t| t.to)
        };
        let a0 = self.is_live(self.start).then_some(self.start);
        let b0 = other.is_live(other.start).then_some(other.start);
        let mut seen = std::collections::HashSet::new();
        let mut queue = VecDeque::from([(a0, b0)]);
        seen.insert((a0, b0));
        while let Some((a, b)) = queue.pop_front() {
            let acc_a = a.is_some_and(|s| self.is_accepting(s));
            let acc_b = b.is_some_and(|s| other.is_accepting(s));
            if acc_a != acc_b {
                return false;
            }
            let mut points: Vec<u32> = Vec::new();
            for (dfa, s) in [(self, a), (other, b)] {
                if let Some(s) = s {
                    for t in dfa.transitions(s) {
                        points.push(t.lo);
                        points.push(t.hi + 1);
                    }
                }
            }
            points.sort_unstable();
            points.dedup();
            for &p in &points {
                let pair = (lookup(self, a, p), lookup(other, b, p));
                if pair != (None, None) && seen.insert(pair) {
                    queue.push_back(pair);
                }
            }
        }
        true
    }
}

fn co_accessible(states: &[DfaState]) -> Vec<bool> {
    let n = states.len();
    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for (s, state) in states.iter().enumerate() {
        for t in &state.transitions {
            reverse[t.to as usize].push(s as StateId);
        }
    }
    let mut live = vec![false; n];
    let mut stack: Vec<StateId> = Vec::new();
    for (s, state) in states.iter().enumerate() {
        if state.accepting {
            live[s] = true;
            stack.push(s as StateId);
        }
    }
    while let Some(s) = stack.pop() {
        for &p in &reverse[s as usize] {
            if !live[p as usize] {
                live[p as usize] = true;
                stack.push(p);
            }
        }
    }
    live
}

/// Keeps the start state plus live states reachable from it, drops edges into
/// dead states, and renumbers in breadth-first order from the start.
fn trim(states: Vec<DfaState>, start: StateId) -> Dfa {
    let live = co_accessible(&states);
    let mut order: Vec<StateId> = vec![start];
    let mut renumber: HashMap<StateId, StateId> = HashMap::from([(start, 0)]);
    let mut i = 0;
    while i < order.len() {
        let s = order[i];
        i += 1;
        if !live[s as usize] {
            continue;
        }
        for t in &states[s as usize].transitions {
            if live[t.to as usize] && !renumber.contains_key(&t.to) {
                renumber.insert(t.to, order.len() as StateId);
                order.push(t.to);
            }
        }
    }
    let new_states: Vec<DfaState> = order
        .iter()
        .map(|&s| {
            let old = &states[s as usize];
            let mut transitions: Vec<Transition> = Vec::new();
            if live[s as usize] {
                for t in &old.transitions {
                    if let Some(&to) = renumber.get(&t.to).filter(|_| live[t.to as usize]) {
                        push_merged(&mut transitions, t.lo, t.hi, to);
                    }
                }
            }
            DfaState {
                transitions,
                accepting: old.accepting,
            }
        })
        .collect();
    Dfa::from_parts(new_states, 0)
}

fn push_merged(transitions: &mut Vec<Transition>, lo: u32, hi: u32, to: StateId) {
    if let Some(last) = transitions.last_mut() {
        if last.to == to && last.hi + 1 == lo {
            last.hi = hi;
            return;
        }
    }
    transitions.push(Transition { lo, hi, to });
}

pub fn determinize(nfa: &Nfa) -> Result<Dfa, AutomatonError> {
    determinize_with_budget(nfa, DEFAULT_STATE_BUDGET)
}

/// Subset construction. Fails once more than `max_states` subsets appear.
pub fn determinize_with_budget(nfa: &Nfa, max_states: usize) -> Result<Dfa, AutomatonError> {
    let mut ids: HashMap<Vec<StateId>, StateId> = HashMap::new();
    let mut subsets: Vec<Vec<StateId>> = Vec::new();
    let mut states: Vec<DfaState> = Vec::new();

    let start_set = nfa.closure([nfa.start()]);
    ids.insert(start_set.clone(), 0);
    subsets.push(start_set);

    let mut edges: Vec<(u32, u32, StateId)> = Vec::new();
    let mut points: Vec<u32> = Vec::new();
    let mut i = 0;
    while i < subsets.len() {
        let subset = subsets[i].clone();
        i += 1;
        let accepting = subset.iter().any(|&s| nfa.is_accepting(s));

        edges.clear();
        points.clear();
        for &s in &subset {
            for &(lo, hi, to) in &nfa.states()[s as usize].ranges {
                edges.push((lo, hi, to));
                points.push(lo);
                points.push(hi + 1);
            }
        }
        points.sort_unstable();
        points.dedup();

        let mut transitions: Vec<Transition> = Vec::new();
        for w in points.windows(2) {
            let (lo, hi) = (w[0], w[1] - 1);
            let targets: Vec<StateId> = edges
                .iter()
                .filter(|&&(elo, ehi, _)| elo <= lo && hi <= ehi)
                .map(|&(_, _, to)| to)
                .collect();
            if targets.is_empty() {
                continue;
            }
            let set = nfa.closure(targets);
            let id = match ids.get(&set) {
                Some(&id) => id,
                None => {
                    if subsets.len() >= max_states {
                        return Err(AutomatonError::StateBudgetExceeded(max_states));
                    }
                    let id = subsets.len() as StateId;
                    ids.insert(set.clone(), id);
                    subsets.push(set);
                    id
                }
            };
            push_merged(&mut transitions, lo, hi, id);
        }
        states.push(DfaState {
            transitions,
            accepting,
        });
    }
    Ok(trim(states, 0))
}

/// Moore-style partition refinement over the shared alphabet partition.
pub fn minimize(dfa: &Dfa) -> Dfa {
    if !dfa.is_live(dfa.start) {
        return Dfa::from_parts(
            vec![DfaState {
                transitions: Vec::new(),
                accepting: false,
            }],
            0,
        );
    }
    let live_states: Vec<StateId> = (0..dfa.len() as StateId).filter(|&s| dfa.is_live(s)).collect();
    let mut dense: Vec<Option<usize>> = vec![None; dfa.len()];
    for (i, &s) in live_states.iter().enumerate() {
        dense[s as usize] = Some(i);
    }

    let mut points: Vec<u32> = dfa
        .states
        .iter()
        .flat_map(|s| s.transitions.iter().flat_map(|t| [t.lo, t.hi + 1]))
        .collect();
    points.sort_unstable();
    points.dedup();
    let segments: Vec<(u32, u32)> = points.windows(2).map(|w| (w[0], w[1] - 1)).collect();

    // table[i][k] = dense target of live state i on segment k.
    let table: Vec<Vec<Option<usize>>> = live_states
        .iter()
        .map(|&s| {
            let ts = dfa.transitions(s);
            let mut row = Vec::with_capacity(segments.len());
            let mut j = 0;
            for &(lo, _) in &segments {
                while j < ts.len() && ts[j].hi < lo {
                    j += 1;
                }
                let target = ts
                    .get(j)
                    .filter(|t| t.lo <= lo)
                    .and_then(|t| dense[t.to as usize]);
                row.push(target);
            }
            row
        })
        .collect();

    let mut block: Vec<usize> = live_states
        .iter()
        .map(|&s| usize::from(dfa.is_accepting(s)))
        .collect();
    let mut count = {
        let mut b = block.clone();
        b.sort_unstable();
        b.dedup();
        b.len()
    };
    loop {
        let mut signatures: HashMap<(usize, Vec<Option<usize>>), usize> = HashMap::new();
        let next: Vec<usize> = (0..live_states.len())
            .map(|i| {
                let sig = (
                    block[i],
                    table[i].iter().map(|t| t.map(|x| block[x])).collect::<Vec<_>>(),
                );
                let fresh = signatures.len();
                *signatures.entry(sig).or_insert(fresh)
            })
            .collect();
        let new_count = signatures.len();
        block = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }

    let mut reps: Vec<Option<usize>> = vec![None; count];
    for (i, &b) in block.iter().enumerate() {
        reps[b].get_or_insert(i);
    }
    let states: Vec<DfaState> = reps
        .iter()
        .map(|rep| {
            let i = rep.expect("every block has a member");
            let mut transitions = Vec::new();
            for (k, &(lo, hi)) in segments.iter().enumerate() {
                if let Some(t) = table[i][k] {
                    push_merged(&mut transitions, lo, hi, block[t] as StateId);
                }
            }
            DfaState {
                transitions,
                accepting: dfa.is_accepting(live_states[i]),
            }
        })
        .collect();
    let start = block[dense[dfa.start as usize].expect("start is live")] as StateId;
    trim(states, start)
}
