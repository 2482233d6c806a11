//! Character automata and their lift to a token vocabulary.

mod dfa;
mod index;
mod mask;
mod nfa;
mod vocab;

use thiserror::Error;

pub use self::dfa::{
    determinize, determinize_with_budget, minimize, Dfa, DfaState, Transition,
    DEFAULT_STATE_BUDGET,
};
pub use self::index::{build_token_index, TokenIndex};
pub use self::mask::TokenMask;
pub use self::nfa::{compile_nfa, Nfa, NfaState};
pub use self::vocab::{Token, VocabError, Vocabulary};

pub type StateId = u32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("subset construction exceeded {0} states")]
    StateBudgetExceeded(usize),
    #[error("state {0} is dead")]
    DeadState(StateId),
    #[error("token {token} is not allowed in state {state}")]
    TokenNotAllowed { state: StateId, token: u32 },
}

pub fn dfa_accepts(dfa: &Dfa, text: &str) -> bool {
    dfa.accepts(text)
}
