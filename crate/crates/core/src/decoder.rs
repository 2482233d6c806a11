//! The constrained generation loop.
//!
//! Each step asks a [`LogitsProvider`] for one score per vocabulary token,
//! sets every token the [`TokenIndex`] disallows to negative infinity,
//! selects a token, and advances the automaton. Generation ends when
//! end-of-sequence is selected in an accepting state, or when an accepting
//! state admits nothing but end-of-sequence.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::automaton::{AutomatonError, StateId, TokenIndex, TokenMask, Vocabulary};
use crate::Score;

/// Opaque prompt context. The constraint machinery never looks inside; a
/// multimodal provider may read images from `attachments`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Prompt {
    pub text: String,
    pub attachments: Vec<String>,
}

impl Prompt {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            attachments: Vec::new(),
        }
    }

    pub fn with_attachment(mut self, reference: impl Into<String>) -> Self {
        self.attachments.push(reference.into());
        self
    }

    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.hash(&mut h);
        h.finish()
    }
}

/// A generation backend that scores every vocabulary token (eos included)
/// given the prompt and the tokens generated so far.
pub trait LogitsProvider<F: Score>: Send + Sync {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F>;

    /// Whether `score` may be called from several threads at once.
    fn supports_concurrent_calls(&self) -> bool {
        true
    }
}

impl<F: Score, P: LogitsProvider<F> + ?Sized> LogitsProvider<F> for &P {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F> {
        (**self).score(prompt, generated)
    }

    fn supports_concurrent_calls(&self) -> bool {
        (**self).supports_concurrent_calls()
    }
}

impl<F: Score, P: LogitsProvider<F> + ?Sized> LogitsProvider<F> for Box<P> {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F> {
        (**self).score(prompt, generated)
    }

    fn supports_concurrent_calls(&self) -> bool {
        (**self).supports_concurrent_calls()
    }
}

/// Serializes calls into a provider that cannot take concurrent requests.
pub struct Serialized<P> {
    inner: P,
    lock: Mutex<()>,
}

impl<P> Serialized<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            lock: Mutex::new(()),
        }
    }
}

impl<F: Score, P: LogitsProvider<F>> LogitsProvider<F> for Serialized<P> {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F> {
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        self.inner.score(prompt, generated)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecodeMode {
    #[default]
    Greedy,
    Sample,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    pub mode: DecodeMode,
    pub seed: u64,
    /// Softmax temperature; only used when sampling.
    pub temperature: f64,
    /// Upper bound on provider calls, the final end-of-sequence included.
    pub max_tokens: usize,
}

impl DecodeConfig {
    pub fn greedy(seed: u64, max_tokens: usize) -> Self {
        Self {
            mode: DecodeMode::Greedy,
            seed,
            temperature: 1.0,
            max_tokens,
        }
    }

    pub fn sample(seed: u64, temperature: f64, max_tokens: usize) -> Self {
        Self {
            mode: DecodeMode::Sample,
            seed,
            temperature,
            max_tokens,
        }
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(DecodeError::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(DecodeError::InvalidConfig("max_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self::greedy(0, 512)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinishReason {
    /// End-of-sequence was selected in an accepting state.
    EosAccepted,
    /// The automaton reached an accepting state that admits only
    /// end-of-sequence, so generation stopped without another provider call.
    Forced,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeResult {
    pub text: String,
    /// Emitted tokens, end-of-sequence excluded.
    pub token_ids: Vec<u32>,
    pub finish: FinishReason,
    /// Provider calls made.
    pub steps: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecodeError {
    #[error("no token is allowed by the mask")]
    EmptyMask,
    #[error("provider returned {got} scores for a vocabulary of {expected}")]
    ScoreLength { expected: usize, got: usize },
    #[error("token budget of {max_tokens} exhausted before the output was complete")]
    MaxTokensExceeded {
        max_tokens: usize,
        /// Diagnostic only; this text is not a valid output.
        partial_text: String,
        partial_ids: Vec<u32>,
    },
    #[error("the vocabulary cannot continue the output from state {state} (after {partial_text:?})")]
    VocabularyCannotExpressSchema { state: StateId, partial_text: String },
    #[error("provider gave no finite score to any allowed token")]
    NoFiniteScore,
    #[error("invalid decode config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Automaton(#[from] AutomatonError),
}

/// Copies `scores`, replacing disallowed positions with negative infinity.
pub fn mask_logits<F: Score>(scores: &[F], mask: &TokenMask) -> Result<Vec<F>, DecodeError> {
    if scores.len() != mask.len() {
        return Err(DecodeError::ScoreLength {
            expected: mask.len(),
            got: scores.len(),
        });
    }
    if mask.is_empty() {
        return Err(DecodeError::EmptyMask);
    }
    let mut out = vec![F::neg_infinity(); scores.len()];
    for id in mask.iter() {
        out[id as usize] = scores[id as usize];
    }
    Ok(out)
}

/// Greedy picks the highest finite score, lowest id on ties. Sampling draws
/// from the softmax of `scores / temperature` over finite entries. Returns
/// `None` when no score is finite.
pub fn select_token<F: Score, R: Rng + ?Sized>(
    scores: &[F],
    config: &DecodeConfig,
    rng: &mut R,
) -> Option<u32> {
    let mut best: Option<(usize, F)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    let (best_id, max) = best?;
    if config.mode == DecodeMode::Greedy {
        return Some(best_id as u32);
    }
    let temperature = F::from_f64(config.temperature).expect("temperature is representable");
    let weights: Vec<F> = scores
        .iter()
        .map(|&s| if s.is_finite() { ((s - max) / temperature).exp() } else { F::zero() })
        .collect();
    let total = weights.iter().fold(F::zero(), |acc, &w| acc + w);
    let mut target = F::from_f64(rng.gen::<f64>()).expect("unit float") * total;
    let mut last_positive = best_id;
    for (i, &w) in weights.iter().enumerate() {
        if w > F::zero() {
            if target < w {
                return Some(i as u32);
            }
            target = target - w;
            last_positive = i;
        }
    }
    Some(last_positive as u32)
}

/// Per-request decoding state over a shared index.
#[derive(Debug, Clone)]
pub struct GenerationSession<'a> {
    index: &'a TokenIndex,
    state: StateId,
    token_ids: Vec<u32>,
    text: String,
    steps: usize,
}

impl<'a> GenerationSession<'a> {
    pub fn new(index: &'a TokenIndex) -> Self {
        Self {
            index,
            state: index.start(),
            token_ids: Vec::new(),
            text: String::new(),
            steps: 0,
        }
    }

    pub fn state(&self) -> StateId {
        self.state
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn token_ids(&self) -> &[u32] {
        &self.token_ids
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn allowed(&self) -> Result<&'a TokenMask, DecodeError> {
        Ok(self.index.allowed_mask(self.state)?)
    }

    /// Accepting, and end-of-sequence is the only allowed token.
    pub fn must_stop(&self) -> bool {
        self.index.eos_allowed(self.state)
            && self.allowed().is_ok_and(|m| m.count() == 1)
    }

    /// Records one provider step that selected `token`. Returns `true` when
    /// the token was end-of-sequence and generation is complete.
    pub fn advance(&mut self, token: u32) -> Result<bool, DecodeError> {
        if token == self.index.eos_id() {
            if !self.index.eos_allowed(self.state) {
                return Err(AutomatonError::TokenNotAllowed {
                    state: self.state,
                    token,
                }
                .into());
            }
            self.steps += 1;
            return Ok(true);
        }
        self.state = self.index.step(self.state, token)?;
        self.steps += 1;
        self.token_ids.push(token);
        self.text.push_str(self.index.vocab().text(token));
        Ok(false)
    }

    fn finish(self, finish: FinishReason) -> DecodeResult {
        DecodeResult {
            text: self.text,
            token_ids: self.token_ids,
            finish,
            steps: self.steps,
        }
    }

    fn exhausted(self, max_tokens: usize) -> DecodeError {
        DecodeError::MaxTokensExceeded {
            max_tokens,
            partial_text: self.text,
            partial_ids: self.token_ids,
        }
    }
}

/// Runs constrained generation to completion.
pub fn decode<F: Score, P: LogitsProvider<F> + ?Sized>(
    provider: &P,
    prompt: &Prompt,
    index: &TokenIndex,
    config: &DecodeConfig,
) -> Result<DecodeResult, DecodeError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut session = GenerationSession::new(index);
    loop {
        let mask = session.allowed()?;
        if mask.is_empty() {
            return Err(DecodeError::VocabularyCannotExpressSchema {
                state: session.state,
                partial_text: session.text,
            });
        }
        if session.must_stop() {
            return Ok(session.finish(FinishReason::Forced));
        }
        if session.steps >= config.max_tokens {
            return Err(session.exhausted(config.max_tokens));
        }
        let scores = provider.score(prompt, &session.token_ids);
        let masked = mask_logits(&scores, mask)?;
        let token = select_token(&masked, config, &mut rng).ok_or(DecodeError::NoFiniteScore)?;
        if session.advance(token)? {
            return Ok(session.finish(FinishReason::EosAccepted));
        }
    }
}

/// Generation with no mask at all; the baseline constrained decoding must
/// reproduce when every token is allowed. Stops at end-of-sequence or after
/// `max_tokens` steps, returning the emitted ids (eos excluded) and whether
/// eos was reached.
pub fn decode_unconstrained<F: Score, P: LogitsProvider<F> + ?Sized>(
    provider: &P,
    prompt: &Prompt,
    vocab: &Vocabulary,
    config: &DecodeConfig,
) -> Result<(Vec<u32>, bool), DecodeError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut ids = Vec::new();
    for _ in 0..config.max_tokens {
        let scores = provider.score(prompt, &ids);
        if scores.len() != vocab.len() {
            return Err(DecodeError::ScoreLength {
                expected: vocab.len(),
                got: scores.len(),
            });
        }
        let token = select_token(&scores, config, &mut rng).ok_or(DecodeError::NoFiniteScore)?;
        if token == vocab.eos_id() {
            return Ok((ids, true));
        }
        ids.push(token);
    }
    Ok((ids, false))
}

/// The longest string every accepted continuation from `state` starts with,
/// found by following states that have exactly one single-character
/// transition and do not accept.
pub fn forced_prefix(index: &TokenIndex, state: StateId) -> String {
    let dfa = index.dfa();
    let mut out = String::new();
    if !dfa.is_live(state) {
        return out;
    }
    let mut visited = vec![false; dfa.len()];
    let mut s = state;
    while !dfa.is_accepting(s) && !visited[s as usize] {
        visited[s as usize] = true;
        match dfa.transitions(s) {
            [t] if t.lo == t.hi => {
                out.push(char::from_u32(t.lo).expect("transition labels are scalars"));
                s = t.to;
            }
            _ => break,
        }
    }
    out
}
