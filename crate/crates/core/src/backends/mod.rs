//! Concrete logits providers: seeded pseudo-random, adversarial, constant,
//! scripted, and a client for a remote grammar-accepting service.

mod remote;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::marker::PhantomData;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::automaton::{StateId, TokenIndex, Vocabulary};
use crate::decoder::{LogitsProvider, Prompt};
use crate::Score;

pub use self::remote::{
    remote_generate, Grammar, GrammarKind, RemoteBackendConfig, RemoteClient, RemoteError, Secret,
};

fn step_rng(seed: u64, prompt: &Prompt, generated: &[u32]) -> ChaCha8Rng {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    prompt.hash(&mut h);
    generated.hash(&mut h);
    ChaCha8Rng::seed_from_u64(h.finish())
}

fn cast<F: Score>(x: f64) -> F {
    F::from_f64(x).expect("finite f64 is representable")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MockProviderSpec {
    pub seed: u64,
    /// Added to the pseudo-random score of each listed token.
    pub bias: BTreeMap<u32, f64>,
}

impl MockProviderSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            bias: BTreeMap::new(),
        }
    }

    pub fn with_bias(mut self, token: u32, delta: f64) -> Self {
        self.bias.insert(token, delta);
        self
    }
}

/// Uniform `[0, 1)` scores from a generator seeded by the spec seed, the
/// prompt and the generated prefix, plus bias.
pub fn mock_scores<F: Score>(
    spec: &MockProviderSpec,
    vocab_size: usize,
    prompt: &Prompt,
    generated: &[u32],
) -> Vec<F> {
    let mut rng = step_rng(spec.seed, prompt, generated);
    let mut scores: Vec<F> = (0..vocab_size)
        .map(|_| cast(f64::from(rng.gen::<u32>()) / 4_294_967_296.0))
        .collect();
    for (&id, &delta) in &spec.bias {
        if let Some(s) = scores.get_mut(id as usize) {
            *s = *s + cast(delta);
        }
    }
    scores
}

#[derive(Debug, Clone)]
pub struct MockProvider<F> {
    spec: MockProviderSpec,
    vocab_size: usize,
    _score: PhantomData<fn() -> F>,
}

impl<F: Score> MockProvider<F> {
    pub fn new(seed: u64, vocab_size: usize) -> Self {
        Self::from_spec(MockProviderSpec::new(seed), vocab_size)
    }

    pub fn from_spec(spec: MockProviderSpec, vocab_size: usize) -> Self {
        Self {
            spec,
            vocab_size,
            _score: PhantomData,
        }
    }

    pub fn spec(&self) -> &MockProviderSpec {
        &self.spec
    }
}

impl<F: Score> LogitsProvider<F> for MockProvider<F> {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F> {
        mock_scores(&self.spec, self.vocab_size, prompt, generated)
    }
}

/// Allowed tokens score in `[0, 1)`, disallowed ones in `[2, 3)`, so every
/// disallowed token beats every allowed one.
pub fn adversarial_scores<F: Score>(
    index: &TokenIndex,
    state: StateId,
    seed: u64,
    prompt: &Prompt,
    generated: &[u32],
) -> Vec<F> {
    let mut rng = step_rng(seed, prompt, generated);
    let mask = index.allowed_mask(state).ok();
    (0..index.vocab_size() as u32)
        .map(|id| {
            let base = rng.gen::<f64>();
            let allowed = mask.is_some_and(|m| m.contains(id));
            cast(if allowed { base } else { base + 2.0 })
        })
        .collect()
}

/// Replays the generated prefix through the index to find the current state,
/// then scores adversarially.
#[derive(Debug, Clone)]
pub struct AdversarialProvider<F> {
    index: Arc<TokenIndex>,
    seed: u64,
    _score: PhantomData<fn() -> F>,
}

impl<F: Score> AdversarialProvider<F> {
    pub fn new(index: Arc<TokenIndex>, seed: u64) -> Self {
        Self {
            index,
            seed,
            _score: PhantomData,
        }
    }

    pub fn state_after(&self, generated: &[u32]) -> Option<StateId> {
        generated
            .iter()
            .try_fold(self.index.start(), |s, &t| self.index.next(s, t))
    }
}

impl<F: Score> LogitsProvider<F> for AdversarialProvider<F> {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F> {
        // An unreachable prefix has no allowed set; everything scores high.
        let state = self.state_after(generated).unwrap_or(StateId::MAX);
        adversarial_scores(&self.index, state, self.seed, prompt, generated)
    }
}

/// The same score vector at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantProvider<F> {
    scores: Vec<F>,
}

impl<F: Score> ConstantProvider<F> {
    pub fn uniform(vocab_size: usize, value: F) -> Self {
        Self {
            scores: vec![value; vocab_size],
        }
    }

    pub fn from_scores(scores: Vec<F>) -> Self {
        Self { scores }
    }
}

impl<F: Score> LogitsProvider<F> for ConstantProvider<F> {
    fn score(&self, _prompt: &Prompt, _generated: &[u32]) -> Vec<F> {
        self.scores.clone()
    }
}

const SCRIPT_BOOST: f64 = 1.0e6;

/// Steers generation toward a target text registered per prompt. At each
/// step the longest token that continues the target scores highest; once
/// the target is complete, end-of-sequence does. Off-script prompts and
/// prefixes fall back to mock scores.
#[derive(Debug, Clone)]
pub struct ScriptedProvider<F> {
    vocab: Arc<Vocabulary>,
    fallback: MockProvider<F>,
    scripts: HashMap<Prompt, String>,
}

impl<F: Score> ScriptedProvider<F> {
    pub fn new(vocab: Arc<Vocabulary>, seed: u64) -> Self {
        let fallback = MockProvider::new(seed, vocab.len());
        Self {
            vocab,
            fallback,
            scripts: HashMap::new(),
        }
    }

    pub fn script(&mut self, prompt: Prompt, target: impl Into<String>) {
        self.scripts.insert(prompt, target.into());
    }

    pub fn with_script(mut self, prompt: Prompt, target: impl Into<String>) -> Self {
        self.script(prompt, target);
        self
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }
}

impl<F: Score> LogitsProvider<F> for ScriptedProvider<F> {
    fn score(&self, prompt: &Prompt, generated: &[u32]) -> Vec<F> {
        let mut scores = self.fallback.score(prompt, generated);
        let Some(target) = self.scripts.get(prompt) else {
            return scores;
        };
        let so_far = self.vocab.decode(generated);
        let Some(rest) = target.strip_prefix(so_far.as_str()) else {
            return scores;
        };
        if rest.is_empty() {
            let eos = self.vocab.eos_id() as usize;
            scores[eos] = scores[eos] + cast(SCRIPT_BOOST);
            return scores;
        }
        for token in self.vocab.tokens() {
            if !token.special && !token.text.is_empty() && rest.starts_with(&token.text) {
                let boost = SCRIPT_BOOST + token.text.chars().count() as f64;
                let s = &mut scores[token.id as usize];
                *s = *s + cast(boost);
            }
        }
        scores
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::Dfa;
    use crate::decoder::{decode, DecodeConfig};
    use crate::regex::RegexAst;

    #[test]
    fn mock_is_deterministic() {
        let p = MockProvider::<f32>::new(5, 50);
        let prompt = Prompt::text("q");
        assert_eq!(p.score(&prompt, &[1, 2]), p.score(&prompt, &[1, 2]));
        assert_ne!(p.score(&prompt, &[1, 2]), p.score(&prompt, &[2, 1]));
        assert_ne!(p.score(&prompt, &[]), p.score(&Prompt::text("r"), &[]));
    }

    #[test]
    fn bias_dominates_greedy() {
        let vocab = Vocabulary::from_texts(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let dfa = Dfa::from_regex(&RegexAst::repeat(
            RegexAst::class(crate::regex::CharClass::range('a', 'h')),
            3,
            Some(3),
        ))
        .unwrap();
        let index = TokenIndex::build(dfa, &vocab);
        let spec = MockProviderSpec::new(1).with_bias(7, 1e6);
        let provider = MockProvider::<f64>::from_spec(spec, vocab.len());
        let out = decode(&provider, &Prompt::text("x"), &index, &DecodeConfig::greedy(0, 8)).unwrap();
        assert_eq!(out.text, "hhh");
    }

    #[test]
    fn adversarial_dominance() {
        let vocab = Vocabulary::from_texts(&["a", "b", "ab"]);
        let index = Arc::new(TokenIndex::build(
            Dfa::from_regex(&RegexAst::literal_str("ab")).unwrap(),
            &vocab,
        ));
        let provider = AdversarialProvider::<f32>::new(index.clone(), 3);
        let scores = provider.score(&Prompt::text("p"), &[]);
        let mask = index.allowed_mask(index.start()).unwrap();
        let max_allowed = mask.iter().map(|i| scores[i as usize]).fold(f32::MIN, f32::max);
        for id in 0..vocab.len() as u32 {
            if !mask.contains(id) {
                assert!(scores[id as usize] > max_allowed);
            }
        }
        let out = decode(&provider, &Prompt::text("p"), &index, &DecodeConfig::greedy(0, 8)).unwrap();
        assert_eq!(out.text, "ab");
    }

    #[test]
    fn scripted_follows_target() {
        let vocab = Arc::new(Vocabulary::from_texts(&["a", "b", "ab", "ba", "c"]));
        let ast = RegexAst::star(RegexAst::class(crate::regex::CharClass::range('a', 'c')));
        let index = TokenIndex::build_shared(Dfa::from_regex(&ast).unwrap(), vocab.clone());
        let prompt = Prompt::text("p");
        let provider = ScriptedProvider::<f32>::new(vocab, 0).with_script(prompt.clone(), "abac");
        let out = decode(&provider, &prompt, &index, &DecodeConfig::greedy(0, 16)).unwrap();
        assert_eq!(out.text, "abac");
        assert_eq!(out.token_ids, [2, 0, 4]);
    }
}
