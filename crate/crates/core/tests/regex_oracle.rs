mod support;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use structgen::automaton::{
    compile_nfa, determinize, determinize_with_budget, minimize, AutomatonError, Dfa,
};
use structgen::regex::{parse_regex, render_regex, RegexAst};

use support::{all_strings, naive_match, random_regex, ALPHABET};

fn regex_from_seed(seed: u64) -> RegexAst {
    random_regex(&mut ChaCha8Rng::seed_from_u64(seed), 4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dfa_agrees_with_naive_matcher(seed in any::<u64>()) {
        let ast = regex_from_seed(seed);
        let dfa = Dfa::from_regex(&ast).unwrap();
        for s in all_strings(&ALPHABET, 6) {
            prop_assert_eq!(dfa.accepts(&s), naive_match(&ast, &s), "{:?} on {:?}", ast, s);
        }
    }

    #[test]
    fn nfa_and_unminimized_dfa_agree(seed in any::<u64>()) {
        let ast = regex_from_seed(seed);
        let nfa = compile_nfa(&ast);
        let raw = determinize(&nfa).unwrap();
        let min = minimize(&raw);
        prop_assert!(min.equivalent(&raw));
        prop_assert!(min.len() <= raw.len());
        for s in all_strings(&ALPHABET, 5) {
            prop_assert_eq!(nfa.accepts_str(&s), raw.accepts(&s));
        }
    }

    #[test]
    fn minimization_is_idempotent(seed in any::<u64>()) {
        let dfa = Dfa::from_regex(&regex_from_seed(seed)).unwrap();
        let again = minimize(&dfa);
        prop_assert_eq!(again.len(), dfa.len());
        prop_assert!(again.equivalent(&dfa));
    }

    #[test]
    fn render_then_parse_preserves_language(seed in any::<u64>()) {
        let ast = regex_from_seed(seed);
        let rendered = render_regex(&ast);
        let reparsed = parse_regex(&rendered).unwrap();
        let a = Dfa::from_regex(&ast).unwrap();
        let b = Dfa::from_regex(&reparsed).unwrap();
        prop_assert!(a.equivalent(&b), "{} lost meaning", rendered);
    }

    #[test]
    fn parser_never_panics(text in "[a-d()|*+?{},0-9\\[\\]^\\\\.-]{0,12}") {
        let _ = parse_regex(&text);
    }
}

#[test]
fn minimal_dfas_of_equal_languages_match() {
    let a = parse_regex("(a|b)*abb").unwrap();
    let b = parse_regex("(a*b*)*ab(b)").unwrap();
    let (da, db) = (Dfa::from_regex(&a).unwrap(), Dfa::from_regex(&b).unwrap());
    assert!(da.equivalent(&db));
    assert_eq!(da.len(), db.len());
    assert_eq!(da.len(), 4);
}

#[test]
fn empty_language_has_no_live_states() {
    let dfa = Dfa::from_regex(&RegexAst::nothing()).unwrap();
    assert_eq!(dfa.live_count(), 0);
    assert!(!dfa.accepts(""));
}

#[test]
fn state_budget_is_enforced() {
    // (a|b)*a(a|b){n} needs 2^(n+1) subset states.
    let ast = parse_regex("(a|b)*a(a|b){12}").unwrap();
    let nfa = compile_nfa(&ast);
    assert_eq!(
        determinize_with_budget(&nfa, 1000).unwrap_err(),
        AutomatonError::StateBudgetExceeded(1000)
    );
    assert!(determinize_with_budget(&nfa, 100_000).is_ok());
}
