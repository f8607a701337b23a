//! Persona file round trips and vocabulary properties.

use proptest::prelude::*;
use reflective_core::user_model::{
    derive_vocabulary, fixture_personas, load_personas, parse_personas, personas_to_toml, tokenize,
    Activity, ActivityDomain, Persona, UserModelError,
};

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,8}( [a-z]{1,8}){0,2}"
}

fn activity(id: usize) -> impl Strategy<Value = Activity> {
    (
        word(),
        prop::sample::select(ActivityDomain::ALL.to_vec()),
        prop::collection::vec(word(), 0..3),
        prop::collection::vec(word(), 0..2),
        1u8..=5,
        1u8..=5,
        word(),
    )
        .prop_map(move |(name, domain, motivations, done_with, importance, fun, frequency)| Activity {
            id: format!("x{id}"),
            name,
            activity_domain: domain,
            motivations,
            done_with,
            importance,
            fun,
            frequency,
        })
}

fn persona() -> impl Strategy<Value = Persona> {
    (1usize..6)
        .prop_flat_map(|n| (0..n).map(activity).collect::<Vec<_>>())
        .prop_map(|activities| Persona::new("p", "P", activities, Some("desc".into())).unwrap())
}

proptest! {
    #[test]
    fn toml_round_trip(personas in prop::collection::vec(persona(), 1..3)) {
        let personas: Vec<Persona> = personas
            .into_iter()
            .enumerate()
            .map(|(i, mut p)| { p.id = format!("p{i}"); p })
            .collect();
        let text = personas_to_toml(&personas);
        prop_assert_eq!(parse_personas(&text).unwrap(), personas);
    }

    #[test]
    fn adding_an_activity_never_shrinks_vocabulary(p in persona(), extra in activity(99)) {
        let before = derive_vocabulary(&p);
        let mut grown = p.clone();
        grown.activities.push(extra);
        let after = derive_vocabulary(&grown);
        prop_assert!(before.lexical.is_subset(&after.lexical));
        prop_assert!(before.numeric.is_subset(&after.numeric));
    }

    #[test]
    fn vocabulary_is_deterministic(p in persona()) {
        prop_assert_eq!(derive_vocabulary(&p), derive_vocabulary(&p));
    }

    #[test]
    fn lexical_tokens_are_lowercase_and_long_enough(text in "\\PC{0,60}") {
        for t in tokenize(&text).lexical {
            prop_assert!(t.chars().count() >= 2);
            prop_assert_eq!(t.to_lowercase(), t.clone());
        }
    }
}

#[test]
fn fixture_set_shape() {
    let personas = fixture_personas();
    assert_eq!(personas.len(), 5);
    assert!(personas.iter().all(Persona::covers_all_domains));
    let counts: Vec<usize> = personas.iter().map(|p| p.activities.len()).collect();
    assert!(counts.iter().all(|n| (6..=9).contains(n)), "{counts:?}");
}

#[test]
fn walking_persona_vocabulary() {
    let v = derive_vocabulary(&fixture_personas()[0]);
    for w in ["walking", "independence", "neighbour", "gardening", "daily"] {
        assert!(v.lexical.contains(w), "{w}");
    }
    assert!(!v.lexical.contains("with"));
    assert_eq!(v.numeric.iter().copied().collect::<Vec<_>>(), [2, 3, 4, 5]);
}

#[test]
fn load_from_disk_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("personas.toml");
    std::fs::write(&path, personas_to_toml(&fixture_personas())).unwrap();
    assert_eq!(load_personas(&path).unwrap(), fixture_personas());
    assert!(matches!(
        load_personas(dir.path().join("absent.toml")),
        Err(UserModelError::FileMissing(_))
    ));
}

#[test]
fn out_of_range_rating_in_file() {
    let text = personas_to_toml(&fixture_personas()[..1]).replacen("importance = 5", "importance = 7", 1);
    let err = parse_personas(&text).unwrap_err();
    assert!(err.to_string().contains('7'), "{err}");
}
