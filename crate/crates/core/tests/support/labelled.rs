//! Spans labelled as grounded or not against persona A, applying the
//! tokenization rule by hand: lowercase, split on non-alphanumerics,
//! drop stopwords and one-letter tokens, match words exactly and numbers
//! against the persona's ratings {2, 3, 4, 5}.

#[allow(dead_code)]
pub const HAND_LABELLED: [(&str, bool); 12] = [
    ("You went walking every day.", true),
    ("Coffee with your neighbour lifts the mood.", true),
    ("She dreams of climbing Everest.", false),
    ("You rate walking 5 out of 5.", true),
    ("Once she scored 9 out of 10 in a quiz.", false),
    ("Your garden looks lovely.", false),
    ("A short nap after lunch helps.", true),
    ("It rained on Tuesday.", false),
    ("Rated 4 for fun.", true),
    ("Surely a marathon is next.", false),
    ("The fresh air did you good.", true),
    ("Everyone admired the trophy 1 day.", false),
];
