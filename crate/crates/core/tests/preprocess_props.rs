use adrmine::corpus::RawTweet;
use adrmine::preprocess::{normalize, project_span_to_normalized, project_span_to_original, ResourceTables};
use proptest::prelude::*;
use std::sync::OnceLock;

fn tables() -> &'static ResourceTables {
    static T: OnceLock<ResourceTables> = OnceLock::new();
    T.get_or_init(ResourceTables::builtin)
}

/// Fragments that exercise each rule, mixed with arbitrary characters.
fn tweetish() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        any::<char>().prop_map(|c| c.to_string()),
        "[a-zA-Z]{1,6}",
        Just("http://t.co/x".to_string()),
        Just("www.a.b".to_string()),
        Just("@user_1".to_string()),
        Just("RT".to_string()),
        Just("r't".to_string()),
        Just("can't".to_string()),
        Just("don\u{2019}t".to_string()),
        Just("ouch".to_string()),
        Just("owwww".to_string()),
        Just("lol".to_string()),
        Just(":)".to_string()),
        Just(":-D".to_string()),
        Just("<3".to_string()),
        Just("\u{1F600}".to_string()),
        Just("\u{2764}\u{FE0F}".to_string()),
        Just("\u{FE0F}".to_string()),
        Just("#".to_string()),
        Just("'".to_string()),
        Just(" ".to_string()),
        Just("\t".to_string()),
        "[!-/:-@\\[-`{-~]{1,3}",
        "e{3,6}",
    ];
    prop::collection::vec(piece, 0..20).prop_map(|v| v.concat())
}

fn check(text: &str) -> Result<(), TestCaseError> {
    let n = normalize(&RawTweet::new("x", text), tables());
    let again = normalize(&RawTweet::new("x", n.text.clone()), tables());
    prop_assert_eq!(&again.text, &n.text, "not idempotent for {:?}", text);
    prop_assert_eq!(n.offset_map.len(), n.text.chars().count());
    let idx: Vec<usize> = n.offset_map.iter().map(|o| o.index()).collect();
    prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]), "offset map not monotone for {:?}", text);
    prop_assert!(n.offset_map.iter().all(|o| o.source_range().end <= n.original_len));
    prop_assert!(!n.text.chars().any(|c| c.is_ascii_uppercase()));
    prop_assert!(!n.text.contains("http://") && !n.text.contains("https://") && !n.text.contains("www."));
    let chars: Vec<char> = n.text.chars().collect();
    prop_assert!(chars.windows(3).all(|w| !(w[0] == w[1] && w[1] == w[2])));
    prop_assert!(!n.text.starts_with(' ') && !n.text.ends_with(' ') && !n.text.contains("  "));
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn normalize_invariants_random_unicode(text in any::<String>()) {
        check(&text)?;
    }

    #[test]
    fn normalize_invariants_tweet_like(text in tweetish()) {
        check(&text)?;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn projection_round_trip(text in tweetish(), a in 0usize..200, w in 1usize..12) {
        let n = normalize(&RawTweet::new("x", text.clone()), tables());
        let len = n.original_len;
        prop_assume!(len > 0);
        let begin = a % len;
        let end = (begin + w).min(len);
        if let Some((nb, ne)) = project_span_to_normalized(begin, end, &n).unwrap() {
            let back = project_span_to_original(nb, ne, &n).unwrap();
            // Every surviving character of the mention is covered.
            for (c, o) in n.text.chars().zip(&n.offset_map) {
                if let adrmine::preprocess::Origin::Original(i) = *o {
                    if c != ' ' && (begin..end).contains(&i) {
                        prop_assert!(back.begin <= i && i < back.end);
                    }
                }
            }
            // Copied characters never widen the span.
            let all_copied = n.offset_map[nb..ne].iter().all(|o| !o.is_synthetic());
            if all_copied {
                prop_assert!(begin <= back.begin && back.end <= end);
            }
        }
    }
}
