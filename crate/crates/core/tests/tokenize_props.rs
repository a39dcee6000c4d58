use adrmine::tokenize::{encode, encode_with_max_len, train_vocab, Vocab, BOS, EOS, SPECIALS};
use proptest::prelude::*;
use std::sync::OnceLock;

fn vocab() -> &'static Vocab {
    static V: OnceLock<Vocab> = OnceLock::new();
    V.get_or_init(|| {
        let corpus = [
            "i feel so much pain today after taking cipro",
            "this drug makes me dizzy and tired tired tired",
            "paxil gave me a headache headache and nausea",
            "thank god for vyvanse #addicted",
        ];
        train_vocab(&corpus, 400).unwrap()
    })
}

fn check_partition(text: &str, max_len: usize) -> Result<(), TestCaseError> {
    let t = encode_with_max_len(text, vocab(), max_len);
    prop_assert_eq!(t.ids[0], BOS);
    prop_assert_eq!(*t.ids.last().unwrap(), EOS);
    prop_assert_eq!(t.spans.len(), t.ids.len() - 2);
    prop_assert!(t.ids.len() <= max_len.max(2));
    let reserved = SPECIALS.len() as u32;
    prop_assert!(t.ids[1..t.ids.len() - 1].iter().all(|&i| i >= reserved || i == 3));
    prop_assert!(t.spans.windows(2).all(|w| w[0].1 <= w[1].0));
    let chars: Vec<char> = text.chars().collect();
    let words: Vec<String> = t
        .spans
        .iter()
        .map(|&(b, e)| {
            chars[b..e].iter().collect::<String>()
        })
        .collect();
    for w in &words {
        prop_assert!(!w.is_empty() && !w.chars().any(char::is_whitespace));
    }
    if t.ids.len() < max_len {
        // Untruncated: spans cover exactly the non-whitespace characters.
        let covered: usize = t.spans.iter().map(|&(b, e)| e - b).sum();
        prop_assert_eq!(covered, chars.iter().filter(|c| !c.is_whitespace()).count());
        let joined: String = words.concat();
        let expected: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(joined, expected);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn spans_partition_non_whitespace(text in any::<String>()) {
        check_partition(&text, 100_000)?;
    }

    #[test]
    fn spans_partition_ascii_words(text in "[a-z #']{0,80}") {
        check_partition(&text, 100_000)?;
    }

    #[test]
    fn truncation_respects_max_len(text in "[a-z ]{0,80}", max_len in 0usize..20) {
        check_partition(&text, max_len)?;
    }

    #[test]
    fn encode_is_deterministic(text in "[a-z ]{0,80}") {
        prop_assert_eq!(encode(&text, vocab()), encode(&text, vocab()));
    }
}
