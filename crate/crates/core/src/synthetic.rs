//! Seeded synthetic corpora in the task file formats, with planted
//! patterns a small model can learn exactly. They stand in for the shared
//! task data, which cannot be redistributed.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::encoder::EncoderConfig;
use crate::train::{Hyperparams, Task};
use crate::corpus::{BinaryLabel, ClassificationDataset, ExtractionDataset, Lexicon, MentionSpan, RawTweet};
use crate::error::Result;

/// Words that preprocessing leaves unchanged and that never occur inside a
/// planted mention.
pub const FILLER: [&str; 24] = [
    "took", "my", "meds", "today", "feeling", "the", "doctor", "said", "again", "after", "pill", "this",
    "morning", "cipro", "paxil", "vyvanse", "night", "work", "really", "so", "new", "dose", "started", "week",
];

/// The token whose presence makes a classification tweet positive.
pub const PLANTED_TOKEN: &str = "badpain";

/// Planted ADR phrases with their concept codes (see [`mention_lexicon`]).
pub const PLANTED_MENTIONS: [(&str, &str); 5] = [
    ("headache", "10019211"),
    ("nausea", "10028813"),
    ("dizzy spells", "10013573"),
    ("skin rash", "10037844"),
    ("insomnia", "10022437"),
];

pub fn mention_lexicon() -> Lexicon {
    Lexicon::new(vec![
        ("10019211".into(), "headache".into()),
        ("10028813".into(), "nausea".into()),
        ("10013573".into(), "dizziness".into()),
        ("10037844".into(), "rash".into()),
        ("10022437".into(), "insomnia".into()),
    ])
    .expect("distinct codes")
}

fn filler_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<&'static str> {
    (0..n).map(|_| *FILLER.choose(rng).expect("nonempty")).collect()
}

/// `n` tweets, alternating labels; positives contain [`PLANTED_TOKEN`] at a
/// random position.
pub fn classification_corpus(n: usize, seed: u64) -> ClassificationDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let adr = i % 2 == 0;
            let len = rng.random_range(3..8);
            let mut words = filler_words(&mut rng, len);
            if adr {
                let at = rng.random_range(0..=words.len());
                words.insert(at, PLANTED_TOKEN);
            }
            (RawTweet::new(format!("c{i:05}"), words.join(" ")), BinaryLabel::from_bool(adr))
        })
        .collect();
    ClassificationDataset::new("synthetic", records).expect("unique ids")
}

/// `n` tweets of filler words; two out of three carry one or two planted
/// mentions (coded) at random positions.
pub fn extraction_corpus(n: usize, seed: u64) -> ExtractionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let n_mentions = match i % 3 {
                0 => 0,
                1 => 1,
                _ => 2,
            };
            let len = rng.random_range(3..7);
            let mut pieces: Vec<(String, Option<(&str, &str)>)> = filler_words(&mut rng, len)
                .into_iter()
                .map(|w| (w.to_string(), None))
                .collect();
            let mut chosen: Vec<(&str, &str)> = PLANTED_MENTIONS.to_vec();
            chosen.shuffle(&mut rng);
            for &m in chosen.iter().take(n_mentions) {
                let at = rng.random_range(0..=pieces.len());
                // Keep mentions apart so they stay separate spans.
                pieces.insert(at, (m.0.to_string(), Some(m)));
                pieces.insert(at + 1, ("and".to_string(), None));
            }
            let mut text = String::new();
            let mut mentions = Vec::new();
            for (k, (w, m)) in pieces.iter().enumerate() {
                if k > 0 {
                    text.push(' ');
                }
                let begin = text.chars().count();
                text.push_str(w);
                if let Some((surface, code)) = m {
                    let term = mention_lexicon()
                        .entries()
                        .iter()
                        .find(|(c, _)| c == code)
                        .map(|(_, t)| t.clone());
                    mentions.push(MentionSpan {
                        begin,
                        end: begin + surface.chars().count(),
                        surface: surface.to_string(),
                        code: Some(code.to_string()),
                        term,
                    });
                }
            }
            (RawTweet::new(format!("e{i:05}"), text), mentions)
        })
        .collect();
    ExtractionDataset::new("synthetic", records).expect("planted spans are valid")
}

/// Three concepts with three surface forms each.
pub fn normalization_toy() -> (Lexicon, Vec<(String, String)>) {
    let lexicon = Lexicon::new(vec![
        ("10019211".into(), "headache".into()),
        ("10028813".into(), "nausea".into()),
        ("10013573".into(), "dizziness".into()),
    ])
    .expect("distinct codes");
    let mentions = [
        ("headache", "10019211"),
        ("my head hurts", "10019211"),
        ("migraine", "10019211"),
        ("nausea", "10028813"),
        ("feel sick", "10028813"),
        ("queasy", "10028813"),
        ("dizzy", "10013573"),
        ("room spinning", "10013573"),
        ("lightheaded", "10013573"),
    ]
    .iter()
    .map(|(t, c)| (t.to_string(), c.to_string()))
    .collect();
    (lexicon, mentions)
}

/// A task-2 training file with the given class counts, shuffled by `seed`.
/// Ids are `{prefix}{index}`.
pub fn task2_with_counts(prefix: &str, negatives: usize, positives: usize, seed: u64) -> Result<ClassificationDataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<bool> = std::iter::repeat_n(false, negatives)
        .chain(std::iter::repeat_n(true, positives))
        .collect();
    labels.shuffle(&mut rng);
    let records = labels
        .into_iter()
        .enumerate()
        .map(|(i, adr)| {
            let len = rng.random_range(3..8);
            let mut words = filler_words(&mut rng, len);
            if adr {
                words.push(PLANTED_TOKEN);
            }
            (RawTweet::new(format!("{prefix}{i}"), words.join(" ")), BinaryLabel::from_bool(adr))
        })
        .collect();
    ClassificationDataset::new("synthetic", records)
}

/// Vocabulary size used with the synthetic corpora.
pub const PRESET_VOCAB_SIZE: usize = 300;

/// Desk-scale encoder and optimizer settings for the synthetic corpora:
/// a small encoder, lr 1e-3 and enough epochs to overfit.
pub fn preset(task: Task, vocab_size: usize, n_concepts: usize) -> (EncoderConfig, Hyperparams) {
    let cfg = EncoderConfig {
        d_model: 32,
        n_layers: 2,
        n_heads: 4,
        ffn: 64,
        max_len: 32,
        vocab_size,
        dropout: 0.2,
        n_concepts: if task == Task::Normalize { n_concepts } else { 0 },
    };
    let epochs = match task {
        Task::Classify => 200,
        Task::Extract | Task::Normalize => 300,
    };
    let hp = Hyperparams {
        learning_rate: 1e-3,
        batch_size: 16,
        epochs,
        eval_every: 10,
        ..Hyperparams::for_task(task)
    };
    (cfg, hp)
}
