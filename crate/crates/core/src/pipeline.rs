//! A trained checkpoint bundled with its vocabulary and resource tables,
//! ready for per-tweet prediction.

use crate::corpus::{BinaryLabel, MentionSpan, RawTweet};
use crate::encoder::{classify_tweet, forward, normalize_mention, Checkpoint, ForwardMode};
use crate::error::{Error, Result};
use crate::preprocess::{normalize, project_span_to_original, ResourceTables};
use crate::spans::bio_to_spans;
use crate::tokenize::{encode_with_max_len, Vocab};
use crate::train::{predict_tags, Task};

#[derive(Debug, Clone)]
pub struct Model {
    pub checkpoint: Checkpoint,
    pub vocab: Vocab,
    pub tables: ResourceTables,
}

impl Model {
    /// Fails unless `vocab` is the vocabulary the checkpoint was trained
    /// with.
    pub fn new(checkpoint: Checkpoint, vocab: Vocab, tables: ResourceTables) -> Result<Self> {
        if checkpoint.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::Model(
                "vocabulary does not match the one the checkpoint was trained with".into(),
            ));
        }
        if checkpoint.config.vocab_size != vocab.len() {
            return Err(Error::Model(format!(
                "checkpoint expects {} vocabulary entries, vocabulary has {}",
                checkpoint.config.vocab_size,
                vocab.len()
            )));
        }
        Ok(Model { checkpoint, vocab, tables })
    }

    pub fn task(&self) -> Task {
        self.checkpoint.task
    }

    fn expect_task(&self, task: Task) -> Result<()> {
        if self.task() != task {
            return Err(Error::Model(format!(
                "a {} checkpoint cannot be used to {task}",
                self.task()
            )));
        }
        Ok(())
    }

    /// ADR probability of a tweet.
    pub fn probability(&self, tweet: &RawTweet) -> Result<f64> {
        self.expect_task(Task::Classify)?;
        let cfg = &self.checkpoint.config;
        let tok = encode_with_max_len(&normalize(tweet, &self.tables).text, &self.vocab, cfg.max_len);
        let out = forward(&tok, &self.checkpoint.params, cfg, ForwardMode::Eval, 0)?;
        Ok(classify_tweet(out.t_s.view(), &self.checkpoint.params))
    }

    pub fn classify(&self, tweet: &RawTweet) -> Result<BinaryLabel> {
        Ok(BinaryLabel::from_bool(self.probability(tweet)? >= 0.5))
    }

    /// Predicted mentions on the original text, disjoint and sorted. With a
    /// normalizer, every mention also gets its most probable concept.
    pub fn extract(&self, tweet: &RawTweet, normalizer: Option<&Model>) -> Result<Vec<MentionSpan>> {
        self.expect_task(Task::Extract)?;
        let cfg = &self.checkpoint.config;
        let n = normalize(tweet, &self.tables);
        let tok = encode_with_max_len(&n.text, &self.vocab, cfg.max_len);
        let tags = predict_tags(&tok, &self.checkpoint.params, cfg)?;
        let mut out: Vec<MentionSpan> = Vec::new();
        for (b, e) in bio_to_spans(&tags, &tok)? {
            let m = project_span_to_original(b, e, &n)?;
            // Neighbouring spans inside one replaced token land on the same
            // original range.
            match out.last_mut() {
                Some(last) if m.begin < last.end => {
                    if m.end > last.end {
                        *last = MentionSpan::on_text(&tweet.text, last.begin, m.end)?;
                    }
                }
                _ => out.push(m),
            }
        }
        if let Some(norm) = normalizer {
            for m in &mut out {
                let (code, term) = norm.concept(&m.surface)?;
                m.code = Some(code);
                m.term = Some(term).filter(|t| !t.is_empty());
            }
        }
        Ok(out)
    }

    /// Most probable `(code, term)` for a mention.
    pub fn concept(&self, mention: &str) -> Result<(String, String)> {
        self.expect_task(Task::Normalize)?;
        let c = &self.checkpoint;
        let probs = normalize_mention(mention, &c.params, &self.vocab, &c.config, &self.tables)?;
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[best] {
                best = i;
            }
        }
        Ok(c.concepts[best].clone())
    }
}
