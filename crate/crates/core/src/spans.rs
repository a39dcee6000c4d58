//! BIO tagging of token sequences from character spans, and back.

use crate::error::{Error, Result};
use crate::tokenize::TokenizedTweet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum BioTag {
    O = 0,
    B = 1,
    I = 2,
}

impl BioTag {
    pub const ALL: [BioTag; 3] = [BioTag::O, BioTag::B, BioTag::I];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            BioTag::O => "O",
            BioTag::B => "B-ADR",
            BioTag::I => "I-ADR",
        }
    }
}

fn overlaps(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0.max(b.0) < a.1.min(b.1)
}

/// Tags every token that shares a character with a mention. The first such
/// token of a mention is `B`, the rest `I`. Two mentions that touch the same
/// token collapse into one run, since a token carries one tag.
pub fn spans_to_bio(tok: &TokenizedTweet, mentions: &[(usize, usize)]) -> Result<Vec<BioTag>> {
    let mut sorted = mentions.to_vec();
    sorted.sort_unstable();
    if let Some(&(b, e)) = sorted.iter().find(|m| m.0 >= m.1) {
        return Err(Error::Span(format!("empty mention [{b}, {e})")));
    }
    if let Some(w) = sorted.windows(2).find(|w| overlaps(w[0], w[1])) {
        return Err(Error::Span(format!(
            "mentions [{}, {}) and [{}, {}) overlap",
            w[0].0, w[0].1, w[1].0, w[1].1
        )));
    }
    let mut tags = vec![BioTag::O; tok.spans.len()];
    for m in sorted {
        let mut first = true;
        for (i, &span) in tok.spans.iter().enumerate() {
            if !overlaps(span, m) {
                continue;
            }
            if tags[i] == BioTag::O {
                tags[i] = if first { BioTag::B } else { BioTag::I };
            }
            first = false;
        }
    }
    Ok(tags)
}

/// Decodes maximal `B I*` runs into character spans. An `I` that follows
/// `O` or opens the sequence starts a new run as if it were `B`.
pub fn bio_to_spans(tags: &[BioTag], tok: &TokenizedTweet) -> Result<Vec<(usize, usize)>> {
    if tags.len() != tok.spans.len() {
        return Err(Error::Span(format!(
            "{} tags for {} tokens",
            tags.len(),
            tok.spans.len()
        )));
    }
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut open = false;
    for (&tag, &(b, e)) in tags.iter().zip(&tok.spans) {
        match tag {
            BioTag::O => open = false,
            BioTag::I if open => out.last_mut().expect("open run").1 = e,
            BioTag::B | BioTag::I => {
                out.push((b, e));
                open = true;
            }
        }
    }
    Ok(out)
}

/// Mentions widened to whole tokens; mentions sharing a token are merged.
/// This is what `bio_to_spans(spans_to_bio(..))` returns.
pub fn expand_to_tokens(tok: &TokenizedTweet, mentions: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut hits: Vec<(usize, usize)> = mentions
        .iter()
        .filter_map(|&m| {
            let idx: Vec<usize> = (0..tok.spans.len()).filter(|&i| overlaps(tok.spans[i], m)).collect();
            Some((*idx.first()?, *idx.last()?))
        })
        .collect();
    hits.sort_unstable();
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for (a, b) in hits {
        match merged.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => merged.push((a, b)),
        }
    }
    merged
        .into_iter()
        .map(|(a, b)| (tok.spans[a].0, tok.spans[b].1))
        .collect()
}
