//! Tweet normalization with a per-character offset map.
//!
//! The pipeline runs in a fixed order:
//!
//! 1. strip URLs, `@user` mentions, punctuation (kept: `#`, word-internal
//!    apostrophes, smileys), non-ASCII characters other than emoji, and
//!    standalone `rt` tokens;
//! 2. lowercase;
//! 3. expand contractions, then drop leftover apostrophes;
//! 4. replace interjections;
//! 5. replace smileys and emoji with their descriptions;
//! 6. squeeze character runs longer than two (`feeeeel` -> `feel`);
//! 7. collapse whitespace and trim.
//!
//! Every character of the output remembers where it came from, so mention
//! spans can be moved between the original and normalized text.

mod resources;

use std::ops::Range;

use crate::corpus::RawTweet;
use crate::error::{Error, Result};

pub use resources::{ResourceTables, TABLE_FILES};

/// Provenance of one normalized character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Copied (possibly case-folded) from this original character index.
    Original(usize),
    /// Inserted by a replacement of the original characters `[begin, end)`.
    Synthetic { begin: usize, end: usize },
}

impl Origin {
    /// Index used for ordering: the original index, or the source token's
    /// first character.
    pub fn index(self) -> usize {
        match self {
            Origin::Original(i) => i,
            Origin::Synthetic { begin, .. } => begin,
        }
    }

    pub fn source_range(self) -> Range<usize> {
        match self {
            Origin::Original(i) => i..i + 1,
            Origin::Synthetic { begin, end } => begin..end,
        }
    }

    pub fn is_synthetic(self) -> bool {
        matches!(self, Origin::Synthetic { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedTweet {
    pub id: String,
    pub text: String,
    pub offset_map: Vec<Origin>,
    /// Character length of the original text.
    pub original_len: usize,
    original: String,
}

impl NormalizedTweet {
    pub fn original_text(&self) -> &str {
        &self.original
    }

    pub fn char_len(&self) -> usize {
        self.offset_map.len()
    }
}

/// A half-open character span on normalized text.
pub type TextSpan = (usize, usize);

#[derive(Debug, Clone, Copy)]
struct PChar {
    ch: char,
    origin: Origin,
    /// Index of the smiley match this character belongs to, if any.
    smiley: Option<u32>,
}

pub(crate) fn squeeze_runs(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut prev = None;
    let mut run = 0;
    for c in s.chars() {
        if Some(c) == prev {
            run += 1;
        } else {
            run = 1;
            prev = Some(c);
        }
        if run <= 2 {
            out.push(c);
        }
    }
    out
}

pub fn normalize(tweet: &RawTweet, tables: &ResourceTables) -> NormalizedTweet {
    let mut seq: Vec<PChar> = tweet
        .text
        .chars()
        .enumerate()
        .map(|(i, ch)| PChar {
            ch,
            origin: Origin::Original(i),
            smiley: None,
        })
        .collect();
    let original_len = seq.len();

    strip_noise(&mut seq, tables);
    for p in &mut seq {
        p.ch = p.ch.to_ascii_lowercase();
    }
    expand_contractions(&mut seq, tables);
    replace_interjections(&mut seq, tables);
    replace_symbols(&mut seq, tables);
    squeeze(&mut seq);
    collapse_whitespace(&mut seq);

    NormalizedTweet {
        id: tweet.id.clone(),
        text: seq.iter().map(|p| p.ch).collect(),
        offset_map: seq.iter().map(|p| p.origin).collect(),
        original_len,
        original: tweet.text.clone(),
    }
}

/// Normalized text only.
pub fn normalize_text(text: &str, tables: &ResourceTables) -> String {
    normalize(&RawTweet::new("", text), tables).text
}

fn chars_of(seq: &[PChar]) -> Vec<char> {
    seq.iter().map(|p| p.ch).collect()
}

/// Replaces `seq[range]` with synthetic characters spelling `text`, covering
/// the union of the replaced characters' sources.
fn replacement(seq: &[PChar], range: Range<usize>, text: &str) -> Vec<PChar> {
    let begin = seq[range.clone()].iter().map(|p| p.origin.source_range().start).min();
    let end = seq[range].iter().map(|p| p.origin.source_range().end).max();
    let (begin, end) = (begin.unwrap_or(0), end.unwrap_or(0));
    text.chars()
        .map(|ch| PChar {
            ch,
            origin: Origin::Synthetic { begin, end },
            smiley: None,
        })
        .collect()
}

/// Rebuilds `seq`, substituting each `(range, replacement)` edit. Edits must
/// be sorted and disjoint.
fn apply_edits(seq: &mut Vec<PChar>, edits: Vec<(Range<usize>, Vec<PChar>)>) {
    if edits.is_empty() {
        return;
    }
    let mut out = Vec::with_capacity(seq.len());
    let mut pos = 0;
    for (range, repl) in edits {
        out.extend_from_slice(&seq[pos..range.start]);
        out.extend(repl);
        pos = range.end;
    }
    out.extend_from_slice(&seq[pos..]);
    *seq = out;
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric()
}

fn token_ranges(seq: &[PChar]) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, p) in seq.iter().enumerate() {
        match (p.ch.is_whitespace(), start) {
            (false, None) => start = Some(i),
            (true, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..seq.len());
    }
    out
}

fn starts_with_ci(chars: &[char], at: usize, prefix: &str) -> bool {
    let n = prefix.chars().count();
    at + n <= chars.len()
        && chars[at..at + n]
            .iter()
            .zip(prefix.chars())
            .all(|(a, b)| a.to_ascii_lowercase() == b)
}

/// Step 1.
fn strip_noise(seq: &mut Vec<PChar>, tables: &ResourceTables) {
    for p in seq.iter_mut() {
        if matches!(p.ch, '\u{2019}' | '\u{2018}') {
            p.ch = '\'';
        }
    }

    // URLs: from the scheme or `www.` to the end of the whitespace token.
    let chars = chars_of(seq);
    let mut keep = vec![true; seq.len()];
    for tok in token_ranges(seq) {
        let start = tok.clone().find(|&i| {
            starts_with_ci(&chars, i, "http://")
                || starts_with_ci(&chars, i, "https://")
                || starts_with_ci(&chars, i, "www.")
        });
        if let Some(s) = start {
            keep[s..tok.end].iter_mut().for_each(|k| *k = false);
        }
    }
    // @user mentions.
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '@' && keep[i] {
            let mut j = i + 1;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                j += 1;
            }
            if j > i + 1 {
                keep[i..j].iter_mut().for_each(|k| *k = false);
                i = j;
                continue;
            }
        }
        i += 1;
    }
    retain_flags(seq, &keep);

    mark_smileys(seq, tables);

    // Punctuation becomes a space; non-emoji non-ASCII characters are dropped.
    let chars = chars_of(seq);
    let mut keep = vec![true; seq.len()];
    for i in 0..seq.len() {
        let p = &mut seq[i];
        if p.smiley.is_some() {
            continue;
        }
        let c = p.ch;
        if c.is_ascii_alphanumeric() || c.is_whitespace() || c == '#' {
            continue;
        }
        if c == '\'' {
            let inner = i > 0
                && i + 1 < chars.len()
                && is_word_char(chars[i - 1])
                && is_word_char(chars[i + 1]);
            if !inner {
                p.ch = ' ';
            }
        } else if c.is_ascii() {
            p.ch = ' ';
        } else if !tables.emoji_chars.contains(&c) {
            keep[i] = false;
        }
    }
    retain_flags(seq, &keep);

    // Standalone retweet markers. Smileys and emoji end up space-separated,
    // so they delimit tokens here too.
    let mut keep = vec![true; seq.len()];
    let rt_tokens = word_ranges(seq, |c| !c.is_whitespace() && !tables.emoji_chars.contains(&c));
    for tok in rt_tokens {
        let word: String = seq[tok.clone()]
            .iter()
            .filter(|p| p.ch != '\'')
            .map(|p| p.ch.to_ascii_lowercase())
            .collect();
        if word == "rt" {
            keep[tok].iter_mut().for_each(|k| *k = false);
        }
    }
    retain_flags(seq, &keep);
}

fn retain_flags(seq: &mut Vec<PChar>, keep: &[bool]) {
    let mut i = 0;
    seq.retain(|_| {
        let k = keep[i];
        i += 1;
        k
    });
}

/// Marks longest smiley matches that are not followed by a letter or digit.
fn mark_smileys(seq: &mut [PChar], tables: &ResourceTables) {
    let lower: Vec<char> = seq.iter().map(|p| p.ch.to_ascii_lowercase()).collect();
    let mut group = 0u32;
    let mut i = 0;
    while i < lower.len() {
        let longest = (1..=tables.smiley_max_len.min(lower.len() - i))
            .rev()
            .find(|&n| {
                let key: String = lower[i..i + n].iter().collect();
                let followed_ok = lower.get(i + n).is_none_or(|c| !c.is_ascii_alphanumeric());
                followed_ok && tables.smileys.contains_key(&key)
            });
        match longest {
            Some(n) => {
                for p in &mut seq[i..i + n] {
                    p.smiley = Some(group);
                }
                group += 1;
                i += n;
            }
            None => i += 1,
        }
    }
}

/// Maximal runs of characters accepted by `pred`, excluding smiley members.
fn word_ranges(seq: &[PChar], pred: impl Fn(char) -> bool) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, p) in seq.iter().enumerate() {
        let inside = p.smiley.is_none() && pred(p.ch);
        match (inside, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(s..seq.len());
    }
    out
}

fn replace_words(
    seq: &mut Vec<PChar>,
    table: &std::collections::HashMap<String, String>,
    pred: impl Fn(char) -> bool,
) {
    let edits: Vec<_> = word_ranges(seq, pred)
        .into_iter()
        .filter_map(|r| {
            let word: String = seq[r.clone()].iter().map(|p| p.ch).collect();
            table
                .get(&squeeze_runs(&word))
                .map(|v| (r.clone(), replacement(seq, r, v)))
        })
        .collect();
    apply_edits(seq, edits);
}

/// Step 3.
fn expand_contractions(seq: &mut Vec<PChar>, tables: &ResourceTables) {
    replace_words(seq, &tables.contractions, |c| is_word_char(c) || c == '\'');
    seq.retain(|p| p.ch != '\'' || p.smiley.is_some());
}

/// Step 4.
fn replace_interjections(seq: &mut Vec<PChar>, tables: &ResourceTables) {
    replace_words(seq, &tables.interjections, is_word_char);
}

/// Step 5.
fn replace_symbols(seq: &mut Vec<PChar>, tables: &ResourceTables) {
    let mut edits = Vec::new();
    let mut i = 0;
    while i < seq.len() {
        if let Some(g) = seq[i].smiley {
            let mut j = i;
            while j < seq.len() && seq[j].smiley == Some(g) {
                j += 1;
            }
            let key: String = seq[i..j].iter().map(|p| p.ch).collect();
            let desc = tables
                .smileys
                .get(&key)
                .map(String::as_str)
                .unwrap_or_default();
            edits.push((i..j, replacement(seq, i..j, &format!(" {desc} "))));
            i = j;
            continue;
        }
        if !seq[i].ch.is_ascii() {
            let max = tables.emoji_max_len.min(seq.len() - i);
            let found = (1..=max).rev().find_map(|n| {
                let key: Vec<char> = seq[i..i + n].iter().map(|p| p.ch).collect();
                tables.emoji.get(&key).map(|d| (n, d))
            });
            let (n, text) = match found {
                Some((n, d)) => (n, format!(" {d} ")),
                // Unmatched emoji components still separate words.
                None => (1, " ".to_string()),
            };
            edits.push((i..i + n, replacement(seq, i..i + n, &text)));
            i += n;
            continue;
        }
        i += 1;
    }
    apply_edits(seq, edits);
}

/// Step 6.
fn squeeze(seq: &mut Vec<PChar>) {
    let mut out: Vec<PChar> = Vec::with_capacity(seq.len());
    let mut run = 0;
    for p in seq.drain(..) {
        if out.last().is_some_and(|q| q.ch == p.ch) {
            run += 1;
        } else {
            run = 1;
        }
        if run <= 2 {
            out.push(p);
        }
    }
    *seq = out;
}

/// Step 7.
fn collapse_whitespace(seq: &mut Vec<PChar>) {
    let mut out: Vec<PChar> = Vec::with_capacity(seq.len());
    for mut p in seq.drain(..) {
        if p.ch.is_whitespace() {
            if out.is_empty() || out.last().is_some_and(|q| q.ch == ' ') {
                continue;
            }
            p.ch = ' ';
        }
        out.push(p);
    }
    if out.last().is_some_and(|q| q.ch == ' ') {
        out.pop();
    }
    *seq = out;
}

/// Moves a mention on the original text onto the normalized text: the
/// smallest normalized span covering every surviving non-space character
/// derived from `[begin, end)`. `None` when nothing of the mention survives.
pub fn project_span_to_normalized(
    begin: usize,
    end: usize,
    n: &NormalizedTweet,
) -> Result<Option<TextSpan>> {
    if begin >= end || end > n.original_len {
        return Err(Error::Span(format!(
            "[{begin}, {end}) is not a nonempty span of {} original characters",
            n.original_len
        )));
    }
    let mut lo = None;
    let mut hi = 0;
    for (j, (c, origin)) in n.text.chars().zip(&n.offset_map).enumerate() {
        if c == ' ' {
            continue;
        }
        let src = origin.source_range();
        if src.start < end && begin < src.end {
            lo.get_or_insert(j);
            hi = j + 1;
        }
    }
    Ok(lo.map(|lo| (lo, hi)))
}

/// Moves a normalized-text span back to the original text. Synthetic
/// characters contribute the full extent of the token they replaced.
pub fn project_span_to_original(
    begin: usize,
    end: usize,
    n: &NormalizedTweet,
) -> Result<crate::corpus::MentionSpan> {
    if begin >= end || end > n.char_len() {
        return Err(Error::Span(format!(
            "[{begin}, {end}) is not a nonempty span of {} normalized characters",
            n.char_len()
        )));
    }
    let origins = &n.offset_map[begin..end];
    let lo = origins.iter().map(|o| o.source_range().start).min().unwrap_or(0);
    let hi = origins.iter().map(|o| o.source_range().end).max().unwrap_or(0);
    crate::corpus::MentionSpan::on_text(&n.original, lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(s: &str) -> NormalizedTweet {
        normalize(&RawTweet::new("t", s), &ResourceTables::builtin())
    }

    #[test]
    fn examples_from_the_preprocessing_rules() {
        assert_eq!(norm("feeeeel").text, "feel");
        assert_eq!(norm("can\u{2019}t").text, "cannot");
        assert_eq!(norm("can't").text, "cannot");
        assert_eq!(norm("ouch").text, "pain");
        assert_eq!(norm("oww").text, "pain");
        assert_eq!(norm(":)").text, "happy");
        assert_eq!(norm("\u{1F600}").text, "grinning face");
    }

    #[test]
    fn mention_removal_keeps_offsets() {
        let n = norm("@coolpharmgreg i don't care");
        assert_eq!(n.text, "i do not care");
        assert_eq!(n.offset_map[0], Origin::Original(15));
        assert!(n.offset_map[2].is_synthetic());
    }

    #[test]
    fn urls_rt_and_punctuation() {
        assert_eq!(norm("RT @bob: Check https://t.co/xyz NOW!!!").text, "check now");
        assert_eq!(norm("see www.example.com/a?b=c ok").text, "see ok");
        assert_eq!(norm("pain,fever").text, "pain fever");
        assert_eq!(norm("thank god for vyvanse #addicted").text, "thank god for vyvanse #addicted");
        assert_eq!(norm("caf\u{e9} art").text, "caf art");
        assert_eq!(norm("start rt").text, "start");
        assert_eq!(norm("john's").text, "johns");
    }

    #[test]
    fn hashtag_interjection() {
        let n = norm("torture #oww");
        assert_eq!(n.text, "torture #pain");
        assert_eq!(n.offset_map[9], Origin::Synthetic { begin: 9, end: 12 });
    }

    #[test]
    fn smiley_needs_boundary() {
        assert_eq!(norm("great:)").text, "great happy");
        assert_eq!(norm("re:done").text, "re done");
        assert_eq!(norm("so sad :'(").text, "so sad crying");
    }

    #[test]
    fn interjection_after_squeeze_is_stable() {
        let once = norm("owwwww that hurt").text;
        assert_eq!(once, "pain that hurt");
        assert_eq!(norm(&once).text, once);
    }

    #[test]
    fn project_after_prefix_removal() {
        let n = norm("@user bad pain");
        assert_eq!(n.text, "bad pain");
        assert_eq!(project_span_to_normalized(10, 14, &n).unwrap(), Some((4, 8)));
        let back = project_span_to_original(4, 8, &n).unwrap();
        assert_eq!((back.begin, back.end, back.surface.as_str()), (10, 14, "pain"));
    }

    #[test]
    fn project_deleted_mention() {
        let n = norm("look http://x.co/pain now");
        assert_eq!(project_span_to_normalized(17, 21, &n).unwrap(), None);
        assert!(project_span_to_normalized(3, 3, &n).is_err());
        assert!(project_span_to_normalized(0, 99, &n).is_err());
    }

    #[test]
    fn project_identity() {
        let n = norm("bad pain today");
        assert_eq!(project_span_to_normalized(4, 8, &n).unwrap(), Some((4, 8)));
    }

    #[test]
    fn synthetic_span_maps_to_source_token() {
        let n = norm("so nice :) yes");
        assert_eq!(n.text, "so nice happy yes");
        let m = project_span_to_original(8, 13, &n).unwrap();
        assert_eq!((m.begin, m.end, m.surface.as_str()), (8, 10, ":)"));
        assert!(project_span_to_original(3, 3, &n).is_err());
    }

    #[test]
    fn emoji_sequences_and_leftovers() {
        assert_eq!(norm("love\u{2764}\u{FE0F}it").text, "love red heart it");
        assert_eq!(norm("o\u{FE0F}uch").text, "o uch");
    }

    #[test]
    fn squeeze_helper() {
        assert_eq!(squeeze_runs("aaabbbbcc"), "aabbcc");
        assert_eq!(squeeze_runs(""), "");
    }
}
