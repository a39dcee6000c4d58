//! Byte-pair subword tokenizer with character spans.
//!
//! The base alphabet is the 256 byte values, stored after four reserved
//! specials. Words are whitespace-delimited; merges never cross a word
//! boundary. Every ASCII character starts as its own byte symbol. A
//! non-ASCII character has no single-byte symbol, so it encodes as `<unk>`
//! with a one-character span (normalized text is always ASCII).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tsv;

pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const PAD: u32 = 2;
pub const UNK: u32 = 3;
const BYTE_BASE: u32 = 4;
pub const SPECIALS: [&str; 4] = ["<s>", "</s>", "<pad>", "<unk>"];
pub const MIN_VOCAB_SIZE: usize = 260;
pub const DEFAULT_VOCAB_SIZE: usize = 8000;
pub const DEFAULT_MAX_LEN: usize = 128;

pub const VOCAB_FILE: &str = "vocab.tsv";
pub const MERGES_FILE: &str = "merges.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    /// Byte string of every non-special id; empty for the specials.
    tokens: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, u32>,
    merges: Vec<(u32, u32)>,
    /// Pair -> (priority, merged id).
    ranks: HashMap<(u32, u32), (usize, u32)>,
}

/// Token ids wrapped in `<s>` ... `</s>`, with the normalized-text character
/// span of every non-special token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedTweet {
    pub ids: Vec<u32>,
    pub spans: Vec<(usize, usize)>,
}

impl TokenizedTweet {
    /// Number of non-special tokens.
    pub fn n_tokens(&self) -> usize {
        self.spans.len()
    }
}

impl Vocab {
    /// Specials plus the 256 byte symbols, no merges.
    pub fn base() -> Self {
        let mut tokens = vec![Vec::new(); SPECIALS.len()];
        tokens.extend((0..=255u8).map(|b| vec![b]));
        let index = tokens
            .iter()
            .enumerate()
            .skip(SPECIALS.len())
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab {
            tokens,
            index,
            merges: Vec::new(),
            ranks: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn id_of(&self, token: &[u8]) -> Option<u32> {
        self.index.get(token).copied()
    }

    /// Byte string of a non-special id.
    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        let i = id as usize;
        (i >= SPECIALS.len() && i < self.tokens.len()).then(|| self.tokens[i].as_slice())
    }

    /// Printable form used in the vocab files.
    pub fn display(&self, id: u32) -> String {
        match SPECIALS.get(id as usize) {
            Some(s) => s.to_string(),
            None => escape_token(&self.tokens[id as usize]),
        }
    }

    fn byte_id(b: u8) -> u32 {
        BYTE_BASE + b as u32
    }

    /// Adds a merge rule, reusing the id of an existing identical token.
    fn push_merge(&mut self, left: u32, right: u32) -> u32 {
        let mut bytes = self.tokens[left as usize].clone();
        bytes.extend_from_slice(&self.tokens[right as usize]);
        let id = match self.index.get(&bytes) {
            Some(&id) => id,
            None => {
                let id = self.tokens.len() as u32;
                self.index.insert(bytes.clone(), id);
                self.tokens.push(bytes);
                id
            }
        };
        self.ranks.insert((left, right), (self.merges.len(), id));
        self.merges.push((left, right));
        id
    }

    pub fn to_vocab_tsv(&self) -> String {
        let mut out = String::from("token\tid\n");
        for id in 0..self.len() as u32 {
            out.push_str(&format!("{}\t{id}\n", self.display(id)));
        }
        out
    }

    pub fn to_merges_tsv(&self) -> String {
        let mut out = String::from("left\tright\n");
        for &(l, r) in &self.merges {
            out.push_str(&format!("{}\t{}\n", self.display(l), self.display(r)));
        }
        out
    }

    /// Hex SHA-256 of both serialized files; checkpoints record it.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.to_vocab_tsv());
        h.update(self.to_merges_tsv());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        tsv::write_string(&dir.join(VOCAB_FILE), &self.to_vocab_tsv())?;
        tsv::write_string(&dir.join(MERGES_FILE), &self.to_merges_tsv())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let vp = dir.join(VOCAB_FILE);
        let mp = dir.join(MERGES_FILE);
        let vocab = tsv::read_to_string(&vp)?;
        let merges = tsv::read_to_string(&mp)?;
        Self::parse(&vp, &vocab, &mp, &merges)
    }

    /// Rebuilds a vocab from its two files. The merges alone determine the
    /// ids, so the vocab file is checked against the replay.
    pub fn parse(vocab_path: &Path, vocab: &str, merges_path: &Path, merges: &str) -> Result<Self> {
        let mut v = Vocab::base();
        let lookup = |v: &Vocab, s: &str, line: usize| -> Result<u32> {
            let bytes = unescape_token(s)
                .ok_or_else(|| Error::format(merges_path, line, format!("bad token `{s}`")))?;
            v.id_of(&bytes)
                .ok_or_else(|| Error::format(merges_path, line, format!("unknown symbol `{s}`")))
        };
        for (line, f) in tsv::data_lines(merges_path, merges, &["left", "right"])? {
            let l = lookup(&v, f[0], line)?;
            let r = lookup(&v, f[1], line)?;
            if v.ranks.contains_key(&(l, r)) {
                return Err(Error::format(merges_path, line, "duplicate merge"));
            }
            v.push_merge(l, r);
        }
        let rows = tsv::data_lines(vocab_path, vocab, &["token", "id"])?;
        if rows.len() != v.len() {
            return Err(Error::Vocab(format!(
                "{} lists {} tokens but the merges produce {}",
                vocab_path.display(),
                rows.len(),
                v.len()
            )));
        }
        for (i, (line, f)) in rows.iter().enumerate() {
            if f[1] != i.to_string() || f[0] != v.display(i as u32) {
                return Err(Error::format(
                    vocab_path,
                    *line,
                    format!("expected `{}\t{i}`", v.display(i as u32)),
                ));
            }
        }
        Ok(v)
    }
}

fn escape_token(bytes: &[u8]) -> String {
    let mut out = String::new();
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            b'<' => out.push_str("\\x3c"),
            0x21..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\x{b:02x}")),
        }
    }
    out
}

fn unescape_token(s: &str) -> Option<Vec<u8>> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'\\' {
            match b.get(i + 1)? {
                b'\\' => {
                    out.push(b'\\');
                    i += 2;
                }
                b'x' => {
                    let hex = std::str::from_utf8(b.get(i + 2..i + 4)?).ok()?;
                    out.push(u8::from_str_radix(hex, 16).ok()?);
                    i += 4;
                }
                _ => return None,
            }
        } else if (0x21..=0x7e).contains(&b[i]) && b[i] != b'<' {
            out.push(b[i]);
            i += 1;
        } else {
            return None;
        }
    }
    (!out.is_empty()).then_some(out)
}

/// Initial symbols of one word: a byte id per ASCII char, `<unk>` otherwise.
fn initial_symbols(word: &str) -> Vec<u32> {
    word.chars()
        .map(|c| if c.is_ascii() { Vocab::byte_id(c as u8) } else { UNK })
        .collect()
}

fn mergeable(a: u32, b: u32) -> bool {
    a != UNK && b != UNK
}

/// Learns merges greedily: the most frequent adjacent pair (weighted by word
/// frequency) is merged until `target_size` ids exist or no pair occurs
/// twice. Ties go to the lexicographically smallest pair of byte strings.
pub fn train_vocab<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<Vocab> {
    if target_size < MIN_VOCAB_SIZE {
        return Err(Error::InvalidArgument(format!(
            "vocab size {target_size} is below the minimum of {MIN_VOCAB_SIZE}"
        )));
    }
    let mut word_counts: BTreeMap<&str, i64> = BTreeMap::new();
    for text in corpus {
        for w in text.as_ref().split_whitespace() {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(Error::InvalidArgument("cannot train a vocab on an empty corpus".into()));
    }
    let mut words: Vec<(Vec<u32>, i64)> = word_counts
        .into_iter()
        .map(|(w, c)| (initial_symbols(w), c))
        .collect();

    let mut counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut occurs: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, (syms, c)) in words.iter().enumerate() {
        for p in syms.windows(2).filter(|p| mergeable(p[0], p[1])) {
            *counts.entry((p[0], p[1])).or_default() += c;
            occurs.entry((p[0], p[1])).or_default().insert(wi);
        }
    }

    let mut vocab = Vocab::base();
    while vocab.len() < target_size {
        let Some(&max) = counts.values().max() else { break };
        if max < 2 {
            break;
        }
        let best = counts
            .iter()
            .filter(|&(_, &c)| c == max)
            .map(|(&p, _)| p)
            .min_by(|a, b| {
                let key = |p: &(u32, u32)| (vocab.tokens[p.0 as usize].clone(), vocab.tokens[p.1 as usize].clone());
                key(a).cmp(&key(b))
            })
            .expect("a pair with the maximum count exists");
        let new_id = vocab.push_merge(best.0, best.1);

        let mut affected: Vec<usize> = occurs.remove(&best).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        for wi in affected {
            let (syms, c) = &mut words[wi];
            let c = *c;
            for p in syms.windows(2).filter(|p| mergeable(p[0], p[1])) {
                let key = (p[0], p[1]);
                if let Some(n) = counts.get_mut(&key) {
                    *n -= c;
                    if *n <= 0 {
                        counts.remove(&key);
                    }
                }
                if let Some(set) = occurs.get_mut(&key) {
                    set.remove(&wi);
                }
            }
            *syms = merge_pair(syms, best, new_id);
            for p in syms.windows(2).filter(|p| mergeable(p[0], p[1])) {
                *counts.entry((p[0], p[1])).or_default() += c;
                occurs.entry((p[0], p[1])).or_default().insert(wi);
            }
        }
        counts.remove(&best);
    }
    Ok(vocab)
}

fn merge_pair(syms: &[u32], pair: (u32, u32), id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(syms.len());
    let mut i = 0;
    while i < syms.len() {
        if i + 1 < syms.len() && (syms[i], syms[i + 1]) == pair {
            out.push(id);
            i += 2;
        } else {
            out.push(syms[i]);
            i += 1;
        }
    }
    out
}

pub fn encode(text: &str, vocab: &Vocab) -> TokenizedTweet {
    encode_with_max_len(text, vocab, DEFAULT_MAX_LEN)
}

/// Encodes `text`, keeping at most `max_len` ids including `<s>` and `</s>`
/// (values below 2 are treated as 2).
pub fn encode_with_max_len(text: &str, vocab: &Vocab, max_len: usize) -> TokenizedTweet {
    let mut ids = vec![BOS];
    let mut spans = Vec::new();
    let mut char_pos = 0;
    let mut word_start = None;
    let flush = |start: usize, end: usize, word: &str, ids: &mut Vec<u32>, spans: &mut Vec<(usize, usize)>| {
        let mut syms: Vec<(u32, usize, usize)> = initial_symbols(word)
            .into_iter()
            .enumerate()
            .map(|(i, s)| (s, start + i, start + i + 1))
            .collect();
        debug_assert_eq!(syms.last().map(|s| s.2), Some(end));
        loop {
            let best = syms
                .windows(2)
                .filter_map(|w| vocab.ranks.get(&(w[0].0, w[1].0)).map(|&(r, id)| (r, (w[0].0, w[1].0), id)))
                .min();
            let Some((_, pair, id)) = best else { break };
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && (syms[i].0, syms[i + 1].0) == pair {
                    out.push((id, syms[i].1, syms[i + 1].2));
                    i += 2;
                } else {
                    out.push(syms[i]);
                    i += 1;
                }
            }
            syms = out;
        }
        for (id, b, e) in syms {
            ids.push(id);
            spans.push((b, e));
        }
    };
    let mut byte_start = 0;
    for (bi, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(ws) = word_start.take() {
                flush(ws, char_pos, &text[byte_start..bi], &mut ids, &mut spans);
            }
        } else if word_start.is_none() {
            word_start = Some(char_pos);
            byte_start = bi;
        }
        char_pos += 1;
    }
    if let Some(ws) = word_start {
        flush(ws, char_pos, &text[byte_start..], &mut ids, &mut spans);
    }
    let keep = max_len.max(2) - 2;
    ids.truncate(keep + 1);
    spans.truncate(keep);
    ids.push(EOS);
    TokenizedTweet { ids, spans }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_merge_on_toy_corpus() {
        let v = train_vocab(&["aaab aaab"], 261).unwrap();
        assert_eq!(v.len(), 261);
        let (l, r) = v.merges()[0];
        assert_eq!((v.display(l), v.display(r)), ("a".to_string(), "a".to_string()));
    }

    #[test]
    fn size_and_corpus_checks() {
        assert!(train_vocab(&["abc"], 259).is_err());
        assert!(train_vocab::<&str>(&[], 300).is_err());
        assert!(train_vocab(&["   "], 300).is_err());
        let v = train_vocab(&["abcdefg"], 5000).unwrap();
        assert_eq!(v.len(), MIN_VOCAB_SIZE);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // Both "ab" and "cd" occur twice; "ab" sorts first.
        let v = train_vocab(&["cd ab cd ab"], 261).unwrap();
        assert_eq!(v.display(260), "ab");
    }

    #[test]
    fn whole_words_encode_to_single_tokens() {
        let v = train_vocab(&["bad pain bad pain bad pain"], 400).unwrap();
        let t = encode("bad pain", &v);
        assert_eq!(t.ids.len(), 4);
        assert_eq!(t.spans, vec![(0, 3), (4, 8)]);
        assert_eq!(v.display(t.ids[1]), "bad");
    }

    #[test]
    fn empty_and_unknown() {
        let v = Vocab::base();
        assert_eq!(encode("", &v).ids, vec![BOS, EOS]);
        let t = encode("a\u{e9}b", &v);
        assert_eq!(t.ids, vec![BOS, 4 + b'a' as u32, UNK, 4 + b'b' as u32, EOS]);
        assert_eq!(t.spans, vec![(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn truncation_keeps_eos_last() {
        let v = Vocab::base();
        let t = encode_with_max_len("a b c d e", &v, 4);
        assert_eq!(t.ids.len(), 4);
        assert_eq!(*t.ids.last().unwrap(), EOS);
        assert_eq!(t.spans, vec![(0, 1), (2, 3)]);
    }

    #[test]
    fn files_round_trip() {
        let v = train_vocab(&["it's <3 \\ back\\slash <tag> tag tag <3"], 300).unwrap();
        let dir = tempfile::tempdir().unwrap();
        v.save(dir.path()).unwrap();
        let w = Vocab::load(dir.path()).unwrap();
        assert_eq!(v, w);
        assert_eq!(v.fingerprint(), w.fingerprint());
        for id in SPECIALS.len() as u32..v.len() as u32 {
            assert!(!v.display(id).starts_with('<'));
        }
    }

    #[test]
    fn tampered_vocab_rejected() {
        let v = train_vocab(&["aa aa"], 300).unwrap();
        let bad = v.to_vocab_tsv().replace("aa\t260", "zz\t260");
        let p = Path::new("v");
        assert!(Vocab::parse(p, &bad, p, &v.to_merges_tsv()).is_err());
    }
}
