//! Tweets, labels and ADR mentions, plus the TSV loaders and writers for
//! the task-2 (tweet classification) and task-3 (mention extraction) files.
//!
//! All span offsets are character offsets (Unicode scalar values) into the
//! original tweet text, half-open.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tsv;

pub const TASK2_HEADER: [&str; 3] = ["tweet_id", "label", "text"];
pub const TWEETS_HEADER: [&str; 2] = ["tweet_id", "text"];
pub const SPANS_HEADER: [&str; 7] = [
    "tweet_id",
    "begin",
    "end",
    "type",
    "extraction",
    "meddra_code",
    "meddra_term",
];

/// A tweet as it appears in the source data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub id: String,
    pub text: String,
}

impl RawTweet {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        RawTweet {
            id: id.into(),
            text: text.into(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BinaryLabel {
    NonAdr = 0,
    Adr = 1,
}

impl BinaryLabel {
    pub fn from_bool(adr: bool) -> Self {
        if adr {
            BinaryLabel::Adr
        } else {
            BinaryLabel::NonAdr
        }
    }

    pub fn is_adr(self) -> bool {
        self == BinaryLabel::Adr
    }

    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "0" => Some(BinaryLabel::NonAdr),
            "1" => Some(BinaryLabel::Adr),
            _ => None,
        }
    }
}

impl fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// An ADR mention: `[begin, end)` in characters of the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MentionSpan {
    pub begin: usize,
    pub end: usize,
    pub surface: String,
    pub code: Option<String>,
    pub term: Option<String>,
}

impl MentionSpan {
    /// Builds a span over `text`, reading the surface string from it.
    pub fn on_text(text: &str, begin: usize, end: usize) -> Result<Self> {
        let surface = char_slice(text, begin, end).ok_or_else(|| {
            Error::Span(format!(
                "[{begin}, {end}) is not a nonempty range within {} characters",
                text.chars().count()
            ))
        })?;
        Ok(MentionSpan {
            begin,
            end,
            surface: surface.to_string(),
            code: None,
            term: None,
        })
    }

    pub fn with_code(mut self, code: impl Into<String>, term: Option<String>) -> Self {
        self.code = Some(code.into());
        self.term = term;
        self
    }

    pub fn overlaps(&self, other: &MentionSpan) -> bool {
        self.begin.max(other.begin) < self.end.min(other.end)
    }
}

/// Substring by character offsets; `None` unless `begin < end <= len`.
pub fn char_slice(text: &str, begin: usize, end: usize) -> Option<&str> {
    if begin >= end {
        return None;
    }
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let start = indices.nth(begin)?;
    let stop = indices.nth(end - begin - 1)?;
    Some(&text[start..stop])
}

/// Labelled tweets for ADR tweet classification.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassificationDataset {
    pub split: String,
    pub records: Vec<(RawTweet, BinaryLabel)>,
}

impl ClassificationDataset {
    pub fn new(split: impl Into<String>, records: Vec<(RawTweet, BinaryLabel)>) -> Result<Self> {
        check_unique_ids(records.iter().map(|(t, _)| t))?;
        Ok(ClassificationDataset {
            split: split.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        tsv::render(
            &TASK2_HEADER,
            self.records.iter().map(|(t, l)| {
                vec![tsv::escape(&t.id), l.to_string(), tsv::escape(&t.text)]
            }),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        tsv::write_string(path, &self.to_tsv())
    }
}

/// Tweets with their gold (or predicted) mentions, sorted and disjoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionDataset {
    pub split: String,
    pub records: Vec<(RawTweet, Vec<MentionSpan>)>,
}

impl ExtractionDataset {
    pub fn new(
        split: impl Into<String>,
        records: Vec<(RawTweet, Vec<MentionSpan>)>,
    ) -> Result<Self> {
        check_unique_ids(records.iter().map(|(t, _)| t))?;
        for (tweet, mentions) in &records {
            validate_mentions(tweet, mentions)?;
        }
        Ok(ExtractionDataset {
            split: split.into(),
            records,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn mention_count(&self) -> usize {
        self.records.iter().map(|(_, m)| m.len()).sum()
    }

    pub fn tweets(&self) -> impl Iterator<Item = &RawTweet> {
        self.records.iter().map(|(t, _)| t)
    }

    /// Span TSV (one line per mention, in record order).
    pub fn spans_tsv(&self) -> String {
        tsv::render(
            &SPANS_HEADER,
            self.records.iter().flat_map(|(t, mentions)| {
                mentions.iter().map(move |m| {
                    vec![
                        tsv::escape(&t.id),
                        m.begin.to_string(),
                        m.end.to_string(),
                        "ADR".to_string(),
                        tsv::escape(&m.surface),
                        tsv::escape(m.code.as_deref().unwrap_or("")),
                        tsv::escape(m.term.as_deref().unwrap_or("")),
                    ]
                })
            }),
        )
    }

    pub fn tweets_tsv(&self) -> String {
        tweets_to_tsv(self.tweets())
    }

    pub fn save(&self, spans_path: &Path, tweets_path: &Path) -> Result<()> {
        tsv::write_string(spans_path, &self.spans_tsv())?;
        tsv::write_string(tweets_path, &self.tweets_tsv())
    }
}

pub fn tweets_to_tsv<'a>(tweets: impl IntoIterator<Item = &'a RawTweet>) -> String {
    tsv::render(
        &TWEETS_HEADER,
        tweets
            .into_iter()
            .map(|t| vec![tsv::escape(&t.id), tsv::escape(&t.text)]),
    )
}

fn check_unique_ids<'a>(tweets: impl Iterator<Item = &'a RawTweet>) -> Result<()> {
    let mut seen = HashSet::new();
    for t in tweets {
        if t.id.is_empty() {
            return Err(Error::Dataset("empty tweet id".into()));
        }
        if t.text.is_empty() {
            return Err(Error::Dataset(format!("tweet `{}` has empty text", t.id)));
        }
        if !seen.insert(t.id.as_str()) {
            return Err(Error::Dataset(format!("duplicate tweet id `{}`", t.id)));
        }
    }
    Ok(())
}

fn validate_mentions(tweet: &RawTweet, mentions: &[MentionSpan]) -> Result<()> {
    let len = tweet.char_len();
    for m in mentions {
        if m.begin >= m.end || m.end > len {
            return Err(Error::Span(format!(
                "tweet `{}`: [{}, {}) outside text of {len} characters",
                tweet.id, m.begin, m.end
            )));
        }
        let actual = char_slice(&tweet.text, m.begin, m.end).unwrap_or("");
        if actual != m.surface {
            return Err(Error::Span(format!(
                "tweet `{}`: surface `{}` does not match text `{actual}` at [{}, {})",
                tweet.id, m.surface, m.begin, m.end
            )));
        }
    }
    for pair in mentions.windows(2) {
        if pair[1].begin < pair[0].begin {
            return Err(Error::Span(format!("tweet `{}`: mentions not sorted", tweet.id)));
        }
        if pair[0].overlaps(&pair[1]) {
            return Err(Error::Span(format!(
                "tweet `{}`: overlapping mentions [{}, {}) and [{}, {})",
                tweet.id, pair[0].begin, pair[0].end, pair[1].begin, pair[1].end
            )));
        }
    }
    Ok(())
}

/// Loads a task-2 file: header `tweet_id\tlabel\ttext`.
pub fn load_task2(path: &Path) -> Result<ClassificationDataset> {
    let contents = tsv::read_to_string(path)?;
    parse_task2(path, &contents)
}

pub fn parse_task2(path: &Path, contents: &str) -> Result<ClassificationDataset> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (line, fields) in tsv::data_lines(path, contents, &TASK2_HEADER)? {
        let tweet = parse_tweet(path, line, fields[0], fields[2])?;
        let label = BinaryLabel::parse(fields[1]).ok_or_else(|| {
            Error::format(path, line, format!("label must be 0 or 1, found `{}`", fields[1]))
        })?;
        if !seen.insert(tweet.id.clone()) {
            return Err(Error::format(path, line, format!("duplicate tweet id `{}`", tweet.id)));
        }
        records.push((tweet, label));
    }
    Ok(ClassificationDataset {
        split: split_name(path),
        records,
    })
}

/// Loads a tweet file (`tweet_id\ttext`) such as the task-3 companion file.
pub fn load_tweets(path: &Path) -> Result<Vec<RawTweet>> {
    let contents = tsv::read_to_string(path)?;
    parse_tweets(path, &contents)
}

pub fn parse_tweets(path: &Path, contents: &str) -> Result<Vec<RawTweet>> {
    let mut seen = HashSet::new();
    let mut tweets = Vec::new();
    for (line, fields) in tsv::data_lines(path, contents, &TWEETS_HEADER)? {
        let tweet = parse_tweet(path, line, fields[0], fields[1])?;
        if !seen.insert(tweet.id.clone()) {
            return Err(Error::format(path, line, format!("duplicate tweet id `{}`", tweet.id)));
        }
        tweets.push(tweet);
    }
    Ok(tweets)
}

fn parse_tweet(path: &Path, line: usize, id: &str, text: &str) -> Result<RawTweet> {
    let id = tsv::unescape(id);
    let text = tsv::unescape(text);
    if id.is_empty() {
        return Err(Error::format(path, line, "empty tweet id"));
    }
    if text.is_empty() {
        return Err(Error::format(path, line, "empty tweet text"));
    }
    Ok(RawTweet { id, text })
}

/// Loads task-3 mentions and joins them onto the tweets of the companion
/// file. Tweets without span lines get no mentions.
pub fn load_task3(spans_path: &Path, tweets_path: &Path) -> Result<ExtractionDataset> {
    let tweets = load_tweets(tweets_path)?;
    let contents = tsv::read_to_string(spans_path)?;
    parse_task3(spans_path, &contents, tweets)
}

pub fn parse_task3(
    spans_path: &Path,
    contents: &str,
    tweets: Vec<RawTweet>,
) -> Result<ExtractionDataset> {
    let index: HashMap<&str, usize> = tweets
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    let lengths: Vec<usize> = tweets.iter().map(RawTweet::char_len).collect();
    let mut mentions: Vec<Vec<(usize, MentionSpan)>> = vec![Vec::new(); tweets.len()];

    for (line, f) in tsv::data_lines(spans_path, contents, &SPANS_HEADER)? {
        let err = |msg: String| Error::format(spans_path, line, msg);
        let id = tsv::unescape(f[0]);
        let &slot = index
            .get(id.as_str())
            .ok_or_else(|| err(format!("tweet `{id}` not in tweet file")))?;
        let begin: usize = f[1]
            .parse()
            .map_err(|_| err(format!("bad begin offset `{}`", f[1])))?;
        let end: usize = f[2]
            .parse()
            .map_err(|_| err(format!("bad end offset `{}`", f[2])))?;
        if f[3] != "ADR" {
            return Err(err(format!("mention type must be ADR, found `{}`", f[3])));
        }
        if begin >= end {
            return Err(err(format!("begin {begin} must be less than end {end}")));
        }
        if end > lengths[slot] {
            return Err(err(format!(
                "span [{begin}, {end}) exceeds text of {} characters",
                lengths[slot]
            )));
        }
        let surface = tsv::unescape(f[4]);
        let actual = char_slice(&tweets[slot].text, begin, end).unwrap_or("");
        if actual != surface {
            return Err(err(format!(
                "extraction `{surface}` does not match text `{actual}` at [{begin}, {end})"
            )));
        }
        let code = Some(tsv::unescape(f[5])).filter(|c| !c.is_empty());
        let term = Some(tsv::unescape(f[6])).filter(|c| !c.is_empty());
        mentions[slot].push((
            line,
            MentionSpan {
                begin,
                end,
                surface,
                code,
                term,
            },
        ));
    }

    let mut records = Vec::with_capacity(tweets.len());
    for (tweet, mut spans) in tweets.into_iter().zip(mentions) {
        spans.sort_by_key(|(_, m)| (m.begin, m.end));
        for pair in spans.windows(2) {
            let (_, a) = &pair[0];
            let (line, b) = &pair[1];
            if a.overlaps(b) {
                return Err(Error::format(
                    spans_path,
                    *line,
                    format!(
                        "mention [{}, {}) overlaps [{}, {}) in tweet `{}`",
                        b.begin, b.end, a.begin, a.end, tweet.id
                    ),
                ));
            }
        }
        records.push((tweet, spans.into_iter().map(|(_, m)| m).collect()));
    }
    Ok(ExtractionDataset {
        split: split_name(spans_path),
        records,
    })
}

fn split_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Number of tweets per label; labels with no tweets are absent.
pub fn class_counts(d: &ClassificationDataset) -> BTreeMap<BinaryLabel, usize> {
    let mut counts = BTreeMap::new();
    for (_, label) in &d.records {
        *counts.entry(*label).or_insert(0) += 1;
    }
    counts
}

/// Number of items kept when keeping `fraction` of `count`, rounded down.
/// A 1e-9 slack absorbs binary representation error (0.57 × 100 is stored
/// as 56.999…).
pub fn kept_count(count: usize, fraction: f64) -> usize {
    ((count as f64 * fraction) + 1e-9).floor().min(count as f64) as usize
}

/// Training-set augmentation: every positive of `base`, every tweet of
/// `extra_positives` whose id is not already in `base`, and a seeded sample
/// without replacement of `floor(neg_keep_fraction × |negatives|)` negatives.
///
/// Output order is base order (filtered) followed by the extra positives.
pub fn augment_task2(
    base: &ClassificationDataset,
    extra_positives: &ClassificationDataset,
    neg_keep_fraction: f64,
    seed: u64,
) -> Result<ClassificationDataset> {
    if !(0.0..=1.0).contains(&neg_keep_fraction) {
        return Err(Error::InvalidArgument(format!(
            "negative keep fraction {neg_keep_fraction} outside [0, 1]"
        )));
    }
    if let Some((t, _)) = extra_positives.records.iter().find(|(_, l)| !l.is_adr()) {
        return Err(Error::Dataset(format!(
            "augmentation tweet `{}` is labelled 0; only ADR tweets may be added",
            t.id
        )));
    }

    let negatives: Vec<usize> = base
        .records
        .iter()
        .enumerate()
        .filter(|(_, (_, l))| !l.is_adr())
        .map(|(i, _)| i)
        .collect();
    let keep = kept_count(negatives.len(), neg_keep_fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep_neg = vec![false; base.records.len()];
    for k in index::sample(&mut rng, negatives.len(), keep) {
        keep_neg[negatives[k]] = true;
    }

    let mut ids: HashSet<&str> = HashSet::new();
    let mut records = Vec::new();
    for (i, (tweet, label)) in base.records.iter().enumerate() {
        ids.insert(tweet.id.as_str());
        if label.is_adr() || keep_neg[i] {
            records.push((tweet.clone(), *label));
        }
    }
    for (tweet, label) in &extra_positives.records {
        if ids.insert(tweet.id.as_str()) {
            records.push((tweet.clone(), *label));
        }
    }
    ClassificationDataset::new(base.split.clone(), records)
}

pub const LABELS_HEADER: [&str; 2] = ["tweet_id", "label"];

/// Predicted tweet labels, `tweet_id\tlabel`, in the given order.
pub fn labels_to_tsv(labels: &[(String, BinaryLabel)]) -> String {
    tsv::render(
        &LABELS_HEADER,
        labels.iter().map(|(id, l)| vec![tsv::escape(id), l.to_string()]),
    )
}

pub fn load_labels(path: &Path) -> Result<BTreeMap<String, BinaryLabel>> {
    let contents = tsv::read_to_string(path)?;
    parse_labels(path, &contents)
}

/// Reads a label file. A task-2 file is accepted too; its text column is
/// ignored.
pub fn parse_labels(path: &Path, contents: &str) -> Result<BTreeMap<String, BinaryLabel>> {
    if contents.lines().next() == Some(TASK2_HEADER.join("\t").as_str()) {
        return Ok(parse_task2(path, contents)?
            .records
            .into_iter()
            .map(|(t, l)| (t.id, l))
            .collect());
    }
    let mut out = BTreeMap::new();
    for (line, f) in tsv::data_lines(path, contents, &LABELS_HEADER)? {
        let id = tsv::unescape(f[0]);
        let label = BinaryLabel::parse(f[1]).ok_or_else(|| Error::format(path, line, format!("bad label `{}`", f[1])))?;
        if out.insert(id.clone(), label).is_some() {
            return Err(Error::format(path, line, format!("duplicate tweet id `{id}`")));
        }
    }
    Ok(out)
}

pub const LEXICON_HEADER: [&str; 2] = ["meddra_code", "meddra_term"];

/// The concept inventory of the normalizer: MedDRA codes in head order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: Vec<(String, String)>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    pub fn new(entries: Vec<(String, String)>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, (code, _)) in entries.iter().enumerate() {
            if code.is_empty() {
                return Err(Error::Dataset("empty concept code in lexicon".into()));
            }
            if index.insert(code.clone(), i).is_some() {
                return Err(Error::Dataset(format!("duplicate concept code `{code}` in lexicon")));
            }
        }
        Ok(Lexicon { entries, index })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    pub fn to_tsv(&self) -> String {
        tsv::render(
            &LEXICON_HEADER,
            self.entries.iter().map(|(c, t)| vec![tsv::escape(c), tsv::escape(t)]),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        tsv::write_string(path, &self.to_tsv())
    }
}

pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    parse_lexicon(path, &tsv::read_to_string(path)?)
}

pub fn parse_lexicon(path: &Path, contents: &str) -> Result<Lexicon> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line, f) in tsv::data_lines(path, contents, &LEXICON_HEADER)? {
        let code = tsv::unescape(f[0]);
        if code.is_empty() || !seen.insert(code.clone()) {
            return Err(Error::format(path, line, format!("empty or duplicate code `{code}`")));
        }
        entries.push((code, tsv::unescape(f[1])));
    }
    Lexicon::new(entries)
}

/// `(surface, code)` for every coded mention, in dataset order.
pub fn coded_mentions(d: &ExtractionDataset) -> Vec<(String, String)> {
    d.records
        .iter()
        .flat_map(|(_, spans)| spans.iter())
        .filter_map(|m| m.code.clone().map(|c| (m.surface.clone(), c)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("mem.tsv")
    }

    #[test]
    fn loads_task2_examples() {
        let src = "tweet_id\tlabel\ttext\nt1\t1\tthank god for vyvanse #addicted\nt2\t0\tnever take paxil #js\n";
        let d = parse_task2(p(), src).unwrap();
        assert_eq!(d.len(), 2);
        let counts = class_counts(&d);
        assert_eq!(counts[&BinaryLabel::Adr], 1);
        assert_eq!(counts[&BinaryLabel::NonAdr], 1);
        assert_eq!(d.to_tsv(), src);
    }

    #[test]
    fn header_only_is_empty() {
        let d = parse_task2(p(), "tweet_id\tlabel\ttext\n").unwrap();
        assert!(d.is_empty());
        assert!(class_counts(&d).is_empty());
    }

    #[test]
    fn bad_label_names_line() {
        let src = "tweet_id\tlabel\ttext\nt1\t1\tok\nt2\t2\tbad\n";
        match parse_task2(p(), src) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_id_rejected() {
        let src = "tweet_id\tlabel\ttext\nt1\t1\ta\nt1\t0\tb\n";
        assert!(matches!(parse_task2(p(), src), Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn wrong_field_count_rejected() {
        let src = "tweet_id\tlabel\ttext\nt1\t1\n";
        assert!(matches!(parse_task2(p(), src), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn escaped_text_round_trips() {
        let src = "tweet_id\tlabel\ttext\nt1\t0\tline one\\nline\\ttwo\n";
        let d = parse_task2(p(), src).unwrap();
        assert_eq!(d.records[0].0.text, "line one\nline\ttwo");
        assert_eq!(d.to_tsv(), src);
    }

    const CIPRO: &str = "@coolpharmgreg i don't care if they are toxic haha putting the cipro drops in is essentially equivalent to torture #oww";

    fn cipro_tweets() -> Vec<RawTweet> {
        vec![RawTweet::new("t9", CIPRO), RawTweet::new("t10", "never take paxil #js")]
    }

    #[test]
    fn task3_mention_with_code() {
        assert_eq!(char_slice(CIPRO, 40, 45), Some("toxic"));
        let spans = "tweet_id\tbegin\tend\ttype\textraction\tmeddra_code\tmeddra_term\n\
                     t9\t40\t45\tADR\ttoxic\t10013746\tdrug toxicity\n";
        let d = parse_task3(p(), spans, cipro_tweets()).unwrap();
        assert_eq!(d.records[0].1.len(), 1);
        let m = &d.records[0].1[0];
        assert_eq!(m.code.as_deref(), Some("10013746"));
        assert_eq!(m.term.as_deref(), Some("drug toxicity"));
        assert!(d.records[1].1.is_empty());
        assert_eq!(d.spans_tsv(), spans);
    }

    #[test]
    fn task3_rejects_bad_spans() {
        let header = "tweet_id\tbegin\tend\ttype\textraction\tmeddra_code\tmeddra_term\n";
        for line in [
            "t9\t45\t40\tADR\ttoxic\t1\tx\n",
            "t9\t40\t40\tADR\t\t1\tx\n",
            "t9\t40\t500\tADR\ttoxic\t1\tx\n",
            "t9\t40\t45\tADR\ttoxin\t1\tx\n",
            "t9\t40\t45\tDrug\ttoxic\t1\tx\n",
            "t77\t0\t1\tADR\tx\t1\tx\n",
        ] {
            let src = format!("{header}{line}");
            assert!(parse_task3(p(), &src, cipro_tweets()).is_err(), "{line}");
        }
    }

    #[test]
    fn task3_rejects_overlap_and_sorts() {
        let header = "tweet_id\tbegin\tend\ttype\textraction\tmeddra_code\tmeddra_term\n";
        let overlap = format!("{header}t9\t40\t45\tADR\ttoxic\t1\tx\nt9\t42\t50\tADR\txic hah\t1\tx\n");
        assert!(parse_task3(p(), &overlap, cipro_tweets()).is_err());
        let unsorted = format!("{header}t9\t116\t119\tADR\toww\t10033371\tpain\nt9\t40\t45\tADR\ttoxic\t1\tx\n");
        let d = parse_task3(p(), &unsorted, cipro_tweets()).unwrap();
        assert_eq!(d.records[0].1[0].begin, 40);
        assert_eq!(d.records[0].1[1].surface, "oww");
    }

    fn synthetic(pos: usize, neg: usize, prefix: &str) -> ClassificationDataset {
        let records = (0..pos)
            .map(|i| (RawTweet::new(format!("{prefix}p{i}"), "x"), BinaryLabel::Adr))
            .chain((0..neg).map(|i| (RawTweet::new(format!("{prefix}n{i}"), "y"), BinaryLabel::NonAdr)))
            .collect();
        ClassificationDataset::new("train", records).unwrap()
    }

    #[test]
    fn augmentation_counts() {
        let base = synthetic(1903, 18641, "");
        let extra = synthetic(0, 0, "x");
        let out = augment_task2(&base, &extra, 0.9, 7).unwrap();
        let counts = class_counts(&out);
        assert_eq!(counts[&BinaryLabel::NonAdr], 16776);
        assert_eq!(counts[&BinaryLabel::Adr], 1903);
    }

    #[test]
    fn augmentation_fraction_bounds() {
        let base = synthetic(3, 10, "");
        let extra = synthetic(2, 0, "x");
        let all = augment_task2(&base, &extra, 1.0, 1).unwrap();
        assert_eq!(all.len(), 15);
        let all2 = augment_task2(&base, &extra, 1.0, 99).unwrap();
        assert_eq!(all, all2);
        let none = augment_task2(&base, &extra, 0.0, 1).unwrap();
        assert_eq!(class_counts(&none).get(&BinaryLabel::NonAdr), None);
        assert_eq!(none.len(), 5);
    }

    #[test]
    fn augmentation_dedupes_base_wins() {
        let base = ClassificationDataset::new(
            "b",
            vec![(RawTweet::new("a", "base text"), BinaryLabel::Adr)],
        )
        .unwrap();
        let extra = ClassificationDataset::new(
            "e",
            vec![
                (RawTweet::new("a", "extra text"), BinaryLabel::Adr),
                (RawTweet::new("b", "new"), BinaryLabel::Adr),
            ],
        )
        .unwrap();
        let out = augment_task2(&base, &extra, 1.0, 0).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.records[0].0.text, "base text");
    }

    #[test]
    fn augmentation_rejects_negative_extra() {
        let base = synthetic(1, 1, "");
        let extra = synthetic(1, 1, "x");
        assert!(augment_task2(&base, &extra, 0.5, 0).is_err());
    }

    #[test]
    fn kept_count_floors() {
        assert_eq!(kept_count(18641, 0.9), 16776);
        assert_eq!(kept_count(100, 0.57), 57);
        assert_eq!(kept_count(7, 0.5), 3);
        assert_eq!(kept_count(0, 0.9), 0);
    }

    #[test]
    fn char_slice_unicode() {
        assert_eq!(char_slice("a😀bc", 1, 3), Some("😀b"));
        assert_eq!(char_slice("abc", 2, 3), Some("c"));
        assert_eq!(char_slice("abc", 2, 4), None);
        assert_eq!(char_slice("abc", 1, 1), None);
    }

    #[test]
    fn lexicon_round_trip_and_duplicates() {
        let src = "meddra_code\tmeddra_term\n10033371\tpain\n10013746\tdrug toxicity\n";
        let lex = parse_lexicon(p(), src).unwrap();
        assert_eq!(lex.len(), 2);
        assert_eq!(lex.index_of("10013746"), Some(1));
        assert_eq!(lex.to_tsv(), src);
        let dup = "meddra_code\tmeddra_term\n1\ta\n1\tb\n";
        assert!(matches!(parse_lexicon(p(), dup), Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn label_files() {
        let labels = vec![("t2".to_string(), BinaryLabel::NonAdr), ("t1".to_string(), BinaryLabel::Adr)];
        let text = labels_to_tsv(&labels);
        assert_eq!(text, "tweet_id\tlabel\nt2\t0\nt1\t1\n");
        let back = parse_labels(p(), &text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back["t1"], BinaryLabel::Adr);
        let task2 = "tweet_id\tlabel\ttext\nt1\t1\tthank god for vyvanse #addicted\n";
        assert_eq!(parse_labels(p(), task2).unwrap()["t1"], BinaryLabel::Adr);
        assert!(parse_labels(p(), "tweet_id\tlabel\nt1\tx\n").is_err());
        assert!(parse_labels(p(), "tweet_id\tlabel\nt1\t1\nt1\t0\n").is_err());
    }
}
