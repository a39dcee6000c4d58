//! Lookup tables for tweet normalization, stored as `key\treplacement` TSV
//! files without a header. The shipped tables live in `resources/` and are
//! compiled into the crate; [`ResourceTables::load_dir`] reads replacements.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tsv;

use super::squeeze_runs;

const CONTRACTIONS: &str = include_str!("../../resources/contractions.tsv");
const INTERJECTIONS: &str = include_str!("../../resources/interjections.tsv");
const SMILEYS: &str = include_str!("../../resources/smileys.tsv");
const EMOJI: &str = include_str!("../../resources/emoji.tsv");

pub const TABLE_FILES: [&str; 4] = [
    "contractions.tsv",
    "interjections.tsv",
    "smileys.tsv",
    "emoji.tsv",
];

#[derive(Debug, Clone)]
pub struct ResourceTables {
    /// Keyed by lowercase, run-squeezed form with `'` apostrophes.
    pub contractions: HashMap<String, String>,
    /// Keyed by lowercase, run-squeezed form.
    pub interjections: HashMap<String, String>,
    /// Keyed by lowercase form.
    pub smileys: HashMap<String, String>,
    pub emoji: HashMap<Vec<char>, String>,
    pub(crate) smiley_max_len: usize,
    pub(crate) emoji_max_len: usize,
    pub(crate) emoji_chars: HashSet<char>,
}

impl ResourceTables {
    /// The tables shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_sources(
            ("contractions.tsv", CONTRACTIONS),
            ("interjections.tsv", INTERJECTIONS),
            ("smileys.tsv", SMILEYS),
            ("emoji.tsv", EMOJI),
        )
        .expect("builtin resource tables are valid")
    }

    /// Reads the four table files from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| tsv::read_to_string(&dir.join(name));
        let c = read(TABLE_FILES[0])?;
        let i = read(TABLE_FILES[1])?;
        let s = read(TABLE_FILES[2])?;
        let e = read(TABLE_FILES[3])?;
        Self::from_sources(
            (&dir.join(TABLE_FILES[0]).to_string_lossy(), &c),
            (&dir.join(TABLE_FILES[1]).to_string_lossy(), &i),
            (&dir.join(TABLE_FILES[2]).to_string_lossy(), &s),
            (&dir.join(TABLE_FILES[3]).to_string_lossy(), &e),
        )
    }

    fn from_sources(
        contractions: (&str, &str),
        interjections: (&str, &str),
        smileys: (&str, &str),
        emoji: (&str, &str),
    ) -> Result<Self> {
        let mut interj = HashMap::new();
        for (line, key, value) in pairs(interjections.0, interjections.1)? {
            let key = squeeze_runs(&key.to_ascii_lowercase());
            if !key.chars().all(|c| c.is_ascii_alphanumeric()) {
                return Err(Error::format(interjections.0, line, "interjection keys must be alphanumeric"));
            }
            interj.insert(key, check_value(interjections.0, line, value)?);
        }

        let mut contr = HashMap::new();
        for (line, key, value) in pairs(contractions.0, contractions.1)? {
            let key = squeeze_runs(&key.replace(['\u{2019}', '\u{2018}'], "'").to_ascii_lowercase());
            let valid = key.chars().all(|c| c.is_ascii_alphanumeric() || c == '\'')
                && key.starts_with(|c: char| c.is_ascii_alphanumeric())
                && key.ends_with(|c: char| c.is_ascii_alphanumeric())
                && key.contains('\'');
            if !valid {
                return Err(Error::format(
                    contractions.0,
                    line,
                    "contraction keys must be words with an inner apostrophe",
                ));
            }
            contr.insert(key, check_value(contractions.0, line, value)?);
        }

        let mut smiley = HashMap::new();
        for (line, key, value) in pairs(smileys.0, smileys.1)? {
            let key = key.to_ascii_lowercase();
            let valid = key.is_ascii()
                && !key.chars().any(|c| c.is_whitespace() || c == '#')
                && key.chars().any(|c| c.is_ascii_punctuation());
            if !valid {
                return Err(Error::format(smileys.0, line, "smiley keys must be ASCII punctuation sequences"));
            }
            smiley.insert(key, check_value(smileys.0, line, value)?);
        }

        let mut emo = HashMap::new();
        for (line, key, value) in pairs(emoji.0, emoji.1)? {
            let seq = key
                .split_whitespace()
                .map(|hex| u32::from_str_radix(hex, 16).ok().and_then(char::from_u32))
                .collect::<Option<Vec<char>>>()
                .filter(|s| !s.is_empty() && s.iter().all(|c| !c.is_ascii()))
                .ok_or_else(|| Error::format(emoji.0, line, format!("bad codepoint sequence `{key}`")))?;
            emo.insert(seq, check_value(emoji.0, line, value)?);
        }

        // A replacement that is itself an interjection would change on a
        // second pass.
        let all_values = contr.values().chain(smiley.values()).chain(emo.values()).chain(interj.values());
        for v in all_values {
            if let Some(w) = v.split(' ').find(|w| interj.contains_key(&squeeze_runs(w))) {
                return Err(Error::InvalidArgument(format!(
                    "replacement `{v}` contains interjection `{w}`"
                )));
            }
        }

        Ok(ResourceTables {
            smiley_max_len: smiley.keys().map(|k| k.chars().count()).max().unwrap_or(0),
            emoji_max_len: emo.keys().map(Vec::len).max().unwrap_or(0),
            emoji_chars: emo.keys().flatten().copied().collect(),
            contractions: contr,
            interjections: interj,
            smileys: smiley,
            emoji: emo,
        })
    }
}

fn pairs<'a>(name: &str, contents: &'a str) -> Result<Vec<(usize, String, &'a str)>> {
    let mut out = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::format(name, i + 1, "expected `key\\treplacement`"))?;
        let key = tsv::unescape(key);
        if key.is_empty() {
            return Err(Error::format(name, i + 1, "empty key"));
        }
        out.push((i + 1, key, value));
    }
    Ok(out)
}

fn check_value(name: &str, line: usize, value: &str) -> Result<String> {
    let ok = !value.is_empty()
        && value.chars().all(|c| c.is_ascii_lowercase() || c == ' ')
        && value.split(' ').all(|w| !w.is_empty())
        && squeeze_runs(value) == value;
    if ok {
        Ok(value.to_string())
    } else {
        Err(Error::format(
            name,
            line,
            format!("replacement `{value}` must be lowercase words separated by single spaces"),
        ))
    }
}
