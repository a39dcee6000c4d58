//! Precision, recall and F1 for tweet classification and mention spans.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::corpus::{BinaryLabel, MentionSpan};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Classification,
    Ner,
    NerNorm,
}

impl Mode {
    /// Decimals shown for percentages: whole percent for tweet
    /// classification, one decimal for span scores.
    pub fn display_decimals(self) -> u32 {
        match self {
            Mode::Classification => 0,
            Mode::Ner | Mode::NerNorm => 1,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "classification" => Some(Mode::Classification),
            "ner" => Some(Mode::Ner),
            "ner+norm" => Some(Mode::NerNorm),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Classification => "classification",
            Mode::Ner => "ner",
            Mode::NerNorm => "ner+norm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatchType {
    Strict,
    Relaxed,
    NotApplicable,
}

impl MatchType {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strict" => Some(MatchType::Strict),
            "relaxed" => Some(MatchType::Relaxed),
            "n/a" => Some(MatchType::NotApplicable),
            _ => None,
        }
    }
}

impl fmt::Display for MatchType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchType::Strict => "strict",
            MatchType::Relaxed => "relaxed",
            MatchType::NotApplicable => "n/a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub mode: Mode,
    pub match_type: MatchType,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_counts(mode: Mode, match_type: MatchType, tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        EvalReport {
            mode,
            match_type,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1(precision, recall).expect("ratios lie in [0, 1]"),
        }
    }

    /// Precision, recall and F1 as percentages rounded half-up for display.
    pub fn display_percentages(&self) -> [String; 3] {
        let d = self.mode.display_decimals();
        [self.precision, self.recall, self.f1].map(|x| format_percent(x, d))
    }

    pub fn tsv_header() -> &'static str {
        "mode\tmatch\ttp\tfp\tfn\tP\tR\tF1"
    }

    pub fn tsv_row(&self) -> String {
        let [p, r, f] = self.display_percentages();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{p}\t{r}\t{f}",
            self.mode, self.match_type, self.tp, self.fp, self.fn_
        )
    }

    pub fn to_tsv(reports: &[EvalReport]) -> String {
        let mut out = format!("{}\n", Self::tsv_header());
        for r in reports {
            out.push_str(&r.tsv_row());
            out.push('\n');
        }
        out
    }

    /// Aligned text table for terminals.
    pub fn to_table(reports: &[EvalReport]) -> String {
        let mut rows = vec![["mode", "match", "TP", "FP", "FN", "P", "R", "F1"].map(String::from).to_vec()];
        for r in reports {
            let [p, rc, f] = r.display_percentages();
            rows.push(vec![
                r.mode.to_string(),
                r.match_type.to_string(),
                r.tp.to_string(),
                r.fp.to_string(),
                r.fn_.to_string(),
                p,
                rc,
                f,
            ]);
        }
        let widths: Vec<usize> = (0..8).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for row in rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| if c < 2 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
                .collect();
            out.push_str(cells.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1(p: f64, r: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&r) {
        return Err(Error::Eval(format!("precision {p} and recall {r} must lie in [0, 1]")));
    }
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Rounds half away from zero at `decimals` places (inputs are nonnegative
/// here). The nudge absorbs binary representation error at exact halves.
pub fn round_half_up(x: f64, decimals: u32) -> f64 {
    let scale = 10f64.powi(decimals as i32);
    (x * scale + 0.5 + 1e-9).floor() / scale
}

/// `x` in [0, 1] as a percentage string with `decimals` places.
pub fn format_percent(x: f64, decimals: u32) -> String {
    format!("{:.*}", decimals as usize, round_half_up(x * 100.0, decimals))
}

/// Label 1 is the positive class.
pub fn score_classification(
    preds: &BTreeMap<String, BinaryLabel>,
    gold: &BTreeMap<String, BinaryLabel>,
) -> Result<EvalReport> {
    let p: BTreeSet<&String> = preds.keys().collect();
    let g: BTreeSet<&String> = gold.keys().collect();
    if p != g {
        let diff: Vec<&str> = p.symmetric_difference(&g).map(|s| s.as_str()).collect();
        return Err(Error::Eval(format!(
            "prediction and gold ids differ: {}",
            diff.join(", ")
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (id, &y) in gold {
        match (preds[id].is_adr(), y.is_adr()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(EvalReport::from_counts(Mode::Classification, MatchType::NotApplicable, tp, fp, fn_))
}

pub fn match_spans(pred: &MentionSpan, gold: &MentionSpan, match_type: MatchType, with_norm: bool) -> bool {
    let span_ok = match match_type {
        MatchType::Strict => pred.begin == gold.begin && pred.end == gold.end,
        MatchType::Relaxed | MatchType::NotApplicable => pred.begin.max(gold.begin) < pred.end.min(gold.end),
    };
    span_ok && (!with_norm || pred.code == gold.code)
}

/// Greedy one-to-one matching per tweet: predictions in begin order, each
/// taking the first unmatched compatible gold span. Tweets missing from one
/// side count as having no spans there.
pub fn score_ner(
    preds: &BTreeMap<String, Vec<MentionSpan>>,
    gold: &BTreeMap<String, Vec<MentionSpan>>,
    match_type: MatchType,
    with_norm: bool,
) -> EvalReport {
    let ids: BTreeSet<&String> = preds.keys().chain(gold.keys()).collect();
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for id in ids {
        let p = preds.get(id).map(Vec::as_slice).unwrap_or_default();
        let g = gold.get(id).map(Vec::as_slice).unwrap_or_default();
        let matched = greedy_matches(p, g, match_type, with_norm);
        tp += matched;
        fp += p.len() - matched;
        fn_ += g.len() - matched;
    }
    let mode = if with_norm { Mode::NerNorm } else { Mode::Ner };
    EvalReport::from_counts(mode, match_type, tp, fp, fn_)
}

fn greedy_matches(pred: &[MentionSpan], gold: &[MentionSpan], match_type: MatchType, with_norm: bool) -> usize {
    let mut p: Vec<&MentionSpan> = pred.iter().collect();
    p.sort_by_key(|s| (s.begin, s.end));
    let mut g: Vec<&MentionSpan> = gold.iter().collect();
    g.sort_by_key(|s| (s.begin, s.end));
    let mut used = vec![false; g.len()];
    let mut n = 0;
    for ps in p {
        if let Some(j) = (0..g.len()).find(|&j| !used[j] && match_spans(ps, g[j], match_type, with_norm)) {
            used[j] = true;
            n += 1;
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn span(b: usize, e: usize, code: Option<&str>) -> MentionSpan {
        MentionSpan {
            begin: b,
            end: e,
            surface: "x".repeat(e - b),
            code: code.map(String::from),
            term: None,
        }
    }

    #[test]
    fn f1_examples() {
        assert!((f1(0.52, 0.65).unwrap() - 0.577_777_777_8).abs() < 1e-9);
        assert_eq!(format_percent(f1(0.52, 0.65).unwrap(), 0), "58");
        assert!((f1(0.630, 0.789).unwrap() - 0.700_591_966_2).abs() < 1e-9);
        assert_eq!(format_percent(f1(0.630, 0.789).unwrap(), 1), "70.1");
        assert_eq!(f1(0.0, 0.0).unwrap(), 0.0);
        assert!(f1(1.2, 0.5).is_err());
        assert!(f1(0.5, -0.1).is_err());
    }

    #[test]
    fn table_count_fixtures() {
        let r = EvalReport::from_counts(Mode::Classification, MatchType::NotApplicable, 1300, 1200, 700);
        assert_eq!(r.display_percentages(), ["52", "65", "58"]);
        let r = EvalReport::from_counts(Mode::Ner, MatchType::Relaxed, 497_070, 291_930, 132_930);
        assert_eq!(r.display_percentages(), ["63.0", "78.9", "70.1"]);
    }

    #[test]
    fn half_up() {
        assert_eq!(round_half_up(0.5, 0), 1.0);
        assert_eq!(round_half_up(70.05, 1), 70.1);
        assert_eq!(round_half_up(57.49, 0), 57.0);
    }

    #[test]
    fn classification_counts() {
        let ids = |v: &[u8]| -> BTreeMap<String, BinaryLabel> {
            v.iter().enumerate().map(|(i, &y)| (format!("t{i}"), BinaryLabel::from_bool(y == 1))).collect()
        };
        let gold = ids(&[1, 1, 1, 1, 1, 0]);
        let pred = ids(&[1, 1, 0, 0, 0, 1]);
        let r = score_classification(&pred, &gold).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (2, 1, 3));
        assert!((r.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 0.4).abs() < 1e-12);
        assert!((r.f1 - 0.5).abs() < 1e-12);

        let r = score_classification(&gold, &gold).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        let r = score_classification(&ids(&[0; 6]), &gold).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));

        let mut short = gold.clone();
        short.remove("t0");
        let err = score_classification(&short, &gold).unwrap_err();
        assert!(err.to_string().contains("t0"));
    }

    #[test]
    fn span_matching() {
        let (a, b, c) = (span(5, 10, None), span(7, 12, None), span(10, 15, None));
        assert!(match_spans(&a, &b, MatchType::Relaxed, false));
        assert!(!match_spans(&a, &b, MatchType::Strict, false));
        assert!(!match_spans(&a, &c, MatchType::Relaxed, false));
        let (x, y, z) = (span(5, 10, Some("10033371")), span(5, 10, Some("10033371")), span(5, 10, Some("1")));
        assert!(match_spans(&x, &y, MatchType::Strict, true));
        assert!(!match_spans(&x, &z, MatchType::Strict, true));
        assert!(match_spans(&x, &z, MatchType::Strict, false));
    }

    #[test]
    fn ner_scoring() {
        let gold = BTreeMap::from([("t".to_string(), vec![span(0, 4, None), span(10, 14, None)])]);
        let pred = BTreeMap::from([("t".to_string(), vec![span(0, 4, None), span(20, 24, None)])]);
        let r = score_ner(&pred, &gold, MatchType::Strict, false);
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));

        let r = score_ner(&BTreeMap::new(), &gold, MatchType::Relaxed, false);
        assert_eq!((r.tp, r.fp, r.fn_, r.precision, r.recall), (0, 0, 2, 0.0, 0.0));
    }

    #[test]
    fn tsv_and_table() {
        let r = EvalReport::from_counts(Mode::NerNorm, MatchType::Strict, 1, 1, 1);
        assert_eq!(r.tsv_row(), "ner+norm\tstrict\t1\t1\t1\t50.0\t50.0\t50.0");
        assert!(EvalReport::to_table(&[r]).contains("ner+norm"));
    }
}
