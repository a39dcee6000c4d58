use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adrmine::corpus::{
    augment_task2, class_counts, coded_mentions, labels_to_tsv, load_labels, load_lexicon, load_task2, load_task3,
    parse_task2, parse_tweets, tweets_to_tsv, BinaryLabel, ClassificationDataset, ExtractionDataset, Lexicon,
    MentionSpan, RawTweet, TASK2_HEADER,
};
use adrmine::encoder::{Checkpoint, EncoderConfig};
use adrmine::eval::{score_classification, score_ner, EvalReport, MatchType, Mode};
use adrmine::pipeline::Model;
use adrmine::preprocess::{normalize, ResourceTables};
use adrmine::synthetic;
use adrmine::tokenize::{train_vocab, Vocab};
use adrmine::train::{
    prepare_classification, prepare_extraction, prepare_normalization, train_classifier, train_extractor,
    train_extractor_mtl, train_normalizer, Hyperparams, Task, TrainOutput,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::failure::Failure;

type Outcome<T = ()> = Result<T, Failure>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents).map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

fn existing(path: &Path) -> Outcome<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::usage(format!("{} does not exist", path.display())))
    }
}

fn tables(dir: Option<&Path>) -> Outcome<ResourceTables> {
    match dir {
        Some(d) => Ok(ResourceTables::load_dir(existing(d)?)?),
        None => Ok(ResourceTables::builtin()),
    }
}

/// Tweets from a task-2 file (labels kept) or a plain tweet file.
fn read_tweets(path: &Path) -> Outcome<(Vec<RawTweet>, Option<Vec<BinaryLabel>>)> {
    let text = std::fs::read_to_string(existing(path)?)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    if text.lines().next() == Some(TASK2_HEADER.join("\t").as_str()) {
        let d = parse_task2(path, &text)?;
        let (tweets, labels) = d.records.into_iter().unzip();
        Ok((tweets, Some(labels)))
    } else {
        Ok((parse_tweets(path, &text)?, None))
    }
}

pub fn preprocess(input: &Path, output: &Path, resources: Option<&Path>) -> Outcome<String> {
    let tables = tables(resources)?;
    let (tweets, labels) = read_tweets(input)?;
    let normalized: Vec<RawTweet> = tweets
        .par_iter()
        .map(|t| RawTweet::new(t.id.clone(), normalize(t, &tables).text))
        .collect();
    let contents = match labels {
        Some(labels) => ClassificationDataset {
            split: String::new(),
            records: normalized.into_iter().zip(labels).collect(),
        }
        .to_tsv(),
        None => tweets_to_tsv(&normalized),
    };
    write_file(output, contents)?;
    Ok(format!("normalized {} tweets into {}", tweets.len(), output.display()))
}

pub fn build_vocab(inputs: &[PathBuf], output: &Path, size: usize, resources: Option<&Path>) -> Outcome<String> {
    let tables = tables(resources)?;
    let mut texts = Vec::new();
    for input in inputs {
        let (tweets, _) = read_tweets(input)?;
        texts.par_extend(tweets.par_iter().map(|t| normalize(t, &tables).text));
    }
    let vocab = train_vocab(&texts, size)?;
    vocab.save(output)?;
    Ok(format!(
        "vocabulary of {} entries ({} merges) written to {}",
        vocab.len(),
        vocab.merges().len(),
        output.display()
    ))
}

pub fn augment(base: &Path, extra: Option<&Path>, fraction: f64, seed: u64, output: &Path) -> Outcome<String> {
    let base = load_task2(existing(base)?)?;
    let extra = match extra {
        Some(p) => load_task2(existing(p)?)?,
        None => ClassificationDataset::default(),
    };
    let out = augment_task2(&base, &extra, fraction, seed)?;
    write_file(output, out.to_tsv())?;
    let counts = class_counts(&out);
    let n = |l| counts.get(&l).copied().unwrap_or(0);
    Ok(format!(
        "{} tweets ({} ADR, {} non-ADR) written to {}",
        out.len(),
        n(BinaryLabel::Adr),
        n(BinaryLabel::NonAdr),
        output.display()
    ))
}

fn parse_task(cfg: &RunConfig) -> Outcome<Task> {
    let t = cfg.require("task")?;
    Task::parse(t).ok_or_else(|| Failure::usage(format!("unknown task `{t}` (classify, extract, normalize)")))
}

/// Lexicon from file, or the distinct codes of the training mentions.
fn lexicon_for(cfg: &RunConfig, data: &ExtractionDataset) -> Outcome<Lexicon> {
    if let Some(p) = cfg.input_path("lexicon")? {
        return Ok(load_lexicon(&p)?);
    }
    let mut codes: BTreeMap<String, String> = BTreeMap::new();
    for m in data.records.iter().flat_map(|(_, s)| s) {
        if let Some(c) = &m.code {
            let term = m.term.clone().unwrap_or_default();
            codes.entry(c.clone()).or_insert(term);
        }
    }
    Ok(Lexicon::new(codes.into_iter().collect())?)
}

/// Encoder and optimizer settings: task defaults (or a preset), then every
/// explicit key.
fn settings(cfg: &RunConfig, task: Task, vocab_size: usize, n_concepts: usize) -> Outcome<(EncoderConfig, Hyperparams)> {
    let mtl = cfg.flag("mtl")?.unwrap_or(true);
    let (mut enc, mut hp) = match cfg.get("preset") {
        None => (
            EncoderConfig::default(),
            if task == Task::Extract && !mtl {
                Hyperparams::single_task_extractor()
            } else {
                Hyperparams::for_task(task)
            },
        ),
        Some("synthetic") => synthetic::preset(task, vocab_size, n_concepts),
        Some(p) => return Err(Failure::usage(format!("unknown preset `{p}` (synthetic)"))),
    };
    enc.vocab_size = vocab_size;
    enc.n_concepts = if task == Task::Normalize { n_concepts } else { 0 };
    macro_rules! apply {
        ($target:expr, $($key:ident),*) => {
            $(if let Some(v) = cfg.num(stringify!($key))? { $target.$key = v; })*
        };
    }
    apply!(hp, learning_rate, batch_size, epochs, lambda, weight_decay, beta1, beta2, eps, seed, eval_every);
    apply!(enc, d_model, n_layers, n_heads, ffn, max_len, dropout);
    hp.validate()?;
    enc.validate()?;
    Ok((enc, hp))
}

pub fn train(cfg: &RunConfig) -> Outcome<String> {
    let task = parse_task(cfg)?;
    let tables = tables(cfg.input_path("resources")?.as_deref())?;
    let vocab = Vocab::load(&cfg.require_input_path("vocab")?)?;
    let data_path = cfg.require_input_path("data")?;
    let checkpoint_path = cfg.require_path("checkpoint")?;
    let log_path = cfg.path("log").unwrap_or_else(|| checkpoint_path.with_extension("log.csv"));
    let mtl = cfg.flag("mtl")?.unwrap_or(true);

    let (out, enc, concepts, hp): (TrainOutput, EncoderConfig, Vec<(String, String)>, Hyperparams) = match task {
        Task::Classify => {
            let data = load_task2(&data_path)?;
            let (enc, hp) = settings(cfg, task, vocab.len(), 0)?;
            let ex = prepare_classification(&data, &tables, &vocab, enc.max_len);
            (train_classifier(&ex, &hp, &enc)?, enc, Vec::new(), hp)
        }
        Task::Extract => {
            let data = load_task3(&data_path, &cfg.require_input_path("tweets")?)?;
            let (enc, hp) = settings(cfg, task, vocab.len(), 0)?;
            let ex = prepare_extraction(&data, &tables, &vocab, enc.max_len)?;
            let out = if mtl {
                train_extractor_mtl(&ex, &hp, &enc)?
            } else {
                train_extractor(&ex, &hp, &enc)?
            };
            (out, enc, Vec::new(), hp)
        }
        Task::Normalize => {
            let data = load_task3(&data_path, &cfg.require_input_path("tweets")?)?;
            let lexicon = lexicon_for(cfg, &data)?;
            let (enc, hp) = settings(cfg, task, vocab.len(), lexicon.len())?;
            let ex = prepare_normalization(&coded_mentions(&data), &lexicon, &tables, &vocab, enc.max_len)?;
            (train_normalizer(&ex, &hp, &enc)?, enc, lexicon.entries().to_vec(), hp)
        }
    };

    let ckpt = Checkpoint {
        task,
        config: enc,
        vocab_fingerprint: vocab.fingerprint(),
        concepts,
        params: out.params,
    };
    write_file(&checkpoint_path, ckpt.to_bytes())?;
    write_file(&log_path, out.log.to_csv())?;
    let last = out.log.rows.last().expect("epoch 0 row");
    let metric = last.metric.map(|m| format!(" metric={m:.6}")).unwrap_or_default();
    Ok(format!(
        "task={task} lambda={} epochs={} seed={} loss={:.6}{metric}\ncheckpoint {}\nlog {}",
        hp.lambda,
        hp.epochs,
        hp.seed,
        last.loss,
        checkpoint_path.display(),
        log_path.display()
    ))
}

/// Refuses a checkpoint whose task or encoder settings disagree with the
/// run configuration.
fn check_against_config(cfg: &RunConfig, ckpt: &Checkpoint) -> Outcome {
    if cfg.has("task") {
        let task = parse_task(cfg)?;
        if task != ckpt.task {
            return Err(Failure::mismatch(format!(
                "configuration is for {task}, checkpoint was trained to {}",
                ckpt.task
            )));
        }
    }
    let c = &ckpt.config;
    let fields: [(&str, f64); 6] = [
        ("d_model", c.d_model as f64),
        ("n_layers", c.n_layers as f64),
        ("n_heads", c.n_heads as f64),
        ("ffn", c.ffn as f64),
        ("max_len", c.max_len as f64),
        ("dropout", c.dropout),
    ];
    for (key, have) in fields {
        if let Some(want) = cfg.num::<f64>(key)? {
            if want != have {
                return Err(Failure::mismatch(format!(
                    "configuration sets {key} = {want}, checkpoint has {have}"
                )));
            }
        }
    }
    Ok(())
}

fn load_model(path: &Path, vocab: &Vocab, tables: &ResourceTables) -> Outcome<Model> {
    let ckpt = Checkpoint::load(path)?;
    Model::new(ckpt, vocab.clone(), tables.clone()).map_err(|e| Failure::mismatch(format!("{}: {e}", path.display())))
}

pub fn predict(cfg: &RunConfig) -> Outcome<String> {
    let checkpoint_path = cfg.require_input_path("checkpoint")?;
    let vocab = Vocab::load(&cfg.require_input_path("vocab")?)?;
    let input = cfg.require_input_path("input")?;
    let output = cfg.require_path("output")?;
    let normalizer_path = cfg.input_path("normalizer")?;
    let tables = tables(cfg.input_path("resources")?.as_deref())?;

    let model = load_model(&checkpoint_path, &vocab, &tables)?;
    check_against_config(cfg, &model.checkpoint)?;
    let (tweets, _) = read_tweets(&input)?;
    let contents = match model.task() {
        Task::Classify => {
            let labels = tweets
                .par_iter()
                .map(|t| Ok((t.id.clone(), model.classify(t)?)))
                .collect::<adrmine::Result<Vec<_>>>()?;
            labels_to_tsv(&labels)
        }
        Task::Extract => {
            let normalizer = match &normalizer_path {
                Some(p) => Some(load_model(p, &vocab, &tables)?),
                None => None,
            };
            if let Some(n) = &normalizer {
                if n.task() != Task::Normalize {
                    return Err(Failure::mismatch(format!("normalizer checkpoint is a {} model", n.task())));
                }
            }
            let records = tweets
                .par_iter()
                .map(|t| Ok((t.clone(), model.extract(t, normalizer.as_ref())?)))
                .collect::<adrmine::Result<Vec<(RawTweet, Vec<MentionSpan>)>>>()?;
            ExtractionDataset::new("predictions", records)?.spans_tsv()
        }
        Task::Normalize => {
            return Err(Failure::usage(
                "a normalize checkpoint is applied to extracted mentions; pass it as `normalizer` with an extract checkpoint",
            ))
        }
    };
    write_file(&output, contents)?;
    Ok(format!("{} tweets predicted into {}", tweets.len(), output.display()))
}

pub struct EvalArgs<'a> {
    pub mode: &'a str,
    pub match_type: &'a str,
    pub pred: &'a Path,
    pub gold: &'a Path,
    pub tweets: Option<&'a Path>,
}

pub fn evaluate(a: &EvalArgs) -> Outcome<Vec<EvalReport>> {
    let mode = Mode::parse(a.mode)
        .ok_or_else(|| Failure::usage(format!("unknown mode `{}` (classification, ner, ner+norm)", a.mode)))?;
    if mode == Mode::Classification {
        let pred = load_labels(existing(a.pred)?)?;
        let gold = load_labels(existing(a.gold)?)?;
        return Ok(vec![score_classification(&pred, &gold)?]);
    }
    let matches = match a.match_type {
        "both" => vec![MatchType::Strict, MatchType::Relaxed],
        m => vec![MatchType::parse(m)
            .filter(|&m| m != MatchType::NotApplicable)
            .ok_or_else(|| Failure::usage(format!("unknown match `{m}` (strict, relaxed, both)")))?],
    };
    let tweets = existing(a.tweets.ok_or_else(|| Failure::usage("span evaluation needs --tweets"))?)?;
    let by_id = |d: ExtractionDataset| -> BTreeMap<String, Vec<MentionSpan>> {
        d.records.into_iter().map(|(t, m)| (t.id, m)).collect()
    };
    let pred = by_id(load_task3(existing(a.pred)?, tweets)?);
    let gold = by_id(load_task3(existing(a.gold)?, tweets)?);
    Ok(matches
        .into_iter()
        .map(|m| score_ner(&pred, &gold, m, mode == Mode::NerNorm))
        .collect())
}
