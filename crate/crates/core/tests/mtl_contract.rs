use adrmine::corpus::{augment_task2, class_counts, BinaryLabel, ClassificationDataset};
use adrmine::preprocess::ResourceTables;
use adrmine::synthetic::{self, PRESET_VOCAB_SIZE};
use adrmine::tokenize::train_vocab;
use adrmine::train::{mtl_loss, prepare_extraction, train_extractor, train_extractor_mtl, Hyperparams, Task};

#[test]
fn mtl_loss_fixture_is_exact() {
    assert_eq!(mtl_loss(0.5, 1.5, 0.8).unwrap(), 0.7);
    assert_eq!(mtl_loss(0.3, 2.0, 1.0).unwrap(), 0.3);
    assert_eq!(mtl_loss(0.3, 2.0, 0.0).unwrap(), 2.0);
    assert!(mtl_loss(0.3, 2.0, 1.5).is_err());
}

#[test]
fn lambda_one_matches_single_task() {
    let tables = ResourceTables::builtin();
    let data = synthetic::extraction_corpus(30, 5);
    let texts: Vec<String> = data.tweets().map(|t| t.text.clone()).collect();
    let vocab = train_vocab(&texts, PRESET_VOCAB_SIZE).unwrap();
    let (cfg, hp) = synthetic::preset(Task::Extract, vocab.len(), 0);
    let hp = Hyperparams { lambda: 1.0, epochs: 8, seed: 42, eval_every: 2, ..hp };
    let ex = prepare_extraction(&data, &tables, &vocab, cfg.max_len).unwrap();
    let mtl = train_extractor_mtl(&ex, &hp, &cfg).unwrap();
    let single = train_extractor(&ex, &hp, &cfg).unwrap();
    assert_eq!(mtl.log.to_csv(), single.log.to_csv());
    assert_eq!(mtl.log.rows, single.log.rows);
    assert_eq!(mtl.params, single.params);

    let mixed = train_extractor_mtl(&ex, &Hyperparams { lambda: 0.8, ..hp.clone() }, &cfg).unwrap();
    assert_ne!(mixed.log.rows, single.log.rows);
}

#[test]
fn augmentation_keeps_floor_of_negatives() {
    let base = synthetic::task2_with_counts("b", 18641, 1903, 1).unwrap();
    let c = class_counts(&base);
    assert_eq!((c[&BinaryLabel::NonAdr], c[&BinaryLabel::Adr]), (18641, 1903));
    let extra = synthetic::task2_with_counts("x", 0, 250, 2).unwrap();
    let out = augment_task2(&base, &extra, 0.9, 7).unwrap();
    let c = class_counts(&out);
    assert_eq!(c[&BinaryLabel::NonAdr], 16776);
    assert_eq!(c[&BinaryLabel::Adr], 1903 + 250);
    assert_eq!(out, augment_task2(&base, &extra, 0.9, 7).unwrap());

    let all = augment_task2(&base, &ClassificationDataset::new("e", vec![]).unwrap(), 1.0, 3).unwrap();
    assert_eq!(all.len(), base.len());
    let none = augment_task2(&base, &extra, 0.0, 3).unwrap();
    assert_eq!(class_counts(&none).get(&BinaryLabel::NonAdr), None);
}
