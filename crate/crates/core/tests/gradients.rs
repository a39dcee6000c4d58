use adrmine::encoder::{EncoderConfig, ForwardMode, ModelParams};
use adrmine::preprocess::ResourceTables;
use adrmine::synthetic;
use adrmine::tokenize::{train_vocab, Vocab};
use adrmine::train::{
    classify_batch, concept_batch, grad_check, mtl_batch, prepare_classification, prepare_extraction,
    prepare_normalization, tag_batch,
};

fn toy_config(vocab: &Vocab, n_concepts: usize) -> EncoderConfig {
    EncoderConfig {
        d_model: 16,
        n_layers: 2,
        n_heads: 4,
        ffn: 32,
        max_len: 32,
        vocab_size: vocab.len(),
        dropout: 0.2,
        n_concepts,
    }
}

/// Non-trivial parameters: random init plus perturbed norms and biases so
/// every path carries signal.
fn params(cfg: &EncoderConfig, seed: u64) -> ModelParams {
    use rand::{Rng, SeedableRng};
    let mut p = ModelParams::init(cfg, seed).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1);
    for t in p.tensors_mut() {
        let scale = if t.decay { 0.3 } else { 0.1 };
        for v in t.data.iter_mut() {
            *v += scale * (rng.random::<f64>() - 0.5);
        }
    }
    p
}

#[test]
fn mtl_objective_gradient() {
    let tables = ResourceTables::builtin();
    let data = synthetic::extraction_corpus(5, 11);
    let texts: Vec<String> = data.tweets().map(|t| t.text.clone()).collect();
    let vocab = train_vocab(&texts, 300).unwrap();
    let cfg = toy_config(&vocab, 0);
    let ex = prepare_extraction(&data, &tables, &vocab, cfg.max_len).unwrap();
    let batch: Vec<_> = ex.iter().collect();
    let seeds = [1, 2, 3, 4, 5];
    let p = params(&cfg, 7);
    let r = grad_check(|q| mtl_batch(&batch, q, &cfg, 0.8, &seeds, ForwardMode::Train), &p, 400, 1e-3, 0).unwrap();
    let w = r.worst().unwrap();
    println!("max rel error {:.3e} at {}[{}] a={} n={}", r.max_rel_error, w.tensor, w.index, w.analytic, w.numeric);
    assert!(r.passed(), "{r:?}");
    assert!(r.dead_tensors.is_empty(), "dead: {:?}", r.dead_tensors);

    let r = grad_check(|q| tag_batch(&batch, q, &cfg, &seeds, ForwardMode::Eval), &p, 100, 1e-3, 1).unwrap();
    assert!(r.passed(), "{r:?}");
}

#[test]
fn classifier_and_concept_gradients() {
    let tables = ResourceTables::builtin();
    let data = synthetic::classification_corpus(5, 2);
    let texts: Vec<String> = data.records.iter().map(|(t, _)| t.text.clone()).collect();
    let vocab = train_vocab(&texts, 300).unwrap();
    let cfg = toy_config(&vocab, 3);
    let ex = prepare_classification(&data, &tables, &vocab, cfg.max_len);
    let batch: Vec<_> = ex.iter().collect();
    let seeds = [9, 8, 7, 6, 5];
    let p = params(&cfg, 3);
    let r = grad_check(|q| classify_batch(&batch, q, &cfg, &seeds, ForwardMode::Train), &p, 200, 1e-3, 0).unwrap();
    assert!(r.passed(), "{r:?}");

    let (lex, mentions) = synthetic::normalization_toy();
    let ex = prepare_normalization(&mentions[..5], &lex, &tables, &vocab, cfg.max_len).unwrap();
    let batch: Vec<_> = ex.iter().collect();
    let r = grad_check(|q| concept_batch(&batch, q, &cfg, &seeds, ForwardMode::Train), &p, 200, 1e-3, 0).unwrap();
    assert!(r.passed(), "{r:?}");
    assert!(r.dead_tensors.iter().all(|t| t.starts_with("bio_") || t.starts_with("cls_")), "{:?}", r.dead_tensors);
}
