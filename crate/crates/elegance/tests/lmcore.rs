//! Language model and embedding provider checks: masking discipline,
//! hand-computed loss values, cross-attention gating, gradient agreement,
//! and the ELEM interchange format.

use std::collections::BTreeMap;

use elegance::engine::{grad_check_fn, ParamStore, Tape, TapeBind, Var};
use elegance::lmcore::alphabet::{char_to_id, BOS, EOS, PAD};
use elegance::lmcore::{
    check_coverage, export_embeddings, import_embeddings, ntp_loss, tokenize, write_elem,
    EmbeddingProvider, EmbeddingTable, LmConfig, LmMode, LmModel, LmStates, ToyLm, VOCAB_SIZE,
};
use elegance::seeds::rng_for;
use elegance::simkit::{build_dataset, sample_transcript, DatasetCfg, Language};
use ndarray::Array2;
use rand::Rng;

fn causal_cfg() -> LmConfig {
    LmConfig::default()
}

fn bidi_cfg() -> LmConfig {
    LmConfig {
        mode: LmMode::Bidirectional,
        ..LmConfig::default()
    }
}

/// Register a model and overwrite its zero-initialized head with random
/// values so the logits actually depend on the hidden states.
fn model_with_live_head(
    cfg: LmConfig,
    seed: u64,
) -> (ParamStore, LmModel) {
    let mut store = ParamStore::new();
    let mut rng = rng_for(seed, "test.lm");
    let model = LmModel::register(cfg, &mut store, &mut rng, "lm").unwrap();
    let mut head_rng = rng_for(seed, "test.lm.head");
    let head = store.id("lm.head.w").unwrap();
    let shape = store.value(head).dim();
    store.set_value(
        head,
        Array2::from_shape_fn(shape, |_| head_rng.gen_range(-0.5..0.5)),
    );
    (store, model)
}

fn random_matrix(rows: usize, cols: usize, seed: u64, tag: &str) -> Array2<f64> {
    let mut rng = rng_for(seed, tag);
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn random_ids(n: usize, seed: u64, tag: &str) -> Vec<u32> {
    let mut rng = rng_for(seed, tag);
    // Only character ids, so PAD never sneaks into the middle of a sequence.
    (0..n).map(|_| rng.gen_range(3..VOCAB_SIZE as u32)).collect()
}

#[test]
fn causal_logits_ignore_future_tokens_across_100_seeds() {
    for seed in 0..100u64 {
        let (store, model) = model_with_live_head(causal_cfg(), seed);
        let n = 8;
        let ids = random_ids(n, seed, "ids");
        let mut rng = rng_for(seed, "perturb");
        let j = rng.gen_range(1..n);
        let mut poked = ids.clone();
        poked[j] = 3 + (poked[j] - 3 + 7) % 61;
        assert_ne!(poked[j], ids[j]);

        let run = |ids: &[u32]| {
            let tape = Tape::new();
            let bind = store.bind(&tape);
            let states = model.forward(&tape, &bind, ids, None).unwrap();
            tape.value(states.logits.unwrap())
        };
        let logits_a = run(&ids);
        let logits_b = run(&poked);

        // Every position before the edit is untouched; the edited position
        // itself changes (its own embedding moved).
        for i in 0..j {
            for v in 0..VOCAB_SIZE {
                assert!(
                    (logits_a[[i, v]] - logits_b[[i, v]]).abs() < 1e-12,
                    "seed {seed}: logits at position {i} moved when token {j} changed"
                );
            }
        }
        let row_j_moved = (0..VOCAB_SIZE)
            .any(|v| (logits_a[[j, v]] - logits_b[[j, v]]).abs() > 1e-9);
        assert!(row_j_moved, "seed {seed}: editing token {j} left its own logits fixed");
    }
}

#[test]
fn bidirectional_states_react_to_future_tokens() {
    let (store, model) = model_with_live_head(bidi_cfg(), 11);
    let ids = random_ids(8, 11, "ids");
    let mut poked = ids.clone();
    poked[7] = 3 + (poked[7] - 3 + 1) % 61;

    let run = |ids: &[u32]| {
        let tape = Tape::new();
        let bind = store.bind(&tape);
        let states = model.forward(&tape, &bind, ids, None).unwrap();
        assert!(states.logits.is_none(), "bidirectional mode must not emit logits");
        tape.value(states.last)
    };
    let a = run(&ids);
    let b = run(&poked);
    let first_row_moved = (0..64).any(|c| (a[[0, c]] - b[[0, c]]).abs() > 1e-9);
    assert!(first_row_moved, "changing the last token should reach position 0");
}

#[test]
fn an_untrained_model_scores_exactly_ln_vocab() {
    let mut store = ParamStore::new();
    let mut rng = rng_for(1, "fresh");
    let model = LmModel::register(causal_cfg(), &mut store, &mut rng, "lm").unwrap();
    let ids = tokenize("hello world").unwrap().ids;

    let tape = Tape::new();
    let bind = store.bind(&tape);
    let states = model.forward(&tape, &bind, &ids, None).unwrap();
    let loss = ntp_loss(&tape, &states, &ids).unwrap();
    let value = tape.scalar_value(loss);
    assert!(
        (value - (VOCAB_SIZE as f64).ln()).abs() < 1e-12,
        "fresh model loss {value} is not ln({VOCAB_SIZE})"
    );
    assert!((value - 4.158883083359672).abs() < 1e-12);
}

/// Build a states struct around hand-crafted logits so the loss formula can
/// be checked in isolation from the transformer.
fn states_from_logits(tape: &Tape, logits: Array2<f64>) -> LmStates {
    let n = logits.dim().0;
    let var = tape.leaf(logits);
    LmStates {
        blocks: Vec::new(),
        last: var,
        logits: Some(var),
        seq_len: n,
    }
}

#[test]
fn saturated_correct_logits_drive_the_loss_toward_zero() {
    let ids = vec![BOS, char_to_id('a').unwrap(), char_to_id('b').unwrap(), EOS];
    let mut logits = Array2::<f64>::zeros((4, VOCAB_SIZE));
    for i in 0..3 {
        logits[[i, ids[i + 1] as usize]] = 1e6;
    }
    let tape = Tape::new();
    let states = states_from_logits(&tape, logits);
    let loss = ntp_loss(&tape, &states, &ids).unwrap();
    assert!(tape.scalar_value(loss) < 1e-6);
}

#[test]
fn a_three_token_example_matches_the_hand_computed_cross_entropy() {
    // Sequence BOS, 'a', EOS: two scored transitions. Row 0 has a single
    // logit of 1.0 on 'a', row 1 a single logit of 0.5 on EOS. The expected
    // value is written out with plain scalar math.
    let a = char_to_id('a').unwrap();
    let ids = vec![BOS, a, EOS];
    let mut logits = Array2::<f64>::zeros((3, VOCAB_SIZE));
    logits[[0, a as usize]] = 1.0;
    logits[[1, EOS as usize]] = 0.5;

    let v = VOCAB_SIZE as f64;
    let ce0 = ((v - 1.0) + 1.0f64.exp()).ln() - 1.0;
    let ce1 = ((v - 1.0) + 0.5f64.exp()).ln() - 0.5;
    let expected = 0.5 * (ce0 + ce1);

    let tape = Tape::new();
    let states = states_from_logits(&tape, logits);
    let loss = ntp_loss(&tape, &states, &ids).unwrap();
    assert!(
        (tape.scalar_value(loss) - expected).abs() < 1e-12,
        "got {}, hand computation says {}",
        tape.scalar_value(loss),
        expected
    );
}

#[test]
fn padded_tails_never_contribute_to_the_loss() {
    let (store, model) = model_with_live_head(causal_cfg(), 21);
    let short = tokenize("abc").unwrap().ids;
    let mut padded = short.clone();
    padded.extend([PAD, PAD, PAD]);

    let eval = |ids: &[u32]| {
        let tape = Tape::new();
        let bind = store.bind(&tape);
        let states = model.forward(&tape, &bind, ids, None).unwrap();
        tape.scalar_value(ntp_loss(&tape, &states, ids).unwrap())
    };
    // Causal masking plus PAD exclusion make the padded loss identical.
    assert!((eval(&short) - eval(&padded)).abs() < 1e-12);
}

#[test]
fn ntp_loss_refuses_bidirectional_states() {
    let (store, model) = model_with_live_head(bidi_cfg(), 8);
    let ids = tokenize("abc").unwrap().ids;
    let tape = Tape::new();
    let bind = store.bind(&tape);
    let states = model.forward(&tape, &bind, &ids, None).unwrap();
    let err = ntp_loss(&tape, &states, &ids).unwrap_err().to_string();
    assert!(err.contains("CAUSAL"), "unhelpful error: {err}");
}

#[test]
fn cross_inputs_must_match_the_configuration() {
    let mut store = ParamStore::new();
    let mut rng = rng_for(2, "pair");
    let plain = LmModel::register(causal_cfg(), &mut store, &mut rng, "plain").unwrap();
    let crossed = LmModel::register(
        LmConfig {
            with_cross_attention: true,
            ..causal_cfg()
        },
        &mut store,
        &mut rng,
        "crossed",
    )
    .unwrap();

    let ids = tokenize("ab").unwrap().ids;
    let tape = Tape::new();
    let bind = store.bind(&tape);
    let xa = tape.constant(random_matrix(5, 64, 3, "xa"));

    let err = plain.forward(&tape, &bind, &ids, Some(xa)).unwrap_err();
    assert!(err.to_string().contains("without cross-attention"));
    let err = crossed.forward(&tape, &bind, &ids, None).unwrap_err();
    assert!(err.to_string().contains("no cross_inputs"));

    let bad_width = tape.constant(random_matrix(5, 32, 3, "xa32"));
    let err = crossed
        .forward(&tape, &bind, &ids, Some(bad_width))
        .unwrap_err()
        .to_string();
    assert!(err.contains("32") && err.contains("64"), "unhelpful error: {err}");
}

/// Two stores seeded identically, one model with cross-attention and one
/// without, share every body weight; forwards can then be compared.
fn matched_pair(alpha: f64, seed: u64) -> (ParamStore, LmModel, ParamStore, LmModel) {
    let cross_cfg = LmConfig {
        with_cross_attention: true,
        cross_scale: alpha,
        ..causal_cfg()
    };
    let mut store_x = ParamStore::new();
    let mut rng_x = rng_for(seed, "pairing");
    let crossed = LmModel::register(cross_cfg, &mut store_x, &mut rng_x, "lm").unwrap();

    let mut store_p = ParamStore::new();
    let mut rng_p = rng_for(seed, "pairing");
    let plain = LmModel::register(causal_cfg(), &mut store_p, &mut rng_p, "lm").unwrap();
    (store_x, crossed, store_p, plain)
}

fn all_states(
    tape: &Tape,
    bind: &TapeBind,
    model: &LmModel,
    ids: &[u32],
    xa: Option<Var>,
) -> Vec<Array2<f64>> {
    let states = model.forward(tape, bind, ids, xa).unwrap();
    let mut out: Vec<Array2<f64>> = states.blocks.iter().map(|&b| tape.value(b)).collect();
    out.push(tape.value(states.last));
    if let Some(l) = states.logits {
        out.push(tape.value(l));
    }
    out
}

fn max_abs_diff(a: &[Array2<f64>], b: &[Array2<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y.iter()).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn fresh_cross_attention_is_invisible_at_any_alpha() {
    // The value projection starts at zero, so even a large alpha adds
    // nothing until training moves it.
    for alpha in [0.0, 0.1, 0.7] {
        let (store_x, crossed, store_p, plain) = matched_pair(alpha, 31);
        let ids = random_ids(6, 31, "ids");
        let xa_val = random_matrix(9, 64, 31, "xa");

        let tape = Tape::new();
        let bind_x = store_x.bind(&tape);
        let bind_p = store_p.bind(&tape);
        let xa = tape.constant(xa_val);
        let with_cross = all_states(&tape, &bind_x, &crossed, &ids, Some(xa));
        let without = all_states(&tape, &bind_p, &plain, &ids, None);
        assert!(
            max_abs_diff(&with_cross, &without) < 1e-7,
            "alpha {alpha}: untouched cross-attention changed the states"
        );
    }
}

#[test]
fn alpha_zero_shuts_off_a_trained_cross_branch() {
    for (alpha, expect_effect) in [(0.0, false), (0.1, true)] {
        let (mut store_x, crossed, store_p, plain) = matched_pair(alpha, 37);
        // Pretend training moved the value projections.
        for b in 0..2 {
            let id = store_x.id(&format!("lm.block{b}.cross.wv")).unwrap();
            store_x.set_value(id, random_matrix(64, 64, 37 + b as u64, "wv"));
        }
        let ids = random_ids(6, 37, "ids");

        let tape = Tape::new();
        let bind_x = store_x.bind(&tape);
        let bind_p = store_p.bind(&tape);
        let xa_a = tape.constant(random_matrix(9, 64, 41, "xa-a"));
        let xa_b = tape.constant(random_matrix(9, 64, 42, "xa-b"));
        let on_a = all_states(&tape, &bind_x, &crossed, &ids, Some(xa_a));
        let on_b = all_states(&tape, &bind_x, &crossed, &ids, Some(xa_b));
        let vanilla = all_states(&tape, &bind_p, &plain, &ids, None);

        if expect_effect {
            assert!(
                max_abs_diff(&on_a, &vanilla) > 1e-6,
                "alpha {alpha} with a live value projection should move the states"
            );
            assert!(
                max_abs_diff(&on_a, &on_b) > 1e-6,
                "different acoustic streams should give different states"
            );
        } else {
            assert!(max_abs_diff(&on_a, &vanilla) < 1e-7);
            assert!(max_abs_diff(&on_a, &on_b) < 1e-7);
        }
    }
}

#[test]
fn gradients_reach_the_acoustic_stream_only_when_alpha_is_positive() {
    for (alpha, expect_grad) in [(0.0, false), (0.1, true)] {
        let cfg = LmConfig {
            with_cross_attention: true,
            cross_scale: alpha,
            ..causal_cfg()
        };
        let (mut store, model) = model_with_live_head(cfg, 51);
        for b in 0..2 {
            let id = store.id(&format!("lm.block{b}.cross.wv")).unwrap();
            store.set_value(id, random_matrix(64, 64, 51 + b as u64, "wv"));
        }
        let ids = random_ids(6, 51, "ids");

        let tape = Tape::new();
        let bind = store.bind(&tape);
        let xa = tape.leaf(random_matrix(9, 64, 52, "xa"));
        let states = model.forward(&tape, &bind, &ids, Some(xa)).unwrap();
        let loss = ntp_loss(&tape, &states, &ids).unwrap();
        let grads = tape.backward(loss);
        let g = grads.get(xa).expect("the acoustic stream is on the tape");
        let g_max = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if expect_grad {
            assert!(g_max > 1e-12, "alpha {alpha}: no gradient reached the acoustic stream");
        } else {
            assert_eq!(g_max, 0.0, "alpha 0 must block every gradient path exactly");
        }
    }
}

#[test]
fn language_model_gradients_agree_with_finite_differences() {
    let cfg = LmConfig {
        with_cross_attention: true,
        max_seq_len: 16,
        ..causal_cfg()
    };
    let (mut store, model) = model_with_live_head(cfg, 61);
    for b in 0..2 {
        let id = store.id(&format!("lm.block{b}.cross.wv")).unwrap();
        store.set_value(id, random_matrix(64, 64, 61 + b as u64, "wv"));
    }
    let ids = tokenize("linguistic").unwrap().ids;
    let xa_val = random_matrix(7, 64, 62, "xa");

    let eval = |st: &ParamStore| {
        let tape = Tape::new();
        let bind = st.bind(&tape);
        let xa = tape.constant(xa_val.clone());
        let states = model.forward(&tape, &bind, &ids, Some(xa)).unwrap();
        let loss = ntp_loss(&tape, &states, &ids).unwrap();
        let loss_val = tape.scalar_value(loss);
        let mut grads = tape.backward(loss);
        let mut map = BTreeMap::new();
        for id in st.trainable_ids() {
            if let Some(g) = grads.take(bind.var(id)) {
                map.insert(st.name(id).to_string(), g);
            }
        }
        (loss_val, map)
    };
    let report = grad_check_fn(eval, &mut store, 60, 1e-5, 7);
    assert!(
        report.passes(1e-4),
        "worst relative error {}",
        report.max_rel_err
    );
}

#[test]
fn toy_embeddings_are_deterministic_and_pool_to_the_row_mean() {
    let lm_a = ToyLm::new(3);
    let lm_b = ToyLm::new(3);
    let lm_c = ToyLm::new(4);

    let seq_a = lm_a.sequence_embedding("hello").unwrap();
    let seq_b = lm_b.sequence_embedding("hello").unwrap();
    assert_eq!(seq_a.dim(), (7, 64), "5 characters plus BOS and EOS");
    assert_eq!(seq_a, seq_b, "same seed, same text, same embedding");

    let seq_c = lm_c.sequence_embedding("hello").unwrap();
    assert_ne!(seq_a, seq_c, "a different seed builds a different model");

    let provider = EmbeddingProvider::toy(3);
    let entry = provider.entry("hello").unwrap();
    assert_eq!(entry.seq, seq_a);
    for j in 0..64 {
        let mean = (0..7).map(|i| entry.seq[[i, j]]).sum::<f64>() / 7.0;
        assert!(
            (entry.pooled[[0, j]] - mean).abs() < 1e-9,
            "pooled column {j} is not the row mean"
        );
    }

    let other = provider.utterance_embedding("world").unwrap();
    assert_ne!(entry.pooled, other, "different texts must embed differently");
}

#[test]
fn sampled_transcripts_in_every_language_tokenize_round_trip() {
    let mut rng = rng_for(9, "langs");
    for lang in [
        Language::En,
        Language::Es,
        Language::Fr,
        Language::It,
        Language::Pt,
    ] {
        let text = sample_transcript(lang, 1.0, &mut rng);
        let tokens = tokenize(&text).unwrap();
        assert_eq!(tokens.ids[0], BOS);
        assert_eq!(*tokens.ids.last().unwrap(), EOS);
        assert_eq!(elegance::lmcore::detokenize(&tokens).unwrap(), text);
    }
}

#[test]
fn elem_files_round_trip_bitwise_and_cover_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("data");
    let cfg = DatasetCfg {
        name: "emb".into(),
        n_samples: 3,
        switching: false,
        sample: Default::default(),
        seed: 5,
    };
    let manifest = build_dataset(&cfg, &root).unwrap();

    let provider = EmbeddingProvider::toy(9);
    let elem_path = dir.path().join("emb.elem");
    let n_written = export_embeddings(&manifest, &root, &provider, &elem_path).unwrap();
    assert_eq!(n_written, 3, "one target transcript per sample");

    let table = import_embeddings(&elem_path).unwrap();
    assert_eq!(table.tag(), provider.tag());
    assert_eq!(table.dim(), 64);
    assert_eq!(table.len(), n_written);
    assert_eq!(check_coverage(&table, &manifest, &root).unwrap(), 3);

    // Values survive as exactly the f32 the file stores.
    let record = &manifest.records[0];
    let rel = record.files.get("transcript0").unwrap();
    let text = std::fs::read_to_string(root.join(rel)).unwrap();
    let fresh = provider.sequence_embedding(&text).unwrap();
    let stored = &table.lookup(&text).unwrap().seq;
    assert_eq!(stored.dim(), fresh.dim());
    for (s, f) in stored.iter().zip(fresh.iter()) {
        assert_eq!(*s, *f as f32 as f64, "imported value is not the f32 quantization");
    }

    // Re-exporting the imported table reproduces the file bit for bit.
    let second_path = dir.path().join("again.elem");
    write_elem(&second_path, &table).unwrap();
    assert_eq!(
        std::fs::read(&elem_path).unwrap(),
        std::fs::read(&second_path).unwrap()
    );

    // A transcript the table never saw is a lookup error.
    let miss = table.lookup("transcript nobody embedded").unwrap_err();
    assert!(miss.to_string().contains("not in the imported"));

    // Coverage fails loudly when an entry is missing.
    let partial = EmbeddingTable::new("partial", 64);
    let err = check_coverage(&partial, &manifest, &root).unwrap_err().to_string();
    assert!(err.contains("misses 3 of 3"), "unhelpful error: {err}");

    // Width mismatches name both dimensions.
    let err = table.expect_dim(32).unwrap_err().to_string();
    assert!(err.contains("64") && err.contains("32"), "unhelpful error: {err}");
}

#[test]
fn corrupt_elem_files_are_rejected_with_reasons() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.elem");
    let mut table = EmbeddingTable::new("tiny", 4);
    table
        .insert("hi", Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64))
        .unwrap();
    write_elem(&path, &table).unwrap();
    let good = std::fs::read(&path).unwrap();

    let bad_magic = path.with_extension("magic");
    let mut bytes = good.clone();
    bytes[0] = b'X';
    std::fs::write(&bad_magic, &bytes).unwrap();
    let err = import_embeddings(&bad_magic).unwrap_err().to_string();
    assert!(err.contains("magic"), "unhelpful error: {err}");

    let truncated = path.with_extension("short");
    std::fs::write(&truncated, &good[..good.len() - 5]).unwrap();
    assert!(import_embeddings(&truncated).is_err());

    let trailing = path.with_extension("long");
    let mut bytes = good.clone();
    bytes.push(0);
    std::fs::write(&trailing, &bytes).unwrap();
    let err = import_embeddings(&trailing).unwrap_err().to_string();
    assert!(err.contains("trailing"), "unhelpful error: {err}");

    let empty = EmbeddingTable::new("none", 4);
    assert!(write_elem(&path.with_extension("none"), &empty).is_err());
}
