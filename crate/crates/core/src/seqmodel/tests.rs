use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{build_vocab, encode_symbols, CorpusRecord, DatasetSplit, Source};

fn vocab_of(chords: &[&str]) -> TokenVocab {
    let rec = CorpusRecord {
        key: Key::C,
        mode: Mode::Maj,
        chords: chords.iter().map(|s| s.to_string()).collect(),
        source: Source::HumanCorpus,
    };
    build_vocab(&[rec], 1)
}

fn tiny_config() -> ModelConfig {
    ModelConfig {
        layers: 2,
        embed_dim: 4,
        hidden_dim: 5,
        dropout: 0.0,
        learning_rate: 1e-2,
        max_epochs: 5,
        batch_size: 8,
        seed: 3,
        patience: 5,
        validation_ratio: 0.1,
        clip_norm: 0.0,
    }
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|x| -x * x.ln()).sum()
}

#[test]
fn step_distributions_are_normalized() {
    let vocab = vocab_of(&["C", "G", "Am", "F", "Dm7"]);
    for seed in 0..20 {
        let cfg = ModelConfig { seed, ..tiny_config() };
        let m = PriorModel::untrained(ModelRole::Prior, cfg, &vocab).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prefix = vec![BOS];
        for _ in 0..6 {
            for tau in [0.5, 1.0, 1.7, 10.0] {
                let p = m.next_distribution(&prefix, tau).unwrap();
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                assert_eq!(p[PAD as usize], 0.0);
                assert_eq!(p[BOS as usize], 0.0);
            }
            prefix.push(rng.random_range(2..vocab.len() as u32));
        }
    }
}

#[test]
fn uniform_output_gives_uniform_log_prob() {
    let vocab = vocab_of(&["C", "G", "Am", "F", "Em", "Dm"]);
    let mut m = PriorModel::untrained(ModelRole::Prior, tiny_config(), &vocab).unwrap();
    let Network::Lstm(net) = m.network_mut() else { unreachable!() };
    net.reset_output_layer();
    // live tokens: six chords plus EOS and UNK
    let live = (vocab.tokens().len() + 2) as f64;
    let ids = encode_symbols(&["C", "Am", "F", "G"], &vocab);
    let lp = m.log_prob(&ids, 1.0).unwrap();
    assert!((lp - 5.0 * (1.0 / live).ln()).abs() < 1e-12);
}

#[test]
fn high_temperature_flattens_scores() {
    let vocab = vocab_of(&["C", "G", "Am", "F"]);
    let m = PriorModel::untrained(ModelRole::Prior, tiny_config(), &vocab).unwrap();
    let a = encode_symbols(&["C", "G", "Am", "F"], &vocab);
    let b = encode_symbols(&["F", "F", "F", "F"], &vocab);
    let gap = |t: f64| (m.log_prob(&a, t).unwrap() - m.log_prob(&b, t).unwrap()).abs();
    assert!(gap(1e6) < 1e-4);
    assert!(gap(1e6) < gap(1.0));
}

#[test]
fn entropy_grows_with_temperature() {
    let vocab = vocab_of(&["C", "G", "Am", "F", "E7"]);
    for seed in 0..10 {
        let cfg = ModelConfig { seed, ..tiny_config() };
        let m = PriorModel::untrained(ModelRole::Prior, cfg, &vocab).unwrap();
        let prefix = [BOS, 4, 5];
        let mut last = 0.0;
        for tau in [0.25, 0.5, 1.0, 1.7, 3.0, 10.0] {
            let h = entropy(&m.next_distribution(&prefix, tau).unwrap());
            assert!(h >= last - 1e-12);
            last = h;
        }
    }
}

#[test]
fn rejects_bad_inputs() {
    let vocab = vocab_of(&["C", "G"]);
    let m = PriorModel::untrained(ModelRole::Prior, tiny_config(), &vocab).unwrap();
    assert!(matches!(
        m.log_prob(&[BOS, 99, EOS], 1.0),
        Err(ModelError::VocabMismatch { id: 99, .. })
    ));
    assert!(matches!(m.log_prob(&[4, EOS], 1.0), Err(ModelError::InvalidSequence(_))));
    assert!(matches!(
        m.log_prob(&[BOS, 4, EOS], 0.0),
        Err(ModelError::InvalidTemperature(_))
    ));
    let bad = ModelConfig { dropout: 1.0, ..tiny_config() };
    assert!(PriorModel::untrained(ModelRole::Prior, bad, &vocab).is_err());
}

/// Bigram table over vocab {C, G} (ids 4, 5).
fn bigram_table(vocab: &TokenVocab) -> LookupModel {
    let v = vocab.len();
    let row = |pairs: &[(u32, f64)]| {
        let mut r = vec![0.0; v];
        for &(id, p) in pairs {
            r[id as usize] = p;
        }
        r
    };
    LookupModel::from_probabilities(
        v,
        1,
        vec![
            (vec![BOS], row(&[(4, 0.7), (5, 0.3)])),
            (vec![4], row(&[(4, 0.1), (5, 0.6), (EOS, 0.3)])),
            (vec![5], row(&[(4, 0.5), (5, 0.2), (EOS, 0.3)])),
        ],
    )
    .unwrap()
}

#[test]
fn lookup_chain_rule_matches_hand_arithmetic() {
    let vocab = vocab_of(&["C", "G"]);
    assert_eq!(vocab.id("C"), Some(4));
    let m = PriorModel::from_lookup(ModelRole::Prior, &vocab, bigram_table(&vocab)).unwrap();
    let ids = encode_symbols(&["C", "G"], &vocab);
    let expected = (0.7f64 * 0.6 * 0.3).ln();
    assert!((m.log_prob(&ids, 1.0).unwrap() - expected).abs() < 1e-12);

    // at temperature 2 each row becomes sqrt(p) renormalized
    let t2 = |row: &[f64], k: usize| row[k].sqrt() / row.iter().map(|x| x.sqrt()).sum::<f64>();
    let expected = (t2(&[0.7, 0.3], 0) * t2(&[0.1, 0.6, 0.3], 1) * t2(&[0.5, 0.2, 0.3], 2)).ln();
    assert!((m.log_prob(&ids, 2.0).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn near_deterministic_model_always_samples_the_same() {
    let vocab = vocab_of(&["C", "G"]);
    let v = vocab.len();
    let mut always_g = vec![0.0; v];
    always_g[5] = 1.0;
    let table = LookupModel::from_probabilities(v, 1, vec![(vec![BOS], always_g.clone()), (vec![5], always_g)]).unwrap();
    let m = PriorModel::from_lookup(ModelRole::Prior, &vocab, table).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let p = m.sample(&vocab, 4, Mode::Maj, &mut rng).unwrap();
        assert_eq!(p.to_string(), "G G G G");
    }
}

#[test]
fn sampling_reproduces_bigram_table() {
    let vocab = vocab_of(&["C", "G", "Am"]);
    let v = vocab.len();
    let table: [[f64; 3]; 4] = [
        [0.5, 0.3, 0.2], // after BOS
        [0.1, 0.6, 0.3], // after C
        [0.4, 0.1, 0.5], // after G
        [0.3, 0.3, 0.4], // after Am
    ];
    let row = |p: &[f64; 3]| {
        let mut r = vec![0.0; v];
        r[4..7].copy_from_slice(p);
        r
    };
    let rows = vec![
        (vec![BOS], row(&table[0])),
        (vec![4], row(&table[1])),
        (vec![5], row(&table[2])),
        (vec![6], row(&table[3])),
    ];
    let m = PriorModel::from_lookup(
        ModelRole::Prior,
        &vocab,
        LookupModel::from_probabilities(v, 1, rows).unwrap(),
    )
    .unwrap();
    let mut counts = [[0usize; 3]; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..10_000 {
        let ids = m.sample_ids(4, 1.0, &mut rng).unwrap();
        assert_eq!(ids.len(), 6);
        for w in ids[..5].windows(2) {
            assert!((4..7).contains(&w[1]), "reserved token sampled: {ids:?}");
            let ctx = if w[0] == BOS { 0 } else { w[0] as usize - 3 };
            counts[ctx][w[1] as usize - 4] += 1;
        }
    }
    for (ctx, row) in counts.iter().enumerate() {
        let n: usize = row.iter().sum();
        let l1: f64 = row
            .iter()
            .zip(&table[ctx])
            .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
            .sum();
        assert!(l1 < 0.05, "context {ctx}: L1 {l1}");
    }
}

#[test]
fn sampling_gives_up_when_length_unreachable() {
    let vocab = vocab_of(&["C"]);
    let v = vocab.len();
    let mut eos = vec![0.0; v];
    eos[EOS as usize] = 1.0;
    let mut c = vec![0.0; v];
    c[4] = 1.0;
    let table = LookupModel::from_probabilities(v, 1, vec![(vec![BOS], c), (vec![4], eos)]).unwrap();
    let m = PriorModel::from_lookup(ModelRole::Prior, &vocab, table).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        m.sample_ids(3, 1.0, &mut rng),
        Err(ModelError::SamplingExhausted { attempts: MAX_SAMPLE_ATTEMPTS, .. })
    ));
}

fn loss_only(net: &LstmNet, seqs: &[Vec<u32>]) -> f64 {
    seqs.iter()
        .map(|s| net.sequence_loss::<ChaCha8Rng>(s, None, 0.0, None))
        .sum()
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    // five ids in total: PAD BOS EOS UNK C
    let vocab = vocab_of(&["C"]);
    assert_eq!(vocab.len(), 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let net = LstmNet::new(5, 3, 4, 2, &mut rng);
    let seqs = vec![vec![BOS, 4, 4, EOS], vec![BOS, 4, UNK, 4, EOS], vec![BOS, EOS]];

    let mut grad = vec![0.0; net.params().len()];
    for s in &seqs {
        net.sequence_loss::<ChaCha8Rng>(s, Some((&mut grad, 1.0)), 0.0, None);
    }
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..net.params().len() {
        let mut plus = net.clone();
        plus.params_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[i] -= h;
        let numeric = (loss_only(&plus, &seqs) - loss_only(&minus, &seqs)) / (2.0 * h);
        let denom = (grad[i].abs() + numeric.abs()).max(1e-8);
        let rel = (grad[i] - numeric).abs() / denom;
        if grad[i].abs().max(numeric.abs()) > 1e-7 {
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-3, "worst relative error {worst}");
}

#[test]
fn training_fits_a_repeated_progression() {
    let chords = ["C", "Am", "F", "G"];
    let vocab = vocab_of(&chords);
    let seq = encode_symbols(&chords, &vocab);
    let split = DatasetSplit::new(vec![seq.clone(); 100], 0.1, 0);
    let cfg = ModelConfig {
        layers: 1,
        embed_dim: 8,
        hidden_dim: 8,
        dropout: 0.0,
        learning_rate: 2e-2,
        max_epochs: 30,
        batch_size: 16,
        seed: 1,
        patience: 5,
        validation_ratio: 0.1,
        clip_norm: 5.0,
    };
    let (m, report) = train(&split, &cfg, &vocab, ModelRole::Prior).unwrap();
    assert!(report.validation_nll.is_finite());
    let target = m.log_prob(&seq, 1.0).unwrap();
    // every other length-4 progression over the four chords
    let ids: Vec<u32> = chords.iter().map(|c| vocab.id(c).unwrap()).collect();
    for n in 0..256usize {
        let body: Vec<u32> = (0..4).map(|k| ids[(n >> (2 * k)) & 3]).collect();
        let mut cand = vec![BOS];
        cand.extend(&body);
        cand.push(EOS);
        if cand != seq {
            assert!(m.log_prob(&cand, 1.0).unwrap() < target, "{cand:?}");
        }
    }
}

#[test]
fn training_is_reproducible_and_improves_on_init() {
    let vocab = vocab_of(&["C", "Am", "F", "G", "Dm", "Em"]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pool = [["C", "Am", "F", "G"], ["C", "F", "G", "C"], ["Am", "Dm", "G", "C"], ["C", "Em", "F", "G"]];
    let seqs: Vec<Vec<u32>> = (0..120)
        .map(|_| encode_symbols(&pool[rng.random_range(0..pool.len())], &vocab))
        .collect();
    let split = DatasetSplit::new(seqs, 0.2, 3);
    let cfg = ModelConfig { max_epochs: 6, dropout: 0.1, ..tiny_config() };
    let (a, ra) = train(&split, &cfg, &vocab, ModelRole::Prior).unwrap();
    let (_, rb) = train(&split, &cfg, &vocab, ModelRole::Prior).unwrap();
    assert_eq!(ra.validation_nll, rb.validation_nll);
    assert_eq!(ra.history, rb.history);

    let init = PriorModel::untrained(ModelRole::Prior, cfg, &vocab).unwrap();
    let before = evaluate_nll(&init, &split.validation).unwrap();
    let after = evaluate_nll(&a, &split.validation).unwrap();
    assert!(after < before, "{after} !< {before}");
}

#[test]
fn empty_dataset_is_rejected() {
    let vocab = vocab_of(&["C"]);
    let split = DatasetSplit::new(Vec::new(), 0.1, 0);
    assert!(matches!(
        train(&split, &tiny_config(), &vocab, ModelRole::Prior),
        Err(ModelError::EmptyDataset)
    ));
}

#[test]
fn artifact_round_trip_is_bit_exact() {
    let vocab = vocab_of(&["C", "G", "Am", "F", "Em"]);
    let m = PriorModel::untrained(ModelRole::Proposal, tiny_config(), &vocab).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.model");
    save(&m, &path).unwrap();
    let back = load(&path, &vocab).unwrap();
    assert_eq!(back.role, ModelRole::Proposal);
    assert_eq!(back.config, m.config);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let mut ids = vec![BOS];
        ids.extend((0..n).map(|_| rng.random_range(3..vocab.len() as u32)));
        ids.push(EOS);
        let a = m.log_prob(&ids, 1.7).unwrap();
        let b = back.log_prob(&ids, 1.7).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    let table = PriorModel::from_lookup(ModelRole::Prior, &vocab, {
        let v = vocab.len();
        let mut r = vec![0.0; v];
        r[4] = 0.25;
        r[5] = 0.75;
        LookupModel::from_probabilities(v, 1, vec![(vec![BOS], r)]).unwrap()
    })
    .unwrap();
    save(&table, &path).unwrap();
    let back = load(&path, &vocab).unwrap();
    let ids = vec![BOS, 5, 4, EOS];
    assert_eq!(
        table.log_prob(&ids, 1.0).unwrap().to_bits(),
        back.log_prob(&ids, 1.0).unwrap().to_bits()
    );
}

#[test]
fn artifact_integrity_checks() {
    let vocab = vocab_of(&["C", "G"]);
    let m = PriorModel::untrained(ModelRole::Prior, tiny_config(), &vocab).unwrap();
    let bytes = artifact::to_bytes(&m);

    let split = bytes.iter().position(|&b| b == b'\n').unwrap();
    let header = String::from_utf8(bytes[..split].to_vec()).unwrap();
    let start = header.find("\"checksum\":\"").unwrap() + 12;
    let mut tampered = bytes.clone();
    tampered[start] = if tampered[start] == b'0' { b'1' } else { b'0' };
    assert!(matches!(artifact::from_bytes(&tampered, &vocab), Err(ModelError::Checksum)));

    let mut flipped = bytes.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 1;
    assert!(matches!(artifact::from_bytes(&flipped, &vocab), Err(ModelError::Checksum)));

    let other = vocab_of(&["C", "G", "D"]);
    assert!(matches!(
        artifact::from_bytes(&bytes, &other),
        Err(ModelError::VersionMismatch { .. })
    ));
}
