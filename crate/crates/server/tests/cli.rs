use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn keychord(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_keychord"))
        .args(args)
        .current_dir(root())
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn generate_offline_prints_four_lines() {
    let o = keychord(&[
        "generate", "--keywords", "dreamy,jazz", "--key", "B", "--mode", "Maj", "--bars", "4", "--mock", "fixtures/",
        "--seed", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4, "{out}");
    for l in lines {
        let p = keychord::chordlang::parse_progression(l, "B".parse().unwrap(), "Maj".parse().unwrap()).unwrap();
        assert_eq!(p.chords.len(), 4);
    }
}

#[test]
fn generate_json_and_audit() {
    let dir = tempfile::tempdir().unwrap();
    let audit = dir.path().join("audit.jsonl");
    let o = keychord(&[
        "generate", "--keywords", "calm", "--key", "C", "--mode", "Maj", "--mock", "fixtures", "--seed", "1", "--json",
        "--calibration", "data/models/calibration.json", "--audit", audit.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["suggestions"].as_array().unwrap().len(), 4);
    assert_eq!(fs::read_to_string(audit).unwrap().lines().count(), 30);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(keychord(&["generate", "--key", "C"]).status.code(), Some(2));
    assert_eq!(keychord(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1() {
    let o = keychord(&[
        "generate", "--keywords", "x", "--key", "C", "--mode", "Maj", "--mock", "fixtures", "--models", "/nonexistent",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    let o = keychord(&["generate", "--keywords", "x", "--key", "H", "--mode", "Maj", "--mock", "fixtures"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn calibrate_prints_m_and_percentile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cal.json");
    let o = keychord(&[
        "calibrate", "--p", "data/models/prior.bin", "--q", "data/models/proposal.bin", "--candidates", "data/llm.jsonl",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("M = ") && text.contains("percentile 0.95"), "{text}");
    let art: serde_json::Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!(art["M"].as_f64().unwrap() > 0.0);
    assert_eq!(art["count"], 3000);
}

#[test]
fn eval_tables_with_fixtures() {
    let o = keychord(&["eval", "tables", "--fixtures", "--pairs", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let md = stdout(&o);
    assert!(md.contains("| Condition | unigram_jsd | bigram_jsd |"), "{md}");
    for c in ["prior_samples", "llm_samples", "rejection_sampled", "uniform_random", "batch_diverse", "single_baseline"] {
        assert!(md.contains(&format!("| {c} |")), "missing {c}:\n{md}");
    }
}

#[test]
fn vocab_and_train_small_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    let mut text = String::new();
    for (k, chords) in [("C", "\"C\",\"G\",\"Am\",\"F\""), ("G", "\"G\",\"D\",\"Em\",\"C\""), ("F", "\"F\",\"Dm\",\"Bb\",\"C\"")] {
        for _ in 0..10 {
            text.push_str(&format!("{{\"key\":\"{k}\",\"mode\":\"Maj\",\"chords\":[{chords}]}}\n"));
        }
    }
    fs::write(&corpus, text).unwrap();
    let vocab = dir.path().join("vocab.json");
    let model = dir.path().join("p.bin");
    let o = keychord(&["vocab", "--corpus", corpus.to_str().unwrap(), "--out", vocab.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("4 chord tokens"), "{}", stdout(&o));
    let o = keychord(&[
        "train", "--role", "prior", "--corpus", corpus.to_str().unwrap(), "--vocab", vocab.to_str().unwrap(), "--out",
        model.to_str().unwrap(), "--epochs", "2", "--seed", "9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("validation nll"));
    let v = keychord::corpus::TokenVocab::load(&vocab).unwrap();
    keychord::seqmodel::load(&model, &v).unwrap();
}

#[test]
fn eval_self_bleu_and_jsd_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let sets = dir.path().join("sets");
    fs::create_dir(&sets).unwrap();
    fs::write(sets.join("same.jsonl"), "[\"C G Am F\",\"C G Am F\"]\n").unwrap();
    fs::write(sets.join("mixed.jsonl"), "[\"C G Am F\",\"Dm7 G7 Cmaj7 A7\"]\n").unwrap();
    let out = dir.path().join("out");
    let o = keychord(&["eval", "self-bleu", "--in", sets.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let md = stdout(&o);
    assert!(md.contains("| same |") && md.contains("| mixed |"), "{md}");
    assert!(out.join("diversity.json").is_file() && out.join("diversity.csv").is_file());

    let conds = dir.path().join("conds");
    fs::create_dir(&conds).unwrap();
    fs::copy(root().join("data/human.jsonl"), conds.join("itself.jsonl")).unwrap();
    let o = keychord(&["eval", "jsd", "--corpus", "data/human.jsonl", "--in", conds.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("| itself | 0.0000 | 0.0000 |"), "{}", stdout(&o));
}
