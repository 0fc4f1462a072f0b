use std::path::PathBuf;

use keychord::chordlang::{parse_progression, Key, Mode};
use keychord::corpus::{load_corpus, normalize_to_c, NormalizeOptions, Source};
use keychord::llmgate::parse_candidates;

fn repo(path: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(path)
}

#[test]
fn desk_corpora_load_cleanly() {
    let human = load_corpus(repo("data/human.jsonl"), Source::HumanCorpus).unwrap();
    assert!(human.records.len() >= 2000);
    assert!(human.skipped.is_empty(), "{:?}", &human.skipped[..human.skipped.len().min(3)]);
    let lengths: std::collections::BTreeSet<_> = human.records.iter().map(|r| r.chords.len()).collect();
    assert!(lengths.contains(&3) && lengths.contains(&5));

    let llm = load_corpus(repo("data/llm.jsonl"), Source::LlmGenerated).unwrap();
    assert!(llm.skipped.is_empty(), "{:?}", &llm.skipped[..llm.skipped.len().min(3)]);
    let norm = normalize_to_c(&llm.records, NormalizeOptions::default());
    assert!(norm.raw.iter().all(|r| r.key == Key::C));
}

#[test]
fn default_batch_fixture_is_thirty_valid_lines() {
    let text = std::fs::read_to_string(repo("fixtures/default_chord_batch_diverse.txt")).unwrap();
    let (kept, dropped) = parse_candidates(&text, Key::C, Mode::Maj, 4);
    assert_eq!((kept.len(), dropped.len()), (30, 0));

    let text = std::fs::read_to_string(repo("fixtures/batch_with_invalid.txt")).unwrap();
    let (kept, dropped) = parse_candidates(&text, Key::C, Mode::Maj, 4);
    assert_eq!((kept.len(), dropped.len()), (28, 2));
}

#[test]
fn prompt_example_line_parses_in_b_major() {
    let p = parse_progression("C#m7 F#7 Bmaj9 d#dim/C", "B".parse().unwrap(), Mode::Maj).unwrap();
    assert_eq!(p.bars(), 4);
}
