//! Corpus ingest, normalization to C, the shared token vocabulary, and
//! sequence encoding for the chord priors.
//!
//! Corpora are JSONL, one progression per line:
//!
//! ```text
//! {"key":"C","mode":"Maj","chords":["C","Am","F","G"],"source":"human_corpus"}
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chordlang::{
    parse_chord, transpose_progression, Key, Mode, ParseError, Progression,
};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const UNK: u32 = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];
/// Literal emitted when decoding the unknown-token id.
pub const UNK_SYMBOL: &str = "UNK";

/// Share of malformed lines above which a corpus file is refused.
const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Format(String),
    #[error("writing vocabulary: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    HumanCorpus,
    LlmGenerated,
}

/// One progression from a corpus file, with chords stored in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub key: Key,
    pub mode: Mode,
    pub chords: Vec<String>,
    pub source: Source,
}

impl CorpusRecord {
    pub fn from_progression(p: &Progression, source: Source) -> Self {
        Self {
            key: p.key,
            mode: p.mode,
            chords: p.symbols(),
            source,
        }
    }

    pub fn progression(&self) -> Result<Progression, ParseError> {
        let chords = self
            .chords
            .iter()
            .enumerate()
            .map(|(i, s)| parse_chord(s).map_err(|e| e.at_token(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Progression::new(chords, self.key, self.mode))
    }
}

#[derive(Debug, Deserialize)]
struct RecordLine {
    key: String,
    mode: String,
    chords: Vec<String>,
    #[serde(default)]
    source: Option<Source>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub records: Vec<CorpusRecord>,
    pub skipped: Vec<SkippedLine>,
}

fn parse_record_line(line: &str, source: Source) -> Result<CorpusRecord, String> {
    let raw: RecordLine = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let key: Key = raw.key.parse().map_err(|e: crate::chordlang::KeyError| e.to_string())?;
    let mode: Mode = raw.mode.parse().map_err(|e: crate::chordlang::KeyError| e.to_string())?;
    if raw.chords.is_empty() {
        return Err("no chords".into());
    }
    let chords = raw
        .chords
        .iter()
        .map(|s| parse_chord(s.trim()).map(|c| c.to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(CorpusRecord {
        key,
        mode,
        chords,
        source: raw.source.unwrap_or(source),
    })
}

/// Parses corpus text. Malformed lines are skipped and reported; more than
/// 10% malformed (or no records at all) is a format error.
pub fn parse_corpus(text: &str, source: Source) -> Result<LoadedCorpus, CorpusError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        match parse_record_line(line, source) {
            Ok(r) => records.push(r),
            Err(reason) => {
                log::warn!("corpus line {}: {}", i + 1, reason);
                skipped.push(SkippedLine { line: i + 1, reason });
            }
        }
    }
    if seen == 0 {
        return Err(CorpusError::Format("corpus contains no records".into()));
    }
    if skipped.len() as f64 > MAX_MALFORMED_FRACTION * seen as f64 {
        return Err(CorpusError::Format(format!(
            "{} of {} lines malformed (first at line {})",
            skipped.len(),
            seen,
            skipped[0].line
        )));
    }
    Ok(LoadedCorpus { records, skipped })
}

pub fn load_corpus(path: impl AsRef<Path>, source: Source) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_corpus(&text, source)
}

pub fn write_corpus(path: impl AsRef<Path>, records: &[CorpusRecord]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|source| CorpusError::Io {
        path: path.to_owned(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NormalizeOptions {
    /// Bar count kept for training; `None` keeps every length.
    pub bars: Option<usize>,
    /// Drop exact duplicate progressions (after transposition) from training.
    pub dedup: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        Self {
            bars: Some(4),
            dedup: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NormalizedCorpus {
    /// Every record, transposed to C.
    pub raw: Vec<CorpusRecord>,
    /// The subset used for training.
    pub training: Vec<CorpusRecord>,
}

/// Transposes every record to C (mode preserved) and selects the training set.
pub fn normalize_to_c(records: &[CorpusRecord], opts: NormalizeOptions) -> NormalizedCorpus {
    let raw: Vec<CorpusRecord> = records
        .iter()
        .map(|r| {
            let p = r.progression().expect("corpus records hold canonical chords");
            CorpusRecord::from_progression(&transpose_progression(&p, Key::C), r.source)
        })
        .collect();
    let mut seen = HashSet::new();
    let training = raw
        .iter()
        .filter(|r| opts.bars.is_none_or(|b| r.chords.len() == b))
        .filter(|r| !opts.dedup || seen.insert((r.mode, r.chords.clone())))
        .cloned()
        .collect();
    NormalizedCorpus { raw, training }
}

#[derive(Debug, Serialize, Deserialize)]
struct VocabFile {
    version: String,
    reserved: Vec<String>,
    tokens: Vec<String>,
}

/// Chord-token vocabulary shared by both priors.
///
/// Ids 0..4 are reserved (PAD, BOS, EOS, UNK); chord tokens follow in order of
/// descending corpus frequency, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenVocab {
    version: String,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl TokenVocab {
    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32 + RESERVED.len() as u32))
            .collect();
        let mut hasher = Sha256::new();
        for t in RESERVED.iter().copied().chain(tokens.iter().map(String::as_str)) {
            hasher.update(t.as_bytes());
            hasher.update([0u8]);
        }
        let digest = hex::encode(hasher.finalize());
        Self {
            version: format!("v1-{}", &digest[..16]),
            tokens,
            index,
        }
    }

    /// Content-derived stamp; identical token lists give identical versions.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Total id count including reserved ids.
    pub fn len(&self) -> usize {
        self.tokens.len() + RESERVED.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Non-reserved chord tokens in id order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        match id as usize {
            i if i < RESERVED.len() => Some(RESERVED[i]),
            i => self.tokens.get(i - RESERVED.len()).map(String::as_str),
        }
    }

    pub fn is_reserved(id: u32) -> bool {
        (id as usize) < RESERVED.len()
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            version: self.version.clone(),
            reserved: RESERVED.iter().map(|s| s.to_string()).collect(),
            tokens: self.tokens.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("vocab serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, CorpusError> {
        let file: VocabFile = serde_json::from_str(text)?;
        if file.reserved != RESERVED {
            return Err(CorpusError::Format("vocabulary reserved tokens differ".into()));
        }
        let vocab = TokenVocab::from_tokens(file.tokens);
        if vocab.version != file.version {
            return Err(CorpusError::Format(format!(
                "vocabulary version stamp {} does not match its tokens ({})",
                file.version, vocab.version
            )));
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Builds the vocabulary over records from both corpora. Tokens seen fewer
/// than `min_freq` times are left out and encode as UNK.
pub fn build_vocab(records: &[CorpusRecord], min_freq: usize) -> TokenVocab {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        for c in &r.chords {
            *counts.entry(c.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_freq.max(1))
        .collect();
    // BTreeMap iteration is lexicographic, so a stable sort by count keeps ties ordered
    ranked.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    TokenVocab::from_tokens(ranked.into_iter().map(|(t, _)| t.to_string()).collect())
}

/// `[BOS, chord ids..., EOS]`, with out-of-vocabulary chords mapped to UNK.
pub fn encode_symbols<S: AsRef<str>>(symbols: &[S], vocab: &TokenVocab) -> Vec<u32> {
    let mut ids = Vec::with_capacity(symbols.len() + 2);
    ids.push(BOS);
    ids.extend(symbols.iter().map(|s| vocab.id(s.as_ref()).unwrap_or(UNK)));
    ids.push(EOS);
    ids
}

pub fn encode(p: &Progression, vocab: &TokenVocab) -> Vec<u32> {
    encode_symbols(&p.symbols(), vocab)
}

/// Chord strings for the ids, skipping PAD/BOS/EOS. UNK and unknown ids decode
/// to the literal `UNK`.
pub fn decode(ids: &[u32], vocab: &TokenVocab) -> Vec<String> {
    ids.iter()
        .filter(|&&id| !matches!(id, PAD | BOS | EOS))
        .map(|&id| match id {
            UNK => UNK_SYMBOL.to_string(),
            _ => vocab.token(id).unwrap_or(UNK_SYMBOL).to_string(),
        })
        .collect()
}

/// Train/validation split of encoded sequences.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Vec<u32>>,
    pub validation: Vec<Vec<u32>>,
    pub validation_ratio: f64,
    pub seed: u64,
}

impl DatasetSplit {
    /// Shuffles with `seed` and holds out `validation_ratio` of the sequences
    /// (at least one when there are two or more).
    pub fn new(mut sequences: Vec<Vec<u32>>, validation_ratio: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sequences.shuffle(&mut rng);
        let n = sequences.len();
        let mut n_val = (n as f64 * validation_ratio.clamp(0.0, 1.0)).round() as usize;
        if n >= 2 {
            n_val = n_val.clamp(1, n - 1);
        } else {
            n_val = 0;
        }
        let train = sequences.split_off(n_val);
        Self {
            train,
            validation: sequences,
            validation_ratio,
            seed,
        }
    }

    pub fn from_records(
        records: &[CorpusRecord],
        vocab: &TokenVocab,
        validation_ratio: f64,
        seed: u64,
    ) -> Self {
        let seqs = records
            .iter()
            .map(|r| encode_symbols(&r.chords, vocab))
            .collect();
        Self::new(seqs, validation_ratio, seed)
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordlang::parse_progression;

    fn record(key: &str, mode: &str, chords: &[&str]) -> CorpusRecord {
        CorpusRecord {
            key: key.parse().unwrap(),
            mode: mode.parse().unwrap(),
            chords: chords.iter().map(|s| s.to_string()).collect(),
            source: Source::HumanCorpus,
        }
    }

    #[test]
    fn schema_example_line() {
        let c = parse_corpus(
            r#"{"key":"C","mode":"Maj","chords":["C","Am","F","G"]}"#,
            Source::HumanCorpus,
        )
        .unwrap();
        assert_eq!(c.records, vec![record("C", "Maj", &["C", "Am", "F", "G"])]);
        assert!(c.skipped.is_empty());
    }

    #[test]
    fn malformed_lines_are_reported() {
        // one bad line in three is above the 10% budget
        let text = concat!(
            r#"{"key":"C","mode":"Maj","chords":["C","G"]}"#,
            "\n",
            r#"{"key":"C","mode":"Maj","chords":["Gmaj"]}"#,
            "\n",
            r#"{"key":"G","mode":"Min","chords":["Gm","D"]}"#,
            "\n"
        );
        let err = parse_corpus(text, Source::HumanCorpus).unwrap_err();
        assert!(matches!(err, CorpusError::Format(_)));

        let mut text = String::new();
        for _ in 0..10 {
            text.push_str(r#"{"key":"C","mode":"Maj","chords":["C","G"]}"#);
            text.push('\n');
        }
        text.push_str("not json\n");
        let c = parse_corpus(&text, Source::LlmGenerated).unwrap();
        assert_eq!(c.records.len(), 10);
        assert_eq!(c.skipped.len(), 1);
        assert_eq!(c.skipped[0].line, 11);
        assert!(c.records.iter().all(|r| r.source == Source::LlmGenerated));
    }

    #[test]
    fn empty_corpus_is_a_format_error() {
        assert!(matches!(
            parse_corpus("", Source::HumanCorpus),
            Err(CorpusError::Format(_))
        ));
        assert!(matches!(
            parse_corpus("\n\n", Source::HumanCorpus),
            Err(CorpusError::Format(_))
        ));
    }

    #[test]
    fn chords_are_canonicalized_on_load() {
        let c = parse_corpus(
            r#"{"key":"D","mode":"Min","chords":["dm","gm/Bb","gm","dm"]}"#,
            Source::HumanCorpus,
        )
        .unwrap();
        assert_eq!(c.records[0].chords, ["Dm", "Gm/Bb", "Gm", "Dm"]);
    }

    #[test]
    fn normalize_transposes_and_filters() {
        let records = vec![
            record("D", "Maj", &["Bm", "G", "D", "A"]),
            record("C", "Maj", &["C", "Am", "F", "G"]),
            record("G", "Maj", &["G", "C", "D"]),
        ];
        let n = normalize_to_c(&records, NormalizeOptions::default());
        assert_eq!(n.raw.len(), 3);
        assert_eq!(n.training.len(), 2);
        assert_eq!(n.training[0].chords, ["Am", "F", "C", "G"]);
        assert_eq!(n.training[1].chords, ["C", "Am", "F", "G"]);
        assert_eq!(n.raw[2].chords, ["C", "F", "G"]);
        assert!(n.raw.iter().all(|r| r.key == Key::C));

        let again = normalize_to_c(&n.raw, NormalizeOptions { bars: None, dedup: false });
        assert_eq!(again.raw, n.raw);
    }

    #[test]
    fn dedup_is_opt_in() {
        let records = vec![
            record("C", "Maj", &["C", "Am", "F", "G"]),
            record("D", "Maj", &["D", "Bm", "G", "A"]),
        ];
        assert_eq!(normalize_to_c(&records, NormalizeOptions::default()).training.len(), 2);
        let opts = NormalizeOptions { dedup: true, ..Default::default() };
        assert_eq!(normalize_to_c(&records, opts).training.len(), 1);
    }

    #[test]
    fn vocab_reserved_then_frequency_order() {
        let v = build_vocab(&[record("C", "Maj", &["C", "G"])], 1);
        assert_eq!(v.len(), 6);
        assert_eq!(v.tokens(), ["C", "G"]);
        assert_eq!(v.token(BOS), Some("<bos>"));
        assert_eq!(v.id("C"), Some(4));

        let v = build_vocab(
            &[
                record("C", "Maj", &["G", "F", "C", "G"]),
                record("C", "Maj", &["Am", "F", "G"]),
            ],
            1,
        );
        assert_eq!(v.tokens(), ["G", "F", "Am", "C"]);
    }

    #[test]
    fn vocab_is_deterministic_and_persists() {
        let recs = vec![record("C", "Maj", &["C", "Am", "F", "G", "Em"])];
        let a = build_vocab(&recs, 1);
        let b = build_vocab(&recs, 1);
        assert_eq!(a.to_json(), b.to_json());
        let back = TokenVocab::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
        let tampered = a.to_json().replace("\"Em\"", "\"E\"");
        assert!(TokenVocab::from_json(&tampered).is_err());
    }

    #[test]
    fn rare_tokens_become_unk() {
        let recs = vec![
            record("C", "Maj", &["C", "G", "C"]),
            record("C", "Maj", &["G", "Fx13b9"]),
        ];
        let v = build_vocab(&recs, 2);
        assert_eq!(v.id("Fx13b9"), None);
        assert_eq!(encode_symbols(&["C", "Fx13b9"], &v), vec![BOS, v.id("C").unwrap(), UNK, EOS]);
    }

    #[test]
    fn encode_decode_round_trip() {
        let v = build_vocab(&[record("C", "Maj", &["C", "Am", "F", "G"])], 1);
        let p = parse_progression("C Am F G", Key::C, Mode::Maj).unwrap();
        let ids = encode(&p, &v);
        assert_eq!(
            ids,
            vec![BOS, v.id("C").unwrap(), v.id("Am").unwrap(), v.id("F").unwrap(), v.id("G").unwrap(), EOS]
        );
        assert_eq!(decode(&ids, &v), p.symbols());
        assert_eq!(decode(&[BOS, UNK, EOS], &v), ["UNK"]);
    }

    #[test]
    fn split_is_disjoint_and_reproducible() {
        let seqs: Vec<Vec<u32>> = (0..50).map(|i| vec![BOS, i + 4, EOS]).collect();
        let a = DatasetSplit::new(seqs.clone(), 0.2, 7);
        let b = DatasetSplit::new(seqs.clone(), 0.2, 7);
        assert_eq!(a.train, b.train);
        assert_eq!(a.validation.len(), 10);
        let train: HashSet<_> = a.train.iter().collect();
        assert!(a.validation.iter().all(|v| !train.contains(v)));
        let c = DatasetSplit::new(seqs, 0.2, 8);
        assert_ne!(a.train, c.train);
    }
}
