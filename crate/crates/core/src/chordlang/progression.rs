use std::fmt;

use serde::{Deserialize, Serialize};

use super::chord::{parse_chord, Chord};
use super::key::{Key, Mode};
use super::pitch::PitchClass;
use super::{ParseError, ParseErrorKind};

/// An ordered chord sequence, one chord per bar, written in a key and mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Progression {
    pub chords: Vec<Chord>,
    pub key: Key,
    pub mode: Mode,
}

impl Progression {
    pub fn new(chords: Vec<Chord>, key: Key, mode: Mode) -> Self {
        Self { chords, key, mode }
    }

    pub fn bars(&self) -> usize {
        self.chords.len()
    }

    /// Canonical chord symbols, one per bar.
    pub fn symbols(&self) -> Vec<String> {
        self.chords.iter().map(Chord::to_string).collect()
    }
}

impl fmt::Display for Progression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, chord) in self.chords.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{chord}")?;
        }
        Ok(())
    }
}

/// Parses a whitespace-separated line of chord symbols.
pub fn parse_progression(line: &str, key: Key, mode: Mode) -> Result<Progression, ParseError> {
    let chords = line
        .split_whitespace()
        .enumerate()
        .map(|(i, tok)| parse_chord(tok).map_err(|e| e.at_token(i)))
        .collect::<Result<Vec<_>, _>>()?;
    if chords.is_empty() {
        return Err(ParseError::new(0, ParseErrorKind::Empty));
    }
    Ok(Progression::new(chords, key, mode))
}

fn interval(from: PitchClass, to: PitchClass) -> (i32, i32) {
    let letters = to.letter.index() as i32 - from.letter.index() as i32;
    let semis = to.chroma() as i32 - from.chroma() as i32;
    (letters.rem_euclid(7), semis.rem_euclid(12))
}

/// Shifts chords written relative to `from` so they sit relative to `to`.
pub fn transpose_chords(chords: &[Chord], from: PitchClass, to: PitchClass) -> Vec<Chord> {
    let (letters, semis) = interval(from, to);
    chords.iter().map(|c| c.transpose(letters, semis)).collect()
}

/// Moves a progression to another key, keeping its mode.
pub fn transpose_progression(p: &Progression, target: Key) -> Progression {
    if p.key == target {
        return p.clone();
    }
    Progression {
        chords: transpose_chords(&p.chords, p.key.root(), target.root()),
        key: target,
        mode: p.mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> Key {
        s.parse().unwrap()
    }

    fn prog(line: &str, k: &str) -> Progression {
        parse_progression(line, key(k), Mode::Maj).unwrap()
    }

    #[test]
    fn whole_step_up() {
        let p = prog("Am F C G", "C");
        assert_eq!(transpose_progression(&p, key("D")).to_string(), "Bm G D A");
    }

    #[test]
    fn same_key_is_identity() {
        let p = prog("C", "C");
        assert_eq!(transpose_progression(&p, key("C")), p);
    }

    #[test]
    fn b_major_to_c_major() {
        let p = prog("C#m7 F#7 Bmaj9", "B");
        let t = transpose_progression(&p, key("C"));
        assert_eq!(t.to_string(), "Dm7 G7 Cmaj9");
        assert_eq!(t.key, key("C"));
        assert_eq!(t.mode, Mode::Maj);
    }

    #[test]
    fn slash_bass_moves_with_root() {
        let p = prog("F# B/F# C#/G#", "F#");
        assert_eq!(transpose_progression(&p, key("G")).to_string(), "G C/G D/A");
    }

    #[test]
    fn prompt_example_lines_parse() {
        let p = parse_progression("dm gm/Bb gm dm", key("D"), Mode::Min).unwrap();
        assert_eq!(p.bars(), 4);
        assert_eq!(p.to_string(), "Dm Gm/Bb Gm Dm");
        let p = parse_progression("F# B/F# C#/G#", key("F#"), Mode::Maj).unwrap();
        assert_eq!(p.bars(), 3);
    }

    #[test]
    fn empty_line_is_an_error() {
        let err = parse_progression("", Key::C, Mode::Maj).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Empty);
        let err = parse_progression("   ", Key::C, Mode::Maj).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::Empty);
    }

    #[test]
    fn bad_token_reports_index() {
        let err = parse_progression("C Gmaj Am", Key::C, Mode::Maj).unwrap_err();
        assert_eq!(err.token, Some(1));
    }

    #[test]
    fn gb_minor_up_a_semitone_to_g() {
        let chords: Vec<Chord> = ["Gbm", "Db", "Bbbmaj7", "Ebm/Gb"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let out = transpose_chords(&chords, "Gb".parse().unwrap(), "G".parse().unwrap());
        let rendered: Vec<String> = out.iter().map(Chord::to_string).collect();
        assert_eq!(rendered, ["Gm", "D", "Bbmaj7", "Em/G"]);
    }
}
