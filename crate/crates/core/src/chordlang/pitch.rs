use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ParseError;

/// Natural note names in scale order starting from C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    C,
    D,
    E,
    F,
    G,
    A,
    B,
}

impl Letter {
    pub const ALL: [Letter; 7] = [
        Letter::C,
        Letter::D,
        Letter::E,
        Letter::F,
        Letter::G,
        Letter::A,
        Letter::B,
    ];

    /// Position in C D E F G A B order.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(index: i32) -> Letter {
        Letter::ALL[index.rem_euclid(7) as usize]
    }

    /// Chromatic index of the natural note (C = 0).
    pub fn natural_chroma(self) -> u8 {
        [0, 2, 4, 5, 7, 9, 11][self as usize]
    }

    pub fn from_char(c: char) -> Option<Letter> {
        match c.to_ascii_uppercase() {
            'C' => Some(Letter::C),
            'D' => Some(Letter::D),
            'E' => Some(Letter::E),
            'F' => Some(Letter::F),
            'G' => Some(Letter::G),
            'A' => Some(Letter::A),
            'B' => Some(Letter::B),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        ['C', 'D', 'E', 'F', 'G', 'A', 'B'][self as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Accidental {
    DoubleFlat,
    Flat,
    Natural,
    Sharp,
    DoubleSharp,
}

impl Accidental {
    pub const ALL: [Accidental; 5] = [
        Accidental::DoubleFlat,
        Accidental::Flat,
        Accidental::Natural,
        Accidental::Sharp,
        Accidental::DoubleSharp,
    ];

    pub fn offset(self) -> i8 {
        self as i8 - 2
    }

    pub fn from_offset(offset: i32) -> Option<Accidental> {
        match offset {
            -2 => Some(Accidental::DoubleFlat),
            -1 => Some(Accidental::Flat),
            0 => Some(Accidental::Natural),
            1 => Some(Accidental::Sharp),
            2 => Some(Accidental::DoubleSharp),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Accidental::DoubleFlat => "bb",
            Accidental::Flat => "b",
            Accidental::Natural => "",
            Accidental::Sharp => "#",
            Accidental::DoubleSharp => "x",
        }
    }

    /// Accidentals whose surface form is a prefix of `rest`, longest first.
    pub(crate) fn prefix_candidates(rest: &str) -> Vec<Accidental> {
        let mut out = Vec::with_capacity(3);
        if rest.starts_with("bb") {
            out.push(Accidental::DoubleFlat);
        }
        if rest.starts_with('b') {
            out.push(Accidental::Flat);
        }
        if rest.starts_with('#') {
            out.push(Accidental::Sharp);
        }
        if rest.starts_with('x') {
            out.push(Accidental::DoubleSharp);
        }
        out.push(Accidental::Natural);
        out
    }
}

/// A spelled pitch class such as `F#` or `Bb`.
///
/// Spelling is significant: `F#` and `Gb` are different values that share a
/// chromatic index. Use [`PitchClass::chroma`] for enharmonic comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PitchClass {
    pub letter: Letter,
    pub accidental: Accidental,
}

impl PitchClass {
    pub const fn new(letter: Letter, accidental: Accidental) -> Self {
        Self { letter, accidental }
    }

    pub const fn natural(letter: Letter) -> Self {
        Self::new(letter, Accidental::Natural)
    }

    pub fn chroma(self) -> u8 {
        (self.letter.natural_chroma() as i32 + self.accidental.offset() as i32).rem_euclid(12) as u8
    }

    /// Sharp-preferring spelling of a chromatic index.
    pub fn sharp_spelling(chroma: u8) -> PitchClass {
        use Accidental::{Natural, Sharp};
        let (letter, acc) = match chroma % 12 {
            0 => (Letter::C, Natural),
            1 => (Letter::C, Sharp),
            2 => (Letter::D, Natural),
            3 => (Letter::D, Sharp),
            4 => (Letter::E, Natural),
            5 => (Letter::F, Natural),
            6 => (Letter::F, Sharp),
            7 => (Letter::G, Natural),
            8 => (Letter::G, Sharp),
            9 => (Letter::A, Natural),
            10 => (Letter::A, Sharp),
            _ => (Letter::B, Natural),
        };
        PitchClass::new(letter, acc)
    }

    /// Moves the letter name by `letter_steps` and the pitch by `semitones`,
    /// choosing the accidental that realizes the new chromatic index. Falls
    /// back to the sharp spelling when that would need more than a double
    /// accidental.
    pub fn transpose(self, letter_steps: i32, semitones: i32) -> PitchClass {
        let letter = Letter::from_index(self.letter.index() as i32 + letter_steps);
        let target = (self.chroma() as i32 + semitones).rem_euclid(12);
        let mut diff = (target - letter.natural_chroma() as i32).rem_euclid(12);
        if diff > 6 {
            diff -= 12;
        }
        match Accidental::from_offset(diff) {
            Some(accidental) => PitchClass::new(letter, accidental),
            None => PitchClass::sharp_spelling(target as u8),
        }
    }

    /// Parses a pitch class at the start of `text`, returning it and the number
    /// of bytes consumed. The letter is case-insensitive; the accidental is
    /// matched greedily.
    pub(crate) fn parse_prefix(text: &str) -> Option<(PitchClass, usize)> {
        let first = text.chars().next()?;
        let letter = Letter::from_char(first)?;
        let accidental = Accidental::prefix_candidates(&text[1..])[0];
        Some((PitchClass::new(letter, accidental), 1 + accidental.symbol().len()))
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.letter.as_char(), self.accidental.symbol())
    }
}

impl FromStr for PitchClass {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match PitchClass::parse_prefix(s) {
            Some((pc, used)) if used == s.len() => Ok(pc),
            Some((_, used)) => Err(ParseError::unexpected(used, &s[used..])),
            None if s.is_empty() => Err(ParseError::empty()),
            None => Err(ParseError::expected_root(0)),
        }
    }
}

impl Serialize for PitchClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PitchClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
