use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::pitch::{Accidental, Letter, PitchClass};
use super::{ParseError, ParseErrorKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quality {
    Maj,
    Min,
    Aug,
    Dim,
}

impl Quality {
    pub const ALL: [Quality; 4] = [Quality::Maj, Quality::Min, Quality::Aug, Quality::Dim];

    /// Surface token; the major triad has none.
    pub fn token(self) -> &'static str {
        match self {
            Quality::Maj => "",
            Quality::Min => "m",
            Quality::Aug => "aug",
            Quality::Dim => "dim",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    Seventh,
    Ninth,
    Eleventh,
    Thirteenth,
}

impl Degree {
    pub const ALL: [Degree; 4] = [
        Degree::Seventh,
        Degree::Ninth,
        Degree::Eleventh,
        Degree::Thirteenth,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Degree::Seventh => "7",
            Degree::Ninth => "9",
            Degree::Eleventh => "11",
            Degree::Thirteenth => "13",
        }
    }

    fn parse_prefix(s: &str) -> Option<Degree> {
        // two-digit degrees first so "11" is not read as a stray "1"
        [
            Degree::Eleventh,
            Degree::Thirteenth,
            Degree::Seventh,
            Degree::Ninth,
        ]
        .into_iter()
        .find(|d| s.starts_with(d.token()))
    }
}

/// Chord extension. `Major` carries the major-seventh flavor (`maj7`, `maj9`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Extension {
    SixNine,
    Dominant(Degree),
    Major(Degree),
}

impl Extension {
    pub fn all() -> impl Iterator<Item = Extension> {
        std::iter::once(Extension::SixNine)
            .chain(Degree::ALL.into_iter().map(Extension::Dominant))
            .chain(Degree::ALL.into_iter().map(Extension::Major))
    }
}

impl fmt::Display for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extension::SixNine => f.write_str("6/9"),
            Extension::Dominant(d) => f.write_str(d.token()),
            Extension::Major(d) => write!(f, "maj{}", d.token()),
        }
    }
}

macro_rules! token_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $tok:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $tok),+
                }
            }

            /// Longest token that prefixes `s`.
            fn parse_prefix(s: &str) -> Option<$name> {
                $name::ALL
                    .iter()
                    .copied()
                    .filter(|v| s.starts_with(v.token()))
                    .max_by_key(|v| v.token().len())
            }
        }
    };
}

token_enum!(Sus {
    Sus2 => "sus2",
    Sus4 => "sus4",
    SharpSus2 => "sus#2",
    SharpSus4 => "sus#4",
});

token_enum!(
    /// Added tones, rendered in declaration order.
    Added {
        Add2 => "add2",
        Add4 => "add4",
        Add6 => "add6",
        Add9 => "add9",
        Add11 => "add11",
        Add13 => "add13",
    }
);

token_enum!(
    /// Altered tones, rendered in declaration order.
    Alteration {
        Flat5 => "b5",
        Sharp5 => "#5",
        Flat9 => "b9",
        Sharp9 => "#9",
        Sharp11 => "#11",
        Flat13 => "b13",
    }
);

/// A structured chord symbol.
///
/// Components render in the fixed order root, quality, extension, sus, adds,
/// alterations, slash bass. Equality is spelling-sensitive; see
/// [`Chord::chromatic_eq`] for enharmonic comparison.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chord {
    pub root: PitchClass,
    pub quality: Quality,
    pub extension: Option<Extension>,
    pub sus: Option<Sus>,
    pub adds: BTreeSet<Added>,
    pub alterations: BTreeSet<Alteration>,
    pub bass: Option<PitchClass>,
}

impl Chord {
    pub fn triad(root: PitchClass, quality: Quality) -> Chord {
        Chord {
            root,
            quality,
            extension: None,
            sus: None,
            adds: BTreeSet::new(),
            alterations: BTreeSet::new(),
            bass: None,
        }
    }

    pub fn with_extension(mut self, ext: Extension) -> Self {
        self.extension = Some(ext);
        self
    }

    pub fn with_bass(mut self, bass: PitchClass) -> Self {
        self.bass = Some(bass);
        self
    }

    /// Same chord up to enharmonic respelling of root and bass.
    pub fn chromatic_eq(&self, other: &Chord) -> bool {
        self.root.chroma() == other.root.chroma()
            && self.bass.map(PitchClass::chroma) == other.bass.map(PitchClass::chroma)
            && self.quality == other.quality
            && self.extension == other.extension
            && self.sus == other.sus
            && self.adds == other.adds
            && self.alterations == other.alterations
    }

    pub fn transpose(&self, letter_steps: i32, semitones: i32) -> Chord {
        Chord {
            root: self.root.transpose(letter_steps, semitones),
            bass: self.bass.map(|b| b.transpose(letter_steps, semitones)),
            ..self.clone()
        }
    }

    /// Alterations written directly after the root would merge with the root's
    /// accidental (`C` + `#9` reads as `C#9`), so they are parenthesized.
    fn alterations_need_parens(&self) -> bool {
        !self.alterations.is_empty()
            && self.quality == Quality::Maj
            && self.extension.is_none()
            && self.sus.is_none()
            && self.adds.is_empty()
    }
}

impl fmt::Display for Chord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.root, self.quality.token())?;
        if let Some(ext) = self.extension {
            write!(f, "{ext}")?;
        }
        if let Some(sus) = self.sus {
            f.write_str(sus.token())?;
        }
        for add in &self.adds {
            f.write_str(add.token())?;
        }
        let parens = self.alterations_need_parens();
        if parens {
            f.write_str("(")?;
        }
        for alt in &self.alterations {
            f.write_str(alt.token())?;
        }
        if parens {
            f.write_str(")")?;
        }
        if let Some(bass) = self.bass {
            write!(f, "/{bass}")?;
        }
        Ok(())
    }
}

/// Parses one chord symbol.
///
/// The root letter may be lowercase only when followed by `m` or `dim`
/// (`dm`, `d#dim/C`); the rendered form always uses an uppercase root.
/// A bare `maj` or `min` quality (`Gmaj`, `Cmin`) is rejected.
pub fn parse_chord(text: &str) -> Result<Chord, ParseError> {
    if text.is_empty() {
        return Err(ParseError::empty());
    }
    let first = text.chars().next().expect("non-empty");
    let Some(letter) = Letter::from_char(first) else {
        return Err(ParseError::expected_root(0));
    };
    let lowercase = first.is_ascii_lowercase();
    let after_letter = &text[1..];

    // The root accidental can collide with a following alteration ("Cb5" is
    // C with a flat fifth), so try each accidental reading, longest first.
    let mut best_err: Option<ParseError> = None;
    for accidental in Accidental::prefix_candidates(after_letter) {
        let root = PitchClass::new(letter, accidental);
        let start = 1 + accidental.symbol().len();
        match Suffix::new(text, start).finish(root, lowercase) {
            Ok(chord) => return Ok(chord),
            Err(e) => {
                if best_err.as_ref().is_none_or(|b| e.offset > b.offset) {
                    best_err = Some(e);
                }
            }
        }
    }
    Err(best_err.expect("at least one candidate"))
}

/// Renders a chord to its canonical symbol.
pub fn render_chord(chord: &Chord) -> String {
    chord.to_string()
}

/// Canonical spelling of a chord symbol.
pub fn canonicalize(text: &str) -> Result<String, ParseError> {
    parse_chord(text).map(|c| c.to_string())
}

struct Suffix<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Suffix<'a> {
    fn new(text: &'a str, pos: usize) -> Self {
        Self { text, pos }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn eat(&mut self, token: &str) -> bool {
        if self.rest().starts_with(token) {
            self.pos += token.len();
            true
        } else {
            false
        }
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError::new(self.pos, kind)
    }

    fn finish(mut self, root: PitchClass, lowercase_root: bool) -> Result<Chord, ParseError> {
        let mut chord = Chord::triad(root, Quality::Maj);

        // quality (maj is only legal fused with an extension)
        if self.rest().starts_with("maj") {
            if Degree::parse_prefix(&self.rest()[3..]).is_none() {
                return Err(self.err(ParseErrorKind::StandaloneQuality("maj".into())));
            }
        } else if self.rest().starts_with("min") {
            return Err(self.err(ParseErrorKind::StandaloneQuality("min".into())));
        } else if self.eat("dim") {
            chord.quality = Quality::Dim;
        } else if self.eat("aug") {
            chord.quality = Quality::Aug;
        } else if self.rest().starts_with('m') && !self.rest().starts_with("maj") {
            self.pos += 1;
            chord.quality = Quality::Min;
        }
        if lowercase_root && !matches!(chord.quality, Quality::Min | Quality::Dim) {
            return Err(ParseError::new(0, ParseErrorKind::LowercaseRoot));
        }

        // extension
        if self.eat("6/9") {
            chord.extension = Some(Extension::SixNine);
        } else if self.rest().starts_with("maj") {
            match Degree::parse_prefix(&self.rest()[3..]) {
                Some(d) => {
                    self.pos += 3 + d.token().len();
                    chord.extension = Some(Extension::Major(d));
                }
                None => return Err(self.err(ParseErrorKind::StandaloneQuality("maj".into()))),
            }
        } else if let Some(d) = Degree::parse_prefix(self.rest()) {
            self.pos += d.token().len();
            chord.extension = Some(Extension::Dominant(d));
        }

        if let Some(sus) = Sus::parse_prefix(self.rest()) {
            self.pos += sus.token().len();
            chord.sus = Some(sus);
        }

        while let Some(add) = Added::parse_prefix(self.rest()) {
            if !chord.adds.insert(add) {
                return Err(self.err(ParseErrorKind::Duplicate(add.token().into())));
            }
            self.pos += add.token().len();
        }

        let parens = self.eat("(");
        while let Some(alt) = Alteration::parse_prefix(self.rest()) {
            if !chord.alterations.insert(alt) {
                return Err(self.err(ParseErrorKind::Duplicate(alt.token().into())));
            }
            self.pos += alt.token().len();
        }
        if parens && (chord.alterations.is_empty() || !self.eat(")")) {
            return Err(self.err(ParseErrorKind::Unexpected(self.rest().into())));
        }

        if self.eat("/") {
            // a dangling slash with no bass note reads as no slash at all
            if !self.rest().is_empty() {
                match PitchClass::parse_prefix(self.rest()) {
                    Some((bass, used)) => {
                        self.pos += used;
                        chord.bass = Some(bass);
                    }
                    None => return Err(self.err(ParseErrorKind::ExpectedBass)),
                }
            }
        }

        if !self.rest().is_empty() {
            return Err(self.err(ParseErrorKind::Unexpected(self.rest().into())));
        }
        Ok(chord)
    }
}

impl FromStr for Chord {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_chord(s)
    }
}

impl Serialize for Chord {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Chord {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
