//! Chord-symbol grammar, pitch arithmetic, key/mode tables and transposition.
//!
//! A chord symbol is written as
//! `Root [Quality] [Extension] [Sus] [Adds...] [Alterations...] [/Bass]`,
//! e.g. `C#m7`, `Bmaj9`, `D#dim/C`, `Ebm9sus4add13b5#11/Gb`. Progressions are
//! whitespace-separated chord symbols, one chord per bar.

mod chord;
mod key;
mod pitch;
mod progression;

use std::fmt;

pub use chord::{
    canonicalize, parse_chord, render_chord, Added, Alteration, Chord, Degree, Extension, Quality,
    Sus,
};
pub use key::{Key, KeyError, Mode};
pub use pitch::{Accidental, Letter, PitchClass};
pub use progression::{parse_progression, transpose_chords, transpose_progression, Progression};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Empty,
    ExpectedRoot,
    /// `maj` or `min` used as a quality without a fused extension.
    StandaloneQuality(String),
    LowercaseRoot,
    Duplicate(String),
    ExpectedBass,
    Unexpected(String),
}

/// A chord or progression that does not match the grammar.
///
/// `offset` is a byte offset into the chord symbol; `token` is the index of
/// the offending chord when parsing a progression.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub offset: usize,
    pub token: Option<usize>,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub(crate) fn new(offset: usize, kind: ParseErrorKind) -> Self {
        Self {
            offset,
            token: None,
            kind,
        }
    }

    pub(crate) fn empty() -> Self {
        Self::new(0, ParseErrorKind::Empty)
    }

    pub(crate) fn expected_root(offset: usize) -> Self {
        Self::new(offset, ParseErrorKind::ExpectedRoot)
    }

    pub(crate) fn unexpected(offset: usize, rest: &str) -> Self {
        Self::new(offset, ParseErrorKind::Unexpected(rest.to_string()))
    }

    /// Tags the error with the index of the chord it came from.
    pub fn at_token(mut self, index: usize) -> Self {
        self.token = Some(index);
        self
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = self.token {
            write!(f, "chord {t}: ")?;
        }
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty input"),
            ParseErrorKind::ExpectedRoot => {
                write!(f, "expected a root note A-G at byte {}", self.offset)
            }
            ParseErrorKind::StandaloneQuality(q) => write!(
                f,
                "'{q}' at byte {} is not a valid quality on its own (write 'm' for minor, or fuse 'maj' with 7/9/11/13)",
                self.offset
            ),
            ParseErrorKind::LowercaseRoot => {
                write!(f, "a lowercase root must be followed by 'm' or 'dim'")
            }
            ParseErrorKind::Duplicate(t) => {
                write!(f, "duplicate component '{t}' at byte {}", self.offset)
            }
            ParseErrorKind::ExpectedBass => {
                write!(f, "expected a bass note after '/' at byte {}", self.offset)
            }
            ParseErrorKind::Unexpected(rest) => {
                write!(f, "unrecognized token '{rest}' at byte {}", self.offset)
            }
        }
    }
}
