use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::pitch::{Accidental, Letter, PitchClass};

/// A tonal center restricted to the twelve spellings the generator accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Key(PitchClass);

const fn spelled(letter: Letter, accidental: Accidental) -> PitchClass {
    PitchClass::new(letter, accidental)
}

impl Key {
    /// Allowed key roots, in circle-of-fifths order.
    pub const ALLOWED: [PitchClass; 12] = [
        spelled(Letter::C, Accidental::Natural),
        spelled(Letter::G, Accidental::Natural),
        spelled(Letter::D, Accidental::Natural),
        spelled(Letter::A, Accidental::Natural),
        spelled(Letter::E, Accidental::Natural),
        spelled(Letter::B, Accidental::Natural),
        spelled(Letter::F, Accidental::Sharp),
        spelled(Letter::D, Accidental::Flat),
        spelled(Letter::A, Accidental::Flat),
        spelled(Letter::E, Accidental::Flat),
        spelled(Letter::B, Accidental::Flat),
        spelled(Letter::F, Accidental::Natural),
    ];

    pub const C: Key = Key(spelled(Letter::C, Accidental::Natural));

    pub fn new(root: PitchClass) -> Result<Key, KeyError> {
        if Key::ALLOWED.contains(&root) {
            Ok(Key(root))
        } else {
            Err(KeyError::UnsupportedKey(root.to_string()))
        }
    }

    pub fn root(self) -> PitchClass {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Key> {
        Key::ALLOWED.into_iter().map(Key)
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for Key {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let root: PitchClass = s
            .trim()
            .parse()
            .map_err(|_| KeyError::UnsupportedKey(s.to_string()))?;
        Key::new(root)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KeyError {
    #[error("unsupported key '{0}': expected one of C, G, D, A, E, B, F#, Db, Ab, Eb, Bb, F")]
    UnsupportedKey(String),
    #[error("unsupported mode '{0}': expected one of Maj, Min, Dor, Phr, Lyd, Mix, Loc, Hmin, Phdm")]
    UnsupportedMode(String),
}

/// Scale type of a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Maj,
    Min,
    Dor,
    Phr,
    Lyd,
    Mix,
    Loc,
    /// Harmonic minor.
    Hmin,
    /// Phrygian dominant.
    Phdm,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::Maj,
        Mode::Min,
        Mode::Dor,
        Mode::Phr,
        Mode::Lyd,
        Mode::Mix,
        Mode::Loc,
        Mode::Hmin,
        Mode::Phdm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Maj => "Maj",
            Mode::Min => "Min",
            Mode::Dor => "Dor",
            Mode::Phr => "Phr",
            Mode::Lyd => "Lyd",
            Mode::Mix => "Mix",
            Mode::Loc => "Loc",
            Mode::Hmin => "Hmin",
            Mode::Phdm => "Phdm",
        }
    }

    /// Semitone offsets of the seven scale degrees from the tonic.
    pub fn scale_intervals(self) -> [u8; 7] {
        match self {
            Mode::Maj => [0, 2, 4, 5, 7, 9, 11],
            Mode::Min => [0, 2, 3, 5, 7, 8, 10],
            Mode::Dor => [0, 2, 3, 5, 7, 9, 10],
            Mode::Phr => [0, 1, 3, 5, 7, 8, 10],
            Mode::Lyd => [0, 2, 4, 6, 7, 9, 11],
            Mode::Mix => [0, 2, 4, 5, 7, 9, 10],
            Mode::Loc => [0, 1, 3, 5, 6, 8, 10],
            Mode::Hmin => [0, 2, 3, 5, 7, 8, 11],
            Mode::Phdm => [0, 1, 4, 5, 7, 8, 10],
        }
    }

    /// Chromatic indices of the scale built on `root`.
    pub fn scale_chromas(self, root: PitchClass) -> [u8; 7] {
        self.scale_intervals().map(|i| (root.chroma() + i) % 12)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = KeyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| KeyError::UnsupportedMode(s.to_string()))
    }
}

macro_rules! string_serde {
    ($ty:ty) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_serde!(Key);
string_serde!(Mode);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_keys_cover_every_chroma_once() {
        let mut chromas: Vec<u8> = Key::all().map(|k| k.root().chroma()).collect();
        chromas.sort();
        assert_eq!(chromas, (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn enharmonic_spellings_outside_the_list_are_rejected() {
        assert!("Gb".parse::<Key>().is_err());
        assert!("C#".parse::<Key>().is_err());
        assert!("F#".parse::<Key>().is_ok());
        assert!("Db".parse::<Key>().is_ok());
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
        }
        assert!("Ionian".parse::<Mode>().is_err());
    }

    #[test]
    fn scales_have_seven_ascending_degrees() {
        for m in Mode::ALL {
            let s = m.scale_intervals();
            assert_eq!(s[0], 0);
            assert!(s.windows(2).all(|w| w[0] < w[1] && w[1] - w[0] <= 3));
        }
        assert_eq!(Mode::Hmin.scale_intervals()[6], 11);
        assert_eq!(Mode::Phdm.scale_intervals()[2], 4);
    }
}
