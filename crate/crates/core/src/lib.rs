//! Keyword-driven chord progression suggestion.
//!
//! Candidates proposed by a language model are filtered by rejection sampling
//! against a recurrent chord prior trained on human-written progressions.

pub mod chordlang;
pub mod corpus;
pub mod evalkit;
pub mod llmgate;
pub mod sampler;
pub mod seqmodel;
