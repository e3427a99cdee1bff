//! Post-processing for OCR output: extract "clean" word lists whose entries
//! are correct with near-certainty, bound the residual error rate, and
//! exercise the whole pipeline on synthetic pages.
//!
//! The pipeline keeps an output word only when three independent filters
//! agree: the word is in the dictionary, no other dictionary word sits within
//! modified Hamming distance 1 of it (or, aggressively, any such neighbor is
//! absent from the rest of the document), and every one of its glyphs is
//! visually dominated by same-labeled glyphs elsewhere on the page.

pub mod bound;
pub mod cli;
pub mod consistency;
pub mod corrector;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod lexicon;
pub mod pipeline;
pub mod similarity;
pub mod synth;

pub use error::{Error, Result};
