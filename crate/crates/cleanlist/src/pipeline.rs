//! The clean-list pipeline: dictionary membership, modified-Hamming ball
//! isolation, then per-glyph domination.
//!
//! Conservative mode demands an empty radius-1 ball around the word.
//! Aggressive mode tolerates ball neighbors as long as none of them occurs
//! as the normalized text of any other word in the document.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{dominate_check, word_reliability, ConsistencyParams, DominationOutcome};
use crate::error::{Error, Result};
use crate::ingest::{BBox, GlyphExtraction, OcrWord};
use crate::lexicon::{neighbors_within, normalize_token, ConfusionTable, Lexicon};
use crate::similarity::GlyphPool;

pub const CLEAN_TSV_HEADER: &str = "word_id\tpage\tleft\ttop\tright\tbottom\tmode\ttext";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Conservative,
    Aggressive,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Conservative => write!(f, "conservative"),
            Mode::Aggressive => write!(f, "aggressive"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(Mode::Conservative),
            "aggressive" => Ok(Mode::Aggressive),
            other => Err(Error::Usage(format!(
                "mode must be `conservative` or `aggressive`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub consistency: ConsistencyParams,
    pub confusions: ConfusionTable,
    /// Words with fewer characters than this are dropped with the
    /// non-dictionary words. The default of 1 disables the filter.
    pub min_word_length: usize,
}

impl PipelineConfig {
    pub fn new(mode: Mode) -> Self {
        PipelineConfig {
            mode,
            consistency: ConsistencyParams::default(),
            confusions: ConfusionTable::default(),
            min_word_length: 1,
        }
    }
}

/// Why a word did or did not make the list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WordFate {
    Kept,
    /// Skipped before step 1: the engine's own segmentation disagreed.
    Flagged,
    NotDictionary,
    NeighborBall,
    Consistency,
}

#[derive(Debug, Clone, Serialize)]
pub struct WordDecision {
    pub word_id: u32,
    pub fate: WordFate,
    /// Normalized token, when one exists.
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanEntry {
    pub word_id: u32,
    pub page: u32,
    pub bbox: BBox,
    /// Normalized token of the accepted word.
    pub text: String,
    /// Where each glyph's domination scan stopped, in character order.
    pub stop_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanStats {
    pub mode: Mode,
    pub total_words: u64,
    pub flagged_words: u64,
    /// Words whose normalized token is in the lexicon.
    pub dictionary_words: u64,
    pub dropped_not_dictionary: u64,
    pub dropped_neighbor_ball: u64,
    pub dropped_consistency: u64,
    pub kept: u64,
}

#[derive(Debug, Clone)]
pub struct CleanList {
    pub mode: Mode,
    pub entries: Vec<CleanEntry>,
    pub decisions: Vec<WordDecision>,
    pub stats: CleanStats,
}

impl CleanList {
    pub fn word_ids(&self) -> Vec<u32> {
        self.entries.iter().map(|e| e.word_id).collect()
    }
}

/// Supplies per-glyph domination outcomes for a word, one per extracted
/// glyph in character order. Fewer outcomes than characters means glyphs
/// were skipped at extraction.
pub trait OutcomeProvider: Sync {
    fn outcomes(&self, word: &OcrWord) -> Vec<DominationOutcome>;
}

/// The production provider: ranks each glyph against the whole document
/// pool and runs the domination scan on demand.
pub struct DocumentChecker<'a> {
    pool: &'a GlyphPool,
    params: ConsistencyParams,
    by_word: BTreeMap<u32, Vec<u32>>,
}

impl<'a> DocumentChecker<'a> {
    pub fn new(
        pool: &'a GlyphPool,
        extraction: &GlyphExtraction,
        params: ConsistencyParams,
    ) -> Self {
        let mut by_word: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for g in &extraction.glyphs {
            by_word.entry(g.word_id).or_default().push(g.glyph_id);
        }
        DocumentChecker {
            pool,
            params,
            by_word,
        }
    }
}

impl OutcomeProvider for DocumentChecker<'_> {
    fn outcomes(&self, word: &OcrWord) -> Vec<DominationOutcome> {
        let Some(glyph_ids) = self.by_word.get(&word.word_id) else {
            return Vec::new();
        };
        glyph_ids
            .iter()
            .map(|&gid| {
                let entry = self.pool.entry(gid).expect("pool glyph");
                let ranked = self.pool.rank_similar(gid, self.params.max_neighbors);
                dominate_check(entry.label, &ranked, &self.params)
            })
            .collect()
    }
}

/// Runs the three-step filter over a document.
pub fn build_clean_list(
    words: &[OcrWord],
    lexicon: &Lexicon,
    provider: &dyn OutcomeProvider,
    config: &PipelineConfig,
) -> Result<CleanList> {
    config.consistency.validate()?;

    // Document-wide occurrence counts of normalized tokens, used by the
    // aggressive neighbor rule. All engine output counts, flagged or not.
    let mut doc_counts: BTreeMap<&str, u32> = BTreeMap::new();
    let tokens: Vec<Option<String>> = words.iter().map(|w| normalize_token(&w.text)).collect();
    for tok in tokens.iter().flatten() {
        *doc_counts.entry(tok).or_insert(0) += 1;
    }

    let assessed: Vec<(WordDecision, Option<CleanEntry>)> = words
        .par_iter()
        .zip(&tokens)
        .map(|(word, token)| assess_word(word, token.as_deref(), lexicon, &doc_counts, provider, config))
        .collect();

    let mut entries = Vec::new();
    let mut decisions = Vec::with_capacity(assessed.len());
    let mut stats = CleanStats {
        mode: config.mode,
        total_words: words.len() as u64,
        flagged_words: 0,
        dictionary_words: 0,
        dropped_not_dictionary: 0,
        dropped_neighbor_ball: 0,
        dropped_consistency: 0,
        kept: 0,
    };
    for ((decision, entry), token) in assessed.into_iter().zip(&tokens) {
        if decision.fate != WordFate::Flagged {
            if let Some(tok) = token {
                if lexicon.contains(tok) {
                    stats.dictionary_words += 1;
                }
            }
        }
        match decision.fate {
            WordFate::Kept => stats.kept += 1,
            WordFate::Flagged => stats.flagged_words += 1,
            WordFate::NotDictionary => stats.dropped_not_dictionary += 1,
            WordFate::NeighborBall => stats.dropped_neighbor_ball += 1,
            WordFate::Consistency => stats.dropped_consistency += 1,
        }
        decisions.push(decision);
        entries.extend(entry);
    }
    debug_assert_eq!(
        stats.flagged_words
            + stats.dropped_not_dictionary
            + stats.dropped_neighbor_ball
            + stats.dropped_consistency
            + stats.kept,
        stats.total_words
    );
    Ok(CleanList {
        mode: config.mode,
        entries,
        decisions,
        stats,
    })
}

fn assess_word(
    word: &OcrWord,
    token: Option<&str>,
    lexicon: &Lexicon,
    doc_counts: &BTreeMap<&str, u32>,
    provider: &dyn OutcomeProvider,
    config: &PipelineConfig,
) -> (WordDecision, Option<CleanEntry>) {
    let decision = |fate| WordDecision {
        word_id: word.word_id,
        fate,
        token: token.map(str::to_string),
    };

    if word.segmentation_inconsistent {
        return (decision(WordFate::Flagged), None);
    }
    let Some(token_str) = token else {
        return (decision(WordFate::NotDictionary), None);
    };
    if token_str.chars().count() < config.min_word_length || !lexicon.contains(token_str) {
        return (decision(WordFate::NotDictionary), None);
    }

    let neighbors = neighbors_within(lexicon, token_str, 1, &config.confusions);
    let blocked = match config.mode {
        Mode::Conservative => !neighbors.is_empty(),
        // A neighbor only blocks when it occurs as some other word's token.
        // Neighbors never equal this word's own token, so any occurrence is
        // an occurrence elsewhere.
        Mode::Aggressive => neighbors
            .iter()
            .any(|n| doc_counts.get(n).copied().unwrap_or(0) > 0),
    };
    if blocked {
        return (decision(WordFate::NeighborBall), None);
    }

    let outcomes = provider.outcomes(word);
    if !word_reliability(word, &outcomes) {
        return (decision(WordFate::Consistency), None);
    }
    let entry = CleanEntry {
        word_id: word.word_id,
        page: word.page,
        bbox: word.bbox,
        text: token_str.to_string(),
        stop_indices: outcomes.iter().map(|o| o.stop_index).collect(),
    };
    (decision(WordFate::Kept), Some(entry))
}

pub fn serialize_clean_tsv(list: &CleanList) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(CLEAN_TSV_HEADER);
    out.push('\n');
    for e in &list.entries {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            e.word_id, e.page, e.bbox.left, e.bbox.top, e.bbox.right, e.bbox.bottom,
            list.mode, e.text
        )
        .unwrap();
    }
    out
}

/// Reads back a clean-list TSV. Stop indices are diagnostics and are not
/// serialized, so they come back empty.
pub fn parse_clean_tsv(text: &str, origin: &Path) -> Result<(Mode, Vec<CleanEntry>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CLEAN_TSV_HEADER => {}
        _ => {
            return Err(Error::parse(
                origin,
                1,
                format!("expected header `{CLEAN_TSV_HEADER}`"),
            ))
        }
    }
    let mut mode: Option<Mode> = None;
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected 8 tab-separated fields, got {}", fields.len()),
            ));
        }
        let num = |s: &str, name: &str| -> Result<u32> {
            s.parse()
                .map_err(|_| Error::parse(origin, line_no, format!("invalid {name} `{s}`")))
        };
        let row_mode: Mode = fields[6]
            .parse()
            .map_err(|_| Error::parse(origin, line_no, format!("invalid mode `{}`", fields[6])))?;
        match mode {
            None => mode = Some(row_mode),
            Some(m) if m == row_mode => {}
            Some(m) => {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("mixed modes in one list: {m} and {row_mode}"),
                ))
            }
        }
        let (left, top) = (num(fields[2], "left")?, num(fields[3], "top")?);
        let (right, bottom) = (num(fields[4], "right")?, num(fields[5], "bottom")?);
        if left >= right || top >= bottom {
            return Err(Error::parse(origin, line_no, "degenerate box".to_string()));
        }
        entries.push(CleanEntry {
            word_id: num(fields[0], "word_id")?,
            page: num(fields[1], "page")?,
            bbox: BBox { left, top, right, bottom },
            text: fields[7].to_string(),
            stop_indices: Vec::new(),
        });
    }
    let mode = mode.ok_or_else(|| Error::parse(origin, 1, "empty clean list".to_string()))?;
    Ok((mode, entries))
}

pub fn read_clean_tsv(path: &Path) -> Result<(Mode, Vec<CleanEntry>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_clean_tsv(&text, path)
}
