//! Dictionary loading and the modified string distances used by the word
//! filters.
//!
//! Both distances treat a configurable set of visually confusable characters
//! as interchangeable: substituting one member of a pair for another costs
//! nothing, and two-character/one-character shape patterns (`rn` read as `m`,
//! `vv` read as `w`) can be swapped for free. Everything else costs what it
//! costs under plain Hamming or Levenshtein.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Canonical form of a raw token: surrounding punctuation stripped, case
/// folded. Tokens with interior non-letters (digits, hyphens, apostrophes)
/// have no canonical form and are rejected.
pub fn normalize_token(raw: &str) -> Option<String> {
    let trimmed = raw.trim_matches(|c: char| !c.is_alphabetic());
    if trimmed.is_empty() {
        return None;
    }
    if trimmed.chars().any(|c| !c.is_alphabetic()) {
        return None;
    }
    Some(trimmed.chars().flat_map(char::to_lowercase).collect())
}

/// Visually confusable substitution pairs plus split/join shape patterns.
///
/// Pairs are symmetric but deliberately not transitively closed: `h`~`n` and
/// `n`~`u` do not imply `h`~`u`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionTable {
    subs: BTreeSet<(char, char)>,
    /// (x, y, z): the two-character sequence `xy` is interchangeable with `z`.
    patterns: BTreeSet<(char, char, char)>,
    /// Fast path for ASCII lowercase pair lookups.
    ascii_subs: [[bool; 26]; 26],
}

impl ConfusionTable {
    pub fn empty() -> Self {
        ConfusionTable {
            subs: BTreeSet::new(),
            patterns: BTreeSet::new(),
            ascii_subs: [[false; 26]; 26],
        }
    }

    pub fn with_pairs<I, J>(pairs: I, patterns: J) -> Self
    where
        I: IntoIterator<Item = (char, char)>,
        J: IntoIterator<Item = (&'static str, char)>,
    {
        let mut table = ConfusionTable::empty();
        for (a, b) in pairs {
            table.add_pair(a, b);
        }
        for (seq, single) in patterns {
            let mut chars = seq.chars();
            let (x, y) = (chars.next().unwrap(), chars.next().unwrap());
            assert!(chars.next().is_none(), "pattern sequence must be two chars");
            table.add_pattern(x, y, single);
        }
        table
    }

    pub fn add_pair(&mut self, a: char, b: char) {
        if a == b {
            return;
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.subs.insert(key);
        if let (Some(i), Some(j)) = (ascii_index(a), ascii_index(b)) {
            self.ascii_subs[i][j] = true;
            self.ascii_subs[j][i] = true;
        }
    }

    pub fn add_pattern(&mut self, x: char, y: char, z: char) {
        self.patterns.insert((x, y, z));
    }

    /// True when `a` and `b` are distinct characters declared interchangeable.
    pub fn confusable(&self, a: char, b: char) -> bool {
        if a == b {
            return false;
        }
        if let (Some(i), Some(j)) = (ascii_index(a), ascii_index(b)) {
            return self.ascii_subs[i][j];
        }
        let key = if a < b { (a, b) } else { (b, a) };
        self.subs.contains(&key)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.subs.iter().copied()
    }

    pub fn patterns(&self) -> impl Iterator<Item = (char, char, char)> + '_ {
        self.patterns.iter().copied()
    }

    /// Parses the `S a b` / `J xy z` line format. `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut table = ConfusionTable::empty();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| Error::parse(origin, line_no, msg);
            match fields.as_slice() {
                ["S", a, b] => {
                    let (a, b) = (single_char(a), single_char(b));
                    match (a, b) {
                        (Some(a), Some(b)) if a != b => table.add_pair(a, b),
                        _ => return Err(bad("substitution pair needs two distinct characters")),
                    }
                }
                ["J", seq, z] => {
                    let chars: Vec<char> = seq.chars().collect();
                    let z = single_char(z);
                    match (chars.as_slice(), z) {
                        ([x, y], Some(z)) => table.add_pattern(*x, *y, z),
                        _ => {
                            return Err(bad(
                                "join pattern needs a two-character sequence and one character",
                            ))
                        }
                    }
                }
                _ => return Err(bad("expected `S a b` or `J xy z`")),
            }
        }
        Ok(table)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfusionTable::parse(&text, path)
    }
}

/// The shipped table: round-letter and stem-letter pairs plus the two
/// classic split/join shapes.
impl Default for ConfusionTable {
    fn default() -> Self {
        ConfusionTable::with_pairs(
            [('o', 'c'), ('c', 'e'), ('o', 'e'), ('h', 'n'), ('n', 'u')],
            [("rn", 'm'), ("vv", 'w')],
        )
    }
}

fn ascii_index(c: char) -> Option<usize> {
    if c.is_ascii_lowercase() {
        Some(c as usize - 'a' as usize)
    } else {
        None
    }
}

fn single_char(s: &str) -> Option<char> {
    let mut chars = s.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Some(c),
        _ => None,
    }
}

/// A dictionary of normalized words, indexed by character length.
#[derive(Debug, Clone)]
pub struct Lexicon {
    words: BTreeSet<String>,
    by_len: BTreeMap<usize, Vec<String>>,
}

impl Lexicon {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut set = BTreeSet::new();
        for w in words {
            if let Some(tok) = normalize_token(w.as_ref()) {
                set.insert(tok);
            }
        }
        let mut by_len: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for w in &set {
            by_len.entry(w.chars().count()).or_default().push(w.clone());
        }
        Lexicon { words: set, by_len }
    }

    pub fn contains(&self, token: &str) -> bool {
        self.words.contains(token)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }

    /// Words of exactly `len` characters, sorted.
    pub fn words_of_len(&self, len: usize) -> &[String] {
        self.by_len.get(&len).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.by_len.keys().copied()
    }
}

/// Loads a one-word-per-line dictionary file, normalizing and deduplicating.
/// A file with no usable tokens is a configuration error.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lex = Lexicon::from_words(text.split_whitespace());
    if lex.is_empty() {
        return Err(Error::Config(format!(
            "lexicon {} contains no usable words",
            path.display()
        )));
    }
    Ok(lex)
}

/// Hamming distance that ignores confusable substitutions. `None` when the
/// tokens differ in length (the distance is undefined there, not infinite).
pub fn pseudo_hamming(a: &str, b: &str, table: &ConfusionTable) -> Option<u32> {
    let mut dist = 0u32;
    let mut ai = a.chars();
    let mut bi = b.chars();
    loop {
        match (ai.next(), bi.next()) {
            (Some(x), Some(y)) => {
                if x != y && !table.confusable(x, y) {
                    dist += 1;
                }
            }
            (None, None) => return Some(dist),
            _ => return None,
        }
    }
}

/// Levenshtein distance with free confusable substitutions and free
/// split/join pattern moves. Insertions and deletions cost 1, so a generic
/// two-for-one split costs 2 as usual.
pub fn pseudo_edit(a: &str, b: &str, table: &ConfusionTable) -> u32 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    pseudo_edit_chars(&a, &b, table)
}

pub fn pseudo_edit_chars(a: &[char], b: &[char], table: &ConfusionTable) -> u32 {
    let (n, m) = (a.len(), b.len());
    // dp[i][j]: cost of aligning a[..i] with b[..j], row-major in one Vec.
    let width = m + 1;
    let mut dp = vec![0u32; (n + 1) * width];
    for j in 0..=m {
        dp[j] = j as u32;
    }
    for i in 1..=n {
        dp[i * width] = i as u32;
        for j in 1..=m {
            let sub = if a[i - 1] == b[j - 1] || table.confusable(a[i - 1], b[j - 1]) {
                0
            } else {
                1
            };
            let mut best = dp[(i - 1) * width + j - 1] + sub;
            best = best.min(dp[(i - 1) * width + j] + 1);
            best = best.min(dp[i * width + j - 1] + 1);
            for (x, y, z) in table.patterns() {
                if i >= 2 && a[i - 2] == x && a[i - 1] == y && b[j - 1] == z {
                    best = best.min(dp[(i - 2) * width + j - 1]);
                }
                if j >= 2 && b[j - 2] == x && b[j - 1] == y && a[i - 1] == z {
                    best = best.min(dp[(i - 1) * width + j - 2]);
                }
            }
            dp[i * width + j] = best;
        }
    }
    dp[n * width + m]
}

/// `pseudo_edit_chars` with a result cap: `Some(d)` iff the distance `d` is
/// at most `cap`, `None` otherwise. Large scans (nearest-word search) use
/// the cap to abandon hopeless candidates after a couple of DP rows.
pub fn pseudo_edit_chars_within(
    a: &[char],
    b: &[char],
    table: &ConfusionTable,
    cap: u32,
) -> Option<u32> {
    let (n, m) = (a.len(), b.len());
    // Free split/join moves change one string's consumed length by 1 per
    // pattern occurrence; everything else closing the length gap costs 1.
    let slack = |s: &[char]| -> u64 {
        s.windows(2)
            .filter(|w| table.patterns().any(|(x, y, _)| w[0] == x && w[1] == y))
            .count() as u64
    };
    let gap = (n as u64).abs_diff(m as u64);
    if gap > cap as u64 + slack(a) + slack(b) {
        return None;
    }

    let width = m + 1;
    // Pattern moves look back two rows, so keep three.
    let mut rows: Vec<Vec<u32>> = vec![vec![0; width]; 3];
    for j in 0..=m {
        rows[0][j] = j as u32;
    }
    let mut prev_min = 0u32;
    for i in 1..=n {
        let (two_back, one_back, mut cur) = {
            let r2 = rows[(i + 1) % 3].clone();
            let r1 = rows[(i + 2) % 3].clone();
            (r2, r1, std::mem::take(&mut rows[i % 3]))
        };
        cur[0] = i as u32;
        let mut row_min = cur[0];
        for j in 1..=m {
            let sub = if a[i - 1] == b[j - 1] || table.confusable(a[i - 1], b[j - 1]) {
                0
            } else {
                1
            };
            let mut best = one_back[j - 1] + sub;
            best = best.min(one_back[j] + 1);
            best = best.min(cur[j - 1] + 1);
            for (x, y, z) in table.patterns() {
                if i >= 2 && a[i - 2] == x && a[i - 1] == y && b[j - 1] == z {
                    best = best.min(two_back[j - 1]);
                }
                if j >= 2 && b[j - 2] == x && b[j - 1] == y && a[i - 1] == z {
                    best = best.min(one_back[j - 2]);
                }
            }
            cur[j] = best;
            row_min = row_min.min(best);
        }
        rows[i % 3] = cur;
        // A path may skip one row via a split/join move but never two in a
        // row, so once two consecutive row minima clear the cap the final
        // cell cannot come back under it.
        if row_min > cap && prev_min > cap {
            return None;
        }
        prev_min = row_min;
    }
    let d = rows[n % 3][m];
    (d <= cap).then_some(d)
}

/// Same-length dictionary words within `radius` pseudo-Hamming distance of
/// `word`, excluding `word` itself, sorted ascending.
pub fn neighbors_within<'a>(
    lexicon: &'a Lexicon,
    word: &str,
    radius: u32,
    table: &ConfusionTable,
) -> Vec<&'a str> {
    let len = word.chars().count();
    lexicon
        .words_of_len(len)
        .iter()
        .filter(|cand| cand.as_str() != word)
        .filter(|cand| matches!(pseudo_hamming(word, cand, table), Some(d) if d <= radius))
        .map(String::as_str)
        .collect()
}

/// Per-word dictionary density counts and fitted growth rates.
///
/// `d[i]` counts same-length dictionary words at pseudo-Hamming distance
/// exactly `i`; `e[i]` counts different-length words at pseudo-edit distance
/// exactly `i`. Both exclude `word` itself and stop at `max_i`.
#[derive(Debug, Clone, Serialize)]
pub struct LexiconStats {
    pub word: String,
    pub max_i: usize,
    pub d: Vec<u64>,
    pub e: Vec<u64>,
    pub r_d: Option<f64>,
    pub r_e: Option<f64>,
}

pub fn dictionary_stats(
    lexicon: &Lexicon,
    word: &str,
    table: &ConfusionTable,
    max_i: usize,
) -> LexiconStats {
    let chars: Vec<char> = word.chars().collect();
    let len = chars.len();
    let mut d = vec![0u64; max_i + 1];
    let mut e = vec![0u64; max_i + 1];

    for cand in lexicon.words_of_len(len) {
        if cand == word {
            continue;
        }
        if let Some(dist) = pseudo_hamming(word, cand, table) {
            if (dist as usize) <= max_i {
                d[dist as usize] += 1;
            }
        }
    }

    for cand_len in len.saturating_sub(max_i)..=len + max_i {
        if cand_len == len {
            continue;
        }
        for cand in lexicon.words_of_len(cand_len) {
            let cand_chars: Vec<char> = cand.chars().collect();
            let dist = pseudo_edit_chars(&chars, &cand_chars, table) as usize;
            if dist <= max_i {
                e[dist] += 1;
            }
        }
    }

    LexiconStats {
        word: word.to_string(),
        max_i,
        r_d: fit_growth_rate(&d),
        r_e: fit_growth_rate(&e),
        d,
        e,
    }
}

/// Median of the consecutive-count ratios `counts[i+1] / counts[i]` over the
/// positions with a nonzero denominator. `None` when no ratio is available.
pub fn fit_growth_rate(counts: &[u64]) -> Option<f64> {
    let mut ratios: Vec<f64> = counts
        .windows(2)
        .filter(|w| w[0] > 0)
        .map(|w| w[1] as f64 / w[0] as f64)
        .collect();
    if ratios.is_empty() {
        return None;
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = ratios.len();
    Some(if n % 2 == 1 {
        ratios[n / 2]
    } else {
        (ratios[n / 2 - 1] + ratios[n / 2]) / 2.0
    })
}

impl fmt::Display for LexiconStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: D={:?} E={:?}", self.word, self.d, self.e)?;
        match self.r_d {
            Some(r) => write!(f, " r_D={r:.3}")?,
            None => write!(f, " r_D=unavailable")?,
        }
        match self.r_e {
            Some(r) => write!(f, " r_E={r:.3}"),
            None => write!(f, " r_E=unavailable"),
        }
    }
}
