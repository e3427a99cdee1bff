//! Synthetic page generator and simulated recognizer. Provides ground
//! truth for end-to-end tests, noise-rate estimation for the bound, and
//! controlled failure injection (dictionary projections, label flips).

pub mod font;

use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::consistency::{dominate_check, ConsistencyParams, DominationKind};
use crate::error::{Error, Result};
use crate::ingest::{BBox, CharBox, GlyphRef, GrayImage, OcrWord};
use crate::lexicon::{neighbors_within, pseudo_edit_chars_within, ConfusionTable, Lexicon};
use crate::similarity::{ncc, normalize_patch, GlyphPool, NormalizedPatch, DEFAULT_PATCH_SIDE};
pub use font::SynthFont;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Std dev of per-pixel Gaussian intensity noise.
    pub gaussian_sigma: f64,
    /// Per-pixel probability of being forced to black or white.
    pub saltpepper_rate: f64,
    /// Max box offset, in pixels, applied to reported char boxes.
    pub jitter: u32,
    /// Replace non-dictionary readings by the nearest lexicon word.
    pub project_to_dictionary: bool,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            gaussian_sigma: 0.0,
            saltpepper_rate: 0.0,
            jitter: 0,
            project_to_dictionary: false,
        }
    }
}

impl NoiseParams {
    pub fn validate(&self) -> Result<()> {
        if !self.gaussian_sigma.is_finite() || self.gaussian_sigma < 0.0 {
            return Err(Error::Usage(format!(
                "gaussian sigma must be finite and non-negative, got {}",
                self.gaussian_sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.saltpepper_rate) {
            return Err(Error::Usage(format!(
                "salt-and-pepper rate must lie in [0, 1], got {}",
                self.saltpepper_rate
            )));
        }
        Ok(())
    }
}

/// Splitmix64 step, used to derive independent sub-seeds from a master
/// seed without consuming an RNG stream.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn apply_gaussian_noise(image: &mut GrayImage, sigma: f64, rng: &mut impl Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked non-negative");
    for px in image.pixels_mut() {
        let v = *px as f64 + normal.sample(rng);
        *px = v.round().clamp(0.0, 255.0) as u8;
    }
}

pub fn apply_salt_pepper(image: &mut GrayImage, rate: f64, rng: &mut impl Rng) {
    if rate <= 0.0 {
        return;
    }
    for px in image.pixels_mut() {
        let roll: f64 = rng.gen();
        if roll < rate {
            *px = if roll < rate / 2.0 { 0 } else { 255 };
        }
    }
}

#[derive(Debug, Clone)]
pub struct TruthWord {
    pub token: String,
    pub bbox: BBox,
    pub char_boxes: Vec<BBox>,
}

#[derive(Debug)]
pub struct RenderedDocument {
    pub image: GrayImage,
    pub truth: Vec<TruthWord>,
}

const PAGE_WIDTH: u32 = 900;

/// Patch side for the simulated engine's template matcher. Deliberately
/// coarser than the checker's DEFAULT_PATCH_SIDE: the engine throws away
/// the fine detail that separates confusable twins, so its misreads stay
/// confident, while the downstream consistency check still sees it.
pub const ENGINE_PATCH_SIDE: u32 = 12;

/// Stamps the tokens onto a fresh page in reading order, wrapping lines,
/// then applies Gaussian noise followed by salt-and-pepper. The returned
/// boxes are the exact stamped cells.
pub fn render_document(
    tokens: &[String],
    font: &SynthFont,
    noise: &NoiseParams,
    seed: u64,
) -> Result<RenderedDocument> {
    noise.validate()?;
    if tokens.is_empty() {
        return Err(Error::Usage("cannot render an empty token list".into()));
    }

    let (cw, ch) = (font.cell_width(), font.cell_height());
    let mut truth: Vec<TruthWord> = Vec::with_capacity(tokens.len());
    let mut x = font.margin;
    let mut y = font.margin;
    for token in tokens {
        let n = token.chars().count() as u32;
        if n == 0 {
            return Err(Error::Usage("cannot render an empty token".into()));
        }
        for label in token.chars() {
            font.prototype(label)?;
        }
        let word_w = n * cw + (n - 1) * font.char_gap;
        if x > font.margin && x + word_w + font.margin > PAGE_WIDTH {
            x = font.margin;
            y += ch + font.line_gap;
        }
        let mut char_boxes = Vec::with_capacity(n as usize);
        let mut cx = x;
        for _ in 0..n {
            char_boxes.push(BBox::new(cx, y, cx + cw, y + ch));
            cx += cw + font.char_gap;
        }
        truth.push(TruthWord {
            token: token.clone(),
            bbox: BBox::new(x, y, x + word_w, y + ch),
            char_boxes,
        });
        x += word_w + font.word_gap;
    }

    let height = y + ch + font.margin;
    let mut image = GrayImage::new(PAGE_WIDTH, height, font::BG);
    for word in &truth {
        for (label, bbox) in word.token.chars().zip(&word.char_boxes) {
            let proto = font.prototype(label)?;
            for dy in 0..ch {
                for dx in 0..cw {
                    image.set(
                        bbox.left + dx,
                        bbox.top + dy,
                        proto[(dy * cw + dx) as usize],
                    );
                }
            }
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    apply_gaussian_noise(&mut image, noise.gaussian_sigma, &mut rng);
    apply_salt_pepper(&mut image, noise.saltpepper_rate, &mut rng);
    Ok(RenderedDocument { image, truth })
}

/// The nearest lexicon word under pseudo-edit distance; ties resolve to
/// the earliest word in sorted order.
pub fn nearest_lexicon_word(
    token: &str,
    lexicon: &Lexicon,
    table: &ConfusionTable,
) -> Option<(String, u32)> {
    let chars: Vec<char> = token.chars().collect();
    let mut best: Option<(&str, u32)> = None;
    for word in lexicon.iter() {
        // Only a strictly smaller distance can replace the incumbent, so
        // the capped scan prices later candidates against best - 1.
        let cap = match best {
            None => u32::MAX,
            Some((_, d)) => d.saturating_sub(1),
        };
        let cand: Vec<char> = word.chars().collect();
        if let Some(dist) = pseudo_edit_chars_within(&chars, &cand, table, cap) {
            best = Some((word, dist));
            if dist == 0 {
                break;
            }
        }
    }
    best.map(|(word, dist)| (word.to_string(), dist))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionRecord {
    pub word_id: u32,
    /// What the glyph classifier read.
    pub read: String,
    /// The lexicon word the reading was replaced with.
    pub projected: String,
}

#[derive(Debug)]
pub struct SimulatedOcr {
    pub words: Vec<OcrWord>,
    pub projections: Vec<ProjectionRecord>,
}

fn jittered(bbox: &BBox, jitter: u32, image: &GrayImage, rng: &mut impl Rng) -> BBox {
    if jitter == 0 {
        return *bbox;
    }
    let j = jitter as i64;
    let dx = rng.gen_range(-j..=j);
    let dy = rng.gen_range(-j..=j);
    let w = bbox.width() as i64;
    let h = bbox.height() as i64;
    let left = (bbox.left as i64 + dx).clamp(0, image.width() as i64 - w);
    let top = (bbox.top as i64 + dy).clamp(0, image.height() as i64 - h);
    BBox::new(
        left as u32,
        top as u32,
        (left + w) as u32,
        (top + h) as u32,
    )
}

/// The engine's templates, sampled at its coarse patch side. The small
/// feature map is what makes confusable twins genuinely confusable for
/// the engine while the checker's full-resolution patches still tell
/// them apart.
fn engine_prototypes(font: &SynthFont) -> Result<Vec<(char, NormalizedPatch)>> {
    font.labels()
        .map(|label| {
            let img = font.prototype_image(label)?;
            Ok((label, normalize_patch(&img, ENGINE_PATCH_SIDE)))
        })
        .collect()
}

/// Matched-filter read: slides the nominal box over a +/- `search` pixel
/// window and keeps the (prototype, shift) pair with the highest
/// correlation in the engine's coarse space. Segmentation slop is
/// re-centered here the way a template matcher would, instead of being
/// passed through as a classification error.
fn register(
    image: &GrayImage,
    nominal: &BBox,
    search: u32,
    prototypes: &[(char, NormalizedPatch)],
) -> (char, f64, BBox) {
    let s = search as i64;
    let w = nominal.width() as i64;
    let h = nominal.height() as i64;
    let mut best: Option<(char, f64, BBox)> = None;
    for dy in -s..=s {
        for dx in -s..=s {
            let left = (nominal.left as i64 + dx).clamp(0, image.width() as i64 - w);
            let top = (nominal.top as i64 + dy).clamp(0, image.height() as i64 - h);
            let bbox = BBox::new(left as u32, top as u32, (left + w) as u32, (top + h) as u32);
            let patch = normalize_patch(&image.crop(&bbox), ENGINE_PATCH_SIDE);
            let mut local = ('?', f64::NEG_INFINITY);
            for (label, proto) in prototypes {
                let score = ncc(&patch, proto);
                if score > local.1 {
                    local = (*label, score);
                }
            }
            if best.as_ref().map_or(true, |b| local.1 > b.1) {
                best = Some((local.0, local.1, bbox));
            }
        }
    }
    best.expect("registration window is never empty")
}

/// Reads the page back: every char box is classified as the prototype
/// with the highest normalized cross correlation. Word confidence is the
/// mean glyph correlation scaled to [0, 100]. With projection enabled,
/// readings outside the lexicon are replaced by the nearest lexicon word
/// (glyph labels are rewritten too when the lengths match, so the output
/// stays segmentation-consistent, as a real engine's final reading would).
pub fn simulate_ocr(
    image: &GrayImage,
    truth: &[TruthWord],
    font: &SynthFont,
    noise: &NoiseParams,
    lexicon: &Lexicon,
    table: &ConfusionTable,
    seed: u64,
) -> Result<SimulatedOcr> {
    noise.validate()?;
    let prototypes = engine_prototypes(font)?;

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut words = Vec::with_capacity(truth.len());
    let mut projections = Vec::new();
    for (word_id, tw) in truth.iter().enumerate() {
        let word_id = word_id as u32;
        let boxes: Vec<BBox> = tw
            .char_boxes
            .iter()
            .map(|b| jittered(b, noise.jitter, image, &mut rng))
            .collect();
        let mut chars = Vec::with_capacity(boxes.len());
        let mut score_sum = 0.0;
        for bbox in &boxes {
            let (label, score, aligned) = register(image, bbox, noise.jitter, &prototypes);
            score_sum += score.max(0.0);
            chars.push(CharBox { label, bbox: aligned });
        }
        let mut text: String = chars.iter().map(|c| c.label).collect();
        let confidence = (100.0 * score_sum / chars.len() as f64).clamp(0.0, 100.0);

        if noise.project_to_dictionary && !lexicon.contains(&text) {
            if let Some((projected, _)) = nearest_lexicon_word(&text, lexicon, table) {
                projections.push(ProjectionRecord {
                    word_id,
                    read: text.clone(),
                    projected: projected.clone(),
                });
                if projected.chars().count() == chars.len() {
                    for (c, label) in chars.iter_mut().zip(projected.chars()) {
                        c.label = label;
                    }
                }
                text = projected;
            }
        }

        let left = chars.iter().map(|c| c.bbox.left).min().unwrap();
        let top = chars.iter().map(|c| c.bbox.top).min().unwrap();
        let right = chars.iter().map(|c| c.bbox.right).max().unwrap();
        let bottom = chars.iter().map(|c| c.bbox.bottom).max().unwrap();
        let segmentation_inconsistent = chars.iter().map(|c| c.label).collect::<String>() != text;
        words.push(OcrWord {
            word_id,
            page: 1,
            bbox: BBox::new(left, top, right, bottom),
            text,
            confidence,
            chars,
            segmentation_inconsistent,
        });
    }
    Ok(SimulatedOcr { words, projections })
}

/// Renders one isolated glyph cell under noise onto a padded canvas.
/// Returns the canvas and the jittered nominal cell box, i.e. the sloppy
/// segmentation a reader would have to register against.
pub fn render_isolated_glyph(
    font: &SynthFont,
    label: char,
    noise: &NoiseParams,
    seed: u64,
) -> Result<(GrayImage, BBox)> {
    let (cw, ch) = (font.cell_width(), font.cell_height());
    let pad = noise.jitter;
    let mut canvas = GrayImage::new(cw + 2 * pad, ch + 2 * pad, font::BG);
    let proto = font.prototype(label)?;
    for dy in 0..ch {
        for dx in 0..cw {
            canvas.set(pad + dx, pad + dy, proto[(dy * cw + dx) as usize]);
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    apply_gaussian_noise(&mut canvas, noise.gaussian_sigma, &mut rng);
    apply_salt_pepper(&mut canvas, noise.saltpepper_rate, &mut rng);
    let bbox = if pad == 0 {
        BBox::new(0, 0, cw, ch)
    } else {
        jittered(&BBox::new(pad, pad, pad + cw, pad + ch), pad, &canvas, &mut rng)
    };
    Ok((canvas, bbox))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseRates {
    /// Max rate, over ordered non-confusable class pairs, at which a
    /// rendered glyph of the first class outscored its own prototype with
    /// the second class's prototype.
    pub epsilon_hat: f64,
    /// Min rate, over classes, at which a rendered glyph passes the
    /// domination check with its own label inside a reference pool.
    pub delta_hat: f64,
    /// Trials per class, for binomial confidence bounds on both rates.
    pub trials: u32,
    pub worst_pair: Option<(char, char)>,
    pub worst_class: char,
}

const REFS_PER_CLASS: usize = 64;

/// Monte Carlo estimate of the bound's per-character rates under the
/// given noise. Confusable pairs are excluded from epsilon per the
/// modified-distance rule; delta embeds the deployed dominate_check.
pub fn estimate_noise_rates(
    font: &SynthFont,
    noise: &NoiseParams,
    table: &ConfusionTable,
    params: &ConsistencyParams,
    trials: u32,
    seed: u64,
) -> Result<NoiseRates> {
    noise.validate()?;
    params.validate()?;
    if trials < 100 {
        return Err(Error::Usage(format!(
            "need at least 100 trials for rate estimation, got {trials}"
        )));
    }
    let labels: Vec<char> = font.labels().collect();
    // The engine's templates drive classification and alignment; the
    // domination ranking below runs at the checker's full resolution.
    let prototypes = engine_prototypes(font)?;

    // Reference pool: REFS_PER_CLASS independent renders of every class.
    let refs: Vec<GlyphRef> = labels
        .par_iter()
        .enumerate()
        .map(|(ci, &label)| {
            (0..REFS_PER_CLASS)
                .map(|k| {
                    let s = derive_seed(seed, 1_000_000 + (ci * REFS_PER_CLASS + k) as u64);
                    let (scene, nominal) = render_isolated_glyph(font, label, noise, s)?;
                    let (_, _, aligned) =
                        register(&scene, &nominal, noise.jitter, &prototypes);
                    let patch = scene.crop(&aligned);
                    let glyph_id = (ci * REFS_PER_CLASS + k) as u32;
                    Ok(GlyphRef {
                        glyph_id,
                        word_id: ci as u32,
                        char_index: k as u32,
                        label,
                        bbox: BBox::new(0, 0, patch.width(), patch.height()),
                        patch,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let pool = GlyphPool::build(&refs, DEFAULT_PATCH_SIDE);

    struct ClassOutcome {
        label: char,
        flips: Vec<(char, u32)>,
        domination_passes: u32,
    }

    let outcomes: Vec<ClassOutcome> = labels
        .par_iter()
        .enumerate()
        .map(|(ci, &label)| -> Result<ClassOutcome> {
            let mut flips: Vec<(char, u32)> = Vec::new();
            let mut domination_passes = 0u32;
            for t in 0..trials {
                let s = derive_seed(seed, (ci as u64) << 32 | t as u64);
                let (scene, nominal) = render_isolated_glyph(font, label, noise, s)?;
                let (read, _, aligned) = register(&scene, &nominal, noise.jitter, &prototypes);
                if read != label {
                    match flips.iter_mut().find(|(l, _)| *l == read) {
                        Some((_, n)) => *n += 1,
                        None => flips.push((read, 1)),
                    }
                }
                let patch = normalize_patch(&scene.crop(&aligned), DEFAULT_PATCH_SIDE);

                let mut ranked: Vec<crate::similarity::RankedGlyph> = pool
                    .entries()
                    .iter()
                    .map(|e| crate::similarity::RankedGlyph {
                        glyph_id: e.glyph_id,
                        label: e.label,
                        score: ncc(&patch, &e.patch),
                    })
                    .collect();
                ranked.sort_by(|a, b| {
                    b.score
                        .total_cmp(&a.score)
                        .then(a.glyph_id.cmp(&b.glyph_id))
                });
                let outcome = dominate_check(label, &ranked, params);
                if outcome.kind == DominationKind::DominatedSame {
                    domination_passes += 1;
                }
            }
            Ok(ClassOutcome {
                label,
                flips,
                domination_passes,
            })
        })
        .collect::<Result<_>>()?;

    let mut epsilon_hat = 0.0;
    let mut worst_pair = None;
    let mut delta_hat = f64::INFINITY;
    let mut worst_class = labels[0];
    for out in &outcomes {
        for &(read, n) in &out.flips {
            if table.confusable(out.label, read) {
                continue;
            }
            let rate = n as f64 / trials as f64;
            if rate > epsilon_hat {
                epsilon_hat = rate;
                worst_pair = Some((out.label, read));
            }
        }
        let pass_rate = out.domination_passes as f64 / trials as f64;
        if pass_rate < delta_hat {
            delta_hat = pass_rate;
            worst_class = out.label;
        }
    }
    Ok(NoiseRates {
        epsilon_hat,
        delta_hat,
        trials,
        worst_pair,
        worst_class,
    })
}

/// Draws tokens from the lexicon with an English-like word-length mix
/// (lengths 3 through 9, short words most common).
pub fn sample_tokens(lexicon: &Lexicon, count: usize, seed: u64) -> Result<Vec<String>> {
    const LENGTH_WEIGHTS: [(usize, u32); 7] = [
        (3, 18),
        (4, 20),
        (5, 16),
        (6, 14),
        (7, 12),
        (8, 10),
        (9, 10),
    ];
    let buckets: Vec<(&[String], u32)> = LENGTH_WEIGHTS
        .iter()
        .map(|&(len, w)| (lexicon.words_of_len(len), w))
        .filter(|(words, _)| !words.is_empty())
        .collect();
    if buckets.is_empty() {
        return Err(Error::Config(
            "lexicon has no words of length 3 through 9".into(),
        ));
    }
    let dist = WeightedIndex::new(buckets.iter().map(|(_, w)| *w)).expect("nonzero weights");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let (words, _) = buckets[dist.sample(&mut rng)];
            words[rng.gen_range(0..words.len())].clone()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedHazard {
    /// Position in the token list that was replaced.
    pub index: usize,
    /// The non-dictionary token now at that position.
    pub truth: String,
    /// The lexicon word a projecting recognizer will land on.
    pub anchor: String,
}

/// Dictionary words eligible as hazard anchors: 6 to 9 letters with an
/// empty radius-1 pseudo-Hamming ball. The scan is the expensive part of
/// planting, so batch callers compute it once and reuse it across seeds.
pub fn hazard_anchor_pool(lexicon: &Lexicon, table: &ConfusionTable) -> Vec<String> {
    let candidates: Vec<&String> = (6..=9).flat_map(|len| lexicon.words_of_len(len)).collect();
    candidates
        .par_iter()
        .filter(|w| neighbors_within(lexicon, w, 1, table).is_empty())
        .map(|w| w.to_string())
        .collect()
}

/// Replaces `count` tokens with non-dictionary strings built to survive
/// dictionary projection undetected until the consistency check: each is
/// two non-confusable substitutions away from its nearest lexicon word,
/// and that word has an empty radius-1 ball so the projected reading
/// sails through the first two pipeline steps.
pub fn plant_projection_hazards(
    tokens: &mut [String],
    lexicon: &Lexicon,
    table: &ConfusionTable,
    count: usize,
    seed: u64,
) -> Result<Vec<PlantedHazard>> {
    let anchors = hazard_anchor_pool(lexicon, table);
    plant_projection_hazards_with_anchors(tokens, lexicon, table, &anchors, count, seed)
}

/// `plant_projection_hazards` against a precomputed anchor pool.
pub fn plant_projection_hazards_with_anchors(
    tokens: &mut [String],
    lexicon: &Lexicon,
    table: &ConfusionTable,
    anchors: &[String],
    count: usize,
    seed: u64,
) -> Result<Vec<PlantedHazard>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if count > tokens.len() {
        return Err(Error::Usage(format!(
            "cannot plant {count} hazards in {} tokens",
            tokens.len()
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    if anchors.is_empty() {
        return Err(Error::Config(
            "no isolated dictionary words available as hazard anchors".into(),
        ));
    }

    let mut planted = Vec::with_capacity(count);
    let mut used_positions = BTreeSet::new();
    let max_attempts = 200 + 50 * count;
    let mut attempts = 0;
    while planted.len() < count {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::Config(format!(
                "gave up constructing hazard tokens after {attempts} attempts"
            )));
        }
        let anchor = &anchors[rng.gen_range(0..anchors.len())];
        let mut chars: Vec<char> = anchor.chars().collect();
        let i = rng.gen_range(0..chars.len());
        let mut j = rng.gen_range(0..chars.len());
        while j == i {
            j = rng.gen_range(0..chars.len());
        }
        for &pos in &[i, j] {
            let old = chars[pos];
            loop {
                let repl = (b'a' + rng.gen_range(0..26u8)) as char;
                if repl != old && !table.confusable(repl, old) {
                    chars[pos] = repl;
                    break;
                }
            }
        }
        let truth: String = chars.iter().collect();
        if lexicon.contains(&truth) {
            continue;
        }
        // The projection target must be a same-length word at distance
        // exactly 2 with an empty ball, or the hazard would be caught (or
        // mis-caught) at a different step than the one under test.
        let Some((target, dist)) = nearest_lexicon_word(&truth, lexicon, table) else {
            continue;
        };
        if dist != 2
            || target.chars().count() != chars.len()
            || !neighbors_within(lexicon, &target, 1, table).is_empty()
        {
            continue;
        }
        let mut position = rng.gen_range(0..tokens.len());
        let mut scans = 0;
        while used_positions.contains(&position) {
            position = (position + 1) % tokens.len();
            scans += 1;
            if scans > tokens.len() {
                return Err(Error::Usage("more hazards than token positions".into()));
            }
        }
        used_positions.insert(position);
        tokens[position] = truth.clone();
        planted.push(PlantedHazard {
            index: position,
            truth,
            anchor: target,
        });
    }
    planted.sort_by_key(|h| h.index);
    Ok(planted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PlantedFlip {
    pub word_id: u32,
    pub char_index: usize,
    pub from: char,
    pub to: char,
}

/// Flips `count` glyph labels between the two pair labels in the OCR
/// output, rewriting word text to stay segmentation-consistent. Returns
/// the flips actually applied (fewer than `count` when the document has
/// too few pair glyphs).
pub fn plant_label_flips(
    words: &mut [OcrWord],
    pair: (char, char),
    count: usize,
    seed: u64,
) -> Vec<PlantedFlip> {
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for (wi, word) in words.iter().enumerate() {
        if word.segmentation_inconsistent {
            continue;
        }
        for (ci, c) in word.chars.iter().enumerate() {
            if c.label == pair.0 || c.label == pair.1 {
                candidates.push((wi, ci));
            }
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let take = count.min(candidates.len());
    // Partial Fisher-Yates: the first `take` entries become the sample.
    for k in 0..take {
        let pick = rng.gen_range(k..candidates.len());
        candidates.swap(k, pick);
    }
    let mut flips: Vec<PlantedFlip> = candidates[..take]
        .iter()
        .map(|&(wi, ci)| {
            let word = &mut words[wi];
            let from = word.chars[ci].label;
            let to = if from == pair.0 { pair.1 } else { pair.0 };
            word.chars[ci].label = to;
            word.text = word.chars.iter().map(|c| c.label).collect();
            PlantedFlip {
                word_id: word.word_id,
                char_index: ci,
                from,
                to,
            }
        })
        .collect();
    flips.sort_by_key(|f| (f.word_id, f.char_index));
    flips
}

/// Share of tokens that are non-dictionary strings at modified edit
/// distance exactly `i` from the lexicon: the empirical p_i feeding the
/// bound's non-dictionary term.
pub fn measure_p_i(
    tokens: &[String],
    lexicon: &Lexicon,
    table: &ConfusionTable,
    i: u32,
) -> f64 {
    if tokens.is_empty() {
        return 0.0;
    }
    let mut cache: std::collections::BTreeMap<&str, u32> = std::collections::BTreeMap::new();
    let mut hits = 0usize;
    for token in tokens {
        if lexicon.contains(token) {
            continue;
        }
        let dist = *cache.entry(token.as_str()).or_insert_with(|| {
            nearest_lexicon_word(token, lexicon, table)
                .map(|(_, d)| d)
                .unwrap_or(u32::MAX)
        });
        if dist == i {
            hits += 1;
        }
    }
    hits as f64 / tokens.len() as f64
}
