//! Scoring against ground truth: word alignment, clean-list metrics,
//! confidence PR curves, and per-document reports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::OcrWord;
use crate::lexicon::normalize_token;
use crate::pipeline::CleanEntry;

/// Ground-truth verdict for one engine output word.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedLabel {
    pub word_id: u32,
    /// Index into the truth token stream this word aligned to, if any.
    pub truth_index: Option<usize>,
    /// Normalized truth token at that index.
    pub truth: Option<String>,
    /// True when the word aligned gap-free to an identical token.
    pub correct: bool,
}

fn norm_lev(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let dist = crate::lexicon::pseudo_edit_chars(&a, &b, &crate::lexicon::ConfusionTable::empty());
    dist as f64 / a.len().max(b.len()) as f64
}

fn pair_cost(a: Option<&str>, b: Option<&str>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => norm_lev(a, b),
        _ => 1.0,
    }
}

/// Globally aligns the engine's word sequence against the truth token
/// sequence. Pairing two tokens costs their normalized Levenshtein
/// distance; leaving a token unpaired costs 1. Ties prefer pairing over
/// gaps and are resolved from the front of the document.
pub fn align_to_truth(words: &[OcrWord], truth_tokens: &[String]) -> Vec<AlignedLabel> {
    let ocr: Vec<Option<String>> = words.iter().map(|w| normalize_token(&w.text)).collect();
    let truth: Vec<Option<String>> = truth_tokens.iter().map(|t| normalize_token(t)).collect();
    let (n, m) = (ocr.len(), truth.len());

    let cost = |i: usize, j: usize| pair_cost(ocr[i].as_deref(), truth[j].as_deref());

    // Suffix costs: dp[i][j] = cheapest alignment of ocr[i..] with truth[j..].
    let width = m + 1;
    let mut dp = vec![0f64; (n + 1) * width];
    for j in 0..=m {
        dp[n * width + j] = (m - j) as f64;
    }
    for i in (0..n).rev() {
        dp[i * width + m] = (n - i) as f64;
        for j in (0..m).rev() {
            let diag = cost(i, j) + dp[(i + 1) * width + j + 1];
            let skip_ocr = 1.0 + dp[(i + 1) * width + j];
            let skip_truth = 1.0 + dp[i * width + j + 1];
            dp[i * width + j] = diag.min(skip_ocr).min(skip_truth);
        }
    }

    // Walk forward so that equal-cost matches land as early as possible.
    let mut labels: Vec<AlignedLabel> = Vec::with_capacity(n);
    let (mut i, mut j) = (0usize, 0usize);
    let eps = 1e-9;
    while i < n {
        if j == m {
            labels.push(AlignedLabel {
                word_id: words[i].word_id,
                truth_index: None,
                truth: None,
                correct: false,
            });
            i += 1;
            continue;
        }
        let here = dp[i * width + j];
        let diag = cost(i, j) + dp[(i + 1) * width + j + 1];
        let skip_ocr = 1.0 + dp[(i + 1) * width + j];
        let skip_truth = 1.0 + dp[i * width + j + 1];
        if diag <= here + eps {
            let correct = matches!((&ocr[i], &truth[j]), (Some(a), Some(b)) if a == b);
            labels.push(AlignedLabel {
                word_id: words[i].word_id,
                truth_index: Some(j),
                truth: truth[j].clone(),
                correct,
            });
            i += 1;
            j += 1;
        } else if skip_ocr <= here + eps && skip_truth <= here + eps {
            // Both gaps tie: drop the lexicographically smaller token so the
            // choice does not depend on which sequence is called "output".
            let ocr_key = ocr[i].as_deref().unwrap_or("");
            let truth_key = truth[j].as_deref().unwrap_or("");
            if ocr_key <= truth_key {
                labels.push(AlignedLabel {
                    word_id: words[i].word_id,
                    truth_index: None,
                    truth: None,
                    correct: false,
                });
                i += 1;
            } else {
                j += 1;
            }
        } else if skip_ocr <= here + eps {
            labels.push(AlignedLabel {
                word_id: words[i].word_id,
                truth_index: None,
                truth: None,
                correct: false,
            });
            i += 1;
        } else {
            j += 1;
        }
    }
    labels
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CleanMetrics {
    pub kept: u64,
    pub errors: u64,
    /// Fraction of kept entries that are correct; 1.0 for an empty list.
    pub precision: f64,
    /// Kept entries over all document words.
    pub recall: f64,
}

/// Scores a clean list against alignment labels. Every entry must have a
/// label; a missing one means the list and document do not match.
pub fn clean_list_metrics(
    entries: &[CleanEntry],
    labels: &[AlignedLabel],
) -> Result<CleanMetrics> {
    let by_id: BTreeMap<u32, &AlignedLabel> =
        labels.iter().map(|l| (l.word_id, l)).collect();
    let mut correct = 0u64;
    for e in entries {
        let label = by_id.get(&e.word_id).ok_or_else(|| {
            Error::Usage(format!("clean entry word_id {} has no alignment label", e.word_id))
        })?;
        if label.correct {
            correct += 1;
        }
    }
    let kept = entries.len() as u64;
    Ok(CleanMetrics {
        kept,
        errors: kept - correct,
        precision: if kept == 0 {
            1.0
        } else {
            correct as f64 / kept as f64
        },
        recall: if labels.is_empty() {
            0.0
        } else {
            kept as f64 / labels.len() as f64
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    /// Correct kept words over kept words.
    pub precision: f64,
    /// Correct kept words over all document words.
    pub recall: f64,
    /// Words with confidence >= threshold.
    pub kept: u64,
}

/// One PR point per distinct confidence value, highest threshold first.
pub fn confidence_pr_curve(words: &[OcrWord], labels: &[AlignedLabel]) -> Result<Vec<PrPoint>> {
    let by_id: BTreeMap<u32, bool> = labels.iter().map(|l| (l.word_id, l.correct)).collect();
    let mut scored: Vec<(f64, bool)> = Vec::with_capacity(words.len());
    for w in words {
        let correct = *by_id.get(&w.word_id).ok_or_else(|| {
            Error::Usage(format!("word_id {} has no alignment label", w.word_id))
        })?;
        scored.push((w.confidence, correct));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));

    let total = words.len() as f64;
    let mut points = Vec::new();
    let mut kept = 0u64;
    let mut correct_kept = 0u64;
    let mut idx = 0;
    while idx < scored.len() {
        let threshold = scored[idx].0;
        while idx < scored.len() && scored[idx].0 == threshold {
            kept += 1;
            correct_kept += u64::from(scored[idx].1);
            idx += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: correct_kept as f64 / kept as f64,
            recall: correct_kept as f64 / total,
            kept,
        });
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ListSummary {
    pub count: u64,
    /// Fraction of document words on the list.
    pub pct: f64,
    pub errors: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentReport {
    pub name: String,
    pub word_count: u64,
    /// Fraction of words the engine got right.
    pub accuracy: f64,
    pub conservative: ListSummary,
    pub aggressive: ListSummary,
}

pub fn document_report(
    name: &str,
    labels: &[AlignedLabel],
    conservative: &CleanMetrics,
    aggressive: &CleanMetrics,
) -> DocumentReport {
    let word_count = labels.len() as u64;
    let correct = labels.iter().filter(|l| l.correct).count() as u64;
    let summary = |m: &CleanMetrics| ListSummary {
        count: m.kept,
        pct: m.recall,
        errors: m.errors,
    };
    DocumentReport {
        name: name.to_string(),
        word_count,
        accuracy: if word_count == 0 {
            0.0
        } else {
            correct as f64 / word_count as f64
        },
        conservative: summary(conservative),
        aggressive: summary(aggressive),
    }
}

/// Totals row: counts add, percentages are recomputed from the sums.
pub fn aggregate_reports(reports: &[DocumentReport]) -> DocumentReport {
    let word_count: u64 = reports.iter().map(|r| r.word_count).sum();
    // Correct-word counts are recovered from the stored fractions; they were
    // computed as k/n in the first place, so rounding is exact.
    let correct: u64 = reports
        .iter()
        .map(|r| (r.accuracy * r.word_count as f64).round() as u64)
        .sum();
    let side = |pick: fn(&DocumentReport) -> &ListSummary| {
        let count: u64 = reports.iter().map(|r| pick(r).count).sum();
        let errors: u64 = reports.iter().map(|r| pick(r).errors).sum();
        ListSummary {
            count,
            errors,
            pct: if word_count == 0 {
                0.0
            } else {
                count as f64 / word_count as f64
            },
        }
    };
    DocumentReport {
        name: "totals".to_string(),
        word_count,
        accuracy: if word_count == 0 {
            0.0
        } else {
            correct as f64 / word_count as f64
        },
        conservative: side(|r| &r.conservative),
        aggressive: side(|r| &r.aggressive),
    }
}

/// Fixed-width text table over the reports, one row per document.
pub fn render_report_table(reports: &[DocumentReport]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<14} {:>7} {:>9} {:>11} {:>7} {:>9} {:>11} {:>7} {:>9}",
        "document", "words", "accuracy", "cons-count", "cons-%", "cons-err", "aggr-count",
        "aggr-%", "aggr-err"
    )
    .unwrap();
    for r in reports {
        writeln!(
            out,
            "{:<14} {:>7} {:>8.1}% {:>11} {:>6.1}% {:>9} {:>11} {:>6.1}% {:>9}",
            r.name,
            r.word_count,
            r.accuracy * 100.0,
            r.conservative.count,
            r.conservative.pct * 100.0,
            r.conservative.errors,
            r.aggressive.count,
            r.aggressive.pct * 100.0,
            r.aggressive.errors,
        )
        .unwrap();
    }
    out
}

pub fn pr_curve_csv(points: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall,kept\n");
    for p in points {
        writeln!(out, "{},{},{},{}", p.threshold, p.precision, p.recall, p.kept).unwrap();
    }
    out
}

/// Minimal standalone SVG of the PR curve with optional operating points
/// drawn as crosses.
pub fn pr_curve_svg(points: &[PrPoint], operating: &[(String, f64, f64)]) -> String {
    let (w, h, margin) = (480.0, 360.0, 48.0);
    let x = |recall: f64| margin + recall * (w - 2.0 * margin);
    let y = |precision: f64| h - margin - precision * (h - 2.0 * margin);
    let mut svg = String::new();
    writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    )
    .unwrap();
    writeln!(
        svg,
        "  <rect x=\"{margin}\" y=\"{margin}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        w - 2.0 * margin,
        h - 2.0 * margin
    )
    .unwrap();
    writeln!(
        svg,
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">recall</text>",
        w / 2.0,
        h - 12.0
    )
    .unwrap();
    writeln!(
        svg,
        "  <text x=\"14\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 {})\">precision</text>",
        h / 2.0,
        h / 2.0
    )
    .unwrap();
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\">{tick}</text>",
            x(tick),
            h - margin + 14.0
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"9\">{tick}</text>",
            margin - 6.0,
            y(tick) + 3.0
        )
        .unwrap();
    }
    if !points.is_empty() {
        let path: Vec<String> = points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
            .collect();
        writeln!(
            svg,
            "  <polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>",
            path.join(" ")
        )
        .unwrap();
    }
    for (name, precision, recall) in operating {
        let (cx, cy) = (x(*recall), y(*precision));
        writeln!(
            svg,
            "  <path d=\"M {} {} L {} {} M {} {} L {} {}\" stroke=\"black\" stroke-width=\"1.5\"/>",
            cx - 4.0, cy - 4.0, cx + 4.0, cy + 4.0, cx - 4.0, cy + 4.0, cx + 4.0, cy - 4.0
        )
        .unwrap();
        writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-size=\"9\">{name}</text>",
            cx + 6.0,
            cy - 6.0
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{BBox, CharBox};
    use proptest::prelude::*;

    fn word(id: u32, text: &str, confidence: f64) -> OcrWord {
        OcrWord {
            word_id: id,
            page: 1,
            bbox: BBox::new(1 + id * 50, 1, 40 + id * 50, 20),
            text: text.to_string(),
            confidence,
            chars: text
                .chars()
                .map(|label| CharBox {
                    label,
                    bbox: BBox::new(1, 1, 10, 20),
                })
                .collect(),
            segmentation_inconsistent: false,
        }
    }

    fn words(texts: &[&str]) -> Vec<OcrWord> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| word(i as u32, t, 90.0))
            .collect()
    }

    fn truth(tokens: &[&str]) -> Vec<String> {
        tokens.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn substitution_leaves_neighbors_correct() {
        let labels = align_to_truth(&words(&["the", "cot", "sat"]), &truth(&["the", "cat", "sat"]));
        let flags: Vec<bool> = labels.iter().map(|l| l.correct).collect();
        assert_eq!(flags, vec![true, false, true]);
        assert_eq!(labels[1].truth.as_deref(), Some("cat"));
    }

    #[test]
    fn identical_sequences_align_exactly() {
        let labels = align_to_truth(&words(&["a", "b", "c"]), &truth(&["a", "b", "c"]));
        assert!(labels.iter().all(|l| l.correct));
        let indices: Vec<_> = labels.iter().map(|l| l.truth_index).collect();
        assert_eq!(indices, vec![Some(0), Some(1), Some(2)]);
    }

    #[test]
    fn inserted_word_is_marked_incorrect_without_disturbing_the_rest() {
        let labels = align_to_truth(
            &words(&["over", "zzz", "the", "hill"]),
            &truth(&["over", "the", "hill"]),
        );
        let flags: Vec<bool> = labels.iter().map(|l| l.correct).collect();
        assert_eq!(flags, vec![true, false, true, true]);
        assert_eq!(labels[1].truth_index, None);
    }

    #[test]
    fn case_and_punctuation_normalize_before_comparison() {
        let labels = align_to_truth(&words(&["The.", "123"]), &truth(&["the", "cat"]));
        assert!(labels[0].correct);
        assert!(!labels[1].correct);
    }

    fn label(word_id: u32, correct: bool) -> AlignedLabel {
        AlignedLabel {
            word_id,
            truth_index: Some(word_id as usize),
            truth: Some("w".to_string()),
            correct,
        }
    }

    fn entry(word_id: u32) -> CleanEntry {
        CleanEntry {
            word_id,
            page: 1,
            bbox: BBox::new(0, 0, 10, 10),
            text: "w".to_string(),
            stop_indices: Vec::new(),
        }
    }

    #[test]
    fn metrics_match_the_reference_row() {
        // 2056-word document, 175 all-correct entries: 8.5% recall.
        let labels: Vec<AlignedLabel> = (0..2056).map(|i| label(i, true)).collect();
        let entries: Vec<CleanEntry> = (0..175).map(entry).collect();
        let m = clean_list_metrics(&entries, &labels).unwrap();
        assert_eq!(m.kept, 175);
        assert_eq!(m.errors, 0);
        assert_eq!(m.precision, 1.0);
        assert_eq!((m.recall * 1000.0).round() / 10.0, 8.5);
    }

    #[test]
    fn empty_list_has_unit_precision_by_convention() {
        let labels = vec![label(0, false)];
        let m = clean_list_metrics(&[], &labels).unwrap();
        assert_eq!(m.kept, 0);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.recall, 0.0);
    }

    #[test]
    fn one_error_in_ten_entries() {
        let labels: Vec<AlignedLabel> = (0..20).map(|i| label(i, i != 3)).collect();
        let entries: Vec<CleanEntry> = (0..10).map(entry).collect();
        let m = clean_list_metrics(&entries, &labels).unwrap();
        assert_eq!(m.errors, 1);
        assert_eq!(m.precision, 0.9);
        assert_eq!(m.recall, 0.5);
    }

    #[test]
    fn unknown_word_id_is_a_usage_error() {
        let labels = vec![label(0, true)];
        assert!(clean_list_metrics(&[entry(7)], &labels).is_err());
    }

    #[test]
    fn pr_curve_enumerates_distinct_thresholds_descending() {
        let ws = vec![
            word(0, "a", 0.9),
            word(1, "b", 0.8),
            word(2, "c", 0.7),
        ];
        let labels = vec![label(0, true), label(1, false), label(2, true)];
        let points = confidence_pr_curve(&ws, &labels).unwrap();
        assert_eq!(points.len(), 3);
        assert_eq!(points[0], PrPoint { threshold: 0.9, precision: 1.0, recall: 1.0 / 3.0, kept: 1 });
        assert_eq!(points[1].precision, 0.5);
        assert_eq!(points[1].recall, 1.0 / 3.0);
        assert_eq!(points[1].kept, 2);
        assert_eq!(points[2].precision, 2.0 / 3.0);
        assert_eq!(points[2].recall, 2.0 / 3.0);
    }

    #[test]
    fn equal_confidences_collapse_to_one_point() {
        let ws = vec![word(0, "a", 55.0), word(1, "b", 55.0)];
        let labels = vec![label(0, true), label(1, true)];
        let points = confidence_pr_curve(&ws, &labels).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].precision, 1.0);
        assert_eq!(points[0].recall, 1.0);
        assert_eq!(points[0].kept, 2);
    }

    #[test]
    fn totals_row_recomputes_percentages_from_summed_counts() {
        let r1 = DocumentReport {
            name: "a".into(),
            word_count: 2056,
            accuracy: 0.854,
            conservative: ListSummary { count: 175, pct: 175.0 / 2056.0, errors: 0 },
            aggressive: ListSummary { count: 522, pct: 522.0 / 2056.0, errors: 0 },
        };
        let r2 = DocumentReport {
            name: "b".into(),
            word_count: 12001,
            accuracy: 0.829,
            conservative: ListSummary { count: 668, pct: 668.0 / 12001.0, errors: 0 },
            aggressive: ListSummary { count: 2139, pct: 2139.0 / 12001.0, errors: 1 },
        };
        let totals = aggregate_reports(&[r1, r2]);
        assert_eq!(totals.word_count, 14057);
        assert_eq!(totals.conservative.count, 843);
        assert_eq!(totals.aggressive.count, 2661);
        assert_eq!(totals.aggressive.errors, 1);
        assert_eq!((totals.conservative.pct * 1000.0).round() / 10.0, 6.0);
        assert_eq!((totals.aggressive.pct * 1000.0).round() / 10.0, 18.9);
        let table = render_report_table(&[totals]);
        assert!(table.contains("6.0%"), "{table}");
        assert!(table.contains("18.9%"), "{table}");
    }

    #[test]
    fn report_serializes_with_stable_field_names() {
        let labels = vec![label(0, true), label(1, false)];
        let m = clean_list_metrics(&[entry(0)], &labels).unwrap();
        let report = document_report("doc", &labels, &m, &m);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["word_count"], 2);
        assert_eq!(json["accuracy"], 0.5);
        assert_eq!(json["conservative"]["count"], 1);
        assert_eq!(json["conservative"]["errors"], 0);
        assert!(json["conservative"]["pct"].is_number());
    }

    #[test]
    fn svg_plot_contains_curve_and_operating_points() {
        let points = vec![
            PrPoint { threshold: 0.9, precision: 1.0, recall: 0.2, kept: 2 },
            PrPoint { threshold: 0.5, precision: 0.8, recall: 0.6, kept: 8 },
        ];
        let svg = pr_curve_svg(&points, &[("conservative".to_string(), 1.0, 0.1)]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("conservative"));
    }

    proptest! {
        #[test]
        fn pr_curve_is_monotone_in_kept_and_recall(
            data in proptest::collection::vec((0u8..5, any::<bool>()), 1..40),
        ) {
            let ws: Vec<OcrWord> = data
                .iter()
                .enumerate()
                .map(|(i, (c, _))| word(i as u32, "w", *c as f64 * 10.0))
                .collect();
            let labels: Vec<AlignedLabel> = data
                .iter()
                .enumerate()
                .map(|(i, (_, ok))| label(i as u32, *ok))
                .collect();
            let points = confidence_pr_curve(&ws, &labels).unwrap();
            prop_assert!(!points.is_empty());
            for pair in points.windows(2) {
                prop_assert!(pair[0].threshold > pair[1].threshold);
                prop_assert!(pair[0].kept < pair[1].kept);
                prop_assert!(pair[0].recall <= pair[1].recall);
            }
            prop_assert_eq!(points.last().unwrap().kept, ws.len() as u64);
        }

        /// Swapping which sequence is "output" and which is "truth" must not
        /// change which pairs count as correct.
        #[test]
        fn alignment_correctness_is_symmetric(
            a in proptest::collection::vec(prop::sample::select(vec!["aa", "ab", "ba", "bb", "a"]), 0..8),
            b in proptest::collection::vec(prop::sample::select(vec!["aa", "ab", "ba", "bb", "a"]), 0..8),
        ) {
            let wa = words(&a);
            let tb = truth(&b);
            let forward = align_to_truth(&wa, &tb);
            let wb = words(&b);
            let ta = truth(&a);
            let backward = align_to_truth(&wb, &ta);

            let fwd_pairs: Vec<(usize, usize)> = forward
                .iter()
                .enumerate()
                .filter(|(_, l)| l.correct)
                .map(|(i, l)| (i, l.truth_index.unwrap()))
                .collect();
            let bwd_pairs: Vec<(usize, usize)> = backward
                .iter()
                .enumerate()
                .filter(|(_, l)| l.correct)
                .map(|(i, l)| (l.truth_index.unwrap(), i))
                .collect();
            prop_assert_eq!(fwd_pairs, bwd_pairs);
        }
    }
}
