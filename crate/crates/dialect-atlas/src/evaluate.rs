//! Threshold classification of lexical change scores.
//!
//! Every scoring model reduces a word to one non-negative number (how far
//! apart its regional usages sit), so detection is a 1-d threshold fit:
//! pick the cut that best separates labeled shifted words from stable ones
//! on the training half, then report standard binary metrics on the held
//! out half. Higher score always means shifted; anti-correlated scorers
//! are not rescued by flipping the direction.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    pub word: String,
    /// true = the word's usage differs between regions, false = stable.
    pub shifted: bool,
    pub split: Option<Split>,
}

/// Labeled ground-truth lexicon, optionally carrying a pinned
/// train/test assignment per entry.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledLexicon {
    pub entries: Vec<LexiconEntry>,
}

impl LabeledLexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The pinned split, when every entry carries one.
    pub fn pinned(&self) -> Option<(LabeledLexicon, LabeledLexicon)> {
        if self.entries.is_empty() || self.entries.iter().any(|e| e.split.is_none()) {
            return None;
        }
        let pick = |side: Split| LabeledLexicon {
            entries: self
                .entries
                .iter()
                .filter(|e| e.split == Some(side))
                .cloned()
                .collect(),
        };
        Some((pick(Split::Train), pick(Split::Test)))
    }
}

/// Parse a `word<TAB>label` TSV, label 0 or 1, with an optional third
/// column `train`/`test`. The split column is all-or-nothing: carrying it
/// on some rows only is a format error, as is a repeated word.
pub fn read_lexicon<R: Read>(r: R) -> Result<LabeledLexicon> {
    let mut entries: Vec<LexiconEntry> = Vec::new();
    let mut with_split = 0usize;
    for (no, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Corpus { line: no + 1, msg: msg.to_string() };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(bad("expected word<TAB>label[<TAB>split]"));
        }
        let word = fields[0].to_string();
        if word.is_empty() {
            return Err(bad("empty word"));
        }
        if entries.iter().any(|e| e.word == word) {
            return Err(bad("duplicate word"));
        }
        let shifted = match fields[1] {
            "0" => false,
            "1" => true,
            other => return Err(bad(&format!("label must be 0 or 1, got {other:?}"))),
        };
        let split = if fields.len() == 3 {
            with_split += 1;
            match fields[2] {
                "train" => Some(Split::Train),
                "test" => Some(Split::Test),
                other => {
                    return Err(bad(&format!("split must be train or test, got {other:?}")))
                }
            }
        } else {
            None
        };
        entries.push(LexiconEntry { word, shifted, split });
    }
    if with_split != 0 && with_split != entries.len() {
        return Err(Error::invalid(
            "lexicon mixes rows with and without a split column",
        ));
    }
    Ok(LabeledLexicon { entries })
}

pub fn load_lexicon<P: AsRef<Path>>(path: P) -> Result<LabeledLexicon> {
    read_lexicon(File::open(path)?)
}

/// Write the TSV form; the split column appears when every entry has one.
pub fn write_lexicon<W: Write>(mut w: W, lexicon: &LabeledLexicon) -> Result<()> {
    let with_split = !lexicon.entries.is_empty()
        && lexicon.entries.iter().all(|e| e.split.is_some());
    for e in &lexicon.entries {
        let label = u8::from(e.shifted);
        if with_split {
            let split = match e.split {
                Some(Split::Train) => "train",
                _ => "test",
            };
            writeln!(w, "{}\t{}\t{}", e.word, label, split)?;
        } else {
            writeln!(w, "{}\t{}", e.word, label)?;
        }
    }
    Ok(())
}

/// Deterministic stratified split. The train side takes floor(n * ratio)
/// entries overall; each class contributes its own floor share and any
/// remaining seats go to the classes with the largest fractional share
/// (shifted first on ties), so class proportions survive within one entry.
/// Output entries keep the input order and carry their assignment.
pub fn split_lexicon(
    lexicon: &LabeledLexicon,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledLexicon, LabeledLexicon)> {
    if lexicon.entries.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::invalid(format!("split ratio {ratio} outside [0, 1]")));
    }
    let n = lexicon.entries.len();
    let train_total = (n as f64 * ratio).floor() as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // shifted class first in everything below so tie-breaks are fixed
    let classes = [true, false];
    let mut idx: Vec<Vec<usize>> = classes
        .iter()
        .map(|&c| {
            (0..n)
                .filter(|&i| lexicon.entries[i].shifted == c)
                .collect::<Vec<_>>()
        })
        .collect();
    for pool in &mut idx {
        pool.shuffle(&mut rng);
    }

    let mut take: Vec<usize> =
        idx.iter().map(|pool| (pool.len() as f64 * ratio).floor() as usize).collect();
    let fracs: Vec<f64> = idx
        .iter()
        .map(|pool| pool.len() as f64 * ratio - (pool.len() as f64 * ratio).floor())
        .collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by(|&a, &b| fracs[b].partial_cmp(&fracs[a]).unwrap().then(a.cmp(&b)));
    let mut leftover = train_total.saturating_sub(take.iter().sum::<usize>());
    for &c in order.iter().cycle().take(order.len() * (leftover + 1)) {
        if leftover == 0 {
            break;
        }
        if take[c] < idx[c].len() {
            take[c] += 1;
            leftover -= 1;
        }
    }

    let mut is_train = vec![false; n];
    for (c, pool) in idx.iter().enumerate() {
        for &i in pool.iter().take(take[c]) {
            is_train[i] = true;
        }
    }
    let side = |train: bool| LabeledLexicon {
        entries: lexicon
            .entries
            .iter()
            .enumerate()
            .filter(|&(i, _)| is_train[i] == train)
            .map(|(i, e)| LexiconEntry {
                word: e.word.clone(),
                shifted: e.shifted,
                split: Some(if is_train[i] { Split::Train } else { Split::Test }),
            })
            .collect(),
    };
    Ok((side(true), side(false)))
}

/// Predicts shifted when score > threshold. The direction is fixed:
/// all scorers emit divergence-like values where larger means more change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdClassifier {
    pub threshold: f64,
}

impl ThresholdClassifier {
    pub fn predict(&self, score: f64) -> bool {
        score > self.threshold
    }
}

/// Fit the accuracy-maximizing threshold on (score, shifted) pairs.
/// Candidates are the midpoints between consecutive distinct scores plus
/// one sentinel below and above everything; accuracy ties go to the widest
/// gap (sentinel gaps count as unbounded), then to the smaller threshold.
pub fn fit_threshold(examples: &[(f64, bool)]) -> Result<ThresholdClassifier> {
    if examples.is_empty() {
        return Err(Error::EmptyLexicon);
    }
    if examples.iter().any(|(s, _)| !s.is_finite()) {
        return Err(Error::invalid("non-finite score in threshold fit"));
    }
    let pos = examples.iter().filter(|&&(_, l)| l).count();
    if pos == 0 || pos == examples.len() {
        return Err(Error::OneClassLexicon);
    }

    let mut distinct: Vec<f64> = examples.iter().map(|&(s, _)| s).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();

    // (candidate threshold, gap width)
    let mut candidates: Vec<(f64, f64)> = Vec::with_capacity(distinct.len() + 1);
    candidates.push((distinct[0] - 1.0, f64::INFINITY));
    for pair in distinct.windows(2) {
        candidates.push(((pair[0] + pair[1]) / 2.0, pair[1] - pair[0]));
    }
    candidates.push((distinct[distinct.len() - 1] + 1.0, f64::INFINITY));

    let correct = |threshold: f64| {
        examples
            .iter()
            .filter(|&&(s, l)| (s > threshold) == l)
            .count()
    };
    let mut best = (0usize, f64::NEG_INFINITY, f64::NAN); // (correct, gap, threshold)
    for &(threshold, gap) in &candidates {
        let c = correct(threshold);
        let better = c > best.0
            || (c == best.0 && gap > best.1)
            || (c == best.0 && gap == best.1 && threshold < best.2);
        if better {
            best = (c, gap, threshold);
        }
    }
    Ok(ThresholdClassifier { threshold: best.2 })
}

/// Binary metrics with shifted as the positive class; any ratio with a
/// zero denominator reports 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl MetricsReport {
    pub fn from_confusion(tp: u64, fp: u64, tn: u64, fn_: u64) -> MetricsReport {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let accuracy = ratio(tp + tn, tp + fp + tn + fn_);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MetricsReport { accuracy, precision, recall, f1, tp, fp, tn, fn_ }
    }
}

pub fn evaluate_classifier(
    classifier: &ThresholdClassifier,
    examples: &[(f64, bool)],
) -> MetricsReport {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    for &(score, shifted) in examples {
        match (classifier.predict(score), shifted) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    MetricsReport::from_confusion(tp, fp, tn, fn_)
}

/// A model that scores how much a word's usage differs between the two
/// regions under comparison. None means the model cannot score the word
/// (out of vocabulary or unsupported); such words are skipped during
/// fitting and counted as misclassified at evaluation.
pub trait ChangeScorer {
    fn name(&self) -> &str;
    fn score(&self, word: &str) -> Option<f64>;
}

#[derive(Debug)]
pub struct BenchmarkRow {
    pub model: String,
    pub outcome: std::result::Result<MetricsReport, String>,
    /// Train / test words the scorer could not score.
    pub unscored_train: usize,
    pub unscored_test: usize,
}

/// Fit on train, evaluate on test, once per scorer. A scorer that cannot
/// produce a fittable training set yields an error row and the run moves
/// on. Unscored test words count against the model: a shifted word it
/// cannot score is a miss, a stable one a false alarm.
pub fn run_benchmark(
    scorers: &[&dyn ChangeScorer],
    train: &LabeledLexicon,
    test: &LabeledLexicon,
) -> Vec<BenchmarkRow> {
    let mut rows = Vec::with_capacity(scorers.len());
    for scorer in scorers {
        let mut fit_examples = Vec::new();
        let mut unscored_train = 0usize;
        for e in &train.entries {
            match scorer.score(&e.word).filter(|s| s.is_finite()) {
                Some(s) => fit_examples.push((s, e.shifted)),
                None => unscored_train += 1,
            }
        }
        let fitted = fit_threshold(&fit_examples);
        let outcome = match fitted {
            Err(err) => Err(err.to_string()),
            Ok(classifier) => {
                let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
                let mut unscored_test = 0usize;
                for e in &test.entries {
                    let predicted = match scorer.score(&e.word).filter(|s| s.is_finite()) {
                        Some(s) => classifier.predict(s),
                        None => {
                            unscored_test += 1;
                            !e.shifted
                        }
                    };
                    match (predicted, e.shifted) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, false) => tn += 1,
                        (false, true) => fn_ += 1,
                    }
                }
                rows.push(BenchmarkRow {
                    model: scorer.name().to_string(),
                    outcome: Ok(MetricsReport::from_confusion(tp, fp, tn, fn_)),
                    unscored_train,
                    unscored_test,
                });
                continue;
            }
        };
        rows.push(BenchmarkRow {
            model: scorer.name().to_string(),
            outcome,
            unscored_train,
            unscored_test: 0,
        });
    }
    rows
}

/// TSV benchmark table, one row per model: Model, Acc, Prec, Recall, F1.
/// Failed models show dashes; the error text travels in the row struct.
pub fn report_table(rows: &[BenchmarkRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Model\tAcc\tPrec\tRecall\tF1");
    for row in rows {
        match &row.outcome {
            Ok(m) => {
                let _ = writeln!(
                    out,
                    "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                    row.model, m.accuracy, m.precision, m.recall, m.f1
                );
            }
            Err(_) => {
                let _ = writeln!(out, "{}\t-\t-\t-\t-", row.model);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn lexicon(labels: &[u8]) -> LabeledLexicon {
        LabeledLexicon {
            entries: labels
                .iter()
                .enumerate()
                .map(|(i, &l)| LexiconEntry {
                    word: format!("w{i}"),
                    shifted: l == 1,
                    split: None,
                })
                .collect(),
        }
    }

    #[test]
    fn balanced_682_entries_split_511_to_171() {
        let labels: Vec<u8> = (0..682).map(|i| u8::from(i < 341)).collect();
        let (train, test) = split_lexicon(&lexicon(&labels), 0.75, 2019).unwrap();
        assert_eq!(train.len(), 511);
        assert_eq!(test.len(), 171);
        let pos = |l: &LabeledLexicon| l.entries.iter().filter(|e| e.shifted).count();
        assert!((255..=256).contains(&pos(&train)), "train positives {}", pos(&train));
        assert_eq!(pos(&train) + pos(&test), 341);
    }

    #[test]
    fn four_entries_split_three_to_one() {
        let (train, test) = split_lexicon(&lexicon(&[1, 1, 0, 0]), 0.75, 7).unwrap();
        assert_eq!(train.len(), 3);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i % 3 == 0)).collect();
        let lex = lexicon(&labels);
        let words = |l: &LabeledLexicon| {
            l.entries.iter().map(|e| e.word.clone()).collect::<Vec<_>>()
        };
        let (a1, _) = split_lexicon(&lex, 0.75, 5).unwrap();
        let (a2, _) = split_lexicon(&lex, 0.75, 5).unwrap();
        assert_eq!(words(&a1), words(&a2));
        let (b, _) = split_lexicon(&lex, 0.75, 6).unwrap();
        assert_ne!(words(&a1), words(&b));
    }

    #[test]
    fn split_preserves_class_shares_within_one() {
        let labels: Vec<u8> = (0..100).map(|i| u8::from(i < 60)).collect();
        let (train, test) = split_lexicon(&lexicon(&labels), 0.75, 3).unwrap();
        assert_eq!(train.len(), 75);
        let pos_train = train.entries.iter().filter(|e| e.shifted).count();
        assert_eq!(pos_train, 45);
        assert_eq!(test.entries.iter().filter(|e| e.shifted).count(), 15);
        assert!(train.entries.iter().all(|e| e.split == Some(Split::Train)));
        assert!(test.entries.iter().all(|e| e.split == Some(Split::Test)));
    }

    #[test]
    fn empty_lexicon_cannot_be_split() {
        assert!(matches!(
            split_lexicon(&LabeledLexicon::default(), 0.75, 0),
            Err(Error::EmptyLexicon)
        ));
    }

    #[test]
    fn separable_scores_fit_the_midpoint() {
        let examples = [(0.1, false), (0.2, false), (0.8, true), (0.9, true)];
        let clf = fit_threshold(&examples).unwrap();
        assert_eq!(clf.threshold, 0.5);
        assert_eq!(evaluate_classifier(&clf, &examples).accuracy, 1.0);
    }

    #[test]
    fn anti_correlated_scores_cap_at_half() {
        let examples = [(0.1, true), (0.2, true), (0.8, false), (0.9, false)];
        let clf = fit_threshold(&examples).unwrap();
        assert_eq!(evaluate_classifier(&clf, &examples).accuracy, 0.5);
    }

    #[test]
    fn equal_scores_fall_back_to_the_majority_class() {
        let examples = [(0.3, true), (0.3, true), (0.3, true), (0.3, false), (0.3, false)];
        let clf = fit_threshold(&examples).unwrap();
        assert!(clf.threshold.is_finite());
        assert_relative_eq!(evaluate_classifier(&clf, &examples).accuracy, 0.6);
    }

    #[test]
    fn one_class_and_bad_scores_are_errors() {
        assert!(matches!(
            fit_threshold(&[(0.1, true), (0.2, true)]),
            Err(Error::OneClassLexicon)
        ));
        assert!(matches!(fit_threshold(&[]), Err(Error::EmptyLexicon)));
        assert!(fit_threshold(&[(f64::NAN, true), (0.2, false)]).is_err());
    }

    #[test]
    fn ties_prefer_the_widest_gap() {
        // both midpoints classify 3/4 correctly; the 0.4-wide right gap wins
        let examples = [(0.1, false), (0.2, true), (0.3, false), (0.7, true)];
        let clf = fit_threshold(&examples).unwrap();
        assert_eq!(clf.threshold, 0.5);
    }

    #[test]
    fn fit_matches_an_exhaustive_search_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for round in 0..200 {
            let n = rng.gen_range(2..40);
            let mut examples: Vec<(f64, bool)> = (0..n)
                .map(|_| ((rng.gen_range(0..20) as f64) / 10.0, rng.gen_bool(0.5)))
                .collect();
            examples[0].1 = true;
            examples[1].1 = false;

            let clf = fit_threshold(&examples).unwrap();
            let achieved = examples.iter().filter(|&&(s, l)| clf.predict(s) == l).count();

            let mut sorted: Vec<f64> = examples.iter().map(|&(s, _)| s).collect();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sorted.dedup();
            let mut cands = vec![sorted[0] - 1.0, sorted[sorted.len() - 1] + 1.0];
            cands.extend(sorted.windows(2).map(|p| (p[0] + p[1]) / 2.0));
            let oracle = cands
                .iter()
                .map(|&t| examples.iter().filter(|&&(s, l)| (s > t) == l).count())
                .max()
                .unwrap();
            assert_eq!(achieved, oracle, "round {round}");
        }
    }

    #[test]
    fn confusion_arithmetic_matches_hand_counts() {
        let m = MetricsReport::from_confusion(2, 1, 3, 1);
        assert_relative_eq!(m.accuracy, 5.0 / 7.0);
        assert_relative_eq!(m.precision, 2.0 / 3.0);
        assert_relative_eq!(m.recall, 2.0 / 3.0);
        assert_relative_eq!(m.f1, 2.0 / 3.0);
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let clf = ThresholdClassifier { threshold: 0.5 };
        let examples = [(0.9, true), (0.8, true), (0.1, false)];
        let m = evaluate_classifier(&clf, &examples);
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
        assert_eq!((m.tp, m.fp, m.tn, m.fn_), (2, 0, 1, 0));
    }

    #[test]
    fn zero_denominators_report_zero() {
        let clf = ThresholdClassifier { threshold: 10.0 };
        let m = evaluate_classifier(&clf, &[(0.1, false), (0.2, false)]);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_recompute_from_the_returned_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let examples: Vec<(f64, bool)> = (0..rng.gen_range(1..30))
                .map(|_| (rng.gen::<f64>(), rng.gen_bool(0.5)))
                .collect();
            let clf = ThresholdClassifier { threshold: 0.5 };
            let m = evaluate_classifier(&clf, &examples);
            let re = MetricsReport::from_confusion(m.tp, m.fp, m.tn, m.fn_);
            assert_eq!(m, re);
            assert_eq!(m.tp + m.fp + m.tn + m.fn_, examples.len() as u64);
        }
    }

    struct TableScorer(Vec<(String, Option<f64>)>);

    impl ChangeScorer for TableScorer {
        fn name(&self) -> &str {
            "table"
        }
        fn score(&self, word: &str) -> Option<f64> {
            self.0.iter().find(|(w, _)| w == word).and_then(|(_, s)| *s)
        }
    }

    struct Oracle<'a>(&'a str);

    impl ChangeScorer for Oracle<'_> {
        fn name(&self) -> &str {
            self.0
        }
        fn score(&self, word: &str) -> Option<f64> {
            Some(if word.starts_with('s') { 1.0 } else { 0.0 })
        }
    }

    struct Mute;

    impl ChangeScorer for Mute {
        fn name(&self) -> &str {
            "mute"
        }
        fn score(&self, _: &str) -> Option<f64> {
            None
        }
    }

    fn shift_lexicon(shifted: usize, stable: usize) -> LabeledLexicon {
        let mut entries = Vec::new();
        for i in 0..shifted {
            entries.push(LexiconEntry { word: format!("s{i}"), shifted: true, split: None });
        }
        for i in 0..stable {
            entries.push(LexiconEntry { word: format!("k{i}"), shifted: false, split: None });
        }
        LabeledLexicon { entries }
    }

    #[test]
    fn benchmark_isolates_failures_and_formats_the_table() {
        let train = shift_lexicon(4, 4);
        let test = shift_lexicon(3, 3);
        let oracle = Oracle("oracle");
        let rows = run_benchmark(&[&oracle, &Mute], &train, &test);
        assert_eq!(rows.len(), 2);
        let m = rows[0].outcome.as_ref().unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert!(rows[1].outcome.is_err());
        assert_eq!(rows[1].unscored_train, 8);

        let table = report_table(&rows);
        let mut lines = table.lines();
        assert_eq!(lines.next(), Some("Model\tAcc\tPrec\tRecall\tF1"));
        assert_eq!(lines.next(), Some("oracle\t1.0000\t1.0000\t1.0000\t1.0000"));
        assert_eq!(lines.next(), Some("mute\t-\t-\t-\t-"));
    }

    #[test]
    fn unscored_test_words_count_as_misclassified() {
        let train = shift_lexicon(3, 3);
        let mut test = shift_lexicon(2, 2);
        test.entries.push(LexiconEntry {
            word: "zz".to_string(),
            shifted: true,
            split: None,
        });
        // scores everything in train, misses "zz" in test
        let table: Vec<(String, Option<f64>)> = train
            .entries
            .iter()
            .chain(&test.entries)
            .filter(|e| e.word != "zz")
            .map(|e| (e.word.clone(), Some(if e.shifted { 1.0 } else { 0.0 })))
            .collect();
        let scorer = TableScorer(table);
        let rows = run_benchmark(&[&scorer], &train, &test);
        let m = rows[0].outcome.as_ref().unwrap();
        assert_eq!(rows[0].unscored_test, 1);
        assert_eq!(m.fn_, 1);
        assert_relative_eq!(m.accuracy, 4.0 / 5.0);
    }

    #[test]
    fn metrics_ignore_word_identities() {
        let a = shift_lexicon(3, 3);
        let mut b = a.clone();
        for (i, e) in b.entries.iter_mut().enumerate() {
            let tag = if e.shifted { "s" } else { "k" };
            e.word = format!("{tag}_renamed_{i}");
        }
        let oracle = Oracle("o");
        let ra = run_benchmark(&[&oracle], &a, &a);
        let rb = run_benchmark(&[&oracle], &b, &b);
        assert_eq!(ra[0].outcome.as_ref().unwrap(), rb[0].outcome.as_ref().unwrap());
    }

    #[test]
    fn lexicon_io_roundtrips_and_rejects_malformed_input() {
        let lex = LabeledLexicon {
            entries: vec![
                LexiconEntry { word: "gas".into(), shifted: true, split: Some(Split::Train) },
                LexiconEntry { word: "flat".into(), shifted: true, split: Some(Split::Test) },
                LexiconEntry { word: "the".into(), shifted: false, split: Some(Split::Train) },
            ],
        };
        let mut buf = Vec::new();
        write_lexicon(&mut buf, &lex).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "gas\t1\ttrain\nflat\t1\ttest\nthe\t0\ttrain\n"
        );
        let back = read_lexicon(&buf[..]).unwrap();
        assert_eq!(back, lex);
        let (train, test) = back.pinned().unwrap();
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 1);

        // no split column anywhere is fine, and pinned() declines
        let plain = read_lexicon("a\t1\nb\t0\n".as_bytes()).unwrap();
        assert!(plain.pinned().is_none());

        for bad in [
            "a\t2\n",             // label out of range
            "a\t1\tmaybe\n",      // bad split value
            "a\t1\na\t0\n",       // duplicate word
            "a\n",                // missing label
            "a\t1\tb\tc\n",       // too many columns
            "a\t1\ttrain\nb\t0\n", // mixed split columns
        ] {
            assert!(read_lexicon(bad.as_bytes()).is_err(), "accepted {bad:?}");
        }
    }
}
