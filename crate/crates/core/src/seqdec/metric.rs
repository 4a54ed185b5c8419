//! Sub-token precision, recall and F1 over case-insensitive sub-word
//! multisets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Splits an identifier at underscores, non-alphanumerics, digit runs and
/// camelCase boundaries, lowercased. `HTTPServer` gives `http`, `server`.
pub fn split_subwords(name: &str) -> Vec<String> {
    let mut out = Vec::new();
    for part in name.split(|c: char| !c.is_ascii_alphanumeric()) {
        let chars: Vec<char> = part.chars().collect();
        let mut cur = String::new();
        for (i, &c) in chars.iter().enumerate() {
            let boundary = i > 0 && {
                let prev = chars[i - 1];
                let next_lower = chars.get(i + 1).is_some_and(|n| n.is_ascii_lowercase());
                (c.is_ascii_uppercase() && (prev.is_ascii_lowercase() || prev.is_ascii_digit()))
                    || (c.is_ascii_uppercase() && prev.is_ascii_uppercase() && next_lower)
                    || (c.is_ascii_digit() != prev.is_ascii_digit())
            };
            if boundary && !cur.is_empty() {
                out.push(std::mem::take(&mut cur).to_ascii_lowercase());
            }
            cur.push(c);
        }
        if !cur.is_empty() {
            out.push(cur.to_ascii_lowercase());
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(matched: usize, predicted: usize, gold: usize) -> Prf {
        if predicted == 0 && gold == 0 {
            return Prf { precision: 1.0, recall: 1.0, f1: 1.0 };
        }
        let precision = if predicted == 0 { 0.0 } else { matched as f64 / predicted as f64 };
        let recall = if gold == 0 { 0.0 } else { matched as f64 / gold as f64 };
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Prf { precision, recall, f1 }
    }
}

/// Size of the multiset intersection.
pub fn matched_subwords(pred: &[String], gold: &[String]) -> usize {
    let mut bag: HashMap<String, usize> = HashMap::new();
    for g in gold {
        *bag.entry(g.to_ascii_lowercase()).or_default() += 1;
    }
    let mut m = 0;
    for p in pred {
        if let Some(c) = bag.get_mut(&p.to_ascii_lowercase()) {
            if *c > 0 {
                *c -= 1;
                m += 1;
            }
        }
    }
    m
}

/// P/R/F1 of one predicted sub-word list against the gold list. An empty
/// prediction scores precision 0 unless gold is empty too (then all ones);
/// a non-empty prediction against an empty gold scores recall 0.
pub fn subtoken_prf_words(pred: &[String], gold: &[String]) -> Prf {
    Prf::from_counts(matched_subwords(pred, gold), pred.len(), gold.len())
}

/// [`subtoken_prf_words`] on identifiers split with [`split_subwords`].
pub fn subtoken_prf(pred: &str, gold: &str) -> Prf {
    subtoken_prf_words(&split_subwords(pred), &split_subwords(gold))
}

/// Corpus-level counts; P/R/F1 are micro-averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtokenCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl SubtokenCounts {
    pub fn add(&mut self, pred: &[String], gold: &[String]) {
        self.matched += matched_subwords(pred, gold);
        self.predicted += pred.len();
        self.gold += gold.len();
    }

    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.matched, self.predicted, self.gold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(p: Prf, want: (f64, f64, f64)) -> bool {
        (p.precision - want.0).abs() < 1e-3 && (p.recall - want.1).abs() < 1e-3 && (p.f1 - want.2).abs() < 1e-3
    }

    #[test]
    fn reordered_subwords_are_a_perfect_answer() {
        assert_eq!(subtoken_prf("diffCompute", "computeDiff"), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
    }

    #[test]
    fn partial_answers() {
        // compute vs {compute, diff}: 1 match, 1 predicted, 2 gold.
        assert!(close(subtoken_prf("compute", "computeDiff"), (1.0, 0.5, 2.0 / 3.0)));
        // {compute, file, diff} vs {compute, diff}: 2 matches, 3 predicted, 2 gold.
        assert!(close(subtoken_prf("computeFileDiff", "computeDiff"), (2.0 / 3.0, 1.0, 0.8)));
    }

    #[test]
    fn empty_names() {
        assert_eq!(subtoken_prf("", ""), Prf { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(subtoken_prf("", "sumArray"), Prf { precision: 0.0, recall: 0.0, f1: 0.0 });
        assert_eq!(subtoken_prf("sum", "").f1, 0.0);
    }

    #[test]
    fn splitting() {
        assert_eq!(split_subwords("sum_two_numbers"), ["sum", "two", "numbers"]);
        assert_eq!(split_subwords("findMaxDiff"), ["find", "max", "diff"]);
        assert_eq!(split_subwords("HTTPServer2x"), ["http", "server", "2", "x"]);
        assert!(split_subwords("__").is_empty());
    }

    #[test]
    fn duplicates_count_as_a_multiset() {
        let p = subtoken_prf("sumSum", "sumArray");
        assert!(close(p, (0.5, 0.5, 0.5)));
    }

    #[test]
    fn micro_average() {
        let mut c = SubtokenCounts::default();
        c.add(&split_subwords("compute"), &split_subwords("computeDiff"));
        c.add(&split_subwords("a_b_c"), &split_subwords("a"));
        // matched 2, predicted 4, gold 3
        let p = c.prf();
        assert!((p.precision - 0.5).abs() < 1e-12 && (p.recall - 2.0 / 3.0).abs() < 1e-12);
    }

    fn word() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["sum", "max", "min", "find", "array", "diff", "count"]).prop_map(String::from)
    }

    proptest! {
        #[test]
        fn order_free_and_bounded(
            pred in proptest::collection::vec(word(), 0..5),
            gold in proptest::collection::vec(word(), 0..5),
            rot in 0usize..5,
        ) {
            let base = subtoken_prf_words(&pred, &gold);
            let mut shuffled = pred.clone();
            if !shuffled.is_empty() {
                let k = rot % shuffled.len();
                shuffled.rotate_left(k);
            }
            let mut rev = gold.clone();
            rev.reverse();
            prop_assert_eq!(subtoken_prf_words(&shuffled, &rev), base);
            for v in [base.precision, base.recall, base.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if !pred.is_empty() && !gold.is_empty() {
                prop_assert_eq!(base.f1 == 0.0, matched_subwords(&pred, &gold) == 0);
            }
        }
    }
}
