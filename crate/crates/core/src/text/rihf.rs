use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::bow::tokenize_bow;
use crate::error::{Error, Result};
use crate::mutation::MutationAddress;
use crate::screen::{aggregate_outcomes, ScreenRecord};

/// First BoW token of a text.
pub fn initial_word(text: &str) -> Option<String> {
    tokenize_bow(text).into_iter().next()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialWordHistogram {
    pub histogram: BTreeMap<String, usize>,
    pub top_word: String,
    pub top_count: usize,
}

/// Histogram of initial words; the top word is the most frequent, ties
/// going to the lexicographically smallest. Outputs without any token are
/// skipped.
pub fn initial_word_histogram<S: AsRef<str>>(outputs: &[S]) -> Result<InitialWordHistogram> {
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for o in outputs {
        if let Some(w) = initial_word(o.as_ref()) {
            *histogram.entry(w).or_default() += 1;
        }
    }
    // BTreeMap iterates in lexicographic order, so the first maximum wins
    let (top_word, top_count) = histogram
        .iter()
        .fold(None::<(&String, usize)>, |best, (w, &c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((w, c)),
        })
        .map(|(w, c)| (w.clone(), c))
        .ok_or_else(|| Error::Input("no output has an initial word".into()))?;
    Ok(InitialWordHistogram {
        histogram,
        top_word,
        top_count,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rarity {
    Rare,
    Common,
}

pub fn classify_rihf(top_word: &str, common_words: &BTreeSet<String>) -> Rarity {
    if common_words.contains(top_word) {
        Rarity::Common
    } else {
        Rarity::Rare
    }
}

/// Words that are the top initial word of at least `min_share` of the
/// evaluated models.
pub fn common_initial_words<S: AsRef<str>>(top_words: &[S], min_share: f64) -> BTreeSet<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in top_words {
        *counts.entry(w.as_ref()).or_default() += 1;
    }
    let total = top_words.len() as f64;
    counts
        .into_iter()
        .filter(|&(_, c)| c as f64 >= min_share * total)
        .map(|(w, _)| w.to_string())
        .collect()
}

/// Mutations sharing one rare top initial word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RihfGroup {
    pub word: String,
    pub members: Vec<MutationAddress>,
    pub row_coordinate_count: usize,
    pub column_coordinate_count: usize,
}

impl RihfGroup {
    pub fn new(word: String, mut members: Vec<MutationAddress>) -> Self {
        members.sort();
        members.dedup();
        let rows: BTreeSet<usize> = members.iter().map(|m| m.y).collect();
        let cols: BTreeSet<usize> = members.iter().map(|m| m.x).collect();
        Self {
            word,
            row_coordinate_count: rows.len(),
            column_coordinate_count: cols.len(),
            members,
        }
    }
}

/// Groups `(mutation, top word)` observations whose word is rare.
pub fn group_rare_words(observations: &[(MutationAddress, String)], common_words: &BTreeSet<String>) -> Vec<RihfGroup> {
    let mut by_word: BTreeMap<&str, Vec<MutationAddress>> = BTreeMap::new();
    for (addr, word) in observations {
        if classify_rihf(word, common_words) == Rarity::Rare {
            by_word.entry(word).or_default().push(*addr);
        }
    }
    by_word
        .into_iter()
        .map(|(w, members)| RihfGroup::new(w.to_string(), members))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RihfStats {
    pub word: String,
    pub member_count: usize,
    pub row_coordinate_count: usize,
    pub column_coordinate_count: usize,
}

/// Distinct row (`y`) and column (`x`) coordinates of each group with at
/// least two members, pooled across matrices.
pub fn rihf_coordinate_stats(groups: &[RihfGroup]) -> Vec<RihfStats> {
    groups
        .iter()
        .filter(|g| g.members.len() >= 2)
        .map(|g| RihfStats {
            word: g.word.clone(),
            member_count: g.members.len(),
            row_coordinate_count: g.row_coordinate_count,
            column_coordinate_count: g.column_coordinate_count,
        })
        .collect()
}

/// At most `cap` mutations per distinct phenotype, lowest address first,
/// covering every phenotype of the screen. Returned in address order.
pub fn select_rihf_sample(records: &[ScreenRecord], cap: usize) -> Vec<MutationAddress> {
    let mut by_phenotype: BTreeMap<Vec<(String, String)>, Vec<MutationAddress>> = BTreeMap::new();
    for (addr, outcome) in aggregate_outcomes(records) {
        if outcome.is_nsm {
            by_phenotype.entry(outcome.outputs).or_default().push(addr);
        }
    }
    let mut picked: Vec<MutationAddress> = by_phenotype
        .into_values()
        .flat_map(|members| members.into_iter().take(cap))
        .collect();
    picked.sort();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixId, MatrixKind};
    use crate::mutation::MutationKind;

    fn addr(layer: usize, x: usize, y: usize) -> MutationAddress {
        MutationAddress {
            matrix: MatrixId::new(layer, MatrixKind::Down),
            x,
            y,
            kind: MutationKind::Max,
        }
    }

    #[test]
    fn histogram_and_ties() {
        let h = initial_word_histogram(&["The egg", "The fly", "A worm"]).unwrap();
        assert_eq!((h.top_word.as_str(), h.top_count), ("The", 2));
        let h = initial_word_histogram(&["staring through the glass"]).unwrap();
        assert_eq!(h.top_word, "staring");
        let h = initial_word_histogram(&["The a", "A b", "The c", "A d"]).unwrap();
        assert_eq!((h.top_word.as_str(), h.top_count), ("A", 2));
        assert!(initial_word_histogram(&["", " 12 ,"]).is_err());
    }

    #[test]
    fn rarity() {
        let common: BTreeSet<String> = ["The", "It"].map(String::from).into();
        assert_eq!(classify_rihf("The", &common), Rarity::Common);
        assert_eq!(classify_rihf("staring", &common), Rarity::Rare);
        assert_eq!(classify_rihf("The", &BTreeSet::new()), Rarity::Rare);
    }

    #[test]
    fn common_words_by_share() {
        let tops = ["The", "The", "The", "It", "It", "staring"];
        let common = common_initial_words(&tops, 0.3);
        assert_eq!(common, ["It", "The"].map(String::from).into());
    }

    #[test]
    fn coordinate_counts() {
        let g = RihfGroup::new("staring".into(), vec![addr(1, 1, 5), addr(14, 9, 5), addr(30, 22, 5)]);
        let stats = rihf_coordinate_stats(&[g]);
        assert_eq!((stats[0].row_coordinate_count, stats[0].column_coordinate_count), (1, 3));
        let g = RihfGroup::new("otta".into(), vec![addr(0, 0, 2), addr(0, 0, 3)]);
        assert_eq!(g.row_coordinate_count, 2);
        let single = RihfGroup::new("x".into(), vec![addr(0, 0, 0)]);
        assert!(rihf_coordinate_stats(&[single]).is_empty());
    }
}
