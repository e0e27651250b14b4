use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

static STANDALONE_CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b[ABCD]\b").expect("valid regex"));

/// First standalone `A`-`D` letter of an answer.
pub fn extract_choice(text: &str) -> Option<char> {
    STANDALONE_CHOICE
        .find(text)
        .and_then(|m| m.as_str().chars().next())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceScore {
    pub score: u32,
    /// Some answer has no extractable letter.
    pub destructive: bool,
    pub letters: Vec<Option<char>>,
}

impl ChoiceScore {
    pub fn underperforming(&self, below: u32) -> bool {
        self.score < below
    }
}

/// Scores one answer per key entry.
pub fn score_multiple_choice<S: AsRef<str>>(outputs: &[S], answer_key: &[char]) -> Result<ChoiceScore> {
    if outputs.len() != answer_key.len() {
        return Err(Error::Input(format!(
            "{} outputs for {} answer-key entries",
            outputs.len(),
            answer_key.len()
        )));
    }
    let letters: Vec<Option<char>> = outputs.iter().map(|o| extract_choice(o.as_ref())).collect();
    let score = letters
        .iter()
        .zip(answer_key)
        .filter(|(l, k)| **l == Some(**k))
        .count() as u32;
    Ok(ChoiceScore {
        score,
        destructive: letters.iter().any(Option::is_none),
        letters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extraction() {
        assert_eq!(extract_choice("Answer: B"), Some('B'));
        assert_eq!(extract_choice("(C) because"), Some('C'));
        assert_eq!(extract_choice("A."), Some('A'));
        assert_eq!(extract_choice("And Because"), None);
        assert_eq!(extract_choice("E or F"), None);
        assert_eq!(extract_choice("Done: D then A"), Some('D'));
    }

    #[test]
    fn scoring() {
        let key = ['A', 'B', 'C'];
        let s = score_multiple_choice(&["A", "B", "C"], &key).unwrap();
        assert_eq!((s.score, s.destructive), (3, false));
        let s = score_multiple_choice(&["A", "nothing", "D"], &key).unwrap();
        assert_eq!((s.score, s.destructive), (1, true));
        assert_eq!(s.letters, vec![Some('A'), None, Some('D')]);
        assert!(s.underperforming(2));
        assert!(score_multiple_choice(&["A"], &key).is_err());
    }
}
