use std::collections::HashMap;

use crate::error::{Error, Result};

/// Character-level tokenizer over a fixed character set.
///
/// Characters outside the set encode to the fallback token, which is `?`
/// when present in the set and token 0 otherwise.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    chars: Vec<char>,
    index: HashMap<char, u32>,
    fallback: u32,
}

impl Tokenizer {
    pub fn new(charset: &str) -> Result<Self> {
        let mut chars = Vec::new();
        let mut index = HashMap::new();
        for c in charset.chars() {
            if index.contains_key(&c) {
                return Err(Error::Config(format!("duplicate vocabulary character {c:?}")));
            }
            index.insert(c, chars.len() as u32);
            chars.push(c);
        }
        if chars.is_empty() {
            return Err(Error::Config("vocabulary is empty".into()));
        }
        let fallback = index.get(&'?').copied().unwrap_or(0);
        Ok(Self {
            chars,
            index,
            fallback,
        })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn fallback(&self) -> u32 {
        self.fallback
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        text.chars()
            .map(|c| self.index.get(&c).copied().unwrap_or(self.fallback))
            .collect()
    }

    pub fn decode(&self, tokens: &[u32]) -> String {
        tokens.iter().map(|&t| self.chars[t as usize]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_chars_fall_back() {
        let tok = Tokenizer::new("ab?").unwrap();
        assert_eq!(tok.encode("aéb"), vec![0, 2, 1]);
        assert_eq!(tok.decode(&[1, 0]), "ba");
    }

    #[test]
    fn rejects_duplicates() {
        assert!(Tokenizer::new("aa").is_err());
        assert!(Tokenizer::new("").is_err());
    }
}
