use std::collections::{BTreeMap, BTreeSet};

const SEPARATORS: [char; 6] = ['.', ',', '?', '!', '\n', ' '];
const BRACKETS: [char; 6] = ['(', ')', '[', ']', '{', '}'];

/// Splits on `. , ? !`, newline and space; strips bracket characters from
/// each token and drops tokens that are empty or made only of digits.
/// Case is preserved.
pub fn tokenize_bow(text: &str) -> Vec<String> {
    text.split(SEPARATORS)
        .map(|t| t.chars().filter(|c| !BRACKETS.contains(c)).collect::<String>())
        .filter(|t| !t.is_empty() && !t.chars().all(|c| c.is_ascii_digit()))
        .collect()
}

/// Sorted token vocabulary pooled over a set of texts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

/// Token counts over a [`Vocabulary`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BowVector {
    pub counts: Vec<u32>,
}

impl Vocabulary {
    pub fn pooled<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<String> = texts.into_iter().flat_map(tokenize_bow).collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens missing from the vocabulary are ignored.
    pub fn vectorize(&self, text: &str) -> BowVector {
        let mut counts = vec![0u32; self.tokens.len()];
        for tok in tokenize_bow(text) {
            if let Some(&i) = self.index.get(&tok) {
                counts[i] += 1;
            }
        }
        BowVector { counts }
    }
}

impl BowVector {
    /// Cosine of two count vectors; 0 when either is all-zero.
    pub fn cosine(&self, other: &BowVector) -> f64 {
        let (mut dot, mut na, mut nb) = (0u64, 0u64, 0u64);
        for (&a, &b) in self.counts.iter().zip(&other.counts) {
            let (a, b) = (a as u64, b as u64);
            dot += a * b;
            na += a * a;
            nb += b * b;
        }
        if na == 0 || nb == 0 {
            return 0.0;
        }
        (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).clamp(0.0, 1.0)
    }
}

pub fn cosine_similarity(a: &str, b: &str, vocabulary: &Vocabulary) -> f64 {
    vocabulary.vectorize(a).cosine(&vocabulary.vectorize(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize_bow("eggs hatch in 24 hours"), ["eggs", "hatch", "in", "hours"]);
        assert_eq!(tokenize_bow("(egg) larva"), ["egg", "larva"]);
        assert!(tokenize_bow("").is_empty());
        assert_eq!(tokenize_bow("Egg, larva.\nPupa?adult!"), ["Egg", "larva", "Pupa", "adult"]);
        assert_eq!(tokenize_bow("[12] 3rd"), ["3rd"]);
    }

    #[test]
    fn cosine_examples() {
        let texts = ["a b a", "a b", "c d"];
        let v = Vocabulary::pooled(texts);
        assert_eq!(cosine_similarity("a b a", "a b a", &v), 1.0);
        assert_eq!(cosine_similarity("a b", "c d", &v), 0.0);
        let c = cosine_similarity("a b a", "a b", &v);
        assert!((c - 3.0 / 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(cosine_similarity("", "a", &v), 0.0);
    }

    proptest! {
        #[test]
        fn cosine_bounds(a in "[a-c ,.0-9()]{0,30}", b in "[a-c ,.0-9()]{0,30}") {
            let v = Vocabulary::pooled([a.as_str(), b.as_str()]);
            let ab = cosine_similarity(&a, &b, &v);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, cosine_similarity(&b, &a, &v));
            if !tokenize_bow(&a).is_empty() {
                prop_assert!((cosine_similarity(&a, &a, &v) - 1.0).abs() < 1e-12);
            }
            for t in tokenize_bow(&a) {
                prop_assert!(!t.is_empty() && !t.chars().all(|c| c.is_ascii_digit()));
            }
        }
    }
}
