//! Output-text metrics: bag-of-words cosine severity, multiple-choice
//! scoring and initial-word statistics.

mod bow;
mod choice;
mod rihf;
mod severity;

pub use bow::{cosine_similarity, tokenize_bow, BowVector, Vocabulary};
pub use choice::{extract_choice, score_multiple_choice, ChoiceScore};
pub use rihf::{
    classify_rihf, common_initial_words, group_rare_words, initial_word, initial_word_histogram,
    rihf_coordinate_stats, select_rihf_sample, InitialWordHistogram, Rarity, RihfGroup, RihfStats,
};
pub use severity::{severity_records, severity_thresholds, Metric, SeverityLayer, SeverityRecord};
