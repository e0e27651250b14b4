//! Bag-of-words cosine severity and multiple-choice scoring.

mod shared;

use mutascreen::text::{
    cosine_similarity, score_multiple_choice, severity_records, severity_thresholds, tokenize_bow, Metric, Vocabulary,
};

fn main() -> mutascreen::Result<()> {
    println!("{:?}", tokenize_bow("The (egg) hatches in 24 hours. Then, a larva!"));
    let vocab = Vocabulary::pooled(["a b a", "a b"]);
    println!("cos(\"a b a\", \"a b\") = {:.6}", cosine_similarity("a b a", "a b", &vocab));

    let key = ['B', 'D', 'A'];
    let answers = ["Answer: B", "I think D.", "The larva eats"];
    let s = score_multiple_choice(&answers, &key)?;
    println!("letters {:?}  score {}  destructive {}", s.letters, s.score, s.destructive);

    // a small multiple-choice screen
    let mut cfg = shared::config("mc", 0);
    cfg.prompts = (0..5)
        .map(|i| shared::prompt(&format!("q{i}"), &format!("Q{i}. Which stage follows the egg? A) larva B) pupa C) adult D) egg. Answer:")))
        .collect();
    cfg.answer_key = Some(vec!['A'; 5]);
    cfg.gen.max_length = 12;
    let screen = shared::run_config(&cfg)?;
    let records = severity_records(&screen)?;
    for (metric, thresholds) in [(Metric::Cosine, vec![0.1, 0.2, 0.5, 0.7]), (Metric::Score, vec![2.0, 5.0, 8.0])] {
        for layer in severity_thresholds(&records, metric, &thresholds)? {
            println!("{metric:?} threshold {}: {} mutations", layer.threshold, layer.members.len());
        }
    }
    let destructive = records.iter().filter(|r| r.destructive == Some(true)).count();
    println!("{} NSMs, {destructive} destructive", records.len());
    Ok(())
}
