//! Initial-word analysis: regenerate writing prompts under a capped sample
//! of NSMs and group mutants whose dominant first word is rare.

mod shared;

use mutascreen::analysis::run_rihf;
use mutascreen::{ToyModel, ToyModelConfig};

fn main() -> mutascreen::Result<()> {
    let mut cfg = shared::config("rihf", 0);
    cfg.rihf_prompts = ["a fly", "an egg", "a larva", "a pupa"]
        .iter()
        .enumerate()
        .map(|(i, t)| shared::prompt(&format!("w{i}"), &format!("Write a story about {t}.")))
        .collect();
    let screen = shared::run_config(&cfg)?;
    let model = ToyModel::new(ToyModelConfig::default())?;
    let report = run_rihf(&screen, vec![model; 4])?;

    println!(
        "standard top word {:?} ({} of {})",
        report.standard.top_word, report.standard.top_count, report.prompt_count
    );
    println!("common words {:?}", report.common_words);
    println!("{} mutants sampled", report.observations.len());
    for s in &report.stats {
        println!(
            "{:<12} members {:>2}  rows {:>2}  cols {:>2}",
            s.word, s.member_count, s.row_coordinate_count, s.column_coordinate_count
        );
    }
    Ok(())
}
