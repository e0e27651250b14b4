//! Run a full screen from a config file (TOML or JSON).
//!
//! cargo run --example screen_toy -- examples/configs/toy_screen.toml [workers]

use mutascreen::atlas::layer_counts;
use mutascreen::screen::run_screen;
use mutascreen::ExperimentConfig;

fn main() -> mutascreen::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/toy_screen.toml").into());
    let workers = args.next().and_then(|w| w.parse().ok()).unwrap_or(4);
    let config = ExperimentConfig::load(&path)?;

    let t = std::time::Instant::now();
    let result = run_screen(&config, workers)?;
    println!(
        "{} records, {} phenotypes in {:.2?} -> {}",
        result.records.len(),
        result.manifest.phenotypes.len(),
        t.elapsed(),
        config.output_dir.display()
    );
    for (id, c) in layer_counts(&result.records) {
        println!(
            "{:<8} nsm {:>3} (max {:>3}, min {:>3})  phenotypes {:>3}  zero nsm {:>3}/{}",
            id.to_string(),
            c.nsm_count,
            c.max_nsm,
            c.min_nsm,
            c.distinct_phenotype_count,
            c.zero_nsm,
            c.zero_evaluated
        );
    }
    Ok(())
}
