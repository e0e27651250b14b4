//! Mutation maps, bias, axis profiles and cross-experiment overlap for two
//! screens that differ only in the generation seed.

mod shared;

use mutascreen::analysis::screen_maps;
use mutascreen::atlas::{axis_profiles, bias_report, cross_experiment_scatter, layer_counts, nsm_per_layer};
use mutascreen::report::experiment_overlap;

fn main() -> mutascreen::Result<()> {
    let a = shared::screen("seed0", 0)?;
    let b = shared::screen("seed10", 10)?;
    let (maps_a, maps_b) = (screen_maps(&a)?, screen_maps(&b)?);

    for m in &maps_a {
        let bias = bias_report(m);
        let prof = axis_profiles(m, 3);
        println!("{}  {:?} score {:?}", m.matrix, bias.classification, bias.bias_score);
        print!("{m}");
        println!("  top rows {:?} top cols {:?}", prof.top_rows, prof.top_cols);
    }

    println!("overlap seed0 vs seed10: {:.4}", experiment_overlap(&maps_a, &maps_b)?);
    let per_layer = |s: &mutascreen::ScreenResult| -> Vec<f64> {
        nsm_per_layer(&layer_counts(&s.records), 2).into_iter().map(|v| v as f64).collect()
    };
    let scatter = cross_experiment_scatter(&per_layer(&a), &per_layer(&b))?;
    println!("NSMs per layer {:?}, pearson {:?}", scatter.points, scatter.pearson);
    Ok(())
}
