//! Reorder a mutation map around its best-correlated column so paired
//! max/min columns sit side by side.

mod shared;

use mutascreen::analysis::screen_maps;
use mutascreen::copa::{analyze_map, Axis, BothEncoding};

fn main() -> mutascreen::Result<()> {
    let screen = shared::screen("copa", 0)?;
    let mut summaries = Vec::new();
    for map in screen_maps(&screen)? {
        let s = analyze_map(&map, Axis::Columns, BothEncoding::Zero)?;
        summaries.push((s.strength, map, s));
    }
    summaries.sort_by(|a, b| b.0.total_cmp(&a.0));

    for (strength, map, s) in summaries.iter().take(3) {
        println!("{}  reference column {}  strength {strength:.3}", map.matrix, s.view.reference);
        let r: Vec<String> = s.view.permutation.iter().map(|&i| format!("{:+.2}", s.view.correlations[i])).collect();
        println!("  r in new order: {}", r.join(" "));
        println!("  before:");
        for row in &map.grid {
            println!("    {}", row.iter().map(|c| c.code()).collect::<String>());
        }
        println!("  after:");
        for row in &s.view.permute_map(map)?.grid {
            println!("    {}", row.iter().map(|c| c.code()).collect::<String>());
        }
    }
    Ok(())
}
