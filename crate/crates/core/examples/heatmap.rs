//! Render mutation maps as PPM heatmaps (and SVG with axis labels).
//!
//! cargo run --example heatmap -- [out_dir]

mod shared;

use mutascreen::analysis::screen_maps;
use mutascreen::report::{write_heatmaps, Palette};

fn main() -> mutascreen::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("mutascreen-heatmaps"));
    let screen = shared::screen("heatmap", 0)?;
    let maps = screen_maps(&screen)?;
    for p in write_heatmaps(&maps, &Palette::default(), 16, true, &out)? {
        println!("{}", p.display());
    }
    Ok(())
}
