//! Heatmap rendering and CSV/JSON report bundles.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atlas::{
    bias_report, build_maps, cross_experiment_scatter, layer_counts, nsm_per_layer, overlap_score_sum, CellStatus,
    MutationMap,
};
use crate::copa::analyze_map;
use crate::error::{Error, Result};
use crate::model::MatrixId;
use crate::screen::{load_screen, write_json, ScreenResult};
use crate::text::SeverityLayer;

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub silent: Rgb,
    pub max_only: Rgb,
    pub min_only: Rgb,
    pub both: Rgb,
}

impl Default for Palette {
    fn default() -> Self {
        Self {
            silent: [255, 255, 255],
            max_only: [255, 0, 0],
            min_only: [0, 0, 255],
            both: [0, 160, 0],
        }
    }
}

impl Palette {
    pub fn color(&self, status: CellStatus) -> Rgb {
        match status {
            CellStatus::Silent => self.silent,
            CellStatus::MaxOnly => self.max_only,
            CellStatus::MinOnly => self.min_only,
            CellStatus::Both => self.both,
        }
    }
}

/// An RGB raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    /// Expands a cell grid (`cells[y][x]`) into `scale x scale` squares.
    pub fn from_cells(cells: &[Vec<Rgb>], scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::Input("scale must be at least 1".into()));
        }
        let height = cells.len() * scale;
        let width = cells.first().map_or(0, Vec::len) * scale;
        let mut pixels = Vec::with_capacity(width * height);
        for row in cells {
            for _ in 0..scale {
                for &c in row {
                    pixels.extend(std::iter::repeat_n(c, scale));
                }
            }
        }
        Ok(Self { width, height, pixels })
    }

    pub fn pixel(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    /// Binary PPM (`P6`).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ppm()).map_err(|e| Error::io(path, e))
    }
}

/// The map as it is drawn: Up and Gate maps transposed.
pub fn presentation_grid(map: &MutationMap) -> MutationMap {
    if map.matrix.kind.is_presented_transposed() {
        map.transposed()
    } else {
        map.clone()
    }
}

pub fn render_map(map: &MutationMap, palette: &Palette, scale: usize) -> Result<Image> {
    let shown = presentation_grid(map);
    let cells: Vec<Vec<Rgb>> = shown
        .grid
        .iter()
        .map(|r| r.iter().map(|&c| palette.color(c)).collect())
        .collect();
    Image::from_cells(&cells, scale)
}

pub fn render_heatmap(map: &MutationMap, palette: &Palette, scale: usize, out_path: &Path) -> Result<()> {
    render_map(map, palette, scale)?.write_ppm(out_path)
}

/// Colour of a cell by the strictest severity layer containing it: the
/// strictest layer is dark red, looser layers fade toward white.
fn severity_shade(layer: usize, layers: usize) -> Rgb {
    let step = 200 / layers.max(1);
    let v = (layer * step).min(200) as u8;
    [160u8.saturating_add(v / 2), v, v]
}

/// Renders nested severity layers of one matrix on its block grid.
pub fn render_severity(
    matrix: MatrixId,
    width: usize,
    height: usize,
    layers: &[SeverityLayer],
    scale: usize,
) -> Result<Image> {
    let mut grid = vec![vec![[255u8, 255, 255]; width]; height];
    for (i, layer) in layers.iter().enumerate().rev() {
        for m in layer.members.iter().filter(|m| m.matrix == matrix) {
            if m.x < width && m.y < height {
                grid[m.y][m.x] = severity_shade(i, layers.len());
            }
        }
    }
    if matrix.kind.is_presented_transposed() {
        grid = (0..width).map(|x| (0..height).map(|y| grid[y][x]).collect()).collect();
    }
    Image::from_cells(&grid, scale)
}

/// SVG rendering with axis labels (x along the top, y down the left).
pub fn render_svg(map: &MutationMap, palette: &Palette, cell: usize) -> String {
    let shown = presentation_grid(map);
    let margin = 24;
    let (w, h) = (shown.width * cell + margin, shown.height * cell + margin);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="monospace" font-size="8">"#
    );
    let _ = writeln!(svg, "<title>{}</title>", map.matrix);
    let label_every = (shown.width.max(shown.height) / 16).max(1);
    for x in (0..shown.width).step_by(label_every) {
        let _ = writeln!(svg, r#"<text x="{}" y="12">{x}</text>"#, margin + x * cell);
    }
    for y in (0..shown.height).step_by(label_every) {
        let _ = writeln!(svg, r#"<text x="0" y="{}">{y}</text>"#, margin + y * cell + cell.min(8));
    }
    for (y, row) in shown.grid.iter().enumerate() {
        for (x, &c) in row.iter().enumerate() {
            let [r, g, b] = palette.color(c);
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="rgb({r},{g},{b})"/>"#,
                margin + x * cell,
                margin + y * cell
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// File stem used for per-matrix outputs, e.g. `L3_Gate`.
pub fn matrix_stem(id: MatrixId) -> String {
    id.to_string()
}

/// Writes one heatmap per matrix (and an SVG when `svg` is set).
pub fn write_heatmaps(maps: &[MutationMap], palette: &Palette, scale: usize, svg: bool, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for map in maps {
        let path = dir.join(format!("{}.ppm", matrix_stem(map.matrix)));
        render_heatmap(map, palette, scale, &path)?;
        written.push(path);
        if svg {
            let path = dir.join(format!("{}.svg", matrix_stem(map.matrix)));
            fs::write(&path, render_svg(map, palette, scale.max(4))).map_err(|e| Error::io(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Zero-mutation bookkeeping for one experiment.
///
/// On full-size models zero mutations are reported to produce phenotypes
/// several orders of magnitude less often than max or min mutations. The
/// observed rates are recorded here; nothing is asserted about them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroMutationNote {
    pub zero_evaluated: usize,
    pub zero_nsm: usize,
    pub maxmin_evaluated: usize,
    pub maxmin_nsm: usize,
    pub zero_nsm_rate: Option<f64>,
    pub maxmin_nsm_rate: Option<f64>,
    /// log10(maxmin rate / zero rate), when both rates are positive.
    pub orders_of_magnitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment_id: String,
    pub matrices: usize,
    pub total_nsm: usize,
    pub silent_matrices: usize,
    pub zero_mutations: ZeroMutationNote,
}

fn rate(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

pub fn summarize(screen: &ScreenResult) -> ExperimentSummary {
    let counts = layer_counts(&screen.records);
    let sum = |f: fn(&crate::atlas::MatrixCounts) -> usize| counts.values().map(f).sum::<usize>();
    let zero_evaluated = sum(|c| c.zero_evaluated);
    let zero_nsm = sum(|c| c.zero_nsm);
    let maxmin_evaluated = sum(|c| c.max_evaluated + c.min_evaluated);
    let maxmin_nsm = sum(|c| c.nsm_count);
    let zero_nsm_rate = rate(zero_nsm, zero_evaluated);
    let maxmin_nsm_rate = rate(maxmin_nsm, maxmin_evaluated);
    let orders_of_magnitude = match (zero_nsm_rate, maxmin_nsm_rate) {
        (Some(z), Some(m)) if z > 0.0 && m > 0.0 => Some((m / z).log10()),
        _ => None,
    };
    ExperimentSummary {
        experiment_id: screen.manifest.experiment_id.clone(),
        matrices: screen.manifest.matrices.len(),
        total_nsm: maxmin_nsm,
        silent_matrices: screen
            .manifest
            .matrices
            .iter()
            .filter(|d| counts.get(&d.id).is_none_or(|c| c.nsm_count == 0))
            .count(),
        zero_mutations: ZeroMutationNote {
            zero_evaluated,
            zero_nsm,
            maxmin_evaluated,
            maxmin_nsm,
            zero_nsm_rate,
            maxmin_nsm_rate,
            orders_of_magnitude,
        },
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pooled overlap ratio between two experiments across all matrices.
pub fn experiment_overlap(a: &[MutationMap], b: &[MutationMap]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("experiments have {} vs {} matrices", a.len(), b.len())));
    }
    let (mut score, mut cells) = (0.0, 0usize);
    for (ma, mb) in a.iter().zip(b) {
        if ma.matrix != mb.matrix {
            return Err(Error::Input(format!("matrix order differs: {} vs {}", ma.matrix, mb.matrix)));
        }
        score += overlap_score_sum(ma, mb)?;
        cells += ma.width * ma.height;
    }
    Ok(if cells == 0 { 1.0 } else { score / cells as f64 })
}

/// Square overlap matrix between experiments, in input order.
pub fn overlap_matrix(maps: &[Vec<MutationMap>]) -> Result<Vec<Vec<f64>>> {
    let n = maps.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = experiment_overlap(&maps[i], &maps[j])?;
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

pub const RIHF_REPORT_FILE: &str = "rihf_report.json";

/// Writes the CSV/JSON report bundle for one or more screened experiments.
///
/// Files: `counts.csv`, `layers.csv`, `bias.csv`, `overlap.csv`,
/// `layer_scatter.csv`, `copa.csv`, `summary.json` and, for experiments
/// whose initial-word analysis has run, `rihf.csv`.
pub fn emit_reports(experiment_dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if experiment_dirs.is_empty() {
        return Err(Error::Input("no experiment directories given".into()));
    }
    let screens: Vec<ScreenResult> = experiment_dirs.iter().map(|d| load_screen(d)).collect::<Result<_>>()?;
    let mut all_maps = Vec::new();
    for s in &screens {
        let cfg = &s.manifest.config;
        all_maps.push(build_maps(&s.manifest.matrices, cfg.block_size, &s.records).map_err(|e| match e {
            Error::IncompleteScreen(m) => Error::IncompleteScreen(format!(
                "{m} (experiment `{}` needs both max and min mutation kinds)",
                s.manifest.experiment_id
            )),
            other => other,
        })?);
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, text: String| -> Result<()> {
        let path = out_dir.join(name);
        write_text(&path, &text)?;
        written.push(path);
        Ok(())
    };

    let mut counts_csv = String::from(
        "experiment_id,layer,kind,rows,cols,width,height,cells,max_nsm,min_nsm,both,max_only,min_only,nsm_count,distinct_phenotypes,zero_nsm,zero_distinct_phenotypes\n",
    );
    let mut layers_csv = String::from("experiment_id,layer,nsm_count,distinct_phenotypes,zero_nsm\n");
    let mut bias_csv = String::from(
        "experiment_id,layer,kind,max_nsm,min_nsm,max_only,min_only,total_cells,bias_score,classification\n",
    );
    let mut copa_csv = String::from("experiment_id,layer,kind,axis,reference,strength,permutation\n");
    let mut per_layer: Vec<Vec<f64>> = Vec::new();

    for (screen, maps) in screens.iter().zip(&all_maps) {
        let exp = &screen.manifest.experiment_id;
        let opts = &screen.manifest.config.analysis;
        let counts = layer_counts(&screen.records);
        let layers = screen.manifest.matrices.iter().map(|d| d.id.layer + 1).max().unwrap_or(0);
        let mut by_layer: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
        for (desc, map) in screen.manifest.matrices.iter().zip(maps) {
            let c = counts.get(&desc.id).cloned().unwrap_or_default();
            let b = bias_report(map);
            let both = map.cells().filter(|&s| s == CellStatus::Both).count();
            let _ = writeln!(
                counts_csv,
                "{exp},{},{},{},{},{},{},{},{},{},{both},{},{},{},{},{},{}",
                desc.id.layer,
                desc.id.kind,
                desc.rows,
                desc.cols,
                map.width,
                map.height,
                b.total_cells,
                b.max_nsm_count,
                b.min_nsm_count,
                b.max_only_count,
                b.min_only_count,
                c.nsm_count,
                c.distinct_phenotype_count,
                c.zero_nsm,
                c.zero_distinct_phenotype_count
            );
            let _ = writeln!(
                bias_csv,
                "{exp},{},{},{},{},{},{},{},{},{:?}",
                desc.id.layer,
                desc.id.kind,
                b.max_nsm_count,
                b.min_nsm_count,
                b.max_only_count,
                b.min_only_count,
                b.total_cells,
                opt(b.bias_score),
                b.classification
            );
            let e = by_layer.entry(desc.id.layer).or_default();
            e.0 += c.nsm_count;
            e.1 += c.distinct_phenotype_count;
            e.2 += c.zero_nsm;

            let copa = analyze_map(map, opts.copa_axis, opts.copa_both)?;
            let perm: Vec<String> = copa.view.permutation.iter().map(|p| p.to_string()).collect();
            let _ = writeln!(
                copa_csv,
                "{exp},{},{},{},{},{},{}",
                desc.id.layer,
                desc.id.kind,
                serde_json::to_value(copa.view.axis)?.as_str().unwrap_or_default(),
                copa.view.reference,
                copa.strength,
                perm.join(" ")
            );
        }
        for (layer, (nsm, phen, zero)) in &by_layer {
            let _ = writeln!(layers_csv, "{exp},{layer},{nsm},{phen},{zero}");
        }
        per_layer.push(nsm_per_layer(&counts, layers).into_iter().map(|v| v as f64).collect());
    }

    let ids: Vec<&str> = screens.iter().map(|s| s.manifest.experiment_id.as_str()).collect();
    let overlap = overlap_matrix(&all_maps)?;
    let mut overlap_csv = format!("experiment_id,{}\n", ids.join(","));
    for (id, row) in ids.iter().zip(&overlap) {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(overlap_csv, "{id},{}", cells.join(","));
    }

    let mut scatter_csv = String::from("experiment_a,experiment_b,layer,nsm_a,nsm_b,pearson\n");
    for i in 0..screens.len() {
        for j in i + 1..screens.len() {
            if per_layer[i].len() != per_layer[j].len() {
                continue;
            }
            let s = cross_experiment_scatter(&per_layer[i], &per_layer[j])?;
            for (layer, (a, b)) in s.points.iter().enumerate() {
                let _ = writeln!(scatter_csv, "{},{},{layer},{a},{b},{}", ids[i], ids[j], opt(s.pearson));
            }
        }
    }

    let mut rihf_csv = String::from("experiment_id,word,member_count,row_coordinate_count,column_coordinate_count\n");
    let mut any_rihf = false;
    for (screen, dir) in screens.iter().zip(experiment_dirs) {
        let path = dir.join(RIHF_REPORT_FILE);
        if !path.exists() {
            continue;
        }
        any_rihf = true;
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let report: crate::analysis::RihfReport = serde_json::from_str(&text)?;
        for s in &report.stats {
            let _ = writeln!(
                rihf_csv,
                "{},{},{},{},{}",
                screen.manifest.experiment_id, s.word, s.member_count, s.row_coordinate_count, s.column_coordinate_count
            );
        }
    }

    emit("counts.csv", counts_csv)?;
    emit("layers.csv", layers_csv)?;
    emit("bias.csv", bias_csv)?;
    emit("overlap.csv", overlap_csv)?;
    emit("layer_scatter.csv", scatter_csv)?;
    emit("copa.csv", copa_csv)?;
    if any_rihf {
        emit("rihf.csv", rihf_csv)?;
    }
    let summaries: Vec<ExperimentSummary> = screens.iter().map(summarize).collect();
    let path = out_dir.join("summary.json");
    write_json(&path, &summaries)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixKind;

    #[test]
    fn palette_is_distinct() {
        let p = Palette::default();
        let colors = [p.silent, p.max_only, p.min_only, p.both];
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(colors[i], colors[j]);
            }
        }
    }

    #[test]
    fn two_by_two_pixels() {
        let map = MutationMap::parse(MatrixId::new(0, MatrixKind::K), &["SM", "mB"]).unwrap();
        let img = render_map(&map, &Palette::default(), 1).unwrap();
        assert_eq!(img.pixels, vec![[255, 255, 255], [255, 0, 0], [0, 0, 255], [0, 160, 0]]);
        let big = render_map(&map, &Palette::default(), 8).unwrap();
        assert_eq!((big.width, big.height), (16, 16));
        assert_eq!(big.pixel(7, 7), [255, 255, 255]);
        assert_eq!(big.pixel(8, 0), [255, 0, 0]);
        assert_eq!(big.pixel(15, 15), [0, 160, 0]);
        assert!(render_map(&map, &Palette::default(), 0).is_err());
    }

    #[test]
    fn ppm_header() {
        let map = MutationMap::parse(MatrixId::new(0, MatrixKind::K), &["SMm"]).unwrap();
        let ppm = render_map(&map, &Palette::default(), 1).unwrap().to_ppm();
        assert!(ppm.starts_with(b"P6\n3 1\n255\n"));
        assert_eq!(ppm.len(), 11 + 9);
    }

    #[test]
    fn svg_has_labels_and_cells() {
        let map = MutationMap::parse(MatrixId::new(0, MatrixKind::K), &["SM", "mB"]).unwrap();
        let svg = render_svg(&map, &Palette::default(), 8);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("<title>L0_K</title>"));
    }
}
