//! Analysis stages run over a screened experiment directory. Each stage
//! reads `records.jsonl` and `manifest.json` and writes its own outputs
//! next to them (or into a caller-chosen directory).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::atlas::{axis_profiles, bias_report, build_maps, AxisProfile, BiasReport, MutationMap};
use crate::copa::{analyze_map, CopaSummary};
use crate::error::{Error, Result};
use crate::model::{Backend, MatrixId};
use crate::mutation::{block_for, Mutation, MutationAddress};
use crate::report::{matrix_stem, overlap_matrix, render_severity, write_heatmaps, Palette, RIHF_REPORT_FILE};
use crate::screen::{evaluate_mutation, load_screen, run_work_queue, write_json, ScreenResult};
use crate::text::{
    common_initial_words, group_rare_words, initial_word_histogram, rihf_coordinate_stats, select_rihf_sample,
    severity_records, severity_thresholds, InitialWordHistogram, Metric, RihfGroup, RihfStats, SeverityLayer,
    SeverityRecord,
};

pub const MAPS_FILE: &str = "maps.json";
pub const PROFILES_FILE: &str = "profiles.json";
pub const BIAS_FILE: &str = "bias.json";
pub const OVERLAP_FILE: &str = "overlap.json";
pub const COPA_DIR: &str = "copa";
pub const SEVERITY_FILE: &str = "severity.jsonl";
pub const SEVERITY_LAYERS_FILE: &str = "severity_layers.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn screen_maps(screen: &ScreenResult) -> Result<Vec<MutationMap>> {
    build_maps(&screen.manifest.matrices, screen.manifest.config.block_size, &screen.records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixProfile {
    pub matrix: MatrixId,
    #[serde(flatten)]
    pub profile: AxisProfile,
}

/// Writes `maps.json` and `profiles.json`.
pub fn analyze_maps(exp_dir: &Path, out_dir: &Path) -> Result<Vec<MutationMap>> {
    let screen = load_screen(exp_dir)?;
    let maps = screen_maps(&screen)?;
    let top_k = screen.manifest.config.analysis.top_k;
    let profiles: Vec<MatrixProfile> = maps
        .iter()
        .map(|m| MatrixProfile {
            matrix: m.matrix,
            profile: axis_profiles(m, top_k),
        })
        .collect();
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(MAPS_FILE), &maps)?;
    write_json(&out_dir.join(PROFILES_FILE), &profiles)?;
    Ok(maps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixBias {
    pub matrix: MatrixId,
    #[serde(flatten)]
    pub report: BiasReport,
}

pub fn analyze_bias(exp_dir: &Path, out_dir: &Path) -> Result<Vec<MatrixBias>> {
    let screen = load_screen(exp_dir)?;
    let out: Vec<MatrixBias> = screen_maps(&screen)?
        .iter()
        .map(|m| MatrixBias {
            matrix: m.matrix,
            report: bias_report(m),
        })
        .collect();
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(BIAS_FILE), &out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub experiments: Vec<String>,
    pub ratios: Vec<Vec<f64>>,
}

pub fn analyze_overlap(exp_dirs: &[PathBuf], out_dir: &Path) -> Result<OverlapReport> {
    let screens: Vec<ScreenResult> = exp_dirs.iter().map(|d| load_screen(d)).collect::<Result<_>>()?;
    let maps: Vec<Vec<MutationMap>> = screens.iter().map(screen_maps).collect::<Result<_>>()?;
    let report = OverlapReport {
        experiments: screens.iter().map(|s| s.manifest.experiment_id.clone()).collect(),
        ratios: overlap_matrix(&maps)?,
    };
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(OVERLAP_FILE), &report)?;
    Ok(report)
}

/// Writes `copa/<matrix>.json` per matrix.
pub fn analyze_copa(exp_dir: &Path, out_dir: &Path) -> Result<Vec<CopaSummary>> {
    let screen = load_screen(exp_dir)?;
    let opts = &screen.manifest.config.analysis;
    let summaries: Vec<CopaSummary> = screen_maps(&screen)?
        .iter()
        .map(|m| analyze_map(m, opts.copa_axis, opts.copa_both))
        .collect::<Result<_>>()?;
    let dir = out_dir.join(COPA_DIR);
    ensure_dir(&dir)?;
    for s in &summaries {
        write_json(&dir.join(format!("{}.json", matrix_stem(s.matrix))), s)?;
    }
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityLayers {
    pub metric: Metric,
    pub layers: Vec<SeverityLayer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeveritySummary {
    pub nsm_mutations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destructive: Option<usize>,
    /// Non-destructive mutations scoring below the underperformance cutoff.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub underperforming: Option<usize>,
    pub layer_sets: Vec<SeverityLayers>,
}

/// Writes `severity.jsonl` and `severity_layers.json`.
pub fn analyze_severity(exp_dir: &Path, out_dir: &Path) -> Result<(Vec<SeverityRecord>, SeveritySummary)> {
    let screen = load_screen(exp_dir)?;
    let opts = &screen.manifest.config.analysis;
    let records = severity_records(&screen)?;
    let mut layer_sets = vec![SeverityLayers {
        metric: Metric::Cosine,
        layers: severity_thresholds(&records, Metric::Cosine, &opts.cosine_thresholds)?,
    }];
    let has_key = screen.manifest.config.answer_key.is_some();
    if has_key {
        layer_sets.push(SeverityLayers {
            metric: Metric::Score,
            layers: severity_thresholds(&records, Metric::Score, &opts.score_thresholds)?,
        });
    }
    let summary = SeveritySummary {
        nsm_mutations: records.len(),
        destructive: has_key.then(|| records.iter().filter(|r| r.destructive == Some(true)).count()),
        underperforming: has_key.then(|| {
            records
                .iter()
                .filter(|r| r.destructive == Some(false) && r.mc_score.is_some_and(|s| s < opts.underperform_below))
                .count()
        }),
        layer_sets,
    };

    ensure_dir(out_dir)?;
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    let path = out_dir.join(SEVERITY_FILE);
    fs::write(&path, lines).map_err(|e| Error::io(&path, e))?;
    write_json(&out_dir.join(SEVERITY_LAYERS_FILE), &summary)?;
    Ok((records, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RihfObservation {
    pub address: MutationAddress,
    /// `None` when no output of this mutant has an initial word.
    pub top_word: Option<String>,
    pub top_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RihfReport {
    pub experiment_id: String,
    pub prompt_count: usize,
    pub common_word_share: f64,
    pub standard: InitialWordHistogram,
    pub common_words: BTreeSet<String>,
    pub observations: Vec<RihfObservation>,
    pub groups: Vec<RihfGroup>,
    pub stats: Vec<RihfStats>,
}

/// Initial-word analysis: regenerates the experiment's `rihf_prompts`
/// under a capped sample of its NSMs (covering every phenotype), finds
/// each mutant's top initial word and groups the rare ones.
pub fn run_rihf<B: Backend>(screen: &ScreenResult, mut backends: Vec<B>) -> Result<RihfReport> {
    let config = &screen.manifest.config;
    if config.rihf_prompts.is_empty() {
        return Err(Error::Config(format!(
            "experiment `{}` has no rihf_prompts",
            config.experiment_id
        )));
    }
    if backends.is_empty() {
        return Err(Error::Config("at least one model instance is required".into()));
    }
    let standard_outputs: Vec<String> = config
        .rihf_prompts
        .iter()
        .map(|p| backends[0].generate(&p.text, &config.gen))
        .collect::<Result<_>>()?;
    let standard = initial_word_histogram(&standard_outputs)?;

    let sample = select_rihf_sample(&screen.records, config.analysis.rihf_cap);
    let mutations: Vec<Mutation> = sample
        .iter()
        .map(|a| {
            let desc = screen
                .manifest
                .matrices
                .iter()
                .find(|d| d.id == a.matrix)
                .ok_or_else(|| Error::Addressing(format!("{} not in manifest", a.matrix)))?;
            Ok(Mutation {
                block: block_for(desc, config.block_size, a.x, a.y)?,
                kind: a.kind,
            })
        })
        .collect::<Result<_>>()?;

    let (_, results) = run_work_queue(std::mem::take(&mut backends), &mutations, |b, m| {
        evaluate_mutation(b, m, &config.rihf_prompts, &config.gen)
    });
    let observations: Vec<RihfObservation> = sample
        .iter()
        .zip(results?)
        .map(|(address, outputs)| {
            let (top_word, top_count) = match initial_word_histogram(&outputs) {
                Ok(h) => (Some(h.top_word), h.top_count),
                Err(_) => (None, 0),
            };
            RihfObservation {
                address: *address,
                top_word,
                top_count,
            }
        })
        .collect();

    let mut top_words: Vec<&str> = vec![standard.top_word.as_str()];
    top_words.extend(observations.iter().filter_map(|o| o.top_word.as_deref()));
    let common_words = common_initial_words(&top_words, config.analysis.common_word_share);
    let tagged: Vec<(MutationAddress, String)> = observations
        .iter()
        .filter_map(|o| o.top_word.clone().map(|w| (o.address, w)))
        .collect();
    let groups = group_rare_words(&tagged, &common_words);
    let stats = rihf_coordinate_stats(&groups);
    Ok(RihfReport {
        experiment_id: config.experiment_id.clone(),
        prompt_count: config.rihf_prompts.len(),
        common_word_share: config.analysis.common_word_share,
        standard,
        common_words,
        observations,
        groups,
        stats,
    })
}

/// Runs [`run_rihf`] with `workers` fresh model instances and writes
/// `rihf_report.json`.
pub fn analyze_rihf(exp_dir: &Path, out_dir: &Path, workers: usize) -> Result<RihfReport> {
    let screen = load_screen(exp_dir)?;
    let backends = screen.manifest.config.model.open(workers)?;
    let report = run_rihf(&screen, backends)?;
    ensure_dir(out_dir)?;
    write_json(&out_dir.join(RIHF_REPORT_FILE), &report)?;
    Ok(report)
}

/// Heatmaps for every matrix under `out_dir/maps`, COPA-rearranged maps
/// under `out_dir/copa`, and severity heatmaps under `out_dir/severity`
/// when `severity.jsonl` exists in the experiment directory.
pub fn render_experiment(exp_dir: &Path, out_dir: &Path, scale: usize, svg: bool) -> Result<Vec<PathBuf>> {
    let screen = load_screen(exp_dir)?;
    let opts = &screen.manifest.config.analysis;
    let palette = Palette::default();
    let maps = screen_maps(&screen)?;
    let mut written = write_heatmaps(&maps, &palette, scale, svg, &out_dir.join("maps"))?;

    let rearranged: Vec<MutationMap> = maps
        .iter()
        .map(|m| analyze_map(m, opts.copa_axis, opts.copa_both).and_then(|s| s.view.permute_map(m)))
        .collect::<Result<_>>()?;
    written.extend(write_heatmaps(&rearranged, &palette, scale, svg, &out_dir.join("copa"))?);

    let sev_path = exp_dir.join(SEVERITY_FILE);
    if sev_path.exists() {
        let text = fs::read_to_string(&sev_path).map_err(|e| Error::io(&sev_path, e))?;
        let records: Vec<SeverityRecord> = text
            .lines()
            .filter(|l| !l.is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        let mut sets = vec![("cosine", severity_thresholds(&records, Metric::Cosine, &opts.cosine_thresholds)?)];
        if screen.manifest.config.answer_key.is_some() {
            sets.push(("score", severity_thresholds(&records, Metric::Score, &opts.score_thresholds)?));
        }
        let dir = out_dir.join("severity");
        ensure_dir(&dir)?;
        for (name, layers) in &sets {
            for m in &maps {
                let img = render_severity(m.matrix, m.width, m.height, layers, scale)?;
                let path = dir.join(format!("{}_{name}.ppm", matrix_stem(m.matrix)));
                img.write_ppm(&path)?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
