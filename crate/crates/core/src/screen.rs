//! Full screens: every block of every matrix, under every configured
//! mutation kind, evaluated on every prompt.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::copa::{Axis, BothEncoding};
use crate::error::{Error, Result};
use crate::model::{AdapterBackend, Backend, GenParams, MatrixDescriptor, MatrixId, ToyModel, ToyModelConfig};
use crate::mutation::{apply_mutation, enumerate_blocks, Mutation, MutationAddress, MutationKind};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub prompt_id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSource {
    Toy(ToyModelConfig),
    WeightFile { path: PathBuf },
    /// Program and arguments of an adapter process.
    Adapter { command: Vec<String> },
}

impl ModelSource {
    /// Opens `count` independent model instances.
    pub fn open(&self, count: usize) -> Result<Vec<Box<dyn Backend>>> {
        let count = count.max(1);
        let toy = match self {
            ModelSource::Toy(cfg) => Some(ToyModel::new(cfg.clone())?),
            ModelSource::WeightFile { path } => Some(ToyModel::load(path)?),
            ModelSource::Adapter { .. } => None,
        };
        match (toy, self) {
            (Some(model), _) => Ok((0..count)
                .map(|_| Box::new(model.clone()) as Box<dyn Backend>)
                .collect()),
            (None, ModelSource::Adapter { command }) => (0..count)
                .map(|_| AdapterBackend::spawn(command).map(|b| Box::new(b) as Box<dyn Backend>))
                .collect(),
            (None, _) => unreachable!(),
        }
    }
}

/// Thresholds and switches for the analysis stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisOptions {
    pub cosine_thresholds: Vec<f64>,
    pub score_thresholds: Vec<f64>,
    /// Multiple-choice scores below this count as underperforming.
    pub underperform_below: u32,
    /// Minimum share of evaluated models whose top initial word is `w`
    /// for `w` to count as a common initial word.
    pub common_word_share: f64,
    pub rihf_cap: usize,
    pub copa_axis: Axis,
    pub copa_both: BothEncoding,
    pub top_k: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            cosine_thresholds: vec![0.1, 0.2, 0.5, 0.7],
            score_thresholds: vec![2.0, 5.0, 8.0],
            underperform_below: 10,
            common_word_share: 0.1,
            rihf_cap: 3,
            copa_axis: Axis::Columns,
            copa_both: BothEncoding::Zero,
            top_k: 3,
        }
    }
}

fn default_block_size() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub model: ModelSource,
    pub prompts: Vec<Prompt>,
    #[serde(default = "default_block_size")]
    pub block_size: usize,
    pub mutation_kinds: Vec<MutationKind>,
    #[serde(default)]
    pub gen: GenParams,
    /// One letter per prompt, in prompt order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_key: Option<Vec<char>>,
    /// Inputs for the initial-word analysis.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rihf_prompts: Vec<Prompt>,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Reads a JSON config, or TOML when the extension is `.toml`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompts.is_empty() {
            return Err(Error::Config("no prompts".into()));
        }
        let mut seen = BTreeSet::new();
        for p in self.prompts.iter().chain(&self.rihf_prompts) {
            if !seen.insert(p.prompt_id.as_str()) {
                return Err(Error::Config(format!("duplicate prompt_id `{}`", p.prompt_id)));
            }
        }
        if self.mutation_kinds.is_empty() {
            return Err(Error::Config("mutation_kinds is empty".into()));
        }
        if self.block_size == 0 {
            return Err(Error::Config("block_size must be positive".into()));
        }
        if let Some(key) = &self.answer_key {
            if key.len() != self.prompts.len() {
                return Err(Error::Config(format!(
                    "answer_key has {} entries for {} prompts",
                    key.len(),
                    self.prompts.len()
                )));
            }
        }
        self.gen.validate()
    }

    fn sorted_kinds(&self) -> Vec<MutationKind> {
        self.mutation_kinds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
    }
}

/// `mutation_kind` of a record; `None` marks the standard model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    None,
    Max,
    Min,
    Zero,
}

impl RecordKind {
    pub fn mutation(self) -> Option<MutationKind> {
        match self {
            RecordKind::None => None,
            RecordKind::Max => Some(MutationKind::Max),
            RecordKind::Min => Some(MutationKind::Min),
            RecordKind::Zero => Some(MutationKind::Zero),
        }
    }
}

impl From<MutationKind> for RecordKind {
    fn from(k: MutationKind) -> Self {
        match k {
            MutationKind::Max => RecordKind::Max,
            MutationKind::Min => RecordKind::Min,
            MutationKind::Zero => RecordKind::Zero,
        }
    }
}

/// One generation under one mutation (or none) for one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenRecord {
    pub experiment_id: String,
    pub matrix: Option<MatrixId>,
    pub x: Option<usize>,
    pub y: Option<usize>,
    pub block_size: usize,
    pub mutation_kind: RecordKind,
    pub prompt_id: String,
    pub output: String,
    pub is_nsm: bool,
}

impl ScreenRecord {
    pub fn address(&self) -> Option<MutationAddress> {
        Some(MutationAddress {
            matrix: self.matrix?,
            x: self.x?,
            y: self.y?,
            kind: self.mutation_kind.mutation()?,
        })
    }

    fn sort_key(&self) -> (Option<MatrixId>, Option<usize>, Option<usize>, RecordKind, &str) {
        (self.matrix, self.y, self.x, self.mutation_kind, &self.prompt_id)
    }
}

/// A phenotype: any output differing byte-wise from the standard output.
pub fn classify_phenotype(output: &str, standard: &str) -> bool {
    output != standard
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardOutput {
    pub prompt_id: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenotypeEntry {
    pub phenotype_id: usize,
    pub prompt_id: String,
    pub output: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment_id: String,
    pub config: ExperimentConfig,
    pub model_fingerprint: Option<String>,
    pub matrices: Vec<MatrixDescriptor>,
    pub standard_outputs: Vec<StandardOutput>,
    pub phenotypes: Vec<PhenotypeEntry>,
    pub record_count: usize,
}

impl Manifest {
    pub fn standard_output(&self, prompt_id: &str) -> Option<&str> {
        self.standard_outputs
            .iter()
            .find(|s| s.prompt_id == prompt_id)
            .map(|s| s.output.as_str())
    }
}

/// Records (sorted) plus manifest of one screen.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenResult {
    pub records: Vec<ScreenRecord>,
    pub manifest: Manifest,
}

/// Expected record count: every block under every kind on every prompt,
/// plus one standard record per prompt.
pub fn expected_record_count(matrices: &[MatrixDescriptor], block_size: usize, kinds: usize, prompts: usize) -> usize {
    let blocks: usize = matrices.iter().map(|d| enumerate_blocks(d, block_size).len()).sum();
    blocks * kinds * prompts + prompts
}

type WorkerOutcome<B, R> = (B, Vec<(usize, R)>, Option<Error>);

/// Evaluates `items` on a pool of model instances, one thread per
/// instance, pulling work from a shared counter. Results come back in item
/// order together with the instances.
pub fn run_work_queue<B, T, R, F>(backends: Vec<B>, items: &[T], eval: F) -> (Vec<B>, Result<Vec<R>>)
where
    B: Backend,
    T: Sync,
    R: Send,
    F: Fn(&mut B, &T) -> Result<R> + Sync,
{
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let outcomes: Vec<WorkerOutcome<B, R>> = thread::scope(|scope| {
        let handles: Vec<_> = backends
            .into_iter()
            .map(|mut backend| {
                let (next, failed, eval) = (&next, &failed, &eval);
                scope.spawn(move || {
                    let mut done = Vec::new();
                    while !failed.load(Ordering::Relaxed) {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        match eval(&mut backend, item) {
                            Ok(r) => done.push((i, r)),
                            Err(e) => {
                                failed.store(true, Ordering::Relaxed);
                                return (backend, done, Some(e));
                            }
                        }
                    }
                    (backend, done, None)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("work queue thread panicked")).collect()
    });

    let mut backends = Vec::with_capacity(outcomes.len());
    let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None).take(items.len()).collect();
    let mut first_error = None;
    for (backend, done, err) in outcomes {
        backends.push(backend);
        for (i, r) in done {
            slots[i] = Some(r);
        }
        if first_error.is_none() {
            first_error = err;
        }
    }
    let results = match first_error {
        Some(e) => Err(e),
        None => slots
            .into_iter()
            .map(|s| s.ok_or_else(|| Error::State("work item left unevaluated".into())))
            .collect(),
    };
    (backends, results)
}

/// Generates every prompt under one mutation, restoring the weights after.
pub fn evaluate_mutation<B: Backend + ?Sized>(
    backend: &mut B,
    mutation: &Mutation,
    prompts: &[Prompt],
    gen: &GenParams,
) -> Result<Vec<String>> {
    let mut guard = apply_mutation(backend, mutation)?;
    let outputs = prompts
        .iter()
        .map(|p| guard.backend().generate(&p.text, gen))
        .collect::<Result<Vec<_>>>()?;
    guard.release()?;
    Ok(outputs)
}

/// Runs a screen on caller-provided model instances, one worker per
/// instance, and hands the instances back afterwards.
///
/// The result depends only on the configuration and the weights, never on
/// the number of instances.
pub fn run_screen_with_backends<B: Backend>(config: &ExperimentConfig, mut backends: Vec<B>) -> Result<(ScreenResult, Vec<B>)> {
    config.validate()?;
    if backends.is_empty() {
        return Err(Error::Config("at least one model instance is required".into()));
    }
    let lead = &mut backends[0];
    let matrices = lead.list_matrices()?;
    let fingerprint = lead.fingerprint();
    let standard: Vec<String> = config
        .prompts
        .iter()
        .map(|p| lead.generate(&p.text, &config.gen))
        .collect::<Result<_>>()?;

    let kinds = config.sorted_kinds();
    let work: Vec<Mutation> = matrices
        .iter()
        .flat_map(|d| enumerate_blocks(d, config.block_size))
        .flat_map(|block| kinds.iter().map(move |&kind| Mutation { block, kind }))
        .collect();

    let (backends, results) = run_work_queue(backends, &work, |backend, mutation| {
        evaluate_mutation(backend, mutation, &config.prompts, &config.gen)
    });
    let results = results?;

    if let Some(expected) = &fingerprint {
        for b in &backends {
            if b.fingerprint().as_ref() != Some(expected) {
                return Err(Error::State("model weights differ from the pre-screen snapshot".into()));
            }
        }
    }

    let mut records = Vec::with_capacity(work.len() * config.prompts.len() + config.prompts.len());
    for (p, out) in config.prompts.iter().zip(&standard) {
        records.push(ScreenRecord {
            experiment_id: config.experiment_id.clone(),
            matrix: None,
            x: None,
            y: None,
            block_size: config.block_size,
            mutation_kind: RecordKind::None,
            prompt_id: p.prompt_id.clone(),
            output: out.clone(),
            is_nsm: false,
        });
    }
    for (mutation, outputs) in work.iter().zip(results) {
        let (x, y) = mutation.block.map_coords();
        for ((p, out), std_out) in config.prompts.iter().zip(outputs).zip(&standard) {
            records.push(ScreenRecord {
                experiment_id: config.experiment_id.clone(),
                matrix: Some(mutation.block.matrix),
                x: Some(x),
                y: Some(y),
                block_size: config.block_size,
                mutation_kind: mutation.kind.into(),
                prompt_id: p.prompt_id.clone(),
                is_nsm: classify_phenotype(&out, std_out),
                output: out,
            });
        }
    }
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));

    let manifest = Manifest {
        experiment_id: config.experiment_id.clone(),
        config: config.clone(),
        model_fingerprint: fingerprint,
        matrices,
        standard_outputs: config
            .prompts
            .iter()
            .zip(standard)
            .map(|(p, output)| StandardOutput {
                prompt_id: p.prompt_id.clone(),
                output,
            })
            .collect(),
        phenotypes: phenotype_table(&records),
        record_count: records.len(),
    };
    Ok((ScreenResult { records, manifest }, backends))
}

/// Distinct NSM outputs per prompt, numbered from 1 in record order.
pub fn phenotype_table(records: &[ScreenRecord]) -> Vec<PhenotypeEntry> {
    let mut index: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut table: Vec<PhenotypeEntry> = Vec::new();
    for r in records.iter().filter(|r| r.is_nsm) {
        match index.get(&(r.prompt_id.as_str(), r.output.as_str())) {
            Some(&i) => table[i].count += 1,
            None => {
                index.insert((&r.prompt_id, &r.output), table.len());
                table.push(PhenotypeEntry {
                    phenotype_id: table.len() + 1,
                    prompt_id: r.prompt_id.clone(),
                    output: r.output.clone(),
                    count: 1,
                });
            }
        }
    }
    table
}

/// Opens the configured model with `workers` instances, runs the screen
/// and writes `records.jsonl` and `manifest.json` into `output_dir`.
pub fn run_screen(config: &ExperimentConfig, workers: usize) -> Result<ScreenResult> {
    config.validate()?;
    let backends = config.model.open(workers)?;
    let (result, _) = run_screen_with_backends(config, backends)?;
    write_screen(&config.output_dir, &result)?;
    Ok(result)
}

pub fn write_records(path: &Path, records: &[ScreenRecord]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_screen(dir: &Path, result: &ScreenResult) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_records(&dir.join(RECORDS_FILE), &result.records)?;
    write_json(&dir.join(MANIFEST_FILE), &result.manifest)
}

/// Loads a screen previously written by [`write_screen`].
pub fn load_screen(dir: &Path) -> Result<ScreenResult> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let records_path = dir.join(RECORDS_FILE);
    for p in [&manifest_path, &records_path] {
        if !p.exists() {
            return Err(Error::MissingStage {
                stage: "screen",
                detail: format!("{} not found; run `mutascreen screen` first", p.display()),
            });
        }
    }
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let file = fs::File::open(&records_path).map_err(|e| Error::io(&records_path, e))?;
    let mut records = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(&records_path, e))?;
        if !line.is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok(ScreenResult { records, manifest })
}

/// Per-prompt outputs of one mutation, aggregated across prompts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutationOutcome {
    /// NSM on at least one prompt.
    pub is_nsm: bool,
    /// `(prompt_id, output)` in prompt_id order.
    pub outputs: Vec<(String, String)>,
}

/// Groups mutated records by address, applying the any-prompt NSM rule.
pub fn aggregate_outcomes(records: &[ScreenRecord]) -> BTreeMap<MutationAddress, MutationOutcome> {
    let mut out: BTreeMap<MutationAddress, MutationOutcome> = BTreeMap::new();
    for r in records {
        let Some(addr) = r.address() else { continue };
        let entry = out.entry(addr).or_insert_with(|| MutationOutcome {
            is_nsm: false,
            outputs: Vec::new(),
        });
        entry.is_nsm |= r.is_nsm;
        entry.outputs.push((r.prompt_id.clone(), r.output.clone()));
    }
    for o in out.values_mut() {
        o.outputs.sort();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixKind;

    #[test]
    fn phenotype_classification() {
        assert!(!classify_phenotype("abc", "abc"));
        assert!(classify_phenotype("abd", "abc"));
        let s = "standard";
        assert!(!classify_phenotype(s, s));
    }

    #[test]
    fn record_wire_format() {
        let r = ScreenRecord {
            experiment_id: "e".into(),
            matrix: Some(MatrixId::new(0, MatrixKind::Up)),
            x: Some(1),
            y: Some(2),
            block_size: 4,
            mutation_kind: RecordKind::Max,
            prompt_id: "p".into(),
            output: "out".into(),
            is_nsm: true,
        };
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"experiment_id":"e","matrix":{"layer":0,"kind":"Up"},"x":1,"y":2,"block_size":4,"mutation_kind":"max","prompt_id":"p","output":"out","is_nsm":true}"#
        );
    }

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            experiment_id: "t".into(),
            model: ModelSource::Toy(ToyModelConfig {
                layers: 1,
                d_model: 8,
                d_hidden: 8,
                ..Default::default()
            }),
            prompts: vec![Prompt {
                prompt_id: "p0".into(),
                text: "Hello".into(),
            }],
            block_size: 4,
            mutation_kinds: vec![MutationKind::Min, MutationKind::Max],
            gen: GenParams {
                max_length: 8,
                ..Default::default()
            },
            answer_key: None,
            rihf_prompts: vec![],
            analysis: AnalysisOptions::default(),
            output_dir: "unused".into(),
        }
    }

    #[test]
    fn config_validation() {
        let mut c = config();
        assert!(c.validate().is_ok());
        c.mutation_kinds.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = config();
        c.prompts.push(c.prompts[0].clone());
        assert!(c.validate().is_err());
        let mut c = config();
        c.answer_key = Some(vec!['A', 'B']);
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_and_json_configs_agree() {
        let dir = tempfile::tempdir().unwrap();
        let c = config();
        let json = dir.path().join("c.json");
        let tml = dir.path().join("c.toml");
        fs::write(&json, serde_json::to_string(&c).unwrap()).unwrap();
        fs::write(&tml, toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(ExperimentConfig::load(&json).unwrap(), c);
        assert_eq!(ExperimentConfig::load(&tml).unwrap(), c);
    }

    #[test]
    fn small_screen_counts_and_standard_records() {
        let c = config();
        let backends = c.model.open(2).unwrap();
        let (result, _) = run_screen_with_backends(&c, backends).unwrap();
        // 4 square 8x8 matrices -> 4 blocks; Up/Gate/Down 8x8 -> 4 blocks
        assert_eq!(result.records.len(), 7 * 4 * 2 + 1);
        assert_eq!(
            result.records.len(),
            expected_record_count(&result.manifest.matrices, 4, 2, 1)
        );
        let std_records: Vec<_> = result.records.iter().filter(|r| r.mutation_kind == RecordKind::None).collect();
        assert_eq!(std_records.len(), 1);
        assert!(!std_records[0].is_nsm);
        assert_eq!(result.records[0].mutation_kind, RecordKind::None);
        let standard = result.manifest.standard_output("p0").unwrap();
        for r in &result.records {
            assert_eq!(r.is_nsm, r.output != standard);
        }
    }

    #[test]
    fn missing_screen_is_reported_by_stage() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_screen(dir.path()).unwrap_err();
        assert!(matches!(err, Error::MissingStage { stage: "screen", .. }));
    }

    #[test]
    fn any_prompt_aggregation() {
        let mk = |prompt: &str, nsm: bool| ScreenRecord {
            experiment_id: "e".into(),
            matrix: Some(MatrixId::new(0, MatrixKind::K)),
            x: Some(0),
            y: Some(0),
            block_size: 4,
            mutation_kind: RecordKind::Min,
            prompt_id: prompt.into(),
            output: format!("{prompt}{nsm}"),
            is_nsm: nsm,
        };
        let agg = aggregate_outcomes(&[mk("b", false), mk("a", true)]);
        let o = agg.values().next().unwrap();
        assert!(o.is_nsm);
        assert_eq!(o.outputs[0].0, "a");
        let agg = aggregate_outcomes(&[mk("b", false), mk("a", false)]);
        assert!(!agg.values().next().unwrap().is_nsm);
    }
}
