#![allow(dead_code)]

use mutascreen::screen::{run_screen_with_backends, AnalysisOptions};
use mutascreen::{ExperimentConfig, GenParams, ModelSource, MutationKind, Prompt, ScreenResult, ToyModel, ToyModelConfig};

pub fn prompt(id: &str, text: &str) -> Prompt {
    Prompt {
        prompt_id: id.into(),
        text: text.into(),
    }
}

pub fn config(id: &str, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment_id: id.into(),
        model: ModelSource::Toy(ToyModelConfig::default()),
        prompts: vec![prompt("story", "Write a short story about a fly.")],
        block_size: 4,
        mutation_kinds: vec![MutationKind::Max, MutationKind::Min],
        gen: GenParams {
            temperature: 0.7,
            max_length: 32,
            seed,
        },
        answer_key: None,
        rihf_prompts: Vec::new(),
        analysis: AnalysisOptions::default(),
        output_dir: std::env::temp_dir().join("mutascreen-examples").join(id),
    }
}

/// Screens in memory with four workers.
pub fn screen(id: &str, seed: u64) -> mutascreen::Result<ScreenResult> {
    run_config(&config(id, seed))
}

pub fn run_config(cfg: &ExperimentConfig) -> mutascreen::Result<ScreenResult> {
    let model = ToyModel::new(ToyModelConfig::default())?;
    let (result, _) = run_screen_with_backends(cfg, vec![model; 4])?;
    Ok(result)
}
