#![allow(dead_code)]

use std::path::PathBuf;

use mutascreen::screen::AnalysisOptions;
use mutascreen::{ExperimentConfig, GenParams, ModelSource, MutationKind, Prompt, ToyModelConfig};

pub fn prompt(id: &str, text: &str) -> Prompt {
    Prompt {
        prompt_id: id.into(),
        text: text.into(),
    }
}

/// 2 layers, d_model 16, d_hidden 32, block 4, all three kinds, one prompt.
pub fn toy_experiment(id: &str, output_dir: PathBuf) -> ExperimentConfig {
    ExperimentConfig {
        experiment_id: id.into(),
        model: ModelSource::Toy(ToyModelConfig::default()),
        prompts: vec![prompt("p0", "The egg hatches into a")],
        block_size: 4,
        mutation_kinds: vec![MutationKind::Max, MutationKind::Min, MutationKind::Zero],
        gen: GenParams {
            temperature: 0.7,
            max_length: 24,
            seed: 0,
        },
        answer_key: None,
        rihf_prompts: Vec::new(),
        analysis: AnalysisOptions::default(),
        output_dir,
    }
}
