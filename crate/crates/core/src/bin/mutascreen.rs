use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mutascreen::analysis;
use mutascreen::model::{serve_adapter, Backend};
use mutascreen::report::emit_reports;
use mutascreen::screen::run_screen;
use mutascreen::{Error, ExperimentConfig, ModelSource, Result, ToyModel, ToyModelConfig};

#[derive(Parser)]
#[command(name = "mutascreen", version, about = "Block mutagenesis screens of transformer weight matrices")]
struct Cli {
    /// Experiment or toy-model config (JSON, or TOML by extension)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output path (directory, or weight file for `model init`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads, one model instance each
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Replaces the generation seed (or the init seed for `model init`)
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create, inspect or serve toy models
    Model {
        #[command(subcommand)]
        action: ModelAction,
    },
    /// Run a full screen
    Screen,
    /// Analyze screened experiments
    Analyze {
        #[command(subcommand)]
        stage: AnalyzeStage,
    },
    /// Render heatmaps and report bundles
    Render {
        #[command(subcommand)]
        target: RenderTarget,
    },
}

#[derive(Args)]
struct WeightsArg {
    /// Weight file (otherwise the toy model from --config, or defaults)
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ModelAction {
    Init,
    Inspect(WeightsArg),
    /// Serve the adapter protocol on stdin/stdout
    Serve(WeightsArg),
}

#[derive(Args)]
struct ExpArgs {
    /// Experiment directory (repeat for multi-experiment stages)
    #[arg(long = "exp", required = true)]
    exps: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeStage {
    Map(ExpArgs),
    Overlap(ExpArgs),
    Bias(ExpArgs),
    Copa(ExpArgs),
    Severity(ExpArgs),
    Rihf(ExpArgs),
}

#[derive(Subcommand)]
enum RenderTarget {
    Heatmap {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, default_value_t = 8)]
        scale: usize,
        #[arg(long)]
        svg: bool,
    },
    Report(ExpArgs),
}

fn toy_config(path: Option<&Path>, seed: Option<u64>) -> Result<ToyModelConfig> {
    let mut cfg = match path {
        None => ToyModelConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            let toml = p.extension().is_some_and(|e| e == "toml");
            let parsed: std::result::Result<ExperimentConfig, String> = if toml {
                toml::from_str(&text).map_err(|e| e.to_string())
            } else {
                serde_json::from_str(&text).map_err(|e| e.to_string())
            };
            match parsed {
                Ok(ExperimentConfig {
                    model: ModelSource::Toy(cfg),
                    ..
                }) => cfg,
                Ok(_) => return Err(Error::Config("experiment config does not describe a toy model".into())),
                Err(_) if toml => toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
                Err(_) => serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?,
            }
        }
    };
    if let Some(seed) = seed {
        cfg.init_seed = seed;
    }
    Ok(cfg)
}

fn load_model(cli: &Cli, weights: &WeightsArg) -> Result<ToyModel> {
    match &weights.weights {
        Some(p) => ToyModel::load(p),
        None => ToyModel::new(toy_config(cli.config.as_deref(), cli.seed_override)?),
    }
}

fn workers(cli: &Cli) -> usize {
    cli.workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Model { action } => match action {
            ModelAction::Init => {
                let out = cli.out.as_ref().ok_or_else(|| Error::Config("--out <weights file> is required".into()))?;
                let model = ToyModel::new(toy_config(cli.config.as_deref(), cli.seed_override)?)?;
                model.save(out)?;
                println!("{}", json!({"weights": out, "fingerprint": model.weights_digest()}));
            }
            ModelAction::Inspect(w) => {
                let mut model = load_model(cli, w)?;
                let mut matrices = Vec::new();
                for d in model.list_matrices()? {
                    let s = model.matrix_stats(d.id)?;
                    matrices.push(json!({"matrix": d.id.to_string(), "rows": d.rows, "cols": d.cols, "min": s.min, "max": s.max}));
                }
                let report = json!({
                    "config": model.config(),
                    "fingerprint": model.weights_digest(),
                    "matrices": matrices,
                });
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            ModelAction::Serve(w) => {
                let mut model = load_model(cli, w)?;
                serve_adapter(&mut model, BufReader::new(io::stdin().lock()), io::stdout().lock())?;
            }
        },
        Command::Screen => {
            let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
            let mut config = ExperimentConfig::load(path)?;
            if let Some(out) = &cli.out {
                config.output_dir = out.clone();
            }
            if let Some(seed) = cli.seed_override {
                config.gen.seed = seed;
            }
            let result = run_screen(&config, workers(cli))?;
            println!(
                "{}",
                json!({
                    "experiment_id": result.manifest.experiment_id,
                    "records": result.records.len(),
                    "phenotypes": result.manifest.phenotypes.len(),
                    "output_dir": config.output_dir,
                })
            );
        }
        Command::Analyze { stage } => {
            let exps = match stage {
                AnalyzeStage::Map(a)
                | AnalyzeStage::Overlap(a)
                | AnalyzeStage::Bias(a)
                | AnalyzeStage::Copa(a)
                | AnalyzeStage::Severity(a)
                | AnalyzeStage::Rihf(a) => &a.exps,
            };
            let out_for = |exp: &PathBuf| cli.out.clone().unwrap_or_else(|| exp.clone());
            match stage {
                AnalyzeStage::Overlap(_) => {
                    let report = analysis::analyze_overlap(exps, &out_for(&exps[0]))?;
                    println!("{}", serde_json::to_string(&report)?);
                }
                _ => {
                    for exp in exps {
                        let out = out_for(exp);
                        let line = match stage {
                            AnalyzeStage::Map(_) => json!({"maps": analysis::analyze_maps(exp, &out)?.len()}),
                            AnalyzeStage::Bias(_) => json!({"bias": analysis::analyze_bias(exp, &out)?.len()}),
                            AnalyzeStage::Copa(_) => json!({"copa": analysis::analyze_copa(exp, &out)?.len()}),
                            AnalyzeStage::Severity(_) => {
                                let (records, summary) = analysis::analyze_severity(exp, &out)?;
                                json!({"severity": records.len(), "destructive": summary.destructive, "underperforming": summary.underperforming})
                            }
                            AnalyzeStage::Rihf(_) => {
                                let r = analysis::analyze_rihf(exp, &out, workers(cli))?;
                                json!({"rihf_groups": r.groups.len(), "common_words": r.common_words})
                            }
                            AnalyzeStage::Overlap(_) => unreachable!(),
                        };
                        println!("{line}");
                    }
                }
            }
        }
        Command::Render { target } => match target {
            RenderTarget::Heatmap { exp, scale, svg } => {
                for e in &exp.exps {
                    let out = cli.out.clone().unwrap_or_else(|| e.join("heatmaps"));
                    print_paths(&analysis::render_experiment(e, &out, *scale, *svg)?);
                }
            }
            RenderTarget::Report(exp) => {
                let out = cli.out.clone().unwrap_or_else(|| exp.exps[0].join("report"));
                print_paths(&emit_reports(&exp.exps, &out)?);
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error {}", json!({"kind": e.kind(), "message": e.to_string()}));
            ExitCode::FAILURE
        }
    }
}
