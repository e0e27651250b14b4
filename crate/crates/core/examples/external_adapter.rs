//! The adapter protocol: one JSON request per line in, one response per
//! line out. Any model that speaks it can be screened via
//! `model = { adapter = { command = [...] } }`; `mutascreen model serve`
//! exposes the toy model this way.

use std::io::Cursor;

use mutascreen::model::serve_adapter;
use mutascreen::{ToyModel, ToyModelConfig};

fn main() -> mutascreen::Result<()> {
    let requests = [
        r#"{"verb":"list_matrices"}"#,
        r#"{"verb":"matrix_stats","matrix":{"layer":0,"kind":"Q"}}"#,
        r#"{"verb":"generate","prompt":"Hello","params":{"temperature":0.0,"max_length":12,"seed":0}}"#,
        r#"{"verb":"apply_mutation","mutation":{"block":{"matrix":{"layer":0,"kind":"Q"},"bx":0,"by":0,"block_size":4,"extent":{"row_start":0,"row_count":4,"col_start":0,"col_count":4}},"kind":"zero"}}"#,
        r#"{"verb":"generate","prompt":"Hello","params":{"temperature":0.0,"max_length":12,"seed":0}}"#,
        r#"{"verb":"clear_mutation"}"#,
        r#"{"verb":"no_such_verb"}"#,
    ]
    .join("\n");
    let mut model = ToyModel::new(ToyModelConfig::default())?;
    let mut responses = Vec::new();
    serve_adapter(&mut model, Cursor::new(requests), &mut responses)?;
    for line in String::from_utf8_lossy(&responses).lines() {
        let shown: String = line.chars().take(160).collect();
        println!("{shown}");
    }
    Ok(())
}
