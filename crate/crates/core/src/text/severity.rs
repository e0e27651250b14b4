use std::collections::BTreeSet;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bow::Vocabulary;
use super::choice::score_multiple_choice;
use super::rihf::initial_word;
use crate::error::{Error, Result};
use crate::mutation::MutationAddress;
use crate::screen::{aggregate_outcomes, ScreenResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityRecord {
    #[serde(flatten)]
    pub address: MutationAddress,
    /// Mean BoW cosine against the standard outputs, over prompts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cosine: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_score: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destructive: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_word: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Score,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "score" | "mc_score" => Ok(Metric::Score),
            _ => Err(Error::Input(format!("unknown metric `{s}`"))),
        }
    }
}

/// Mutations at or below one severity threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeverityLayer {
    pub threshold: f64,
    pub members: BTreeSet<MutationAddress>,
}

/// Scores qualify when `score <= t`, cosines when `cosine < t`. Records
/// without a value for `metric` are skipped.
pub fn severity_thresholds(records: &[SeverityRecord], metric: Metric, thresholds: &[f64]) -> Result<Vec<SeverityLayer>> {
    if thresholds.iter().any(|t| t.is_nan()) || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Input("thresholds must be sorted ascending".into()));
    }
    Ok(thresholds
        .iter()
        .map(|&t| SeverityLayer {
            threshold: t,
            members: records
                .iter()
                .filter(|r| match metric {
                    Metric::Cosine => r.cosine.is_some_and(|c| c < t),
                    Metric::Score => r.mc_score.is_some_and(|s| (s as f64) <= t),
                })
                .map(|r| r.address)
                .collect(),
        })
        .collect())
}

/// One record per NSM mutation of a screen.
///
/// The BoW vocabulary pools every distinct output of the experiment.
/// Multiple-choice fields are filled when the experiment has an answer
/// key; `initial_word` comes from the first prompt's output.
pub fn severity_records(screen: &ScreenResult) -> Result<Vec<SeverityRecord>> {
    let config = &screen.manifest.config;
    let outputs: BTreeSet<&str> = screen.records.iter().map(|r| r.output.as_str()).collect();
    let vocabulary = Vocabulary::pooled(outputs);
    let standard: Vec<_> = config
        .prompts
        .iter()
        .map(|p| {
            screen
                .manifest
                .standard_output(&p.prompt_id)
                .map(|s| vocabulary.vectorize(s))
                .ok_or_else(|| Error::IncompleteScreen(format!("no standard output for `{}`", p.prompt_id)))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (address, outcome) in aggregate_outcomes(&screen.records) {
        if !outcome.is_nsm {
            continue;
        }
        // config prompt order
        let ordered: Vec<&str> = config
            .prompts
            .iter()
            .map(|p| {
                outcome
                    .outputs
                    .iter()
                    .find(|(id, _)| *id == p.prompt_id)
                    .map(|(_, o)| o.as_str())
                    .ok_or_else(|| Error::IncompleteScreen(format!("{address} has no output for `{}`", p.prompt_id)))
            })
            .collect::<Result<_>>()?;
        let cosine = ordered
            .iter()
            .zip(&standard)
            .map(|(o, s)| vocabulary.vectorize(o).cosine(s))
            .sum::<f64>()
            / ordered.len() as f64;
        let (mc_score, destructive) = match &config.answer_key {
            Some(key) => {
                let s = score_multiple_choice(&ordered, key)?;
                (Some(s.score), Some(s.destructive))
            }
            None => (None, None),
        };
        out.push(SeverityRecord {
            address,
            cosine: Some(cosine),
            mc_score,
            destructive,
            initial_word: ordered.first().and_then(|o| initial_word(o)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MatrixId, MatrixKind};
    use crate::mutation::MutationKind;

    fn rec(x: usize, cosine: Option<f64>, score: Option<u32>) -> SeverityRecord {
        SeverityRecord {
            address: MutationAddress {
                matrix: MatrixId::new(0, MatrixKind::Q),
                x,
                y: 0,
                kind: MutationKind::Max,
            },
            cosine,
            mc_score: score,
            destructive: None,
            initial_word: None,
        }
    }

    #[test]
    fn cosine_layers_are_strict() {
        let layers = severity_thresholds(&[rec(0, Some(0.9), None), rec(1, Some(0.5), None)], Metric::Cosine, &[0.5, 0.95]).unwrap();
        assert!(layers[0].members.is_empty());
        assert_eq!(layers[1].members.len(), 2);
    }

    #[test]
    fn score_layers_are_inclusive() {
        let layers = severity_thresholds(&[rec(0, None, Some(4))], Metric::Score, &[2.0, 5.0, 8.0]).unwrap();
        let sizes: Vec<_> = layers.iter().map(|l| l.members.len()).collect();
        assert_eq!(sizes, vec![0, 1, 1]);
        let empty = severity_thresholds(&[], Metric::Score, &[2.0, 5.0, 8.0]).unwrap();
        assert!(empty.iter().all(|l| l.members.is_empty()));
    }

    #[test]
    fn unknown_metric_and_unsorted_thresholds() {
        assert!("perplexity".parse::<Metric>().is_err());
        assert_eq!("cosine".parse::<Metric>().unwrap(), Metric::Cosine);
        assert!(severity_thresholds(&[], Metric::Score, &[5.0, 2.0]).is_err());
    }

    #[test]
    fn record_wire_format() {
        let json = serde_json::to_string(&rec(3, Some(0.25), None)).unwrap();
        assert_eq!(json, r#"{"matrix":{"layer":0,"kind":"Q"},"x":3,"y":0,"kind":"max","cosine":0.25}"#);
    }
}
