//! Mutation maps and the statistics computed over them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{MatrixDescriptor, MatrixId};
use crate::mutation::{grid_dims, MutationAddress, MutationKind};
use crate::screen::{aggregate_outcomes, MutationOutcome, ScreenRecord};
use crate::stats::pearson;

/// Status of one block under its max and min mutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellStatus {
    Silent,
    MaxOnly,
    MinOnly,
    Both,
}

impl CellStatus {
    pub fn from_flags(max_nsm: bool, min_nsm: bool) -> Self {
        match (max_nsm, min_nsm) {
            (true, true) => CellStatus::Both,
            (true, false) => CellStatus::MaxOnly,
            (false, true) => CellStatus::MinOnly,
            (false, false) => CellStatus::Silent,
        }
    }

    /// One-letter code used in `maps.json`.
    pub fn code(self) -> char {
        match self {
            CellStatus::Silent => 'S',
            CellStatus::MaxOnly => 'M',
            CellStatus::MinOnly => 'm',
            CellStatus::Both => 'B',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Some(match c {
            'S' => CellStatus::Silent,
            'M' => CellStatus::MaxOnly,
            'm' => CellStatus::MinOnly,
            'B' => CellStatus::Both,
            _ => return None,
        })
    }

    pub fn max_nsm(self) -> bool {
        matches!(self, CellStatus::MaxOnly | CellStatus::Both)
    }

    pub fn min_nsm(self) -> bool {
        matches!(self, CellStatus::MinOnly | CellStatus::Both)
    }
}

/// Block grid of one matrix; `grid[y][x]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationMap {
    pub matrix: MatrixId,
    pub width: usize,
    pub height: usize,
    #[serde(serialize_with = "grid_to_rows", deserialize_with = "grid_from_rows")]
    pub grid: Vec<Vec<CellStatus>>,
}

fn grid_to_rows<S: Serializer>(grid: &[Vec<CellStatus>], s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<String> = grid.iter().map(|row| row.iter().map(|c| c.code()).collect()).collect();
    rows.serialize(s)
}

fn grid_from_rows<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<CellStatus>>, D::Error> {
    let rows = Vec::<String>::deserialize(d)?;
    rows.iter()
        .map(|row| {
            row.chars()
                .map(|c| CellStatus::from_code(c).ok_or_else(|| D::Error::custom(format!("bad cell code {c:?}"))))
                .collect()
        })
        .collect()
}

impl MutationMap {
    pub fn from_grid(matrix: MatrixId, grid: Vec<Vec<CellStatus>>) -> Result<Self> {
        let height = grid.len();
        let width = grid.first().map_or(0, Vec::len);
        if grid.iter().any(|r| r.len() != width) {
            return Err(Error::Input("ragged status grid".into()));
        }
        Ok(Self {
            matrix,
            width,
            height,
            grid,
        })
    }

    /// Parses rows of `S`/`M`/`m`/`B` codes.
    pub fn parse(matrix: MatrixId, rows: &[&str]) -> Result<Self> {
        let grid = rows
            .iter()
            .map(|r| {
                r.chars()
                    .map(|c| CellStatus::from_code(c).ok_or_else(|| Error::Input(format!("bad cell code {c:?}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_grid(matrix, grid)
    }

    pub fn get(&self, x: usize, y: usize) -> CellStatus {
        self.grid[y][x]
    }

    pub fn cells(&self) -> impl Iterator<Item = CellStatus> + '_ {
        self.grid.iter().flatten().copied()
    }

    pub fn transposed(&self) -> Self {
        let grid = (0..self.width).map(|x| (0..self.height).map(|y| self.grid[y][x]).collect()).collect();
        Self {
            matrix: self.matrix,
            width: self.height,
            height: self.width,
            grid,
        }
    }
}

impl fmt::Display for MutationMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in &self.grid {
            let line: String = row.iter().map(|c| c.code()).collect();
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

fn map_from_outcomes(
    desc: &MatrixDescriptor,
    block_size: usize,
    outcomes: &BTreeMap<MutationAddress, MutationOutcome>,
) -> Result<MutationMap> {
    let (width, height) = grid_dims(desc, block_size);
    let mut grid = vec![vec![CellStatus::Silent; width]; height];
    for (y, row) in grid.iter_mut().enumerate() {
        for (x, cell) in row.iter_mut().enumerate() {
            let flag = |kind| {
                outcomes
                    .get(&MutationAddress {
                        matrix: desc.id,
                        x,
                        y,
                        kind,
                    })
                    .map(|o| o.is_nsm)
                    .ok_or_else(|| {
                        Error::IncompleteScreen(format!("{} cell ({x}, {y}) has no {kind} record", desc.id))
                    })
            };
            *cell = CellStatus::from_flags(flag(MutationKind::Max)?, flag(MutationKind::Min)?);
        }
    }
    MutationMap::from_grid(desc.id, grid)
}

/// Map of one matrix from its max and min records. A cell's mutation is
/// an NSM when it is an NSM for any prompt.
pub fn build_mutation_map(desc: &MatrixDescriptor, block_size: usize, records: &[ScreenRecord]) -> Result<MutationMap> {
    let own: Vec<ScreenRecord> = records.iter().filter(|r| r.matrix == Some(desc.id)).cloned().collect();
    map_from_outcomes(desc, block_size, &aggregate_outcomes(&own))
}

/// Maps for every matrix, in descriptor order.
pub fn build_maps(matrices: &[MatrixDescriptor], block_size: usize, records: &[ScreenRecord]) -> Result<Vec<MutationMap>> {
    let outcomes = aggregate_outcomes(records);
    matrices.iter().map(|d| map_from_outcomes(d, block_size, &outcomes)).collect()
}

/// Agreement of two cell statuses: 1 when identical, 0.5 between Both and
/// a single-kind NSM, 0 otherwise.
pub fn cell_overlap(a: CellStatus, b: CellStatus) -> f64 {
    use CellStatus::*;
    match (a, b) {
        _ if a == b => 1.0,
        (Both, MaxOnly | MinOnly) | (MaxOnly | MinOnly, Both) => 0.5,
        _ => 0.0,
    }
}

/// Sum of per-cell overlap scores; divide by the cell count for the ratio.
pub fn overlap_score_sum(a: &MutationMap, b: &MutationMap) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(Error::Input(format!(
            "map dimensions differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(a.cells().zip(b.cells()).map(|(x, y)| cell_overlap(x, y)).sum())
}

pub fn overlap_ratio(a: &MutationMap, b: &MutationMap) -> Result<f64> {
    let sum = overlap_score_sum(a, b)?;
    let cells = a.width * a.height;
    Ok(if cells == 0 { 1.0 } else { sum / cells as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasClass {
    MaxBiased,
    MinBiased,
    Unbiased,
    InsufficientCoverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    /// Cells whose max mutation is an NSM (MaxOnly + Both).
    pub max_nsm_count: usize,
    /// Cells whose min mutation is an NSM (MinOnly + Both).
    pub min_nsm_count: usize,
    pub max_only_count: usize,
    pub min_only_count: usize,
    pub total_cells: usize,
    /// `None` when both only-counts are zero.
    pub bias_score: Option<f64>,
    pub classification: BiasClass,
}

impl BiasReport {
    /// Bias score `|max_nsm - min_nsm| / max(max_only, min_only)`.
    ///
    /// A matrix is biased toward one kind when that kind has more NSMs, the
    /// score exceeds 0.2, and the only-counts together exceed 10% of the
    /// cells. Thresholds are compared in integer arithmetic.
    pub fn from_counts(max_nsm: usize, min_nsm: usize, max_only: usize, min_only: usize, total_cells: usize) -> Self {
        let denom = max_only.max(min_only);
        let diff = max_nsm.abs_diff(min_nsm);
        let (bias_score, classification) = if denom == 0 {
            (None, BiasClass::InsufficientCoverage)
        } else {
            // score > 1/5  <=>  5 * diff > denom
            let strong = 5 * diff > denom;
            // only-counts > total / 10  <=>  10 * only > total
            let covered = 10 * (max_only + min_only) > total_cells;
            let class = match max_nsm.cmp(&min_nsm) {
                std::cmp::Ordering::Greater if strong && covered => BiasClass::MaxBiased,
                std::cmp::Ordering::Less if strong && covered => BiasClass::MinBiased,
                _ => BiasClass::Unbiased,
            };
            (Some(diff as f64 / denom as f64), class)
        };
        Self {
            max_nsm_count: max_nsm,
            min_nsm_count: min_nsm,
            max_only_count: max_only,
            min_only_count: min_only,
            total_cells,
            bias_score,
            classification,
        }
    }
}

pub fn bias_report(map: &MutationMap) -> BiasReport {
    let (mut max_nsm, mut min_nsm, mut max_only, mut min_only) = (0, 0, 0, 0);
    for c in map.cells() {
        max_nsm += c.max_nsm() as usize;
        min_nsm += c.min_nsm() as usize;
        max_only += (c == CellStatus::MaxOnly) as usize;
        min_only += (c == CellStatus::MinOnly) as usize;
    }
    BiasReport::from_counts(max_nsm, min_nsm, max_only, min_only, map.width * map.height)
}

/// NSM and phenotype counts for one matrix.
///
/// `nsm_count` and `distinct_phenotype_count` cover max and min mutations;
/// zero mutations are tallied separately.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatrixCounts {
    pub nsm_count: usize,
    pub distinct_phenotype_count: usize,
    pub max_nsm: usize,
    pub min_nsm: usize,
    pub zero_nsm: usize,
    pub zero_distinct_phenotype_count: usize,
    pub max_evaluated: usize,
    pub min_evaluated: usize,
    pub zero_evaluated: usize,
}

/// Per-prompt `(prompt_id, output)` pairs of one mutant.
type Phenotype = Vec<(String, String)>;

/// A mutation's phenotype is its tuple of per-prompt outputs; with a
/// single prompt this is plain string equality.
pub fn layer_counts(records: &[ScreenRecord]) -> BTreeMap<MatrixId, MatrixCounts> {
    let mut counts: BTreeMap<MatrixId, MatrixCounts> = BTreeMap::new();
    let mut phenotypes: BTreeMap<(MatrixId, bool), BTreeSet<Phenotype>> = BTreeMap::new();
    for (addr, outcome) in aggregate_outcomes(records) {
        let c = counts.entry(addr.matrix).or_default();
        let is_zero = addr.kind == MutationKind::Zero;
        match addr.kind {
            MutationKind::Max => c.max_evaluated += 1,
            MutationKind::Min => c.min_evaluated += 1,
            MutationKind::Zero => c.zero_evaluated += 1,
        }
        if !outcome.is_nsm {
            continue;
        }
        match addr.kind {
            MutationKind::Max => c.max_nsm += 1,
            MutationKind::Min => c.min_nsm += 1,
            MutationKind::Zero => c.zero_nsm += 1,
        }
        phenotypes.entry((addr.matrix, is_zero)).or_default().insert(outcome.outputs);
    }
    for (id, c) in counts.iter_mut() {
        c.nsm_count = c.max_nsm + c.min_nsm;
        c.distinct_phenotype_count = phenotypes.get(&(*id, false)).map_or(0, BTreeSet::len);
        c.zero_distinct_phenotype_count = phenotypes.get(&(*id, true)).map_or(0, BTreeSet::len);
    }
    counts
}

/// Sums `MatrixCounts::nsm_count` per layer, for layers `0..layers`.
pub fn nsm_per_layer(counts: &BTreeMap<MatrixId, MatrixCounts>, layers: usize) -> Vec<usize> {
    let mut out = vec![0; layers];
    for (id, c) in counts {
        if id.layer < layers {
            out[id.layer] += c.nsm_count;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisProfile {
    /// Non-silent cells per row (`y`).
    pub row_counts: Vec<usize>,
    /// Non-silent cells per column (`x`).
    pub col_counts: Vec<usize>,
    pub top_rows: Vec<usize>,
    pub top_cols: Vec<usize>,
}

fn top_indices(counts: &[usize], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    idx.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

pub fn axis_profiles(map: &MutationMap, top_k: usize) -> AxisProfile {
    let mut row_counts = vec![0; map.height];
    let mut col_counts = vec![0; map.width];
    for (y, row) in map.grid.iter().enumerate() {
        for (x, &c) in row.iter().enumerate() {
            if c != CellStatus::Silent {
                row_counts[y] += 1;
                col_counts[x] += 1;
            }
        }
    }
    AxisProfile {
        top_rows: top_indices(&row_counts, top_k),
        top_cols: top_indices(&col_counts, top_k),
        row_counts,
        col_counts,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scatter {
    pub points: Vec<(f64, f64)>,
    /// `None` when either series has zero variance.
    pub pearson: Option<f64>,
}

/// Pairs two per-layer series and correlates them.
pub fn cross_experiment_scatter(a: &[f64], b: &[f64]) -> Result<Scatter> {
    if a.len() != b.len() {
        return Err(Error::Input(format!("series lengths differ: {} vs {}", a.len(), b.len())));
    }
    Ok(Scatter {
        points: a.iter().copied().zip(b.iter().copied()).collect(),
        pearson: pearson(a, b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixKind;
    use crate::screen::RecordKind;
    use proptest::prelude::*;
    use CellStatus::*;

    fn id() -> MatrixId {
        MatrixId::new(0, MatrixKind::K)
    }

    #[test]
    fn status_from_flags() {
        assert_eq!(CellStatus::from_flags(true, false), MaxOnly);
        assert_eq!(CellStatus::from_flags(true, true), Both);
        assert_eq!(CellStatus::from_flags(false, false), Silent);
        assert_eq!(CellStatus::from_flags(false, true), MinOnly);
    }

    #[test]
    fn overlap_hand_scored() {
        let a = MutationMap::parse(id(), &["BS", "Mm"]).unwrap();
        let b = MutationMap::parse(id(), &["MS", "MB"]).unwrap();
        // 0.5 + 1 + 1 + 0.5: MinOnly against Both also scores a half
        assert_eq!(overlap_ratio(&a, &b).unwrap(), 0.75);
        let c = MutationMap::parse(id(), &["MS", "MM"]).unwrap();
        assert_eq!(overlap_ratio(&a, &c).unwrap(), 0.625);
        assert_eq!(overlap_ratio(&a, &a).unwrap(), 1.0);
        assert_eq!(cell_overlap(Both, MaxOnly), 0.5);
        assert_eq!(cell_overlap(MinOnly, Both), 0.5);
        assert_eq!(cell_overlap(MaxOnly, MinOnly), 0.0);
        assert_eq!(cell_overlap(Silent, Both), 0.0);
        let wide = MutationMap::parse(id(), &["BSS"]).unwrap();
        assert!(matches!(overlap_ratio(&a, &wide), Err(Error::Input(_))));
    }

    #[test]
    fn bias_examples() {
        let r = BiasReport::from_counts(120, 80, 100, 60, 1000);
        assert_eq!(r.bias_score, Some(0.4));
        assert_eq!(r.classification, BiasClass::MaxBiased);
        let r = BiasReport::from_counts(50, 50, 20, 20, 100);
        assert_eq!(r.bias_score, Some(0.0));
        assert_eq!(r.classification, BiasClass::Unbiased);
        // only-counts are 5% of cells
        let r = BiasReport::from_counts(40, 38, 4, 2, 120);
        assert_eq!(r.bias_score, Some(0.5));
        assert_eq!(r.classification, BiasClass::Unbiased);
        let r = BiasReport::from_counts(10, 10, 0, 0, 100);
        assert_eq!(r.classification, BiasClass::InsufficientCoverage);
        assert_eq!(r.bias_score, None);
    }

    #[test]
    fn bias_thresholds_are_strict() {
        // score exactly 0.2 does not qualify, just above does
        assert_eq!(BiasReport::from_counts(120, 100, 100, 80, 100).classification, BiasClass::Unbiased);
        assert_eq!(BiasReport::from_counts(121, 100, 101, 80, 100).classification, BiasClass::MaxBiased);
        // coverage exactly 10% does not qualify
        assert_eq!(BiasReport::from_counts(10, 0, 10, 0, 100).classification, BiasClass::Unbiased);
        assert_eq!(BiasReport::from_counts(10, 0, 10, 0, 99).classification, BiasClass::MaxBiased);
        assert_eq!(BiasReport::from_counts(0, 10, 0, 10, 99).classification, BiasClass::MinBiased);
    }

    fn record(x: usize, kind: RecordKind, output: &str, nsm: bool) -> ScreenRecord {
        ScreenRecord {
            experiment_id: "e".into(),
            matrix: Some(id()),
            x: Some(x),
            y: Some(0),
            block_size: 4,
            mutation_kind: kind,
            prompt_id: "p".into(),
            output: output.into(),
            is_nsm: nsm,
        }
    }

    #[test]
    fn map_from_records() {
        let desc = MatrixDescriptor {
            id: id(),
            rows: 4,
            cols: 12,
        };
        let records = vec![
            record(0, RecordKind::Max, "a", true),
            record(0, RecordKind::Min, "s", false),
            record(1, RecordKind::Max, "b", true),
            record(1, RecordKind::Min, "c", true),
            record(2, RecordKind::Max, "s", false),
            record(2, RecordKind::Min, "s", false),
        ];
        let map = build_mutation_map(&desc, 4, &records).unwrap();
        assert_eq!(map.grid, vec![vec![MaxOnly, Both, Silent]]);
        let err = build_mutation_map(&desc, 4, &records[..5]).unwrap_err();
        assert!(matches!(err, Error::IncompleteScreen(_)));
    }

    #[test]
    fn counts_and_phenotypes() {
        let records = vec![
            record(0, RecordKind::Max, "same", true),
            record(1, RecordKind::Max, "same", true),
            record(2, RecordKind::Min, "s", false),
            record(3, RecordKind::Zero, "z", true),
        ];
        let c = &layer_counts(&records)[&id()];
        assert_eq!((c.nsm_count, c.distinct_phenotype_count), (2, 1));
        assert_eq!((c.zero_nsm, c.zero_evaluated), (1, 1));
        let records = vec![
            record(0, RecordKind::Max, "a", true),
            record(1, RecordKind::Max, "b", true),
            record(2, RecordKind::Min, "c", true),
        ];
        let c = &layer_counts(&records)[&id()];
        assert_eq!((c.nsm_count, c.distinct_phenotype_count), (3, 3));
        let silent = vec![record(0, RecordKind::Max, "s", false)];
        let c = &layer_counts(&silent)[&id()];
        assert_eq!((c.nsm_count, c.distinct_phenotype_count), (0, 0));
    }

    #[test]
    fn column_profile() {
        let rows = ["SSSB", "SSSM", "SSSm"];
        let map = MutationMap::parse(id(), &rows).unwrap();
        let p = axis_profiles(&map, 2);
        assert_eq!(p.col_counts, vec![0, 0, 0, 3]);
        assert_eq!(p.row_counts, vec![1, 1, 1]);
        assert_eq!(p.top_cols, vec![3]);
        assert_eq!(p.top_rows, vec![0, 1]);
        let silent = MutationMap::parse(id(), &["SS", "SS"]).unwrap();
        let p = axis_profiles(&silent, 3);
        assert!(p.row_counts.iter().chain(&p.col_counts).all(|&c| c == 0));
        assert!(p.top_cols.is_empty());
    }

    #[test]
    fn scatter_correlation() {
        let s = cross_experiment_scatter(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.pearson, Some(1.0));
        let s = cross_experiment_scatter(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap();
        assert_eq!(s.pearson, Some(-1.0));
        let s = cross_experiment_scatter(&[1.0, 2.0, 3.0], &[2.0, 4.0, 7.0]).unwrap();
        assert!((s.pearson.unwrap() - 0.9934).abs() < 5e-5);
        assert!(cross_experiment_scatter(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn maps_json_rows() {
        let map = MutationMap::parse(id(), &["SM", "mB"]).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        assert_eq!(
            json,
            r#"{"matrix":{"layer":0,"kind":"K"},"width":2,"height":2,"grid":["SM","mB"]}"#
        );
        assert_eq!(serde_json::from_str::<MutationMap>(&json).unwrap(), map);
    }

    fn arb_map() -> impl Strategy<Value = MutationMap> {
        (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::collection::vec(0u8..4, w), h).prop_map(|g| {
                let grid = g
                    .into_iter()
                    .map(|r| r.into_iter().map(|v| [Silent, MaxOnly, MinOnly, Both][v as usize]).collect())
                    .collect();
                MutationMap::from_grid(MatrixId::new(0, MatrixKind::V), grid).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn overlap_symmetric_and_identity(a in arb_map(), seed in any::<u64>()) {
            let mut rng = crate::model::SplitMix64::new(seed);
            let grid = a.grid.iter().map(|r| r.iter().map(|_| [Silent, MaxOnly, MinOnly, Both][(rng.next_u64() % 4) as usize]).collect()).collect();
            let b = MutationMap::from_grid(a.matrix, grid).unwrap();
            prop_assert_eq!(overlap_ratio(&a, &b).unwrap(), overlap_ratio(&b, &a).unwrap());
            prop_assert_eq!(overlap_ratio(&a, &a).unwrap(), 1.0);
            prop_assert_eq!(overlap_ratio(&a, &b).unwrap() == 1.0, a == b);
        }

        #[test]
        fn bias_counts_consistent(m in arb_map()) {
            let r = bias_report(&m);
            let both = m.cells().filter(|&c| c == Both).count();
            prop_assert_eq!(r.max_nsm_count + r.min_nsm_count, r.max_only_count + r.min_only_count + 2 * both);
            prop_assert_eq!(bias_report(&m.transposed()), r);
        }
    }
}
