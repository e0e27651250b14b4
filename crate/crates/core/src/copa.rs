//! Correlative complementary patterns: pick the row or column that
//! correlates best with all others, then reorder the map around it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::atlas::{CellStatus, MutationMap};
use crate::error::{Error, Result};
use crate::model::MatrixId;
use crate::stats::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rows,
    Columns,
}

/// Value given to `Both` cells in the signed encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BothEncoding {
    Zero,
    Plus,
    Minus,
}

/// MaxOnly = +1, MinOnly = -1, Silent = 0; `cells[y][x]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedGrid {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Vec<i8>>,
}

impl SignedGrid {
    pub fn from_rows(cells: Vec<Vec<i8>>) -> Result<Self> {
        let height = cells.len();
        let width = cells.first().map_or(0, Vec::len);
        if cells.iter().any(|r| r.len() != width) {
            return Err(Error::Input("ragged signed grid".into()));
        }
        Ok(Self { width, height, cells })
    }

    pub fn count(&self, axis: Axis) -> usize {
        match axis {
            Axis::Rows => self.height,
            Axis::Columns => self.width,
        }
    }

    pub fn vector(&self, axis: Axis, i: usize) -> Vec<f64> {
        match axis {
            Axis::Rows => self.cells[i].iter().map(|&v| v as f64).collect(),
            Axis::Columns => self.cells.iter().map(|r| r[i] as f64).collect(),
        }
    }

    fn permuted(&self, axis: Axis, order: &[usize]) -> Self {
        let cells = match axis {
            Axis::Rows => order.iter().map(|&i| self.cells[i].clone()).collect(),
            Axis::Columns => self
                .cells
                .iter()
                .map(|r| order.iter().map(|&i| r[i]).collect())
                .collect(),
        };
        Self {
            width: self.width,
            height: self.height,
            cells,
        }
    }
}

pub fn encode_map(map: &MutationMap, both: BothEncoding) -> SignedGrid {
    let both = match both {
        BothEncoding::Zero => 0,
        BothEncoding::Plus => 1,
        BothEncoding::Minus => -1,
    };
    let cells = map
        .grid
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| match c {
                    CellStatus::Silent => 0,
                    CellStatus::MaxOnly => 1,
                    CellStatus::MinOnly => -1,
                    CellStatus::Both => both,
                })
                .collect()
        })
        .collect();
    SignedGrid {
        width: map.width,
        height: map.height,
        cells,
    }
}

/// Pearson r of every vector against `reference`; `None` where either
/// side has zero variance.
fn correlations_against(g: &SignedGrid, axis: Axis, reference: usize) -> Vec<Option<f64>> {
    let r = g.vector(axis, reference);
    (0..g.count(axis)).map(|i| pearson(&g.vector(axis, i), &r)).collect()
}

/// Index maximizing the sum of |r| against all other vectors (undefined r
/// counts as 0); lowest index on ties.
pub fn select_reference(g: &SignedGrid, axis: Axis) -> usize {
    let n = g.count(axis);
    let vectors: Vec<Vec<f64>> = (0..n).map(|i| g.vector(axis, i)).collect();
    let mut r = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = pearson(&vectors[i], &vectors[j]).unwrap_or(0.0).abs();
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    let scores: Vec<f64> = r.iter().map(|row| row.iter().sum()).collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Negative correlations ascending, then the reference, then the other
/// non-negative correlations descending. Ties keep original index order.
pub fn order_by_correlation(correlations: &[f64], reference: usize) -> Vec<usize> {
    let mut negative: Vec<usize> = (0..correlations.len())
        .filter(|&i| i != reference && correlations[i] < 0.0)
        .collect();
    let mut positive: Vec<usize> = (0..correlations.len())
        .filter(|&i| i != reference && correlations[i] >= 0.0)
        .collect();
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    negative.sort_by(|&a, &b| cmp(&correlations[a], &correlations[b]).then(a.cmp(&b)));
    positive.sort_by(|&a, &b| cmp(&correlations[b], &correlations[a]).then(a.cmp(&b)));
    let mut order = negative;
    if reference < correlations.len() {
        order.push(reference);
    }
    order.extend(positive);
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopaView {
    pub axis: Axis,
    /// Reference index before permutation.
    pub reference: usize,
    /// `permutation[k]` is the original index placed at position `k`.
    pub permutation: Vec<usize>,
    /// Per original index; undefined correlations are stored as 0.
    pub correlations: Vec<f64>,
    /// Which entries of `correlations` were defined.
    pub defined: Vec<bool>,
    pub grid: SignedGrid,
}

impl CopaView {
    /// Applies the view's permutation to a status map of the same matrix.
    pub fn permute_map(&self, map: &MutationMap) -> Result<MutationMap> {
        let n = match self.axis {
            Axis::Rows => map.height,
            Axis::Columns => map.width,
        };
        if n != self.permutation.len() {
            return Err(Error::Input("map does not match the view's dimensions".into()));
        }
        let grid = match self.axis {
            Axis::Rows => self.permutation.iter().map(|&i| map.grid[i].clone()).collect(),
            Axis::Columns => map
                .grid
                .iter()
                .map(|r| self.permutation.iter().map(|&i| r[i]).collect())
                .collect(),
        };
        MutationMap::from_grid(map.matrix, grid)
    }
}

pub fn rearrange(g: &SignedGrid, axis: Axis, reference: usize) -> Result<CopaView> {
    let n = g.count(axis);
    if reference >= n {
        return Err(Error::Input(format!("reference {reference} out of range ({n} vectors)")));
    }
    let raw = correlations_against(g, axis, reference);
    let correlations: Vec<f64> = raw.iter().map(|r| r.unwrap_or(0.0)).collect();
    let permutation = order_by_correlation(&correlations, reference);
    Ok(CopaView {
        axis,
        reference,
        grid: g.permuted(axis, &permutation),
        defined: raw.iter().map(Option::is_some).collect(),
        correlations,
        permutation,
    })
}

/// Mean |r| over non-reference vectors with a defined correlation, or 0
/// when none is defined.
pub fn copa_strength(view: &CopaView) -> f64 {
    let values: Vec<f64> = (0..view.correlations.len())
        .filter(|&i| i != view.reference && view.defined[i])
        .map(|i| view.correlations[i].abs())
        .collect();
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Reference selection, rearrangement and strength for one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopaSummary {
    pub matrix: MatrixId,
    #[serde(flatten)]
    pub view: CopaView,
    pub strength: f64,
}

pub fn analyze_map(map: &MutationMap, axis: Axis, both: BothEncoding) -> Result<CopaSummary> {
    let grid = encode_map(map, both);
    if grid.count(axis) == 0 {
        return Err(Error::Input(format!("{} has an empty map", map.matrix)));
    }
    let view = rearrange(&grid, axis, select_reference(&grid, axis))?;
    Ok(CopaSummary {
        matrix: map.matrix,
        strength: copa_strength(&view),
        view,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MatrixKind;

    #[test]
    fn encoding() {
        let map = MutationMap::parse(MatrixId::new(0, MatrixKind::K), &["SMmB"]).unwrap();
        assert_eq!(encode_map(&map, BothEncoding::Zero).cells, vec![vec![0, 1, -1, 0]]);
        assert_eq!(encode_map(&map, BothEncoding::Plus).cells[0][3], 1);
        let silent = MutationMap::parse(MatrixId::new(0, MatrixKind::K), &["SS", "SS"]).unwrap();
        assert!(encode_map(&silent, BothEncoding::Zero).cells.iter().flatten().all(|&v| v == 0));
    }

    #[test]
    fn hand_derived_order() {
        // ref, a, b, c, d
        let r = [1.0, 0.5, -0.7, -0.2, 0.9];
        assert_eq!(order_by_correlation(&r, 0), vec![2, 3, 0, 4, 1]);
        assert_eq!(order_by_correlation(&[1.0, 0.2, 0.8], 0), vec![0, 2, 1]);
        assert_eq!(order_by_correlation(&[1.0], 0), vec![0]);
    }

    #[test]
    fn reference_tie_break() {
        let g = SignedGrid::from_rows(vec![vec![1, -1, 0], vec![1, -1, 0], vec![-1, 1, 0]]).unwrap();
        assert_eq!(select_reference(&g, Axis::Rows), 0);
        let constant = SignedGrid::from_rows(vec![vec![1, 1], vec![1, 1]]).unwrap();
        assert_eq!(select_reference(&constant, Axis::Rows), 0);
        let single = SignedGrid::from_rows(vec![vec![1, -1, 0]]).unwrap();
        assert_eq!(select_reference(&single, Axis::Rows), 0);
    }

    #[test]
    fn strength_examples() {
        let g = SignedGrid::from_rows(vec![vec![1, -1, 0]; 3]).unwrap();
        assert_eq!(copa_strength(&rearrange(&g, Axis::Rows, 0).unwrap()), 1.0);
        let flat = SignedGrid::from_rows(vec![vec![0, 0]; 3]).unwrap();
        assert_eq!(copa_strength(&rearrange(&flat, Axis::Rows, 0).unwrap()), 0.0);
        let view = CopaView {
            axis: Axis::Rows,
            reference: 0,
            permutation: vec![0, 1, 2, 3],
            correlations: vec![1.0, 0.5, -0.7, 0.2],
            defined: vec![true; 4],
            grid: g,
        };
        assert!((copa_strength(&view) - 1.4 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_reference() {
        let g = SignedGrid::from_rows(vec![vec![1, 0]]).unwrap();
        assert!(rearrange(&g, Axis::Rows, 3).is_err());
    }
}
