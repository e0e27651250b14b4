//! Block tiling of weight matrices and scoped block mutations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Backend, MatrixDescriptor, MatrixId, MatrixStats};

/// Element range covered by a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extent {
    pub row_start: usize,
    pub row_count: usize,
    pub col_start: usize,
    pub col_count: usize,
}

/// One tile of a matrix. `bx` indexes block columns and `by` block rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub matrix: MatrixId,
    pub bx: usize,
    pub by: usize,
    pub block_size: usize,
    pub extent: Extent,
}

impl BlockRef {
    /// Map coordinates `(x, y)`: element offsets divided by the block size.
    pub fn map_coords(&self) -> (usize, usize) {
        to_map_coords(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MutationKind {
    Max,
    Min,
    Zero,
}

impl MutationKind {
    pub fn fill_value(self, pristine: MatrixStats) -> f32 {
        match self {
            MutationKind::Max => pristine.max,
            MutationKind::Min => pristine.min,
            MutationKind::Zero => 0.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MutationKind::Max => "max",
            MutationKind::Min => "min",
            MutationKind::Zero => "zero",
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MutationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(MutationKind::Max),
            "min" => Ok(MutationKind::Min),
            "zero" => Ok(MutationKind::Zero),
            _ => Err(Error::Input(format!("unknown mutation kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mutation {
    pub block: BlockRef,
    pub kind: MutationKind,
}

/// A mutation addressed by map coordinates rather than element extents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MutationAddress {
    pub matrix: MatrixId,
    pub x: usize,
    pub y: usize,
    pub kind: MutationKind,
}

impl MutationAddress {
    pub fn of(mutation: &Mutation) -> Self {
        let (x, y) = mutation.block.map_coords();
        Self {
            matrix: mutation.block.matrix,
            x,
            y,
            kind: mutation.kind,
        }
    }
}

impl fmt::Display for MutationAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({},{}){}", self.matrix, self.x, self.y, self.kind)
    }
}

/// Number of block columns and block rows for a matrix: `(width, height)`.
pub fn grid_dims(desc: &MatrixDescriptor, block_size: usize) -> (usize, usize) {
    (desc.cols.div_ceil(block_size), desc.rows.div_ceil(block_size))
}

fn block_at(desc: &MatrixDescriptor, block_size: usize, bx: usize, by: usize) -> BlockRef {
    let row_start = by * block_size;
    let col_start = bx * block_size;
    BlockRef {
        matrix: desc.id,
        bx,
        by,
        block_size,
        extent: Extent {
            row_start,
            row_count: block_size.min(desc.rows - row_start),
            col_start,
            col_count: block_size.min(desc.cols - col_start),
        },
    }
}

/// The tile at map coordinates `(x, y)`.
pub fn block_for(desc: &MatrixDescriptor, block_size: usize, x: usize, y: usize) -> Result<BlockRef> {
    if block_size == 0 {
        return Err(Error::Addressing("block_size is zero".into()));
    }
    let (width, height) = grid_dims(desc, block_size);
    if x >= width || y >= height {
        return Err(Error::Addressing(format!(
            "cell ({x}, {y}) outside {width}x{height} grid of {}",
            desc.id
        )));
    }
    Ok(block_at(desc, block_size, x, y))
}

/// Tiles a matrix into non-overlapping blocks ordered by `(by, bx)`.
/// Blocks on the right and bottom edges are clipped to the matrix.
///
/// # Panics
/// If `block_size` is zero.
pub fn enumerate_blocks(desc: &MatrixDescriptor, block_size: usize) -> Vec<BlockRef> {
    assert!(block_size >= 1, "block_size must be positive");
    let (width, height) = grid_dims(desc, block_size);
    let mut blocks = Vec::with_capacity(width * height);
    for by in 0..height {
        for bx in 0..width {
            blocks.push(block_at(desc, block_size, bx, by));
        }
    }
    blocks
}

pub fn to_map_coords(block: &BlockRef) -> (usize, usize) {
    (
        block.extent.col_start / block.block_size,
        block.extent.row_start / block.block_size,
    )
}

/// Checks that `block` is exactly one of the tiles of `desc`.
pub fn validate_block(desc: &MatrixDescriptor, block: &BlockRef) -> Result<()> {
    if block.matrix != desc.id {
        return Err(Error::Addressing(format!(
            "block addresses {} but matrix is {}",
            block.matrix, desc.id
        )));
    }
    if block.block_size == 0 {
        return Err(Error::Addressing("block_size is zero".into()));
    }
    let (width, height) = grid_dims(desc, block.block_size);
    if block.bx >= width || block.by >= height {
        return Err(Error::Addressing(format!(
            "block ({}, {}) outside {}x{} grid of {}",
            block.bx, block.by, width, height, desc.id
        )));
    }
    if *block != block_at(desc, block.block_size, block.bx, block.by) {
        return Err(Error::Addressing(format!(
            "block ({}, {}) of {} has an extent that is not a grid tile",
            block.bx, block.by, desc.id
        )));
    }
    Ok(())
}

/// A mutation held active on a backend. Dropping the guard restores the
/// pristine weights; [`MutationGuard::release`] does the same and reports
/// failures.
pub struct MutationGuard<'a, B: Backend + ?Sized> {
    backend: &'a mut B,
    released: bool,
}

impl<B: Backend + ?Sized> MutationGuard<'_, B> {
    pub fn backend(&mut self) -> &mut B {
        self.backend
    }

    pub fn release(mut self) -> Result<()> {
        self.released = true;
        self.backend.clear_mutation()
    }
}

impl<B: Backend + ?Sized> Drop for MutationGuard<'_, B> {
    fn drop(&mut self) {
        if !self.released {
            let _ = self.backend.clear_mutation();
        }
    }
}

/// Applies `mutation` and returns a guard that restores the backend.
pub fn apply_mutation<'a, B: Backend + ?Sized>(backend: &'a mut B, mutation: &Mutation) -> Result<MutationGuard<'a, B>> {
    backend.apply_mutation(mutation)?;
    Ok(MutationGuard {
        backend,
        released: false,
    })
}
