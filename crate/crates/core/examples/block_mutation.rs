//! Tile a matrix into blocks, apply one mutation through a guard, and check
//! the weights come back bit-for-bit.

use mutascreen::model::MatrixDescriptor;
use mutascreen::mutation::{apply_mutation, block_for, enumerate_blocks};
use mutascreen::{Backend, GenParams, MatrixId, MatrixKind, Mutation, MutationKind, ToyModel, ToyModelConfig};

fn main() -> mutascreen::Result<()> {
    // ragged tiling: a 10x10 matrix with block 4 gives 3x3 blocks
    let desc = MatrixDescriptor {
        id: MatrixId::new(0, MatrixKind::K),
        rows: 10,
        cols: 10,
    };
    for b in enumerate_blocks(&desc, 4) {
        let e = b.extent;
        println!(
            "(x={}, y={}) rows {}..{} cols {}..{}",
            b.bx,
            b.by,
            e.row_start,
            e.row_start + e.row_count,
            e.col_start,
            e.col_start + e.col_count
        );
    }

    let mut model = ToyModel::new(ToyModelConfig::default())?;
    let params = GenParams {
        max_length: 40,
        ..Default::default()
    };
    let prompt = "The egg hatches into a";
    let standard = model.generate(prompt, &params)?;
    let before = model.weights_digest();

    let target = model.descriptors()[4]; // L0_Up
    let mutation = Mutation {
        block: block_for(&target, 4, 2, 1)?,
        kind: MutationKind::Max,
    };
    let mut guard = apply_mutation(&mut model, &mutation)?;
    let mutated = guard.backend().generate(prompt, &params)?;
    guard.release()?;

    println!("standard: {standard:?}");
    println!("{}(2,1) max: {mutated:?}", target.id);
    println!("phenotype: {}", mutated != standard);
    assert_eq!(model.weights_digest(), before);
    Ok(())
}
