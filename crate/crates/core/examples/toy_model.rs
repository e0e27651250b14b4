//! Build the toy transformer, decode greedily and by sampling, and round-trip
//! its weights through a file.

use mutascreen::{Backend, GenParams, ToyModel, ToyModelConfig};

fn main() -> mutascreen::Result<()> {
    let mut model = ToyModel::new(ToyModelConfig::default())?;
    println!("fingerprint {}", model.weights_digest());
    for d in model.list_matrices()? {
        let s = model.matrix_stats(d.id)?;
        println!("{:<8} {:>3}x{:<3} min {:+.4} max {:+.4}", d.id.to_string(), d.rows, d.cols, s.min, s.max);
    }

    let prompt = "Once upon a time";
    let greedy = GenParams {
        temperature: 0.0,
        max_length: 48,
        seed: 0,
    };
    println!("greedy:   {:?}", model.generate(prompt, &greedy)?);
    for seed in [0, 10] {
        let sampled = GenParams {
            temperature: 0.7,
            seed,
            ..greedy
        };
        println!("seed {seed:<3} {:?}", model.generate(prompt, &sampled)?);
    }

    let path = std::env::temp_dir().join("mutascreen-toy.bin");
    model.save(&path)?;
    let reloaded = ToyModel::load(&path)?;
    assert_eq!(reloaded.weights_digest(), model.weights_digest());
    println!("saved and reloaded {}", path.display());
    Ok(())
}
