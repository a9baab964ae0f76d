//! Physics-only vs implicit-only vs combined pretraining, each scored by a
//! linear probe, on a small synthetic set.
//!
//! `cargo run --release --example ablation -- [shapes] [epochs] [seeds]`

use physpretrain::losses::FidelityMode;
use physpretrain::nn::{NetConfig, TrainConfig};
use physpretrain::pipeline::{ablation_suite, build_dataset, gen_shapes, load_dataset, DatasetConfig, FamilyChoice, MANIFEST_FILE};

fn arg(i: usize, default: usize) -> usize {
    std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default)
}

fn main() -> physpretrain::Result<()> {
    let (count, epochs, seeds) = (arg(1, 12), arg(2, 5), arg(3, 2));
    let dir = std::env::temp_dir().join("physpretrain_ablation_example");
    let _ = std::fs::remove_dir_all(&dir);
    gen_shapes(FamilyChoice::Mixed, count, 256, 1, dir.join("clouds"))?;
    let cfg = DatasetConfig { queries: 256, ..DatasetConfig::default() };
    build_dataset(dir.join("clouds"), dir.join("ds"), &cfg, 2)?;
    let (_, samples) = load_dataset(dir.join("ds").join(MANIFEST_FILE), FidelityMode::PerCell)?;
    let train = TrainConfig { net: NetConfig { n_points: 256, ..NetConfig::default() }, epochs, ..TrainConfig::default() };
    let seeds: Vec<u64> = (0..seeds as u64).collect();
    let report = ablation_suite(&samples, &train, &seeds)?;
    for e in &report.entries {
        let std = e.std.map_or("n/a".to_string(), |s| format!("{s:.3}"));
        println!("{:<14} mean {:.3}  std {std}  runs {:?}", e.name, e.mean.unwrap_or(f64::NAN), e.accuracies);
    }
    Ok(())
}
