//! End-to-end: shapes, dataset, a short pretraining run, checkpoint and a
//! linear probe on the frozen encoder.

use physpretrain::losses::FidelityMode;
use physpretrain::nn::{load_checkpoint, pretrain, probe_classify, save_checkpoint, NetConfig, TrainConfig};
use physpretrain::pipeline::{build_dataset, gen_shapes, labelled_clouds, load_dataset, DatasetConfig, FamilyChoice, MANIFEST_FILE};

fn main() -> physpretrain::Result<()> {
    let dir = std::env::temp_dir().join("physpretrain_pretrain_example");
    let _ = std::fs::remove_dir_all(&dir);
    gen_shapes(FamilyChoice::Mixed, 12, 256, 1, dir.join("clouds"))?;
    let cfg = DatasetConfig { queries: 256, ..DatasetConfig::default() };
    let m = build_dataset(dir.join("clouds"), dir.join("ds"), &cfg, 2)?;
    println!("{} samples, {} quarantined", m.samples.len(), m.quarantined.len());

    let (_, samples) = load_dataset(dir.join("ds").join(MANIFEST_FILE), FidelityMode::PerCell)?;
    let train = TrainConfig { net: NetConfig { n_points: 256, ..NetConfig::default() }, epochs: 10, seed: 3, ..TrainConfig::default() };
    let out = pretrain(&samples, &train)?;
    for r in &out.log {
        println!("epoch {:>2}  L_all {:.4}  L_imp {:.4}  L_df {:.4}  L_pi {:.4}", r.epoch.unwrap_or(0), r.l_all, r.l_imp, r.l_df, r.l_pi);
    }
    let ckpt = dir.join("net.ckpt");
    save_checkpoint(&out.network, &ckpt)?;
    let net = load_checkpoint(&ckpt)?;
    let probe = probe_classify(&net, &labelled_clouds(&samples)?, 0)?;
    println!("probe accuracy {:.3} on {} held-out clouds", probe.accuracy, probe.test_count);
    Ok(())
}
