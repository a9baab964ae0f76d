//! PCA projection of encoder latents, written as `x,y,label` CSV.

use physpretrain::nn::{NetConfig, Network};
use physpretrain::pipeline::{embeddings_csv, export_embeddings, generate_shapes, FamilyChoice};
use physpretrain::normalize_unit_sphere;

fn main() -> physpretrain::Result<()> {
    let net = Network::new(NetConfig::default(), 0)?;
    let clouds = generate_shapes(FamilyChoice::Mixed, 30, 256, 5)?
        .iter()
        .map(|s| Ok((normalize_unit_sphere(s)?.0.points, s.label.clone().unwrap_or_default())))
        .collect::<physpretrain::Result<Vec<_>>>()?;
    let pts = export_embeddings(&net, &clouds)?;
    let out = std::env::temp_dir().join("physpretrain_embeddings.csv");
    std::fs::write(&out, embeddings_csv(&pts)).map_err(|e| physpretrain::Error::Pipeline(e.to_string()))?;
    for label in ["sphere", "box", "cylinder"] {
        let sel: Vec<_> = pts.iter().filter(|p| p.label == label).collect();
        let cx = sel.iter().map(|p| p.x).sum::<f64>() / sel.len() as f64;
        let cy = sel.iter().map(|p| p.y).sum::<f64>() / sel.len() as f64;
        println!("{label:<9} centroid ({cx:+.3}, {cy:+.3})");
    }
    println!("wrote {}", out.display());
    Ok(())
}
