//! t-SNE of raw patterns for a small generated set, colored by the PPT label.

use cvkit::pipeline::embed::{embed_records, EmbedOptions, EmbedSource};
use cvkit::pipeline::generate::{generate_records, GenerateOptions};
use cvkit::tsne::TsneConfig;

fn main() -> cvkit::Result<()> {
    let records = generate_records(&GenerateOptions {
        count: 150,
        seed: 4,
        ..Default::default()
    })?;
    let opts = EmbedOptions {
        limit: None,
        tsne: TsneConfig {
            perplexity: 20.0,
            ..Default::default()
        },
    };
    let out = embed_records(&records, EmbedSource::Raw, None, &opts)?;
    println!("KL {:.4} -> {:.4}", out.embedding.initial_kl, out.embedding.final_kl);
    if let Some(s) = out.silhouette {
        println!("E_PPT silhouette on raw patterns: {s:.4}");
    }
    for (i, r) in records.iter().enumerate().take(10) {
        let p = out.embedding.points.row(i);
        println!("{:>8.3} {:>8.3}  ppt={}", p[0], p[1], u8::from(r.labels.e_ppt));
    }
    Ok(())
}
