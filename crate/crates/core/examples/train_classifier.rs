//! Trains a small classifier on freshly generated states.
//!
//! `cargo run --release --example train_classifier -- 400 30`

use cvkit::mlp::{evaluate_accuracy, init_model, train_with, Example, TrainConfig};
use cvkit::pipeline::generate::{generate_records, GenerateOptions};

fn main() -> cvkit::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("integer argument"));
    let count = args.next().unwrap_or(300);
    let epochs = args.next().unwrap_or(20);
    let records = generate_records(&GenerateOptions {
        count,
        seed: 1,
        ..Default::default()
    })?;
    let examples: Vec<Example> = records.iter().map(|r| r.example()).collect();
    let config = TrainConfig {
        epochs,
        seed: 1,
        ..Default::default()
    };
    let out = train_with(init_model(config.seed), &examples, &config, |r| {
        println!(
            "epoch {:>4}  train {:.4}  val {:.4}  acc {:.3} {:.3} {:.3}",
            r.epoch, r.train_loss, r.val_loss, r.val_accuracy[0], r.val_accuracy[1], r.val_accuracy[2]
        );
    })?;
    let val: Vec<Example> = out.val_indices.iter().map(|&i| examples[i].clone()).collect();
    let acc = evaluate_accuracy(&out.best_model, &val)?;
    println!("best epoch {}: validation accuracy {:.3} {:.3} {:.3}", out.best_epoch, acc[0], acc[1], acc[2]);
    Ok(())
}
