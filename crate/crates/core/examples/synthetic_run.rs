//! Trains on a synthetic font pair and prints the loss trajectory.
//!
//! `cargo run --release -p glyphgan --example synthetic_run -- [steps] [base_channels] [learning_rate] [fewshot_fraction]`

use glyphgan::data::{make_synthetic_font_pair, FewShotStrategy, GlyphDataset};
use glyphgan::metrics::{evaluate, RandomConvEmbedder};
use glyphgan::model::Networks;
use glyphgan::train::{train_run, TrainConfig};

fn main() -> glyphgan::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let base: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(8);
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2e-4);
    let fraction: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.2);
    let pair = make_synthetic_font_pair(200, 0, 64);
    let data = GlyphDataset::new(pair.source, pair.target, pair.table)?;
    let mut config = TrainConfig {
        resolution: 64,
        epochs: 1000,
        max_steps: steps,
        checkpoint_every: 0,
        learning_rate: lr,
        fewshot: FewShotStrategy::Random { fraction },
        ..TrainConfig::default()
    };
    config.model.base_channels = base;
    let start = std::time::Instant::now();
    let out = train_run::<f32>(&config, &data, None)?;
    let window = |range: std::ops::Range<usize>, f: fn(&glyphgan::train::StepLosses) -> f64| {
        let rows: Vec<f64> = out.history[range].iter().map(f).filter(|v| *v != 0.0).collect();
        rows.iter().sum::<f64>() / rows.len().max(1) as f64
    };
    let n = out.history.len();
    for k in (0..n).step_by(n.div_ceil(20).max(1)) {
        let end = (k + 10).min(n);
        println!(
            "steps {:4}..{:4}  cyc {:.4}  fs3 {:.4}  stroke {:.4}  adv_d {:.4}  adv_g {:.4}",
            k,
            end,
            window(k..end, |r| r.cyc),
            window(k..end, |r| r.fs3),
            window(k..end, |r| r.stroke),
            window(k..end, |r| r.adv_d),
            window(k..end, |r| r.adv_g)
        );
    }
    println!("{} steps in {:.1}s", n, start.elapsed().as_secs_f64());
    let pairs: Vec<_> = out.data.split.test.iter().map(|c| (&data.source[c], &data.target[c])).collect();
    let embedder = RandomConvEmbedder::new(0);
    let mut untrained = Networks::<f32>::init(&config.model, config.seed).generator;
    let before = evaluate(&mut untrained, &pairs, &embedder, 16)?.report;
    let mut trained = out.state.nets.generator.clone();
    let after = evaluate(&mut trained, &pairs, &embedder, 16)?.report;
    println!("untrained: {}", serde_json::to_string(&before).unwrap());
    println!("trained:   {}", serde_json::to_string(&after).unwrap());
    Ok(())
}
