//! Local denoising autoencoders with embeddings from the global DAE.
//!
//! cargo run --release --example loca_dae

use loca::base_models::train_dae_traced;
use loca::prelude::*;

fn main() -> loca::Result<()> {
    let log = PlantedBlocks::default().generate(3);
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    let train = TrainConfig {
        max_epochs: 40,
        batch_size: 64,
        learning_rate: 0.01,
        ..TrainConfig::default()
    };

    let ones = vec![1.0; split.n_users()];
    let (_, losses) = train_dae_traced(&split.train, &ones, 16, &train, 3)?;
    println!(
        "global DAE loss: epoch 1 {:.2}, epoch {} {:.2}",
        losses[0],
        losses.len(),
        losses[losses.len() - 1]
    );

    let config = LocaConfig {
        q: 4,
        kernel: KernelConfig::new(1.2, 0.8)?,
        base: BaseSpec::Dae { hidden: 16, train },
        seed: 3,
        jobs: 2,
        ..LocaConfig::default()
    };
    let loca = train_loca(&split, &config)?;
    let global = train_loca(&split, &LocaConfig { q: 0, ..config })?;
    let l = evaluate_model(&loca, &split, &[10, 20])?;
    let g = evaluate_model(&global, &split, &[10, 20])?;
    println!("anchors {:?}, coverage {:.3}", loca.anchors().anchors, loca.coverage());
    println!(
        "NDCG@10 global {:.4}  loca {:.4}",
        g.ndcg(10).unwrap(),
        l.ndcg(10).unwrap()
    );
    println!(
        "Recall@20 global {:.4}  loca {:.4}",
        g.recall(20).unwrap(),
        l.recall(20).unwrap()
    );
    Ok(())
}
