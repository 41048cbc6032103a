//! Coverage and accuracy of the four anchor strategies at several model counts.
//!
//! cargo run --release --example anchor_ablation

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let log = PlantedBlocks {
        blocks: 4,
        ..PlantedBlocks::default()
    }
    .generate(5);
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    println!("strategy,q,coverage,ndcg@10");
    for q in [2, 4, 8] {
        for strategy in AnchorStrategy::ALL {
            let config = LocaConfig {
                q,
                kernel: KernelConfig::new(1.2, 0.5)?,
                anchor_strategy: strategy,
                embedding_dim: Some(6),
                seed: 5,
                ..LocaConfig::default()
            };
            let model = train_loca(&split, &config)?;
            let report = evaluate_model(&model, &split, &[10])?;
            println!("{strategy},{q},{:.3},{:.4}", model.coverage(), report.ndcg(10).unwrap());
        }
    }
    Ok(())
}
