//! NDCG@10 as a function of the training and inference bandwidths.
//!
//! cargo run --release --example bandwidth_sweep

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let log = PlantedBlocks::default().generate(6);
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    let base = LocaConfig {
        q: 4,
        embedding_dim: Some(4),
        seed: 6,
        ..LocaConfig::default()
    };

    println!("h_W sweep at h_T = 1.2");
    for h_w in [0.1, 0.2, 0.4, 0.8, 1.2] {
        let model = train_loca(
            &split,
            &LocaConfig {
                kernel: KernelConfig::new(1.2, h_w)?,
                ..base.clone()
            },
        )?;
        let ndcg = evaluate_model(&model, &split, &[10])?.ndcg(10).unwrap();
        println!("  h_W {h_w:.1}: coverage {:.3}, NDCG@10 {ndcg:.4}", model.coverage());
    }
    println!("h_T sweep at h_W = 0.4");
    for h_t in [0.4, 0.8, 1.2, 1.6, 3.2] {
        let model = train_loca(
            &split,
            &LocaConfig {
                kernel: KernelConfig::new(h_t, 0.4)?,
                ..base.clone()
            },
        )?;
        let ndcg = evaluate_model(&model, &split, &[10])?.ndcg(10).unwrap();
        println!("  h_T {h_t:.1}: NDCG@10 {ndcg:.4}");
    }
    println!("q sweep");
    for q in [0, 1, 2, 4, 8, 16] {
        let model = train_loca(
            &split,
            &LocaConfig {
                q,
                kernel: KernelConfig::new(1.2, 0.4)?,
                ..base.clone()
            },
        )?;
        let ndcg = evaluate_model(&model, &split, &[10])?.ndcg(10).unwrap();
        println!("  q {q:>2}: coverage {:.3}, NDCG@10 {ndcg:.4}", model.coverage());
    }
    Ok(())
}
