//! Local EASE models against one global EASE model on planted blocks.
//!
//! cargo run --release --example loca_ease

use loca::prelude::*;

fn main() -> loca::Result<()> {
    println!("seed  global   loca    coverage");
    for seed in 1..=5 {
        let log = PlantedBlocks::default().generate(seed);
        let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
        let split = leave_k_out_split(&log, &matrix, 5)?;
        let config = LocaConfig {
            q: 4,
            kernel: KernelConfig::new(1.2, 0.4)?,
            base: BaseSpec::Ease { lambda: 100.0 },
            embedding_dim: Some(4),
            seed,
            ..LocaConfig::default()
        };
        let loca = train_loca(&split, &config)?;
        let global = train_loca(&split, &LocaConfig { q: 0, ..config })?;
        let l = evaluate_model(&loca, &split, &[10])?;
        let g = evaluate_model(&global, &split, &[10])?;
        println!(
            "{seed:>4}  {:.4}   {:.4}  {:.3}",
            g.ndcg(10).unwrap(),
            l.ndcg(10).unwrap(),
            loca.coverage()
        );
    }
    Ok(())
}
