//! Trains the same DAE ensemble with different worker counts.
//!
//! cargo run --release --example parallel_training

use std::time::Instant;

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let log = PlantedBlocks::default().generate(7);
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    let config = LocaConfig {
        q: 8,
        kernel: KernelConfig::new(1.2, 0.4)?,
        base: BaseSpec::Dae {
            hidden: 32,
            train: TrainConfig {
                max_epochs: 30,
                batch_size: 64,
                ..TrainConfig::default()
            },
        },
        embedding_dim: Some(4),
        seed: 7,
        ..LocaConfig::default()
    };
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("{cores} core(s) available");
    let mut reference: Option<Vec<u8>> = None;
    for jobs in [1, 2, 4, 8] {
        let start = Instant::now();
        let model = train_loca(&split, &LocaConfig { jobs, ..config.clone() })?;
        let secs = start.elapsed().as_secs_f64();
        let bytes = model.to_bytes();
        let same = reference.get_or_insert_with(|| bytes.clone()) == &bytes;
        println!("jobs {jobs}: {secs:.2}s, identical to jobs 1: {same}");
    }
    Ok(())
}
