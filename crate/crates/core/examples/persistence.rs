//! Saves a model directory, reloads it and scores users from disk.
//!
//! cargo run --example persistence

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let log = PlantedBlocks::default().generate(8);
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    let model = train_loca(
        &split,
        &LocaConfig {
            q: 3,
            kernel: KernelConfig::new(1.2, 0.4)?,
            embedding_dim: Some(4),
            seed: 8,
            ..LocaConfig::default()
        },
    )?;

    let dir = std::env::temp_dir().join("loca-example-persistence");
    model.save(&dir)?;
    for entry in std::fs::read_dir(&dir).map_err(|e| LocaError::Io {
        path: dir.clone(),
        source: e,
    })? {
        let entry = entry.map_err(|e| LocaError::Io {
            path: dir.clone(),
            source: e,
        })?;
        let len = entry.metadata().map(|m| m.len()).unwrap_or(0);
        println!("{:>18} {len:>8} bytes", entry.file_name().to_string_lossy());
    }

    let loaded = LocaModel::load(&dir)?;
    assert_eq!(loaded.to_bytes(), model.to_bytes());
    let user = split.train.user_index.get("u42").expect("user u42");
    let top = loaded.recommend_top_n(user, split.train.row(user), 5, true)?;
    let items: Vec<&str> = top.iter().filter_map(|&i| split.train.item_index.token(i)).collect();
    println!("u42 -> {items:?}");
    Ok(())
}
