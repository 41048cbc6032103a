//! Writes a CSV log, preprocesses it and saves the leave-k-out split.
//!
//! cargo run --example prepare_split

use std::fmt::Write as _;

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let dir = tempfile_dir("prepare_split");
    let csv = dir.join("ratings.csv");
    let log = PlantedBlocks::default().generate(1);
    let mut body = String::new();
    for r in &log.records {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            r.user,
            r.item,
            r.rating.unwrap_or(1.0),
            r.timestamp.unwrap_or(0)
        );
    }
    std::fs::write(&csv, body).map_err(|e| LocaError::Io {
        path: csv.clone(),
        source: e,
    })?;

    let schema = Schema::parse("user,item,rating,ts", ',', false)?;
    let log = load_interactions(&csv, &schema)?;
    let matrix = preprocess(&log, 10, PositiveThreshold::AtLeast(1.0))?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    split.save(dir.join("split"))?;

    println!("{} interactions read", log.len());
    println!(
        "{} users x {} items, {} train positives",
        split.n_users(),
        split.n_items(),
        split.train.nnz()
    );
    println!("user u0 holds out {:?}", split.heldout[0]);
    println!("split written to {}", dir.join("split").display());
    Ok(())
}

fn tempfile_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("loca-example-{name}"));
    std::fs::create_dir_all(&dir).expect("temp dir");
    dir
}
