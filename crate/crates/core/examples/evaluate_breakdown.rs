//! Evaluation report, per-user metrics and the activity breakdown.
//!
//! cargo run --release --example evaluate_breakdown

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let gen = PlantedBlocks {
        interactions_per_user: 30,
        ..PlantedBlocks::default()
    };
    let mut log = gen.generate(4);
    // uneven histories: user u keeps its first 12 + u % 19 interactions
    let mut seen = std::collections::HashMap::new();
    log.records.retain(|r| {
        let u: usize = r.user[1..].parse().expect("numeric token");
        let n = seen.entry(u).or_insert(0usize);
        *n += 1;
        *n <= 12 + u % 19
    });
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;
    let model = train_loca(
        &split,
        &LocaConfig {
            q: 6,
            kernel: KernelConfig::new(1.2, 0.4)?,
            embedding_dim: Some(4),
            seed: 4,
            ..LocaConfig::default()
        },
    )?;
    let report = evaluate_model(&model, &split, &[10, 50])?;
    print!("{}", report.summary_table());

    let best = report
        .per_user
        .iter()
        .max_by(|a, b| a.ndcg[0].total_cmp(&b.ndcg[0]))
        .expect("users");
    println!("best user {} with NDCG@10 {:.4}", best.user, best.ndcg[0]);

    for b in breakdown_by_activity(&report, &split.train, &[12, 18, 24])? {
        let upper = b.upper.map_or("inf".to_string(), |u| u.to_string());
        println!(
            "train size [{}, {upper}): {} users, NDCG@10 {:.4}",
            b.lower, b.n_users, b.mean_ndcg[0]
        );
    }

    let top = model.recommend_top_n(0, split.train.row(0), 5, true)?;
    println!("top 5 for user 0: {top:?}, held out {:?}", split.heldout[0]);
    Ok(())
}
