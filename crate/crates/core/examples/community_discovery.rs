//! Embeds users, builds the coverage graph and compares anchor strategies.
//!
//! cargo run --example community_discovery

use loca::prelude::*;

fn main() -> loca::Result<()> {
    let gen = PlantedBlocks::default();
    let log = gen.generate(2);
    let matrix = preprocess(&log, 10, PositiveThreshold::All)?;
    let split = leave_k_out_split(&log, &matrix, 5)?;

    let embeddings = EmbeddingMatrix::truncated_svd(&split.train, 4)?;
    let kernel = KernelConfig::new(1.2, 0.4)?;
    let graph = CoverageGraph::build(&embeddings, &kernel)?;
    println!("coverage graph: {} users, {} edges", graph.n_nodes(), graph.n_edges());

    for strategy in AnchorStrategy::ALL {
        let anchors = select_anchors(&graph, &embeddings, 4, strategy, 2)?;
        let pairs = anchors
            .anchors
            .iter()
            .map(|&a| build_weight_pair(&embeddings, a, &kernel))
            .collect::<loca::Result<Vec<_>>>()?;
        let blocks: Vec<usize> = anchors.anchors.iter().map(|&a| gen.user_block(a)).collect();
        println!(
            "{:>9}: anchors {:?} (blocks {blocks:?}), coverage {:.3}",
            strategy.to_string(),
            anchors.anchors,
            coverage_ratio(&anchors, &pairs)?
        );
    }

    let first = build_weight_pair(&embeddings, 0, &kernel)?;
    let same: Vec<f64> = (0..200)
        .filter(|&u| gen.user_block(u) == 0)
        .map(|u| first.infer[u])
        .collect();
    let other: Vec<f64> = (0..200)
        .filter(|&u| gen.user_block(u) == 1)
        .map(|u| first.infer[u])
        .collect();
    println!(
        "anchor 0 inference weight: mean {:.3} inside its block, {:.3} outside",
        same.iter().sum::<f64>() / same.len() as f64,
        other.iter().sum::<f64>() / other.len() as f64
    );
    Ok(())
}
