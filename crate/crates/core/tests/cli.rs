use std::fs;
use std::path::Path;

use loca::cli::run_command;

fn run(out: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["loca".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    argv.extend(
        [
            "--out",
            out.to_str().unwrap(),
            "--set",
            "data.synthetic=true",
            "--set",
            "loca.embedding_dim=4",
            "--set",
            "kernel.h_T=1.2",
            "--set",
            "eval.n_values=[10]",
            "--seed",
            "3",
        ]
        .map(String::from),
    );
    run_command(argv)
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(String::from)
        .collect()
}

#[test]
fn train_then_evaluate_reuses_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(out, &["train", "--set", "loca.q=3"]), 0);
    let model_before = fs::read(out.join("model/global.bin")).unwrap();
    let modified = fs::metadata(out.join("model/global.bin")).unwrap().modified().unwrap();

    // a different q would change the model if evaluate retrained
    assert_eq!(run(out, &["evaluate", "--set", "loca.q=7"]), 0);
    assert_eq!(fs::read(out.join("model/global.bin")).unwrap(), model_before);
    assert_eq!(
        fs::metadata(out.join("model/global.bin")).unwrap().modified().unwrap(),
        modified
    );
    let anchors = fs::read_to_string(out.join("model/anchors.txt")).unwrap();
    assert_eq!(anchors.lines().count(), 1 + 3);

    for name in ["metrics.csv", "summary.csv", "activity.csv"] {
        assert!(!data_rows(&out.join("eval").join(name)).is_empty(), "{name}");
    }
    // 200 users, recall and ndcg at one cutoff
    assert_eq!(data_rows(&out.join("eval/metrics.csv")).len(), 200 * 2);
    let manifest = fs::read_to_string(out.join("run_manifest.toml")).unwrap();
    assert!(manifest.contains("sha256:"), "{manifest}");
    assert!(out.join("config.resolved.toml").exists());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(out, &["sweep", "--param", "q", "--values", "1,5,10"]), 0);
    let rows = data_rows(&out.join("sweep_q.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("1,") && rows[2].starts_with("10,"));
}

#[test]
fn bandwidth_sweep_rejects_invalid_points() {
    let dir = tempfile::tempdir().unwrap();
    // h_W = 1.5 exceeds h_T = 1.2
    assert_ne!(run(dir.path(), &["sweep", "--param", "h_W", "--values", "0.3,1.5"]), 0);
    assert_eq!(run(dir.path(), &["sweep", "--param", "h_T", "--values", "0.6,1.2"]), 0);
    assert_eq!(data_rows(&dir.path().join("sweep_h_T.csv")).len(), 2);
}

#[test]
fn ablation_tables_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["ablate-anchors", "--strategies", "coverage,random", "--q", "10"];
    assert_eq!(run(a.path(), &args), 0);
    assert_eq!(run(b.path(), &args), 0);
    let ta = fs::read(a.path().join("ablate_anchors.csv")).unwrap();
    let tb = fs::read(b.path().join("ablate_anchors.csv")).unwrap();
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("strategy,q,coverage,recall@10,ndcg@10\n"), "{text}");
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn recommend_and_predict_use_user_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(run(out, &["train", "--set", "loca.q=2"]), 0);
    assert_eq!(run(out, &["recommend", "--users", "u0,u150", "-n", "4"]), 0);
    let rows = data_rows(&out.join("recommendations.csv"));
    assert_eq!(rows.len(), 8);
    assert!(rows[0].starts_with("u0,1,i") && rows[7].starts_with("u150,4,i"));

    assert_eq!(run(out, &["predict", "--users", "u5"]), 0);
    assert_eq!(data_rows(&out.join("predictions.csv")).len(), 100);

    assert_ne!(run(out, &["recommend", "--users", "nobody"]), 0);
}

#[test]
fn errors_give_nonzero_status() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_ne!(run(out, &["evaluate"]), 0, "missing model");
    assert_ne!(run(out, &["train", "--set", "loca.nonsense=1"]), 0);
    assert_ne!(run(out, &["train", "--set", "kernel.h_W=3"]), 0);
    assert_ne!(run(out, &["bogus"]), 0);
    let no_data = run_command(["loca", "prepare", "--out", out.to_str().unwrap()]);
    assert_ne!(no_data, 0, "data.path unset");
}

#[test]
fn prepares_a_csv_file_from_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ratings.tsv");
    let mut body = String::from("user\titem\trating\tts\n");
    for u in 0..6 {
        for i in 0..8 {
            if (u + i) % 3 != 0 {
                body.push_str(&format!("a{u}\tb{i}\t{}\t{}\n", 1 + (u + i) % 5, u * 10 + i));
            }
        }
    }
    fs::write(&data, body).unwrap();
    let config = dir.path().join("run.toml");
    fs::write(
        &config,
        format!(
            "[data]\npath = {:?}\ndelimiter = \"\\t\"\nheader = true\nmin_user_interactions = 3\npositive_threshold = 2.0\n\n[split]\nk = 1\n",
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = dir.path().join("run");
    let code = run_command([
        "loca",
        "prepare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let heldout = fs::read_to_string(out.join("split/heldout.csv")).unwrap();
    assert!(heldout.contains("# k=1"));
    let index = fs::read_to_string(out.join("split/index_map.csv")).unwrap();
    assert!(index.contains("user,a0,0"), "{index}");
}
