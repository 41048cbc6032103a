//! Drives the command-line entry point: prepare, train, evaluate, sweep.
//!
//! cargo run --release --example cli_pipeline

use loca::cli::run_command;

fn main() {
    let out = std::env::temp_dir().join("loca-example-cli");
    let out = out.to_str().expect("utf-8 temp dir");
    let common = [
        "--out",
        out,
        "--seed",
        "1",
        "--set",
        "data.synthetic=true",
        "--set",
        "loca.q=4",
        "--set",
        "loca.embedding_dim=4",
        "--set",
        "kernel.h_T=1.2",
        "--set",
        "eval.n_values=[10,20]",
    ];
    let steps: [&[&str]; 5] = [
        &["prepare"],
        &["train"],
        &["evaluate"],
        &["recommend", "--users", "u0,u199", "-n", "3"],
        &["sweep", "--param", "h_W", "--values", "0.2,0.4,0.8"],
    ];
    for step in steps {
        let argv: Vec<&str> = std::iter::once("loca")
            .chain(step.iter().copied())
            .chain(common)
            .collect();
        let code = run_command(argv);
        println!("loca {} -> exit {code}", step.join(" "));
        if code != 0 {
            std::process::exit(code);
        }
    }
    println!("artifacts in {out}");
}
