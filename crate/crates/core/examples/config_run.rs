// Run a JSON config in-process and print the result section. Pass a path
// to use another config.

use std::path::PathBuf;

use riesz_balayage::cli::{run_task, Opts};
use riesz_balayage::config::SceneConfig;

pub fn run() -> riesz_balayage::Result<()> {
    run_config(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/single_node.json"))
}

pub fn run_config(path: PathBuf) -> riesz_balayage::Result<()> {
    let cfg = SceneConfig::load(&path)?;
    let opts = Opts {
        config: path,
        out: None,
        level: None,
        tol: None,
        beta: None,
        threads: None,
        check_symmetry: false,
        check_superposition: false,
        check_restriction: false,
        check_dense: false,
        require_conclusive: false,
    };
    let outcome = run_task(&cfg, &opts)?;
    println!("{}", serde_json::to_string_pretty(&outcome.report["result"])?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> riesz_balayage::Result<()> {
    match std::env::args().nth(1) {
        Some(p) => run_config(PathBuf::from(p)),
        None => run(),
    }
}
