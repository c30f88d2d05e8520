//! Drive a full experiment from a TOML file, as `urnlab run` does.

use std::path::Path;

use urnlab::experiment::{render_report, run, RunOptions};

fn main() {
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/ref_model2.toml");
    let out = std::env::temp_dir().join("urnlab_example");
    let opts = RunOptions {
        overrides: vec![
            "horizon=2000".into(),
            "tests.enabled=[\"clt_t_ks\", \"decomposition\"]".into(),
        ],
        replicates: Some(300),
        out: Some(out),
        ..RunOptions::default()
    };
    let result = run(&config, &opts).unwrap();
    print!("{}", render_report(&result.summary));
    for f in &result.files {
        println!("wrote {}", f.display());
    }
    println!("exit code would be {}", result.status().code());
}
