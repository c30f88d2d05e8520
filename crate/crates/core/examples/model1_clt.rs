//! Fluctuations of the white proportion around z*.
//!
//! The closed-form variance `P(z*)/(3 mu_X mu_Y)` leaves out the noise of
//! the draw itself; the `*_full` constant keeps it. This prints both next to
//! the ensemble estimate.

use urnlab::ensemble::{run_ensemble, summarize, EnsembleSpec, Tolerances};
use urnlab::{predict_model1, AdditionLaw, CheckpointGrid, UrnConfig, Variant};

fn main() {
    let x = AdditionLaw::uniform(1, 3).unwrap();
    let y = AdditionLaw::uniform(2, 6).unwrap();
    let p = predict_model1(2, &x, &y).unwrap();
    let config = UrnConfig::new(2, 5, 5, Variant::Opposite { law_x: x, law_y: y }, 5_000).unwrap();

    let mut spec = EnsembleSpec::new(config, 1_000, 99);
    spec.grid = CheckpointGrid::Explicit { steps: vec![] };
    let outputs = run_ensemble(&spec).unwrap();
    let tests: Vec<String> = [
        "clt_z_variance",
        "clt_z_variance_full",
        "clt_z_ks",
        "clt_z_ks_full",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let report = summarize(&spec, &outputs, &tests, &Tolerances::default()).unwrap();

    let raw = &report
        .summary
        .clt
        .iter()
        .find(|c| c.kind == "z")
        .unwrap()
        .raw;
    println!(
        "Var sqrt(N)(Z_N - z*): {:.5} over {} replicates",
        raw.variance, raw.count
    );
    println!("closed form          : {:.5}", p.clt_variance_z);
    println!("with draw noise      : {:.5}", p.clt_variance_z_full);
    for t in &report.summary.tests {
        println!(
            "{:<22} {} ({})",
            t.name,
            if t.pass { "pass" } else { "FAIL" },
            t.detail
        );
    }
}
