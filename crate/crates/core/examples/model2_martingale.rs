//! Equal-addition proportion: martingale decomposition and the decay of the
//! rescaled total error.

use urnlab::diagnostics::extract_model2_diagnostics;
use urnlab::urn::run_trajectory;
use urnlab::{CheckpointGrid, LawSchedule, RandomStream, UrnConfig, Variant};

fn main() {
    let config = UrnConfig::new(
        2,
        5,
        5,
        Variant::EqualAddition {
            schedule: LawSchedule::Binomial { p: 0.5 },
        },
        10_000,
    )
    .unwrap();
    let grid = CheckpointGrid::Explicit {
        steps: vec![10, 100, 1_000],
    };
    let record = run_trajectory(&config, &mut RandomStream::from_seed(8), &grid, true).unwrap();
    let trace = extract_model2_diagnostics(&record, &config, 0.25).unwrap();

    println!(
        "{:>6} {:>10} {:>11} {:>11} {:>12}",
        "n", "Z_n", "martingale", "remainder", "scaled err"
    );
    for p in &trace.points {
        println!(
            "{:>6} {:>10.6} {:>11.6} {:>11.6} {:>12.6}",
            p.step, p.proportion, p.martingale_part, p.remainder_part, p.scaled_total_error
        );
    }
    println!(
        "max |Z_n - Z_0 - M_n - R_n| = {:.2e}",
        trace.max_decomposition_error
    );
}
