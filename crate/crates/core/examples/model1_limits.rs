//! One long opposite-reinforcement path next to its limits.

use urnlab::urn::run_trajectory;
use urnlab::{predict_model1, AdditionLaw, CheckpointGrid, RandomStream, UrnConfig, Variant};

fn main() {
    let x = AdditionLaw::uniform(1, 3).unwrap();
    let y = AdditionLaw::uniform(2, 6).unwrap();
    let p = predict_model1(2, &x, &y).unwrap();
    println!(
        "z* = {:.7}, T_n/n -> {:.6}, W_n/n -> {:.6}",
        p.z_star, p.tn_rate, p.wn_rate
    );

    let config =
        UrnConfig::new(2, 5, 5, Variant::Opposite { law_x: x, law_y: y }, 1_000_000).unwrap();
    let grid = CheckpointGrid::Explicit {
        steps: vec![10, 100, 1_000, 10_000, 100_000],
    };
    let path = run_trajectory(&config, &mut RandomStream::from_seed(2024), &grid, false).unwrap();
    println!("{:>8} {:>10} {:>10} {:>10}", "n", "Z_n", "T_n/n", "W_n/n");
    for s in path.checkpoints.iter().skip(1) {
        let n = s.step as f64;
        println!(
            "{:>8} {:>10.6} {:>10.6} {:>10.6}",
            s.step,
            s.proportion(),
            s.total() as f64 / n,
            s.white as f64 / n
        );
    }
}
