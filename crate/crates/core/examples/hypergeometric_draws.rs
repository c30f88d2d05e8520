//! Exact hypergeometric draws: compare 100k samples with the enumerated pmf.

use urnlab::distributions::{hypergeometric_pmf, hypergeometric_sample};
use urnlab::stats::chi_square_gof;
use urnlab::RandomStream;

fn main() {
    let (white, total, draw) = (7, 20, 5);
    let pmf = hypergeometric_pmf(white, total, draw).unwrap();
    let mut stream = RandomStream::from_seed(42);

    let lo = *pmf.keys().next().unwrap();
    let mut counts = vec![0u64; pmf.len()];
    for _ in 0..100_000 {
        let k = hypergeometric_sample(white, total, draw, &mut stream).unwrap();
        counts[(k - lo) as usize] += 1;
    }
    println!("urn W={white} T={total}, draw {draw}");
    println!("{:>3} {:>10} {:>10}", "k", "pmf", "observed");
    for ((k, p), c) in pmf.iter().zip(&counts) {
        println!("{k:>3} {p:>10.6} {:>10.6}", *c as f64 / 100_000.0);
    }
    let probs: Vec<f64> = pmf.values().copied().collect();
    let chi = chi_square_gof(&counts, &probs).unwrap();
    println!(
        "chi-square {:.3} on {} dof, p = {:.4}",
        chi.statistic, chi.degrees_of_freedom, chi.p_value
    );

    // drawing the whole urn is deterministic
    assert_eq!(
        hypergeometric_sample(white, total, total, &mut stream).unwrap(),
        white
    );
}
