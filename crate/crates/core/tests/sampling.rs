//! Statistical checks of the samplers and of the urn dynamics.

use rand::Rng;
use rand_distr::StandardNormal;
use urnlab::diagnostics::binned_zero_mean;
use urnlab::distributions::{hypergeometric_pmf, hypergeometric_sample};
use urnlab::ensemble::{run_ensemble, EnsembleSpec};
use urnlab::stats::{chi_square_gof, ks_normal_test};
use urnlab::urn::run_steps;
use urnlab::{
    predict_model1, AdditionLaw, CheckpointGrid, LawSchedule, RandomStream, UrnConfig, Variant,
};

fn chi_square_law(law: &AdditionLaw, seed: u64) -> f64 {
    let pmf = law.pmf();
    let mut counts = vec![0u64; pmf.len()];
    let mut s = RandomStream::from_seed(seed);
    for _ in 0..100_000 {
        let k = law.sample(&mut s);
        let i = pmf
            .iter()
            .position(|p| p.0 == k)
            .expect("sample in support");
        counts[i] += 1;
    }
    let probs: Vec<f64> = pmf.iter().map(|p| p.1).collect();
    chi_square_gof(&counts, &probs).unwrap().p_value
}

#[test]
fn laws_sample_their_pmf() {
    let laws = [
        AdditionLaw::uniform(1, 3).unwrap(),
        AdditionLaw::uniform(2, 6).unwrap(),
        AdditionLaw::shifted_bernoulli(1, 3, 0.4).unwrap(),
        AdditionLaw::binomial(4, 0.5).unwrap(),
        AdditionLaw::binomial(20, 0.2).unwrap(),
        AdditionLaw::truncated_poisson(3.0, 1).unwrap(),
    ];
    for (i, law) in laws.iter().enumerate() {
        let p = chi_square_law(law, 100 + i as u64);
        assert!(p > 0.001, "{law}: p = {p}");
    }
}

#[test]
fn uniform_mean_over_a_million_draws() {
    let law = AdditionLaw::uniform(1, 3).unwrap();
    let mut s = RandomStream::from_seed(5);
    let n = 1_000_000;
    let mut sum = 0u64;
    let mut min = u64::MAX;
    for _ in 0..n {
        let x = law.sample(&mut s);
        sum += x;
        min = min.min(x);
    }
    let mean = sum as f64 / n as f64;
    let se = (2.0f64 / 3.0).sqrt() / 1000.0;
    assert!((mean - 2.0).abs() < 3.0 * se, "{mean}");
    assert!(min >= law.lower_bound());
}

#[test]
fn binomial_middle_probability() {
    let law = AdditionLaw::binomial(4, 0.5).unwrap();
    let mut s = RandomStream::from_seed(6);
    let n = 200_000;
    let hits = (0..n).filter(|_| law.sample(&mut s) == 2).count() as f64 / n as f64;
    let se = (0.375f64 * 0.625 / n as f64).sqrt();
    assert!((hits - 0.375).abs() < 4.0 * se);
}

#[test]
fn hypergeometric_mean_and_small_urns() {
    let mut s = RandomStream::from_seed(8);
    let n = 1_000_000;
    let sum: u64 = (0..n)
        .map(|_| hypergeometric_sample(5, 10, 4, &mut s).unwrap())
        .sum();
    let mean = sum as f64 / n as f64;
    // Var = 4 * 1/2 * 1/2 * 6/9
    let se = (2.0f64 / 3.0 / n as f64).sqrt();
    assert!((mean - 2.0).abs() < 4.0 * se);

    let pmf = hypergeometric_pmf(3, 7, 2).unwrap();
    let mut counts = [0u64; 3];
    for _ in 0..100_000 {
        counts[hypergeometric_sample(3, 7, 2, &mut s).unwrap() as usize] += 1;
    }
    let probs: Vec<f64> = pmf.values().copied().collect();
    assert!(chi_square_gof(&counts, &probs).unwrap().p_value > 0.001);
    for _ in 0..100 {
        assert_eq!(hypergeometric_sample(5, 5, 3, &mut s).unwrap(), 3);
        assert_eq!(hypergeometric_sample(0, 9, 4, &mut s).unwrap(), 0);
    }
}

#[test]
fn reference_paths_settle_near_the_limit() {
    let x = AdditionLaw::uniform(1, 3).unwrap();
    let y = AdditionLaw::uniform(2, 6).unwrap();
    let zs = predict_model1(2, &x, &y).unwrap().z_star;
    let config = UrnConfig::new(2, 5, 5, Variant::Opposite { law_x: x, law_y: y }, 10_000).unwrap();
    let mut spec = EnsembleSpec::new(config, 500, 314);
    spec.grid = CheckpointGrid::Explicit { steps: vec![] };
    let out = run_ensemble(&spec).unwrap();
    let near = out
        .iter()
        .filter(|o| (o.final_state().proportion() - zs).abs() < 0.05)
        .count();
    assert!(near as f64 >= 0.95 * 500.0, "{near}");
}

#[test]
fn equal_addition_proportion_is_a_martingale() {
    let config = UrnConfig::new(
        2,
        5,
        5,
        Variant::EqualAddition {
            schedule: LawSchedule::Binomial { p: 0.5 },
        },
        51,
    )
    .unwrap();
    let grid = CheckpointGrid::Explicit { steps: vec![50] };
    let samples: Vec<(f64, u64, f64)> = (0..10_000u64)
        .map(|r| {
            let rec = run_steps(
                &config,
                &mut RandomStream::substream(77, r),
                &grid,
                51,
                false,
            )
            .unwrap();
            let before = rec.checkpoints[1];
            let after = rec.final_state;
            (
                before.proportion(),
                before.total(),
                after.proportion() - before.proportion(),
            )
        })
        .collect();
    let b = binned_zero_mean(samples);
    assert!(b.bins_used > 0);
    assert!(b.max_abs_t <= 4.0, "{b:?}");
}

#[test]
fn ks_rejects_at_nominal_rate_under_the_null() {
    let mut s = RandomStream::from_seed(2718);
    let alpha = 0.05;
    let trials = 200;
    let mut rejected = 0;
    for _ in 0..trials {
        let xs: Vec<f64> = (0..500)
            .map(|_| s.rng().sample::<f64, _>(StandardNormal))
            .collect();
        if ks_normal_test(&xs).unwrap().p_value < alpha {
            rejected += 1;
        }
    }
    assert!(rejected as f64 <= 1.5 * alpha * trials as f64, "{rejected}");
}
