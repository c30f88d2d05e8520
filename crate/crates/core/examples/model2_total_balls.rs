//! Equal addition with X_n ~ Binomial(n, 1/2): the total T_N is Gaussian
//! around its exact mean and variance.

use urnlab::ensemble::{run_ensemble, summarize, EnsembleSpec, Tolerances};
use urnlab::{predict_model2, CheckpointGrid, LawSchedule, UrnConfig, Variant};

fn main() {
    let schedule = LawSchedule::Binomial { p: 0.5 };
    let n = 2_000;
    let p = predict_model2(10, 2, &schedule, n).unwrap();
    println!("E[T_N] = {}, Var[T_N] = {}", p.mean_tn, p.var_tn);

    let config = UrnConfig::new(2, 5, 5, Variant::EqualAddition { schedule }, n).unwrap();
    let mut spec = EnsembleSpec::new(config, 2_000, 5);
    spec.grid = CheckpointGrid::Explicit { steps: vec![] };
    let outputs = run_ensemble(&spec).unwrap();
    let report = summarize(
        &spec,
        &outputs,
        &["clt_t_ks".to_string()],
        &Tolerances::default(),
    )
    .unwrap();
    let t = &report.summary.tests[0];
    println!(
        "KS of standardized T_N: D = {:.4}, p = {:.4}",
        t.statistic,
        t.p_value.unwrap()
    );
    let raw = &report.summary.clt[0].raw;
    println!(
        "empirical mean/var of T_N - E[T_N]: {:.2} / {:.1}",
        raw.mean, raw.variance
    );
}
