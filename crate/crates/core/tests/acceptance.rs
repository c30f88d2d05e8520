//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Informational lines start with `INFO`.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urnlab::distributions::hypergeometric_sample;
use urnlab::ensemble::{EnsembleSummary, Prediction};
use urnlab::experiment::{run_config, ExperimentConfig, RunResult};
use urnlab::stats::chi_square_gof;
use urnlab::theory::{
    predict_from_moments, sigma_sq_longform_from_moments, variance_polynomial, LawMoments,
};
use urnlab::RandomStream;

struct Suite {
    failed: usize,
    total: usize,
}

impl Suite {
    fn report(&mut self, name: &str, pass: bool, detail: String) {
        self.total += 1;
        if !pass {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn info(name: &str, detail: String) {
    println!("INFO {name}: {detail}");
}

fn config(file: &str, overrides: &[&str]) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(file);
    let owned: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ExperimentConfig::load(&path, &owned).expect("reference config loads")
}

fn run(mut c: ExperimentConfig, out: &Path, threads: Option<usize>) -> RunResult {
    c.output.dir = out.to_path_buf();
    c.output.trajectories = false;
    let start = Instant::now();
    let r = run_config(&c, threads).expect("run completes");
    info(
        "runtime",
        format!(
            "{} replicates x {} steps in {:.1} s",
            c.replicates,
            c.horizon,
            start.elapsed().as_secs_f64()
        ),
    );
    r
}

fn num(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:.3e}")
    } else {
        format!("{x:.6}")
    }
}

fn outcome(s: &EnsembleSummary, name: &str) -> (bool, String) {
    match s.test(name) {
        Some(t) => (
            t.pass,
            format!(
                "{name} statistic {} threshold {}{}",
                num(t.statistic),
                num(t.threshold),
                t.p_value.map(|p| format!(" p {p:.4}")).unwrap_or_default()
            ),
        ),
        None => (false, format!("{name} missing from the summary")),
    }
}

fn opposite(r: &RunResult) -> &urnlab::TheoryPrediction {
    match &r.summary.prediction {
        Prediction::Opposite(p) => p,
        Prediction::EqualAddition(_) => panic!("opposite prediction expected"),
    }
}

fn slln_and_conditions(suite: &mut Suite, tmp: &Path) {
    let r = run(config("ref_model1.toml", &[]), &tmp.join("ref1"), None);
    let s = &r.summary.ensemble;
    let p = opposite(&r);
    let z = s.checkpoints.last().unwrap();

    let (pass, d) = outcome(s, "slln_z");
    suite.report(
        "SLLN-Z",
        pass,
        format!(
            "mean Z_N {:.7} vs z* {:.7}; {d} (SE units)",
            z.proportion.mean, p.z_star
        ),
    );
    let (pass, d) = outcome(s, "slln_t");
    suite.report(
        "SLLN-T",
        pass,
        format!(
            "mean T_N/N {:.5} vs {:.5}; {d}",
            z.total_rate.as_ref().unwrap().mean,
            p.tn_rate
        ),
    );
    let (pass, d) = outcome(s, "slln_w");
    suite.report(
        "SLLN-W",
        pass,
        format!(
            "mean W_N/N {:.5} vs {:.5}; {d}",
            z.white_rate.as_ref().unwrap().mean,
            p.wn_rate
        ),
    );

    for report in &s.conditions {
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.label.as_str())
            .collect();
        suite.report(
            &format!("Conditions {}", report.theorem),
            report.all_pass(),
            if failing.is_empty() {
                format!("all {} checks pass", report.checks.len())
            } else {
                format!("failing: {}", failing.join(", "))
            },
        );
        for c in &report.checks {
            info(
                &format!("{} ({})", report.theorem, c.label),
                format!(
                    "{:?} statistic {} threshold {}",
                    c.status,
                    num(c.statistic),
                    num(c.threshold)
                ),
            );
        }
    }
    let gain = s
        .conditions
        .iter()
        .find_map(|r| r.get("d").filter(|c| c.description.starts_with("Gamma")));
    match gain {
        Some(c) => suite.report(
            "Gamma median",
            (1.4..=1.6).contains(&c.statistic),
            format!("median Gamma_N {:.4} in [1.4, 1.6]", c.statistic),
        ),
        None => suite.report("Gamma median", false, "no gain check in the summary".into()),
    }
}

fn clt(suite: &mut Suite, tmp: &Path) {
    let c = config(
        "ref_model1.toml",
        &[
            "replicates=2000",
            "horizon=5000",
            "tests.enabled=[\"clt_z_ks\", \"clt_z_variance\", \"clt_w_variance\", \"clt_z_ks_full\", \"clt_z_variance_full\", \"clt_w_variance_full\"]",
        ],
    );
    let r = run(c, &tmp.join("clt"), None);
    let s = &r.summary.ensemble;
    let p = opposite(&r);
    let raw = |kind: &str| {
        s.clt
            .iter()
            .find(|c| c.kind == kind)
            .map(|c| c.raw.variance)
            .unwrap_or(f64::NAN)
    };

    let (ks, dk) = outcome(s, "clt_z_ks");
    let (var, dv) = outcome(s, "clt_z_variance");
    suite.report(
        "CLT-Z",
        ks && var,
        format!(
            "empirical variance {:.5} vs closed form {:.5}; {dk}; {dv}",
            raw("z"),
            p.clt_variance_z
        ),
    );
    let (pass, d) = outcome(s, "clt_w_variance");
    suite.report(
        "CLT-W",
        pass,
        format!(
            "empirical variance {:.5} vs closed form {:.5}; {d}",
            raw("w"),
            p.clt_variance_w
        ),
    );
    for name in [
        "clt_z_ks_full",
        "clt_z_variance_full",
        "clt_w_variance_full",
    ] {
        let (pass, d) = outcome(s, name);
        info(
            "variance with draw noise",
            format!(
                "{} {d} (targets z {:.5}, w {:.5})",
                if pass { "pass" } else { "fail" },
                p.clt_variance_z_full,
                p.clt_variance_w_full
            ),
        );
    }
}

fn oracle_identity(suite: &mut Suite) {
    let mut rng = ChaCha8Rng::seed_from_u64(20240603);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let mx = rng.random_range(0.5..10.0);
        let my = rng.random_range(0.5..10.0);
        let vx = rng.random_range(0.0..6.0);
        let vy = rng.random_range(0.0..6.0);
        let m = rng.random_range(1..8u64);
        let x = LawMoments {
            mean: mx,
            second_moment: mx * mx + vx,
        };
        let y = LawMoments {
            mean: my,
            second_moment: my * my + vy,
        };
        let z = predict_from_moments(m, x, y).unwrap().z_star;
        let long = sigma_sq_longform_from_moments(m, x, y).unwrap();
        let short = variance_polynomial(vx, vy, z) / (mx * my);
        worst = worst.max((long - short).abs());
    }
    suite.report(
        "Oracle identity",
        worst < 1e-10,
        format!("max |long form - P(z*)/(mu_X mu_Y)| over 100 tuples = {worst:.3e}"),
    );
}

fn choose(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn hypergeometric_exactness(suite: &mut Suite) {
    let cases: [(u64, u64, u64); 20] = [
        (1, 2, 1),
        (3, 7, 2),
        (5, 10, 4),
        (2, 9, 5),
        (7, 8, 3),
        (4, 12, 6),
        (10, 20, 5),
        (6, 15, 8),
        (1, 10, 9),
        (9, 10, 9),
        (12, 25, 10),
        (3, 30, 4),
        (20, 40, 12),
        (5, 6, 5),
        (8, 16, 8),
        (15, 18, 7),
        (2, 5, 3),
        (11, 50, 20),
        (25, 30, 6),
        (14, 28, 14),
    ];
    let mut s = RandomStream::from_seed(20240604);
    let mut worst = 1.0f64;
    let mut failing = Vec::new();
    for &(w, t, m) in &cases {
        let lo = m.saturating_sub(t - w);
        let hi = m.min(w);
        let denom = choose(t, m) as f64;
        let probs: Vec<f64> = (lo..=hi)
            .map(|k| (choose(w, k) * choose(t - w, m - k)) as f64 / denom)
            .collect();
        let mut counts = vec![0u64; probs.len()];
        for _ in 0..100_000 {
            counts[(hypergeometric_sample(w, t, m, &mut s).unwrap() - lo) as usize] += 1;
        }
        let p = if probs.len() == 1 {
            1.0
        } else {
            chi_square_gof(&counts, &probs).unwrap().p_value
        };
        worst = worst.min(p);
        if p <= 0.001 {
            failing.push(format!("({w},{t},{m}) p {p:.2e}"));
        }
    }
    suite.report(
        "Hypergeometric exactness",
        failing.is_empty(),
        if failing.is_empty() {
            format!("20 cases x 1e5 draws, smallest p {worst:.4} > 0.001")
        } else {
            failing.join("; ")
        },
    );
}

fn model2_clt(suite: &mut Suite, tmp: &Path) {
    let c = config(
        "ref_model2.toml",
        &[
            "replicates=2000",
            "horizon=2000",
            "tests.enabled=[\"clt_t_ks\"]",
        ],
    );
    let t0 = (c.initial_white + c.initial_black) as f64;
    let r = run(c, &tmp.join("m2clt"), None);
    let n = 2000.0f64;
    let mean = t0 + 2.0 * 0.5 * n * (n + 1.0) / 2.0;
    let var = 4.0 * 0.25 * n * (n + 1.0) / 2.0;
    let exact = match &r.summary.prediction {
        Prediction::EqualAddition(p) => {
            (p.mean_tn - mean).abs() < 1e-9 * mean && (p.var_tn - var).abs() < 1e-9 * var
        }
        Prediction::Opposite(_) => false,
    };
    let (pass, d) = outcome(&r.summary.ensemble, "clt_t_ks");
    suite.report(
        "Model-2 Lindeberg CLT",
        pass && exact,
        format!("E[T_N] {mean} Var[T_N] {var} match the closed form: {exact}; {d}"),
    );
}

fn model2_as(suite: &mut Suite, tmp: &Path) {
    let c = config(
        "ref_model2.toml",
        &[
            "replicates=200",
            "tests.lambda=0.25",
            "tests.enabled=[\"scaled_total_decay\", \"proportion_cauchy_tail\", \"decomposition\"]",
        ],
    );
    let r = run(c, &tmp.join("m2as"), None);
    let s = &r.summary.ensemble;
    let mut pass = true;
    let mut parts = Vec::new();
    for name in [
        "scaled_total_decay",
        "proportion_cauchy_tail",
        "decomposition",
    ] {
        let (p, d) = outcome(s, name);
        pass &= p;
        parts.push(d);
    }
    suite.report("Model-2 a.s. results", pass, parts.join("; "));
}

fn determinism(suite: &mut Suite, tmp: &Path) {
    let c = config("ref_model1.toml", &[]);
    let a = run(c.clone(), &tmp.join("t1"), Some(1));
    let b = run(c, &tmp.join("t8"), Some(8));
    let fa = fs::read(a.out_dir.join("summary.json")).unwrap();
    let fb = fs::read(b.out_dir.join("summary.json")).unwrap();
    suite.report(
        "Determinism",
        fa == fb,
        format!(
            "summary.json with 1 and 8 threads: {} vs {} bytes, identical: {}",
            fa.len(),
            fb.len(),
            fa == fb
        ),
    );
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut suite = Suite {
        failed: 0,
        total: 0,
    };
    slln_and_conditions(&mut suite, tmp.path());
    clt(&mut suite, tmp.path());
    oracle_identity(&mut suite);
    hypergeometric_exactness(&mut suite);
    model2_clt(&mut suite, tmp.path());
    model2_as(&mut suite, tmp.path());
    determinism(&mut suite, tmp.path());
    println!(
        "{} of {} criteria pass",
        suite.total - suite.failed,
        suite.total
    );
    if suite.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
