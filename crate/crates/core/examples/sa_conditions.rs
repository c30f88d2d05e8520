//! Check the hypotheses of the Robbins–Monro and Renlund theorems along an
//! ensemble of reference paths.

use urnlab::diagnostics::{
    check_renlund_conditions, check_robbins_monro_conditions, ConditionReport,
};
use urnlab::ensemble::{run_ensemble, EnsembleSpec};
use urnlab::{predict_model1, AdditionLaw, UrnConfig, Variant};

fn show(report: &ConditionReport) {
    println!("{}:", report.theorem);
    for c in &report.checks {
        println!(
            "  ({}) {:<58} {:?}  statistic {:.4e} vs {:.4e}",
            c.label, c.description, c.status, c.statistic, c.threshold
        );
    }
}

fn main() {
    let x = AdditionLaw::uniform(1, 3).unwrap();
    let y = AdditionLaw::uniform(2, 6).unwrap();
    let p = predict_model1(2, &x, &y).unwrap();
    let config = UrnConfig::new(
        2,
        5,
        5,
        Variant::Opposite {
            law_x: x.clone(),
            law_y: y.clone(),
        },
        10_000,
    )
    .unwrap();
    let mut spec = EnsembleSpec::new(config, 300, 17);
    spec.diagnostics = true;
    let traces: Vec<_> = run_ensemble(&spec)
        .unwrap()
        .into_iter()
        .map(|o| o.opposite.unwrap())
        .collect();

    show(&check_robbins_monro_conditions(&p, &x, &y, &traces));
    let renlund = check_renlund_conditions(&p, 1, &traces).unwrap();
    show(&renlund);
    let c = renlund.get("c").unwrap();
    println!(
        "E[V^2] limit {:.4}; closed-form sigma^2 {:.4}, with draw noise {:.4}",
        c.values["limit_estimate"], p.sigma_sq, p.sigma_sq_full
    );
}
