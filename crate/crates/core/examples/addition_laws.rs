//! The supported addition laws, their moments and a quick sampling check.

use urnlab::{AdditionLaw, RandomStream};

fn main() {
    let laws = [
        AdditionLaw::constant(3),
        AdditionLaw::uniform(1, 3).unwrap(),
        AdditionLaw::shifted_bernoulli(1, 4, 0.25).unwrap(),
        AdditionLaw::binomial(10, 0.3).unwrap(),
        AdditionLaw::truncated_poisson(2.5, 1).unwrap(),
    ];
    let mut stream = RandomStream::from_seed(7);
    let n = 200_000;
    println!(
        "{:<36} {:>8} {:>8} {:>5} {:>10} {:>10}",
        "law", "mean", "var", "L", "emp mean", "emp var"
    );
    for law in &laws {
        let xs: Vec<f64> = (0..n).map(|_| law.sample(&mut stream) as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        println!(
            "{:<36} {:>8.4} {:>8.4} {:>5} {:>10.4} {:>10.4}",
            law.to_string(),
            law.mean(),
            law.variance(),
            law.lower_bound(),
            mean,
            var
        );
    }

    // laws deserialize from the same tables used in experiment files
    let law: AdditionLaw = toml::from_str("family = \"uniform\"\nlow = 2\nhigh = 6").unwrap();
    println!(
        "from TOML: {law} (mean {}, variance {})",
        law.mean(),
        law.variance()
    );
}
