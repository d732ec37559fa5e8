use fastbfp::train::*;
use fastbfp::bfp::RoundingMode;

fn main() {
    let iters: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(150);
    let t0 = std::time::Instant::now();
    let mk = |s: Schedule, seed: u64| { let mut c = TrainConfig::digits_cnn(s, seed); c.iterations = iters; c };
    let mut means = std::collections::BTreeMap::new();
    for seed in [1u64, 2, 3] {
        let runs: Vec<(&str, RunRecord)> = vec![
            ("fp32", run_experiment(&mk(Schedule::Fp32, seed)).unwrap()),
            ("f4", run_experiment(&mk(Schedule::FixedBfp { m: 4 }, seed)).unwrap()),
            ("f2sr", run_experiment(&mk(Schedule::FixedBfp { m: 2 }, seed)).unwrap()),
            ("f2tr", { let mut c = mk(Schedule::FixedBfp { m: 2 }, seed); c.gradient_rounding = RoundingMode::Truncate; run_experiment(&c).unwrap() }),
            ("T-l2h", run_experiment(&mk(Schedule::TemporalLowToHigh { m_low: 2 }, seed)).unwrap()),
            ("T-h2l", run_experiment(&mk(Schedule::TemporalHighToLow { m_low: 2 }, seed)).unwrap()),
            ("L-l2h", run_experiment(&mk(Schedule::LayerwiseLowToHigh { m_low: 2 }, seed)).unwrap()),
            ("L-h2l", run_experiment(&mk(Schedule::LayerwiseHighToLow { m_low: 2 }, seed)).unwrap()),
            ("L-l2h4", run_experiment(&mk(Schedule::LayerwiseLowToHigh { m_low: 4 }, seed)).unwrap()),
            ("L-h2l4", run_experiment(&mk(Schedule::LayerwiseHighToLow { m_low: 4 }, seed)).unwrap()),
        ];
        let line: Vec<String> = runs.iter().map(|(n, r)| format!("{n}={:.3}", r.final_accuracy)).collect();
        println!("seed {seed}: {}", line.join(" "));
        for (n, r) in &runs { *means.entry(n.to_string()).or_insert(0.0) += r.final_accuracy / 3.0; }
    }
    println!("MEANS: {:?}", means);
    println!("elapsed {:?}", t0.elapsed());
}
