use fastbfp::train::*;

fn main() {
    let mut cfg = TrainConfig::two_moons_mlp(Schedule::FastAdaptive { alpha: 0.6, beta: 0.3 }, 1);
    cfg.task = Task::Digits { train: 500, val: 300 };
    cfg.model = ModelKind::Mlp { dims: vec![64, 32, 32, 32, 10] };
    cfg.learning_rate = 0.1;
    cfg.iterations = 400;
    let rec = run_experiment(&cfg).unwrap();
    // mean r by kind x layer over first and last quarter of training
    for phase in [(1usize, 100usize), (300, 400)] {
        println!("iterations {}..{}", phase.0, phase.1);
        for kind in ["W", "A", "G"] {
            let mut line = format!("  r({kind}): ");
            for l in 1..=4 {
                let vals: Vec<f64> = rec.trace.entries().iter()
                    .filter(|e| e.kind.short() == kind && e.layer == l && e.iteration >= phase.0 && e.iteration < phase.1)
                    .map(|e| e.r).collect();
                let mean = vals.iter().sum::<f64>() / vals.len().max(1) as f64;
                line.push_str(&format!("l{l}={mean:.3} "));
            }
            println!("{line}");
        }
    }
    // m4 fraction per quintile per layer
    for l in 1..=4 {
        let mut line = format!("layer {l} m4 frac by quintile: ");
        for q in 0..5 {
            let (lo, hi) = (q * 80 + 1, (q + 1) * 80 + 1);
            let es: Vec<_> = rec.trace.entries().iter().filter(|e| e.layer == l && e.iteration >= lo && e.iteration < hi).collect();
            let f = es.iter().filter(|e| e.chosen_m == 4).count() as f64 / es.len() as f64;
            line.push_str(&format!("{f:.2} "));
        }
        println!("{line}");
    }
}
