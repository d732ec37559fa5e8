use fastbfp::train::*;
use fastbfp::bfp::RoundingMode;

fn main() {
    let iters: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(400);
    let alpha: f64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(0.6);
    let beta: f64 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(0.3);
    let mut sums = [0f64; 9];
    for seed in [1u64, 2, 3] {
        let t0 = std::time::Instant::now();
        let mk = |s: Schedule| { let mut c = TrainConfig::two_moons_mlp(s, seed); c.iterations = iters; c };
        let fp32 = run_experiment(&mk(Schedule::Fp32)).unwrap();
        let f4 = run_experiment(&mk(Schedule::FixedBfp { m: 4 })).unwrap();
        let f2 = run_experiment(&mk(Schedule::FixedBfp { m: 2 })).unwrap();
        let mut c = mk(Schedule::FixedBfp { m: 2 }); c.gradient_rounding = RoundingMode::Truncate;
        let f2t = run_experiment(&c).unwrap();
        let tl = run_experiment(&mk(Schedule::TemporalLowToHigh { m_low: 2 })).unwrap();
        let th = run_experiment(&mk(Schedule::TemporalHighToLow { m_low: 2 })).unwrap();
        let ll = run_experiment(&mk(Schedule::LayerwiseLowToHigh { m_low: 2 })).unwrap();
        let lh = run_experiment(&mk(Schedule::LayerwiseHighToLow { m_low: 2 })).unwrap();
        let fa = run_experiment(&mk(Schedule::FastAdaptive { alpha, beta })).unwrap();
        let accs = [fp32.final_accuracy, f4.final_accuracy, f2.final_accuracy, f2t.final_accuracy,
                    tl.final_accuracy, th.final_accuracy, ll.final_accuracy, lh.final_accuracy, fa.final_accuracy];
        for (s, a) in sums.iter_mut().zip(&accs) { *s += a / 3.0; }
        println!("seed {seed}: fp32={:.3} f4={:.3} f2sr={:.3} f2tr={:.3} T-l2h={:.3} T-h2l={:.3} L-l2h={:.3} L-h2l={:.3} fast={:.3} ({:.1?})",
            accs[0], accs[1], accs[2], accs[3], accs[4], accs[5], accs[6], accs[7], accs[8], t0.elapsed());
        println!("   fast gap={:.1}pp passes ratio={:.3} m4frac={:.2}",
            (fp32.final_accuracy - fa.final_accuracy) * 100.0,
            fa.cost.passes as f64 / f4.cost.passes as f64,
            fa.trace.entries().iter().filter(|e| e.chosen_m == 4).count() as f64 / fa.trace.len() as f64);
    }
    println!("MEANS: fp32={:.3} f4={:.3} f2sr={:.3} f2tr={:.3} T-l2h={:.3} T-h2l={:.3} L-l2h={:.3} L-h2l={:.3} fast={:.3}",
        sums[0], sums[1], sums[2], sums[3], sums[4], sums[5], sums[6], sums[7], sums[8]);
}
