use fastbfp::train::*;

fn main() {
    let t0 = std::time::Instant::now();
    // CNN layerwise + temporal at converged settings
    for m_low in [2u32, 4] {
        let (mut sl, mut sh, mut tl, mut th) = (0.0, 0.0, 0.0, 0.0);
        for seed in [1u64, 2, 3] {
            let mk = |s: Schedule| {
                let mut c = TrainConfig::digits_cnn(s, seed);
                c.iterations = 400; c.learning_rate = 0.15; c.batch_size = 32;
                c.task = Task::Digits { train: 600, val: 300 };
                c
            };
            sl += run_experiment(&mk(Schedule::LayerwiseLowToHigh { m_low })).unwrap().final_accuracy / 3.0;
            sh += run_experiment(&mk(Schedule::LayerwiseHighToLow { m_low })).unwrap().final_accuracy / 3.0;
            tl += run_experiment(&mk(Schedule::TemporalLowToHigh { m_low })).unwrap().final_accuracy / 3.0;
            th += run_experiment(&mk(Schedule::TemporalHighToLow { m_low })).unwrap().final_accuracy / 3.0;
        }
        println!("CNN m_low={m_low}: L-l2h={sl:.3} L-h2l={sh:.3} {} | T-l2h={tl:.3} T-h2l={th:.3} {}",
                 if sl >= sh { "OK" } else { "INVERTED" }, if tl >= th { "OK" } else { "INVERTED" });
    }
    println!("cnn probes took {:?}", t0.elapsed());
    // moons fast calibration
    for (alpha, beta) in [(0.6, 0.3), (0.8, 0.5), (0.85, 0.55), (0.9, 0.6)] {
        let (mut gap, mut ratio, mut acc) = (0.0, 0.0, 0.0);
        for seed in [1u64, 2, 3] {
            let mk = |s: Schedule| { TrainConfig::two_moons_mlp(s, seed) };
            let fp32 = run_experiment(&mk(Schedule::Fp32)).unwrap();
            let f4 = run_experiment(&mk(Schedule::FixedBfp { m: 4 })).unwrap();
            let fa = run_experiment(&mk(Schedule::FastAdaptive { alpha, beta })).unwrap();
            gap += (fp32.final_accuracy - fa.final_accuracy) * 100.0 / 3.0;
            ratio += (fa.cost.passes as f64 / f4.cost.passes as f64) / 3.0;
            acc += fa.final_accuracy / 3.0;
        }
        println!("moons fast a={alpha} b={beta}: acc={acc:.3} gap={gap:.2}pp ratio={ratio:.3}");
    }
    println!("total {:?}", t0.elapsed());
}
