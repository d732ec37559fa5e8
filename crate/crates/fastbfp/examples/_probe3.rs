use fastbfp::train::*;
use fastbfp::bfp::RoundingMode;

fn cfgbase(s: Schedule, seed: u64, iters: usize, dims: Vec<usize>) -> TrainConfig {
    let mut c = TrainConfig::two_moons_mlp(s, seed);
    c.task = Task::Digits { train: 500, val: 300 };
    c.model = ModelKind::Mlp { dims };
    c.learning_rate = 0.1;
    c.iterations = iters;
    c
}

fn main() {
    let iters = 600;
    for dims in [vec![64, 32, 32, 32, 10], vec![64, 32, 32, 32, 32, 32, 10]] {
        println!("== dims {:?}", dims);
        for m_low in [2u32, 4] {
            let (mut sl, mut sh) = (0.0, 0.0);
            for seed in [1u64, 2, 3] {
                let ll = run_experiment(&cfgbase(Schedule::LayerwiseLowToHigh { m_low }, seed, iters, dims.clone())).unwrap();
                let lh = run_experiment(&cfgbase(Schedule::LayerwiseHighToLow { m_low }, seed, iters, dims.clone())).unwrap();
                sl += ll.final_accuracy / 3.0; sh += lh.final_accuracy / 3.0;
            }
            println!("  m_low={m_low}: L-l2h mean={sl:.3} L-h2l mean={sh:.3}  {}", if sl >= sh { "OK" } else { "INVERTED" });
        }
        // fp32 vs f4 gap and fast variants
        let (mut sf, mut s4) = (0.0, 0.0);
        for seed in [1u64, 2, 3] {
            sf += run_experiment(&cfgbase(Schedule::Fp32, seed, iters, dims.clone())).unwrap().final_accuracy / 3.0;
            s4 += run_experiment(&cfgbase(Schedule::FixedBfp { m: 4 }, seed, iters, dims.clone())).unwrap().final_accuracy / 3.0;
        }
        println!("  fp32 mean={sf:.3} f4 mean={s4:.3} gap={:.1}pp", (sf - s4) * 100.0);
        for (alpha, beta) in [(0.6, 0.3), (0.9, 0.42), (1.1, 0.52)] {
            let (mut sfa, mut ratio) = (0.0, 0.0);
            for seed in [1u64, 2, 3] {
                let fa = run_experiment(&cfgbase(Schedule::FastAdaptive { alpha, beta }, seed, iters, dims.clone())).unwrap();
                let f4 = run_experiment(&cfgbase(Schedule::FixedBfp { m: 4 }, seed, iters, dims.clone())).unwrap();
                sfa += fa.final_accuracy / 3.0;
                ratio += (fa.cost.passes as f64 / f4.cost.passes as f64) / 3.0;
            }
            println!("  fast a={alpha} b={beta}: mean acc={sfa:.3} gap={:.1}pp ratio={ratio:.3}", (sf - sfa) * 100.0);
        }
    }
}
