use fastbfp::train::*;

fn stats(rec: &RunRecord, total_iters: usize, layers: usize) -> (Vec<f64>, bool, bool) {
    let bucket = total_iters / 5;
    let mut per_layer = vec![0.0; layers];
    let mut q_mono = true;
    for l in 1..=layers {
        let mut prev = -1.0;
        for q in 0..5 {
            let (lo, hi) = (q * bucket + 1, if q == 4 { total_iters + 1 } else { (q + 1) * bucket + 1 });
            let es: Vec<_> = rec.trace.entries().iter().filter(|e| e.layer == l && e.iteration >= lo && e.iteration < hi).collect();
            let f = es.iter().filter(|e| e.chosen_m == 4).count() as f64 / es.len().max(1) as f64;
            if f + 1e-12 < prev { q_mono = false; }
            prev = f;
        }
        let es: Vec<_> = rec.trace.entries().iter().filter(|e| e.layer == l).collect();
        per_layer[l - 1] = es.iter().filter(|e| e.chosen_m == 4).count() as f64 / es.len().max(1) as f64;
    }
    let l_mono = per_layer.windows(2).all(|w| w[1] + 1e-12 >= w[0]);
    (per_layer, q_mono, l_mono)
}

fn main() {
    for (label, alpha, beta) in [("m13b10", 1.3, 1.0), ("m12b09", 1.2, 0.9), ("m10b07", 1.0, 0.7)] {
        let (mut gap, mut ratio) = (0.0, 0.0);
        let (mut qok, mut lok) = (true, true);
        let mut fr = vec![];
        for seed in [1u64, 2, 3] {
            let mk = |s: Schedule| TrainConfig::two_moons_mlp(s, seed);
            let fp32 = run_experiment(&mk(Schedule::Fp32)).unwrap();
            let f4 = run_experiment(&mk(Schedule::FixedBfp { m: 4 })).unwrap();
            let fa = run_experiment(&mk(Schedule::FastAdaptive { alpha, beta })).unwrap();
            gap += (fp32.final_accuracy - fa.final_accuracy) * 100.0 / 3.0;
            ratio += (fa.cost.passes as f64 / f4.cost.passes as f64) / 3.0;
            let (pl, q, lmono) = stats(&fa, 400, 4);
            qok &= q; lok &= lmono;
            fr.push(pl.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(","));
        }
        println!("{label} a={alpha} b={beta}: gap={gap:.2}pp ratio={ratio:.3} qmono={qok} lmono={lok} fracs=[{}]", fr.join(" | "));
    }
}
