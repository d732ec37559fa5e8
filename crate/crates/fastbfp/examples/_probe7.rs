use fastbfp::train::*;

fn quintile_fracs(rec: &RunRecord, total_iters: usize, layers: usize) -> (Vec<Vec<f64>>, Vec<f64>, bool) {
    let bucket = total_iters / 5;
    let mut per_layer_quintile = vec![vec![0.0; 5]; layers];
    let mut per_layer = vec![0.0; layers];
    for l in 1..=layers {
        for q in 0..5 {
            let (lo, hi) = (q * bucket + 1, if q == 4 { total_iters + 1 } else { (q + 1) * bucket + 1 });
            let es: Vec<_> = rec.trace.entries().iter().filter(|e| e.layer == l && e.iteration >= lo && e.iteration < hi).collect();
            per_layer_quintile[l - 1][q] = es.iter().filter(|e| e.chosen_m == 4).count() as f64 / es.len().max(1) as f64;
        }
        let es: Vec<_> = rec.trace.entries().iter().filter(|e| e.layer == l).collect();
        per_layer[l - 1] = es.iter().filter(|e| e.chosen_m == 4).count() as f64 / es.len().max(1) as f64;
    }
    let mut mono = true;
    for l in 0..layers {
        for q in 1..5 {
            if per_layer_quintile[l][q] + 1e-12 < per_layer_quintile[l][q - 1] { mono = false; }
        }
    }
    for l in 1..layers {
        if per_layer[l] + 1e-12 < per_layer[l - 1] { mono = false; }
    }
    (per_layer_quintile, per_layer, mono)
}

fn main() {
    for (alpha, beta) in [(0.9, 0.6), (1.0, 0.7), (1.1, 0.8)] {
        let (mut gap, mut ratio) = (0.0, 0.0);
        let mut all_mono = true;
        for seed in [1u64, 2, 3] {
            let mk = |s: Schedule| TrainConfig::two_moons_mlp(s, seed);
            let fp32 = run_experiment(&mk(Schedule::Fp32)).unwrap();
            let f4 = run_experiment(&mk(Schedule::FixedBfp { m: 4 })).unwrap();
            let fa = run_experiment(&mk(Schedule::FastAdaptive { alpha, beta })).unwrap();
            gap += (fp32.final_accuracy - fa.final_accuracy) * 100.0 / 3.0;
            ratio += (fa.cost.passes as f64 / f4.cost.passes as f64) / 3.0;
            let (plq, pl, mono) = quintile_fracs(&fa, 400, 4);
            if !mono { all_mono = false; }
            if seed == 1 {
                println!("  a={alpha} seed1 per-layer m4: {:?}", pl.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
                for (l, row) in plq.iter().enumerate() {
                    println!("    layer {} quintiles: {:?}", l + 1, row.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>());
                }
            }
        }
        println!("a={alpha} b={beta}: gap={gap:.2}pp ratio={ratio:.3} monotone={all_mono}");
    }
}
