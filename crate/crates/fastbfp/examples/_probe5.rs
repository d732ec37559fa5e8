use fastbfp::train::*;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args[1].parse().unwrap();
    let lr: f32 = args[2].parse().unwrap();
    let batch: usize = args[3].parse().unwrap();
    let t0 = std::time::Instant::now();
    for seed in [1u64, 2] {
        let mk = |s: Schedule| {
            let mut c = TrainConfig::digits_cnn(s, seed);
            c.iterations = iters; c.learning_rate = lr; c.batch_size = batch;
            c.task = Task::Digits { train: 600, val: 300 };
            c
        };
        let fp32 = run_experiment(&mk(Schedule::Fp32)).unwrap();
        let f4 = run_experiment(&mk(Schedule::FixedBfp { m: 4 })).unwrap();
        println!("seed {seed}: fp32={:.3} f4={:.3} gap={:.1}pp", fp32.final_accuracy, f4.final_accuracy,
                 (fp32.final_accuracy - f4.final_accuracy) * 100.0);
    }
    println!("elapsed {:?}", t0.elapsed());
}
