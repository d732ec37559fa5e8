//! Bundled desk-scale datasets, generated deterministically from a seed:
//! a two-moons classification task for the MLP and a synthetic 8x8 digit
//! set for the CNN. No files, no downloads.

use crate::tensor::Tensor;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A labelled dataset: features `[n, dim]`, one class id per row.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Rows `indices` as a batch matrix plus labels.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let dim = self.dim();
        let mut data = Vec::with_capacity(indices.len() * dim);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            data.extend_from_slice(&self.x.data()[i * dim..(i + 1) * dim]);
            labels.push(self.labels[i]);
        }
        (
            Tensor::matrix(indices.len(), dim, data).unwrap(),
            labels,
        )
    }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Box-Muller standard normal.
fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = uniform(rng).max(1e-12);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Two interleaved half-circles with Gaussian jitter; 2 classes.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % 2;
        let t = uniform(&mut rng) * std::f64::consts::PI;
        let (mut px, mut py) = if class == 0 {
            (t.cos(), t.sin())
        } else {
            (1.0 - t.cos(), 0.5 - t.sin())
        };
        px += gaussian(&mut rng) * noise;
        py += gaussian(&mut rng) * noise;
        data.push(px as f32);
        data.push(py as f32);
        labels.push(class);
    }
    Dataset {
        x: Tensor::matrix(n, 2, data).unwrap(),
        labels,
        classes: 2,
    }
}

/// Number of lifted features produced by [`two_moons_lifted`].
pub const MOON_FEATURES: usize = 16;

/// Two moons lifted through fixed random Fourier features
/// `cos(w_i . x + b_i)`, so the input layer sees full-width groups instead
/// of a 2-wide reduction axis. The projection derives from
/// `projection_seed` alone; train and validation splits must share it.
pub fn two_moons_lifted(n: usize, noise: f64, seed: u64, projection_seed: u64) -> Dataset {
    let base = two_moons(n, noise, seed);
    let mut prng = ChaCha8Rng::seed_from_u64(projection_seed ^ 0x726666);
    let mut w = [[0f64; 2]; MOON_FEATURES];
    let mut b = [0f64; MOON_FEATURES];
    for i in 0..MOON_FEATURES {
        w[i][0] = gaussian(&mut prng) * 2.0;
        w[i][1] = gaussian(&mut prng) * 2.0;
        b[i] = uniform(&mut prng) * std::f64::consts::TAU;
    }
    let mut data = Vec::with_capacity(n * MOON_FEATURES);
    for r in 0..n {
        let (px, py) = (base.x.get(r, 0) as f64, base.x.get(r, 1) as f64);
        for i in 0..MOON_FEATURES {
            data.push((w[i][0] * px + w[i][1] * py + b[i]).cos() as f32);
        }
    }
    Dataset {
        x: Tensor::matrix(n, MOON_FEATURES, data).unwrap(),
        labels: base.labels,
        classes: 2,
    }
}

/// 8x8 glyph templates for digits 0-9 (1 = ink).
const GLYPHS: [[u8; 8]; 10] = [
    [0b00111100, 0b01000010, 0b01000110, 0b01001010, 0b01010010, 0b01100010, 0b01000010, 0b00111100], // 0
    [0b00011000, 0b00101000, 0b00001000, 0b00001000, 0b00001000, 0b00001000, 0b00001000, 0b00111110], // 1
    [0b00111100, 0b01000010, 0b00000010, 0b00001100, 0b00110000, 0b01000000, 0b01000000, 0b01111110], // 2
    [0b00111100, 0b01000010, 0b00000010, 0b00011100, 0b00000010, 0b00000010, 0b01000010, 0b00111100], // 3
    [0b00000100, 0b00001100, 0b00010100, 0b00100100, 0b01000100, 0b01111110, 0b00000100, 0b00000100], // 4
    [0b01111110, 0b01000000, 0b01000000, 0b01111100, 0b00000010, 0b00000010, 0b01000010, 0b00111100], // 5
    [0b00111100, 0b01000000, 0b01000000, 0b01111100, 0b01000010, 0b01000010, 0b01000010, 0b00111100], // 6
    [0b01111110, 0b00000010, 0b00000100, 0b00001000, 0b00010000, 0b00100000, 0b00100000, 0b00100000], // 7
    [0b00111100, 0b01000010, 0b01000010, 0b00111100, 0b01000010, 0b01000010, 0b01000010, 0b00111100], // 8
    [0b00111100, 0b01000010, 0b01000010, 0b00111110, 0b00000010, 0b00000010, 0b00000010, 0b00111100], // 9
];

/// Jittered renderings of the digit glyphs: random +/-1 pixel shift, ink
/// intensity wobble, and additive pixel noise. Mean-centered.
pub fn digits(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * 64);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let digit = i % 10;
        let glyph = &GLYPHS[digit];
        let dx = (rng.next_u64() % 3) as i32 - 1;
        let dy = (rng.next_u64() % 3) as i32 - 1;
        let intensity = 0.8 + 0.4 * uniform(&mut rng) as f32;
        for r in 0..8i32 {
            for c in 0..8i32 {
                let (sr, sc) = (r - dy, c - dx);
                let ink = if (0..8).contains(&sr) && (0..8).contains(&sc) {
                    (glyph[sr as usize] >> (7 - sc)) & 1
                } else {
                    0
                };
                let noise = gaussian(&mut rng) as f32 * 0.08;
                data.push(ink as f32 * intensity + noise - 0.5);
            }
        }
        labels.push(digit);
    }
    Dataset {
        x: Tensor::matrix(n, 64, data).unwrap(),
        labels,
        classes: 10,
    }
}

/// A seeded shuffled batching plan over `n` samples.
pub struct BatchPlan {
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchPlan {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Self {
        let mut plan = BatchPlan {
            order: (0..n).collect(),
            batch_size,
            cursor: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        plan.reshuffle();
        plan
    }

    fn reshuffle(&mut self) {
        // Fisher-Yates with the plan's own rng
        for i in (1..self.order.len()).rev() {
            let j = (self.rng.next_u64() % (i as u64 + 1)) as usize;
            self.order.swap(i, j);
        }
        self.cursor = 0;
    }

    /// Next batch of indices, reshuffling at epoch boundaries.
    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.cursor + self.batch_size > self.order.len() {
            self.reshuffle();
        }
        let out = self.order[self.cursor..self.cursor + self.batch_size].to_vec();
        self.cursor += self.batch_size;
        out
    }
}
