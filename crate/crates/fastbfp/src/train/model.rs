//! Desk-scale models whose every matrix product runs through the systolic
//! simulator under a per-layer precision setting. Nonlinearities, biases,
//! pooling, and the loss stay in f32, mirroring the cost model's scope.

use crate::bfp::{quantize_tensor, NoiseSource, RoundingMode};
use crate::error::Result;
use crate::precision::PrecisionSetting;
use crate::systolic::{CostReport, Simulator, SystolicJob};
use crate::tensor::Tensor;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Precision of one layer at one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerPrecision {
    Fp32,
    Bfp(PrecisionSetting),
}

/// Where master weights live between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightStorage {
    /// Full-precision master copy, quantized on every use.
    Fp32Master,
    /// Weights requantized to 4-bit BFP right after each update; narrower
    /// views discard the low chunk at read time.
    BfpStored,
}

/// Cumulative cost counters for a run. FP32-path jobs report cycles and
/// traffic only; passes, conversions, and energy are BFP work metrics.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct CostTotals {
    pub dp_ops: u64,
    pub passes: u64,
    pub cycles: u64,
    pub converter_groups: u64,
    pub sram_bits: u64,
    pub energy_j: f64,
}

impl CostTotals {
    pub fn add_report(&mut self, r: &CostReport) {
        self.dp_ops += r.dp_ops;
        self.passes += r.passes;
        self.cycles += r.cycles;
        self.converter_groups += r.converter_groups;
        self.sram_bits += r.sram_bits;
        self.energy_j += r.energy_j;
    }
}

/// Executes the three matrix products of a layer under a precision choice,
/// accumulating cost. Gradient quantization uses per-(iteration, layer,
/// consumer) noise streams so runs are reproducible.
pub struct Engine<'a> {
    pub sim: &'a Simulator,
    pub seed: u64,
    pub gradient_rounding: RoundingMode,
    pub group_size: usize,
    pub totals: CostTotals,
}

impl<'a> Engine<'a> {
    pub fn new(sim: &'a Simulator, seed: u64, gradient_rounding: RoundingMode, g: usize) -> Self {
        Engine {
            sim,
            seed,
            gradient_rounding,
            group_size: g,
            totals: CostTotals::default(),
        }
    }

    fn grad_noise(&self, iteration: usize, layer: usize, consumer: u64) -> NoiseSource {
        let stream = ((iteration as u64) << 20) | ((layer as u64) << 4) | consumer;
        NoiseSource::with_stream(self.seed, stream)
    }

    /// `out = a x w` (`[M,K] x [K,N]`).
    pub fn forward_matmul(
        &mut self,
        a: &Tensor,
        w: &Tensor,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        match prec {
            LayerPrecision::Fp32 => {
                self.fp32_job_cost(a.rows(), a.cols(), w.cols());
                Ok(matmul_f32(a, w))
            }
            LayerPrecision::Bfp(s) => {
                let quiet = NoiseSource::new(0);
                let aq = quantize_tensor(a, 1, self.group_size, s.m_a, RoundingMode::Truncate, &quiet)?;
                let wq = quantize_tensor(w, 0, self.group_size, s.m_w, RoundingMode::Truncate, &quiet)?;
                let _ = (iteration, layer);
                let (out, report) = self.sim.run(&SystolicJob::forward(&aq, &wq)?)?;
                self.totals.add_report(&report);
                Ok(out)
            }
        }
    }

    /// `grad_a = dz x w^T` (`[M,N] x [K,N]^T`), transposition-free.
    pub fn grad_a_matmul(
        &mut self,
        dz: &Tensor,
        w: &Tensor,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        match prec {
            LayerPrecision::Fp32 => {
                self.fp32_job_cost(dz.rows(), dz.cols(), w.rows());
                Ok(matmul_f32_bt(dz, w))
            }
            LayerPrecision::Bfp(s) => {
                let quiet = NoiseSource::new(0);
                let noise = self.grad_noise(iteration, layer, 0);
                let dzq = quantize_tensor(dz, 1, self.group_size, s.m_g, self.gradient_rounding, &noise)?;
                let wq = quantize_tensor(w, 1, self.group_size, s.m_w, RoundingMode::Truncate, &quiet)?;
                let (out, report) = self.sim.run(&SystolicJob::grad_activations(&dzq, &wq)?)?;
                self.totals.add_report(&report);
                Ok(out)
            }
        }
    }

    /// `grad_w = a^T x dz` (`[M,K]^T x [M,N]`), accumulation stationary.
    pub fn grad_w_matmul(
        &mut self,
        a: &Tensor,
        dz: &Tensor,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        match prec {
            LayerPrecision::Fp32 => {
                self.fp32_job_cost(a.rows(), a.cols(), dz.cols());
                Ok(matmul_f32_at(a, dz))
            }
            LayerPrecision::Bfp(s) => {
                let quiet = NoiseSource::new(0);
                let noise = self.grad_noise(iteration, layer, 1);
                let aq = quantize_tensor(a, 0, self.group_size, s.m_a, RoundingMode::Truncate, &quiet)?;
                let dzq = quantize_tensor(dz, 0, self.group_size, s.m_g, self.gradient_rounding, &noise)?;
                let (out, report) = self.sim.run(&SystolicJob::grad_weights(&aq, &dzq)?)?;
                self.totals.add_report(&report);
                Ok(out)
            }
        }
    }

    /// Cycle/traffic estimate for an FP32 matrix product on an equivalent
    /// scalar array; no passes or conversions are charged.
    fn fp32_job_cost(&mut self, m: usize, k: usize, n: usize) {
        if m == 0 || k == 0 || n == 0 {
            return;
        }
        let cfg = &self.sim.cfg;
        let params = &self.sim.params;
        let row_tiles = k.div_ceil(cfg.rows) as u64;
        let col_tiles = n.div_ceil(cfg.cols) as u64;
        let per_tile = params.fill_cycles(cfg) + m as u64 + params.drain_cycles(cfg);
        self.totals.cycles += row_tiles * col_tiles * per_tile;
        self.totals.sram_bits += 32
            * (k as u64 * n as u64
                + row_tiles * col_tiles * (m as u64 * k as u64)
                + m as u64 * n as u64);
    }
}

/// Plain f32 matmul, ascending-k fold per output element.
pub fn matmul_f32(a: &Tensor, w: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), w.cols());
    debug_assert_eq!(k, w.rows());
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0f32;
            for kk in 0..k {
                acc += a.get(i, kk) * w.get(kk, j);
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// `dz x w^T` by direct indexing.
pub fn matmul_f32_bt(dz: &Tensor, w: &Tensor) -> Tensor {
    let (m, n, k) = (dz.rows(), dz.cols(), w.rows());
    debug_assert_eq!(n, w.cols());
    let mut out = Tensor::zeros(&[m, k]);
    for i in 0..m {
        for kk in 0..k {
            let mut acc = 0f32;
            for j in 0..n {
                acc += dz.get(i, j) * w.get(kk, j);
            }
            out.set(i, kk, acc);
        }
    }
    out
}

/// `a^T x dz` by direct indexing.
pub fn matmul_f32_at(a: &Tensor, dz: &Tensor) -> Tensor {
    let (m, k, n) = (a.rows(), a.cols(), dz.cols());
    debug_assert_eq!(m, dz.rows());
    let mut out = Tensor::zeros(&[k, n]);
    for kk in 0..k {
        for j in 0..n {
            let mut acc = 0f32;
            for i in 0..m {
                acc += a.get(i, kk) * dz.get(i, j);
            }
            out.set(kk, j, acc);
        }
    }
    out
}

fn tanh_forward(t: &mut Tensor) {
    for v in t.data_mut() {
        *v = v.tanh();
    }
}

/// Conv geometry: 3x3 kernels, pad 1, stride 1, optional 2x2 mean pool.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConvGeometry {
    pub cin: usize,
    pub cout: usize,
    pub height: usize,
    pub width: usize,
    pub pool: bool,
}

pub const KERNEL: usize = 3;
pub const PAD: usize = 1;

impl ConvGeometry {
    pub fn patch_len(&self) -> usize {
        self.cin * KERNEL * KERNEL
    }

    pub fn out_elems(&self) -> usize {
        let (h, w) = self.out_hw();
        self.cout * h * w
    }

    pub fn out_hw(&self) -> (usize, usize) {
        if self.pool {
            (self.height / 2, self.width / 2)
        } else {
            (self.height, self.width)
        }
    }
}

/// One weighted layer.
#[derive(Debug, Clone)]
pub enum Layer {
    Linear(LinearLayer),
    Conv(ConvLayer),
}

#[derive(Debug, Clone)]
pub struct LinearLayer {
    pub w: Tensor,
    pub b: Vec<f32>,
    pub tanh: bool,
    input: Option<Tensor>,
    output: Option<Tensor>,
    /// Pre-activation output gradient (the tensor m_G applies to).
    last_dz: Option<Tensor>,
    pub grad_w: Option<Tensor>,
    pub grad_b: Option<Vec<f32>>,
}

#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// `[cin*3*3, cout]` patch-matrix weights.
    pub w: Tensor,
    pub b: Vec<f32>,
    pub geo: ConvGeometry,
    pub tanh: bool,
    patches: Option<Tensor>,
    activated: Option<Tensor>,
    batch: usize,
    last_dz: Option<Tensor>,
    pub grad_w: Option<Tensor>,
    pub grad_b: Option<Vec<f32>>,
}

fn init_weights(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let scale = (1.0 / fan_in as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| {
            let u1 = ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64).max(1e-12);
            let u2 = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            (z * scale) as f32
        })
        .collect();
    Tensor::matrix(rows, cols, data).unwrap()
}

impl LinearLayer {
    pub fn new(input: usize, output: usize, tanh: bool, rng: &mut ChaCha8Rng) -> Self {
        LinearLayer {
            w: init_weights(input, output, input, rng),
            b: vec![0.0; output],
            tanh,
            input: None,
            output: None,
            last_dz: None,
            grad_w: None,
            grad_b: None,
        }
    }

    fn forward(
        &mut self,
        x: &Tensor,
        engine: &mut Engine,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        let mut z = engine.forward_matmul(x, &self.w, prec, iteration, layer)?;
        for r in 0..z.rows() {
            for c in 0..z.cols() {
                let v = z.get(r, c) + self.b[c];
                z.set(r, c, v);
            }
        }
        if self.tanh {
            tanh_forward(&mut z);
        }
        self.input = Some(x.clone());
        self.output = Some(z.clone());
        Ok(z)
    }

    fn backward(
        &mut self,
        grad_out: &Tensor,
        engine: &mut Engine,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        let out = self.output.as_ref().expect("forward before backward");
        let x = self.input.as_ref().expect("forward before backward");
        let mut dz = grad_out.clone();
        if self.tanh {
            for (g, a) in dz.data_mut().iter_mut().zip(out.data()) {
                *g *= 1.0 - a * a;
            }
        }
        let mut grad_b = vec![0f32; dz.cols()];
        for r in 0..dz.rows() {
            for c in 0..dz.cols() {
                grad_b[c] += dz.get(r, c);
            }
        }
        let grad_in = engine.grad_a_matmul(&dz, &self.w, prec, iteration, layer)?;
        let grad_w = engine.grad_w_matmul(x, &dz, prec, iteration, layer)?;
        self.grad_w = Some(grad_w);
        self.grad_b = Some(grad_b);
        self.last_dz = Some(dz);
        Ok(grad_in)
    }
}

impl ConvLayer {
    pub fn new(geo: ConvGeometry, tanh: bool, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = geo.patch_len();
        ConvLayer {
            w: init_weights(fan_in, geo.cout, fan_in, rng),
            b: vec![0.0; geo.cout],
            geo,
            tanh,
            patches: None,
            activated: None,
            batch: 0,
            last_dz: None,
            grad_w: None,
            grad_b: None,
        }
    }

    fn forward(
        &mut self,
        x: &Tensor,
        engine: &mut Engine,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        let batch = x.rows();
        let patches = im2col(x, &self.geo);
        let mut z = engine.forward_matmul(&patches, &self.w, prec, iteration, layer)?;
        // z rows are (batch, oy, ox), cols are cout
        for r in 0..z.rows() {
            for c in 0..z.cols() {
                let v = z.get(r, c) + self.b[c];
                z.set(r, c, v);
            }
        }
        if self.tanh {
            tanh_forward(&mut z);
        }
        self.patches = Some(patches);
        self.activated = Some(z.clone());
        self.batch = batch;
        let full = rows_to_images(&z, batch, self.geo.cout, self.geo.height, self.geo.width);
        let out = if self.geo.pool {
            avg_pool(&full, batch, self.geo.cout, self.geo.height, self.geo.width)
        } else {
            full
        };
        Ok(out)
    }

    fn backward(
        &mut self,
        grad_out: &Tensor,
        engine: &mut Engine,
        prec: LayerPrecision,
        iteration: usize,
        layer: usize,
    ) -> Result<Tensor> {
        let batch = self.batch;
        let grad_full = if self.geo.pool {
            avg_pool_backward(grad_out, batch, self.geo.cout, self.geo.height, self.geo.width)
        } else {
            grad_out.clone()
        };
        let mut dz = images_to_rows(&grad_full, batch, self.geo.cout, self.geo.height, self.geo.width);
        if self.tanh {
            let act = self.activated.as_ref().expect("forward before backward");
            for (g, a) in dz.data_mut().iter_mut().zip(act.data()) {
                *g *= 1.0 - a * a;
            }
        }
        let mut grad_b = vec![0f32; self.geo.cout];
        for r in 0..dz.rows() {
            for c in 0..dz.cols() {
                grad_b[c] += dz.get(r, c);
            }
        }
        let patches = self.patches.as_ref().expect("forward before backward");
        let grad_patches = engine.grad_a_matmul(&dz, &self.w, prec, iteration, layer)?;
        let grad_w = engine.grad_w_matmul(patches, &dz, prec, iteration, layer)?;
        self.grad_w = Some(grad_w);
        self.grad_b = Some(grad_b);
        self.last_dz = Some(dz);
        Ok(col2im(&grad_patches, batch, &self.geo))
    }
}

/// `[batch, cin*h*w]` to patch rows `[batch*h*w, cin*9]` (pad 1, stride 1).
fn im2col(x: &Tensor, geo: &ConvGeometry) -> Tensor {
    let (batch, h, w, cin) = (x.rows(), geo.height, geo.width, geo.cin);
    let mut out = Tensor::zeros(&[batch * h * w, geo.patch_len()]);
    for bi in 0..batch {
        for oy in 0..h {
            for ox in 0..w {
                let row = (bi * h + oy) * w + ox;
                for ci in 0..cin {
                    for ky in 0..KERNEL {
                        for kx in 0..KERNEL {
                            let sy = oy as isize + ky as isize - PAD as isize;
                            let sx = ox as isize + kx as isize - PAD as isize;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            let v = x.get(bi, (ci * h + sy as usize) * w + sx as usize);
                            out.set(row, (ci * KERNEL + ky) * KERNEL + kx, v);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Scatter-add patch gradients back to the input image layout.
fn col2im(grad_patches: &Tensor, batch: usize, geo: &ConvGeometry) -> Tensor {
    let (h, w, cin) = (geo.height, geo.width, geo.cin);
    let mut out = Tensor::zeros(&[batch, cin * h * w]);
    for bi in 0..batch {
        for oy in 0..h {
            for ox in 0..w {
                let row = (bi * h + oy) * w + ox;
                for ci in 0..cin {
                    for ky in 0..KERNEL {
                        for kx in 0..KERNEL {
                            let sy = oy as isize + ky as isize - PAD as isize;
                            let sx = ox as isize + kx as isize - PAD as isize;
                            if sy < 0 || sx < 0 || sy >= h as isize || sx >= w as isize {
                                continue;
                            }
                            let col = (ci * KERNEL + ky) * KERNEL + kx;
                            let idx = (ci * h + sy as usize) * w + sx as usize;
                            let v = out.get(bi, idx) + grad_patches.get(row, col);
                            out.set(bi, idx, v);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Patch-row layout `[batch*h*w, cout]` to image layout `[batch, cout*h*w]`.
fn rows_to_images(z: &Tensor, batch: usize, cout: usize, h: usize, w: usize) -> Tensor {
    let mut out = Tensor::zeros(&[batch, cout * h * w]);
    for bi in 0..batch {
        for y in 0..h {
            for x in 0..w {
                let row = (bi * h + y) * w + x;
                for c in 0..cout {
                    out.set(bi, (c * h + y) * w + x, z.get(row, c));
                }
            }
        }
    }
    out
}

fn images_to_rows(t: &Tensor, batch: usize, cout: usize, h: usize, w: usize) -> Tensor {
    let mut out = Tensor::zeros(&[batch * h * w, cout]);
    for bi in 0..batch {
        for y in 0..h {
            for x in 0..w {
                let row = (bi * h + y) * w + x;
                for c in 0..cout {
                    out.set(row, c, t.get(bi, (c * h + y) * w + x));
                }
            }
        }
    }
    out
}

fn avg_pool(t: &Tensor, batch: usize, cout: usize, h: usize, w: usize) -> Tensor {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[batch, cout * oh * ow]);
    for bi in 0..batch {
        for c in 0..cout {
            for y in 0..oh {
                for x in 0..ow {
                    let mut sum = 0f32;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            sum += t.get(bi, (c * h + 2 * y + dy) * w + 2 * x + dx);
                        }
                    }
                    out.set(bi, (c * oh + y) * ow + x, sum * 0.25);
                }
            }
        }
    }
    out
}

fn avg_pool_backward(grad: &Tensor, batch: usize, cout: usize, h: usize, w: usize) -> Tensor {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[batch, cout * h * w]);
    for bi in 0..batch {
        for c in 0..cout {
            for y in 0..oh {
                for x in 0..ow {
                    let g = grad.get(bi, (c * oh + y) * ow + x) * 0.25;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            out.set(bi, (c * h + 2 * y + dy) * w + 2 * x + dx, g);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Model architectures available to the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Fully connected tanh layers; `dims` includes input and output.
    Mlp { dims: Vec<usize> },
    /// Six weighted layers for 8x8 single-channel images: four 3x3 convs
    /// (two with 2x2 mean pooling) and two fully connected layers.
    SmallCnn,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<Layer>,
}

impl Model {
    pub fn build(kind: &ModelKind, seed: u64) -> Model {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f64656c);
        let mut layers = Vec::new();
        match kind {
            ModelKind::Mlp { dims } => {
                assert!(dims.len() >= 2, "mlp needs at least one weight layer");
                for i in 0..dims.len() - 1 {
                    let last = i == dims.len() - 2;
                    layers.push(Layer::Linear(LinearLayer::new(
                        dims[i],
                        dims[i + 1],
                        !last,
                        &mut rng,
                    )));
                }
            }
            ModelKind::SmallCnn => {
                let geos = [
                    ConvGeometry { cin: 1, cout: 8, height: 8, width: 8, pool: false },
                    ConvGeometry { cin: 8, cout: 8, height: 8, width: 8, pool: true },
                    ConvGeometry { cin: 8, cout: 16, height: 4, width: 4, pool: false },
                    ConvGeometry { cin: 16, cout: 16, height: 4, width: 4, pool: true },
                ];
                for geo in geos {
                    layers.push(Layer::Conv(ConvLayer::new(geo, true, &mut rng)));
                }
                layers.push(Layer::Linear(LinearLayer::new(64, 32, true, &mut rng)));
                layers.push(Layer::Linear(LinearLayer::new(32, 10, false, &mut rng)));
            }
        }
        Model { layers }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Forward pass; `precisions[l]` applies to weight layer `l` (0-based).
    pub fn forward(
        &mut self,
        x: &Tensor,
        engine: &mut Engine,
        precisions: &[LayerPrecision],
        iteration: usize,
    ) -> Result<Tensor> {
        let mut cur = x.clone();
        for (l, layer) in self.layers.iter_mut().enumerate() {
            cur = match layer {
                Layer::Linear(lin) => lin.forward(&cur, engine, precisions[l], iteration, l + 1)?,
                Layer::Conv(conv) => conv.forward(&cur, engine, precisions[l], iteration, l + 1)?,
            };
        }
        Ok(cur)
    }

    /// Backward pass from the logit gradient; fills per-layer grads.
    pub fn backward(
        &mut self,
        grad_logits: &Tensor,
        engine: &mut Engine,
        precisions: &[LayerPrecision],
        iteration: usize,
    ) -> Result<()> {
        let mut grad = grad_logits.clone();
        for (l, layer) in self.layers.iter_mut().enumerate().rev() {
            grad = match layer {
                Layer::Linear(lin) => lin.backward(&grad, engine, precisions[l], iteration, l + 1)?,
                Layer::Conv(conv) => conv.backward(&grad, engine, precisions[l], iteration, l + 1)?,
            };
        }
        Ok(())
    }

    /// SGD step `W <- W - eta * grad_W`; BfpStored weights are immediately
    /// requantized to 4-bit BFP (low chunks are discarded at read time when
    /// a narrower view is selected).
    pub fn step(&mut self, eta: f32, storage: WeightStorage, g: usize) -> Result<()> {
        for layer in &mut self.layers {
            let (w, b, grad_w, grad_b) = match layer {
                Layer::Linear(lin) => (&mut lin.w, &mut lin.b, lin.grad_w.as_ref(), lin.grad_b.as_ref()),
                Layer::Conv(conv) => (&mut conv.w, &mut conv.b, conv.grad_w.as_ref(), conv.grad_b.as_ref()),
            };
            let (Some(gw), Some(gb)) = (grad_w, grad_b) else {
                continue;
            };
            for (wv, gv) in w.data_mut().iter_mut().zip(gw.data()) {
                *wv -= eta * gv;
            }
            for (bv, gv) in b.iter_mut().zip(gb) {
                *bv -= eta * gv;
            }
            if storage == WeightStorage::BfpStored {
                let q = quantize_tensor(w, 0, g, 4, RoundingMode::Truncate, &NoiseSource::new(0))?;
                *w = q.dequantize();
            }
        }
        Ok(())
    }

    /// Borrow layer weights (for improvement metrics).
    pub fn weights(&self, l: usize) -> &Tensor {
        match &self.layers[l] {
            Layer::Linear(lin) => &lin.w,
            Layer::Conv(conv) => &conv.w,
        }
    }

    /// Cached layer input activations from the most recent forward.
    pub fn cached_input(&self, l: usize) -> Option<&Tensor> {
        match &self.layers[l] {
            Layer::Linear(lin) => lin.input.as_ref(),
            Layer::Conv(conv) => conv.patches.as_ref(),
        }
    }

    /// Weight gradients from the most recent backward.
    pub fn grad_w(&self, l: usize) -> Option<&Tensor> {
        match &self.layers[l] {
            Layer::Linear(lin) => lin.grad_w.as_ref(),
            Layer::Conv(conv) => conv.grad_w.as_ref(),
        }
    }

    /// Pre-activation output gradients from the most recent backward —
    /// the tensor the gradient mantissa width applies to.
    pub fn output_gradient(&self, l: usize) -> Option<&Tensor> {
        match &self.layers[l] {
            Layer::Linear(lin) => lin.last_dz.as_ref(),
            Layer::Conv(conv) => conv.last_dz.as_ref(),
        }
    }
}

/// Mean cross entropy over softmax logits, plus the logit gradient.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> (f32, Tensor) {
    let (rows, cols) = (logits.rows(), logits.cols());
    debug_assert_eq!(rows, labels.len());
    let mut grad = Tensor::zeros(&[rows, cols]);
    let mut loss = 0f64;
    for r in 0..rows {
        let mut maxv = f32::NEG_INFINITY;
        for c in 0..cols {
            maxv = maxv.max(logits.get(r, c));
        }
        let mut denom = 0f64;
        for c in 0..cols {
            denom += ((logits.get(r, c) - maxv) as f64).exp();
        }
        for c in 0..cols {
            let p = ((logits.get(r, c) - maxv) as f64).exp() / denom;
            let target = if labels[r] == c { 1.0 } else { 0.0 };
            grad.set(r, c, ((p - target) / rows as f64) as f32);
            if labels[r] == c {
                loss -= p.max(1e-30).ln();
            }
        }
    }
    ((loss / rows as f64) as f32, grad)
}

/// Fraction of rows whose argmax matches the label.
pub fn accuracy(logits: &Tensor, labels: &[usize]) -> f64 {
    let mut hits = 0usize;
    for r in 0..logits.rows() {
        let mut best = 0;
        for c in 1..logits.cols() {
            if logits.get(r, c) > logits.get(r, best) {
                best = c;
            }
        }
        if best == labels[r] {
            hits += 1;
        }
    }
    hits as f64 / logits.rows().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systolic::{ArrayConfig, CostModelParams};

    fn sim() -> Simulator {
        Simulator::new(
            ArrayConfig { rows: 16, cols: 16, group_size: 16, clock_hz: 500e6 },
            CostModelParams::default(),
        )
    }

    fn fp32_all(depth: usize) -> Vec<LayerPrecision> {
        vec![LayerPrecision::Fp32; depth]
    }

    #[test]
    fn zero_weight_model_predicts_constant_zero() {
        let mut model = Model::build(&ModelKind::Mlp { dims: vec![2, 8, 2] }, 5);
        for layer in &mut model.layers {
            if let Layer::Linear(lin) = layer {
                for v in lin.w.data_mut() {
                    *v = 0.0;
                }
            }
        }
        let s = sim();
        let mut engine = Engine::new(&s, 1, RoundingMode::stochastic_default(), 16);
        let x = Tensor::matrix(4, 2, vec![1., 2., -1., 0.5, 3., -2., 0., 1.]).unwrap();
        let logits = model.forward(&x, &mut engine, &fp32_all(2), 1).unwrap();
        assert!(logits.data().iter().all(|&v| v == 0.0));
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 1, 0, 1]);
        assert!((loss - (2f32).ln()).abs() < 1e-6);
    }

    #[test]
    fn linear_fp32_gradients_match_hand_matrix_calculus() {
        // single linear layer, identity-ish loss gradient: dW = x^T dz
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lin = LinearLayer::new(3, 2, false, &mut rng);
        let s = sim();
        let mut engine = Engine::new(&s, 1, RoundingMode::stochastic_default(), 16);
        let x = Tensor::matrix(2, 3, vec![1., 0., -1., 2., 1., 0.5]).unwrap();
        let _ = lin.forward(&x, &mut engine, LayerPrecision::Fp32, 1, 1).unwrap();
        let dz = Tensor::matrix(2, 2, vec![0.5, -1., 1., 0.25]).unwrap();
        let grad_in = lin
            .backward(&dz, &mut engine, LayerPrecision::Fp32, 1, 1)
            .unwrap();
        let gw = lin.grad_w.as_ref().unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let want: f32 = (0..2).map(|b| x.get(b, i) * dz.get(b, j)).sum();
                assert!((gw.get(i, j) - want).abs() < 1e-6);
            }
        }
        for b in 0..2 {
            for i in 0..3 {
                let want: f32 = (0..2).map(|j| dz.get(b, j) * lin.w.get(i, j)).sum();
                assert!((grad_in.get(b, i) - want).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn step_applies_sgd_and_eta_zero_is_identity() {
        let mut model = Model::build(&ModelKind::Mlp { dims: vec![2, 2] }, 9);
        let w_before = model.weights(0).clone();
        if let Layer::Linear(lin) = &mut model.layers[0] {
            lin.grad_w = Some(Tensor::matrix(2, 2, vec![1., 1., 1., 1.]).unwrap());
            lin.grad_b = Some(vec![0.5, 0.5]);
        }
        model.step(0.0, WeightStorage::Fp32Master, 16).unwrap();
        assert_eq!(model.weights(0).data(), w_before.data());
        model.step(0.25, WeightStorage::Fp32Master, 16).unwrap();
        for (after, before) in model.weights(0).data().iter().zip(w_before.data()) {
            assert!((after - (before - 0.25)).abs() < 1e-7);
        }
    }

    #[test]
    fn bfp_stored_weights_are_quantized_fixed_points() {
        let mut model = Model::build(&ModelKind::Mlp { dims: vec![4, 3] }, 11);
        if let Layer::Linear(lin) = &mut model.layers[0] {
            lin.grad_w = Some(Tensor::zeros(&[4, 3]));
            lin.grad_b = Some(vec![0.0; 3]);
        }
        model.step(0.1, WeightStorage::BfpStored, 2).unwrap();
        let w = model.weights(0).clone();
        let q = quantize_tensor(&w, 0, 2, 4, RoundingMode::Truncate, &NoiseSource::new(0)).unwrap();
        assert_eq!(q.dequantize().data(), w.data());
    }

    #[test]
    fn cnn_shapes_flow_end_to_end() {
        let mut model = Model::build(&ModelKind::SmallCnn, 2);
        assert_eq!(model.depth(), 6);
        let s = sim();
        let mut engine = Engine::new(&s, 1, RoundingMode::stochastic_default(), 16);
        let x = Tensor::zeros(&[3, 64]);
        let logits = model.forward(&x, &mut engine, &fp32_all(6), 1).unwrap();
        assert_eq!(logits.shape(), &[3, 10]);
        let (_, dlogits) = softmax_cross_entropy(&logits, &[0, 1, 2]);
        model.backward(&dlogits, &mut engine, &fp32_all(6), 1).unwrap();
        for l in 0..6 {
            assert!(model.grad_w(l).is_some());
        }
    }

    #[test]
    fn bfp_path_runs_and_accumulates_cost() {
        let mut model = Model::build(&ModelKind::Mlp { dims: vec![2, 16, 2] }, 4);
        let s = sim();
        let mut engine = Engine::new(&s, 7, RoundingMode::stochastic_default(), 16);
        let precs = vec![LayerPrecision::Bfp(PrecisionSetting::uniform(4)); 2];
        let x = Tensor::matrix(8, 2, (0..16).map(|i| (i as f32 * 0.3).sin()).collect()).unwrap();
        let logits = model.forward(&x, &mut engine, &precs, 1).unwrap();
        let (_, dlogits) = softmax_cross_entropy(&logits, &[0, 1, 0, 1, 0, 1, 0, 1]);
        model.backward(&dlogits, &mut engine, &precs, 1).unwrap();
        assert!(engine.totals.passes > 0);
        assert!(engine.totals.converter_groups > 0);
        assert!(engine.totals.energy_j > 0.0);
        // passes = dp_ops * 4 at uniform m=4
        assert_eq!(engine.totals.passes, engine.totals.dp_ops * 4);
    }

    #[test]
    fn softmax_gradient_sums_to_zero_per_row() {
        let logits = Tensor::matrix(2, 3, vec![1., 2., 0.5, -1., 0., 3.]).unwrap();
        let (_, grad) = softmax_cross_entropy(&logits, &[2, 0]);
        for r in 0..2 {
            let s: f32 = (0..3).map(|c| grad.get(r, c)).sum();
            assert!(s.abs() < 1e-6);
        }
    }
}
