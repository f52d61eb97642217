//! Joint recovery of basis SRMs and per-vertex material logits by
//! first-order descent on the photometric objective
//!
//! ```text
//! E = sum_c mean_P |G_P - (D_P + S_P)|           (data)
//!   + lambda_S * sum_c mean_P |S_P|              (sparsity)
//!   + lambda_W * mean_edges sum_i |W_i(a) - W_i(b)|   (smoothness)
//! S_P = V_P * sum_i W_i(x_P) * SRM_i(omega_r)
//! ```
//!
//! Means run over the covered pixels of the frames in a batch.

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::{softmax, trace_view};
use crate::frame::Frame;
use crate::geometry::Scene;
use crate::panorama::{bilinear_taps, Panorama, Tap, DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::raster::{MaskImage, Rgb};
use crate::{Error, Result};

/// Pixels per work chunk. Fixed so that the reduction order, and therefore
/// the result, does not depend on the thread count.
const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataLoss {
    #[default]
    L1,
    /// Squared residuals; a debugging aid that makes the data term linear
    /// least squares in the SRM texels.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub material_count: usize,
    pub lr_srm: f64,
    pub lr_logits: f64,
    pub lambda_sparsity: f64,
    pub lambda_smooth: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub srm_width: usize,
    pub srm_height: usize,
    /// Initial value of every SRM texel and channel.
    pub init_srm: f64,
    /// Standard deviation of the initial logits. Identical bases with
    /// uniform weights receive identical updates forever, so some
    /// asymmetry is needed whenever `material_count > 1`.
    pub init_logit_jitter: f64,
    pub data_loss: DataLoss,
    /// Both learning rates follow a cosine from their configured value down
    /// to this fraction of it over the run; 1.0 keeps them constant.
    pub lr_final_fraction: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            material_count: 2,
            lr_srm: 1e-3,
            lr_logits: 1e-2,
            lambda_sparsity: 1e-4,
            lambda_smooth: 1e-3,
            epochs: 40,
            batch_size: 4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            srm_width: DEFAULT_WIDTH,
            srm_height: DEFAULT_HEIGHT,
            init_srm: 0.05,
            init_logit_jitter: 0.1,
            data_loss: DataLoss::L1,
            lr_final_fraction: 0.05,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.material_count == 0 {
            return bad("material count must be at least 1");
        }
        if !(self.lr_srm > 0.0) || !(self.lr_logits > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.lambda_sparsity >= 0.0) || !(self.lambda_smooth >= 0.0) {
            return bad("regularization weights must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("moment decay rates must lie in [0, 1)");
        }
        if !(self.adam_epsilon > 0.0) {
            return bad("adam epsilon must be positive");
        }
        if self.srm_width == 0 || self.srm_width != 2 * self.srm_height {
            return bad("SRM size must be non-empty with a 2:1 aspect");
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return bad("final learning-rate fraction must lie in (0, 1]");
        }
        if !(self.init_srm >= 0.0) || !(self.init_logit_jitter >= 0.0) {
            return bad("initial values must be non-negative");
        }
        Ok(())
    }
}

/// One covered pixel with everything that does not depend on the
/// parameters.
#[derive(Debug, Clone, Copy)]
struct PixelRecord {
    vertices: [u32; 3],
    barycentric: [f64; 3],
    target: Rgb,
    diffuse: Rgb,
    /// Bilinear taps of the reflection direction; `None` where the
    /// reflected ray is blocked.
    taps: Option<[Tap; 4]>,
}

#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub id: usize,
    records: Vec<PixelRecord>,
}

impl PreparedFrame {
    pub fn covered(&self) -> usize {
        self.records.len()
    }
}

/// Frames traced once against a fixed scene.
#[derive(Debug, Clone)]
pub struct Problem {
    pub frames: Vec<PreparedFrame>,
    edges: Vec<(u32, u32)>,
    vertex_count: usize,
    srm_width: usize,
    srm_height: usize,
}

impl Problem {
    /// Traces every frame. The scene's vertex albedo is the diffuse
    /// radiance subtracted from the observations.
    pub fn new(
        scene: &Scene,
        frames: &[Frame],
        srm_width: usize,
        srm_height: usize,
    ) -> Result<Self> {
        let prepared = frames
            .par_iter()
            .map(|f| prepare_frame(scene, f, srm_width, srm_height))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            frames: prepared,
            edges: scene.mesh().edges(),
            vertex_count: scene.mesh().vertex_count(),
            srm_width,
            srm_height,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn srm_size(&self) -> (usize, usize) {
        (self.srm_width, self.srm_height)
    }

    /// Texels that receive weight from at least one unblocked reflection.
    pub fn observed_mask(&self) -> MaskImage {
        let mut mask = MaskImage::filled(self.srm_width, self.srm_height, false);
        for f in &self.frames {
            for r in &f.records {
                for t in r.taps.iter().flatten() {
                    if t.weight > 0.0 {
                        mask.as_mut_slice()[t.index] = true;
                    }
                }
            }
        }
        mask
    }
}

fn prepare_frame(scene: &Scene, frame: &Frame, w: usize, h: usize) -> Result<PreparedFrame> {
    let trace = trace_view(scene, &frame.camera);
    if trace.width != frame.image.width() || trace.height != frame.image.height() {
        return Err(Error::ImageSizeMismatch {
            frame: frame.id.to_string(),
            expected_width: trace.width,
            expected_height: trace.height,
            actual_width: frame.image.width(),
            actual_height: frame.image.height(),
        });
    }
    if trace.samples.is_empty() {
        return Err(Error::NoCoverage { frame: frame.id });
    }
    let mesh = scene.mesh();
    let records = trace
        .samples
        .iter()
        .map(|s| {
            let f = mesh.faces()[s.face];
            PixelRecord {
                vertices: f,
                barycentric: s.barycentric,
                target: frame.image.as_slice()[s.pixel],
                diffuse: mesh.interpolate_albedo(s.face, &s.barycentric),
                taps: s.visible().then(|| bilinear_taps(&s.reflected, w, h)),
            }
        })
        .collect();
    Ok(PreparedFrame {
        id: frame.id,
        records,
    })
}

/// Texels that some covered pixel of some frame sees through an unblocked
/// reflected ray (bilinear weight above zero).
pub fn observed_texel_mask(
    scene: &Scene,
    frames: &[Frame],
    width: usize,
    height: usize,
) -> MaskImage {
    let mut mask = MaskImage::filled(width, height, false);
    for frame in frames {
        for s in trace_view(scene, &frame.camera).samples {
            if !s.visible() {
                continue;
            }
            for t in bilinear_taps(&s.reflected, width, height) {
                if t.weight > 0.0 {
                    mask.as_mut_slice()[t.index] = true;
                }
            }
        }
    }
    mask
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    fn step(
        &mut self,
        params: &mut [f64],
        grad: &[f64],
        lr: f64,
        step: u64,
        cfg: &OptimizerConfig,
    ) {
        let c1 = 1.0 - cfg.beta1.powf(step as f64);
        let c2 = 1.0 - cfg.beta2.powf(step as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub data: f64,
    pub sparsity: f64,
    pub smoothness: f64,
}

impl LossBreakdown {
    pub fn total(&self) -> f64 {
        self.data + self.sparsity + self.smoothness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    /// Mean over the steps of the epoch.
    pub loss: LossBreakdown,
}

/// Gradients in the parameter layout of `OptimizerState`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Basis-major, then texel, then channel.
    pub srm: Vec<f64>,
    /// Vertex-major, `V x M`.
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    material_count: usize,
    srm_width: usize,
    srm_height: usize,
    /// Basis-major, then texel, then channel.
    srm: Vec<f64>,
    logits: Vec<f64>,
    adam_srm: Adam,
    adam_logits: Adam,
    step: u64,
    pub history: Vec<EpochLoss>,
}

impl OptimizerState {
    /// Constant SRMs and seeded logits as configured.
    pub fn initial(config: &OptimizerConfig, vertex_count: usize) -> Result<Self> {
        config.validate()?;
        let m = config.material_count;
        let texels = config.srm_width * config.srm_height;
        let srm = vec![config.init_srm; m * texels * 3];
        let mut logits = vec![0.0; vertex_count * m];
        if m > 1 && config.init_logit_jitter > 0.0 {
            let normal = Normal::new(0.0, config.init_logit_jitter)
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            for z in &mut logits {
                *z = normal.sample(&mut rng);
            }
        }
        Ok(Self::assemble(
            m,
            config.srm_width,
            config.srm_height,
            srm,
            logits,
        ))
    }

    /// Starts from given parameters with fresh moment buffers.
    pub fn from_parameters(srms: &[Panorama], logits: Vec<f64>) -> Result<Self> {
        let m = srms.len();
        if m == 0 {
            return Err(Error::InvalidConfig("at least one SRM is required".into()));
        }
        let (w, h) = (srms[0].width(), srms[0].height());
        if srms.iter().any(|s| s.width() != w || s.height() != h) {
            return Err(Error::DimensionMismatch("SRMs differ in size".into()));
        }
        if !logits.len().is_multiple_of(m) {
            return Err(Error::DimensionMismatch(format!(
                "{} logits for {m} materials",
                logits.len()
            )));
        }
        let srm = srms
            .iter()
            .flat_map(|s| s.data().iter().flat_map(|t| [t.x, t.y, t.z]))
            .collect();
        Ok(Self::assemble(m, w, h, srm, logits))
    }

    fn assemble(m: usize, w: usize, h: usize, srm: Vec<f64>, logits: Vec<f64>) -> Self {
        Self {
            material_count: m,
            srm_width: w,
            srm_height: h,
            adam_srm: Adam::new(srm.len()),
            adam_logits: Adam::new(logits.len()),
            srm,
            logits,
            step: 0,
            history: Vec::new(),
        }
    }

    pub fn material_count(&self) -> usize {
        self.material_count
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn srm_values(&self) -> &[f64] {
        &self.srm
    }

    pub fn srm_values_mut(&mut self) -> &mut [f64] {
        &mut self.srm
    }

    pub fn srms(&self) -> Vec<Panorama> {
        let texels = self.srm_width * self.srm_height;
        (0..self.material_count)
            .map(|i| {
                let data = self.srm[i * texels * 3..(i + 1) * texels * 3]
                    .chunks_exact(3)
                    .map(|c| Rgb::new(c[0], c[1], c[2]))
                    .collect();
                Panorama::from_data(self.srm_width, self.srm_height, data)
                    .expect("SRM texels are kept finite and non-negative")
            })
            .collect()
    }

    /// Softmax weights per vertex, vertex-major.
    pub fn vertex_weights(&self) -> Vec<f64> {
        let m = self.material_count;
        let mut out = vec![0.0; self.logits.len()];
        for (z, w) in self.logits.chunks_exact(m).zip(out.chunks_exact_mut(m)) {
            softmax(z, w);
        }
        out
    }
}

struct ChunkResult {
    data: f64,
    sparsity: f64,
    /// `(flat srm index, gradient)` in pixel order.
    srm: Vec<(u32, f64)>,
    /// `(flat logit index, gradient)` in pixel order.
    logits: Vec<(u32, f64)>,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Objective and its gradient over the frames `batch` (indices into
/// `problem.frames`). The sparsity and smoothness terms use the same
/// pixel set; smoothness covers every mesh edge.
pub fn loss_and_gradients(
    state: &OptimizerState,
    problem: &Problem,
    batch: &[usize],
    config: &OptimizerConfig,
) -> Result<(LossBreakdown, Gradients)> {
    let m = state.material_count;
    if batch.is_empty() {
        return Err(Error::InvalidConfig("empty frame batch".into()));
    }
    if (state.srm_width, state.srm_height) != (problem.srm_width, problem.srm_height) {
        return Err(Error::DimensionMismatch(
            "state and problem differ in SRM size".into(),
        ));
    }
    if state.logits.len() != problem.vertex_count * m {
        return Err(Error::DimensionMismatch(format!(
            "{} logits for {} vertices x {m} materials",
            state.logits.len(),
            problem.vertex_count
        )));
    }
    let texels = state.srm_width * state.srm_height;
    let chunks: Vec<&[PixelRecord]> = batch
        .iter()
        .flat_map(|&f| problem.frames[f].records.chunks(CHUNK))
        .collect();
    let n: usize = batch.iter().map(|&f| problem.frames[f].records.len()).sum();
    let inv_n = 1.0 / n as f64;
    let lambda_s = config.lambda_sparsity;
    let squared = config.data_loss == DataLoss::Squared;

    let results: Vec<ChunkResult> = chunks
        .par_iter()
        .map(|records| {
            let mut out = ChunkResult {
                data: 0.0,
                sparsity: 0.0,
                srm: Vec::with_capacity(records.len() * 4 * m * 3),
                logits: Vec::with_capacity(records.len() * 3 * m),
            };
            let mut z = vec![0.0; m];
            let mut w = vec![0.0; m];
            let mut lookups = vec![Rgb::zeros(); m];
            for r in records.iter() {
                let Some(taps) = r.taps else {
                    let res = r.diffuse - r.target;
                    out.data += if squared {
                        res.norm_squared()
                    } else {
                        res.abs().sum()
                    };
                    continue;
                };
                z.fill(0.0);
                for (k, &v) in r.vertices.iter().enumerate() {
                    let b = r.barycentric[k];
                    for (j, zj) in z.iter_mut().enumerate() {
                        *zj += b * state.logits[v as usize * m + j];
                    }
                }
                softmax(&z, &mut w);
                let mut s = Rgb::zeros();
                for i in 0..m {
                    let base = i * texels * 3;
                    let mut l = Rgb::zeros();
                    for t in &taps {
                        let o = base + t.index * 3;
                        l += Rgb::new(state.srm[o], state.srm[o + 1], state.srm[o + 2]) * t.weight;
                    }
                    lookups[i] = l;
                    s += l * w[i];
                }
                let res = r.diffuse + s - r.target;
                let mut g = Rgb::zeros();
                for c in 0..3 {
                    if squared {
                        out.data += res[c] * res[c];
                        g[c] = 2.0 * res[c];
                    } else {
                        out.data += res[c].abs();
                        g[c] = sign(res[c]);
                    }
                    out.sparsity += s[c].abs();
                    g[c] = (g[c] + lambda_s * sign(s[c])) * inv_n;
                }
                if g == Rgb::zeros() {
                    continue;
                }
                for (i, wi) in w.iter().enumerate().take(m) {
                    let base = i * texels * 3;
                    for t in &taps {
                        if t.weight == 0.0 {
                            continue;
                        }
                        let o = base + t.index * 3;
                        let f = wi * t.weight;
                        for c in 0..3 {
                            out.srm.push(((o + c) as u32, g[c] * f));
                        }
                    }
                }
                if m > 1 {
                    for j in 0..m {
                        let dz = w[j] * g.dot(&(lookups[j] - s));
                        for (k, &v) in r.vertices.iter().enumerate() {
                            out.logits
                                .push(((v as usize * m + j) as u32, dz * r.barycentric[k]));
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut grad = Gradients {
        srm: vec![0.0; state.srm.len()],
        logits: vec![0.0; state.logits.len()],
    };
    let (mut data, mut sparsity) = (0.0, 0.0);
    for r in &results {
        data += r.data;
        sparsity += r.sparsity;
        for &(i, g) in &r.srm {
            grad.srm[i as usize] += g;
        }
        for &(i, g) in &r.logits {
            grad.logits[i as usize] += g;
        }
    }

    let smoothness = smoothness_term(
        state,
        &problem.edges,
        config.lambda_smooth,
        &mut grad.logits,
    );
    Ok((
        LossBreakdown {
            data: data * inv_n,
            sparsity: lambda_s * sparsity * inv_n,
            smoothness,
        },
        grad,
    ))
}

/// `lambda * mean_edges sum_i |W_i(a) - W_i(b)|`, accumulating its logit
/// gradient into `grad`.
fn smoothness_term(
    state: &OptimizerState,
    edges: &[(u32, u32)],
    lambda: f64,
    grad: &mut [f64],
) -> f64 {
    let m = state.material_count;
    if m < 2 || edges.is_empty() || lambda == 0.0 {
        return 0.0;
    }
    let weights = state.vertex_weights();
    let scale = lambda / edges.len() as f64;
    let mut total = 0.0;
    let mut d_w = vec![0.0; weights.len()];
    for &(a, b) in edges {
        let (a, b) = (a as usize, b as usize);
        for i in 0..m {
            let diff = weights[a * m + i] - weights[b * m + i];
            total += diff.abs();
            let s = sign(diff) * scale;
            d_w[a * m + i] += s;
            d_w[b * m + i] -= s;
        }
    }
    for ((wv, gw), gz) in weights
        .chunks_exact(m)
        .zip(d_w.chunks_exact(m))
        .zip(grad.chunks_exact_mut(m))
    {
        let dot: f64 = wv.iter().zip(gw).map(|(w, g)| w * g).sum();
        for j in 0..m {
            gz[j] += wv[j] * (gw[j] - dot);
        }
    }
    total * scale
}

/// Runs the configured epochs starting from `state`.
pub fn optimize_state(
    mut state: OptimizerState,
    problem: &Problem,
    config: &OptimizerConfig,
) -> Result<OptimizerState> {
    config.validate()?;
    if problem.frames.len() < 2 {
        return Err(Error::InvalidConfig(
            "at least two frames are required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..problem.frames.len()).collect();
    let total_steps = config.epochs * order.len().div_ceil(config.batch_size);
    let mut local_step = 0usize;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut steps = 0usize;
        for batch in order.chunks(config.batch_size) {
            let (loss, grad) = loss_and_gradients(&state, problem, batch, config)?;
            state.step += 1;
            if !loss.total().is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: state.step as usize,
                    block: "loss",
                });
            }
            if grad.srm.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    step: state.step as usize,
                    block: "srm",
                });
            }
            if grad.logits.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    step: state.step as usize,
                    block: "logits",
                });
            }
            let step = state.step;
            let progress = local_step as f64 / total_steps.max(1) as f64;
            let f = config.lr_final_fraction;
            let decay = f + (1.0 - f) * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            local_step += 1;
            state.adam_srm.step(
                &mut state.srm,
                &grad.srm,
                config.lr_srm * decay,
                step,
                config,
            );
            for t in &mut state.srm {
                *t = t.max(0.0);
            }
            if state.material_count > 1 {
                state.adam_logits.step(
                    &mut state.logits,
                    &grad.logits,
                    config.lr_logits * decay,
                    step,
                    config,
                );
            }
            sum.data += loss.data;
            sum.sparsity += loss.sparsity;
            sum.smoothness += loss.smoothness;
            steps += 1;
        }
        let k = steps as f64;
        let mean = LossBreakdown {
            data: sum.data / k,
            sparsity: sum.sparsity / k,
            smoothness: sum.smoothness / k,
        };
        info!(
            "epoch {:>3}: loss {:.6} (data {:.6}, sparsity {:.2e}, smoothness {:.2e})",
            epoch + 1,
            mean.total(),
            mean.data,
            mean.sparsity,
            mean.smoothness
        );
        state.history.push(EpochLoss { epoch, loss: mean });
    }
    Ok(state)
}

#[derive(Debug, Clone)]
pub struct Recovery {
    pub state: OptimizerState,
    pub mask: MaskImage,
}

impl Recovery {
    pub fn srms(&self) -> Vec<Panorama> {
        self.state.srms()
    }
}

/// Traces the frames, initializes from the config and optimizes.
pub fn optimize(scene: &Scene, frames: &[Frame], config: &OptimizerConfig) -> Result<Recovery> {
    config.validate()?;
    let problem = Problem::new(scene, frames, config.srm_width, config.srm_height)?;
    let state = OptimizerState::initial(config, problem.vertex_count())?;
    info!(
        "optimizing {} bases over {} frames ({} covered pixels)",
        config.material_count,
        problem.frames.len(),
        problem.frames.iter().map(|f| f.covered()).sum::<usize>()
    );
    let mask = problem.observed_mask();
    let state = optimize_state(state, &problem, config)?;
    Ok(Recovery { state, mask })
}
