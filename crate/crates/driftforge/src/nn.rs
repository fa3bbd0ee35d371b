//! Small classifier family with exact analytic gradients: softmax
//! regression, ReLU MLPs, and a conv/pool stack. No batch norm, no
//! dropout, so forward and backward are pure deterministic functions.
//!
//! Parameters live in a [`ParamSet`]: an ordered list of named tensors.
//! Layer k owns entries 2k (weight) and 2k+1 (bias); the names are for
//! humans and checkpoints, the positions are the contract.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::drift::Dataset;
use crate::error::{Error, Result};
use crate::numcore::{Rng, Tensor};
use crate::triggers::{patch, TriggerSpec};

const CHECKPOINT_MAGIC: &[u8; 8] = b"DFMODEL1";
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    /// Softmax regression straight from flattened pixels.
    Linear,
    /// Fully connected ReLU stack with the given hidden widths.
    Mlp { hidden: Vec<usize> },
    /// Per entry: 3x3 same-padding conv to that many channels, ReLU,
    /// 2x2 max-pool stride 2. A dense head maps the final maps to logits.
    SmallConv { channels: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    pub fn feature_len(&self) -> usize {
        self.channels * self.height * self.width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub architecture: Architecture,
    pub input: InputShape,
    pub num_classes: usize,
}

/// One computational stage. Dimensions are those seen at the stage input.
#[derive(Debug, Clone, PartialEq)]
enum Stage {
    /// Dense layer followed by ReLU.
    DenseRelu { fan_in: usize, fan_out: usize },
    /// Final dense layer emitting logits.
    DenseOut { fan_in: usize, fan_out: usize },
    /// 3x3 same-padding conv + ReLU + 2x2/2 max-pool.
    ConvReluPool {
        c_in: usize,
        h: usize,
        w: usize,
        c_out: usize,
    },
}

impl ModelSpec {
    /// Checks that the layer dimensions chain consistently from the input
    /// shape to the logits.
    pub fn validate(&self) -> Result<()> {
        self.stages().map(|_| ())
    }

    /// Expands the architecture into concrete stages, validating that the
    /// dimension chain stays positive all the way to the logits.
    fn stages(&self) -> Result<Vec<Stage>> {
        if self.num_classes < 2 {
            return Err(Error::invalid("num_classes must be >= 2"));
        }
        if self.input.feature_len() == 0 {
            return Err(Error::invalid("input shape has zero features"));
        }
        let mut stages = Vec::new();
        match &self.architecture {
            Architecture::Linear => {
                stages.push(Stage::DenseOut {
                    fan_in: self.input.feature_len(),
                    fan_out: self.num_classes,
                });
            }
            Architecture::Mlp { hidden } => {
                if hidden.is_empty() {
                    return Err(Error::invalid("mlp needs at least one hidden layer"));
                }
                let mut fan_in = self.input.feature_len();
                for &h in hidden {
                    if h == 0 {
                        return Err(Error::invalid("hidden width 0"));
                    }
                    stages.push(Stage::DenseRelu { fan_in, fan_out: h });
                    fan_in = h;
                }
                stages.push(Stage::DenseOut {
                    fan_in,
                    fan_out: self.num_classes,
                });
            }
            Architecture::SmallConv { channels } => {
                if channels.is_empty() {
                    return Err(Error::invalid("small_conv needs at least one conv stage"));
                }
                let (mut c, mut h, mut w) =
                    (self.input.channels, self.input.height, self.input.width);
                for &c_out in channels {
                    if c_out == 0 {
                        return Err(Error::invalid("conv channel count 0"));
                    }
                    if h < 2 || w < 2 {
                        return Err(Error::invalid(format!(
                            "feature map {h}x{w} too small to pool"
                        )));
                    }
                    stages.push(Stage::ConvReluPool {
                        c_in: c,
                        h,
                        w,
                        c_out,
                    });
                    c = c_out;
                    h /= 2;
                    w /= 2;
                }
                stages.push(Stage::DenseOut {
                    fan_in: c * h * w,
                    fan_out: self.num_classes,
                });
            }
        }
        Ok(stages)
    }

    /// Expected (name, shape) list for this spec's parameters.
    fn param_plan(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let mut plan = Vec::new();
        let mut dense = 0usize;
        let mut conv = 0usize;
        for stage in self.stages()? {
            match stage {
                Stage::DenseRelu { fan_in, fan_out } | Stage::DenseOut { fan_in, fan_out } => {
                    plan.push((format!("dense{dense}.weight"), vec![fan_out, fan_in]));
                    plan.push((format!("dense{dense}.bias"), vec![fan_out]));
                    dense += 1;
                }
                Stage::ConvReluPool { c_in, c_out, .. } => {
                    plan.push((format!("conv{conv}.weight"), vec![c_out, c_in, 3, 3]));
                    plan.push((format!("conv{conv}.bias"), vec![c_out]));
                    conv += 1;
                }
            }
        }
        Ok(plan)
    }
}

/// Ordered named tensors: model weights, gradients, and momentum buffers
/// all share this layout so they can be zipped positionally.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    entries: Vec<(String, Tensor)>,
}

pub type Gradient = ParamSet;

impl ParamSet {
    pub fn new(entries: Vec<(String, Tensor)>) -> Self {
        ParamSet { entries }
    }

    pub fn zeros_like(other: &ParamSet) -> ParamSet {
        ParamSet {
            entries: other
                .entries
                .iter()
                .map(|(n, t)| (n.clone(), Tensor::zeros(t.shape().to_vec())))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(String, Tensor)] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [(String, Tensor)] {
        &mut self.entries
    }

    pub fn congruent_with(&self, other: &ParamSet) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(other.entries.iter())
                .all(|((an, at), (bn, bt))| an == bn && at.shape() == bt.shape())
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|(_, t)| t.all_finite())
    }

    /// Total number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.len()).sum()
    }

    fn tensor(&self, i: usize) -> &Tensor {
        &self.entries[i].1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    spec: ModelSpec,
    params: ParamSet,
}

impl ModelState {
    /// Validates that the parameter layout matches the spec exactly.
    pub fn new(spec: ModelSpec, params: ParamSet) -> Result<Self> {
        let plan = spec.param_plan()?;
        if plan.len() != params.entries.len() {
            return Err(Error::shape(
                format!("{} parameter tensors", plan.len()),
                format!("{}", params.entries.len()),
            ));
        }
        for ((want_name, want_shape),(got_name, got)) in plan.iter().zip(params.entries.iter()) {
            if want_name != got_name || want_shape.as_slice() != got.shape() {
                return Err(Error::shape(
                    format!("{want_name} {want_shape:?}"),
                    format!("{got_name} {:?}", got.shape()),
                ));
            }
        }
        if !params.all_finite() {
            return Err(Error::NonFinite("model parameters".into()));
        }
        Ok(ModelState { spec, params })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    /// Mutable access for the optimizer. Callers must keep weights finite;
    /// `sgd_step` re-checks after every update.
    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }
}

/// Fan-in scaled uniform initialization: weights from
/// U(-sqrt(6/fan_in), sqrt(6/fan_in)), biases zero. Draws happen in layer
/// order, row-major within each tensor, so a seed pins every weight.
pub fn init(spec: &ModelSpec, rng: &mut Rng) -> Result<ModelState> {
    let plan = spec.param_plan()?;
    let mut entries = Vec::with_capacity(plan.len());
    for (name, shape) in plan {
        let n: usize = shape.iter().product();
        let tensor = if name.ends_with(".bias") {
            Tensor::zeros(shape)
        } else {
            // fan_in: everything but the leading output dimension.
            let fan_in: usize = shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            let data: Vec<f64> = (0..n).map(|_| rng.uniform(-bound, bound)).collect();
            Tensor::new(shape, data)?
        };
        entries.push((name, tensor));
    }
    ModelState::new(spec.clone(), ParamSet::new(entries))
}

fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let wt = w.transpose()?;
    let mut z = x.matmul(&wt)?;
    let out = w.shape()[0];
    let n = z.shape()[0];
    let zd = z.data_mut();
    let bd = b.data();
    for i in 0..n {
        for (zv, bv) in zd[i * out..(i + 1) * out].iter_mut().zip(bd.iter()) {
            *zv += *bv;
        }
    }
    Ok(z)
}

/// Returns (d_weight, d_bias, d_input).
fn dense_backward(x: &Tensor, w: &Tensor, dz: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let dw = dz.transpose()?.matmul(x)?;
    let (n, out) = (dz.shape()[0], dz.shape()[1]);
    let mut db = vec![0.0; out];
    for i in 0..n {
        for o in 0..out {
            db[o] += dz.data()[i * out + o];
        }
    }
    let dx = dz.matmul(w)?;
    Ok((dw, Tensor::from_vec(db), dx))
}

fn relu(z: &Tensor) -> Tensor {
    Tensor::new(
        z.shape().to_vec(),
        z.data().iter().map(|v| v.max(0.0)).collect(),
    )
    .expect("same shape")
}

fn relu_backward(preact: &Tensor, dout: &Tensor) -> Tensor {
    Tensor::new(
        dout.shape().to_vec(),
        preact
            .data()
            .iter()
            .zip(dout.data().iter())
            .map(|(z, d)| if *z > 0.0 { *d } else { 0.0 })
            .collect(),
    )
    .expect("same shape")
}

/// 3x3 same-padding convolution over (n, c_in*h*w) feature maps.
fn conv_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    c_in: usize,
    h: usize,
    wd: usize,
    c_out: usize,
) -> Tensor {
    let n = x.shape()[0];
    let hw = h * wd;
    let mut out = vec![0.0; n * c_out * hw];
    let xd = x.data();
    let wdt = w.data();
    let bd = b.data();
    for i in 0..n {
        let sample = &xd[i * c_in * hw..(i + 1) * c_in * hw];
        let dst = &mut out[i * c_out * hw..(i + 1) * c_out * hw];
        for o in 0..c_out {
            let wbase = o * c_in * 9;
            for y in 0..h {
                for x2 in 0..wd {
                    let mut acc = bd[o];
                    for ci in 0..c_in {
                        let plane = &sample[ci * hw..(ci + 1) * hw];
                        let wk = &wdt[wbase + ci * 9..wbase + ci * 9 + 9];
                        for ky in 0..3usize {
                            let sy = y as i64 + ky as i64 - 1;
                            if sy < 0 || sy >= h as i64 {
                                continue;
                            }
                            for kx in 0..3usize {
                                let sx = x2 as i64 + kx as i64 - 1;
                                if sx < 0 || sx >= wd as i64 {
                                    continue;
                                }
                                acc += wk[ky * 3 + kx] * plane[sy as usize * wd + sx as usize];
                            }
                        }
                    }
                    dst[o * hw + y * wd + x2] = acc;
                }
            }
        }
    }
    Tensor::new(vec![n, c_out * hw], out).expect("conv output shape")
}

/// Returns (d_weight, d_bias, d_input) for the same-padding 3x3 conv.
fn conv_backward(
    x: &Tensor,
    w: &Tensor,
    dz: &Tensor,
    c_in: usize,
    h: usize,
    wd: usize,
    c_out: usize,
) -> (Tensor, Tensor, Tensor) {
    let n = x.shape()[0];
    let hw = h * wd;
    let xd = x.data();
    let wdt = w.data();
    let dzd = dz.data();
    let mut dw = vec![0.0; c_out * c_in * 9];
    let mut db = vec![0.0; c_out];
    let mut dx = vec![0.0; n * c_in * hw];
    for i in 0..n {
        let sample = &xd[i * c_in * hw..(i + 1) * c_in * hw];
        let dsample = &dzd[i * c_out * hw..(i + 1) * c_out * hw];
        let dxs = &mut dx[i * c_in * hw..(i + 1) * c_in * hw];
        for o in 0..c_out {
            let dplane = &dsample[o * hw..(o + 1) * hw];
            let wbase = o * c_in * 9;
            for y in 0..h {
                for x2 in 0..wd {
                    let g = dplane[y * wd + x2];
                    if g == 0.0 {
                        continue;
                    }
                    db[o] += g;
                    for ci in 0..c_in {
                        let plane = &sample[ci * hw..(ci + 1) * hw];
                        let dxp = ci * hw;
                        for ky in 0..3usize {
                            let sy = y as i64 + ky as i64 - 1;
                            if sy < 0 || sy >= h as i64 {
                                continue;
                            }
                            for kx in 0..3usize {
                                let sx = x2 as i64 + kx as i64 - 1;
                                if sx < 0 || sx >= wd as i64 {
                                    continue;
                                }
                                let src = sy as usize * wd + sx as usize;
                                dw[wbase + ci * 9 + ky * 3 + kx] += g * plane[src];
                                dxs[dxp + src] += g * wdt[wbase + ci * 9 + ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }
    (
        Tensor::new(vec![c_out, c_in, 3, 3], dw).expect("dw shape"),
        Tensor::from_vec(db),
        Tensor::new(vec![n, c_in * hw], dx).expect("dx shape"),
    )
}

/// 2x2 stride-2 max pool. Ties break to the first element in row-major
/// window order. Returns pooled maps and per-output argmax (flat index
/// into the sample's input feature block) for the backward scatter.
fn maxpool_forward(x: &Tensor, c: usize, h: usize, w: usize) -> (Tensor, Vec<u32>) {
    let n = x.shape()[0];
    let (h2, w2) = (h / 2, w / 2);
    let hw = h * w;
    let out_hw = h2 * w2;
    let xd = x.data();
    let mut out = vec![0.0; n * c * out_hw];
    let mut arg = vec![0u32; n * c * out_hw];
    for i in 0..n {
        let sample = &xd[i * c * hw..(i + 1) * c * hw];
        for ch in 0..c {
            let plane = &sample[ch * hw..(ch + 1) * hw];
            for y in 0..h2 {
                for x2 in 0..w2 {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0usize;
                    for dy in 0..2 {
                        for dx in 0..2 {
                            let idx = (2 * y + dy) * w + 2 * x2 + dx;
                            if plane[idx] > best {
                                best = plane[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    let o = i * c * out_hw + ch * out_hw + y * w2 + x2;
                    out[o] = best;
                    arg[o] = (ch * hw + best_idx) as u32;
                }
            }
        }
    }
    (
        Tensor::new(vec![n, c * out_hw], out).expect("pool shape"),
        arg,
    )
}

fn maxpool_backward(
    dout: &Tensor,
    arg: &[u32],
    c: usize,
    h: usize,
    w: usize,
) -> Tensor {
    let n = dout.shape()[0];
    let mut dx = vec![0.0; n * c * h * w];
    let per_sample_out = dout.shape()[1];
    for i in 0..n {
        let base = i * c * h * w;
        for j in 0..per_sample_out {
            dx[base + arg[i * per_sample_out + j] as usize] += dout.data()[i * per_sample_out + j];
        }
    }
    Tensor::new(vec![n, c * h * w], dx).expect("pool grad shape")
}

struct StageCache {
    /// Input activation to the stage.
    input: Tensor,
    /// Pre-ReLU values (dense z or conv z); None for the output layer.
    preact: Option<Tensor>,
    /// Pool argmax for conv stages.
    pool_arg: Option<Vec<u32>>,
}

fn forward_impl(
    model: &ModelState,
    batch: &Tensor,
    keep_cache: bool,
) -> Result<(Tensor, Vec<StageCache>)> {
    if batch.rank() != 2 || batch.shape()[1] != model.spec.input.feature_len() {
        return Err(Error::shape(
            format!("(n, {})", model.spec.input.feature_len()),
            format!("{:?}", batch.shape()),
        ));
    }
    let stages = model.spec.stages()?;
    let mut caches = Vec::new();
    let mut act = batch.clone();
    for (k, stage) in stages.iter().enumerate() {
        let w = model.params.tensor(2 * k);
        let b = model.params.tensor(2 * k + 1);
        match stage {
            Stage::DenseRelu { .. } => {
                let z = dense_forward(&act, w, b)?;
                let a = relu(&z);
                if keep_cache {
                    caches.push(StageCache {
                        input: act,
                        preact: Some(z),
                        pool_arg: None,
                    });
                }
                act = a;
            }
            Stage::DenseOut { .. } => {
                let z = dense_forward(&act, w, b)?;
                if keep_cache {
                    caches.push(StageCache {
                        input: act,
                        preact: None,
                        pool_arg: None,
                    });
                }
                act = z;
            }
            Stage::ConvReluPool { c_in, h, w: wd, c_out } => {
                let z = conv_forward(&act, w, b, *c_in, *h, *wd, *c_out);
                let r = relu(&z);
                let (p, arg) = maxpool_forward(&r, *c_out, *h, *wd);
                if keep_cache {
                    caches.push(StageCache {
                        input: act,
                        preact: Some(z),
                        pool_arg: Some(arg),
                    });
                }
                act = p;
            }
        }
    }
    Ok((act, caches))
}

/// Logits of shape (batch, num_classes).
pub fn forward(model: &ModelState, batch: &Tensor) -> Result<Tensor> {
    Ok(forward_impl(model, batch, false)?.0)
}

/// Numerically stable softmax cross-entropy. Returns (mean loss, dlogits)
/// where dlogits is the gradient of the MEAN loss.
fn softmax_ce(logits: &Tensor, labels: &[usize], num_classes: usize) -> Result<(f64, Tensor)> {
    let n = logits.shape()[0];
    if labels.len() != n {
        return Err(Error::shape(
            format!("{n} labels"),
            format!("{}", labels.len()),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyInput("softmax batch".into()));
    }
    let k = logits.shape()[1];
    let mut dl = vec![0.0; n * k];
    let mut loss = 0.0;
    for i in 0..n {
        let y = labels[i];
        if y >= num_classes {
            return Err(Error::LabelOutOfRange {
                label: y,
                num_classes,
            });
        }
        let row = &logits.data()[i * k..(i + 1) * k];
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for &v in row {
            denom += (v - m).exp();
        }
        loss += denom.ln() + m - row[y];
        let drow = &mut dl[i * k..(i + 1) * k];
        for (j, &v) in row.iter().enumerate() {
            drow[j] = (v - m).exp() / denom / n as f64;
        }
        drow[y] -= 1.0 / n as f64;
    }
    Ok((loss / n as f64, Tensor::new(vec![n, k], dl)?))
}

/// Mean cross-entropy over the batch and its exact gradient.
pub fn loss_and_grad(
    model: &ModelState,
    batch: &Tensor,
    labels: &[usize],
) -> Result<(f64, Gradient)> {
    let (logits, caches) = forward_impl(model, batch, true)?;
    let (loss, dlogits) = softmax_ce(&logits, labels, model.spec.num_classes)?;
    let stages = model.spec.stages()?;
    let mut grads: Vec<Option<(Tensor, Tensor)>> = vec![None; stages.len()];
    let mut dact = dlogits;
    for (k, stage) in stages.iter().enumerate().rev() {
        let cache = &caches[k];
        let w = model.params.tensor(2 * k);
        match stage {
            Stage::DenseOut { .. } => {
                let (dw, db, dx) = dense_backward(&cache.input, w, &dact)?;
                grads[k] = Some((dw, db));
                dact = dx;
            }
            Stage::DenseRelu { .. } => {
                let dz = relu_backward(cache.preact.as_ref().unwrap(), &dact);
                let (dw, db, dx) = dense_backward(&cache.input, w, &dz)?;
                grads[k] = Some((dw, db));
                dact = dx;
            }
            Stage::ConvReluPool { c_in, h, w: wd, c_out } => {
                let dr = maxpool_backward(&dact, cache.pool_arg.as_ref().unwrap(), *c_out, *h, *wd);
                let dz = relu_backward(cache.preact.as_ref().unwrap(), &dr);
                let (dw, db, dx) = conv_backward(&cache.input, w, &dz, *c_in, *h, *wd, *c_out);
                grads[k] = Some((dw, db));
                dact = dx;
            }
        }
    }
    let mut entries = Vec::with_capacity(model.params.entries().len());
    for (k, pair) in grads.into_iter().enumerate() {
        let (dw, db) = pair.expect("every stage visited");
        entries.push((model.params.entries()[2 * k].0.clone(), dw));
        entries.push((model.params.entries()[2 * k + 1].0.clone(), db));
    }
    Ok((loss, ParamSet::new(entries)))
}

/// Argmax per row; ties resolve to the lowest class index.
fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    let (n, k) = (logits.shape()[0], logits.shape()[1]);
    (0..n)
        .map(|i| {
            let row = &logits.data()[i * k..(i + 1) * k];
            let mut best = 0usize;
            for j in 1..k {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of argmax-correct predictions over the whole dataset.
pub fn evaluate(model: &ModelState, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("evaluation dataset".into()));
    }
    let idxs: Vec<usize> = (0..data.len()).collect();
    let mut correct = 0usize;
    for chunk in idxs.chunks(EVAL_CHUNK) {
        let (x, y) = data.batch(chunk);
        let logits = forward(model, &x)?;
        for (pred, label) in argmax_rows(&logits).into_iter().zip(y) {
            if pred == label {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Attack success rate: over clean-test samples with true label != y_t,
/// the fraction classified as y_t after the trigger is stamped on.
pub fn attack_success_rate(
    model: &ModelState,
    clean_test: &Dataset,
    trigger: &TriggerSpec,
    target_label: usize,
) -> Result<f64> {
    if target_label >= clean_test.num_classes() {
        return Err(Error::LabelOutOfRange {
            label: target_label,
            num_classes: clean_test.num_classes(),
        });
    }
    let eligible: Vec<usize> = (0..clean_test.len())
        .filter(|&i| clean_test.label(i) != target_label)
        .collect();
    if eligible.is_empty() {
        return Err(Error::NoEligibleSamples { target_label });
    }
    let f = clean_test.feature_len();
    let mut hits = 0usize;
    for chunk in eligible.chunks(EVAL_CHUNK) {
        let mut rows = Vec::with_capacity(chunk.len() * f);
        for &i in chunk {
            let stamped = patch(clean_test.image(i), trigger)?;
            rows.extend_from_slice(stamped.flat());
        }
        let x = Tensor::new(vec![chunk.len(), f], rows)?;
        let logits = forward(model, &x)?;
        hits += argmax_rows(&logits)
            .into_iter()
            .filter(|&p| p == target_label)
            .count();
    }
    Ok(hits as f64 / eligible.len() as f64)
}

/// Writes the checkpoint: magic "DFMODEL1", u64-LE length-prefixed UTF-8
/// JSON spec, u32-LE tensor count, then per tensor a u32-LE name length,
/// the name, u32-LE rank, u64-LE dims, and the data as f64-LE. Byte-exact:
/// saving the same model twice produces identical files.
pub fn save_model(model: &ModelState, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    let spec_json = serde_json::to_vec(&model.spec)?;
    w.write_u64::<LittleEndian>(spec_json.len() as u64)?;
    w.write_all(&spec_json)?;
    w.write_u32::<LittleEndian>(model.params.entries().len() as u32)?;
    for (name, tensor) in model.params.entries() {
        w.write_u32::<LittleEndian>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u32::<LittleEndian>(tensor.rank() as u32)?;
        for &d in tensor.shape() {
            w.write_u64::<LittleEndian>(d as u64)?;
        }
        for &v in tensor.data() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ModelState> {
    let err = |detail: &str| Error::Checkpoint {
        path: path.display().to_string(),
        detail: detail.to_string(),
    };
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| err("truncated magic"))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(err(&format!(
            "bad magic {:?}, expected {:?}",
            magic, CHECKPOINT_MAGIC
        )));
    }
    let spec_len = r
        .read_u64::<LittleEndian>()
        .map_err(|_| err("truncated spec length"))? as usize;
    if spec_len > 1 << 20 {
        return Err(err("unreasonable spec length"));
    }
    let mut spec_bytes = vec![0u8; spec_len];
    r.read_exact(&mut spec_bytes).map_err(|_| err("truncated spec"))?;
    let spec: ModelSpec = serde_json::from_slice(&spec_bytes)?;
    let count = r
        .read_u32::<LittleEndian>()
        .map_err(|_| err("truncated tensor count"))? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r
            .read_u32::<LittleEndian>()
            .map_err(|_| err("truncated name length"))? as usize;
        let mut name_bytes = vec![0u8; name_len];
        r.read_exact(&mut name_bytes).map_err(|_| err("truncated name"))?;
        let name = String::from_utf8(name_bytes).map_err(|_| err("name not UTF-8"))?;
        let rank = r
            .read_u32::<LittleEndian>()
            .map_err(|_| err("truncated rank"))? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(
                r.read_u64::<LittleEndian>()
                    .map_err(|_| err("truncated dims"))? as usize,
            );
        }
        let n: usize = shape.iter().product();
        let mut data = vec![0.0f64; n];
        for v in data.iter_mut() {
            *v = r
                .read_f64::<LittleEndian>()
                .map_err(|_| err("truncated tensor data"))?;
        }
        entries.push((name, Tensor::new(shape, data)?));
    }
    ModelState::new(spec, ParamSet::new(entries))
}
