use log::debug;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{self, gemm, im2col};
use super::spec::{Activation, AutoencoderSpec, LayerKind, LayerPlan};
use crate::archive::{Archive, ArrayData};
use crate::error::{Error, Result};
use crate::ingest::{Frame, FrameSeries, View};
use crate::optim::{Adadelta, AdadeltaState};

#[derive(Clone, Debug, PartialEq)]
struct ConvParams {
    weight: Vec<f32>,
    bias: Vec<f32>,
}

/// A convolutional autoencoder with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Autoencoder {
    spec: AutoencoderSpec,
    plan: Vec<LayerPlan>,
    /// One entry per layer; `None` for parameter-free layers.
    params: Vec<Option<ConvParams>>,
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub freeze_encoder: bool,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Adadelta,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            batch_size: 16,
            freeze_encoder: false,
            seed: 0,
            optimizer: Adadelta::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainedAutoencoder {
    pub model: Autoencoder,
    pub encoder_frozen: bool,
    /// Mean per-pixel reconstruction loss of each epoch.
    pub training_log: Vec<f64>,
}

/// Build an untrained autoencoder with seeded fan-in-scaled initialization.
pub fn build_autoencoder(spec: &AutoencoderSpec, seed: u64) -> Result<Autoencoder> {
    let plan = spec.layer_plan()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = plan
        .iter()
        .map(|layer| {
            let LayerKind::Conv {
                in_channels,
                out_channels,
                activation,
            } = layer.kind
            else {
                return None;
            };
            let fan_in = (in_channels * 9) as f32;
            let limit = match activation {
                Activation::Relu => (6.0 / fan_in).sqrt(),
                Activation::Sigmoid => (6.0 / (fan_in + (out_channels * 9) as f32)).sqrt(),
            };
            let weight = (0..out_channels * in_channels * 9).map(|_| rng.gen_range(-limit..limit)).collect();
            Some(ConvParams {
                weight,
                bias: vec![0.0; out_channels],
            })
        })
        .collect();
    Ok(Autoencoder {
        spec: spec.clone(),
        plan,
        params,
    })
}

/// Per-layer activations from one forward pass; `acts[0]` is the input.
struct Trace {
    acts: Vec<Vec<f32>>,
    argmax: Vec<Vec<u32>>,
}

impl Autoencoder {
    pub fn spec(&self) -> &AutoencoderSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[LayerPlan] {
        &self.plan
    }

    /// Flattened copy of every encoder weight and bias.
    pub fn encoder_parameters(&self) -> Vec<f32> {
        self.plan
            .iter()
            .zip(&self.params)
            .filter(|(l, _)| l.encoder)
            .filter_map(|(_, p)| p.as_ref())
            .flat_map(|p| p.weight.iter().chain(&p.bias).copied())
            .collect()
    }

    fn to_chw(&self, frame: &Frame) -> Result<Vec<f32>> {
        let (h, w, c) = self.spec.input_shape();
        if c != 3 || frame.dimensions() != (w as u32, h as u32) {
            return Err(Error::Input(format!(
                "frame is {}x{}, model expects {w}x{h}x{c}",
                frame.width(),
                frame.height()
            )));
        }
        let raw = frame.as_raw();
        let hw = h * w;
        let mut out = vec![0.0; 3 * hw];
        for (i, px) in raw.chunks_exact(3).enumerate() {
            out[i] = px[0];
            out[hw + i] = px[1];
            out[2 * hw + i] = px[2];
        }
        Ok(out)
    }

    fn chw_to_frame(&self, data: &[f32]) -> Frame {
        let (h, w, _) = self.spec.input_shape();
        let hw = h * w;
        Frame::from_fn(w as u32, h as u32, |x, y| {
            let i = y as usize * w + x as usize;
            image::Rgb([data[i], data[hw + i], data[2 * hw + i]])
        })
    }

    fn forward(&self, input: Vec<f32>) -> Trace {
        let mut acts = Vec::with_capacity(self.plan.len() + 1);
        let mut argmax = vec![Vec::new(); self.plan.len()];
        acts.push(input);
        let mut cols = Vec::new();
        for (i, (layer, params)) in self.plan.iter().zip(&self.params).enumerate() {
            let x = &acts[i];
            let (h, w, c) = layer.input;
            let out = match layer.kind {
                LayerKind::Conv {
                    out_channels, activation, ..
                } => {
                    let p = params.as_ref().expect("conv params");
                    im2col(x, c, h, w, &mut cols);
                    let hw = h * w;
                    let mut z = vec![0.0; out_channels * hw];
                    for (o, row) in z.chunks_exact_mut(hw).enumerate() {
                        row.fill(p.bias[o]);
                    }
                    gemm(out_channels, c * 9, hw, &p.weight, false, &cols, false, &mut z, 1.0);
                    match activation {
                        Activation::Relu => z.iter_mut().for_each(|v| *v = v.max(0.0)),
                        Activation::Sigmoid => z.iter_mut().for_each(|v| *v = layers::sigmoid(*v)),
                    }
                    z
                }
                LayerKind::MaxPool => layers::maxpool_forward(x, c, h, w, &mut argmax[i]),
                LayerKind::UpSample => layers::upsample_forward(x, c, h, w),
            };
            acts.push(out);
        }
        Trace { acts, argmax }
    }

    /// Accumulate parameter gradients of the loss whose gradient with
    /// respect to the output is `grad`. Layers before `first_trainable` get
    /// no gradients and are not visited.
    fn backward(&self, trace: &Trace, mut grad: Vec<f32>, first_trainable: usize, grads: &mut [Option<ConvParams>]) {
        let mut cols = Vec::new();
        for i in (first_trainable..self.plan.len()).rev() {
            let layer = &self.plan[i];
            let (h, w, c) = layer.input;
            let input = &trace.acts[i];
            let output = &trace.acts[i + 1];
            let need_input_grad = i > first_trainable;
            grad = match layer.kind {
                LayerKind::Conv {
                    out_channels, activation, ..
                } => {
                    let hw = h * w;
                    match activation {
                        Activation::Relu => grad.iter_mut().zip(output).for_each(|(g, &y)| {
                            if y <= 0.0 {
                                *g = 0.0
                            }
                        }),
                        Activation::Sigmoid => grad.iter_mut().zip(output).for_each(|(g, &y)| *g *= y * (1.0 - y)),
                    }
                    im2col(input, c, h, w, &mut cols);
                    let g = grads[i].as_mut().expect("conv grads");
                    gemm(out_channels, hw, c * 9, &grad, false, &cols, true, &mut g.weight, 1.0);
                    for (b, row) in g.bias.iter_mut().zip(grad.chunks_exact(hw)) {
                        *b += row.iter().sum::<f32>();
                    }
                    if !need_input_grad {
                        break;
                    }
                    let p = self.params[i].as_ref().expect("conv params");
                    gemm(c * 9, out_channels, hw, &p.weight, true, &grad, false, &mut cols, 0.0);
                    let mut dx = vec![0.0; c * hw];
                    layers::col2im(&cols, c, h, w, &mut dx);
                    dx
                }
                LayerKind::MaxPool => layers::maxpool_backward(&grad, &trace.argmax[i], input.len()),
                LayerKind::UpSample => layers::upsample_backward(&grad, c, h, w),
            };
        }
    }

    /// Reconstruct one frame.
    pub fn reconstruct(&self, frame: &Frame) -> Result<Frame> {
        let trace = self.forward(self.to_chw(frame)?);
        Ok(self.chw_to_frame(trace.acts.last().expect("output")))
    }

    fn zero_grads(&self, trainable_from: usize) -> Vec<Option<ConvParams>> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.as_ref().filter(|_| i >= trainable_from).map(|p| ConvParams {
                    weight: vec![0.0; p.weight.len()],
                    bias: vec![0.0; p.bias.len()],
                })
            })
            .collect()
    }

    fn encoder_len(&self) -> usize {
        self.plan.iter().take_while(|l| l.encoder).count()
    }

    /// Replace encoder weights with those in `archive` (names and shapes must match).
    pub fn load_encoder(&mut self, archive: &Archive) -> Result<()> {
        for (layer, params) in self.plan.iter().zip(self.params.iter_mut()) {
            let (Some(p), Some(shape)) = (params.as_mut(), layer.weight_shape()) else {
                continue;
            };
            if !layer.encoder {
                continue;
            }
            p.weight.copy_from_slice(archive.f32(&format!("{}.weight", layer.name), &shape)?);
            p.bias.copy_from_slice(archive.f32(&format!("{}.bias", layer.name), &[shape[0]])?);
        }
        Ok(())
    }

    pub fn to_archive(&self) -> Archive {
        let mut archive = Archive {
            metadata: serde_json::json!({ "model": "autoencoder", "spec": self.spec }),
            ..Default::default()
        };
        for (layer, params) in self.plan.iter().zip(&self.params) {
            if let (Some(p), Some(shape)) = (params, layer.weight_shape()) {
                archive.push(format!("{}.weight", layer.name), shape.to_vec(), ArrayData::F32(p.weight.clone()));
                archive.push(format!("{}.bias", layer.name), vec![shape[0]], ArrayData::F32(p.bias.clone()));
            }
        }
        archive
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let spec: AutoencoderSpec = serde_json::from_value(archive.metadata["spec"].clone())
            .map_err(|e| Error::Parse(format!("archive lacks an autoencoder spec: {e}")))?;
        let mut model = build_autoencoder(&spec, 0)?;
        for (layer, params) in model.plan.iter().zip(model.params.iter_mut()) {
            if let (Some(p), Some(shape)) = (params.as_mut(), layer.weight_shape()) {
                p.weight.copy_from_slice(archive.f32(&format!("{}.weight", layer.name), &shape)?);
                p.bias.copy_from_slice(archive.f32(&format!("{}.bias", layer.name), &[shape[0]])?);
            }
        }
        Ok(model)
    }
}

/// Train on the frames of one video to minimize per-pixel squared error.
pub fn train_autoencoder(mut model: Autoencoder, frames: &[Frame], config: &TrainConfig) -> Result<TrainedAutoencoder> {
    if frames.is_empty() {
        return Err(Error::Input("cannot train an autoencoder on zero frames".into()));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be at least 1".into()));
    }
    let first_trainable = if config.freeze_encoder { model.encoder_len() } else { 0 };
    let mut states: Vec<Option<(AdadeltaState<f32>, AdadeltaState<f32>)>> = model
        .params
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.as_ref()
                .filter(|_| i >= first_trainable)
                .map(|p| (AdadeltaState::new(p.weight.len()), AdadeltaState::new(p.bias.len())))
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..frames.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);
    let elements = {
        let (h, w, c) = model.spec.input_shape();
        (h * w * c) as f32
    };

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        for batch in order.chunks(config.batch_size) {
            let mut grads = model.zero_grads(first_trainable);
            for &idx in batch {
                let input = model.to_chw(&frames[idx])?;
                let trace = model.forward(input);
                let output = trace.acts.last().expect("output");
                let target = &trace.acts[0];
                let scale = 2.0 / (elements * batch.len() as f32);
                let mut loss = 0.0f64;
                let grad: Vec<f32> = output
                    .iter()
                    .zip(target)
                    .map(|(&y, &x)| {
                        let d = y - x;
                        loss += (d as f64) * (d as f64);
                        scale * d
                    })
                    .collect();
                epoch_loss += loss / elements as f64;
                model.backward(&trace, grad, first_trainable, &mut grads);
            }
            if !epoch_loss.is_finite() {
                return Err(Error::Divergence { epoch, loss: epoch_loss });
            }
            for ((params, grads), state) in model.params.iter_mut().zip(&grads).zip(states.iter_mut()) {
                if let (Some(p), Some(g), Some((sw, sb))) = (params.as_mut(), grads, state.as_mut()) {
                    config.optimizer.step(sw, &mut p.weight, &g.weight);
                    config.optimizer.step(sb, &mut p.bias, &g.bias);
                }
            }
        }
        let mean = epoch_loss / frames.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Divergence { epoch, loss: mean });
        }
        debug!("autoencoder epoch {epoch}: loss {mean:.6}");
        log.push(mean);
    }
    Ok(TrainedAutoencoder {
        model,
        encoder_frozen: config.freeze_encoder,
        training_log: log,
    })
}

/// Per-timestep novelty values of one view.
#[derive(Clone, Debug, PartialEq)]
pub struct NoveltySeries {
    pub view: View,
    pub values: Vec<f64>,
    pub timestamps: Vec<f64>,
}

impl NoveltySeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.values.truncate(len);
        self.timestamps.truncate(len);
    }
}

/// Mean squared difference over all pixels and channels.
pub fn frame_error(original: &Frame, reconstruction: &Frame) -> Result<f64> {
    if original.dimensions() != reconstruction.dimensions() {
        return Err(Error::Input(format!(
            "frame shapes differ: {:?} vs {:?}",
            original.dimensions(),
            reconstruction.dimensions()
        )));
    }
    let a = original.as_raw();
    let b = reconstruction.as_raw();
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(sum / a.len() as f64)
}

/// Reconstruction error of every frame under `model`.
pub fn reconstruction_errors(model: &Autoencoder, frames: &FrameSeries) -> Result<NoveltySeries> {
    let values = frames
        .frames
        .iter()
        .map(|f| frame_error(f, &model.reconstruct(f)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoveltySeries {
        view: frames.view,
        values,
        timestamps: frames.timestamps.clone(),
    })
}
