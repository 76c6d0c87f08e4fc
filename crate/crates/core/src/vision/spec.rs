use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convolution window side length.
pub const FILTER_WINDOW: usize = 3;
/// Max-pool window side length and stride.
pub const POOL: usize = 2;

/// One VGG-style stage: `convs` 3×3 convolutions with `filters` output
/// channels, followed by a 2×2 max-pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub convs: usize,
    pub filters: usize,
}

/// Architecture of a convolutional autoencoder: an encoder of pooled
/// stages and a decoder that mirrors it with upsampling.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoencoderSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub stages: Vec<Stage>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv {
        in_channels: usize,
        out_channels: usize,
        activation: Activation,
    },
    MaxPool,
    UpSample,
}

/// `(height, width, channels)`
pub type Shape = (usize, usize, usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerPlan {
    pub name: String,
    pub kind: LayerKind,
    pub input: Shape,
    pub output: Shape,
    pub encoder: bool,
}

impl LayerPlan {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LayerKind::Conv { .. } => "Conv2d",
            LayerKind::MaxPool => "MaxPool",
            LayerKind::UpSample => "UpSample",
        }
    }

    /// Weight tensor shape `[out, in, 3, 3]` for convolutions.
    pub fn weight_shape(&self) -> Option<[usize; 4]> {
        match self.kind {
            LayerKind::Conv {
                in_channels, out_channels, ..
            } => Some([out_channels, in_channels, FILTER_WINDOW, FILTER_WINDOW]),
            _ => None,
        }
    }
}

impl AutoencoderSpec {
    /// The 13-convolution VGG16 encoder with its mirrored decoder.
    pub fn vgg16(size: usize) -> Self {
        let stage = |convs, filters| Stage { convs, filters };
        Self {
            height: size,
            width: size,
            channels: 3,
            stages: vec![stage(2, 64), stage(2, 128), stage(3, 256), stage(3, 512), stage(3, 512)],
        }
    }

    /// Small three-stage network for desk-scale runs and tests.
    pub fn compact(size: usize) -> Self {
        let stage = |convs, filters| Stage { convs, filters };
        Self {
            height: size,
            width: size,
            channels: 3,
            stages: vec![stage(1, 8), stage(1, 16), stage(1, 16)],
        }
    }

    pub fn bottleneck_filters(&self) -> usize {
        self.stages.last().map_or(self.channels, |s| s.filters)
    }

    pub fn bottleneck_shape(&self) -> Shape {
        let f = 1 << self.stages.len();
        (self.height / f, self.width / f, self.bottleneck_filters())
    }

    pub fn input_shape(&self) -> Shape {
        (self.height, self.width, self.channels)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() || self.stages.iter().any(|s| s.convs == 0 || s.filters == 0) {
            return Err(Error::Spec("every stage needs at least one conv and one filter".into()));
        }
        if self.channels == 0 {
            return Err(Error::Spec("input must have at least one channel".into()));
        }
        let f = 1usize << self.stages.len();
        if self.height == 0 || self.width == 0 || self.height % f != 0 || self.width % f != 0 {
            return Err(Error::Spec(format!(
                "input {}x{} is not divisible by 2^{} for {} pooling stages",
                self.height,
                self.width,
                self.stages.len(),
                self.stages.len()
            )));
        }
        Ok(())
    }

    /// Every layer with its input and output shape, encoder first.
    pub fn layer_plan(&self) -> Result<Vec<LayerPlan>> {
        self.validate()?;
        let mut plan = Vec::new();
        let (mut h, mut w, mut c) = self.input_shape();
        let conv = |name: String, h, w, cin, cout, act, encoder| LayerPlan {
            name,
            kind: LayerKind::Conv {
                in_channels: cin,
                out_channels: cout,
                activation: act,
            },
            input: (h, w, cin),
            output: (h, w, cout),
            encoder,
        };

        for (s, stage) in self.stages.iter().enumerate() {
            for k in 0..stage.convs {
                plan.push(conv(
                    format!("encoder.stage{}.conv{}", s + 1, k + 1),
                    h,
                    w,
                    c,
                    stage.filters,
                    Activation::Relu,
                    true,
                ));
                c = stage.filters;
            }
            plan.push(LayerPlan {
                name: format!("encoder.stage{}.pool", s + 1),
                kind: LayerKind::MaxPool,
                input: (h, w, c),
                output: (h / POOL, w / POOL, c),
                encoder: true,
            });
            h /= POOL;
            w /= POOL;
        }

        for (s, stage) in self.stages.iter().enumerate().rev() {
            plan.push(LayerPlan {
                name: format!("decoder.stage{}.upsample", s + 1),
                kind: LayerKind::UpSample,
                input: (h, w, c),
                output: (h * POOL, w * POOL, c),
                encoder: false,
            });
            h *= POOL;
            w *= POOL;
            for k in 0..stage.convs {
                plan.push(conv(
                    format!("decoder.stage{}.conv{}", s + 1, k + 1),
                    h,
                    w,
                    c,
                    stage.filters,
                    Activation::Relu,
                    false,
                ));
                c = stage.filters;
            }
        }
        plan.push(conv("decoder.output".into(), h, w, c, self.channels, Activation::Sigmoid, false));
        Ok(plan)
    }

    pub fn parameter_count(&self) -> Result<usize> {
        Ok(self
            .layer_plan()?
            .iter()
            .filter_map(|l| l.weight_shape())
            .map(|[o, i, kh, kw]| o * i * kh * kw + o)
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vgg16_bottleneck() {
        let spec = AutoencoderSpec::vgg16(224);
        assert_eq!(spec.bottleneck_shape(), (7, 7, 512));
        let plan = spec.layer_plan().unwrap();
        let last_pool = plan.iter().rfind(|l| l.encoder).unwrap();
        assert_eq!(last_pool.output, (7, 7, 512));
        assert_eq!(plan.last().unwrap().output, (224, 224, 3));
        assert_eq!(plan[0].weight_shape(), Some([64, 3, 3, 3]));
        assert_eq!(plan[0].output, (224, 224, 64));
    }

    #[test]
    fn reduced_five_stage_bottleneck() {
        let spec = AutoencoderSpec::vgg16(64);
        assert_eq!(spec.bottleneck_shape(), (2, 2, 512));
    }

    #[test]
    fn pools_and_upsamples_pair_up() {
        for spec in [
            AutoencoderSpec::vgg16(224),
            AutoencoderSpec::compact(32),
            AutoencoderSpec::compact(64),
        ] {
            let plan = spec.layer_plan().unwrap();
            let pools = plan.iter().filter(|l| l.kind == LayerKind::MaxPool).count();
            let ups = plan.iter().filter(|l| l.kind == LayerKind::UpSample).count();
            assert_eq!(pools, ups);
            assert_eq!(plan.last().unwrap().output, spec.input_shape());
            for pair in plan.windows(2) {
                assert_eq!(pair[0].output, pair[1].input, "{} -> {}", pair[0].name, pair[1].name);
            }
        }
    }

    #[test]
    fn indivisible_input_rejected() {
        assert!(matches!(AutoencoderSpec::vgg16(100).layer_plan(), Err(Error::Spec(_))));
        assert!(matches!(AutoencoderSpec::compact(12).validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn vgg16_encoder_parameter_count() {
        // Convolutional part of VGG16: 14,714,688 parameters.
        let plan = AutoencoderSpec::vgg16(224).layer_plan().unwrap();
        let encoder: usize = plan
            .iter()
            .filter(|l| l.encoder)
            .filter_map(|l| l.weight_shape())
            .map(|[o, i, kh, kw]| o * i * kh * kw + o)
            .sum();
        assert_eq!(encoder, 14_714_688);
    }
}
