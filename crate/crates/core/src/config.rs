//! Pipeline configuration as a flat file of dotted keys, e.g.
//!
//! ```text
//! seed = 7
//! modalities = ["face", "audio"]
//! audio.pca_k = 2
//! fusion.epochs = 30
//! clipper.fraction = 0.001
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::BandSpec;
use crate::clipper::ClipperConfig;
use crate::error::{Error, Result};
use crate::ingest::{RegionSpec, View, DEFAULT_RATE, PRODUCTION_FRAME_SIZE};
use crate::vision::AutoencoderSpec;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Video container or directory of numbered frame images.
    pub video: Option<PathBuf>,
    /// Audio file; defaults to the video container.
    pub audio: Option<PathBuf>,
    /// Frame rate of an image-sequence directory.
    pub fps: Option<f64>,
    /// Synthetic stream spec (TOML) used instead of a recording.
    pub synthetic: Option<PathBuf>,
    pub video_id: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub rate: f64,
    pub frame_size: u32,
    pub region: Option<RegionSpec>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            rate: DEFAULT_RATE,
            frame_size: PRODUCTION_FRAME_SIZE,
            region: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// VGG16-like five-stage encoder.
    Vgg16,
    /// Three narrow stages for small frames and tests.
    Compact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub freeze_encoder: bool,
    pub face_encoder_weights: Option<PathBuf>,
    pub game_encoder_weights: Option<PathBuf>,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::Vgg16,
            epochs: 10,
            batch_size: 16,
            freeze_encoder: false,
            face_encoder_weights: None,
            game_encoder_weights: None,
        }
    }
}

impl VisionConfig {
    pub fn spec(&self, frame_size: u32) -> AutoencoderSpec {
        match self.architecture {
            Architecture::Vgg16 => AutoencoderSpec::vgg16(frame_size as usize),
            Architecture::Compact => AutoencoderSpec::compact(frame_size as usize),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub pca_k: usize,
}

impl Default for AudioConfig {
    fn default() -> Self {
        let band = BandSpec::default();
        Self {
            band_low_hz: band.low_hz,
            band_high_hz: band.high_hz,
            pca_k: 1,
        }
    }
}

impl AudioConfig {
    pub fn band(&self) -> BandSpec {
        BandSpec {
            low_hz: self.band_low_hz,
            high_hz: self.band_high_hz,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Defaults to the fused series width.
    pub hidden_units: Option<usize>,
    pub lstm_layers: usize,
    pub epochs: usize,
    pub bptt_window: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            hidden_units: None,
            lstm_layers: 2,
            epochs: 50,
            bptt_window: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub modalities: Vec<View>,
    pub out: PathBuf,
    pub input: InputConfig,
    pub ingest: IngestConfig,
    pub vision: VisionConfig,
    pub audio: AudioConfig,
    pub fusion: FusionConfig,
    pub clipper: ClipperConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            modalities: View::ALL.to_vec(),
            out: PathBuf::from("out"),
            input: InputConfig::default(),
            ingest: IngestConfig::default(),
            vision: VisionConfig::default(),
            audio: AudioConfig::default(),
            fusion: FusionConfig::default(),
            clipper: ClipperConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn uses(&self, view: View) -> bool {
        self.modalities.contains(&view)
    }

    /// Set one dotted key from its textual value, e.g. `("audio.pca_k", "2")`.
    /// The value is read as a TOML literal, falling back to a string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut node = &mut root;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            let table = node
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}` does not name a config section")))?;
            if parts.peek().is_none() {
                table.insert(part.to_string(), parsed);
                break;
            }
            node = table.entry(part).or_insert_with(|| toml::Value::Table(Default::default()));
        }
        *self = root.try_into().map_err(|e: toml::de::Error| Error::Config(format!("{key}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() {
            return Err(Error::Config("at least one modality is required".into()));
        }
        self.clipper.validate()?;
        if self.audio.pca_k == 0 {
            return Err(Error::Config("audio.pca_k must be at least 1".into()));
        }
        if self.fusion.epochs == 0 || self.fusion.bptt_window == 0 || self.fusion.lstm_layers == 0 {
            return Err(Error::Config(
                "fusion.epochs, fusion.bptt_window and fusion.lstm_layers must be positive".into(),
            ));
        }
        if self.fusion.hidden_units == Some(0) {
            return Err(Error::Config("fusion.hidden_units must be positive".into()));
        }
        if self.vision.epochs == 0 || self.vision.batch_size == 0 {
            return Err(Error::Config("vision.epochs and vision.batch_size must be positive".into()));
        }
        match (&self.input.video, &self.input.synthetic) {
            (None, None) => return Err(Error::Config("set input.video or input.synthetic".into())),
            (Some(_), Some(_)) => return Err(Error::Config("input.video and input.synthetic are exclusive".into())),
            _ => {}
        }
        let paths = [
            &self.input.video,
            &self.input.audio,
            &self.input.synthetic,
            &self.vision.face_encoder_weights,
            &self.vision.game_encoder_weights,
        ];
        for p in paths.into_iter().flatten() {
            if !p.exists() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Parse a comma-separated modality list such as `face,audio`.
pub fn parse_modalities(list: &str) -> Result<Vec<View>> {
    let mut views = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let view: View = item.parse()?;
        if !views.contains(&view) {
            views.push(view);
        }
    }
    if views.is_empty() {
        return Err(Error::Config("empty modality list".into()));
    }
    views.sort();
    Ok(views)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_parse() {
        let text = "seed = 7\nmodalities = [\"face\", \"audio\"]\naudio.band_low_hz = 250\naudio.pca_k = 2\nfusion.hidden_units = 4\nfusion.epochs = 3\nfusion.bptt_window = 20\nclipper.fraction = 0.01\n";
        let c = PipelineConfig::from_toml(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.modalities, vec![View::Face, View::Audio]);
        assert_eq!(c.audio.band_low_hz, 250.0);
        assert_eq!(c.audio.band_high_hz, 3400.0);
        assert_eq!(c.fusion.hidden_units, Some(4));
        assert_eq!(c.clipper.fraction, 0.01);
        assert_eq!(c.clipper.pre_s, 10.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(PipelineConfig::from_toml("audio.pca = 2"), Err(Error::Config(_))));
    }

    #[test]
    fn overrides_and_roundtrip() {
        let mut c = PipelineConfig::default();
        c.set("audio.pca_k", "3").unwrap();
        c.set("clipper.fraction", "0.5").unwrap();
        c.set("out", "runs/a").unwrap();
        c.set("ingest.region.x", "4").unwrap_err();
        assert_eq!(c.audio.pca_k, 3);
        assert_eq!(c.out, PathBuf::from("runs/a"));
        assert!(c.set("audio.nope", "1").is_err());
        let back = PipelineConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn modality_lists() {
        assert_eq!(parse_modalities("audio,face").unwrap(), vec![View::Face, View::Audio]);
        assert!(parse_modalities("face,smell").is_err());
        assert!(parse_modalities("").is_err());
    }
}
