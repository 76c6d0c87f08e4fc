use std::path::Path;

use crate::error::{Error, Result};

/// Length of one analysis window.
pub const WINDOW_SECONDS: f64 = 0.4;
/// Distance between consecutive window starts (10 windows per second).
pub const HOP_SECONDS: f64 = 0.1;

/// Decoded mono audio.
#[derive(Clone, Debug)]
pub struct AudioTrack {
    pub sample_rate: u32,
    pub samples: Vec<f32>,
}

impl AudioTrack {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Read a WAV file, averaging all channels to mono.
    pub fn read_wav(path: &Path) -> Result<Self> {
        let decode_err = |reason: String| Error::Decode {
            path: path.to_path_buf(),
            reason,
        };
        let reader = hound::WavReader::open(path).map_err(|e| decode_err(e.to_string()))?;
        let spec = reader.spec();
        let channels = spec.channels.max(1) as usize;
        let interleaved: Vec<f32> = match spec.sample_format {
            hound::SampleFormat::Float => reader
                .into_samples::<f32>()
                .collect::<Result<_, _>>()
                .map_err(|e| decode_err(e.to_string()))?,
            hound::SampleFormat::Int => {
                let scale = 1.0 / (1u64 << (spec.bits_per_sample - 1)) as f32;
                reader
                    .into_samples::<i32>()
                    .map(|s| s.map(|v| v as f32 * scale))
                    .collect::<Result<_, _>>()
                    .map_err(|e| decode_err(e.to_string()))?
            }
        };
        Ok(Self {
            sample_rate: spec.sample_rate,
            samples: downmix(&interleaved, channels),
        })
    }

    /// Write as 32-bit float mono WAV.
    pub fn write_wav(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 32,
            sample_format: hound::SampleFormat::Float,
        };
        let io = |e: hound::Error| Error::Io(std::io::Error::other(e));
        let mut writer = hound::WavWriter::create(path, spec).map_err(io)?;
        for &s in &self.samples {
            writer.write_sample(s).map_err(io)?;
        }
        writer.finalize().map_err(io)
    }
}

/// Average interleaved channels into one.
pub fn downmix(interleaved: &[f32], channels: usize) -> Vec<f32> {
    if channels <= 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f32>() / channels as f32)
        .collect()
}

/// Overlapping 400 ms windows at a 100 ms hop, sharing one sample buffer.
#[derive(Clone, Debug)]
pub struct AudioWindowSeries {
    pub sample_rate: u32,
    /// Samples per window.
    pub window_len: usize,
    /// Samples between window starts.
    pub hop: usize,
    samples: Vec<f32>,
    count: usize,
}

impl AudioWindowSeries {
    pub fn from_samples(samples: Vec<f32>, sample_rate: u32) -> Self {
        let window_len = (WINDOW_SECONDS * sample_rate as f64).round() as usize;
        let hop = (HOP_SECONDS * sample_rate as f64).round() as usize;
        let count = if samples.len() >= window_len && window_len > 0 {
            (samples.len() - window_len) / hop + 1
        } else {
            0
        };
        Self {
            sample_rate,
            window_len,
            hop,
            samples,
            count,
        }
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn window(&self, i: usize) -> &[f32] {
        let start = i * self.hop;
        &self.samples[start..start + self.window_len]
    }

    pub fn windows(&self) -> impl Iterator<Item = &[f32]> + '_ {
        (0..self.count).map(move |i| self.window(i))
    }

    /// Start time of window `i`, in seconds.
    pub fn timestamp(&self, i: usize) -> f64 {
        (i * self.hop) as f64 / self.sample_rate as f64
    }

    pub fn timestamps(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.timestamp(i)).collect()
    }

    pub fn window_ms(&self) -> f64 {
        self.window_len as f64 * 1000.0 / self.sample_rate as f64
    }

    pub fn hop_ms(&self) -> f64 {
        self.hop as f64 * 1000.0 / self.sample_rate as f64
    }

    pub fn truncate(&mut self, len: usize) {
        self.count = self.count.min(len);
    }
}

/// Cut a track into analysis windows starting at 0, 0.1, 0.2, … s.
pub fn window_audio(track: Option<&AudioTrack>) -> Result<AudioWindowSeries> {
    let track = track.ok_or_else(|| Error::ViewUnavailable("recording has no audio track".into()))?;
    if track.sample_rate < 8000 {
        return Err(Error::Config(format!(
            "audio sample rate {} Hz cannot represent the 3400 Hz band edge",
            track.sample_rate
        )));
    }
    Ok(AudioWindowSeries::from_samples(track.samples.clone(), track.sample_rate))
}
