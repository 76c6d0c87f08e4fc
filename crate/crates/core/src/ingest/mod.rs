//! Decoding a recording into aligned face, game and audio views on a
//! common 10 Hz timeline.

mod audio;
mod decode;

use std::ops::Range;

use image::imageops::{self, FilterType};
use image::{Rgb, Rgb32FImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use audio::{window_audio, AudioTrack, AudioWindowSeries, HOP_SECONDS, WINDOW_SECONDS};
pub use decode::{StreamRecording, VideoBackend};

/// Sampling rate of every per-timestep series, in frames per second.
pub const DEFAULT_RATE: f64 = 10.0;
/// Side length of preprocessed frames in production.
pub const PRODUCTION_FRAME_SIZE: u32 = 224;

/// An RGB image with channel values in `[0, 1]`.
pub type Frame = Rgb32FImage;

/// One input channel of the system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Face,
    Game,
    Audio,
}

impl View {
    pub const ALL: [View; 3] = [View::Face, View::Game, View::Audio];

    pub fn as_str(self) -> &'static str {
        match self {
            View::Face => "face",
            View::Game => "game",
            View::Audio => "audio",
        }
    }
}

impl std::fmt::Display for View {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "face" => Ok(View::Face),
            "game" => Ok(View::Game),
            "audio" => Ok(View::Audio),
            other => Err(Error::Config(format!("unknown view `{other}`"))),
        }
    }
}

/// Location of the face-cam overlay inside a full stream frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl RegionSpec {
    pub fn validate(&self, frame_width: u32, frame_height: u32) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config(format!("face region has zero size: {self:?}")));
        }
        let fits = self.x.checked_add(self.width).is_some_and(|r| r <= frame_width)
            && self.y.checked_add(self.height).is_some_and(|b| b <= frame_height);
        if !fits {
            return Err(Error::Config(format!(
                "face region {self:?} lies outside the {frame_width}x{frame_height} frame"
            )));
        }
        Ok(())
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.x + self.width && py >= self.y && py < self.y + self.height
    }
}

/// Time-ordered frames of one view at a fixed rate.
#[derive(Clone, Debug)]
pub struct FrameSeries {
    pub view: View,
    pub rate: f64,
    pub frames: Vec<Frame>,
    pub timestamps: Vec<f64>,
}

impl FrameSeries {
    pub fn new(view: View, rate: f64, frames: Vec<Frame>) -> Self {
        let timestamps = (0..frames.len()).map(|i| i as f64 / rate).collect();
        Self {
            view,
            rate,
            frames,
            timestamps,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.frames.truncate(len);
        self.timestamps.truncate(len);
    }

    /// Spatial size shared by all frames, if any.
    pub fn frame_dimensions(&self) -> Option<(u32, u32)> {
        self.frames.first().map(|f| f.dimensions())
    }
}

/// Number of frames produced when sampling `duration` seconds at `rate`.
pub fn sampled_frame_count(duration: f64, rate: f64) -> usize {
    if duration <= 0.0 {
        return 0;
    }
    (duration * rate + 1e-9).floor() as usize
}

/// Native frame index nearest to sample `i` of a `rate` Hz resampling.
pub fn nearest_native_index(i: usize, rate: f64, native_fps: f64, native_count: usize) -> usize {
    let idx = (i as f64 / rate * native_fps).round() as usize;
    idx.min(native_count.saturating_sub(1))
}

/// Resample a recording's video to `rate` frames per second at native resolution.
pub fn sample_frames(recording: &StreamRecording, rate: f64) -> Result<FrameSeries> {
    let mut frames = Vec::new();
    recording.for_each_sampled_frame(rate, |_, frame| {
        frames.push(frame);
        Ok(())
    })?;
    Ok(FrameSeries::new(View::Game, rate, frames))
}

/// Resample and split each frame into face and game views as it is decoded,
/// without holding full-resolution frames in memory.
pub fn sample_views(recording: &StreamRecording, rate: f64, region: &RegionSpec, size: u32) -> Result<(FrameSeries, FrameSeries)> {
    let mut faces = Vec::new();
    let mut games = Vec::new();
    recording.for_each_sampled_frame(rate, |_, frame| {
        let (face, game) = split_views(&frame, region, size)?;
        faces.push(face);
        games.push(game);
        Ok(())
    })?;
    Ok((FrameSeries::new(View::Face, rate, faces), FrameSeries::new(View::Game, rate, games)))
}

/// Black fill used for the masked face region in the game view.
pub const MASK_FILL: Rgb<f32> = Rgb([0.0, 0.0, 0.0]);

/// Copy of `frame` with the face region replaced by [`MASK_FILL`], at native size.
pub fn mask_region(frame: &Frame, region: &RegionSpec) -> Result<Frame> {
    region.validate(frame.width(), frame.height())?;
    let mut out = frame.clone();
    for y in region.y..region.y + region.height {
        for x in region.x..region.x + region.width {
            out.put_pixel(x, y, MASK_FILL);
        }
    }
    Ok(out)
}

/// Crop of the face region at native size.
pub fn crop_region(frame: &Frame, region: &RegionSpec) -> Result<Frame> {
    region.validate(frame.width(), frame.height())?;
    Ok(imageops::crop_imm(frame, region.x, region.y, region.width, region.height).to_image())
}

/// Bilinear resize to `size`×`size` (aspect ratio is not kept), clamped to `[0, 1]`.
pub fn resize_frame(frame: &Frame, size: u32) -> Frame {
    let mut out = if frame.dimensions() == (size, size) {
        frame.clone()
    } else {
        imageops::resize(frame, size, size, FilterType::Triangle)
    };
    for v in out.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    out
}

/// Split a full stream frame into (face crop, masked game frame), both `size`×`size`.
pub fn split_views(frame: &Frame, region: &RegionSpec, size: u32) -> Result<(Frame, Frame)> {
    let face = resize_frame(&crop_region(frame, region)?, size);
    let game = resize_frame(&mask_region(frame, region)?, size);
    Ok((face, game))
}

/// Common index range `[0, T)` over the views that are present.
pub fn align_timelines(face: Option<&FrameSeries>, game: Option<&FrameSeries>, audio: Option<&AudioWindowSeries>) -> Result<Range<usize>> {
    let lengths = [
        face.map(FrameSeries::len),
        game.map(FrameSeries::len),
        audio.map(AudioWindowSeries::len),
    ];
    lengths
        .into_iter()
        .flatten()
        .min()
        .map(|t| 0..t)
        .ok_or_else(|| Error::Pipeline("no views present to align".into()))
}
