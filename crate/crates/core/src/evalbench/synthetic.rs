//! Synthetic multi-view streams with planted novel events.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use image::{imageops, DynamicImage, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AudioTrack, AudioWindowSeries, Frame, FrameSeries, RegionSpec, View};

/// One planted event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedEvent {
    pub time_s: f64,
    pub views: Vec<View>,
    #[serde(default = "unit")]
    pub magnitude: f64,
}

fn unit() -> f64 {
    1.0
}

impl PlantedEvent {
    pub fn affects(&self, view: View) -> bool {
        self.views.contains(&view)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticStreamSpec {
    pub duration_s: f64,
    pub frame_size: u32,
    pub rate: f64,
    pub sample_rate: u32,
    pub base_tone_hz: f64,
    pub burst_tone_hz: f64,
    pub tone_amplitude: f64,
    /// Standard deviation of per-pixel noise on the base patterns.
    pub visual_noise: f64,
    pub audio_noise: f64,
    pub event_duration_s: f64,
    pub events: Vec<PlantedEvent>,
    pub seed: u64,
}

impl Default for SyntheticStreamSpec {
    fn default() -> Self {
        Self {
            duration_s: 120.0,
            frame_size: 64,
            rate: 10.0,
            sample_rate: 16_000,
            base_tone_hz: 440.0,
            burst_tone_hz: 1000.0,
            tone_amplitude: 0.2,
            visual_noise: 0.02,
            audio_noise: 0.0,
            event_duration_s: 1.0,
            events: vec![
                PlantedEvent {
                    time_s: 20.0,
                    views: vec![View::Face, View::Game],
                    magnitude: 1.0,
                },
                PlantedEvent {
                    time_s: 45.0,
                    views: vec![View::Game, View::Audio],
                    magnitude: 1.0,
                },
                PlantedEvent {
                    time_s: 70.0,
                    views: vec![View::Face, View::Audio],
                    magnitude: 1.0,
                },
                PlantedEvent {
                    time_s: 95.0,
                    views: View::ALL.to_vec(),
                    magnitude: 1.0,
                },
            ],
            seed: 0,
        }
    }
}

impl SyntheticStreamSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::Spec(format!("duration {} must be positive", self.duration_s)));
        }
        if self.frame_size == 0 || !(self.rate > 0.0) || !(self.event_duration_s > 0.0) {
            return Err(Error::Spec("frame size, rate and event duration must be positive".into()));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.sample_rate < 8000 || self.burst_tone_hz >= nyquist || self.base_tone_hz >= nyquist {
            return Err(Error::Spec(format!(
                "tones must lie below the {nyquist} Hz Nyquist limit of an ≥ 8 kHz rate"
            )));
        }
        for e in &self.events {
            if !(0.0..self.duration_s).contains(&e.time_s) {
                return Err(Error::Spec(format!(
                    "event at {} s lies outside [0, {})",
                    e.time_s, self.duration_s
                )));
            }
            if !(e.magnitude > 0.0) {
                return Err(Error::Spec(format!("event at {} s has non-positive magnitude", e.time_s)));
            }
            if e.views.is_empty() {
                return Err(Error::Spec(format!("event at {} s affects no view", e.time_s)));
            }
        }
        Ok(())
    }

    pub fn event_times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.time_s).collect()
    }

    fn active(&self, view: View, t: f64) -> Option<(usize, &PlantedEvent)> {
        self.events
            .iter()
            .enumerate()
            .find(|(_, e)| e.affects(view) && t >= e.time_s && t < e.time_s + self.event_duration_s)
    }
}

/// Generated views plus the ground truth that produced them.
#[derive(Clone, Debug)]
pub struct SyntheticStream {
    pub spec: SyntheticStreamSpec,
    pub face: FrameSeries,
    pub game: FrameSeries,
    pub track: AudioTrack,
    pub audio: AudioWindowSeries,
    pub events: Vec<PlantedEvent>,
}

/// Two smooth colour fields per view, blended by a slow oscillation.
struct BasePatterns {
    fields: [Vec<f32>; 2],
    period_s: f64,
}

impl BasePatterns {
    fn new(size: u32, rng: &mut ChaCha8Rng, period_s: f64) -> Self {
        let mut field = || {
            let fx: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.5..2.0));
            let fy: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.5..2.0));
            let ph: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..TAU));
            let n = size as f64;
            let mut out = Vec::with_capacity((size * size * 3) as usize);
            for y in 0..size {
                for x in 0..size {
                    for c in 0..3 {
                        let v = 0.5 + 0.3 * (TAU * (fx[c] * x as f64 / n + fy[c] * y as f64 / n) + ph[c]).sin();
                        out.push(v as f32);
                    }
                }
            }
            out
        };
        Self {
            fields: [field(), field()],
            period_s,
        }
    }

    fn render(&self, t: f64, noise: f64, rng: &mut ChaCha8Rng) -> Vec<f32> {
        let w = (0.5 + 0.5 * (TAU * t / self.period_s).sin()) as f32;
        self.fields[0]
            .iter()
            .zip(&self.fields[1])
            .map(|(a, b)| {
                let n = if noise > 0.0 {
                    noise * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                (a * (1.0 - w) + b * w + n as f32).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Blocky high-frequency pattern unlike the smooth base fields.
fn novel_pattern(size: u32, seed: u64, event: usize, view: View) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(1 + event as u64 * 4 + view as u64);
    let block = (size / 8).max(1);
    let blocks = size.div_ceil(block);
    let colors: Vec<[f32; 3]> = (0..blocks * blocks)
        .map(|_| std::array::from_fn(|_| if rng.gen::<bool>() { 0.95 } else { 0.05 }))
        .collect();
    let mut out = Vec::with_capacity((size * size * 3) as usize);
    for y in 0..size {
        for x in 0..size {
            out.extend_from_slice(&colors[((y / block) * blocks + x / block) as usize]);
        }
    }
    out
}

fn to_frame(size: u32, data: Vec<f32>) -> Frame {
    Frame::from_raw(size, size, data).expect("buffer matches frame size")
}

fn render_view(spec: &SyntheticStreamSpec, view: View, stream: u64, period_s: f64, n: usize) -> FrameSeries {
    let size = spec.frame_size;
    let mut pattern_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    pattern_rng.set_stream(stream);
    let base = BasePatterns::new(size, &mut pattern_rng, period_s);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    noise_rng.set_stream(stream + 16);
    let frames = (0..n)
        .map(|i| {
            let t = i as f64 / spec.rate;
            let mut data = base.render(t, spec.visual_noise, &mut noise_rng);
            if let Some((k, e)) = spec.active(view, t) {
                let m = e.magnitude.min(1.0) as f32;
                for (v, p) in data.iter_mut().zip(novel_pattern(size, spec.seed, k, view)) {
                    *v = *v * (1.0 - m) + p * m;
                }
            }
            to_frame(size, data)
        })
        .collect();
    FrameSeries::new(view, spec.rate, frames)
}

fn render_audio(spec: &SyntheticStreamSpec) -> AudioTrack {
    let sr = spec.sample_rate as f64;
    let n = (spec.duration_s * sr).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(32);
    let phase: f64 = rng.gen_range(0.0..TAU);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let mut v = spec.tone_amplitude * (TAU * spec.base_tone_hz * t + phase).sin();
            if let Some((_, e)) = spec.active(View::Audio, t) {
                v += 0.5 * e.magnitude * (TAU * spec.burst_tone_hz * t).sin();
            }
            if spec.audio_noise > 0.0 {
                v += spec.audio_noise * rng.sample::<f64, _>(StandardNormal);
            }
            v as f32
        })
        .collect();
    AudioTrack {
        sample_rate: spec.sample_rate,
        samples,
    }
}

/// Render the face view, game view and audio of `spec`; deterministic in the seed.
pub fn generate_synthetic_stream(spec: &SyntheticStreamSpec) -> Result<SyntheticStream> {
    spec.validate()?;
    let n = crate::ingest::sampled_frame_count(spec.duration_s, spec.rate);
    let face = render_view(spec, View::Face, 1, 17.0, n);
    let game = render_view(spec, View::Game, 2, 23.0, n);
    let track = render_audio(spec);
    let audio = AudioWindowSeries::from_samples(track.samples.clone(), track.sample_rate);
    Ok(SyntheticStream {
        spec: spec.clone(),
        face,
        game,
        track,
        audio,
        events: spec.events.clone(),
    })
}

/// Files written by [`SyntheticStream::write_recording`].
#[derive(Clone, Debug, PartialEq)]
pub struct RecordingFiles {
    pub frames: PathBuf,
    pub audio: PathBuf,
    pub events: PathBuf,
    pub spec: PathBuf,
    pub region: RegionSpec,
}

impl SyntheticStream {
    /// Write composite PNG frames, a WAV track, the spec and the event list
    /// under `dir`, in the layout `run` reads as an image-sequence recording.
    pub fn write_recording(&self, dir: &Path) -> Result<RecordingFiles> {
        let frames = dir.join("frames");
        std::fs::create_dir_all(&frames)?;
        for i in 0..self.face.len() {
            let path = frames.join(format!("frame_{i:06}.png"));
            DynamicImage::ImageRgb32F(self.composite_frame(i))
                .to_rgb8()
                .save(&path)
                .map_err(|e| Error::Decode {
                    path: path.clone(),
                    reason: e.to_string(),
                })?;
        }
        let audio = dir.join("audio.wav");
        self.track.write_wav(&audio)?;
        let events = dir.join("events.csv");
        let mut table = String::from("time_s,views,magnitude\n");
        for e in &self.events {
            let views: Vec<&str> = e.views.iter().map(|v| v.as_str()).collect();
            table.push_str(&format!("{},\"{}\",{}\n", e.time_s, views.join(","), e.magnitude));
        }
        std::fs::write(&events, table)?;
        let spec = dir.join("spec.toml");
        std::fs::write(&spec, toml::to_string(&self.spec).map_err(|e| Error::Spec(e.to_string()))?)?;
        Ok(RecordingFiles {
            frames,
            audio,
            events,
            spec,
            region: self.composite_region(),
        })
    }

    /// Face-cam region of [`Self::composite_frame`].
    pub fn composite_region(&self) -> RegionSpec {
        let s = self.spec.frame_size;
        RegionSpec {
            x: s,
            y: s,
            width: s,
            height: s,
        }
    }

    /// A full stream frame: the game view upscaled 2× with the face view
    /// pasted into the lower-right quadrant.
    pub fn composite_frame(&self, i: usize) -> Frame {
        let s = self.spec.frame_size;
        let mut canvas = imageops::resize(&self.game.frames[i], 2 * s, 2 * s, imageops::FilterType::Triangle);
        for v in canvas.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        for (x, y, p) in self.face.frames[i].enumerate_pixels() {
            canvas.put_pixel(s + x, s + y, Rgb(p.0));
        }
        canvas
    }
}
