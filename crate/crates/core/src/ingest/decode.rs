use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};

use log::{debug, warn};

use super::{nearest_native_index, sampled_frame_count, AudioTrack, Frame};
use crate::error::{Error, Result};

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

/// Where decoded video frames come from.
#[derive(Clone, Debug)]
pub enum VideoBackend {
    /// Frames already in memory (synthetic streams, tests).
    Memory(Vec<Frame>),
    /// A directory of still images, one per native frame, in lexical order.
    ImageSequence(Vec<PathBuf>),
    /// Any container the system `ffmpeg` binary can decode.
    Ffmpeg { width: u32, height: u32, frame_count: usize },
}

/// A stream recording: video plus an optional audio track.
#[derive(Clone, Debug)]
pub struct StreamRecording {
    pub video_path: PathBuf,
    pub audio_path: Option<PathBuf>,
    pub duration: f64,
    pub native_fps: f64,
    video: VideoBackend,
    audio: Option<AudioTrack>,
}

impl StreamRecording {
    pub fn from_frames(frames: Vec<Frame>, native_fps: f64, audio: Option<AudioTrack>) -> Self {
        Self {
            video_path: PathBuf::from("<memory>"),
            audio_path: None,
            duration: frames.len() as f64 / native_fps,
            native_fps,
            video: VideoBackend::Memory(frames),
            audio,
        }
    }

    /// Open a recording from disk.
    ///
    /// `video` may be a directory of frame images (then `fps` is required) or a
    /// media file decoded through `ffmpeg`. `audio` may be a WAV file or any
    /// file `ffmpeg` understands; when absent the video container is probed for
    /// an audio stream.
    pub fn open(video: &Path, audio: Option<&Path>, fps: Option<f64>) -> Result<Self> {
        let (backend, native_fps) = if video.is_dir() {
            let fps = fps.ok_or_else(|| Error::Config("image-sequence input needs an explicit `input.fps`".into()))?;
            (VideoBackend::ImageSequence(list_images(video)?), fps)
        } else {
            let probe = ffprobe(video)?;
            (
                VideoBackend::Ffmpeg {
                    width: probe.width,
                    height: probe.height,
                    frame_count: probe.frame_count,
                },
                fps.unwrap_or(probe.fps),
            )
        };
        if !(native_fps > 0.0) {
            return Err(Error::Config(format!("invalid native fps {native_fps}")));
        }
        let frame_count = match &backend {
            VideoBackend::Memory(f) => f.len(),
            VideoBackend::ImageSequence(p) => p.len(),
            VideoBackend::Ffmpeg { frame_count, .. } => *frame_count,
        };

        let audio_track = match audio {
            Some(path) if has_extension(path, &["wav"]) => Some(AudioTrack::read_wav(path)?),
            Some(path) => Some(ffmpeg_audio(path)?),
            None if !video.is_dir() => match ffmpeg_audio(video) {
                Ok(track) if !track.samples.is_empty() => Some(track),
                Ok(_) => None,
                Err(e) => {
                    warn!("no audio decoded from {}: {e}", video.display());
                    None
                }
            },
            None => None,
        };

        Ok(Self {
            video_path: video.to_path_buf(),
            audio_path: audio.map(Path::to_path_buf),
            duration: frame_count as f64 / native_fps,
            native_fps,
            video: backend,
            audio: audio_track,
        })
    }

    pub fn audio(&self) -> Option<&AudioTrack> {
        self.audio.as_ref()
    }

    pub fn audio_sample_rate(&self) -> Option<u32> {
        self.audio.as_ref().map(|a| a.sample_rate)
    }

    pub fn native_frame_count(&self) -> usize {
        match &self.video {
            VideoBackend::Memory(f) => f.len(),
            VideoBackend::ImageSequence(p) => p.len(),
            VideoBackend::Ffmpeg { frame_count, .. } => *frame_count,
        }
    }

    /// Visit the frames of a `rate` Hz resampling in order, with nearest
    /// native-frame selection.
    pub fn for_each_sampled_frame(&self, rate: f64, mut visit: impl FnMut(usize, Frame) -> Result<()>) -> Result<()> {
        if !(rate > 0.0) || rate > self.native_fps + 1e-9 {
            return Err(Error::Config(format!(
                "sampling rate {rate} Hz exceeds native {} fps",
                self.native_fps
            )));
        }
        let count = sampled_frame_count(self.duration, rate);
        let native = self.native_frame_count();
        let index = |i| nearest_native_index(i, rate, self.native_fps, native);
        match &self.video {
            VideoBackend::Memory(frames) => {
                for i in 0..count {
                    visit(i, frames[index(i)].clone())?;
                }
            }
            VideoBackend::ImageSequence(paths) => {
                for i in 0..count {
                    let path = &paths[index(i)];
                    let img = image::open(path).map_err(|e| Error::Decode {
                        path: path.clone(),
                        reason: e.to_string(),
                    })?;
                    visit(i, img.to_rgb32f())?;
                }
            }
            VideoBackend::Ffmpeg { width, height, .. } => {
                let wanted: Vec<usize> = (0..count).map(index).collect();
                ffmpeg_frames(&self.video_path, *width, *height, &wanted, &mut visit)?;
            }
        }
        Ok(())
    }
}

fn has_extension(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| has_extension(p, IMAGE_EXTENSIONS))
        .collect();
    paths.sort();
    debug!("{} frames in {}", paths.len(), dir.display());
    Ok(paths)
}

struct Probe {
    width: u32,
    height: u32,
    fps: f64,
    frame_count: usize,
}

fn decoder_missing(path: &Path, tool: &str, e: std::io::Error) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        reason: format!("could not run `{tool}` ({e}); install ffmpeg or use an image-sequence directory"),
    }
}

fn ffprobe(path: &Path) -> Result<Probe> {
    let out = Command::new("ffprobe")
        .args(["-v", "error", "-select_streams", "v:0", "-count_packets"])
        .args(["-show_entries", "stream=width,height,r_frame_rate,nb_read_packets"])
        .args(["-of", "json"])
        .arg(path)
        .output()
        .map_err(|e| decoder_missing(path, "ffprobe", e))?;
    let fail = |reason: String| Error::Decode {
        path: path.to_path_buf(),
        reason,
    };
    if !out.status.success() {
        return Err(fail(String::from_utf8_lossy(&out.stderr).trim().to_string()));
    }
    let json: serde_json::Value = serde_json::from_slice(&out.stdout)?;
    let stream = &json["streams"][0];
    let rate = stream["r_frame_rate"].as_str().unwrap_or("0/1");
    let fps = match rate.split_once('/') {
        Some((n, d)) => n.parse::<f64>().unwrap_or(0.0) / d.parse::<f64>().unwrap_or(1.0),
        None => rate.parse().unwrap_or(0.0),
    };
    let field = |k: &str| stream[k].as_u64().ok_or_else(|| fail(format!("ffprobe did not report `{k}`")));
    let frame_count = stream["nb_read_packets"]
        .as_str()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fail("ffprobe did not report a frame count".into()))?;
    Ok(Probe {
        width: field("width")? as u32,
        height: field("height")? as u32,
        fps,
        frame_count,
    })
}

fn ffmpeg_frames(path: &Path, width: u32, height: u32, wanted: &[usize], visit: &mut impl FnMut(usize, Frame) -> Result<()>) -> Result<()> {
    let mut child = Command::new("ffmpeg")
        .args(["-v", "error", "-i"])
        .arg(path)
        .args(["-map", "0:v:0", "-f", "rawvideo", "-pix_fmt", "rgb24", "-"])
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| decoder_missing(path, "ffmpeg", e))?;
    let mut stdout = child.stdout.take().expect("piped stdout");
    let frame_bytes = (width * height * 3) as usize;
    let mut buf = vec![0u8; frame_bytes];
    let mut next = 0usize;
    let mut native = 0usize;
    while next < wanted.len() {
        if stdout.read_exact(&mut buf).is_err() {
            break;
        }
        while next < wanted.len() && wanted[next] == native {
            let frame = Frame::from_fn(width, height, |x, y| {
                let o = ((y * width + x) * 3) as usize;
                image::Rgb([buf[o] as f32 / 255.0, buf[o + 1] as f32 / 255.0, buf[o + 2] as f32 / 255.0])
            });
            visit(next, frame)?;
            next += 1;
        }
        native += 1;
    }
    drop(stdout);
    let _ = child.kill();
    let _ = child.wait();
    if next < wanted.len() {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: format!("stream ended after {native} frames, expected {}", wanted[next] + 1),
        });
    }
    Ok(())
}

fn ffmpeg_audio(path: &Path) -> Result<AudioTrack> {
    const RATE: u32 = 16_000;
    let out = Command::new("ffmpeg")
        .args(["-v", "error", "-i"])
        .arg(path)
        .args(["-vn", "-ac", "1", "-ar", &RATE.to_string(), "-f", "f32le", "-"])
        .output()
        .map_err(|e| decoder_missing(path, "ffmpeg", e))?;
    if !out.status.success() {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            reason: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    let samples = out
        .stdout
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok(AudioTrack {
        sample_rate: RATE,
        samples,
    })
}
