//! End-to-end orchestration: ingest, per-view novelty, fusion and clipping,
//! persisting every stage's output into the run directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, ArrayData};
use crate::audio::{extract_features, AudioFeatureSeries, PcaModel};
use crate::clipper::{detect_clips, ApexSet};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::evalbench::{generate_synthetic_stream, SyntheticStream, SyntheticStreamSpec};
use crate::fusion::{
    assemble, prediction_errors, train_forecaster, ForecasterSpec, ForecasterTraining, FusedSeries, PredictionErrorSeries,
};
use crate::ingest::{align_timelines, sample_views, window_audio, AudioWindowSeries, FrameSeries, StreamRecording, View};
use crate::persist::{ClipManifest, ManifestHeader, SeriesTable};
use crate::vision::{build_autoencoder, reconstruction_errors, train_autoencoder, NoveltySeries, TrainConfig};

/// Decoded views of one video, before alignment.
#[derive(Clone, Debug)]
pub struct ViewInputs {
    pub video_id: String,
    pub duration: f64,
    pub face: Option<FrameSeries>,
    pub game: Option<FrameSeries>,
    pub audio: Option<AudioWindowSeries>,
}

impl ViewInputs {
    pub fn from_synthetic(stream: &SyntheticStream, video_id: impl Into<String>) -> Self {
        Self {
            video_id: video_id.into(),
            duration: stream.spec.duration_s,
            face: Some(stream.face.clone()),
            game: Some(stream.game.clone()),
            audio: Some(stream.audio.clone()),
        }
    }

    /// Drop the views not listed in `modalities`.
    pub fn restricted(&self, modalities: &[View]) -> Self {
        Self {
            video_id: self.video_id.clone(),
            duration: self.duration,
            face: self.face.clone().filter(|_| modalities.contains(&View::Face)),
            game: self.game.clone().filter(|_| modalities.contains(&View::Game)),
            audio: self.audio.clone().filter(|_| modalities.contains(&View::Audio)),
        }
    }
}

pub fn load_synthetic_spec(path: &Path) -> Result<SyntheticStreamSpec> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
}

/// Decode the configured recording (or render the configured synthetic stream).
pub fn load_inputs(config: &PipelineConfig) -> Result<ViewInputs> {
    let stem = |p: &Path| {
        p.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "video".into())
    };
    if let Some(path) = &config.input.synthetic {
        let stream = generate_synthetic_stream(&load_synthetic_spec(path)?)?;
        let id = config.input.video_id.clone().unwrap_or_else(|| stem(path));
        return Ok(ViewInputs::from_synthetic(&stream, id).restricted(&config.modalities));
    }
    let video = config
        .input
        .video
        .as_ref()
        .ok_or_else(|| Error::Config("no input.video configured".into()))?;
    let recording = StreamRecording::open(video, config.input.audio.as_deref(), config.input.fps)?;
    let mut inputs = ViewInputs {
        video_id: config.input.video_id.clone().unwrap_or_else(|| stem(video)),
        duration: recording.duration,
        face: None,
        game: None,
        audio: None,
    };
    if config.uses(View::Face) || config.uses(View::Game) {
        let region = config
            .ingest
            .region
            .ok_or_else(|| Error::Config("ingest.region is required for the face and game views".into()))?;
        let (face, game) = sample_views(&recording, config.ingest.rate, &region, config.ingest.frame_size)?;
        inputs.face = config.uses(View::Face).then_some(face);
        inputs.game = config.uses(View::Game).then_some(game);
    }
    if config.uses(View::Audio) {
        inputs.audio = Some(window_audio(recording.audio())?);
    }
    Ok(inputs)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Self-description of a run directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software: String,
    pub version: String,
    pub video_id: String,
    pub seed: u64,
    pub status: String,
    pub config: PipelineConfig,
    pub stages: Vec<StageTiming>,
    pub artifacts: Vec<String>,
    pub clips: usize,
}

/// In-memory results of a completed run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub clips: ClipManifest,
    pub apexes: ApexSet,
    pub face: Option<NoveltySeries>,
    pub game: Option<NoveltySeries>,
    pub audio: Option<AudioFeatureSeries>,
    pub fused: FusedSeries,
    pub errors: PredictionErrorSeries,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const CLIPS_FILE: &str = "clips.jsonl";
pub const ERROR_FILE: &str = "prediction_error.csv";
pub const FUSED_FILE: &str = "fused.csv";
pub const AUDIO_FILE: &str = "audio_features.csv";

pub fn novelty_file(view: View) -> String {
    format!("{view}_error.csv")
}

struct Recorder {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Recorder {
    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        info!("stage {name}");
        let out = f(self).map_err(|e| e.in_stage(name));
        self.manifest.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if let Err(e) = &out {
            self.manifest.status = format!("failed: {e}");
            if let Err(write) = self.write_manifest() {
                log::error!("could not record the failed run: {write}");
            }
        }
        out
    }

    fn write_manifest(&self) -> Result<()> {
        let mut manifest = self.manifest.clone();
        manifest.artifacts.push(MANIFEST_FILE.to_string());
        std::fs::write(self.dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

fn pca_archive(model: &PcaModel) -> Archive {
    let mut archive = Archive {
        metadata: serde_json::json!({
            "model": "pca",
            "explained_variance": model.explained_variance,
            "total_variance": model.total_variance,
        }),
        ..Default::default()
    };
    archive.push("mean", vec![model.dim()], ArrayData::F64(model.mean.clone()));
    archive.push(
        "components",
        vec![model.k(), model.dim()],
        ArrayData::F64(model.components.concat()),
    );
    archive
}

fn vision_stage(rec: &mut Recorder, config: &PipelineConfig, frames: &FrameSeries, seed: u64) -> Result<NoveltySeries> {
    let view = frames.view;
    let (w, h) = frames.frame_dimensions().ok_or_else(|| Error::Input(format!("no {view} frames")))?;
    if w != h {
        return Err(Error::Input(format!("{view} frames are {w}×{h}, expected square")));
    }
    let spec = config.vision.spec(w);
    let mut model = build_autoencoder(&spec, seed)?;
    let weights = match view {
        View::Face => &config.vision.face_encoder_weights,
        _ => &config.vision.game_encoder_weights,
    };
    if let Some(path) = weights {
        model.load_encoder(&Archive::load(path)?)?;
    }
    let train = TrainConfig {
        epochs: config.vision.epochs,
        batch_size: config.vision.batch_size,
        freeze_encoder: config.vision.freeze_encoder,
        seed,
        ..Default::default()
    };
    let trained = train_autoencoder(model, &frames.frames, &train)?;
    trained.model.to_archive().save(&rec.path(&format!("{view}_autoencoder.hlna")))?;
    let series = reconstruction_errors(&trained.model, frames)?;
    SeriesTable::single("reconstruction_error", &series.timestamps, &series.values).save(&rec.path(&novelty_file(view)))?;
    Ok(series)
}

/// Run every stage on already-decoded inputs, writing into `config.out`.
pub fn run_on_inputs(config: &PipelineConfig, inputs: ViewInputs) -> Result<RunOutcome> {
    let dir = config.out.clone();
    std::fs::create_dir_all(&dir)?;
    let mut rec = Recorder {
        dir: dir.clone(),
        manifest: RunManifest {
            software: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            video_id: inputs.video_id.clone(),
            seed: config.seed,
            status: "running".into(),
            config: config.clone(),
            stages: Vec::new(),
            artifacts: Vec::new(),
            clips: 0,
        },
    };
    let snapshot = config.to_toml()?;
    std::fs::write(rec.path(CONFIG_FILE), snapshot)?;

    let inputs = inputs.restricted(&config.modalities);
    let ViewInputs {
        video_id,
        duration,
        mut face,
        mut game,
        mut audio,
    } = inputs;
    rec.stage("align", |_| {
        let range = align_timelines(face.as_ref(), game.as_ref(), audio.as_ref())?;
        face.iter_mut().for_each(|f| f.truncate(range.end));
        game.iter_mut().for_each(|g| g.truncate(range.end));
        audio.iter_mut().for_each(|a| a.truncate(range.end));
        info!("aligned {} timesteps", range.end);
        Ok(())
    })?;

    let face_err = match &face {
        Some(frames) => Some(rec.stage("vision.face", |r| vision_stage(r, config, frames, config.seed))?),
        None => None,
    };
    let game_err = match &game {
        Some(frames) => Some(rec.stage("vision.game", |r| vision_stage(r, config, frames, config.seed.wrapping_add(1)))?),
        None => None,
    };
    let audio_features = match &audio {
        Some(windows) => Some(rec.stage("audio", |r| {
            let (features, pca) = extract_features(windows, &config.audio.band(), config.audio.pca_k)?;
            let columns = (1..=features.k()).map(|j| format!("pc{j}")).collect();
            SeriesTable::new(columns, features.timestamps.clone(), features.values.clone()).save(&r.path(AUDIO_FILE))?;
            pca_archive(&pca).save(&r.path("audio_pca.hlna"))?;
            Ok(features)
        })?),
        None => None,
    };

    let (fused, errors) = rec.stage("fusion", |r| {
        let fused = assemble(face_err.as_ref(), game_err.as_ref(), audio_features.as_ref())?;
        SeriesTable::new(fused.dims.clone(), fused.timestamps.clone(), fused.values.clone()).save(&r.path(FUSED_FILE))?;
        let spec = ForecasterSpec {
            inputs: fused.width(),
            lstm_layers: config.fusion.lstm_layers,
            hidden_units: config.fusion.hidden_units.unwrap_or(fused.width()),
        };
        let training = ForecasterTraining {
            epochs: config.fusion.epochs,
            bptt_window: config.fusion.bptt_window,
            seed: config.seed.wrapping_add(2),
            ..Default::default()
        };
        let forecaster = train_forecaster(&fused, &spec, &training)?;
        forecaster.to_archive().save(&r.path("forecaster.hlna"))?;
        let errors = prediction_errors(&forecaster, &fused)?;
        SeriesTable::single("prediction_error", &errors.timestamps, &errors.values).save(&r.path(ERROR_FILE))?;
        Ok((fused, errors))
    })?;

    let (apexes, clips) = rec.stage("clipper", |r| {
        let (apexes, clips) = detect_clips(&errors, duration, &config.clipper)?;
        let manifest = ClipManifest {
            header: ManifestHeader::new(video_id.clone(), duration, config.seed, config.clipper.fraction),
            clips,
        };
        manifest.save(&r.path(CLIPS_FILE))?;
        Ok((apexes, manifest))
    })?;

    rec.manifest.status = "ok".into();
    rec.manifest.clips = clips.clips.len();
    rec.write_manifest()?;
    let mut manifest = rec.manifest;
    manifest.artifacts.push(MANIFEST_FILE.into());
    info!("{} clips written to {}", clips.clips.len(), dir.display());
    Ok(RunOutcome {
        dir,
        manifest,
        clips,
        apexes,
        face: face_err,
        game: game_err,
        audio: audio_features,
        fused,
        errors,
    })
}

/// Validate the config, load the inputs and run every stage.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunOutcome> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let inputs = load_inputs(config).map_err(|e| e.in_stage("ingest"))?;
    run_on_inputs(config, inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Architecture;
    use crate::evalbench::PlantedEvent;

    fn tiny(out: &Path) -> (PipelineConfig, ViewInputs) {
        let spec = SyntheticStreamSpec {
            duration_s: 30.0,
            frame_size: 16,
            events: vec![PlantedEvent {
                time_s: 15.0,
                views: View::ALL.to_vec(),
                magnitude: 1.0,
            }],
            seed: 4,
            ..Default::default()
        };
        let stream = generate_synthetic_stream(&spec).unwrap();
        let mut config = PipelineConfig {
            out: out.to_path_buf(),
            seed: 4,
            ..Default::default()
        };
        config.vision.architecture = Architecture::Compact;
        config.vision.epochs = 2;
        config.fusion.epochs = 3;
        config.clipper.fraction = 0.01;
        (config, ViewInputs::from_synthetic(&stream, "tiny"))
    }

    #[test]
    fn full_run_persists_every_stage() {
        let dir = tempfile::tempdir().unwrap();
        let (config, inputs) = tiny(dir.path());
        let run = run_on_inputs(&config, inputs).unwrap();
        assert!(run.manifest.artifacts.len() >= 6);
        for a in &run.manifest.artifacts {
            assert!(dir.path().join(a).exists(), "{a} missing");
        }
        assert!(!run.clips.clips.is_empty());
        assert_eq!(run.errors.len(), run.fused.len() - 1);
        let table = SeriesTable::load(&dir.path().join(ERROR_FILE)).unwrap();
        assert_eq!(table.column(0), run.errors.values);
        assert_eq!(ClipManifest::load(&dir.path().join(CLIPS_FILE)).unwrap(), run.clips);
        let snapshot = PipelineConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        assert_eq!(snapshot, config);
    }

    #[test]
    fn face_only_run_has_no_other_views() {
        let dir = tempfile::tempdir().unwrap();
        let (mut config, inputs) = tiny(dir.path());
        config.modalities = vec![View::Face];
        let run = run_on_inputs(&config, inputs).unwrap();
        assert!(run.manifest.artifacts.iter().all(|a| !a.contains("game") && !a.contains("audio")));
        assert_eq!(run.fused.dims, ["face_error"]);
    }

    #[test]
    fn stage_failures_are_tagged() {
        let dir = tempfile::tempdir().unwrap();
        let (mut config, inputs) = tiny(dir.path());
        config.audio.pca_k = 10_000;
        let err = run_on_inputs(&config, inputs).unwrap_err();
        assert!(matches!(&err, Error::Stage { stage, .. } if stage == "audio"), "{err}");
        let manifest: RunManifest = serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert!(manifest.status.starts_with("failed"));
        assert!(manifest.artifacts.iter().any(|a| a == "face_error.csv"));
        let missing = PipelineConfig {
            out: dir.path().into(),
            ..Default::default()
        };
        assert!(matches!(run_pipeline(&missing), Err(Error::Stage { stage, .. }) if stage == "config"));
    }
}
