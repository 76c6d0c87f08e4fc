//! Late fusion: normalized per-view series feed an LSTM that forecasts the
//! next timestep; its per-step prediction error is the highlight signal.

mod lstm;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::archive::{Archive, ArrayData};
use crate::audio::AudioFeatureSeries;
use crate::error::{Error, Result};
use crate::optim::{Adadelta, AdadeltaState};
use crate::vision::NoveltySeries;

use lstm::Network;

/// Min-max scale to `[0, 1]`; a constant series maps to zeros.
pub fn normalize_series(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Input("cannot normalize an empty series".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("series contains non-finite values".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if range == 0.0 {
        return Ok(vec![0.0; values.len()]);
    }
    Ok(values.iter().map(|v| ((v - lo) / range).clamp(0.0, 1.0)).collect())
}

/// Aligned multi-view matrix, one row per timestep, columns in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FusedSeries {
    pub dims: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub timestamps: Vec<f64>,
}

impl FusedSeries {
    /// Wrap an already-scaled matrix; rows must share one width.
    pub fn from_rows(dims: Vec<String>, values: Vec<Vec<f64>>, timestamps: Vec<f64>) -> Result<Self> {
        if values.iter().any(|r| r.len() != dims.len()) || timestamps.len() != values.len() {
            return Err(Error::Input("fused rows, dims and timestamps disagree in shape".into()));
        }
        Ok(Self { dims, values, timestamps })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn width(&self) -> usize {
        self.dims.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

/// Stack the present views as columns `(face, game, audio_pc1..k)`, truncate
/// to the shortest, and normalize each column.
pub fn assemble(face: Option<&NoveltySeries>, game: Option<&NoveltySeries>, audio: Option<&AudioFeatureSeries>) -> Result<FusedSeries> {
    let lengths = [
        face.map(NoveltySeries::len),
        game.map(NoveltySeries::len),
        audio.map(AudioFeatureSeries::len),
    ];
    let t = lengths
        .into_iter()
        .flatten()
        .min()
        .ok_or_else(|| Error::Pipeline("no views to fuse".into()))?;
    let mut dims = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut timestamps = None;
    if let Some(f) = face {
        dims.push("face_error".to_string());
        columns.push(f.values[..t].to_vec());
        timestamps.get_or_insert_with(|| f.timestamps[..t].to_vec());
    }
    if let Some(g) = game {
        dims.push("game_error".to_string());
        columns.push(g.values[..t].to_vec());
        timestamps.get_or_insert_with(|| g.timestamps[..t].to_vec());
    }
    if let Some(a) = audio {
        for j in 0..a.k() {
            dims.push(format!("audio_pc{}", j + 1));
            columns.push(a.values[..t].iter().map(|v| v[j]).collect());
        }
        timestamps.get_or_insert_with(|| a.timestamps[..t].to_vec());
    }
    if t == 0 {
        return Ok(FusedSeries {
            dims,
            values: Vec::new(),
            timestamps: Vec::new(),
        });
    }
    let columns = columns.iter().map(|c| normalize_series(c)).collect::<Result<Vec<_>>>()?;
    let values = (0..t).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    Ok(FusedSeries {
        dims,
        values,
        timestamps: timestamps.unwrap_or_default(),
    })
}

/// Forecaster architecture.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecasterSpec {
    pub inputs: usize,
    pub lstm_layers: usize,
    pub hidden_units: usize,
}

impl ForecasterSpec {
    /// Two LSTM layers as wide as the input.
    pub fn for_width(inputs: usize) -> Self {
        Self {
            inputs,
            lstm_layers: 2,
            hidden_units: inputs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecasterTraining {
    pub epochs: usize,
    /// Steps per truncated backpropagation-through-time window.
    pub bptt_window: usize,
    pub seed: u64,
    #[serde(default)]
    pub optimizer: Adadelta,
}

impl Default for ForecasterTraining {
    fn default() -> Self {
        Self {
            epochs: 50,
            bptt_window: 100,
            seed: 0,
            optimizer: Adadelta::default(),
        }
    }
}

/// A trained next-step forecaster.
#[derive(Clone, Debug, PartialEq)]
pub struct Forecaster {
    pub spec: ForecasterSpec,
    net: Network,
    /// Mean per-step training error of each epoch.
    pub training_log: Vec<f64>,
}

/// Per-timestep prediction error `E`, stamped with the predicted frame's time.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionErrorSeries {
    pub values: Vec<f64>,
    pub timestamps: Vec<f64>,
}

impl PredictionErrorSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Train the forecaster to predict row `t + 1` from rows `..=t`.
pub fn train_forecaster(series: &FusedSeries, spec: &ForecasterSpec, training: &ForecasterTraining) -> Result<Forecaster> {
    if series.len() < 2 {
        return Err(Error::Input(format!("forecaster needs at least 2 timesteps, got {}", series.len())));
    }
    if spec.inputs != series.width() {
        return Err(Error::Input(format!(
            "series has {} columns, forecaster expects {}",
            series.width(),
            spec.inputs
        )));
    }
    if spec.lstm_layers == 0 || spec.hidden_units == 0 || training.bptt_window == 0 {
        return Err(Error::Config("LSTM layers, hidden units and BPTT window must be positive".into()));
    }
    let mut net = Network::new(spec.inputs, spec.hidden_units, spec.lstm_layers, spec.inputs, training.seed);
    let mut states: Vec<AdadeltaState<f64>> = net.params_mut().iter().map(|p| AdadeltaState::new(p.len())).collect();
    let inputs = &series.values[..series.len() - 1];
    let targets = &series.values[1..];
    let mut log = Vec::with_capacity(training.epochs);
    for epoch in 0..training.epochs {
        let mut state = net.zero_state();
        let mut total = 0.0;
        for (x, y) in inputs.chunks(training.bptt_window).zip(targets.chunks(training.bptt_window)) {
            let mut grads = net.zero_grads();
            let errors = net.train_chunk(x, y, &mut state, &mut grads);
            total += errors.iter().sum::<f64>();
            if !total.is_finite() {
                return Err(Error::Divergence { epoch, loss: total });
            }
            let grads: Vec<Vec<f64>> = grads.flat().into_iter().cloned().collect();
            for ((p, g), s) in net.params_mut().into_iter().zip(&grads).zip(states.iter_mut()) {
                training.optimizer.step(s, p, g);
            }
        }
        let mean = total / inputs.len() as f64;
        debug!("forecaster epoch {epoch}: loss {mean:.6}");
        log.push(mean);
    }
    Ok(Forecaster {
        spec: spec.clone(),
        net,
        training_log: log,
    })
}

impl Forecaster {
    /// Next-step predictions for every prefix of `rows`, state carried through.
    pub fn predict_sequence(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut state = self.net.zero_state();
        rows.iter().map(|x| self.net.predict(x, &mut state)).collect()
    }

    pub fn to_archive(&self) -> Archive {
        let mut archive = Archive {
            metadata: serde_json::json!({ "model": "forecaster", "spec": self.spec }),
            ..Default::default()
        };
        for (l, layer) in self.net.layers.iter().enumerate() {
            let cols = layer.inputs + layer.hidden;
            archive.push(
                format!("lstm{}.weight", l + 1),
                vec![4 * layer.hidden, cols],
                ArrayData::F64(layer.weight.clone()),
            );
            archive.push(
                format!("lstm{}.bias", l + 1),
                vec![4 * layer.hidden],
                ArrayData::F64(layer.bias.clone()),
            );
        }
        let head = &self.net.head;
        archive.push("dense.weight", vec![head.outputs, head.inputs], ArrayData::F64(head.weight.clone()));
        archive.push("dense.bias", vec![head.outputs], ArrayData::F64(head.bias.clone()));
        archive
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let spec: ForecasterSpec = serde_json::from_value(archive.metadata["spec"].clone())
            .map_err(|e| Error::Parse(format!("archive lacks a forecaster spec: {e}")))?;
        let mut net = Network::new(spec.inputs, spec.hidden_units, spec.lstm_layers, spec.inputs, 0);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let cols = layer.inputs + layer.hidden;
            layer
                .weight
                .copy_from_slice(archive.f64(&format!("lstm{}.weight", l + 1), &[4 * layer.hidden, cols])?);
            layer
                .bias
                .copy_from_slice(archive.f64(&format!("lstm{}.bias", l + 1), &[4 * layer.hidden])?);
        }
        let (o, i) = (net.head.outputs, net.head.inputs);
        net.head.weight.copy_from_slice(archive.f64("dense.weight", &[o, i])?);
        net.head.bias.copy_from_slice(archive.f64("dense.bias", &[o])?);
        Ok(Self {
            spec,
            net,
            training_log: Vec::new(),
        })
    }
}

/// `E_t = ‖ŷ(t+1) − y(t+1)‖² / D` for `t` in `0..T−1`.
pub fn prediction_errors(forecaster: &Forecaster, series: &FusedSeries) -> Result<PredictionErrorSeries> {
    if series.len() < 2 {
        return Err(Error::Input(format!("need at least 2 timesteps, got {}", series.len())));
    }
    if series.width() != forecaster.spec.inputs {
        return Err(Error::Input(format!(
            "series has {} columns, forecaster expects {}",
            series.width(),
            forecaster.spec.inputs
        )));
    }
    let predictions = forecaster.predict_sequence(&series.values[..series.len() - 1]);
    Ok(PredictionErrorSeries {
        values: predictions.iter().zip(&series.values[1..]).map(|(p, y)| step_error(p, y)).collect(),
        timestamps: series.timestamps[1..].to_vec(),
    })
}

/// Mean squared difference across dimensions.
pub fn step_error(prediction: &[f64], observed: &[f64]) -> f64 {
    prediction.iter().zip(observed).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / observed.len().max(1) as f64
}
